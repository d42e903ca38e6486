/** Benchmark preprocessing: missing-value removal, [0,1] normalization of
 * numeric columns, one-hot encoding of categoricals (two-valued ones become
 * single binary features), and a seeded stratified train/test split. */

import { mulberry32, shuffle } from './random.js';
import type { DatasetSpec, FeatureDoc, Preprocessed, RawTable } from './types.js';

export function preprocess(table: RawTable, spec: DatasetSpec): Preprocessed {
  const colIndex = new Map(table.columns.map((c, i) => [c, i]));
  const declared = [
    ...spec.numericColumns,
    ...spec.categoricalColumns,
    spec.labelColumn,
  ];
  for (const col of declared) {
    if (!colIndex.has(col)) {
      throw new Error(`declared column ${col} missing from dataset ${spec.name}`);
    }
  }
  if (
    spec.sensitiveColumn !== spec.labelColumn &&
    !colIndex.has(spec.sensitiveColumn)
  ) {
    throw new Error(`sensitive column ${spec.sensitiveColumn} missing from dataset ${spec.name}`);
  }

  const missing = spec.missingMarker ?? '?';
  const droppedFeatures: string[] = [];

  // Features where more than half the values are missing are unusable and
  // dropped; afterwards any instance still containing a missing value goes.
  const usableColumns = new Set<string>([...spec.numericColumns, ...spec.categoricalColumns]);
  for (const col of usableColumns) {
    const idx = colIndex.get(col)!;
    const missingCount = table.rows.reduce(
      (acc, row) => acc + (row[idx].trim() === missing ? 1 : 0),
      0
    );
    if (missingCount > table.rows.length / 2) {
      usableColumns.delete(col);
      droppedFeatures.push(col);
    }
  }
  const rows = table.rows.filter((row) =>
    [...usableColumns].every((col) => row[colIndex.get(col)!].trim() !== missing)
  );
  if (rows.length === 0) throw new Error(`dataset ${spec.name} has no complete instances`);

  // Labels: the declared positive value gets id 1.
  const labelIdx = colIndex.get(spec.labelColumn)!;
  const labelValues = [...new Set(rows.map((r) => r[labelIdx].trim()))].sort();
  if (labelValues.length !== 2) {
    throw new Error(
      `dataset ${spec.name} must be binary, found labels: ${labelValues.join(', ')}`
    );
  }
  if (!labelValues.includes(spec.positiveLabel)) {
    throw new Error(`positive label ${spec.positiveLabel} not present in ${spec.name}`);
  }
  const negative = labelValues.find((v) => v !== spec.positiveLabel)!;
  const rename = (v: string) => spec.labelNames?.[v] ?? v;
  const labels: [string, string] = [rename(negative), rename(spec.positiveLabel)];
  const y: number[] = rows.map((r) => (r[labelIdx].trim() === spec.positiveLabel ? 1 : 0));
  const positiveFraction = y.reduce((a, b) => a + b, 0) / y.length;

  // Assemble encoded feature columns. The sensitive column is encoded first
  // so it keeps a stable, easy-to-reference position.
  const features: FeatureDoc[] = [];
  const columns: number[][] = [];
  const normalization: Record<string, { min: number; max: number }> = {};
  const binaryEncodings: Record<string, Record<string, number>> = {};

  const orderedSource = [
    spec.sensitiveColumn,
    ...spec.categoricalColumns.filter((c) => c !== spec.sensitiveColumn),
    ...spec.numericColumns.filter((c) => c !== spec.sensitiveColumn),
  ].filter((c) => usableColumns.has(c));

  for (const col of orderedSource) {
    const idx = colIndex.get(col)!;
    const cells = rows.map((r) => r[idx].trim());
    if (spec.numericColumns.includes(col)) {
      const values = cells.map((c) => {
        const v = Number(c);
        if (!Number.isFinite(v)) {
          throw new Error(`non-numeric value ${c} in numeric column ${col} of ${spec.name}`);
        }
        return v;
      });
      const min = Math.min(...values);
      const max = Math.max(...values);
      if (min === max) {
        droppedFeatures.push(col);
        continue; // normalization undefined for a constant column
      }
      normalization[col] = { min, max };
      features.push({ id: features.length, name: col, kind: 'numeric', group: null });
      columns.push(values.map((v) => (v - min) / (max - min)));
    } else {
      const values = [...new Set(cells)].sort();
      if (values.length < 2) {
        droppedFeatures.push(col);
        continue;
      }
      if (values.length === 2) {
        const encoding = { [values[0]]: 0, [values[1]]: 1 };
        binaryEncodings[col] = encoding;
        features.push({ id: features.length, name: col, kind: 'binary', group: null });
        columns.push(cells.map((c) => encoding[c]));
      } else {
        for (const value of values) {
          features.push({
            id: features.length,
            name: `${col}_${value}`,
            kind: 'onehot',
            group: col,
          });
          columns.push(cells.map((c) => (c === value ? 1 : 0)));
        }
      }
    }
  }

  const sensitiveFeature = features.find(
    (f) => f.name === spec.sensitiveColumn || f.group === spec.sensitiveColumn
  );
  if (!sensitiveFeature) {
    throw new Error(`sensitive column ${spec.sensitiveColumn} was dropped during preprocessing`);
  }

  const X = rows.map((_, r) => columns.map((col) => col[r]));

  // Stratified split: shuffle each class with the split seed, then take the
  // first splitRatio share of each for training.
  const rng = mulberry32(spec.splitSeed);
  const trainIdx: number[] = [];
  const testIdx: number[] = [];
  for (const cls of [0, 1]) {
    const members = shuffle(
      y.map((label, i) => (label === cls ? i : -1)).filter((i) => i >= 0),
      rng
    );
    const cut = Math.round(members.length * spec.splitRatio);
    trainIdx.push(...members.slice(0, cut));
    testIdx.push(...members.slice(cut));
  }
  trainIdx.sort((a, b) => a - b);
  testIdx.sort((a, b) => a - b);

  return {
    features,
    labels,
    train: trainIdx.map((i) => X[i]),
    trainLabels: trainIdx.map((i) => y[i]),
    test: testIdx.map((i) => X[i]),
    testLabels: testIdx.map((i) => y[i]),
    sensitiveFeature: spec.sensitiveColumn,
    stats: {
      instances: rows.length,
      positiveFraction,
      droppedFeatures,
      normalization,
      binaryEncodings,
    },
  };
}
