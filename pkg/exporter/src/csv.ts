/** Minimal CSV handling for the plain numeric tables we exchange with the
 * verifier (no quoting needed: names and numbers only). */

export function serializeCsv(header: string[], rows: (number | string)[][]): string {
  const lines = [header.join(',')];
  for (const row of rows) {
    lines.push(row.map(formatCell).join(','));
  }
  return lines.join('\n') + '\n';
}

function formatCell(v: number | string): string {
  if (typeof v === 'string') return v;
  return Number.isInteger(v) ? String(v) : String(v);
}

export function parseCsv(text: string): { header: string[]; rows: string[][] } {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error('empty CSV');
  const header = lines[0].split(',');
  const rows = lines.slice(1).map((l) => l.split(','));
  return { header, rows };
}

/** Dataset CSV in the verifier's schema: feature columns in metadata order,
 * optionally a final integer `label` column. */
export function datasetCsv(
  featureNames: string[],
  X: number[][],
  labels?: number[]
): string {
  const header = labels ? [...featureNames, 'label'] : featureNames;
  const rows = X.map((row, i) => (labels ? [...row, labels[i]] : [...row]));
  return serializeCsv(header, rows);
}
