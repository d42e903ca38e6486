#!/usr/bin/env node
/** Exporter command line.
 *
 *   fetch  --dataset german|adult [--out-dir data/raw]
 *   export --dataset german|adult|fixture [--raw-dir data/raw]
 *          [--trees 13] [--depth 6] [--seed 1] [--out-dir out] [--no-verify]
 *
 * `export` writes model.json, metadata.json, train.csv and test.csv in the
 * verifier's formats, and refuses to ship a model whose exported document
 * disagrees with the trained forest on any test row.
 */

import { mkdirSync, readFileSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';

import { datasetCsv } from './csv.js';
import { checkAgreement, evalModelDoc, metadataDoc, toModelDoc } from './export.js';
import { trainForest, treeDepth } from './forest.js';
import { preprocess } from './preprocess.js';
import { predictViaPrimary, primaryAvailable } from './primary.js';
import {
  ADULT_URLS,
  GERMAN_URL,
  adultSpec,
  fixtureRaw,
  fixtureSpec,
  germanSpec,
  loadAdult,
  loadGerman,
} from './specs.js';
import type { DatasetSpec, RawTable } from './types.js';

interface Args {
  command: string;
  options: Record<string, string | boolean>;
}

function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv;
  const options: Record<string, string | boolean> = {};
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i];
    if (!arg.startsWith('--')) throw new Error(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    if (i + 1 < rest.length && !rest[i + 1].startsWith('--')) {
      options[key] = rest[++i];
    } else {
      options[key] = true;
    }
  }
  return { command: command ?? 'help', options };
}

async function fetchDataset(dataset: string, outDir: string): Promise<void> {
  mkdirSync(outDir, { recursive: true });
  const targets =
    dataset === 'german'
      ? [[GERMAN_URL, 'german.data']]
      : dataset === 'adult'
        ? ADULT_URLS.map((u) => [u, u.split('/').pop()!])
        : null;
  if (!targets) throw new Error(`unknown dataset ${dataset}`);
  for (const [url, name] of targets) {
    process.stderr.write(`fetching ${url}\n`);
    const resp = await fetch(url);
    if (!resp.ok) throw new Error(`download failed (${resp.status}) for ${url}`);
    const text = await resp.text();
    writeFileSync(join(outDir, name), text);
    process.stderr.write(`wrote ${join(outDir, name)} (${text.length} bytes)\n`);
  }
}

export function loadRaw(dataset: string, rawDir: string): { table: RawTable; spec: DatasetSpec } {
  if (dataset === 'german') {
    const text = readFileSync(join(rawDir, 'german.data'), 'utf8');
    return { table: loadGerman(text), spec: germanSpec };
  }
  if (dataset === 'adult') {
    const data = readFileSync(join(rawDir, 'adult.data'), 'utf8');
    const test = readFileSync(join(rawDir, 'adult.test'), 'utf8');
    return { table: loadAdult(data, test), spec: adultSpec };
  }
  if (dataset === 'fixture') {
    return { table: fixtureRaw(), spec: fixtureSpec };
  }
  throw new Error(`unknown dataset ${dataset}`);
}

export interface ExportResult {
  modelPath: string;
  metadataPath: string;
  trainPath: string;
  testPath: string;
  instances: number;
  positiveFraction: number;
  agreementChecked: number;
}

export function exportDataset(
  dataset: string,
  rawDir: string,
  outDir: string,
  nTrees: number,
  maxDepth: number,
  seed: number,
  verifyWithPrimary: boolean
): ExportResult {
  const { table, spec } = loadRaw(dataset, rawDir);
  const prep = preprocess(table, spec);
  if (prep.stats.droppedFeatures.length) {
    process.stderr.write(
      `warning: dropped features: ${prep.stats.droppedFeatures.join(', ')}\n`
    );
  }

  const forest = trainForest(prep.train, prep.trainLabels, 2, {
    nTrees,
    maxDepth,
    seed,
  });
  for (const tree of forest.trees) {
    if (treeDepth(tree) > maxDepth) throw new Error('trained tree exceeds depth bound');
  }
  const doc = toModelDoc(forest, prep.features, prep.labels);

  // Gate 1: the exported document, evaluated structurally, must reproduce
  // the forest's predictions on every test row.
  const local = checkAgreement(forest, (x) => evalModelDoc(doc, x), prep.test);
  if (local.mismatches > 0) {
    throw new Error(
      `export aborted: ${local.mismatches}/${local.checked} structural prediction mismatches`
    );
  }

  mkdirSync(outDir, { recursive: true });
  const modelPath = join(outDir, `${dataset}_model.json`);
  const metadataPath = join(outDir, `${dataset}_metadata.json`);
  const trainPath = join(outDir, `${dataset}_train.csv`);
  const testPath = join(outDir, `${dataset}_test.csv`);
  writeFileSync(modelPath, JSON.stringify(doc, null, 2) + '\n');
  writeFileSync(
    metadataPath,
    JSON.stringify(metadataDoc(dataset, prep, forest), null, 2) + '\n'
  );
  const names = prep.features.map((f) => f.name);
  writeFileSync(trainPath, datasetCsv(names, prep.train, prep.trainLabels));
  writeFileSync(testPath, datasetCsv(names, prep.test, prep.testLabels));

  // Gate 2: round trip through the verifier itself (parse + predict).
  if (verifyWithPrimary) {
    const predPath = join(outDir, `${dataset}_pred.json`);
    const got = predictViaPrimary(modelPath, testPath, predPath);
    let mismatches = 0;
    prep.test.forEach((x, i) => {
      if (got[i] !== evalModelDoc(doc, x)) mismatches++;
    });
    if (mismatches > 0) {
      throw new Error(
        `export aborted: verifier disagreed on ${mismatches}/${prep.test.length} test rows`
      );
    }
  }

  return {
    modelPath,
    metadataPath,
    trainPath,
    testPath,
    instances: prep.stats.instances,
    positiveFraction: prep.stats.positiveFraction,
    agreementChecked: prep.test.length,
  };
}

async function main(): Promise<void> {
  const { command, options } = parseArgs(process.argv.slice(2));
  if (command === 'fetch') {
    await fetchDataset(String(options.dataset ?? ''), String(options['out-dir'] ?? 'data/raw'));
    return;
  }
  if (command === 'export') {
    const dataset = String(options.dataset ?? 'fixture');
    const verify = !options['no-verify'];
    if (verify && !primaryAvailable()) {
      throw new Error(
        'verifier CLI not reachable (set TREEFAIR_CMD or pass --no-verify)'
      );
    }
    const result = exportDataset(
      dataset,
      String(options['raw-dir'] ?? 'data/raw'),
      String(options['out-dir'] ?? 'out'),
      Number(options.trees ?? 13),
      Number(options.depth ?? 6),
      Number(options.seed ?? 1),
      verify
    );
    process.stdout.write(
      JSON.stringify(
        {
          dataset,
          instances: result.instances,
          positive_fraction: result.positiveFraction,
          agreement_rows: result.agreementChecked,
          model: result.modelPath,
        },
        null,
        2
      ) + '\n'
    );
    return;
  }
  process.stderr.write(
    'usage: treefair-export fetch --dataset german|adult [--out-dir DIR]\n' +
      '       treefair-export export --dataset german|adult|fixture [--raw-dir DIR]\n' +
      '            [--trees N] [--depth N] [--seed N] [--out-dir DIR] [--no-verify]\n'
  );
  process.exit(command === 'help' ? 0 : 2);
}

const isMain = process.argv[1] && import.meta.url.endsWith(process.argv[1].split('/').pop()!);
if (isMain) {
  main().catch((err) => {
    process.stderr.write(`error: ${err.message}\n`);
    process.exit(1);
  });
}
