/** Round-trip agreement through the verifier: export a model document, have
 * the verifier parse it and predict, and require bit-exact agreement with
 * the trained forest. Benchmark-dataset variants run only when the raw data
 * files are present (see the fetch command). */

import { readFileSync } from 'node:fs';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { exportDataset, loadRaw } from '../src/cli.js';
import { evalModelDoc } from '../src/export.js';
import { preprocess } from '../src/preprocess.js';
import { predictViaPrimary, primaryAvailable } from '../src/primary.js';
import { rawDataPresent, rawDir, tempDir } from './helpers.js';

const havePrimary = primaryAvailable();
const haveGerman = rawDataPresent('german.data');
const haveAdult = rawDataPresent('adult.data', 'adult.test');

describe.skipIf(!havePrimary)('fixture round trip', () => {
  it('verifier predictions agree on 100% of test rows (13 trees, depth 6)', { timeout: 300_000 }, () => {
    const out = tempDir('fx-rt-');
    // exportDataset aborts on any disagreement; re-check explicitly anyway
    const result = exportDataset('fixture', '.', out, 13, 6, 1, true);
    const doc = JSON.parse(readFileSync(result.modelPath, 'utf8'));
    const got = predictViaPrimary(result.modelPath, result.testPath, join(out, 'pred.json'));
    const rows = readFileSync(result.testPath, 'utf8').trim().split('\n').slice(1);
    expect(got).toHaveLength(rows.length);
    rows.forEach((line, i) => {
      const x = line.split(',').slice(0, doc.num_features).map(Number);
      expect(got[i]).toBe(evalModelDoc(doc, x));
    });
  });
});

describe.skipIf(!haveGerman)('german benchmark', () => {
  it('reproduces the published dataset statistics exactly', () => {
    const { table, spec } = loadRaw('german', rawDir());
    const prep = preprocess(table, spec);
    expect(prep.stats.instances).toBe(1000);
    expect(prep.stats.positiveFraction).toBe(0.7);
  });

  it.skipIf(!havePrimary)(
    '13-tree depth-6 model round-trips with 100% agreement',
    { timeout: 600_000 },
    () => {
      const out = tempDir('german-rt-');
      const result = exportDataset('german', rawDir(), out, 13, 6, 1, true);
      expect(result.agreementChecked).toBe(200);
    }
  );
});

describe.skipIf(!haveAdult)('adult benchmark', () => {
  it('reproduces the published dataset statistics exactly', () => {
    const { table, spec } = loadRaw('adult', rawDir());
    const prep = preprocess(table, spec);
    expect(prep.stats.instances).toBe(45222);
    expect(Math.round(prep.stats.positiveFraction * 100)).toBe(25);
  });
});
