import { existsSync, mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { runPrimaryAsync } from '../src/primary.js';

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function rawDataPresent(...files: string[]): boolean {
  const rawDir = join(import.meta.dirname, '..', 'data', 'raw');
  return files.every((f) => existsSync(join(rawDir, f)));
}

export function rawDir(): string {
  return join(import.meta.dirname, '..', 'data', 'raw');
}

export interface SynthesisDoc {
  converged: boolean;
  iterations: number;
  formulas: { items: { feature: number; op: string; threshold: number }[] }[];
  rendered: string[];
  per_iteration_counts: number[];
  [key: string]: unknown;
}

export async function synthesizeViaPrimary(
  modelPath: string,
  sensitive: string,
  maxIters: number,
  dir: string
): Promise<SynthesisDoc> {
  const out = join(dir, `formulas_${maxIters}.json`);
  await runPrimaryAsync([
    'synthesize', '--model', modelPath, '--sensitive', sensitive,
    '--max-iters', String(maxIters), '--out', out,
  ]);
  return JSON.parse(readFileSync(out, 'utf8'));
}

/** Formulas available after k iterations: the serialized order is discovery
 * order, so the per-iteration counts give the prefix length. */
export function truncateToIteration(doc: SynthesisDoc, k: number): SynthesisDoc {
  const counts = doc.per_iteration_counts.slice(0, k);
  const keep = counts.reduce((a, b) => a + b, 0);
  return {
    converged: false,
    iterations: counts.length,
    formulas: doc.formulas.slice(0, keep),
    rendered: [],
    per_iteration_counts: counts,
  };
}

export async function dtildeViaPrimary(
  modelPath: string,
  formulas: SynthesisDoc,
  csvPath: string,
  dir: string,
  tag: string
): Promise<number> {
  const formulasPath = join(dir, `f_${tag}.json`);
  writeFileSync(formulasPath, JSON.stringify(formulas));
  const out = join(dir, `report_${tag}.json`);
  await runPrimaryAsync([
    'evaluate', '--model', modelPath, '--formulas', formulasPath,
    '--dataset', csvPath, '--no-curve', '--out', out,
  ]);
  const report = JSON.parse(readFileSync(out, 'utf8'));
  return report.reports[0].d_tilde as number;
}

export async function topKViaPrimary(
  modelPath: string,
  formulasPath: string,
  trainCsv: string,
  k: number,
  dir: string
): Promise<SynthesisDoc> {
  const out = join(dir, 'ranked.json');
  await runPrimaryAsync([
    'rank', '--model', modelPath, '--formulas', formulasPath,
    '--dataset', trainCsv, '--top-k', String(k), '--out', out,
  ]);
  const ranked = JSON.parse(readFileSync(out, 'utf8'));
  const formulas = ranked.ranked.map((r: { formula: unknown }) => r.formula);
  return {
    converged: false,
    iterations: 1,
    formulas,
    rendered: [],
    per_iteration_counts: [formulas.length],
  };
}

/** Fraction of the oracle-fair instances of a dataset covered by the given
 * formulas, computed by the verifier's coverage curve. */
export async function fairCoverageViaPrimary(
  modelPath: string,
  sensitive: string,
  formulas: SynthesisDoc,
  csvPath: string,
  dir: string,
  tag: string
): Promise<number> {
  const formulasPath = join(dir, `cov_${tag}.json`);
  writeFileSync(formulasPath, JSON.stringify(formulas));
  const out = join(dir, `covreport_${tag}.json`);
  await runPrimaryAsync([
    'evaluate', '--model', modelPath, '--sensitive', sensitive,
    '--formulas', formulasPath, '--dataset', csvPath, '--out', out,
  ]);
  const report = JSON.parse(readFileSync(out, 'utf8'));
  const curve = report.reports[0].coverage_curve as [number, number][];
  return curve[curve.length - 1][1];
}
