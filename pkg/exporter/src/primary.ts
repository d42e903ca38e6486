/** Invocation of the verifier CLI: the exporter consumes the verifier only
 * through its public interfaces (model/dataset files and subcommands).
 *
 * The command defaults to `python3 -m treefair.cli`; override with the
 * TREEFAIR_CMD environment variable (whitespace-separated argv prefix). */

import { spawn, spawnSync } from 'node:child_process';
import { readFileSync } from 'node:fs';

export function primaryCommand(): string[] {
  const env = process.env.TREEFAIR_CMD;
  return env ? env.split(/\s+/) : ['python3', '-m', 'treefair.cli'];
}

export interface PrimaryResult {
  status: number;
  stdout: string;
  stderr: string;
}

export function runPrimary(args: string[], allowFailure = false): PrimaryResult {
  const [cmd, ...prefix] = primaryCommand();
  const proc = spawnSync(cmd, [...prefix, ...args], {
    encoding: 'utf8',
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw new Error(`failed to run verifier CLI: ${proc.error.message}`);
  }
  const result = {
    status: proc.status ?? -1,
    stdout: proc.stdout ?? '',
    stderr: proc.stderr ?? '',
  };
  if (result.status !== 0 && !allowFailure) {
    throw new Error(
      `verifier CLI exited with ${result.status}: ${result.stderr.slice(0, 2000)}`
    );
  }
  return result;
}

/** Non-blocking variant for long analyses (keeps test workers responsive). */
export function runPrimaryAsync(args: string[]): Promise<PrimaryResult> {
  const [cmd, ...prefix] = primaryCommand();
  return new Promise((resolve, reject) => {
    const proc = spawn(cmd, [...prefix, ...args]);
    let stdout = '';
    let stderr = '';
    proc.stdout.on('data', (d) => (stdout += d));
    proc.stderr.on('data', (d) => (stderr += d));
    proc.on('error', (err) => reject(new Error(`failed to run verifier CLI: ${err.message}`)));
    proc.on('close', (status) => {
      if (status !== 0) {
        reject(new Error(`verifier CLI exited with ${status}: ${stderr.slice(0, 2000)}`));
      } else {
        resolve({ status: status ?? -1, stdout, stderr });
      }
    });
  });
}

export function primaryAvailable(): boolean {
  const [cmd, ...prefix] = primaryCommand();
  const proc = spawnSync(cmd, [...prefix, '--version'], { encoding: 'utf8' });
  return !proc.error && proc.status === 0;
}

/** Ask the verifier to predict a dataset CSV against an exported model. */
export function predictViaPrimary(modelPath: string, csvPath: string, outPath: string): number[] {
  runPrimary(['predict', '--model', modelPath, '--dataset', csvPath, '--out', outPath]);
  const doc = JSON.parse(readFileSync(outPath, 'utf8'));
  return doc.labels as number[];
}
