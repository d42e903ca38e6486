/** Benchmark dataset definitions: raw-file loaders, column roles, and a
 * deterministic synthetic fixture with the same shape for offline testing.
 *
 * Raw files are expected under data/raw/ (see the fetch command):
 *   german.data   whitespace-separated, 1000 rows, 20 attributes + label
 *   adult.data    comma-separated, 32561 rows, 14 attributes + label
 *   adult.test    same, 16281 rows, one banner line, labels carry a dot
 */

import { mulberry32 } from './random.js';
import type { DatasetSpec, RawTable } from './types.js';

export const GERMAN_URL =
  'https://archive.ics.uci.edu/ml/machine-learning-databases/statlog/german/german.data';
export const ADULT_URLS = [
  'https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.data',
  'https://archive.ics.uci.edu/ml/machine-learning-databases/adult/adult.test',
];

const GERMAN_COLUMNS = [
  'status', 'duration', 'credit_history', 'purpose', 'credit_amount',
  'savings', 'employment', 'installment_rate', 'personal_status_sex',
  'other_debtors', 'residence_since', 'property', 'age',
  'installment_plans', 'housing', 'existing_credits', 'job',
  'num_dependents', 'telephone', 'foreign_worker', 'label',
];

// personal_status_sex codes: A91 male, A92 female, A93 male, A94 male,
// A95 female. The fairness analysis targets the derived binary sex.
const GERMAN_SEX: Record<string, string> = {
  A91: 'male', A92: 'female', A93: 'male', A94: 'male', A95: 'female',
};

export function loadGerman(text: string): RawTable {
  const rows = text
    .split(/\r?\n/)
    .filter((l) => l.trim().length > 0)
    .map((line) => line.trim().split(/\s+/));
  for (const row of rows) {
    if (row.length !== GERMAN_COLUMNS.length) {
      throw new Error(
        `german.data row has ${row.length} fields, expected ${GERMAN_COLUMNS.length}`
      );
    }
  }
  // Replace personal_status_sex with the derived sex column.
  const sexIdx = GERMAN_COLUMNS.indexOf('personal_status_sex');
  const columns = GERMAN_COLUMNS.map((c) => (c === 'personal_status_sex' ? 'sex' : c));
  const mapped = rows.map((row) =>
    row.map((cell, i) => {
      if (i !== sexIdx) return cell;
      const sex = GERMAN_SEX[cell];
      if (!sex) throw new Error(`unknown personal_status_sex code ${cell}`);
      return sex;
    })
  );
  return { columns, rows: mapped };
}

export const germanSpec: DatasetSpec = {
  name: 'german',
  numericColumns: [
    'duration', 'credit_amount', 'installment_rate', 'residence_since',
    'age', 'existing_credits', 'num_dependents',
  ],
  categoricalColumns: [
    'status', 'credit_history', 'purpose', 'savings', 'employment', 'sex',
    'other_debtors', 'property', 'installment_plans', 'housing', 'job',
    'telephone', 'foreign_worker',
  ],
  sensitiveColumn: 'sex',
  labelColumn: 'label',
  positiveLabel: '1', // 1 = good credit risk
  labelNames: { '1': 'good', '2': 'bad' },
  splitRatio: 0.8,
  splitSeed: 20240801,
};

const ADULT_COLUMNS = [
  'age', 'workclass', 'fnlwgt', 'education', 'education_num',
  'marital_status', 'occupation', 'relationship', 'race', 'sex',
  'capital_gain', 'capital_loss', 'hours_per_week', 'native_country',
  'label',
];

export function loadAdult(dataText: string, testText: string): RawTable {
  const parse = (text: string) =>
    text
      .split(/\r?\n/)
      .map((l) => l.trim())
      .filter((l) => l.length > 0 && !l.startsWith('|'))
      .map((line) =>
        line
          .replace(/\.$/, '') // adult.test labels end with a period
          .split(',')
          .map((c) => c.trim())
      );
  const rows = [...parse(dataText), ...parse(testText)];
  for (const row of rows) {
    if (row.length !== ADULT_COLUMNS.length) {
      throw new Error(`adult row has ${row.length} fields, expected ${ADULT_COLUMNS.length}`);
    }
  }
  return { columns: [...ADULT_COLUMNS], rows };
}

export const adultSpec: DatasetSpec = {
  name: 'adult',
  numericColumns: [
    'age', 'fnlwgt', 'education_num', 'capital_gain', 'capital_loss',
    'hours_per_week',
  ],
  categoricalColumns: [
    'workclass', 'education', 'marital_status', 'occupation',
    'relationship', 'race', 'sex', 'native_country',
  ],
  sensitiveColumn: 'sex',
  labelColumn: 'label',
  positiveLabel: '>50K',
  splitRatio: 0.8,
  splitSeed: 20240801,
};

/** Synthetic credit-like dataset with the shape of the benchmarks (binary
 * sensitive sex, categoricals, numerics, an injected sex-dependent decision
 * band) so the whole pipeline runs offline. Deterministic. */
export function fixtureRaw(n = 900, seed = 7): RawTable {
  const rng = mulberry32(seed);
  const pick = <T>(options: T[], weights: number[]): T => {
    const total = weights.reduce((a, b) => a + b, 0);
    let u = rng() * total;
    for (let i = 0; i < options.length; i++) {
      u -= weights[i];
      if (u <= 0) return options[i];
    }
    return options[options.length - 1];
  };
  const columns = ['sex', 'status', 'history', 'plan', 'amount', 'duration', 'label'];
  const rows: string[][] = [];
  for (let i = 0; i < n; i++) {
    const sex = rng() < 0.55 ? 'male' : 'female';
    const status = pick(['none', 'low', 'high'], [0.4, 0.35, 0.25]);
    const history = pick(['good', 'fair', 'poor'], [0.5, 0.3, 0.2]);
    const plan = pick(['none', 'bank', 'stores'], [0.6, 0.25, 0.15]);
    const amount = Math.round(250 + rng() * rng() * 9750);
    const duration = 4 + Math.floor(rng() * 68);
    let score = 0;
    score += status === 'high' ? 1.2 : status === 'low' ? 0.4 : 0;
    score += history === 'good' ? 1.0 : history === 'fair' ? 0.3 : -0.8;
    score += plan === 'none' ? 0.3 : 0;
    score -= amount / 6000;
    score -= duration / 60;
    // sex only matters in a specific band: discrimination exists but is
    // confined, so useful fairness conditions exist too
    if (status === 'none' && history !== 'good' && sex === 'male') score += 0.9;
    score += (rng() - 0.5) * 0.6;
    const label = score > 0.1 ? 'good' : 'bad';
    rows.push([sex, status, history, plan, String(amount), String(duration), label]);
  }
  return { columns, rows };
}

export const fixtureSpec: DatasetSpec = {
  name: 'fixture',
  numericColumns: ['amount', 'duration'],
  categoricalColumns: ['sex', 'status', 'history', 'plan'],
  sensitiveColumn: 'sex',
  labelColumn: 'label',
  positiveLabel: 'good',
  splitRatio: 0.8,
  splitSeed: 20240801,
};
