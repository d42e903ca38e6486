/** Random-forest trainer: bagged CART trees, gini impurity, sqrt-feature
 * subsampling per split. Prediction is per-tree majority leaf followed by
 * ensemble majority vote with ties going to the smallest label id, the same
 * rule the verifier uses, so exported models agree exactly. */

import { mulberry32 } from './random.js';
import type { ModelNode } from './types.js';

export interface ForestParams {
  nTrees: number;
  maxDepth: number;
  seed: number;
  minLeaf?: number;
  /** features considered per split; defaults to sqrt(d) */
  maxFeatures?: number;
}

export interface Forest {
  trees: ModelNode[];
  nLabels: number;
  params: Required<ForestParams>;
}

export function trainForest(
  X: number[][],
  y: number[],
  nLabels: number,
  params: ForestParams
): Forest {
  const d = X[0].length;
  const resolved: Required<ForestParams> = {
    minLeaf: 1,
    maxFeatures: Math.max(1, Math.round(Math.sqrt(d))),
    ...params,
  };
  const rng = mulberry32(resolved.seed);
  const trees: ModelNode[] = [];
  for (let t = 0; t < resolved.nTrees; t++) {
    const indices: number[] = [];
    for (let i = 0; i < X.length; i++) {
      indices.push(Math.floor(rng() * X.length));
    }
    trees.push(buildTree(X, y, nLabels, indices, resolved, rng, resolved.maxDepth));
  }
  return { trees, nLabels, params: resolved };
}

function buildTree(
  X: number[][],
  y: number[],
  nLabels: number,
  indices: number[],
  params: Required<ForestParams>,
  rng: () => number,
  depth: number
): ModelNode {
  const counts = new Array(nLabels).fill(0);
  for (const i of indices) counts[y[i]]++;
  const majority = argmax(counts);
  if (depth === 0 || indices.length < 2 * params.minLeaf || gini(counts) === 0) {
    return { leaf: majority };
  }

  const d = X[0].length;
  const featurePool = Array.from({ length: d }, (_, i) => i);
  // partial Fisher-Yates: draw maxFeatures distinct features
  for (let i = 0; i < Math.min(params.maxFeatures, d); i++) {
    const j = i + Math.floor(rng() * (d - i));
    [featurePool[i], featurePool[j]] = [featurePool[j], featurePool[i]];
  }
  const candidates = featurePool.slice(0, Math.min(params.maxFeatures, d));

  let best: { score: number; feature: number; threshold: number } | null = null;
  for (const f of candidates) {
    const split = bestSplit(X, y, nLabels, indices, f, params.minLeaf);
    if (split && (best === null || split.score < best.score)) {
      best = { ...split, feature: f };
    }
  }
  if (best === null) return { leaf: majority };

  const left: number[] = [];
  const right: number[] = [];
  for (const i of indices) {
    (X[i][best.feature] <= best.threshold ? left : right).push(i);
  }
  return {
    feature: best.feature,
    threshold: best.threshold,
    left: buildTree(X, y, nLabels, left, params, rng, depth - 1),
    right: buildTree(X, y, nLabels, right, params, rng, depth - 1),
  };
}

function bestSplit(
  X: number[][],
  y: number[],
  nLabels: number,
  indices: number[],
  feature: number,
  minLeaf: number
): { score: number; threshold: number } | null {
  const order = [...indices].sort((a, b) => X[a][feature] - X[b][feature]);
  const total = new Array(nLabels).fill(0);
  for (const i of order) total[y[i]]++;
  const leftCounts = new Array(nLabels).fill(0);
  let best: { score: number; threshold: number } | null = null;
  for (let k = 0; k < order.length - 1; k++) {
    leftCounts[y[order[k]]]++;
    const a = X[order[k]][feature];
    const b = X[order[k + 1]][feature];
    if (a === b) continue;
    const nLeft = k + 1;
    const nRight = order.length - nLeft;
    if (nLeft < minLeaf || nRight < minLeaf) continue;
    const rightCounts = total.map((t, c) => t - leftCounts[c]);
    const score =
      (nLeft * gini(leftCounts) + nRight * gini(rightCounts)) / order.length;
    if (best === null || score < best.score) {
      best = { score, threshold: (a + b) / 2 };
    }
  }
  return best;
}

function gini(counts: number[]): number {
  const total = counts.reduce((a, b) => a + b, 0);
  if (total === 0) return 0;
  let sum = 0;
  for (const c of counts) sum += (c / total) * (c / total);
  return 1 - sum;
}

function argmax(counts: number[]): number {
  let best = 0;
  for (let i = 1; i < counts.length; i++) {
    if (counts[i] > counts[best]) best = i; // strict: ties keep the smaller id
  }
  return best;
}

export function predictNode(node: ModelNode, x: number[]): number {
  let cur = node;
  while (!('leaf' in cur)) {
    cur = x[cur.feature] <= cur.threshold ? cur.left : cur.right;
  }
  return cur.leaf;
}

export function predictForest(forest: Forest, x: number[]): number {
  const votes = new Array(forest.nLabels).fill(0);
  for (const tree of forest.trees) votes[predictNode(tree, x)]++;
  return argmax(votes);
}

export function treeDepth(node: ModelNode): number {
  if ('leaf' in node) return 0;
  return 1 + Math.max(treeDepth(node.left), treeDepth(node.right));
}
