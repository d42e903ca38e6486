/** Conversion of a trained forest into the verifier's model document, plus
 * the agreement checks that gate every export. */

import type { Forest } from './forest.js';
import { predictForest, predictNode } from './forest.js';
import type { FeatureDoc, ModelDoc, Preprocessed } from './types.js';

export function toModelDoc(forest: Forest, features: FeatureDoc[], labels: string[]): ModelDoc {
  return {
    num_features: features.length,
    labels: [...labels],
    features: features.map((f) => ({ ...f })),
    trees: forest.trees,
  };
}

/** Structural evaluation of an exported document (left iff value <= threshold,
 * majority vote, smallest label id on ties): the in-process half of the
 * round-trip agreement check. */
export function evalModelDoc(doc: ModelDoc, x: number[]): number {
  const votes = new Array(doc.labels.length).fill(0);
  for (const tree of doc.trees) votes[predictNode(tree, x)]++;
  let best = 0;
  for (let i = 1; i < votes.length; i++) {
    if (votes[i] > votes[best]) best = i;
  }
  return best;
}

export interface AgreementReport {
  checked: number;
  mismatches: number;
}

/** Compares forest predictions against an evaluator of the exported document
 * row by row; any divergence means the export semantics are wrong and must
 * abort the export. */
export function checkAgreement(
  forest: Forest,
  evaluate: (x: number[]) => number,
  X: number[][]
): AgreementReport {
  let mismatches = 0;
  for (const x of X) {
    if (predictForest(forest, x) !== evaluate(x)) mismatches++;
  }
  return { checked: X.length, mismatches };
}

export interface MetadataDoc {
  dataset: string;
  sensitive: string;
  labels: string[];
  features: FeatureDoc[];
  normalization: Record<string, { min: number; max: number }>;
  binary_encodings: Record<string, Record<string, number>>;
  dropped_features: string[];
  instances: number;
  positive_fraction: number;
  trainer: {
    n_trees: number;
    max_depth: number;
    seed: number;
    min_leaf: number;
    max_features_per_split: number;
    impurity: 'gini';
    bootstrap: true;
  };
}

export function metadataDoc(
  datasetName: string,
  prep: Preprocessed,
  forest: Forest
): MetadataDoc {
  return {
    dataset: datasetName,
    sensitive: prep.sensitiveFeature,
    labels: [...prep.labels],
    features: prep.features,
    normalization: prep.stats.normalization,
    binary_encodings: prep.stats.binaryEncodings,
    dropped_features: prep.stats.droppedFeatures,
    instances: prep.stats.instances,
    positive_fraction: prep.stats.positiveFraction,
    trainer: {
      n_trees: forest.params.nTrees,
      max_depth: forest.params.maxDepth,
      seed: forest.params.seed,
      min_leaf: forest.params.minLeaf,
      max_features_per_split: forest.params.maxFeatures,
      impurity: 'gini',
      bootstrap: true,
    },
  };
}
