/** Portable model and dataset documents shared with the verifier. */

export type FeatureKind = 'numeric' | 'binary' | 'onehot';

export interface FeatureDoc {
  id: number;
  name: string;
  kind: FeatureKind;
  group: string | null;
}

export type ModelNode =
  | { leaf: number }
  | { feature: number; threshold: number; left: ModelNode; right: ModelNode };

export interface ModelDoc {
  num_features: number;
  labels: string[];
  features: FeatureDoc[];
  trees: ModelNode[];
}

/** A raw tabular dataset: column names plus string cells. */
export interface RawTable {
  columns: string[];
  rows: string[][];
}

/** Declares how a raw dataset maps onto the preprocessing pipeline. */
export interface DatasetSpec {
  name: string;
  numericColumns: string[];
  /** Categorical columns; two-valued ones become single binary features,
   *  the rest are one-hot encoded into a group per column. */
  categoricalColumns: string[];
  sensitiveColumn: string;
  labelColumn: string;
  /** Raw label value counted as the positive class (gets label id 1). */
  positiveLabel: string;
  labelNames?: Record<string, string>;
  missingMarker?: string;
  splitRatio: number;
  splitSeed: number;
}

export interface NormalizationStats {
  min: number;
  max: number;
}

export interface Preprocessed {
  features: FeatureDoc[];
  labels: [string, string];
  train: number[][];
  trainLabels: number[];
  test: number[][];
  testLabels: number[];
  sensitiveFeature: string;
  stats: {
    instances: number;
    positiveFraction: number;
    droppedFeatures: string[];
    normalization: Record<string, NormalizationStats>;
    binaryEncodings: Record<string, Record<string, number>>;
  };
}
