//! Isolation forest.
//!
//! Each tree recursively partitions a random subsample: pick a feature, pick a
//! split uniformly strictly between the node's min and max of that feature,
//! and recurse until a point is alone, the node has no spread, or the depth
//! limit is hit. Points that isolate after few splits are anomalous.
//!
//! Scores follow the convention `0.5 - 2^(-E[h(x)] / c(psi))`: negative
//! scores are outliers and lower means more anomalous.

use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("need at least 2 training rows, got {0}")]
    EmptyData(usize),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("row {row} has width {got}, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("feature vector has width {got}, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("model format version {found}, this reader expects {expected}")]
    VersionMismatch { found: String, expected: u32 },
    #[error("corrupt model: {0}")]
    CorruptModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub subsample: usize,
    pub seed: u64,
    /// Defaults to `ceil(log2(psi))` with `psi` the per-tree sample size.
    pub max_depth: Option<usize>,
    /// Min-max scale features (with the training ranges) before fitting and scoring.
    pub scale_features: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            subsample: 1000,
            seed: 0,
            max_depth: None,
            scale_features: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees < 1 {
            return Err(ForestError::InvalidParams("n_trees must be >= 1".into()));
        }
        if self.subsample < 2 {
            return Err(ForestError::InvalidParams("subsample must be >= 2".into()));
        }
        Ok(())
    }
}

/// Lower is more anomalous; negative means outlier.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnomalyScore(pub f64);

impl AnomalyScore {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_outlier(self) -> bool {
        self.0 < 0.0
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for AnomalyScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.0)
    }
}

const HARMONIC_EXACT_LIMIT: usize = 1000;
const EULER_GAMMA: f64 = 0.577_215_664_9;

fn harmonic_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut h = Vec::with_capacity(HARMONIC_EXACT_LIMIT + 1);
        h.push(0.0);
        let mut acc = 0.0;
        for i in 1..=HARMONIC_EXACT_LIMIT {
            acc += 1.0 / i as f64;
            h.push(acc);
        }
        h
    })
}

fn harmonic(i: usize) -> f64 {
    if i <= HARMONIC_EXACT_LIMIT {
        harmonic_table()[i]
    } else {
        let x = i as f64;
        x.ln() + EULER_GAMMA + 1.0 / (2.0 * x)
    }
}

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` nodes; normalizes path lengths.
pub fn c(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Internal {
        feature: usize,
        split: f64,
        left: usize,
        right: usize,
    },
    External {
        size: usize,
    },
}

/// Arena of nodes; the root is at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoTree {
    nodes: Vec<Node>,
}

impl IsoTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::External { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn external_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::External { size } => Some(*size),
            Node::Internal { .. } => None,
        })
    }

    /// Edges to the external node reached by `x`, plus `c(size)` of that node.
    /// `x` must already be in the model's (possibly scaled) feature space.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut edges = 0usize;
        loop {
            match self.nodes[i] {
                Node::Internal {
                    feature,
                    split,
                    left,
                    right,
                } => {
                    i = if x[feature] < split { left } else { right };
                    edges += 1;
                }
                Node::External { size } => return edges as f64 + c(size),
            }
        }
    }
}

struct TreeBuilder<'a, R> {
    data: &'a [Vec<f64>],
    max_depth: usize,
    rng: R,
    nodes: Vec<Node>,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::External { size: rows.len() });
        if rows.len() <= 1 || depth >= self.max_depth {
            return id;
        }

        let width = self.data[rows[0]].len();
        let ranges: Vec<(f64, f64)> = (0..width)
            .map(|f| {
                rows.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                        let v = self.data[r][f];
                        (lo.min(v), hi.max(v))
                    })
            })
            .collect();
        // a split strictly inside (lo, hi) must exist
        let has_spread = |&(lo, hi): &(f64, f64)| lo.next_up() < hi;

        let mut feature = self.rng.random_range(0..width);
        if !has_spread(&ranges[feature]) {
            let spread: Vec<usize> = (0..width).filter(|&f| has_spread(&ranges[f])).collect();
            if spread.is_empty() {
                return id;
            }
            feature = spread[self.rng.random_range(0..spread.len())];
        }
        let (lo, hi) = ranges[feature];
        let split = loop {
            let s = self.rng.random_range(lo..hi);
            if s > lo {
                break s;
            }
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.data[r][feature] < split);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Internal {
            feature,
            split,
            left,
            right,
        };
        id
    }
}

/// Per-feature `(min, max)` of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges(pub Vec<(f64, f64)>);

impl FeatureRanges {
    pub fn of<R: AsRef<[f64]>>(data: &[R]) -> Self {
        let width = data.first().map_or(0, |r| r.as_ref().len());
        FeatureRanges(
            (0..width)
                .map(|f| {
                    data.iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                            let v = r.as_ref()[f];
                            (lo.min(v), hi.max(v))
                        })
                })
                .collect(),
        )
    }

    /// Min-max scaling; constant features map to 0.
    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.0)
            .map(|(&v, &(lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    params: ForestParams,
    trees: Vec<IsoTree>,
    feature_ranges: FeatureRanges,
    n_features: usize,
    /// Per-tree training size `psi = min(subsample, rows)`.
    sample_size: usize,
}

fn check_rows<R: AsRef<[f64]>>(data: &[R]) -> Result<usize, ForestError> {
    if data.len() < 2 {
        return Err(ForestError::EmptyData(data.len()));
    }
    let width = data[0].as_ref().len();
    if width == 0 {
        return Err(ForestError::InvalidParams(
            "feature vectors are empty".into(),
        ));
    }
    for (row, r) in data.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != width {
            return Err(ForestError::RaggedRows {
                row,
                expected: width,
                got: r.len(),
            });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(ForestError::NonFiniteFeature { row, col });
        }
    }
    Ok(width)
}

pub fn fit<R: AsRef<[f64]>>(data: &[R], params: &ForestParams) -> Result<ForestModel, ForestError> {
    params.validate()?;
    let n_features = check_rows(data)?;
    let feature_ranges = FeatureRanges::of(data);
    let prepared: Vec<Vec<f64>> = if params.scale_features {
        data.iter()
            .map(|r| feature_ranges.scale(r.as_ref()))
            .collect()
    } else {
        data.iter().map(|r| r.as_ref().to_vec()).collect()
    };

    let sample_size = params.subsample.min(prepared.len());
    let max_depth = params
        .max_depth
        .unwrap_or_else(|| (sample_size as f64).log2().ceil() as usize);

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let mut rows = index::sample(&mut rng, prepared.len(), sample_size).into_vec();
            rows.sort_unstable();
            let mut builder = TreeBuilder {
                data: &prepared,
                max_depth,
                rng,
                nodes: Vec::new(),
            };
            builder.build(rows, 0);
            IsoTree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(ForestModel {
        params: *params,
        trees,
        feature_ranges,
        n_features,
        sample_size,
    })
}

impl ForestModel {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[IsoTree] {
        &self.trees
    }

    pub fn feature_ranges(&self) -> &FeatureRanges {
        &self.feature_ranges
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>, ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::WidthMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(if self.params.scale_features {
            self.feature_ranges.scale(x)
        } else {
            x.to_vec()
        })
    }

    /// Path length of raw input `x` in one tree.
    pub fn path_length(&self, tree: usize, x: &[f64]) -> Result<f64, ForestError> {
        Ok(self.trees[tree].path_length(&self.prepare(x)?))
    }

    pub fn mean_path_length(&self, x: &[f64]) -> Result<f64, ForestError> {
        let x = self.prepare(x)?;
        let total: f64 = self.trees.iter().map(|t| t.path_length(&x)).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub fn score(&self, x: &[f64]) -> Result<AnomalyScore, ForestError> {
        let e = self.mean_path_length(x)?;
        let s = 2f64.powf(-e / c(self.sample_size));
        Ok(AnomalyScore(0.5 - s))
    }

    pub fn score_all<R: AsRef<[f64]> + Sync>(
        &self,
        rows: &[R],
    ) -> Result<Vec<AnomalyScore>, ForestError> {
        rows.par_iter().map(|r| self.score(r.as_ref())).collect()
    }

    pub fn serialize(&self) -> Vec<u8> {
        let file = ModelFile {
            format_version: FORMAT_VERSION.into(),
            params: self.params,
            n_features: self.n_features,
            sample_size: self.sample_size,
            feature_ranges: self
                .feature_ranges
                .0
                .iter()
                .map(|&(lo, hi)| [lo, hi])
                .collect(),
            trees: self
                .trees
                .iter()
                .map(|t| t.nodes.iter().map(NodeRepr::from).collect())
                .collect(),
        };
        serde_json::to_vec(&file).expect("model serialization is infallible")
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, ForestError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: serde_json::Value,
        }
        let probe: Probe =
            serde_json::from_slice(bytes).map_err(|e| ForestError::CorruptModel(e.to_string()))?;
        if probe.format_version != FORMAT_VERSION {
            let found = match probe.format_version {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            return Err(ForestError::VersionMismatch {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_slice(bytes).map_err(|e| ForestError::CorruptModel(e.to_string()))?;
        file.into_model()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Internal(usize, f64, usize, usize),
    External([usize; 1]),
}

impl From<&Node> for NodeRepr {
    fn from(n: &Node) -> Self {
        match *n {
            Node::Internal {
                feature,
                split,
                left,
                right,
            } => NodeRepr::Internal(feature, split, left, right),
            Node::External { size } => NodeRepr::External([size]),
        }
    }
}

/// On-disk model: `format_version`, params and trees as nested arrays
/// (`[feature, split, left, right]` or `[size]`).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: serde_json::Value,
    params: ForestParams,
    n_features: usize,
    sample_size: usize,
    feature_ranges: Vec<[f64; 2]>,
    trees: Vec<Vec<NodeRepr>>,
}

impl ModelFile {
    fn into_model(self) -> Result<ForestModel, ForestError> {
        let corrupt = |m: &str| Err(ForestError::CorruptModel(m.to_owned()));
        if self.trees.len() != self.params.n_trees {
            return corrupt("tree count does not match params");
        }
        if self.feature_ranges.len() != self.n_features || self.n_features == 0 {
            return corrupt("feature range count does not match n_features");
        }
        if self.sample_size < 2 || self.sample_size > self.params.subsample {
            return corrupt("sample size out of range");
        }
        let mut trees = Vec::with_capacity(self.trees.len());
        for repr in self.trees {
            if repr.is_empty() {
                return corrupt("empty tree");
            }
            let len = repr.len();
            let mut nodes = Vec::with_capacity(len);
            for (i, n) in repr.into_iter().enumerate() {
                nodes.push(match n {
                    NodeRepr::Internal(feature, split, left, right) => {
                        if feature >= self.n_features
                            || !split.is_finite()
                            || left <= i
                            || right <= i
                            || left >= len
                            || right >= len
                        {
                            return corrupt("internal node out of range");
                        }
                        Node::Internal {
                            feature,
                            split,
                            left,
                            right,
                        }
                    }
                    NodeRepr::External([size]) => Node::External { size },
                });
            }
            trees.push(IsoTree { nodes });
        }
        Ok(ForestModel {
            params: self.params,
            trees,
            feature_ranges: FeatureRanges(
                self.feature_ranges
                    .into_iter()
                    .map(|[lo, hi]| (lo, hi))
                    .collect(),
            ),
            n_features: self.n_features,
            sample_size: self.sample_size,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_rows(n: usize, width: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (0..width)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect()
            })
            .collect()
    }

    fn params(n_trees: usize, subsample: usize, seed: u64) -> ForestParams {
        ForestParams {
            n_trees,
            subsample,
            seed,
            ..ForestParams::default()
        }
    }

    /// Harmonic number as an exact rational, summed independently of the table.
    fn c_oracle(n: u64) -> f64 {
        use num_rational::BigRational;
        let mut h = BigRational::from_integer(0.into());
        for i in (1..n).rev() {
            h += BigRational::new(1.into(), i.into());
        }
        let two = BigRational::from_integer(2.into());
        let v = two.clone() * h - two * BigRational::new((n - 1).into(), n.into());
        num_traits::ToPrimitive::to_f64(&v).unwrap()
    }

    #[test]
    fn normalizer_values() {
        assert_eq!(c(0), 0.0);
        assert_eq!(c(1), 0.0);
        assert_eq!(c(2), 1.0);
        // 2 * (1 + 1/2) - 2 * 2/3
        assert!((c(3) - (3.0 - 4.0 / 3.0)).abs() < 1e-15);
        assert!((c(256) - c_oracle(256)).abs() < 1e-9);
        assert!((c(1000) - c_oracle(1000)).abs() < 1e-9);
        // asymptotic branch stays close to the exact sum
        assert!((c(1500) - c_oracle(1500)).abs() < 1e-6);
    }

    #[test]
    fn identical_rows_give_single_leaf_trees() {
        let m = fit(&[vec![1.0, 2.0], vec![1.0, 2.0]], &params(10, 256, 3)).unwrap();
        for t in m.trees() {
            assert_eq!(t.nodes(), &[Node::External { size: 2 }]);
            assert_eq!(t.path_length(&[0.0, 0.0]), 1.0);
        }
    }

    #[test]
    fn root_with_two_singletons() {
        let t = IsoTree {
            nodes: vec![
                Node::Internal {
                    feature: 0,
                    split: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::External { size: 1 },
                Node::External { size: 1 },
            ],
        };
        assert_eq!(t.path_length(&[0.0]), 1.0);
        assert_eq!(t.path_length(&[9.0]), 1.0);
    }

    #[test]
    fn default_params_structure() {
        let data = normal_rows(1000, 5, 1);
        let m = fit(&data, &ForestParams::default()).unwrap();
        assert_eq!(m.trees().len(), 100);
        assert_eq!(m.sample_size(), 1000);
        for t in m.trees() {
            assert_eq!(t.external_sizes().sum::<usize>(), 1000);
            assert!(t.depth() <= 10);
        }
    }

    #[test]
    fn splits_lie_strictly_inside_node_range() {
        // subsample == rows, so every tree is trained on all rows and the
        // node-local ranges can be recovered by routing them
        let data = normal_rows(200, 3, 2);
        let p = ForestParams {
            scale_features: false,
            ..params(20, 200, 9)
        };
        let m = fit(&data, &p).unwrap();
        fn check(nodes: &[Node], i: usize, rows: Vec<&Vec<f64>>) {
            match nodes[i] {
                Node::External { size } => assert_eq!(size, rows.len()),
                Node::Internal {
                    feature,
                    split,
                    left,
                    right,
                } => {
                    let lo = rows
                        .iter()
                        .map(|r| r[feature])
                        .fold(f64::INFINITY, f64::min);
                    let hi = rows
                        .iter()
                        .map(|r| r[feature])
                        .fold(f64::NEG_INFINITY, f64::max);
                    assert!(lo < split && split < hi);
                    let (l, r): (Vec<_>, Vec<_>) =
                        rows.into_iter().partition(|r| r[feature] < split);
                    check(nodes, left, l);
                    check(nodes, right, r);
                }
            }
        }
        for t in m.trees() {
            check(t.nodes(), 0, data.iter().collect());
        }
    }

    #[test]
    fn errors() {
        let one: Vec<Vec<f64>> = vec![vec![1.0]];
        assert_eq!(
            fit(&one, &ForestParams::default()).unwrap_err(),
            ForestError::EmptyData(1)
        );
        let nan = vec![vec![1.0], vec![f64::NAN]];
        assert_eq!(
            fit(&nan, &ForestParams::default()).unwrap_err(),
            ForestError::NonFiniteFeature { row: 1, col: 0 }
        );
        let ragged = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(matches!(
            fit(&ragged, &ForestParams::default()),
            Err(ForestError::RaggedRows { .. })
        ));
        let m = fit(&[vec![0.0], vec![1.0]], &ForestParams::default()).unwrap();
        assert_eq!(
            m.score(&[1.0, 2.0]).unwrap_err(),
            ForestError::WidthMismatch {
                expected: 1,
                got: 2
            }
        );
        assert!(fit(&[vec![0.0], vec![1.0]], &params(0, 10, 0)).is_err());
        assert!(fit(&[vec![0.0], vec![1.0]], &params(1, 1, 0)).is_err());
    }

    #[test]
    fn score_zero_at_average_path_length() {
        // a single-leaf tree holding psi points has E = c(psi)
        let m = fit(&[vec![3.0], vec![3.0]], &params(5, 2, 0)).unwrap();
        assert_eq!(m.score(&[3.0]).unwrap().value(), 0.0);
    }

    #[test]
    fn score_display_has_three_decimals() {
        assert_eq!(AnomalyScore(-0.17271).to_string(), "-0.173");
        assert_eq!(AnomalyScore(0.05).to_string(), "0.050");
    }

    #[test]
    fn determinism_and_round_trip() {
        let data = normal_rows(300, 4, 5);
        let a = fit(&data, &params(50, 128, 11)).unwrap();
        let b = fit(&data, &params(50, 128, 11)).unwrap();
        assert_eq!(a.serialize(), b.serialize());
        let back = ForestModel::deserialize(&a.serialize()).unwrap();
        assert_eq!(back, a);
        for r in &data {
            assert_eq!(back.score(r).unwrap(), a.score(r).unwrap());
        }
        let c = fit(&data, &params(50, 128, 12)).unwrap();
        assert_ne!(a.serialize(), c.serialize());
    }

    #[test]
    fn corrupt_and_version_mismatch() {
        let m = fit(&normal_rows(50, 2, 1), &params(3, 16, 1)).unwrap();
        let bytes = m.serialize();
        assert!(matches!(
            ForestModel::deserialize(&bytes[..bytes.len() / 2]),
            Err(ForestError::CorruptModel(_))
        ));
        let text = String::from_utf8(bytes).unwrap();
        let old = text.replacen("\"format_version\":2", "\"format_version\":\"1\"", 1);
        assert_eq!(
            ForestModel::deserialize(old.as_bytes()).unwrap_err(),
            ForestError::VersionMismatch {
                found: "1".into(),
                expected: 2
            }
        );
        let bad_child = text.replacen("\"trees\":[[[", "\"trees\":[[[7,", 1);
        assert!(ForestModel::deserialize(bad_child.as_bytes()).is_err());
    }

    #[test]
    fn scores_stay_in_range() {
        let mut data = normal_rows(400, 3, 8);
        data.push(vec![50.0, -50.0, 50.0]);
        let m = fit(&data, &params(100, 256, 4)).unwrap();
        for s in m.score_all(&data).unwrap() {
            assert!(s.value() > -0.5 && s.value() <= 0.5);
        }
        for probe in [[1e9, 1e9, 1e9], [0.0, 0.0, 0.0], [-1e9, 0.0, 1e9]] {
            let s = m.score(&probe).unwrap().value();
            assert!(s > -0.5 && s <= 0.5);
        }
    }

    #[test]
    fn scaling_inside_or_outside_is_identical() {
        let data: Vec<Vec<f64>> = normal_rows(300, 3, 21)
            .into_iter()
            .map(|r| vec![r[0] * 1000.0 + 5.0, r[1], r[2] * 0.01])
            .collect();
        let inside = fit(&data, &params(30, 128, 2)).unwrap();
        let ranges = FeatureRanges::of(&data);
        let scaled: Vec<Vec<f64>> = data.iter().map(|r| ranges.scale(r)).collect();
        let outside = fit(
            &scaled,
            &ForestParams {
                scale_features: false,
                ..params(30, 128, 2)
            },
        )
        .unwrap();
        for (raw, pre) in data.iter().zip(&scaled) {
            assert_eq!(inside.score(raw).unwrap(), outside.score(pre).unwrap());
        }
    }

    #[test]
    fn duplicate_inlier_barely_moves_scores() {
        let data = normal_rows(500, 3, 31);
        let base = fit(&data, &params(100, 256, 6)).unwrap();
        let mut more = data.clone();
        more.push(data[0].clone());
        let refit = fit(&more, &params(100, 256, 6)).unwrap();
        for r in &data {
            let d = (base.score(r).unwrap().value() - refit.score(r).unwrap().value()).abs();
            assert!(d <= 0.05, "score moved by {d}");
        }
    }

    #[test]
    fn farther_outliers_score_lower() {
        let mut means = Vec::new();
        for z in [2.0, 4.0, 8.0, 16.0] {
            let mut total = 0.0;
            for seed in 0..20 {
                let mut data: Vec<Vec<f64>> = normal_rows(255, 1, 100 + seed);
                data.push(vec![z]);
                let m = fit(&data, &params(100, 256, seed)).unwrap();
                total += m.score(&[z]).unwrap().value();
            }
            means.push(total / 20.0);
        }
        assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
    }

    /// Expected path length of training point `x` over all 1-D trees, by
    /// enumerating split intervals: a uniform split in (min, max) falls into
    /// the gap between consecutive distinct values with probability
    /// proportional to the gap width.
    fn expected_path(points: &[f64], x: f64, depth: usize, max_depth: usize) -> f64 {
        let mut v = points.to_vec();
        v.sort_by(f64::total_cmp);
        let (lo, hi) = (v[0], v[v.len() - 1]);
        if v.len() <= 1 || depth >= max_depth || lo == hi {
            return c(v.len());
        }
        let mut total = 0.0;
        for w in v.windows(2) {
            if w[1] == w[0] {
                continue;
            }
            let p = (w[1] - w[0]) / (hi - lo);
            let side: Vec<f64> = if x <= w[0] {
                v.iter().copied().filter(|&y| y <= w[0]).collect()
            } else {
                v.iter().copied().filter(|&y| y >= w[1]).collect()
            };
            total += p * (1.0 + expected_path(&side, x, depth + 1, max_depth));
        }
        total
    }

    #[test]
    fn path_length_matches_exhaustive_split_oracle() {
        let sets: [&[f64]; 3] = [
            &[0.0, 1.0, 2.0, 10.0],
            &[0.0, 0.5, 0.7, 3.0, 3.1, 8.0],
            &[1.0, 2.0, 4.0, 8.0, 16.0, 17.0, 18.0, 40.0],
        ];
        for pts in sets {
            let data: Vec<Vec<f64>> = pts.iter().map(|&v| vec![v]).collect();
            let p = ForestParams {
                n_trees: 4000,
                subsample: pts.len(),
                seed: 17,
                max_depth: Some(64),
                scale_features: false,
            };
            let m = fit(&data, &p).unwrap();
            for &x in pts {
                let oracle = expected_path(pts, x, 0, 64);
                let mc = m.mean_path_length(&[x]).unwrap();
                assert!(
                    (mc - oracle).abs() / oracle < 0.05,
                    "x={x} mc={mc} oracle={oracle}"
                );
            }
        }
    }

    #[test]
    fn far_outlier_gets_minimum_score() {
        let mut hits = 0;
        for seed in 0..20u64 {
            let mut data = normal_rows(999, 2, 1000 + seed);
            data.push(vec![100.0, 100.0]);
            let m = fit(&data, &params(100, 1000, seed)).unwrap();
            let scores = m.score_all(&data).unwrap();
            let min = scores
                .iter()
                .copied()
                .min_by(AnomalyScore::total_cmp)
                .unwrap();
            if scores[999] == min {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}/20");
    }
}
