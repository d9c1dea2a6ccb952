//! Random forest classifier: bootstrap-aggregated CART trees grown on
//! class-weighted Gini impurity.
//!
//! Training is reproducible from `(data, params, seed)`: tree `t` draws its
//! bootstrap sample and feature subsets from a ChaCha stream keyed by
//! `(seed, t)`, so trees can be grown in parallel in any order.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::model::{PerClass, SemanticClass, NUM_CLASSES};

const MODEL_MAGIC: &[u8; 8] = b"FSRFMODL";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxFeatures {
    Log2,
    Sqrt,
    All,
}

impl MaxFeatures {
    /// Number of candidate features per node for `d` columns (at least 1).
    pub fn count(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Log2 => (d as f64).log2().ceil() as usize,
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
        };
        k.clamp(1, d.max(1))
    }

    fn code(self) -> u8 {
        match self {
            MaxFeatures::Log2 => 0,
            MaxFeatures::Sqrt => 1,
            MaxFeatures::All => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        [MaxFeatures::Log2, MaxFeatures::Sqrt, MaxFeatures::All]
            .get(code as usize)
            .copied()
    }
}

impl FromStr for MaxFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log2" => Ok(MaxFeatures::Log2),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "all" => Ok(MaxFeatures::All),
            _ => Err(Error::invalid(format!("unknown max-features mode '{s}'"))),
        }
    }
}

impl fmt::Display for MaxFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaxFeatures::Log2 => "log2",
            MaxFeatures::Sqrt => "sqrt",
            MaxFeatures::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassWeightMode {
    Balanced,
    Uniform,
}

impl FromStr for ClassWeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(ClassWeightMode::Balanced),
            "uniform" => Ok(ClassWeightMode::Uniform),
            _ => Err(Error::invalid(format!("unknown class-weight mode '{s}'"))),
        }
    }
}

impl fmt::Display for ClassWeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassWeightMode::Balanced => "balanced",
            ClassWeightMode::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub class_weight: ClassWeightMode,
    pub seed: u64,
    /// Bootstrap draws per tree; `None` draws as many samples as there are rows.
    pub max_samples: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 200,
            max_depth: 50,
            max_features: MaxFeatures::Log2,
            min_samples_split: 2,
            min_samples_leaf: 10,
            class_weight: ClassWeightMode::Balanced,
            seed: 0,
            max_samples: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::invalid("n_estimators must be at least 1"));
        }
        if self.max_depth > 62 {
            return Err(Error::invalid("max_depth above 62 is not supported"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split must be at least 2"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if self.max_samples == Some(0) {
            return Err(Error::invalid("max_samples must be at least 1"));
        }
        Ok(())
    }
}

/// `N / (K * count_c)` for each present class, 0 for absent classes.
pub fn class_weights_balanced(labels: &[SemanticClass]) -> Result<PerClass<f64>> {
    if labels.is_empty() {
        return Err(Error::invalid("class weights of an empty label set"));
    }
    let counts = class_counts(labels);
    let present = counts.0.iter().filter(|&&c| c > 0).count() as f64;
    let n = labels.len() as f64;
    Ok(PerClass(counts.0.map(|c| {
        if c == 0 {
            0.0
        } else {
            n / (present * c as f64)
        }
    })))
}

fn class_counts(labels: &[SemanticClass]) -> PerClass<usize> {
    let mut counts = PerClass::<usize>::default();
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Summed sample weight per class.
        weights: [f64; NUM_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Root is node 0; children always follow their parent.
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let tree = DecisionTree { nodes };
        tree.validate(usize::MAX)?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Leaf weight vector reached by `row`.
    pub fn leaf(&self, row: &[f64]) -> &[f64; NUM_CLASSES] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { weights } => return weights,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Format("tree without nodes".into()));
        }
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let (l, r) = (*left as usize, *right as usize);
                    if l <= i || r <= i || l >= n || r >= n || l == r {
                        return Err(Error::Format(format!("node {i} has invalid children")));
                    }
                    if *feature as usize >= n_features {
                        return Err(Error::Format(format!(
                            "node {i} splits on feature {feature} outside the schema"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Format(format!(
                            "node {i} has a non-finite threshold"
                        )));
                    }
                }
                Node::Leaf { weights } => {
                    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                        || weights.iter().all(|&w| w == 0.0)
                    {
                        return Err(Error::Format(format!("leaf {i} has invalid weights")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
    pub feature_schema: Vec<String>,
    pub class_weights: PerClass<f64>,
}

/// Column-major training data restricted to one bootstrap sample.
struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [u8],
    /// Bootstrap multiplicity of each distinct sample.
    draws: Vec<u32>,
    /// `multiplicity * class weight` of each distinct sample.
    weights: Vec<f64>,
    /// Row index of each distinct sample.
    rows: Vec<u32>,
    params: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u32)>,
}

struct Split {
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn node_totals(&self, samples: &[u32]) -> ([f64; NUM_CLASSES], u64) {
        let mut w = [0.0; NUM_CLASSES];
        let mut draws = 0u64;
        for &s in samples {
            let s = s as usize;
            w[self.labels[self.rows[s] as usize] as usize] += self.weights[s];
            draws += self.draws[s] as u64;
        }
        (w, draws)
    }

    fn grow(&mut self, samples: &mut [u32], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let (class_w, draws) = self.node_totals(samples);
        let pure = class_w.iter().filter(|&&w| w > 0.0).count() <= 1;
        let p = self.params;
        let must_stop = depth >= p.max_depth
            || pure
            || draws < p.min_samples_split as u64
            || draws < 2 * p.min_samples_leaf as u64;
        let split = if must_stop {
            None
        } else {
            self.best_split(samples, &class_w)
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf { weights: class_w });
            return id;
        };

        let column = &self.columns[split.feature];
        let rows = &self.rows;
        let mut mid = 0;
        for i in 0..samples.len() {
            if column[rows[samples[i] as usize] as usize] <= split.threshold {
                samples.swap(i, mid);
                mid += 1;
            }
        }
        self.nodes.push(Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let (lower, upper) = samples.split_at_mut(mid);
        let left = self.grow(lower, depth + 1);
        let right = self.grow(upper, depth + 1);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id as usize]
        {
            *l = left;
            *r = right;
        }
        id
    }

    fn best_split(&mut self, samples: &[u32], class_w: &[f64; NUM_CLASSES]) -> Option<Split> {
        let d = self.columns.len();
        let mut features = sample_indices(&mut self.rng, d, self.mtry).into_vec();
        features.sort_unstable();

        let total_w: f64 = class_w.iter().sum();
        // Gini impurity is minimized by maximizing sum_c w_c^2 / W over children.
        let parent_score = class_w.iter().map(|w| w * w).sum::<f64>() / total_w;
        let min_leaf = self.params.min_samples_leaf as u64;
        let mut best: Option<(f64, Split)> = None;

        for f in features {
            let column = &self.columns[f];
            self.scratch.clear();
            self.scratch.extend(
                samples
                    .iter()
                    .map(|&s| (column[self.rows[s as usize] as usize], s)),
            );
            self.scratch
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }

            let mut left_w = [0.0; NUM_CLASSES];
            let mut left_draws = 0u64;
            let total_draws: u64 = samples.iter().map(|&s| self.draws[s as usize] as u64).sum();
            for i in 0..self.scratch.len() - 1 {
                let (value, s) = self.scratch[i];
                let s = s as usize;
                left_w[self.labels[self.rows[s] as usize] as usize] += self.weights[s];
                left_draws += self.draws[s] as u64;
                let next = self.scratch[i + 1].0;
                if value == next {
                    continue;
                }
                let right_draws = total_draws - left_draws;
                if left_draws < min_leaf {
                    continue;
                }
                if right_draws < min_leaf {
                    break;
                }
                let wl: f64 = left_w.iter().sum();
                let wr = total_w - wl;
                if wl <= 0.0 || wr <= 0.0 {
                    continue;
                }
                let mut sl = 0.0;
                let mut sr = 0.0;
                for c in 0..NUM_CLASSES {
                    sl += left_w[c] * left_w[c];
                    let r = class_w[c] - left_w[c];
                    sr += r * r;
                }
                let score = sl / wl + sr / wr;
                if score <= parent_score * (1.0 + 1e-12) {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _)| score > *b) {
                    let mut threshold = value + (next - value) * 0.5;
                    if threshold >= next {
                        threshold = value;
                    }
                    best = Some((
                        score,
                        Split {
                            feature: f,
                            threshold,
                        },
                    ));
                }
            }
        }
        best.map(|(_, s)| s)
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// Trains a forest on `table` with one label per row.
pub fn train_forest(
    table: &FeatureTable,
    labels: &[SemanticClass],
    params: &ForestParams,
) -> Result<ForestModel> {
    params.validate()?;
    let n = table.n_rows();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            n
        )));
    }
    if n < params.min_samples_split {
        return Err(Error::invalid(format!(
            "{n} rows are fewer than min_samples_split = {}",
            params.min_samples_split
        )));
    }
    if table.n_cols() == 0 {
        return Err(Error::invalid("feature table has no columns"));
    }
    let counts = class_counts(labels);
    if counts.0.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::invalid("training needs at least two classes"));
    }
    let class_weights = match params.class_weight {
        ClassWeightMode::Balanced => class_weights_balanced(labels)?,
        ClassWeightMode::Uniform => PerClass(counts.0.map(|c| if c > 0 { 1.0 } else { 0.0 })),
    };

    let d = table.n_cols();
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..n).map(|i| table.get(i, j)).collect())
        .collect();
    let codes: Vec<u8> = labels.iter().map(|l| l.code()).collect();
    let draws_per_tree = params.max_samples.unwrap_or(n);
    let mtry = params.max_features.count(d);

    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let mut multiplicity = vec![0u32; n];
            for _ in 0..draws_per_tree {
                multiplicity[rng.random_range(0..n)] += 1;
            }
            let rows: Vec<u32> = (0..n as u32)
                .filter(|&i| multiplicity[i as usize] > 0)
                .collect();
            let draws: Vec<u32> = rows.iter().map(|&i| multiplicity[i as usize]).collect();
            let weights: Vec<f64> = rows
                .iter()
                .zip(&draws)
                .map(|(&i, &m)| m as f64 * class_weights.0[codes[i as usize] as usize])
                .collect();
            let mut samples: Vec<u32> = (0..rows.len() as u32).collect();
            let mut builder = TreeBuilder {
                columns: &columns,
                labels: &codes,
                draws,
                weights,
                rows,
                params,
                mtry,
                rng,
                nodes: Vec::new(),
                scratch: Vec::with_capacity(samples.len()),
            };
            builder.grow(&mut samples, 0);
            DecisionTree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(ForestModel {
        trees,
        params: *params,
        feature_schema: table.columns().to_vec(),
        class_weights,
    })
}

/// Predicted classes plus the normalized per-class vote of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<SemanticClass>,
    pub scores: Vec<[f64; NUM_CLASSES]>,
}

impl ForestModel {
    fn check_schema(&self, table: &FeatureTable) -> Result<()> {
        if table.columns() != self.feature_schema.as_slice() {
            return Err(Error::SchemaMismatch {
                expected: self.feature_schema.clone(),
                found: table.columns().to_vec(),
            });
        }
        Ok(())
    }

    /// Class scores of one row: the mean over trees of each leaf's normalized
    /// weight vector.
    pub fn score_row(&self, row: &[f64]) -> [f64; NUM_CLASSES] {
        let mut acc = [0.0; NUM_CLASSES];
        for tree in &self.trees {
            let w = tree.leaf(row);
            let total: f64 = w.iter().sum();
            for c in 0..NUM_CLASSES {
                acc[c] += w[c] / total;
            }
        }
        let total: f64 = acc.iter().sum();
        acc.map(|v| v / total)
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Prediction> {
        self.check_schema(table)?;
        let scores: Vec<[f64; NUM_CLASSES]> = (0..table.n_rows())
            .into_par_iter()
            .map(|i| self.score_row(table.row(i)))
            .collect();
        let labels = scores.iter().map(argmax_class).collect();
        Ok(Prediction { labels, scores })
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(DecisionTree::node_count).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        let p = &self.params;
        out.extend_from_slice(&(p.n_estimators as u32).to_le_bytes());
        out.extend_from_slice(&(p.max_depth as u32).to_le_bytes());
        out.push(p.max_features.code());
        out.extend_from_slice(&(p.min_samples_split as u32).to_le_bytes());
        out.extend_from_slice(&(p.min_samples_leaf as u32).to_le_bytes());
        out.push(match p.class_weight {
            ClassWeightMode::Balanced => 0,
            ClassWeightMode::Uniform => 1,
        });
        out.extend_from_slice(&p.seed.to_le_bytes());
        out.extend_from_slice(&(p.max_samples.unwrap_or(0) as u64).to_le_bytes());
        out.extend_from_slice(&(self.feature_schema.len() as u32).to_le_bytes());
        for name in &self.feature_schema {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for w in self.class_weights.0 {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(self.trees.len() as u32).to_le_bytes());
        for tree in &self.trees {
            out.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        out.push(1);
                        out.extend_from_slice(&feature.to_le_bytes());
                        out.extend_from_slice(&threshold.to_le_bytes());
                        out.extend_from_slice(&left.to_le_bytes());
                        out.extend_from_slice(&right.to_le_bytes());
                    }
                    Node::Leaf { weights } => {
                        out.push(0);
                        for w in weights {
                            out.extend_from_slice(&w.to_le_bytes());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ForestModel> {
        let mut r = ByteReader { buf: bytes, pos: 0 };
        if r.take(8)? != MODEL_MAGIC {
            return Err(Error::Format("not a forest model file".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "model format version {version} is not supported (expected {MODEL_VERSION})"
            )));
        }
        let n_estimators = r.u32()? as usize;
        let max_depth = r.u32()? as usize;
        let max_features = MaxFeatures::from_code(r.u8()?)
            .ok_or_else(|| Error::Format("unknown max-features code".into()))?;
        let min_samples_split = r.u32()? as usize;
        let min_samples_leaf = r.u32()? as usize;
        let class_weight = match r.u8()? {
            0 => ClassWeightMode::Balanced,
            1 => ClassWeightMode::Uniform,
            other => return Err(Error::Format(format!("unknown class-weight code {other}"))),
        };
        let seed = r.u64()?;
        let max_samples = match r.u64()? {
            0 => None,
            m => Some(m as usize),
        };
        let params = ForestParams {
            n_estimators,
            max_depth,
            max_features,
            min_samples_split,
            min_samples_leaf,
            class_weight,
            seed,
            max_samples,
        };
        params
            .validate()
            .map_err(|e| Error::Format(format!("stored parameters: {e}")))?;

        let n_columns = r.u32()? as usize;
        let mut feature_schema = Vec::with_capacity(n_columns.min(1024));
        for _ in 0..n_columns {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("feature name is not UTF-8".into()))?;
            feature_schema.push(name.to_string());
        }
        let mut class_weights = PerClass([0.0; NUM_CLASSES]);
        for w in class_weights.0.iter_mut() {
            *w = r.f64()?;
        }
        let n_trees = r.u32()? as usize;
        if n_trees == 0 {
            return Err(Error::Format("model has no trees".into()));
        }
        if n_trees != n_estimators {
            return Err(Error::Format(format!(
                "model has {n_trees} trees but n_estimators = {n_estimators}"
            )));
        }
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = r.u32()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
            for _ in 0..n_nodes {
                let node = match r.u8()? {
                    1 => Node::Split {
                        feature: r.u32()?,
                        threshold: r.f64()?,
                        left: r.u32()?,
                        right: r.u32()?,
                    },
                    0 => {
                        let mut weights = [0.0; NUM_CLASSES];
                        for w in weights.iter_mut() {
                            *w = r.f64()?;
                        }
                        Node::Leaf { weights }
                    }
                    tag => return Err(Error::Format(format!("unknown node tag {tag}"))),
                };
                nodes.push(node);
            }
            let tree = DecisionTree { nodes };
            tree.validate(n_columns)?;
            trees.push(tree);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        Ok(ForestModel {
            trees,
            params,
            feature_schema,
            class_weights,
        })
    }
}

/// Highest score wins; ties go to the lowest class code.
pub fn argmax_class(scores: &[f64; NUM_CLASSES]) -> SemanticClass {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    SemanticClass::ALL[best]
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated model file at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_model(model: &ForestModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ForestModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ForestModel::from_bytes(&bytes)
}
