//! Random forest over the two header/footer features.
//!
//! Trees split on one feature at a time (`x[feature] <= threshold` goes
//! left), choosing the split with the lowest weighted Gini impurity among the
//! midpoints of the sorted distinct values. Each tree is grown on a bootstrap
//! resample of the training set drawn from its own seeded stream, so training
//! is deterministic for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HfFeatures, HfLabel};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 50,
            max_depth: 6,
            seed: 0x5EED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    /// Training sample counts reaching this leaf, indexed by [`HfLabel::index`].
    Leaf { counts: [u32; 2] },
}

impl Node {
    fn vote(&self, x: [f64; 2]) -> HfLabel {
        match self {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.vote(x)
                } else {
                    right.vote(x)
                }
            }
            // Leaf ties go to REQ_TEXT.
            Node::Leaf { counts } => {
                if counts[HfLabel::HeaderFooter.index()] > counts[HfLabel::ReqText.index()] {
                    HfLabel::HeaderFooter
                } else {
                    HfLabel::ReqText
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature > 1 || !threshold.is_finite() {
                    return Err(Error::invalid(format!(
                        "bad split: feature {feature}, threshold {threshold}"
                    )));
                }
                left.check()?;
                right.check()
            }
            Node::Leaf { counts } => {
                if counts[0] + counts[1] == 0 {
                    return Err(Error::invalid("leaf with zero samples"));
                }
                Ok(())
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            Node::Leaf { .. } => 0,
        }
    }
}

/// A single CART-style classification tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
}

impl DecisionTree {
    pub fn fit(samples: &[(HfFeatures, HfLabel)], max_depth: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("cannot fit a tree on zero samples"));
        }
        let points: Vec<([f64; 2], usize)> = samples
            .iter()
            .map(|(f, l)| (f.as_array(), l.index()))
            .collect();
        let idx: Vec<usize> = (0..points.len()).collect();
        Ok(DecisionTree {
            root: grow(&points, idx, max_depth),
        })
    }

    pub fn vote(&self, f: &HfFeatures) -> HfLabel {
        self.root.vote(f.as_array())
    }
}

fn counts_of(points: &[([f64; 2], usize)], idx: &[usize]) -> [u32; 2] {
    let mut counts = [0u32; 2];
    for &i in idx {
        counts[points[i].1] += 1;
    }
    counts
}

fn gini(counts: [u32; 2]) -> f64 {
    let n = f64::from(counts[0] + counts[1]);
    if n == 0.0 {
        return 0.0;
    }
    let p0 = f64::from(counts[0]) / n;
    let p1 = f64::from(counts[1]) / n;
    1.0 - p0 * p0 - p1 * p1
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split(points: &[([f64; 2], usize)], idx: &[usize], parent: [u32; 2]) -> Option<BestSplit> {
    let n = idx.len() as f64;
    let mut best: Option<BestSplit> = None;
    for feature in 0..2 {
        let mut sorted: Vec<usize> = idx.to_vec();
        sorted.sort_by(|&a, &b| points[a].0[feature].total_cmp(&points[b].0[feature]));
        let mut left = [0u32; 2];
        for k in 0..sorted.len() - 1 {
            left[points[sorted[k]].1] += 1;
            let here = points[sorted[k]].0[feature];
            let next = points[sorted[k + 1]].0[feature];
            if here == next {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let nl = (k + 1) as f64;
            let impurity = (nl * gini(left) + (n - nl) * gini(right)) / n;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(BestSplit {
                    feature,
                    threshold: (here + next) / 2.0,
                    impurity,
                });
            }
        }
    }
    best
}

fn grow(points: &[([f64; 2], usize)], idx: Vec<usize>, depth_left: usize) -> Node {
    let counts = counts_of(points, &idx);
    let parent_impurity = gini(counts);
    if depth_left == 0 || idx.len() < 2 || parent_impurity == 0.0 {
        return Node::Leaf { counts };
    }
    match best_split(points, &idx, counts) {
        Some(split) if split.impurity < parent_impurity => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .into_iter()
                .partition(|&i| points[i].0[split.feature] <= split.threshold);
            Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow(points, l, depth_left - 1)),
                right: Box::new(grow(points, r, depth_left - 1)),
            }
        }
        _ => Node::Leaf { counts },
    }
}

/// Bootstrap sample indices for tree `tree` of a forest seeded with `seed`.
pub fn bootstrap_indices(n: usize, seed: u64, tree: usize) -> Vec<usize> {
    let mut rng = tree_rng(seed, tree);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub params: ForestParams,
    pub trees: Vec<DecisionTree>,
    pub trained: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    params: ForestParams,
    trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn untrained(params: ForestParams) -> Self {
        ForestModel {
            params,
            trees: Vec::new(),
            trained: false,
        }
    }

    pub fn train(samples: &[(HfFeatures, HfLabel)], params: ForestParams) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        if params.num_trees == 0 || params.max_depth == 0 {
            return Err(Error::invalid("num_trees and max_depth must be at least 1"));
        }
        let mut trees = Vec::with_capacity(params.num_trees);
        for t in 0..params.num_trees {
            let boot: Vec<(HfFeatures, HfLabel)> = bootstrap_indices(samples.len(), params.seed, t)
                .into_iter()
                .map(|i| samples[i])
                .collect();
            trees.push(DecisionTree::fit(&boot, params.max_depth)?);
        }
        Ok(ForestModel {
            params,
            trees,
            trained: true,
        })
    }

    /// Majority vote; the score is the fraction of trees voting HEADER_FOOTER.
    /// An exact split keeps the unit as REQ_TEXT.
    pub fn predict(&self, f: &HfFeatures) -> Result<(HfLabel, f64)> {
        if !self.trained || self.trees.is_empty() {
            return Err(Error::State("header/footer model is not trained".into()));
        }
        let hf_votes = self
            .trees
            .iter()
            .filter(|t| t.vote(f) == HfLabel::HeaderFooter)
            .count();
        let score = hf_votes as f64 / self.trees.len() as f64;
        let label = if 2 * hf_votes > self.trees.len() {
            HfLabel::HeaderFooter
        } else {
            HfLabel::ReqText
        };
        Ok((label, score))
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.trained {
            return Err(Error::State("refusing to save an untrained model".into()));
        }
        let file = ModelFile {
            version: MODEL_FORMAT_VERSION,
            params: self.params,
            trees: self.trees.clone(),
        };
        Ok(serde_json::to_string_pretty(&file).expect("model serializes"))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::parse(
                "version",
                format!("unsupported model version {}", file.version),
            ));
        }
        if file.trees.is_empty() {
            return Err(Error::parse("trees", "model has no trees"));
        }
        for tree in &file.trees {
            tree.root.check()?;
        }
        Ok(ForestModel {
            params: file.params,
            trees: file.trees,
            trained: true,
        })
    }
}
