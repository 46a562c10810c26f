use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::rng::{derive_seed, stream, Domain};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("subsample size must be at least 2, got {0}")]
    SubsampleTooSmall(usize),
    #[error("point {index} has dimension {got}, expected {expected}")]
    RaggedData { index: usize, got: usize, expected: usize },
    #[error("n_trees must be positive")]
    NoTrees,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { size: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ITree {
    nodes: Vec<Node>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub subsample_size: usize,
    pub dim: usize,
    trees: Vec<ITree>,
}

/// Average unsuccessful-search path length in a binary search tree of `n`
/// points.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        _ => {
            let h: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
            2.0 * h - 2.0 * (n - 1) as f64 / n as f64
        }
    }
}

fn grow<R: Rng>(data: &[Vec<f64>], idx: &mut [usize], depth: usize, max_depth: usize, rng: &mut R, nodes: &mut Vec<Node>) -> usize {
    let me = nodes.len();
    nodes.push(Node::Leaf { size: idx.len() });
    if depth >= max_depth || idx.len() <= 1 {
        return me;
    }
    let d = data[idx[0]].len();
    let ranges: Vec<(usize, f64, f64)> = (0..d)
        .filter_map(|k| {
            let (lo, hi) = idx
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(data[i][k]), hi.max(data[i][k])));
            (lo < hi).then_some((k, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return me;
    }
    let (dim, lo, hi) = ranges[rng.gen_range(0..ranges.len())];
    let mut value = lo + (hi - lo) * rng.gen::<f64>();
    if value <= lo {
        value = lo + (hi - lo) * 0.5;
    }
    let mut split = 0;
    for j in 0..idx.len() {
        if data[idx[j]][dim] < value {
            idx.swap(j, split);
            split += 1;
        }
    }
    let (l, r) = idx.split_at_mut(split);
    let left = grow(data, l, depth + 1, max_depth, rng, nodes);
    let right = grow(data, r, depth + 1, max_depth, rng, nodes);
    nodes[me] = Node::Split { dim, value, left, right };
    me
}

impl ITree {
    fn path_length(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[i] {
                Node::Leaf { size } => return depth + c_factor(size),
                Node::Split { dim, value, left, right } => {
                    i = if x[dim] < value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Sizes recorded at the leaves; they sum to the subsample size.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { size } => Some(*size),
                Node::Split { .. } => None,
            })
            .collect()
    }
}

/// Tree `i` is grown from its own stream derived from `(seed, i)`, so the
/// forest is the same whichever execution mode builds it.
pub fn iforest_fit(
    data: &[Vec<f64>],
    n_trees: usize,
    subsample_size: usize,
    seed: u64,
    exec: Execution,
) -> Result<IsolationForest, FitError> {
    if n_trees == 0 {
        return Err(FitError::NoTrees);
    }
    if subsample_size < 2 {
        return Err(FitError::SubsampleTooSmall(subsample_size));
    }
    if data.len() < subsample_size {
        return Err(FitError::TooFewPoints { need: subsample_size, got: data.len() });
    }
    let dim = data[0].len();
    if let Some((index, p)) = data.iter().enumerate().find(|(_, p)| p.len() != dim) {
        return Err(FitError::RaggedData { index, got: p.len(), expected: dim });
    }
    let max_depth = (subsample_size as f64).log2().ceil() as usize;
    let trees = exec.map((0..n_trees as u64).collect(), |t| {
        let mut rng = stream(derive_seed(seed, Domain::Forest, &[t]), Domain::Forest, &[]);
        let mut idx = sample(&mut rng, data.len(), subsample_size).into_vec();
        let mut nodes = Vec::new();
        grow(data, &mut idx, 0, max_depth, &mut rng, &mut nodes);
        ITree { nodes }
    });
    Ok(IsolationForest { subsample_size, dim, trees })
}

impl IsolationForest {
    pub fn trees(&self) -> &[ITree] {
        &self.trees
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// `2^(-E[h(x)] / c(n))`.
pub fn iforest_score(f: &IsolationForest, x: &[f64]) -> f64 {
    assert_eq!(x.len(), f.dim, "point dimension");
    score_from_path(f.mean_path_length(x), f.subsample_size)
}

pub fn score_from_path(mean_path: f64, n: usize) -> f64 {
    2f64.powf(-mean_path / c_factor(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blob(seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect()
    }

    #[test]
    fn c_factor_small_values() {
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
        // 2 * (1 + 1/2) - 4/3
        assert!((c_factor(3) - (3.0 - 4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn score_midpoint_and_limit() {
        for n in [2, 10, 256] {
            assert!((score_from_path(c_factor(n), n) - 0.5).abs() < 1e-12);
            assert_eq!(score_from_path(0.0, n), 1.0);
        }
    }

    #[test]
    fn degenerate_data_gives_depth_zero_trees() {
        let data = vec![vec![1.0, 2.0]; 50];
        let f = iforest_fit(&data, 10, 32, 1, Execution::Sequential).unwrap();
        assert!(f.trees().iter().all(|t| t.depth() == 0));
        // Root leaf holds the whole subsample, so E[h] = c(n).
        assert!((iforest_score(&f, &[1.0, 2.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_forest_in_both_modes() {
        let data = blob(3, 300);
        let a = iforest_fit(&data, 20, 64, 9, Execution::Sequential).unwrap();
        let b = iforest_fit(&data, 20, 64, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, iforest_fit(&data, 20, 64, 10, Execution::Sequential).unwrap());
    }

    #[test]
    fn leaves_account_for_the_subsample_and_depth_is_capped() {
        let f = iforest_fit(&blob(4, 1000), 30, 256, 2, Execution::Sequential).unwrap();
        for t in f.trees() {
            assert_eq!(t.leaf_sizes().iter().sum::<usize>(), 256);
            assert!(t.depth() <= 8);
        }
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let d = blob(1, 10);
        assert_eq!(iforest_fit(&d, 5, 1, 0, Execution::Sequential).unwrap_err(), FitError::SubsampleTooSmall(1));
        assert!(matches!(iforest_fit(&d, 5, 11, 0, Execution::Sequential), Err(FitError::TooFewPoints { .. })));
        let mut r = d.clone();
        r[3].push(0.0);
        assert!(matches!(iforest_fit(&r, 5, 4, 0, Execution::Sequential), Err(FitError::RaggedData { index: 3, .. })));
    }

    #[test]
    fn scores_in_unit_interval_and_monotone_in_path() {
        let f = iforest_fit(&blob(5, 400), 50, 128, 7, Execution::Sequential).unwrap();
        for p in blob(6, 100) {
            let s = iforest_score(&f, &p);
            assert!(s > 0.0 && s <= 1.0);
        }
        let mut last = 1.0;
        for h in 1..40 {
            let s = score_from_path(h as f64 * 0.25, 128);
            assert!(s < last);
            last = s;
        }
    }
}
