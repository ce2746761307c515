//! Random-forest regression: bootstrapped CART trees with variance-reducing
//! splits, out-of-bag tracking, and permutation importance.
//!
//! Determinism: tree t draws from an RNG stream derived from (seed, t), and
//! split search scans rows sorted by (feature value, target), so fits do not
//! depend on row order or thread scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; defaults to max(1, p/3) when None.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
    /// Disable to train every tree on the full sample (diagnostic use).
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 500, mtry: None, min_leaf: 5, seed: 0, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node<F> {
    Split { feature: usize, threshold: F, left: usize, right: usize },
    Leaf { mean: F },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tree<F> {
    pub fn predict(&self, x: &[F]) -> F {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { mean } => return *mean,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<F> {
    pub trees: Vec<Tree<F>>,
    /// Bootstrap row indexes per tree; rows absent from tree t's sample form
    /// its out-of-bag set.
    pub bootstrap_indices: Vec<Vec<usize>>,
    pub n_rows: usize,
    pub n_features: usize,
    pub params: ForestParams,
}

impl<F: Scalar> ForestModel<F> {
    /// Mean of the individual tree predictions.
    pub fn predict(&self, x: &[F]) -> F {
        let sum: F = self.trees.iter().map(|t| t.predict(x)).sum();
        sum / F::from_usize_lossy(self.trees.len())
    }

    pub fn oob_indices(&self, tree: usize) -> Vec<usize> {
        let mut in_bag = vec![false; self.n_rows];
        for &i in &self.bootstrap_indices[tree] {
            in_bag[i] = true;
        }
        (0..self.n_rows).filter(|&i| !in_bag[i]).collect()
    }
}

fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64 + 1);
    rng
}

/// Fit a random forest on a dense design matrix.
pub fn fit_forest<F: Scalar>(x: &[Vec<F>], y: &[F], params: ForestParams) -> ForestModel<F> {
    assert_eq!(x.len(), y.len());
    assert!(!x.is_empty(), "forest needs training rows");
    let n = x.len();
    let p = x[0].len();
    let mtry = params.mtry.unwrap_or_else(|| (p / 3).max(1)).clamp(1, p);

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut bootstrap_indices = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = tree_rng(params.seed, t);
        let sample: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut builder = TreeBuilder { x, y, min_leaf: params.min_leaf, mtry, p, nodes: Vec::new() };
        builder.grow(sample.clone(), &mut rng);
        trees.push(Tree { nodes: builder.nodes });
        bootstrap_indices.push(sample);
    }
    ForestModel { trees, bootstrap_indices, n_rows: n, n_features: p, params }
}

struct TreeBuilder<'a, F> {
    x: &'a [Vec<F>],
    y: &'a [F],
    min_leaf: usize,
    mtry: usize,
    p: usize,
    nodes: Vec<Node<F>>,
}

struct BestSplit<F> {
    feature: usize,
    threshold: F,
    score: F,
}

impl<'a, F: Scalar> TreeBuilder<'a, F> {
    fn grow(&mut self, rows: Vec<usize>, rng: &mut ChaCha8Rng) -> usize {
        let node_id = self.nodes.len();
        self.nodes.push(Node::Leaf { mean: F::zero() }); // placeholder

        let mean = self.node_mean(&rows);
        if rows.len() < 2 * self.min_leaf || self.is_constant(&rows) {
            self.nodes[node_id] = Node::Leaf { mean };
            return node_id;
        }

        let features = self.sample_features(rng);
        let Some(best) = self.best_split(&rows, &features) else {
            self.nodes[node_id] = Node::Leaf { mean };
            return node_id;
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[r][best.feature] <= best.threshold);
        let left = self.grow(left_rows, rng);
        let right = self.grow(right_rows, rng);
        self.nodes[node_id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        node_id
    }

    fn node_mean(&self, rows: &[usize]) -> F {
        // Sum in sorted-value order so the result is row-order invariant.
        let mut vals: Vec<F> = rows.iter().map(|&r| self.y[r]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite target"));
        vals.iter().copied().sum::<F>() / F::from_usize_lossy(vals.len())
    }

    fn is_constant(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&r| self.y[r] == first)
    }

    fn sample_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        if self.mtry >= self.p {
            return (0..self.p).collect();
        }
        // Partial Fisher-Yates over the feature indexes.
        let mut idx: Vec<usize> = (0..self.p).collect();
        for i in 0..self.mtry {
            let j = rng.gen_range(i..self.p);
            idx.swap(i, j);
        }
        let mut picked = idx[..self.mtry].to_vec();
        picked.sort_unstable();
        picked
    }

    /// Best variance-reducing split among the candidate features.
    /// Equivalent objective: maximize sum_L^2/n_L + sum_R^2/n_R. Ties break
    /// to the lowest feature index, then the lowest threshold.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<BestSplit<F>> {
        let mut best: Option<BestSplit<F>> = None;
        for &feature in features {
            let mut pairs: Vec<(F, F)> = rows.iter().map(|&r| (self.x[r][feature], self.y[r])).collect();
            pairs.sort_by(|a, b| {
                a.0.partial_cmp(&b.0).expect("finite feature").then(
                    a.1.partial_cmp(&b.1).expect("finite target"),
                )
            });
            let total: F = pairs.iter().map(|&(_, y)| y).sum();
            let n = pairs.len();
            let mut left_sum = F::zero();
            for i in 0..n - 1 {
                left_sum += pairs[i].1;
                if pairs[i].0 == pairs[i + 1].0 {
                    continue; // threshold must separate distinct values
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / F::from_usize_lossy(n_left)
                    + right_sum * right_sum / F::from_usize_lossy(n_right);
                let threshold =
                    (pairs[i].0 + pairs[i + 1].0) / F::from_f64_lossy(2.0);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        score > b.score
                            || (score == b.score
                                && (feature < b.feature
                                    || (feature == b.feature && threshold < b.threshold)))
                    }
                };
                if better {
                    best = Some(BestSplit { feature, threshold, score });
                }
            }
        }
        best
    }
}

fn mse<F: Scalar>(pairs: &[(F, F)]) -> F {
    let n = F::from_usize_lossy(pairs.len());
    pairs.iter().map(|&(y, pred)| (y - pred) * (y - pred)).sum::<F>() / n
}

/// Permutation importance, normalized as mean OOB MSE increase over its
/// standard deviation (0 whenever the deviation is 0).
pub fn permutation_importance<F: Scalar>(
    forest: &ForestModel<F>,
    x: &[Vec<F>],
    y: &[F],
    seed: u64,
) -> Vec<F> {
    let p = forest.n_features;
    let mut diffs: Vec<Vec<F>> = vec![Vec::new(); p];

    for t in 0..forest.trees.len() {
        let oob = forest.oob_indices(t);
        if oob.len() < 2 {
            continue;
        }
        let tree = &forest.trees[t];
        let base: Vec<(F, F)> = oob.iter().map(|&r| (y[r], tree.predict(&x[r]))).collect();
        let mse0 = mse(&base);

        for feature in 0..p {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((t as u64) << 20) ^ (feature as u64 + 1));
            // Permute the feature column within the OOB rows.
            let mut perm: Vec<usize> = (0..oob.len()).collect();
            for i in (1..perm.len()).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let permuted: Vec<(F, F)> = oob
                .iter()
                .enumerate()
                .map(|(k, &r)| {
                    let mut row = x[r].clone();
                    row[feature] = x[oob[perm[k]]][feature];
                    (y[r], tree.predict(&row))
                })
                .collect();
            diffs[feature].push(mse(&permuted) - mse0);
        }
    }

    diffs
        .into_iter()
        .map(|d| {
            if d.is_empty() {
                return F::zero();
            }
            let mean = crate::stats::mean(&d);
            let sd = crate::stats::std_sample(&d);
            if sd == F::zero() {
                F::zero()
            } else {
                mean / sd
            }
        })
        .collect()
}

/// Importance keyed by column name, highest first.
pub fn importance_ranking<F: Scalar>(names: &[String], importance: &[F]) -> Vec<(String, F)> {
    let mut ranked: Vec<(String, F)> = names.iter().cloned().zip(importance.iter().copied()).collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite importance").then(a.0.cmp(&b.0)));
    ranked
}

/// Aggregate one-hot column importances back onto their source feature.
pub fn group_importance<F: Scalar>(
    names: &[String],
    importance: &[F],
) -> BTreeMap<String, F> {
    let mut grouped: BTreeMap<String, F> = BTreeMap::new();
    for (name, &imp) in names.iter().zip(importance) {
        let base = name.split('=').next().unwrap_or(name).to_string();
        let entry = grouped.entry(base).or_insert_with(F::zero);
        *entry = entry.max(imp);
    }
    grouped
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn constant_target_predicts_constant() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y = vec![4.5; 30];
        let forest = fit_forest(&x, &y, ForestParams { n_trees: 20, min_leaf: 2, ..Default::default() });
        for row in &x {
            assert_eq!(forest.predict(row), 4.5);
        }
    }

    // A single unbootstrapped tree with min_leaf 1 interpolates the sample.
    #[test]
    fn single_tree_interpolates_distinct_inputs() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        let params = ForestParams { n_trees: 1, mtry: Some(1), min_leaf: 1, seed: 0, bootstrap: false };
        let forest = fit_forest(&x, &y, params);
        for (row, &target) in x.iter().zip(&y) {
            assert_eq!(forest.predict(row), target);
        }
    }

    #[test]
    fn step_function_learned_below_target_std() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(0.0..10.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] < 5.0 { 0.0 } else { 100.0 }).collect();
        let forest = fit_forest(&x, &y, ForestParams { n_trees: 200, min_leaf: 2, seed: 1, ..Default::default() });

        // OOB RMSE well below the target's own std (about 50 here).
        let mut se = 0.0;
        let mut count = 0;
        for t in 0..forest.trees.len() {
            for &r in &forest.oob_indices(t) {
                let err = y[r] - forest.trees[t].predict(&x[r]);
                se += err * err;
                count += 1;
            }
        }
        let oob_rmse = (se / count as f64).sqrt();
        let std = crate::stats::std_pop(&y);
        assert!(oob_rmse < std, "oob rmse {oob_rmse} vs target std {std}");
    }

    #[test]
    fn prediction_is_exact_mean_of_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 3.0 + r[1]).collect();
        let forest = fit_forest(&x, &y, ForestParams { n_trees: 33, seed: 2, min_leaf: 2, ..Default::default() });
        let probe = vec![0.4, 0.6];
        let mean: f64 = forest.trees.iter().map(|t| t.predict(&probe)).sum::<f64>() / 33.0;
        assert_eq!(forest.predict(&probe), mean);
    }

    #[test]
    fn row_order_invariant_given_matching_bootstrap() {
        // Same data in two different row orders, no bootstrap: identical trees.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 5.0 + r[1] * r[2]).collect();
        let params = ForestParams { n_trees: 8, mtry: Some(2), min_leaf: 2, seed: 3, bootstrap: false };
        let forward = fit_forest(&x, &y, params);

        let xr: Vec<Vec<f64>> = x.iter().rev().cloned().collect();
        let yr: Vec<f64> = y.iter().rev().copied().collect();
        let reversed = fit_forest(&xr, &yr, params);

        let mut probe_rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..20 {
            let probe = vec![
                probe_rng.gen_range(0.0..1.0),
                probe_rng.gen_range(0.0..1.0),
                probe_rng.gen_range(0.0..1.0),
            ];
            assert_eq!(forward.predict(&probe), reversed.predict(&probe));
        }
    }

    #[test]
    fn constant_feature_has_zero_importance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.gen_range(0.0..1.0), 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 10.0).collect();
        let forest = fit_forest(&x, &y, ForestParams { n_trees: 50, min_leaf: 2, seed: 4, ..Default::default() });
        let imp = permutation_importance(&forest, &x, &y, 99);
        assert_eq!(imp[1], 0.0);
        assert!(imp[0] > 0.0);
    }

    #[test]
    fn signal_feature_outranks_noise() {
        let mut wins = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> =
                (0..100).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|r| 10.0 * (r[0] * 6.0).sin() + rng.gen_range(-0.5..0.5))
                .collect();
            let forest =
                fit_forest(&x, &y, ForestParams { n_trees: 60, min_leaf: 3, seed, ..Default::default() });
            let imp = permutation_importance(&forest, &x, &y, seed);
            if imp[0] > imp[1] {
                wins += 1;
            }
        }
        assert!(wins >= 19, "signal outranked noise in only {wins}/20 runs");
    }
}
