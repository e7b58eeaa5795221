//! CART regression forests.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until `min_leaf` stops the split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` means `ceil(p / 3)`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            max_depth: None,
            min_leaf: 5,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_of(&self, row: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while node.feature != LEAF {
            let next = if row[node.feature as usize] <= node.threshold {
                node.left
            } else {
                node.right
            };
            node = &self.nodes[next as usize];
        }
        node
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf_of(row).value
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub params: ForestParams,
    pub seed: u64,
    n_features: usize,
    /// Out-of-bag prediction per training row; `NaN` for rows that were in
    /// every bootstrap sample.
    oob: Vec<f64>,
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<Node>,
    buf: Vec<(f64, f64)>,
}

impl Builder<'_> {
    fn leaf(&mut self, value: f64) -> u32 {
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            value,
        });
        (self.nodes.len() - 1) as u32
    }

    fn grow<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> u32 {
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mean = sum / n as f64;
        let min_leaf = self.params.min_leaf.max(1);
        let depth_left = self.params.max_depth.map_or(true, |d| depth < d);
        let constant = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        if n < 2 * min_leaf || !depth_left || constant {
            return self.leaf(mean);
        }

        let p = self.x.ncols();
        let parent = sum * sum / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for f in sample(rng, p, self.mtry.min(p)).into_iter() {
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (self.x[(r, f)], self.y[r])));
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = 0.0;
            for i in 1..n {
                left += self.buf[i - 1].1;
                if i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let (lo, hi) = (self.buf[i - 1].0, self.buf[i].0);
                if lo == hi {
                    continue;
                }
                let right = sum - left;
                let gain = left * left / i as f64 + right * right / (n - i) as f64;
                if best.map_or(true, |(g, _, _)| gain > g) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((gain, f, threshold));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return self.leaf(mean);
        };
        if gain <= parent * (1.0 + 1e-12) + 1e-12 {
            return self.leaf(mean);
        }

        let mut split = 0;
        for i in 0..n {
            if self.x[(rows[i], feature)] <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let index = self.nodes.len();
        self.nodes.push(Node {
            feature: feature as u32,
            threshold,
            left: LEAF,
            right: LEAF,
            value: mean,
        });
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[index].left = left;
        self.nodes[index].right = right;
        index as u32
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64], params: &ForestParams) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Argument("forest needs at least one row and one column".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::Argument(format!("{} responses for {} rows", y.len(), x.nrows())));
    }
    if params.n_trees == 0 {
        return Err(Error::Argument("n_trees must be positive".into()));
    }
    if x.nrows() < 2 * params.min_leaf.max(1) {
        return Err(Error::Argument(format!(
            "{} rows cannot fill two leaves of {}",
            x.nrows(),
            params.min_leaf
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Argument("forest inputs must be finite".into()));
    }
    Ok(())
}

/// Fit a regression forest. Trees are grown in parallel from per-tree seeds
/// derived from `seed`.
pub fn rf_fit(x: &DMatrix<f64>, y: &[f64], params: &ForestParams, seed: u64) -> Result<Forest> {
    check_inputs(x, y, params)?;
    let n = x.nrows();
    let p = x.ncols();
    let mtry = params.features_per_split.unwrap_or((p + 2) / 3).clamp(1, p);

    let grown: Vec<(Tree, Vec<(usize, f64)>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, Domain::Forest, t as u64);
            let mut rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &r in &rows {
                in_bag[r] = true;
            }
            let mut builder = Builder {
                x,
                y,
                params,
                mtry,
                nodes: Vec::new(),
                buf: Vec::with_capacity(n),
            };
            builder.grow(&mut rows, 0, &mut rng);
            let tree = Tree { nodes: builder.nodes };
            let mut row = vec![0.0; p];
            let oob = (0..n)
                .filter(|&i| !in_bag[i])
                .map(|i| {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = x[(i, j)];
                    }
                    (i, tree.predict_row(&row))
                })
                .collect();
            (tree, oob)
        })
        .collect();

    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, oob) in grown {
        for (i, v) in oob {
            sums[i] += v;
            counts[i] += 1;
        }
        trees.push(tree);
    }
    let oob = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    Ok(Forest {
        trees,
        params: *params,
        seed,
        n_features: p,
        oob,
    })
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Out-of-bag predictions for the training rows.
    pub fn oob_predictions(&self) -> &[f64] {
        &self.oob
    }

    fn check_columns(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.n_features {
            return Err(Error::Argument(format!(
                "forest was trained on {} columns, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Exact partial dependence on `feature`: for each query value `a`, the
    /// mean prediction over the rows of `x` with that column set to `a`.
    ///
    /// Each tree is walked once per group of rows that share a path, keeping
    /// the interval of `a` values that reaches each leaf, so the cost does
    /// not grow with the number of queries.
    pub fn partial_dependence(&self, x: &DMatrix<f64>, feature: usize, queries: &[f64]) -> Result<Vec<f64>> {
        self.check_columns(x)?;
        if feature >= self.n_features {
            return Err(Error::Argument(format!("feature {feature} out of range")));
        }
        let n = x.nrows();
        if n == 0 {
            return Err(Error::Argument("partial dependence needs rows".into()));
        }
        let scale = 1.0 / (n as f64 * self.trees.len() as f64);
        let events: Vec<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = self
            .trees
            .par_iter()
            .map(|tree| {
                let mut starts = Vec::new();
                let mut ends = Vec::new();
                let rows: Vec<usize> = (0..n).collect();
                let mut stack = vec![(0u32, rows, f64::NEG_INFINITY, f64::INFINITY)];
                while let Some((id, rows, lo, hi)) = stack.pop() {
                    let node = &tree.nodes[id as usize];
                    if node.feature == LEAF {
                        let w = node.value * rows.len() as f64 * scale;
                        starts.push((lo, w));
                        ends.push((hi, w));
                        continue;
                    }
                    let f = node.feature as usize;
                    let t = node.threshold;
                    if f == feature {
                        if lo < t.min(hi) {
                            stack.push((node.left, rows.clone(), lo, t.min(hi)));
                        }
                        if t.max(lo) < hi {
                            stack.push((node.right, rows, t.max(lo), hi));
                        }
                    } else {
                        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x[(i, f)] <= t);
                        if !l.is_empty() {
                            stack.push((node.left, l, lo, hi));
                        }
                        if !r.is_empty() {
                            stack.push((node.right, r, lo, hi));
                        }
                    }
                }
                (starts, ends)
            })
            .collect();
        let mut starts: Vec<(f64, f64)> = Vec::new();
        let mut ends: Vec<(f64, f64)> = Vec::new();
        for (s, e) in events {
            starts.extend(s);
            ends.extend(e);
        }
        let cumulative = |mut v: Vec<(f64, f64)>| {
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = 0.0;
            let keys: Vec<f64> = v.iter().map(|e| e.0).collect();
            let sums: Vec<f64> = v
                .iter()
                .map(|e| {
                    acc += e.1;
                    acc
                })
                .collect();
            (keys, sums)
        };
        let (start_keys, start_sums) = cumulative(starts);
        let (end_keys, end_sums) = cumulative(ends);
        // sum of weights with key strictly below a
        let below = |keys: &[f64], sums: &[f64], a: f64| {
            let k = keys.partition_point(|&v| v < a);
            if k == 0 {
                0.0
            } else {
                sums[k - 1]
            }
        };
        Ok(queries
            .iter()
            .map(|&a| below(&start_keys, &start_sums, a) - below(&end_keys, &end_sums, a))
            .collect())
    }
}

/// Mean over trees of the leaf each row falls into.
pub fn rf_predict(forest: &Forest, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    forest.check_columns(x)?;
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Argument("prediction inputs contain NaN".into()));
    }
    Ok((0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            forest.predict_row(&row)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn small(n_trees: usize) -> ForestParams {
        ForestParams {
            n_trees,
            ..ForestParams::default()
        }
    }

    fn uniform_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.gen::<f64>())
    }

    fn variance(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn constant_response() {
        let x = uniform_matrix(50, 3, 1);
        let f = rf_fit(&x, &vec![5.0; 50], &small(20), 1).unwrap();
        assert!(rf_predict(&f, &x).unwrap().iter().all(|&p| p == 5.0));
    }

    #[test]
    fn step_function_is_recovered() {
        let x = uniform_matrix(400, 2, 2);
        let y: Vec<f64> = (0..400).map(|i| if x[(i, 0)] > 0.5 { 1.0 } else { 0.0 }).collect();
        let params = ForestParams {
            n_trees: 50,
            max_depth: Some(1),
            features_per_split: Some(2),
            ..ForestParams::default()
        };
        let f = rf_fit(&x, &y, &params, 2).unwrap();
        let pred = rf_predict(&f, &x).unwrap();
        let mse = pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / 400.0;
        assert!(mse < 0.25 * variance(&y), "mse {mse}");
    }

    #[test]
    fn linear_signal_holds_out() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let x = uniform_matrix(3000, 3, 3);
        let y: Vec<f64> = (0..3000).map(|i| 3.0 * x[(i, 0)] + noise.sample(&mut rng)).collect();
        let train: Vec<usize> = (0..2000).collect();
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let f = rf_fit(&xt, &yt, &small(100), 3).unwrap();
        let test: Vec<usize> = (2000..3000).collect();
        let pred = rf_predict(&f, &x.select_rows(&test)).unwrap();
        let truth: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let sse: f64 = pred.iter().zip(&truth).map(|(p, t)| (p - t).powi(2)).sum();
        let r2 = 1.0 - sse / (variance(&truth) * truth.len() as f64);
        assert!(r2 > 0.9, "held-out R2 {r2}");
    }

    #[test]
    fn predictions_within_training_range_and_leaves_big_enough() {
        let x = uniform_matrix(300, 4, 4);
        let y: Vec<f64> = (0..300).map(|i| (10.0 * x[(i, 1)]).sin() + x[(i, 2)]).collect();
        let params = ForestParams {
            n_trees: 30,
            bootstrap: false,
            features_per_split: Some(4),
            ..ForestParams::default()
        };
        let f = rf_fit(&x, &y, &params, 4).unwrap();
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let probe = uniform_matrix(200, 4, 5) * 3.0 - DMatrix::from_element(200, 4, 1.0);
        for p in rf_predict(&f, &probe).unwrap() {
            assert!(p >= lo && p <= hi);
        }
        // without bootstrap every training row lands in a leaf of >= min_leaf rows
        for tree in &f.trees {
            let mut counts = std::collections::HashMap::new();
            for i in 0..300 {
                let row: Vec<f64> = x.row(i).iter().copied().collect();
                let leaf = tree.leaf_of(&row) as *const Node as usize;
                *counts.entry(leaf).or_insert(0usize) += 1;
            }
            assert!(counts.values().all(|&c| c >= 5));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let x = uniform_matrix(200, 3, 6);
        let y: Vec<f64> = (0..200).map(|i| x[(i, 0)] * x[(i, 1)]).collect();
        let a = rf_fit(&x, &y, &small(20), 9).unwrap();
        let b = rf_fit(&x, &y, &small(20), 9).unwrap();
        let c = rf_fit(&x, &y, &small(20), 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn oob_predictions_are_honest() {
        let x = uniform_matrix(500, 2, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let y: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let f = rf_fit(&x, &y, &small(100), 7).unwrap();
        let in_sample = rf_predict(&f, &x).unwrap();
        let mse = |p: &[f64]| p.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 500.0;
        // pure noise: out-of-bag error is near the variance, in-sample error is not
        assert!(mse(f.oob_predictions()) > 0.9 * variance(&y));
        assert!(mse(&in_sample) < mse(f.oob_predictions()));
    }

    #[test]
    fn partial_dependence_matches_brute_force() {
        let x = uniform_matrix(150, 3, 8);
        let y: Vec<f64> = (0..150).map(|i| x[(i, 0)] + 2.0 * x[(i, 1)] * x[(i, 2)]).collect();
        let f = rf_fit(&x, &y, &small(25), 8).unwrap();
        let queries = [-1.0, 0.0, 0.1, 0.33, 0.5, 0.77, 1.0, 2.0];
        let pd = f.partial_dependence(&x, 1, &queries).unwrap();
        for (q, got) in queries.iter().zip(pd) {
            let mut z = x.clone();
            z.column_mut(1).fill(*q);
            let brute = rf_predict(&f, &z).unwrap().iter().sum::<f64>() / 150.0;
            assert!((got - brute).abs() < 1e-10, "{q}: {got} vs {brute}");
        }
        // thresholds themselves are queried exactly
        let t = f.trees[0].nodes.iter().find(|n| n.feature == 1).map(|n| n.threshold);
        if let Some(t) = t {
            let got = f.partial_dependence(&x, 1, &[t]).unwrap()[0];
            let mut z = x.clone();
            z.column_mut(1).fill(t);
            let brute = rf_predict(&f, &z).unwrap().iter().sum::<f64>() / 150.0;
            assert!((got - brute).abs() < 1e-10);
        }
    }

    #[test]
    fn argument_errors() {
        let x = uniform_matrix(20, 2, 9);
        assert!(rf_fit(&x, &[0.0; 19], &small(5), 0).is_err());
        assert!(rf_fit(&DMatrix::zeros(0, 2), &[], &small(5), 0).is_err());
        let f = rf_fit(&x, &[1.0; 20], &small(5), 0).unwrap();
        assert!(rf_predict(&f, &DMatrix::zeros(3, 3)).is_err());
        let mut bad = x.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(rf_fit(&bad, &[1.0; 20], &small(5), 0).is_err());
    }
}
