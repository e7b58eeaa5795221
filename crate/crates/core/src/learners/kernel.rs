//! Local-constant (Nadaraya-Watson) smoothing and bandwidth choice.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    pub fn weight(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// Distance in bandwidths beyond which the weight is zero, or below
    /// 1e-16 of the peak for the Gaussian.
    pub fn reach(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 1.0,
            Kernel::Gaussian => 8.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub h: f64,
    pub kernel: Kernel,
    /// Cross-validated mean squared error; `NaN` when not chosen by CV.
    pub cv_score: f64,
}

impl Bandwidth {
    pub fn new(h: f64, kernel: Kernel) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Argument(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self {
            h,
            kernel,
            cv_score: f64::NAN,
        })
    }
}

/// Estimate with a pointwise standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothPoint {
    pub estimate: f64,
    /// Heteroskedasticity-robust: sqrt(sum w^2 (v - m)^2) / sum w.
    pub se: f64,
    pub weight_sum: f64,
}

fn check_lengths(a: &[f64], values: &[f64]) -> Result<()> {
    if a.len() != values.len() {
        return Err(Error::Argument(format!("{} treatments for {} values", a.len(), values.len())));
    }
    if a.is_empty() {
        return Err(Error::Argument("kernel smoothing needs data".into()));
    }
    Ok(())
}

/// Nadaraya-Watson estimate at `a0`.
pub fn kernel_smooth(a0: f64, a: &[f64], values: &[f64], bw: &Bandwidth) -> Result<f64> {
    kernel_smooth_point(a0, a, values, None, bw).map(|p| p.estimate)
}

/// Nadaraya-Watson estimate at `a0` with optional extra observation weights
/// and a pointwise standard error.
pub fn kernel_smooth_point(
    a0: f64,
    a: &[f64],
    values: &[f64],
    weights: Option<&[f64]>,
    bw: &Bandwidth,
) -> Result<SmoothPoint> {
    check_lengths(a, values)?;
    if let Some(w) = weights {
        if w.len() != a.len() || w.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Argument("weights must be non-negative, one per row".into()));
        }
    }
    let mut sw = 0.0;
    let mut swv = 0.0;
    let k: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(i, &ai)| bw.kernel.weight((ai - a0) / bw.h) * weights.map_or(1.0, |w| w[i]))
        .collect();
    for (ki, vi) in k.iter().zip(values) {
        if *ki > 0.0 {
            sw += ki;
            swv += ki * vi;
        }
    }
    if !(sw > 0.0) {
        return Err(Error::OutOfSupport { query: a0 });
    }
    let m = swv / sw;
    let var: f64 = k
        .iter()
        .zip(values)
        .filter(|(ki, _)| **ki > 0.0)
        .map(|(ki, vi)| ki * ki * (vi - m).powi(2))
        .sum();
    Ok(SmoothPoint {
        estimate: m,
        se: var.sqrt() / sw,
        weight_sum: sw,
    })
}

/// K-fold cross-validated bandwidth. Held-out points with no kernel weight
/// are predicted by the training-fold mean. Ties go to the larger `h`.
pub fn cv_bandwidth(
    a: &[f64],
    values: &[f64],
    kernel: Kernel,
    h_grid: &[f64],
    n_folds: usize,
    seed: u64,
) -> Result<Bandwidth> {
    check_lengths(a, values)?;
    if h_grid.is_empty() {
        return Err(Error::Argument("bandwidth grid is empty".into()));
    }
    if h_grid.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::Argument("bandwidths must be positive".into()));
    }
    if n_folds < 2 || n_folds > a.len() {
        return Err(Error::Argument(format!("need 2 <= folds <= n, got {n_folds}")));
    }
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Domain::Folds, 0));
    let mut fold = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % n_folds;
    }
    let fold_means: Vec<f64> = (0..n_folds)
        .map(|k| {
            let (s, c) = (0..n)
                .filter(|&i| fold[i] != k)
                .fold((0.0, 0usize), |(s, c), i| (s + values[i], c + 1));
            s / c as f64
        })
        .collect();

    let mut by_a: Vec<usize> = (0..n).collect();
    by_a.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let sorted: Vec<f64> = by_a.iter().map(|&i| a[i]).collect();
    let reach = kernel.reach();
    let scores: Vec<f64> = h_grid
        .par_iter()
        .map(|&h| {
            let mut sse = 0.0;
            for i in 0..n {
                let lo = sorted.partition_point(|&v| v < a[i] - reach * h);
                let hi = sorted.partition_point(|&v| v <= a[i] + reach * h);
                let mut sw = 0.0;
                let mut swv = 0.0;
                for &j in &by_a[lo..hi] {
                    if fold[j] == fold[i] {
                        continue;
                    }
                    let w = kernel.weight((a[j] - a[i]) / h);
                    sw += w;
                    swv += w * values[j];
                }
                let pred = if sw > 0.0 { swv / sw } else { fold_means[fold[i]] };
                sse += (values[i] - pred).powi(2);
            }
            sse / n as f64
        })
        .collect();
    let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * best.abs() + 1e-12;
    let (h, score) = h_grid
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s <= best + tol)
        .map(|(&h, &s)| (h, s))
        .fold((f64::NEG_INFINITY, f64::NAN), |acc, (h, s)| if h > acc.0 { (h, s) } else { acc });
    Ok(Bandwidth {
        h,
        kernel,
        cv_score: score,
    })
}

/// `n` bandwidths spaced evenly on a log scale between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (l, u) = (lo.ln(), hi.ln());
    (0..n).map(|i| (l + (u - l) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn bw(h: f64) -> Bandwidth {
        Bandwidth::new(h, Kernel::Epanechnikov).unwrap()
    }

    #[test]
    fn constant_values() {
        let a: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let v = vec![3.5; 50];
        for q in [0.0, 1.3, 4.9] {
            assert!((kernel_smooth(q, &a, &v, &bw(0.4)).unwrap() - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_bandwidth_gives_the_mean() {
        let a: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let v: Vec<f64> = a.iter().map(|x| x * x).collect();
        let mean = v.iter().sum::<f64>() / 40.0;
        let est = kernel_smooth(7.0, &a, &v, &bw(1e9)).unwrap();
        assert!((est - mean).abs() < 1e-6);
        let g = Bandwidth::new(1e9, Kernel::Gaussian).unwrap();
        assert!((kernel_smooth(7.0, &a, &v, &g).unwrap() - mean).abs() < 1e-6);
    }

    #[test]
    fn identity_target_small_bias() {
        let a: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let h = 0.02;
        for q in [0.2, 0.5, 0.8] {
            let est = kernel_smooth(q, &a, &a, &bw(h)).unwrap();
            assert!((est - q).abs() <= h);
        }
    }

    #[test]
    fn out_of_support() {
        let a = [0.0, 1.0];
        let v = [1.0, 2.0];
        assert!(matches!(kernel_smooth(10.0, &a, &v, &bw(0.5)), Err(Error::OutOfSupport { .. })));
    }

    #[test]
    fn weight_rescaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let v: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let w: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let w7: Vec<f64> = w.iter().map(|x| 7.0 * x).collect();
        let p = kernel_smooth_point(0.4, &a, &v, Some(&w), &bw(0.3)).unwrap();
        let q = kernel_smooth_point(0.4, &a, &v, Some(&w7), &bw(0.3)).unwrap();
        assert!((p.estimate - q.estimate).abs() < 1e-12);
        assert!((p.se - q.se).abs() < 1e-12);
    }

    #[test]
    fn cv_constant_picks_largest() {
        let a: Vec<f64> = (0..60).map(|i| i as f64 / 60.0).collect();
        let grid = log_grid(0.05, 1.0, 8);
        let b = cv_bandwidth(&a, &vec![2.0; 60], Kernel::Epanechnikov, &grid, 5, 1).unwrap();
        assert_eq!(b.h, *grid.last().unwrap());
    }

    #[test]
    fn cv_wiggly_picks_small_and_smooth_picks_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 600;
        let a: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let grid = log_grid(0.01, 1.0, 15);
        let median = grid[7];
        let small = Normal::new(0.0, 0.05).unwrap();
        let wiggly: Vec<f64> = a.iter().map(|x| (10.0 * x).sin() + small.sample(&mut rng)).collect();
        let b = cv_bandwidth(&a, &wiggly, Kernel::Epanechnikov, &grid, 5, 3).unwrap();
        assert!(b.h < median, "wiggly h {}", b.h);
        let big = Normal::new(0.0, 3.0).unwrap();
        let smooth: Vec<f64> = a.iter().map(|x| 0.5 * x + big.sample(&mut rng)).collect();
        let b = cv_bandwidth(&a, &smooth, Kernel::Epanechnikov, &grid, 5, 4).unwrap();
        assert!(b.h > median, "smooth h {}", b.h);
    }

    #[test]
    fn cv_argument_errors() {
        let a = [0.0, 1.0, 2.0];
        assert!(cv_bandwidth(&a, &a, Kernel::Gaussian, &[], 2, 0).is_err());
        assert!(cv_bandwidth(&a, &a, Kernel::Gaussian, &[1.0], 1, 0).is_err());
        assert!(Bandwidth::new(0.0, Kernel::Gaussian).is_err());
    }
}
