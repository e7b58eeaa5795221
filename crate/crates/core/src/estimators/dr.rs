use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::design::quantile;
use crate::error::{Error, Result};
use crate::learners::{
    cond_density_fit, cv_bandwidth, kernel_smooth_point, log_grid, rf_fit, Bandwidth, CondDensity, DensityParams,
    Forest, ForestParams, Kernel,
};
use crate::rng::{self, Domain};

/// Outcome regression mu(x, a).
pub trait OutcomeModel: Sync {
    fn predict(&self, x: &[f64], a: f64) -> f64;

    /// `(1/n) sum_j mu(x_j, a)` for every query `a`, over the rows of `x`.
    fn average_over(&self, x: &DMatrix<f64>, queries: &[f64]) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
        Ok(queries
            .par_iter()
            .map(|&a| rows.iter().map(|r| self.predict(r, a)).sum::<f64>() / rows.len() as f64)
            .collect())
    }
}

impl<F: Fn(&[f64], f64) -> f64 + Sync> OutcomeModel for F {
    fn predict(&self, x: &[f64], a: f64) -> f64 {
        self(x, a)
    }
}

/// Conditional treatment density pi(a | x).
pub trait TreatmentDensity: Sync {
    fn density(&self, a: f64, x: &[f64]) -> f64;

    /// `(1/n) sum_j pi(a | x_j)` for every query `a`.
    fn average_over(&self, x: &DMatrix<f64>, queries: &[f64]) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
        Ok(queries
            .par_iter()
            .map(|&a| rows.iter().map(|r| self.density(a, r)).sum::<f64>() / rows.len() as f64)
            .collect())
    }
}

impl<F: Fn(f64, &[f64]) -> f64 + Sync> TreatmentDensity for F {
    fn density(&self, a: f64, x: &[f64]) -> f64 {
        self(a, x)
    }
}

impl TreatmentDensity for CondDensity {
    fn density(&self, a: f64, x: &[f64]) -> f64 {
        self.eval_at_mean(a, self.mean_model.predict_row(x))
    }

    fn average_over(&self, x: &DMatrix<f64>, queries: &[f64]) -> Result<Vec<f64>> {
        let means = self.predict_mean(x)?;
        let n = means.len() as f64;
        Ok(queries
            .par_iter()
            .map(|&a| means.iter().map(|&m| self.eval_at_mean(a, m)).sum::<f64>() / n)
            .collect())
    }
}

/// A forest trained on the covariates with the treatment as last column.
#[derive(Debug, Clone)]
pub struct ForestOutcome {
    pub forest: Forest,
}

impl ForestOutcome {
    pub fn fit(x: &DMatrix<f64>, a: &[f64], y: &[f64], params: &ForestParams, seed: u64) -> Result<Self> {
        let xa = with_treatment(x, a);
        Ok(Self {
            forest: rf_fit(&xa, y, params, seed)?,
        })
    }
}

impl OutcomeModel for ForestOutcome {
    fn predict(&self, x: &[f64], a: f64) -> f64 {
        let mut row = x.to_vec();
        row.push(a);
        self.forest.predict_row(&row)
    }

    fn average_over(&self, x: &DMatrix<f64>, queries: &[f64]) -> Result<Vec<f64>> {
        let xa = with_treatment(x, &vec![0.0; x.nrows()]);
        self.forest.partial_dependence(&xa, x.ncols(), queries)
    }
}

fn with_treatment(x: &DMatrix<f64>, a: &[f64]) -> DMatrix<f64> {
    let p = x.ncols();
    DMatrix::from_fn(x.nrows(), p + 1, |i, j| if j < p { x[(i, j)] } else { a[i] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    Fixed(f64),
    /// K-fold CV over a log grid spanning `lo` to `hi` standard deviations
    /// of the treatment.
    Cv { points: usize, lo: f64, hi: f64, folds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrOptions {
    pub outcome_forest: ForestParams,
    pub density: DensityParams,
    /// Cross-fitting folds for the nuisances.
    pub folds: usize,
    /// Rows with pi(A|X) below this fraction of the marginal density are
    /// trimmed.
    pub min_density_ratio: f64,
    pub kernel: Kernel,
    pub bandwidth: BandwidthChoice,
    /// A cross-validated bandwidth is multiplied by `n^-undersmooth` before
    /// the curve is drawn. CV balances squared bias against variance, so its
    /// bands undercover; 2/15 moves the MSE rate n^-1/5 to n^-1/3.
    pub undersmooth: f64,
    pub grid_points: usize,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub level: f64,
}

impl Default for DrOptions {
    fn default() -> Self {
        Self {
            // Every column is a split candidate. With a third of them the
            // treatment is rarely split on and its slope is flattened.
            outcome_forest: ForestParams {
                n_trees: 200,
                min_leaf: 5,
                features_per_split: Some(64),
                ..ForestParams::default()
            },
            density: DensityParams {
                forest: ForestParams {
                    n_trees: 200,
                    min_leaf: 40,
                    ..ForestParams::default()
                },
                ..DensityParams::default()
            },
            folds: 2,
            min_density_ratio: 0.05,
            kernel: Kernel::Epanechnikov,
            bandwidth: BandwidthChoice::Cv {
                points: 20,
                lo: 0.1,
                hi: 3.0,
                folds: 5,
            },
            undersmooth: 2.0 / 15.0,
            grid_points: 101,
            lower_quantile: 0.01,
            upper_quantile: 0.99,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOutcomes {
    /// One value per input row; `NaN` where trimmed.
    pub xi: Vec<f64>,
    pub trimmed: usize,
}

impl PseudoOutcomes {
    /// Treatment values and pseudo-outcomes of the rows that were kept.
    pub fn kept(&self, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        a.iter()
            .zip(&self.xi)
            .filter(|(_, x)| !x.is_nan())
            .map(|(&ai, &x)| (ai, x))
            .unzip()
    }
}

/// Doubly-robust pseudo-outcomes
/// `xi = (Y - mu(X, A)) / pi(A|X) * mean_j pi(A|x_j) + mean_j mu(x_j, A)`,
/// with both averages over the rows of `x`.
pub fn pseudo_outcome(
    a: &[f64],
    x: &DMatrix<f64>,
    y: &[f64],
    density: &dyn TreatmentDensity,
    mean: &dyn OutcomeModel,
    min_density_ratio: f64,
) -> Result<PseudoOutcomes> {
    let rows: Vec<usize> = (0..a.len()).collect();
    let xi = pseudo_rows(a, x, y, &rows, x, density, mean, min_density_ratio)?;
    finish(xi)
}

fn finish(xi: Vec<f64>) -> Result<PseudoOutcomes> {
    let trimmed = xi.iter().filter(|v| v.is_nan()).count();
    if trimmed == xi.len() {
        return Err(Error::Estimation("every row was trimmed by the density floor".into()));
    }
    Ok(PseudoOutcomes { xi, trimmed })
}

/// Pseudo-outcomes for `rows`, averaging the nuisances over `population`.
#[allow(clippy::too_many_arguments)]
fn pseudo_rows(
    a: &[f64],
    x: &DMatrix<f64>,
    y: &[f64],
    rows: &[usize],
    population: &DMatrix<f64>,
    density: &dyn TreatmentDensity,
    mean: &dyn OutcomeModel,
    min_density_ratio: f64,
) -> Result<Vec<f64>> {
    if a.len() != y.len() || a.len() != x.nrows() {
        return Err(Error::Argument(format!(
            "{} treatments, {} outcomes, {} covariate rows",
            a.len(),
            y.len(),
            x.nrows()
        )));
    }
    let queries: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
    let marginal = density.average_over(population, &queries)?;
    let mu_bar = mean.average_over(population, &queries)?;
    Ok(rows
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let xi_row: Vec<f64> = x.row(i).iter().copied().collect();
            let pi = density.density(a[i], &xi_row);
            if !(pi > 0.0) || pi < min_density_ratio * marginal[k] {
                return f64::NAN;
            }
            (y[i] - mean.predict(&xi_row, a[i])) / pi * marginal[k] + mu_bar[k]
        })
        .collect())
}

/// Cross-fitted pseudo-outcomes: forests for mu and pi are trained off
/// each fold and evaluated on it.
pub fn cross_fit_pseudo_outcomes(
    a: &[f64],
    x: &DMatrix<f64>,
    y: &[f64],
    opts: &DrOptions,
    seed: u64,
) -> Result<PseudoOutcomes> {
    let n = a.len();
    if opts.folds < 2 || opts.folds > n {
        return Err(Error::Argument(format!("need 2 <= folds <= n, got {}", opts.folds)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Domain::Folds, 1));
    let mut xi = vec![f64::NAN; n];
    for k in 0..opts.folds {
        let held: Vec<usize> = order.iter().skip(k).step_by(opts.folds).copied().collect();
        let mut train: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(pos, _)| pos % opts.folds != k)
            .map(|(_, &i)| i)
            .collect();
        train.sort_unstable();
        let xt = x.select_rows(&train);
        let at: Vec<f64> = train.iter().map(|&i| a[i]).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let mu = ForestOutcome::fit(
            &xt,
            &at,
            &yt,
            &opts.outcome_forest,
            rng::derive_seed(seed, Domain::Forest, 2 * k as u64),
        )?;
        let pi = cond_density_fit(
            &at,
            &xt,
            &opts.density,
            rng::derive_seed(seed, Domain::Forest, 2 * k as u64 + 1),
        )?;
        let vals = pseudo_rows(a, x, y, &held, x, &pi, &mu, opts.min_density_ratio)?;
        for (&i, v) in held.iter().zip(vals) {
            xi[i] = v;
        }
    }
    finish(xi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseResponseCurve {
    pub grid: Vec<f64>,
    /// `NaN` where the grid point has no kernel support.
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub out_of_support: Vec<bool>,
    pub level: f64,
    /// Bandwidth the curve was drawn with.
    pub bandwidth: Bandwidth,
    /// The cross-validated bandwidth before undersmoothing, if CV ran.
    pub cv_h: Option<f64>,
    pub trimmed: usize,
    pub treatment: Vec<f64>,
    pub pseudo_outcomes: Vec<f64>,
}

impl DoseResponseCurve {
    fn nearest(&self, a: f64) -> usize {
        let k = self.grid.partition_point(|&g| g < a);
        if k == 0 {
            0
        } else if k == self.grid.len() || a - self.grid[k - 1] <= self.grid[k] - a {
            k - 1
        } else {
            k
        }
    }

    /// Curve value at the grid point nearest to `a`.
    pub fn value_at(&self, a: f64) -> f64 {
        self.estimate[self.nearest(a)]
    }

    /// Share of grid points whose band contains `truth(grid point)`.
    pub fn coverage(&self, truth: impl Fn(f64) -> f64) -> f64 {
        let hits = (0..self.grid.len())
            .filter(|&i| {
                let t = truth(self.grid[i]);
                self.lower[i] <= t && t <= self.upper[i]
            })
            .count();
        hits as f64 / self.grid.len() as f64
    }
}

impl DoseResponseCurve {
    /// Least-squares slope of the pseudo-outcomes on the treatment over the
    /// grid range, with its HC1 standard error. This is the slope of the
    /// best linear fit to the curve.
    pub fn projection_slope(&self) -> Result<(f64, f64)> {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        let (a, xi): (Vec<f64>, Vec<f64>) = self
            .treatment
            .iter()
            .zip(&self.pseudo_outcomes)
            .filter(|(a, _)| (lo..=hi).contains(*a))
            .map(|(a, x)| (*a, *x))
            .unzip();
        let n = a.len() as f64;
        if n < 3.0 {
            return Err(Error::Estimation("too few rows inside the grid range".into()));
        }
        let ma = a.iter().sum::<f64>() / n;
        let mx = xi.iter().sum::<f64>() / n;
        let saa: f64 = a.iter().map(|v| (v - ma).powi(2)).sum();
        if !(saa > 0.0) {
            return Err(Error::Estimation("treatment does not vary inside the grid range".into()));
        }
        let slope = a.iter().zip(&xi).map(|(a, x)| (a - ma) * (x - mx)).sum::<f64>() / saa;
        let meat: f64 = a
            .iter()
            .zip(&xi)
            .map(|(a, x)| {
                let e = x - mx - slope * (a - ma);
                ((a - ma) * e).powi(2)
            })
            .sum();
        let se = (meat * n / (n - 2.0)).sqrt() / saa;
        Ok((slope, se))
    }
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

/// Local-constant regression of `xi` on `a` over an even grid between two
/// quantiles of `a`, with pointwise normal bands.
pub fn dose_response(xi: &[f64], a: &[f64], opts: &DrOptions, seed: u64) -> Result<DoseResponseCurve> {
    if xi.len() != a.len() || xi.is_empty() {
        return Err(Error::Argument("dose response needs matching, non-empty inputs".into()));
    }
    if xi.iter().chain(a).any(|v| !v.is_finite()) {
        return Err(Error::Argument("pseudo-outcomes and treatments must be finite".into()));
    }
    if opts.grid_points < 2 || !(opts.lower_quantile < opts.upper_quantile) {
        return Err(Error::Argument("grid needs two points and increasing quantiles".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::Argument(format!("confidence level {} outside (0, 1)", opts.level)));
    }
    if !(opts.undersmooth >= 0.0) {
        return Err(Error::Argument(format!("undersmoothing exponent {} is negative", opts.undersmooth)));
    }
    let (bandwidth, cv_h) = match &opts.bandwidth {
        BandwidthChoice::Fixed(h) => (Bandwidth::new(*h, opts.kernel)?, None),
        BandwidthChoice::Cv { points, lo, hi, folds } => {
            let s = sd(a);
            if !(s > 0.0) {
                return Err(Error::Argument("treatment does not vary".into()));
            }
            let cv = cv_bandwidth(a, xi, opts.kernel, &log_grid(lo * s, hi * s, *points), *folds, seed)?;
            let bw = Bandwidth {
                h: cv.h * (a.len() as f64).powf(-opts.undersmooth),
                ..cv
            };
            (bw, Some(cv.h))
        }
    };
    let lo = quantile(a, opts.lower_quantile);
    let hi = quantile(a, opts.upper_quantile);
    if !(hi > lo) {
        return Err(Error::Argument("treatment quantile range is empty".into()));
    }
    let m = opts.grid_points;
    let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + opts.level / 2.0);
    let points: Vec<Option<(f64, f64)>> = grid
        .par_iter()
        .map(|&g| match kernel_smooth_point(g, a, xi, None, &bandwidth) {
            Ok(p) => Ok(Some((p.estimate, p.se))),
            Err(Error::OutOfSupport { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let mut curve = DoseResponseCurve {
        grid,
        estimate: Vec::with_capacity(m),
        se: Vec::with_capacity(m),
        lower: Vec::with_capacity(m),
        upper: Vec::with_capacity(m),
        out_of_support: Vec::with_capacity(m),
        level: opts.level,
        bandwidth,
        cv_h,
        trimmed: 0,
        treatment: a.to_vec(),
        pseudo_outcomes: xi.to_vec(),
    };
    for p in points {
        let (e, s) = p.unwrap_or((f64::NAN, f64::NAN));
        curve.estimate.push(e);
        curve.se.push(s);
        curve.lower.push(e - z * s);
        curve.upper.push(e + z * s);
        curve.out_of_support.push(p.is_none());
    }
    Ok(curve)
}

/// Cross-fitted doubly-robust dose-response curve of `y` in `a` given
/// covariates `x`.
pub fn dr_curve(a: &[f64], x: &DMatrix<f64>, y: &[f64], opts: &DrOptions, seed: u64) -> Result<DoseResponseCurve> {
    let po = cross_fit_pseudo_outcomes(a, x, y, opts, seed)?;
    let (ak, xik) = po.kept(a);
    let mut curve = dose_response(&xik, &ak, opts, seed)?;
    curve.trimmed = po.trimmed;
    Ok(curve)
}

/// `(E[Y^a1] - E[Y^a0]) / (a1 - a0)`, with both points snapped to the
/// nearest grid value.
pub fn ate_between(curve: &DoseResponseCurve, a1: f64, a0: f64) -> Result<f64> {
    if a1 == a0 || a1.is_nan() || a0.is_nan() {
        return Err(Error::Argument(format!("treatment levels must differ, got {a1} and {a0}")));
    }
    let (i1, i0) = (curve.nearest(a1), curve.nearest(a0));
    if i1 == i0 {
        return Err(Error::Argument(format!("{a1} and {a0} snap to the same grid point")));
    }
    let (e1, e0) = (curve.estimate[i1], curve.estimate[i0]);
    if e1.is_nan() || e0.is_nan() {
        return Err(Error::OutOfSupport {
            query: if e1.is_nan() { curve.grid[i1] } else { curve.grid[i0] },
        });
    }
    Ok((e1 - e0) / (curve.grid[i1] - curve.grid[i0]))
}
