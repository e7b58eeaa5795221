//! Conditional density of a continuous treatment: forest mean plus a
//! homoskedastic kernel density of the residuals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::forest::{rf_fit, rf_predict, Forest, ForestParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityParams {
    pub forest: ForestParams,
    /// Multiples of the rule-of-thumb bandwidth tried by leave-one-out
    /// likelihood.
    pub bandwidth_multipliers: Vec<f64>,
    /// Residual sd below this fraction of the treatment sd counts as a
    /// deterministic treatment.
    pub min_residual_ratio: f64,
    /// Resolution of the tabulated residual density.
    pub grid_points: usize,
    /// At most this many residuals enter the likelihood search.
    pub cv_max_points: usize,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            forest: ForestParams {
                min_leaf: 40,
                ..ForestParams::default()
            },
            bandwidth_multipliers: vec![0.5, 0.7, 1.0, 1.4, 2.0],
            min_residual_ratio: 0.05,
            grid_points: 4096,
            cv_max_points: 2000,
        }
    }
}

/// Gaussian kernel density, tabulated on an even grid and linearly
/// interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualKde {
    pub h: f64,
    lo: f64,
    step: f64,
    table: Vec<f64>,
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
}

fn phi(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn silverman(r: &[f64]) -> f64 {
    let mut sorted = r.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let s = sd(r);
    let spread = if iqr > 0.0 { s.min(iqr) } else { s };
    0.9 * spread * (r.len() as f64).powf(-0.2)
}

impl ResidualKde {
    /// Bandwidth by leave-one-out likelihood over multiples of Silverman's
    /// rule.
    pub fn fit(residuals: &[f64], multipliers: &[f64], grid_points: usize, cv_max_points: usize) -> Result<Self> {
        if residuals.len() < 2 {
            return Err(Error::DegenerateDensity("need at least two residuals".into()));
        }
        let h0 = silverman(residuals);
        if !(h0 > 0.0) {
            return Err(Error::DegenerateDensity("residuals have zero spread".into()));
        }
        let stride = (residuals.len() + cv_max_points.max(2) - 1) / cv_max_points.max(2);
        let cv: Vec<f64> = residuals.iter().step_by(stride.max(1)).copied().collect();
        let mut best = (f64::NEG_INFINITY, h0);
        for &m in multipliers.iter().filter(|m| **m > 0.0) {
            let h = m * h0;
            let ll: f64 = cv
                .iter()
                .enumerate()
                .map(|(i, &ri)| {
                    let s: f64 = cv
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, &rj)| phi((ri - rj) / h))
                        .sum();
                    (s / ((cv.len() - 1) as f64 * h)).max(1e-300).ln()
                })
                .sum();
            if ll > best.0 {
                best = (ll, h);
            }
        }
        Ok(Self::with_bandwidth(residuals, best.1, grid_points))
    }

    pub fn with_bandwidth(residuals: &[f64], h: f64, grid_points: usize) -> Self {
        let lo_r = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi_r = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = lo_r - 8.0 * h;
        let hi = hi_r + 8.0 * h;
        let m = grid_points.max(16);
        let step = (hi - lo) / (m - 1) as f64;
        let mut sorted = residuals.to_vec();
        sorted.sort_by(f64::total_cmp);
        let norm = 1.0 / (residuals.len() as f64 * h);
        let table = (0..m)
            .map(|g| {
                let t = lo + g as f64 * step;
                let from = sorted.partition_point(|&r| r < t - 8.0 * h);
                let to = sorted.partition_point(|&r| r <= t + 8.0 * h);
                sorted[from..to].iter().map(|&r| phi((t - r) / h)).sum::<f64>() * norm
            })
            .collect();
        Self { h, lo, step, table }
    }

    pub fn density(&self, r: f64) -> f64 {
        let pos = (r - self.lo) / self.step;
        if !(pos >= 0.0) || pos >= (self.table.len() - 1) as f64 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.table[i] * (1.0 - frac) + self.table[i + 1] * frac
    }

    /// Support of the tabulated density.
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (self.table.len() - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondDensity {
    pub mean_model: Forest,
    pub residual_density: ResidualKde,
}

/// Fit pi(a | x) = kde(a - m(x)), with `m` a regression forest of the
/// treatment on the covariates and the kernel density built from
/// out-of-bag residuals.
pub fn cond_density_fit(a: &[f64], x: &DMatrix<f64>, params: &DensityParams, seed: u64) -> Result<CondDensity> {
    let forest = rf_fit(x, a, &params.forest, seed)?;
    let in_sample = rf_predict(&forest, x)?;
    let residuals: Vec<f64> = a
        .iter()
        .zip(forest.oob_predictions())
        .zip(&in_sample)
        .map(|((&ai, &oob), &fit)| ai - if oob.is_nan() { fit } else { oob })
        .collect();
    let scale = sd(a);
    let mut spread = sd(&residuals);
    if spread < 0.5 * scale {
        // A smooth mean model leaves sizeable residuals even for a
        // deterministic treatment, so look again with fully grown trees.
        spread = spread.min(flexible_residual_sd(a, x, seed)?);
    }
    if !(spread > params.min_residual_ratio * scale) {
        return Err(Error::DegenerateDensity(format!(
            "treatment is (nearly) determined by the covariates: residual sd {spread:.3e}, treatment sd {scale:.3e}"
        )));
    }
    let kde = ResidualKde::fit(&residuals, &params.bandwidth_multipliers, params.grid_points, params.cv_max_points)?;
    Ok(CondDensity {
        mean_model: forest,
        residual_density: kde,
    })
}

fn flexible_residual_sd(a: &[f64], x: &DMatrix<f64>, seed: u64) -> Result<f64> {
    let params = ForestParams {
        n_trees: 50,
        min_leaf: 1,
        features_per_split: Some(x.ncols()),
        ..ForestParams::default()
    };
    let forest = rf_fit(x, a, &params, seed ^ 0x5eed)?;
    let r: Vec<f64> = a
        .iter()
        .zip(forest.oob_predictions())
        .filter(|(_, o)| !o.is_nan())
        .map(|(ai, o)| ai - o)
        .collect();
    Ok(if r.len() > 1 { sd(&r) } else { 0.0 })
}

impl CondDensity {
    /// Density at `a` given a precomputed conditional mean.
    pub fn eval_at_mean(&self, a: f64, mean: f64) -> f64 {
        self.residual_density.density(a - mean)
    }

    pub fn predict_mean(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        rf_predict(&self.mean_model, x)
    }
}

pub fn cond_density_eval(density: &CondDensity, a: f64, x: &[f64]) -> Result<f64> {
    if x.len() != density.mean_model.n_features() {
        return Err(Error::Argument(format!(
            "density was fitted on {} covariates, got {}",
            density.mean_model.n_features(),
            x.len()
        )));
    }
    Ok(density.eval_at_mean(a, density.mean_model.predict_row(x)))
}
