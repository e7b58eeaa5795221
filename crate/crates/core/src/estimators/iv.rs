use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::build_design;
use super::ols::{absorb, cluster_codes, collinear_columns, column_norms, inverse_gram, matrix_rows, sandwich};
use super::result::{Coefficient, EstimateResult, FirstStage, Notes};
use super::{Condition, Covariance, FixedEffect, RegressionSpec};
use crate::error::{Error, Result};
use crate::table::DataTable;

/// Just-identified 2SLS: one endogenous regressor, one excluded instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvSpec {
    pub outcome: String,
    pub endogenous: String,
    pub instrument: String,
    #[serde(default)]
    pub exogenous: Vec<String>,
    #[serde(default)]
    pub fixed_effects: Vec<FixedEffect>,
    #[serde(default)]
    pub cluster: Option<String>,
    #[serde(default)]
    pub covariance: Covariance,
    #[serde(default)]
    pub filter: Vec<Condition>,
}

/// First-stage F below this is flagged as weak.
pub const WEAK_INSTRUMENT_F: f64 = 10.0;

impl IvSpec {
    /// The equivalent OLS spec with the instrument carried as an extra
    /// column when it differs from the endogenous regressor.
    fn as_regression(&self) -> RegressionSpec {
        let mut treatments = vec![self.endogenous.clone()];
        if self.instrument != self.endogenous {
            treatments.push(self.instrument.clone());
        }
        RegressionSpec {
            outcome: self.outcome.clone(),
            treatments,
            covariates: self.exogenous.clone(),
            fixed_effects: self.fixed_effects.clone(),
            cluster: self.cluster.clone(),
            covariance: self.covariance,
            interactions: Vec::new(),
            filter: self.filter.clone(),
        }
    }
}

fn columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), idx.len(), |i, j| x[(i, idx[j])])
}

/// Two-stage least squares with fixed effects absorbed from every variable
/// and cluster-robust errors. Reports the first stage and the reduced form.
pub fn tsls(panel: &DataTable, spec: &IvSpec) -> Result<EstimateResult> {
    let reg = spec.as_regression();
    let design = build_design(panel, &reg)?;
    let ab = absorb(&design)?;
    let p = design.x.ncols();
    let n_exo = spec.exogenous.len();
    let exo_start = p - n_exo;
    let instr_col = if exo_start == 2 { 1 } else { 0 };
    let exo: Vec<usize> = (exo_start..p).collect();
    let z_idx: Vec<usize> = std::iter::once(instr_col).chain(exo.iter().copied()).collect();
    let x_idx: Vec<usize> = std::iter::once(0).chain(exo.iter().copied()).collect();

    let norms = column_norms(&design, &ab.keep);
    let pick_names = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&j| design.names[j].clone()).collect() };
    let pick_norms = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&j| norms[j]).collect() };
    let z = columns(&ab.x, &z_idx);
    let x = columns(&ab.x, &x_idx);
    for (m, idx) in [(&z, &z_idx), (&x, &x_idx)] {
        let bad = collinear_columns(m, &pick_norms(idx), &pick_names(idx));
        if !bad.is_empty() {
            return Err(Error::RankDeficient { columns: bad });
        }
    }
    let n = ab.y.len();
    let k = x.ncols() + ab.absorbed_dof;
    if n <= k {
        return Err(Error::Estimation(format!("{n} observations for {k} parameters")));
    }
    let cluster = cluster_codes(spec.covariance, &ab);
    let y = DVector::from_column_slice(&ab.y);
    let endog = x.column(0).into_owned();

    // First stage and reduced form.
    let zz_inv = inverse_gram(&z)?;
    let pi = &zz_inv * (z.transpose() * &endog);
    let fitted_endog = &z * &pi;
    let fs_resid: Vec<f64> = (0..n).map(|i| endog[i] - fitted_endog[i]).collect();
    let (fs_vcov, g) = sandwich(&zz_inv, &z, &fs_resid, cluster, z.ncols() + ab.absorbed_dof);
    let df = if cluster.is_some() { g as f64 - 1.0 } else { (n - k) as f64 };
    let fs_coef = Coefficient::new(&spec.instrument, pi[0], fs_vcov[(0, 0)].max(0.0).sqrt(), df);
    let f_stat = fs_coef.t * fs_coef.t;
    let rho = &zz_inv * (z.transpose() * &y);

    // Second stage.
    let mut xhat = x.clone();
    xhat.set_column(0, &fitted_endog);
    let bread = inverse_gram(&xhat)?;
    let beta = &bread * (xhat.transpose() * &y);
    let fitted = &x * &beta;
    let resid: Vec<f64> = (0..n).map(|i| ab.y[i] - fitted[i]).collect();
    let (vcov, _) = sandwich(&bread, &xhat, &resid, cluster, k);
    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let tss: f64 = ab.y.iter().map(|v| v * v).sum();

    let names = pick_names(&x_idx);
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient::new(name, beta[j], vcov[(j, j)].max(0.0).sqrt(), df))
        .collect();
    let weak = !(f_stat >= WEAK_INSTRUMENT_F);
    let mut messages = Vec::new();
    if weak {
        messages.push(format!("weak first stage: F = {f_stat:.2}"));
    }
    Ok(EstimateResult {
        outcome: spec.outcome.clone(),
        method: "2SLS".into(),
        coefficients,
        vcov: matrix_rows(&vcov),
        n_obs: n,
        n_clusters: g,
        clustered: cluster.is_some(),
        r2_within: if tss > 0.0 { 1.0 - ssr / tss } else { f64::NAN },
        df,
        fixed_effects: design.fe_names.clone(),
        first_stage: Some(FirstStage {
            instrument: spec.instrument.clone(),
            coefficient: fs_coef,
            f_stat,
            reduced_form: rho[0],
            weak,
        }),
        notes: Notes {
            filtered_out: design.filtered_out,
            dropped_missing: design.dropped_missing,
            dropped_singletons: ab.dropped_singletons,
            demeaning_iterations: ab.iterations,
            absorbed_dof: ab.absorbed_dof,
            messages,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::fe_ols;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// y = -0.5 e + w + u, e = -2 z + v, with v and u correlated.
    fn panel(n: usize, seed: u64) -> DataTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: [Vec<f64>; 6] = Default::default();
        for _ in 0..n {
            let z = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            let w: f64 = rng.sample(StandardNormal);
            let c: f64 = rng.sample(StandardNormal);
            let v = c + rng.sample::<f64, _>(StandardNormal);
            let u = c + rng.sample::<f64, _>(StandardNormal);
            let e = -2.0 * z + 0.3 * w + v;
            let y = -0.5 * e + w + u;
            let g = rng.gen_range(0..10) as f64;
            for (col, v) in cols.iter_mut().zip([y, e, z, w, g, rng.gen_range(0..80) as f64]) {
                col.push(v);
            }
        }
        let mut t = DataTable::new(n);
        for (name, c) in ["y", "e", "z", "w", "g", "cl"].iter().zip(cols) {
            t.insert(*name, c).unwrap();
        }
        t
    }

    fn spec(instrument: &str) -> IvSpec {
        IvSpec {
            outcome: "y".into(),
            endogenous: "e".into(),
            instrument: instrument.into(),
            exogenous: vec!["w".into()],
            fixed_effects: vec![FixedEffect::of("g")],
            cluster: Some("cl".into()),
            covariance: Covariance::Cluster,
            filter: Vec::new(),
        }
    }

    #[test]
    fn self_instrument_is_ols() {
        let t = panel(500, 1);
        let iv = tsls(&t, &spec("e")).unwrap();
        let ols = fe_ols(
            &t,
            &RegressionSpec::new("y", &["e"]).covariates(&["w"]).fixed_effects(&[&["g"]]).cluster("cl"),
        )
        .unwrap();
        for (a, b) in iv.coefficients.iter().zip(&ols.coefficients) {
            assert!((a.estimate - b.estimate).abs() < 1e-10);
            assert!((a.se - b.se).abs() < 1e-10);
        }
    }

    #[test]
    fn indirect_least_squares() {
        let t = panel(700, 2);
        let iv = tsls(&t, &spec("z")).unwrap();
        let fs = iv.first_stage.as_ref().unwrap();
        let ratio = fs.reduced_form / fs.coefficient.estimate;
        assert!((iv.coefficients[0].estimate - ratio).abs() < 1e-8);
    }

    #[test]
    fn recovers_truth_where_ols_is_biased() {
        let t = panel(5000, 3);
        let iv = tsls(&t, &spec("z")).unwrap();
        let fs = iv.first_stage.as_ref().unwrap();
        assert!(fs.coefficient.estimate < 0.0);
        assert!(fs.f_stat > 100.0 && !fs.weak);
        assert!(iv.coefficients[0].covers(-0.5, 2.5));
        let ols = fe_ols(
            &t,
            &RegressionSpec::new("y", &["e"]).covariates(&["w"]).fixed_effects(&[&["g"]]).cluster("cl"),
        )
        .unwrap();
        assert!(ols.coefficients[0].estimate > -0.35);
    }

    #[test]
    fn weak_instrument_is_flagged() {
        let mut t = panel(300, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        t.insert("noise", (0..300).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect())
            .unwrap();
        let r = tsls(&t, &spec("noise")).unwrap();
        let fs = r.first_stage.unwrap();
        assert!(fs.weak, "F {}", fs.f_stat);
        assert!(!r.notes.messages.is_empty());
    }
}
