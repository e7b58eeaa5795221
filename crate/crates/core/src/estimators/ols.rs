use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::design::{build_design, Design};
use super::result::{Coefficient, EstimateResult, Notes};
use super::{Covariance, RegressionSpec};
use crate::error::{Error, Result};

const DEMEAN_TOL: f64 = 1e-10;
const DEMEAN_MAX_ITER: usize = 10_000;

/// Design after dropping singletons and sweeping out the fixed effects.
#[derive(Debug, Clone)]
pub struct Absorbed {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Design rows that survived singleton removal.
    pub keep: Vec<usize>,
    pub cluster: Option<Vec<usize>>,
    pub iterations: usize,
    pub absorbed_dof: usize,
    pub dropped_singletons: usize,
}

fn recode(codes: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = codes
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Rows left after repeatedly removing observations that are alone in
/// some fixed-effect level.
fn drop_singletons(fe: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut keep: Vec<usize> = (0..n).collect();
    loop {
        let mut alone = vec![false; keep.len()];
        for codes in fe {
            let mut count = std::collections::HashMap::new();
            for &r in &keep {
                *count.entry(codes[r]).or_insert(0usize) += 1;
            }
            for (i, &r) in keep.iter().enumerate() {
                if count[&codes[r]] == 1 {
                    alone[i] = true;
                }
            }
        }
        if !alone.iter().any(|&a| a) {
            return keep;
        }
        keep = keep.iter().zip(&alone).filter(|(_, &a)| !a).map(|(&r, _)| r).collect();
        if keep.is_empty() {
            return keep;
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the bipartite graph linking levels of two groups.
fn components(a: &[usize], na: usize, b: &[usize], nb: usize) -> usize {
    let mut parent: Vec<usize> = (0..na + nb).collect();
    for (&i, &j) in a.iter().zip(b) {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, na + j));
        if ri != rj {
            parent[ri] = rj;
        }
    }
    (0..na + nb).filter(|&i| find(&mut parent, i) == i).count()
}

/// Every level of `codes` lies inside a single cluster.
fn nested_in(codes: &[usize], n_levels: usize, cluster: &[usize]) -> bool {
    let mut owner = vec![usize::MAX; n_levels];
    for (&c, &g) in codes.iter().zip(cluster) {
        if owner[c] == usize::MAX {
            owner[c] = g;
        } else if owner[c] != g {
            return false;
        }
    }
    true
}

/// Degrees of freedom of the absorbed effects: exact for up to two groups
/// (levels minus redundancies from connected components), one redundancy
/// per extra group beyond that. Groups nested within clusters are not
/// counted.
fn absorbed_dof(groups: &[(Vec<usize>, usize)], cluster: Option<&[usize]>) -> usize {
    let counted: Vec<&(Vec<usize>, usize)> = groups
        .iter()
        .filter(|(codes, n)| cluster.map_or(true, |c| !nested_in(codes, *n, c)))
        .collect();
    match counted.len() {
        0 => 1,
        1 => counted[0].1,
        _ => {
            let (a, na) = counted[0];
            let (b, nb) = counted[1];
            let mut dof = na + nb - components(a, *na, b, *nb);
            for g in &counted[2..] {
                dof += g.1 - 1;
            }
            dof
        }
    }
}

/// Alternating projections on one column. Returns the sweeps used.
fn demean_column(v: &mut [f64], groups: &[(Vec<usize>, usize)], counts: &[Vec<f64>]) -> Result<usize> {
    if groups.is_empty() {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
        return Ok(1);
    }
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut sums: Vec<Vec<f64>> = groups.iter().map(|(_, n)| vec![0.0; *n]).collect();
    for iter in 1..=DEMEAN_MAX_ITER {
        let mut change = 0.0f64;
        for ((codes, _), (s, cnt)) in groups.iter().zip(sums.iter_mut().zip(counts)) {
            s.iter_mut().for_each(|x| *x = 0.0);
            for (&c, &x) in codes.iter().zip(v.iter()) {
                s[c] += x;
            }
            for (m, c) in s.iter_mut().zip(cnt) {
                *m /= c;
            }
            for (&c, x) in codes.iter().zip(v.iter_mut()) {
                *x -= s[c];
            }
            change = change.max(s.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
        if groups.len() == 1 || change <= DEMEAN_TOL * scale {
            return Ok(iter);
        }
    }
    Err(Error::Convergence {
        iterations: DEMEAN_MAX_ITER,
        detail: "fixed-effect demeaning".into(),
    })
}

/// Drops singletons and sweeps the fixed effects out of `y` and every
/// column of `x`. With no fixed effects only the constant is removed.
pub fn absorb(design: &Design) -> Result<Absorbed> {
    let n = design.y.len();
    let keep = if design.fe.is_empty() {
        (0..n).collect()
    } else {
        drop_singletons(&design.fe, n)
    };
    if keep.is_empty() {
        return Err(Error::Estimation("every observation is a fixed-effect singleton".into()));
    }
    let groups: Vec<(Vec<usize>, usize)> = design
        .fe
        .iter()
        .map(|codes| recode(&keep.iter().map(|&r| codes[r]).collect::<Vec<_>>()))
        .collect();
    let counts: Vec<Vec<f64>> = groups
        .iter()
        .map(|(codes, n)| {
            let mut c = vec![0.0; *n];
            codes.iter().for_each(|&k| c[k] += 1.0);
            c
        })
        .collect();
    let cluster = design
        .cluster
        .as_ref()
        .map(|c| recode(&keep.iter().map(|&r| c[r]).collect::<Vec<_>>()).0);

    let mut cols: Vec<Vec<f64>> = (0..design.x.ncols())
        .map(|j| keep.iter().map(|&r| design.x[(r, j)]).collect())
        .collect();
    cols.push(keep.iter().map(|&r| design.y[r]).collect());
    let iterations = cols
        .par_iter_mut()
        .map(|c| demean_column(c, &groups, &counts))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let y = cols.pop().expect("outcome column");
    let m = keep.len();
    let x = DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
    Ok(Absorbed {
        absorbed_dof: absorbed_dof(&groups, cluster.as_deref()),
        x,
        y,
        dropped_singletons: n - m,
        keep,
        cluster,
        iterations,
    })
}

/// Names of columns that are (numerically) linear combinations of earlier
/// columns, found by Gram-Schmidt against the raw column scale.
pub(crate) fn collinear_columns(x: &DMatrix<f64>, raw_norms: &[f64], names: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..x.ncols() {
        let mut v = x.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v.axpy(-d, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= 1e-9 * raw_norms[j].max(f64::MIN_POSITIVE) || norm == 0.0 {
            bad.push(names[j].clone());
        } else {
            basis.push(v / norm);
        }
    }
    bad
}

/// Sandwich covariance `c * B M B` with CR1 or HC1 scaling. `scores` are
/// the regressors entering the meat (the fitted first stage for 2SLS).
pub(crate) fn sandwich(
    bread: &DMatrix<f64>,
    scores: &DMatrix<f64>,
    resid: &[f64],
    cluster: Option<&[usize]>,
    k: usize,
) -> (DMatrix<f64>, usize) {
    let (n, p) = scores.shape();
    let mut meat = DMatrix::<f64>::zeros(p, p);
    let g = match cluster {
        Some(codes) => {
            let n_groups = codes.iter().max().map_or(0, |m| m + 1);
            let mut s = DMatrix::<f64>::zeros(n_groups, p);
            for i in 0..n {
                for j in 0..p {
                    s[(codes[i], j)] += scores[(i, j)] * resid[i];
                }
            }
            meat += s.transpose() * &s;
            n_groups
        }
        None => {
            for i in 0..n {
                let row = scores.row(i).transpose() * resid[i];
                meat += &row * row.transpose();
            }
            n
        }
    };
    let nf = n as f64;
    let kf = k as f64;
    let c = match cluster {
        Some(_) => {
            let gf = g as f64;
            gf / (gf - 1.0) * (nf - 1.0) / (nf - kf)
        }
        None => nf / (nf - kf),
    };
    let mut v = bread * meat * bread * c;
    v = (&v + v.transpose()) * 0.5;
    (v, g)
}

pub(crate) fn inverse_gram(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xtx = x.transpose() * x;
    xtx.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Estimation("cross-product matrix is not positive definite".into()))
}

pub(crate) fn column_norms(design: &Design, keep: &[usize]) -> Vec<f64> {
    (0..design.x.ncols())
        .map(|j| keep.iter().map(|&r| design.x[(r, j)].powi(2)).sum::<f64>().sqrt())
        .collect()
}

pub(crate) fn check_rank(design: &Design, ab: &Absorbed) -> Result<()> {
    let bad = collinear_columns(&ab.x, &column_norms(design, &ab.keep), &design.names);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    let k = design.x.ncols() + ab.absorbed_dof;
    if ab.keep.len() <= k {
        return Err(Error::Estimation(format!(
            "{} observations for {k} parameters",
            ab.keep.len()
        )));
    }
    Ok(())
}

pub(crate) fn cluster_codes<'a>(spec_cov: Covariance, ab: &'a Absorbed) -> Option<&'a [usize]> {
    match spec_cov {
        Covariance::Cluster => ab.cluster.as_deref(),
        Covariance::Robust => None,
    }
}

/// Fixed-effects OLS with CR1 (or HC1) covariance.
pub fn fe_ols(panel: &crate::table::DataTable, spec: &RegressionSpec) -> Result<EstimateResult> {
    let design = build_design(panel, spec)?;
    ols_on_design(&design, spec)
}

pub(crate) fn ols_on_design(design: &Design, spec: &RegressionSpec) -> Result<EstimateResult> {
    let ab = absorb(design)?;
    check_rank(design, &ab)?;
    let bread = inverse_gram(&ab.x)?;
    let y = DVector::from_column_slice(&ab.y);
    let beta = &bread * (ab.x.transpose() * &y);
    let fitted = &ab.x * &beta;
    let resid: Vec<f64> = (0..ab.y.len()).map(|i| ab.y[i] - fitted[i]).collect();
    let cluster = cluster_codes(spec.covariance, &ab);
    let k = design.x.ncols() + ab.absorbed_dof;
    let (vcov, g) = sandwich(&bread, &ab.x, &resid, cluster, k);
    let n = ab.y.len();
    let df = if cluster.is_some() { g as f64 - 1.0 } else { (n - k) as f64 };
    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let tss: f64 = ab.y.iter().map(|v| v * v).sum();
    let coefficients = design
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| Coefficient::new(name, beta[j], vcov[(j, j)].max(0.0).sqrt(), df))
        .collect();
    Ok(EstimateResult {
        outcome: spec.outcome.clone(),
        method: "OLS".into(),
        coefficients,
        vcov: matrix_rows(&vcov),
        n_obs: n,
        n_clusters: g,
        clustered: cluster.is_some(),
        r2_within: if tss > 0.0 { 1.0 - ssr / tss } else { f64::NAN },
        df,
        fixed_effects: design.fe_names.clone(),
        first_stage: None,
        notes: Notes {
            filtered_out: design.filtered_out,
            dropped_missing: design.dropped_missing,
            dropped_singletons: ab.dropped_singletons,
            demeaning_iterations: ab.iterations,
            absorbed_dof: ab.absorbed_dof,
            messages: Vec::new(),
        },
    })
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
