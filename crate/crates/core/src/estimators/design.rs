use std::collections::HashMap;

use nalgebra::DMatrix;

use super::RegressionSpec;
use crate::error::{Error, Result};
use crate::table::DataTable;

/// Numeric design for one regression, restricted to the estimation sample.
#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    /// Panel row of every design row.
    pub rows: Vec<usize>,
    /// Dense level codes per fixed-effect group.
    pub fe: Vec<Vec<usize>>,
    pub fe_names: Vec<String>,
    pub cluster: Option<Vec<usize>>,
    pub filtered_out: usize,
    pub dropped_missing: usize,
}

/// Type-7 quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    quantile_sorted(&v, p)
}

/// Tercile index (0 low, 1 medium, 2 high) of every value. Cuts are the
/// 1/3 and 2/3 quantiles; values on a cut go to the lower tercile.
pub fn terciles(values: &[f64]) -> Vec<usize> {
    let q1 = quantile(values, 1.0 / 3.0);
    let q2 = quantile(values, 2.0 / 3.0);
    values
        .iter()
        .map(|&v| {
            if v <= q1 {
                0
            } else if v <= q2 {
                1
            } else {
                2
            }
        })
        .collect()
}

/// Dense codes for the distinct keys formed by `columns`, in order of
/// first appearance.
pub(crate) fn encode(panel: &DataTable, columns: &[String], rows: &[usize]) -> Result<Vec<usize>> {
    let cols: Vec<&[f64]> = columns.iter().map(|c| panel.column(c)).collect::<Result<_>>()?;
    let mut map: HashMap<Vec<u64>, usize> = HashMap::new();
    Ok(rows
        .iter()
        .map(|&r| {
            let key: Vec<u64> = cols.iter().map(|c| c[r].to_bits()).collect();
            let next = map.len();
            *map.entry(key).or_insert(next)
        })
        .collect())
}

/// Estimation sample of `spec`: rows passing the filter with no missing
/// value in any column the spec reads.
pub(crate) fn sample_rows(panel: &DataTable, spec: &RegressionSpec) -> Result<(Vec<usize>, usize, usize)> {
    spec.validate(panel)?;
    let filters: Vec<(&[f64], &super::Condition)> = spec
        .filter
        .iter()
        .map(|c| Ok((panel.column(&c.column)?, c)))
        .collect::<Result<_>>()?;
    let used: Vec<&[f64]> = spec.columns().into_iter().map(|c| panel.column(c)).collect::<Result<_>>()?;
    let mut filtered = 0;
    let mut missing = 0;
    let mut rows = Vec::new();
    for r in 0..panel.n_rows() {
        if !filters.iter().all(|(col, c)| c.holds(col[r])) {
            filtered += 1;
        } else if used.iter().any(|col| col[r].is_nan()) {
            missing += 1;
        } else {
            rows.push(r);
        }
    }
    if rows.is_empty() {
        return Err(Error::Estimation("estimation sample is empty".into()));
    }
    Ok((rows, filtered, missing))
}

/// Design matrix for `spec`: treatments, then tercile interactions, then
/// covariates. Fixed effects and clusters come back as level codes.
pub fn build_design(panel: &DataTable, spec: &RegressionSpec) -> Result<Design> {
    let (rows, filtered_out, dropped_missing) = sample_rows(panel, spec)?;
    design_on_rows(panel, spec, rows, filtered_out, dropped_missing)
}

pub(crate) fn design_on_rows(
    panel: &DataTable,
    spec: &RegressionSpec,
    rows: Vec<usize>,
    filtered_out: usize,
    dropped_missing: usize,
) -> Result<Design> {
    let n = rows.len();
    let pick = |name: &str| -> Result<Vec<f64>> {
        let c = panel.column(name)?;
        Ok(rows.iter().map(|&r| c[r]).collect())
    };
    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for t in &spec.treatments {
        names.push(t.clone());
        columns.push(pick(t)?);
    }
    for inter in &spec.interactions {
        let v = pick(&inter.variable)?;
        let t = terciles(&pick(&inter.by)?);
        for (k, name) in inter.column_names().into_iter().enumerate() {
            names.push(name);
            columns.push(v.iter().zip(&t).map(|(x, &ti)| if ti == k { *x } else { 0.0 }).collect());
        }
    }
    for c in &spec.covariates {
        names.push(c.clone());
        columns.push(pick(c)?);
    }
    let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let fe = spec
        .fixed_effects
        .iter()
        .map(|g| encode(panel, &g.0, &rows))
        .collect::<Result<Vec<_>>>()?;
    let cluster = match (&spec.cluster, spec.covariance) {
        (Some(c), super::Covariance::Cluster) => Some(encode(panel, std::slice::from_ref(c), &rows)?),
        _ => None,
    };
    Ok(Design {
        names,
        x,
        y: pick(&spec.outcome)?,
        rows,
        fe,
        fe_names: spec.fixed_effects.iter().map(|g| g.name()).collect(),
        cluster,
        filtered_out,
        dropped_missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{CompareOp, Condition};

    fn panel() -> DataTable {
        let n = 300;
        DataTable::new(n)
            .with("y", (0..n).map(|i| i as f64).collect())
            .unwrap()
            .with("d", (0..n).map(|i| ((i * 7) % 11) as f64).collect())
            .unwrap()
            .with("u", (0..n).map(|i| ((i * 37) % 300) as f64 / 300.0).collect())
            .unwrap()
            .with("g", (0..n).map(|i| (i % 5) as f64).collect())
            .unwrap()
    }

    #[test]
    fn plain_columns() {
        let p = panel();
        let d = build_design(&p, &RegressionSpec::new("y", &["d"]).covariates(&["u"])).unwrap();
        assert_eq!(d.names, vec!["d", "u"]);
        assert_eq!(d.x.ncols(), 2);
        assert_eq!(d.x.nrows(), 300);
    }

    #[test]
    fn tercile_interactions() {
        let p = panel();
        let spec = RegressionSpec::new("y", &[]).interact("d", "u");
        let d = build_design(&p, &spec).unwrap();
        assert_eq!(d.x.ncols(), 3);
        let t = terciles(p.column("u").unwrap());
        let dcol = p.column("d").unwrap();
        let mut counts = [0usize; 3];
        for i in 0..300 {
            counts[t[i]] += 1;
            for k in 0..3 {
                let parent = if t[i] == k { 1.0 } else { 0.0 };
                assert_eq!(d.x[(i, k)], dcol[i] * parent);
            }
        }
        for c in counts {
            assert!((c as i64 - 100).abs() <= 1, "{counts:?}");
        }
    }

    #[test]
    fn filter_and_missing() {
        let mut p = panel();
        let mut u = p.column("u").unwrap().to_vec();
        u[3] = f64::NAN;
        p.insert("u", u).unwrap();
        let spec = RegressionSpec::new("y", &["d"])
            .covariates(&["u"])
            .filter(Condition::new("g", CompareOp::Ne, 0.0));
        let d = build_design(&p, &spec).unwrap();
        assert_eq!(d.filtered_out, 60);
        assert_eq!(d.dropped_missing, 1);
        assert_eq!(d.x.nrows(), 239);
        let none = RegressionSpec::new("y", &["d"]).filter(Condition::new("g", CompareOp::Gt, 9.0));
        assert!(matches!(build_design(&p, &none), Err(Error::Estimation(_))));
    }

    #[test]
    fn unknown_column() {
        let spec = RegressionSpec::new("y", &["nope"]);
        assert!(matches!(build_design(&panel(), &spec), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn composite_codes() {
        let p = panel();
        let rows: Vec<usize> = (0..300).collect();
        let c = encode(&p, &["g".to_string(), "d".to_string()], &rows).unwrap();
        let distinct: std::collections::HashSet<_> = c.iter().collect();
        assert_eq!(distinct.len(), 55);
    }
}
