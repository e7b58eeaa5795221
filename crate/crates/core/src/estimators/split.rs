use super::design::quantile;
use crate::error::{Error, Result};
use crate::table::DataTable;

/// Splits `panel` at the median of `variable`; rows at or below the median
/// (ties included) go to the low part. Rows with a missing value are left
/// out of both parts.
pub fn subsample_split(panel: &DataTable, variable: &str) -> Result<(DataTable, DataTable, f64)> {
    let v = panel.column(variable)?;
    let median = quantile(v, 0.5);
    let (low, high): (Vec<usize>, Vec<usize>) = {
        let rows = (0..v.len()).filter(|&i| !v[i].is_nan());
        let (l, h): (Vec<usize>, Vec<usize>) = rows.partition(|&i| v[i] <= median);
        (l, h)
    };
    if low.is_empty() || high.is_empty() {
        return Err(Error::Argument(format!("`{variable}` does not vary; no split possible")));
    }
    Ok((panel.select_rows(&low), panel.select_rows(&high), median))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_halves_of_an_index() {
        let t = DataTable::new(10).with("i", (0..10).map(|i| i as f64).collect()).unwrap();
        let (lo, hi, m) = subsample_split(&t, "i").unwrap();
        assert_eq!((lo.n_rows(), hi.n_rows()), (5, 5));
        assert_eq!(m, 4.5);
    }

    #[test]
    fn ties_go_low_and_constants_fail() {
        let t = DataTable::new(5).with("v", vec![1.0, 2.0, 2.0, 2.0, 3.0]).unwrap();
        let (lo, hi, _) = subsample_split(&t, "v").unwrap();
        assert_eq!((lo.n_rows(), hi.n_rows()), (4, 1));
        let c = DataTable::new(4).with("v", vec![7.0; 4]).unwrap();
        assert!(subsample_split(&c, "v").is_err());
    }
}
