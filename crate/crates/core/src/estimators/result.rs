use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
}

impl Coefficient {
    pub(crate) fn new(name: &str, estimate: f64, se: f64, df: f64) -> Self {
        let t = estimate / se;
        Self {
            name: name.to_string(),
            estimate,
            se,
            t,
            p_value: p_value(t, df),
        }
    }

    /// Whether `truth` lies within `k` standard errors.
    pub fn covers(&self, truth: f64, k: f64) -> bool {
        (self.estimate - truth).abs() <= k * self.se
    }

    pub fn stars(&self) -> &'static str {
        match self.p_value {
            p if p < 0.01 => "***",
            p if p < 0.05 => "**",
            p if p < 0.10 => "*",
            _ => "",
        }
    }
}

/// Two-sided p-value of a t statistic.
pub(crate) fn p_value(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df.max(1.0)).expect("valid t distribution");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// First stage of a just-identified 2SLS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub instrument: String,
    pub coefficient: Coefficient,
    /// Cluster-robust Wald F on the excluded instrument.
    pub f_stat: f64,
    /// Reduced-form coefficient of the outcome on the instrument.
    pub reduced_form: f64,
    pub weak: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Notes {
    pub filtered_out: usize,
    pub dropped_missing: usize,
    pub dropped_singletons: usize,
    pub demeaning_iterations: usize,
    /// Degrees of freedom used up by the absorbed fixed effects.
    pub absorbed_dof: usize,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub outcome: String,
    pub method: String,
    pub coefficients: Vec<Coefficient>,
    pub vcov: Vec<Vec<f64>>,
    pub n_obs: usize,
    /// Equals `n_obs` for heteroskedasticity-robust errors.
    pub n_clusters: usize,
    pub clustered: bool,
    pub r2_within: f64,
    /// Degrees of freedom of the reference t distribution.
    pub df: f64,
    pub fixed_effects: Vec<String>,
    pub first_stage: Option<FirstStage>,
    pub notes: Notes,
}

impl EstimateResult {
    pub fn coef(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    /// Coefficient table with standard errors in parentheses and stars at
    /// the 10, 5 and 1 percent levels.
    pub fn to_text(&self) -> String {
        let width = self.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(0).max(12);
        let mut s = String::new();
        let _ = writeln!(s, "{} ({})", self.outcome, self.method);
        for c in &self.coefficients {
            let _ = writeln!(s, "  {:<width$}  {:>10.3}{:<3}", c.name, c.estimate, c.stars());
            let _ = writeln!(s, "  {:<width$}  {:>10}", "", format!("({:.3})", c.se));
        }
        if let Some(fs) = &self.first_stage {
            let _ = writeln!(
                s,
                "  first stage {}: {:.3} ({:.3}), F = {:.1}{}",
                fs.instrument,
                fs.coefficient.estimate,
                fs.coefficient.se,
                fs.f_stat,
                if fs.weak { "  [weak]" } else { "" }
            );
        }
        if !self.fixed_effects.is_empty() {
            let _ = writeln!(s, "  FE: {}", self.fixed_effects.join(", "));
        }
        let _ = writeln!(
            s,
            "  N = {}, clusters = {}, within R2 = {:.3}, singletons dropped = {}",
            self.n_obs, self.n_clusters, self.r2_within, self.notes.dropped_singletons
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars_follow_p_values() {
        let df = 1e6;
        assert_eq!(Coefficient::new("a", 3.0, 1.0, df).stars(), "***");
        assert_eq!(Coefficient::new("a", 2.1, 1.0, df).stars(), "**");
        assert_eq!(Coefficient::new("a", 1.7, 1.0, df).stars(), "*");
        assert_eq!(Coefficient::new("a", 1.0, 1.0, df).stars(), "");
        let c = Coefficient::new("a", 1.959964, 1.0, df);
        assert!((c.p_value - 0.05).abs() < 1e-5);
    }
}
