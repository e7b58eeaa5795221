//! Panel estimators: fixed-effects OLS with cluster-robust errors, 2SLS,
//! doubly-robust dose-response curves and sample splits.

mod design;
mod dr;
mod iv;
mod ols;
mod result;
mod split;

pub use design::{build_design, terciles, Design};
pub use dr::{
    ate_between, cross_fit_pseudo_outcomes, dose_response, dr_curve, pseudo_outcome, BandwidthChoice, DoseResponseCurve, DrOptions, ForestOutcome,
    OutcomeModel, PseudoOutcomes, TreatmentDensity,
};
pub use iv::{tsls, IvSpec};
pub use ols::{absorb, fe_ols, Absorbed};
pub use result::{Coefficient, EstimateResult, FirstStage, Notes};
pub use split::subsample_split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::DataTable;

/// A fixed-effect group; several columns form a composite key, e.g.
/// `["favorite_id", "year"]` for individual-by-year effects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedEffect(pub Vec<String>);

impl FixedEffect {
    pub fn of(column: &str) -> Self {
        Self(vec![column.to_string()])
    }

    pub fn name(&self) -> String {
        self.0.join("#")
    }
}

/// `variable` times indicators for the low, medium and high terciles of
/// `by`. Terciles are cut on the estimation sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TercileInteraction {
    pub variable: String,
    pub by: String,
}

impl TercileInteraction {
    pub fn column_names(&self) -> [String; 3] {
        ["low", "medium", "high"].map(|t| format!("{} x {t} {}", self.variable, self.by))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// One clause of a row filter; clauses are combined with AND.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub column: String,
    pub op: CompareOp,
    pub value: f64,
}

impl Condition {
    pub fn new(column: &str, op: CompareOp, value: f64) -> Self {
        Self {
            column: column.to_string(),
            op,
            value,
        }
    }

    pub fn holds(&self, v: f64) -> bool {
        match self.op {
            CompareOp::Eq => v == self.value,
            CompareOp::Ne => v != self.value,
            CompareOp::Lt => v < self.value,
            CompareOp::Le => v <= self.value,
            CompareOp::Gt => v > self.value,
            CompareOp::Ge => v >= self.value,
        }
    }
}

/// Covariance estimator for [`fe_ols`] and [`tsls`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    /// CR1 on the spec's cluster column.
    #[default]
    Cluster,
    /// HC1 heteroskedasticity-robust.
    Robust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub outcome: String,
    pub treatments: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub fixed_effects: Vec<FixedEffect>,
    #[serde(default)]
    pub cluster: Option<String>,
    #[serde(default)]
    pub covariance: Covariance,
    #[serde(default)]
    pub interactions: Vec<TercileInteraction>,
    #[serde(default)]
    pub filter: Vec<Condition>,
}

impl RegressionSpec {
    pub fn new(outcome: &str, treatments: &[&str]) -> Self {
        Self {
            outcome: outcome.to_string(),
            treatments: treatments.iter().map(|s| s.to_string()).collect(),
            covariates: Vec::new(),
            fixed_effects: Vec::new(),
            cluster: None,
            covariance: Covariance::Robust,
            interactions: Vec::new(),
            filter: Vec::new(),
        }
    }

    pub fn covariates(mut self, names: &[&str]) -> Self {
        self.covariates = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn fixed_effects(mut self, groups: &[&[&str]]) -> Self {
        self.fixed_effects = groups
            .iter()
            .map(|g| FixedEffect(g.iter().map(|s| s.to_string()).collect()))
            .collect();
        self
    }

    pub fn cluster(mut self, column: &str) -> Self {
        self.cluster = Some(column.to_string());
        self.covariance = Covariance::Cluster;
        self
    }

    pub fn interact(mut self, variable: &str, by: &str) -> Self {
        self.interactions.push(TercileInteraction {
            variable: variable.to_string(),
            by: by.to_string(),
        });
        self
    }

    pub fn filter(mut self, condition: Condition) -> Self {
        self.filter.push(condition);
        self
    }

    /// Every panel column the spec reads.
    pub fn columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = vec![self.outcome.as_str()];
        cols.extend(self.treatments.iter().map(String::as_str));
        cols.extend(self.covariates.iter().map(String::as_str));
        for i in &self.interactions {
            cols.push(&i.variable);
            cols.push(&i.by);
        }
        for g in &self.fixed_effects {
            cols.extend(g.0.iter().map(String::as_str));
        }
        if let Some(c) = &self.cluster {
            cols.push(c);
        }
        cols.extend(self.filter.iter().map(|c| c.column.as_str()));
        cols
    }

    pub fn validate(&self, panel: &DataTable) -> Result<()> {
        if self.treatments.is_empty() && self.interactions.is_empty() {
            return Err(Error::Argument("regression needs at least one treatment".into()));
        }
        if self.covariance == Covariance::Cluster && self.cluster.as_deref().map_or(true, str::is_empty) {
            return Err(Error::Argument("clustered errors requested without a cluster column".into()));
        }
        if self.fixed_effects.iter().any(|g| g.0.is_empty()) {
            return Err(Error::Argument("empty fixed-effect group".into()));
        }
        for c in self.columns() {
            panel.column(c)?;
        }
        Ok(())
    }
}
