//! Scenario configuration, exhibit reproduction and the acceptance checks.
//!
//! A [`ScenarioConfig`] names one exhibit (a table, a figure, the
//! calibration report or the placebo study), the generator settings it runs
//! on, estimator options and a master seed. [`run_scenario`] writes the
//! exhibit's CSV, JSON, text and SVG files; [`run_acceptance`] runs every
//! check and returns one verdict per criterion.

mod acceptance;
mod calibration;
mod figures;
mod montecarlo;
mod scenarios;
mod specs;

pub use acceptance::{run_acceptance, AcceptanceReport, CriterionResult};
pub use calibration::{calibration_report, CalibrationReport, Moment};
pub use figures::{LineChart, Series, WhiskerChart, WhiskerRow};
pub use montecarlo::replicate;
pub use scenarios::{
    estimate_scenario, model_chart, model_template, read_table_csv, run_scenario, theta_dependent_peak, LabeledEstimate,
    ScenarioOutput, FIG5_PANELS,
};
pub use specs::{
    contest_spec, headstart_spec, headstart_terciles_spec, spillover_iv_spec, spillover_ols_spec, table2_spec, Side,
    TABLE2_CONTROLS,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dgp::{DgpConfig, TrueEffects};
use crate::error::{Error, Result};
use crate::estimators::DrOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Table2,
    Table3,
    Table4,
    Table5,
    Table6,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Calibration,
    Placebo,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 11] = [
        ScenarioId::Calibration,
        ScenarioId::Table2,
        ScenarioId::Table3,
        ScenarioId::Table4,
        ScenarioId::Table5,
        ScenarioId::Table6,
        ScenarioId::Fig2,
        ScenarioId::Fig3,
        ScenarioId::Fig4,
        ScenarioId::Fig5,
        ScenarioId::Placebo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Table2 => "table2",
            ScenarioId::Table3 => "table3",
            ScenarioId::Table4 => "table4",
            ScenarioId::Table5 => "table5",
            ScenarioId::Table6 => "table6",
            ScenarioId::Fig2 => "fig2",
            ScenarioId::Fig3 => "fig3",
            ScenarioId::Fig4 => "fig4",
            ScenarioId::Fig5 => "fig5",
            ScenarioId::Calibration => "calibration",
            ScenarioId::Placebo => "placebo",
        }
    }

    /// Scenarios that estimate regressions on a single panel.
    pub fn estimates_panel(self) -> bool {
        !matches!(self, ScenarioId::Fig5)
    }
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown scenario `{s}`")))
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Whose id clusters the standard errors of a player-level outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterOn {
    /// The player whose performance is the outcome.
    #[default]
    OutcomePlayer,
    /// Their opponent.
    OtherPlayer,
}

/// Generator settings given inline or as a path to a JSON file. Relative
/// paths resolve against the scenario file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DgpSource {
    Path(PathBuf),
    Inline(Box<DgpConfig>),
}

impl Default for DgpSource {
    fn default() -> Self {
        DgpSource::Inline(Box::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    pub cluster_on: ClusterOn,
    /// Monte Carlo panels for the recovery studies.
    pub replications: usize,
    /// Panels averaged for the doubly-robust step effects.
    pub dr_replications: usize,
    /// Rows in each double-robustness design.
    pub dr_synthetic_rows: usize,
    pub dr: DrOptions,
    /// Test size for rejection counts.
    pub significance: f64,
    /// Half-width of the coverage intervals in standard errors.
    pub coverage_se: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            cluster_on: ClusterOn::OutcomePlayer,
            replications: 100,
            dr_replications: 10,
            dr_synthetic_rows: 10_000,
            dr: DrOptions::default(),
            significance: 0.05,
            coverage_se: 2.0,
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.dr_replications == 0 {
            return Err(Error::Argument("replication counts must be positive".into()));
        }
        if self.dr_synthetic_rows < 100 {
            return Err(Error::Argument("double-robustness designs need at least 100 rows".into()));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::Argument(format!("significance {} outside (0, 1)", self.significance)));
        }
        if !(self.coverage_se > 0.0) {
            return Err(Error::Argument("coverage_se must be positive".into()));
        }
        Ok(())
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    #[serde(default)]
    pub dgp: DgpSource,
    #[serde(default)]
    pub estimator: EstimatorOptions,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ScenarioConfig {
    /// The checked-in settings for `scenario`.
    pub fn default_for(scenario: ScenarioId, seed: u64) -> Self {
        let mut dgp = DgpConfig::default();
        if scenario == ScenarioId::Placebo {
            dgp.effects = TrueEffects::zero();
        }
        if scenario == ScenarioId::Fig3 {
            dgp.odds_replays = 20;
        }
        Self {
            scenario,
            dgp: DgpSource::Inline(Box::new(dgp)),
            estimator: EstimatorOptions::default(),
            seed,
            output_dir: PathBuf::from("out").join(scenario.name()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a scenario file and inlines a referenced generator config.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let DgpSource::Path(p) = &config.dgp {
            let full = match path.parent() {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p.clone(),
            };
            let dgp: DgpConfig = serde_json::from_str(&std::fs::read_to_string(&full)?)?;
            config.dgp = DgpSource::Inline(Box::new(dgp));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn dgp(&self) -> Result<&DgpConfig> {
        match &self.dgp {
            DgpSource::Inline(d) => Ok(d),
            DgpSource::Path(p) => Err(Error::Argument(format!(
                "generator config `{}` was not loaded; use ScenarioConfig::load",
                p.display()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        if let DgpSource::Inline(d) = &self.dgp {
            d.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
