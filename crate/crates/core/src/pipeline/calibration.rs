use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dgp::Simulation;
use crate::error::{Error, Result};

/// One descriptive moment of a simulated panel against its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// `None` for moments that are reported but not checked.
    pub tolerance: Option<f64>,
}

impl Moment {
    pub fn passed(&self) -> bool {
        self.tolerance.map_or(true, |tol| (self.value - self.target).abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n_contests: usize,
    pub moments: Vec<Moment>,
}

impl CalibrationReport {
    pub fn passed(&self) -> bool {
        self.moments.iter().all(Moment::passed)
    }

    pub fn moment(&self, name: &str) -> Option<&Moment> {
        self.moments.iter().find(|m| m.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "calibration on {} contests", self.n_contests);
        for m in &self.moments {
            let verdict = match m.tolerance {
                Some(_) if m.passed() => "pass",
                Some(_) => "FAIL",
                None => "info",
            };
            let tol = m.tolerance.map(|t| format!("+/- {t}")).unwrap_or_default();
            let _ = writeln!(s, "  {:<28} {:>10.4}  target {:>9.4} {:<10} {verdict}", m.name, m.value, m.target, tol);
        }
        s
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v.iter().copied());
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// Descriptive moments of a simulated panel against the observed ones.
/// The first six are checked; the rest are reported for reference.
pub fn calibration_report(sim: &Simulation) -> Result<CalibrationReport> {
    let r = &sim.records;
    if r.len() < 2 || sim.leg_darts.is_empty() {
        return Err(Error::Estimation("calibration needs at least two contests".into()));
    }
    let ratio: Vec<f64> = r.iter().map(|c| c.ability_ratio).collect();
    let fav: Vec<f64> = r.iter().map(|c| c.performance_favorite).collect();
    let und: Vec<f64> = r.iter().map(|c| c.performance_underdog).collect();
    let mut darts = sim.leg_darts.clone();
    darts.sort_unstable();
    let median_darts = if darts.len() % 2 == 1 {
        darts[darts.len() / 2] as f64
    } else {
        (darts[darts.len() / 2 - 1] + darts[darts.len() / 2]) as f64 / 2.0
    };
    let known: Vec<f64> = r.iter().filter_map(|c| c.opponent_known.map(f64::from)).collect();
    let expected: Vec<f64> = r.iter().filter_map(|c| c.expected_ability_next).collect();
    let m = |name: &str, value: f64, target: f64, tolerance: Option<f64>| Moment {
        name: name.to_string(),
        value,
        target,
        tolerance,
    };
    let moments = vec![
        m("performance_favorite", mean(fav.iter().copied()), 102.254, Some(1.0)),
        m("performance_underdog", mean(und.iter().copied()), 97.595, Some(1.0)),
        m("favorite_wins", mean(r.iter().map(|c| c.favorite_wins as f64)), 0.665, Some(0.03)),
        m("ability_ratio_mean", mean(ratio.iter().copied()), 1.055, Some(0.01)),
        m("ability_ratio_sd", sd(&ratio), 0.049, Some(0.01)),
        m("median_darts_per_leg", median_darts, 15.0, Some(2.0)),
        m("n_contests", r.len() as f64, 4776.0, None),
        m("performance_favorite_sd", sd(&fav), 9.057, None),
        m("performance_underdog_sd", sd(&und), 8.879, None),
        m("contest_length_fraction", mean(r.iter().map(|c| c.contest_length_fraction)), 0.790, None),
        m("expected_ability_next", mean(expected.iter().copied()), 94.695, None),
        m("opponent_known", mean(known.iter().copied()), 0.588, None),
        m("underdog_starts", mean(r.iter().map(|c| c.underdog_starts as f64)), 0.481, None),
        m("n_180s", mean(r.iter().map(|c| c.n_180s as f64)), 5.921, None),
    ];
    Ok(CalibrationReport { n_contests: r.len(), moments })
}
