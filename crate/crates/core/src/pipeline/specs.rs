//! Standard regression specifications for the table scenarios.

use super::ClusterOn;
use crate::estimators::{Covariance, FixedEffect, IvSpec, RegressionSpec};

/// Contest-level controls shared by the performance regressions.
pub const TABLE2_CONTROLS: [&str; 7] = [
    "favorite_ranking",
    "underdog_ranking",
    "favorite_experience",
    "underdog_experience",
    "underdog_starts",
    "favorite_home",
    "underdog_home",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Underdog,
    Favorite,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Underdog => "underdog",
            Side::Favorite => "favorite",
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Underdog => Side::Favorite,
            Side::Favorite => Side::Underdog,
        }
    }

    pub fn id(self) -> String {
        format!("{}_id", self.name())
    }

    pub fn ability(self) -> String {
        format!("{}_ability", self.name())
    }

    pub fn performance(self) -> String {
        format!("performance_{}", self.name())
    }

    fn cluster(self, on: ClusterOn) -> String {
        match on {
            ClusterOn::OutcomePlayer => self.id(),
            ClusterOn::OtherPlayer => self.other().id(),
        }
    }
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn controls_for(side: Side, drop: &[&str], extra: &[&str]) -> Vec<String> {
    TABLE2_CONTROLS
        .iter()
        .filter(|c| !drop.contains(c))
        .map(|c| c.to_string())
        .chain(extra.iter().map(|c| c.to_string()))
        .chain(std::iter::once(side.ability()))
        .collect()
}

/// A player outcome on the ability ratio with the standard controls, the
/// player's own measured ability, and stage, tournament-year and player
/// fixed effects.
pub fn table2_spec(outcome: &str, side: Side, cluster: ClusterOn) -> RegressionSpec {
    let controls = controls_for(side, &[], &[]);
    let id = side.id();
    RegressionSpec::new(outcome, &["ability_ratio"])
        .covariates(&strs(&controls))
        .fixed_effects(&[&["stage"], &["tournament_year"], &[id.as_str()]])
        .cluster(&side.cluster(cluster))
}

/// A contest outcome on the ability ratio with fixed effects for both
/// players. Clustered on the favorite, or the underdog when clustering on
/// the other player.
pub fn contest_spec(outcome: &str, with_covariates: bool, cluster: ClusterOn) -> RegressionSpec {
    let mut spec = RegressionSpec::new(outcome, &["ability_ratio"])
        .fixed_effects(&[&["stage"], &["tournament_year"], &["favorite_id"], &["underdog_id"]])
        .cluster(&Side::Favorite.cluster(cluster));
    if with_covariates {
        let mut c: Vec<&str> = TABLE2_CONTROLS.to_vec();
        c.extend(["favorite_ability", "underdog_ability"]);
        spec = spec.covariates(&c);
    }
    spec
}

/// Head-start indicator as the treatment, ability ratio as a control.
pub fn headstart_spec(outcome: &str, side: Side, cluster: ClusterOn) -> RegressionSpec {
    let controls = controls_for(side, &["underdog_starts"], &["ability_ratio"]);
    let id = side.id();
    RegressionSpec::new(outcome, &["underdog_starts"])
        .covariates(&strs(&controls))
        .fixed_effects(&[&["stage"], &["tournament_year"], &[id.as_str()]])
        .cluster(&side.cluster(cluster))
}

/// Head start interacted with ability-ratio terciles.
pub fn headstart_terciles_spec(outcome: &str, side: Side, cluster: ClusterOn) -> RegressionSpec {
    let mut spec = headstart_spec(outcome, side, cluster);
    spec.treatments.clear();
    spec.interact("underdog_starts", "ability_ratio")
}

fn spillover_controls(side: Side) -> Vec<String> {
    controls_for(side, &[], &["ability_ratio"])
}

/// Expected next-opponent ability by OLS with the standard controls.
pub fn spillover_ols_spec(outcome: &str, side: Side, cluster: ClusterOn) -> RegressionSpec {
    let controls = spillover_controls(side);
    let id = side.id();
    RegressionSpec::new(outcome, &["expected_ability_next"])
        .covariates(&strs(&controls))
        .fixed_effects(&[&["stage"], &["tournament_year"], &[id.as_str()]])
        .cluster(&side.cluster(cluster))
}

/// Expected next-opponent ability instrumented by whether the next opponent
/// is already known, with tournament-year and stage fixed effects.
pub fn spillover_iv_spec(outcome: &str, side: Side, cluster: ClusterOn) -> IvSpec {
    IvSpec {
        outcome: outcome.to_string(),
        endogenous: "expected_ability_next".into(),
        instrument: "opponent_known".into(),
        exogenous: spillover_controls(side),
        fixed_effects: vec![FixedEffect::of("tournament_year"), FixedEffect::of("stage")],
        cluster: Some(side.cluster(cluster)),
        covariance: Covariance::Cluster,
        filter: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table2_shape() {
        let s = table2_spec("performance_underdog", Side::Underdog, ClusterOn::OutcomePlayer);
        assert_eq!(s.treatments, vec!["ability_ratio"]);
        assert!(s.covariates.contains(&"underdog_ability".to_string()));
        assert!(!s.covariates.contains(&"favorite_ability".to_string()));
        assert_eq!(s.cluster.as_deref(), Some("underdog_id"));
        let o = table2_spec("performance_underdog", Side::Underdog, ClusterOn::OtherPlayer);
        assert_eq!(o.cluster.as_deref(), Some("favorite_id"));
        assert_eq!(o.fixed_effects, s.fixed_effects);
    }

    #[test]
    fn headstart_specs_move_the_indicator() {
        let a = headstart_spec("performance_underdog", Side::Underdog, ClusterOn::OutcomePlayer);
        assert_eq!(a.treatments, vec!["underdog_starts"]);
        assert!(!a.covariates.contains(&"underdog_starts".to_string()));
        assert!(a.covariates.contains(&"ability_ratio".to_string()));
        let b = headstart_terciles_spec("performance_underdog", Side::Underdog, ClusterOn::OutcomePlayer);
        assert!(b.treatments.is_empty());
        assert_eq!(b.interactions[0].column_names()[2], "underdog_starts x high ability_ratio");
    }

    #[test]
    fn iv_uses_event_fixed_effects_only() {
        let iv = spillover_iv_spec("performance_favorite", Side::Favorite, ClusterOn::OutcomePlayer);
        let names: Vec<String> = iv.fixed_effects.iter().map(|f| f.name()).collect();
        assert_eq!(names, vec!["tournament_year", "stage"]);
        assert_eq!(iv.cluster.as_deref(), Some("favorite_id"));
    }
}
