//! Two-player Tullock contests with a heterogeneous ability parameter.
//!
//! The lower-ability contestant's ability is normalised to one, the
//! higher-ability contestant has relative ability `theta_h >= 1`, and the
//! probability that contestant `i` wins is `theta_i e_i / (e_l + theta_h e_h)`.
//! Four variants differ in how rewards and costs are set up:
//!
//! * [`Variant::Baseline`]: rewards `R_l`, `R_h`, linear costs.
//! * [`Variant::RewardScaled`]: `R_l = a * R_h` for a fixed multiplier `a`.
//! * [`Variant::RewardThetaDependent`]: `R_l = theta_h^alpha * R_h`.
//! * [`Variant::Choking`]: the higher-ability contestant's cost is
//!   `theta_h^-alpha * e_h`.
//!
//! Closed-form equilibria live next to brute-force grid oracles
//! ([`best_response_oracle`], [`nash_oracle`]) that check them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Contestant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    RewardScaled,
    RewardThetaDependent,
    Choking,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::RewardScaled,
        Variant::RewardThetaDependent,
        Variant::Choking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::RewardScaled => "reward_scaled",
            Variant::RewardThetaDependent => "reward_theta_dependent",
            Variant::Choking => "choking",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "reward_scaled" | "reward-scaled" => Ok(Variant::RewardScaled),
            "reward_theta_dependent" | "reward-theta-dependent" | "theta_dependent" => {
                Ok(Variant::RewardThetaDependent)
            }
            "choking" => Ok(Variant::Choking),
            other => Err(Error::Argument(format!("unknown contest variant `{other}`"))),
        }
    }
}

/// Parameters of one two-player contest.
///
/// `reward_l` is always the reward actually used by the lower-ability
/// contestant. For [`Variant::RewardThetaDependent`] it is kept equal to
/// `theta_h^alpha * reward_h` by the constructors and by [`Self::with_theta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContestModelSpec {
    pub variant: Variant,
    pub theta_h: f64,
    pub reward_h: f64,
    pub reward_l: f64,
    pub alpha: f64,
}

impl ContestModelSpec {
    pub fn baseline(theta_h: f64, reward_l: f64, reward_h: f64) -> Result<Self> {
        Self {
            variant: Variant::Baseline,
            theta_h,
            reward_h,
            reward_l,
            alpha: 0.0,
        }
        .validated()
    }

    /// Lower-ability reward is `multiplier` times the higher-ability reward.
    pub fn reward_scaled(theta_h: f64, multiplier: f64, reward_h: f64) -> Result<Self> {
        if !(multiplier > 0.0) || !multiplier.is_finite() {
            return Err(Error::Domain(format!(
                "reward multiplier must be positive, got {multiplier}"
            )));
        }
        Self {
            variant: Variant::RewardScaled,
            theta_h,
            reward_h,
            reward_l: multiplier * reward_h,
            alpha: 0.0,
        }
        .validated()
    }

    pub fn reward_theta_dependent(theta_h: f64, alpha: f64, reward_h: f64) -> Result<Self> {
        Self {
            variant: Variant::RewardThetaDependent,
            theta_h,
            reward_h,
            reward_l: theta_h.powf(alpha) * reward_h,
            alpha,
        }
        .validated()
    }

    pub fn choking(theta_h: f64, alpha: f64, reward_l: f64, reward_h: f64) -> Result<Self> {
        Self {
            variant: Variant::Choking,
            theta_h,
            reward_h,
            reward_l,
            alpha,
        }
        .validated()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta_h, self.reward_h, self.reward_l, self.alpha]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("contest parameters must be finite".into()));
        }
        if self.theta_h < 1.0 {
            return Err(Error::Domain(format!(
                "theta_h must be >= 1, got {}",
                self.theta_h
            )));
        }
        if self.reward_h <= 0.0 || self.reward_l <= 0.0 {
            return Err(Error::Domain("rewards must be positive".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::Domain(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.variant == Variant::RewardThetaDependent {
            let expected = self.theta_h.powf(self.alpha) * self.reward_h;
            if (expected - self.reward_l).abs() > 1e-12 * expected.max(1.0) {
                return Err(Error::Domain(
                    "reward_l must equal theta_h^alpha * reward_h for this variant".into(),
                ));
            }
        }
        Ok(())
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    /// The same contest at a different ability ratio.
    pub fn with_theta(&self, theta_h: f64) -> Result<Self> {
        let mut next = *self;
        next.theta_h = theta_h;
        if self.variant == Variant::RewardThetaDependent {
            next.reward_l = theta_h.powf(self.alpha) * self.reward_h;
        }
        next.validated()
    }

    /// Marginal cost of effort for the higher-ability contestant.
    pub fn cost_h(&self) -> f64 {
        match self.variant {
            Variant::Choking => self.theta_h.powf(-self.alpha),
            _ => 1.0,
        }
    }

    pub fn reward(&self, who: Contestant) -> f64 {
        match who {
            Contestant::Low => self.reward_l,
            Contestant::High => self.reward_h,
        }
    }

    pub fn cost(&self, who: Contestant) -> f64 {
        match who {
            Contestant::Low => 1.0,
            Contestant::High => self.cost_h(),
        }
    }

    pub fn max_reward(&self) -> f64 {
        self.reward_l.max(self.reward_h)
    }
}

/// Efforts together with the win probabilities they induce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffortPair {
    pub effort_l: f64,
    pub effort_h: f64,
    pub win_prob_h: f64,
    pub win_prob_l: f64,
}

impl EffortPair {
    pub fn new(spec: &ContestModelSpec, effort_l: f64, effort_h: f64) -> Result<Self> {
        let (win_prob_l, win_prob_h) = win_probability(spec, effort_l, effort_h)?;
        Ok(Self {
            effort_l,
            effort_h,
            win_prob_h,
            win_prob_l,
        })
    }

    pub fn effort(&self, who: Contestant) -> f64 {
        match who {
            Contestant::Low => self.effort_l,
            Contestant::High => self.effort_h,
        }
    }
}

/// Contest success function. Returns `(p_l, p_h)`; both efforts zero is a
/// coin flip.
pub fn win_probability(spec: &ContestModelSpec, effort_l: f64, effort_h: f64) -> Result<(f64, f64)> {
    check_effort(effort_l)?;
    check_effort(effort_h)?;
    let weighted_h = spec.theta_h * effort_h;
    let total = effort_l + weighted_h;
    if total == 0.0 {
        return Ok((0.5, 0.5));
    }
    let p_h = weighted_h / total;
    Ok((1.0 - p_h, p_h))
}

fn check_effort(e: f64) -> Result<()> {
    if !(e >= 0.0) || !e.is_finite() {
        return Err(Error::Domain(format!("effort must be finite and >= 0, got {e}")));
    }
    Ok(())
}

/// Expected payoff `p_i R_i - c_i e_i` of contestant `who`.
pub fn payoff(spec: &ContestModelSpec, who: Contestant, own: f64, opponent: f64) -> Result<f64> {
    let (e_l, e_h) = match who {
        Contestant::Low => (own, opponent),
        Contestant::High => (opponent, own),
    };
    let (p_l, p_h) = win_probability(spec, e_l, e_h)?;
    let p = match who {
        Contestant::Low => p_l,
        Contestant::High => p_h,
    };
    Ok(p * spec.reward(who) - spec.cost(who) * own)
}

/// Closed-form pure-strategy equilibrium.
///
/// The choking cost `theta^-alpha * e_h` is equivalent to a baseline contest
/// in which the higher-ability reward is `theta^alpha * R_h`; the other
/// variants only change `R_l`, which the spec already carries.
pub fn equilibrium(spec: &ContestModelSpec) -> Result<EffortPair> {
    spec.validate()?;
    let theta = spec.theta_h;
    let r_l = spec.reward_l;
    let r_h = spec.reward_h / spec.cost_h();
    let denom = (r_l + theta * r_h).powi(2);
    let effort_l = theta * r_l * r_l * r_h / denom;
    // in the choking variant e_h is measured in raw effort units, so the
    // effective reward enters squared exactly as in the baseline form
    let effort_h = theta * r_l * r_h * r_h / denom;
    EffortPair::new(spec, effort_l, effort_h)
}

/// First-order-condition residuals `(r_l, r_h)`: marginal benefit minus
/// marginal cost for each contestant.
pub fn foc_residuals(spec: &ContestModelSpec, effort_l: f64, effort_h: f64) -> Result<(f64, f64)> {
    check_effort(effort_l)?;
    check_effort(effort_h)?;
    if effort_l == 0.0 || effort_h == 0.0 {
        return Err(Error::Domain(
            "first-order conditions are undefined at zero effort".into(),
        ));
    }
    let theta = spec.theta_h;
    let total_sq = (effort_l + theta * effort_h).powi(2);
    let r_l = theta * effort_h * spec.reward_l / total_sq - 1.0;
    let r_h = theta * effort_l * spec.reward_h / total_sq - spec.cost_h();
    Ok((r_l, r_h))
}

/// A sorted grid of candidate effort levels.
#[derive(Debug, Clone)]
pub struct EffortGrid {
    points: Vec<f64>,
}

impl EffortGrid {
    pub const DEFAULT_POINTS: usize = 20_001;

    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("effort grid must not be empty".into()));
        }
        if !(hi >= lo) || lo < 0.0 {
            return Err(Error::Argument(format!("bad effort grid range [{lo}, {hi}]")));
        }
        if n == 1 {
            return Ok(Self { points: vec![lo] });
        }
        let step = (hi - lo) / (n - 1) as f64;
        Ok(Self {
            points: (0..n).map(|i| lo + step * i as f64).collect(),
        })
    }

    /// 20,001 points on `[0, 2 max(R_l, R_h)]`.
    pub fn default_for(spec: &ContestModelSpec) -> Self {
        Self::uniform(0.0, 2.0 * spec.max_reward(), Self::DEFAULT_POINTS)
            .expect("positive rewards give a valid grid")
    }

    pub fn from_points(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Argument("effort grid must not be empty".into()));
        }
        if points.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Argument("effort grid points must be finite and >= 0".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Largest gap between neighbouring points.
    pub fn step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// Grid point maximising `who`'s payoff against a fixed opponent effort.
/// Ties go to the smaller effort.
pub fn best_response_oracle(
    spec: &ContestModelSpec,
    opponent_effort: f64,
    who: Contestant,
    grid: &EffortGrid,
) -> Result<f64> {
    check_effort(opponent_effort)?;
    let mut best = (f64::NEG_INFINITY, grid.points[0]);
    for &e in &grid.points {
        let value = payoff(spec, who, e, opponent_effort)?;
        if value > best.0 {
            best = (value, e);
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, Copy)]
pub struct NashOptions {
    /// Initial weight on the previous iterate. Halved towards 1 after every
    /// `patience` iterations without convergence, which tames the
    /// oscillation of steep best responses in very uneven contests.
    pub damping: f64,
    pub patience: usize,
    /// Stop once both best responses are within this many grid steps of
    /// the current iterate.
    pub tolerance_steps: f64,
    pub max_iterations: usize,
}

impl Default for NashOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            patience: 250,
            tolerance_steps: 0.5,
            max_iterations: 10_000,
        }
    }
}

/// Damped iterated best response on a grid.
///
/// Stops once each player's grid best response is within `tolerance_steps`
/// grid steps of its current effort, and returns the pair of grid best
/// responses.
pub fn nash_oracle(spec: &ContestModelSpec, grid: &EffortGrid, options: NashOptions) -> Result<EffortPair> {
    spec.validate()?;
    if !(0.0..1.0).contains(&options.damping) {
        return Err(Error::Argument("damping must lie in [0, 1)".into()));
    }
    let tol = options.tolerance_steps * grid.step();
    let start = grid.points[grid.points.len() / 4];
    let (mut e_l, mut e_h) = (start, start);
    let mut damping = options.damping;
    for it in 0..options.max_iterations {
        if options.patience > 0 && it > 0 && it % options.patience == 0 {
            damping = 0.5 * (1.0 + damping);
        }
        let br_l = best_response_oracle(spec, e_h, Contestant::Low, grid)?;
        let br_h = best_response_oracle(spec, e_l, Contestant::High, grid)?;
        if (br_l - e_l).abs() <= tol && (br_h - e_h).abs() <= tol {
            return EffortPair::new(spec, br_l, br_h);
        }
        e_l = damping * e_l + (1.0 - damping) * br_l;
        e_h = damping * e_h + (1.0 - damping) * br_h;
    }
    Err(Error::Convergence {
        iterations: options.max_iterations,
        detail: format!("last iterate e_l={e_l}, e_h={e_h}"),
    })
}

/// Peak of the higher-ability equilibrium effort in the choking variant:
/// `theta* = ((2 alpha + 1) R_l / R_h)^(1 / (alpha + 1))`.
pub fn choking_peak_theta(alpha: f64, reward_l: f64, reward_h: f64) -> f64 {
    ((2.0 * alpha + 1.0) * reward_l / reward_h).powf(1.0 / (alpha + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub e_l: f64,
    pub e_h: f64,
    pub p_h: f64,
}

/// Equilibrium efforts over a range of ability ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortCurve {
    pub template: ContestModelSpec,
    pub points: Vec<CurvePoint>,
}

/// Closed-form equilibria at `n_points` evenly spaced values of `theta_h` on
/// `[1, theta_max]`.
pub fn effort_curve(template: &ContestModelSpec, theta_max: f64, n_points: usize) -> Result<EffortCurve> {
    effort_curve_on(template, 1.0, theta_max, n_points)
}

pub fn effort_curve_on(
    template: &ContestModelSpec,
    theta_min: f64,
    theta_max: f64,
    n_points: usize,
) -> Result<EffortCurve> {
    if theta_min < 1.0 {
        return Err(Error::Argument(format!(
            "theta range must start at or above 1, got {theta_min}"
        )));
    }
    if !(theta_max > theta_min) {
        return Err(Error::Argument(format!(
            "theta_max must exceed {theta_min}, got {theta_max}"
        )));
    }
    if n_points < 2 {
        return Err(Error::Argument("an effort curve needs at least two points".into()));
    }
    let step = (theta_max - theta_min) / (n_points - 1) as f64;
    let points = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let theta = if i + 1 == n_points {
                theta_max
            } else {
                theta_min + step * i as f64
            };
            let eq = equilibrium(&template.with_theta(theta)?)?;
            Ok(CurvePoint {
                theta,
                e_l: eq.effort_l,
                e_h: eq.effort_h,
                p_h: eq.win_prob_h,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EffortCurve {
        template: *template,
        points,
    })
}

impl EffortCurve {
    pub const CSV_HEADER: &'static str = "theta,e_l,e_h,p_h";

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for p in &self.points {
            writeln!(out, "{},{},{},{}", p.theta, p.e_l, p.e_h, p.p_h)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Signs of forward differences of one effort column: +1, -1 or 0.
    pub fn difference_signs(&self, who: Contestant) -> Vec<i8> {
        self.points
            .windows(2)
            .map(|w| {
                let (a, b) = match who {
                    Contestant::Low => (w[0].e_l, w[1].e_l),
                    Contestant::High => (w[0].e_h, w[1].e_h),
                };
                match b.partial_cmp(&a) {
                    Some(std::cmp::Ordering::Greater) => 1,
                    Some(std::cmp::Ordering::Less) => -1,
                    _ => 0,
                }
            })
            .collect()
    }

    /// Theta at which an effort column is largest.
    pub fn argmax(&self, who: Contestant) -> f64 {
        let value = |p: &CurvePoint| match who {
            Contestant::Low => p.e_l,
            Contestant::High => p.e_h,
        };
        self.points
            .iter()
            .max_by(|a, b| value(a).total_cmp(&value(b)))
            .map(|p| p.theta)
            .unwrap_or(f64::NAN)
    }
}

/// Number of times a sequence of difference signs changes from + to - or
/// back, ignoring flat segments.
pub fn sign_changes(signs: &[i8]) -> usize {
    let mut last = 0i8;
    let mut changes = 0;
    for &s in signs.iter().filter(|s| **s != 0) {
        if last != 0 && s != last {
            changes += 1;
        }
        last = s;
    }
    changes
}
