//! 501 legs and best-of-k contests.
//!
//! A turn is three darts summarised by a single score. Outside the finishing
//! range the score is a rounded normal draw capped at 180; from 170 down a
//! turn checks out with probability `finish_skill * table(remaining)`. The
//! dart-by-dart double-out geometry is not modelled.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Contestant;

pub const START_SCORE: u32 = 501;
pub const MAX_TURN_SCORE: u32 = 180;
pub const MAX_CHECKOUT: u32 = 170;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrowerProfile {
    /// Points per three-dart turn while scoring.
    pub per_turn_mean: f64,
    pub per_turn_sd: f64,
    /// Multiplier on the checkout table, in `(0, 1]`.
    pub finish_skill: f64,
}

impl ThrowerProfile {
    pub fn new(per_turn_mean: f64, per_turn_sd: f64, finish_skill: f64) -> Result<Self> {
        let profile = Self {
            per_turn_mean,
            per_turn_sd,
            finish_skill,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.per_turn_mean > 0.0 && self.per_turn_mean <= MAX_TURN_SCORE as f64) {
            return Err(Error::Domain(format!(
                "per_turn_mean must lie in (0, 180], got {}",
                self.per_turn_mean
            )));
        }
        if !(self.per_turn_sd > 0.0) || !self.per_turn_sd.is_finite() {
            return Err(Error::Domain(format!(
                "per_turn_sd must be positive, got {}",
                self.per_turn_sd
            )));
        }
        if !(self.finish_skill > 0.0 && self.finish_skill <= 1.0) {
            return Err(Error::Domain(format!(
                "finish_skill must lie in (0, 1], got {}",
                self.finish_skill
            )));
        }
        Ok(())
    }
}

/// Per-turn checkout base rates by remaining-score band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckoutTable {
    /// 2 to 40 remaining.
    pub short: f64,
    /// 41 to 100 remaining.
    pub medium: f64,
    /// 101 to 170 remaining.
    pub long: f64,
}

impl Default for CheckoutTable {
    fn default() -> Self {
        Self {
            short: 0.95,
            medium: 0.65,
            long: 0.2,
        }
    }
}

impl CheckoutTable {
    pub fn rate(&self, remaining: u32) -> f64 {
        match remaining {
            2..=40 => self.short,
            41..=100 => self.medium,
            101..=MAX_CHECKOUT => self.long,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("short", self.short), ("medium", self.medium), ("long", self.long)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("checkout rate `{name}` must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegRules {
    pub checkout: CheckoutTable,
    /// After this many turns by one player in a leg, that player's next
    /// turn is forced to make progress (and to check out when in range).
    pub stall_turns: usize,
}

impl Default for LegRules {
    fn default() -> Self {
        Self {
            checkout: CheckoutTable::default(),
            stall_turns: 60,
        }
    }
}

/// Score of one turn with `remaining` points left.
///
/// A turn that would leave fewer than two points without checking out is a
/// bust and scores zero.
pub fn simulate_turn<R: Rng + ?Sized>(
    profile: &ThrowerProfile,
    remaining: u32,
    table: &CheckoutTable,
    rng: &mut R,
) -> Result<u32> {
    if !(2..=START_SCORE).contains(&remaining) {
        return Err(Error::Domain(format!(
            "remaining score must lie in [2, 501], got {remaining}"
        )));
    }
    Ok(turn(profile, remaining, table, false, rng))
}

fn turn<R: Rng + ?Sized>(
    profile: &ThrowerProfile,
    remaining: u32,
    table: &CheckoutTable,
    forced: bool,
    rng: &mut R,
) -> u32 {
    if remaining <= MAX_CHECKOUT {
        let p_finish = profile.finish_skill * table.rate(remaining);
        if forced || rng.gen::<f64>() < p_finish {
            return remaining;
        }
    } else if forced {
        return MAX_TURN_SCORE.min(remaining - 2);
    }
    let normal = Normal::new(profile.per_turn_mean, profile.per_turn_sd)
        .expect("validated profile has a positive sd");
    let raw = normal.sample(rng).round().clamp(0.0, MAX_TURN_SCORE as f64) as u32;
    if raw + 2 > remaining {
        0
    } else {
        raw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegResult {
    pub winner: Contestant,
    pub starter: Contestant,
    pub turns_l: Vec<u32>,
    pub turns_h: Vec<u32>,
    pub darts_used_by_winner: u32,
    pub first9_avg_l: f64,
    pub first9_avg_h: f64,
}

impl LegResult {
    pub fn turns(&self, who: Contestant) -> &[u32] {
        match who {
            Contestant::Low => &self.turns_l,
            Contestant::High => &self.turns_h,
        }
    }

    pub fn first9_avg(&self, who: Contestant) -> f64 {
        opening_average(self.turns(who), 3)
    }

    pub fn first6_avg(&self, who: Contestant) -> f64 {
        opening_average(self.turns(who), 2)
    }

    pub fn count_at_least(&self, who: Contestant, threshold: u32) -> usize {
        self.turns(who).iter().filter(|&&s| s >= threshold).count()
    }
}

/// Mean of the first `n` turn scores, over the turns actually thrown when
/// fewer than `n` exist.
fn opening_average(turns: &[u32], n: usize) -> f64 {
    let used = &turns[..turns.len().min(n)];
    if used.is_empty() {
        return f64::NAN;
    }
    used.iter().map(|&s| s as f64).sum::<f64>() / used.len() as f64
}

/// One leg with alternating turns, `starter` throwing first.
pub fn simulate_leg<R: Rng + ?Sized>(
    profile_l: &ThrowerProfile,
    profile_h: &ThrowerProfile,
    starter: Contestant,
    rules: &LegRules,
    rng: &mut R,
) -> LegResult {
    let profiles = [profile_l, profile_h];
    let mut remaining = [START_SCORE; 2];
    let mut turns: [Vec<u32>; 2] = [Vec::with_capacity(12), Vec::with_capacity(12)];
    let mut current = starter;
    loop {
        let i = current.index();
        let forced = turns[i].len() >= rules.stall_turns;
        let score = turn(profiles[i], remaining[i], &rules.checkout, forced, rng);
        turns[i].push(score);
        remaining[i] -= score;
        if remaining[i] == 0 {
            let darts = 3 * turns[i].len() as u32;
            let [turns_l, turns_h] = turns;
            return LegResult {
                winner: current,
                starter,
                first9_avg_l: opening_average(&turns_l, 3),
                first9_avg_h: opening_average(&turns_h, 3),
                darts_used_by_winner: darts,
                turns_l,
                turns_h,
            };
        }
        current = current.other();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestResult {
    pub winner: Contestant,
    pub k: u32,
    pub first_starter: Contestant,
    pub legs_won_l: u32,
    pub legs_won_h: u32,
    pub legs: Vec<LegResult>,
    /// Mean first-nine average over all legs.
    pub performance_l: f64,
    pub performance_h: f64,
    pub performance_first_half_l: f64,
    pub performance_first_half_h: f64,
    pub performance_second_half_l: f64,
    pub performance_second_half_h: f64,
    /// Mean first-six average over all legs.
    pub performance6_l: f64,
    pub performance6_h: f64,
    /// Number of 180s by both players in the contest.
    pub n_180s: usize,
    /// Per-leg rates of 100+, 140+ and 180 turns, by seat.
    pub n_100plus_l: f64,
    pub n_100plus_h: f64,
    pub n_140plus_l: f64,
    pub n_140plus_h: f64,
    pub n_180_l: f64,
    pub n_180_h: f64,
    pub contest_length_fraction: f64,
}

impl ContestResult {
    pub fn legs_played(&self) -> usize {
        self.legs.len()
    }

    /// Leg indices of the first and second half. Halves hold `floor(L/2)`
    /// legs each; the middle leg of an odd-length contest is in neither,
    /// except for a one-leg contest where both halves are that leg.
    pub fn half_ranges(legs_played: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        if legs_played <= 1 {
            return (0..legs_played, 0..legs_played);
        }
        let half = legs_played / 2;
        (0..half, legs_played - half..legs_played)
    }
}

fn check_legs(k: u32) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::Argument(format!("best-of-k needs odd k >= 1, got {k}")));
    }
    Ok(())
}

/// Best-of-`k` contest with fixed profiles.
pub fn simulate_contest<R: Rng + ?Sized>(
    profile_l: &ThrowerProfile,
    profile_h: &ThrowerProfile,
    k: u32,
    first_starter: Contestant,
    rules: &LegRules,
    rng: &mut R,
) -> Result<ContestResult> {
    simulate_contest_with(k, first_starter, rules, rng, |_| (*profile_l, *profile_h))
}

/// Best-of-`k` contest where the profiles may depend on the leg index.
/// The starter alternates every leg.
pub fn simulate_contest_with<R, F>(
    k: u32,
    first_starter: Contestant,
    rules: &LegRules,
    rng: &mut R,
    mut profiles: F,
) -> Result<ContestResult>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> (ThrowerProfile, ThrowerProfile),
{
    check_legs(k)?;
    let needed = (k + 1) / 2;
    let mut won = [0u32; 2];
    let mut legs = Vec::with_capacity(k as usize);
    let mut starter = first_starter;
    while won[0] < needed && won[1] < needed {
        let (pl, ph) = profiles(legs.len());
        pl.validate()?;
        ph.validate()?;
        let leg = simulate_leg(&pl, &ph, starter, rules, rng);
        won[leg.winner.index()] += 1;
        legs.push(leg);
        starter = starter.other();
    }
    let winner = if won[0] == needed {
        Contestant::Low
    } else {
        Contestant::High
    };
    Ok(summarise(k, first_starter, winner, won, legs))
}

fn summarise(k: u32, first_starter: Contestant, winner: Contestant, won: [u32; 2], legs: Vec<LegResult>) -> ContestResult {
    let n = legs.len();
    let mean_over = |range: std::ops::Range<usize>, f: &dyn Fn(&LegResult) -> f64| {
        let values: Vec<f64> = legs[range].iter().map(f).filter(|v| v.is_finite()).collect();
        if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };
    let rate = |who: Contestant, threshold: u32| {
        legs.iter().map(|l| l.count_at_least(who, threshold)).sum::<usize>() as f64 / n as f64
    };
    let (first, second) = ContestResult::half_ranges(n);
    let n_180s = legs
        .iter()
        .map(|l| l.count_at_least(Contestant::Low, 180) + l.count_at_least(Contestant::High, 180))
        .sum();
    ContestResult {
        winner,
        k,
        first_starter,
        legs_won_l: won[0],
        legs_won_h: won[1],
        performance_l: mean_over(0..n, &|l| l.first9_avg_l),
        performance_h: mean_over(0..n, &|l| l.first9_avg_h),
        performance_first_half_l: mean_over(first.clone(), &|l| l.first9_avg_l),
        performance_first_half_h: mean_over(first, &|l| l.first9_avg_h),
        performance_second_half_l: mean_over(second.clone(), &|l| l.first9_avg_l),
        performance_second_half_h: mean_over(second, &|l| l.first9_avg_h),
        performance6_l: mean_over(0..n, &|l| l.first6_avg(Contestant::Low)),
        performance6_h: mean_over(0..n, &|l| l.first6_avg(Contestant::High)),
        n_180s,
        n_100plus_l: rate(Contestant::Low, 100),
        n_100plus_h: rate(Contestant::High, 100),
        n_140plus_l: rate(Contestant::Low, 140),
        n_140plus_h: rate(Contestant::High, 140),
        n_180_l: rate(Contestant::Low, 180),
        n_180_h: rate(Contestant::High, 180),
        contest_length_fraction: n as f64 / k as f64,
        legs,
    }
}

/// Who throws first in the contest. Without an override this is a fair
/// coin; with `Some((who, p))` it is `who` with probability `p`.
pub fn bull_off<R: Rng + ?Sized>(advantage: Option<(Contestant, f64)>, rng: &mut R) -> Contestant {
    let (who, p) = advantage.unwrap_or((Contestant::Low, 0.5));
    if rng.gen::<f64>() < p {
        who
    } else {
        who.other()
    }
}
