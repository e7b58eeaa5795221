//! Synthetic knockout tournaments with planted effects.
//!
//! Each player has a latent skill (points per turn) that follows a
//! mean-reverting, bounded random walk across seasons. What the panel calls
//! *ability* is a noisy two-season trailing mean of that skill, so ability
//! measures skill with error, as a past 3-darts average does. Per-turn
//! scoring means are built in [`effort_response`] from the latent skill, a
//! first-nine premium, the planted effects and additive noise terms.

pub mod bracket;
pub mod panel;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use statrs::distribution::ContinuousCDF;
use serde::{Deserialize, Serialize};

use crate::darts::{self, CheckoutTable, LegRules, ThrowerProfile};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::Contestant;

pub use bracket::{expected_next_ability, make_draw, schedule, twin, Bracket, Pairing};
pub use panel::{export_panel, import_panel, read_panel, to_table, write_panel, ContestRecord, COLUMNS};

pub const ABILITY_MIN: f64 = 60.0;
pub const ABILITY_MAX: f64 = 120.0;

/// What the tournament organiser and the draw see about a player in one
/// season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerState {
    pub id: u32,
    /// Two-season trailing 3-darts average, measured with noise.
    pub ability: f64,
    /// 0 is the best ranked player.
    pub world_ranking: f64,
    /// Years playing at the start of the season; contest records carry
    /// whole years at the tournament date.
    pub experience: f64,
    pub home_city: u32,
}

impl PlayerState {
    pub fn validate(&self) -> Result<()> {
        if !(ABILITY_MIN..=ABILITY_MAX).contains(&self.ability) {
            return Err(Error::Domain(format!("player {} ability {} outside [60, 120]", self.id, self.ability)));
        }
        if !(0.0..=1.0).contains(&self.world_ranking) {
            return Err(Error::Domain(format!("player {} ranking {} outside [0, 1]", self.id, self.world_ranking)));
        }
        if !(self.experience >= 0.0) {
            return Err(Error::Domain(format!("player {} has negative experience", self.id)));
        }
        Ok(())
    }
}

/// Ground-truth responses of per-turn means. Ratio effects are per unit of
/// `ability_ratio - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrueEffects {
    pub beta_underdog_ratio: f64,
    pub beta_favorite_ratio: f64,
    /// Overrides `beta_favorite_ratio` in first-half legs.
    pub beta_favorite_ratio_first_half: Option<f64>,
    /// Overrides `beta_favorite_ratio` in second-half legs.
    pub beta_favorite_ratio_second_half: Option<f64>,
    /// Underdog shift when the underdog starts the contest, at
    /// `headstart_ratio_reference`.
    pub gamma_headstart_underdog: f64,
    /// Change of the head-start shift per unit ability ratio. Enters as
    /// `(starts - headstart_prob_underdog) * slope * (ratio - reference)`,
    /// so the ratio response averaged over bull-offs stays
    /// `beta_underdog_ratio`.
    pub gamma_headstart_ratio_slope: f64,
    pub headstart_ratio_reference: f64,
    /// Favorite shift per point of expected next-opponent ability.
    pub delta_spillover_favorite: f64,
    pub spillover_reference: f64,
    /// Loading of the favorite's noise on the latent skill of the twin
    /// contest's favorite. Makes expected ability endogenous while leaving
    /// the opponent-known indicator valid.
    pub spillover_confounding: f64,
    /// Shift for a player at a home event.
    pub home_effect: f64,
    pub headstart_prob_underdog: f64,
}

impl Default for TrueEffects {
    fn default() -> Self {
        Self {
            beta_underdog_ratio: -15.075,
            beta_favorite_ratio: 5.738,
            beta_favorite_ratio_first_half: None,
            beta_favorite_ratio_second_half: None,
            gamma_headstart_underdog: 0.688,
            gamma_headstart_ratio_slope: 4.0,
            headstart_ratio_reference: 1.055,
            delta_spillover_favorite: -0.563,
            spillover_reference: 94.7,
            spillover_confounding: 0.7,
            home_effect: 1.0,
            headstart_prob_underdog: 0.481,
        }
    }
}

impl TrueEffects {
    /// No treatment responses, a fair bull-off and no endogeneity.
    pub fn zero() -> Self {
        Self {
            beta_underdog_ratio: 0.0,
            beta_favorite_ratio: 0.0,
            beta_favorite_ratio_first_half: None,
            beta_favorite_ratio_second_half: None,
            gamma_headstart_underdog: 0.0,
            gamma_headstart_ratio_slope: 0.0,
            delta_spillover_favorite: 0.0,
            spillover_confounding: 0.0,
            home_effect: 0.0,
            headstart_prob_underdog: 0.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            self.beta_underdog_ratio,
            self.beta_favorite_ratio,
            self.beta_favorite_ratio_first_half.unwrap_or(0.0),
            self.beta_favorite_ratio_second_half.unwrap_or(0.0),
            self.gamma_headstart_underdog,
            self.gamma_headstart_ratio_slope,
            self.headstart_ratio_reference,
            self.delta_spillover_favorite,
            self.spillover_reference,
            self.spillover_confounding,
            self.home_effect,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("true effects must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.headstart_prob_underdog) {
            return Err(Error::Domain(format!(
                "headstart_prob_underdog must lie in [0, 1], got {}",
                self.headstart_prob_underdog
            )));
        }
        Ok(())
    }

    fn favorite_ratio(&self, first_half: bool) -> f64 {
        let half = if first_half {
            self.beta_favorite_ratio_first_half
        } else {
            self.beta_favorite_ratio_second_half
        };
        half.unwrap_or(self.beta_favorite_ratio)
    }
}

/// A group of identically formatted tournaments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentClass {
    pub count: usize,
    pub bracket_size: usize,
    pub n_seeded: usize,
    #[serde(default)]
    pub byes: usize,
    /// Best-of-k per stage, first stage first. The last entry is reused if
    /// there are more stages than entries.
    pub legs: Vec<u32>,
    /// Log prize level relative to other classes.
    #[serde(default)]
    pub prize_level: f64,
}

impl TournamentClass {
    pub fn n_stages(&self) -> usize {
        self.bracket_size.trailing_zeros() as usize
    }

    pub fn legs_in_stage(&self, stage: usize) -> u32 {
        self.legs[(stage - 1).min(self.legs.len() - 1)]
    }

    pub fn contests_per_tournament(&self) -> usize {
        self.bracket_size - 1 - self.byes
    }
}

/// Everything the generator needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpConfig {
    pub n_players: usize,
    pub first_year: u32,
    pub n_years: u32,
    /// Stationary mean and sd of latent skill.
    pub skill_mean: f64,
    pub skill_sd: f64,
    /// Year-to-year persistence of skill deviations.
    pub skill_persistence: f64,
    /// Noise of the measured two-season average.
    pub measurement_sd: f64,
    /// Extra points per turn in the scoring phase over the overall average.
    pub first_nine_premium: f64,
    pub per_turn_sd: f64,
    /// Player-by-contest form noise.
    pub form_sd: f64,
    /// Shared by both players of a contest.
    pub contest_sd: f64,
    pub tournament_sd: f64,
    /// Added per stage after the first.
    pub stage_step: f64,
    pub finish_skill_base: f64,
    /// Change in finish skill per point of latent skill above the mean.
    pub finish_skill_slope: f64,
    pub checkout: CheckoutTable,
    pub stall_turns: usize,
    /// How strongly entry favours better players (0 = uniform).
    pub entry_selectivity: f64,
    pub n_cities: u32,
    pub ranking_noise_sd: f64,
    /// Rankings of the simulated pool fill `[0, ranking_scale]` of the
    /// world ranking.
    pub ranking_scale: f64,
    pub prize_sd: f64,
    pub classes: Vec<TournamentClass>,
    pub effects: TrueEffects,
    /// Replays per contest for the emulated win probability; 0 switches
    /// emulation off.
    pub odds_replays: u32,
}

impl Default for DgpConfig {
    fn default() -> Self {
        let legs = vec![11, 11, 11, 13, 15];
        Self {
            n_players: 420,
            first_year: 2010,
            n_years: 11,
            skill_mean: 90.0,
            skill_sd: 4.5,
            skill_persistence: 0.9,
            measurement_sd: 2.0,
            first_nine_premium: 6.35,
            per_turn_sd: 24.0,
            form_sd: 3.5,
            contest_sd: 3.5,
            tournament_sd: 2.0,
            stage_step: 0.3,
            finish_skill_base: 0.7,
            finish_skill_slope: 0.022,
            checkout: CheckoutTable::default(),
            stall_turns: 60,
            entry_selectivity: 0.8,
            n_cities: 30,
            ranking_noise_sd: 8.0,
            ranking_scale: 0.1,
            prize_sd: 1.0,
            classes: vec![
                TournamentClass {
                    count: 144,
                    bracket_size: 32,
                    n_seeded: 8,
                    byes: 0,
                    legs: legs.clone(),
                    prize_level: 0.0,
                },
                TournamentClass {
                    count: 2,
                    bracket_size: 32,
                    n_seeded: 8,
                    byes: 1,
                    legs: legs.clone(),
                    prize_level: 0.5,
                },
                TournamentClass {
                    count: 4,
                    bracket_size: 64,
                    n_seeded: 16,
                    byes: 0,
                    legs: vec![11, 11, 11, 13, 15, 19],
                    prize_level: 2.0,
                },
            ],
            effects: TrueEffects::default(),
            odds_replays: 0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if self.n_years == 0 {
            return bad("n_years must be positive".into());
        }
        if !(self.skill_persistence >= 0.0 && self.skill_persistence < 1.0) {
            return bad(format!("skill_persistence must lie in [0, 1), got {}", self.skill_persistence));
        }
        for (name, v) in [
            ("skill_sd", self.skill_sd),
            ("measurement_sd", self.measurement_sd),
            ("form_sd", self.form_sd),
            ("contest_sd", self.contest_sd),
            ("tournament_sd", self.tournament_sd),
            ("ranking_noise_sd", self.ranking_noise_sd),
            ("prize_sd", self.prize_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.per_turn_sd > 0.0) {
            return bad(format!("per_turn_sd must be positive, got {}", self.per_turn_sd));
        }
        if !(ABILITY_MIN..=ABILITY_MAX).contains(&self.skill_mean) {
            return bad(format!("skill_mean {} outside [60, 120]", self.skill_mean));
        }
        if !(0.0..=1.0).contains(&self.ranking_scale) {
            return bad(format!("ranking_scale must lie in [0, 1], got {}", self.ranking_scale));
        }
        if self.n_cities == 0 {
            return bad("n_cities must be positive".into());
        }
        if self.classes.iter().all(|c| c.count == 0) {
            return bad("at least one tournament is required".into());
        }
        for c in &self.classes {
            if c.bracket_size < 2 || !c.bracket_size.is_power_of_two() {
                return bad(format!("bracket size {} is not a power of two >= 2", c.bracket_size));
            }
            if c.legs.is_empty() || c.legs.iter().any(|k| k % 2 == 0) {
                return bad(format!("legs per stage must be odd and non-empty, got {:?}", c.legs));
            }
            if c.n_seeded > c.bracket_size / 2 || c.byes > c.n_seeded {
                return bad(format!(
                    "{} seeds and {} byes do not fit a bracket of {}",
                    c.n_seeded, c.byes, c.bracket_size
                ));
            }
            if c.bracket_size - c.byes > self.n_players {
                return bad(format!(
                    "a bracket of {} needs more than the {} players in the pool",
                    c.bracket_size, self.n_players
                ));
            }
        }
        self.checkout.validate()?;
        self.effects.validate()
    }

    pub fn n_tournaments(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    /// Records a run will produce.
    pub fn n_contests(&self) -> usize {
        self.classes.iter().map(|c| c.count * c.contests_per_tournament()).sum()
    }

    fn finish_skill(&self, skill: f64) -> f64 {
        (self.finish_skill_base + self.finish_skill_slope * (skill - self.skill_mean)).clamp(0.05, 1.0)
    }

    fn leg_rules(&self) -> LegRules {
        LegRules {
            checkout: self.checkout,
            stall_turns: self.stall_turns,
        }
    }
}

/// Player states for one season plus the latent skills behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Season {
    pub year: u32,
    pub players: Vec<PlayerState>,
    pub skill: Vec<f64>,
}

/// Simulate the player pool season by season.
pub fn player_seasons(config: &DgpConfig, seed: u64) -> Result<Vec<Season>> {
    config.validate()?;
    let mut rng = rng::stream(seed, Domain::Players, 0);
    let n = config.n_players;
    let rho = config.skill_persistence;
    let innovation = Normal::new(0.0, config.skill_sd * (1.0 - rho * rho).sqrt()).expect("finite sd");
    let measure = Normal::new(0.0, config.measurement_sd).expect("finite sd");
    let rank_noise = Normal::new(0.0, config.ranking_noise_sd).expect("finite sd");
    let lo = ABILITY_MIN + 5.0;
    let hi = ABILITY_MAX - 5.0;

    let start_experience: Vec<f64> = (0..n).map(|_| rng.gen_range(2.0..30.0)).collect();
    let home: Vec<u32> = (0..n).map(|_| rng.gen_range(0..config.n_cities)).collect();
    // Initial deviations sit on stratified normal quantiles so that the
    // pool's spread does not vary from seed to seed. Two pre-sample seasons
    // feed the first trailing average.
    let unit = statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal");
    let mut dev: Vec<f64> = (0..n)
        .map(|i| config.skill_sd * unit.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect();
    dev.shuffle(&mut rng);
    let mut history: Vec<Vec<f64>> = Vec::new();
    let total = config.n_years as usize + 2;
    for _ in 0..total {
        history.push(dev.iter().map(|d| (config.skill_mean + d).clamp(lo, hi)).collect());
        for d in dev.iter_mut() {
            *d = rho * *d + innovation.sample(&mut rng);
        }
    }

    let mut seasons = Vec::with_capacity(config.n_years as usize);
    for y in 0..config.n_years as usize {
        let skill = history[y + 2].clone();
        let ability: Vec<f64> = (0..n)
            .map(|i| {
                let trailing = 0.5 * (history[y][i] + history[y + 1][i]);
                (trailing + measure.sample(&mut rng)).clamp(ABILITY_MIN, ABILITY_MAX)
            })
            .collect();
        let score: Vec<f64> = ability.iter().map(|a| a + rank_noise.sample(&mut rng)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        let mut ranking = vec![0.0; n];
        for (r, &i) in order.iter().enumerate() {
            ranking[i] = config.ranking_scale * r as f64 / (n.max(2) - 1) as f64;
        }
        let players = (0..n)
            .map(|i| PlayerState {
                id: i as u32,
                ability: ability[i],
                world_ranking: ranking[i],
                experience: start_experience[i] + (y + 2) as f64,
                home_city: home[i],
            })
            .collect();
        seasons.push(Season {
            year: config.first_year + y as u32,
            players,
            skill,
        });
    }
    Ok(seasons)
}

/// One tournament's identity before it is played.
#[derive(Debug, Clone, PartialEq)]
pub struct TournamentPlan {
    pub id: u32,
    pub year: u32,
    pub class: usize,
    pub city: u32,
    /// Normalised to [0, 1] within the year.
    pub prize_money: f64,
    /// Fraction of the season elapsed when the tournament starts.
    pub date: f64,
}

/// Tournament calendar: classes interleaved at random, spread evenly over
/// the years, prize money min-max normalised per year.
pub fn tournament_plans(config: &DgpConfig, seed: u64) -> Result<Vec<TournamentPlan>> {
    config.validate()?;
    let mut rng = rng::stream(seed, Domain::Tournament, u64::MAX);
    let mut classes: Vec<usize> = config
        .classes
        .iter()
        .enumerate()
        .flat_map(|(i, c)| std::iter::repeat(i).take(c.count))
        .collect();
    classes.shuffle(&mut rng);
    let n = classes.len();
    let noise = Normal::new(0.0, config.prize_sd).expect("finite sd");
    let raw: Vec<f64> = classes
        .iter()
        .map(|&c| (config.classes[c].prize_level + noise.sample(&mut rng)).exp())
        .collect();
    let years: Vec<u32> = (0..n)
        .map(|t| config.first_year + (t * config.n_years as usize / n) as u32)
        .collect();
    let mut plans: Vec<TournamentPlan> = (0..n)
        .map(|t| TournamentPlan {
            id: t as u32,
            year: years[t],
            class: classes[t],
            city: rng.gen_range(0..config.n_cities),
            prize_money: 0.0,
            date: 0.0,
        })
        .collect();
    for year in config.first_year..config.first_year + config.n_years {
        let idx: Vec<usize> = (0..n).filter(|&t| years[t] == year).collect();
        for (k, &t) in idx.iter().enumerate() {
            plans[t].date = k as f64 / idx.len() as f64;
        }
        let lo = idx.iter().map(|&t| raw[t]).fold(f64::INFINITY, f64::min);
        let hi = idx.iter().map(|&t| raw[t]).fold(f64::NEG_INFINITY, f64::max);
        for &t in &idx {
            plans[t].prize_money = if hi > lo { (raw[t] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    Ok(plans)
}

/// Pre-contest context seen by [`effort_response`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseContext {
    pub ability_ratio: f64,
    pub underdog_starts: bool,
    /// `None` in the final.
    pub expected_ability_next: Option<f64>,
    /// Latent skill of the twin contest's favorite; `None` in the final.
    pub twin_favorite_skill: Option<f64>,
    pub favorite_home: bool,
    pub underdog_home: bool,
}

/// Per-turn mean shifts `(underdog, favorite)` caused by the planted
/// effects in one half of the contest. Skill, premium and noise terms are
/// added by the caller.
pub fn effort_response(ctx: &ResponseContext, effects: &TrueEffects, first_half: bool) -> (f64, f64) {
    let excess = ctx.ability_ratio - 1.0;
    let mut underdog = effects.beta_underdog_ratio * excess;
    let starts = if ctx.underdog_starts { 1.0 } else { 0.0 };
    underdog += starts * effects.gamma_headstart_underdog
        + (starts - effects.headstart_prob_underdog)
            * effects.gamma_headstart_ratio_slope
            * (ctx.ability_ratio - effects.headstart_ratio_reference);
    let mut favorite = effects.favorite_ratio(first_half) * excess;
    if let Some(e) = ctx.expected_ability_next {
        favorite += effects.delta_spillover_favorite * (e - effects.spillover_reference);
    }
    if let Some(s) = ctx.twin_favorite_skill {
        favorite += effects.spillover_confounding * (s - effects.spillover_reference);
    }
    if ctx.favorite_home {
        favorite += effects.home_effect;
    }
    if ctx.underdog_home {
        underdog += effects.home_effect;
    }
    (underdog, favorite)
}

/// Whether leg `j` of a best-of-`k` contest is generated with first-half
/// parameters. The realised split is only known afterwards, so the cut sits
/// near half of the expected number of legs.
pub fn generated_first_half(j: usize, k: u32) -> bool {
    8 * j < 3 * k as usize + 1
}

/// Output of [`run_tournaments`].
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub records: Vec<ContestRecord>,
    /// Darts used by the winner of every leg, in record order.
    pub leg_darts: Vec<u32>,
}

/// Simulate every tournament of `config`. Tournaments run in parallel on
/// their own random streams, so output does not depend on the thread count.
pub fn run_tournaments(config: &DgpConfig, seed: u64) -> Result<Simulation> {
    config.validate()?;
    let seasons = player_seasons(config, seed)?;
    let plans = tournament_plans(config, seed)?;
    let results: Vec<Result<(Vec<ContestRecord>, Vec<u32>)>> = plans
        .par_iter()
        .map(|plan| {
            let season = &seasons[(plan.year - config.first_year) as usize];
            simulate_tournament(config, plan, season, seed)
        })
        .collect();
    let mut records = Vec::with_capacity(config.n_contests());
    let mut leg_darts = Vec::new();
    for r in results {
        let (rec, darts) = r?;
        records.extend(rec);
        leg_darts.extend(darts);
    }
    Ok(Simulation { records, leg_darts })
}

fn contest_stream_id(tournament: u32, stage: usize, pairing: usize) -> u64 {
    ((tournament as u64) << 24) | ((stage as u64) << 16) | pairing as u64
}

/// Play one tournament: entry, draw, then each stage in random order.
pub fn simulate_tournament(
    config: &DgpConfig,
    plan: &TournamentPlan,
    season: &Season,
    seed: u64,
) -> Result<(Vec<ContestRecord>, Vec<u32>)> {
    let class = &config.classes[plan.class];
    let mut rng = rng::stream(seed, Domain::Tournament, plan.id as u64);
    let n_entrants = class.bracket_size - class.byes;

    let mean_ability = season.players.iter().map(|p| p.ability).sum::<f64>() / season.players.len() as f64;
    let sd_ability = (season.players.iter().map(|p| (p.ability - mean_ability).powi(2)).sum::<f64>()
        / season.players.len() as f64)
        .sqrt()
        .max(1e-9);
    let entrants: Vec<PlayerState> = season
        .players
        .choose_multiple_weighted(&mut rng, n_entrants, |p| {
            (config.entry_selectivity * (p.ability - mean_ability) / sd_ability).exp()
        })
        .map_err(|e| Error::Argument(format!("entry draw failed: {e}")))?
        .cloned()
        .collect();
    let draw = make_draw(&entrants, class.n_seeded, class.byes, class.bracket_size, &mut rng)?;

    let normal = |sd: f64| Normal::new(0.0, sd).expect("validated sd");
    let tournament_effect = normal(config.tournament_sd).sample(&mut rng);
    let contest_noise = normal(config.contest_sd);
    let form_noise = normal(config.form_sd);
    let rules = config.leg_rules();
    let ability = |id: u32| season.players[id as usize].ability;
    let skill = |id: u32| season.skill[id as usize];
    let n_stages = draw.n_stages();

    let mut records = Vec::with_capacity(class.contests_per_tournament());
    let mut leg_darts = Vec::new();
    let mut pairings = draw.first_stage();
    for stage in 1..=n_stages {
        let k = class.legs_in_stage(stage);
        let order = schedule(&pairings, &mut rng);
        let mut winners: Vec<Option<u32>> = pairings.iter().map(|p| p.walkover()).collect();
        for (position, &idx) in order.iter().enumerate() {
            let pairing = pairings[idx];
            let (a, b) = (pairing.a.expect("scheduled"), pairing.b.expect("scheduled"));
            let (fav, und) = if ability(a) > ability(b) || (ability(a) == ability(b) && a < b) {
                (a, b)
            } else {
                (b, a)
            };
            let fav_p = &season.players[fav as usize];
            let und_p = &season.players[und as usize];
            let next = expected_next_ability(idx, &pairings, &winners, ability);
            let twin_favorite_skill = twin(idx, pairings.len()).map(|t| {
                let p = pairings[t];
                match (p.a, p.b) {
                    (Some(x), Some(y)) => skill(if ability(x) >= ability(y) { x } else { y }),
                    (Some(x), None) | (None, Some(x)) => skill(x),
                    (None, None) => unreachable!("empty pairing"),
                }
            });
            let first_starter = darts::bull_off(
                Some((Contestant::Low, config.effects.headstart_prob_underdog)),
                &mut rng,
            );
            let ctx = ResponseContext {
                ability_ratio: fav_p.ability / und_p.ability,
                underdog_starts: first_starter == Contestant::Low,
                expected_ability_next: next.map(|(e, _)| e),
                twin_favorite_skill,
                favorite_home: fav_p.home_city == plan.city,
                underdog_home: und_p.home_city == plan.city,
            };
            let shared = tournament_effect
                + config.stage_step * (stage - 1) as f64
                + contest_noise.sample(&mut rng)
                + config.first_nine_premium;
            let base_l = skill(und) + shared + form_noise.sample(&mut rng);
            let base_h = skill(fav) + shared + form_noise.sample(&mut rng);
            let profile = |base: f64, shift: f64, s: f64| ThrowerProfile {
                per_turn_mean: (base + shift).clamp(1.0, 180.0),
                per_turn_sd: config.per_turn_sd,
                finish_skill: config.finish_skill(s),
            };
            let halves: Vec<(ThrowerProfile, ThrowerProfile)> = [true, false]
                .iter()
                .map(|&first| {
                    let (dl, dh) = effort_response(&ctx, &config.effects, first);
                    (profile(base_l, dl, skill(und)), profile(base_h, dh, skill(fav)))
                })
                .collect();
            let by_leg = |j: usize| halves[if generated_first_half(j, k) { 0 } else { 1 }];

            let stream = contest_stream_id(plan.id, stage, idx);
            let mut contest_rng = rng::stream(seed, Domain::Contest, stream);
            let result = darts::simulate_contest_with(k, first_starter, &rules, &mut contest_rng, by_leg)?;
            let favorite_win_prob = (config.odds_replays > 0).then(|| {
                let mut replay_rng = rng::stream(seed, Domain::Replication, stream);
                let wins = (0..config.odds_replays)
                    .filter(|_| {
                        let starter = darts::bull_off(
                            Some((Contestant::Low, config.effects.headstart_prob_underdog)),
                            &mut replay_rng,
                        );
                        darts::simulate_contest_with(k, starter, &rules, &mut replay_rng, by_leg)
                            .map(|r| r.winner == Contestant::High)
                            .unwrap_or(false)
                    })
                    .count();
                wins as f64 / config.odds_replays as f64
            });

            let winner_id = if result.winner == Contestant::High { fav } else { und };
            winners[idx] = Some(winner_id);
            leg_darts.extend(result.legs.iter().map(|l| l.darts_used_by_winner));
            records.push(ContestRecord {
                tournament_id: plan.id,
                year: plan.year,
                stage: stage as u32,
                n_stages: n_stages as u32,
                stages_to_final: (n_stages - stage) as u32,
                contest_id: idx as u32,
                schedule_position: position as u32,
                k,
                favorite_id: fav,
                underdog_id: und,
                favorite_ability: fav_p.ability,
                underdog_ability: und_p.ability,
                ability_ratio: ctx.ability_ratio,
                ability_difference: fav_p.ability - und_p.ability,
                log_ability_difference: fav_p.ability.ln() - und_p.ability.ln(),
                performance_favorite: result.performance_h,
                performance_underdog: result.performance_l,
                performance_mean: 0.5 * (result.performance_h + result.performance_l),
                performance_first_half_favorite: result.performance_first_half_h,
                performance_first_half_underdog: result.performance_first_half_l,
                performance_second_half_favorite: result.performance_second_half_h,
                performance_second_half_underdog: result.performance_second_half_l,
                performance6_favorite: result.performance6_h,
                performance6_underdog: result.performance6_l,
                favorite_wins: (result.winner == Contestant::High) as u8,
                contest_length_fraction: result.contest_length_fraction,
                legs_played: result.legs_played() as u32,
                n_180s: result.n_180s as u32,
                n_100plus_favorite: result.n_100plus_h,
                n_100plus_underdog: result.n_100plus_l,
                n_140plus_favorite: result.n_140plus_h,
                n_140plus_underdog: result.n_140plus_l,
                n_180_favorite: result.n_180_h,
                n_180_underdog: result.n_180_l,
                favorite_starts: (first_starter == Contestant::High) as u8,
                underdog_starts: (first_starter == Contestant::Low) as u8,
                expected_ability_next: next.map(|(e, _)| e),
                opponent_known: next.map(|(_, known)| known as u8),
                favorite_ranking: fav_p.world_ranking,
                underdog_ranking: und_p.world_ranking,
                favorite_experience: (fav_p.experience + plan.date).floor(),
                underdog_experience: (und_p.experience + plan.date).floor(),
                favorite_home: ctx.favorite_home as u8,
                underdog_home: ctx.underdog_home as u8,
                prize_money: plan.prize_money,
                favorite_win_prob,
            });
        }
        pairings = winners
            .chunks(2)
            .map(|w| Pairing { a: w[0], b: w.get(1).copied().flatten() })
            .collect();
        if n_stages == stage {
            break;
        }
    }
    records.sort_by_key(|r| (r.stage, r.contest_id));
    Ok((records, leg_darts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> DgpConfig {
        DgpConfig {
            n_players: 80,
            n_years: 3,
            classes: vec![
                TournamentClass {
                    count: 6,
                    bracket_size: 16,
                    n_seeded: 4,
                    byes: 0,
                    legs: vec![7, 9],
                    prize_level: 0.0,
                },
                TournamentClass {
                    count: 2,
                    bracket_size: 16,
                    n_seeded: 4,
                    byes: 2,
                    legs: vec![7],
                    prize_level: 1.0,
                },
            ],
            ..DgpConfig::default()
        }
    }

    #[test]
    fn default_config_makes_the_reference_panel_size() {
        let c = DgpConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_tournaments(), 150);
        assert_eq!(c.n_contests(), 4776);
    }

    #[test]
    fn knockout_conservation_and_labels() {
        let c = small_config();
        let sim = run_tournaments(&c, 11).unwrap();
        assert_eq!(sim.records.len(), 6 * 15 + 2 * 13);
        for r in &sim.records {
            assert!(r.favorite_ability >= r.underdog_ability);
            assert!(r.ability_ratio >= 1.0);
            assert!(r.stage >= 1);
            assert_eq!(r.favorite_starts + r.underdog_starts, 1);
            assert_eq!(r.is_final(), r.expected_ability_next.is_none());
            assert_eq!(r.is_final(), r.opponent_known.is_none());
            let needed = (r.k + 1) / 2;
            assert!(r.legs_played >= needed && r.legs_played <= r.k);
        }
        for t in 0..8 {
            let finals = sim.records.iter().filter(|r| r.tournament_id == t && r.is_final()).count();
            assert_eq!(finals, 1);
        }
    }

    #[test]
    fn opponent_known_iff_twin_played_earlier() {
        let c = small_config();
        let sim = run_tournaments(&c, 12).unwrap();
        for r in sim.records.iter().filter(|r| !r.is_final()) {
            let twin_id = r.contest_id ^ 1;
            let twin = sim
                .records
                .iter()
                .find(|o| o.tournament_id == r.tournament_id && o.stage == r.stage && o.contest_id == twin_id);
            match twin {
                // a bye twin is decided before the stage starts
                None => assert_eq!(r.opponent_known, Some(1)),
                Some(t) => assert_eq!(
                    r.opponent_known,
                    Some((t.schedule_position < r.schedule_position) as u8)
                ),
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let c = small_config();
        let a = run_tournaments(&c, 5).unwrap();
        let b = run_tournaments(&c, 5).unwrap();
        let d = run_tournaments(&c, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.records, d.records);
    }

    #[test]
    fn zero_effects_response_is_zero() {
        let ctx = ResponseContext {
            ability_ratio: 1.1,
            underdog_starts: true,
            expected_ability_next: Some(99.0),
            twin_favorite_skill: Some(90.0),
            favorite_home: true,
            underdog_home: false,
        };
        assert_eq!(effort_response(&ctx, &TrueEffects::zero(), true), (0.0, 0.0));
    }

    #[test]
    fn planted_responses_are_linear() {
        let effects = TrueEffects {
            gamma_headstart_ratio_slope: 0.0,
            ..TrueEffects::default()
        };
        let mut ctx = ResponseContext {
            ability_ratio: 1.1,
            underdog_starts: false,
            expected_ability_next: None,
            twin_favorite_skill: None,
            favorite_home: false,
            underdog_home: false,
        };
        let (u, f) = effort_response(&ctx, &effects, true);
        assert!((u - (-1.5075)).abs() < 1e-12);
        assert!((f - 0.5738).abs() < 1e-12);
        ctx.underdog_starts = true;
        let (u2, _) = effort_response(&ctx, &effects, true);
        assert!((u2 - u - 0.688).abs() < 1e-12);
    }

    #[test]
    fn headstart_slope_averages_out_of_the_ratio_response() {
        let effects = TrueEffects {
            home_effect: 0.0,
            ..TrueEffects::default()
        };
        let p = effects.headstart_prob_underdog;
        let at = |ratio: f64, starts: bool| {
            let ctx = ResponseContext {
                ability_ratio: ratio,
                underdog_starts: starts,
                expected_ability_next: None,
                twin_favorite_skill: None,
                favorite_home: false,
                underdog_home: false,
            };
            effort_response(&ctx, &effects, true).0
        };
        let mean = |r: f64| p * at(r, true) + (1.0 - p) * at(r, false);
        let slope = (mean(1.10) - mean(1.00)) / 0.1;
        assert!((slope - effects.beta_underdog_ratio).abs() < 1e-9);
        let gap = at(1.10, true) - at(1.10, false);
        assert!((gap - (0.688 + 4.0 * (1.10 - 1.055))).abs() < 1e-12);
    }

    #[test]
    fn half_specific_favorite_effects() {
        let effects = TrueEffects {
            beta_favorite_ratio_first_half: Some(12.303),
            beta_favorite_ratio_second_half: Some(-2.035),
            ..TrueEffects::zero()
        };
        let ctx = ResponseContext {
            ability_ratio: 1.1,
            underdog_starts: false,
            expected_ability_next: None,
            twin_favorite_skill: None,
            favorite_home: false,
            underdog_home: false,
        };
        assert!((effort_response(&ctx, &effects, true).1 - 1.2303).abs() < 1e-12);
        assert!((effort_response(&ctx, &effects, false).1 + 0.2035).abs() < 1e-12);
    }

    #[test]
    fn generated_halves_cut() {
        let first: Vec<usize> = (0..11).filter(|&j| generated_first_half(j, 11)).collect();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
        assert!(generated_first_half(0, 1));
    }

    #[test]
    fn seasons_respect_invariants() {
        let c = small_config();
        let seasons = player_seasons(&c, 3).unwrap();
        assert_eq!(seasons.len(), 3);
        for s in &seasons {
            for p in &s.players {
                p.validate().unwrap();
            }
            let best = s.players.iter().filter(|p| p.world_ranking == 0.0).count();
            assert_eq!(best, 1);
        }
        // experience grows by one per season
        assert_eq!(seasons[1].players[0].experience - seasons[0].players[0].experience, 1.0);
    }

    #[test]
    fn prize_money_is_normalised_per_year() {
        let plans = tournament_plans(&DgpConfig::default(), 9).unwrap();
        for year in 2010..2021 {
            let p: Vec<f64> = plans.iter().filter(|t| t.year == year).map(|t| t.prize_money).collect();
            assert!(!p.is_empty());
            assert!(p.iter().any(|&v| v == 0.0) && p.iter().any(|&v| v == 1.0));
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small_config();
        c.classes[0].legs = vec![6];
        assert!(run_tournaments(&c, 1).is_err());
        let mut c = small_config();
        c.effects.headstart_prob_underdog = 1.5;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.classes[0].bracket_size = 12;
        assert!(c.validate().is_err());
    }
}
