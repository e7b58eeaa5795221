use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::calibration::calibration_report;
use super::montecarlo::replicate;
use super::scenarios::{dr_for, model_template, theta_dependent_peak};
use super::specs::*;
use super::{ClusterOn, EstimatorOptions};
use crate::contest::{
    choking_peak_theta, effort_curve, equilibrium, foc_residuals, nash_oracle, sign_changes, ContestModelSpec,
    EffortGrid, NashOptions, Variant,
};
use crate::dgp::{run_tournaments, to_table, write_panel, DgpConfig, TrueEffects};
use crate::error::{Error, Result};
use crate::estimators::{
    dose_response, fe_ols, pseudo_outcome, tsls, Coefficient, DrOptions, EstimateResult, OutcomeModel, TreatmentDensity,
};
use crate::rng::{derive_seed, stream, Domain};
use crate::table::DataTable;
use crate::Contestant;

/// Verdict on one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
}

impl AcceptanceReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("acceptance report, seed {}\n", self.seed);
        for c in &self.criteria {
            let _ = writeln!(s, "{} {:>2} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
        }
        let n = self.criteria.iter().filter(|c| c.passed).count();
        let _ = writeln!(s, "{n}/{} criteria passed", self.criteria.len());
        s
    }
}

#[derive(Default)]
struct Check {
    ok: bool,
    detail: Vec<String>,
    metrics: BTreeMap<String, f64>,
}

impl Check {
    fn new() -> Self {
        Self { ok: true, ..Self::default() }
    }

    fn require(&mut self, cond: bool, what: String) {
        if !cond {
            self.ok = false;
        }
        self.detail.push(what);
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }
}

fn finish(id: u32, name: &str, r: Result<Check>) -> CriterionResult {
    match r {
        Ok(c) => CriterionResult {
            id,
            name: name.to_string(),
            passed: c.ok,
            detail: c.detail.join("; "),
            metrics: c.metrics,
        },
        Err(e) => CriterionResult {
            id,
            name: name.to_string(),
            passed: false,
            detail: format!("error: {e}"),
            metrics: BTreeMap::new(),
        },
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0)).sqrt()
}

fn coef_of(r: &EstimateResult, name: &str) -> Result<Coefficient> {
    r.coef(name)
        .cloned()
        .ok_or_else(|| Error::Estimation(format!("coefficient `{name}` missing from {}", r.outcome)))
}

fn random_spec<R: Rng>(rng: &mut R) -> Result<ContestModelSpec> {
    let theta = rng.gen_range(1.0..4.0);
    let r_h = rng.gen_range(0.5..2.0);
    match Variant::ALL[rng.gen_range(0..4)] {
        Variant::Baseline => ContestModelSpec::baseline(theta, rng.gen_range(0.5..2.0), r_h),
        Variant::RewardScaled => ContestModelSpec::reward_scaled(theta, rng.gen_range(0.5..3.0), r_h),
        Variant::RewardThetaDependent => ContestModelSpec::reward_theta_dependent(theta, rng.gen_range(0.0..1.0), r_h),
        Variant::Choking => ContestModelSpec::choking(theta, rng.gen_range(0.0..1.0), rng.gen_range(0.5..2.0), r_h),
    }
}

fn equilibrium_exactness(seed: u64) -> Result<Check> {
    const N: usize = 1000;
    let mut rng = stream(seed, Domain::Synthetic, 1);
    let specs: Vec<ContestModelSpec> = (0..N).map(|_| random_spec(&mut rng)).collect::<Result<_>>()?;
    let rows = replicate(N, seed, |i, _| {
        let spec = &specs[i];
        let eq = equilibrium(spec)?;
        let (r_l, r_h) = foc_residuals(spec, eq.effort_l, eq.effort_h)?;
        let grid = EffortGrid::uniform(0.0, 2.0 * spec.max_reward(), 4001)?;
        let oracle = nash_oracle(spec, &grid, NashOptions::default())?;
        let gap = (oracle.effort_l - eq.effort_l).abs().max((oracle.effort_h - eq.effort_h).abs());
        Ok((r_l.abs().max(r_h.abs()), gap / grid.step()))
    })?;
    let worst_foc = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_gap = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut c = Check::new();
    c.metric("max_foc_residual", worst_foc);
    c.metric("max_oracle_gap_steps", worst_gap);
    c.require(worst_foc <= 1e-10, format!("max FOC residual {worst_foc:.2e} over {N} specs"));
    c.require(worst_gap <= 1.0, format!("max oracle gap {worst_gap:.3} grid steps"));
    Ok(c)
}

fn curve_shapes() -> Result<Check> {
    let mut c = Check::new();
    let curve = |v, p| effort_curve(&model_template(v, p)?, 3.0, 201);
    let decreasing = |s: &[i8]| s.iter().all(|&x| x < 0);

    let base = curve(Variant::Baseline, 0.0)?;
    c.require(
        decreasing(&base.difference_signs(Contestant::Low)) && decreasing(&base.difference_signs(Contestant::High)),
        "baseline: both efforts decreasing".into(),
    );
    let coincide = base.points.iter().all(|p| (p.e_l - p.e_h).abs() < 1e-12);
    c.require(coincide, "baseline: curves coincide".into());

    let scaled = curve(Variant::RewardScaled, 2.0)?;
    let signs = scaled.difference_signs(Contestant::Low);
    let flip = scaled.argmax(Contestant::Low);
    c.metric("reward_scaled_e_l_peak", flip);
    c.require(
        sign_changes(&signs) == 1 && (flip - 2.0).abs() < 1e-9 && signs[0] > 0,
        format!("reward-scaled a=2: e_l rises then falls, flip at {flip:.3}"),
    );

    let choking = curve(Variant::Choking, 0.2)?;
    let signs = choking.difference_signs(Contestant::High);
    let peak = choking.argmax(Contestant::High);
    let derived = choking_peak_theta(0.2, 1.0, 1.0);
    c.metric("choking_e_h_peak", peak);
    c.metric("choking_peak_derived", derived);
    c.require(
        sign_changes(&signs) == 1 && signs[0] > 0 && (1.31..=1.34).contains(&peak),
        format!("choking a=0.2: single e_h peak at {peak:.3} (derived {derived:.4})"),
    );
    let strict = [&base, &choking].iter().all(|k| decreasing(&k.difference_signs(Contestant::Low)));
    c.require(strict, "e_l strictly decreasing in baseline and choking".into());

    let dependent = curve(Variant::RewardThetaDependent, 0.2)?;
    let signs = dependent.difference_signs(Contestant::Low);
    let peak = dependent.argmax(Contestant::Low);
    let derived = theta_dependent_peak(0.2);
    c.metric("theta_dependent_e_l_peak", peak);
    c.require(
        sign_changes(&signs) == 1 && signs[0] > 0 && (peak - derived).abs() <= 0.01,
        format!("theta-dependent a=0.2: single e_l peak at {peak:.3} (derived {derived:.4})"),
    );
    let h = dependent.difference_signs(Contestant::High);
    c.require(h.iter().all(|&x| x < 0), "theta-dependent a=0.2: e_h decreasing".into());
    Ok(c)
}

fn calibration(dgp: &DgpConfig, seed: u64) -> Result<Check> {
    let sim = run_tournaments(dgp, seed)?;
    let report = calibration_report(&sim)?;
    let mut c = Check::new();
    c.require(report.n_contests == 4776, format!("{} contests", report.n_contests));
    for m in report.moments.iter().filter(|m| m.tolerance.is_some()) {
        c.metric(&m.name, m.value);
        c.require(m.passed(), format!("{} {:.3} (target {})", m.name, m.value, m.target));
    }
    Ok(c)
}

/// Everything criteria 4, 7 and 8 read from one simulated panel.
struct PanelEstimates {
    underdog: Coefficient,
    favorite: Coefficient,
    headstart: Coefficient,
    terciles: [f64; 3],
    iv: Coefficient,
    ols: Coefficient,
    first_stage: (f64, f64),
}

fn panel_estimates(panel: &DataTable, cl: ClusterOn) -> Result<PanelEstimates> {
    let u = fe_ols(panel, &table2_spec("performance_underdog", Side::Underdog, cl))?;
    let f = fe_ols(panel, &table2_spec("performance_favorite", Side::Favorite, cl))?;
    let h = fe_ols(panel, &headstart_spec("performance_underdog", Side::Underdog, cl))?;
    let t = fe_ols(panel, &headstart_terciles_spec("performance_underdog", Side::Underdog, cl))?;
    let o = fe_ols(panel, &spillover_ols_spec("performance_favorite", Side::Favorite, cl))?;
    let iv = tsls(panel, &spillover_iv_spec("performance_favorite", Side::Favorite, cl))?;
    let fs = iv
        .first_stage
        .as_ref()
        .ok_or_else(|| Error::Estimation("2SLS result has no first stage".into()))?;
    Ok(PanelEstimates {
        underdog: coef_of(&u, "ability_ratio")?,
        favorite: coef_of(&f, "ability_ratio")?,
        headstart: coef_of(&h, "underdog_starts")?,
        terciles: [t.coefficients[0].estimate, t.coefficients[1].estimate, t.coefficients[2].estimate],
        iv: coef_of(&iv, "expected_ability_next")?,
        ols: coef_of(&o, "expected_ability_next")?,
        first_stage: (fs.coefficient.estimate, fs.f_stat),
    })
}

fn count(v: &[PanelEstimates], f: impl Fn(&PanelEstimates) -> bool) -> usize {
    v.iter().filter(|p| f(p)).count()
}

fn table2_recovery(mc: &[PanelEstimates], fx: &TrueEffects, k: f64) -> Check {
    let n = mc.len();
    let mut c = Check::new();
    for (name, truth, pick) in [
        ("underdog", fx.beta_underdog_ratio, (|p: &PanelEstimates| &p.underdog) as fn(&PanelEstimates) -> &Coefficient),
        ("favorite", fx.beta_favorite_ratio, |p: &PanelEstimates| &p.favorite),
    ] {
        let cover = count(mc, |p| pick(p).covers(truth, k));
        let sign = count(mc, |p| pick(p).estimate.signum() == truth.signum());
        let m = mean(&mc.iter().map(|p| pick(p).estimate).collect::<Vec<_>>());
        c.metric(&format!("{name}_mean"), m);
        c.metric(&format!("{name}_cover"), cover as f64);
        c.metric(&format!("{name}_sign"), sign as f64);
        c.require(
            cover * 100 >= 90 * n && sign * 100 >= 95 * n,
            format!("{name}: mean {m:.3} (truth {truth}), covered {cover}/{n}, sign {sign}/{n}"),
        );
    }
    c
}

fn iv_recovery(mc: &[PanelEstimates], truth: f64, k: f64) -> Check {
    let n = mc.len();
    let mut c = Check::new();
    let iv_cover = count(mc, |p| p.iv.covers(truth, k));
    let ols_miss = count(mc, |p| !p.ols.covers(truth, k));
    let strong = count(mc, |p| p.first_stage.0 < 0.0 && p.first_stage.1 > 10.0);
    let f_mean = mean(&mc.iter().map(|p| p.first_stage.1).collect::<Vec<_>>());
    let iv_mean = mean(&mc.iter().map(|p| p.iv.estimate).collect::<Vec<_>>());
    let ols_mean = mean(&mc.iter().map(|p| p.ols.estimate).collect::<Vec<_>>());
    c.metric("iv_mean", iv_mean);
    c.metric("ols_mean", ols_mean);
    c.metric("iv_cover", iv_cover as f64);
    c.metric("ols_miss", ols_miss as f64);
    c.metric("first_stage_f_mean", f_mean);
    c.require(iv_cover * 100 >= 90 * n, format!("2SLS mean {iv_mean:.3} (truth {truth}), covered {iv_cover}/{n}"));
    c.require(ols_miss * 100 >= 80 * n, format!("OLS mean {ols_mean:.3}, misses {ols_miss}/{n}"));
    c.require(strong == n, format!("first stage negative with F > 10 in {strong}/{n}, mean F {f_mean:.1}"));
    c
}

fn headstart_recovery(mc: &[PanelEstimates], truth: f64, k: f64) -> Check {
    let n = mc.len();
    let mut c = Check::new();
    let cover = count(mc, |p| p.headstart.covers(truth, k));
    let m = mean(&mc.iter().map(|p| p.headstart.estimate).collect::<Vec<_>>());
    let t: Vec<f64> = (0..3).map(|j| mean(&mc.iter().map(|p| p.terciles[j]).collect::<Vec<_>>())).collect();
    let per_panel = count(mc, |p| p.terciles[2] >= p.terciles[0]);
    c.metric("headstart_mean", m);
    c.metric("headstart_cover", cover as f64);
    c.metric("tercile_low", t[0]);
    c.metric("tercile_mid", t[1]);
    c.metric("tercile_high", t[2]);
    c.metric("tercile_ordered_panels", per_panel as f64);
    c.require(cover * 100 >= 90 * n, format!("head start mean {m:.3} (truth {truth}), covered {cover}/{n}"));
    c.require(
        t[2] >= t[0],
        format!("mean tercile effects {:.3} / {:.3} / {:.3}, high >= low in {per_panel}/{n} panels", t[0], t[1], t[2]),
    );
    c
}

/// Ability-ratio step effects the dose-response curves must reproduce.
const STEP_TARGETS: [(Side, f64); 2] = [(Side::Underdog, -0.75), (Side::Favorite, 0.25)];
const STEP_TOLERANCE: f64 = 0.25;

fn phi(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// X ~ N(0,1), A | X ~ N(0.5 X, 1), Y = 3A + 2X + N(0,1), so E[Y^a] = 3a.
fn synthetic_design(n: usize, seed: u64, id: u64) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let mut rng = stream(seed, Domain::Synthetic, id);
    let (mut a, mut xs, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let x: f64 = StandardNormal.sample(&mut rng);
        let v: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let ai = 0.5 * x + v;
        xs.push(x);
        a.push(ai);
        y.push(3.0 * ai + 2.0 * x + e);
    }
    (a, DMatrix::from_column_slice(n, 1, &xs), y)
}

fn oracle_pi(a: f64, x: &[f64]) -> f64 {
    phi(a - 0.5 * x[0])
}

fn oracle_mu(x: &[f64], a: f64) -> f64 {
    3.0 * a + 2.0 * x[0]
}

fn dose_response_fidelity(dgp: &DgpConfig, opts: &EstimatorOptions, seed: u64) -> Result<Check> {
    let mut c = Check::new();
    let slopes = replicate(opts.dr_replications, seed, |_, s| {
        let panel = to_table(&run_tournaments(dgp, s)?.records);
        STEP_TARGETS
            .iter()
            .enumerate()
            .map(|(k, (side, _))| {
                let curve = dr_for(&panel, &side.performance(), *side, opts, derive_seed(s, Domain::Forest, k as u64))?;
                Ok(0.05 * curve.projection_slope()?.0)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    for (k, (side, target)) in STEP_TARGETS.iter().enumerate() {
        let v: Vec<f64> = slopes.iter().map(|s| s[k]).collect();
        let (m, s) = (mean(&v), sd(&v));
        c.metric(&format!("{}_step_mean", side.name()), m);
        c.metric(&format!("{}_step_sd", side.name()), s);
        c.require(
            (m - target).abs() <= STEP_TOLERANCE,
            format!("{} 0.05-step effect {m:.3} (sd {s:.3} over {} panels), target {target}", side.name(), v.len()),
        );
    }
    let (a, x, y) = synthetic_design(opts.dr_synthetic_rows, seed, 5);
    let po = pseudo_outcome(&a, &x, &y, &oracle_pi, &oracle_mu, 0.0)?;
    let curve = dose_response(&po.xi, &a, &opts.dr, seed)?;
    let cov = curve.coverage(|g| 3.0 * g);
    c.metric("oracle_coverage", cov);
    c.require(cov >= 0.85, format!("oracle-nuisance curve covers truth at {:.1}% of grid points", 100.0 * cov));
    Ok(c)
}

fn slope_with(
    a: &[f64],
    x: &DMatrix<f64>,
    y: &[f64],
    pi: &dyn TreatmentDensity,
    mu: &dyn OutcomeModel,
    opts: &DrOptions,
    seed: u64,
) -> Result<f64> {
    let po = pseudo_outcome(a, x, y, pi, mu, 0.0)?;
    Ok(dose_response(&po.xi, a, opts, seed)?.projection_slope()?.0)
}

fn double_robustness(opts: &EstimatorOptions, seed: u64) -> Result<Check> {
    let (a, x, y) = synthetic_design(opts.dr_synthetic_rows, seed, 6);
    let wrong_mu = |_: &[f64], a: f64| -a;
    let wrong_pi = |a: f64, _: &[f64]| phi(a / 1.5);
    let tol = 0.1 * 3.0;
    let mut c = Check::new();
    let cases: [(&str, &dyn TreatmentDensity, &dyn OutcomeModel, bool); 3] = [
        ("wrong outcome model", &oracle_pi, &wrong_mu, true),
        ("wrong density", &wrong_pi, &oracle_mu, true),
        ("both wrong", &wrong_pi, &wrong_mu, false),
    ];
    for (name, pi, mu, should_hold) in cases {
        let s = slope_with(&a, &x, &y, pi, mu, &opts.dr, seed)?;
        c.metric(&name.replace(' ', "_"), s);
        let held = (s - 3.0).abs() <= tol;
        c.require(held == should_hold, format!("{name}: slope {s:.3} (truth 3)"));
    }
    Ok(c)
}

fn placebo(dgp: &DgpConfig, opts: &EstimatorOptions, seed: u64) -> Result<Check> {
    let mut zero = dgp.clone();
    zero.effects = TrueEffects::zero();
    let cl = opts.cluster_on;
    let p = replicate(opts.replications, seed, |_, s| {
        panel_estimates(&to_table(&run_tournaments(&zero, s)?.records), cl)
    })?;
    let n = p.len();
    let mut c = Check::new();
    for (name, pick) in [
        ("ability ratio (underdog)", (|e: &PanelEstimates| &e.underdog) as fn(&PanelEstimates) -> &Coefficient),
        ("ability ratio (favorite)", |e: &PanelEstimates| &e.favorite),
        ("head start", |e: &PanelEstimates| &e.headstart),
        ("spillover (2SLS)", |e: &PanelEstimates| &e.iv),
    ] {
        let rejected = count(&p, |e| pick(e).p_value < opts.significance);
        let rate = rejected as f64 / n as f64;
        c.metric(&name.replace([' ', '(', ')'], "_"), rate);
        c.require((0.02..=0.10).contains(&rate), format!("{name}: {rejected}/{n} rejected"));
    }
    Ok(c)
}

fn render_outputs(dgp: &DgpConfig, opts: &EstimatorOptions, seed: u64) -> Result<Vec<u8>> {
    let sim = run_tournaments(dgp, seed)?;
    let mut bytes = Vec::new();
    write_panel(&sim.records, &mut bytes)?;
    let panel = to_table(&sim.records);
    let t2 = super::scenarios::estimate_scenario(super::ScenarioId::Table2, &panel, opts)?;
    bytes.extend(serde_json::to_vec(&t2)?);
    let head: Vec<usize> = (0..panel.n_rows().min(800)).collect();
    let small = panel.select_rows(&head);
    let mut dr = opts.clone();
    dr.dr.outcome_forest.n_trees = 20;
    dr.dr.density.forest.n_trees = 20;
    let curve = dr_for(&small, "performance_underdog", Side::Underdog, &dr, seed)?;
    bytes.extend(serde_json::to_vec(&curve.estimate)?);
    Ok(bytes)
}

fn determinism(dgp: &DgpConfig, opts: &EstimatorOptions, seed: u64) -> Result<Check> {
    let mut outputs = Vec::new();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Argument(e.to_string()))?;
        outputs.push(pool.install(|| render_outputs(dgp, opts, seed))?);
    }
    let mut c = Check::new();
    c.metric("bytes", outputs[0].len() as f64);
    c.require(
        outputs[0] == outputs[1],
        format!("panel CSV, table2 JSON and a DR curve identical under 1 and 3 threads ({} bytes)", outputs[0].len()),
    );
    Ok(c)
}

pub(crate) const CRITERIA: [&str; 10] = [
    "equilibrium exactness",
    "model curve shapes",
    "calibration",
    "ability-ratio recovery",
    "dose-response fidelity",
    "double robustness",
    "IV recovery",
    "head-start recovery",
    "placebo",
    "determinism",
];

/// Runs every acceptance check on the generator `dgp`. Failures inside a
/// check are reported as a failed criterion rather than returned.
pub fn run_acceptance(seed: u64, dgp: &DgpConfig, opts: &EstimatorOptions) -> Result<AcceptanceReport> {
    dgp.validate()?;
    opts.validate()?;
    let sub = |k: u64| derive_seed(seed, Domain::Synthetic, 100 + k);
    let k = opts.coverage_se;
    let fx = &dgp.effects;
    let mut criteria = vec![
        finish(1, CRITERIA[0], equilibrium_exactness(sub(1))),
        finish(2, CRITERIA[1], curve_shapes()),
        finish(3, CRITERIA[2], calibration(dgp, seed)),
    ];
    let cl = opts.cluster_on;
    let mc = replicate(opts.replications, sub(4), |_, s| {
        panel_estimates(&to_table(&run_tournaments(dgp, s)?.records), cl)
    });
    let shared = |f: &dyn Fn(&[PanelEstimates]) -> Check| match &mc {
        Ok(v) => Ok(f(v)),
        Err(e) => Err(Error::Estimation(e.to_string())),
    };
    criteria.push(finish(4, CRITERIA[3], shared(&|v| table2_recovery(v, fx, k))));
    criteria.push(finish(5, CRITERIA[4], dose_response_fidelity(dgp, opts, sub(5))));
    criteria.push(finish(6, CRITERIA[5], double_robustness(opts, sub(6))));
    criteria.push(finish(7, CRITERIA[6], shared(&|v| iv_recovery(v, fx.delta_spillover_favorite, k))));
    criteria.push(finish(8, CRITERIA[7], shared(&|v| headstart_recovery(v, fx.gamma_headstart_underdog, k))));
    criteria.push(finish(9, CRITERIA[8], placebo(dgp, opts, sub(9))));
    criteria.push(finish(10, CRITERIA[9], determinism(dgp, opts, seed)));
    Ok(AcceptanceReport { seed, criteria })
}
