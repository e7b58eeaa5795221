use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::calibration::calibration_report;
use super::figures::{LineChart, Series, WhiskerChart, WhiskerRow};
use super::specs::*;
use super::{ClusterOn, EstimatorOptions, ScenarioConfig, ScenarioId};
use crate::contest::{choking_peak_theta, effort_curve, ContestModelSpec, EffortCurve, Variant};
use crate::dgp::{run_tournaments, to_table, write_panel};
use crate::error::{Error, Result};
use crate::estimators::{dr_curve, fe_ols, subsample_split, tsls, DoseResponseCurve, EstimateResult, RegressionSpec};
use crate::learners::kernel_smooth_point;
use crate::table::DataTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledEstimate {
    pub panel: String,
    pub column: String,
    pub result: EstimateResult,
}

impl LabeledEstimate {
    fn new(panel: &str, column: &str, result: EstimateResult) -> Self {
        Self {
            panel: panel.to_string(),
            column: column.to_string(),
            result,
        }
    }
}

/// What a scenario run produced. `files` are relative to the output
/// directory.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub files: Vec<PathBuf>,
    pub estimates: Vec<LabeledEstimate>,
    pub summary: String,
}

/// Reads a numeric CSV with a header row. Empty cells become `NaN`.
pub fn read_table_csv(path: impl AsRef<Path>) -> Result<DataTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        for (j, cell) in row.iter().enumerate() {
            let cell = cell.trim();
            let v = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|e| Error::Parse {
                    row: i + 2,
                    column: headers[j].clone(),
                    message: format!("`{cell}`: {e}"),
                })?
            };
            columns[j].push(v);
        }
    }
    let mut table = DataTable::new(columns.first().map_or(0, Vec::len));
    for (name, values) in headers.into_iter().zip(columns) {
        table.insert(name, values)?;
    }
    if !table.has("tournament_year") && table.has("tournament_id") {
        let ty = table.column("tournament_id")?.to_vec();
        table.insert("tournament_year", ty)?;
    }
    Ok(table)
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    files.push(PathBuf::from(name));
    Ok(())
}

fn table2_set(cl: ClusterOn) -> Vec<(&'static str, &'static str, RegressionSpec)> {
    vec![
        ("A: underdog", "performance", table2_spec("performance_underdog", Side::Underdog, cl)),
        ("B: favorite", "performance", table2_spec("performance_favorite", Side::Favorite, cl)),
    ]
}

fn table3_set(cl: ClusterOn) -> Vec<(&'static str, &'static str, RegressionSpec)> {
    let mut v = Vec::new();
    for (panel, side) in [("A: underdog", Side::Underdog), ("B: favorite", Side::Favorite)] {
        let s = side.name();
        v.push((panel, "full contest", table2_spec(&side.performance(), side, cl)));
        v.push((panel, "first half", table2_spec(&format!("performance_first_half_{s}"), side, cl)));
        v.push((panel, "second half", table2_spec(&format!("performance_second_half_{s}"), side, cl)));
    }
    v.push(("C: mean", "full contest", contest_spec("performance_mean", true, cl)));
    v
}

fn table4_set(cl: ClusterOn) -> Vec<(&'static str, &'static str, RegressionSpec)> {
    let mut v = Vec::new();
    for (panel, y) in [
        ("A: favorite win", "favorite_wins"),
        ("B: contest length", "contest_length_fraction"),
        ("C: number of 180s", "n_180s"),
    ] {
        v.push((panel, "FE only", contest_spec(y, false, cl)));
        v.push((panel, "FE and covariates", contest_spec(y, true, cl)));
    }
    v
}

fn table5_set(cl: ClusterOn) -> Vec<(&'static str, &'static str, RegressionSpec)> {
    vec![
        ("A: head start", "favorite win", headstart_spec("favorite_wins", Side::Favorite, cl)),
        ("A: head start", "underdog performance", headstart_spec("performance_underdog", Side::Underdog, cl)),
        ("A: head start", "favorite performance", headstart_spec("performance_favorite", Side::Favorite, cl)),
        (
            "B: by heterogeneity",
            "underdog performance",
            headstart_terciles_spec("performance_underdog", Side::Underdog, cl),
        ),
    ]
}

const TABLE6_OUTCOMES: [(&str, &str, Side); 3] = [
    ("favorite win", "favorite_wins", Side::Favorite),
    ("favorite performance", "performance_favorite", Side::Favorite),
    ("underdog performance", "performance_underdog", Side::Underdog),
];

fn run_specs(
    panel: &DataTable,
    set: Vec<(&'static str, &'static str, RegressionSpec)>,
) -> Result<Vec<LabeledEstimate>> {
    set.into_iter()
        .map(|(p, c, spec)| Ok(LabeledEstimate::new(p, c, fe_ols(panel, &spec)?)))
        .collect()
}

fn table6(panel: &DataTable, cl: ClusterOn) -> Result<Vec<LabeledEstimate>> {
    let mut out = Vec::new();
    for (col, y, side) in TABLE6_OUTCOMES {
        out.push(LabeledEstimate::new("A: OLS", col, fe_ols(panel, &spillover_ols_spec(y, side, cl))?));
    }
    for (col, y, side) in TABLE6_OUTCOMES {
        out.push(LabeledEstimate::new("B: 2SLS", col, tsls(panel, &spillover_iv_spec(y, side, cl))?));
    }
    Ok(out)
}

fn placebo_set(panel: &DataTable, cl: ClusterOn) -> Result<Vec<LabeledEstimate>> {
    let mut out = run_specs(panel, table2_set(cl))?;
    out.push(LabeledEstimate::new(
        "head start",
        "underdog performance",
        fe_ols(panel, &headstart_spec("performance_underdog", Side::Underdog, cl))?,
    ));
    out.push(LabeledEstimate::new(
        "spillover",
        "favorite performance",
        tsls(panel, &spillover_iv_spec("performance_favorite", Side::Favorite, cl))?,
    ));
    Ok(out)
}

/// Every panel column the scenario's estimators read.
fn required_columns(id: ScenarioId, cl: ClusterOn) -> Vec<String> {
    let mut specs: Vec<RegressionSpec> = match id {
        ScenarioId::Table2 | ScenarioId::Fig4 => table2_set(cl).into_iter().map(|s| s.2).collect(),
        ScenarioId::Table3 => table3_set(cl).into_iter().map(|s| s.2).collect(),
        ScenarioId::Table4 => table4_set(cl).into_iter().map(|s| s.2).collect(),
        ScenarioId::Table5 | ScenarioId::Placebo => table5_set(cl).into_iter().map(|s| s.2).collect(),
        _ => Vec::new(),
    };
    if matches!(id, ScenarioId::Table6 | ScenarioId::Placebo) {
        for (_, y, side) in TABLE6_OUTCOMES {
            specs.push(spillover_ols_spec(y, side, cl));
        }
    }
    let mut cols: Vec<String> = specs.iter().flat_map(|s| s.columns()).map(str::to_string).collect();
    match id {
        ScenarioId::Table6 | ScenarioId::Placebo => cols.push("opponent_known".into()),
        ScenarioId::Fig2 | ScenarioId::Fig3 => {
            cols.push("ability_ratio".into());
            for side in [Side::Underdog, Side::Favorite] {
                cols.extend(dr_covariates(side));
                cols.push(side.performance());
            }
            cols.push("favorite_wins".into());
        }
        ScenarioId::Fig4 => cols.extend(["favorite_wins", "favorite_experience", "underdog_experience", "prize_money"].map(String::from)),
        _ => {}
    }
    let mut seen = std::collections::HashSet::new();
    cols.retain(|c| seen.insert(c.clone()));
    cols
}

fn check_columns(panel: &DataTable, id: ScenarioId, cl: ClusterOn) -> Result<()> {
    let missing: Vec<String> = required_columns(id, cl).into_iter().filter(|c| !panel.has(c)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingColumn(missing.join(", ")))
    }
}

/// Regression estimates of a table scenario (or the placebo set) on one
/// panel.
pub fn estimate_scenario(id: ScenarioId, panel: &DataTable, opts: &EstimatorOptions) -> Result<Vec<LabeledEstimate>> {
    let cl = opts.cluster_on;
    check_columns(panel, id, cl)?;
    match id {
        ScenarioId::Table2 => run_specs(panel, table2_set(cl)),
        ScenarioId::Table3 => run_specs(panel, table3_set(cl)),
        ScenarioId::Table4 => run_specs(panel, table4_set(cl)),
        ScenarioId::Table5 => run_specs(panel, table5_set(cl)),
        ScenarioId::Table6 => table6(panel, cl),
        ScenarioId::Placebo => placebo_set(panel, cl),
        ScenarioId::Fig4 => Ok(fig4_splits(panel, cl)?.into_iter().map(|s| s.estimate).collect()),
        other => Err(Error::Argument(format!("scenario `{other}` has no regression set"))),
    }
}

/// Pre-treatment covariates of one player for the dose-response curves.
/// The opponent's ability and ranking are left out: with them the ratio is
/// a deterministic function of the covariates.
pub(crate) fn dr_covariates(side: Side) -> Vec<String> {
    let s = side.name();
    vec![
        format!("{s}_ability"),
        format!("{s}_ranking"),
        format!("{s}_experience"),
        format!("{s}_home"),
        "stage".into(),
        "prize_money".into(),
    ]
}

/// Treatment, covariate matrix and outcome on rows with no missing value.
pub(crate) fn dr_inputs(panel: &DataTable, outcome: &str, covariates: &[String]) -> Result<(Vec<f64>, DMatrix<f64>, Vec<f64>)> {
    let a = panel.column("ability_ratio")?;
    let y = panel.column(outcome)?;
    let cols: Vec<&[f64]> = covariates.iter().map(|c| panel.column(c)).collect::<Result<_>>()?;
    let rows: Vec<usize> = (0..panel.n_rows())
        .filter(|&i| !a[i].is_nan() && !y[i].is_nan() && cols.iter().all(|c| !c[i].is_nan()))
        .collect();
    let x = DMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][rows[i]]);
    Ok((rows.iter().map(|&i| a[i]).collect(), x, rows.iter().map(|&i| y[i]).collect()))
}

pub(crate) fn dr_for(panel: &DataTable, outcome: &str, side: Side, opts: &EstimatorOptions, seed: u64) -> Result<DoseResponseCurve> {
    let (a, x, y) = dr_inputs(panel, outcome, &dr_covariates(side))?;
    dr_curve(&a, &x, &y, &opts.dr, seed)
}

fn curve_csv(curve: &DoseResponseCurve, extra: Option<(&str, &[f64])>) -> String {
    let mut s = String::from("ability_ratio,estimate,se,lower,upper,out_of_support");
    if let Some((name, _)) = extra {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for i in 0..curve.grid.len() {
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            curve.grid[i],
            num(curve.estimate[i]),
            num(curve.se[i]),
            num(curve.lower[i]),
            num(curve.upper[i]),
            curve.out_of_support[i] as u8
        );
        if let Some((_, v)) = extra {
            let _ = write!(s, ",{}", num(v[i]));
        }
        s.push('\n');
    }
    s
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn curve_chart(title: &str, y_label: &str, curve: &DoseResponseCurve, extra: Option<(&str, &[f64])>) -> LineChart {
    let mut series = vec![Series {
        name: "doubly robust".into(),
        points: curve.grid.iter().copied().zip(curve.estimate.iter().copied()).collect(),
        dashed: false,
        band: Some((0..curve.grid.len()).map(|i| (curve.grid[i], curve.lower[i], curve.upper[i])).collect()),
    }];
    if let Some((name, v)) = extra {
        let mut s = Series::line(name, curve.grid.iter().copied().zip(v.iter().copied()).collect());
        s.dashed = true;
        series.push(s);
    }
    LineChart {
        title: title.to_string(),
        x_label: "ability ratio".into(),
        y_label: y_label.to_string(),
        series,
        markers: Vec::new(),
    }
}

/// One subsample regression of the split figure.
#[derive(Debug, Clone)]
pub(crate) struct SplitEstimate {
    pub outcome: String,
    pub variable: String,
    pub part: &'static str,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub estimate: LabeledEstimate,
}

const SPLIT_OUTCOMES: [(&str, Side); 3] = [
    ("performance_underdog", Side::Underdog),
    ("performance_favorite", Side::Favorite),
    ("favorite_wins", Side::Favorite),
];

/// Ability-ratio coefficient on the low and high halves of experience,
/// ability and prize money, with 90% intervals.
pub(crate) fn fig4_splits(panel: &DataTable, cl: ClusterOn) -> Result<Vec<SplitEstimate>> {
    let mut out = Vec::new();
    for (y, side) in SPLIT_OUTCOMES {
        let spec = table2_spec(y, side, cl);
        for var in [format!("{}_experience", side.name()), side.ability(), "prize_money".to_string()] {
            let (low, high, median) = subsample_split(panel, &var)?;
            for (part, sub) in [("low", &low), ("high", &high)] {
                let r = fe_ols(sub, &spec)?;
                let c = r.coef("ability_ratio").ok_or_else(|| Error::Estimation("ability_ratio dropped".into()))?;
                let t = StudentsT::new(0.0, 1.0, r.df.max(1.0))
                    .map_err(|e| Error::Estimation(e.to_string()))?
                    .inverse_cdf(0.95);
                out.push(SplitEstimate {
                    outcome: y.to_string(),
                    variable: var.clone(),
                    part,
                    median,
                    lower: c.estimate - t * c.se,
                    upper: c.estimate + t * c.se,
                    estimate: LabeledEstimate::new(&format!("{y} by {var}"), part, r.clone()),
                });
            }
        }
    }
    Ok(out)
}

fn estimates_text(id: ScenarioId, estimates: &[LabeledEstimate]) -> String {
    let mut s = format!("{id}\n");
    let mut last = "";
    for e in estimates {
        if e.panel != last {
            let _ = writeln!(s, "\nPanel {}", e.panel);
            last = &e.panel;
        }
        let _ = writeln!(s, "[{}]", e.column);
        s.push_str(&e.result.to_text());
    }
    s.push_str("\n*, **, *** significant at 10%, 5%, 1%\n");
    s
}

fn write_estimates(dir: &Path, id: ScenarioId, estimates: &[LabeledEstimate], files: &mut Vec<PathBuf>) -> Result<()> {
    let json = serde_json::to_string_pretty(estimates)? + "\n";
    write_file(dir, "estimates.json", &json, files)?;
    write_file(dir, "estimates.txt", &estimates_text(id, estimates), files)
}

/// Parameters of the model-curve variants: the reward multiplier `a` for
/// reward-scaled contests, `alpha` otherwise. Rewards are one.
pub fn model_template(variant: Variant, param: f64) -> Result<ContestModelSpec> {
    match variant {
        Variant::Baseline => ContestModelSpec::baseline(1.0, 1.0, 1.0),
        Variant::RewardScaled => ContestModelSpec::reward_scaled(1.0, param, 1.0),
        Variant::RewardThetaDependent => ContestModelSpec::reward_theta_dependent(1.0, param, 1.0),
        Variant::Choking => ContestModelSpec::choking(1.0, param, 1.0, 1.0),
    }
}

/// Peak of the lower-ability effort when `R_l = theta^alpha R_h`: with
/// `u = theta^(1 - alpha)` the effort is `theta / (1 + u)^2`, which turns at
/// `u = 1 / (1 - 2 alpha)`. No interior peak for `alpha >= 1/2`.
pub fn theta_dependent_peak(alpha: f64) -> f64 {
    if alpha >= 0.5 {
        return f64::INFINITY;
    }
    (1.0 / (1.0 - 2.0 * alpha)).powf(1.0 / (1.0 - alpha))
}

/// The four model panels drawn by the reproduction.
pub const FIG5_PANELS: [(Variant, f64); 4] = [
    (Variant::Baseline, 0.0),
    (Variant::RewardScaled, 2.0),
    (Variant::RewardThetaDependent, 0.2),
    (Variant::Choking, 0.2),
];

/// Effort curve chart with the analytic peak marked where there is one.
pub fn model_chart(curve: &EffortCurve, param: f64) -> LineChart {
    let t = &curve.template;
    let mut markers = Vec::new();
    match t.variant {
        Variant::Choking => {
            let peak = choking_peak_theta(t.alpha, t.reward_l, t.reward_h);
            markers.push((peak, format!("e_h peak {peak:.4}")));
        }
        Variant::RewardScaled => markers.push((param, format!("theta = a = {param}"))),
        Variant::RewardThetaDependent => {
            let peak = theta_dependent_peak(t.alpha);
            if peak.is_finite() {
                markers.push((peak, format!("e_l peak {peak:.4}")));
            }
        }
        _ => {}
    }
    let e_h = Series {
        dashed: true,
        ..Series::line("e_h (favorite)", curve.points.iter().map(|p| (p.theta, p.e_h)).collect())
    };
    LineChart {
        title: format!("{} equilibrium effort", t.variant.name()),
        x_label: "theta_h".into(),
        y_label: "effort".into(),
        series: vec![Series::line("e_l (underdog)", curve.points.iter().map(|p| (p.theta, p.e_l)).collect()), e_h],
        markers,
    }
}

fn fig5(dir: &Path, files: &mut Vec<PathBuf>) -> Result<String> {
    let mut summary = String::new();
    for (variant, param) in FIG5_PANELS {
        let curve = effort_curve(&model_template(variant, param)?, 3.0, 201)?;
        let name = variant.name();
        write_file(dir, &format!("{name}.csv"), &curve.to_csv_string(), files)?;
        write_file(dir, &format!("{name}.svg"), &model_chart(&curve, param).to_svg(), files)?;
        let _ = writeln!(
            summary,
            "{name}: e_l max at theta {:.2}, e_h max at theta {:.2}",
            curve.argmax(crate::Contestant::Low),
            curve.argmax(crate::Contestant::High)
        );
    }
    Ok(summary)
}

fn slope_line(curve: &DoseResponseCurve) -> String {
    match curve.projection_slope() {
        Ok((b, se)) => format!("step effect (0.05 x slope) {:.3} ({:.3})", 0.05 * b, 0.05 * se),
        Err(e) => format!("slope unavailable: {e}"),
    }
}

/// Runs one scenario and writes its files to `config.output_dir`. Without
/// a panel, one is simulated from the scenario's generator and seed.
pub fn run_scenario(config: &ScenarioConfig, panel: Option<&DataTable>) -> Result<ScenarioOutput> {
    config.validate()?;
    let id = config.scenario;
    let dir = config.output_dir.as_path();
    std::fs::create_dir_all(dir)?;
    let mut out = ScenarioOutput::default();
    if id == ScenarioId::Fig5 {
        out.summary = fig5(dir, &mut out.files)?;
        return Ok(out);
    }
    let owned;
    let panel = match panel {
        Some(p) => p,
        None => {
            let sim = run_tournaments(config.dgp()?, config.seed)?;
            if id == ScenarioId::Calibration {
                let report = calibration_report(&sim)?;
                let json = serde_json::to_string_pretty(&report)? + "\n";
                write_file(dir, "calibration.json", &json, &mut out.files)?;
                out.summary = report.to_text();
                write_file(dir, "calibration.txt", &out.summary, &mut out.files)?;
                let mut csv = Vec::new();
                write_panel(&sim.records, &mut csv)?;
                write_file(dir, "panel.csv", &String::from_utf8_lossy(&csv), &mut out.files)?;
                return Ok(out);
            }
            owned = to_table(&sim.records);
            &owned
        }
    };
    let opts = &config.estimator;
    match id {
        ScenarioId::Calibration => {
            return Err(Error::Argument(
                "the calibration report needs leg-level darts; run it on a simulated panel".into(),
            ))
        }
        ScenarioId::Fig2 => {
            check_columns(panel, id, opts.cluster_on)?;
            for (k, side) in [Side::Underdog, Side::Favorite].into_iter().enumerate() {
                let seed = crate::rng::derive_seed(config.seed, crate::rng::Domain::Forest, 1000 + k as u64);
                let curve = dr_for(panel, &side.performance(), side, opts, seed)?;
                let name = format!("performance_{}", side.name());
                write_file(dir, &format!("{name}.csv"), &curve_csv(&curve, None), &mut out.files)?;
                let chart = curve_chart(&format!("{} performance", side.name()), "3-darts average", &curve, None);
                write_file(dir, &format!("{name}.svg"), &chart.to_svg(), &mut out.files)?;
                let _ = writeln!(out.summary, "{name}: {}, {} rows trimmed", slope_line(&curve), curve.trimmed);
            }
        }
        ScenarioId::Fig3 => {
            check_columns(panel, id, opts.cluster_on)?;
            let seed = crate::rng::derive_seed(config.seed, crate::rng::Domain::Forest, 2000);
            let curve = dr_for(panel, "favorite_wins", Side::Favorite, opts, seed)?;
            let odds = odds_curve(panel, &curve)?;
            let extra = odds.as_deref().map(|v| ("emulated win probability", v));
            write_file(dir, "favorite_wins.csv", &curve_csv(&curve, extra), &mut out.files)?;
            let chart = curve_chart("favorite win", "probability", &curve, extra);
            write_file(dir, "favorite_wins.svg", &chart.to_svg(), &mut out.files)?;
            let top = curve.estimate.iter().rev().find(|v| !v.is_nan()).copied().unwrap_or(f64::NAN);
            let _ = writeln!(
                out.summary,
                "favorite_wins: {} at ratio {:.3}; {}",
                num(top),
                curve.grid[curve.grid.len() - 1],
                slope_line(&curve)
            );
        }
        ScenarioId::Fig4 => {
            check_columns(panel, id, opts.cluster_on)?;
            let splits = fig4_splits(panel, opts.cluster_on)?;
            let mut csv = String::from("outcome,variable,median,part,estimate,se,lower90,upper90,n_obs\n");
            for s in &splits {
                let c = &s.estimate.result.coefficients[0];
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    s.outcome, s.variable, s.median, s.part, c.estimate, c.se, s.lower, s.upper, s.estimate.result.n_obs
                );
            }
            write_file(dir, "splits.csv", &csv, &mut out.files)?;
            for (y, side) in SPLIT_OUTCOMES {
                let full = fe_ols(panel, &table2_spec(y, side, opts.cluster_on))?;
                let rows = splits
                    .iter()
                    .filter(|s| s.outcome == y)
                    .map(|s| WhiskerRow {
                        label: format!("{} {}", s.part, s.variable),
                        estimate: s.estimate.result.coefficients[0].estimate,
                        lower: s.lower,
                        upper: s.upper,
                        triangle: s.part == "high",
                    })
                    .collect();
                let chart = WhiskerChart {
                    title: format!("{y}: ability ratio by subsample"),
                    x_label: "coefficient (90% interval)".into(),
                    rows,
                    reference: full.coef("ability_ratio").map(|c| c.estimate),
                };
                write_file(dir, &format!("{y}.svg"), &chart.to_svg(), &mut out.files)?;
            }
            out.estimates = splits.into_iter().map(|s| s.estimate).collect();
            write_estimates(dir, id, &out.estimates, &mut out.files)?;
            out.summary = format!("{} subsample regressions", out.estimates.len());
        }
        _ => {
            out.estimates = estimate_scenario(id, panel, opts)?;
            write_estimates(dir, id, &out.estimates, &mut out.files)?;
            out.summary = estimates_text(id, &out.estimates);
        }
    }
    Ok(out)
}

/// Kernel regression of the emulated win probability on the ratio at the
/// curve's grid, when the panel carries one.
fn odds_curve(panel: &DataTable, curve: &DoseResponseCurve) -> Result<Option<Vec<f64>>> {
    if !panel.has("favorite_win_prob") {
        return Ok(None);
    }
    let p = panel.column("favorite_win_prob")?;
    let a = panel.column("ability_ratio")?;
    let (ak, pk): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(p)
        .filter(|(a, p)| !a.is_nan() && !p.is_nan())
        .map(|(a, p)| (*a, *p))
        .unzip();
    if ak.is_empty() {
        return Ok(None);
    }
    let v = curve
        .grid
        .iter()
        .map(|&g| match kernel_smooth_point(g, &ak, &pk, None, &curve.bandwidth) {
            Ok(s) => Ok(s.estimate),
            Err(Error::OutOfSupport { .. }) => Ok(f64::NAN),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Some(v))
}
