//! `contestlab` command-line front end.
//!
//! Exit codes: 0 success, 1 estimation or I/O failure, 2 configuration
//! error, 3 data error, 4 acceptance failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use contestlab::contest::{effort_curve_on, Variant};
use contestlab::dgp::{run_tournaments, write_panel};
use contestlab::pipeline::{
    calibration_report, model_chart, model_template, read_table_csv, run_acceptance, run_scenario, ScenarioConfig,
    ScenarioId,
};
use contestlab::Error;

#[derive(Parser, Debug)]
#[command(name = "contestlab", version, about = "Contest heterogeneity laboratory")]
struct Cli {
    /// Scenario configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true, env = "CONTESTLAB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a tournament panel and write it as CSV.
    Simulate,
    /// Run a scenario's estimators on a panel CSV.
    Estimate(EstimateArgs),
    /// Equilibrium effort curves of one contest variant as CSV and SVG.
    ModelCurves(CurveArgs),
    /// Run every scenario and the acceptance checks.
    Reproduce,
    /// Descriptive moments of a simulated panel against their targets.
    Calibrate,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Panel CSV to estimate on.
    #[arg(long)]
    panel: PathBuf,
    /// Scenario to run; overrides the configuration.
    #[arg(long)]
    scenario: Option<ScenarioId>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long, default_value = "baseline")]
    variant: Variant,
    /// Reward multiplier `a` (reward_scaled) or exponent `alpha`.
    #[arg(long, default_value_t = 0.0)]
    param: f64,
    #[arg(long, default_value_t = 1.0)]
    theta_min: f64,
    #[arg(long, default_value_t = 3.0)]
    theta_max: f64,
    #[arg(long, default_value_t = 201)]
    points: usize,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Self { code: 2, message: format!("configuration error: {e}") }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self { code: 3, message: format!("data error: {e}") }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingColumn(_) | Error::UnknownColumn(_) | Error::Parse { .. } | Error::Csv(_) => Failure::data(e),
            Error::Argument(_) | Error::Domain(_) | Error::Json(_) => Failure::config(e),
            other => Failure { code: 1, message: format!("error: {other}") },
        }
    }
}

type Outcome = Result<(), Failure>;

/// Anything wrong while loading the configuration, including I/O, is a
/// configuration error. JSON messages carry the line and column.
fn config_error(e: Error) -> Failure {
    Failure::config(e)
}

impl Cli {
    /// The scenario configuration with command-line overrides applied.
    fn scenario(&self, default: ScenarioId) -> Result<ScenarioConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => ScenarioConfig::load(path).map_err(config_error)?,
            None => ScenarioConfig::default_for(default, 42),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }

    fn out_dir(&self, fallback: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(fallback))
    }
}

fn create_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Failure { code: 1, message: format!("{}: {e}", dir.display()) })
}

fn write(path: &Path, contents: &str) -> Outcome {
    std::fs::write(path, contents).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })
}

fn simulate(cli: &Cli) -> Outcome {
    let config = cli.scenario(ScenarioId::Calibration)?;
    let sim = run_tournaments(config.dgp()?, config.seed)?;
    create_dir(&config.output_dir)?;
    let path = config.output_dir.join("panel.csv");
    let file = std::fs::File::create(&path).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })?;
    write_panel(&sim.records, std::io::BufWriter::new(file))?;
    eprintln!("{} contests written to {}", sim.records.len(), path.display());
    if config.scenario == ScenarioId::Calibration {
        let report = calibration_report(&sim)?;
        print!("{}", report.to_text());
    }
    Ok(())
}

fn estimate(cli: &Cli, args: &EstimateArgs) -> Outcome {
    let mut config = cli.scenario(args.scenario.unwrap_or(ScenarioId::Table2))?;
    if let Some(id) = args.scenario {
        config.scenario = id;
        if cli.out.is_none() && cli.config.is_none() {
            config.output_dir = PathBuf::from("out").join(id.name());
        }
    }
    let panel = read_table_csv(&args.panel).map_err(|e| match e {
        Error::Io(io) => Failure::data(format!("{}: {io}", args.panel.display())),
        other => Failure::data(other),
    })?;
    let out = run_scenario(&config, Some(&panel))?;
    print!("{}", out.summary);
    eprintln!("wrote {} file(s) to {}", out.files.len(), config.output_dir.display());
    Ok(())
}

fn model_curves(cli: &Cli, args: &CurveArgs) -> Outcome {
    if args.theta_min < 1.0 {
        return Err(Failure::config(format!("theta range must start at 1 or above, got {}", args.theta_min)));
    }
    let template = model_template(args.variant, args.param)?;
    let curve = effort_curve_on(&template, args.theta_min, args.theta_max, args.points)?;
    let dir = cli.out_dir("out/model_curves");
    create_dir(&dir)?;
    let name = args.variant.name();
    write(&dir.join(format!("{name}.csv")), &curve.to_csv_string())?;
    write(&dir.join(format!("{name}.svg")), &model_chart(&curve, args.param).to_svg())?;
    eprintln!("wrote {name}.csv and {name}.svg to {}", dir.display());
    Ok(())
}

fn calibrate(cli: &Cli) -> Outcome {
    let mut config = cli.scenario(ScenarioId::Calibration)?;
    config.scenario = ScenarioId::Calibration;
    let out = run_scenario(&config, None)?;
    print!("{}", out.summary);
    Ok(())
}

fn reproduce(cli: &Cli) -> Outcome {
    let base = cli.scenario(ScenarioId::Table2)?;
    let root = cli.out_dir("out");
    create_dir(&root)?;
    let mut failed = Vec::new();
    for id in ScenarioId::ALL {
        let start = Instant::now();
        let mut config = ScenarioConfig::default_for(id, base.seed);
        config.estimator = base.estimator.clone();
        config.output_dir = root.join(id.name());
        if cli.config.is_some() && id != ScenarioId::Placebo && id != ScenarioId::Fig3 {
            config.dgp = base.dgp.clone();
        }
        match run_scenario(&config, None) {
            Ok(out) => eprintln!("{id}: {} file(s) in {:.1}s", out.files.len(), start.elapsed().as_secs_f64()),
            Err(e) => {
                eprintln!("{id}: failed: {e}");
                failed.push(id);
            }
        }
    }
    let start = Instant::now();
    let report = run_acceptance(base.seed, base.dgp()?, &base.estimator)?;
    eprintln!("acceptance: {:.1}s", start.elapsed().as_secs_f64());
    write(&root.join("acceptance.json"), &report.to_json())?;
    write(&root.join("acceptance.txt"), &report.to_text())?;
    print!("{}", report.to_text());
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|id| id.name()).collect();
        return Err(Failure { code: 1, message: format!("scenario(s) failed: {}", names.join(", ")) });
    }
    if !report.passed() {
        return Err(Failure { code: 4, message: "acceptance failed".into() });
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate => simulate(cli),
        Command::Estimate(args) => estimate(cli, args),
        Command::ModelCurves(args) => model_curves(cli, args),
        Command::Reproduce => reproduce(cli),
        Command::Calibrate => calibrate(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
