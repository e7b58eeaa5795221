use contestlab::dgp::{run_tournaments, to_table, DgpConfig, TrueEffects};
use contestlab::estimators::{fe_ols, RegressionSpec};
use contestlab::pipeline::*;
use contestlab::table::DataTable;

fn small_dgp() -> DgpConfig {
    let mut d = DgpConfig::default();
    for c in &mut d.classes {
        c.count = c.count.div_ceil(4);
    }
    d
}

#[test]
fn fig5_scenario_writes_all_variants() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::default_for(ScenarioId::Fig5, 1);
    cfg.output_dir = dir.path().to_path_buf();
    let out = run_scenario(&cfg, None).unwrap();
    assert_eq!(out.files.len(), 8);
    let choking = std::fs::read_to_string(dir.path().join("choking.svg")).unwrap();
    assert!(choking.contains("1.3237"));
    let scaled = std::fs::read_to_string(dir.path().join("reward_scaled.csv")).unwrap();
    assert_eq!(scaled.lines().count(), 202);
}

#[test]
fn table_scenarios_label_every_estimate() {
    let panel = to_table(&run_tournaments(&small_dgp(), 11).unwrap().records);
    let opts = EstimatorOptions::default();
    let t2 = estimate_scenario(ScenarioId::Table2, &panel, &opts).unwrap();
    assert_eq!(t2.len(), 2);
    assert!(t2.iter().all(|e| e.result.coef("ability_ratio").is_some()));
    let t3 = estimate_scenario(ScenarioId::Table3, &panel, &opts).unwrap();
    assert_eq!(t3.len(), 7);
    let t4 = estimate_scenario(ScenarioId::Table4, &panel, &opts).unwrap();
    assert_eq!(t4.len(), 6);
    let t5 = estimate_scenario(ScenarioId::Table5, &panel, &opts).unwrap();
    let terciles = &t5.last().unwrap().result;
    assert!(terciles.coefficients[2].name.contains("high"));
    let t6 = estimate_scenario(ScenarioId::Table6, &panel, &opts).unwrap();
    assert_eq!(t6.iter().filter(|e| e.result.first_stage.is_some()).count(), 3);
}

#[test]
fn clustering_switch_changes_only_the_errors() {
    let panel = to_table(&run_tournaments(&small_dgp(), 12).unwrap().records);
    let own = table2_spec("performance_underdog", Side::Underdog, ClusterOn::OutcomePlayer);
    let other = table2_spec("performance_underdog", Side::Underdog, ClusterOn::OtherPlayer);
    let (a, b) = (fe_ols(&panel, &own).unwrap(), fe_ols(&panel, &other).unwrap());
    approx::assert_relative_eq!(a.coefficients[0].estimate, b.coefficients[0].estimate, max_relative = 1e-10);
    assert_ne!(a.coefficients[0].se, b.coefficients[0].se);
}

#[test]
fn exact_linear_outcome_has_zero_error() {
    let d: Vec<f64> = (0..50).map(|i| i as f64 / 7.0).collect();
    let y: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
    let t = DataTable::new(50).with("d", d).unwrap().with("y", y).unwrap();
    let r = fe_ols(&t, &RegressionSpec::new("y", &["d"])).unwrap();
    approx::assert_relative_eq!(r.coefficients[0].estimate, 2.0, max_relative = 1e-12);
    assert!(r.coefficients[0].se.abs() < 1e-10);
}

#[test]
fn placebo_panel_has_no_planted_response() {
    let mut d = small_dgp();
    d.effects = TrueEffects::zero();
    let panel = to_table(&run_tournaments(&d, 13).unwrap().records);
    let est = estimate_scenario(ScenarioId::Placebo, &panel, &EstimatorOptions::default()).unwrap();
    // A handful of tests on one panel; each should reject rarely.
    let rejected = est.iter().filter(|e| e.result.coefficients[0].p_value < 0.01).count();
    assert!(rejected <= 1, "{rejected} of {} rejected at 1%", est.len());
}

#[test]
fn csv_round_trip_through_the_table_reader() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run_tournaments(&small_dgp(), 14).unwrap();
    let path = dir.path().join("panel.csv");
    contestlab::dgp::write_panel(&sim.records, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_table_csv(&path).unwrap();
    let direct = to_table(&sim.records);
    assert_eq!(back.n_rows(), direct.n_rows());
    for name in ["ability_ratio", "performance_underdog", "favorite_wins", "tournament_year"] {
        let (x, y) = (back.column(name).unwrap(), direct.column(name).unwrap());
        assert!(x.iter().zip(y).all(|(a, b)| a == b || (a.is_nan() && b.is_nan())), "{name}");
    }
}

#[test]
fn acceptance_report_serializes() {
    let r = AcceptanceReport {
        seed: 1,
        criteria: vec![CriterionResult {
            id: 1,
            name: "x".into(),
            passed: true,
            detail: "ok".into(),
            metrics: Default::default(),
        }],
    };
    assert!(r.passed());
    let back: AcceptanceReport = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(back, r);
    assert!(r.to_text().starts_with("acceptance report"));
}
