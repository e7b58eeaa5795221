use contestlab::contest::{equilibrium, nash_oracle, EffortGrid, NashOptions};
use contestlab::darts::{simulate_contest, LegRules, ThrowerProfile};
use contestlab::dgp::{run_tournaments, DgpConfig};
use contestlab::estimators::{dr_curve, fe_ols, tsls, DrOptions};
use contestlab::pipeline::{spillover_iv_spec, table2_spec, ClusterOn, Side};
use contestlab::Contestant;
use contestlab_bench::{panel, specs};
use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn contest(c: &mut Criterion) {
    let specs = specs(1000, 1);
    c.bench_function("equilibrium x1000", |b| {
        b.iter(|| specs.iter().map(|s| equilibrium(s).unwrap().effort_h).sum::<f64>())
    });
    let grid = EffortGrid::uniform(0.0, 4.0, 4001).unwrap();
    c.bench_function("nash_oracle 4001 points", |b| {
        b.iter(|| nash_oracle(black_box(&specs[1]), &grid, NashOptions::default()).unwrap())
    });
}

fn darts(c: &mut Criterion) {
    let rules = LegRules::default();
    let l = ThrowerProfile::new(90.0, 24.0, 0.7).unwrap();
    let h = ThrowerProfile::new(96.0, 24.0, 0.8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("best-of-11 contest", |b| {
        b.iter(|| simulate_contest(&l, &h, 11, Contestant::Low, &rules, &mut rng).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let cfg = DgpConfig::default();
    let mut group = c.benchmark_group("dgp");
    group.sample_size(10);
    group.bench_function("panel of 4776 contests", |b| b.iter(|| run_tournaments(&cfg, black_box(5)).unwrap()));
    group.finish();
}

fn estimation(c: &mut Criterion) {
    let p = panel(7);
    let ols = table2_spec("performance_underdog", Side::Underdog, ClusterOn::OutcomePlayer);
    let iv = spillover_iv_spec("performance_favorite", Side::Favorite, ClusterOn::OutcomePlayer);
    let mut group = c.benchmark_group("estimators");
    group.sample_size(20);
    group.bench_function("fe_ols three-way FE", |b| b.iter(|| fe_ols(&p, &ols).unwrap()));
    group.bench_function("tsls", |b| b.iter(|| tsls(&p, &iv).unwrap()));

    let rows = 1000;
    let a: Vec<f64> = p.column("ability_ratio").unwrap()[..rows].to_vec();
    let y: Vec<f64> = p.column("performance_underdog").unwrap()[..rows].to_vec();
    let cols = ["underdog_ability", "underdog_ranking", "underdog_experience", "stage"];
    let x = DMatrix::from_fn(rows, cols.len(), |i, j| p.column(cols[j]).unwrap()[i]);
    let mut opts = DrOptions::default();
    opts.outcome_forest.n_trees = 50;
    opts.density.forest.n_trees = 50;
    group.sample_size(10);
    group.bench_function("dr_curve 1000 rows", |b| b.iter(|| dr_curve(&a, &x, &y, &opts, 9).unwrap()));
    group.finish();
}

criterion_group!(benches, contest, darts, simulation, estimation);
criterion_main!(benches);
