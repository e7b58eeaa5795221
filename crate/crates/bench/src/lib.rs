//! Fixtures shared by the benchmarks.

use contestlab::contest::ContestModelSpec;
use contestlab::dgp::{run_tournaments, to_table, DgpConfig};
use contestlab::table::DataTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One default-configuration panel.
pub fn panel(seed: u64) -> DataTable {
    let sim = run_tournaments(&DgpConfig::default(), seed).expect("default config simulates");
    to_table(&sim.records)
}

/// Baseline and choking contests with random abilities and rewards.
pub fn specs(n: usize, seed: u64) -> Vec<ContestModelSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let theta = rng.gen_range(1.0..3.0);
            let r = rng.gen_range(0.5..2.0);
            if i % 2 == 0 {
                ContestModelSpec::baseline(theta, r, 1.0)
            } else {
                ContestModelSpec::choking(theta, rng.gen_range(0.0..1.0), r, 1.0)
            }
            .expect("valid spec")
        })
        .collect()
}
