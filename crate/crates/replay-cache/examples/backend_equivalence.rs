//! Run full training twice with a shared seed — once per cache backend — and
//! verify the runs are bitwise identical: same episode returns, same build
//! metrics, same parameter digest after every burst.
//!
//! Run with: cargo run --example backend_equivalence

use replay_cache::config::RunConfig;
use replay_cache::runner::execute_compare;

fn main() {
    let mut cfg = RunConfig {
        obs_bytes: 8,
        seed: 3,
        ..RunConfig::default()
    };
    cfg.hp.total_steps = 10_000;

    let outcome = execute_compare(&cfg, false).expect("both runs complete");
    print!("{}", outcome.render());

    // The negative control perturbs the physical backend's seed; the
    // comparison machinery must notice.
    let control = execute_compare(&cfg, true).expect("control runs complete");
    println!();
    println!("negative control (perturbed seed):");
    print!("{}", control.render());

    assert!(outcome.equivalent);
    assert!(!control.equivalent);
}
