//! Train the tabular agent on the 10-state chain with the virtual backend and
//! grade the learned greedy policy against the value-iteration optimum.
//!
//! Run with: cargo run --example chain_training

use replay_cache::agent::{run, EpsilonSchedule, Hyperparameters};
use replay_cache::cache::Backend;
use replay_cache::envs::{optimal_policy, value_iteration, ChainEnv};
use replay_cache::runner::greedy_policy;
use replay_cache::value_fn::TabularQ;

fn main() {
    let hp = Hyperparameters {
        minibatch_size: 32,
        replay_capacity: 4_000,
        refresh_period: 500,
        train_frequency: 4,
        gamma: 0.99,
        prepopulation: 500,
        cache_size: 400,
        block_size: 20,
        lambda: 0.8,
        learning_rate: 0.2,
        epsilon: EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            anneal_steps: 5_000,
        },
        total_steps: 25_000,
    };

    let mut env = ChainEnv::chain10(16);
    let mut qfn = TabularQ::new(10, 2);
    let report = run(&mut env, &mut qfn, &hp, Backend::Virtual, 6).expect("run completes");

    println!(
        "{} episodes, {} bursts, {:.1} ms wall",
        report.episodes.len(),
        report.bursts.len(),
        report.total_wall_ms
    );
    if let (Some(first), Some(last)) = (report.episodes.first(), report.episodes.last()) {
        println!(
            "episode return: {:.3} (first) -> {:.3} (last)",
            first.ret, last.ret
        );
    }

    let reference = ChainEnv::chain10(16);
    let optimal = optimal_policy(&reference, hp.gamma, &value_iteration(&reference, hp.gamma, 1e-12));
    let learned = greedy_policy(&qfn, 10, 16);
    println!("optimal policy: {:?}", &optimal[..9]);
    println!("learned policy: {:?}", &learned[..9]);
    println!(
        "match on non-terminal states: {}",
        if learned[..9] == optimal[..9] { "yes" } else { "no" }
    );
}
