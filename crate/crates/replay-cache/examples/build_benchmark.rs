//! Time cache construction per backend across observation sizes. At the
//! frame-stack width the physical backend pays for copying every cached
//! state; the virtual backend stores indices and should never be slower.
//!
//! Run with: cargo run --release --example build_benchmark

use replay_cache::runner::{bench_to_csv, execute_bench};

fn main() {
    let sizes = [64usize, 1_024, 28_224];
    let rows = execute_bench(&sizes, 8_000, 100, 5, 1).expect("benchmark");
    print!("{}", bench_to_csv(&rows));
}
