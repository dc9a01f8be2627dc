//! Compute lambda-returns two ways — the O(n^2) direct summation over n-step
//! returns and the O(n) reverse recursion used by the cache builder — and show
//! they agree, including across an episode boundary.
//!
//! Run with: cargo run --example lambda_returns

use replay_cache::returns::{
    lambda_return_block, lambda_return_direct, n_step_return, DiscountParams, Trajectory,
};

fn main() {
    let params = DiscountParams::new(0.9, 0.5).expect("valid discounts");

    // A five-step trajectory whose third transition ends an episode: the
    // return computation must truncate there instead of bootstrapping across.
    let traj = Trajectory::new(
        vec![1.0, 0.0, 2.0, -1.0, 0.5],
        vec![3.0, 2.5, 0.0, 1.5, 2.0],
        vec![false, false, true, false, false],
    )
    .expect("valid trajectory");

    println!("n-step returns from position 0:");
    for n in 1..=traj.len() {
        println!("  G^({n}) = {:.6}", n_step_return(&traj, n, params.gamma).unwrap());
    }

    let block = lambda_return_block(&traj, params).expect("block computation");
    println!();
    println!("position  recursive      direct         |diff|");
    for (i, &recursive) in block.iter().enumerate() {
        let direct = lambda_return_direct(&traj.suffix(i).unwrap(), params).unwrap();
        println!(
            "{i:>8}  {recursive:>12.8}  {direct:>12.8}  {:.2e}",
            (recursive - direct).abs()
        );
    }

    // Endpoint sanity: lambda = 0 is the one-step return, lambda = 1 the
    // full (truncated) Monte-Carlo return.
    let p0 = DiscountParams::new(0.9, 0.0).unwrap();
    let p1 = DiscountParams::new(0.9, 1.0).unwrap();
    println!();
    println!(
        "lambda = 0: {:.6} (one-step {:.6})",
        lambda_return_direct(&traj, p0).unwrap(),
        n_step_return(&traj, 1, 0.9).unwrap()
    );
    println!(
        "lambda = 1: {:.6} (full     {:.6})",
        lambda_return_direct(&traj, p1).unwrap(),
        n_step_return(&traj, traj.len(), 0.9).unwrap()
    );
}
