//! Build a return cache over a small replay memory with both backends and
//! inspect what each one stores: the virtual cache keeps (index, return)
//! pairs and resolves states through the replay memory at sampling time; the
//! physical cache copies states out.
//!
//! Run with: cargo run --example cache_build

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use replay_cache::cache::{Backend, BuildConfig, Cache};
use replay_cache::envs::{ChainEnv, Environment};
use replay_cache::value_fn::TabularQ;
use replay_cache::{Experience, ReplayMemory};

fn main() {
    // Fill a replay memory by acting at random on the chain.
    let mut env = ChainEnv::chain10(8);
    let mut memory = ReplayMemory::new(200, env.obs_bytes()).expect("valid sizes");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut state = env.reset();
    for _ in 0..200 {
        let action = rng.gen_range(0..env.action_count());
        let (next, reward, terminal) = env.step(action).expect("env step");
        memory
            .push(Experience {
                state: std::mem::replace(&mut state, next).into_boxed_slice(),
                action: action as u8,
                reward,
                terminal,
            })
            .expect("push");
        if terminal {
            state = env.reset();
        }
    }

    // A partially informed estimator so the cached returns bootstrap from
    // nonzero values instead of collapsing to the (sparse) reward sum.
    let mut qfn = TabularQ::new(env.state_count(), env.action_count());
    for s in 0..env.state_count() {
        qfn.set(s, 1, 0.1 * (s as f64 + 1.0));
    }
    let cfg = BuildConfig {
        gamma: 0.99,
        lambda: 0.8,
        cache_size: 40,
        block_size: 8,
    };

    for backend in [Backend::Virtual, Backend::Physical] {
        let mut build_rng = ChaCha8Rng::seed_from_u64(42);
        let cache = Cache::build(&memory, &qfn, &cfg, backend, &mut build_rng).expect("build");
        println!(
            "{backend}: {} entries, {} blocks, {} greedy evaluations, {} bytes copied",
            cache.len(),
            cache.blocks(),
            cache.q_evals(),
            cache.copy_bytes()
        );

        // Both backends associate the same returns with the same indices.
        let pairs = cache.index_return_pairs();
        print!("  first entries:");
        for (index, ret) in pairs.iter().take(5) {
            print!(" ({index}, {ret:.4})");
        }
        println!();

        // Minibatches drawn with the same generator state are identical too.
        let mut sample_rng = ChaCha8Rng::seed_from_u64(7);
        let batch = cache
            .sample_minibatch(&memory, 4, &mut sample_rng)
            .expect("sample");
        println!(
            "  minibatch returns: {:?}",
            batch.iter().map(|s| s.lambda_return).collect::<Vec<_>>()
        );
    }
}
