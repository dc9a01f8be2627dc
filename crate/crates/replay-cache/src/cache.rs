//! The return cache: a shared builder parameterized by a storage backend.
//!
//! The physical backend copies state-action pairs out of the replay memory
//! alongside each precomputed lambda-return. The virtual backend stores only
//! the absolute replay index, dereferencing the state-action pair at sample
//! time. Both backends consume identical randomness in identical order and
//! emit identical (state, action, return) streams; the builder computes the
//! returns once and dispatches only the insert, so any future backend
//! inherits correctness.

use std::collections::HashMap;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::replay_memory::{AbsIndex, ReplayMemory};
use crate::value_fn::ActionValue;

/// Storage backend selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Virtual,
    Physical,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "virtual" => Ok(Backend::Virtual),
            "physical" => Ok(Backend::Physical),
            other => Err(Error::Config(format!(
                "unknown backend '{other}' (expected virtual|physical)"
            ))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Virtual => "virtual",
            Backend::Physical => "physical",
        })
    }
}

/// A materialized minibatch element.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: Vec<u8>,
    pub action: u8,
    pub lambda_return: f32,
}

#[derive(Clone, Debug)]
struct VirtualEntry {
    index: u32, // 4-byte address, per the accounting model
    lambda_return: f32,
}

#[derive(Clone, Debug)]
struct PhysicalEntry {
    state: Box<[u8]>,
    action: u8,
    lambda_return: f32,
}

enum Entries {
    Virtual(Vec<VirtualEntry>),
    Physical(Vec<PhysicalEntry>),
}

/// Build-time parameters for the cache.
#[derive(Clone, Copy, Debug)]
pub struct BuildConfig {
    pub gamma: f64,
    pub lambda: f64,
    /// Target number of unique cache entries (S).
    pub cache_size: usize,
    /// Block size B: returns are computed over B+1 positions per block, read
    /// from B+2 consecutive replay entries.
    pub block_size: usize,
}

/// A built cache of exactly `cache_size` unique (index, lambda-return)
/// associations, immutable after build.
pub struct Cache {
    entries: Entries,
    by_index: HashMap<u64, f32>,
    copy_bytes: u64,
    build_ms: f64,
    q_evals: u64,
    blocks: u64,
}

impl Cache {
    /// Build a cache over a frozen replay memory.
    ///
    /// Block starts are drawn uniformly with replacement from the valid
    /// range; duplicate positions keep their first-computed return (the
    /// cached value feeds the recursion carry instead of a fresh
    /// evaluation), and the final block is truncated so that exactly
    /// `cache_size` unique entries exist. Greedy-value evaluations are
    /// counted: one per inserted entry plus one recursion seed per block.
    pub fn build<R: Rng>(
        memory: &ReplayMemory,
        qfn: &dyn ActionValue,
        cfg: &BuildConfig,
        backend: Backend,
        rng: &mut R,
    ) -> Result<Cache> {
        let start = Instant::now();
        if !(0.0..=1.0).contains(&cfg.gamma) || !(0.0..=1.0).contains(&cfg.lambda) {
            return Err(Error::InvalidArgument(format!(
                "gamma {} / lambda {} outside [0,1]",
                cfg.gamma, cfg.lambda
            )));
        }
        if cfg.cache_size == 0 {
            return Err(Error::InvalidArgument("cache_size must be >= 1".into()));
        }
        let resolvable = memory.len();
        let needed = cfg.block_size + 2;
        if resolvable < needed {
            return Err(Error::InvalidArgument(format!(
                "memory holds {resolvable} entries, a block needs {needed}"
            )));
        }
        // Eligible positions are [oldest, newest - 1]: the newest entry has
        // no successor state yet. Checked before any sampling.
        let eligible = resolvable - 1;
        if cfg.cache_size > eligible {
            return Err(Error::Capacity {
                requested: cfg.cache_size,
                available: eligible,
            });
        }
        let oldest = memory.oldest();
        let newest = memory.newest().expect("memory nonempty");
        let max_start = newest - (cfg.block_size as u64 + 1);

        let mut entries = match backend {
            Backend::Virtual => Entries::Virtual(Vec::with_capacity(cfg.cache_size)),
            Backend::Physical => Entries::Physical(Vec::with_capacity(cfg.cache_size)),
        };
        let mut by_index: HashMap<u64, f32> = HashMap::with_capacity(cfg.cache_size);
        let mut copy_bytes = 0u64;
        let mut q_evals = 0u64;
        let mut blocks = 0u64;

        while by_index.len() < cfg.cache_size {
            let k = rng.gen_range(oldest..=max_start);
            blocks += 1;
            let top = k + cfg.block_size as u64;

            // recursion seed: greedy value of the state after the block,
            // zero when the top position's successor is terminal
            q_evals += 1;
            let seed_value = qfn.greedy_value(&memory.get(AbsIndex(top + 1))?.state)?;
            let mut carry = if memory.get(AbsIndex(top))?.terminal {
                0.0
            } else {
                seed_value
            };

            let mut t = top;
            loop {
                if let Some(&cached) = by_index.get(&t) {
                    // first-computed return wins; it feeds the carry directly
                    carry = cached as f64;
                } else {
                    let e = memory.get(AbsIndex(t))?;
                    q_evals += 1;
                    let v = qfn.greedy_value(memory.next_state(AbsIndex(t))?)?;
                    let lam = if e.terminal {
                        // carry and bootstrap belong to a different episode
                        e.reward
                    } else {
                        e.reward + cfg.gamma * (cfg.lambda * carry + (1.0 - cfg.lambda) * v)
                    };
                    let lam32 = lam as f32;
                    by_index.insert(t, lam32);
                    match &mut entries {
                        Entries::Virtual(list) => list.push(VirtualEntry {
                            index: u32::try_from(t).map_err(|_| {
                                Error::InvalidArgument(format!("index {t} exceeds 32 bits"))
                            })?,
                            lambda_return: lam32,
                        }),
                        Entries::Physical(list) => {
                            copy_bytes += e.state.len() as u64 + 1;
                            list.push(PhysicalEntry {
                                state: e.state.clone(),
                                action: e.action,
                                lambda_return: lam32,
                            });
                        }
                    }
                    carry = lam;
                    if by_index.len() == cfg.cache_size {
                        break;
                    }
                }
                if t == k {
                    break;
                }
                t -= 1;
            }
        }

        Ok(Cache {
            entries,
            by_index,
            copy_bytes,
            build_ms: start.elapsed().as_secs_f64() * 1000.0,
            q_evals,
            blocks,
        })
    }

    pub fn backend(&self) -> Backend {
        match self.entries {
            Entries::Virtual(_) => Backend::Virtual,
            Entries::Physical(_) => Backend::Physical,
        }
    }

    pub fn len(&self) -> usize {
        self.by_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_index.is_empty()
    }

    /// Bytes of state-action data duplicated into long-lived storage during
    /// build. Zero for the virtual backend.
    pub fn copy_bytes(&self) -> u64 {
        self.copy_bytes
    }

    pub fn build_ms(&self) -> f64 {
        self.build_ms
    }

    /// Greedy-value evaluations performed during build.
    pub fn q_evals(&self) -> u64 {
        self.q_evals
    }

    /// Blocks sampled during build (including fully deduplicated ones).
    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    pub fn contains(&self, index: u64) -> bool {
        self.by_index.contains_key(&index)
    }

    pub fn lambda_return_at(&self, index: u64) -> Option<f32> {
        self.by_index.get(&index).copied()
    }

    /// All (index, return) associations, sorted by index.
    pub fn index_return_pairs(&self) -> Vec<(u64, f32)> {
        let mut pairs: Vec<(u64, f32)> = self.by_index.iter().map(|(&k, &v)| (k, v)).collect();
        pairs.sort_by_key(|&(k, _)| k);
        pairs
    }

    /// Draw `n` entries uniformly with replacement and materialize them as
    /// (state, action, lambda-return) samples. The virtual backend
    /// dereferences the replay memory at call time; the physical backend
    /// reads its own copies. Given equal seeds, both return identical
    /// sequences.
    pub fn sample_minibatch<R: Rng>(
        &self,
        memory: &ReplayMemory,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<Sample>> {
        if n == 0 {
            return Err(Error::InvalidArgument("minibatch size must be >= 1".into()));
        }
        let len = self.len();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.gen_range(0..len);
            let sample = match &self.entries {
                Entries::Virtual(list) => {
                    let entry = &list[i];
                    let exp = memory.get(AbsIndex(entry.index as u64))?;
                    Sample {
                        state: exp.state.to_vec(),
                        action: exp.action,
                        lambda_return: entry.lambda_return,
                    }
                }
                Entries::Physical(list) => {
                    let entry = &list[i];
                    Sample {
                        state: entry.state.to_vec(),
                        action: entry.action,
                        lambda_return: entry.lambda_return,
                    }
                }
            };
            out.push(sample);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::encode_state;
    use crate::replay_memory::Experience;
    use crate::value_fn::TabularQ;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const OBS: usize = 8;

    fn fill_memory(n: u64, capacity: usize, state_count: u32) -> ReplayMemory {
        let mut m = ReplayMemory::new(capacity, OBS).unwrap();
        for i in 0..n {
            let id = (i % state_count as u64) as u32;
            m.push(Experience {
                state: encode_state(id, OBS).into_boxed_slice(),
                action: (i % 3) as u8,
                reward: (i % 5) as f64 - 2.0,
                terminal: i % 7 == 6,
            })
            .unwrap();
        }
        m
    }

    fn qfn(state_count: usize) -> TabularQ {
        let mut q = TabularQ::new(state_count, 3);
        for s in 0..state_count {
            for a in 0..3 {
                q.set(s, a, (s as f64) * 0.1 - (a as f64) * 0.05);
            }
        }
        q
    }

    fn cfg(s: usize, b: usize) -> BuildConfig {
        BuildConfig {
            gamma: 0.9,
            lambda: 0.8,
            cache_size: s,
            block_size: b,
        }
    }

    #[test]
    fn smallest_legal_build() {
        // S=1, B=0, memory of 2 entries: single entry with
        // lam_k = r_k + gamma * v(s_{k+1})
        let mut m = ReplayMemory::new(4, OBS).unwrap();
        m.push(Experience {
            state: encode_state(0, OBS).into_boxed_slice(),
            action: 0,
            reward: 2.0,
            terminal: false,
        })
        .unwrap();
        m.push(Experience {
            state: encode_state(1, OBS).into_boxed_slice(),
            action: 1,
            reward: 0.0,
            terminal: false,
        })
        .unwrap();
        let mut q = TabularQ::new(2, 3);
        q.set(1, 2, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cache = Cache::build(&m, &q, &cfg(1, 0), Backend::Virtual, &mut rng).unwrap();
        assert_eq!(cache.len(), 1);
        let pairs = cache.index_return_pairs();
        assert_eq!(pairs[0].0, 0);
        assert!((pairs[0].1 as f64 - (2.0 + 0.9 * 1.5)).abs() < 1e-6);
    }

    #[test]
    fn build_reaches_exact_size_with_unique_indices() {
        let m = fill_memory(300, 1000, 20);
        let q = qfn(20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cache = Cache::build(&m, &q, &cfg(200, 10), Backend::Virtual, &mut rng).unwrap();
        assert_eq!(cache.len(), 200);
        let pairs = cache.index_return_pairs();
        assert_eq!(pairs.len(), 200); // all-unique by construction of the map
        assert!(pairs.iter().all(|&(t, _)| t < 299));
    }

    #[test]
    fn capacity_error_before_sampling() {
        let m = fill_memory(50, 1000, 20);
        let q = qfn(20);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 50 resolvable entries -> 49 distinct eligible positions
        let err = Cache::build(&m, &q, &cfg(50, 5), Backend::Virtual, &mut rng);
        assert!(matches!(
            err,
            Err(Error::Capacity {
                requested: 50,
                available: 49
            })
        ));
    }

    #[test]
    fn backends_build_identical_associations() {
        let m = fill_memory(400, 1000, 20);
        let q = qfn(20);
        let mut rng_v = ChaCha8Rng::seed_from_u64(11);
        let mut rng_p = ChaCha8Rng::seed_from_u64(11);
        let virt = Cache::build(&m, &q, &cfg(250, 12), Backend::Virtual, &mut rng_v).unwrap();
        let phys = Cache::build(&m, &q, &cfg(250, 12), Backend::Physical, &mut rng_p).unwrap();
        assert_eq!(virt.index_return_pairs(), phys.index_return_pairs());
        // physical copies are bit-equal to the source experiences
        for (t, _) in phys.index_return_pairs() {
            let exp = m.get(AbsIndex(t)).unwrap();
            assert_eq!(exp.state.len(), OBS);
        }
        // and the sample streams are bit-identical
        let mut srng_v = ChaCha8Rng::seed_from_u64(99);
        let mut srng_p = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let a = virt.sample_minibatch(&m, 32, &mut srng_v).unwrap();
            let b = phys.sample_minibatch(&m, 32, &mut srng_p).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn virtual_backend_copies_nothing_physical_copies_everything() {
        let m = fill_memory(400, 1000, 20);
        let q = qfn(20);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let virt = Cache::build(&m, &q, &cfg(100, 10), Backend::Virtual, &mut rng).unwrap();
        assert_eq!(virt.copy_bytes(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phys = Cache::build(&m, &q, &cfg(100, 10), Backend::Physical, &mut rng).unwrap();
        assert_eq!(phys.copy_bytes(), 100 * (OBS as u64 + 1));
    }

    #[test]
    fn q_eval_budget_is_entries_plus_blocks() {
        let m = fill_memory(400, 1000, 20);
        let q = qfn(20);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cache = Cache::build(&m, &q, &cfg(150, 10), Backend::Virtual, &mut rng).unwrap();
            assert_eq!(
                cache.q_evals(),
                cache.len() as u64 + cache.blocks(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn minibatch_shapes() {
        let m = fill_memory(300, 1000, 20);
        let q = qfn(20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cache = Cache::build(&m, &q, &cfg(80, 10), Backend::Virtual, &mut rng).unwrap();
        let batch = cache.sample_minibatch(&m, 32, &mut rng).unwrap();
        assert_eq!(batch.len(), 32);
    }

    #[test]
    fn single_entry_cache_repeats_with_replacement() {
        let mut m = ReplayMemory::new(8, OBS).unwrap();
        for i in 0..3u32 {
            m.push(Experience {
                state: encode_state(i, OBS).into_boxed_slice(),
                action: i as u8,
                reward: 1.0,
                terminal: false,
            })
            .unwrap();
        }
        let q = TabularQ::new(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cache = Cache::build(&m, &q, &cfg(1, 0), Backend::Physical, &mut rng).unwrap();
        let batch = cache.sample_minibatch(&m, 3, &mut rng).unwrap();
        assert_eq!(batch[0], batch[1]);
        assert_eq!(batch[1], batch[2]);
    }

    #[test]
    fn table3_scale_block_count() {
        // S = 80000, B = 100 needs at least ceil(80000/101) = 793 blocks
        let m = fill_memory(120_000, 200_000, 50);
        let q = qfn(50);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cache = Cache::build(
            &m,
            &q,
            &BuildConfig {
                gamma: 0.99,
                lambda: 0.8,
                cache_size: 80_000,
                block_size: 100,
            },
            Backend::Virtual,
            &mut rng,
        )
        .unwrap();
        assert_eq!(cache.len(), 80_000);
        assert!(cache.blocks() >= 793, "blocks = {}", cache.blocks());
    }

    #[test]
    fn fresh_build_matches_block_recursion() {
        // a build with no dedup collisions reproduces lambda_return_block
        use crate::returns::{lambda_return_block, DiscountParams, Trajectory};
        let m = fill_memory(40, 100, 10);
        let q = qfn(10);
        let cfg = cfg(11, 10); // one full block covers it
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cache = Cache::build(&m, &q, &cfg, Backend::Virtual, &mut rng).unwrap();
        // reconstruct the block that was sampled from the cache contents
        let pairs = cache.index_return_pairs();
        if pairs.len() == 11 && pairs.windows(2).all(|w| w[1].0 == w[0].0 + 1) {
            let k = pairs[0].0;
            let mut rewards = Vec::new();
            let mut values = Vec::new();
            let mut terms = Vec::new();
            for t in k..=k + 10 {
                let e = m.get(AbsIndex(t)).unwrap();
                rewards.push(e.reward);
                terms.push(e.terminal);
                values.push(if e.terminal {
                    0.0
                } else {
                    q.greedy_value(m.next_state(AbsIndex(t)).unwrap()).unwrap()
                });
            }
            let traj = Trajectory::new(rewards, values, terms).unwrap();
            let p = DiscountParams::new(cfg.gamma, cfg.lambda).unwrap();
            let expect = lambda_return_block(&traj, p).unwrap();
            for (i, &(_, lam)) in pairs.iter().enumerate() {
                assert!((lam as f64 - expect[i]).abs() < 1e-6);
            }
        }
    }

    use crate::value_fn::ActionValue;
}
