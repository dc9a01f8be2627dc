//! The end-to-end training loop: prepopulation, the environment loop, burst
//! training every C steps with C/F minibatch updates, and the epsilon-greedy
//! behavior policy.
//!
//! One root seed derives order-stable streams for the policy, block sampling,
//! minibatch sampling, and the environment, so both cache backends see the
//! same randomness and runs are bitwise reproducible.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{Backend, BuildConfig, Cache};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::replay_memory::{Experience, ReplayMemory};
use crate::value_fn::ActionValue;

/// Linear epsilon anneal over environment steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    /// Epsilon at 1-based environment step `t`.
    pub fn at(&self, t: u64) -> f64 {
        if self.anneal_steps == 0 {
            return self.end;
        }
        let frac = ((t.saturating_sub(1)) as f64 / self.anneal_steps as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

/// Run-level hyperparameters. The defaults are the stock large-scale values;
/// lambda, the learning rate, and the epsilon schedule are run-configurable.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparameters {
    pub minibatch_size: usize,
    pub replay_capacity: usize,
    /// C: environment steps between cache refreshes.
    pub refresh_period: u64,
    /// F: one minibatch of training per F environment steps on average,
    /// delivered in bursts of C/F.
    pub train_frequency: u64,
    pub gamma: f64,
    /// K: experiences stored before the loop starts.
    pub prepopulation: usize,
    /// S: unique cache entries per refresh.
    pub cache_size: usize,
    /// B: block size for the reverse-order return computation.
    pub block_size: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epsilon: EpsilonSchedule,
    pub total_steps: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            minibatch_size: 32,
            replay_capacity: 1_000_000,
            refresh_period: 10_000,
            train_frequency: 4,
            gamma: 0.99,
            prepopulation: 50_000,
            cache_size: 80_000,
            block_size: 100,
            lambda: 0.8,
            learning_rate: 0.1,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                anneal_steps: 10_000,
            },
            total_steps: 20_000,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if self.refresh_period == 0 || self.train_frequency == 0 {
            return Err(Error::InvalidArgument("C and F must be positive".into()));
        }
        if !self.refresh_period.is_multiple_of(self.train_frequency) {
            return Err(Error::InvalidArgument(format!(
                "C={} not divisible by F={}",
                self.refresh_period, self.train_frequency
            )));
        }
        if self.cache_size == 0 {
            return Err(Error::InvalidArgument("S must be >= 1".into()));
        }
        if self.prepopulation < self.block_size + 2 {
            return Err(Error::InvalidArgument(format!(
                "K={} must be >= B+2={}",
                self.prepopulation,
                self.block_size + 2
            )));
        }
        if self.replay_capacity < self.prepopulation {
            return Err(Error::InvalidArgument(format!(
                "capacity {} < K={}",
                self.replay_capacity, self.prepopulation
            )));
        }
        if self.minibatch_size == 0 {
            return Err(Error::InvalidArgument("minibatch size must be >= 1".into()));
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0,1]")));
            }
        }
        for (name, v) in [
            ("epsilon start", self.epsilon.start),
            ("epsilon end", self.epsilon.end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} {v} outside [0,1]")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} not positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Metrics of one completed episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: u64,
    pub ret: f64,
}

/// Metrics of one training burst.
#[derive(Clone, Debug, PartialEq)]
pub struct BurstRecord {
    pub burst: usize,
    pub build_ms: f64,
    pub copy_bytes: u64,
    pub q_evals: u64,
    pub blocks: u64,
    pub entries: usize,
    /// Bytes materialized transiently by minibatch sampling during this
    /// burst; counted identically for both backends.
    pub transient_bytes: u64,
    pub theta_digest: String,
}

/// Everything a run emits: per-episode returns, per-burst build metrics, and
/// the order-stable parameter digest for equivalence testing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub episodes: Vec<EpisodeRecord>,
    pub bursts: Vec<BurstRecord>,
    pub transient_bytes: u64,
    pub total_wall_ms: f64,
    pub final_digest: String,
}

struct BurstStats {
    build_ms: f64,
    copy_bytes: u64,
    q_evals: u64,
    blocks: u64,
    entries: usize,
    transient_bytes: u64,
}

/// Epsilon-greedy action: with probability epsilon a uniform action,
/// otherwise the argmax of the action values with lowest-index tie-breaking.
pub fn epsilon_greedy_action<R: Rng>(
    qfn: &dyn ActionValue,
    state: &[u8],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [0,1]"
        )));
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..qfn.action_count()));
    }
    let q = qfn.q_values(state)?;
    let mut best = 0;
    for (a, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = a;
        }
    }
    Ok(best)
}

/// One training burst: freeze the replay memory, build the cache once, run
/// C/F minibatch updates, then discard the cache. The freeze guard turns any
/// interleaved write into a hard error.
pub fn train_burst(
    memory: &mut ReplayMemory,
    qfn: &mut dyn ActionValue,
    hp: &Hyperparameters,
    backend: Backend,
    block_rng: &mut ChaCha8Rng,
    minibatch_rng: &mut ChaCha8Rng,
) -> Result<BurstRecord> {
    memory.freeze();
    let writes_before = memory.write_count();
    let result = burst_inner(memory, qfn, hp, backend, block_rng, minibatch_rng);
    debug_assert_eq!(memory.write_count(), writes_before);
    memory.unfreeze();
    let stats = result?;
    Ok(BurstRecord {
        burst: 0, // filled by the caller
        build_ms: stats.build_ms,
        copy_bytes: stats.copy_bytes,
        q_evals: stats.q_evals,
        blocks: stats.blocks,
        entries: stats.entries,
        transient_bytes: stats.transient_bytes,
        theta_digest: qfn.theta_digest(),
    })
}

fn burst_inner(
    memory: &ReplayMemory,
    qfn: &mut dyn ActionValue,
    hp: &Hyperparameters,
    backend: Backend,
    block_rng: &mut ChaCha8Rng,
    minibatch_rng: &mut ChaCha8Rng,
) -> Result<BurstStats> {
    let cfg = BuildConfig {
        gamma: hp.gamma,
        lambda: hp.lambda,
        cache_size: hp.cache_size,
        block_size: hp.block_size,
    };
    let cache = Cache::build(memory, &*qfn, &cfg, backend, block_rng)?;
    let mut transient_bytes = 0u64;
    let iterations = hp.refresh_period / hp.train_frequency;
    for _ in 0..iterations {
        let batch = cache.sample_minibatch(memory, hp.minibatch_size, minibatch_rng)?;
        transient_bytes += batch
            .iter()
            .map(|s| s.state.len() as u64 + 1)
            .sum::<u64>();
        qfn.sgd_step(&batch, hp.learning_rate)?;
    }
    Ok(BurstStats {
        build_ms: cache.build_ms(),
        copy_bytes: cache.copy_bytes(),
        q_evals: cache.q_evals(),
        blocks: cache.blocks(),
        entries: cache.len(),
        transient_bytes,
    })
}

/// Execute the full loop: prepopulate with K uniform-random-action
/// experiences, then for t = 1..total_steps train in bursts when
/// `t mod C = 1`, act epsilon-greedily, and store each experience.
pub fn run(
    env: &mut dyn Environment,
    qfn: &mut dyn ActionValue,
    hp: &Hyperparameters,
    backend: Backend,
    seed: u64,
) -> Result<RunReport> {
    hp.validate()?;
    if env.action_count() > 256 {
        return Err(Error::InvalidArgument(
            "environments with more than 256 actions are not representable".into(),
        ));
    }
    let start = Instant::now();

    // order-stable stream layout: policy, blocks, minibatches, environment
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seeder.next_u64());
    let mut block_rng = ChaCha8Rng::seed_from_u64(seeder.next_u64());
    let mut minibatch_rng = ChaCha8Rng::seed_from_u64(seeder.next_u64());
    let _env_stream = seeder.next_u64(); // reserved; stock environments are deterministic

    let mut memory = ReplayMemory::new(hp.replay_capacity, env.obs_bytes())?;
    let mut report = RunReport::default();
    let mut state = env.reset();
    let mut episode_return = 0.0;
    let mut episode_steps = 0u64;

    for _ in 0..hp.prepopulation {
        let action = policy_rng.gen_range(0..env.action_count());
        let (next, reward, terminal) = env.step(action)?;
        memory.push(Experience {
            state: std::mem::take(&mut state).into_boxed_slice(),
            action: action as u8,
            reward,
            terminal,
        })?;
        episode_return += reward;
        episode_steps += 1;
        if terminal {
            episode_return = 0.0;
            episode_steps = 0;
            state = env.reset();
        } else {
            state = next;
        }
    }

    for t in 1..=hp.total_steps {
        if t % hp.refresh_period == 1 % hp.refresh_period {
            let mut record = train_burst(
                &mut memory,
                qfn,
                hp,
                backend,
                &mut block_rng,
                &mut minibatch_rng,
            )?;
            record.burst = report.bursts.len() + 1;
            report.transient_bytes += record.transient_bytes;
            report.bursts.push(record);
        }
        let epsilon = hp.epsilon.at(t);
        let action = epsilon_greedy_action(&*qfn, &state, epsilon, &mut policy_rng)?;
        let (next, reward, terminal) = env.step(action)?;
        memory.push(Experience {
            state: std::mem::take(&mut state).into_boxed_slice(),
            action: action as u8,
            reward,
            terminal,
        })?;
        episode_return += reward;
        episode_steps += 1;
        if terminal {
            let episode = report.episodes.len() + 1;
            report.episodes.push(EpisodeRecord {
                episode,
                steps: episode_steps,
                ret: episode_return,
            });
            episode_return = 0.0;
            episode_steps = 0;
            state = env.reset();
        } else {
            state = next;
        }
    }

    report.final_digest = qfn.theta_digest();
    report.total_wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{encode_state, ChainEnv};
    use crate::value_fn::TabularQ;

    fn small_hp() -> Hyperparameters {
        Hyperparameters {
            minibatch_size: 8,
            replay_capacity: 500,
            refresh_period: 100,
            train_frequency: 4,
            gamma: 0.99,
            prepopulation: 120,
            cache_size: 60,
            block_size: 10,
            lambda: 0.8,
            learning_rate: 0.1,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.1,
                anneal_steps: 200,
            },
            total_steps: 300,
        }
    }

    #[test]
    fn hyperparameter_validation() {
        let mut hp = Hyperparameters::default();
        assert!(hp.validate().is_ok());
        hp.refresh_period = 10;
        hp.train_frequency = 3;
        assert!(hp.validate().is_err());
        hp = Hyperparameters::default();
        hp.prepopulation = hp.block_size; // < B+2
        assert!(hp.validate().is_err());
        hp = Hyperparameters::default();
        hp.replay_capacity = hp.prepopulation - 1;
        assert!(hp.validate().is_err());
    }

    #[test]
    fn zero_steps_is_prepopulation_only() {
        let mut env = ChainEnv::chain10(8);
        let mut q = TabularQ::new(10, 2);
        let mut hp = small_hp();
        hp.total_steps = 0;
        let report = run(&mut env, &mut q, &hp, Backend::Virtual, 1).unwrap();
        assert!(report.episodes.is_empty());
        assert!(report.bursts.is_empty());
    }

    #[test]
    fn burst_cadence_and_update_count() {
        let mut env = ChainEnv::chain10(8);
        let mut q = TabularQ::new(10, 2);
        let hp = small_hp();
        let report = run(&mut env, &mut q, &hp, Backend::Virtual, 1).unwrap();
        // C=100, 300 steps: bursts fire at t = 1, 101, 201
        assert_eq!(report.bursts.len(), 3);
    }

    #[test]
    fn c_equals_f_is_one_update_per_burst() {
        let mut env = ChainEnv::chain10(8);
        let mut q = TabularQ::new(10, 2);
        let mut hp = small_hp();
        hp.refresh_period = 4;
        hp.train_frequency = 4;
        hp.total_steps = 4;
        let report = run(&mut env, &mut q, &hp, Backend::Virtual, 1).unwrap();
        assert_eq!(report.bursts.len(), 1);
        // one minibatch of 8 items, state 8 bytes + 1 action byte each
        assert_eq!(report.transient_bytes, 8 * 9);
        assert_eq!(report.bursts[0].transient_bytes, 8 * 9);
    }

    #[test]
    fn burst_leaves_write_count_unchanged() {
        let mut env = ChainEnv::chain10(8);
        let mut q = TabularQ::new(10, 2);
        let hp = small_hp();
        let mut memory = ReplayMemory::new(hp.replay_capacity, 8).unwrap();
        let mut seeder = ChaCha8Rng::seed_from_u64(0);
        let mut policy = ChaCha8Rng::seed_from_u64(seeder.next_u64());
        let mut blocks = ChaCha8Rng::seed_from_u64(seeder.next_u64());
        let mut minibatches = ChaCha8Rng::seed_from_u64(seeder.next_u64());
        let mut s = env.reset();
        for _ in 0..hp.prepopulation {
            let a = policy.gen_range(0..2);
            let (next, r, term) = env.step(a).unwrap();
            memory
                .push(Experience {
                    state: s.into_boxed_slice(),
                    action: a as u8,
                    reward: r,
                    terminal: term,
                })
                .unwrap();
            s = if term { env.reset() } else { next };
        }
        let before = memory.write_count();
        let record = train_burst(
            &mut memory,
            &mut q,
            &hp,
            Backend::Virtual,
            &mut blocks,
            &mut minibatches,
        )
        .unwrap();
        assert_eq!(memory.write_count(), before);
        assert!(!memory.is_frozen());
        assert_eq!(record.entries, hp.cache_size);
        // evaluation economy: one per cached return plus one seed per block
        assert_eq!(record.q_evals, hp.cache_size as u64 + record.blocks);
    }

    #[test]
    fn backends_produce_identical_runs() {
        let hp = small_hp();
        let mut reports = Vec::new();
        for backend in [Backend::Virtual, Backend::Physical] {
            let mut env = ChainEnv::chain10(8);
            let mut q = TabularQ::new(10, 2);
            reports.push(run(&mut env, &mut q, &hp, backend, 77).unwrap());
        }
        let (virt, phys) = (&reports[0], &reports[1]);
        assert_eq!(virt.final_digest, phys.final_digest);
        assert_eq!(virt.episodes, phys.episodes);
        assert_eq!(virt.bursts.len(), phys.bursts.len());
        for (a, b) in virt.bursts.iter().zip(&phys.bursts) {
            assert_eq!(a.theta_digest, b.theta_digest);
            assert_eq!(a.q_evals, b.q_evals);
            assert_eq!(a.blocks, b.blocks);
        }
        assert!(virt.bursts.iter().all(|b| b.copy_bytes == 0));
        assert!(phys
            .bursts
            .iter()
            .all(|b| b.copy_bytes == hp.cache_size as u64 * 9));
    }

    #[test]
    fn epsilon_schedule_endpoints() {
        let s = EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            anneal_steps: 100,
        };
        assert_eq!(s.at(1), 1.0);
        assert!((s.at(51) - 0.525).abs() < 1e-12);
        assert!((s.at(101) - 0.05).abs() < 1e-12);
        assert!((s.at(10_000) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn pure_exploration_is_uniform() {
        let q = TabularQ::new(1, 4);
        let state = encode_state(0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0u64; 4];
        let n = 10_000;
        for _ in 0..n {
            counts[epsilon_greedy_action(&q, &state, 1.0, &mut rng).unwrap()] += 1;
        }
        // chi-squared against uniform, 3 dof; 16.27 is the 0.1% critical value
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn greedy_tie_breaks_to_lowest_index() {
        let mut q = TabularQ::new(1, 3);
        q.set(0, 1, 3.0);
        q.set(0, 2, 3.0);
        let state = encode_state(0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            epsilon_greedy_action(&q, &state, 0.0, &mut rng).unwrap(),
            1
        );
    }

    #[test]
    fn greedy_frequency_matches_binomial() {
        let mut q = TabularQ::new(1, 4);
        q.set(0, 2, 5.0);
        let state = encode_state(0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 10_000u64;
        let epsilon = 0.1;
        let mut greedy_count = 0u64;
        for _ in 0..n {
            if epsilon_greedy_action(&q, &state, epsilon, &mut rng).unwrap() == 2 {
                greedy_count += 1;
            }
        }
        // P(greedy action) = 0.9 + 0.1/4; allow 3 sigma of binomial noise
        let p = 1.0 - epsilon + epsilon / 4.0;
        let sigma = (p * (1.0 - p) * n as f64).sqrt();
        let observed = greedy_count as f64;
        assert!(
            (observed - p * n as f64).abs() <= 3.0 * sigma,
            "observed {observed}, expected {} +- {}",
            p * n as f64,
            3.0 * sigma
        );
    }
}
