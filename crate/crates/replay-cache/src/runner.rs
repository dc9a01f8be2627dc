//! CLI-facing drivers: execute seeded runs, backend comparisons, and build
//! benchmarks; emit machine-readable CSV reports.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{run, RunReport};
use crate::cache::{Backend, BuildConfig, Cache};
use crate::config::{EnvKind, RunConfig};
use crate::envs::{encode_state, ChainEnv, Environment, GridworldEnv, SyntheticEnv};
use crate::error::Result;
use crate::replay_memory::{Experience, ReplayMemory};
use crate::value_fn::{ActionValue, TabularQ};

pub fn make_env(kind: EnvKind, obs_bytes: usize) -> Box<dyn Environment> {
    match kind {
        EnvKind::Chain => Box::new(ChainEnv::chain10(obs_bytes)),
        EnvKind::Gridworld => Box::new(GridworldEnv::grid5x5(obs_bytes)),
        EnvKind::Synthetic => Box::new(SyntheticEnv::ring64(obs_bytes)),
    }
}

/// Execute one training run from a validated config.
pub fn execute_run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut env = make_env(cfg.env, cfg.obs_bytes);
    let mut qfn = TabularQ::new(env.state_count(), env.action_count());
    run(env.as_mut(), &mut qfn, &cfg.hp, cfg.backend, cfg.seed)
}

/// CSV rendering of a run report: an episode section followed by a burst
/// section. Everything except the wall-time column is seed-stable.
pub fn report_to_csv(report: &RunReport) -> String {
    let mut out = String::from("episode,steps,return\n");
    for e in &report.episodes {
        out.push_str(&format!("{},{},{}\n", e.episode, e.steps, e.ret));
    }
    out.push('\n');
    out.push_str("burst,build_ms,copy_bytes,q_evals,blocks,entries,theta_digest\n");
    for b in &report.bursts {
        out.push_str(&format!(
            "{},{:.3},{},{},{},{},{}\n",
            b.burst, b.build_ms, b.copy_bytes, b.q_evals, b.blocks, b.entries, b.theta_digest
        ));
    }
    out
}

/// Short human summary of a run.
pub fn report_summary(report: &RunReport) -> String {
    let total_build: f64 = report.bursts.iter().map(|b| b.build_ms).sum();
    let copy: u64 = report.bursts.iter().map(|b| b.copy_bytes).sum();
    format!(
        "episodes: {}  bursts: {}  build total: {:.1} ms  copy bytes: {}  wall: {:.1} ms\nfinal theta digest: {}\n",
        report.episodes.len(),
        report.bursts.len(),
        total_build,
        copy,
        report.total_wall_ms,
        report.final_digest
    )
}

/// First point where two runs disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub burst: Option<usize>,
    pub field: String,
}

/// Side-by-side result of running both backends with one seed.
pub struct CompareOutcome {
    pub equivalent: bool,
    pub divergence: Option<Divergence>,
    pub virtual_report: RunReport,
    pub physical_report: RunReport,
}

impl CompareOutcome {
    /// Human-readable verdict plus build-cost ratios.
    pub fn render(&self) -> String {
        let v = &self.virtual_report;
        let p = &self.physical_report;
        let build = |r: &RunReport| r.bursts.iter().map(|b| b.build_ms).sum::<f64>();
        let copy = |r: &RunReport| r.bursts.iter().map(|b| b.copy_bytes).sum::<u64>();
        let (bv, bp) = (build(v), build(p));
        let mut out = String::new();
        out.push_str(&format!(
            "bursts: {} vs {}  episodes: {} vs {}\n",
            v.bursts.len(),
            p.bursts.len(),
            v.episodes.len(),
            p.episodes.len()
        ));
        out.push_str(&format!(
            "build ms total: virtual {bv:.1}, physical {bp:.1} (ratio {:.2})\n",
            if bp > 0.0 { bv / bp } else { f64::NAN }
        ));
        out.push_str(&format!(
            "copy bytes total: virtual {}, physical {}\n",
            copy(v),
            copy(p)
        ));
        match &self.divergence {
            None => out.push_str("verdict: EQUIVALENT\n"),
            Some(d) => {
                let at = d
                    .burst
                    .map(|b| format!("burst {b}"))
                    .unwrap_or_else(|| "run level".into());
                out.push_str(&format!(
                    "first divergence: {at}, field {}\nverdict: DIVERGED\n",
                    d.field
                ));
            }
        }
        out
    }
}

/// Run both backends with the identical seed and compare digests and episode
/// returns. `mismatch_seeds` is a negative control that perturbs the physical
/// backend's seed.
pub fn execute_compare(cfg: &RunConfig, mismatch_seeds: bool) -> Result<CompareOutcome> {
    cfg.validate()?;
    let mut virt_cfg = cfg.clone();
    virt_cfg.backend = Backend::Virtual;
    let mut phys_cfg = cfg.clone();
    phys_cfg.backend = Backend::Physical;
    if mismatch_seeds {
        phys_cfg.seed = cfg.seed.wrapping_add(1);
    }
    let virtual_report = execute_run(&virt_cfg)?;
    let physical_report = execute_run(&phys_cfg)?;
    let divergence = find_divergence(&virtual_report, &physical_report);
    Ok(CompareOutcome {
        equivalent: divergence.is_none(),
        divergence,
        virtual_report,
        physical_report,
    })
}

fn find_divergence(a: &RunReport, b: &RunReport) -> Option<Divergence> {
    if a.bursts.len() != b.bursts.len() {
        return Some(Divergence {
            burst: None,
            field: "burst count".into(),
        });
    }
    for (x, y) in a.bursts.iter().zip(&b.bursts) {
        if x.theta_digest != y.theta_digest {
            return Some(Divergence {
                burst: Some(x.burst),
                field: "theta_digest".into(),
            });
        }
        if (x.q_evals, x.blocks, x.entries) != (y.q_evals, y.blocks, y.entries) {
            return Some(Divergence {
                burst: Some(x.burst),
                field: "build metrics".into(),
            });
        }
    }
    if a.episodes != b.episodes {
        let burst = a
            .episodes
            .iter()
            .zip(&b.episodes)
            .position(|(x, y)| x != y)
            .map(|i| i + 1);
        return Some(Divergence {
            burst,
            field: "episode returns".into(),
        });
    }
    if a.final_digest != b.final_digest {
        return Some(Divergence {
            burst: None,
            field: "final theta digest".into(),
        });
    }
    None
}

/// One row of the build-time benchmark.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub obs_bytes: usize,
    pub backend: Backend,
    pub median_build_ms: f64,
    pub copy_bytes: u64,
}

/// Median build wall time per backend over `repeats` builds at each
/// observation size. Repeats run sequentially to avoid timer interference.
pub fn execute_bench(
    sizes: &[usize],
    cache_size: usize,
    block_size: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(crate::error::Error::InvalidArgument(
            "repeats must be >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    for &obs_bytes in sizes {
        // fill a replay memory with synthetic observations; enough entries
        // that the eligible range comfortably covers the cache size
        let entries = cache_size + block_size + 3;
        let mut env = SyntheticEnv::ring64(obs_bytes);
        let mut memory = ReplayMemory::new(entries, obs_bytes)?;
        let mut state = env.reset();
        let mut action_rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..entries {
            let action = rand::Rng::gen_range(&mut action_rng, 0..env.action_count());
            let (next, reward, terminal) = env.step(action)?;
            memory.push(Experience {
                state: std::mem::replace(&mut state, next).into_boxed_slice(),
                action: action as u8,
                reward,
                terminal,
            })?;
        }
        let qfn = TabularQ::new(env.state_count(), env.action_count());
        let cfg = BuildConfig {
            gamma: 0.99,
            lambda: 0.8,
            cache_size,
            block_size,
        };
        for backend in [Backend::Virtual, Backend::Physical] {
            let mut times = Vec::with_capacity(repeats);
            let mut copy_bytes = 0;
            for rep in 0..repeats {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ rep as u64);
                let cache = Cache::build(&memory, &qfn, &cfg, backend, &mut rng)?;
                times.push(cache.build_ms());
                copy_bytes = cache.copy_bytes();
            }
            times.sort_by(|a, b| a.total_cmp(b));
            let median = times[times.len() / 2];
            rows.push(BenchRow {
                obs_bytes,
                backend,
                median_build_ms: median,
                copy_bytes,
            });
        }
    }
    Ok(rows)
}

pub fn bench_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("obs_bytes,backend,median_build_ms,copy_bytes\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.3},{}\n",
            r.obs_bytes, r.backend, r.median_build_ms, r.copy_bytes
        ));
    }
    out
}

/// Greedy action per state id under the current estimator; used to grade a
/// learned policy against the value-iteration oracle.
pub fn greedy_policy(qfn: &dyn ActionValue, state_count: usize, obs_bytes: usize) -> Vec<usize> {
    (0..state_count)
        .map(|s| {
            let q = qfn
                .q_values(&encode_state(s as u32, obs_bytes))
                .expect("state id within range");
            let mut best = 0;
            for (a, &v) in q.iter().enumerate() {
                if v > q[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}
