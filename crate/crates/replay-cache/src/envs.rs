//! Small deterministic MDPs with a configurable observation byte width, so
//! memory and copy effects scale like high-dimensional states.
//!
//! Observations encode the state id in the first four bytes (little endian)
//! followed by padding that is a pure function of the id, so large
//! observations stay deterministic.

use crate::error::{Error, Result};

/// Minimum observation width: the 4-byte state-id prefix.
pub const MIN_OBS_BYTES: usize = 4;

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Encode a state id into a fixed-width observation: 4-byte id prefix plus
/// deterministic pseudo-random padding derived from the id.
pub fn encode_state(id: u32, obs_bytes: usize) -> Vec<u8> {
    assert!(obs_bytes >= MIN_OBS_BYTES, "obs_bytes must be >= 4");
    let mut out = Vec::with_capacity(obs_bytes);
    out.extend_from_slice(&id.to_le_bytes());
    let mut seed = (id as u64) ^ 0xd1b5_4a32_d192_ed03;
    while out.len() < obs_bytes {
        let word = splitmix64(&mut seed).to_le_bytes();
        let take = (obs_bytes - out.len()).min(8);
        out.extend_from_slice(&word[..take]);
    }
    out
}

/// Recover the state id from an observation's prefix.
pub fn decode_state_id(state: &[u8]) -> Result<u32> {
    if state.len() < MIN_OBS_BYTES {
        return Err(Error::InvalidArgument(format!(
            "observation of {} bytes has no decodable id prefix",
            state.len()
        )));
    }
    Ok(u32::from_le_bytes([state[0], state[1], state[2], state[3]]))
}

/// An interactive environment producing byte-encoded observations.
pub trait Environment {
    fn action_count(&self) -> usize;
    fn state_count(&self) -> usize;
    fn obs_bytes(&self) -> usize;
    /// Start a new episode; deterministic.
    fn reset(&mut self) -> Vec<u8>;
    /// Take one step: returns (next observation, reward, terminal flag).
    fn step(&mut self, action: usize) -> Result<(Vec<u8>, f64, bool)>;
}

/// Enumerable deterministic MDP view, used by the value-iteration oracle.
pub trait TabularMdp {
    fn state_count(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Deterministic transition: (next state, reward, terminal).
    fn transition(&self, state: usize, action: usize) -> (usize, f64, bool);
}

/// Exact optimal state values by value iteration.
pub fn value_iteration(mdp: &dyn TabularMdp, gamma: f64, tol: f64) -> Vec<f64> {
    let n = mdp.state_count();
    let mut values = vec![0.0; n];
    loop {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let best = (0..mdp.action_count())
                .map(|a| {
                    let (next, reward, terminal) = mdp.transition(s, a);
                    reward + if terminal { 0.0 } else { gamma * values[next] }
                })
                .fold(f64::NEG_INFINITY, f64::max);
            delta = delta.max((best - values[s]).abs());
            values[s] = best;
        }
        if delta < tol {
            return values;
        }
    }
}

/// Greedy policy with respect to optimal values; ties break to the lowest
/// action index.
pub fn optimal_policy(mdp: &dyn TabularMdp, gamma: f64, values: &[f64]) -> Vec<usize> {
    (0..mdp.state_count())
        .map(|s| {
            let mut best_a = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..mdp.action_count() {
                let (next, reward, terminal) = mdp.transition(s, a);
                let q = reward + if terminal { 0.0 } else { gamma * values[next] };
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            best_a
        })
        .collect()
}

/// Deterministic chain: action 1 advances toward the goal, action 0 stays.
/// Reaching the last state yields reward 1 and ends the episode; the horizon
/// also ends it (with whatever reward the transition gave).
pub struct ChainEnv {
    length: usize,
    horizon: u64,
    obs_bytes: usize,
    state: usize,
    steps: u64,
}

pub const CHAIN_STAY: usize = 0;
pub const CHAIN_ADVANCE: usize = 1;

impl ChainEnv {
    pub fn new(length: usize, horizon: u64, obs_bytes: usize) -> Self {
        assert!(length >= 2);
        Self {
            length,
            horizon,
            obs_bytes,
            state: 0,
            steps: 0,
        }
    }

    /// The stock 10-state chain.
    pub fn chain10(obs_bytes: usize) -> Self {
        Self::new(10, 100, obs_bytes)
    }
}

impl Environment for ChainEnv {
    fn action_count(&self) -> usize {
        2
    }

    fn state_count(&self) -> usize {
        self.length
    }

    fn obs_bytes(&self) -> usize {
        self.obs_bytes
    }

    fn reset(&mut self) -> Vec<u8> {
        self.state = 0;
        self.steps = 0;
        encode_state(0, self.obs_bytes)
    }

    fn step(&mut self, action: usize) -> Result<(Vec<u8>, f64, bool)> {
        if action >= 2 {
            return Err(Error::InvalidArgument(format!("chain action {action} >= 2")));
        }
        let (next, reward, goal) = TabularMdp::transition(self, self.state, action);
        self.steps += 1;
        let terminal = goal || self.steps >= self.horizon;
        self.state = next;
        Ok((encode_state(next as u32, self.obs_bytes), reward, terminal))
    }
}

impl TabularMdp for ChainEnv {
    fn state_count(&self) -> usize {
        self.length
    }

    fn action_count(&self) -> usize {
        2
    }

    fn transition(&self, state: usize, action: usize) -> (usize, f64, bool) {
        let goal = self.length - 1;
        if state >= goal {
            return (goal, 0.0, true); // absorbing
        }
        if action == CHAIN_ADVANCE {
            let next = state + 1;
            (next, if next == goal { 1.0 } else { 0.0 }, next == goal)
        } else {
            (state, 0.0, false)
        }
    }
}

/// Gridworld with clamped moves; reward 1 at the goal corner.
pub struct GridworldEnv {
    width: usize,
    height: usize,
    horizon: u64,
    obs_bytes: usize,
    state: usize,
    steps: u64,
}

impl GridworldEnv {
    pub fn new(width: usize, height: usize, horizon: u64, obs_bytes: usize) -> Self {
        assert!(width >= 2 && height >= 2);
        Self {
            width,
            height,
            horizon,
            obs_bytes,
            state: 0,
            steps: 0,
        }
    }

    /// The stock 5x5 gridworld.
    pub fn grid5x5(obs_bytes: usize) -> Self {
        Self::new(5, 5, 200, obs_bytes)
    }
}

impl Environment for GridworldEnv {
    fn action_count(&self) -> usize {
        4
    }

    fn state_count(&self) -> usize {
        self.width * self.height
    }

    fn obs_bytes(&self) -> usize {
        self.obs_bytes
    }

    fn reset(&mut self) -> Vec<u8> {
        self.state = 0;
        self.steps = 0;
        encode_state(0, self.obs_bytes)
    }

    fn step(&mut self, action: usize) -> Result<(Vec<u8>, f64, bool)> {
        if action >= 4 {
            return Err(Error::InvalidArgument(format!(
                "gridworld action {action} >= 4"
            )));
        }
        let (next, reward, goal) = TabularMdp::transition(self, self.state, action);
        self.steps += 1;
        let terminal = goal || self.steps >= self.horizon;
        self.state = next;
        Ok((encode_state(next as u32, self.obs_bytes), reward, terminal))
    }
}

impl TabularMdp for GridworldEnv {
    fn state_count(&self) -> usize {
        self.width * self.height
    }

    fn action_count(&self) -> usize {
        4
    }

    fn transition(&self, state: usize, action: usize) -> (usize, f64, bool) {
        let goal = self.width * self.height - 1;
        if state >= goal {
            return (goal, 0.0, true);
        }
        let (x, y) = (state % self.width, state / self.width);
        let (nx, ny) = match action {
            0 => (x, y.saturating_sub(1)),                     // up
            1 => (x, (y + 1).min(self.height - 1)),            // down
            2 => (x.saturating_sub(1), y),                     // left
            _ => ((x + 1).min(self.width - 1), y),             // right
        };
        let next = ny * self.width + nx;
        (next, if next == goal { 1.0 } else { 0.0 }, next == goal)
    }
}

/// Reward-free ring of states; exists to exercise memory and copy behavior at
/// arbitrary observation widths.
pub struct SyntheticEnv {
    state_count: usize,
    horizon: u64,
    obs_bytes: usize,
    state: usize,
    steps: u64,
}

impl SyntheticEnv {
    pub fn new(state_count: usize, horizon: u64, obs_bytes: usize) -> Self {
        assert!(state_count >= 2);
        Self {
            state_count,
            horizon,
            obs_bytes,
            state: 0,
            steps: 0,
        }
    }

    pub fn ring64(obs_bytes: usize) -> Self {
        Self::new(64, 1000, obs_bytes)
    }
}

impl Environment for SyntheticEnv {
    fn action_count(&self) -> usize {
        4
    }

    fn state_count(&self) -> usize {
        self.state_count
    }

    fn obs_bytes(&self) -> usize {
        self.obs_bytes
    }

    fn reset(&mut self) -> Vec<u8> {
        self.state = 0;
        self.steps = 0;
        encode_state(0, self.obs_bytes)
    }

    fn step(&mut self, action: usize) -> Result<(Vec<u8>, f64, bool)> {
        if action >= self.action_count() {
            return Err(Error::InvalidArgument(format!(
                "synthetic action {action} >= {}",
                self.action_count()
            )));
        }
        self.state = (self.state + 1 + action) % self.state_count;
        self.steps += 1;
        let terminal = self.steps >= self.horizon;
        if terminal {
            self.steps = 0;
        }
        Ok((
            encode_state(self.state as u32, self.obs_bytes),
            0.0,
            terminal,
        ))
    }
}
