//! Pluggable action-value estimators with a greedy-value view and a plain SGD
//! step on cached targets.
//!
//! Targets are constants: no gradient flows through them. The gradient is
//! taken of the batch *mean* squared error, so the learning rate is
//! batch-size invariant.

use sha2::{Digest, Sha256};

use crate::cache::Sample;
use crate::envs::decode_state_id;
use crate::error::{Error, Result};

/// Action-value estimator Q(s, a; theta).
pub trait ActionValue {
    fn action_count(&self) -> usize;

    /// Vector of action values for a state under the current parameters.
    fn q_values(&self, state: &[u8]) -> Result<Vec<f64>>;

    /// max over actions of Q(s, a); a value, so ties need no breaking.
    fn greedy_value(&self, state: &[u8]) -> Result<f64> {
        Ok(self
            .q_values(state)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// One gradient step on the batch mean of (target - Q(s, a))^2.
    fn sgd_step(&mut self, batch: &[Sample], alpha: f64) -> Result<()>;

    /// Order-stable hash of the parameters, for equivalence testing.
    fn theta_digest(&self) -> String;
}

/// Mean squared error of a batch under the current parameters.
pub fn batch_loss(qfn: &dyn ActionValue, batch: &[Sample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut acc = 0.0;
    for item in batch {
        let q = qfn.q_values(&item.state)?[item.action as usize];
        let err = item.lambda_return as f64 - q;
        acc += err * err;
    }
    Ok(acc / batch.len() as f64)
}

fn digest_params(params: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for p in params {
        hasher.update(p.to_le_bytes());
    }
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_batch(batch: &[Sample], alpha: f64) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} not positive")));
    }
    for item in batch {
        if !item.lambda_return.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite target {}",
                item.lambda_return
            )));
        }
    }
    Ok(())
}

/// Table of action values indexed by (state id, action). The state id is
/// decoded from the observation's 4-byte prefix.
#[derive(Clone, Debug)]
pub struct TabularQ {
    table: Vec<f64>,
    state_count: usize,
    action_count: usize,
}

impl TabularQ {
    /// Zero-initialized table (deterministic start).
    pub fn new(state_count: usize, action_count: usize) -> Self {
        Self {
            table: vec![0.0; state_count * action_count],
            state_count,
            action_count,
        }
    }

    fn state_id(&self, state: &[u8]) -> Result<usize> {
        let id = decode_state_id(state)? as usize;
        if id >= self.state_count {
            return Err(Error::InvalidArgument(format!(
                "state id {id} >= state count {}",
                self.state_count
            )));
        }
        Ok(id)
    }

    pub fn get(&self, state_id: usize, action: usize) -> f64 {
        self.table[state_id * self.action_count + action]
    }

    pub fn set(&mut self, state_id: usize, action: usize, value: f64) {
        self.table[state_id * self.action_count + action] = value;
    }
}

impl ActionValue for TabularQ {
    fn action_count(&self) -> usize {
        self.action_count
    }

    fn q_values(&self, state: &[u8]) -> Result<Vec<f64>> {
        let id = self.state_id(state)?;
        Ok(self.table[id * self.action_count..(id + 1) * self.action_count].to_vec())
    }

    fn sgd_step(&mut self, batch: &[Sample], alpha: f64) -> Result<()> {
        check_batch(batch, alpha)?;
        let m = batch.len() as f64;
        // accumulate the full gradient before applying it, so every item sees
        // the pre-update parameters
        let mut grad = vec![0.0; self.table.len()];
        for item in batch {
            let id = self.state_id(&item.state)?;
            let a = item.action as usize;
            if a >= self.action_count {
                return Err(Error::InvalidArgument(format!(
                    "action {a} >= action count {}",
                    self.action_count
                )));
            }
            let idx = id * self.action_count + a;
            grad[idx] += 2.0 * (item.lambda_return as f64 - self.table[idx]) / m;
        }
        for (w, g) in self.table.iter_mut().zip(&grad) {
            *w += alpha * g;
            if !w.is_finite() {
                return Err(Error::Numeric("non-finite table entry".into()));
            }
        }
        Ok(())
    }

    fn theta_digest(&self) -> String {
        digest_params(&self.table)
    }
}

/// Linear estimator: Q(s, a) = theta_a . phi(s) with phi(s) a bias term
/// followed by the observation bytes scaled to [0, 1].
#[derive(Clone, Debug)]
pub struct LinearQ {
    theta: Vec<f64>,
    obs_len: usize,
    action_count: usize,
}

impl LinearQ {
    /// Zero-initialized parameters.
    pub fn new(obs_len: usize, action_count: usize) -> Self {
        Self {
            theta: vec![0.0; (obs_len + 1) * action_count],
            obs_len,
            action_count,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.obs_len + 1
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: Vec<f64>) -> Result<()> {
        if theta.len() != self.theta.len() {
            return Err(Error::InvalidArgument(format!(
                "theta length {} != {}",
                theta.len(),
                self.theta.len()
            )));
        }
        self.theta = theta;
        Ok(())
    }

    fn features(&self, state: &[u8]) -> Result<Vec<f64>> {
        if state.len() != self.obs_len {
            return Err(Error::InvalidArgument(format!(
                "observation of {} bytes, estimator expects {}",
                state.len(),
                self.obs_len
            )));
        }
        let mut phi = Vec::with_capacity(self.feature_dim());
        phi.push(1.0);
        phi.extend(state.iter().map(|&b| b as f64 / 255.0));
        Ok(phi)
    }
}

impl ActionValue for LinearQ {
    fn action_count(&self) -> usize {
        self.action_count
    }

    fn q_values(&self, state: &[u8]) -> Result<Vec<f64>> {
        let phi = self.features(state)?;
        let fd = self.feature_dim();
        Ok((0..self.action_count)
            .map(|a| {
                self.theta[a * fd..(a + 1) * fd]
                    .iter()
                    .zip(&phi)
                    .map(|(w, x)| w * x)
                    .sum()
            })
            .collect())
    }

    fn sgd_step(&mut self, batch: &[Sample], alpha: f64) -> Result<()> {
        check_batch(batch, alpha)?;
        let m = batch.len() as f64;
        let fd = self.feature_dim();
        let mut grad = vec![0.0; self.theta.len()];
        for item in batch {
            let a = item.action as usize;
            if a >= self.action_count {
                return Err(Error::InvalidArgument(format!(
                    "action {a} >= action count {}",
                    self.action_count
                )));
            }
            let phi = self.features(&item.state)?;
            let q: f64 = self.theta[a * fd..(a + 1) * fd]
                .iter()
                .zip(&phi)
                .map(|(w, x)| w * x)
                .sum();
            let err = item.lambda_return as f64 - q;
            for (g, x) in grad[a * fd..(a + 1) * fd].iter_mut().zip(&phi) {
                *g += 2.0 * err * x / m;
            }
        }
        for (w, g) in self.theta.iter_mut().zip(&grad) {
            *w += alpha * g;
            if !w.is_finite() {
                return Err(Error::Numeric("non-finite parameter".into()));
            }
        }
        Ok(())
    }

    fn theta_digest(&self) -> String {
        digest_params(&self.theta)
    }
}
