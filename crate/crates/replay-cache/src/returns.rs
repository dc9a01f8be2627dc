//! Return estimators: n-step returns, the direct truncated lambda-return
//! (brute-force oracle), and the reverse-order recursive lambda-return over a
//! block (production path).
//!
//! All arithmetic is double precision; storage narrows to 4-byte reals only at
//! the cache boundary.

use crate::error::{Error, Result};

/// Discount factor and lambda, both within the closed unit interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscountParams {
    pub gamma: f64,
    pub lambda: f64,
}

impl DiscountParams {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma {gamma} outside [0,1]"
            )));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda {lambda} outside [0,1]"
            )));
        }
        Ok(Self { gamma, lambda })
    }
}

/// A trajectory segment of N positions starting at some timestep t.
///
/// Position i carries the reward r_{t+i}, the greedy bootstrap value of the
/// successor state v(s_{t+i+1}) (zero where that successor is terminal), and
/// the terminal flag for that successor. The final bootstrap value doubles as
/// the recursion seed for block computation.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    rewards: Vec<f64>,
    bootstrap_values: Vec<f64>,
    terminal_mask: Vec<bool>,
}

impl Trajectory {
    pub fn new(
        rewards: Vec<f64>,
        bootstrap_values: Vec<f64>,
        terminal_mask: Vec<bool>,
    ) -> Result<Self> {
        if rewards.is_empty() {
            return Err(Error::InvalidArgument("empty trajectory".into()));
        }
        if rewards.len() != bootstrap_values.len() || rewards.len() != terminal_mask.len() {
            return Err(Error::InvalidArgument(format!(
                "field length mismatch: rewards {}, values {}, terminals {}",
                rewards.len(),
                bootstrap_values.len(),
                terminal_mask.len()
            )));
        }
        for (i, (&v, &term)) in bootstrap_values.iter().zip(&terminal_mask).enumerate() {
            if term && v != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "bootstrap value {v} nonzero at terminal position {i}"
                )));
            }
        }
        Ok(Self {
            rewards,
            bootstrap_values,
            terminal_mask,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty trajectories
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn bootstrap_values(&self) -> &[f64] {
        &self.bootstrap_values
    }

    pub fn terminal_mask(&self) -> &[bool] {
        &self.terminal_mask
    }

    /// Sub-trajectory starting at `start` (used by the per-position oracle).
    pub fn suffix(&self, start: usize) -> Result<Trajectory> {
        if start >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "suffix start {start} out of range for length {}",
                self.len()
            )));
        }
        Ok(Trajectory {
            rewards: self.rewards[start..].to_vec(),
            bootstrap_values: self.bootstrap_values[start..].to_vec(),
            terminal_mask: self.terminal_mask[start..].to_vec(),
        })
    }
}

/// n-step return: the discounted reward sum over n steps plus the bootstrapped
/// value of the state reached.
///
/// A terminal position inside the window truncates the sum and drops the
/// bootstrap term (episodic convention).
pub fn n_step_return(traj: &Trajectory, n: usize, gamma: f64) -> Result<f64> {
    if n == 0 || n > traj.len() {
        return Err(Error::InvalidArgument(format!(
            "n={n} out of range 1..={}",
            traj.len()
        )));
    }
    let mut acc = 0.0;
    let mut discount = 1.0;
    for k in 0..n {
        acc += discount * traj.rewards[k];
        if traj.terminal_mask[k] {
            return Ok(acc);
        }
        discount *= gamma;
    }
    Ok(acc + discount * traj.bootstrap_values[n - 1])
}

/// Truncated lambda-return by explicit summation over n-step returns: the
/// exponentially weighted average with the final term bootstrapped.
///
/// This is the brute-force oracle path; [`lambda_return_block`] is the
/// production path.
pub fn lambda_return_direct(traj: &Trajectory, p: DiscountParams) -> Result<f64> {
    let n_max = traj.len();
    let mut acc = 0.0;
    let mut weight = 1.0; // lambda^(n-1)
    for n in 1..n_max {
        acc += (1.0 - p.lambda) * weight * n_step_return(traj, n, p.gamma)?;
        weight *= p.lambda;
    }
    acc += weight * n_step_return(traj, n_max, p.gamma)?;
    Ok(acc)
}

/// Lambda-returns for every position of a block, computed in reverse order via
/// the recursion `L_t = r_t + gamma * (lambda * L_{t+1} + (1-lambda) * v_{t+1})`.
///
/// The recursion seed is the block's final bootstrap value. Wherever the
/// successor is terminal, both the carried return and the bootstrap are
/// treated as zero (the carry belongs to a different episode), so the output
/// there is the bare reward.
pub fn lambda_return_block(block: &Trajectory, p: DiscountParams) -> Result<Vec<f64>> {
    let n = block.len();
    let mut out = vec![0.0; n];
    let mut carry = block.bootstrap_values[n - 1]; // zero if terminal, by invariant
    for t in (0..n).rev() {
        let value = if block.terminal_mask[t] {
            block.rewards[t]
        } else {
            block.rewards[t]
                + p.gamma * (p.lambda * carry + (1.0 - p.lambda) * block.bootstrap_values[t])
        };
        out[t] = value;
        carry = value;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn traj(r: &[f64], v: &[f64], term: &[bool]) -> Trajectory {
        Trajectory::new(r.to_vec(), v.to_vec(), term.to_vec()).unwrap()
    }

    #[test]
    fn one_step_return() {
        let t = traj(&[2.0], &[1.0], &[false]);
        assert_eq!(n_step_return(&t, 1, 0.9).unwrap(), 2.9);
    }

    #[test]
    fn one_step_terminal_drops_bootstrap() {
        let t = traj(&[5.0], &[0.0], &[true]);
        assert_eq!(n_step_return(&t, 1, 0.9).unwrap(), 5.0);
    }

    #[test]
    fn three_step_return_term_by_term() {
        // 1 + 0.5*2 + 0.25*3 + 0.125*4 = 3.25
        let t = traj(&[1.0, 2.0, 3.0], &[9.0, 9.0, 4.0], &[false; 3]);
        assert!((n_step_return(&t, 3, 0.5).unwrap() - 3.25).abs() < 1e-12);
    }

    #[test]
    fn n_out_of_range() {
        let t = traj(&[1.0], &[0.0], &[false]);
        assert!(n_step_return(&t, 0, 0.9).is_err());
        assert!(n_step_return(&t, 2, 0.9).is_err());
    }

    #[test]
    fn lambda_zero_collapses_to_one_step() {
        let t = traj(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[false; 3]);
        let p = DiscountParams::new(0.9, 0.0).unwrap();
        let direct = lambda_return_direct(&t, p).unwrap();
        let one_step = n_step_return(&t, 1, 0.9).unwrap();
        assert_eq!(direct, one_step); // exact, not within tolerance
    }

    #[test]
    fn lambda_one_undiscounted_terminal_is_monte_carlo() {
        let t = traj(&[1.0, 1.0, 1.0], &[5.0, 5.0, 0.0], &[false, false, true]);
        let p = DiscountParams::new(1.0, 1.0).unwrap();
        assert_eq!(lambda_return_direct(&t, p).unwrap(), 3.0);
    }

    #[test]
    fn direct_two_step_bootstrapped() {
        // 0.5*(1 + 0.9*10) + 0.5*(1 + 0.9*2 + 0.81*20) = 14.5
        let t = traj(&[1.0, 2.0], &[10.0, 20.0], &[false, false]);
        let p = DiscountParams::new(0.9, 0.5).unwrap();
        assert!((lambda_return_direct(&t, p).unwrap() - 14.5).abs() < 1e-12);
    }

    #[test]
    fn block_lambda_zero_is_elementwise_one_step() {
        let t = traj(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[false; 3]);
        let p = DiscountParams::new(0.9, 0.0).unwrap();
        let block = lambda_return_block(&t, p).unwrap();
        for (i, &lam) in block.iter().enumerate() {
            let expect = n_step_return(&t.suffix(i).unwrap(), 1, 0.9).unwrap();
            assert_eq!(lam, expect);
        }
    }

    #[test]
    fn block_single_terminal_position() {
        let t = traj(&[7.0], &[0.0], &[true]);
        let p = DiscountParams::new(0.9, 0.5).unwrap();
        assert_eq!(lambda_return_block(&t, p).unwrap(), vec![7.0]);
    }

    #[test]
    fn block_two_positions_matches_direct() {
        let t = traj(&[1.0, 2.0], &[10.0, 20.0], &[false, false]);
        let p = DiscountParams::new(0.9, 0.5).unwrap();
        let block = lambda_return_block(&t, p).unwrap();
        assert!((block[0] - 14.5).abs() < 1e-12);
        assert!((block[1] - 20.0).abs() < 1e-12);
        for (i, &recursive) in block.iter().enumerate() {
            let direct = lambda_return_direct(&t.suffix(i).unwrap(), p).unwrap();
            assert!((recursive - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn field_length_mismatch_rejected() {
        assert!(Trajectory::new(vec![1.0, 2.0], vec![0.0], vec![false, false]).is_err());
        assert!(Trajectory::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn nonzero_bootstrap_at_terminal_rejected() {
        assert!(Trajectory::new(vec![1.0], vec![3.0], vec![true]).is_err());
    }

    fn arb_trajectory() -> impl Strategy<Value = Trajectory> {
        (1usize..=12).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(prop::bool::weighted(0.2), n),
            )
                .prop_map(|(r, mut v, term)| {
                    for (vi, &t) in v.iter_mut().zip(&term) {
                        if t {
                            *vi = 0.0;
                        }
                    }
                    Trajectory::new(r, v, term).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        /// Recursion agrees with the direct summation at every position.
        #[test]
        fn recursion_matches_direct(
            t in arb_trajectory(),
            gamma in 0.0f64..=1.0,
            lambda in 0.0f64..=1.0,
        ) {
            let p = DiscountParams::new(gamma, lambda).unwrap();
            let block = lambda_return_block(&t, p).unwrap();
            for (i, &recursive) in block.iter().enumerate() {
                let direct = lambda_return_direct(&t.suffix(i).unwrap(), p).unwrap();
                prop_assert!((recursive - direct).abs() < 1e-9,
                    "pos {}: block {} vs direct {}", i, recursive, direct);
            }
        }

        /// The lambda-return is a convex combination of n-step returns.
        #[test]
        fn convex_combination_bound(
            t in arb_trajectory().prop_filter("no interior terminals", |t| {
                !t.terminal_mask()[..t.len() - 1].iter().any(|&b| b)
            }),
            gamma in 0.0f64..=1.0,
            lambda in 0.0f64..=1.0,
        ) {
            let p = DiscountParams::new(gamma, lambda).unwrap();
            let lam = lambda_return_direct(&t, p).unwrap();
            let g: Vec<f64> = (1..=t.len())
                .map(|n| n_step_return(&t, n, gamma).unwrap())
                .collect();
            let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lam >= lo - 1e-9 && lam <= hi + 1e-9,
                "{} outside [{}, {}]", lam, lo, hi);
        }

        /// Lambda endpoint collapses are exact.
        #[test]
        fn endpoint_collapses_exact(t in arb_trajectory(), gamma in 0.0f64..=1.0) {
            let p0 = DiscountParams::new(gamma, 0.0).unwrap();
            prop_assert_eq!(
                lambda_return_direct(&t, p0).unwrap(),
                n_step_return(&t, 1, gamma).unwrap()
            );
            let p1 = DiscountParams::new(gamma, 1.0).unwrap();
            prop_assert_eq!(
                lambda_return_direct(&t, p1).unwrap(),
                n_step_return(&t, t.len(), gamma).unwrap()
            );
        }
    }
}
