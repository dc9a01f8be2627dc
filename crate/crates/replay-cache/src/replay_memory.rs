//! Fixed-capacity circular store of experiences addressed by absolute index.
//!
//! This is the single physical home of all state-action data. Entries are
//! addressed by a monotone counter rather than a slot offset, so a reference
//! to an evicted experience is detectable instead of silently aliased. The
//! state of the *next* entry doubles as the successor state of the current
//! one, which halves state storage; the per-entry terminal flag tells callers
//! when that successor belongs to a new episode and the bootstrap must be
//! zero.

use crate::error::{Error, Result};

/// One transition record: the state observed, the action taken, the reward
/// received, and whether the successor state ends the episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub state: Box<[u8]>,
    pub action: u8,
    pub reward: f64,
    pub terminal: bool,
}

/// Monotonically increasing transition identifier; the unit of indirection.
///
/// The value is the total number of pushes that happened before this
/// experience. Indices are never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbsIndex(pub u64);

impl AbsIndex {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for AbsIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Circular replay memory with FIFO eviction.
#[derive(Debug)]
pub struct ReplayMemory {
    capacity: usize,
    state_len: usize,
    slots: Vec<Experience>,
    write_count: u64,
    frozen: bool,
}

impl ReplayMemory {
    pub fn new(capacity: usize, state_len: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("capacity must be positive".into()));
        }
        if state_len == 0 {
            return Err(Error::InvalidArgument("state_len must be positive".into()));
        }
        Ok(Self {
            capacity,
            state_len,
            slots: Vec::new(),
            write_count: 0,
            frozen: false,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_len(&self) -> usize {
        self.state_len
    }

    /// Total number of pushes ever performed.
    pub fn write_count(&self) -> u64 {
        self.write_count
    }

    /// Number of currently resolvable indices.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Oldest resolvable absolute index.
    pub fn oldest(&self) -> u64 {
        self.write_count.saturating_sub(self.capacity as u64)
    }

    /// Newest resolvable absolute index, if any entry exists.
    pub fn newest(&self) -> Option<u64> {
        self.write_count.checked_sub(1)
    }

    /// Engage the freeze guard: pushes fail until [`unfreeze`](Self::unfreeze).
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Append an experience, evicting the oldest when full. Returns the
    /// absolute index assigned.
    pub fn push(&mut self, e: Experience) -> Result<AbsIndex> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        if e.state.len() != self.state_len {
            return Err(Error::StateLength {
                expected: self.state_len,
                got: e.state.len(),
            });
        }
        let index = AbsIndex(self.write_count);
        let slot = (self.write_count % self.capacity as u64) as usize;
        if slot == self.slots.len() {
            self.slots.push(e);
        } else {
            self.slots[slot] = e;
        }
        self.write_count += 1;
        Ok(index)
    }

    /// Borrow the experience stored at `i`.
    pub fn get(&self, i: AbsIndex) -> Result<&Experience> {
        if i.0 >= self.write_count {
            return Err(Error::Future {
                index: i.0,
                write_count: self.write_count,
            });
        }
        if i.0 < self.oldest() {
            return Err(Error::Stale {
                index: i.0,
                oldest: self.oldest(),
            });
        }
        Ok(&self.slots[(i.0 % self.capacity as u64) as usize])
    }

    /// State of entry `i + 1`, which is the successor state of entry `i`.
    /// Callers must not bootstrap from it when entry `i` is terminal.
    pub fn next_state(&self, i: AbsIndex) -> Result<&[u8]> {
        Ok(&self.get(AbsIndex(i.0 + 1))?.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(tag: u8) -> Experience {
        Experience {
            state: vec![tag; 4].into_boxed_slice(),
            action: tag,
            reward: tag as f64,
            terminal: false,
        }
    }

    fn memory(capacity: usize) -> ReplayMemory {
        ReplayMemory::new(capacity, 4).unwrap()
    }

    #[test]
    fn first_push_is_index_zero() {
        let mut m = memory(4);
        assert_eq!(m.push(exp(0)).unwrap(), AbsIndex(0));
    }

    #[test]
    fn eviction_arithmetic() {
        let mut m = memory(4);
        for i in 0..6 {
            m.push(exp(i)).unwrap();
        }
        // capacity 4, 6 pushes: resolvable indices are exactly {2,3,4,5}
        assert!(m.get(AbsIndex(1)).is_err());
        for i in 2..6 {
            assert_eq!(m.get(AbsIndex(i)).unwrap().action, i as u8);
        }
        assert!(m.get(AbsIndex(6)).is_err());
        assert_eq!(m.oldest(), 2);
        assert_eq!(m.newest(), Some(5));
    }

    #[test]
    fn prepopulation_fits_without_eviction() {
        let mut m = ReplayMemory::new(1_000_000, 4).unwrap();
        for i in 0..50_000u64 {
            assert_eq!(m.push(exp((i % 251) as u8)).unwrap(), AbsIndex(i));
        }
        assert_eq!(m.len(), 50_000);
        assert!(m.get(AbsIndex(0)).is_ok());
        assert!(m.get(AbsIndex(49_999)).is_ok());
        assert!(m.get(AbsIndex(50_000)).is_err());
    }

    #[test]
    fn write_then_read_roundtrip() {
        let mut m = memory(4);
        let e = exp(7);
        let i = m.push(e.clone()).unwrap();
        assert_eq!(m.get(i).unwrap(), &e);
    }

    #[test]
    fn stale_index_after_eviction() {
        let mut m = memory(4);
        let first = m.push(exp(0)).unwrap();
        for i in 1..5 {
            m.push(exp(i)).unwrap();
        }
        match m.get(first) {
            Err(Error::Stale { index: 0, oldest: 1 }) => {}
            other => panic!("expected stale error, got {other:?}"),
        }
    }

    #[test]
    fn future_index_is_range_error() {
        let mut m = memory(4);
        m.push(exp(0)).unwrap();
        assert!(matches!(m.get(AbsIndex(1)), Err(Error::Future { .. })));
    }

    #[test]
    fn next_state_adjacency() {
        let mut m = memory(4);
        m.push(exp(0)).unwrap();
        m.push(exp(1)).unwrap();
        assert_eq!(m.next_state(AbsIndex(0)).unwrap(), &[1u8; 4][..]);
        // newest entry has no successor yet
        assert!(matches!(
            m.next_state(AbsIndex(1)),
            Err(Error::Future { .. })
        ));
    }

    #[test]
    fn next_state_across_episode_boundary() {
        let mut m = memory(4);
        let mut terminal = exp(0);
        terminal.terminal = true;
        let i = m.push(terminal).unwrap();
        m.push(exp(9)).unwrap(); // new episode's first state
        assert_eq!(m.next_state(i).unwrap(), &[9u8; 4][..]);
        assert!(m.get(i).unwrap().terminal);
    }

    #[test]
    fn push_while_frozen_fails() {
        let mut m = memory(4);
        m.push(exp(0)).unwrap();
        m.freeze();
        assert!(matches!(m.push(exp(1)), Err(Error::Frozen)));
        assert_eq!(m.write_count(), 1);
        m.unfreeze();
        m.push(exp(1)).unwrap();
        assert_eq!(m.write_count(), 2);
    }

    #[test]
    fn state_length_mismatch_rejected() {
        let mut m = memory(4);
        let bad = Experience {
            state: vec![0u8; 3].into_boxed_slice(),
            action: 0,
            reward: 0.0,
            terminal: false,
        };
        assert!(matches!(m.push(bad), Err(Error::StateLength { .. })));
    }

    #[test]
    fn fifo_resolvable_window() {
        for capacity in [1usize, 3, 8] {
            let mut m = memory(capacity);
            for n in 0..20u64 {
                m.push(exp((n % 251) as u8)).unwrap();
                let oldest = (n + 1).saturating_sub(capacity as u64);
                for i in 0..=n {
                    let ok = m.get(AbsIndex(i)).is_ok();
                    assert_eq!(ok, i >= oldest, "cap={capacity} n={n} i={i}");
                }
            }
        }
    }
}
