//! Lambda-return caching for replay-based reinforcement learning.
//!
//! The replay memory is the single physical home of all state-action data.
//! Lambda-returns are precomputed in blocks and stored in a cache with one of
//! two interchangeable backends: a *physical* backend that copies state-action
//! pairs into the cache, and a *virtual* backend that stores only replay
//! indices and dereferences them at sample time. Under shared seeds the two
//! backends produce bit-identical training runs; the virtual backend simply
//! avoids the copies and their memory footprint.
//!
//! Module map:
//! - [`replay_memory`] — fixed-capacity circular store addressed by absolute index
//! - [`returns`] — n-step and lambda-return estimators (direct and recursive)
//! - [`value_fn`] — tabular and linear action-value estimators
//! - [`cache`] — the shared cache builder with both storage backends
//! - [`agent`] — the burst-training loop (prepopulate, act, refresh, update)
//! - [`envs`] — small deterministic MDPs with configurable observation width
//! - [`memmodel`] — byte-exact analytical memory model for both backends
//! - [`config`] / [`runner`] — run configuration and CLI-facing drivers
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod agent;
pub mod cache;
pub mod config;
pub mod envs;
pub mod error;
pub mod memmodel;
pub mod replay_memory;
pub mod returns;
pub mod runner;
pub mod value_fn;

pub use cache::{Backend, Cache, Sample};
pub use error::{Error, Result};
pub use replay_memory::{AbsIndex, Experience, ReplayMemory};
