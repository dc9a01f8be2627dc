//! Byte-exact analytical model of per-experience and total cache memory for
//! both backends.
//!
//! The model is deliberately decoupled from the implementation's true
//! in-process footprint (alignment, container overhead); the instrumented
//! copy counter in [`crate::cache`] is the bridge between model and reality.

use crate::cache::Backend;
use crate::error::{Error, Result};

pub const MEGABYTE: u64 = 1 << 20;

/// Byte sizes of one experience's components under the smallest feasible
/// standard representations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryLayout {
    /// Observation encoding width (e.g. 84*84*4 = 28224 for stacked frames).
    pub state_bytes: u64,
    pub action_bytes: u64,
    pub return_bytes: u64,
    pub index_bytes: u64,
}

impl MemoryLayout {
    pub fn new(
        state_bytes: u64,
        action_bytes: u64,
        return_bytes: u64,
        index_bytes: u64,
    ) -> Result<Self> {
        for (name, v) in [
            ("state_bytes", state_bytes),
            ("action_bytes", action_bytes),
            ("return_bytes", return_bytes),
            ("index_bytes", index_bytes),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(Self {
            state_bytes,
            action_bytes,
            return_bytes,
            index_bytes,
        })
    }

    /// Four stacked 84x84 1-byte frames, 1-byte action, 4-byte return,
    /// 4-byte index.
    pub fn frame_stack() -> Self {
        Self {
            state_bytes: 84 * 84 * 4,
            action_bytes: 1,
            return_bytes: 4,
            index_bytes: 4,
        }
    }
}

/// Bytes one cache entry occupies under the given backend.
pub fn per_experience_bytes(layout: &MemoryLayout, backend: Backend) -> u64 {
    match backend {
        Backend::Physical => layout.state_bytes + layout.action_bytes + layout.return_bytes,
        Backend::Virtual => layout.index_bytes + layout.return_bytes,
    }
}

/// Total cache bytes for `cache_size` entries.
pub fn cache_bytes(cache_size: u64, layout: &MemoryLayout, backend: Backend) -> u64 {
    cache_size * per_experience_bytes(layout, backend)
}

/// Megabytes at 2^20 bytes per MB, rounded as reported: integer MB at or
/// above 1 MB, two decimals below.
pub fn format_megabytes(bytes: u64) -> String {
    let mb = bytes as f64 / MEGABYTE as f64;
    if mb >= 1.0 {
        format!("{} MB", mb.round() as u64)
    } else {
        format!("{mb:.2} MB")
    }
}

/// Virtual footprint as a percentage of the physical one.
pub fn footprint_ratio_percent(layout: &MemoryLayout) -> f64 {
    100.0 * per_experience_bytes(layout, Backend::Virtual) as f64
        / per_experience_bytes(layout, Backend::Physical) as f64
}

/// Complement of the ratio: the percentage saved by going virtual.
pub fn reduction_percent(layout: &MemoryLayout) -> f64 {
    100.0 - footprint_ratio_percent(layout)
}

/// Human-readable comparison table for both backends.
pub fn table(layout: &MemoryLayout, cache_size: u64) -> String {
    let pp = per_experience_bytes(layout, Backend::Physical);
    let pv = per_experience_bytes(layout, Backend::Virtual);
    let cp = cache_bytes(cache_size, layout, Backend::Physical);
    let cv = cache_bytes(cache_size, layout, Backend::Virtual);
    let mut out = String::new();
    out.push_str(&format!("{:<24} {:>14} {:>14}\n", "", "physical", "virtual"));
    out.push_str(&format!(
        "{:<24} {:>14} {:>14}\n",
        "per experience",
        format!("{pp} B"),
        format!("{pv} B")
    ));
    out.push_str(&format!(
        "{:<24} {:>14} {:>14}\n",
        format!("cache (S={cache_size})"),
        format_megabytes(cp),
        format_megabytes(cv)
    ));
    out.push_str(&format!(
        "virtual/physical ratio: {:.3}%\n",
        footprint_ratio_percent(layout)
    ));
    out.push_str(&format!("reduction: {:.3}%\n", reduction_percent(layout)));
    out
}

/// Machine-readable CSV form of the same numbers.
pub fn csv(layout: &MemoryLayout, cache_size: u64) -> String {
    let mut out = String::from("metric,physical,virtual\n");
    out.push_str(&format!(
        "per_experience_bytes,{},{}\n",
        per_experience_bytes(layout, Backend::Physical),
        per_experience_bytes(layout, Backend::Virtual)
    ));
    out.push_str(&format!(
        "cache_bytes,{},{}\n",
        cache_bytes(cache_size, layout, Backend::Physical),
        cache_bytes(cache_size, layout, Backend::Virtual)
    ));
    out.push_str(&format!(
        "cache_mb,{},{}\n",
        format_megabytes(cache_bytes(cache_size, layout, Backend::Physical))
            .trim_end_matches(" MB"),
        format_megabytes(cache_bytes(cache_size, layout, Backend::Virtual)).trim_end_matches(" MB")
    ));
    out.push_str(&format!(
        "ratio_percent,{0:.3},{0:.3}\n",
        footprint_ratio_percent(layout)
    ));
    out.push_str(&format!(
        "reduction_percent,{0:.3},{0:.3}\n",
        reduction_percent(layout)
    ));
    out
}
