//! Print the analytical cache-memory comparison for the frame-stack layout
//! (28224-byte observations) and a couple of smaller layouts.
//!
//! Run with: cargo run --example memory_table

use replay_cache::memmodel::{self, MemoryLayout};

fn main() {
    let frame_stack = MemoryLayout::frame_stack();
    print!("{}", memmodel::table(&frame_stack, 80_000));

    println!();
    println!("same layout, smaller caches:");
    for s in [1_000u64, 10_000, 80_000] {
        let phys = memmodel::cache_bytes(s, &frame_stack, replay_cache::Backend::Physical);
        let virt = memmodel::cache_bytes(s, &frame_stack, replay_cache::Backend::Virtual);
        println!(
            "  S = {s:>6}: physical {:>10}, virtual {:>8}",
            memmodel::format_megabytes(phys),
            memmodel::format_megabytes(virt)
        );
    }

    println!();
    println!("a 64-byte observation layout for scale:");
    let small = MemoryLayout::new(64, 1, 4, 4).expect("valid layout");
    print!("{}", memmodel::table(&small, 80_000));
}
