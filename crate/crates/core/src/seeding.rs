//! Deterministic sub-seed derivation.
//!
//! All randomness in the crate flows from user-supplied seeds through
//! [`mix`], so that every component (model init, split shuffles, client
//! partitioning, per-epoch batch order) draws from an independent,
//! reproducible stream. The scheme is part of the reproducibility contract:
//! identical seeds produce identical runs on any platform.

/// Domain tags keeping the derived streams disjoint.
pub mod tags {
    pub const MODEL_INIT: u64 = 0x4d4f44454c;
    pub const PARTITION: u64 = 0x50415254;
    pub const CLIENT: u64 = 0x434c49454e54;
    pub const EPOCH: u64 = 0x45504f4348;
    pub const SPLIT_INLIERS: u64 = 0x5350_4c49_5449;
    pub const SPLIT_ANOMALIES: u64 = 0x5350_4c49_5441;
    pub const SUBSAMPLE: u64 = 0x535542;
}

/// splitmix64 finalizer; good avalanche, trivially portable.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mix an ordered list of components into one sub-seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x243f6a8885a308d3u64; // pi
    for &p in parts {
        acc = splitmix(acc ^ splitmix(p));
    }
    acc
}
