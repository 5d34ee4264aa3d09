//! 64-bit FNV-1a hashing.
//!
//! Used wherever the crate needs a content hash that is stable across
//! platforms and releases: document checksums, feature hashing, cache keys,
//! and index file checksums. `std::hash` makes no such stability promise.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Hashes `bytes` with 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &byte in bytes {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}
