//! Hierarchical seeding.
//!
//! Every layer iteration gets its own child stream derived from its parent
//! seed and its index, so results never depend on the order in which worker
//! threads pick up work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags for the children of one topology seed.
pub mod tag {
    pub const TOPOLOGY: u64 = 0x746f_706f;
    pub const SHADOWING: u64 = 0x7368_6164;
    pub const ROLES: u64 = 0x726f_6c65;
    pub const SLOTS: u64 = 0x736c_6f74;
    pub const TRIAL: u64 = 0x7472_6961;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives the seed of child `index` of stream `tag` under `parent`.
pub fn child(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ splitmix64(tag)).wrapping_add(index))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
