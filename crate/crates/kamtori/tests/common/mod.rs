#![allow(dead_code)]

use kamtori::series::{random_series, random_sigma_series};
use kamtori::{Series, Space};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN: f64 = 1.618_033_988_749_895;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn series(seed: u64, sp: Space, deg: u32, terms: usize) -> Series {
    random_series(sp, deg, terms, &mut rng(seed))
}

pub fn sigma_series(seed: u64, sp: Space, deg: u32, terms: usize) -> Series {
    random_sigma_series(sp, deg, terms, &mut rng(seed))
}

/// Largest coefficient difference relative to the larger of the two sizes.
pub fn rel_diff(a: &Series, b: &Series) -> f64 {
    a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(1.0)
}
