//! Labelled random streams.
//!
//! Every random quantity in the engine is drawn from a ChaCha8 generator
//! keyed by the user seed plus a stream id built from a kind tag and an
//! index. Two models that ask for the same (seed, kind, index) see the same
//! numbers, no matter in which order or in which call they are drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    FeatureWindow,
    EnhancementGroup,
    Connection,
    Split,
    Trial,
    Fixture,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::FeatureWindow => 0x4645,
            StreamKind::EnhancementGroup => 0x454e,
            StreamKind::Connection => 0x434e,
            StreamKind::Split => 0x5350,
            StreamKind::Trial => 0x5452,
            StreamKind::Fixture => 0x4658,
        }
    }
}

pub fn stream(seed: u64, kind: StreamKind, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind.tag() << 48) ^ index);
    rng
}

/// Fill a `rows x cols` block (row-major draw order) and a bias row with
/// samples from `U[-1, 1]`.
pub fn uniform_block(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let weights = (0..rows * cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let bias = (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
    (weights, bias)
}
