//! Reproducible random streams.
//!
//! Every consumer of randomness takes an explicit stream derived from a
//! `(seed, stream_id)` pair, so parallel workers and repeated runs draw
//! identical numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Tensor;

pub type RngStream = ChaCha8Rng;

/// Opens stream `stream_id` of the generator seeded with `seed`.
pub fn seeded_rng(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Serializable position of a stream, for checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCursor {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

impl StreamCursor {
    pub fn capture(seed: u64, rng: &RngStream) -> Self {
        StreamCursor {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> RngStream {
        let mut rng = seeded_rng(self.seed, self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

pub fn standard_normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_tensor(rng: &mut RngStream, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    Tensor::matrix(rows, cols, data)
}

pub fn uniform_tensor(rng: &mut RngStream, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..=hi)).collect();
    Tensor::matrix(rows, cols, data)
}
