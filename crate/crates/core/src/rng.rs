//! Counter-based random streams keyed by `(seed, replica, mode, channel)`.
//!
//! The global seed becomes the ChaCha key and the remaining coordinates are
//! mixed into the 64-bit stream id, so any stream can be reconstructed on any
//! thread without touching shared state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent sub-streams used for the same `(replica, mode)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Channel {
    /// Brownian increments of the driving noise.
    Brownian = 0,
    /// Conditional Gaussian completing a coupled OU/BM draw.
    Coupled = 1,
    /// Noise increments of the state equation.
    State = 2,
    /// Random test fields for calibration and sampling studies.
    Sampling = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
    pub mode: u64,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64, mode: u64) -> Self {
        Self { seed, replica, mode }
    }

    pub fn stream(&self, channel: Channel) -> GaussianStream {
        GaussianStream::new(*self, channel)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_id(key: StreamKey, channel: Channel) -> u64 {
    let mut h = splitmix64(key.replica);
    h = splitmix64(h ^ key.mode.rotate_left(21));
    splitmix64(h ^ (channel as u64).rotate_left(42))
}

/// A ChaCha8 stream producing standard normals and uniforms.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    pub fn new(key: StreamKey, channel: Channel) -> Self {
        let mut seed = [0u8; 32];
        let mut s = key.seed;
        for chunk in seed.chunks_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream_id(key, channel));
        Self { rng }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.normal();
        }
    }
}
