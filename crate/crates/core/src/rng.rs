//! Counter-based random streams.
//!
//! Every random draw in a simulation is addressed by `(seed, StreamId)`, and the
//! stream's generator is derived from that key alone. No generator state is
//! shared between clients, rounds or threads, so results cannot depend on the
//! order in which parallel client work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::vector::Vector;

/// What a stream is used for. Part of the key, so two purposes at the same
/// `(client, round, step)` never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Purpose {
    ClientSample = 1,
    RefreshSample = 2,
    GradNoise = 3,
    RefreshNoise = 4,
    WarmStartNoise = 5,
    ValueNoise = 6,
    SelectionSample = 7,
    ProblemGen = 8,
    DataGen = 9,
    InitPoint = 10,
    Probe = 11,
    Test = 12,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub client: u32,
    pub round: u32,
    pub step: u32,
    pub purpose: Purpose,
    /// Distinguishes the phases of a chained run and the repeats of a sweep.
    pub phase: u32,
}

impl StreamId {
    pub fn new(purpose: Purpose) -> Self {
        StreamId {
            client: 0,
            round: 0,
            step: 0,
            purpose,
            phase: 0,
        }
    }

    pub fn client(mut self, client: usize) -> Self {
        self.client = client as u32;
        self
    }

    pub fn round(mut self, round: usize) -> Self {
        self.round = round as u32;
        self
    }

    pub fn step(mut self, step: usize) -> Self {
        self.step = step as u32;
        self
    }

    pub fn phase(mut self, phase: u32) -> Self {
        self.phase = phase;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub id: StreamId,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        RngStream { seed, id }
    }

    fn key(&self) -> [u8; 32] {
        let words = [
            self.seed,
            self.id.purpose as u64,
            self.id.client as u64,
            self.id.round as u64,
            self.id.step as u64,
            self.id.phase as u64,
        ];
        let mut state = 0x6A09_E667_F3BC_C908u64;
        for w in words {
            state ^= w;
            splitmix64(&mut state);
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        key
    }

    /// A fresh generator positioned at draw index 0 of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }

    /// `n` i.i.d. standard normal draws.
    pub fn gaussian(&self, n: usize) -> Vector {
        let mut rng = self.rng();
        Vector::new((0..n).map(|_| rng.sample(StandardNormal)).collect())
    }

    /// Uniform draws in `[0, 1)`.
    pub fn uniform(&self, n: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..n).map(|_| rng.random::<f64>()).collect()
    }
}

/// Convenience for [`RngStream::gaussian`].
pub fn gaussian(stream: RngStream, n: usize) -> Vector {
    stream.gaussian(n)
}
