//! Monte Carlo samplers: heat-bath spins, the Edwards–Sokal random-cluster
//! chain, uniform even subgraphs and the sech augmentation to current traces.

mod correlation;
pub mod dump;
mod fk;
mod spin;
mod ueg;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SpinConfig;

pub use correlation::estimate_truncated_correlation;
pub use fk::{
    bonds_given_spins, default_burn_in, sample_current_trace, sample_fk, CoupledTrace, FkChain,
    TraceChain,
};
pub use spin::{heatbath_detailed_balance_deviation, heatbath_probability, spin_heatbath_sweep};
pub use ueg::{sech_augment, uniform_even_subgraph, UegSampler};

/// The generator used by every sampler.
pub type SimRng = ChaCha8Rng;

/// A reproducible random stream: ChaCha8 keyed by `seed`, on stream `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        RngStream { seed, index }
    }

    pub fn rng(&self) -> SimRng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.index);
        r
    }

    /// Child stream `k`, keyed by a hash of this stream's `(seed, index)`.
    pub fn substream(&self, k: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.index.wrapping_add(0x5851_f42d_4c95_7f2d))),
            index: k,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Spin state of a Markov chain with its counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub spins: SpinConfig,
    pub sweeps: u64,
    /// Single-site updates performed.
    pub updates: u64,
    /// Single-site updates that changed the spin.
    pub flips: u64,
}

impl ChainState {
    pub fn new(spins: SpinConfig) -> Self {
        ChainState {
            spins,
            sweeps: 0,
            updates: 0,
            flips: 0,
        }
    }

    pub fn all_plus(n: usize) -> Self {
        Self::new(SpinConfig::all_plus(n))
    }

    pub fn flip_rate(&self) -> f64 {
        if self.updates == 0 {
            0.0
        } else {
            self.flips as f64 / self.updates as f64
        }
    }
}
