//! Seed derivation and the per-run random streams.
//!
//! A run owns three independent named streams so that changing the
//! symmetry-breaking strategy or the adversary never perturbs the mining
//! realization. This is what lets the "mine first, attach later" auxiliary
//! process be tested literally: two runs with the same seed produce the
//! same block layers no matter how attachment choices are made.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer. Bijective on u64, so distinct inputs give
/// distinct outputs; used both for seed mixing and block id minting.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for replica `replica` of sweep cell `cell` from a base
/// seed. Cells and replicas can be rerun independently because the mix is
/// counter-based, not sequential.
pub fn replica_seed(base: u64, cell: u64, replica: u64) -> u64 {
    let a = splitmix64(base ^ cell.wrapping_mul(0xa076_1d64_78bd_642f));
    splitmix64(a ^ replica.wrapping_mul(0xe703_7ed1_a0b4_28db))
}

/// Named stream ids. Streams of one ChaCha seed never overlap.
const STREAM_MINING: u64 = 1;
const STREAM_STRATEGY: u64 = 2;
const STREAM_ADVERSARY: u64 = 3;

/// The three independent random streams of a single run.
pub struct RunStreams {
    pub mining: ChaCha8Rng,
    pub strategy: ChaCha8Rng,
    pub adversary: ChaCha8Rng,
}

impl RunStreams {
    pub fn new(seed: u64) -> Self {
        let mk = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        RunStreams {
            mining: mk(STREAM_MINING),
            strategy: mk(STREAM_STRATEGY),
            adversary: mk(STREAM_ADVERSARY),
        }
    }
}

/// Derives the shared global-coin key for a run. Every node evaluates the
/// same keyed priority function, which is what makes the coin "global".
pub fn global_coin_key(seed: u64) -> u64 {
    splitmix64(seed ^ 0x67e5_5044_10b9_2a4b)
}

/// Derives the block id minting key for a run.
pub fn id_mint_key(seed: u64) -> u64 {
    splitmix64(seed ^ 0x3c79_ac49_2ba7_b653)
}
