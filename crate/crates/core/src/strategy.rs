//! Tie-breaking among equal-length longest chains.
//!
//! Four strategies: choose uniformly at random, keep the first chain seen,
//! take the lexicographically smallest tip id, or consult a shared
//! pseudorandom priority (the "global coin"). The global coin realizes a
//! permutation oracle through keyed random priorities: every node ranks
//! tips by the same keyed hash of (epoch, tip id), so any two candidate
//! subsets order their shared elements identically.

use rand::Rng;
use thiserror::Error;

use crate::chain::{BlockId, Chain};
use crate::rng::splitmix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum StrategyTag {
    UniformRandom,
    FirstSeen,
    LexFirst,
    GlobalCoin,
}

impl StrategyTag {
    pub const ALL: [StrategyTag; 4] = [
        StrategyTag::UniformRandom,
        StrategyTag::FirstSeen,
        StrategyTag::LexFirst,
        StrategyTag::GlobalCoin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyTag::UniformRandom => "uniform",
            StrategyTag::FirstSeen => "first-seen",
            StrategyTag::LexFirst => "lex-first",
            StrategyTag::GlobalCoin => "global-coin",
        }
    }

    pub fn parse(s: &str) -> Option<StrategyTag> {
        match s {
            "uniform" | "uniform-random" => Some(StrategyTag::UniformRandom),
            "first-seen" | "firstseen" => Some(StrategyTag::FirstSeen),
            "lex-first" | "lexfirst" | "lexicographic" => Some(StrategyTag::LexFirst),
            "global-coin" | "globalcoin" => Some(StrategyTag::GlobalCoin),
            _ => None,
        }
    }
}

impl std::fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A tie candidate: the chain plus its arrival rank at this node for the
/// current round. The node's own tip always has rank 0; Bitcoin's rule of
/// only switching on strictly more work falls out of that.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub chain: Chain,
    pub arrival: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("empty candidate list")]
    Empty,
    #[error("candidates are not all the same length")]
    UnequalLengths,
}

/// Shared priority of a tip for the global coin at a given epoch. Lower
/// priority wins. All nodes in a run use the same key.
pub fn coin_priority(key: u64, epoch: u64, tip: BlockId) -> u64 {
    splitmix64(key ^ epoch.wrapping_mul(0x9e6c_63d0_676a_9a99) ^ tip.0)
}

/// Picks one chain among equal-length candidates and returns its index.
///
/// `epoch` feeds the global coin (one coin per round); `coin_key` is the
/// run-wide shared key. The rng is consulted only by `UniformRandom`, and
/// only when there is an actual tie.
pub fn choose_index<R: Rng>(
    strategy: StrategyTag,
    candidates: &[Candidate],
    rng: &mut R,
    epoch: u64,
    coin_key: u64,
) -> Result<usize, StrategyError> {
    let first = candidates.first().ok_or(StrategyError::Empty)?;
    if candidates.iter().any(|c| c.chain.length != first.chain.length) {
        return Err(StrategyError::UnequalLengths);
    }
    if candidates.len() == 1 {
        return Ok(0);
    }
    let key = |c: &Candidate| c.chain.tip;
    let idx = match strategy {
        StrategyTag::UniformRandom => rng.random_range(0..candidates.len()),
        StrategyTag::FirstSeen => candidates
            .iter()
            .enumerate()
            .min_by_key(|(_, c)| (c.arrival, key(c)))
            .unwrap()
            .0,
        StrategyTag::LexFirst => candidates.iter().enumerate().min_by_key(|(_, c)| key(c)).unwrap().0,
        StrategyTag::GlobalCoin => candidates
            .iter()
            .enumerate()
            .min_by_key(|(_, c)| (coin_priority(coin_key, epoch, c.chain.tip), key(c)))
            .unwrap()
            .0,
    };
    Ok(idx)
}

/// Picks one chain among equal-length candidates.
pub fn choose<R: Rng>(
    strategy: StrategyTag,
    candidates: &[Candidate],
    rng: &mut R,
    epoch: u64,
    coin_key: u64,
) -> Result<Chain, StrategyError> {
    choose_index(strategy, candidates, rng, epoch, coin_key).map(|i| candidates[i].chain)
}
