//! Seed-deterministic simulator and analysis toolkit for longest-chain
//! consensus under arbitrary per-round mining probability p.
//!
//! The crate has three layers:
//!
//! - the protocol itself: a block tree ([`chain`]), pluggable tie-breaking
//!   ([`strategy`]), a synchronous-round engine ([`engine`]), adversary
//!   strategies ([`adversary`]) and the delay-function gate that limits
//!   every chain to one block per round ([`vdf`]);
//! - an independent coalescing-random-walk oracle ([`walks`]) with exact
//!   small-system absorption chains, used as ground truth for the
//!   protocol's inconsistency distribution;
//! - closed-form bound calculators and the counting processes N(t) and
//!   J(m) that drive the adversarial analysis ([`bounds`]).
//!
//! Everything downstream of a `(config, seed)` pair is bit-deterministic.

pub mod adversary;
pub mod bounds;
pub mod chain;
pub mod engine;
pub mod rng;
pub mod strategy;
pub mod vdf;
pub mod walks;

pub use adversary::AdversaryTag;
pub use chain::{Block, BlockId, BlockStore, Chain, ChainRef, IdMinter, Miner, PrefixReport};
pub use engine::{run, run_with_mode, ProcessTrace, RecordMode, RoundStats, SimConfig, WorldState};
pub use strategy::StrategyTag;
