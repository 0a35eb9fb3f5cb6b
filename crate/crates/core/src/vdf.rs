//! Simulated delay-function sequence and the chain validation that
//! enforces the one-block-per-round rule.
//!
//! The delay function is a clock gate, not a computation: the output for
//! round j simply does not exist until the simulation clock reaches j,
//! and tokens are unique per round. That is the only property any of the
//! checked claims depend on.
//!
//! Validation of a chain at round t accepts iff
//!   (a) the embedded output rounds strictly increase along the chain,
//!   (b) the k-th block's output round is at least k-1,
//!   (c) no output round exceeds t-1,
//!   (d) no output round repeats (subsumed by (a); reported separately).
//! Together these pigeonhole any accepted chain to length <= t+1.

use thiserror::Error;

use crate::chain::{BlockStore, ChainError, Slot};
use crate::rng::splitmix64;

/// Opaque delay-function token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VdfToken(pub u64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VdfError {
    #[error("output for round {requested} does not exist yet (clock at {clock})")]
    FutureOutput { requested: u32, clock: u32 },
}

/// The released output sequence y_0, y_1, ..., y_j. `current_round` is j:
/// outputs for later rounds cannot be queried, which is the whole
/// sequentiality model.
#[derive(Debug, Clone)]
pub struct VdfChainState {
    outputs: Vec<VdfToken>,
}

impl VdfChainState {
    /// Round 0 output is computed from input 0 and is seed-independent.
    pub fn new() -> Self {
        VdfChainState { outputs: vec![VdfToken(splitmix64(0))] }
    }

    pub fn current_round(&self) -> u32 {
        (self.outputs.len() - 1) as u32
    }

    /// Releases the next output: y_{j+1} binds (y_j, j+1).
    pub fn advance(&mut self) {
        let j = self.outputs.len() as u64;
        let prev = self.outputs.last().unwrap().0;
        self.outputs.push(VdfToken(splitmix64(prev ^ j.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7))));
    }

    pub fn advance_to(&mut self, round: u32) {
        while self.current_round() < round {
            self.advance();
        }
    }

    /// The unique token for `round`, if it has been released.
    pub fn output(&self, round: u32) -> Result<VdfToken, VdfError> {
        self.outputs
            .get(round as usize)
            .copied()
            .ok_or(VdfError::FutureOutput { requested: round, clock: self.current_round() })
    }
}

impl Default for VdfChainState {
    fn default() -> Self {
        Self::new()
    }
}

/// Why a chain failed validation. Carries the offending block position
/// (1-based index of the first non-genesis block).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Output rounds decrease somewhere along the chain.
    DecreasingVdfRound { position: u32 },
    /// Two blocks embed the output of the same round.
    DuplicateVdfRound { position: u32 },
    /// The k-th block's output round is below k-1.
    PositionBound { position: u32 },
    /// Some block embeds an output from the current round or later.
    FutureVdfRound { position: u32, vdf_round: u32 },
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::DecreasingVdfRound { position } => {
                write!(f, "decreasing vdf round at block {position}")
            }
            RejectReason::DuplicateVdfRound { position } => {
                write!(f, "duplicate vdf round at block {position}")
            }
            RejectReason::PositionBound { position } => {
                write!(f, "vdf round below position bound at block {position}")
            }
            RejectReason::FutureVdfRound { position, vdf_round } => {
                write!(f, "future vdf round {vdf_round} at block {position}")
            }
        }
    }
}

/// Intrinsic (round-independent) validity of a block's chain prefix,
/// cached per slot so validating a tip is O(new blocks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Intrinsic {
    Ok,
    Bad(RejectReason),
}

/// Chain validator with a per-slot cache. Owned by whoever owns the store;
/// `validate` must be called with slots from that store only.
#[derive(Debug, Default)]
pub struct ChainValidator {
    cache: Vec<Option<Intrinsic>>,
}

impl ChainValidator {
    pub fn new() -> Self {
        ChainValidator { cache: Vec::new() }
    }

    fn intrinsic(&mut self, store: &BlockStore, slot: Slot) -> Intrinsic {
        if self.cache.len() < store.len() {
            self.cache.resize(store.len(), None);
        }
        if let Some(v) = self.cache[slot as usize] {
            return v;
        }
        // Walk down to the deepest uncached ancestor, then fill upward.
        let mut stack = vec![slot];
        let mut base = Intrinsic::Ok;
        let mut cur = slot;
        while let Some(parent) = store.parent_slot(cur) {
            match self.cache[parent as usize] {
                Some(v) => {
                    base = v;
                    break;
                }
                None => {
                    stack.push(parent);
                    cur = parent;
                }
            }
        }
        while let Some(s) = stack.pop() {
            let verdict = match base {
                Intrinsic::Bad(r) => Intrinsic::Bad(r),
                Intrinsic::Ok => {
                    let b = store.block(s);
                    if let Some(parent) = store.parent_slot(s) {
                        let pb = store.block(parent);
                        let position = b.depth;
                        if store.parent_slot(parent).is_some() && b.vdf_round == pb.vdf_round {
                            Intrinsic::Bad(RejectReason::DuplicateVdfRound { position })
                        } else if store.parent_slot(parent).is_some() && b.vdf_round < pb.vdf_round
                        {
                            Intrinsic::Bad(RejectReason::DecreasingVdfRound { position })
                        } else if b.vdf_round + 1 < position {
                            Intrinsic::Bad(RejectReason::PositionBound { position })
                        } else {
                            Intrinsic::Ok
                        }
                    } else {
                        Intrinsic::Ok // genesis
                    }
                }
            };
            self.cache[s as usize] = Some(verdict);
            base = verdict;
        }
        base
    }

    /// Validates the chain ending at `slot` as seen at `round`. Accepts iff
    /// every prefix condition holds and no embedded output is from the
    /// current round or later.
    pub fn validate_slot(
        &mut self,
        store: &BlockStore,
        slot: Slot,
        round: u32,
    ) -> Result<(), RejectReason> {
        match self.intrinsic(store, slot) {
            Intrinsic::Bad(r) => Err(r),
            Intrinsic::Ok => {
                let b = store.block(slot);
                // Output rounds increase along an intrinsically valid chain,
                // so the tip carries the maximum.
                if b.depth > 0 && b.vdf_round >= round {
                    Err(RejectReason::FutureVdfRound {
                        position: b.depth,
                        vdf_round: b.vdf_round,
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Id-level entry point mirroring the store API.
    pub fn validate(
        &mut self,
        store: &BlockStore,
        tip: crate::chain::BlockId,
        round: u32,
    ) -> Result<Result<(), RejectReason>, ChainError> {
        let slot = store.slot_of(tip)?;
        Ok(self.validate_slot(store, slot, round))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{BlockStore, IdMinter};

    fn setup() -> (BlockStore, IdMinter, ChainValidator) {
        let mut m = IdMinter::new(1);
        let s = BlockStore::new(&mut m);
        (s, m, ChainValidator::new())
    }

    #[test]
    fn outputs_are_clock_gated_and_stable() {
        let mut st = VdfChainState::new();
        st.advance_to(5);
        let y3 = st.output(3).unwrap();
        assert_eq!(st.output(3).unwrap(), y3);
        assert_eq!(
            st.output(6),
            Err(VdfError::FutureOutput { requested: 6, clock: 5 })
        );
        // y0 exists from the start
        let fresh = VdfChainState::new();
        assert!(fresh.output(0).is_ok());
        // tokens are distinct round to round
        let all: Vec<u64> = (0..=5).map(|r| st.output(r).unwrap().0).collect();
        let uniq: std::collections::HashSet<u64> = all.iter().copied().collect();
        assert_eq!(uniq.len(), all.len());
    }

    /// A chain built the honest way (block k mined at round k with the
    /// previous round's output) is always accepted.
    #[test]
    fn honest_chain_accepted() {
        let (mut s, mut m, mut v) = setup();
        let mut tip = s.genesis_id();
        for r in 1..=20u32 {
            tip = s.extend(tip, m.mint(), 0, r, true, r - 1).unwrap();
            assert_eq!(v.validate(&s, tip, r).unwrap(), Ok(()));
        }
        // prefix of an accepted chain stays accepted at the same round
        let mut cur = tip;
        loop {
            assert_eq!(v.validate(&s, cur, 20).unwrap(), Ok(()));
            match s.parent_id(cur).unwrap() {
                Some(p) => cur = p,
                None => break,
            }
        }
    }

    #[test]
    fn duplicate_vdf_round_rejected() {
        let (mut s, mut m, mut v) = setup();
        let g = s.genesis_id();
        let b1 = s.extend(g, m.mint(), 0, 1, false, 0).unwrap();
        let b2 = s.extend(b1, m.mint(), 0, 2, false, 1).unwrap();
        let b3 = s.extend(b2, m.mint(), 0, 3, false, 2).unwrap();
        let b4 = s.extend(b3, m.mint(), 0, 4, false, 2).unwrap(); // repeats round 2
        assert_eq!(
            v.validate(&s, b4, 10).unwrap(),
            Err(RejectReason::DuplicateVdfRound { position: 4 })
        );
        // the prefix before the duplicate is still fine
        assert_eq!(v.validate(&s, b3, 10).unwrap(), Ok(()));
    }

    #[test]
    fn decreasing_vdf_round_rejected() {
        let (mut s, mut m, mut v) = setup();
        let g = s.genesis_id();
        let b1 = s.extend(g, m.mint(), 0, 1, false, 3).unwrap();
        let b2 = s.extend(b1, m.mint(), 0, 2, false, 1).unwrap();
        assert_eq!(
            v.validate(&s, b2, 10).unwrap(),
            Err(RejectReason::DecreasingVdfRound { position: 2 })
        );
    }

    #[test]
    fn future_output_rejected_until_clock_catches_up() {
        let (mut s, mut m, mut v) = setup();
        let g = s.genesis_id();
        let b1 = s.extend(g, m.mint(), 0, 1, false, 4).unwrap();
        assert_eq!(
            v.validate(&s, b1, 3).unwrap(),
            Err(RejectReason::FutureVdfRound { position: 1, vdf_round: 4 })
        );
        assert_eq!(v.validate(&s, b1, 5).unwrap(), Ok(()));
    }

    /// Pigeonhole: any chain of length round+2 is rejected. Build the best
    /// possible cheat (dense strictly increasing rounds from 0) and check
    /// it still fails at the short clock.
    #[test]
    fn overlong_chain_rejected() {
        let (mut s, mut m, mut v) = setup();
        let round = 6u32;
        let mut tip = s.genesis_id();
        for k in 1..=round + 1 {
            tip = s.extend(tip, m.mint(), 0, k, false, k - 1).unwrap();
        }
        // length is round+2 including genesis; the tip embeds output round
        // `round`, which does not exist before round+1.
        assert!(matches!(
            v.validate(&s, tip, round).unwrap(),
            Err(RejectReason::FutureVdfRound { .. })
        ));
        assert_eq!(v.validate(&s, tip, round + 1).unwrap(), Ok(()));
    }

    /// Strictly increasing non-negative output rounds already imply
    /// r_k >= k-1, so the position bound never fires first on a chain that
    /// passed the increase checks; reusing an output both duplicates and
    /// undercuts the bound, and the duplicate is reported.
    #[test]
    fn position_bound_is_covered_by_increase_checks() {
        let (mut s, mut m, mut v) = setup();
        let g = s.genesis_id();
        let b1 = s.extend(g, m.mint(), 0, 1, false, 0).unwrap();
        let b2 = s.extend(b1, m.mint(), 0, 2, false, 0).unwrap();
        assert_eq!(
            v.validate(&s, b2, 10).unwrap(),
            Err(RejectReason::DuplicateVdfRound { position: 2 })
        );
    }
}
