//! Block tree, longest-chain selection, and the two correctness metrics:
//! maximal common prefix and maximal inconsistency.
//!
//! Blocks carry no payload or nonce; mining is modeled upstream as a
//! Bernoulli event per node per round, so a block is just its link
//! structure plus bookkeeping (miner, round, corruption status, the round
//! of the embedded delay-function output). Depth is cached at insert time
//! so prefix queries cost O(total inconsistency), not O(chain length).

use std::fmt;

use thiserror::Error;

use crate::rng::splitmix64;

/// Opaque block identifier. Values are minted pseudorandomly per run (see
/// [`IdMinter`]) so that lexicographic order over ids carries no creation
/// order information — that is what makes id-grinding a meaningful attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct BlockId(pub u64);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Miner of a block: a node index, or the genesis sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Miner {
    Genesis,
    Node(u32),
}

impl fmt::Display for Miner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Miner::Genesis => write!(f, "genesis"),
            Miner::Node(i) => write!(f, "{i}"),
        }
    }
}

/// Dense in-store handle. Public API speaks [`BlockId`]; hot paths inside
/// the simulator resolve ids to slots once and then walk the arena.
pub type Slot = u32;

const NO_SLOT: Slot = Slot::MAX;

#[derive(Debug, Clone)]
pub struct Block {
    pub id: BlockId,
    parent: Slot,
    pub miner: Miner,
    pub round: u32,
    pub honest: bool,
    /// Round of the delay-function output embedded in this block (0 for genesis).
    pub vdf_round: u32,
    /// Distance to genesis. Genesis has depth 0.
    pub depth: u32,
}

/// A chain is identified by its tip; two chains with equal tips are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chain {
    pub tip: BlockId,
    /// Blocks from genesis to tip inclusive.
    pub length: u32,
}

/// Slot-level chain announcement used on the simulator hot path. Broadcast
/// messages are tip announcements; receivers resolve ancestry from the
/// shared store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainRef {
    pub slot: Slot,
    pub len: u32,
}

/// Maximal common prefix and maximal inconsistency of a set of chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PrefixReport {
    /// |P_C|: number of blocks in the longest common prefix (genesis counts).
    pub common_prefix_len: u32,
    /// I_C: max over the chains of (length - common_prefix_len).
    pub max_inconsistency: u32,
    /// Last block of the common prefix.
    pub prefix_tip: BlockId,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("unknown block id {0}")]
    UnknownBlock(BlockId),
    #[error("round {round} does not exceed parent round {parent_round}")]
    NonIncreasingRound { round: u32, parent_round: u32 },
    #[error("duplicate block id {0}")]
    DuplicateId(BlockId),
    #[error("empty tip set")]
    EmptyTips,
}

/// Mints unique pseudorandom block ids. The counter makes every id
/// distinct within a run; the splitmix finalizer scrambles it so ids are
/// uniform-looking. Grinding draws several candidates and keeps the
/// smallest, which consumes counters but never repeats one.
#[derive(Debug, Clone)]
pub struct IdMinter {
    key: u64,
    counter: u64,
}

impl IdMinter {
    pub fn new(key: u64) -> Self {
        IdMinter { key, counter: 0 }
    }

    pub fn mint(&mut self) -> BlockId {
        let c = self.counter;
        self.counter += 1;
        BlockId(splitmix64(self.key ^ c.wrapping_mul(0x2545_f491_4f6c_dd1d)))
    }

    /// Mints `draws` candidates and returns the lexicographically smallest.
    pub fn mint_ground(&mut self, draws: u32) -> BlockId {
        let mut best = self.mint();
        for _ in 1..draws.max(1) {
            let c = self.mint();
            if c < best {
                best = c;
            }
        }
        best
    }
}

/// Ids are already splitmix-mixed, so the id map hashes by identity.
#[derive(Default, Clone)]
pub struct IdHasher(u64);

impl std::hash::Hasher for IdHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, _bytes: &[u8]) {
        unreachable!("BlockId hashes via write_u64");
    }
    fn write_u64(&mut self, i: u64) {
        self.0 = i;
    }
}

type IdMap = std::collections::HashMap<BlockId, Slot, std::hash::BuildHasherDefault<IdHasher>>;

/// Append-only block tree rooted at genesis.
///
/// The children index is kept as first-child/next-sibling links so inserts
/// stay allocation-free.
pub struct BlockStore {
    blocks: Vec<Block>,
    index: IdMap,
    first_child: Vec<Slot>,
    next_sibling: Vec<Slot>,
}

impl BlockStore {
    /// Creates a store holding only the genesis block.
    pub fn new(minter: &mut IdMinter) -> Self {
        let genesis = Block {
            id: minter.mint(),
            parent: NO_SLOT,
            miner: Miner::Genesis,
            round: 0,
            honest: true,
            vdf_round: 0,
            depth: 0,
        };
        let mut index = IdMap::default();
        index.insert(genesis.id, 0);
        BlockStore {
            blocks: vec![genesis],
            index,
            first_child: vec![NO_SLOT],
            next_sibling: vec![NO_SLOT],
        }
    }

    pub fn with_capacity(minter: &mut IdMinter, cap: usize) -> Self {
        let mut store = Self::new(minter);
        store.blocks.reserve(cap);
        store.first_child.reserve(cap);
        store.next_sibling.reserve(cap);
        store.index.reserve(cap);
        store
    }

    pub fn genesis_slot(&self) -> Slot {
        0
    }

    pub fn genesis_id(&self) -> BlockId {
        self.blocks[0].id
    }

    /// Number of blocks in the store (always at least 1: genesis).
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn slot_of(&self, id: BlockId) -> Result<Slot, ChainError> {
        self.index.get(&id).copied().ok_or(ChainError::UnknownBlock(id))
    }

    pub fn block(&self, slot: Slot) -> &Block {
        &self.blocks[slot as usize]
    }

    pub fn get(&self, id: BlockId) -> Result<&Block, ChainError> {
        Ok(self.block(self.slot_of(id)?))
    }

    pub fn parent_slot(&self, slot: Slot) -> Option<Slot> {
        let p = self.blocks[slot as usize].parent;
        (p != NO_SLOT).then_some(p)
    }

    pub fn parent_id(&self, id: BlockId) -> Result<Option<BlockId>, ChainError> {
        let slot = self.slot_of(id)?;
        Ok(self.parent_slot(slot).map(|p| self.block(p).id))
    }

    pub fn chain(&self, slot: Slot) -> Chain {
        let b = self.block(slot);
        Chain { tip: b.id, length: b.depth + 1 }
    }

    pub fn children(&self, slot: Slot) -> impl Iterator<Item = Slot> + '_ {
        let mut cur = self.first_child[slot as usize];
        std::iter::from_fn(move || {
            if cur == NO_SLOT {
                None
            } else {
                let out = cur;
                cur = self.next_sibling[cur as usize];
                Some(out)
            }
        })
    }

    /// Appends a block under `parent`. Rounds must strictly increase along
    /// every chain; same-round extension is rejected.
    pub fn extend(
        &mut self,
        parent: BlockId,
        id: BlockId,
        miner: u32,
        round: u32,
        honest: bool,
        vdf_round: u32,
    ) -> Result<BlockId, ChainError> {
        let parent_slot = self.slot_of(parent)?;
        self.extend_slot(parent_slot, id, miner, round, honest, vdf_round)
            .map(|slot| self.block(slot).id)
    }

    /// Slot-level extend used by the simulator hot path.
    pub fn extend_slot(
        &mut self,
        parent: Slot,
        id: BlockId,
        miner: u32,
        round: u32,
        honest: bool,
        vdf_round: u32,
    ) -> Result<Slot, ChainError> {
        let parent_block = &self.blocks[parent as usize];
        if round <= parent_block.round {
            return Err(ChainError::NonIncreasingRound {
                round,
                parent_round: parent_block.round,
            });
        }
        let depth = parent_block.depth + 1;
        let slot = self.blocks.len() as Slot;
        if self.index.insert(id, slot).is_some() {
            return Err(ChainError::DuplicateId(id));
        }
        self.blocks.push(Block {
            id,
            parent,
            miner: Miner::Node(miner),
            round,
            honest,
            vdf_round,
            depth,
        });
        self.next_sibling.push(self.first_child[parent as usize]);
        self.first_child[parent as usize] = slot;
        self.first_child.push(NO_SLOT);
        Ok(slot)
    }

    /// Maximal common prefix of the given tips, per the definition
    /// I_C = max_i |C~_i - P_C|. Duplicated tips are harmless.
    pub fn common_prefix(&self, tips: &[BlockId]) -> Result<PrefixReport, ChainError> {
        if tips.is_empty() {
            return Err(ChainError::EmptyTips);
        }
        let mut slots = Vec::with_capacity(tips.len());
        for &t in tips {
            slots.push(self.slot_of(t)?);
        }
        Ok(self.common_prefix_slots(&slots))
    }

    pub fn common_prefix_slots(&self, tips: &[Slot]) -> PrefixReport {
        assert!(!tips.is_empty(), "common prefix of an empty tip set");
        let max_depth = tips.iter().map(|&s| self.block(s).depth).max().unwrap();
        let min_depth = tips.iter().map(|&s| self.block(s).depth).min().unwrap();

        // Lift every walker to the minimum depth, then walk all in lockstep
        // until they agree.
        let mut cur: Vec<Slot> = tips.to_vec();
        for c in cur.iter_mut() {
            while self.block(*c).depth > min_depth {
                *c = self.blocks[*c as usize].parent;
            }
        }
        let mut depth = min_depth;
        while !cur.iter().all(|&s| s == cur[0]) {
            for c in cur.iter_mut() {
                *c = self.blocks[*c as usize].parent;
            }
            depth -= 1;
        }
        let prefix = cur[0];
        PrefixReport {
            common_prefix_len: depth + 1,
            max_inconsistency: max_depth - depth,
            prefix_tip: self.block(prefix).id,
        }
    }

    /// Subset of `candidates` achieving maximal length. Tie-breaking is
    /// deliberately not done here; that belongs to the strategies.
    pub fn longest_tips(&self, candidates: &[BlockId]) -> Result<Vec<BlockId>, ChainError> {
        if candidates.is_empty() {
            return Err(ChainError::EmptyTips);
        }
        let mut best = 0u32;
        let mut out = Vec::new();
        for &c in candidates {
            let d = self.get(c)?.depth;
            if d > best {
                best = d;
                out.clear();
            }
            if d == best {
                out.push(c);
            }
        }
        Ok(out)
    }

    /// True iff `ancestor` lies on the path from `descendant` to genesis
    /// (or equals it).
    pub fn is_ancestor(&self, ancestor: Slot, descendant: Slot) -> bool {
        let target_depth = self.block(ancestor).depth;
        let mut cur = descendant;
        while self.block(cur).depth > target_depth {
            cur = self.blocks[cur as usize].parent;
        }
        cur == ancestor
    }

    /// Fraction of non-genesis blocks in `genesis..=prefix_tip` mined by
    /// honest nodes. A genesis-only prefix reports 1.0 (nothing corrupt in it).
    pub fn honest_prefix_fraction(&self, prefix_tip: BlockId) -> Result<f64, ChainError> {
        let mut cur = self.slot_of(prefix_tip)?;
        let mut honest = 0u64;
        let mut total = 0u64;
        while let Some(parent) = self.parent_slot(cur) {
            total += 1;
            if self.block(cur).honest {
                honest += 1;
            }
            cur = parent;
        }
        if total == 0 {
            Ok(1.0)
        } else {
            Ok(honest as f64 / total as f64)
        }
    }

    /// Miners along the chain from `tip` back to genesis, tip first.
    pub fn miner_path(&self, tip: Slot) -> Vec<(Miner, u32)> {
        let mut out = Vec::with_capacity(self.block(tip).depth as usize + 1);
        let mut cur = tip;
        loop {
            let b = self.block(cur);
            out.push((b.miner, b.round));
            match self.parent_slot(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
        out
    }

    /// Graphviz DOT rendering of the whole tree, one node per block labeled
    /// `miner@round`, corrupt miners filled differently.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "digraph blocktree {{").unwrap();
        writeln!(out, "  rankdir=LR;").unwrap();
        writeln!(out, "  node [shape=box, style=filled];").unwrap();
        for (i, b) in self.blocks.iter().enumerate() {
            let (label, color) = match b.miner {
                Miner::Genesis => ("genesis".to_string(), "gray80"),
                Miner::Node(m) => (
                    format!("{m}@{}", b.round),
                    if b.honest { "lightblue" } else { "lightcoral" },
                ),
            };
            writeln!(out, "  b{i} [label=\"{label}\", fillcolor={color}];").unwrap();
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.parent != NO_SLOT {
                writeln!(out, "  b{} -> b{i};", b.parent).unwrap();
            }
        }
        writeln!(out, "}}").unwrap();
        out
    }
}
