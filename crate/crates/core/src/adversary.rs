//! Adversary strategies: withholding, selective release, id grinding, and
//! first-seen splitting.
//!
//! The adversary is rushing: it sees the current round's honest broadcasts
//! before it attaches its own blocks or plans releases, and its deliveries
//! are ranked ahead of honest messages in every inbox it touches.
//!
//! Without the delay-function gate the corrupt coalition can chain several
//! of its per-round mining successes onto one tip inside a single round.
//! Those blocks get synthetic round labels continuing from the parent
//! (labels may run ahead of the wall clock; rounds along a chain must
//! strictly increase and nothing validates labels in ungated runs). With
//! the gate on, one block per round is all that survives validation, so
//! the adversary does not bother placing more.

use rand::Rng;

use crate::chain::{BlockStore, ChainRef, IdMinter, Slot};

/// Candidate id draws per grinding attempt. Grinding models a bounded
/// nonce search: the adversary keeps the smallest of this many ids.
pub const GRIND_DRAWS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum AdversaryTag {
    None,
    PrivateChain,
    SelectiveRelease,
    LexGrind,
    FirstSeenSplit,
}

impl AdversaryTag {
    pub const ALL: [AdversaryTag; 5] = [
        AdversaryTag::None,
        AdversaryTag::PrivateChain,
        AdversaryTag::SelectiveRelease,
        AdversaryTag::LexGrind,
        AdversaryTag::FirstSeenSplit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryTag::None => "none",
            AdversaryTag::PrivateChain => "private-chain",
            AdversaryTag::SelectiveRelease => "selective-release",
            AdversaryTag::LexGrind => "lex-grind",
            AdversaryTag::FirstSeenSplit => "first-seen-split",
        }
    }

    pub fn parse(s: &str) -> Option<AdversaryTag> {
        match s {
            "none" => Some(AdversaryTag::None),
            "private-chain" | "private" => Some(AdversaryTag::PrivateChain),
            "selective-release" => Some(AdversaryTag::SelectiveRelease),
            "lex-grind" | "grind" => Some(AdversaryTag::LexGrind),
            "first-seen-split" | "split" => Some(AdversaryTag::FirstSeenSplit),
        _ => None,
        }
    }
}

impl std::fmt::Display for AdversaryTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Adversary memory: the withheld main line and the deliveries planned for
/// the next round, one ordered list per honest node.
#[derive(Debug)]
pub struct AdversaryState {
    pub private_tip: ChainRef,
    planned: Vec<Vec<ChainRef>>,
    /// Releases scheduled over the whole run, for the trace audit.
    pub releases_planned: u64,
}

impl AdversaryState {
    pub fn new(genesis: Slot, honest_count: u32) -> Self {
        AdversaryState {
            private_tip: ChainRef { slot: genesis, len: 1 },
            planned: vec![Vec::new(); honest_count as usize],
            releases_planned: 0,
        }
    }

    /// Ordered deliveries for honest node `i`, drained by the engine when
    /// it builds the next round's inboxes.
    pub fn drain_deliveries(&mut self, i: usize) -> std::vec::Drain<'_, ChainRef> {
        self.planned[i].drain(..)
    }

    pub fn planned_is_empty(&self) -> bool {
        self.planned.iter().all(|p| p.is_empty())
    }
}

/// Per-round view handed to the adversary after honest mining.
pub struct AdversaryCtx<'a> {
    pub round: u32,
    pub vdf_mode: bool,
    /// Honest nodes' adopted chains at the start of this round.
    pub adopted_tips: &'a [ChainRef],
    /// Honest broadcasts of this round (rushing adversary).
    pub broadcasts: &'a [ChainRef],
    /// Longest honest chain length at the end of this round.
    pub honest_max: u32,
    /// The corrupt-attachment constraint is in force: no advantage and the
    /// most recent nonempty round was honest-only, so corrupt successes
    /// must extend a uniformly chosen longest chain ending in an honest
    /// block.
    pub honest_tip_rule: bool,
}

/// Outcome flags of one adversary mining step, for the trace.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdversaryRoundLog {
    pub blocks_placed: u32,
    /// The honest-tip rule fired but no qualifying chain existed; fell
    /// back to a uniform longest chain.
    pub honest_tip_fallback: bool,
}

fn extend_withheld<R: Rng>(
    state: &mut AdversaryState,
    successes: &[u32],
    store: &mut BlockStore,
    minter: &mut IdMinter,
    rng: &mut R,
    ctx: &AdversaryCtx,
    grind: bool,
) -> AdversaryRoundLog {
    let mut log = AdversaryRoundLog::default();
    if successes.is_empty() {
        return log;
    }

    let mut parent = state.private_tip;
    if ctx.honest_tip_rule {
        // Uniform choice among the longest adopted chains that end with an
        // honest block, per the constraint; fall back to a uniform longest
        // chain when none qualifies, and flag the round.
        let max_len = ctx.adopted_tips.iter().map(|c| c.len).max().unwrap_or(1);
        let mut pool: Vec<ChainRef> = Vec::new();
        let mut seen: Vec<Slot> = Vec::new();
        for c in ctx.adopted_tips.iter().filter(|c| c.len == max_len) {
            if store.block(c.slot).honest && !seen.contains(&c.slot) {
                seen.push(c.slot);
                pool.push(*c);
            }
        }
        if pool.is_empty() {
            log.honest_tip_fallback = true;
            for c in ctx.adopted_tips.iter().filter(|c| c.len == max_len) {
                if !seen.contains(&c.slot) {
                    seen.push(c.slot);
                    pool.push(*c);
                }
            }
        }
        if !pool.is_empty() {
            parent = pool[rng.random_range(0..pool.len())];
        }
    } else if grind {
        // Extend the longest chain the adversary knows, private line
        // preferred on ties. Rushing onto this round's broadcasts would
        // make the chain grow twice in one round, so under the gate only
        // chains from previous rounds qualify.
        let mut best = state.private_tip;
        let rushing: &[ChainRef] = if ctx.vdf_mode { &[] } else { ctx.broadcasts };
        for c in rushing.iter().chain(ctx.adopted_tips.iter()) {
            if c.len > best.len {
                best = *c;
            }
        }
        parent = best;
    }

    // Place one block under the gate, or chain every success without it.
    let place = if ctx.vdf_mode { 1 } else { successes.len() };
    let vdf_round = ctx.round.saturating_sub(1);
    let mut tip = parent;
    for &miner in successes.iter().take(place) {
        let id = if grind { minter.mint_ground(GRIND_DRAWS) } else { minter.mint() };
        let parent_round = store.block(tip.slot).round;
        let label = if ctx.vdf_mode { ctx.round } else { parent_round + 1 };
        let slot = store
            .extend_slot(tip.slot, id, miner, label.max(parent_round + 1), false, vdf_round)
            .expect("adversary extends an existing parent with increasing round");
        tip = ChainRef { slot, len: tip.len + 1 };
        log.blocks_placed += 1;
    }
    if tip.len >= state.private_tip.len {
        state.private_tip = tip;
    }
    log
}

/// Routes the round's corrupt mining successes. Under `None` the engine
/// never calls this: corrupt nodes follow the honest code path.
pub fn on_corrupt_mine<R: Rng>(
    tag: AdversaryTag,
    state: &mut AdversaryState,
    successes: &[u32],
    store: &mut BlockStore,
    minter: &mut IdMinter,
    rng: &mut R,
    ctx: &AdversaryCtx,
) -> AdversaryRoundLog {
    match tag {
        AdversaryTag::None => AdversaryRoundLog::default(),
        AdversaryTag::PrivateChain
        | AdversaryTag::SelectiveRelease
        | AdversaryTag::FirstSeenSplit => {
            extend_withheld(state, successes, store, minter, rng, ctx, false)
        }
        AdversaryTag::LexGrind => extend_withheld(state, successes, store, minter, rng, ctx, true),
    }
}

/// Plans next-round deliveries. Withheld chains stay private; whatever is
/// scheduled here lands at the front of the chosen inboxes, in order.
pub fn plan_releases(
    tag: AdversaryTag,
    state: &mut AdversaryState,
    store: &BlockStore,
    honest_count: u32,
    ctx: &AdversaryCtx,
) {
    let h = honest_count as usize;
    match tag {
        AdversaryTag::None => {}
        AdversaryTag::PrivateChain => {
            // Classic withholding: hide until strictly ahead, then
            // multicast and override whatever the honest nodes hold.
            if state.private_tip.len > ctx.honest_max {
                for i in 0..h {
                    state.planned[i].push(state.private_tip);
                }
                state.releases_planned += h as u64;
            }
        }
        AdversaryTag::LexGrind => {
            // The grind only bites in ties, so the ground line is
            // multicast every round.
            if state.private_tip.len > 1 {
                for i in 0..h {
                    state.planned[i].push(state.private_tip);
                }
                state.releases_planned += h as u64;
            }
        }
        AdversaryTag::SelectiveRelease => {
            // Two chains of different lengths to two disjoint halves, only
            // when the withheld line is ahead of the honest best.
            let tip = state.private_tip;
            if tip.len > ctx.honest_max && tip.len >= 2 {
                let parent_slot = store.parent_slot(tip.slot).expect("len >= 2 has a parent");
                let shorter = ChainRef { slot: parent_slot, len: tip.len - 1 };
                let split = h / 2;
                for i in 0..h {
                    state.planned[i].push(if i < split { tip } else { shorter });
                }
                state.releases_planned += h as u64;
            }
        }
        AdversaryTag::FirstSeenSplit => {
            // Deliver two equal-length longest tips in opposite orders to
            // the two halves, so the halves disagree on what arrived first.
            let mut tips: Vec<ChainRef> = Vec::new();
            let push = |c: ChainRef, tips: &mut Vec<ChainRef>| {
                if c.len > 1 && !tips.iter().any(|t| t.slot == c.slot) {
                    tips.push(c);
                }
            };
            push(state.private_tip, &mut tips);
            for &b in ctx.broadcasts {
                push(b, &mut tips);
            }
            let max_len = tips.iter().map(|c| c.len).max().unwrap_or(0);
            let longest: Vec<ChainRef> = tips.into_iter().filter(|c| c.len == max_len).collect();
            match longest.len() {
                0 => {}
                1 => {
                    for i in 0..h {
                        state.planned[i].push(longest[0]);
                    }
                    state.releases_planned += h as u64;
                }
                _ => {
                    let (a, b) = (longest[0], longest[1]);
                    let split = h / 2;
                    for i in 0..h {
                        if i < split {
                            state.planned[i].push(a);
                            state.planned[i].push(b);
                        } else {
                            state.planned[i].push(b);
                            state.planned[i].push(a);
                        }
                    }
                    state.releases_planned += 2 * h as u64;
                }
            }
        }
    }
}
