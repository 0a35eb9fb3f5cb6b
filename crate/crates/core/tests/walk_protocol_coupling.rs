//! Cross-checks between protocol runs and the backwards-walk picture: the
//! maximal inconsistency of an adversary-free run is, sample path by
//! sample path, the coalescence step of the backwards color walks.

use lcsim::chain::{BlockId, BlockStore, IdMinter, Miner};
use lcsim::engine::{run_with_mode, RecordMode, SimConfig};
use lcsim::walks::{coalescence_time, extract_backwards_walks};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The four-chain round-8 tree: miners (pink, yellow, green, blue) are
/// indices (0..4), block number b is mined by (b-1) % 4 at round
/// (b-1)/4 + 1.
fn four_chain_store() -> (BlockStore, Vec<BlockId>) {
    let mut minter = IdMinter::new(0x51);
    let mut store = BlockStore::new(&mut minter);
    let g = store.genesis_id();
    let paths: [[u32; 8]; 4] = [
        [29, 26, 21, 19, 15, 10, 6, 4],
        [30, 26, 21, 19, 15, 10, 6, 4],
        [31, 27, 22, 19, 15, 10, 6, 4],
        [32, 25, 24, 18, 15, 10, 6, 4],
    ];
    let mut ids: std::collections::HashMap<u32, BlockId> = Default::default();
    for path in &paths {
        for (i, &no) in path.iter().enumerate().rev() {
            if ids.contains_key(&no) {
                continue;
            }
            let parent = if i + 1 < path.len() { ids[&path[i + 1]] } else { g };
            let id = store
                .extend(parent, minter.mint(), (no - 1) % 4, (no - 1) / 4 + 1, true, 0)
                .unwrap();
            ids.insert(no, id);
        }
    }
    let tips = vec![ids[&29], ids[&30], ids[&31], ids[&32]];
    (store, tips)
}

#[test]
fn four_chain_backwards_sequences() {
    let (store, tips) = four_chain_store();
    let (seqs, coalescence) = extract_backwards_walks(&store, &tips).unwrap();
    assert_eq!(coalescence, 4);

    // Chain ending in block 32 (miner 3, blue) read backwards:
    // blue, pink, blue, yellow, green, yellow, yellow, blue, genesis.
    let blue_seq = &seqs[3];
    let want = [
        (Miner::Node(3), 8),
        (Miner::Node(0), 7),
        (Miner::Node(3), 6),
        (Miner::Node(1), 5),
        (Miner::Node(2), 4),
        (Miner::Node(1), 3),
        (Miner::Node(1), 2),
        (Miner::Node(3), 1),
        (Miner::Genesis, 0),
    ];
    assert_eq!(blue_seq.as_slice(), &want);

    // all four sequences agree from the coalescence point (green, 4) back
    for s in seqs.iter() {
        assert_eq!(&s[s.len() - 5..], &blue_seq[blue_seq.len() - 5..]);
    }
}

#[test]
fn single_tip_coalesces_at_step_zero() {
    let (store, tips) = four_chain_store();
    let (seqs, coalescence) = extract_backwards_walks(&store, &tips[..1]).unwrap();
    assert_eq!(coalescence, 0);
    assert_eq!(seqs.len(), 1);
}

/// The central identity at p = 1, b = 0: extracted backwards-walk
/// coalescence equals the chain-level maximal inconsistency on every seed.
#[test]
fn backwards_walk_step_equals_inconsistency() {
    for seed in 0..300 {
        let cfg = SimConfig::baseline(4, 1.0, 60, seed);
        let (trace, world) = run_with_mode(&cfg, RecordMode::Summary).unwrap();
        let tips = world.honest_tip_ids();
        let (_, coalescence) = extract_backwards_walks(world.store(), &tips).unwrap();
        assert_eq!(
            coalescence, trace.summary.final_prefix.max_inconsistency,
            "seed {seed}"
        );
    }
}

/// Protocol inconsistency and walk-oracle coalescence share a mean at
/// small scale (the full KS test lives in the acceptance suite).
#[test]
fn protocol_and_walk_means_agree_at_n4() {
    let runs = 20_000u64;
    let mut proto_total = 0u64;
    for seed in 0..runs {
        let cfg = SimConfig::baseline(4, 1.0, 100, 0xc0ffee + seed);
        let (trace, _) = run_with_mode(&cfg, RecordMode::Summary).unwrap();
        proto_total += trace.summary.final_prefix.max_inconsistency as u64;
    }
    let proto_mean = proto_total as f64 / runs as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut walk_total = 0u64;
    for _ in 0..runs {
        walk_total += coalescence_time(4, 1.0, 4, &mut rng).unwrap();
    }
    let walk_mean = walk_total as f64 / runs as f64;

    let exact = 838.0 / 145.0;
    assert!((proto_mean - exact).abs() < 0.1, "protocol mean {proto_mean}");
    assert!((walk_mean - exact).abs() < 0.1, "walk mean {walk_mean}");
}
