//! End-to-end checks of the closed-form envelopes against fresh Monte
//! Carlo: the adversarial inconsistency window M*, the p=1 prefix
//! envelope, and the exact growth term.

use lcsim::bounds::{expected_prefix_p1, inconsistency_theorem_params};
use lcsim::chain::BlockId;
use lcsim::engine::{run_with_mode, RecordMode, SimConfig};
use lcsim::strategy::StrategyTag;
use lcsim::AdversaryTag;
use lcsim_cli::calibrate;
use rayon::prelude::*;

/// At (n=64, b=8, p=0.05, eps=0.1) the theorem's window M* bounds the
/// pairwise honest inconsistency in at least 90% of gated adversarial
/// runs (it is loose: typical inconsistency is tens of blocks).
#[test]
fn m_star_bounds_pairwise_inconsistency() {
    let params = inconsistency_theorem_params(64, 8, 0.05, 0.1).unwrap();
    assert!(!params.vacuous, "side condition holds at these parameters");
    let m_star = params.value.m_star;
    assert!(m_star > 100.0 && m_star < 1000.0, "M* = {m_star}");

    let runs = 1000u64;
    let within: u64 = (0..runs)
        .into_par_iter()
        .map(|seed| {
            let cfg = SimConfig {
                n: 64,
                b: 8,
                p: 0.05,
                rounds: 1500,
                strategy: StrategyTag::UniformRandom,
                adversary: AdversaryTag::PrivateChain,
                selective_relay: true,
                vdf_mode: true,
                seed: 0x3157 + seed,
            };
            let (_, world) = run_with_mode(&cfg, RecordMode::Summary).unwrap();
            // inconsistency between one fixed pair of honest nodes
            let tips: Vec<BlockId> = world.honest_tip_ids();
            let pair = [tips[0], tips[1]];
            let report = world.store().common_prefix(&pair).unwrap();
            u64::from((report.max_inconsistency as f64) < m_star)
        })
        .sum();
    let freq = within as f64 / runs as f64;
    assert!(freq >= 0.90, "pairwise inconsistency < M* in only {freq} of runs");
}

/// The calibrated p=1 envelope contains the measured mean prefix at
/// n=16, t=1000 (3e4 seeds; the envelope's slack over the true mean is
/// under half an inconsistency standard error at 1e4, so the sample is
/// sized up for a stable verdict).
#[test]
fn prefix_envelope_contains_measured_mean_n16() {
    let cal = calibrate::load_default();
    let (lo, hi) = expected_prefix_p1(&cal, 16, 1000);
    let seeds = 30_000u64;
    let total: u64 = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let cfg = SimConfig::baseline(16, 1.0, 1000, 0x16aa + seed);
            let (trace, _) = run_with_mode(&cfg, RecordMode::Summary).unwrap();
            trace.summary.final_prefix.common_prefix_len as u64
        })
        .sum();
    let mean = total as f64 / seeds as f64;
    assert!(
        lo < mean && mean <= hi,
        "mean prefix {mean:.3} outside envelope ({lo:.3}, {hi:.3})"
    );
}

/// The four-chain example scale: prefix at the end of round 8 is never
/// below genesis and its mean sits inside the calibrated envelope.
#[test]
fn fig1_scale_prefix_within_envelope() {
    let cal = calibrate::load_default();
    let (lo, hi) = expected_prefix_p1(&cal, 4, 8);
    let seeds = 2000u64;
    let mut total = 0u64;
    for seed in 0..seeds {
        let cfg = SimConfig::baseline(4, 1.0, 8, 0xf1f1 + seed);
        let (trace, _) = run_with_mode(&cfg, RecordMode::Summary).unwrap();
        let prefix = trace.summary.final_prefix.common_prefix_len;
        assert!(prefix >= 1);
        total += prefix as u64;
    }
    let mean = total as f64 / seeds as f64;
    assert!(lo < mean && mean < hi, "mean prefix {mean:.3} outside ({lo:.3}, {hi:.3})");
}

/// Mean chain length tracks the exact growth term 1 + (1-(1-p)^n) t
/// within 2% at (n=20, p=0.05, T=1e4).
#[test]
fn mean_chain_length_matches_growth_term() {
    let (n, p, t) = (20u32, 0.05f64, 10_000u32);
    let growth = 1.0 + (1.0 - (1.0 - p).powi(n as i32)) * t as f64;
    let seeds = 100u64;
    let total: u64 = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let cfg = SimConfig::baseline(n, p, t, 0x61ee + seed);
            let (trace, _) = run_with_mode(&cfg, RecordMode::Summary).unwrap();
            trace.summary.final_honest_max as u64
        })
        .sum();
    let mean = total as f64 / seeds as f64;
    let rel = (mean - growth).abs() / growth;
    assert!(rel < 0.02, "mean length {mean:.1} vs growth {growth:.1} (rel {rel:.4})");
}
