//! One-time calibration pass: measures the asymptotic constants the
//! acceptance envelopes need and freezes them into a versioned artifact.
//!
//! Nothing here invents a constant. The p=1 slope is a least-squares fit
//! of measured mean inconsistency against n; the slack constants are the
//! measured inconsistency-to-formula ratios with a 1.5x headroom for
//! sampling noise between calibration and acceptance runs.

use lcsim::bounds::Calibration;
use lcsim::engine::SimConfig;
use lcsim::walks::{exact_mean_coalescence_counts, exact_mean_coalescence_partitions};

use crate::experiment::{run_experiment, ExperimentSpec};
use crate::stats;

/// Headroom multiplier applied to measured slack ratios.
const SLACK_MARGIN: f64 = 1.5;

/// Calibration runs use their own fixed seeds, distinct from every
/// acceptance preset, so envelopes are never tested against the data that
/// produced them.
const CAL_SEED_P1: u64 = 0xca11_0001;
const CAL_SEED_GROWTH: u64 = 0xca11_0002;

pub fn p1_scaling_means(replicas: u32) -> Vec<(u32, f64)> {
    let mut spec = ExperimentSpec::single(
        "calibrate-p1",
        SimConfig::baseline(4, 1.0, 800, CAL_SEED_P1),
        replicas,
    );
    spec.sweep_n = vec![4, 8, 16, 32];
    let (_, aggs) = run_experiment(&spec);
    aggs.iter().map(|a| (a.cfg.n, a.inconsistency_mean)).collect()
}

/// The growth-check preset compares a sample mean of the common prefix
/// against [growth - slack, growth] at this scale; the envelope has to
/// cover both the measured inconsistency and the sampling dispersion of
/// that mean (the chain-length part of the prefix carries binomial mining
/// noise of sd sqrt(T q^n (1-q^n)) per replica).
const GROWTH_CHECK_ROUNDS: f64 = 5000.0;
const GROWTH_CHECK_REPLICAS: f64 = 1000.0;
const GROWTH_NOISE_SIGMAS: f64 = 4.0;

fn growth_slack_ratios(replicas: u32) -> (f64, f64) {
    let mut spec = ExperimentSpec::single(
        "calibrate-growth",
        SimConfig::baseline(100, 0.001, 2000, CAL_SEED_GROWTH),
        replicas,
    );
    spec.sweep_p = vec![0.001, 0.01, 0.1];
    let (_, aggs) = run_experiment(&spec);
    let mut lowp: f64 = 0.0;
    let mut highp: f64 = 0.0;
    for a in &aggs {
        let np = a.cfg.n as f64 * a.cfg.p;
        let q_n = (1.0 - a.cfg.p).powi(a.cfg.n as i32);
        let mean_se =
            (GROWTH_CHECK_ROUNDS * q_n * (1.0 - q_n) / GROWTH_CHECK_REPLICAS).sqrt();
        let envelope = a.inconsistency_mean + GROWTH_NOISE_SIGMAS * mean_se;
        if a.cfg.p < 4.0 * std::f64::consts::LN_2 / a.cfg.n as f64 {
            let formula = 1.0 / (np * (-np).exp());
            lowp = lowp.max(envelope / formula);
        } else {
            let formula = 2.0 * np / (1.0 - 2.0 * (-np / 3.0).exp());
            highp = highp.max(envelope / formula);
        }
    }
    (lowp, highp)
}

/// Runs the full calibration pass. `scale` shrinks replica counts for
/// smoke runs (None = full).
pub fn calibrate(scale: Option<u32>) -> Calibration {
    let shrink = |r: u32| match scale {
        Some(s) => (r / s).max(8),
        None => r,
    };
    let means = p1_scaling_means(shrink(4000));
    let xs: Vec<f64> = means.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = means.iter().map(|&(_, m)| m).collect();
    let p1_slope = stats::slope_through_origin(&xs, &ys);

    let (lowp_ratio, highp_ratio) = growth_slack_ratios(shrink(300));

    let mut walk_means = std::collections::BTreeMap::new();
    for n in [4u32, 8, 16, 32] {
        walk_means.insert(n.to_string(), exact_mean_coalescence_counts(n, n));
    }

    Calibration {
        schema_version: 1,
        p1_slope,
        lowp_slack: SLACK_MARGIN * lowp_ratio,
        highp_slack: SLACK_MARGIN * highp_ratio,
        walker4_exact_mean: exact_mean_coalescence_partitions(4, 4),
        walk_means,
    }
}

/// Loads the committed calibration artifact.
pub fn load_default() -> Calibration {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/calibration.json");
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("missing calibration artifact at {path}: {e}"));
    Calibration::from_json(&text).expect("calibration artifact parses")
}
