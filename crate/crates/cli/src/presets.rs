//! Named experiment presets. Every acceptance check runs one of these by
//! name, and the CLI exposes them directly.

use lcsim::adversary::AdversaryTag;
use lcsim::engine::SimConfig;
use lcsim::strategy::StrategyTag;

use crate::experiment::{ExperimentSpec, JWalkSpec, VdfFuzzSpec, WalkSweepSpec};

pub enum Preset {
    /// Protocol Monte Carlo sweep.
    Protocol(ExperimentSpec),
    /// Single full-trace run (trace CSV + DOT export make sense).
    Trace(SimConfig),
    /// Walk-oracle sweep.
    Walks(WalkSweepSpec),
    /// Opportunity-walk sampler.
    JWalk(JWalkSpec),
    /// Randomized chain constructions against the validator.
    VdfFuzz(VdfFuzzSpec),
    /// Paired gated/ungated quality comparison (shared replica seeds).
    QualityPair { ungated: ExperimentSpec, gated: ExperimentSpec },
}

pub const PRESET_NAMES: &[&str] = &[
    "fig1",
    "coupling-n4",
    "coupling-n8",
    "walk-coupling-n4",
    "walk-coupling-n8",
    "warmup-scaling",
    "complete-coalescence",
    "lazy-scaling",
    "walker4-exact",
    "advantage-invariant",
    "opportunity-bound",
    "vdf-gate",
    "general-p-growth",
    "chain-quality",
];

fn coupling_protocol(n: u32, replicas: u32) -> ExperimentSpec {
    ExperimentSpec::single(
        &format!("coupling-n{n}"),
        SimConfig::baseline(n, 1.0, 200, 0xc0a1),
        replicas,
    )
}

fn coupling_walks(n: u32, replicas: u32) -> WalkSweepSpec {
    WalkSweepSpec {
        name: format!("walk-coupling-n{n}"),
        cells: vec![(n, 1.0, n)],
        replicas,
        seed: 0xc0a2,
    }
}

/// Looks a preset up by name. Replica counts are the acceptance-scale
/// defaults; `scale` lets callers shrink them proportionally (minimum 1)
/// for smoke runs.
pub fn preset(name: &str, scale: Option<u32>) -> Option<Preset> {
    let shrink = |r: u32| match scale {
        Some(s) => (r / s).max(1),
        None => r,
    };
    let p = match name {
        "fig1" => Preset::Trace(SimConfig::baseline(4, 1.0, 8, 1)),
        "coupling-n4" => Preset::Protocol(coupling_protocol(4, shrink(100_000))),
        "coupling-n8" => Preset::Protocol(coupling_protocol(8, shrink(100_000))),
        "walk-coupling-n4" => Preset::Walks(coupling_walks(4, shrink(100_000))),
        "walk-coupling-n8" => Preset::Walks(coupling_walks(8, shrink(100_000))),
        "warmup-scaling" => {
            let mut spec = ExperimentSpec::single(
                "warmup-scaling",
                SimConfig::baseline(4, 1.0, 800, 0x5ca1e),
                shrink(10_000),
            );
            spec.sweep_n = vec![4, 8, 16, 32];
            Preset::Protocol(spec)
        }
        "complete-coalescence" => Preset::Walks(WalkSweepSpec {
            name: "complete-coalescence".into(),
            cells: vec![(8, 1.0, 8), (16, 1.0, 16), (32, 1.0, 32)],
            replicas: shrink(40_000),
            seed: 0xcca1,
        }),
        "lazy-scaling" => Preset::Walks(WalkSweepSpec {
            name: "lazy-scaling".into(),
            cells: vec![(16, 0.25, 16), (16, 0.5, 16), (16, 1.0, 16)],
            replicas: shrink(40_000),
            seed: 0x1a2b,
        }),
        "walker4-exact" => Preset::Walks(WalkSweepSpec {
            name: "walker4-exact".into(),
            cells: vec![(4, 1.0, 4)],
            replicas: shrink(200_000),
            seed: 0x4a4a,
        }),
        "advantage-invariant" => {
            let mut spec = ExperimentSpec::single(
                "advantage-invariant",
                SimConfig {
                    n: 32,
                    b: 4,
                    p: 0.1,
                    rounds: 2000,
                    strategy: StrategyTag::UniformRandom,
                    adversary: AdversaryTag::None,
                    selective_relay: true,
                    vdf_mode: true,
                    seed: 0xad7a,
                },
                shrink(34),
            );
            spec.sweep_b = vec![4, 8, 15];
            spec.sweep_p = vec![0.1, 0.5];
            spec.sweep_adversary = AdversaryTag::ALL.to_vec();
            Preset::Protocol(spec)
        }
        "opportunity-bound" => Preset::JWalk(JWalkSpec {
            name: "opportunity-bound".into(),
            n: 20,
            b: 4,
            p: 0.2,
            m: 2000,
            replicas: shrink(10_000),
            seed: 0x0bb0,
        }),
        "vdf-gate" => Preset::VdfFuzz(VdfFuzzSpec {
            name: "vdf-gate".into(),
            chains: shrink(100_000),
            seed: 0xfda7,
        }),
        "general-p-growth" => {
            let mut spec = ExperimentSpec::single(
                "general-p-growth",
                SimConfig::baseline(100, 0.001, 5000, 0x9e0e),
                shrink(1000),
            );
            spec.sweep_p = vec![0.001, 0.01, 0.1];
            Preset::Protocol(spec)
        }
        "chain-quality" => {
            let base = SimConfig {
                n: 16,
                b: 8,
                p: 0.9,
                rounds: 400,
                strategy: StrategyTag::UniformRandom,
                adversary: AdversaryTag::PrivateChain,
                selective_relay: false,
                vdf_mode: false,
                seed: 0x9a11,
            };
            let ungated = ExperimentSpec::single("chain-quality-ungated", base, shrink(1000));
            let mut gated_cfg = base;
            gated_cfg.selective_relay = true;
            gated_cfg.vdf_mode = true;
            let gated = ExperimentSpec::single("chain-quality-gated", gated_cfg, shrink(1000));
            Preset::QualityPair { ungated, gated }
        }
        _ => return None,
    };
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_resolves() {
        for name in PRESET_NAMES {
            assert!(preset(name, Some(1000)).is_some(), "missing preset {name}");
        }
        assert!(preset("no-such-preset", None).is_none());
    }

    #[test]
    fn scaling_never_hits_zero_replicas() {
        match preset("advantage-invariant", Some(1_000_000)).unwrap() {
            Preset::Protocol(spec) => assert_eq!(spec.replicas, 1),
            _ => panic!("wrong preset kind"),
        }
    }
}
