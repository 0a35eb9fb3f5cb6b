//! Monte Carlo experiment runners: protocol sweeps, walk-oracle sweeps,
//! the opportunity-walk sampler, and the validation fuzz harness.
//!
//! Replica i of cell j always runs with seed mix(base, j, i), so any cell
//! can be rerun in isolation and parallel execution cannot perturb
//! results: rows are computed independently and merged by (cell, replica)
//! key at the end.

use lcsim::adversary::AdversaryTag;
use lcsim::bounds::OpportunityWalk;
use lcsim::chain::{BlockStore, IdMinter};
use lcsim::engine::{run_with_mode, RecordMode, SimConfig};
use lcsim::rng::replica_seed;
use lcsim::strategy::StrategyTag;
use lcsim::vdf::ChainValidator;
use lcsim::walks::coalescence_time;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::stats;

/// A protocol sweep: the cartesian product of the populated axes, a fixed
/// number of replicas per cell.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: SimConfig,
    pub sweep_n: Vec<u32>,
    pub sweep_b: Vec<u32>,
    pub sweep_p: Vec<f64>,
    pub sweep_strategy: Vec<StrategyTag>,
    pub sweep_adversary: Vec<AdversaryTag>,
    pub replicas: u32,
}

impl ExperimentSpec {
    pub fn single(name: &str, base: SimConfig, replicas: u32) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            base,
            sweep_n: Vec::new(),
            sweep_b: Vec::new(),
            sweep_p: Vec::new(),
            sweep_strategy: Vec::new(),
            sweep_adversary: Vec::new(),
            replicas,
        }
    }

    /// Materializes the sweep cells in deterministic order.
    pub fn cells(&self) -> Vec<SimConfig> {
        let ns = if self.sweep_n.is_empty() { vec![self.base.n] } else { self.sweep_n.clone() };
        let bs = if self.sweep_b.is_empty() { vec![self.base.b] } else { self.sweep_b.clone() };
        let ps = if self.sweep_p.is_empty() { vec![self.base.p] } else { self.sweep_p.clone() };
        let strategies = if self.sweep_strategy.is_empty() {
            vec![self.base.strategy]
        } else {
            self.sweep_strategy.clone()
        };
        let adversaries = if self.sweep_adversary.is_empty() {
            vec![self.base.adversary]
        } else {
            self.sweep_adversary.clone()
        };
        let mut out = Vec::new();
        for &n in &ns {
            for &b in &bs {
                for &p in &ps {
                    for &strategy in &strategies {
                        for &adversary in &adversaries {
                            let mut cfg = self.base;
                            cfg.n = n;
                            cfg.b = b;
                            cfg.p = p;
                            cfg.strategy = strategy;
                            cfg.adversary = adversary;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

/// One protocol replica's summary metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRow {
    pub cell: u32,
    pub replica: u32,
    pub seed: u64,
    pub cfg: SimConfig,
    pub max_inconsistency: u32,
    pub common_prefix_len: u32,
    pub prefix_growth_rate: f64,
    pub chain_quality: f64,
    pub honest_max_len: u32,
    pub adv_max_len: u32,
    pub final_advantage: u32,
    pub final_opportunity: i64,
    pub advantage_violations: u32,
}

/// Per-cell aggregate over replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub cell: u32,
    pub cfg: SimConfig,
    pub replicas: u32,
    pub inconsistency_mean: f64,
    pub inconsistency_std: f64,
    pub inconsistency_q10: f64,
    pub inconsistency_q50: f64,
    pub inconsistency_q90: f64,
    pub prefix_len_mean: f64,
    pub growth_rate_mean: f64,
    pub quality_mean: f64,
    pub violations_total: u64,
}

/// Runs every (cell, replica) pair in parallel, deterministically.
pub fn run_experiment(spec: &ExperimentSpec) -> (Vec<ReplicaRow>, Vec<CellAggregate>) {
    let cells = spec.cells();
    let jobs: Vec<(u32, u32)> = (0..cells.len() as u32)
        .flat_map(|c| (0..spec.replicas).map(move |r| (c, r)))
        .collect();
    let mut rows: Vec<ReplicaRow> = jobs
        .par_iter()
        .map(|&(cell, replica)| {
            let mut cfg = cells[cell as usize];
            cfg.seed = replica_seed(spec.base.seed, cell as u64, replica as u64);
            let (trace, _) = run_with_mode(&cfg, RecordMode::Summary)
                .expect("sweep cell config is valid");
            let s = &trace.summary;
            ReplicaRow {
                cell,
                replica,
                seed: cfg.seed,
                cfg,
                max_inconsistency: s.final_prefix.max_inconsistency,
                common_prefix_len: s.final_prefix.common_prefix_len,
                prefix_growth_rate: s.prefix_growth_rate,
                chain_quality: s.chain_quality,
                honest_max_len: s.final_honest_max,
                adv_max_len: s.final_adv_max,
                final_advantage: s.final_advantage,
                final_opportunity: s.final_opportunity,
                advantage_violations: s.advantage_violations,
            }
        })
        .collect();
    rows.sort_by_key(|r| (r.cell, r.replica));
    let aggregates = aggregate(&cells, spec.replicas, &rows);
    (rows, aggregates)
}

/// Recomputes per-cell aggregates from raw rows. Cells with no rows (an
/// empty sweep) produce no aggregate rows.
pub fn aggregate(cells: &[SimConfig], replicas: u32, rows: &[ReplicaRow]) -> Vec<CellAggregate> {
    let mut out = Vec::with_capacity(cells.len());
    for (c, cfg) in cells.iter().enumerate() {
        let cell_rows: Vec<&ReplicaRow> = rows.iter().filter(|r| r.cell == c as u32).collect();
        if cell_rows.is_empty() {
            continue;
        }
        let inc: Vec<f64> = cell_rows.iter().map(|r| r.max_inconsistency as f64).collect();
        let growth: Vec<f64> = cell_rows.iter().map(|r| r.prefix_growth_rate).collect();
        let quality: Vec<f64> = cell_rows.iter().map(|r| r.chain_quality).collect();
        let prefix: Vec<f64> = cell_rows.iter().map(|r| r.common_prefix_len as f64).collect();
        out.push(CellAggregate {
            cell: c as u32,
            cfg: *cfg,
            replicas,
            inconsistency_mean: stats::mean(&inc),
            inconsistency_std: stats::stddev(&inc),
            inconsistency_q10: stats::quantile(&inc, 0.1),
            inconsistency_q50: stats::quantile(&inc, 0.5),
            inconsistency_q90: stats::quantile(&inc, 0.9),
            prefix_len_mean: stats::mean(&prefix),
            growth_rate_mean: stats::mean(&growth),
            quality_mean: stats::mean(&quality),
            violations_total: cell_rows.iter().map(|r| r.advantage_violations as u64).sum(),
        });
    }
    out
}

pub fn write_replica_csv(rows: &[ReplicaRow]) -> String {
    let mut out = String::from("#schema lcsim-replicas v1\n");
    out.push_str(
        "cell,replica,seed,n,b,p,rounds,strategy,adversary,selective_relay,vdf_mode,\
         max_inconsistency,common_prefix_len,prefix_growth_rate,chain_quality,\
         honest_max_len,adv_max_len,final_advantage,final_opportunity,advantage_violations\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.cell,
            r.replica,
            r.seed,
            r.cfg.n,
            r.cfg.b,
            r.cfg.p,
            r.cfg.rounds,
            r.cfg.strategy,
            r.cfg.adversary,
            r.cfg.selective_relay,
            r.cfg.vdf_mode,
            r.max_inconsistency,
            r.common_prefix_len,
            r.prefix_growth_rate,
            r.chain_quality,
            r.honest_max_len,
            r.adv_max_len,
            r.final_advantage,
            r.final_opportunity,
            r.advantage_violations,
        ));
    }
    out
}

pub fn write_cell_csv(aggs: &[CellAggregate]) -> String {
    let mut out = String::from("#schema lcsim-cells v1\n");
    out.push_str(
        "cell,n,b,p,rounds,strategy,adversary,replicas,inconsistency_mean,inconsistency_std,\
         inconsistency_q10,inconsistency_q50,inconsistency_q90,prefix_len_mean,\
         growth_rate_mean,quality_mean,violations_total\n",
    );
    for a in aggs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            a.cell,
            a.cfg.n,
            a.cfg.b,
            a.cfg.p,
            a.cfg.rounds,
            a.cfg.strategy,
            a.cfg.adversary,
            a.replicas,
            a.inconsistency_mean,
            a.inconsistency_std,
            a.inconsistency_q10,
            a.inconsistency_q50,
            a.inconsistency_q90,
            a.prefix_len_mean,
            a.growth_rate_mean,
            a.quality_mean,
            a.violations_total,
        ));
    }
    out
}

/// A walk-oracle sweep over explicit (n_g, u, k) cells.
#[derive(Debug, Clone)]
pub struct WalkSweepSpec {
    pub name: String,
    pub cells: Vec<(u32, f64, u32)>,
    pub replicas: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkRow {
    pub cell: u32,
    pub replica: u32,
    pub seed: u64,
    pub n_g: u32,
    pub u: f64,
    pub k: u32,
    pub coalescence_time: u64,
}

pub fn run_walk_sweep(spec: &WalkSweepSpec) -> Vec<WalkRow> {
    let jobs: Vec<(u32, u32)> = (0..spec.cells.len() as u32)
        .flat_map(|c| (0..spec.replicas).map(move |r| (c, r)))
        .collect();
    let mut rows: Vec<WalkRow> = jobs
        .par_iter()
        .map(|&(cell, replica)| {
            let (n_g, u, k) = spec.cells[cell as usize];
            let seed = replica_seed(spec.seed, cell as u64, replica as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let steps = coalescence_time(n_g, u, k, &mut rng).expect("valid walk cell");
            WalkRow { cell, replica, seed, n_g, u, k, coalescence_time: steps }
        })
        .collect();
    rows.sort_by_key(|r| (r.cell, r.replica));
    rows
}

pub fn write_walk_csv(rows: &[WalkRow]) -> String {
    let mut out = String::from("#schema lcsim-walks v1\n");
    out.push_str("cell,replica,seed,n_g,u,k,coalescence_time\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.cell, r.replica, r.seed, r.n_g, r.u, r.k, r.coalescence_time
        ));
    }
    out
}

/// Samples the opportunity walk J over exactly `m` nonempty rounds by
/// simulating per-round honest/corrupt mining counts.
#[derive(Debug, Clone)]
pub struct JWalkSpec {
    pub name: String,
    pub n: u32,
    pub b: u32,
    pub p: f64,
    pub m: u32,
    pub replicas: u32,
    pub seed: u64,
}

pub fn run_jwalk(spec: &JWalkSpec) -> Vec<i64> {
    let honest = (spec.n - spec.b) as u64;
    let corrupt = spec.b as u64;
    (0..spec.replicas)
        .into_par_iter()
        .map(|replica| {
            let seed = replica_seed(spec.seed, 0, replica as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nb_dist = rand_distr::Binomial::new(honest, spec.p).expect("valid p");
            let ab_dist = rand_distr::Binomial::new(corrupt, spec.p).expect("valid p");
            let mut walk = OpportunityWalk::new();
            while walk.nonempty_rounds() < spec.m as u64 {
                let nb = rng.sample(nb_dist) as u32;
                let ab = if corrupt > 0 { rng.sample(ab_dist) as u32 } else { 0 };
                if nb + ab > 0 {
                    walk.update(nb, ab).expect("nonempty round");
                }
            }
            walk.value()
        })
        .collect()
}

/// Randomized chain constructions thrown at the validator. Every verdict
/// is re-checked against a brute-force re-verification of the validation
/// conditions, independent of the cached validator path.
#[derive(Debug, Clone)]
pub struct VdfFuzzSpec {
    pub name: String,
    pub chains: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VdfFuzzReport {
    pub chains: u32,
    pub accepted: u32,
    pub rejected: u32,
    /// Accepted chains that violate any condition per the brute-force
    /// re-check (must stay 0).
    pub false_accepts: u32,
    /// Rejected chains that the brute-force re-check accepts (must stay 0).
    pub false_rejects: u32,
    /// Accepted chains longer than round+1 (must stay 0).
    pub overlong_accepts: u32,
}

/// Brute-force re-verification: walks the whole chain and re-checks the
/// conditions from scratch.
fn brute_force_valid(store: &BlockStore, tip: lcsim::chain::BlockId, round: u32) -> bool {
    let mut rounds_rev = Vec::new();
    let mut cur = tip;
    loop {
        let b = store.get(cur).unwrap();
        match store.parent_id(cur).unwrap() {
            Some(parent) => {
                rounds_rev.push(b.vdf_round);
                cur = parent;
            }
            None => break,
        }
    }
    let vdf_rounds: Vec<u32> = rounds_rev.into_iter().rev().collect();
    for (i, &r) in vdf_rounds.iter().enumerate() {
        let position = i as u32 + 1;
        if i > 0 && r <= vdf_rounds[i - 1] {
            return false; // duplicate or decreasing
        }
        if r + 1 < position {
            return false; // below the position bound
        }
        if r >= round {
            return false; // output from the future
        }
    }
    true
}

pub fn run_vdf_fuzz(spec: &VdfFuzzSpec) -> VdfFuzzReport {
    let reports: Vec<VdfFuzzReport> = (0..spec.chains)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(spec.seed, 1, i as u64));
            let mut minter = IdMinter::new(replica_seed(spec.seed, 2, i as u64));
            let mut store = BlockStore::new(&mut minter);
            let mut validator = ChainValidator::new();
            let horizon: u32 = rng.random_range(1..40);
            let len: u32 = rng.random_range(1..horizon + 6);
            let mode: u32 = rng.random_range(0..5);
            let mut tip = store.genesis_id();
            let mut prev_vdf: i64 = -1;
            for k in 1..=len {
                let vdf_round: u32 = match mode {
                    // honest-like: previous round's output at each step
                    0 => k - 1,
                    // increasing with random gaps
                    1 => (prev_vdf + 1 + rng.random_range(0..3)) as u32,
                    // occasional duplicates
                    2 => {
                        if prev_vdf >= 0 && rng.random_range(0..4) == 0 {
                            prev_vdf as u32
                        } else {
                            (prev_vdf + 1) as u32
                        }
                    }
                    // occasional decreases
                    3 => {
                        if prev_vdf > 0 && rng.random_range(0..4) == 0 {
                            rng.random_range(0..prev_vdf as u32)
                        } else {
                            (prev_vdf + 1 + rng.random_range(0..2)) as u32
                        }
                    }
                    // anything goes
                    _ => rng.random_range(0..horizon + 4),
                };
                prev_vdf = vdf_round as i64;
                let parent_round = store.get(tip).unwrap().round;
                tip = store
                    .extend(tip, minter.mint(), 0, parent_round + 1, false, vdf_round)
                    .unwrap();
            }
            let verdict = validator.validate(&store, tip, horizon).unwrap();
            let oracle = brute_force_valid(&store, tip, horizon);
            let chain_len = store.get(tip).unwrap().depth + 1;
            let mut rep = VdfFuzzReport { chains: 1, ..Default::default() };
            match verdict {
                Ok(()) => {
                    rep.accepted = 1;
                    if !oracle {
                        rep.false_accepts = 1;
                    }
                    if chain_len > horizon + 1 {
                        rep.overlong_accepts = 1;
                    }
                }
                Err(_) => {
                    rep.rejected = 1;
                    if oracle {
                        rep.false_rejects = 1;
                    }
                }
            }
            rep
        })
        .collect();
    let mut total = VdfFuzzReport::default();
    for r in reports {
        total.chains += r.chains;
        total.accepted += r.accepted;
        total.rejected += r.rejected;
        total.false_accepts += r.false_accepts;
        total.false_rejects += r.false_rejects;
        total.overlong_accepts += r.overlong_accepts;
    }
    total
}
