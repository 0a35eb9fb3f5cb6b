//! `lcsim` command line: run presets or config files, print closed-form
//! bounds, regenerate the calibration artifact, export block trees.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use lcsim::bounds::{
    honest_majority_p_bound, inconsistency_theorem_params, opportunity_lower_bound,
    theorem_success_probability, transition_probs,
};
use lcsim::engine::{run, run_with_mode, trace_to_json, write_trace_csv, RecordMode, SimConfig};

use lcsim_cli::calibrate;
use lcsim_cli::config::parse_config;
use lcsim_cli::experiment::{
    run_experiment, run_jwalk, run_vdf_fuzz, run_walk_sweep, write_cell_csv, write_replica_csv,
    write_walk_csv,
};
use lcsim_cli::presets::{preset, Preset, PRESET_NAMES};

#[derive(Parser)]
#[command(name = "lcsim", about = "Longest-chain consensus simulator and analysis harness")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a named preset or a key=value config file.
    Run {
        /// Preset name (see --list).
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Path to a key=value config file for a single full-trace run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for CSV/JSON artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Divide preset replica counts by this factor (smoke runs).
        #[arg(long)]
        scale: Option<u32>,
        /// Re-derive aggregates from raw rows and verify they match.
        #[arg(long)]
        audit: bool,
        /// List available presets and exit.
        #[arg(long)]
        list: bool,
    },
    /// Print every closed-form bound for (n, b, p, epsilon) as JSON.
    Bounds {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Measure the asymptotic constants and write the calibration artifact.
    Calibrate {
        #[arg(long, default_value = "crates/cli/data/calibration.json")]
        out: PathBuf,
        /// Divide calibration replica counts by this factor.
        #[arg(long)]
        scale: Option<u32>,
    },
    /// Export a run's block tree as Graphviz DOT.
    ExportDot {
        /// Preset name (must be a single-trace preset, e.g. fig1).
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out/blocktree.dot")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    init_workers()?;
    match Cli::parse().command {
        Commands::Run { preset, config, out, scale, audit, list } => {
            if list {
                for name in PRESET_NAMES {
                    println!("{name}");
                }
                return Ok(());
            }
            match (preset, config) {
                (Some(name), None) => run_preset(&name, &out, scale, audit),
                (None, Some(path)) => run_config(&path, &out),
                _ => bail!("pass exactly one of --preset or --config (or --list)"),
            }
        }
        Commands::Bounds { n, b, p, epsilon } => print_bounds(n, b, p, epsilon),
        Commands::Calibrate { out, scale } => {
            let cal = calibrate::calibrate(scale);
            if let Some(dir) = out.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&out, cal.to_json()).with_context(|| format!("writing {out:?}"))?;
            println!("calibration written to {}", out.display());
            println!("{}", cal.to_json());
            Ok(())
        }
        Commands::ExportDot { preset: preset_name, config, out } => {
            let cfg = match (preset_name, config) {
                (Some(name), None) => match preset(&name, None) {
                    Some(Preset::Trace(cfg)) => cfg,
                    Some(_) => bail!("preset {name} is a sweep; use a trace preset like fig1"),
                    None => bail!("unknown preset {name}"),
                },
                (None, Some(path)) => load_config(&path)?,
                _ => bail!("pass exactly one of --preset or --config"),
            };
            let (_, world) = run_with_mode(&cfg, RecordMode::Summary)?;
            if let Some(dir) = out.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&out, world.store().to_dot())?;
            println!("DOT written to {}", out.display());
            Ok(())
        }
    }
}

/// Worker count from LCSIM_WORKERS (default: all cores).
fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var("LCSIM_WORKERS") {
        let workers: usize = v.parse().map_err(|_| anyhow!("LCSIM_WORKERS must be a number"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("rayon pool")?;
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path:?}"))?;
    parse_config(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn run_config(path: &Path, out: &Path) -> Result<()> {
    let cfg = load_config(path)?;
    let trace = run(&cfg)?;
    fs::create_dir_all(out)?;
    let csv_path = out.join("trace.csv");
    let mut csv = Vec::new();
    write_trace_csv(&trace, &mut csv)?;
    fs::write(&csv_path, &csv)?;
    fs::write(out.join("trace.json"), trace_to_json(&trace))?;
    let s = &trace.summary;
    println!(
        "rounds {}  prefix {}  inconsistency {}  quality {:.4}  blocks {}",
        s.rounds,
        s.final_prefix.common_prefix_len,
        s.final_prefix.max_inconsistency,
        s.chain_quality,
        s.blocks_stored
    );
    println!("trace written to {}", csv_path.display());
    Ok(())
}

fn run_preset(name: &str, out: &Path, scale: Option<u32>, audit: bool) -> Result<()> {
    let p = preset(name, scale).ok_or_else(|| anyhow!("unknown preset {name} (try --list)"))?;
    fs::create_dir_all(out)?;
    match p {
        Preset::Trace(cfg) => {
            let trace = run(&cfg)?;
            let mut csv = Vec::new();
            write_trace_csv(&trace, &mut csv)?;
            fs::write(out.join(format!("{name}_trace.csv")), &csv)?;
            let (_, world) = run_with_mode(&cfg, RecordMode::Summary)?;
            fs::write(out.join(format!("{name}.dot")), world.store().to_dot())?;
            println!(
                "{name}: prefix {} inconsistency {} (trace + DOT in {})",
                trace.summary.final_prefix.common_prefix_len,
                trace.summary.final_prefix.max_inconsistency,
                out.display()
            );
        }
        Preset::Protocol(spec) => {
            let (rows, aggs) = run_experiment(&spec);
            if audit {
                let again =
                    lcsim_cli::experiment::aggregate(&spec.cells(), spec.replicas, &rows);
                if again != aggs {
                    bail!("self-audit failed: aggregates do not match raw rows");
                }
                println!("self-audit ok: aggregates match raw rows");
            }
            fs::write(out.join(format!("{name}_replicas.csv")), write_replica_csv(&rows))?;
            fs::write(out.join(format!("{name}_cells.csv")), write_cell_csv(&aggs))?;
            for a in &aggs {
                println!(
                    "{name} cell {} (n={} b={} p={} {}): inconsistency mean {:.4} sd {:.4}, quality {:.4}",
                    a.cell, a.cfg.n, a.cfg.b, a.cfg.p, a.cfg.adversary,
                    a.inconsistency_mean, a.inconsistency_std, a.quality_mean
                );
            }
        }
        Preset::Walks(spec) => {
            let rows = run_walk_sweep(&spec);
            fs::write(out.join(format!("{name}_walks.csv")), write_walk_csv(&rows))?;
            for (c, &(n_g, u, k)) in spec.cells.iter().enumerate() {
                let sample: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.cell == c as u32)
                    .map(|r| r.coalescence_time as f64)
                    .collect();
                println!(
                    "{name} cell {c} (n_g={n_g} u={u} k={k}): mean {:.4}",
                    lcsim_cli::stats::mean(&sample)
                );
            }
        }
        Preset::JWalk(spec) => {
            let finals = run_jwalk(&spec);
            let tp = transition_probs(spec.n as u64, spec.b as u64, spec.p)?;
            let bound = opportunity_lower_bound(tp, spec.m as u64);
            let (threshold, success) = bound.value;
            let hits = finals.iter().filter(|&&j| j as f64 >= threshold).count();
            let freq = hits as f64 / finals.len() as f64;
            let mut csv = String::from("#schema lcsim-jwalk v1\nreplica,j_final\n");
            for (i, j) in finals.iter().enumerate() {
                csv.push_str(&format!("{i},{j}\n"));
            }
            fs::write(out.join(format!("{name}_jwalk.csv")), csv)?;
            println!(
                "{name}: P(J({}) >= {threshold:.2}) = {freq:.6} (bound {success:.6}{})",
                spec.m,
                if bound.vacuous { ", vacuous" } else { "" }
            );
        }
        Preset::VdfFuzz(spec) => {
            let rep = run_vdf_fuzz(&spec);
            println!(
                "{name}: {} chains, {} accepted, {} rejected, false accepts {}, false rejects {}, overlong accepts {}",
                rep.chains, rep.accepted, rep.rejected, rep.false_accepts, rep.false_rejects,
                rep.overlong_accepts
            );
            if rep.false_accepts + rep.false_rejects + rep.overlong_accepts > 0 {
                bail!("validator disagreed with the brute-force oracle");
            }
        }
        Preset::QualityPair { ungated, gated } => {
            let (rows_u, aggs_u) = run_experiment(&ungated);
            let (rows_g, aggs_g) = run_experiment(&gated);
            fs::write(out.join(format!("{name}_ungated.csv")), write_replica_csv(&rows_u))?;
            fs::write(out.join(format!("{name}_gated.csv")), write_replica_csv(&rows_g))?;
            let improved = rows_u
                .iter()
                .zip(&rows_g)
                .filter(|(u, g)| g.chain_quality > u.chain_quality)
                .count();
            println!(
                "{name}: ungated quality mean {:.4}, gated {:.4}, improved pairs {}/{}",
                aggs_u[0].quality_mean,
                aggs_g[0].quality_mean,
                improved,
                rows_u.len()
            );
        }
    }
    Ok(())
}

fn print_bounds(n: u64, b: u64, p: f64, epsilon: f64) -> Result<()> {
    let majority = honest_majority_p_bound(n, b)?;
    let mut doc = serde_json::json!({
        "n": n, "b": b, "p": p, "epsilon": epsilon,
        "honest_majority_p_bound": {
            "numerator": majority.numer().to_string(),
            "denominator": majority.denom().to_string(),
            "value": *majority.numer() as f64 / *majority.denom() as f64,
        },
    });
    match transition_probs(n, b, p) {
        Ok(tp) => {
            doc["transition_probs"] = serde_json::json!({
                "p_plus": tp.p_plus, "p_minus": tp.p_minus, "p_star": tp.p_star,
            });
            let params = inconsistency_theorem_params(n, b, p, epsilon)?;
            doc["beta"] = serde_json::json!(params.value.beta);
            doc["m_star"] = serde_json::json!(params.value.m_star);
            doc["side_condition_ok"] = serde_json::json!(params.value.side_condition_ok);
            doc["theorem_vacuous"] = serde_json::json!(params.vacuous);
            if params.value.m_star.is_finite() {
                let m = params.value.m_star.ceil() as u64;
                let success = theorem_success_probability(&params.value, m);
                doc["success_probability_at_m_star"] = serde_json::json!({
                    "m": m, "value": success.value, "vacuous": success.vacuous,
                });
                let opp = opportunity_lower_bound(params.value.probs, m);
                doc["opportunity_bound_at_m_star"] = serde_json::json!({
                    "threshold": opp.value.0, "success_probability": opp.value.1,
                    "vacuous": opp.vacuous,
                });
            }
        }
        Err(e) => {
            doc["transition_probs_error"] = serde_json::json!(e.to_string());
        }
    }
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
