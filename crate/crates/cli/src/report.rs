//! Report rendering and all-or-nothing output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chargecache::analytics::ChargeModel;
use chargecache::controller::ChannelStats;
use chargecache::dram::{DramCommand, TimingClass};
use chargecache::energy::{activation_energy, PowerParams};
use chargecache::policy::{hit_rate, PolicyStats};
use chargecache::sim::{Experiment, RunResult};
use chargecache::RunConfig;
use serde::Serialize;

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Per-core results. Contains nothing policy-specific beyond the timing
/// outcome, so identical schedules give identical files.
pub fn metrics_csv(run: &RunResult, alone_ipcs: &[f64]) -> String {
    let mut s = String::from(
        "core,instructions,cycles,ipc,alone_ipc,reads,writes,activations,reduced_activations,hit_rate,stall_cycles\n",
    );
    for (i, c) in run.cores.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{:.6},{},{},{},{},{},{},{}",
            c.instructions,
            c.cycles,
            c.ipc,
            opt(alone_ipcs.get(i).copied()),
            c.reads,
            c.writes,
            c.acts.total(),
            c.acts.reduced,
            c.acts.hit_rate(),
            c.stall_cycles
        );
    }
    let acts = run.acts();
    let _ = writeln!(
        s,
        "all,{},{},{:.6},,{},{},{},{},{},{}",
        run.cores.iter().map(|c| c.instructions).sum::<u64>(),
        run.cores.iter().map(|c| c.cycles).max().unwrap_or(0),
        run.cores.iter().map(|c| c.ipc).sum::<f64>(),
        run.cores.iter().map(|c| c.reads).sum::<u64>(),
        run.cores.iter().map(|c| c.writes).sum::<u64>(),
        acts.total(),
        acts.reduced,
        acts.hit_rate(),
        run.cores.iter().map(|c| c.stall_cycles).sum::<u64>()
    );
    s
}

pub fn summary_csv(cfg: &RunConfig, exp: &Experiment) -> String {
    let run = &exp.main;
    let rows: Vec<(&str, String)> = vec![
        ("policy", run.policy.to_string()),
        ("cores", run.cores.len().to_string()),
        ("channels", cfg.geometry.channels.to_string()),
        (
            "row_policy",
            format!("{:?}", cfg.row_policy(run.cores.len())).to_lowercase(),
        ),
        ("warmup_mem_cycles", run.warmup_mem_cycles.to_string()),
        ("finish_mem_cycle", run.finish_mem_cycle.to_string()),
        ("mem_cycles", run.mem_cycles.to_string()),
        ("weighted_speedup", opt(exp.metrics.weighted_speedup)),
        (
            "baseline_weighted_speedup",
            opt(exp.baseline_metrics.weighted_speedup),
        ),
        ("speedup_vs_baseline", opt(exp.speedup())),
        ("hit_rate", run.acts().hit_rate().to_string()),
        ("avg_read_latency", opt(run.total.avg_read_latency())),
        ("energy_total_j", format!("{:.9e}", run.energy.total)),
        ("energy_vs_baseline_pct", opt(exp.energy_delta_percent())),
    ];
    let mut s = String::from("metric,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

fn energy_row(
    s: &mut String,
    label: &str,
    run: &RunResult,
    power: &PowerParams,
    cfg: &RunConfig,
    pct: Option<f64>,
) {
    let timings = cfg.timing_set().expect("validated");
    let c = &run.total.commands;
    let std_j = c.act_standard as f64 * activation_energy(power, &timings, TimingClass::Standard);
    let red_j = c.act_reduced as f64 * activation_energy(power, &timings, TimingClass::Reduced);
    let e = &run.energy;
    let _ = writeln!(
        s,
        "{label},{:.9e},{std_j:.9e},{red_j:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
        e.act_pre,
        e.read,
        e.write,
        e.refresh,
        e.background,
        e.hcrac,
        e.total,
        opt(pct)
    );
}

/// Energy components in joules for the run and its Baseline reference.
pub fn energy_csv(cfg: &RunConfig, exp: &Experiment) -> String {
    let mut s = String::from(
        "run,act_pre_j,act_pre_standard_j,act_pre_reduced_j,read_j,write_j,refresh_j,background_j,hcrac_j,total_j,percent_vs_baseline\n",
    );
    energy_row(
        &mut s,
        exp.main.policy.name(),
        &exp.main,
        &cfg.power,
        cfg,
        exp.energy_delta_percent(),
    );
    if let Some(b) = &exp.baseline {
        energy_row(&mut s, "baseline-reference", b, &cfg.power, cfg, Some(0.0));
    }
    s
}

pub fn controller_csv(channels: &[ChannelStats]) -> String {
    let mut s = String::from(
        "channel,cycles,act_standard,act_reduced,pre,rd,wr,ref,row_hits,row_misses,row_conflicts,avg_read_latency,active_rank_cycles,precharged_rank_cycles\n",
    );
    for (i, c) in channels.iter().enumerate() {
        let k = &c.commands;
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.cycles,
            k.act_standard,
            k.act_reduced,
            k.pre,
            k.rd,
            k.wr,
            k.refresh,
            c.row_hits,
            c.row_misses,
            c.row_conflicts,
            opt(c.avg_read_latency()),
            c.residency.active_cycles,
            c.residency.precharged_cycles
        );
    }
    s
}

/// Non-empty bins of the per-cycle queue occupancy histograms.
pub fn queue_hist_csv(channels: &[ChannelStats]) -> String {
    let mut s = String::from("channel,queue,occupancy,cycles\n");
    for (i, c) in channels.iter().enumerate() {
        for (name, hist) in [("read", &c.read_queue_hist), ("write", &c.write_queue_hist)] {
            for (occ, &n) in hist.iter().enumerate().filter(|(_, n)| **n > 0) {
                let _ = writeln!(s, "{i},{name},{occ},{n}");
            }
        }
    }
    s
}

pub fn policy_csv(p: &PolicyStats) -> String {
    format!(
        "lookups,hits,insertions,evictions,expired_on_lookup,expired_by_sweep,lookup_hit_rate\n{},{},{},{},{},{},{}\n",
        p.lookups,
        p.hits,
        p.insertions,
        p.evictions,
        p.expired_on_lookup,
        p.expired_by_sweep,
        hit_rate(p.hits, p.lookups)
    )
}

pub fn command_trace(commands: &[DramCommand]) -> String {
    let mut s = String::from("# cycle kind channel rank bank row column class\n");
    for c in commands {
        let _ = writeln!(s, "{c}");
    }
    s
}

#[derive(Serialize)]
struct RunReport<'a> {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    warnings: &'a [String],
    charge_model: Option<ChargeModel>,
    config: &'a RunConfig,
}

pub fn run_report_json(cfg: &RunConfig, warnings: &[String]) -> Result<String> {
    let report = RunReport {
        tool: "chargecache",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.sim.seed,
        warnings,
        charge_model: ChargeModel::calibrated().ok(),
        config: cfg,
    };
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

/// Writes a set of files into `dir` so that either all of them appear or
/// none do: contents go to a staging directory first and are renamed into
/// place once every file has been written.
pub fn write_all_atomic(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let staging = tempfile::Builder::new()
        .prefix(".staging-")
        .tempdir_in(dir)
        .with_context(|| format!("creating staging directory in {}", dir.display()))?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    for (name, contents) in files {
        let tmp = staging.path().join(name);
        if let Some(parent) = tmp.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dst) in staged {
        if let Some(parent) = dst.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(&tmp, &dst).with_context(|| format!("moving {} into place", dst.display()))?;
    }
    Ok(())
}

/// Writes one file via a temporary sibling and a rename.
pub fn write_file_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    std::io::Write::write_all(&mut tmp, contents.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
