//! Command-line front end: argument parsing and subcommands.

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chargecache::analytics::{storage_overhead, OverheadInput, HCRAC_AREA_MM2, HCRAC_POWER_MW};
use chargecache::batch::{map_jobs, with_threads};
use chargecache::cpu::compute_metrics;
use chargecache::dram::verify_trace_text;
use chargecache::policy::PolicyKind;
use chargecache::sim::{run_experiment, simulate, RunResult, SimOptions};
use chargecache::trace::{
    activation_log, gen_synthetic, parse_trace, rltl, serialize_trace, GenParams, SyntheticKind,
    TraceRecord, DEFAULT_INTERVALS_MS,
};
use chargecache::{Error, RunConfig};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "chargecache",
    version,
    about = "Trace-driven DRAM simulator with a charge-aware latency cache"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a configuration and write metrics, energy and controller reports.
    Simulate(SimulateArgs),
    /// Row-level temporal locality of a workload under the Baseline policy.
    Rltl(RltlArgs),
    /// Check a DRAM command trace for timing and reduced-latency safety.
    Verify(VerifyArgs),
    /// Write a synthetic CPU trace.
    GenTrace(GenTraceArgs),
    /// HCRAC storage cost.
    Overhead(OverheadArgs),
    /// Run a grid of policies, table sizes and caching durations.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config's policy.
    #[arg(long)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub emit_cmd_trace: bool,
    /// Worker threads for the reference runs (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct RltlArgs {
    /// One trace per core; defaults to the config's traces.
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Analyze an existing command trace instead of simulating.
    #[arg(long, conflicts_with = "traces")]
    pub commands: Option<PathBuf>,
    /// Comma-separated intervals in milliseconds.
    #[arg(long, value_delimiter = ',')]
    pub intervals: Vec<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub command_trace: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<PolicyKind>,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[arg(long)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 1000)]
    pub requests: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// The two rows of a ping-pong trace.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub rows: Option<Vec<u32>>,
    /// Row population of the random kinds.
    #[arg(long, default_value_t = 1024)]
    pub row_count: u32,
    #[arg(long, default_value_t = 0)]
    pub first_row: u32,
    #[arg(long, default_value_t = 0)]
    pub bank: u32,
    #[arg(long, default_value_t = 1)]
    pub banks: u32,
    #[arg(long, default_value_t = 0)]
    pub channel: u32,
    #[arg(long, default_value_t = 1)]
    pub channels: u32,
    #[arg(long, default_value_t = 10)]
    pub nonmem: u64,
    #[arg(long, default_value_t = 0.0)]
    pub write_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zipf_exponent: f64,
}

#[derive(Debug, Args)]
pub struct OverheadArgs {
    #[arg(long, default_value_t = 8)]
    pub cores: u64,
    #[arg(long, default_value_t = 2)]
    pub channels: u64,
    #[arg(long, default_value_t = 128)]
    pub entries: u64,
    #[arg(long, default_value_t = 1)]
    pub ranks: u64,
    #[arg(long, default_value_t = 8)]
    pub banks: u64,
    #[arg(long, default_value_t = 65536)]
    pub rows: u64,
    #[arg(long, default_value_t = 1)]
    pub lru_bits: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "chargecache")]
    pub policy: Vec<PolicyKind>,
    #[arg(long, value_delimiter = ',')]
    pub entries: Vec<usize>,
    #[arg(long = "duration-ms", value_delimiter = ',')]
    pub duration_ms: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub emit_cmd_trace: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("command trace has {0} violations")]
    VerificationFailed(usize),
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Rltl(a) => cmd_rltl(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::GenTrace(a) => cmd_gen_trace(&a),
        Command::Overhead(a) => cmd_overhead(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let (cfg, warnings) =
        RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(cfg)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace(&text).map_err(|source| Error::Trace {
        path: path.display().to_string(),
        source,
    })
}

fn read_traces(paths: &[PathBuf]) -> Result<Vec<Vec<TraceRecord>>> {
    paths
        .iter()
        .map(|p| read_trace(p).map_err(Into::into))
        .collect()
}

/// The files `simulate` writes, by name.
pub fn simulate_outputs(
    cfg: &RunConfig,
    traces: &[Vec<TraceRecord>],
    emit_cmd_trace: bool,
) -> Result<Vec<(String, String)>> {
    let warnings = cfg.validate()?;
    let exp = run_experiment(
        cfg,
        traces,
        SimOptions {
            record_commands: emit_cmd_trace,
        },
    )?;
    let run = &exp.main;
    let mut files = vec![
        (
            "metrics.csv".to_string(),
            report::metrics_csv(run, &exp.alone_ipcs),
        ),
        ("summary.csv".to_string(), report::summary_csv(cfg, &exp)),
        ("energy.csv".to_string(), report::energy_csv(cfg, &exp)),
        (
            "controller.csv".to_string(),
            report::controller_csv(&run.channels),
        ),
        (
            "queue_hist.csv".to_string(),
            report::queue_hist_csv(&run.channels),
        ),
        (
            "policy.csv".to_string(),
            report::policy_csv(&run.policy_stats),
        ),
        (
            "run_report.json".to_string(),
            report::run_report_json(cfg, &warnings)?,
        ),
    ];
    if emit_cmd_trace {
        files.push((
            "cmd_trace.txt".to_string(),
            report::command_trace(&run.commands),
        ));
    }
    Ok(files)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(p) = a.policy {
        cfg.policy = p;
    }
    if let Some(s) = a.seed {
        cfg.sim.seed = s;
    }
    let traces = read_traces(&cfg.traces)?;
    let files = with_threads(a.jobs, || simulate_outputs(&cfg, &traces, a.emit_cmd_trace))?;
    report::write_all_atomic(&a.out, &files)?;
    println!("wrote {} files to {}", files.len(), a.out.display());
    Ok(())
}

pub fn cmd_rltl(a: &RltlArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let intervals = if a.intervals.is_empty() {
        DEFAULT_INTERVALS_MS.to_vec()
    } else {
        a.intervals.clone()
    };
    if let Some(bad) = intervals.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        bail!("interval {bad} must be a non-negative number of milliseconds");
    }
    let commands = if let Some(path) = &a.commands {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        chargecache::dram::parse_command_trace(&text)
            .map_err(|source| Error::Trace {
                path: path.display().to_string(),
                source,
            })?
            .into_iter()
            .map(|(_, c)| c)
            .collect()
    } else {
        if !a.traces.is_empty() {
            cfg.traces = a.traces.clone();
            if a.config.is_none() {
                cfg.geometry.channels = if cfg.traces.len() > 1 { 2 } else { 1 };
            }
        }
        if cfg.traces.is_empty() {
            bail!("no traces given");
        }
        cfg.policy = PolicyKind::Baseline;
        let traces = read_traces(&cfg.traces)?;
        simulate(
            &cfg,
            &traces,
            SimOptions {
                record_commands: true,
            },
        )?
        .commands
    };
    let curve = rltl(
        &activation_log(&commands),
        &intervals,
        cfg.timing.clock_period_ns,
    )?;
    let csv = curve.to_csv();
    match &a.out {
        Some(p) => report::write_file_atomic(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_toml_str(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            p.parent(),
        )?,
        None => RunConfig::default(),
    };
    if let Some(p) = a.policy {
        cfg.policy = p;
    }
    cfg.validate()?;
    let text = fs::read_to_string(&a.command_trace)
        .with_context(|| format!("reading {}", a.command_trace.display()))?;
    let rule = cfg.policy_spec(1).safety_rule();
    let rep = verify_trace_text(&text, &cfg.geometry, &cfg.timing, cfg.reduced, rule).map_err(
        |source| Error::Trace {
            path: a.command_trace.display().to_string(),
            source,
        },
    )?;
    println!(
        "commands={} act_standard={} act_reduced={} timing_violations={} safety_violations={}",
        rep.commands,
        rep.act_standard,
        rep.act_reduced,
        rep.timing_violations,
        rep.safety_violations
    );
    for v in rep.violations.iter().take(20) {
        println!("  {v}");
    }
    if rep.violations.len() > 20 {
        println!("  ... {} more", rep.violations.len() - 20);
    }
    if !rep.is_clean() {
        return Err(CliError::VerificationFailed(rep.violation_count()).into());
    }
    Ok(())
}

pub fn gen_params(a: &GenTraceArgs) -> GenParams {
    let mut p = GenParams {
        kind: a.kind,
        requests: a.requests,
        rows: a.row_count,
        first_row: a.first_row,
        bank: a.bank,
        banks: a.banks,
        channel: a.channel,
        nonmem: a.nonmem,
        write_fraction: a.write_fraction,
        zipf_exponent: a.zipf_exponent,
        seed: a.seed,
        ..Default::default()
    };
    p.geometry.channels = a.channels;
    if let Some(r) = &a.rows {
        p.ping_pong_rows = (r[0], r[1]);
    }
    p
}

pub fn cmd_gen_trace(a: &GenTraceArgs) -> Result<()> {
    let p = gen_params(a);
    let recs = gen_synthetic(&p)?;
    let header = format!(
        "# {} requests={} seed={} nonmem={}\n",
        p.kind, p.requests, p.seed, p.nonmem
    );
    report::write_file_atomic(&a.out, &(header + &serialize_trace(&recs)))?;
    Ok(())
}

#[derive(Serialize)]
struct Quoted {
    value: f64,
    unit: &'static str,
    source: &'static str,
}

#[derive(Serialize)]
struct OverheadJson {
    inputs: OverheadInput,
    entry_size_bits: u64,
    bits_per_entry_with_lru: u64,
    total_bits: u64,
    total_bytes: u64,
    bytes_per_core: u64,
    area: Quoted,
    power: Quoted,
}

pub fn overhead_json(input: &OverheadInput) -> Result<String> {
    let r = storage_overhead(input)?;
    let quoted = "published reference value (not computed)";
    let json = OverheadJson {
        inputs: *input,
        entry_size_bits: r.entry_size_bits,
        bits_per_entry_with_lru: r.entry_size_bits + input.lru_bits_per_entry,
        total_bits: r.total_bits,
        total_bytes: r.total_bytes,
        bytes_per_core: r.bytes_per_core,
        area: Quoted {
            value: HCRAC_AREA_MM2,
            unit: "mm^2",
            source: quoted,
        },
        power: Quoted {
            value: HCRAC_POWER_MW,
            unit: "mW",
            source: quoted,
        },
    };
    Ok(serde_json::to_string_pretty(&json)? + "\n")
}

pub fn cmd_overhead(a: &OverheadArgs) -> Result<()> {
    let input = OverheadInput {
        cores: a.cores,
        channels: a.channels,
        entries: a.entries,
        ranks: a.ranks,
        banks: a.banks,
        rows: a.rows,
        lru_bits_per_entry: a.lru_bits,
    };
    let json = overhead_json(&input)?;
    match &a.out {
        Some(p) => report::write_file_atomic(p, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: RunConfig,
}

pub fn sweep_points(
    base: &RunConfig,
    policies: &[PolicyKind],
    entries: &[usize],
    durations: &[f64],
) -> Vec<SweepPoint> {
    let entries: Vec<usize> = if entries.is_empty() {
        vec![base.hcrac.entries_per_core]
    } else {
        entries.to_vec()
    };
    let durations: Vec<f64> = if durations.is_empty() {
        vec![base.hcrac.caching_duration_ms]
    } else {
        durations.to_vec()
    };
    let mut out = Vec::new();
    for &p in policies {
        // entry count and duration only matter to HCRAC policies
        let (es, ds) = if p.uses_hcrac() {
            (entries.clone(), durations.clone())
        } else {
            (
                vec![base.hcrac.entries_per_core],
                vec![base.hcrac.caching_duration_ms],
            )
        };
        for &e in &es {
            for &d in &ds {
                let mut c = base.clone();
                c.policy = p;
                c.hcrac.entries_per_core = e;
                c.hcrac.caching_duration_ms = d;
                let label = if p.uses_hcrac() {
                    format!("{p}-e{e}-d{d}")
                } else {
                    p.to_string()
                };
                out.push(SweepPoint {
                    label: label.replace('+', "-"),
                    config: c,
                });
            }
        }
    }
    out
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut base = load_config(&a.config)?;
    if let Some(s) = a.seed {
        base.sim.seed = s;
    }
    let points = sweep_points(&base, &a.policy, &a.entries, &a.duration_ms);
    for p in &points {
        p.config
            .validate()
            .with_context(|| format!("sweep point {}", p.label))?;
    }
    let traces = read_traces(&base.traces)?;
    let n = traces.len();
    let opts = SimOptions {
        record_commands: a.emit_cmd_trace,
    };

    // every grid point, the Baseline and each solo run are independent
    let mut solo = base.clone();
    solo.policy = PolicyKind::Baseline;
    solo.controller.row_policy = match base.row_policy(n) {
        chargecache::controller::RowPolicy::Open => chargecache::controller::RowPolicySetting::Open,
        chargecache::controller::RowPolicy::Closed => {
            chargecache::controller::RowPolicySetting::Closed
        }
    };
    enum Job<'a> {
        Point(&'a SweepPoint),
        Baseline,
        Alone(usize),
    }
    let mut jobs: Vec<Job> = points.iter().map(Job::Point).collect();
    jobs.push(Job::Baseline);
    jobs.extend((0..n).map(Job::Alone));
    let results: Vec<Result<RunResult, Error>> = with_threads(a.jobs, || {
        map_jobs(&jobs, |j| match j {
            Job::Point(p) => simulate(&p.config, &traces, opts),
            Job::Baseline => simulate(&solo, &traces, SimOptions::default()),
            Job::Alone(i) => simulate(
                &solo,
                std::slice::from_ref(&traces[*i]),
                SimOptions::default(),
            ),
        })
    });
    let mut results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let alone: Vec<f64> = results
        .split_off(points.len() + 1)
        .iter()
        .map(|r| r.cores[0].ipc)
        .collect();
    let baseline = results.pop().expect("baseline run");
    let base_ws = compute_metrics(&baseline.core_cycles(), Some(&alone)).weighted_speedup;

    let mut files = Vec::new();
    let mut summary = String::from(
        "label,policy,entries_per_core,caching_duration_ms,finish_mem_cycle,mem_cycles,weighted_speedup,speedup_vs_baseline,hit_rate,energy_total_j,energy_vs_baseline_pct\n",
    );
    for (p, r) in points.iter().zip(&results) {
        let ws = compute_metrics(&r.core_cycles(), Some(&alone)).weighted_speedup;
        let speedup = ws.zip(base_ws).map(|(a, b)| a / b);
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.9e},{}\n",
            p.label,
            p.config.policy,
            p.config.hcrac.entries_per_core,
            p.config.hcrac.caching_duration_ms,
            r.finish_mem_cycle,
            r.mem_cycles,
            fmt(ws),
            fmt(speedup),
            r.acts().hit_rate(),
            r.energy.total,
            fmt(r.energy.percent_vs(&baseline.energy))
        ));
        files.push((
            format!("{}/metrics.csv", p.label),
            report::metrics_csv(r, &alone),
        ));
        files.push((
            format!("{}/controller.csv", p.label),
            report::controller_csv(&r.channels),
        ));
        files.push((
            format!("{}/policy.csv", p.label),
            report::policy_csv(&r.policy_stats),
        ));
        if a.emit_cmd_trace {
            files.push((
                format!("{}/cmd_trace.txt", p.label),
                report::command_trace(&r.commands),
            ));
        }
    }
    files.push(("sweep.csv".to_string(), summary));
    report::write_all_atomic(&a.out, &files)?;
    println!(
        "{} sweep points written to {}",
        points.len(),
        a.out.display()
    );
    Ok(())
}
