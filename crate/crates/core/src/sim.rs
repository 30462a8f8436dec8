//! Whole-system run loop: cores, channel controllers and DRAM, advanced in
//! lock step with a fixed core-to-memory clock ratio.

use serde::Serialize;

use crate::batch::map_jobs;
use crate::config::RunConfig;
use crate::controller::{map_address, Channel, ChannelStats, Completion, MemRequest, ReqKind};
use crate::cpu::{compute_metrics, Core, MemoryPort, MetricsReport, SendOutcome};
use crate::dram::{DramCommand, DramGeometry};
use crate::energy::{energy_from_run, EnergyReport};
use crate::error::{ConfigError, Error};
use crate::policy::{ActCounts, PolicyKind, PolicyStats};
use crate::trace::{AccessKind, TraceRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep every issued DRAM command (warm-up included).
    pub record_commands: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreResult {
    pub instructions: u64,
    /// Core cycles of the measured phase until the budget was retired.
    pub cycles: u64,
    pub ipc: f64,
    pub reads: u64,
    pub writes: u64,
    pub stall_cycles: u64,
    pub acts: ActCounts,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub policy: PolicyKind,
    pub cores: Vec<CoreResult>,
    pub channels: Vec<ChannelStats>,
    pub total: ChannelStats,
    pub policy_stats: PolicyStats,
    /// Memory cycles of the measured phase, drain included.
    pub mem_cycles: u64,
    /// Memory cycle (from the start of the measured phase) when the last
    /// core reached its budget.
    pub finish_mem_cycle: u64,
    pub warmup_mem_cycles: u64,
    pub energy: EnergyReport,
    pub commands: Vec<DramCommand>,
}

impl RunResult {
    pub fn acts(&self) -> ActCounts {
        self.total.acts()
    }

    pub fn core_cycles(&self) -> Vec<(u64, u64)> {
        self.cores
            .iter()
            .map(|c| (c.instructions, c.cycles))
            .collect()
    }
}

struct MemSystem {
    channels: Vec<Channel>,
    geometry: DramGeometry,
    now: u64,
}

impl MemoryPort for MemSystem {
    fn send(&mut self, core: usize, kind: AccessKind, address: u64, token: u64) -> SendOutcome {
        let coord =
            map_address(address, &self.geometry).expect("addresses are checked before the run");
        let kind = match kind {
            AccessKind::Read => ReqKind::Read,
            AccessKind::Write => ReqKind::Write,
        };
        let ch = &mut self.channels[coord.channel as usize];
        // requests made during memory cycle `now` reach the controller next cycle
        match ch.enqueue(MemRequest::new(
            core,
            kind,
            address,
            coord,
            token,
            self.now + 1,
        )) {
            Ok(()) => SendOutcome::Accepted,
            Err(_) => SendOutcome::Rejected,
        }
    }
}

fn check_traces(traces: &[Vec<TraceRecord>], geometry: &DramGeometry) -> Result<(), Error> {
    if traces.is_empty() {
        return Err(ConfigError::Invalid("at least one core trace is required".into()).into());
    }
    for (core, t) in traces.iter().enumerate() {
        if t.is_empty() {
            return Err(
                ConfigError::Invalid(format!("trace for core {core} has no records")).into(),
            );
        }
        if let Some(r) = t.iter().find(|r| r.address >= geometry.capacity_bytes()) {
            map_address(r.address, geometry)?;
        }
    }
    Ok(())
}

/// Runs one configuration over one trace per core.
pub fn simulate(
    cfg: &RunConfig,
    traces: &[Vec<TraceRecord>],
    opts: SimOptions,
) -> Result<RunResult, Error> {
    cfg.validate()?;
    check_traces(traces, &cfg.geometry)?;
    let n = traces.len();
    let timings = cfg.timing_set()?;
    let row_policy = cfg.row_policy(n);
    let spec = cfg.policy_spec(n);
    let mut mem = MemSystem {
        channels: (0..cfg.geometry.channels)
            .map(|id| {
                let mut ch = Channel::new(
                    id,
                    cfg.geometry,
                    timings,
                    row_policy,
                    cfg.controller,
                    spec.build(),
                    n,
                );
                ch.record_commands(opts.record_commands);
                ch
            })
            .collect(),
        geometry: cfg.geometry,
        now: 0,
    };
    let budget = cfg.sim.instruction_budget;
    let mut cores: Vec<Core> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| Core::new(i, cfg.core, t.clone(), budget))
        .collect();

    let ratio = u64::from(cfg.core.clock_ratio);
    let reset_at = cfg.sim.warmup_cycles.div_ceil(ratio);
    let mut completions: Vec<Completion> = Vec::new();
    let mut draining = false;
    let mut finish_at = 0;
    let mut last_progress = 0;
    let mut last_retired = 0;
    let mut m = 0u64;
    loop {
        if m == reset_at && m > 0 {
            for ch in &mut mem.channels {
                ch.reset_stats();
            }
            for c in &mut cores {
                c.reset_stats(m * ratio);
            }
        }
        mem.now = m;
        for ch in &mut mem.channels {
            if ch.tick(m).is_some() {
                last_progress = m;
            }
            ch.drain_completions(m, &mut completions);
        }
        for c in completions.drain(..) {
            cores[c.core_id].complete(c.token);
        }
        for k in 0..ratio {
            let now = m * ratio + k;
            for core in &mut cores {
                core.tick(now, &mut mem);
            }
        }
        let retired: u64 = cores.iter().map(|c| c.retired()).sum();
        if retired != last_retired {
            last_retired = retired;
            last_progress = m;
        }
        if !draining && m >= reset_at && cores.iter().all(Core::is_finished) {
            draining = true;
            finish_at = m + 1;
            for c in &mut cores {
                c.stop_fetch();
            }
        }
        if draining
            && mem.channels.iter().all(Channel::is_drained)
            && cores.iter().all(|c| c.outstanding_reads() == 0)
        {
            break;
        }
        if m - last_progress > cfg.sim.stall_limit {
            return Err(Error::Simulation(format!(
                "no progress for {} memory cycles at cycle {m}",
                cfg.sim.stall_limit
            )));
        }
        m += 1;
    }
    let mem_cycles = m + 1 - reset_at;

    let mut total = ChannelStats::default();
    let mut policy_stats = PolicyStats::default();
    let mut commands = Vec::new();
    let mut channels = Vec::new();
    for ch in &mut mem.channels {
        total.merge(ch.stats());
        policy_stats.merge(&ch.policy_stats());
        channels.push(ch.stats().clone());
        commands.extend(ch.take_log());
    }
    commands.sort_by_key(|c| (c.issue_time, c.coord.channel));
    debug_assert!(channels.iter().all(|c| c.cycles == mem_cycles));

    let ranks = u64::from(cfg.geometry.channels) * u64::from(cfg.geometry.ranks_per_channel);
    let energy = energy_from_run(
        &total.commands,
        &total.residency,
        &cfg.power,
        &timings,
        mem_cycles,
        ranks,
        cfg.policy.uses_hcrac(),
    )?;

    let core_results = cores
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let cycles = c.measured_cycles().expect("every core finished");
            CoreResult {
                instructions: budget,
                cycles,
                ipc: budget as f64 / cycles as f64,
                reads: c.reads_sent(),
                writes: c.writes_sent(),
                stall_cycles: c.stall_cycles(),
                acts: total.acts_per_core[i],
            }
        })
        .collect();

    Ok(RunResult {
        policy: cfg.policy,
        cores: core_results,
        channels,
        total,
        policy_stats,
        mem_cycles,
        finish_mem_cycle: finish_at - reset_at,
        warmup_mem_cycles: reset_at,
        energy,
        commands,
    })
}

/// A policy run together with its Baseline reference and solo-run IPCs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub main: RunResult,
    /// `None` when the main run already is the Baseline.
    pub baseline: Option<RunResult>,
    pub alone_ipcs: Vec<f64>,
    pub metrics: MetricsReport,
    pub baseline_metrics: MetricsReport,
}

impl Experiment {
    pub fn baseline(&self) -> &RunResult {
        self.baseline.as_ref().unwrap_or(&self.main)
    }

    /// Weighted speedup of the main policy over the Baseline.
    pub fn speedup(&self) -> Option<f64> {
        Some(self.metrics.weighted_speedup? / self.baseline_metrics.weighted_speedup?)
    }

    /// Percent change in total DRAM energy versus the Baseline.
    pub fn energy_delta_percent(&self) -> Option<f64> {
        self.main.energy.percent_vs(&self.baseline().energy)
    }
}

enum Job<'a> {
    Main,
    Baseline,
    Alone(&'a Vec<TraceRecord>),
}

/// Runs `cfg`, a Baseline reference and one Baseline solo run per trace
/// (same geometry and row policy), all independent and run through
/// [`map_jobs`].
pub fn run_experiment(
    cfg: &RunConfig,
    traces: &[Vec<TraceRecord>],
    opts: SimOptions,
) -> Result<Experiment, Error> {
    cfg.validate()?;
    let mut solo = cfg.clone();
    solo.policy = PolicyKind::Baseline;
    solo.controller.row_policy = match cfg.row_policy(traces.len()) {
        crate::controller::RowPolicy::Open => crate::controller::RowPolicySetting::Open,
        crate::controller::RowPolicy::Closed => crate::controller::RowPolicySetting::Closed,
    };
    let mut jobs = vec![Job::Main];
    if cfg.policy != PolicyKind::Baseline {
        jobs.push(Job::Baseline);
    }
    jobs.extend(traces.iter().map(Job::Alone));
    let quiet = SimOptions {
        record_commands: false,
    };
    let mut results = map_jobs(&jobs, |job| match job {
        Job::Main => simulate(cfg, traces, opts),
        Job::Baseline => simulate(&solo, traces, quiet),
        Job::Alone(t) => simulate(&solo, std::slice::from_ref(*t), quiet),
    })
    .into_iter();
    let main = results.next().expect("main job")?;
    let baseline = if cfg.policy != PolicyKind::Baseline {
        Some(results.next().expect("baseline job")?)
    } else {
        None
    };
    let alone_ipcs = results
        .map(|r| r.map(|r| r.cores[0].ipc))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = compute_metrics(&main.core_cycles(), Some(&alone_ipcs));
    let baseline_metrics = compute_metrics(
        &baseline.as_ref().unwrap_or(&main).core_cycles(),
        Some(&alone_ipcs),
    );
    Ok(Experiment {
        main,
        baseline,
        alone_ipcs,
        metrics,
        baseline_metrics,
    })
}
