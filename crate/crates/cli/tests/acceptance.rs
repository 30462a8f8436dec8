//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chargecache::analytics::ChargeModel;
use chargecache::batch::map_jobs;
use chargecache::config::SimParams;
use chargecache::controller::RowPolicySetting;
use chargecache::cpu::{Core, CoreConfig, InstantMemory, MemoryPort, SendOutcome};
use chargecache::dram::{verify_command_trace, CommandKind, DramCommand, TimingClass};
use chargecache::energy::activation_energy;
use chargecache::policy::{classify_replay, HcracConfig, HcracParams, PolicyKind};
use chargecache::sim::{simulate, RunResult, SimOptions};
use chargecache::trace::{
    activation_log, gen_synthetic, rltl, AccessKind, GenParams, SyntheticKind, TraceRecord,
    DEFAULT_INTERVALS_MS,
};
use chargecache::RunConfig;
use chargecache_cli::simulate_outputs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const BIN: &str = env!("CARGO_BIN_EXE_chargecache");

fn config(policy: PolicyKind, budget: u64, row: RowPolicySetting) -> RunConfig {
    let mut c = RunConfig {
        policy,
        sim: SimParams {
            instruction_budget: budget,
            warmup_cycles: 0,
            ..Default::default()
        },
        ..Default::default()
    };
    c.controller.row_policy = row;
    c
}

fn synth(
    kind: SyntheticKind,
    requests: usize,
    nonmem: u64,
    banks: u32,
    rows: u32,
    wf: f64,
    seed: u64,
) -> Vec<TraceRecord> {
    gen_synthetic(&GenParams {
        kind,
        requests,
        nonmem,
        banks,
        rows,
        write_fraction: wf,
        seed,
        ..Default::default()
    })
    .expect("generator parameters")
}

fn run(cfg: &RunConfig, traces: &[Vec<TraceRecord>]) -> Result<RunResult, String> {
    simulate(
        cfg,
        traces,
        SimOptions {
            record_commands: true,
        },
    )
    .map_err(|e| format!("simulation failed: {e}"))
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN)
        .args(args)
        .output()
        .map_err(|e| format!("spawning {BIN}: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "`chargecache {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn within(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs()
}

fn strictly_sorted_samples(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn criterion_1() -> Outcome {
    let out = cli(&[
        "overhead",
        "--cores",
        "8",
        "--channels",
        "2",
        "--entries",
        "128",
        "--ranks",
        "1",
        "--banks",
        "8",
        "--rows",
        "65536",
        "--lru-bits",
        "1",
    ])?;
    let v: serde_json::Value = serde_json::from_str(&out).map_err(|e| format!("bad JSON: {e}"))?;
    let total = v["total_bytes"].as_u64();
    let per_core = v["bytes_per_core"].as_u64();
    ensure!(
        total == Some(5376),
        "total_bytes = {total:?}, expected 5376"
    );
    ensure!(
        per_core == Some(672),
        "bytes_per_core = {per_core:?}, expected 672"
    );
    Ok("5376 bytes total, 672 bytes/core".into())
}

fn criterion_2() -> Outcome {
    let m = ChargeModel::calibrated().map_err(|e| e.to_string())?;
    let err = |e: chargecache::analytics::AnalyticsError| e.to_string();
    let full = m.sensing_time(m.vdd).map_err(err)?;
    let aged = m.sensing_time_after(64.0).map_err(err)?;
    let (d_rcd, d_ras) = m.timing_reduction(0.0).map_err(err)?;
    ensure!(within(full, 10.0, 0.01), "sensing_time(full) = {full}");
    ensure!(within(aged, 14.5, 0.01), "sensing_time(V(64ms)) = {aged}");
    ensure!(within(d_rcd, 4.5, 0.01), "tRCD reduction at 0 = {d_rcd}");
    ensure!(within(d_ras, 9.6, 0.01), "tRAS reduction at 0 = {d_ras}");

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    // cell voltage strictly decreasing, sensing time strictly increasing in age
    let ages = strictly_sorted_samples(&mut rng, 0.0, m.retention_ms * 2.0, n);
    let mut prev: Option<(f64, f64, f64)> = None;
    for &t in &ages {
        let v = m.cell_voltage(t).map_err(err)?;
        let s = m.sensing_time_after(t).map_err(err)?;
        let (r, _) = m.timing_reduction(t).map_err(err)?;
        if let Some((pv, ps, pr)) = prev {
            ensure!(v < pv, "cell voltage not decreasing at t = {t} ms");
            ensure!(s > ps, "sensing time not increasing at t = {t} ms");
            ensure!(r <= pr, "timing reduction increases at t = {t} ms");
        }
        prev = Some((v, s, r));
    }
    // sensing time strictly decreasing in cell voltage
    let volts = strictly_sorted_samples(&mut rng, 0.5 * m.vdd + 1e-6, m.vdd, n);
    for w in volts.windows(2) {
        let a = m.sensing_time(w[0]).map_err(err)?;
        let b = m.sensing_time(w[1]).map_err(err)?;
        ensure!(
            b < a,
            "sensing time not decreasing in voltage at {} V",
            w[1]
        );
    }
    Ok(format!(
        "sense(full) {full:.4} ns, sense(64ms) {aged:.4} ns, reduction(0) ({d_rcd:.4}, {d_ras:.4}) ns; {} + {} monotone samples",
        ages.len(),
        volts.len()
    ))
}

fn criterion_3() -> Outcome {
    let policies = PolicyKind::ALL;
    let mut jobs: Vec<(String, RunConfig, Vec<Vec<TraceRecord>>)> = Vec::new();
    for (i, kind) in SyntheticKind::ALL.into_iter().enumerate() {
        for (j, &policy) in policies.iter().enumerate() {
            let idx = i * policies.len() + j;
            let row = if idx % 2 == 0 {
                RowPolicySetting::Closed
            } else {
                RowPolicySetting::Open
            };
            let wf = if kind == SyntheticKind::BankPingPong {
                0.0
            } else {
                0.2
            };
            let requests = if kind == SyntheticKind::BankPingPong {
                160_000
            } else {
                60_000
            };
            let nonmem = 1;
            let trace = synth(kind, requests, nonmem, 8, 64, wf, idx as u64);
            let mut cfg = config(policy, requests as u64 * (nonmem + 1), row);
            cfg.hcrac.caching_duration_ms = if idx % 3 == 0 { 0.05 } else { 1.0 };
            cfg.nuat.window_ms = if idx % 3 == 0 { 0.05 } else { 1.0 };
            jobs.push((format!("{policy}/{kind}/{row:?}"), cfg, vec![trace]));
        }
    }
    for (k, policy) in [PolicyKind::ChargeCache, PolicyKind::ChargeCachePlusNuat]
        .into_iter()
        .enumerate()
    {
        let traces: Vec<_> = (0..4)
            .map(|c| {
                synth(
                    SyntheticKind::ALL[c],
                    30_000,
                    1,
                    8,
                    64,
                    0.2,
                    100 + k as u64 * 4 + c as u64,
                )
            })
            .collect();
        let mut cfg = config(policy, 40_000, RowPolicySetting::Auto);
        cfg.geometry.channels = 2;
        jobs.push((format!("{policy}/4-core mix"), cfg, traces));
    }
    let results = map_jobs(&jobs, |(label, cfg, traces)| -> Result<usize, String> {
        let r = run(cfg, traces)?;
        let t = cfg.timing_set().map_err(|e| e.to_string())?;
        let rule = cfg.policy_spec(traces.len()).safety_rule();
        let rep = verify_command_trace(&r.commands, &cfg.geometry, t.base(), t.deltas, rule)
            .map_err(|e| format!("{label}: unparseable schedule: {e}"))?;
        ensure!(
            rep.commands >= 100_000,
            "{label}: only {} commands",
            rep.commands
        );
        ensure!(
            rep.is_clean(),
            "{label}: {} timing / {} safety violations, first: {}",
            rep.timing_violations,
            rep.safety_violations,
            rep.violations
                .first()
                .map(|v| v.to_string())
                .unwrap_or_default()
        );
        Ok(rep.commands)
    });
    let counts = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(format!(
        "{} simulations, {}..{} commands each, zero violations",
        counts.len(),
        counts.iter().min().unwrap_or(&0),
        counts.iter().max().unwrap_or(&0)
    ))
}

fn criterion_4() -> Outcome {
    let mut cases: Vec<(String, RunConfig, Vec<Vec<TraceRecord>>)> = Vec::new();
    for (i, kind) in SyntheticKind::ALL.into_iter().enumerate() {
        for row in [RowPolicySetting::Open, RowPolicySetting::Closed] {
            let cfg = config(PolicyKind::Baseline, 20_000, row);
            cases.push((
                format!("{kind}/{row:?}"),
                cfg,
                vec![synth(kind, 4000, 4, 8, 64, 0.2, i as u64)],
            ));
        }
    }
    let mut multi = config(PolicyKind::Baseline, 10_000, RowPolicySetting::Auto);
    multi.geometry.channels = 2;
    cases.push((
        "2-core mix".into(),
        multi,
        vec![
            synth(SyntheticKind::Zipf, 3000, 3, 8, 64, 0.1, 7),
            synth(SyntheticKind::BankPingPong, 3000, 3, 1, 64, 0.0, 8),
        ],
    ));
    let compared = [
        "metrics.csv",
        "controller.csv",
        "queue_hist.csv",
        "cmd_trace.txt",
    ];
    let results = map_jobs(&cases, |(label, base, traces)| -> Result<(), String> {
        let mut zero = base.clone();
        zero.policy = PolicyKind::ChargeCache;
        zero.hcrac.caching_duration_ms = 0.0;
        let a = simulate_outputs(base, traces, true).map_err(|e| format!("{label}: {e:#}"))?;
        let b = simulate_outputs(&zero, traces, true).map_err(|e| format!("{label}: {e:#}"))?;
        for name in compared {
            let fa = a.iter().find(|(n, _)| n == name).map(|(_, c)| c);
            let fb = b.iter().find(|(n, _)| n == name).map(|(_, c)| c);
            ensure!(fa.is_some() && fa == fb, "{label}: {name} differs");
        }
        let ra = run(base, traces)?;
        let rb = run(&zero, traces)?;
        ensure!(
            ra.mem_cycles == rb.mem_cycles,
            "{label}: memory cycles differ"
        );
        ensure!(
            ra.core_cycles() == rb.core_cycles(),
            "{label}: core cycles differ"
        );
        Ok(())
    });
    results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(format!(
        "{} traces; {} and cycle counts identical",
        cases.len(),
        compared.join(", ")
    ))
}

/// Brute-force schedule of one core issuing a serialized ping-pong stream
/// to a single closed-row bank without refresh. Returns measured core
/// cycles and the number of activations that used reduced timings.
fn ping_pong_oracle(
    records: u64,
    nonmem: u64,
    cfg: &RunConfig,
    reduced: impl Fn(u64, bool) -> bool,
) -> (u64, u64) {
    let t = &cfg.timing;
    let width = cfg.core.issue_width as usize;
    let window_cap = cfg.core.window_entries as usize;
    let ratio = u64::from(cfg.core.clock_ratio);
    let budget = records * (nonmem + 1);

    // window entries: true for a read still waiting on data
    let mut window: VecDeque<bool> = VecDeque::new();
    let mut fetched_in_record = 0u64;
    let mut retired = 0u64;
    let mut pending: Option<u64> = None; // arrival cycle of the queued read
    let mut waiting_data: Option<u64> = None;
    let mut next_act = 0u64;
    let mut acts = 0u64;
    let mut reduced_acts = 0u64;
    let mut seen_rows = [false; 2];
    let mut m = 0u64;
    loop {
        if let Some(arrive) = pending {
            if arrive <= m && m >= next_act {
                let row = (acts % 2) as usize;
                let fast = reduced(acts, seen_rows[row]);
                seen_rows[row] = true;
                acts += 1;
                let (rcd, ras) = if fast {
                    reduced_acts += 1;
                    (
                        t.tRCD - cfg.reduced.trcd_delta,
                        t.tRAS - cfg.reduced.tras_delta,
                    )
                } else {
                    (t.tRCD, t.tRAS)
                };
                let rd = m + rcd;
                waiting_data = Some(rd + t.tCL + t.tBL);
                next_act = (m + ras).max(rd + t.tRTP) + t.tRP;
                pending = None;
            }
        }
        if waiting_data == Some(m) {
            waiting_data = None;
            if let Some(slot) = window.iter_mut().find(|w| **w) {
                *slot = false;
            }
        }
        for k in 0..ratio {
            let c = m * ratio + k;
            let mut slots = width;
            while slots > 0 && window.len() < window_cap {
                if fetched_in_record < nonmem {
                    window.push_back(false);
                    fetched_in_record += 1;
                    slots -= 1;
                } else {
                    if pending.is_some() || waiting_data.is_some() {
                        break;
                    }
                    window.push_back(true);
                    pending = Some(m + 1);
                    fetched_in_record = 0;
                    slots -= 1;
                }
            }
            let mut slots = width;
            while slots > 0 && window.front() == Some(&false) {
                window.pop_front();
                retired += 1;
                slots -= 1;
            }
            if retired >= budget {
                return (c + 1, reduced_acts);
            }
        }
        m += 1;
    }
}

fn criterion_5() -> Outcome {
    let records = 2000u64;
    let nonmem = 150u64;
    let trace = synth(
        SyntheticKind::BankPingPong,
        records as usize,
        nonmem,
        1,
        1024,
        0.0,
        1,
    );
    let budget = records * (nonmem + 1);
    let mut out = Vec::new();
    for refresh in [false, true] {
        let mut cycles = HashMap::new();
        let mut cc_hit = 0.0;
        for policy in [
            PolicyKind::Baseline,
            PolicyKind::ChargeCache,
            PolicyKind::LowLatencyDram,
        ] {
            let mut cfg = config(policy, budget, RowPolicySetting::Closed);
            cfg.controller.refresh_enabled = refresh;
            let r = run(&cfg, std::slice::from_ref(&trace))?;
            if policy == PolicyKind::ChargeCache {
                cc_hit = r.acts().hit_rate().0.unwrap_or(0.0);
            }
            cycles.insert(policy, r.cores[0].cycles);
        }
        let (base, cc, ll) = (
            cycles[&PolicyKind::Baseline],
            cycles[&PolicyKind::ChargeCache],
            cycles[&PolicyKind::LowLatencyDram],
        );
        ensure!(
            ll <= cc && cc <= base,
            "refresh={refresh}: cycles LL {ll}, CC {cc}, Baseline {base} out of order"
        );
        ensure!(
            cc_hit >= 0.95,
            "refresh={refresh}: ChargeCache hit rate {cc_hit}"
        );
        if !refresh {
            let cfg = config(PolicyKind::Baseline, budget, RowPolicySetting::Closed);
            let (o_base, _) = ping_pong_oracle(records, nonmem, &cfg, |_, _| false);
            let (o_cc, o_reacts) = ping_pong_oracle(records, nonmem, &cfg, |_, seen| seen);
            let expected = o_base as f64 - o_cc as f64;
            let got = base as f64 - cc as f64;
            ensure!(expected > 0.0, "oracle predicts no reduction");
            ensure!(
                within(got, expected, 0.10),
                "cycle reduction {got} vs oracle {expected} ({o_reacts} reduced activations)"
            );
            out.push(format!(
                "reduction {got} vs oracle {expected} over {o_reacts} re-activations"
            ));
        }
        out.push(format!(
            "refresh={refresh}: LL {ll} <= CC {cc} <= Baseline {base}, hit rate {cc_hit:.4}"
        ));
    }
    Ok(out.join("; "))
}

/// Re-activation fraction by direct search: an activation counts when an
/// earlier precharge of the same row appears anywhere before it.
fn reactivation_count(commands: &[DramCommand]) -> (u64, u64) {
    let mut acts = 0;
    let mut re = 0;
    for (i, c) in commands.iter().enumerate() {
        if c.kind != CommandKind::Act {
            continue;
        }
        acts += 1;
        let key = |d: &DramCommand| (d.coord.channel, d.coord.rank, d.coord.bank, d.coord.row);
        if commands[..i]
            .iter()
            .any(|p| p.kind == CommandKind::Pre && key(p) == key(c))
        {
            re += 1;
        }
    }
    (re, acts)
}

fn criterion_6() -> Outcome {
    let mut cases: Vec<(String, RunConfig, Vec<Vec<TraceRecord>>)> = Vec::new();
    for (i, kind) in SyntheticKind::ALL.into_iter().enumerate() {
        for row in [RowPolicySetting::Open, RowPolicySetting::Closed] {
            for policy in [PolicyKind::Baseline, PolicyKind::ChargeCache] {
                cases.push((
                    format!("{kind}/{row:?}/{policy}"),
                    config(policy, 6000, row),
                    vec![synth(kind, 2000, 2, 4, 32, 0.1, i as u64)],
                ));
            }
        }
    }
    let mut multi = config(PolicyKind::Baseline, 4000, RowPolicySetting::Auto);
    multi.geometry.channels = 2;
    cases.push((
        "2-core mix".into(),
        multi,
        vec![
            synth(SyntheticKind::UniformRandom, 1500, 2, 8, 32, 0.1, 11),
            synth(SyntheticKind::Zipf, 1500, 2, 8, 32, 0.1, 12),
        ],
    ));
    let results = map_jobs(&cases, |(label, cfg, traces)| -> Result<(), String> {
        let r = run(cfg, traces)?;
        let curve = rltl(
            &activation_log(&r.commands),
            &DEFAULT_INTERVALS_MS,
            cfg.timing.clock_period_ns,
        )
        .map_err(|e| e.to_string())?;
        let (re, acts) = reactivation_count(&r.commands);
        let replay = classify_replay(
            &r.commands,
            &cfg.geometry,
            HcracParams::unbounded(&cfg.geometry),
        );
        ensure!(acts > 0, "{label}: no activations");
        ensure!(
            curve.total_activations == acts && replay.activations == acts,
            "{label}: activation counts differ"
        );
        ensure!(
            curve.reactivations == re && replay.hits == re,
            "{label}: RLTL(inf) {} / direct {re} / replay {}",
            curve.reactivations,
            replay.hits
        );
        let f_inf = curve.unbounded_fraction().0;
        ensure!(
            f_inf == Some(re as f64 / acts as f64),
            "{label}: fraction mismatch"
        );
        let mut qualifying = curve.qualifying.clone();
        qualifying.push(curve.reactivations);
        ensure!(
            qualifying.windows(2).all(|w| w[0] <= w[1]),
            "{label}: RLTL curve not monotone: {qualifying:?}"
        );
        Ok(())
    });
    results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(format!("{} schedules: RLTL(inf) = re-activation fraction = unbounded replay hit rate; curves monotone", cases.len()))
}

fn criterion_7() -> Outcome {
    let entries = [8usize, 32, 128, 512];
    let durations = [0.125f64, 0.5, 1.0, 4.0];
    let schedules = vec![
        (
            "zipf",
            synth(SyntheticKind::Zipf, 20_000, 2000, 8, 4096, 0.1, 70),
        ),
        (
            "uniform",
            synth(SyntheticKind::UniformRandom, 20_000, 1500, 8, 512, 0.1, 71),
        ),
        (
            "wide uniform",
            synth(SyntheticKind::UniformRandom, 20_000, 400, 8, 4096, 0.0, 72),
        ),
        (
            "dense zipf",
            synth(SyntheticKind::Zipf, 20_000, 5, 8, 1024, 0.2, 73),
        ),
    ];
    let results = map_jobs(&schedules, |(label, trace)| -> Result<String, String> {
        let cfg = config(PolicyKind::Baseline, 20_000 * 600, RowPolicySetting::Closed);
        let mut cfg = cfg;
        cfg.sim.instruction_budget = trace.iter().filter(|r| r.kind == AccessKind::Read).count()
            as u64
            + trace.iter().map(|r| r.nonmem).sum::<u64>();
        let r = run(&cfg, std::slice::from_ref(trace))?;
        let mut grid = vec![vec![0u64; durations.len()]; entries.len()];
        for (i, &e) in entries.iter().enumerate() {
            for (j, &d) in durations.iter().enumerate() {
                let hc = HcracConfig {
                    entries_per_core: e,
                    caching_duration_ms: d,
                    ..Default::default()
                };
                let params = HcracParams::from_config(&hc, &cfg.timing);
                grid[i][j] = classify_replay(&r.commands, &cfg.geometry, params).hits;
            }
        }
        for i in 0..entries.len() {
            for j in 0..durations.len() {
                if i > 0 {
                    ensure!(
                        grid[i][j] >= grid[i - 1][j],
                        "{label}: hits drop from {} to {} when entries grow {} -> {} at {} ms",
                        grid[i - 1][j],
                        grid[i][j],
                        entries[i - 1],
                        entries[i],
                        durations[j]
                    );
                }
                if j > 0 {
                    ensure!(
                        grid[i][j] >= grid[i][j - 1],
                        "{label}: hits drop from {} to {} when duration grows {} -> {} ms at {} entries",
                        grid[i][j - 1],
                        grid[i][j],
                        durations[j - 1],
                        durations[j],
                        entries[i]
                    );
                }
            }
        }
        let span_ms = r.mem_cycles as f64 * cfg.timing.clock_period_ns / 1e6;
        Ok(format!(
            "{label} {:.2} ms, hits {}..{}",
            span_ms,
            grid[0][0],
            grid[entries.len() - 1][durations.len() - 1]
        ))
    });
    let lines = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(lines.join("; "))
}

fn criterion_8() -> Outcome {
    let records = 2000u64;
    let nonmem = 150u64;
    let trace = synth(
        SyntheticKind::BankPingPong,
        records as usize,
        nonmem,
        1,
        1024,
        0.0,
        1,
    );
    let budget = records * (nonmem + 1);
    let base_cfg = config(PolicyKind::Baseline, budget, RowPolicySetting::Closed);
    let cc_cfg = config(PolicyKind::ChargeCache, budget, RowPolicySetting::Closed);
    let b = run(&base_cfg, std::slice::from_ref(&trace))?;
    let c = run(&cc_cfg, std::slice::from_ref(&trace))?;
    let (kb, kc) = (&b.total.commands, &c.total.commands);
    ensure!(
        kb.acts() == kc.acts() && kb.pre == kc.pre && kb.rd == kc.rd && kb.wr == kc.wr,
        "command counts differ: {kb:?} vs {kc:?}"
    );
    ensure!(
        kc.refresh <= kb.refresh,
        "ChargeCache issued more refreshes ({} > {})",
        kc.refresh,
        kb.refresh
    );
    ensure!(
        c.energy.total < b.energy.total,
        "ChargeCache energy {:.6e} J not below Baseline {:.6e} J",
        c.energy.total,
        b.energy.total
    );
    let timings = cc_cfg.timing_set().map_err(|e| e.to_string())?;
    let std_e = activation_energy(&cc_cfg.power, &timings, TimingClass::Standard);
    let red_e = activation_energy(&cc_cfg.power, &timings, TimingClass::Reduced);
    ensure!(
        red_e < std_e,
        "reduced activation {red_e:.6e} J not below standard {std_e:.6e} J"
    );
    ensure!(
        kc.act_reduced > 0 && c.energy.act_pre < b.energy.act_pre,
        "act/pre energy did not drop"
    );
    Ok(format!(
        "energy {:.4e} J vs {:.4e} J ({:+.2}%), ACT/PRE {:.3e} J reduced vs {:.3e} J standard",
        c.energy.total,
        b.energy.total,
        c.energy.percent_vs(&b.energy).unwrap_or(f64::NAN),
        red_e,
        std_e
    ))
}

#[derive(Default)]
struct HoldingPort {
    accepted: Vec<u64>,
}

impl MemoryPort for HoldingPort {
    fn send(&mut self, _: usize, kind: AccessKind, _: u64, token: u64) -> SendOutcome {
        if kind == AccessKind::Read {
            self.accepted.push(token);
        }
        SendOutcome::Accepted
    }
}

fn criterion_9() -> Outcome {
    let cc = CoreConfig::default();
    let width = u64::from(cc.issue_width);

    // pure compute through the full system: posted writes only
    let budget = 3000;
    let cfg = config(PolicyKind::Baseline, budget, RowPolicySetting::Auto);
    let r = run(
        &cfg,
        &[vec![TraceRecord::new(300, 0x40, AccessKind::Write)]],
    )?;
    let core = &r.cores[0];
    ensure!(
        core.instructions == budget && core.cycles * width == budget && core.ipc == width as f64,
        "pure compute: {} instructions in {} cycles (IPC {})",
        core.instructions,
        core.cycles,
        core.ipc
    );
    // and a read-heavy trace against instant memory
    let mut c = Core::new(
        0,
        cc,
        vec![TraceRecord::new(2, 0x80, AccessKind::Read)],
        30_000,
    );
    let mut now = 0;
    while !c.is_finished() {
        c.tick(now, &mut InstantMemory);
        now += 1;
    }
    ensure!(
        c.ipc() == Some(width as f64),
        "instant memory IPC {:?}",
        c.ipc()
    );

    // one outstanding read: hand schedule
    let t = &cfg.timing;
    let trace = vec![
        TraceRecord::new(0, 0x0, AccessKind::Read),
        TraceRecord::new(1_000_000, 0x40, AccessKind::Read),
    ];
    let r = run(
        &config(PolicyKind::Baseline, 1, RowPolicySetting::Open),
        &[trace],
    )?;
    let arrive = 1; // sent during memory cycle 0, visible on the next
    let act = arrive;
    let rd = act + t.tRCD;
    let data = rd + t.tCL + t.tBL;
    let expected_cycles = data * u64::from(cc.clock_ratio) + 1;
    let first: Vec<_> = r
        .commands
        .iter()
        .take(2)
        .map(|c| (c.kind, c.issue_time))
        .collect();
    ensure!(
        first == [(CommandKind::Act, act), (CommandKind::Rd, rd)],
        "schedule {first:?}"
    );
    ensure!(
        r.cores[0].cycles == expected_cycles,
        "single read took {} cycles, expected {expected_cycles}",
        r.cores[0].cycles
    );
    ensure!(
        r.total.avg_read_latency() == Some((data - arrive) as f64),
        "read latency {:?}, expected {}",
        r.total.avg_read_latency(),
        data - arrive
    );

    // MSHR cap under 16-deep bursts
    let mshrs = cc.mshrs;
    let mut burst: Vec<TraceRecord> = (0..16u64)
        .map(|i| TraceRecord::new(0, i * 8192 * 8 + (i % 8) * 8192, AccessKind::Read))
        .collect();
    burst.push(TraceRecord::new(500, 0x40, AccessKind::Read));
    let mut core = Core::new(0, cc, burst.clone(), 10_000);
    let mut port = HoldingPort::default();
    for now in 0..50 {
        core.tick(now, &mut port);
    }
    ensure!(
        port.accepted.len() == mshrs as usize && core.outstanding_reads() == mshrs,
        "{} reads in flight with {mshrs} MSHRs",
        port.accepted.len()
    );
    core.complete(port.accepted[0]);
    core.tick(50, &mut port);
    ensure!(
        port.accepted.len() == mshrs as usize + 1,
        "freed MSHR not reused"
    );
    let r = run(
        &config(PolicyKind::Baseline, 5000, RowPolicySetting::Open),
        &[burst],
    )?;
    let max_queue = r
        .total
        .read_queue_hist
        .iter()
        .rposition(|&n| n > 0)
        .unwrap_or(0);
    ensure!(
        max_queue as u32 == mshrs,
        "read queue peaked at {max_queue}, expected {mshrs}"
    );
    Ok(format!("IPC {width}; single read {expected_cycles} cycles (latency {}); {mshrs} MSHRs hold under 16-deep bursts", data - arrive))
}

fn files_in(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).map_err(|e| e.to_string())?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    let p = |s: &str| d.join(s).display().to_string();
    for (name, kind) in [("a.trace", "zipf"), ("b.trace", "uniform")] {
        for copy in ["", ".again"] {
            cli(&[
                "gen-trace",
                "--kind",
                kind,
                "--requests",
                "3000",
                "--banks",
                "8",
                "--row-count",
                "256",
                "--nonmem",
                "4",
                "--write-fraction",
                "0.2",
                "--seed",
                "9",
                "--out",
                &p(&format!("{name}{copy}")),
            ])?;
        }
        ensure!(
            fs::read(p(name)).ok() == fs::read(p(&format!("{name}.again"))).ok(),
            "{name} differs between runs"
        );
    }
    fs::write(
        d.join("run.toml"),
        "policy = \"chargecache\"\ntraces = [\"a.trace\", \"b.trace\"]\n[sim]\ninstruction_budget = 8000\nwarmup_cycles = 1000\nseed = 42\n",
    )
    .map_err(|e| e.to_string())?;
    let mut csvs = 0;
    for cmd in ["simulate", "sweep"] {
        let mut dirs = Vec::new();
        for copy in 0..2 {
            let out = p(&format!("{cmd}-{copy}"));
            let config = p("run.toml");
            let mut args = vec![
                cmd,
                "--config",
                config.as_str(),
                "--out",
                out.as_str(),
                "--emit-cmd-trace",
                "--jobs",
                "4",
            ];
            if cmd == "sweep" {
                args.extend([
                    "--policy",
                    "chargecache,baseline",
                    "--entries",
                    "32,128",
                    "--duration-ms",
                    "0.5,1",
                ]);
            }
            cli(&args)?;
            dirs.push(files_in(Path::new(&out))?);
        }
        ensure!(!dirs[0].is_empty(), "{cmd} wrote nothing");
        ensure!(dirs[0] == dirs[1], "{cmd} outputs differ between runs");
        csvs += dirs[0].iter().filter(|(n, _)| n.ends_with(".csv")).count();
    }
    Ok(format!(
        "traces, simulate and sweep outputs byte-identical across reruns ({csvs} CSV files)"
    ))
}

fn main() -> ExitCode {
    let criteria: [(fn() -> Outcome, Duration); 10] = [
        (criterion_1, Duration::from_secs(1)),
        (criterion_2, Duration::from_secs(5)),
        (criterion_3, Duration::from_secs(120)),
        (criterion_4, Duration::from_secs(60)),
        (criterion_5, Duration::from_secs(60)),
        (criterion_6, Duration::from_secs(60)),
        (criterion_7, Duration::from_secs(120)),
        (criterion_8, Duration::from_secs(30)),
        (criterion_9, Duration::from_secs(30)),
        (criterion_10, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (f, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS ({elapsed:.2?}) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL ({elapsed:.2?}) {why}", i + 1);
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
