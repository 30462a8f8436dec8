use chargecache::config::SimParams;
use chargecache::controller::RowPolicySetting;
use chargecache::dram::{verify_command_trace, CommandKind};
use chargecache::policy::{classify_replay, HcracParams, PolicyKind};
use chargecache::sim::{simulate, SimOptions};
use chargecache::trace::{
    activation_log, gen_synthetic, rltl, GenParams, SyntheticKind, TraceRecord,
};
use chargecache::RunConfig;
use proptest::prelude::*;

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

fn trace(kind: SyntheticKind, requests: usize, seed: u64, write_fraction: f64) -> Vec<TraceRecord> {
    gen_synthetic(&GenParams {
        kind,
        requests,
        rows: 16,
        banks: 4,
        nonmem: 3,
        seed,
        write_fraction,
        ..Default::default()
    })
    .unwrap()
}

fn kind_strategy() -> impl Strategy<Value = SyntheticKind> {
    prop::sample::select(SyntheticKind::ALL.to_vec())
}

fn policy_strategy() -> impl Strategy<Value = PolicyKind> {
    prop::sample::select(PolicyKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn simulated_schedules_pass_the_verifier(
        kind in kind_strategy(),
        policy in policy_strategy(),
        closed in any::<bool>(),
        seed in 0u64..1000,
        wf in 0.0f64..0.5,
    ) {
        let row = if closed { RowPolicySetting::Closed } else { RowPolicySetting::Open };
        let mut cfg = config(policy, 1500, row);
        cfg.hcrac.caching_duration_ms = 0.01;
        let traces = vec![trace(kind, 400, seed, wf)];
        let r = simulate(&cfg, &traces, SimOptions { record_commands: true }).unwrap();
        let t = cfg.timing_set().unwrap();
        let rule = cfg.policy_spec(1).safety_rule();
        let rep = verify_command_trace(&r.commands, &cfg.geometry, t.base(), t.deltas, rule).unwrap();
        prop_assert!(rep.is_clean(), "{:?}", rep.first_violation);
        let reduced = r.commands.iter().filter(|c| c.kind == CommandKind::Act && c.timing_class == chargecache::dram::TimingClass::Reduced).count() as u64;
        prop_assert_eq!(rep.act_reduced, reduced);
    }

    #[test]
    fn energy_partitions_wall_time(kind in kind_strategy(), seed in 0u64..100) {
        let cfg = config(PolicyKind::ChargeCache, 1000, RowPolicySetting::Auto);
        let r = simulate(&cfg, &[trace(kind, 300, seed, 0.2)], SimOptions::default()).unwrap();
        let d = r.total.residency;
        prop_assert_eq!(d.active_cycles + d.precharged_cycles, r.mem_cycles);
        let parts: f64 = r.energy.components().iter().map(|(_, v)| v).sum();
        prop_assert!((parts - r.energy.total).abs() <= 1e-12 * r.energy.total);
    }
}

#[test]
fn unbounded_replay_matches_rltl_at_infinity() {
    for kind in SyntheticKind::ALL {
        let cfg = config(PolicyKind::Baseline, 2000, RowPolicySetting::Closed);
        let r = simulate(
            &cfg,
            &[trace(kind, 600, 5, 0.1)],
            SimOptions {
                record_commands: true,
            },
        )
        .unwrap();
        let curve = rltl(&activation_log(&r.commands), &[0.125, 1.0], 1.25).unwrap();
        let replay = classify_replay(
            &r.commands,
            &cfg.geometry,
            HcracParams::unbounded(&cfg.geometry),
        );
        assert_eq!(replay.activations, curve.total_activations);
        assert_eq!(replay.hits, curve.reactivations, "{kind}");
    }
}

#[test]
fn two_cores_share_the_channels() {
    let mut cfg = config(PolicyKind::ChargeCache, 1000, RowPolicySetting::Auto);
    cfg.geometry.channels = 2;
    let traces = vec![
        trace(SyntheticKind::UniformRandom, 300, 1, 0.0),
        trace(SyntheticKind::Zipf, 300, 2, 0.0),
    ];
    let r = simulate(&cfg, &traces, SimOptions::default()).unwrap();
    assert_eq!(r.cores.len(), 2);
    assert!(r.cores.iter().all(|c| c.cycles > 0));
    assert_eq!(r.channels.len(), 2);
}
