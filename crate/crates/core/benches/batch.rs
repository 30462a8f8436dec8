use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use chargecache::batch::{map_jobs, map_sequential};
use chargecache::config::SimParams;
use chargecache::policy::PolicyKind;
use chargecache::sim::{simulate, SimOptions};
use chargecache::trace::{gen_synthetic, GenParams, SyntheticKind, TraceRecord};
use chargecache::RunConfig;

fn workload() -> Vec<(RunConfig, Vec<Vec<TraceRecord>>)> {
    let mut jobs = Vec::new();
    for (i, kind) in SyntheticKind::ALL.into_iter().enumerate() {
        for policy in [PolicyKind::Baseline, PolicyKind::ChargeCache] {
            let trace = gen_synthetic(&GenParams {
                kind,
                requests: 2000,
                banks: 4,
                rows: 256,
                nonmem: 8,
                seed: i as u64,
                ..Default::default()
            })
            .expect("valid generator parameters");
            let cfg = RunConfig {
                policy,
                sim: SimParams {
                    instruction_budget: 10_000,
                    warmup_cycles: 0,
                    ..Default::default()
                },
                ..Default::default()
            };
            jobs.push((cfg, vec![trace]));
        }
    }
    jobs
}

fn run_one(job: &(RunConfig, Vec<Vec<TraceRecord>>)) -> u64 {
    simulate(&job.0, &job.1, SimOptions::default())
        .expect("simulation")
        .mem_cycles
}

fn bench_batch(c: &mut Criterion) {
    let jobs = workload();
    let mut group = c.benchmark_group("independent_runs");
    group.sample_size(10);
    group.bench_with_input(
        BenchmarkId::new("sequential", jobs.len()),
        &jobs,
        |b, jobs| b.iter(|| map_sequential(jobs, run_one)),
    );
    group.bench_with_input(
        BenchmarkId::new("parallel", jobs.len()),
        &jobs,
        |b, jobs| b.iter(|| map_jobs(jobs, run_one)),
    );
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
