use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rankar_core::{
    ar_design_from_series, gen_dataset, generate_scores, run_test, solve_rank_score_path, solve_rank_scores_at,
    ScoreKind, SimulationConfig,
};

fn series(len: usize) -> Vec<f64> {
    let cfg = SimulationConfig::null_default(len, 1, 1, 17);
    let d = gen_dataset(&cfg, 0).unwrap();
    d.full_series()
}

fn rank_score_path(c: &mut Criterion) {
    let mut group = c.benchmark_group("rank_score_path");
    for &(n, p) in &[(100, 1), (300, 1), (300, 3)] {
        let s = series(n + p);
        let design = ar_design_from_series(&s[..p], &s[p..]).unwrap();
        group.bench_with_input(BenchmarkId::new(format!("p{p}"), n), &design, |b, d| {
            b.iter(|| solve_rank_score_path(black_box(d)).unwrap())
        });
    }
    group.finish();
}

fn cold_solve(c: &mut Criterion) {
    let s = series(301);
    let design = ar_design_from_series(&s[..1], &s[1..]).unwrap();
    c.bench_function("cold_solve_n300_p1", |b| {
        b.iter(|| solve_rank_scores_at(black_box(&design), 0.37).unwrap())
    });
}

fn scores_and_test(c: &mut Criterion) {
    let s = series(301);
    let design = ar_design_from_series(&s[..1], &s[1..]).unwrap();
    let path = solve_rank_score_path(&design).unwrap();
    c.bench_function("vdw_scores_n300", |b| {
        b.iter(|| generate_scores(black_box(&path), ScoreKind::VanDerWaerden))
    });

    let cfg = SimulationConfig::null_default(300, 2, 1, 5);
    let d = gen_dataset(&cfg, 0).unwrap();
    c.bench_function("run_test_n300_s2", |b| {
        b.iter(|| run_test(black_box(&d), ScoreKind::Wilcoxon, 0.05).unwrap())
    });
}

criterion_group!(benches, rank_score_path, cold_solve, scores_and_test);
criterion_main!(benches);
