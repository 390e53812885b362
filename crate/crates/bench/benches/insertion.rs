use criterion::{criterion_group, criterion_main, Criterion};
use mevkit_core::insertion::{optimize_alpha, profit_curve};
use mevkit_core::metrics::{player_objective, Valuation};
use mevkit_core::presets::comp_backrun_problem;
use mevkit_core::AccountId;

fn bench_alpha(c: &mut Criterion) {
    let p = comp_backrun_problem();
    let miner = [AccountId::new("miner")];
    let val = Valuation::primary_only();
    let obj = player_objective(&p.state, &miner, &val);
    let mut g = c.benchmark_group("insertion");
    g.sample_size(10);
    g.bench_function("optimize_alpha", |b| b.iter(|| optimize_alpha(&p, &obj)));
    g.bench_function("profit_curve_256", |b| b.iter(|| profit_curve(&p, &obj, 256)));
    g.finish();
}

criterion_group!(benches, bench_alpha);
criterion_main!(benches);
