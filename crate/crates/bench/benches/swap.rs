use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use mevkit_core::{AmmPool, Amount, TokenId};

fn pool() -> AmmPool {
    AmmPool::new("COMP", "107495485843438764484770".parse().unwrap(), "ETH", "49835502094518088853633".parse().unwrap(), 30)
}

fn bench_quotes(c: &mut Criterion) {
    let p = pool();
    let comp = TokenId::new("COMP");
    let amount = Amount::ether(1300);
    c.bench_function("quote_exact_in", |b| b.iter(|| p.quote_exact_in(black_box(&comp), black_box(amount))));
    c.bench_function("quote_exact_out", |b| b.iter(|| p.quote_exact_out(black_box(&comp), black_box(Amount::ether(500)))));
    c.bench_function("swap_exact_in", |b| {
        b.iter_batched(pool, |mut p| p.swap_exact_in(&comp, amount), BatchSize::SmallInput)
    });
}

criterion_group!(benches, bench_quotes);
criterion_main!(benches);
