use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use uprprc_bench::random_tokens;
use uprprc_core::lcs::{dp_oracle, hunt_szymanski};

fn lcs(c: &mut Criterion) {
    let mut group = c.benchmark_group("lcs");
    for n in [250usize, 1_000, 2_000] {
        let a = random_tokens(n, n as u32, 1);
        let b = random_tokens(n, n as u32, 2);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("hunt_szymanski", n), &n, |bench, _| {
            bench.iter(|| hunt_szymanski(&a, &b))
        });
        group.bench_with_input(BenchmarkId::new("dp_oracle", n), &n, |bench, _| {
            bench.iter(|| dp_oracle(&a, &b).unwrap())
        });
    }
    for n in [10_000usize, 100_000] {
        let a = random_tokens(n, n as u32, 1);
        let b = random_tokens(n, n as u32, 2);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("hunt_szymanski", n), &n, |bench, _| {
            bench.iter(|| hunt_szymanski(&a, &b))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = lcs
}
criterion_main!(benches);
