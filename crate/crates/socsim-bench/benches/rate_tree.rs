use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use socsim_core::{RateTree, SimRng};

fn varied_rate(i: usize) -> f64 {
    (i % 17) as f64 + 0.5
}

fn bench_push(c: &mut Criterion) {
    let mut group = c.benchmark_group("rate_tree_push");
    for n in [1_000usize, 32_000, 1_000_000] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                let mut tree = RateTree::with_capacity(n);
                for i in 0..n {
                    tree.push(varied_rate(i)).unwrap();
                }
                tree.total()
            })
        });
    }
    group.finish();
}

fn bench_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("rate_tree_update");
    for n in [1_000usize, 32_000, 1_000_000] {
        let rates: Vec<f64> = (0..n).map(varied_rate).collect();
        let tree = RateTree::from_rates(&rates).unwrap();
        group.throughput(Throughput::Elements(1));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut tree = tree.clone();
            let mut i = 0usize;
            b.iter(|| {
                // large co-prime stride so updates touch distinct tree paths
                i = (i + 7919) % n;
                tree.update(i, varied_rate(i + 1)).unwrap();
            })
        });
    }
    group.finish();
}

fn bench_select(c: &mut Criterion) {
    let mut group = c.benchmark_group("rate_tree_select");
    for n in [1_000usize, 32_000, 1_000_000] {
        let rates: Vec<f64> = (0..n).map(varied_rate).collect();
        let tree = RateTree::from_rates(&rates).unwrap();
        group.throughput(Throughput::Elements(1));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = SimRng::new(9);
            b.iter(|| tree.select(rng.open_unit()).unwrap())
        });
    }
    group.finish();
}

fn bench_rebuild_vs_incremental(c: &mut Criterion) {
    let n = 100_000usize;
    let rates: Vec<f64> = (0..n).map(varied_rate).collect();
    let mut group = c.benchmark_group("rate_tree_build_100k");
    group.throughput(Throughput::Elements(n as u64));
    group.bench_function("from_rates", |b| {
        b.iter_batched(
            || rates.clone(),
            |rates| RateTree::from_rates(&rates).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_push, bench_update, bench_select, bench_rebuild_vs_incremental);
criterion_main!(benches);
