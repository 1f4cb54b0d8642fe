use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use licm::hset::{HSet, InternTable};
use std::hint::black_box;

fn keys(n: u64, salt: u64) -> impl Iterator<Item = u64> {
    (0..n).map(move |i| (i.wrapping_mul(2_654_435_761).wrapping_add(salt)) % (4 * n) + 1)
}

fn sets(t: &mut InternTable, n: u64) -> (HSet, HSet) {
    (t.from_keys(keys(n, 1)), t.from_keys(keys(n, 7)))
}

fn benches(c: &mut Criterion) {
    let mut g = c.benchmark_group("hset");
    for n in [64u64, 1024, 16384] {
        g.bench_with_input(BenchmarkId::new("from_keys", n), &n, |b, &n| {
            b.iter_batched(
                InternTable::new,
                |mut t| black_box(t.from_keys(keys(n, 1))),
                BatchSize::SmallInput,
            )
        });
        let mut t = InternTable::new();
        let (a, s) = sets(&mut t, n);
        g.bench_with_input(BenchmarkId::new("union", n), &n, |b, _| {
            b.iter(|| black_box(t.union(&a, &s)))
        });
        g.bench_with_input(BenchmarkId::new("inter", n), &n, |b, _| {
            b.iter(|| black_box(t.inter(&a, &s)))
        });
        g.bench_with_input(BenchmarkId::new("diff", n), &n, |b, _| {
            b.iter(|| black_box(t.diff(&a, &s)))
        });
        g.bench_with_input(BenchmarkId::new("inter_self", n), &n, |b, _| {
            b.iter(|| black_box(t.inter(&a, &a)))
        });
        g.bench_with_input(BenchmarkId::new("subset", n), &n, |b, _| {
            b.iter(|| black_box(a.subset(&s)))
        });
        let a2 = t.from_keys(keys(n, 1));
        g.bench_with_input(BenchmarkId::new("equal", n), &n, |b, _| {
            b.iter(|| black_box(a.equal(&a2)))
        });
        g.bench_with_input(BenchmarkId::new("structurally_equal", n), &n, |b, _| {
            b.iter(|| black_box(a.structurally_equal(&a2)))
        });
    }
    g.finish();
}

criterion_group!(g, benches);
criterion_main!(g);
