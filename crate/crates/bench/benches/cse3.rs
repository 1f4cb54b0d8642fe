use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use licm::cse3::{analyze, check_inductive, Opts};
use licm::fixtures::syrk;
use licm::gen::{generate, GenConfig};
use licm::ir::Function;
use licm::pipeline::{optimize, parse_passes, Pipeline};
use licm::typing::infer;
use std::hint::black_box;

fn big_main(nodes: usize) -> Function {
    let cfg = GenConfig {
        seed: 1,
        nodes: nodes..=nodes,
        regs: 12..=24,
        helper: 0.0,
        ..GenConfig::default()
    };
    let p = generate(&cfg, 0).program;
    p.main_function().expect("main").clone()
}

fn benches(c: &mut Criterion) {
    let opts = Opts::default();
    let pipe = Pipeline::new(&parse_passes("unroll,cse3,selfmove,dce").expect("passes"));
    let p = syrk();
    c.bench_function("syrk/pipeline", |b| {
        b.iter(|| black_box(optimize(&p, &pipe).expect("ok")))
    });

    let mut g = c.benchmark_group("cse3");
    g.sample_size(10);
    for n in [100usize, 1000, 10_000] {
        let f = big_main(n);
        let env = infer(&f).expect("typed");
        g.bench_with_input(BenchmarkId::new("analyze", n), &f, |b, f| {
            b.iter(|| black_box(analyze(f, &env, &opts).expect("converges")))
        });
        let a = analyze(&f, &env, &opts).expect("converges");
        g.bench_with_input(BenchmarkId::new("check_inductive", n), &f, |b, f| {
            b.iter(|| {
                black_box(
                    check_inductive(f, &env, &opts, a.tables.catalog(), &a.invariants).expect("ok"),
                )
            })
        });
    }
    g.finish();
}

criterion_group!(g, benches);
criterion_main!(g);
