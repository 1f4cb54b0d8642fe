mod common;

use licm::cse3::{analyze, check_inductive, dump_invariants, Opts, Tables};
use licm::difftest::{difftest, DiffConfig};
use licm::dup::{find_loops, rotate_all, unroll_all, verify_dup};
use licm::fixtures::{syrk, syrk_args};
use licm::gen::{generate, GenConfig};
use licm::interp::{outcome_refines, run};
use licm::ir::{
    parse, parse_function, print, print_function, Function, Instruction, NodeId, Value,
};
use licm::pipeline::{loop_stats, optimize, parse_passes, Pipeline};
use licm::typing::infer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

fn corpus(seed: u64, n: usize) -> Vec<Function> {
    let cfg = GenConfig {
        seed,
        ..GenConfig::default()
    };
    let mut out: Vec<Function> = syrk().functions.into_values().collect();
    let mut i = 0;
    while out.len() < n {
        out.extend(generate(&cfg, i).program.functions.into_values());
        i += 1;
    }
    out.truncate(n);
    out
}

fn full() -> Pipeline {
    Pipeline::new(&parse_passes("unroll,cse3,selfmove,dce").unwrap())
}

#[test]
fn print_parse_round_trip_on_corpus() {
    let fs = corpus(11, 50);
    assert_eq!(fs.len(), 50);
    for f in &fs {
        let text = print_function(f);
        let g = parse_function(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_eq!(&g, f);
        assert_eq!(print_function(&g), text);
    }
}

#[test]
fn generated_programs_round_trip() {
    let cfg = GenConfig::default();
    for i in 0..200 {
        let p = generate(&cfg, i).program;
        let q = parse(&print(&p)).unwrap();
        assert_eq!(q, p, "program {i}");
    }
}

#[test]
fn duplication_and_analysis_accepted_on_corpus() {
    let opts = Opts::default();
    for f in corpus(12, 50) {
        let env = infer(&f).unwrap();
        for (g, map, _) in [unroll_all(&f, 30), rotate_all(&f)] {
            verify_dup(&f, &g, &map).unwrap_or_else(|e| panic!("{}: {e}", f.name));
        }
        let a = analyze(&f, &env, &opts).unwrap();
        check_inductive(&f, &env, &opts, a.tables.catalog(), &a.invariants).unwrap();
        let rebuilt = Tables::rebuild(a.tables.catalog());
        assert_eq!(
            rebuilt.index_contents(),
            a.tables.index_contents(),
            "{}",
            f.name
        );
    }
}

#[test]
fn catalog_size_is_number_of_distinct_equations() {
    let opts = Opts::default();
    for f in corpus(13, 30) {
        let env = infer(&f).unwrap();
        let a = analyze(&f, &env, &opts).unwrap();
        let cat = a.tables.catalog();
        let distinct: BTreeSet<String> = cat.iter().map(|(_, e)| e.to_string()).collect();
        assert_eq!(distinct.len(), cat.len(), "{}", f.name);
        let dump = dump_invariants(cat, &a.invariants);
        for line in dump.lines() {
            let Some((_, set)) = line.split_once(": {") else {
                continue;
            };
            let set = set.trim_end_matches('}');
            for e in set.split(", ").filter(|s| !s.is_empty()) {
                assert!(distinct.contains(e), "{}: {e} not in catalog", f.name);
            }
        }
    }
}

#[test]
fn full_pipeline_leaves_no_self_moves() {
    let cfg = GenConfig::default();
    for i in 0..100 {
        let p = generate(&cfg, i).program;
        let (q, _) = optimize(&p, &full()).unwrap();
        for f in q.functions.values() {
            assert!(
                f.code.values().all(|i| !i.is_self_move()),
                "{}",
                print_function(f)
            );
        }
    }
}

#[test]
fn dce_refines_on_random_programs() {
    let cfg = DiffConfig {
        gen: GenConfig {
            seed: 21,
            ..GenConfig::default()
        },
        programs: 200,
        runs: 5,
        fuel: 200_000,
    };
    let r = difftest(&cfg, &Pipeline::new(&parse_passes("dce").unwrap()));
    assert!(r.ok(), "{r}");
}

#[test]
fn syrk_refines_on_random_inputs() {
    let p = syrk();
    let pipes = [full(), Pipeline::new(&parse_passes("rotate").unwrap())];
    let qs: Vec<_> = pipes
        .iter()
        .map(|pipe| optimize(&p, pipe).unwrap().0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..200 {
        let args = syrk_args(
            &p,
            rng.gen_range(0..=4),
            rng.gen_range(0..=8),
            rng.gen_range(-4.0..4.0),
        );
        let o = run(&p, &args, 10_000_000, k);
        for q in &qs {
            let o2 = run(q, &args, 10_000_000, k);
            assert!(outcome_refines(&o, &o2), "{args:?}: {o} vs {o2}");
        }
    }
}

#[test]
fn refinement_when_loop_never_entered() {
    let p = syrk();
    for passes in [
        "unroll",
        "rotate",
        "unroll,cse3,selfmove,dce",
        "rotate,cse3,selfmove,dce",
    ] {
        let (q, _) = optimize(&p, &Pipeline::new(&parse_passes(passes).unwrap())).unwrap();
        for (ni, nj) in [(0, 0), (0, 8), (2, 0)] {
            let args = syrk_args(&p, ni, nj, 1.0);
            let (o1, o2) = (run(&p, &args, 1_000_000, 1), run(&q, &args, 1_000_000, 1));
            assert!(
                outcome_refines(&o1, &o2),
                "{passes} ({ni},{nj}): {o1} vs {o2}"
            );
        }
    }
}

#[test]
fn registers_hold_values_of_their_type() {
    let cfg = GenConfig {
        seed: 31,
        ..GenConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0u64;
    for i in 0..100 {
        let g = generate(&cfg, i);
        // Registers constrained by some instruction; call and return operands
        // and unused parameters take whatever the caller supplies.
        let envs: std::collections::BTreeMap<_, _> = g
            .program
            .functions
            .iter()
            .map(|(n, f)| {
                let env = infer(f).unwrap();
                let constrained: BTreeSet<_> = f
                    .code
                    .values()
                    .filter(|i| !matches!(i, Instruction::Call { .. } | Instruction::Return { .. }))
                    .flat_map(|i| i.uses().into_iter().chain(i.def()))
                    .collect();
                (n.clone(), (env, constrained))
            })
            .collect();
        let args = g.inputs(&mut rng);
        common::instrumented(&g.program, &args, i, 20_000, |m| {
            let (env, constrained) = &envs[&m.state.func];
            for &r in constrained {
                let t = env.get(r);
                let v = m.state.regs.get(r);
                if v != Value::Undef {
                    assert!(t.accepts(v), "{}: {r}: {t} holds {v:?}", m.state.func);
                    checked += 1;
                }
            }
        });
    }
    assert!(checked > 10_000, "{checked}");
}

#[test]
fn syrk_header_invariant_has_address_equations_after_unroll() {
    let f = syrk().functions["syrk"].clone();
    let (u, _, n) = unroll_all(&f, 30);
    assert!(n > 0);
    let env = infer(&u).unwrap();
    let a = analyze(&u, &env, &Opts::default()).unwrap();
    let ids = a
        .invariants
        .get(NodeId(6))
        .and_then(|s| s.ids())
        .expect("header reachable");
    let eqs: Vec<String> = ids
        .contents()
        .into_iter()
        .map(|id| a.tables.equation(id).unwrap().to_string())
        .collect();
    for want in ["r11 = shl64", "r12 = add64", "r17 = add64", "r23 = add64"] {
        assert!(
            eqs.iter().any(|e| e.starts_with(want)),
            "{want} missing from {eqs:?}"
        );
    }
}

#[test]
fn syrk_loop_body_shrinks() {
    let p = syrk();
    let (q, _) = optimize(&p, &full()).unwrap();
    let body = |f: &Function| {
        loop_stats(f)
            .into_iter()
            .find(|l| l.header == NodeId(6))
            .unwrap()
            .ops_loads
    };
    let (before, after) = (body(&p.functions["syrk"]), body(&q.functions["syrk"]));
    assert!(after < before, "{before} -> {after}");
    assert_eq!((before, after), (23, 7));
}

#[test]
fn unroll_leaves_straight_line_code_alone() {
    let f = parse_function(
        "function f(r1, r2) stack 0 {
  entry 1
  1: r3 = add32 r1, r2 -> 2
  2: r4 = mulimm32 r3, #3 -> 3
  3: return r4
}",
    )
    .unwrap();
    assert!(find_loops(&f).is_empty());
    let (g, _, n) = unroll_all(&f, 30);
    assert_eq!(n, 0);
    assert_eq!(g, f);
}
