#![allow(dead_code)]

use licm::cse3::{analyze, eq_holds, transfer, AbsState, Analysis, Opts};
use licm::interp::{exec_local, Machine, Step};
use licm::ir::{Instruction, NodeId, Program, Value};
use licm::typing::{infer, Ty, TypeEnv};
use rand::Rng;
use std::collections::BTreeMap;

/// Steps `main` for at most `fuel` steps, calling `visit` before each step.
pub fn instrumented(
    p: &Program,
    args: &[Value],
    seed: u64,
    fuel: u64,
    mut visit: impl FnMut(&Machine),
) {
    let Ok(mut m) = Machine::new(p, args, seed) else {
        return;
    };
    for _ in 0..fuel {
        visit(&m);
        match m.step() {
            Ok(Step::Continue(_)) => {}
            _ => return,
        }
    }
}

pub struct FnAnalysis {
    pub env: TypeEnv,
    pub analysis: Analysis,
}

pub fn analyze_all(p: &Program, opts: &Opts) -> BTreeMap<String, FnAnalysis> {
    p.functions
        .iter()
        .map(|(name, f)| {
            let env = infer(f).expect("well-typed");
            let analysis = analyze(f, &env, opts).expect("analysis converges");
            (name.clone(), FnAnalysis { env, analysis })
        })
        .collect()
}

fn random_value(rng: &mut impl Rng, ty: Ty, like: Value) -> Value {
    match ty {
        Ty::T32 => Value::I32(rng.gen_range(-20..20)),
        Ty::T64 | Ty::TPtr => match like {
            Value::Ptr { block, offset } => Value::Ptr {
                block,
                offset: offset + 8 * rng.gen_range(-2..3),
            },
            _ => Value::I64(rng.gen_range(-20..20)),
        },
        Ty::TF32 => Value::F32(rng.gen_range(-2.0..2.0)),
        Ty::TF64 => Value::F64(rng.gen_range(-2.0..2.0)),
    }
}

#[derive(Default, Debug)]
pub struct SoundnessTally {
    /// Concrete states at which the invariant was checked.
    pub states: u64,
    /// (S, I, σ) triples whose successor state was checked against ♯I(S).
    pub triples: u64,
    pub violations: Vec<String>,
}

/// Runs `main` and checks, at every step, that the concrete state satisfies
/// the node's invariant, and that the successor state satisfies the transfer
/// of that invariant. A second, perturbed register file satisfying the
/// invariant is checked the same way when one is found.
#[allow(clippy::too_many_arguments)]
pub fn check_run(
    p: &Program,
    fa: &mut BTreeMap<String, FnAnalysis>,
    opts: &Opts,
    args: &[Value],
    seed: u64,
    fuel: u64,
    rng: &mut impl Rng,
    tally: &mut SoundnessTally,
) {
    let Ok(mut m) = Machine::new(p, args, seed) else {
        return;
    };
    // Pending post-states of internal calls: (frame depth, return node, state).
    let mut pending: Vec<(usize, NodeId, AbsState)> = Vec::new();
    for _ in 0..fuel {
        let depth = m.state.frames.len();
        let func = m.state.func.clone();
        let pc = m.state.pc;
        if let Some(&(d, ret, _)) = pending.last() {
            if d == depth && ret == pc {
                let (_, _, post) = pending.pop().expect("nonempty");
                let a = &fa[&func].analysis;
                for id in post.ids().map(|s| s.contents()).unwrap_or_default() {
                    let e = a.tables.equation(id).expect("known id");
                    if !eq_holds(m.genv(), &m.state.regs, &m.state.mem, e) {
                        tally
                            .violations
                            .push(format!("{func} after call returning to {pc}: {e}"));
                    }
                }
                tally.triples += 1;
            }
        }
        let Some(instr) = m.instruction() else {
            return;
        };
        let entry = fa.get_mut(&func).expect("analyzed");
        let s = entry
            .analysis
            .invariants
            .get(pc)
            .cloned()
            .unwrap_or(AbsState::Bot);
        let Some(ids) = s.ids().cloned() else {
            tally
                .violations
                .push(format!("{func}: reached node {pc} marked unreachable"));
            return;
        };
        tally.states += 1;
        for id in ids.contents() {
            let e = entry.analysis.tables.equation(id).expect("known id");
            if !eq_holds(m.genv(), &m.state.regs, &m.state.mem, e) {
                tally
                    .violations
                    .push(format!("{func} at {pc}: invariant equation {e} is false"));
            }
        }
        let post = transfer(&mut entry.analysis.tables, &s, instr, &entry.env, opts);
        let post_eqs: Vec<_> = post
            .ids()
            .map(|s| s.contents())
            .unwrap_or_default()
            .into_iter()
            .map(|id| {
                entry
                    .analysis
                    .tables
                    .equation(id)
                    .expect("known id")
                    .clone()
            })
            .collect();
        let eqs: Vec<_> = ids
            .contents()
            .into_iter()
            .map(|id| {
                entry
                    .analysis
                    .tables
                    .equation(id)
                    .expect("known id")
                    .clone()
            })
            .collect();

        // Perturbed state: change one register involved in the instruction.
        if !matches!(instr, Instruction::Call { .. } | Instruction::Return { .. }) {
            let regs_of: Vec<_> = instr.uses().into_iter().chain(instr.def()).collect();
            if !regs_of.is_empty() {
                let r = regs_of[rng.gen_range(0..regs_of.len())];
                let mut regs = m.state.regs.clone();
                regs.set(r, random_value(rng, entry.env.get(r), regs.get(r)));
                if eqs
                    .iter()
                    .all(|e| eq_holds(m.genv(), &regs, &m.state.mem, e))
                {
                    let mut mem = m.state.mem.clone();
                    if exec_local(m.genv(), instr, &mut regs, &mut mem).is_ok() {
                        tally.triples += 1;
                        for e in &post_eqs {
                            if !eq_holds(m.genv(), &regs, &mem, e) {
                                tally.violations.push(format!(
                                    "{func} at {pc} (perturbed {r}): {instr:?} breaks {e}"
                                ));
                            }
                        }
                    }
                }
            }
        }

        let internal_call =
            matches!(instr, Instruction::Call { callee, .. } if p.functions.contains_key(callee));
        let is_return = matches!(instr, Instruction::Return { .. });
        let succ = instr.successors();
        match m.step() {
            Ok(Step::Continue(_)) => {}
            _ => return,
        }
        if internal_call {
            pending.push((depth, succ[0], post));
        } else if !is_return {
            tally.triples += 1;
            for e in &post_eqs {
                if !eq_holds(m.genv(), &m.state.regs, &m.state.mem, e) {
                    tally
                        .violations
                        .push(format!("{func} at {pc}: {instr:?} breaks {e}"));
                }
            }
        }
    }
}
