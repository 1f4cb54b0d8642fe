//! Self-move elimination and liveness-based dead code elimination.

use crate::ir::{Function, Instruction, NodeId, Reg};
use std::collections::{BTreeMap, BTreeSet};

pub fn elim_self_moves(f: &Function) -> Function {
    let mut out = f.clone();
    for i in out.code.values_mut() {
        if i.is_self_move() {
            *i = Instruction::Nop {
                succ: i.successors()[0],
            };
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LiveSet {
    pub live_in: BTreeMap<NodeId, BTreeSet<Reg>>,
    pub live_out: BTreeMap<NodeId, BTreeSet<Reg>>,
}

pub fn liveness(f: &Function) -> LiveSet {
    let preds = f.predecessors();
    let mut live_in: BTreeMap<NodeId, BTreeSet<Reg>> =
        f.code.keys().map(|&n| (n, BTreeSet::new())).collect();
    let mut live_out = live_in.clone();
    let mut work: BTreeSet<NodeId> = f.code.keys().copied().collect();
    while let Some(n) = work.pop_last() {
        let i = &f.code[&n];
        let out: BTreeSet<Reg> = i
            .successors()
            .iter()
            .filter_map(|s| live_in.get(s))
            .flatten()
            .copied()
            .collect();
        let mut inn = out.clone();
        if let Some(d) = i.def() {
            inn.remove(&d);
        }
        inn.extend(i.uses());
        live_out.insert(n, out);
        if live_in[&n] != inn {
            live_in.insert(n, inn);
            work.extend(preds[&n].iter().copied());
        }
    }
    LiveSet { live_in, live_out }
}

/// Turns operations and loads with dead destinations into `nop`, until
/// nothing more changes.
pub fn dce(f: &Function) -> Function {
    let mut cur = f.clone();
    loop {
        let live = liveness(&cur);
        let mut changed = false;
        for (n, i) in cur.code.iter_mut() {
            if let Instruction::Op { dest, succ, .. } | Instruction::Load { dest, succ, .. } = i {
                if !live.live_out[n].contains(dest) {
                    *i = Instruction::Nop { succ: *succ };
                    changed = true;
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}
