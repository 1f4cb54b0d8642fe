use super::{transfer, AbsState, Catalog, EqId, Invariants, Opts, Tables};
use crate::hset::{HSet, ImportMemo};
use crate::ir::{Function, NodeId};
use crate::typing::TypeEnv;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug)]
pub struct Analysis {
    pub tables: Tables,
    pub invariants: Invariants,
    /// Worklist pops until the fixpoint.
    pub iterations: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnalysisError {
    BoundExceeded { changes: u64, bound: u64 },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::BoundExceeded { changes, bound } => {
                write!(
                    f,
                    "analysis did not stabilize: {changes} state changes, bound {bound}"
                )
            }
        }
    }
}

impl std::error::Error for AnalysisError {}

fn join(t: &mut Tables, old: &AbsState, new: &AbsState) -> AbsState {
    match (old, new) {
        (AbsState::Bot, s) | (s, AbsState::Bot) => s.clone(),
        (AbsState::Known(a), AbsState::Known(b)) => AbsState::Known(t.intern.inter(a, b)),
    }
}

/// Forward fixpoint: the entry starts with no known equation, every other
/// node with `Bot`, and control-flow merges intersect.
pub fn analyze(f: &Function, env: &TypeEnv, opts: &Opts) -> Result<Analysis, AnalysisError> {
    let mut t = Tables::new();
    let rpo = f.reverse_postorder();
    let order: BTreeMap<NodeId, usize> = rpo.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut inv: BTreeMap<NodeId, AbsState> = f.code.keys().map(|&n| (n, AbsState::Bot)).collect();
    let mut work = BTreeSet::new();
    if f.code.contains_key(&f.entry) {
        inv.insert(f.entry, AbsState::top());
        work.insert(0usize);
    }
    let nodes = f.code.len() as u64;
    let mut changes = 0u64;
    let mut iterations = 0u64;
    while let Some(i) = work.pop_first() {
        iterations += 1;
        let n = rpo[i];
        let instr = &f.code[&n];
        let out = transfer(&mut t, &inv[&n], instr, env, opts);
        for s in instr.successors() {
            let Some(old) = inv.get(&s) else { continue };
            let new = join(&mut t, old, &out);
            if !new.same(old) {
                inv.insert(s, new);
                work.insert(order[&s]);
                changes += 1;
                let bound = nodes * (1 + t.catalog().len() as u64);
                if changes > bound {
                    return Err(AnalysisError::BoundExceeded { changes, bound });
                }
            }
        }
    }
    Ok(Analysis {
        tables: t,
        invariants: Invariants(inv),
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckError {
    MissingNode(NodeId),
    UnknownId { node: NodeId, id: EqId },
    Entry(NodeId),
    Edge { from: NodeId, to: NodeId },
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckError::MissingNode(n) => write!(f, "no invariant for node {n}"),
            CheckError::UnknownId { node, id } => {
                write!(
                    f,
                    "invariant at node {node} names equation {id}, absent from the catalog"
                )
            }
            CheckError::Entry(n) => write!(f, "invariant at entry node {n} is not empty"),
            CheckError::Edge { from, to } => {
                write!(
                    f,
                    "invariant at node {to} is not implied along edge {from} -> {to}"
                )
            }
        }
    }
}

impl std::error::Error for CheckError {}

/// Invariants that passed the check, re-interned into tables rebuilt from
/// the catalog.
#[derive(Debug)]
pub struct Checked {
    pub tables: Tables,
    pub invariants: Invariants,
}

/// Verifies that `inv` is inductive for `f`, using only `catalog` and `inv`.
pub fn check_inductive(
    f: &Function,
    env: &TypeEnv,
    opts: &Opts,
    catalog: &Catalog,
    inv: &Invariants,
) -> Result<Checked, CheckError> {
    let mut t = Tables::rebuild(catalog);
    let mut memo = ImportMemo::default();
    let mut mine: BTreeMap<NodeId, AbsState> = BTreeMap::new();
    for &n in f.code.keys() {
        let s = inv.get(n).ok_or(CheckError::MissingNode(n))?;
        let s = match s {
            AbsState::Bot => AbsState::Bot,
            AbsState::Known(ids) => {
                let ids: HSet = t.intern.import(ids, &mut memo);
                if let Some(id) = ids
                    .contents()
                    .into_iter()
                    .find(|&id| catalog.get(id).is_none())
                {
                    return Err(CheckError::UnknownId { node: n, id });
                }
                AbsState::Known(ids)
            }
        };
        mine.insert(n, s);
    }
    match mine.get(&f.entry) {
        Some(AbsState::Known(ids)) if ids.is_empty() => {}
        _ => return Err(CheckError::Entry(f.entry)),
    }
    for (&p, i) in &f.code {
        let out = transfer(&mut t, &mine[&p], i, env, opts);
        let AbsState::Known(have) = out else { continue };
        for s in i.successors() {
            let ok = match mine.get(&s) {
                Some(AbsState::Known(need)) => need.subset(&have),
                _ => false,
            };
            if !ok {
                return Err(CheckError::Edge { from: p, to: s });
            }
        }
    }
    Ok(Checked {
        tables: t,
        invariants: Invariants(mine),
    })
}
