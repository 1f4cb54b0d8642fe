//! Global common-subexpression elimination over equations `r = rhs`.
//!
//! An untrusted forward analysis computes, for every node, the set of
//! equations that hold on entry. The sets are then re-checked for
//! inductiveness against tables rebuilt from the equation catalog alone, and
//! only checked invariants drive the rewrite of redundant operations and
//! loads into moves.

mod analysis;
mod rewrite;
mod tables;
mod transfer;

pub use analysis::{analyze, check_inductive, Analysis, AnalysisError, CheckError, Checked};
pub use rewrite::{is_trivial, rewrite};
pub use tables::{Catalog, Tables};
pub use transfer::{find_computed, forward_move, kill_reg, may_overlap, transfer};

use crate::hset::HSet;
use crate::interp::{eval_addr, eval_op, Genv, Memory, Regs};
use crate::ir::{load_rhs_text, op_rhs_text, AddrMode, Chunk, NodeId, Operation, Reg, Value};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub type EqId = u64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rhs {
    Op(Operation, Vec<Reg>),
    Load(Chunk, AddrMode, Vec<Reg>),
}

impl Rhs {
    pub fn args(&self) -> &[Reg] {
        match self {
            Rhs::Op(_, a) | Rhs::Load(_, _, a) => a,
        }
    }

    pub fn is_move(&self) -> bool {
        matches!(self, Rhs::Op(Operation::Move, a) if a.len() == 1)
    }

    pub fn eval(&self, genv: &Genv, regs: &Regs, mem: &Memory) -> Value {
        match self {
            Rhs::Op(op, args) => eval_op(op, &regs.get_all(args)),
            Rhs::Load(chunk, mode, args) => {
                let a = eval_addr(genv, mode, &regs.get_all(args));
                mem.load(*chunk, a).unwrap_or(Value::Undef)
            }
        }
    }
}

impl fmt::Display for Rhs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rhs::Op(op, args) => f.write_str(&op_rhs_text(op, args)),
            Rhs::Load(c, m, args) => f.write_str(&load_rhs_text(*c, m, args)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Equation {
    pub lhs: Reg,
    pub rhs: Rhs,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.lhs, self.rhs)
    }
}

/// Whether `e` holds in a concrete state: the right-hand side evaluates to
/// exactly the value of the left-hand register. A load from an invalid
/// address evaluates to `Undef`.
pub fn eq_holds(genv: &Genv, regs: &Regs, mem: &Memory, e: &Equation) -> bool {
    e.rhs.eval(genv, regs, mem) == regs.get(e.lhs)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CallMode {
    #[default]
    ForgetAll,
    ForgetMemOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Opts {
    pub across_calls: CallMode,
    /// Add `rd = r'` when `rd := rhs` recomputes a value already held in `r'`.
    pub glb_moves: bool,
    /// Treat constant loads as too cheap to replace.
    pub trivial_consts: bool,
}

impl Default for Opts {
    fn default() -> Self {
        Opts {
            across_calls: CallMode::ForgetAll,
            glb_moves: true,
            trivial_consts: true,
        }
    }
}

/// Abstract state at a node: unreachable, or a set of equation ids.
#[derive(Clone, Debug)]
pub enum AbsState {
    Bot,
    Known(HSet),
}

impl AbsState {
    pub fn top() -> AbsState {
        AbsState::Known(HSet::empty())
    }

    pub fn ids(&self) -> Option<&HSet> {
        match self {
            AbsState::Bot => None,
            AbsState::Known(s) => Some(s),
        }
    }

    /// Identity of abstract states built in one table.
    pub fn same(&self, other: &AbsState) -> bool {
        match (self, other) {
            (AbsState::Bot, AbsState::Bot) => true,
            (AbsState::Known(a), AbsState::Known(b)) => a.equal(b),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Invariants(pub BTreeMap<NodeId, AbsState>);

impl Invariants {
    pub fn get(&self, n: NodeId) -> Option<&AbsState> {
        self.0.get(&n)
    }
}

/// One line per node: `p: {r3 = add32(r1,r2), ...}` with equations in id
/// order, or `p: bot`.
pub fn dump_invariants(catalog: &Catalog, inv: &Invariants) -> String {
    let mut out = String::new();
    for (n, s) in &inv.0 {
        match s {
            AbsState::Bot => out.push_str(&format!("{n}: bot\n")),
            AbsState::Known(ids) => {
                let eqs: Vec<String> = ids
                    .contents()
                    .into_iter()
                    .map(|id| match catalog.get(id) {
                        Some(e) => e.to_string(),
                        None => format!("#{id}"),
                    })
                    .collect();
                out.push_str(&format!("{n}: {{{}}}\n", eqs.join(", ")));
            }
        }
    }
    out
}
