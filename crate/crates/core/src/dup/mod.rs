//! Code duplication passes (first-iteration unrolling and loop rotation) and
//! the checker that validates them through a reverse node mapping.

mod loops;
mod transform;

pub use loops::{find_loops, Dominators, NaturalLoop};
pub use transform::{rotate, rotate_all, unroll_all, unroll_first, Skipped};

use crate::ir::{Function, NodeId};
use std::collections::BTreeMap;
use std::fmt;

/// Maps every node of a transformed function to the original node it was
/// copied from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RevMap(pub BTreeMap<NodeId, NodeId>);

impl RevMap {
    pub fn identity(f: &Function) -> RevMap {
        RevMap(f.code.keys().map(|&n| (n, n)).collect())
    }

    pub fn get(&self, n: NodeId) -> Option<NodeId> {
        self.0.get(&n).copied()
    }

    /// `self` maps C to B and `earlier` maps B to A; the result maps C to A.
    pub fn then(&self, earlier: &RevMap) -> RevMap {
        RevMap(
            self.0
                .iter()
                .filter_map(|(&c, b)| earlier.get(*b).map(|a| (c, a)))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let m: BTreeMap<String, u32> = self.0.iter().map(|(k, v)| (k.0.to_string(), v.0)).collect();
        serde_json::to_string_pretty(&m).expect("string keys serialize")
    }

    pub fn from_json(s: &str) -> Result<RevMap, String> {
        let m: BTreeMap<String, u32> = serde_json::from_str(s).map_err(|e| e.to_string())?;
        m.into_iter()
            .map(|(k, v)| {
                let k: u32 = k.parse().map_err(|_| format!("invalid node id `{k}`"))?;
                Ok((NodeId(k), NodeId(v)))
            })
            .collect::<Result<_, String>>()
            .map(RevMap)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RejectReason {
    Signature,
    EntryMismatch {
        mapped: Option<NodeId>,
    },
    Unmapped,
    NoOriginal(NodeId),
    InstructionMismatch(NodeId),
    SuccessorMismatch {
        index: usize,
        found: Option<NodeId>,
        expected: NodeId,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejected {
    pub node: Option<NodeId>,
    pub reason: RejectReason,
}

impl fmt::Display for Rejected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.node {
            write!(f, "node {n}: ")?;
        }
        match &self.reason {
            RejectReason::Signature => f.write_str("parameters or stack size differ"),
            RejectReason::EntryMismatch { mapped: Some(m) } => {
                write!(f, "entry maps to {m}, not the original entry")
            }
            RejectReason::EntryMismatch { mapped: None } => f.write_str("entry is not mapped"),
            RejectReason::Unmapped => f.write_str("node is not mapped"),
            RejectReason::NoOriginal(n) => write!(f, "maps to {n}, which is not in the original"),
            RejectReason::InstructionMismatch(n) => {
                write!(f, "instruction differs from original node {n}")
            }
            RejectReason::SuccessorMismatch {
                index,
                found: Some(s),
                expected,
            } => write!(f, "successor {index} maps to {s}, expected {expected}"),
            RejectReason::SuccessorMismatch {
                index, expected, ..
            } => write!(f, "successor {index} is unmapped, expected {expected}"),
        }
    }
}

impl std::error::Error for Rejected {}

/// Checks that `transf` is `orig` with code duplicated according to `map`.
pub fn verify_dup(orig: &Function, transf: &Function, map: &RevMap) -> Result<(), Rejected> {
    let reject = |node, reason| Err(Rejected { node, reason });
    if orig.params != transf.params || orig.stacksize != transf.stacksize {
        return reject(None, RejectReason::Signature);
    }
    match map.get(transf.entry) {
        Some(e) if e == orig.entry => {}
        mapped => return reject(Some(transf.entry), RejectReason::EntryMismatch { mapped }),
    }
    for (&p, i) in &transf.code {
        let Some(q) = map.get(p) else {
            return reject(Some(p), RejectReason::Unmapped);
        };
        let Some(j) = orig.code.get(&q) else {
            return reject(Some(p), RejectReason::NoOriginal(q));
        };
        if !i.same_modulo_successors(j) {
            return reject(Some(p), RejectReason::InstructionMismatch(q));
        }
        for (index, (s1, s)) in i.successors().into_iter().zip(j.successors()).enumerate() {
            let found = map.get(s1);
            if found != Some(s) {
                return reject(
                    Some(p),
                    RejectReason::SuccessorMismatch {
                        index,
                        found,
                        expected: s,
                    },
                );
            }
        }
    }
    Ok(())
}
