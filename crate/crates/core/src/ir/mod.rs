//! The miniature RTL: functions are control-flow graphs of numbered nodes,
//! each holding one instruction with explicit successors.

mod text;
mod validate;
mod value;

pub(crate) use text::{load_rhs_text, op_rhs_text};
pub use text::{parse, parse_function, parse_unchecked, print, print_function, ParseError};
pub use validate::{validate, validate_function, DiagKind, Diagnostic, Scope};
pub use value::Value;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// A pseudo-register, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Reg(pub u32);

/// A CFG node label, numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", content = "imm", rename_all = "lowercase")]
pub enum Operation {
    Move,
    Const32(i32),
    Const64(i64),
    Add32,
    Add64,
    Sub32,
    Sub64,
    Mul32,
    Mul64,
    Shl32(u32),
    Shl64(u32),
    Sext32To64,
    AddImm32(i32),
    AddImm64(i64),
    MulImm32(i32),
    MulImm64(i64),
    FAdd64,
    FMul64,
}

impl Operation {
    pub fn arity(&self) -> usize {
        use Operation::*;
        match self {
            Const32(_) | Const64(_) => 0,
            Move | Shl32(_) | Shl64(_) | Sext32To64 | AddImm32(_) | AddImm64(_) | MulImm32(_)
            | MulImm64(_) => 1,
            Add32 | Add64 | Sub32 | Sub64 | Mul32 | Mul64 | FAdd64 | FMul64 => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        use Operation::*;
        match self {
            Move => "move",
            Const32(_) => "const32",
            Const64(_) => "const64",
            Add32 => "add32",
            Add64 => "add64",
            Sub32 => "sub32",
            Sub64 => "sub64",
            Mul32 => "mul32",
            Mul64 => "mul64",
            Shl32(_) => "shl32",
            Shl64(_) => "shl64",
            Sext32To64 => "sext32to64",
            AddImm32(_) => "addimm32",
            AddImm64(_) => "addimm64",
            MulImm32(_) => "mulimm32",
            MulImm64(_) => "mulimm64",
            FAdd64 => "fadd64",
            FMul64 => "fmul64",
        }
    }

    pub fn immediate(&self) -> Option<i64> {
        use Operation::*;
        match *self {
            Const32(i) | AddImm32(i) | MulImm32(i) => Some(i64::from(i)),
            Const64(i) | AddImm64(i) | MulImm64(i) => Some(i),
            Shl32(s) | Shl64(s) => Some(i64::from(s)),
            _ => None,
        }
    }

    /// Builds an operation from its text name and optional immediate.
    pub fn from_parts(name: &str, imm: Option<i64>) -> Option<Operation> {
        use Operation::*;
        let i32_imm = || imm.and_then(|i| i32::try_from(i).ok());
        let shift = || imm.and_then(|i| u32::try_from(i).ok());
        let op = match (name, imm.is_some()) {
            ("move", false) => Move,
            ("add32", false) => Add32,
            ("add64", false) => Add64,
            ("sub32", false) => Sub32,
            ("sub64", false) => Sub64,
            ("mul32", false) => Mul32,
            ("mul64", false) => Mul64,
            ("sext32to64", false) => Sext32To64,
            ("fadd64", false) => FAdd64,
            ("fmul64", false) => FMul64,
            ("const32", true) => Const32(i32_imm()?),
            ("const64", true) => Const64(imm?),
            ("shl32", true) => Shl32(shift()?),
            ("shl64", true) => Shl64(shift()?),
            ("addimm32", true) => AddImm32(i32_imm()?),
            ("addimm64", true) => AddImm64(imm?),
            ("mulimm32", true) => MulImm32(i32_imm()?),
            ("mulimm64", true) => MulImm64(imm?),
            _ => return None,
        };
        Some(op)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AddrMode {
    /// `base + offset`
    Based { offset: i64 },
    /// `base + index * scale + offset`
    Indexed { scale: u8, offset: i64 },
    /// `&symbol + offset`
    Global { symbol: String, offset: i64 },
}

impl AddrMode {
    pub fn arity(&self) -> usize {
        match self {
            AddrMode::Based { .. } => 1,
            AddrMode::Indexed { .. } => 2,
            AddrMode::Global { .. } => 0,
        }
    }

    pub fn offset(&self) -> i64 {
        match *self {
            AddrMode::Based { offset }
            | AddrMode::Indexed { offset, .. }
            | AddrMode::Global { offset, .. } => offset,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chunk {
    Int8,
    Int16,
    Int32,
    Int64,
    Float32,
    Float64,
}

impl Chunk {
    pub const ALL: [Chunk; 6] = [
        Chunk::Int8,
        Chunk::Int16,
        Chunk::Int32,
        Chunk::Int64,
        Chunk::Float32,
        Chunk::Float64,
    ];

    pub fn size(self) -> i64 {
        match self {
            Chunk::Int8 => 1,
            Chunk::Int16 => 2,
            Chunk::Int32 | Chunk::Float32 => 4,
            Chunk::Int64 | Chunk::Float64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Chunk::Int8 => "int8",
            Chunk::Int16 => "int16",
            Chunk::Int32 => "int32",
            Chunk::Int64 => "int64",
            Chunk::Float32 => "float32",
            Chunk::Float64 => "float64",
        }
    }

    pub fn from_name(s: &str) -> Option<Chunk> {
        Chunk::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Width {
    W32,
    W64,
}

/// Signed integer comparison of two registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub cmp: Comparison,
    pub width: Width,
}

impl Condition {
    pub fn new(cmp: Comparison, width: Width) -> Self {
        Condition { cmp, width }
    }

    pub fn name(&self) -> String {
        let c = match self.cmp {
            Comparison::Eq => "eq",
            Comparison::Ne => "ne",
            Comparison::Lt => "lt",
            Comparison::Le => "le",
            Comparison::Gt => "gt",
            Comparison::Ge => "ge",
        };
        let w = match self.width {
            Width::W32 => "32",
            Width::W64 => "64",
        };
        format!("{c}{w}")
    }

    pub fn from_name(s: &str) -> Option<Condition> {
        let (c, w) = s.split_at(s.len().checked_sub(2)?);
        let cmp = match c {
            "eq" => Comparison::Eq,
            "ne" => Comparison::Ne,
            "lt" => Comparison::Lt,
            "le" => Comparison::Le,
            "gt" => Comparison::Gt,
            "ge" => Comparison::Ge,
            _ => return None,
        };
        let width = match w {
            "32" => Width::W32,
            "64" => Width::W64,
            _ => return None,
        };
        Some(Condition { cmp, width })
    }

    pub fn eval<T: Ord>(&self, a: T, b: T) -> bool {
        match self.cmp {
            Comparison::Eq => a == b,
            Comparison::Ne => a != b,
            Comparison::Lt => a < b,
            Comparison::Le => a <= b,
            Comparison::Gt => a > b,
            Comparison::Ge => a >= b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Instruction {
    Op {
        op: Operation,
        args: Vec<Reg>,
        dest: Reg,
        succ: NodeId,
    },
    Load {
        chunk: Chunk,
        mode: AddrMode,
        args: Vec<Reg>,
        dest: Reg,
        succ: NodeId,
    },
    Store {
        chunk: Chunk,
        mode: AddrMode,
        args: Vec<Reg>,
        src: Reg,
        succ: NodeId,
    },
    Cond {
        cond: Condition,
        args: Vec<Reg>,
        ifso: NodeId,
        ifnot: NodeId,
    },
    Call {
        callee: String,
        args: Vec<Reg>,
        dest: Reg,
        succ: NodeId,
    },
    Nop {
        succ: NodeId,
    },
    Return {
        value: Option<Reg>,
    },
}

impl Instruction {
    pub fn successors(&self) -> Vec<NodeId> {
        match self {
            Instruction::Op { succ, .. }
            | Instruction::Load { succ, .. }
            | Instruction::Store { succ, .. }
            | Instruction::Call { succ, .. }
            | Instruction::Nop { succ } => vec![*succ],
            Instruction::Cond { ifso, ifnot, .. } => vec![*ifso, *ifnot],
            Instruction::Return { .. } => vec![],
        }
    }

    /// Rewrites every successor through `f`, in positional order.
    pub fn map_successors(&self, mut f: impl FnMut(NodeId) -> NodeId) -> Instruction {
        let mut out = self.clone();
        match &mut out {
            Instruction::Op { succ, .. }
            | Instruction::Load { succ, .. }
            | Instruction::Store { succ, .. }
            | Instruction::Call { succ, .. }
            | Instruction::Nop { succ } => *succ = f(*succ),
            Instruction::Cond { ifso, ifnot, .. } => {
                *ifso = f(*ifso);
                *ifnot = f(*ifnot);
            }
            Instruction::Return { .. } => {}
        }
        out
    }

    /// Equality of every field except the successors.
    pub fn same_modulo_successors(&self, other: &Instruction) -> bool {
        let blank = |_| NodeId(0);
        self.map_successors(blank) == other.map_successors(blank)
    }

    /// Registers read by the instruction.
    pub fn uses(&self) -> Vec<Reg> {
        match self {
            Instruction::Op { args, .. }
            | Instruction::Load { args, .. }
            | Instruction::Cond { args, .. }
            | Instruction::Call { args, .. } => args.clone(),
            Instruction::Store { args, src, .. } => {
                let mut v = args.clone();
                v.push(*src);
                v
            }
            Instruction::Nop { .. } => vec![],
            Instruction::Return { value } => value.iter().copied().collect(),
        }
    }

    /// Register written by the instruction.
    pub fn def(&self) -> Option<Reg> {
        match self {
            Instruction::Op { dest, .. }
            | Instruction::Load { dest, .. }
            | Instruction::Call { dest, .. } => Some(*dest),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Instruction::Op { .. } => "op",
            Instruction::Load { .. } => "load",
            Instruction::Store { .. } => "store",
            Instruction::Cond { .. } => "cond",
            Instruction::Call { .. } => "call",
            Instruction::Nop { .. } => "nop",
            Instruction::Return { .. } => "return",
        }
    }

    pub fn is_self_move(&self) -> bool {
        matches!(self, Instruction::Op { op: Operation::Move, args, dest, .. } if args.len() == 1 && args[0] == *dest)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Function {
    pub name: String,
    pub params: Vec<Reg>,
    pub entry: NodeId,
    pub code: BTreeMap<NodeId, Instruction>,
    pub stacksize: u64,
}

impl Function {
    pub fn max_node(&self) -> u32 {
        self.code.keys().next_back().map_or(0, |n| n.0)
    }

    pub fn max_reg(&self) -> u32 {
        let mut m = self.params.iter().map(|r| r.0).max().unwrap_or(0);
        for i in self.code.values() {
            for r in i.uses().into_iter().chain(i.def()) {
                m = m.max(r.0);
            }
        }
        m
    }

    /// Predecessor lists, in ascending node order.
    pub fn predecessors(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut preds: BTreeMap<NodeId, Vec<NodeId>> =
            self.code.keys().map(|&n| (n, Vec::new())).collect();
        for (&n, i) in &self.code {
            for s in i.successors() {
                if let Some(v) = preds.get_mut(&s) {
                    if !v.contains(&n) {
                        v.push(n);
                    }
                }
            }
        }
        preds
    }

    /// Nodes reachable from the entry, in reverse postorder.
    pub fn reverse_postorder(&self) -> Vec<NodeId> {
        let mut visited = std::collections::HashSet::new();
        let mut post = Vec::with_capacity(self.code.len());
        let mut stack: Vec<(NodeId, usize)> = Vec::new();
        if self.code.contains_key(&self.entry) {
            visited.insert(self.entry);
            stack.push((self.entry, 0));
        }
        while let Some((n, i)) = stack.last_mut() {
            let succs = self.code[n].successors();
            if *i < succs.len() {
                let s = succs[*i];
                *i += 1;
                if self.code.contains_key(&s) && visited.insert(s) {
                    stack.push((s, 0));
                }
            } else {
                post.push(*n);
                stack.pop();
            }
        }
        post.reverse();
        post
    }

    /// Count of `Op` and `Load` instructions over the given nodes.
    pub fn count_ops_loads<'a>(&self, nodes: impl IntoIterator<Item = &'a NodeId>) -> usize {
        nodes
            .into_iter()
            .filter(|n| {
                matches!(
                    self.code.get(n),
                    Some(Instruction::Op { .. } | Instruction::Load { .. })
                )
            })
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub functions: BTreeMap<String, Function>,
    /// Global symbol to size in bytes.
    pub globals: BTreeMap<String, u64>,
    pub main: String,
}

impl Program {
    pub fn main_function(&self) -> Option<&Function> {
        self.functions.get(&self.main)
    }
}
