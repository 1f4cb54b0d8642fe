use super::{AddrMode, Function, Instruction, NodeId, Operation, Program, Reg};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagKind {
    MissingMain(String),
    SymbolClash(String),
    MissingEntry(NodeId),
    DanglingSuccessor(NodeId),
    DuplicateParam(Reg),
    ZeroRegister,
    ZeroNode,
    OpArity {
        expected: usize,
        found: usize,
    },
    AddrArity {
        expected: usize,
        found: usize,
    },
    BadScale(u8),
    BadShift(u32),
    CondArity(usize),
    UnknownGlobal(String),
    CallArity {
        callee: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub function: Option<String>,
    pub node: Option<NodeId>,
    pub kind: DiagKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(func) = &self.function {
            write!(f, "{func}")?;
            if let Some(n) = self.node {
                write!(f, ":{n}")?;
            }
            f.write_str(": ")?;
        }
        match &self.kind {
            DiagKind::MissingMain(m) => write!(f, "main function `{m}` is not defined"),
            DiagKind::SymbolClash(s) => write!(f, "symbol `{s}` is both a function and a global"),
            DiagKind::MissingEntry(n) => write!(f, "entry node {n} does not exist"),
            DiagKind::DanglingSuccessor(n) => write!(f, "successor {n} does not exist"),
            DiagKind::DuplicateParam(r) => write!(f, "parameter {r} appears twice"),
            DiagKind::ZeroRegister => f.write_str("register r0 is not allowed"),
            DiagKind::ZeroNode => f.write_str("node 0 is not allowed"),
            DiagKind::OpArity { expected, found } => {
                write!(f, "operation expects {expected} arguments, found {found}")
            }
            DiagKind::AddrArity { expected, found } => {
                write!(
                    f,
                    "addressing mode expects {expected} registers, found {found}"
                )
            }
            DiagKind::BadScale(s) => write!(f, "index scale {s} is not one of 1, 2, 4, 8"),
            DiagKind::BadShift(s) => write!(f, "shift amount {s} out of range"),
            DiagKind::CondArity(n) => write!(f, "condition expects 2 arguments, found {n}"),
            DiagKind::UnknownGlobal(s) => write!(f, "unknown global `{s}`"),
            DiagKind::CallArity {
                callee,
                expected,
                found,
            } => write!(
                f,
                "call to `{callee}` passes {found} arguments, expected {expected}"
            ),
        }
    }
}

/// Symbols visible to a function. With `globals = None`, global references
/// are not checked.
#[derive(Debug, Default, Clone)]
pub struct Scope {
    pub globals: Option<BTreeMap<String, u64>>,
    /// Defined functions and their parameter counts.
    pub callees: BTreeMap<String, usize>,
}

impl Scope {
    pub fn of_program(p: &Program) -> Scope {
        Scope {
            globals: Some(p.globals.clone()),
            callees: p
                .functions
                .iter()
                .map(|(n, f)| (n.clone(), f.params.len()))
                .collect(),
        }
    }
}

/// Checks every structural invariant of a program. Empty means valid.
pub fn validate(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let top = |kind| Diagnostic {
        function: None,
        node: None,
        kind,
    };
    if !p.functions.contains_key(&p.main) {
        out.push(top(DiagKind::MissingMain(p.main.clone())));
    }
    for g in p.globals.keys() {
        if p.functions.contains_key(g) {
            out.push(top(DiagKind::SymbolClash(g.clone())));
        }
    }
    let scope = Scope::of_program(p);
    for f in p.functions.values() {
        out.extend(validate_function(f, &scope));
    }
    out
}

pub fn validate_function(f: &Function, scope: &Scope) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |node: Option<NodeId>, kind| {
        out.push(Diagnostic {
            function: Some(f.name.clone()),
            node,
            kind,
        })
    };
    if !f.code.contains_key(&f.entry) {
        push(None, DiagKind::MissingEntry(f.entry));
    }
    let mut seen = BTreeSet::new();
    for &r in &f.params {
        if r.0 == 0 {
            push(None, DiagKind::ZeroRegister);
        }
        if !seen.insert(r) {
            push(None, DiagKind::DuplicateParam(r));
        }
    }
    for (&n, i) in &f.code {
        let at = Some(n);
        if n.0 == 0 {
            push(at, DiagKind::ZeroNode);
        }
        for s in i.successors() {
            if !f.code.contains_key(&s) {
                push(at, DiagKind::DanglingSuccessor(s));
            }
        }
        if i.uses().iter().chain(i.def().iter()).any(|r| r.0 == 0) {
            push(at, DiagKind::ZeroRegister);
        }
        match i {
            Instruction::Op { op, args, .. } => {
                if op.arity() != args.len() {
                    push(
                        at,
                        DiagKind::OpArity {
                            expected: op.arity(),
                            found: args.len(),
                        },
                    );
                }
                match *op {
                    Operation::Shl32(s) if s >= 32 => push(at, DiagKind::BadShift(s)),
                    Operation::Shl64(s) if s >= 64 => push(at, DiagKind::BadShift(s)),
                    _ => {}
                }
            }
            Instruction::Load { mode, args, .. } | Instruction::Store { mode, args, .. } => {
                if mode.arity() != args.len() {
                    push(
                        at,
                        DiagKind::AddrArity {
                            expected: mode.arity(),
                            found: args.len(),
                        },
                    );
                }
                match mode {
                    AddrMode::Indexed { scale, .. } if ![1, 2, 4, 8].contains(scale) => {
                        push(at, DiagKind::BadScale(*scale))
                    }
                    AddrMode::Global { symbol, .. } => {
                        if let Some(g) = &scope.globals {
                            if !g.contains_key(symbol) {
                                push(at, DiagKind::UnknownGlobal(symbol.clone()));
                            }
                        }
                    }
                    _ => {}
                }
            }
            Instruction::Cond { args, .. } => {
                if args.len() != 2 {
                    push(at, DiagKind::CondArity(args.len()));
                }
            }
            Instruction::Call { callee, args, .. } => {
                if let Some(&expected) = scope.callees.get(callee) {
                    if expected != args.len() {
                        push(
                            at,
                            DiagKind::CallArity {
                                callee: callee.clone(),
                                expected,
                                found: args.len(),
                            },
                        );
                    }
                }
            }
            Instruction::Nop { .. } | Instruction::Return { .. } => {}
        }
    }
    out
}
