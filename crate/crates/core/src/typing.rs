//! Register type inference by unification over instruction signatures.

use crate::ir::{AddrMode, Chunk, Function, Instruction, NodeId, Operation, Reg, Value, Width};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    T32,
    T64,
    TF32,
    TF64,
    TPtr,
}

impl Ty {
    pub fn name(self) -> &'static str {
        match self {
            Ty::T32 => "int32",
            Ty::T64 => "int64",
            Ty::TF32 => "float32",
            Ty::TF64 => "float64",
            Ty::TPtr => "ptr",
        }
    }

    /// Whether a runtime value is of this type. `Undef` inhabits every type;
    /// 64-bit integers and pointers share one representation.
    pub fn accepts(self, v: Value) -> bool {
        matches!(
            (self, v),
            (_, Value::Undef)
                | (Ty::T32, Value::I32(_))
                | (Ty::T64 | Ty::TPtr, Value::I64(_) | Value::Ptr { .. })
                | (Ty::TF32, Value::F32(_))
                | (Ty::TF64, Value::F64(_))
        )
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn chunk_matches(c: Chunk, t: Ty) -> bool {
    matches!(
        (c, t),
        (Chunk::Int32, Ty::T32)
            | (Chunk::Int64, Ty::T64 | Ty::TPtr)
            | (Chunk::Float32, Ty::TF32)
            | (Chunk::Float64, Ty::TF64)
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Int,
    Long,
    Single,
    Double,
}

impl Kind {
    fn of_chunk(c: Chunk) -> Kind {
        match c {
            Chunk::Int8 | Chunk::Int16 | Chunk::Int32 => Kind::Int,
            Chunk::Int64 => Kind::Long,
            Chunk::Float32 => Kind::Single,
            Chunk::Float64 => Kind::Double,
        }
    }

    fn ty(self) -> Ty {
        match self {
            Kind::Int => Ty::T32,
            Kind::Long => Ty::T64,
            Kind::Single => Ty::TF32,
            Kind::Double => Ty::TF64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IllTyped {
    pub reg: Reg,
    pub node: NodeId,
    pub expected: Ty,
    pub found: Ty,
}

impl fmt::Display for IllTyped {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "node {}: register {} used as {} but already has type {}",
            self.node, self.reg, self.expected, self.found
        )
    }
}

impl std::error::Error for IllTyped {}

/// Inferred type of every register occurring in a function.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeEnv(pub BTreeMap<Reg, Ty>);

impl TypeEnv {
    /// Type of `r`; registers absent from the function default to `T64`.
    pub fn get(&self, r: Reg) -> Ty {
        self.0.get(&r).copied().unwrap_or(Ty::T64)
    }
}

impl fmt::Display for TypeEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, t) in &self.0 {
            writeln!(f, "{r}: {t}")?;
        }
        Ok(())
    }
}

struct Unifier {
    index: BTreeMap<Reg, usize>,
    parent: Vec<usize>,
    kind: Vec<Option<Kind>>,
    ptr: Vec<bool>,
}

impl Unifier {
    fn slot(&mut self, r: Reg) -> usize {
        let n = self.parent.len();
        let i = *self.index.entry(r).or_insert(n);
        if i == n {
            self.parent.push(n);
            self.kind.push(None);
            self.ptr.push(false);
        }
        i
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn constrain(&mut self, r: Reg, k: Kind, node: NodeId) -> Result<(), IllTyped> {
        let i = self.slot(r);
        let root = self.find(i);
        match self.kind[root] {
            None => {
                self.kind[root] = Some(k);
                Ok(())
            }
            Some(have) if have == k => Ok(()),
            Some(have) => Err(IllTyped {
                reg: r,
                node,
                expected: k.ty(),
                found: have.ty(),
            }),
        }
    }

    fn unify(&mut self, a: Reg, b: Reg, node: NodeId) -> Result<(), IllTyped> {
        let (ia, ib) = (self.slot(a), self.slot(b));
        let (ra, rb) = (self.find(ia), self.find(ib));
        if ra == rb {
            return Ok(());
        }
        match (self.kind[ra], self.kind[rb]) {
            (Some(x), Some(y)) if x != y => {
                return Err(IllTyped {
                    reg: b,
                    node,
                    expected: x.ty(),
                    found: y.ty(),
                })
            }
            (ka, kb) => {
                self.parent[rb] = ra;
                self.kind[ra] = ka.or(kb);
                self.ptr[ra] |= self.ptr[rb];
            }
        }
        Ok(())
    }

    fn is_ptr(&mut self, r: Reg) -> bool {
        let i = self.slot(r);
        let root = self.find(i);
        self.ptr[root]
    }

    fn mark_ptr(&mut self, r: Reg) -> bool {
        let i = self.slot(r);
        let root = self.find(i);
        !std::mem::replace(&mut self.ptr[root], true)
    }
}

fn op_signature(op: &Operation) -> (Vec<Kind>, Kind) {
    use Kind::*;
    use Operation::*;
    match op {
        Move => unreachable!("moves unify instead"),
        Const32(_) => (vec![], Int),
        Const64(_) => (vec![], Long),
        Add32 | Sub32 | Mul32 => (vec![Int, Int], Int),
        Add64 | Sub64 | Mul64 => (vec![Long, Long], Long),
        Shl32(_) | AddImm32(_) | MulImm32(_) => (vec![Int], Int),
        Shl64(_) | AddImm64(_) | MulImm64(_) => (vec![Long], Long),
        Sext32To64 => (vec![Int], Long),
        FAdd64 | FMul64 => (vec![Double, Double], Double),
    }
}

fn addr_constraints(
    u: &mut Unifier,
    mode: &AddrMode,
    args: &[Reg],
    n: NodeId,
) -> Result<(), IllTyped> {
    if let AddrMode::Based { .. } | AddrMode::Indexed { .. } = mode {
        for &a in args {
            u.constrain(a, Kind::Long, n)?;
        }
        if let Some(&base) = args.first() {
            u.mark_ptr(base);
        }
    }
    Ok(())
}

pub fn infer(f: &Function) -> Result<TypeEnv, IllTyped> {
    let mut u = Unifier {
        index: BTreeMap::new(),
        parent: Vec::new(),
        kind: Vec::new(),
        ptr: Vec::new(),
    };
    for &p in &f.params {
        u.slot(p);
    }
    for (&n, i) in &f.code {
        for r in i.uses().into_iter().chain(i.def()) {
            u.slot(r);
        }
        match i {
            Instruction::Op {
                op: Operation::Move,
                args,
                dest,
                ..
            } => {
                if let [a] = args.as_slice() {
                    u.unify(*dest, *a, n)?;
                }
            }
            Instruction::Op { op, args, dest, .. } => {
                let (ins, out) = op_signature(op);
                for (&a, k) in args.iter().zip(ins) {
                    u.constrain(a, k, n)?;
                }
                u.constrain(*dest, out, n)?;
            }
            Instruction::Load {
                chunk,
                mode,
                args,
                dest,
                ..
            } => {
                addr_constraints(&mut u, mode, args, n)?;
                u.constrain(*dest, Kind::of_chunk(*chunk), n)?;
            }
            Instruction::Store {
                chunk,
                mode,
                args,
                src,
                ..
            } => {
                addr_constraints(&mut u, mode, args, n)?;
                u.constrain(*src, Kind::of_chunk(*chunk), n)?;
            }
            Instruction::Cond { cond, args, .. } => {
                let k = match cond.width {
                    Width::W32 => Kind::Int,
                    Width::W64 => Kind::Long,
                };
                for &a in args {
                    u.constrain(a, k, n)?;
                }
            }
            Instruction::Call { dest, .. } => u.constrain(*dest, Kind::Long, n)?,
            Instruction::Nop { .. } | Instruction::Return { .. } => {}
        }
    }
    // Pointer-ness flows forward through pointer arithmetic.
    let mut changed = true;
    while changed {
        changed = false;
        for i in f.code.values() {
            if let Instruction::Op { op, args, dest, .. } = i {
                let flows = matches!(
                    op,
                    Operation::Add64 | Operation::Sub64 | Operation::AddImm64(_)
                );
                if flows && args.first().is_some_and(|&a| u.is_ptr(a)) {
                    changed |= u.mark_ptr(*dest);
                }
            }
        }
    }
    let regs: Vec<Reg> = u.index.keys().copied().collect();
    let mut env = BTreeMap::new();
    for r in regs {
        let i = u.slot(r);
        let root = u.find(i);
        let ty = match u.kind[root] {
            None | Some(Kind::Long) if u.ptr[root] => Ty::TPtr,
            None => Ty::T64,
            Some(k) => k.ty(),
        };
        env.insert(r, ty);
    }
    Ok(TypeEnv(env))
}
