//! Deterministic small-step reference interpreter, plus the refinement
//! relation used to compare an original program's behavior with an
//! optimized one.
//!
//! Memory is a list of byte-addressed blocks. Globals occupy blocks
//! `1..=G` in symbol order and are filled from the run seed; each call
//! allocates a stack block initialized to undefined bytes. External calls
//! (calls to symbols with no definition) are observable events whose result
//! is a seeded hash of the callee name and arguments.

use crate::ir::{
    AddrMode, Chunk, Function, Instruction, NodeId, Operation, Program, Reg, Value, Width,
};
use std::collections::HashMap;
use std::fmt;

/// Maximum call depth before the machine traps.
pub const MAX_CALL_DEPTH: usize = 4096;

/// Default step budget.
pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemByte {
    Byte(u8),
    PtrFrag { block: u32, offset: i64, index: u8 },
    Undef,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub bytes: Vec<MemByte>,
    pub live: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trap {
    BadAddress,
    OutOfBounds {
        block: u32,
        offset: i64,
        chunk: Chunk,
    },
    DeadBlock(u32),
    BadCondition,
    CallArity {
        callee: String,
        expected: usize,
        found: usize,
    },
    UndefExternalArg(String),
    StackOverflow,
    MissingNode(NodeId),
    MissingFunction(String),
}

impl fmt::Display for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trap::BadAddress => f.write_str("address is not a pointer"),
            Trap::OutOfBounds {
                block,
                offset,
                chunk,
            } => write!(
                f,
                "{} access out of bounds at block {block} offset {offset}",
                chunk.name()
            ),
            Trap::DeadBlock(b) => write!(f, "access to freed block {b}"),
            Trap::BadCondition => f.write_str("branch on undefined or non-integer value"),
            Trap::CallArity {
                callee,
                expected,
                found,
            } => write!(
                f,
                "call to `{callee}` with {found} arguments, expected {expected}"
            ),
            Trap::UndefExternalArg(s) => write!(f, "undefined argument passed to external `{s}`"),
            Trap::StackOverflow => f.write_str("call stack overflow"),
            Trap::MissingNode(n) => write!(f, "no instruction at node {n}"),
            Trap::MissingFunction(s) => write!(f, "no function `{s}`"),
        }
    }
}

/// Byte-addressed memory.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    blocks: Vec<Block>,
}

impl Memory {
    pub fn new() -> Self {
        Memory::default()
    }

    /// Allocates a block and returns its id (ids start at 1).
    pub fn alloc(&mut self, bytes: Vec<MemByte>) -> u32 {
        self.blocks.push(Block { bytes, live: true });
        self.blocks.len() as u32
    }

    pub fn free(&mut self, block: u32) {
        if let Some(b) = self.blocks.get_mut(block as usize - 1) {
            b.live = false;
        }
    }

    pub fn block(&self, id: u32) -> Option<&Block> {
        id.checked_sub(1).and_then(|i| self.blocks.get(i as usize))
    }

    pub fn block_mut(&mut self, id: u32) -> Option<&mut Block> {
        id.checked_sub(1)
            .and_then(|i| self.blocks.get_mut(i as usize))
    }

    pub fn block_count(&self) -> u32 {
        self.blocks.len() as u32
    }

    fn range(&self, chunk: Chunk, addr: Value) -> Result<(u32, usize), Trap> {
        let (block, offset) = match addr {
            Value::Ptr { block, offset } => (block, offset),
            _ => return Err(Trap::BadAddress),
        };
        let b = self.block(block).ok_or(Trap::BadAddress)?;
        if !b.live {
            return Err(Trap::DeadBlock(block));
        }
        let oob = Trap::OutOfBounds {
            block,
            offset,
            chunk,
        };
        if offset < 0
            || offset
                .checked_add(chunk.size())
                .is_none_or(|end| end > b.bytes.len() as i64)
        {
            return Err(oob);
        }
        Ok((block, offset as usize))
    }

    pub fn load(&self, chunk: Chunk, addr: Value) -> Result<Value, Trap> {
        let (block, start) = self.range(chunk, addr)?;
        let bytes =
            &self.block(block).expect("checked").bytes[start..start + chunk.size() as usize];
        Ok(decode(chunk, bytes))
    }

    pub fn store(&mut self, chunk: Chunk, addr: Value, v: Value) -> Result<(), Trap> {
        let (block, start) = self.range(chunk, addr)?;
        let enc = encode(chunk, v);
        let b = self.block_mut(block).expect("checked");
        b.bytes[start..start + enc.len()].copy_from_slice(&enc);
        Ok(())
    }
}

pub fn encode(chunk: Chunk, v: Value) -> Vec<MemByte> {
    let n = chunk.size() as usize;
    let le = |bytes: &[u8]| bytes[..n].iter().map(|&b| MemByte::Byte(b)).collect();
    match (chunk, v) {
        (Chunk::Int8 | Chunk::Int16 | Chunk::Int32, Value::I32(x)) => le(&x.to_le_bytes()),
        (Chunk::Int64, Value::I64(x)) => le(&x.to_le_bytes()),
        (Chunk::Int64, Value::Ptr { block, offset }) => (0..8)
            .map(|index| MemByte::PtrFrag {
                block,
                offset,
                index,
            })
            .collect(),
        (Chunk::Float32, Value::F32(x)) => le(&x.to_bits().to_le_bytes()),
        (Chunk::Float64, Value::F64(x)) => le(&x.to_bits().to_le_bytes()),
        _ => vec![MemByte::Undef; n],
    }
}

pub fn decode(chunk: Chunk, bytes: &[MemByte]) -> Value {
    if bytes.contains(&MemByte::Undef) {
        return Value::Undef;
    }
    if let MemByte::PtrFrag { block, offset, .. } = bytes[0] {
        let whole = chunk == Chunk::Int64
            && bytes.iter().enumerate().all(|(i, b)| {
                *b == MemByte::PtrFrag {
                    block,
                    offset,
                    index: i as u8,
                }
            });
        return if whole {
            Value::Ptr { block, offset }
        } else {
            Value::Undef
        };
    }
    let mut raw = [0u8; 8];
    for (i, b) in bytes.iter().enumerate() {
        match b {
            MemByte::Byte(x) => raw[i] = *x,
            _ => return Value::Undef,
        }
    }
    match chunk {
        Chunk::Int8 => Value::I32(i32::from(raw[0] as i8)),
        Chunk::Int16 => Value::I32(i32::from(i16::from_le_bytes([raw[0], raw[1]]))),
        Chunk::Int32 => Value::I32(i32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]])),
        Chunk::Int64 => Value::I64(i64::from_le_bytes(raw)),
        Chunk::Float32 => Value::F32(f32::from_bits(u32::from_le_bytes([
            raw[0], raw[1], raw[2], raw[3],
        ]))),
        Chunk::Float64 => Value::F64(f64::from_bits(u64::from_le_bytes(raw))),
    }
}

/// Global symbol resolution: symbol to block id.
#[derive(Clone, Debug, Default)]
pub struct Genv {
    blocks: HashMap<String, u32>,
}

impl Genv {
    /// Globals take blocks `1..=G` in ascending symbol order.
    pub fn new(p: &Program) -> Genv {
        Genv {
            blocks: p
                .globals
                .keys()
                .enumerate()
                .map(|(i, s)| (s.clone(), i as u32 + 1))
                .collect(),
        }
    }

    pub fn block_of(&self, sym: &str) -> Option<u32> {
        self.blocks.get(sym).copied()
    }
}

/// Global memory for a run: one block per global, bytes drawn from `seed`.
pub fn initial_memory(p: &Program, seed: u64) -> Memory {
    let mut mem = Memory::new();
    let mut h = SplitMix(seed ^ 0x6a09_e667_f3bc_c908);
    for size in p.globals.values() {
        let bytes = (0..*size).map(|_| MemByte::Byte(h.next() as u8)).collect();
        mem.alloc(bytes);
    }
    mem
}

struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// Evaluates an operation. Total: ill-kinded or undefined operands give `Undef`.
pub fn eval_op(op: &Operation, args: &[Value]) -> Value {
    use Operation::*;
    use Value::*;
    if args.len() != op.arity() {
        return Undef;
    }
    match (op, args) {
        (Move, [v]) => *v,
        (Const32(i), []) => I32(*i),
        (Const64(i), []) => I64(*i),
        (Add32, [I32(a), I32(b)]) => I32(a.wrapping_add(*b)),
        (Sub32, [I32(a), I32(b)]) => I32(a.wrapping_sub(*b)),
        (Mul32, [I32(a), I32(b)]) => I32(a.wrapping_mul(*b)),
        (Add64, [I64(a), I64(b)]) => I64(a.wrapping_add(*b)),
        (Add64, [Ptr { block, offset }, I64(b)]) | (Add64, [I64(b), Ptr { block, offset }]) => {
            Ptr {
                block: *block,
                offset: offset.wrapping_add(*b),
            }
        }
        (Sub64, [I64(a), I64(b)]) => I64(a.wrapping_sub(*b)),
        (Sub64, [Ptr { block, offset }, I64(b)]) => Ptr {
            block: *block,
            offset: offset.wrapping_sub(*b),
        },
        (
            Sub64,
            [Ptr {
                block: b1,
                offset: o1,
            }, Ptr {
                block: b2,
                offset: o2,
            }],
        ) if b1 == b2 => I64(o1.wrapping_sub(*o2)),
        (Mul64, [I64(a), I64(b)]) => I64(a.wrapping_mul(*b)),
        (Shl32(s), [I32(a)]) if *s < 32 => I32(a.wrapping_shl(*s)),
        (Shl64(s), [I64(a)]) if *s < 64 => I64(a.wrapping_shl(*s)),
        (Sext32To64, [I32(a)]) => I64(i64::from(*a)),
        (AddImm32(i), [I32(a)]) => I32(a.wrapping_add(*i)),
        (AddImm64(i), [I64(a)]) => I64(a.wrapping_add(*i)),
        (AddImm64(i), [Ptr { block, offset }]) => Ptr {
            block: *block,
            offset: offset.wrapping_add(*i),
        },
        (MulImm32(i), [I32(a)]) => I32(a.wrapping_mul(*i)),
        (MulImm64(i), [I64(a)]) => I64(a.wrapping_mul(*i)),
        (FAdd64, [F64(a), F64(b)]) => F64(a + b),
        (FMul64, [F64(a), F64(b)]) => F64(a * b),
        _ => Undef,
    }
}

/// Computes an address. Total: ill-kinded or undefined inputs give `Undef`.
pub fn eval_addr(genv: &Genv, mode: &AddrMode, args: &[Value]) -> Value {
    use Value::*;
    match (mode, args) {
        (AddrMode::Based { offset: d }, [Ptr { block, offset }]) => Ptr {
            block: *block,
            offset: offset.wrapping_add(*d),
        },
        (AddrMode::Indexed { scale, offset: d }, [Ptr { block, offset }, I64(i)]) => Ptr {
            block: *block,
            offset: offset
                .wrapping_add(i.wrapping_mul(i64::from(*scale)))
                .wrapping_add(*d),
        },
        (AddrMode::Global { symbol, offset }, []) => match genv.block_of(symbol) {
            Some(block) => Ptr {
                block,
                offset: *offset,
            },
            None => Undef,
        },
        _ => Undef,
    }
}

/// Register file; unwritten registers read as `Undef`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Regs(Vec<Value>);

impl Regs {
    pub fn new() -> Self {
        Regs::default()
    }

    pub fn get(&self, r: Reg) -> Value {
        self.0.get(r.0 as usize).copied().unwrap_or(Value::Undef)
    }

    pub fn set(&mut self, r: Reg, v: Value) {
        let i = r.0 as usize;
        if i >= self.0.len() {
            self.0.resize(i + 1, Value::Undef);
        }
        self.0[i] = v;
    }

    pub fn get_all(&self, rs: &[Reg]) -> Vec<Value> {
        rs.iter().map(|&r| self.get(r)).collect()
    }

    /// Registers currently holding a defined value.
    pub fn defined(&self) -> impl Iterator<Item = (Reg, Value)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_undef())
            .map(|(i, v)| (Reg(i as u32), *v))
    }
}

/// An observable event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub symbol: String,
    pub args: Vec<Value>,
    pub ret: Value,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|v| v.to_string()).collect();
        write!(
            f,
            "call {}({}) = {}",
            self.symbol,
            args.join(", "),
            self.ret
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Returned(Value),
    Trapped(Trap),
    OutOfFuel,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub trace: Vec<Event>,
    pub status: Status,
    pub steps: u64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.trace {
            writeln!(f, "{e}")?;
        }
        match &self.status {
            Status::Returned(v) => write!(f, "returned {v}"),
            Status::Trapped(t) => write!(f, "trapped: {t}"),
            Status::OutOfFuel => write!(f, "out of fuel"),
        }
    }
}

/// Deterministic stub result of an external call.
pub fn external_result(seed: u64, symbol: &str, args: &[Value]) -> Value {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(&seed.to_le_bytes());
    feed(symbol.as_bytes());
    feed(&[0xff]);
    for v in args {
        let (tag, payload): (u8, [u64; 2]) = match *v {
            Value::I32(x) => (1, [x as u32 as u64, 0]),
            Value::I64(x) => (2, [x as u64, 0]),
            Value::F32(x) => (3, [u64::from(x.to_bits()), 0]),
            Value::F64(x) => (4, [x.to_bits(), 0]),
            Value::Ptr { block, offset } => (5, [u64::from(block), offset as u64]),
            Value::Undef => (6, [0, 0]),
        };
        feed(&[tag]);
        feed(&payload[0].to_le_bytes());
        feed(&payload[1].to_le_bytes());
    }
    Value::I64(h as i64)
}

/// Effect of an instruction that does not transfer control between functions.
pub enum Local {
    Next(NodeId),
    Branch(NodeId),
    Return(Option<Reg>),
    Call,
}

/// Executes `Op`, `Load`, `Store`, `Cond` and `Nop` on a register file and
/// memory. Calls and returns are reported back to the caller.
pub fn exec_local(
    genv: &Genv,
    i: &Instruction,
    regs: &mut Regs,
    mem: &mut Memory,
) -> Result<Local, Trap> {
    match i {
        Instruction::Op {
            op,
            args,
            dest,
            succ,
        } => {
            let v = eval_op(op, &regs.get_all(args));
            regs.set(*dest, v);
            Ok(Local::Next(*succ))
        }
        Instruction::Load {
            chunk,
            mode,
            args,
            dest,
            succ,
        } => {
            let a = eval_addr(genv, mode, &regs.get_all(args));
            let v = mem.load(*chunk, a)?;
            regs.set(*dest, v);
            Ok(Local::Next(*succ))
        }
        Instruction::Store {
            chunk,
            mode,
            args,
            src,
            succ,
        } => {
            let a = eval_addr(genv, mode, &regs.get_all(args));
            mem.store(*chunk, a, regs.get(*src))?;
            Ok(Local::Next(*succ))
        }
        Instruction::Cond {
            cond,
            args,
            ifso,
            ifnot,
        } => {
            let vs = regs.get_all(args);
            let taken = match (cond.width, vs.as_slice()) {
                (Width::W32, [Value::I32(a), Value::I32(b)]) => cond.eval(a, b),
                (Width::W64, [Value::I64(a), Value::I64(b)]) => cond.eval(a, b),
                _ => return Err(Trap::BadCondition),
            };
            Ok(Local::Branch(if taken { *ifso } else { *ifnot }))
        }
        Instruction::Nop { succ } => Ok(Local::Next(*succ)),
        Instruction::Call { .. } => Ok(Local::Call),
        Instruction::Return { value } => Ok(Local::Return(*value)),
    }
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub func: String,
    pub ret_pc: NodeId,
    pub dest: Reg,
    pub regs: Regs,
    pub stack_block: u32,
}

/// Machine state: the active function's pc and registers, memory, and the
/// suspended callers.
#[derive(Clone, Debug)]
pub struct State {
    pub func: String,
    pub pc: NodeId,
    pub regs: Regs,
    pub stack_block: u32,
    pub mem: Memory,
    pub frames: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Continue(Option<Event>),
    Finished(Value),
}

/// A program being executed.
pub struct Machine<'p> {
    program: &'p Program,
    genv: Genv,
    seed: u64,
    pub state: State,
}

impl<'p> Machine<'p> {
    pub fn new(program: &'p Program, args: &[Value], seed: u64) -> Result<Machine<'p>, Trap> {
        let genv = Genv::new(program);
        let mut mem = initial_memory(program, seed);
        let f = program
            .main_function()
            .ok_or_else(|| Trap::MissingFunction(program.main.clone()))?;
        if f.params.len() != args.len() {
            return Err(Trap::CallArity {
                callee: f.name.clone(),
                expected: f.params.len(),
                found: args.len(),
            });
        }
        let mut regs = Regs::new();
        for (&r, &v) in f.params.iter().zip(args) {
            regs.set(r, v);
        }
        let stack_block = mem.alloc(vec![MemByte::Undef; f.stacksize as usize]);
        Ok(Machine {
            program,
            genv,
            seed,
            state: State {
                func: f.name.clone(),
                pc: f.entry,
                regs,
                stack_block,
                mem,
                frames: Vec::new(),
            },
        })
    }

    pub fn genv(&self) -> &Genv {
        &self.genv
    }

    pub fn function(&self) -> &'p Function {
        &self.program.functions[&self.state.func]
    }

    pub fn instruction(&self) -> Option<&'p Instruction> {
        self.function().code.get(&self.state.pc)
    }

    pub fn step(&mut self) -> Result<Step, Trap> {
        let f = self.function();
        let s = &mut self.state;
        let i = f.code.get(&s.pc).ok_or(Trap::MissingNode(s.pc))?;
        match exec_local(&self.genv, i, &mut s.regs, &mut s.mem)? {
            Local::Next(n) | Local::Branch(n) => {
                s.pc = n;
                Ok(Step::Continue(None))
            }
            Local::Return(r) => {
                let v = r.map_or(Value::Undef, |r| s.regs.get(r));
                s.mem.free(s.stack_block);
                match s.frames.pop() {
                    None => Ok(Step::Finished(v)),
                    Some(fr) => {
                        s.func = fr.func;
                        s.pc = fr.ret_pc;
                        s.regs = fr.regs;
                        s.stack_block = fr.stack_block;
                        s.regs.set(fr.dest, v);
                        Ok(Step::Continue(None))
                    }
                }
            }
            Local::Call => {
                let Instruction::Call {
                    callee,
                    args,
                    dest,
                    succ,
                } = i
                else {
                    unreachable!("exec_local reports Call only for calls")
                };
                let vals = s.regs.get_all(args);
                match self.program.functions.get(callee) {
                    Some(g) => {
                        if g.params.len() != vals.len() {
                            return Err(Trap::CallArity {
                                callee: callee.clone(),
                                expected: g.params.len(),
                                found: vals.len(),
                            });
                        }
                        if s.frames.len() >= MAX_CALL_DEPTH {
                            return Err(Trap::StackOverflow);
                        }
                        let mut regs = Regs::new();
                        for (&r, &v) in g.params.iter().zip(&vals) {
                            regs.set(r, v);
                        }
                        let block = s.mem.alloc(vec![MemByte::Undef; g.stacksize as usize]);
                        let caller_regs = std::mem::replace(&mut s.regs, regs);
                        s.frames.push(Frame {
                            func: std::mem::replace(&mut s.func, g.name.clone()),
                            ret_pc: *succ,
                            dest: *dest,
                            regs: caller_regs,
                            stack_block: std::mem::replace(&mut s.stack_block, block),
                        });
                        s.pc = g.entry;
                        Ok(Step::Continue(None))
                    }
                    None => {
                        if vals.iter().any(Value::is_undef) {
                            return Err(Trap::UndefExternalArg(callee.clone()));
                        }
                        let ret = external_result(self.seed, callee, &vals);
                        s.regs.set(*dest, ret);
                        s.pc = *succ;
                        Ok(Step::Continue(Some(Event {
                            symbol: callee.clone(),
                            args: vals,
                            ret,
                        })))
                    }
                }
            }
        }
    }
}

/// Runs `main` on `args` for at most `fuel` steps.
pub fn run(p: &Program, args: &[Value], fuel: u64, seed: u64) -> Outcome {
    let mut m = match Machine::new(p, args, seed) {
        Ok(m) => m,
        Err(t) => {
            return Outcome {
                trace: vec![],
                status: Status::Trapped(t),
                steps: 0,
            }
        }
    };
    let mut trace = Vec::new();
    for steps in 0..fuel {
        match m.step() {
            Ok(Step::Continue(ev)) => trace.extend(ev),
            Ok(Step::Finished(v)) => {
                return Outcome {
                    trace,
                    status: Status::Returned(v),
                    steps: steps + 1,
                }
            }
            Err(t) => {
                return Outcome {
                    trace,
                    status: Status::Trapped(t),
                    steps: steps + 1,
                }
            }
        }
    }
    Outcome {
        trace,
        status: Status::OutOfFuel,
        steps: fuel,
    }
}

/// `new` is an acceptable replacement for `orig`.
pub fn value_refines(orig: Value, new: Value) -> bool {
    orig.is_undef() || orig == new
}

fn event_refines(orig: &Event, new: &Event) -> bool {
    orig.symbol == new.symbol
        && orig.args.len() == new.args.len()
        && orig
            .args
            .iter()
            .zip(&new.args)
            .all(|(a, b)| value_refines(*a, *b))
        && value_refines(orig.ret, new.ret)
}

fn trace_prefix_refines(orig: &[Event], new: &[Event]) -> bool {
    orig.len() <= new.len() && orig.iter().zip(new).all(|(a, b)| event_refines(a, b))
}

/// Behavioral refinement between two runs made with the same seed.
pub fn outcome_refines(orig: &Outcome, new: &Outcome) -> bool {
    match &orig.status {
        Status::Returned(v) => match &new.status {
            Status::Returned(w) => {
                orig.trace.len() == new.trace.len()
                    && trace_prefix_refines(&orig.trace, &new.trace)
                    && value_refines(*v, *w)
            }
            _ => false,
        },
        Status::Trapped(_) => trace_prefix_refines(&orig.trace, &new.trace),
        Status::OutOfFuel => {
            let n = orig.trace.len().min(new.trace.len());
            trace_prefix_refines(&orig.trace[..n], &new.trace[..n])
        }
    }
}
