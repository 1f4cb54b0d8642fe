//! Random well-typed programs for differential testing.
//!
//! Programs are built as structured statements (straight-line code,
//! conditionals, counted loops nested at most three deep) and lowered to a
//! CFG the way a C front-end would: every array access recomputes its
//! address with sign extension, shifts and 64-bit adds, so loop unrolling
//! and CSE have something to work on.

use crate::interp::Genv;
use crate::ir::{
    AddrMode, Chunk, Comparison, Condition, Function, Instruction, NodeId, Operation, Program, Reg,
    Value, Width,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::ops::RangeInclusive;

/// Relative frequencies of statement kinds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weights {
    pub arith: u32,
    pub recompute: u32,
    pub load: u32,
    pub store: u32,
    pub call: u32,
    pub branch: u32,
    pub looped: u32,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            arith: 6,
            recompute: 4,
            load: 6,
            store: 3,
            call: 1,
            branch: 2,
            looped: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    /// Target node count of `main`.
    pub nodes: RangeInclusive<usize>,
    /// Number of variables besides parameters and loop counters.
    pub regs: RangeInclusive<usize>,
    pub max_loop_depth: usize,
    /// Loop trip counts are at most this bound.
    pub max_trip: i32,
    pub globals: Vec<(String, u64)>,
    /// Probability of generating a helper function called from `main`.
    pub helper: f64,
    pub weights: Weights,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            nodes: 20..=120,
            regs: 4..=10,
            max_loop_depth: 3,
            max_trip: 6,
            globals: vec![("G0".into(), 512), ("G1".into(), 512), ("G2".into(), 64)],
            helper: 0.3,
            weights: Weights::default(),
        }
    }
}

/// How to draw an argument of `main`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Param {
    /// `I32` in `0..=max`.
    Count {
        max: i32,
    },
    Int,
    Long,
    Float,
    /// Pointer to the start of a global.
    Global(String),
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub program: Program,
    pub params: Vec<Param>,
}

impl Generated {
    pub fn inputs(&self, rng: &mut impl Rng) -> Vec<Value> {
        let genv = Genv::new(&self.program);
        self.params
            .iter()
            .map(|p| match p {
                Param::Count { max } => Value::I32(rng.gen_range(0..=*max)),
                Param::Int => Value::I32(small_or_any(rng) as i32),
                Param::Long => Value::I64(small_or_any(rng)),
                Param::Float => Value::F64(rng.gen_range(-4.0..4.0)),
                Param::Global(g) => Value::Ptr {
                    block: genv.block_of(g).expect("generated global"),
                    offset: 0,
                },
            })
            .collect()
    }
}

fn small_or_any(rng: &mut impl Rng) -> i64 {
    if rng.gen_bool(0.8) {
        rng.gen_range(-16..=16)
    } else {
        rng.gen()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Long,
    Float,
}

#[derive(Clone, Debug)]
enum Stmt {
    Simple(Instruction),
    If(Condition, [Reg; 2], Vec<Stmt>, Vec<Stmt>),
    Loop {
        counter: Reg,
        bound: Reg,
        body: Vec<Stmt>,
    },
    Return(Reg),
}

struct FnGen<'a> {
    rng: &'a mut ChaCha8Rng,
    cfg: &'a GenConfig,
    vars: Vec<(Reg, Ty)>,
    ptrs: Vec<(Reg, u64)>,
    counters: Vec<Reg>,
    next_reg: u32,
    computed: Vec<(Operation, Vec<Reg>, Ty)>,
    helper: Option<String>,
    budget: isize,
}

const SUCC: NodeId = NodeId(0);

fn op(op: Operation, args: Vec<Reg>, dest: Reg) -> Stmt {
    Stmt::Simple(Instruction::Op {
        op,
        args,
        dest,
        succ: SUCC,
    })
}

impl FnGen<'_> {
    fn fresh(&mut self) -> Reg {
        self.next_reg += 1;
        Reg(self.next_reg)
    }

    fn var(&mut self, ty: Ty) -> Reg {
        let cands: Vec<Reg> = self
            .vars
            .iter()
            .filter(|v| v.1 == ty)
            .map(|v| v.0)
            .collect();
        *cands.choose(self.rng).expect("every type has a variable")
    }

    fn int_operand(&mut self) -> Reg {
        if !self.counters.is_empty() && self.rng.gen_bool(0.4) {
            *self.counters.choose(self.rng).expect("nonempty")
        } else {
            self.var(Ty::Int)
        }
    }

    fn arith(&mut self, out: &mut Vec<Stmt>) {
        let ty = [Ty::Int, Ty::Int, Ty::Long, Ty::Long, Ty::Float][self.rng.gen_range(0..5)];
        let (o, args) = match ty {
            Ty::Int => {
                let (a, b) = (self.int_operand(), self.int_operand());
                match self.rng.gen_range(0..8) {
                    0 => (Operation::Add32, vec![a, b]),
                    1 => (Operation::Sub32, vec![a, b]),
                    2 => (Operation::Mul32, vec![a, b]),
                    3 => (Operation::AddImm32(self.rng.gen_range(-8..=8)), vec![a]),
                    4 => (Operation::MulImm32(self.rng.gen_range(-3..=5)), vec![a]),
                    5 => (Operation::Shl32(self.rng.gen_range(0..32)), vec![a]),
                    6 => (Operation::Const32(self.rng.gen_range(-100..=100)), vec![]),
                    _ => (Operation::Move, vec![a]),
                }
            }
            Ty::Long => {
                let (a, b) = (self.var(Ty::Long), self.var(Ty::Long));
                match self.rng.gen_range(0..8) {
                    0 => (Operation::Add64, vec![a, b]),
                    1 => (Operation::Sub64, vec![a, b]),
                    2 => (Operation::Mul64, vec![a, b]),
                    3 => (Operation::AddImm64(self.rng.gen_range(-8..=8)), vec![a]),
                    4 => (Operation::Shl64(self.rng.gen_range(0..64)), vec![a]),
                    5 => {
                        let i = self.int_operand();
                        (Operation::Sext32To64, vec![i])
                    }
                    6 => (Operation::Const64(self.rng.gen_range(-1000..=1000)), vec![]),
                    _ => (Operation::MulImm64(self.rng.gen_range(-3..=5)), vec![a]),
                }
            }
            Ty::Float => {
                let (a, b) = (self.var(Ty::Float), self.var(Ty::Float));
                match self.rng.gen_range(0..3) {
                    0 => (Operation::FAdd64, vec![a, b]),
                    1 => (Operation::FMul64, vec![a, b]),
                    _ => (Operation::Move, vec![a]),
                }
            }
        };
        let dest = self.var(ty);
        self.computed.push((o.clone(), args.clone(), ty));
        out.push(op(o, args, dest));
        self.budget -= 1;
    }

    fn recompute(&mut self, out: &mut Vec<Stmt>) {
        let Some((o, args, ty)) = self.computed.choose(self.rng).cloned() else {
            return self.arith(out);
        };
        // Only reuse operands that are still in scope.
        if args
            .iter()
            .any(|a| self.vars.iter().all(|v| v.0 != *a) && !self.counters.contains(a))
        {
            return self.arith(out);
        }
        let dest = self.var(ty);
        out.push(op(o, args, dest));
        self.budget -= 1;
    }

    /// Emits address arithmetic and returns the addressing mode.
    fn address(&mut self, out: &mut Vec<Stmt>, size: i64) -> (AddrMode, Vec<Reg>) {
        let off = |rng: &mut ChaCha8Rng| size * rng.gen_range(0..=2);
        let choice = if self.counters.is_empty() {
            self.rng.gen_range(0..2)
        } else {
            self.rng.gen_range(0..5)
        };
        match choice {
            0 => {
                let g = self.cfg.globals.choose(self.rng).expect("globals");
                let slots = (g.1 as i64 / size).max(1);
                (
                    AddrMode::Global {
                        symbol: g.0.clone(),
                        offset: size * self.rng.gen_range(0..slots),
                    },
                    vec![],
                )
            }
            1 => {
                let &(p, _) = self.ptrs.choose(self.rng).expect("pointer params");
                (
                    AddrMode::Based {
                        offset: off(self.rng),
                    },
                    vec![p],
                )
            }
            2 => {
                let &(p, _) = self.ptrs.choose(self.rng).expect("pointer params");
                let c = *self.counters.choose(self.rng).expect("counters");
                let t = self.fresh();
                out.push(op(Operation::Sext32To64, vec![c], t));
                self.budget -= 1;
                (
                    AddrMode::Indexed {
                        scale: size as u8,
                        offset: off(self.rng),
                    },
                    vec![p, t],
                )
            }
            _ => {
                // Row-major a[i][j] with rows of 32 bytes.
                let &(p, _) = self.ptrs.choose(self.rng).expect("pointer params");
                let i = *self.counters.choose(self.rng).expect("counters");
                let j = *self.counters.choose(self.rng).expect("counters");
                let (t1, t2, t3, t4) = (self.fresh(), self.fresh(), self.fresh(), self.fresh());
                out.push(op(Operation::Sext32To64, vec![i], t1));
                out.push(op(Operation::Shl64(5), vec![t1], t2));
                out.push(op(Operation::Add64, vec![p, t2], t3));
                out.push(op(Operation::Sext32To64, vec![j], t4));
                self.budget -= 4;
                (
                    AddrMode::Indexed {
                        scale: size as u8,
                        offset: off(self.rng),
                    },
                    vec![t3, t4],
                )
            }
        }
    }

    fn chunk_for(&mut self, ty: Ty) -> Chunk {
        match ty {
            Ty::Int => {
                [Chunk::Int32, Chunk::Int32, Chunk::Int16, Chunk::Int8][self.rng.gen_range(0..4)]
            }
            Ty::Long => Chunk::Int64,
            Ty::Float => Chunk::Float64,
        }
    }

    fn load(&mut self, out: &mut Vec<Stmt>) {
        let ty = [Ty::Int, Ty::Long, Ty::Float][self.rng.gen_range(0..3)];
        let chunk = self.chunk_for(ty);
        let (mode, args) = self.address(out, chunk.size());
        let dest = self.var(ty);
        out.push(Stmt::Simple(Instruction::Load {
            chunk,
            mode,
            args,
            dest,
            succ: SUCC,
        }));
        self.budget -= 1;
    }

    fn store(&mut self, out: &mut Vec<Stmt>) {
        let ty = [Ty::Int, Ty::Long, Ty::Float][self.rng.gen_range(0..3)];
        let chunk = self.chunk_for(ty);
        let (mode, args) = self.address(out, chunk.size());
        let src = if ty == Ty::Long && self.rng.gen_bool(0.1) {
            self.ptrs.choose(self.rng).expect("pointer params").0
        } else {
            self.var(ty)
        };
        out.push(Stmt::Simple(Instruction::Store {
            chunk,
            mode,
            args,
            src,
            succ: SUCC,
        }));
        self.budget -= 1;
    }

    fn call(&mut self, out: &mut Vec<Stmt>) {
        let dest = self.var(Ty::Long);
        let (callee, args) = match self.helper.clone() {
            Some(h) if self.rng.gen_bool(0.5) => {
                let args = vec![self.var(Ty::Long), self.var(Ty::Long)];
                (h, args)
            }
            _ => {
                let n = self.rng.gen_range(0..=2);
                let args = (0..n)
                    .map(|_| {
                        if self.rng.gen_bool(0.5) {
                            self.var(Ty::Long)
                        } else {
                            self.var(Ty::Int)
                        }
                    })
                    .collect();
                (format!("ext{}", self.rng.gen_range(0..3)), args)
            }
        };
        out.push(Stmt::Simple(Instruction::Call {
            callee,
            args,
            dest,
            succ: SUCC,
        }));
        self.budget -= 1;
    }

    fn cond(&mut self) -> (Condition, [Reg; 2]) {
        let cmp = [
            Comparison::Eq,
            Comparison::Ne,
            Comparison::Lt,
            Comparison::Le,
            Comparison::Gt,
            Comparison::Ge,
        ][self.rng.gen_range(0..6)];
        if self.rng.gen_bool(0.7) {
            (
                Condition::new(cmp, Width::W32),
                [self.int_operand(), self.int_operand()],
            )
        } else {
            (
                Condition::new(cmp, Width::W64),
                [self.var(Ty::Long), self.var(Ty::Long)],
            )
        }
    }

    fn block(&mut self, depth: usize, len: usize) -> Vec<Stmt> {
        let mut out = Vec::new();
        let w = self.cfg.weights.clone();
        let nested_ok = depth < self.cfg.max_loop_depth;
        for _ in 0..len {
            if self.budget <= 0 {
                break;
            }
            let table = [
                w.arith,
                w.recompute,
                w.load,
                w.store,
                w.call,
                if depth < 3 { w.branch } else { 0 },
                if nested_ok { w.looped } else { 0 },
            ];
            let total: u32 = table.iter().sum();
            let mut pick = self.rng.gen_range(0..total.max(1));
            let mut kind = 0;
            while kind < table.len() - 1 && pick >= table[kind] {
                pick -= table[kind];
                kind += 1;
            }
            match kind {
                0 => self.arith(&mut out),
                1 => self.recompute(&mut out),
                2 => self.load(&mut out),
                3 => self.store(&mut out),
                4 => self.call(&mut out),
                5 => {
                    let (c, args) = self.cond();
                    self.budget -= 1;
                    let n1 = self.rng.gen_range(1..=3);
                    let n2 = self.rng.gen_range(0..=2);
                    let mut then = self.block(depth + 1, n1);
                    let other = self.block(depth + 1, n2);
                    if self.rng.gen_bool(0.05) {
                        let r = self.var(Ty::Long);
                        then.push(Stmt::Return(r));
                    }
                    out.push(Stmt::If(c, args, then, other));
                }
                _ => {
                    let counter = self.fresh();
                    let bound = self.fresh();
                    out.push(op(Operation::Const32(0), vec![], counter));
                    let b = if self.rng.gen_bool(0.5) {
                        Operation::Const32(self.rng.gen_range(0..=self.cfg.max_trip))
                    } else {
                        Operation::Move
                    };
                    let bargs = if b == Operation::Move {
                        vec![self.count_param()]
                    } else {
                        vec![]
                    };
                    out.push(op(b, bargs, bound));
                    self.budget -= 4;
                    self.counters.push(counter);
                    let n = self.rng.gen_range(1..=4);
                    let body = self.block(depth + 1, n);
                    self.counters.pop();
                    out.push(Stmt::Loop {
                        counter,
                        bound,
                        body,
                    });
                }
            }
        }
        out
    }

    fn count_param(&self) -> Reg {
        Reg(1)
    }
}

struct Lowering {
    code: BTreeMap<NodeId, Instruction>,
    next: u32,
}

impl Lowering {
    fn alloc(&mut self) -> NodeId {
        self.next += 1;
        NodeId(self.next)
    }

    fn put(&mut self, i: &Instruction, succ: NodeId) -> NodeId {
        let n = self.alloc();
        self.code.insert(n, i.map_successors(|_| succ));
        n
    }

    fn block(&mut self, stmts: &[Stmt], mut next: NodeId) -> NodeId {
        for s in stmts.iter().rev() {
            next = match s {
                Stmt::Simple(i) => self.put(i, next),
                Stmt::Return(r) => {
                    let n = self.alloc();
                    self.code.insert(n, Instruction::Return { value: Some(*r) });
                    n
                }
                Stmt::If(c, args, then, other) => {
                    let t = self.block(then, next);
                    let e = self.block(other, next);
                    let n = self.alloc();
                    self.code.insert(
                        n,
                        Instruction::Cond {
                            cond: *c,
                            args: args.to_vec(),
                            ifso: t,
                            ifnot: e,
                        },
                    );
                    n
                }
                Stmt::Loop {
                    counter,
                    bound,
                    body,
                } => {
                    let header = self.alloc();
                    let incr = self.put(
                        &Instruction::Op {
                            op: Operation::AddImm32(1),
                            args: vec![*counter],
                            dest: *counter,
                            succ: SUCC,
                        },
                        header,
                    );
                    let b = self.block(body, incr);
                    self.code.insert(
                        header,
                        Instruction::Cond {
                            cond: Condition::new(Comparison::Lt, Width::W32),
                            args: vec![*counter, *bound],
                            ifso: b,
                            ifnot: next,
                        },
                    );
                    header
                }
            };
        }
        next
    }
}

fn build_function(
    name: &str,
    params: Vec<Reg>,
    prologue: Vec<Stmt>,
    body: Vec<Stmt>,
    ret: Reg,
) -> Function {
    let mut l = Lowering {
        code: BTreeMap::new(),
        next: 0,
    };
    let exit = l.alloc();
    l.code
        .insert(exit, Instruction::Return { value: Some(ret) });
    let after = l.block(&body, exit);
    let entry = l.block(&prologue, after);
    Function {
        name: name.into(),
        params,
        entry,
        code: l.code,
        stacksize: 0,
    }
}

fn init_var(rng: &mut ChaCha8Rng, cfg: &GenConfig, r: Reg, ty: Ty) -> Stmt {
    match ty {
        Ty::Int => op(Operation::Const32(rng.gen_range(-50..=50)), vec![], r),
        Ty::Long => op(Operation::Const64(rng.gen_range(-500..=500)), vec![], r),
        Ty::Float => {
            let g = cfg.globals.choose(rng).expect("globals");
            Stmt::Simple(Instruction::Load {
                chunk: Chunk::Float64,
                mode: AddrMode::Global {
                    symbol: g.0.clone(),
                    offset: 8 * rng.gen_range(0..(g.1 as i64 / 8).max(1)),
                },
                args: vec![],
                dest: r,
                succ: SUCC,
            })
        }
    }
}

fn helper(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Function {
    // helper(a, b): a few long computations, a counted loop and global memory.
    let mut g = FnGen {
        rng,
        cfg,
        vars: vec![(Reg(1), Ty::Long), (Reg(2), Ty::Long)],
        ptrs: vec![],
        counters: vec![],
        next_reg: 2,
        computed: vec![],
        helper: None,
        budget: 12,
    };
    let i = g.fresh();
    let f = g.fresh();
    let k = g.fresh();
    g.vars.push((i, Ty::Int));
    g.vars.push((f, Ty::Float));
    let prologue = vec![
        init_var(g.rng, cfg, i, Ty::Int),
        init_var(g.rng, cfg, f, Ty::Float),
        op(Operation::Const32(g.rng.gen_range(0..=3)), vec![], k),
    ];
    let mut body = Vec::new();
    for _ in 0..3 {
        g.arith(&mut body);
    }
    let c = g.fresh();
    g.counters.push(c);
    let mut inner = Vec::new();
    for _ in 0..3 {
        match g.rng.gen_range(0..3) {
            0 => g.arith(&mut inner),
            1 => g.recompute(&mut inner),
            _ => {
                let (mode, args) = (
                    AddrMode::Global {
                        symbol: cfg.globals[0].0.clone(),
                        offset: 8 * g.rng.gen_range(0..4),
                    },
                    vec![],
                );
                let dest = g.var(Ty::Long);
                inner.push(Stmt::Simple(Instruction::Load {
                    chunk: Chunk::Int64,
                    mode,
                    args,
                    dest,
                    succ: SUCC,
                }));
            }
        }
    }
    g.counters.pop();
    body.push(op(Operation::Const32(0), vec![], c));
    body.push(Stmt::Loop {
        counter: c,
        bound: k,
        body: inner,
    });
    let ret = g.var(Ty::Long);
    build_function("helper", vec![Reg(1), Reg(2)], prologue, body, ret)
}

/// Generates program number `index` of the stream determined by `cfg.seed`.
pub fn generate(cfg: &GenConfig, index: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut functions = BTreeMap::new();
    let with_helper = rng.gen_bool(cfg.helper);
    if with_helper {
        let h = helper(&mut rng, cfg);
        functions.insert(h.name.clone(), h);
    }
    // main(n, a, b, x, P, Q)
    let params: Vec<Reg> = (1..=6).map(Reg).collect();
    let (g0, g1) = (
        cfg.globals[0].clone(),
        cfg.globals[1 % cfg.globals.len()].clone(),
    );
    let target = rng.gen_range(cfg.nodes.clone()) as isize;
    let nvars = rng.gen_range(cfg.regs.clone());
    let mut g = FnGen {
        rng: &mut rng,
        cfg,
        // r1 only bounds loops, so trip counts stay small.
        vars: vec![(Reg(2), Ty::Int), (Reg(3), Ty::Long), (Reg(4), Ty::Float)],
        ptrs: vec![(Reg(5), g0.1), (Reg(6), g1.1)],
        counters: vec![],
        next_reg: 6,
        computed: vec![],
        helper: with_helper.then(|| "helper".to_string()),
        budget: target,
    };
    let mut prologue = Vec::new();
    for k in 0..nvars {
        let ty = [Ty::Int, Ty::Long, Ty::Float][k % 3];
        let r = g.fresh();
        prologue.push(init_var(g.rng, cfg, r, ty));
        g.vars.push((r, ty));
    }
    let mut body = Vec::new();
    while g.budget > 0 {
        let n = g.rng.gen_range(1..=6);
        body.extend(g.block(0, n));
    }
    let ret_ty = if g.rng.gen_bool(0.5) {
        Ty::Long
    } else {
        Ty::Int
    };
    let ret = g.var(ret_ty);
    let main = build_function("main", params, prologue, body, ret);
    functions.insert("main".into(), main);
    let program = Program {
        functions,
        globals: cfg.globals.iter().cloned().collect(),
        main: "main".into(),
    };
    Generated {
        program,
        params: vec![
            Param::Count { max: cfg.max_trip },
            Param::Int,
            Param::Long,
            Param::Float,
            Param::Global(g0.0),
            Param::Global(g1.0),
        ],
    }
}
