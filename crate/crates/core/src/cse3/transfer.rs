use super::{AbsState, CallMode, Equation, Opts, Rhs, Tables};
use crate::hset::HSet;
use crate::ir::{AddrMode, Chunk, Instruction, Operation, Reg};
use crate::typing::{chunk_matches, TypeEnv};

/// Source of the smallest-id move equation `r = r'` in `ids`, or `r`.
pub fn forward_move(t: &mut Tables, ids: &HSet, r: Reg) -> Reg {
    let moves = t.reg_moves(r);
    let avail = t.intern.inter(ids, &moves);
    match avail.min().and_then(|id| t.equation(id)) {
        Some(Equation {
            rhs: Rhs::Op(Operation::Move, args),
            ..
        }) if args.len() == 1 => args[0],
        _ => r,
    }
}

fn forward_all(t: &mut Tables, ids: &HSet, rs: &[Reg]) -> Vec<Reg> {
    rs.iter().map(|&r| forward_move(t, ids, r)).collect()
}

/// Removes every equation mentioning `r`.
pub fn kill_reg(t: &mut Tables, ids: &HSet, r: Reg) -> HSet {
    let kill = t.reg_ids(r);
    t.intern.diff(ids, &kill)
}

/// Left-hand register of the smallest-id equation `r' = rhs` in `ids`.
pub fn find_computed(t: &mut Tables, ids: &HSet, rhs: &Rhs) -> Option<Reg> {
    let cands = t.rhs_ids(rhs);
    let hit = t.intern.inter(ids, &cands);
    hit.min().and_then(|id| t.equation(id)).map(|e| e.lhs)
}

/// Conservative overlap test between two memory accesses.
pub fn may_overlap(a: (&AddrMode, &[Reg], Chunk), b: (&AddrMode, &[Reg], Chunk)) -> bool {
    let disjoint = |o1: i64, c1: Chunk, o2: i64, c2: Chunk| {
        o1.saturating_add(c1.size()) <= o2 || o2.saturating_add(c2.size()) <= o1
    };
    match (a.0, b.0) {
        (
            AddrMode::Global {
                symbol: s1,
                offset: o1,
            },
            AddrMode::Global {
                symbol: s2,
                offset: o2,
            },
        ) => s1 == s2 && !disjoint(*o1, a.2, *o2, b.2),
        (AddrMode::Based { offset: o1 }, AddrMode::Based { offset: o2 }) if a.1 == b.1 => {
            !disjoint(*o1, a.2, *o2, b.2)
        }
        _ => true,
    }
}

fn add_eq(t: &mut Tables, ids: &HSet, e: &Equation) -> HSet {
    match t.intern_equation(e) {
        Some(id) => t.intern.add(ids, id),
        None => ids.clone(),
    }
}

fn assign(t: &mut Tables, ids: &HSet, rhs: Rhs, orig_args: &[Reg], dest: Reg, opts: &Opts) -> HSet {
    if orig_args.contains(&dest) || rhs.args().contains(&dest) {
        return kill_reg(t, ids, dest);
    }
    let eq = Equation { lhs: dest, rhs };
    if opts.glb_moves && !eq.rhs.is_move() {
        // dest already holds the value: the assignment changes nothing.
        if let Some(id) = t.intern_equation(&eq) {
            if ids.contains(id) {
                return ids.clone();
            }
        }
    }
    let computed = if eq.rhs.is_move() {
        None
    } else {
        find_computed(t, ids, &eq.rhs)
    };
    let mut out = kill_reg(t, ids, dest);
    out = add_eq(t, &out, &eq);
    if let Some(r) = computed.filter(|&r| opts.glb_moves && r != dest) {
        out = add_eq(
            t,
            &out,
            &Equation {
                lhs: dest,
                rhs: Rhs::Op(Operation::Move, vec![r]),
            },
        );
    }
    out
}

/// Abstract effect of executing `i` from a state described by `s`.
pub fn transfer(
    t: &mut Tables,
    s: &AbsState,
    i: &Instruction,
    env: &TypeEnv,
    opts: &Opts,
) -> AbsState {
    let AbsState::Known(ids) = s else {
        return AbsState::Bot;
    };
    let out = match i {
        Instruction::Op { op, args, dest, .. } => {
            let fargs = forward_all(t, ids, args);
            assign(t, ids, Rhs::Op(op.clone(), fargs), args, *dest, opts)
        }
        Instruction::Load {
            chunk,
            mode,
            args,
            dest,
            ..
        } => {
            let fargs = forward_all(t, ids, args);
            assign(
                t,
                ids,
                Rhs::Load(*chunk, mode.clone(), fargs),
                args,
                *dest,
                opts,
            )
        }
        Instruction::Store {
            chunk,
            mode,
            args,
            src,
            ..
        } => {
            let fargs = forward_all(t, ids, args);
            let mem = t.mem_ids();
            let loads = t.intern.inter(ids, &mem);
            let mut out = ids.clone();
            for id in loads.contents() {
                let clobbered = match t.equation(id) {
                    Some(Equation {
                        rhs: Rhs::Load(c, m, a),
                        ..
                    }) => may_overlap((mode, &fargs, *chunk), (m, a, *c)),
                    _ => true,
                };
                if clobbered {
                    out = t.intern.remove(&out, id);
                }
            }
            let wide = matches!(
                chunk,
                Chunk::Int32 | Chunk::Int64 | Chunk::Float32 | Chunk::Float64
            );
            if wide && chunk_matches(*chunk, env.get(*src)) && !fargs.contains(src) {
                out = add_eq(
                    t,
                    &out,
                    &Equation {
                        lhs: *src,
                        rhs: Rhs::Load(*chunk, mode.clone(), fargs),
                    },
                );
            }
            out
        }
        Instruction::Call { dest, .. } => match opts.across_calls {
            CallMode::ForgetAll => HSet::empty(),
            CallMode::ForgetMemOnly => {
                let mem = t.mem_ids();
                let kept = t.intern.diff(ids, &mem);
                kill_reg(t, &kept, *dest)
            }
        },
        Instruction::Cond { .. } | Instruction::Nop { .. } | Instruction::Return { .. } => {
            ids.clone()
        }
    };
    AbsState::Known(out)
}
