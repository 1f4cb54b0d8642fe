use super::{find_computed, forward_move, AbsState, Checked, Opts, Rhs};
use crate::ir::{Function, Instruction, Operation};

/// Operations never replaced by a move.
pub fn is_trivial(op: &Operation, opts: &Opts) -> bool {
    match op {
        Operation::Move => true,
        Operation::Const32(_) | Operation::Const64(_) => opts.trivial_consts,
        _ => false,
    }
}

/// Replaces operations and loads whose value is already available in a
/// register by moves, and forwards the operands of the rest. Node ids and
/// successors are unchanged.
pub fn rewrite(f: &Function, checked: &mut Checked, opts: &Opts) -> Function {
    let t = &mut checked.tables;
    let mut out = f.clone();
    for (&n, i) in &f.code {
        let Some(AbsState::Known(ids)) = checked.invariants.get(n) else {
            continue;
        };
        let ids = ids.clone();
        let mut fwd =
            |rs: &[_]| -> Vec<_> { rs.iter().map(|&r| forward_move(t, &ids, r)).collect() };
        let new = match i {
            Instruction::Op {
                op,
                args,
                dest,
                succ,
            } => {
                let fargs = fwd(args);
                let hit = if is_trivial(op, opts) {
                    None
                } else {
                    find_computed(t, &ids, &Rhs::Op(op.clone(), fargs.clone()))
                };
                match hit {
                    Some(r) => Instruction::Op {
                        op: Operation::Move,
                        args: vec![r],
                        dest: *dest,
                        succ: *succ,
                    },
                    None => Instruction::Op {
                        op: op.clone(),
                        args: fargs,
                        dest: *dest,
                        succ: *succ,
                    },
                }
            }
            Instruction::Load {
                chunk,
                mode,
                args,
                dest,
                succ,
            } => {
                let fargs = fwd(args);
                match find_computed(t, &ids, &Rhs::Load(*chunk, mode.clone(), fargs.clone())) {
                    Some(r) => Instruction::Op {
                        op: Operation::Move,
                        args: vec![r],
                        dest: *dest,
                        succ: *succ,
                    },
                    None => Instruction::Load {
                        chunk: *chunk,
                        mode: mode.clone(),
                        args: fargs,
                        dest: *dest,
                        succ: *succ,
                    },
                }
            }
            Instruction::Store {
                chunk,
                mode,
                args,
                src,
                succ,
            } => Instruction::Store {
                chunk: *chunk,
                mode: mode.clone(),
                args: fwd(args),
                src: *src,
                succ: *succ,
            },
            other => other.clone(),
        };
        out.code.insert(n, new);
    }
    out
}
