use super::{find_loops, NaturalLoop, RevMap};
use crate::ir::{Function, Instruction, NodeId};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Skipped {
    NotALoop,
    NotInnermost,
    MultipleBackEdges,
    TooLarge { size: usize, max: usize },
    NoCondition,
}

impl fmt::Display for Skipped {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Skipped::NotALoop => f.write_str("not a natural loop of the function"),
            Skipped::NotInnermost => f.write_str("loop is not innermost"),
            Skipped::MultipleBackEdges => f.write_str("loop has several back edges"),
            Skipped::TooLarge { size, max } => write!(f, "loop body has {size} nodes, limit {max}"),
            Skipped::NoCondition => f.write_str("loop header does not lead to a condition"),
        }
    }
}

fn check_loop(f: &Function, l: &NaturalLoop) -> Result<(), Skipped> {
    let current = find_loops(f);
    let Some(actual) = current.iter().find(|c| c.header == l.header) else {
        return Err(Skipped::NotALoop);
    };
    if actual.body != l.body {
        return Err(Skipped::NotALoop);
    }
    if !actual.innermost {
        return Err(Skipped::NotInnermost);
    }
    if actual.back_edges.len() != 1 {
        return Err(Skipped::MultipleBackEdges);
    }
    Ok(())
}

/// Copies `nodes` to fresh ids. Inside the copy, edges to copied nodes other
/// than `header` follow the copy; edges from outside the loop body into
/// `header` are redirected to the copied header.
fn duplicate(f: &Function, l: &NaturalLoop, nodes: &[NodeId]) -> (Function, RevMap) {
    let base = f.max_node();
    let fresh: BTreeMap<NodeId, NodeId> = nodes
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, NodeId(base + 1 + i as u32)))
        .collect();
    let copy_header = fresh[&l.header];
    let mut out = f.clone();
    let mut map = RevMap::identity(f);
    for (&n, i) in &f.code {
        if !l.body.contains(&n) {
            out.code.insert(
                n,
                i.map_successors(|s| if s == l.header { copy_header } else { s }),
            );
        }
    }
    for (&n, &c) in &fresh {
        let i = f.code[&n].map_successors(|s| match fresh.get(&s) {
            Some(&cs) if s != l.header => cs,
            _ => s,
        });
        out.code.insert(c, i);
        map.0.insert(c, n);
    }
    if f.entry == l.header {
        out.entry = copy_header;
    }
    (out, map)
}

/// Peels the first iteration of an innermost loop: `while (c) b` becomes
/// `if (c) { b; while (c) b }`.
pub fn unroll_first(
    f: &Function,
    l: &NaturalLoop,
    max_body: usize,
) -> Result<(Function, RevMap), Skipped> {
    check_loop(f, l)?;
    if l.body.len() > max_body {
        return Err(Skipped::TooLarge {
            size: l.body.len(),
            max: max_body,
        });
    }
    let nodes: Vec<NodeId> = l.body.iter().copied().collect();
    Ok(duplicate(f, l, &nodes))
}

/// Copies the straight-line path from the header to its first condition in
/// front of the loop, giving `if (c) do b while (c)`.
pub fn rotate(f: &Function, l: &NaturalLoop) -> Result<(Function, RevMap), Skipped> {
    check_loop(f, l)?;
    let mut prefix = vec![l.header];
    let mut n = l.header;
    loop {
        match &f.code[&n] {
            Instruction::Cond { .. } => break,
            Instruction::Op { succ, .. }
            | Instruction::Load { succ, .. }
            | Instruction::Nop { succ } => {
                if !l.body.contains(succ) || prefix.contains(succ) {
                    return Err(Skipped::NoCondition);
                }
                prefix.push(*succ);
                n = *succ;
            }
            _ => return Err(Skipped::NoCondition),
        }
    }
    Ok(duplicate(f, l, &prefix))
}

fn apply_all(
    f: &Function,
    mut pass: impl FnMut(&Function, &NaturalLoop) -> Result<(Function, RevMap), Skipped>,
) -> (Function, RevMap, usize) {
    let headers: Vec<NodeId> = find_loops(f)
        .into_iter()
        .filter(|l| l.innermost)
        .map(|l| l.header)
        .collect();
    let mut cur = f.clone();
    let mut map = RevMap::identity(f);
    let mut done = 0;
    for h in headers {
        let Some(l) = find_loops(&cur).into_iter().find(|l| l.header == h) else {
            continue;
        };
        if let Ok((next, m)) = pass(&cur, &l) {
            map = m.then(&map);
            cur = next;
            done += 1;
        }
    }
    (cur, map, done)
}

/// Unrolls every eligible innermost loop. Returns the new function, the
/// composed mapping to `f`, and how many loops were unrolled.
pub fn unroll_all(f: &Function, max_body: usize) -> (Function, RevMap, usize) {
    apply_all(f, |g, l| unroll_first(g, l, max_body))
}

pub fn rotate_all(f: &Function) -> (Function, RevMap, usize) {
    apply_all(f, rotate)
}
