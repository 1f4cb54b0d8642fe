use crate::ir::{Function, NodeId};
use std::collections::{BTreeMap, BTreeSet};

/// Immediate dominators of the nodes reachable from the entry.
#[derive(Clone, Debug)]
pub struct Dominators {
    idom: BTreeMap<NodeId, NodeId>,
    entry: NodeId,
}

impl Dominators {
    pub fn compute(f: &Function) -> Dominators {
        let rpo = f.reverse_postorder();
        let order: BTreeMap<NodeId, usize> = rpo.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let preds = f.predecessors();
        let mut idom: Vec<Option<usize>> = vec![None; rpo.len()];
        if rpo.is_empty() {
            return Dominators {
                idom: BTreeMap::new(),
                entry: f.entry,
            };
        }
        idom[0] = Some(0);
        let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| {
            while a != b {
                while a > b {
                    a = idom[a].expect("processed");
                }
                while b > a {
                    b = idom[b].expect("processed");
                }
            }
            a
        };
        let mut changed = true;
        while changed {
            changed = false;
            for (i, n) in rpo.iter().enumerate().skip(1) {
                let mut new = None;
                for p in &preds[n] {
                    let Some(&pi) = order.get(p) else { continue };
                    if idom[pi].is_none() {
                        continue;
                    }
                    new = Some(match new {
                        None => pi,
                        Some(cur) => intersect(&idom, pi, cur),
                    });
                }
                if new.is_some() && idom[i] != new {
                    idom[i] = new;
                    changed = true;
                }
            }
        }
        Dominators {
            idom: rpo
                .iter()
                .enumerate()
                .map(|(i, &n)| (n, rpo[idom[i].expect("reachable")]))
                .collect(),
            entry: f.entry,
        }
    }

    pub fn is_reachable(&self, n: NodeId) -> bool {
        self.idom.contains_key(&n)
    }

    pub fn idom(&self, n: NodeId) -> Option<NodeId> {
        (n != self.entry)
            .then(|| self.idom.get(&n).copied())
            .flatten()
    }

    /// Whether `a` dominates `b` (reflexive).
    pub fn dominates(&self, a: NodeId, b: NodeId) -> bool {
        if !self.is_reachable(a) || !self.is_reachable(b) {
            return false;
        }
        let mut n = b;
        loop {
            if n == a {
                return true;
            }
            match self.idom(n) {
                Some(d) => n = d,
                None => return false,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaturalLoop {
    pub header: NodeId,
    pub body: BTreeSet<NodeId>,
    /// Sources of the back edges into the header.
    pub back_edges: BTreeSet<NodeId>,
    pub innermost: bool,
}

/// Natural loops of the reachable part of `f`, one per header, sorted by header.
pub fn find_loops(f: &Function) -> Vec<NaturalLoop> {
    let dom = Dominators::compute(f);
    let preds = f.predecessors();
    let mut back: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for (&n, i) in &f.code {
        if !dom.is_reachable(n) {
            continue;
        }
        for s in i.successors() {
            if dom.dominates(s, n) {
                back.entry(s).or_default().insert(n);
            }
        }
    }
    let mut loops: Vec<NaturalLoop> = back
        .into_iter()
        .map(|(header, sources)| {
            let mut body = BTreeSet::from([header]);
            let mut work: Vec<NodeId> = sources.iter().copied().collect();
            while let Some(n) = work.pop() {
                if body.insert(n) {
                    work.extend(preds[&n].iter().copied().filter(|p| dom.is_reachable(*p)));
                }
            }
            NaturalLoop {
                header,
                body,
                back_edges: sources,
                innermost: true,
            }
        })
        .collect();
    for i in 0..loops.len() {
        let nested = loops.iter().enumerate().any(|(j, l)| {
            j != i && l.body.len() < loops[i].body.len() && l.body.is_subset(&loops[i].body)
        });
        loops[i].innermost = !nested;
    }
    loops
}
