//! Hash-consed sets of positive integers.
//!
//! A set is a reduced binary trie. Key `k` is located by reading its binary
//! digits from the least significant one: a `0` digit descends into the zero
//! child, a `1` digit into the one child, and the terminating `1` marks the
//! node whose flag records membership. Key 1 is the root, 2 its zero child,
//! 3 its one child, and so on.
//!
//! Every node is built through an [`InternTable`]. No node ever carries a
//! false flag with two empty children, so each set has exactly one
//! representation, and within one table two sets are equal exactly when their
//! root uids are equal. The binary operations compare uids before descending
//! and short-circuit on identical operands.

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// Largest admissible key.
pub const MAX_KEY: u64 = (1 << 63) - 1;

type Tree = Option<Arc<HNode>>;

/// An interned trie node.
#[derive(Debug)]
pub struct HNode {
    flag: bool,
    zero: Tree,
    one: Tree,
    uid: u64,
}

impl HNode {
    pub fn uid(&self) -> u64 {
        self.uid
    }
}

fn uid_of(t: &Tree) -> u64 {
    t.as_ref().map_or(0, |n| n.uid)
}

thread_local! {
    static DESCENTS: Cell<u64> = const { Cell::new(0) };
    static EQUALITY_CHECKS: Cell<u64> = const { Cell::new(0) };
}

fn descend() {
    DESCENTS.with(|c| c.set(c.get() + 1));
}

/// Instrumentation counters for the current thread.
pub mod counters {
    use super::{DESCENTS, EQUALITY_CHECKS};

    /// Number of child descents performed by union, inter, diff and subset.
    pub fn descents() -> u64 {
        DESCENTS.with(|c| c.get())
    }

    /// Number of calls to [`HSet::equal`](super::HSet::equal).
    pub fn equality_checks() -> u64 {
        EQUALITY_CHECKS.with(|c| c.get())
    }

    pub fn reset() {
        DESCENTS.with(|c| c.set(0));
        EQUALITY_CHECKS.with(|c| c.set(0));
    }
}

/// The hash-consing table. Leaf has uid 0; interned nodes are numbered from 1.
#[derive(Debug, Clone)]
pub struct InternTable {
    nodes: HashMap<(bool, u64, u64), Arc<HNode>>,
    next_uid: u64,
}

impl Default for InternTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Memo for [`InternTable::import`], keyed by source node identity.
#[derive(Default)]
pub struct ImportMemo {
    seen: HashMap<*const HNode, (Arc<HNode>, Tree)>,
}

impl InternTable {
    pub fn new() -> Self {
        InternTable {
            nodes: HashMap::new(),
            next_uid: 1,
        }
    }

    /// Number of interned nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smart constructor: reduces, then interns.
    fn node(&mut self, flag: bool, zero: Tree, one: Tree) -> Tree {
        if !flag && zero.is_none() && one.is_none() {
            return None;
        }
        let key = (flag, uid_of(&zero), uid_of(&one));
        if let Some(n) = self.nodes.get(&key) {
            return Some(n.clone());
        }
        let n = Arc::new(HNode {
            flag,
            zero,
            one,
            uid: self.next_uid,
        });
        self.next_uid += 1;
        self.nodes.insert(key, n.clone());
        Some(n)
    }

    pub fn singleton(&mut self, k: u64) -> HSet {
        self.add(&HSet::empty(), k)
    }

    pub fn from_keys<I: IntoIterator<Item = u64>>(&mut self, keys: I) -> HSet {
        let mut s = HSet::empty();
        for k in keys {
            s = self.add(&s, k);
        }
        s
    }

    pub fn add(&mut self, s: &HSet, k: u64) -> HSet {
        check_key(k);
        HSet {
            root: self.add_rec(&s.root, k),
        }
    }

    fn add_rec(&mut self, t: &Tree, k: u64) -> Tree {
        let (flag, zero, one) = parts(t);
        if k == 1 {
            if flag {
                return t.clone();
            }
            self.node(true, zero, one)
        } else if k & 1 == 0 {
            let z = self.add_rec(&zero, k >> 1);
            self.node(flag, z, one)
        } else {
            let o = self.add_rec(&one, k >> 1);
            self.node(flag, zero, o)
        }
    }

    pub fn remove(&mut self, s: &HSet, k: u64) -> HSet {
        check_key(k);
        HSet {
            root: self.remove_rec(&s.root, k),
        }
    }

    fn remove_rec(&mut self, t: &Tree, k: u64) -> Tree {
        let n = t.as_ref()?;
        if k == 1 {
            if !n.flag {
                return t.clone();
            }
            self.node(false, n.zero.clone(), n.one.clone())
        } else if k & 1 == 0 {
            let z = self.remove_rec(&n.zero, k >> 1);
            if uid_of(&z) == uid_of(&n.zero) {
                return t.clone();
            }
            self.node(n.flag, z, n.one.clone())
        } else {
            let o = self.remove_rec(&n.one, k >> 1);
            if uid_of(&o) == uid_of(&n.one) {
                return t.clone();
            }
            self.node(n.flag, n.zero.clone(), o)
        }
    }

    pub fn union(&mut self, a: &HSet, b: &HSet) -> HSet {
        HSet {
            root: self.union_rec(&a.root, &b.root),
        }
    }

    fn union_rec(&mut self, a: &Tree, b: &Tree) -> Tree {
        if uid_of(a) == uid_of(b) {
            return a.clone();
        }
        match (a, b) {
            (None, _) => b.clone(),
            (_, None) => a.clone(),
            (Some(x), Some(y)) => {
                descend();
                let z = self.union_rec(&x.zero, &y.zero);
                let o = self.union_rec(&x.one, &y.one);
                self.node(x.flag || y.flag, z, o)
            }
        }
    }

    pub fn inter(&mut self, a: &HSet, b: &HSet) -> HSet {
        HSet {
            root: self.inter_rec(&a.root, &b.root),
        }
    }

    fn inter_rec(&mut self, a: &Tree, b: &Tree) -> Tree {
        if uid_of(a) == uid_of(b) {
            return a.clone();
        }
        match (a, b) {
            (None, _) | (_, None) => None,
            (Some(x), Some(y)) => {
                descend();
                let z = self.inter_rec(&x.zero, &y.zero);
                let o = self.inter_rec(&x.one, &y.one);
                self.node(x.flag && y.flag, z, o)
            }
        }
    }

    /// `a \ b`
    pub fn diff(&mut self, a: &HSet, b: &HSet) -> HSet {
        HSet {
            root: self.diff_rec(&a.root, &b.root),
        }
    }

    fn diff_rec(&mut self, a: &Tree, b: &Tree) -> Tree {
        if uid_of(a) == uid_of(b) {
            return None;
        }
        match (a, b) {
            (None, _) => None,
            (_, None) => a.clone(),
            (Some(x), Some(y)) => {
                descend();
                let z = self.diff_rec(&x.zero, &y.zero);
                let o = self.diff_rec(&x.one, &y.one);
                self.node(x.flag && !y.flag, z, o)
            }
        }
    }

    /// Re-interns a set built by another table (or this one) into this table.
    ///
    /// Only pointer identity of source nodes is used for memoization; uids of
    /// foreign nodes are never compared.
    pub fn import(&mut self, s: &HSet, memo: &mut ImportMemo) -> HSet {
        HSet {
            root: self.import_rec(&s.root, memo),
        }
    }

    fn import_rec(&mut self, t: &Tree, memo: &mut ImportMemo) -> Tree {
        let n = t.as_ref()?;
        let key = Arc::as_ptr(n);
        if let Some((_, done)) = memo.seen.get(&key) {
            return done.clone();
        }
        let z = self.import_rec(&n.zero, memo);
        let o = self.import_rec(&n.one, memo);
        let out = self.node(n.flag, z, o);
        memo.seen.insert(key, (n.clone(), out.clone()));
        out
    }
}

fn parts(t: &Tree) -> (bool, Tree, Tree) {
    match t {
        None => (false, None, None),
        Some(n) => (n.flag, n.zero.clone(), n.one.clone()),
    }
}

fn check_key(k: u64) {
    assert!((1..=MAX_KEY).contains(&k), "hset key out of range: {k}");
}

/// A set of positive integers. Cloning is cheap (one reference count).
#[derive(Clone, Default)]
pub struct HSet {
    root: Tree,
}

impl HSet {
    pub fn empty() -> Self {
        HSet { root: None }
    }

    /// Uid of the root node; 0 for the empty set.
    pub fn uid(&self) -> u64 {
        uid_of(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn contains(&self, k: u64) -> bool {
        if k == 0 {
            return false;
        }
        let mut t = &self.root;
        let mut k = k;
        loop {
            match t {
                None => return false,
                Some(n) if k == 1 => return n.flag,
                Some(n) => {
                    t = if k & 1 == 0 { &n.zero } else { &n.one };
                    k >>= 1;
                }
            }
        }
    }

    /// Constant time: compares root uids. Both sets must come from one table.
    pub fn equal(&self, other: &HSet) -> bool {
        EQUALITY_CHECKS.with(|c| c.set(c.get() + 1));
        self.uid() == other.uid()
    }

    pub fn subset(&self, other: &HSet) -> bool {
        subset_rec(&self.root, &other.root)
    }

    /// Elements in ascending order.
    pub fn contents(&self) -> Vec<u64> {
        let mut out = Vec::new();
        collect(&self.root, 0, 0, &mut out);
        out.sort_unstable();
        out
    }

    pub fn fold<A, F: FnMut(A, u64) -> A>(&self, init: A, f: F) -> A {
        self.contents().into_iter().fold(init, f)
    }

    /// Smallest element, if any.
    pub fn min(&self) -> Option<u64> {
        // The trie order is not numeric, so scan.
        let mut best: Option<u64> = None;
        min_rec(&self.root, 0, 0, &mut best);
        best
    }

    pub fn len(&self) -> usize {
        count(&self.root)
    }

    /// True when no reachable node has a false flag and two empty children.
    pub fn is_reduced(&self) -> bool {
        reduced_rec(&self.root)
    }

    /// Structural comparison, ignoring uids. Used by audits only.
    pub fn structurally_equal(&self, other: &HSet) -> bool {
        struct_eq(&self.root, &other.root)
    }

    /// Visits every node reachable from this set.
    pub fn for_each_node<F: FnMut(&HNode)>(&self, mut f: F) {
        fn go<F: FnMut(&HNode)>(t: &Tree, f: &mut F) {
            if let Some(n) = t {
                f(n);
                go(&n.zero, f);
                go(&n.one, f);
            }
        }
        go(&self.root, &mut f);
    }
}

fn subset_rec(a: &Tree, b: &Tree) -> bool {
    if uid_of(a) == uid_of(b) {
        return true;
    }
    match (a, b) {
        (None, _) => true,
        (_, None) => false,
        (Some(x), Some(y)) => {
            descend();
            (!x.flag || y.flag) && subset_rec(&x.zero, &y.zero) && subset_rec(&x.one, &y.one)
        }
    }
}

fn collect(t: &Tree, prefix: u64, depth: u32, out: &mut Vec<u64>) {
    if let Some(n) = t {
        if n.flag {
            out.push(prefix | (1 << depth));
        }
        collect(&n.zero, prefix, depth + 1, out);
        collect(&n.one, prefix | (1 << depth), depth + 1, out);
    }
}

fn min_rec(t: &Tree, prefix: u64, depth: u32, best: &mut Option<u64>) {
    if let Some(n) = t {
        let here = prefix | (1 << depth);
        // Every key below this node is at least 2^(depth+1) > here.
        if let Some(b) = *best {
            if (1u64 << depth) > b {
                return;
            }
        }
        if n.flag && best.is_none_or(|b| here < b) {
            *best = Some(here);
        }
        min_rec(&n.zero, prefix, depth + 1, best);
        min_rec(&n.one, prefix | (1 << depth), depth + 1, best);
    }
}

fn count(t: &Tree) -> usize {
    match t {
        None => 0,
        Some(n) => usize::from(n.flag) + count(&n.zero) + count(&n.one),
    }
}

fn reduced_rec(t: &Tree) -> bool {
    match t {
        None => true,
        Some(n) => {
            !(!n.flag && n.zero.is_none() && n.one.is_none())
                && reduced_rec(&n.zero)
                && reduced_rec(&n.one)
        }
    }
}

fn struct_eq(a: &Tree, b: &Tree) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => {
            x.flag == y.flag && struct_eq(&x.zero, &y.zero) && struct_eq(&x.one, &y.one)
        }
        _ => false,
    }
}

impl fmt::Display for HSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, k) in self.contents().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for HSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HSet#{}{}", self.uid(), self)
    }
}
