use super::{EqId, Equation, Rhs};
use crate::hset::{HSet, InternTable};
use crate::ir::Reg;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Equations numbered from 1 in order of discovery.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog(pub Vec<Equation>);

impl Catalog {
    pub fn get(&self, id: EqId) -> Option<&Equation> {
        usize::try_from(id)
            .ok()
            .and_then(|i| i.checked_sub(1))
            .and_then(|i| self.0.get(i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EqId, &Equation)> {
        self.0.iter().enumerate().map(|(i, e)| (i as EqId + 1, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn from_json(s: &str) -> Result<Catalog, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// The equation catalog together with its indexes. A frozen table never
/// creates equations; lookups of unknown equations fail instead.
#[derive(Clone, Debug, Default)]
pub struct Tables {
    pub intern: InternTable,
    catalog: Catalog,
    eq_to_id: HashMap<Equation, EqId>,
    rhs_to_ids: HashMap<Rhs, HSet>,
    reg_to_ids: HashMap<Reg, HSet>,
    reg_to_moves: HashMap<Reg, HSet>,
    mem_ids: HSet,
    frozen: bool,
}

impl Tables {
    pub fn new() -> Tables {
        Tables::default()
    }

    /// Exact tables recomputed from `catalog`, frozen.
    pub fn rebuild(catalog: &Catalog) -> Tables {
        let mut t = Tables::new();
        for (id, e) in catalog.iter() {
            t.eq_to_id.entry(e.clone()).or_insert(id);
            t.index(id, e);
        }
        t.catalog = catalog.clone();
        t.frozen = true;
        t
    }

    fn index(&mut self, id: EqId, e: &Equation) {
        let it = &mut self.intern;
        let s = self.rhs_to_ids.entry(e.rhs.clone()).or_default();
        *s = it.add(s, id);
        let mut regs: Vec<Reg> = e.rhs.args().to_vec();
        regs.push(e.lhs);
        regs.sort();
        regs.dedup();
        for r in regs {
            let s = self.reg_to_ids.entry(r).or_default();
            *s = it.add(s, id);
        }
        if e.rhs.is_move() {
            let s = self.reg_to_moves.entry(e.lhs).or_default();
            *s = it.add(s, id);
        }
        if let Rhs::Load(..) = e.rhs {
            self.mem_ids = it.add(&self.mem_ids, id);
        }
    }

    /// Id of `e`, allocating one unless frozen. Equations whose left-hand
    /// register occurs on the right are never interned.
    pub fn intern_equation(&mut self, e: &Equation) -> Option<EqId> {
        if e.rhs.args().contains(&e.lhs) {
            return None;
        }
        if let Some(&id) = self.eq_to_id.get(e) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = self.catalog.len() as EqId + 1;
        self.catalog.0.push(e.clone());
        self.eq_to_id.insert(e.clone(), id);
        self.index(id, e);
        Some(id)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn equation(&self, id: EqId) -> Option<&Equation> {
        self.catalog.get(id)
    }

    pub fn rhs_ids(&self, rhs: &Rhs) -> HSet {
        self.rhs_to_ids.get(rhs).cloned().unwrap_or_default()
    }

    pub fn reg_ids(&self, r: Reg) -> HSet {
        self.reg_to_ids.get(&r).cloned().unwrap_or_default()
    }

    pub fn reg_moves(&self, r: Reg) -> HSet {
        self.reg_to_moves.get(&r).cloned().unwrap_or_default()
    }

    pub fn mem_ids(&self) -> HSet {
        self.mem_ids.clone()
    }

    /// Contents of every index, for comparing tables across intern tables.
    pub fn index_contents(&self) -> IndexContents {
        let dump = |m: &HashMap<Reg, HSet>| -> BTreeMap<Reg, Vec<EqId>> {
            m.iter()
                .filter(|(_, s)| !s.is_empty())
                .map(|(r, s)| (*r, s.contents()))
                .collect()
        };
        let mut rhs: Vec<(String, Vec<EqId>)> = self
            .rhs_to_ids
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(r, s)| (format!("{r:?}"), s.contents()))
            .collect();
        rhs.sort();
        IndexContents {
            rhs_to_ids: rhs,
            reg_to_ids: dump(&self.reg_to_ids),
            reg_to_moves: dump(&self.reg_to_moves),
            mem_ids: self.mem_ids.contents(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexContents {
    pub rhs_to_ids: Vec<(String, Vec<EqId>)>,
    pub reg_to_ids: BTreeMap<Reg, Vec<EqId>>,
    pub reg_to_moves: BTreeMap<Reg, Vec<EqId>>,
    pub mem_ids: Vec<EqId>,
}
