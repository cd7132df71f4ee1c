//! Partitions of plain non-terminals.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grammar::NtId;

const ABSENT: u32 = u32::MAX;

/// Union-find over non-terminal ids with an explicit representative per class.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergePlan {
    parent: Vec<u32>,
    size: Vec<u32>,
    rep: Vec<u32>,
}

impl MergePlan {
    /// Every id in its own class.
    pub fn identity(ids: impl IntoIterator<Item = NtId>) -> Self {
        let mut plan = Self::default();
        for id in ids {
            plan.insert(id);
        }
        plan
    }

    /// Builds a plan from `(representative, members)` classes. Members must
    /// be disjoint and each class must contain its representative.
    pub fn from_classes(classes: impl IntoIterator<Item = (NtId, Vec<NtId>)>) -> Result<Self> {
        let mut plan = Self::default();
        for (rep, members) in classes {
            if !members.contains(&rep) {
                return Err(Error::InvalidPlan(format!(
                    "{rep} is not a member of its class"
                )));
            }
            for &m in &members {
                if plan.contains(m) {
                    return Err(Error::InvalidPlan(format!("{m} appears in two classes")));
                }
                plan.insert(m);
            }
            for &m in &members {
                plan.union(rep, m);
            }
        }
        Ok(plan)
    }

    fn insert(&mut self, id: NtId) {
        let i = id.0 as usize;
        if i >= self.parent.len() {
            self.parent.resize(i + 1, ABSENT);
            self.size.resize(i + 1, 0);
            self.rep.resize(i + 1, ABSENT);
        }
        if self.parent[i] == ABSENT {
            self.parent[i] = id.0;
            self.size[i] = 1;
            self.rep[i] = id.0;
        }
    }

    pub fn contains(&self, id: NtId) -> bool {
        self.parent.get(id.0 as usize).is_some_and(|&p| p != ABSENT)
    }

    fn root(&self, id: NtId) -> Option<usize> {
        if !self.contains(id) {
            return None;
        }
        let mut i = id.0 as usize;
        while self.parent[i] as usize != i {
            i = self.parent[i] as usize;
        }
        Some(i)
    }

    /// Representative of `id`'s class; ids outside the plan are their own class.
    pub fn class_of(&self, id: NtId) -> NtId {
        match self.root(id) {
            Some(r) => NtId(self.rep[r]),
            None => id,
        }
    }

    pub fn same_class(&self, a: NtId, b: NtId) -> bool {
        self.class_of(a) == self.class_of(b)
    }

    /// Joins the classes of `keep` and `other`; the merged class keeps the
    /// representative of `keep`. Ids not yet in the plan are added.
    pub fn union(&mut self, keep: NtId, other: NtId) -> bool {
        self.insert(keep);
        self.insert(other);
        let (a, b) = (self.root(keep).unwrap(), self.root(other).unwrap());
        if a == b {
            return false;
        }
        let rep = self.rep[a];
        let (big, small) = if self.size[a] >= self.size[b] {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
        self.rep[big] = rep;
        true
    }

    pub fn ids(&self) -> impl Iterator<Item = NtId> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != ABSENT)
            .map(|(i, _)| NtId(i as u32))
    }

    /// Classes keyed by representative, members in id order.
    pub fn classes(&self) -> BTreeMap<NtId, Vec<NtId>> {
        let mut out: BTreeMap<NtId, Vec<NtId>> = BTreeMap::new();
        for id in self.ids() {
            out.entry(self.class_of(id)).or_default().push(id);
        }
        out
    }

    pub fn num_classes(&self) -> usize {
        self.ids()
            .filter(|&id| self.root(id) == Some(id.0 as usize))
            .count()
    }

    pub fn len(&self) -> usize {
        self.ids().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_identity(&self) -> bool {
        self.num_classes() == self.len()
    }
}
