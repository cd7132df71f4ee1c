//! Synchronous context-free grammar with coupled gap slots and exact counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::plan::MergePlan;
use crate::vocab::{TokenId, Vocab};

/// Fractional counts are exact rationals.
pub type Count = BigRational;

pub fn count_from(n: u64) -> Count {
    Count::from_integer(BigInt::from(n))
}

pub fn ratio(numer: i64, denom: i64) -> Count {
    Count::new(BigInt::from(numer), BigInt::from(denom))
}

/// Exact sum that adds numerators over a shared denominator and reduces once
/// per distinct denominator.
pub fn sum_counts<'c>(terms: impl IntoIterator<Item = &'c Count>) -> Count {
    let mut by_denom: Vec<(&BigInt, BigInt)> = Vec::new();
    for t in terms {
        match by_denom.iter_mut().find(|(d, _)| *d == t.denom()) {
            Some((_, n)) => *n += t.numer(),
            None => by_denom.push((t.denom(), t.numer().clone())),
        }
    }
    by_denom
        .into_iter()
        .fold(Count::zero(), |acc, (d, n)| acc + Count::new(n, d.clone()))
}

/// Non-terminal identifier. `0` is always the initial symbol `I`; plain
/// non-terminals print as `X<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NtId(pub u32);

impl NtId {
    pub const INITIAL: NtId = NtId(0);

    pub fn is_initial(self) -> bool {
        self == Self::INITIAL
    }
}

impl fmt::Display for NtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_initial() {
            f.write_str("I")
        } else {
            write!(f, "X{}", self.0)
        }
    }
}

impl core::str::FromStr for NtId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "I" {
            return Ok(NtId::INITIAL);
        }
        s.strip_prefix('X')
            .and_then(|n| n.parse::<u32>().ok())
            .filter(|&n| n > 0)
            .map(NtId)
            .ok_or_else(|| Error::InvalidParameter(format!("bad non-terminal name `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NtKind {
    Initial,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonTerminal {
    pub id: NtId,
    pub kind: NtKind,
    /// Phrase pair this non-terminal was created for. Kept for the
    /// representative after merging.
    pub phrase: Option<(Vec<TokenId>, Vec<TokenId>)>,
    pub count: Count,
}

/// Right-hand-side element. Gap slots are numbered from 1 in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Terminal(TokenId),
    Gap(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProdId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub left: NtId,
    pub src: Vec<Symbol>,
    pub tgt: Vec<Symbol>,
    /// `coupling[k - 1]` fills slot `k` on both sides.
    pub coupling: Vec<NtId>,
    pub count: Count,
    pub prob: Option<Count>,
}

impl Production {
    pub fn arity(&self) -> usize {
        self.coupling.len()
    }

    pub fn is_lexical(&self) -> bool {
        self.coupling.is_empty()
    }

    pub fn has_source_terminal(&self) -> bool {
        self.src.iter().any(|s| matches!(s, Symbol::Terminal(_)))
    }

    pub fn filler(&self, slot: u8) -> NtId {
        self.coupling[slot as usize - 1]
    }

    /// Slots whose filler is `nt`.
    pub fn slots_of(&self, nt: NtId) -> impl Iterator<Item = u8> + '_ {
        self.coupling
            .iter()
            .enumerate()
            .filter(move |(_, &f)| f == nt)
            .map(|(i, _)| i as u8 + 1)
    }

    fn key(&self) -> RuleKey {
        (
            self.left,
            self.src.clone(),
            self.tgt.clone(),
            self.coupling.clone(),
        )
    }
}

type RuleKey = (NtId, Vec<Symbol>, Vec<Symbol>, Vec<NtId>);

/// Renumbers gap slots in source order and validates the coupling.
fn canonicalize(
    mut src: Vec<Symbol>,
    mut tgt: Vec<Symbol>,
    coupling: Vec<NtId>,
) -> Result<(Vec<Symbol>, Vec<Symbol>, Vec<NtId>)> {
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::MalformedProduction("empty side".into()));
    }
    let k = coupling.len();
    if k > u8::MAX as usize {
        return Err(Error::MalformedProduction("too many gaps".into()));
    }
    let mut renumber = [0u8; 256];
    let mut next = 0u8;
    for sym in src.iter_mut() {
        if let Symbol::Gap(slot) = sym {
            let s = *slot as usize;
            if s == 0 || s > k || renumber[s] != 0 {
                return Err(Error::MalformedProduction(format!("bad source slot {s}")));
            }
            next += 1;
            renumber[s] = next;
            *slot = next;
        }
    }
    if next as usize != k {
        return Err(Error::MalformedProduction(
            "coupling size differs from source gaps".into(),
        ));
    }
    let mut seen = [false; 256];
    for sym in tgt.iter_mut() {
        if let Symbol::Gap(slot) = sym {
            let s = *slot as usize;
            if s == 0 || s > k || seen[s] {
                return Err(Error::MalformedProduction(format!("bad target slot {s}")));
            }
            seen[s] = true;
            *slot = renumber[s];
        }
    }
    if seen[1..=k].iter().any(|s| !s) {
        return Err(Error::MalformedProduction(
            "target side misses a gap".into(),
        ));
    }
    let mut new_coupling = coupling.clone();
    for (old, &nt) in coupling.iter().enumerate() {
        new_coupling[renumber[old + 1] as usize - 1] = nt;
    }
    Ok((src, tgt, new_coupling))
}

/// Summary returned by [`Scfg::stats`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarStats {
    pub nonterminals: usize,
    pub productions: usize,
    /// Total production count over plain left-hand sides.
    pub count_mass: Count,
    /// Number of productions per gap arity.
    pub arity_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone)]
pub struct Scfg {
    vocab: Vocab,
    nonterminals: BTreeMap<NtId, NonTerminal>,
    productions: Vec<Option<Production>>,
    lookup: HashMap<RuleKey, ProdId>,
    by_left: HashMap<NtId, BTreeSet<ProdId>>,
    by_gap: HashMap<NtId, BTreeSet<ProdId>>,
    live: usize,
}

impl Default for Scfg {
    fn default() -> Self {
        Self::new()
    }
}

impl Scfg {
    /// Grammar holding only the initial symbol.
    pub fn new() -> Self {
        let mut nonterminals = BTreeMap::new();
        nonterminals.insert(
            NtId::INITIAL,
            NonTerminal {
                id: NtId::INITIAL,
                kind: NtKind::Initial,
                phrase: None,
                count: Count::zero(),
            },
        );
        Self {
            vocab: Vocab::new(),
            nonterminals,
            productions: Vec::new(),
            lookup: HashMap::new(),
            by_left: HashMap::new(),
            by_gap: HashMap::new(),
            live: 0,
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn vocab_mut(&mut self) -> &mut Vocab {
        &mut self.vocab
    }

    pub fn initial(&self) -> NtId {
        NtId::INITIAL
    }

    /// Adds a plain non-terminal with the next free id.
    pub fn add_plain(&mut self, phrase: Option<(Vec<TokenId>, Vec<TokenId>)>) -> NtId {
        let id = NtId(self.nonterminals.keys().next_back().map_or(1, |n| n.0 + 1));
        self.insert_plain(id, phrase).expect("fresh id");
        id
    }

    /// Adds a plain non-terminal with an explicit id.
    pub fn insert_plain(
        &mut self,
        id: NtId,
        phrase: Option<(Vec<TokenId>, Vec<TokenId>)>,
    ) -> Result<()> {
        if id.is_initial() || self.nonterminals.contains_key(&id) {
            return Err(Error::InvalidParameter(format!(
                "non-terminal {id} already exists"
            )));
        }
        self.nonterminals.insert(
            id,
            NonTerminal {
                id,
                kind: NtKind::Plain,
                phrase,
                count: Count::zero(),
            },
        );
        Ok(())
    }

    pub fn contains(&self, id: NtId) -> bool {
        self.nonterminals.contains_key(&id)
    }

    pub fn nonterminal(&self, id: NtId) -> Option<&NonTerminal> {
        self.nonterminals.get(&id)
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = &NonTerminal> {
        self.nonterminals.values()
    }

    pub fn plain_ids(&self) -> impl Iterator<Item = NtId> + '_ {
        self.nonterminals
            .keys()
            .copied()
            .filter(|id| !id.is_initial())
    }

    pub fn num_nonterminals(&self) -> usize {
        self.nonterminals.len()
    }

    pub fn num_productions(&self) -> usize {
        self.live
    }

    /// `C(X)`. Panics for ids that are not in the grammar.
    pub fn count(&self, id: NtId) -> &Count {
        &self.nonterminals[&id].count
    }

    pub fn set_count(&mut self, id: NtId, count: Count) -> Result<()> {
        let nt = self
            .nonterminals
            .get_mut(&id)
            .ok_or(Error::UnknownNonTerminal(id))?;
        nt.count = count;
        Ok(())
    }

    /// Sets every `C(X)` to the sum of its production counts.
    pub fn recount_nonterminals(&mut self) {
        let sums: Vec<(NtId, Count)> = self
            .nonterminals
            .keys()
            .map(|&id| {
                let sum = self
                    .productions_of(id)
                    .map(|p| self.production(p).count.clone())
                    .fold(Count::zero(), |a, b| a + b);
                (id, sum)
            })
            .collect();
        for (id, sum) in sums {
            self.nonterminals.get_mut(&id).unwrap().count = sum;
        }
    }

    pub fn production(&self, id: ProdId) -> &Production {
        self.productions[id.0 as usize]
            .as_ref()
            .expect("live production id")
    }

    pub fn get_production(&self, id: ProdId) -> Option<&Production> {
        self.productions.get(id.0 as usize).and_then(Option::as_ref)
    }

    pub(crate) fn production_mut(&mut self, id: ProdId) -> &mut Production {
        self.productions[id.0 as usize]
            .as_mut()
            .expect("live production id")
    }

    /// Live productions in id order.
    pub fn productions(&self) -> impl Iterator<Item = (ProdId, &Production)> {
        self.productions
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().map(|p| (ProdId(i as u32), p)))
    }

    pub fn productions_of(&self, left: NtId) -> impl Iterator<Item = ProdId> + '_ {
        self.by_left.get(&left).into_iter().flatten().copied()
    }

    /// Productions where `nt` fills at least one gap.
    pub fn gap_uses(&self, nt: NtId) -> impl Iterator<Item = ProdId> + '_ {
        self.by_gap.get(&nt).into_iter().flatten().copied()
    }

    pub fn find_production(
        &self,
        left: NtId,
        src: &[Symbol],
        tgt: &[Symbol],
        coupling: &[NtId],
    ) -> Option<ProdId> {
        let (src, tgt, coupling) =
            canonicalize(src.to_vec(), tgt.to_vec(), coupling.to_vec()).ok()?;
        self.lookup.get(&(left, src, tgt, coupling)).copied()
    }

    /// Adds a production, summing the count into an identical existing one.
    pub fn add_production(
        &mut self,
        left: NtId,
        src: Vec<Symbol>,
        tgt: Vec<Symbol>,
        coupling: Vec<NtId>,
        count: Count,
    ) -> Result<ProdId> {
        for id in core::iter::once(&left).chain(&coupling) {
            if !self.contains(*id) {
                return Err(Error::UnknownNonTerminal(*id));
            }
        }
        if count.is_negative() {
            return Err(Error::MalformedProduction("negative count".into()));
        }
        let (src, tgt, coupling) = canonicalize(src, tgt, coupling)?;
        let prod = Production {
            left,
            src,
            tgt,
            coupling,
            count,
            prob: None,
        };
        let slot = ProdId(self.productions.len() as u32);
        self.productions.push(None);
        Ok(self.place(slot, prod))
    }

    /// Stores `prod` at `slot` unless an identical rule exists, in which case
    /// the counts are summed there. Returns where the rule lives.
    fn place(&mut self, slot: ProdId, prod: Production) -> ProdId {
        let key = prod.key();
        if let Some(&existing) = self.lookup.get(&key) {
            let target = self.production_mut(existing);
            target.count += prod.count;
            target.prob = None;
            return existing;
        }
        self.by_left.entry(prod.left).or_default().insert(slot);
        for &f in &prod.coupling {
            self.by_gap.entry(f).or_default().insert(slot);
        }
        self.lookup.insert(key, slot);
        self.productions[slot.0 as usize] = Some(prod);
        self.live += 1;
        slot
    }

    fn unplace(&mut self, slot: ProdId) -> Production {
        let prod = self.productions[slot.0 as usize]
            .take()
            .expect("live production");
        self.lookup.remove(&prod.key());
        if let Some(set) = self.by_left.get_mut(&prod.left) {
            set.remove(&slot);
        }
        for f in &prod.coupling {
            if let Some(set) = self.by_gap.get_mut(f) {
                set.remove(&slot);
            }
        }
        self.live -= 1;
        prod
    }

    /// Folds `gone` into `keep`: counts are summed, every production that
    /// mentions `gone` is relabelled and identical productions are combined.
    pub fn merge_nonterminals(&mut self, keep: NtId, gone: NtId) -> Result<()> {
        self.merge_tracked(keep, gone).map(drop)
    }

    /// [`Scfg::merge_nonterminals`], returning the `(from, into)` slots of
    /// productions that were combined with an existing one.
    pub(crate) fn merge_tracked(
        &mut self,
        keep: NtId,
        gone: NtId,
    ) -> Result<Vec<(ProdId, ProdId)>> {
        let mut moved = Vec::new();
        if keep == gone {
            return Ok(moved);
        }
        for id in [keep, gone] {
            match self.nonterminals.get(&id) {
                None => return Err(Error::UnknownNonTerminal(id)),
                Some(nt) if nt.kind == NtKind::Initial => {
                    return Err(Error::InvalidPlan(
                        "the initial symbol cannot be merged".into(),
                    ))
                }
                _ => {}
            }
        }
        let removed = self.nonterminals.remove(&gone).unwrap();
        self.nonterminals.get_mut(&keep).unwrap().count += removed.count;

        let mut touched: BTreeSet<ProdId> = self.by_left.remove(&gone).unwrap_or_default();
        touched.extend(self.by_gap.remove(&gone).unwrap_or_default());
        for slot in touched {
            let mut prod = self.unplace(slot);
            if prod.left == gone {
                prod.left = keep;
            }
            for f in prod.coupling.iter_mut() {
                if *f == gone {
                    *f = keep;
                }
            }
            prod.prob = None;
            let at = self.place(slot, prod);
            if at != slot {
                moved.push((slot, at));
            }
        }
        Ok(moved)
    }

    /// Collapses every class of `plan` onto its representative.
    pub fn apply_merge_plan(&self, plan: &MergePlan) -> Result<Scfg> {
        for id in plan.ids() {
            match self.nonterminals.get(&id) {
                Some(nt) if nt.kind == NtKind::Plain => {}
                _ => {
                    return Err(Error::InvalidPlan(format!(
                        "plan references {id}, which is not a plain non-terminal of the grammar"
                    )))
                }
            }
        }
        let mut out = self.clone();
        for (rep, members) in plan.classes() {
            for m in members {
                if m != rep {
                    out.merge_nonterminals(rep, m)?;
                }
            }
        }
        for p in out.productions.iter_mut().flatten() {
            p.prob = None;
        }
        Ok(out)
    }

    /// Attaches `p(r) = c(r) / C(left(r))` to every production.
    pub fn estimate_probabilities(&self) -> Result<Scfg> {
        let mut out = self.clone();
        for slot in out.productions.iter_mut() {
            let Some(p) = slot.as_mut() else { continue };
            let total = &self.nonterminals[&p.left].count;
            if total.is_zero() {
                return Err(Error::ZeroCount(p.left));
            }
            p.prob = Some(&p.count / total);
        }
        Ok(out)
    }

    pub fn is_scored(&self) -> bool {
        self.productions().all(|(_, p)| p.prob.is_some())
    }

    pub fn stats(&self) -> GrammarStats {
        let mut arity_histogram = BTreeMap::new();
        let mut count_mass = Count::zero();
        for (_, p) in self.productions() {
            *arity_histogram.entry(p.arity()).or_insert(0) += 1;
            if !p.left.is_initial() {
                count_mass += &p.count;
            }
        }
        GrammarStats {
            nonterminals: self.num_nonterminals(),
            productions: self.num_productions(),
            count_mass,
            arity_histogram,
        }
    }

    /// Checks that every left-hand side's production counts sum to its `C(X)`.
    pub fn check_normalization(&self) -> Result<()> {
        for nt in self.nonterminals.values() {
            let sum = self
                .productions_of(nt.id)
                .map(|p| self.production(p).count.clone())
                .fold(Count::zero(), |a, b| a + b);
            if sum != nt.count {
                return Err(Error::InvalidParameter(format!(
                    "counts of {} sum to {} but C = {}",
                    nt.id, sum, nt.count
                )));
            }
        }
        Ok(())
    }

    /// Height of each non-terminal's subtree: 0 when every production is
    /// lexical, otherwise one more than the deepest gap filler. Cycles
    /// introduced by merging are cut.
    pub fn subtree_depths(&self) -> BTreeMap<NtId, u32> {
        let mut depth: BTreeMap<NtId, u32> = BTreeMap::new();
        let mut on_stack: BTreeSet<NtId> = BTreeSet::new();
        for id in self.plain_ids() {
            self.depth_of(id, &mut depth, &mut on_stack);
        }
        depth
    }

    fn depth_of(
        &self,
        id: NtId,
        depth: &mut BTreeMap<NtId, u32>,
        on_stack: &mut BTreeSet<NtId>,
    ) -> u32 {
        if let Some(&d) = depth.get(&id) {
            return d;
        }
        if !on_stack.insert(id) {
            return 0;
        }
        let mut best = 0;
        let prods: Vec<ProdId> = self.productions_of(id).collect();
        for p in prods {
            let fillers = self.production(p).coupling.clone();
            for f in fillers {
                if f != id && !f.is_initial() {
                    best = best.max(1 + self.depth_of(f, depth, on_stack));
                }
            }
        }
        on_stack.remove(&id);
        depth.insert(id, best);
        best
    }

    /// Renders one side of a production, gaps as `[Xn,k]`.
    pub fn render_side(&self, prod: &Production, side: &[Symbol]) -> String {
        let mut out = String::new();
        for (i, sym) in side.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match *sym {
                Symbol::Terminal(t) => out.push_str(self.vocab.word(t)),
                Symbol::Gap(k) => out.push_str(&format!("[{},{}]", prod.filler(k), k)),
            }
        }
        out
    }

    pub fn render_phrase(&self, id: NtId) -> Option<(String, String)> {
        let (u, v) = self.nonterminals.get(&id)?.phrase.as_ref()?;
        let join = |toks: &[TokenId]| {
            toks.iter()
                .map(|&t| self.vocab.word(t))
                .collect::<Vec<_>>()
                .join(" ")
        };
        Some((join(u), join(v)))
    }
}

/// Decimal rendering: integers as-is, anything else rounded half-up to ten
/// decimal places.
pub fn format_count(c: &Count) -> String {
    if c.is_integer() {
        return c.to_integer().to_string();
    }
    let scale = BigInt::from(10u64.pow(10));
    let scaled = c * Count::from_integer(scale.clone());
    let rounded = (scaled + ratio(1, 2)).floor().to_integer();
    let (int, frac) = rounded.div_mod_floor(&scale);
    let frac = frac.to_string();
    let mut out = int.to_string();
    out.push('.');
    for _ in frac.len()..10 {
        out.push('0');
    }
    out.push_str(&frac);
    out
}

/// `n/d` rendering used for exact round trips.
pub fn format_exact(c: &Count) -> String {
    format!("{}/{}", c.numer(), c.denom())
}

pub fn parse_exact(s: &str) -> Result<Count> {
    let bad = || Error::InvalidParameter(format!("bad rational `{s}`"));
    let (n, d) = s.split_once('/').ok_or_else(bad)?;
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Count::new(n, d))
}
