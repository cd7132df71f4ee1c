//! Statistical equivalence of non-terminals.
//!
//! Two non-terminals are compared through the contexts they fill: a context
//! is a right-hand side with one gap marked, every other gap labelled by the
//! class of its filler. For each context the relative frequencies
//! `c/C(X)` of both non-terminals are tested for a significant difference
//! (Hoeffding bound, or Fisher's exact test on small samples). A context that
//! only one of them fills is compared against a zero count. The
//! dissimilarity of a pair is the largest per-context `D`, folded together
//! with the dissimilarity of the left-hand sides of matched contexts.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::OnceCell;
use core::cmp::Ordering;
use core::hash::BuildHasher;

use hashbrown::{HashMap, HashSet};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::grammar::{sum_counts, Count, NtId, ProdId, Production, Scfg, Symbol};
use crate::plan::MergePlan;
use crate::stats;
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceConfig {
    pub alpha: f64,
    /// Fisher's test is used when `min(C1, C2)` is below this many observations.
    pub fisher_threshold: f64,
    /// Also require the left-hand sides of matched contexts to be equivalent.
    pub strict_recursion: bool,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            fisher_threshold: 20.0,
            strict_recursion: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    Hoeffding,
    Fisher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub differ: bool,
    pub dissimilarity: f64,
    pub test_used: TestKind,
}

/// Tests `c1/C1` against `c2/C2` with the configured back-off rule.
pub fn compare_proportions(
    c1: &Count,
    total1: &Count,
    c2: &Count,
    total2: &Count,
    cfg: &EquivalenceConfig,
) -> Result<TestOutcome> {
    if total1.is_zero() || total2.is_zero() {
        return Err(Error::InvalidParameter("zero non-terminal count".into()));
    }
    let d = stats::dissimilarity_exact(c1, total1, c2, total2);
    let dissimilarity = stats::to_f64(&d);
    let small = stats::to_f64(total1).min(stats::to_f64(total2)) < cfg.fisher_threshold;
    let (differ, test_used) = if small {
        let differ = if d.is_zero() {
            false
        } else {
            stats::fisher_differ(
                stats::round_half_up(c1)?,
                stats::round_half_up(total1)?,
                stats::round_half_up(c2)?,
                stats::round_half_up(total2)?,
                cfg.alpha,
            )?
        };
        (differ, TestKind::Fisher)
    } else {
        (
            stats::hoeffding_differ_exact(c1, total1, c2, total2, cfg.alpha)?,
            TestKind::Hoeffding,
        )
    };
    Ok(TestOutcome {
        differ,
        dissimilarity,
        test_used,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeySym {
    Terminal(TokenId),
    /// The compared position.
    Hole(u8),
    /// Another gap, labelled by the class of its filler.
    Gap(u8, NtId),
}

/// Right-hand side with the compared gap marked.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextKey {
    pub src: Vec<KeySym>,
    pub tgt: Vec<KeySym>,
}

impl ContextKey {
    fn build(prod: &Production, hole: u8, class_of: &dyn Fn(NtId) -> NtId) -> Self {
        let map = |side: &[Symbol]| {
            side.iter()
                .map(|s| match *s {
                    Symbol::Terminal(t) => KeySym::Terminal(t),
                    Symbol::Gap(k) if k == hole => KeySym::Hole(k),
                    Symbol::Gap(k) => KeySym::Gap(k, class_of(prod.filler(k))),
                })
                .collect()
        };
        Self {
            src: map(&prod.src),
            tgt: map(&prod.tgt),
        }
    }

    /// `das • ||| the •` style rendering.
    pub fn render(&self, g: &Scfg) -> String {
        let side = |syms: &[KeySym]| {
            syms.iter()
                .map(|s| match s {
                    KeySym::Terminal(t) => String::from(g.vocab().word(*t)),
                    KeySym::Hole(_) => String::from("•"),
                    KeySym::Gap(k, nt) => alloc::format!("[{nt},{k}]"),
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        alloc::format!("{} ||| {}", side(&self.src), side(&self.tgt))
    }
}

/// One non-terminal's use of a context, summed over the productions that
/// share it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSide {
    pub productions: Vec<ProdId>,
    pub lefts: Vec<NtId>,
    pub count: Count,
}

/// A context as stored in a table. The exact count is only summed when a
/// comparison cannot be settled on the float and the rounded cell.
#[derive(Debug, Clone)]
struct Entry {
    productions: Vec<ProdId>,
    lefts: Vec<NtId>,
    approx: f64,
    /// Rounded half up, the cell used by Fisher's test.
    rounded: Option<u64>,
    exact: OnceCell<Count>,
}

impl Entry {
    fn count(&self, g: &Scfg) -> &Count {
        self.exact
            .get_or_init(|| sum_counts(self.productions.iter().map(|&p| &g.production(p).count)))
    }

    fn side(&self, g: &Scfg) -> ContextSide {
        ContextSide {
            productions: self.productions.clone(),
            lefts: self.lefts.clone(),
            count: self.count(g).clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextPair {
    pub key: ContextKey,
    pub left_a: Option<ContextSide>,
    pub left_b: Option<ContextSide>,
}

impl ContextPair {
    pub fn count_a(&self) -> Count {
        self.left_a
            .as_ref()
            .map_or_else(Count::zero, |s| s.count.clone())
    }

    pub fn count_b(&self) -> Count {
        self.left_b
            .as_ref()
            .map_or_else(Count::zero, |s| s.count.clone())
    }

    pub fn is_matched(&self) -> bool {
        self.left_a.is_some() && self.left_b.is_some()
    }
}

/// The contexts of one non-terminal, sorted by key, with indexes that let a
/// comparison skip most of the contexts the other side does not fill.
#[derive(Debug, Clone)]
pub struct ContextTable {
    entries: Vec<(ContextKey, Entry)>,
    /// Entry indices by decreasing float count.
    by_count: Vec<usize>,
    /// Entry indices grouped by rounded count; unroundable entries last
    /// under `None`.
    by_rounded: Vec<(Option<u64>, Vec<usize>)>,
    /// Key hash of each entry.
    hashes: Vec<u64>,
    /// Per entry, a bit for every non-terminal its key or lefts name (see
    /// [`mention_bit`]); a clear bit rules the entry out when renaming.
    mentions: Vec<u64>,
    /// `(hash, entry)` sorted, for lookups that compare integers first.
    by_hash: Vec<(u64, usize)>,
}

fn key_hash(key: &ContextKey) -> u64 {
    foldhash::fast::FixedState::with_seed(0).hash_one(key)
}

fn mention_bit(nt: NtId) -> u64 {
    1 << (u64::from(nt.0).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 58)
}

fn mentions_of(key: &ContextKey, e: &Entry) -> u64 {
    let gaps = key.src.iter().filter_map(|sym| match sym {
        KeySym::Gap(_, nt) => Some(*nt),
        _ => None,
    });
    gaps.chain(e.lefts.iter().copied())
        .fold(0, |m, nt| m | mention_bit(nt))
}

/// An entry on its way into a table, with its key hash and mention bits.
type Row = (ContextKey, Entry, u64, u64);

fn row(key: ContextKey, e: Entry) -> Row {
    let hash = key_hash(&key);
    let mentions = mentions_of(&key, &e);
    (key, e, hash, mentions)
}

impl ContextTable {
    fn new(entries: Vec<(ContextKey, Entry)>) -> Self {
        Self::from_rows(entries.into_iter().map(|(k, e)| row(k, e)).collect())
    }

    /// Builds the indexes over rows already sorted by key.
    fn from_rows(rows: Vec<Row>) -> Self {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n);
        let mut hashes = Vec::with_capacity(n);
        let mut mentions = Vec::with_capacity(n);
        for (k, e, h, m) in rows {
            entries.push((k, e));
            hashes.push(h);
            mentions.push(m);
        }
        let mut by_count: Vec<usize> = (0..n).collect();
        // the walks over this order stop on float thresholds with slack, so
        // near-ties need no exact ordering
        by_count.sort_unstable_by(|&i, &j| {
            entries[j]
                .1
                .approx
                .total_cmp(&entries[i].1.approx)
                .then(i.cmp(&j))
        });
        let mut groups: BTreeMap<Option<u64>, Vec<usize>> = BTreeMap::new();
        for (i, (_, side)) in entries.iter().enumerate() {
            groups.entry(side.rounded).or_default().push(i);
        }
        let mut by_hash: Vec<(u64, usize)> = hashes.iter().copied().zip(0..).collect();
        by_hash.sort_unstable();
        Self {
            entries,
            by_count,
            by_rounded: groups.into_iter().collect(),
            hashes,
            mentions,
            by_hash,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &ContextKey> {
        self.entries.iter().map(|(k, _)| k)
    }

    /// Every context with its exact count.
    pub fn sides(&self, g: &Scfg) -> Vec<(ContextKey, ContextSide)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.clone(), e.side(g)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn find_hashed(&self, key: &ContextKey, hash: u64) -> Option<usize> {
        let start = self.by_hash.partition_point(|&(h, _)| h < hash);
        self.by_hash[start..]
            .iter()
            .take_while(|&&(h, _)| h == hash)
            .map(|&(_, i)| i)
            .find(|&i| self.entries[i].0 == *key)
    }

    /// The table after `gone` is merged into `keep`, for evaluators without
    /// a merge plan: gap labels and left-hand sides are renamed, productions
    /// combined by the merge are followed through `moved`, and contexts that
    /// now coincide are summed. `absorbed` is `gone`'s table when this one
    /// belongs to `keep`. `g` is the grammar after the merge.
    pub(crate) fn after_merge(
        this: Rc<ContextTable>,
        absorbed: Option<Rc<ContextTable>>,
        keep: NtId,
        gone: NtId,
        moved: &HashMap<ProdId, ProdId>,
        g: &Scfg,
    ) -> ContextTable {
        let take = |t: Rc<ContextTable>| Rc::try_unwrap(t).unwrap_or_else(|t| (*t).clone());
        let mut old = take(this);
        let absorbed = absorbed.map(take);
        let (gone_bit, keep_bit) = (mention_bit(gone), mention_bit(keep));
        // productions that moved all mention `gone`, so only entries naming
        // it as a left or co-filler can hold them
        let relabel = |key: &mut ContextKey, e: &mut Entry, absorbed: bool| {
            let mut renamed = false;
            for sym in key.src.iter_mut().chain(key.tgt.iter_mut()) {
                if let KeySym::Gap(_, nt) = sym {
                    if *nt == gone {
                        *nt = keep;
                        renamed = true;
                    }
                }
            }
            let left = e.lefts.contains(&gone);
            if left {
                for l in &mut e.lefts {
                    if *l == gone {
                        *l = keep;
                    }
                }
                e.lefts.sort_unstable();
                e.lefts.dedup();
            }
            if (renamed || left || absorbed)
                && !moved.is_empty()
                && e.productions.iter().any(|p| moved.contains_key(p))
            {
                for p in &mut e.productions {
                    if let Some(&to) = moved.get(p) {
                        *p = to;
                    }
                }
                e.productions.sort_unstable();
                e.productions.dedup();
            }
            renamed
        };
        let mut renamed = Vec::new();
        for (i, m) in old.mentions.iter_mut().enumerate() {
            if *m & gone_bit == 0 {
                continue;
            }
            let (key, e) = &mut old.entries[i];
            if relabel(key, e, false) {
                renamed.push(i);
            }
            *m |= keep_bit;
        }
        if renamed.is_empty() && absorbed.is_none() {
            // same keys in the same order with the same counts
            return old;
        }
        // entries whose key is renamed leave the sorted run and are merged
        // back in with the absorbed ones
        let mut extra: Vec<Row> = Vec::new();
        if let Some(t) = absorbed {
            for (mut key, mut e) in t.entries {
                relabel(&mut key, &mut e, true);
                extra.push(row(key, e));
            }
        }
        let n = old.entries.len();
        let mut kept: Vec<Row> = Vec::with_capacity(n - renamed.len());
        let mut next = renamed.iter().peekable();
        let rows = old
            .entries
            .into_iter()
            .zip(old.hashes)
            .zip(old.mentions)
            .map(|(((k, e), h), m)| (k, e, h, m));
        for (i, r) in rows.enumerate() {
            if next.next_if_eq(&&i).is_some() {
                extra.push(row(r.0, r.1));
            } else {
                kept.push(r);
            }
        }
        extra.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<Row> = Vec::with_capacity(kept.len() + extra.len());
        let mut a = kept.into_iter().peekable();
        let mut b = extra.into_iter().peekable();
        loop {
            let next = match (a.peek(), b.peek()) {
                (Some(x), Some(y)) if x.0 <= y.0 => a.next(),
                (Some(_), Some(_)) => b.next(),
                (Some(_), None) => a.next(),
                (None, _) => b.next(),
            };
            let Some((key, e, h, m)) = next else {
                break;
            };
            match out.last_mut() {
                Some((k, last, _, lm)) if *k == key => {
                    last.productions.extend(e.productions);
                    last.productions.sort_unstable();
                    last.productions.dedup();
                    last.lefts.extend(e.lefts);
                    last.lefts.sort_unstable();
                    last.lefts.dedup();
                    last.approx += e.approx;
                    last.exact = OnceCell::new();
                    last.rounded = None;
                    *lm |= m;
                }
                _ => out.push((key, e, h, m)),
            }
        }
        for (_, e, _, _) in &mut out {
            if e.exact.get().is_none() && e.rounded.is_none() {
                e.rounded = round_cell(|| e.count(g), e.approx, e.productions.len());
            }
        }
        ContextTable::from_rows(out)
    }

    #[cfg(test)]
    pub(crate) fn cells(&self) -> Vec<Option<u64>> {
        self.entries.iter().map(|(_, e)| e.rounded).collect()
    }

    /// For each entry of `small`, its index in `self` when matched.
    fn matches(&self, small: &ContextTable) -> Vec<Option<usize>> {
        small
            .entries
            .iter()
            .zip(&small.hashes)
            .map(|((k, _), &h)| self.find_hashed(k, h))
            .collect()
    }
}

/// Both tables walked in key order; `None` marks a context only one side fills.
fn align<'t>(
    ta: &'t [(ContextKey, Entry)],
    tb: &'t [(ContextKey, Entry)],
) -> Vec<(&'t ContextKey, Option<&'t Entry>, Option<&'t Entry>)> {
    let mut out = Vec::with_capacity(ta.len().max(tb.len()));
    let (mut i, mut j) = (0, 0);
    while i < ta.len() || j < tb.len() {
        let ord = match (ta.get(i), tb.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                out.push((&ta[i].0, Some(&ta[i].1), None));
                i += 1;
            }
            Ordering::Greater => {
                out.push((&tb[j].0, None, Some(&tb[j].1)));
                j += 1;
            }
            Ordering::Equal => {
                out.push((&ta[i].0, Some(&ta[i].1), Some(&tb[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// A non-terminal count in the three forms the tests use.
#[derive(Clone, Copy)]
struct Total<'c> {
    exact: &'c Count,
    approx: f64,
    rounded: Option<u64>,
}

impl<'c> Total<'c> {
    fn of(exact: &'c Count) -> Self {
        let approx = stats::to_f64(exact);
        Self {
            exact,
            approx,
            rounded: round_cell(|| exact, approx, 1),
        }
    }
}

/// Rounds half up, through `approx` when it is further from a half than
/// its float error, a sum of `terms` correctly rounded values.
fn round_cell<'c>(exact: impl FnOnce() -> &'c Count, approx: f64, terms: usize) -> Option<u64> {
    if (0.0..1e12).contains(&approx) {
        let frac = approx - libm::floor(approx);
        let err = 4.0 * f64::EPSILON * (terms as f64 + 1.0) * approx;
        if (frac - 0.5).abs() > err + 1e-12 {
            return Some(libm::floor(approx + 0.5) as u64);
        }
    }
    stats::round_half_up(exact()).ok()
}

/// Relative tolerance under which float results are recomputed exactly.
const SLACK: f64 = 1e-9;

/// Pairwise equivalence and dissimilarity over one grammar and one frozen plan.
///
/// Results are memoized per unordered pair, so one evaluator should be
/// reused for many queries against the same grammar.
pub struct Evaluator<'a> {
    grammar: &'a Scfg,
    plan: Option<&'a MergePlan>,
    cfg: EquivalenceConfig,
    contexts: HashMap<NtId, Rc<ContextTable>>,
    dissim_memo: HashMap<(NtId, NtId), f64>,
    equiv_memo: HashMap<(NtId, NtId), bool>,
    fisher_memo: HashMap<(u64, u64, u64, u64), bool>,
    in_progress: HashSet<(NtId, NtId)>,
}

fn ordered(a: NtId, b: NtId) -> (NtId, NtId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<'a> Evaluator<'a> {
    pub fn new(grammar: &'a Scfg, plan: Option<&'a MergePlan>, cfg: EquivalenceConfig) -> Self {
        Self::with_contexts(grammar, plan, cfg, HashMap::new())
    }

    /// Starts from context tables built by an earlier evaluator over the same
    /// non-terminals.
    pub(crate) fn with_contexts(
        grammar: &'a Scfg,
        plan: Option<&'a MergePlan>,
        cfg: EquivalenceConfig,
        contexts: HashMap<NtId, Rc<ContextTable>>,
    ) -> Self {
        Self {
            grammar,
            plan,
            cfg,
            contexts,
            dissim_memo: HashMap::new(),
            equiv_memo: HashMap::new(),
            fisher_memo: HashMap::new(),
            in_progress: HashSet::new(),
        }
    }

    pub(crate) fn into_contexts(self) -> HashMap<NtId, Rc<ContextTable>> {
        self.contexts
    }

    pub fn grammar(&self) -> &'a Scfg {
        self.grammar
    }

    pub fn config(&self) -> &EquivalenceConfig {
        &self.cfg
    }

    fn class_of(&self, id: NtId) -> NtId {
        self.plan.map_or(id, |p| p.class_of(id))
    }

    fn check_pair(&self, a: NtId, b: NtId) -> Result<()> {
        for id in [a, b] {
            if id.is_initial() || !self.grammar.contains(id) {
                return Err(Error::UnknownNonTerminal(id));
            }
        }
        if a == b {
            return Err(Error::InvalidParameter(alloc::format!(
                "cannot compare {a} with itself"
            )));
        }
        Ok(())
    }

    fn counts(&self, a: NtId, b: NtId) -> Result<(&'a Count, &'a Count)> {
        let (ca, cb) = (self.grammar.count(a), self.grammar.count(b));
        if ca.is_zero() || cb.is_zero() {
            return Err(Error::ZeroCount(if ca.is_zero() { a } else { b }));
        }
        Ok((ca, cb))
    }

    /// Contexts filled by `nt`, sorted by key.
    pub fn contexts_of(&mut self, nt: NtId) -> Rc<ContextTable> {
        if let Some(t) = self.contexts.get(&nt) {
            return t.clone();
        }
        let g = self.grammar;
        let plan = self.plan;
        let class_of = |id: NtId| plan.map_or(id, |p| p.class_of(id));
        let mut table: BTreeMap<ContextKey, Entry> = BTreeMap::new();
        for pid in g.gap_uses(nt) {
            let prod = g.production(pid);
            for slot in prod.slots_of(nt) {
                let key = ContextKey::build(prod, slot, &class_of);
                let side = table.entry(key).or_insert_with(|| Entry {
                    productions: Vec::new(),
                    lefts: Vec::new(),
                    approx: 0.0,
                    rounded: None,
                    exact: OnceCell::new(),
                });
                side.productions.push(pid);
                side.approx += stats::to_f64(&prod.count);
                if !side.lefts.contains(&prod.left) {
                    side.lefts.push(prod.left);
                }
            }
        }
        let entries = table
            .into_iter()
            .map(|(k, mut side)| {
                side.lefts.sort_unstable();
                side.rounded = round_cell(|| side.count(g), side.approx, side.productions.len());
                (k, side)
            })
            .collect();
        let t = Rc::new(ContextTable::new(entries));
        self.contexts.insert(nt, t.clone());
        t
    }

    /// Matched and unmatched contexts of the pair, sorted by key.
    pub fn enumerate_contexts(&mut self, a: NtId, b: NtId) -> Result<Vec<ContextPair>> {
        self.check_pair(a, b)?;
        let (ta, tb) = (self.contexts_of(a), self.contexts_of(b));
        let g = self.grammar;
        Ok(align(&ta.entries, &tb.entries)
            .into_iter()
            .map(|(key, sa, sb)| ContextPair {
                key: key.clone(),
                left_a: sa.map(|e| e.side(g)),
                left_b: sb.map(|e| e.side(g)),
            })
            .collect())
    }

    /// Per-context test outcomes, in context order.
    pub fn context_outcomes(
        &mut self,
        a: NtId,
        b: NtId,
    ) -> Result<Vec<(ContextPair, TestOutcome)>> {
        let contexts = self.enumerate_contexts(a, b)?;
        let (ca, cb) = (self.grammar.count(a).clone(), self.grammar.count(b).clone());
        contexts
            .into_iter()
            .map(|ctx| {
                let out = compare_proportions(&ctx.count_a(), &ca, &ctx.count_b(), &cb, &self.cfg)?;
                Ok((ctx, out))
            })
            .collect()
    }

    /// Pairs of left-hand sides of matched contexts that still need comparing.
    fn enclosing_pairs<'s>(
        &self,
        matched: impl Iterator<Item = (&'s Entry, &'s Entry)>,
    ) -> Vec<(NtId, NtId)> {
        let mut pairs = Vec::new();
        for (sa, sb) in matched {
            for &la in &sa.lefts {
                for &lb in &sb.lefts {
                    if la.is_initial() || lb.is_initial() || self.class_of(la) == self.class_of(lb)
                    {
                        continue;
                    }
                    let p = ordered(la, lb);
                    if !pairs.contains(&p) {
                        pairs.push(p);
                    }
                }
            }
        }
        pairs
    }

    /// The tables of `a` and `b` as (smaller, larger), with the index in the
    /// larger table of each entry of the smaller one.
    #[allow(clippy::type_complexity)]
    fn oriented(
        &mut self,
        a: NtId,
        b: NtId,
    ) -> Result<(
        (Rc<ContextTable>, Total<'a>),
        (Rc<ContextTable>, Total<'a>),
        Vec<Option<usize>>,
    )> {
        let (ca, cb) = self.counts(a, b)?;
        let (ta, tb) = (self.contexts_of(a), self.contexts_of(b));
        let (small, big) = if ta.len() <= tb.len() {
            ((ta, Total::of(ca)), (tb, Total::of(cb)))
        } else {
            ((tb, Total::of(cb)), (ta, Total::of(ca)))
        };
        let matches = big.0.matches(&small.0);
        Ok((small, big, matches))
    }

    /// Maximum `D` over all contexts, including enclosing left-hand sides.
    pub fn nt_dissimilarity(&mut self, a: NtId, b: NtId) -> Result<f64> {
        self.check_pair(a, b)?;
        if self.class_of(a) == self.class_of(b) {
            return Ok(0.0);
        }
        let key = ordered(a, b);
        if let Some(&d) = self.dissim_memo.get(&key) {
            return Ok(d);
        }
        if !self.in_progress.insert(key) {
            return Ok(0.0);
        }
        let result = self.dissimilarity_uncached(a, b);
        self.in_progress.remove(&key);
        let d = result?;
        self.dissim_memo.insert(key, d);
        Ok(d)
    }

    /// The maximum is located in floating point and the near-maximal
    /// contexts are re-evaluated exactly, so the result equals the float
    /// rounding of the exact maximum.
    fn dissimilarity_uncached(&mut self, a: NtId, b: NtId) -> Result<f64> {
        let ((small, ts), (big, tb), matches) = self.oriented(a, b)?;
        let h = ts.approx * tb.approx / (ts.approx + tb.approx);
        let approx_d = |xs: f64, xb: f64| {
            let d = xs / ts.approx - xb / tb.approx;
            h * d * d
        };
        // (float D, small side, big side) of every candidate
        let mut cands: Vec<(f64, Option<&Entry>, Option<&Entry>)> = Vec::new();
        for ((_, ss), m) in small.entries.iter().zip(&matches) {
            let sb = m.map(|j| &big.entries[j].1);
            cands.push((
                approx_d(ss.approx, sb.map_or(0.0, |s| s.approx)),
                Some(ss),
                sb,
            ));
        }
        // against zero, D grows with the count: the first unmatched entry by
        // count is the largest, plus any near-ties after it
        let mut matched: Vec<usize> = matches.iter().flatten().copied().collect();
        matched.sort_unstable();
        let mut top: Option<f64> = None;
        for &j in &big.by_count {
            if matched.binary_search(&j).is_ok() {
                continue;
            }
            let sb = &big.entries[j].1;
            let d = approx_d(0.0, sb.approx);
            match top {
                Some(t) if d < t * (1.0 - SLACK) => break,
                None => top = Some(d),
                _ => {}
            }
            cands.push((d, None, Some(sb)));
        }
        let best = cands.iter().map(|c| c.0).fold(0.0f64, f64::max);
        let mut exact_best = Count::zero();
        for &(d, ss, sb) in &cands {
            if d >= best * (1.0 - SLACK) {
                let zero = Count::zero();
                let g = self.grammar;
                let e = stats::dissimilarity_exact(
                    ss.map_or(&zero, |s| s.count(g)),
                    ts.exact,
                    sb.map_or(&zero, |s| s.count(g)),
                    tb.exact,
                );
                if e > exact_best {
                    exact_best = e;
                }
            }
        }
        let mut best = stats::to_f64(&exact_best);
        let sides = small
            .entries
            .iter()
            .zip(&matches)
            .filter_map(|((_, ss), m)| m.map(|j| (ss, &big.entries[j].1)));
        for (la, lb) in self.enclosing_pairs(sides) {
            best = best.max(self.nt_dissimilarity(la, lb)?);
        }
        Ok(best)
    }

    /// Whether no context reports a significant difference.
    pub fn equivalent(&mut self, a: NtId, b: NtId) -> Result<bool> {
        self.check_pair(a, b)?;
        if self.class_of(a) == self.class_of(b) {
            return Ok(true);
        }
        let key = ordered(a, b);
        if let Some(&e) = self.equiv_memo.get(&key) {
            return Ok(e);
        }
        if !self.in_progress.insert(key) {
            return Ok(true);
        }
        let result = self.equivalent_uncached(a, b);
        self.in_progress.remove(&key);
        let e = result?;
        self.equiv_memo.insert(key, e);
        Ok(e)
    }

    fn equivalent_uncached(&mut self, a: NtId, b: NtId) -> Result<bool> {
        stats::check_alpha(self.cfg.alpha)?;
        let ((small, ts), (big, tb), matches) = self.oriented(a, b)?;
        for ((_, ss), m) in small.entries.iter().zip(&matches) {
            let sb = m.map(|j| &big.entries[j].1);
            if self.context_differs(Some(ss), sb, ts, tb)? {
                return Ok(false);
            }
        }
        if self.unmatched_differs(&big, &matches, tb, ts)? {
            return Ok(false);
        }
        if self.cfg.strict_recursion {
            let sides = small
                .entries
                .iter()
                .zip(&matches)
                .filter_map(|((_, ss), m)| m.map(|j| (ss, &big.entries[j].1)));
            for (la, lb) in self.enclosing_pairs(sides) {
                if !self.equivalent(la, lb)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Whether any context of `big` outside `matches` differs from a zero
    /// count of the other non-terminal.
    fn unmatched_differs(
        &mut self,
        big: &ContextTable,
        matches: &[Option<usize>],
        tb: Total,
        ts: Total,
    ) -> Result<bool> {
        let mut matched: Vec<usize> = matches.iter().flatten().copied().collect();
        matched.sort_unstable();
        let is_matched = |j: usize| matched.binary_search(&j).is_ok();
        if tb.approx.min(ts.approx) < self.cfg.fisher_threshold {
            // Fisher's p-value is not monotone in the count, but it only sees
            // the rounded count: test each rounded value once
            for (v, group) in &big.by_rounded {
                let (Some(v), Some(rb), Some(rs)) = (*v, tb.rounded, ts.rounded) else {
                    for &j in group.iter().filter(|&&j| !is_matched(j)) {
                        if self.context_differs(Some(&big.entries[j].1), None, tb, ts)? {
                            return Ok(true);
                        }
                    }
                    continue;
                };
                if group.iter().all(|&j| is_matched(j)) {
                    continue;
                }
                if self.fisher(v, rb, 0, rs)? {
                    return Ok(true);
                }
            }
            Ok(false)
        } else {
            // the Hoeffding gap against zero grows with the count
            let bound = stats::hoeffding_bound(tb.approx, ts.approx, self.cfg.alpha);
            for &j in &big.by_count {
                let side = &big.entries[j].1;
                if side.approx / tb.approx < bound * (1.0 - SLACK) {
                    break;
                }
                if !is_matched(j) && self.context_differs(Some(side), None, tb, ts)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }

    fn fisher(&mut self, c1: u64, t1: u64, c2: u64, t2: u64) -> Result<bool> {
        if let Some(&d) = self.fisher_memo.get(&(c1, t1, c2, t2)) {
            return Ok(d);
        }
        let d = stats::fisher_differ(c1, t1, c2, t2, self.cfg.alpha)?;
        self.fisher_memo.insert((c1, t1, c2, t2), d);
        Ok(d)
    }

    /// [`compare_proportions`] on precomputed floats and rounded cells,
    /// redone exactly whenever float error could flip the decision.
    fn context_differs(
        &mut self,
        s1: Option<&Entry>,
        s2: Option<&Entry>,
        t1: Total,
        t2: Total,
    ) -> Result<bool> {
        let zero = Count::zero();
        let g = self.grammar;
        let exact = |cfg: &EquivalenceConfig| {
            let c1 = s1.map_or(&zero, |s| s.count(g));
            let c2 = s2.map_or(&zero, |s| s.count(g));
            compare_proportions(c1, t1.exact, c2, t2.exact, cfg).map(|o| o.differ)
        };
        let (x1, x2) = (s1.map_or(0.0, |s| s.approx), s2.map_or(0.0, |s| s.approx));
        let gap = libm::fabs(x1 / t1.approx - x2 / t2.approx);
        if t1.approx.min(t2.approx) < self.cfg.fisher_threshold {
            let cell = |s: Option<&Entry>| s.map_or(Some(0), |s| s.rounded);
            let (Some(c1), Some(n1), Some(c2), Some(n2)) =
                (cell(s1), t1.rounded, cell(s2), t2.rounded)
            else {
                return exact(&self.cfg);
            };
            let d = self.fisher(c1, n1, c2, n2)?;
            // equal proportions never differ, whatever the rounded table says
            if d && gap < 1e-12 {
                return exact(&self.cfg);
            }
            Ok(d)
        } else {
            let bound = stats::hoeffding_bound(t1.approx, t2.approx, self.cfg.alpha);
            if libm::fabs(gap - bound) <= SLACK * bound {
                return exact(&self.cfg);
            }
            Ok(gap >= bound)
        }
    }

    /// Whether the two non-terminals fill at least one common context.
    pub fn share_context(&mut self, a: NtId, b: NtId) -> Result<bool> {
        self.check_pair(a, b)?;
        let (ta, tb) = (self.contexts_of(a), self.contexts_of(b));
        let (small, big) = if ta.len() <= tb.len() {
            (ta, tb)
        } else {
            (tb, ta)
        };
        Ok(small
            .entries
            .iter()
            .zip(&small.hashes)
            .any(|((k, _), &h)| big.find_hashed(k, h).is_some()))
    }

    /// Distance used for clustering: `nt_dissimilarity` for pairs that share
    /// a context, `+inf` for pairs that never meet, and 0 when neither fills
    /// any gap.
    pub fn cluster_distance(&mut self, a: NtId, b: NtId) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        self.check_pair(a, b)?;
        if self.contexts_of(a).is_empty() && self.contexts_of(b).is_empty() {
            return Ok(0.0);
        }
        if !self.share_context(a, b)? {
            return Ok(f64::INFINITY);
        }
        self.nt_dissimilarity(a, b)
    }
}

pub fn enumerate_contexts(
    g: &Scfg,
    a: NtId,
    b: NtId,
    plan: Option<&MergePlan>,
) -> Result<Vec<ContextPair>> {
    Evaluator::new(g, plan, EquivalenceConfig::default()).enumerate_contexts(a, b)
}

pub fn nt_dissimilarity(g: &Scfg, a: NtId, b: NtId, plan: Option<&MergePlan>) -> Result<f64> {
    Evaluator::new(g, plan, EquivalenceConfig::default()).nt_dissimilarity(a, b)
}

pub fn equivalent(
    g: &Scfg,
    a: NtId,
    b: NtId,
    cfg: &EquivalenceConfig,
    plan: Option<&MergePlan>,
) -> Result<bool> {
    Evaluator::new(g, plan, *cfg).equivalent(a, b)
}
