//! Grammar extraction from a word-aligned bitext.
//!
//! The specialized extractor gives every distinct phrase pair its own
//! non-terminal. Each phrase pair contributes its lexical rule, and every
//! consistent phrase pair properly inside one of its occurrences can be
//! replaced by a gap filled with the inner pair's non-terminal. Rule counts
//! come from splitting `C(X)` equally among the productions of `X`.
//!
//! The baseline extractor produces the usual single-`X` hierarchical grammar
//! with the classic length, arity and adjacency restrictions.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use num_traits::Zero;

use crate::corpus::{Bitext, SentencePair};
use crate::error::{Error, Result};
use crate::grammar::{count_from, Count, NtId, Scfg, Symbol};
use crate::phrases::{
    full_span, phrase_inventory_with, sentence_span_pairs, PhraseInventory, PhrasePair, SpanPair,
};
use crate::vocab::TokenId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Maximum number of gaps per production; `1` reproduces single
    /// substitution, larger values iterate substitution.
    pub max_gaps: usize,
    pub forbid_adjacent_gaps: bool,
    pub allow_empty_alignment: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            max_gaps: 1,
            forbid_adjacent_gaps: false,
            allow_empty_alignment: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub grammar: Scfg,
    pub inventory: PhraseInventory,
    /// Sentence ids that produced no full-sentence phrase pair.
    pub skipped: Vec<usize>,
}

type PhraseKey = (Vec<TokenId>, Vec<TokenId>);

fn intern_pair(g: &mut Scfg, pair: &SentencePair) -> (Vec<TokenId>, Vec<TokenId>) {
    let vocab = g.vocab_mut();
    let src = pair.source.iter().map(|w| vocab.intern(w)).collect();
    let tgt = pair.target.iter().map(|w| vocab.intern(w)).collect();
    (src, tgt)
}

fn phrase_key(span: &SpanPair, src: &[TokenId], tgt: &[TokenId]) -> PhraseKey {
    (
        src[span.src_range()].to_vec(),
        tgt[span.tgt_range()].to_vec(),
    )
}

/// Right-hand sides of `outer` with each of `gaps` (pairwise disjoint, inside
/// `outer`) replaced by a slot. Slots are numbered in source order.
fn gapped_sides(
    outer: &SpanPair,
    gaps: &[SpanPair],
    src: &[TokenId],
    tgt: &[TokenId],
) -> (Vec<Symbol>, Vec<Symbol>) {
    let mut order: Vec<usize> = (0..gaps.len()).collect();
    order.sort_by_key(|&i| gaps[i].src.0);
    let mut slot_of = vec![0u8; gaps.len()];
    for (k, &i) in order.iter().enumerate() {
        slot_of[i] = k as u8 + 1;
    }
    let side = |range: core::ops::Range<usize>,
                toks: &[TokenId],
                span_of: &dyn Fn(&SpanPair) -> (u32, u32)| {
        let mut out = Vec::new();
        let mut pos = range.start;
        while pos < range.end {
            if let Some(i) = gaps.iter().position(|g| span_of(g).0 as usize == pos) {
                out.push(Symbol::Gap(slot_of[i]));
                pos = span_of(&gaps[i]).1 as usize;
            } else {
                out.push(Symbol::Terminal(toks[pos]));
                pos += 1;
            }
        }
        out
    };
    let s = side(outer.src_range(), src, &|g: &SpanPair| g.src);
    let t = side(outer.tgt_range(), tgt, &|g: &SpanPair| g.tgt);
    (s, t)
}

fn has_adjacent_gaps(side: &[Symbol]) -> bool {
    side.windows(2)
        .any(|w| matches!(w, [Symbol::Gap(_), Symbol::Gap(_)]))
}

/// Calls `f` with every set of 1..=`max_gaps` pairwise disjoint spans taken
/// from `inner` (in index order).
fn for_each_gap_set(inner: &[SpanPair], max_gaps: usize, f: &mut dyn FnMut(&[SpanPair])) {
    fn rec(
        inner: &[SpanPair],
        start: usize,
        max_gaps: usize,
        chosen: &mut Vec<SpanPair>,
        f: &mut dyn FnMut(&[SpanPair]),
    ) {
        for i in start..inner.len() {
            let cand = inner[i];
            if chosen.iter().all(|c| c.disjoint(&cand)) {
                chosen.push(cand);
                f(chosen);
                if chosen.len() < max_gaps {
                    rec(inner, i + 1, max_gaps, chosen, f);
                }
                chosen.pop();
            }
        }
    }
    if max_gaps > 0 {
        rec(inner, 0, max_gaps, &mut Vec::new(), f);
    }
}

/// Builds the specialized grammar and distributes counts.
pub fn extract_specialized(bitext: &Bitext, opts: &ExtractOptions) -> Result<Extraction> {
    let mut g = Scfg::new();
    let mut ids: HashMap<PhraseKey, NtId> = HashMap::new();
    let mut skipped = Vec::new();

    let mut sentences = Vec::with_capacity(bitext.len());
    for (pair, align) in bitext.iter() {
        let spans = sentence_span_pairs(pair, align, None, opts.allow_empty_alignment);
        let (src, tgt) = intern_pair(&mut g, pair);
        if !spans.contains(&full_span(pair)) {
            skipped.push(pair.id);
            continue;
        }
        for span in &spans {
            let key = phrase_key(span, &src, &tgt);
            if !ids.contains_key(&key) {
                let id = g.add_plain(Some(key.clone()));
                ids.insert(key, id);
            }
        }
        sentences.push((pair, spans, src, tgt));
    }

    let zero = Count::zero();
    for (pair, spans, src, tgt) in &sentences {
        for outer in spans {
            let left = ids[&phrase_key(outer, src, tgt)];
            let (u, v) = phrase_key(outer, src, tgt);
            g.add_production(
                left,
                u.into_iter().map(Symbol::Terminal).collect(),
                v.into_iter().map(Symbol::Terminal).collect(),
                vec![],
                zero.clone(),
            )?;
            let inner: Vec<SpanPair> = spans
                .iter()
                .filter(|s| *s != outer && outer.contains(s))
                .copied()
                .collect();
            let mut pending: Vec<(Vec<Symbol>, Vec<Symbol>, Vec<NtId>)> = Vec::new();
            for_each_gap_set(&inner, opts.max_gaps, &mut |gaps| {
                let (s, t) = gapped_sides(outer, gaps, src, tgt);
                if !s.iter().any(|x| matches!(x, Symbol::Terminal(_))) {
                    return;
                }
                if opts.forbid_adjacent_gaps && has_adjacent_gaps(&s) {
                    return;
                }
                let mut by_slot: Vec<&SpanPair> = gaps.iter().collect();
                by_slot.sort_by_key(|g| g.src.0);
                let coupling = by_slot
                    .iter()
                    .map(|sp| ids[&phrase_key(sp, src, tgt)])
                    .collect();
                pending.push((s, t, coupling));
            });
            for (s, t, coupling) in pending {
                g.add_production(left, s, t, coupling, zero.clone())?;
            }
        }
        let root = ids[&phrase_key(&full_span(pair), src, tgt)];
        let glue = (vec![Symbol::Gap(1)], vec![Symbol::Gap(1)], vec![root]);
        if g.find_production(NtId::INITIAL, &glue.0, &glue.1, &glue.2)
            .is_none()
        {
            g.add_production(NtId::INITIAL, glue.0, glue.1, glue.2, count_from(1))?;
        }
    }

    let inventory = phrase_inventory_with(bitext, None, opts.allow_empty_alignment);
    distribute_counts(&mut g, &inventory)?;
    Ok(Extraction {
        grammar: g,
        inventory,
        skipped,
    })
}

/// Sets `C(X)` from the phrase inventory and shares it equally among the
/// productions of `X`. `C(I)` becomes the total glue count.
pub fn distribute_counts(g: &mut Scfg, inventory: &PhraseInventory) -> Result<()> {
    let ids: Vec<NtId> = g.plain_ids().collect();
    for id in ids {
        let (u, v) = g
            .render_phrase(id)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("{id} has no phrase pair")))?;
        let key = PhrasePair {
            source: split(&u),
            target: split(&v),
        };
        let occurrences = *inventory.get(&key).ok_or_else(|| {
            Error::InvalidParameter(alloc::format!("phrase pair of {id} missing from inventory"))
        })?;
        let prods: Vec<_> = g.productions_of(id).collect();
        if prods.is_empty() {
            return Err(Error::NoProductions(id));
        }
        let total = count_from(occurrences);
        let share = &total / count_from(prods.len() as u64);
        for p in prods {
            g.production_mut(p).count = share.clone();
        }
        g.set_count(id, total)?;
    }
    let glue_total = g
        .productions_of(NtId::INITIAL)
        .map(|p| g.production(p).count.clone())
        .fold(Count::zero(), |a, b| a + b);
    g.set_count(NtId::INITIAL, glue_total)
}

fn split(s: &str) -> Vec<String> {
    s.split(' ').map(String::from).collect()
}

/// Restrictions of the single-non-terminal baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineLimits {
    pub max_phrase_len: usize,
    pub max_gaps: usize,
    pub max_src_symbols: usize,
}

impl Default for BaselineLimits {
    fn default() -> Self {
        Self {
            max_phrase_len: 10,
            max_gaps: 2,
            max_src_symbols: 5,
        }
    }
}

/// Whether a source side passes the baseline's shape restrictions.
pub fn baseline_admits(src: &[Symbol], limits: &BaselineLimits) -> bool {
    let gaps = src.iter().filter(|s| matches!(s, Symbol::Gap(_))).count();
    src.len() <= limits.max_src_symbols
        && gaps <= limits.max_gaps
        && gaps < src.len()
        && !has_adjacent_gaps(src)
}

/// Single-`X` grammar with glue rules `I -> (X, X)` and `I -> (I X, I X)`.
/// Rule counts are extraction-event counts.
pub fn extract_chiang_baseline(bitext: &Bitext, limits: &BaselineLimits) -> Result<Scfg> {
    let mut g = Scfg::new();
    let x = g.add_plain(None);
    let one = count_from(1);
    for (pair, align) in bitext.iter() {
        let spans = sentence_span_pairs(pair, align, Some(limits.max_phrase_len), false);
        let (src, tgt) = intern_pair(&mut g, pair);
        for outer in &spans {
            let (u, v) = phrase_key(outer, &src, &tgt);
            let lexical: Vec<Symbol> = u.into_iter().map(Symbol::Terminal).collect();
            if baseline_admits(&lexical, limits) {
                g.add_production(
                    x,
                    lexical,
                    v.into_iter().map(Symbol::Terminal).collect(),
                    vec![],
                    one.clone(),
                )?;
            }
            let inner: Vec<SpanPair> = spans
                .iter()
                .filter(|s| *s != outer && outer.contains(s))
                .copied()
                .collect();
            let mut pending = Vec::new();
            for_each_gap_set(&inner, limits.max_gaps, &mut |gaps| {
                let (s, t) = gapped_sides(outer, gaps, &src, &tgt);
                if baseline_admits(&s, limits) {
                    pending.push((s, t, vec![x; gaps.len()]));
                }
            });
            for (s, t, coupling) in pending {
                g.add_production(x, s, t, coupling, one.clone())?;
            }
        }
    }
    g.add_production(
        NtId::INITIAL,
        vec![Symbol::Gap(1)],
        vec![Symbol::Gap(1)],
        vec![x],
        one.clone(),
    )?;
    g.add_production(
        NtId::INITIAL,
        vec![Symbol::Gap(1), Symbol::Gap(2)],
        vec![Symbol::Gap(1), Symbol::Gap(2)],
        vec![NtId::INITIAL, x],
        one,
    )?;
    g.recount_nonterminals();
    Ok(g)
}
