//! Alignment-consistent bilingual phrase pairs.
//!
//! A span pair `([i1,i2), [j1,j2))` is consistent when no alignment link
//! connects a word inside the box to a word outside it and at least one link
//! lies inside. Unaligned words on the edges are absorbed in every possible
//! way, so a sentence with unaligned boundary words still yields its full
//! sentence pair.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::ops::Range;

use crate::corpus::{AlignmentSet, Bitext, SentencePair};

/// Positional occurrence of a phrase pair inside one sentence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanPair {
    pub sentence_id: usize,
    pub src: (u32, u32),
    pub tgt: (u32, u32),
}

impl SpanPair {
    pub fn src_range(&self) -> Range<usize> {
        self.src.0 as usize..self.src.1 as usize
    }

    pub fn tgt_range(&self) -> Range<usize> {
        self.tgt.0 as usize..self.tgt.1 as usize
    }

    pub fn src_len(&self) -> usize {
        (self.src.1 - self.src.0) as usize
    }

    pub fn tgt_len(&self) -> usize {
        (self.tgt.1 - self.tgt.0) as usize
    }

    /// `other` lies inside `self` on both sides.
    pub fn contains(&self, other: &SpanPair) -> bool {
        self.src.0 <= other.src.0
            && other.src.1 <= self.src.1
            && self.tgt.0 <= other.tgt.0
            && other.tgt.1 <= self.tgt.1
    }

    /// The two boxes share no source and no target position.
    pub fn disjoint(&self, other: &SpanPair) -> bool {
        (self.src.1 <= other.src.0 || other.src.1 <= self.src.0)
            && (self.tgt.1 <= other.tgt.0 || other.tgt.1 <= self.tgt.0)
    }

    /// Sort key used to number phrase pairs: longer source spans first, then
    /// left to right.
    pub fn extraction_key(&self) -> (Reverse<u32>, u32, u32, Reverse<u32>) {
        (
            Reverse(self.src.1 - self.src.0),
            self.src.0,
            self.tgt.0,
            Reverse(self.tgt.1 - self.tgt.0),
        )
    }

    pub fn phrase(&self, pair: &SentencePair) -> PhrasePair {
        PhrasePair {
            source: pair.source[self.src_range()].to_vec(),
            target: pair.target[self.tgt_range()].to_vec(),
        }
    }
}

/// A bilingual phrase pair `(u, v)` as token strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhrasePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

/// Corpus occurrence counts of every extracted phrase pair.
pub type PhraseInventory = BTreeMap<PhrasePair, u64>;

/// All consistent span pairs of one sentence, in extraction order.
///
/// With `max_len`, both spans are limited to that many tokens.
pub fn extract_span_pairs(
    pair: &SentencePair,
    align: &AlignmentSet,
    max_len: Option<usize>,
) -> Vec<SpanPair> {
    let n = pair.source.len();
    let m = pair.target.len();
    let limit = max_len.unwrap_or(usize::MAX);

    let mut by_src: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut by_tgt: Vec<Vec<u32>> = vec![Vec::new(); m];
    for &(s, t) in align.links() {
        by_src[s as usize].push(t);
        by_tgt[t as usize].push(s);
    }

    let mut out = Vec::new();
    for i1 in 0..n {
        let mut tmin = usize::MAX;
        let mut tmax = 0;
        for i2 in i1 + 1..=n.min(i1.saturating_add(limit)) {
            for &t in &by_src[i2 - 1] {
                tmin = tmin.min(t as usize);
                tmax = tmax.max(t as usize);
            }
            if tmin == usize::MAX {
                continue;
            }
            let closed =
                (tmin..=tmax).all(|j| by_tgt[j].iter().all(|&s| (i1..i2).contains(&(s as usize))));
            if !closed {
                continue;
            }
            let mut lo = tmin;
            while lo > 0 && by_tgt[lo - 1].is_empty() {
                lo -= 1;
            }
            let mut hi = tmax;
            while hi + 1 < m && by_tgt[hi + 1].is_empty() {
                hi += 1;
            }
            for j1 in lo..=tmin {
                for j2 in tmax..=hi {
                    if j2 + 1 - j1 > limit {
                        break;
                    }
                    out.push(SpanPair {
                        sentence_id: pair.id,
                        src: (i1 as u32, i2 as u32),
                        tgt: (j1 as u32, j2 as u32 + 1),
                    });
                }
            }
        }
    }
    out.sort_by_key(SpanPair::extraction_key);
    out
}

/// Span pairs of one sentence, treating an empty alignment as licensing only
/// the full sentence pair when `allow_empty_alignment` is set.
pub fn sentence_span_pairs(
    pair: &SentencePair,
    align: &AlignmentSet,
    max_len: Option<usize>,
    allow_empty_alignment: bool,
) -> Vec<SpanPair> {
    if align.is_empty() {
        let fits = max_len
            .map(|l| pair.source.len() <= l && pair.target.len() <= l)
            .unwrap_or(true);
        if allow_empty_alignment && fits {
            return vec![full_span(pair)];
        }
        return Vec::new();
    }
    extract_span_pairs(pair, align, max_len)
}

pub(crate) fn full_span(pair: &SentencePair) -> SpanPair {
    SpanPair {
        sentence_id: pair.id,
        src: (0, pair.source.len() as u32),
        tgt: (0, pair.target.len() as u32),
    }
}

/// Counts every phrase pair over the whole bitext.
pub fn phrase_inventory(bitext: &Bitext, max_len: Option<usize>) -> PhraseInventory {
    phrase_inventory_with(bitext, max_len, false)
}

pub fn phrase_inventory_with(
    bitext: &Bitext,
    max_len: Option<usize>,
    allow_empty_alignment: bool,
) -> PhraseInventory {
    let mut inventory = PhraseInventory::new();
    for (pair, align) in bitext.iter() {
        for span in sentence_span_pairs(pair, align, max_len, allow_empty_alignment) {
            *inventory.entry(span.phrase(pair)).or_insert(0) += 1;
        }
    }
    inventory
}
