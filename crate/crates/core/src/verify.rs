//! Synchronous recognizer: does a grammar derive a given sentence pair?
//!
//! Items are `(non-terminal, source span, target span)`. The recognizer
//! works top-down from `I` over the full pair and memoizes every item, so
//! the worst case is polynomial in the sentence lengths (roughly n^6 items
//! times the segmentations of each production). A budget on the number of
//! item expansions bounds the work.

use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use crate::corpus::{Bitext, SentencePair};
use crate::error::{Error, Result};
use crate::grammar::{NtId, ProdId, Scfg, Symbol};
use crate::vocab::TokenId;

type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTree {
    pub production: ProdId,
    pub src: Span,
    pub tgt: Span,
    /// Sub-derivations in slot order.
    pub children: Vec<DerivationTree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

impl DerivationTree {
    /// Bracketed rendering of one side, e.g. `(I (X1 das (X3 neue (X6 Haus))))`.
    pub fn render(&self, g: &Scfg, side: Side) -> String {
        let prod = g.production(self.production);
        let symbols = match side {
            Side::Source => &prod.src,
            Side::Target => &prod.tgt,
        };
        let mut out = alloc::format!("({}", prod.left);
        for sym in symbols {
            out.push(' ');
            match *sym {
                Symbol::Terminal(t) => out.push_str(g.vocab().word(t)),
                Symbol::Gap(k) => out.push_str(&self.children[k as usize - 1].render(g, side)),
            }
        }
        out.push(')');
        out
    }

    /// Number of production applications.
    pub fn size(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(DerivationTree::size)
            .sum::<usize>()
    }
}

type Item = (NtId, u16, u16, u16, u16);

#[derive(Debug, Clone)]
struct Hit {
    production: ProdId,
    children: Vec<(Span, Span)>,
}

pub struct Recognizer<'g> {
    grammar: &'g Scfg,
    budget: usize,
}

pub const DEFAULT_BUDGET: usize = 2_000_000;

impl<'g> Recognizer<'g> {
    pub fn new(grammar: &'g Scfg) -> Self {
        Self {
            grammar,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn derives(&self, pair: &SentencePair) -> Result<Option<DerivationTree>> {
        let vocab = self.grammar.vocab();
        let lookup = |side: &[String]| -> Option<Vec<TokenId>> {
            side.iter().map(|w| vocab.get(w)).collect()
        };
        let (Some(src), Some(tgt)) = (lookup(&pair.source), lookup(&pair.target)) else {
            return Ok(None);
        };
        if src.len() > u16::MAX as usize || tgt.len() > u16::MAX as usize {
            return Err(Error::InvalidParameter("sentence too long".into()));
        }
        let mut chart = Chart {
            g: self.grammar,
            src: &src,
            tgt: &tgt,
            memo: HashMap::new(),
            active: HashSet::new(),
            budget: self.budget,
            visited: 0,
        };
        let full_src = (0, src.len());
        let full_tgt = (0, tgt.len());
        if !chart.derive(NtId::INITIAL, full_src, full_tgt)? {
            return Ok(None);
        }
        Ok(Some(chart.tree(NtId::INITIAL, full_src, full_tgt)))
    }
}

struct Chart<'a> {
    g: &'a Scfg,
    src: &'a [TokenId],
    tgt: &'a [TokenId],
    memo: HashMap<Item, Option<Hit>>,
    active: HashSet<Item>,
    budget: usize,
    visited: usize,
}

fn item(nt: NtId, s: Span, t: Span) -> Item {
    (nt, s.0 as u16, s.1 as u16, t.0 as u16, t.1 as u16)
}

/// All ways to lay `symbols` over `tokens[span]`: terminals must match, each
/// gap covers at least one token. Each result lists the span of every slot.
fn segmentations(
    symbols: &[Symbol],
    tokens: &[TokenId],
    span: Span,
    arity: usize,
) -> Vec<Vec<Span>> {
    fn rec(
        symbols: &[Symbol],
        tokens: &[TokenId],
        pos: usize,
        end: usize,
        current: &mut Vec<Span>,
        out: &mut Vec<Vec<Span>>,
    ) {
        let Some((first, rest)) = symbols.split_first() else {
            if pos == end {
                out.push(current.clone());
            }
            return;
        };
        // every remaining symbol needs at least one token
        if end - pos < symbols.len() {
            return;
        }
        match *first {
            Symbol::Terminal(t) => {
                if tokens[pos] == t {
                    rec(rest, tokens, pos + 1, end, current, out);
                }
            }
            Symbol::Gap(k) => {
                let max_end = end - rest.len();
                for stop in pos + 1..=max_end {
                    current[k as usize - 1] = (pos, stop);
                    rec(rest, tokens, stop, end, current, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    let mut current = alloc::vec![(0, 0); arity];
    rec(symbols, tokens, span.0, span.1, &mut current, &mut out);
    out
}

impl Chart<'_> {
    fn derive(&mut self, nt: NtId, s: Span, t: Span) -> Result<bool> {
        let key = item(nt, s, t);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.is_some());
        }
        if !self.active.insert(key) {
            return Ok(false);
        }
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::BudgetExceeded(self.budget));
        }
        let found = self.search(nt, s, t);
        self.active.remove(&key);
        let found = found?;
        let ok = found.is_some();
        self.memo.insert(key, found);
        Ok(ok)
    }

    fn search(&mut self, nt: NtId, s: Span, t: Span) -> Result<Option<Hit>> {
        let prods: Vec<ProdId> = self.g.productions_of(nt).collect();
        for pid in prods {
            let prod = self.g.production(pid);
            if prod.src.len() > s.1 - s.0 || prod.tgt.len() > t.1 - t.0 {
                continue;
            }
            let src_segs = segmentations(&prod.src, self.src, s, prod.arity());
            if src_segs.is_empty() {
                continue;
            }
            let tgt_segs = segmentations(&prod.tgt, self.tgt, t, prod.arity());
            let coupling = prod.coupling.clone();
            for ss in &src_segs {
                'tgt: for ts in &tgt_segs {
                    for (k, &filler) in coupling.iter().enumerate() {
                        if !self.derive(filler, ss[k], ts[k])? {
                            continue 'tgt;
                        }
                    }
                    return Ok(Some(Hit {
                        production: pid,
                        children: ss.iter().copied().zip(ts.iter().copied()).collect(),
                    }));
                }
            }
        }
        Ok(None)
    }

    fn tree(&self, nt: NtId, s: Span, t: Span) -> DerivationTree {
        let hit = self.memo[&item(nt, s, t)].as_ref().expect("derivable item");
        let prod = self.g.production(hit.production);
        DerivationTree {
            production: hit.production,
            src: s,
            tgt: t,
            children: hit
                .children
                .iter()
                .zip(&prod.coupling)
                .map(|(&(cs, ct), &filler)| self.tree(filler, cs, ct))
                .collect(),
        }
    }
}

pub fn derives(g: &Scfg, pair: &SentencePair) -> Result<Option<DerivationTree>> {
    Recognizer::new(g).derives(pair)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub derivable: usize,
    pub total: usize,
    /// Ids of the pairs without a derivation.
    pub failing: Vec<usize>,
}

impl Coverage {
    /// Fraction of derivable pairs; an empty corpus counts as fully covered.
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.derivable as f64 / self.total as f64
        }
    }
}

pub fn coverage_report(g: &Scfg, bitext: &Bitext) -> Result<Coverage> {
    let rec = Recognizer::new(g);
    let mut failing = Vec::new();
    for pair in bitext.pairs() {
        if rec.derives(pair)?.is_none() {
            failing.push(pair.id);
        }
    }
    Ok(Coverage {
        derivable: bitext.len() - failing.len(),
        total: bitext.len(),
        failing,
    })
}
