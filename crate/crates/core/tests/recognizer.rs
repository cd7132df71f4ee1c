//! The recognizer against an exhaustive enumeration of each grammar's
//! bounded language.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use scfg_core::grammar::count_from;
use scfg_core::{derives, DerivationTree, NtId, Scfg, SentencePair, Symbol, TokenId};

const MAX_LEN: usize = 5;
const WORDS: [&str; 2] = ["a", "b"];

type Yield = (Vec<TokenId>, Vec<TokenId>);

/// One random production: left index, source shape, target order of the
/// gaps, target terminals and the fillers.
#[derive(Debug, Clone)]
struct RuleSpec {
    left: usize,
    src: Vec<Option<usize>>,
    tgt_terms: Vec<usize>,
    swap: bool,
    fillers: Vec<usize>,
}

fn rule_spec(n_plain: usize) -> impl Strategy<Value = RuleSpec> {
    (
        0..=n_plain,
        prop::collection::vec(prop::option::weighted(0.7, 0..2usize), 1..=3),
        prop::collection::vec(0..2usize, 0..=2),
        any::<bool>(),
        prop::collection::vec(1..=n_plain, 2),
    )
        .prop_map(|(left, src, tgt_terms, swap, fillers)| RuleSpec {
            left,
            src,
            tgt_terms,
            swap,
            fillers,
        })
}

fn build(n_plain: usize, specs: &[RuleSpec]) -> Scfg {
    let mut g = Scfg::new();
    let ids: Vec<NtId> = std::iter::once(g.initial())
        .chain((0..n_plain).map(|_| g.add_plain(None)))
        .collect();
    let toks: Vec<TokenId> = WORDS.iter().map(|w| g.vocab_mut().intern(w)).collect();
    for spec in specs {
        let mut src = Vec::new();
        let mut gaps = 0u8;
        for sym in &spec.src {
            match sym {
                Some(t) => src.push(Symbol::Terminal(toks[*t])),
                // at most two gaps
                None if gaps < 2 => {
                    gaps += 1;
                    src.push(Symbol::Gap(gaps));
                }
                None => {}
            }
        }
        if src.is_empty() {
            continue;
        }
        let mut tgt: Vec<Symbol> = spec
            .tgt_terms
            .iter()
            .map(|&t| Symbol::Terminal(toks[t]))
            .collect();
        let mut slots: Vec<u8> = (1..=gaps).collect();
        if spec.swap {
            slots.reverse();
        }
        for (k, s) in slots.into_iter().enumerate() {
            tgt.insert((k * 2).min(tgt.len()), Symbol::Gap(s));
        }
        if tgt.is_empty() {
            continue;
        }
        let coupling = spec.fillers[..gaps as usize]
            .iter()
            .map(|&f| ids[f])
            .collect();
        g.add_production(ids[spec.left], src, tgt, coupling, count_from(1))
            .unwrap();
    }
    g.recount_nonterminals();
    g
}

/// Every pair of length at most `MAX_LEN` per side derivable from each
/// non-terminal, by fixed-point iteration.
fn bounded_language(g: &Scfg) -> BTreeMap<NtId, BTreeSet<Yield>> {
    let mut lang: BTreeMap<NtId, BTreeSet<Yield>> = g
        .nonterminals()
        .map(|nt| (nt.id, BTreeSet::new()))
        .collect();
    loop {
        let mut changed = false;
        for (_, p) in g.productions() {
            let mut partial: Vec<Vec<Yield>> = vec![vec![]];
            for &f in &p.coupling {
                let mut next = Vec::new();
                for prefix in &partial {
                    for y in &lang[&f] {
                        let mut v = prefix.clone();
                        v.push(y.clone());
                        next.push(v);
                    }
                }
                partial = next;
            }
            for fills in partial {
                let expand = |side: &[Symbol], pick: fn(&Yield) -> &Vec<TokenId>| {
                    let mut out = Vec::new();
                    for s in side {
                        match *s {
                            Symbol::Terminal(t) => out.push(t),
                            Symbol::Gap(k) => out.extend(pick(&fills[k as usize - 1])),
                        }
                    }
                    out
                };
                let s = expand(&p.src, |y| &y.0);
                let t = expand(&p.tgt, |y| &y.1);
                if s.len() <= MAX_LEN
                    && t.len() <= MAX_LEN
                    && lang.get_mut(&p.left).unwrap().insert((s, t))
                {
                    changed = true;
                }
            }
        }
        if !changed {
            return lang;
        }
    }
}

fn tree_yield(g: &Scfg, tree: &DerivationTree) -> Yield {
    let p = g.production(tree.production);
    let kids: Vec<Yield> = tree.children.iter().map(|c| tree_yield(g, c)).collect();
    let expand = |side: &[Symbol], pick: fn(&Yield) -> &Vec<TokenId>| {
        let mut out = Vec::new();
        for s in side {
            match *s {
                Symbol::Terminal(t) => out.push(t),
                Symbol::Gap(k) => out.extend(pick(&kids[k as usize - 1])),
            }
        }
        out
    };
    (expand(&p.src, |y| &y.0), expand(&p.tgt, |y| &y.1))
}

fn all_strings(max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|s| (0..WORDS.len()).map(move |w| [s.clone(), vec![w]].concat()))
            .collect();
        out.extend(layer.clone());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn recognizer_agrees_with_enumeration(
        specs in (1usize..=3).prop_flat_map(|n| (Just(n), prop::collection::vec(rule_spec(n), 2..=12)))
    ) {
        let (n_plain, specs) = specs;
        let g = build(n_plain, &specs);
        let lang = bounded_language(&g);
        let root = &lang[&g.initial()];
        let strings = all_strings(4);
        let text = |s: &[usize]| s.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ");
        for s in &strings {
            for t in &strings {
                let pair = SentencePair::from_text(0, &text(s), &text(t)).unwrap();
                let ids = |v: &[usize]| v.iter().map(|&w| g.vocab().get(WORDS[w]).unwrap()).collect::<Vec<_>>();
                let want = root.contains(&(ids(s), ids(t)));
                let got = derives(&g, &pair).unwrap();
                prop_assert_eq!(got.is_some(), want, "{} / {}", text(s), text(t));
                if let Some(tree) = got {
                    prop_assert_eq!(tree_yield(&g, &tree), (ids(s), ids(t)));
                    prop_assert_eq!(g.production(tree.production).left, g.initial());
                }
            }
        }
    }
}
