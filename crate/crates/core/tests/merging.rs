//! Merge plans: conservation, derivability and the clustering search.

use num_traits::Zero;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use scfg_core::grammar::ratio;
use scfg_core::merge::{greedy_init, pam, pam_objective, Cost, DistanceMatrix};
use scfg_core::{
    blue_fringe_run, coverage_report, extract_specialized, kmedoids_run, merge_report,
    AlignmentSet, Bitext, BlueFringeConfig, Count, EquivalenceConfig, ExtractOptions, MergePlan,
    NtId, Scfg, SentencePair, Symbol,
};

fn plain_mass(g: &Scfg) -> Count {
    g.productions()
        .filter(|(_, p)| !p.left.is_initial())
        .fold(Count::zero(), |acc, (_, p)| acc + &p.count)
}

fn random_grammar(rng: &mut impl Rng) -> Scfg {
    let mut g = Scfg::new();
    let n = rng.gen_range(2..=8);
    let ids: Vec<NtId> = (0..n).map(|_| g.add_plain(None)).collect();
    let words: Vec<Symbol> = ["a", "b", "c"]
        .iter()
        .map(|w| Symbol::Terminal(g.vocab_mut().intern(w)))
        .collect();
    for _ in 0..rng.gen_range(1..=25) {
        let left = *ids.choose(rng).unwrap();
        let t = *words.choose(rng).unwrap();
        let count = ratio(rng.gen_range(1..=12), rng.gen_range(1..=7));
        match rng.gen_range(0..3) {
            0 => g.add_production(left, vec![t], vec![t], vec![], count),
            1 => g.add_production(
                left,
                vec![t, Symbol::Gap(1)],
                vec![Symbol::Gap(1), t],
                vec![*ids.choose(rng).unwrap()],
                count,
            ),
            _ => g.add_production(
                left,
                vec![Symbol::Gap(1), t, Symbol::Gap(2)],
                vec![Symbol::Gap(2), Symbol::Gap(1)],
                vec![*ids.choose(rng).unwrap(), *ids.choose(rng).unwrap()],
                count,
            ),
        }
        .unwrap();
    }
    let root = ids[0];
    g.add_production(
        g.initial(),
        vec![Symbol::Gap(1)],
        vec![Symbol::Gap(1)],
        vec![root],
        ratio(1, 1),
    )
    .unwrap();
    g.recount_nonterminals();
    g
}

fn random_plan(g: &Scfg, rng: &mut impl Rng) -> MergePlan {
    let ids: Vec<NtId> = g.plain_ids().collect();
    let mut plan = MergePlan::identity(ids.iter().copied());
    for _ in 0..rng.gen_range(0..ids.len()) {
        plan.union(*ids.choose(rng).unwrap(), *ids.choose(rng).unwrap());
    }
    plan
}

#[test]
fn merge_plans_conserve_count_mass() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let g = random_grammar(&mut rng);
        let plan = random_plan(&g, &mut rng);
        let merged = g.apply_merge_plan(&plan).unwrap();
        assert_eq!(plain_mass(&merged), plain_mass(&g));
        merged.check_normalization().unwrap();
        let report = merge_report(&plan, &g);
        assert_eq!(report.final_nonterminals, merged.num_nonterminals());
        if plan.is_identity() {
            assert_eq!(merged.num_nonterminals(), g.num_nonterminals());
        } else {
            assert!(merged.num_nonterminals() < g.num_nonterminals());
        }
    }
}

#[test]
fn total_merge_gives_a_single_symbol() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let g = random_grammar(&mut rng);
    let ids: Vec<NtId> = g.plain_ids().collect();
    let plan = MergePlan::from_classes([(ids[0], ids.clone())]).unwrap();
    let merged = g.apply_merge_plan(&plan).unwrap();
    assert_eq!(merged.num_nonterminals(), 2);
    assert_eq!(plain_mass(&merged), plain_mass(&g));
    assert!(merged
        .productions()
        .all(|(_, p)| p.coupling.iter().all(|&c| c == ids[0])));
}

#[test]
fn plan_errors() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2);
    let g = random_grammar(&mut rng);
    let bad = MergePlan::identity([NtId(99)]);
    assert!(g.apply_merge_plan(&bad).is_err());
    let initial = MergePlan::identity([g.initial()]);
    assert!(g.apply_merge_plan(&initial).is_err());
}

fn small_corpus(rng: &mut impl Rng, n: usize) -> Bitext {
    let nouns = ["Haus", "Buch", "Hund"];
    let nouns_en = ["house", "book", "dog"];
    let adjs = ["neue", "alte"];
    let adjs_en = ["new", "old"];
    let mut pairs = Vec::new();
    let mut aligns = Vec::new();
    for id in 0..n {
        let k = rng.gen_range(0..nouns.len());
        if rng.gen_bool(0.5) {
            let a = rng.gen_range(0..adjs.len());
            pairs.push(
                SentencePair::from_text(
                    id,
                    &format!("das {} {}", adjs[a], nouns[k]),
                    &format!("the {} {}", adjs_en[a], nouns_en[k]),
                )
                .unwrap(),
            );
            aligns.push(AlignmentSet::monotone(3));
        } else {
            pairs.push(
                SentencePair::from_text(
                    id,
                    &format!("das {}", nouns[k]),
                    &format!("the {}", nouns_en[k]),
                )
                .unwrap(),
            );
            aligns.push(AlignmentSet::monotone(2));
        }
    }
    Bitext::new(pairs, aligns).unwrap()
}

#[test]
fn merged_grammars_still_derive_the_corpus() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let text = small_corpus(&mut rng, 30);
    let g = extract_specialized(&text, &ExtractOptions::default())
        .unwrap()
        .grammar;
    assert_eq!(coverage_report(&g, &text).unwrap().fraction(), 1.0);
    for _ in 0..10 {
        let plan = random_plan(&g, &mut rng);
        let merged = g.apply_merge_plan(&plan).unwrap();
        assert_eq!(coverage_report(&merged, &text).unwrap().fraction(), 1.0);
    }
    let run = blue_fringe_run(&g, &BlueFringeConfig::default()).unwrap();
    assert_eq!(
        coverage_report(&run.grammar, &text).unwrap().fraction(),
        1.0
    );
    assert_eq!(plain_mass(&run.grammar), plain_mass(&g));

    let km = kmedoids_run(&g, 8, 3, 7, &EquivalenceConfig::default()).unwrap();
    assert_eq!(km.plan.num_classes(), 3);
    let merged = g.apply_merge_plan(&km.plan).unwrap();
    assert_eq!(merged.num_nonterminals(), 4);
    assert_eq!(coverage_report(&merged, &text).unwrap().fraction(), 1.0);
}

#[test]
fn runs_are_reproducible() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let text = small_corpus(&mut rng, 25);
    let g = extract_specialized(&text, &ExtractOptions::default())
        .unwrap()
        .grammar;
    let cfg = BlueFringeConfig::default();
    assert_eq!(
        blue_fringe_run(&g, &cfg).unwrap().steps,
        blue_fringe_run(&g, &cfg).unwrap().steps
    );
    let eq = EquivalenceConfig::default();
    let a = kmedoids_run(&g, 6, 2, 1, &eq).unwrap();
    let b = kmedoids_run(&g, 6, 2, 1, &eq).unwrap();
    assert_eq!(a.plan.classes(), b.plan.classes());
    assert!(kmedoids_run(&g, 6, 7, 1, &eq).is_err());
    assert!(kmedoids_run(&g, 6, 0, 1, &eq).is_err());
}

/// The best objective over every choice of `k` medoids.
fn exhaustive_optimum(d: &DistanceMatrix, k: usize) -> Cost {
    fn rec(
        d: &DistanceMatrix,
        k: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        best: &mut Option<Cost>,
    ) {
        if chosen.len() == k {
            let (c, _) = pam_objective(d, chosen);
            if best.is_none_or(|b| c < b) {
                *best = Some(c);
            }
            return;
        }
        for i in start..d.len() {
            chosen.push(i);
            rec(d, k, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = None;
    rec(d, k, 0, &mut Vec::new(), &mut best);
    best.unwrap()
}

fn random_matrix(rng: &mut impl Rng, n: usize, infinite_rate: f64) -> DistanceMatrix {
    DistanceMatrix::from_fn(n, |_, _| {
        if rng.gen_bool(infinite_rate) {
            f64::INFINITY
        } else {
            rng.gen_range(0.0..10.0)
        }
    })
}

#[test]
fn swap_search_usually_finds_the_global_optimum() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(21);
    let mut hits = 0;
    for _ in 0..100 {
        let n = rng.gen_range(3..=7);
        let k = rng.gen_range(1..n);
        let d = random_matrix(&mut rng, n, 0.1);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..5.0)).collect();
        let rank: Vec<usize> = (0..n).collect();
        let r = pam(&d, greedy_init(&d, k, &weights, &rank));
        let best = exhaustive_optimum(&d, k);
        assert!(!(r.cost < best));
        if r.cost.infinite == best.infinite && (r.cost.finite - best.finite).abs() < 1e-9 {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

proptest! {
    #[test]
    fn swap_objective_never_increases(seed in any::<u64>(), n in 2usize..=7, rate in 0.0f64..0.4) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let k = rng.gen_range(1..=n);
        let d = random_matrix(&mut rng, n, rate);
        let mut init: Vec<usize> = (0..n).collect();
        init.shuffle(&mut rng);
        init.truncate(k);
        let r = pam(&d, init);
        prop_assert!(r.trace.windows(2).all(|w| !(w[0] < w[1])));
        prop_assert_eq!(r.medoids.len(), k);
        if k == n {
            prop_assert_eq!(r.cost, Cost::default());
        }
    }
}
