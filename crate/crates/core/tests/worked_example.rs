//! The two-sentence German-English example: extraction, equivalence
//! arithmetic and merging on its grammar.

use num_traits::Zero;
use scfg_core::grammar::{format_count, ratio};
use scfg_core::merge::{init_fringe, FringeStep};
use scfg_core::{
    blue_fringe_run, coverage_report, derives, extract_specialized, AlignmentSet, Bitext,
    BlueFringeConfig, EquivalenceConfig, Evaluator, ExtractOptions, MergePlan, NtId, Scfg,
    SentencePair,
};

fn toy_bitext() -> Bitext {
    let pairs = vec![
        SentencePair::from_text(0, "das neue Haus", "the new house").unwrap(),
        SentencePair::from_text(1, "das Haus", "the house").unwrap(),
    ];
    Bitext::new(
        pairs,
        vec![AlignmentSet::monotone(3), AlignmentSet::monotone(2)],
    )
    .unwrap()
}

fn toy_grammar() -> Scfg {
    extract_specialized(&toy_bitext(), &ExtractOptions::default())
        .unwrap()
        .grammar
}

fn x(n: u32) -> NtId {
    NtId(n)
}

fn rule_strings(g: &Scfg) -> Vec<String> {
    let mut v: Vec<String> = g
        .productions()
        .map(|(_, p)| {
            format!(
                "{} -> ({}, {}) {}",
                p.left,
                g.render_side(p, &p.src),
                g.render_side(p, &p.tgt),
                p.count
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn golden_productions_and_counts() {
    let g = toy_grammar();
    // transcribed row by row
    let mut expected = vec![
        "I -> ([X1,1], [X1,1]) 1",
        "I -> ([X7,1], [X7,1]) 1",
        "X1 -> (das neue Haus, the new house) 1/6",
        "X2 -> (das neue, the new) 1/3",
        "X3 -> (neue Haus, new house) 1/3",
        "X4 -> (das, the) 2",
        "X5 -> (neue, new) 1",
        "X6 -> (Haus, house) 2",
        "X7 -> (das Haus, the house) 1/3",
        "X1 -> ([X2,1] Haus, [X2,1] house) 1/6",
        "X1 -> (das [X3,1], the [X3,1]) 1/6",
        "X1 -> ([X4,1] neue Haus, [X4,1] new house) 1/6",
        "X1 -> (das [X5,1] Haus, the [X5,1] house) 1/6",
        "X1 -> (das neue [X6,1], the new [X6,1]) 1/6",
        "X2 -> ([X4,1] neue, [X4,1] new) 1/3",
        "X2 -> (das [X5,1], the [X5,1]) 1/3",
        "X3 -> ([X5,1] Haus, [X5,1] house) 1/3",
        "X3 -> (neue [X6,1], new [X6,1]) 1/3",
        "X7 -> ([X4,1] Haus, [X4,1] house) 1/3",
        "X7 -> (das [X6,1], the [X6,1]) 1/3",
    ];
    expected.sort_unstable();
    assert_eq!(rule_strings(&g), expected);

    assert_eq!(g.num_nonterminals(), 8);
    assert_eq!(g.num_productions(), 20);
    let c: Vec<_> = (1..=7).map(|i| g.count(x(i)).clone()).collect();
    assert_eq!(
        c,
        [
            ratio(1, 1),
            ratio(1, 1),
            ratio(1, 1),
            ratio(2, 1),
            ratio(1, 1),
            ratio(2, 1),
            ratio(1, 1)
        ]
    );
    assert_eq!(*g.count(g.initial()), ratio(2, 1));
    g.check_normalization().unwrap();
}

#[test]
fn phrase_ids_follow_the_table() {
    let g = toy_grammar();
    let phrase = |i| g.render_phrase(x(i)).unwrap();
    assert_eq!(phrase(1), ("das neue Haus".into(), "the new house".into()));
    assert_eq!(phrase(4), ("das".into(), "the".into()));
    assert_eq!(phrase(7), ("das Haus".into(), "the house".into()));
}

#[test]
fn probabilities_and_formatting() {
    let g = toy_grammar().estimate_probabilities().unwrap();
    for (_, p) in g.productions() {
        if p.left == x(4) {
            assert_eq!(p.prob.clone().unwrap(), ratio(1, 1));
        }
        if p.left == x(2) {
            assert_eq!(p.prob.clone().unwrap(), ratio(1, 3));
        }
    }
    assert_eq!(format_count(&ratio(1, 6)), "0.1666666667");
    assert_eq!(format_count(&ratio(2, 1)), "2");
}

#[test]
fn worked_equivalence_example() {
    let g = toy_grammar();
    let (x3, x6) = (x(3), x(6));
    assert_eq!(*g.count(x3), ratio(1, 1));
    assert_eq!(*g.count(x6), ratio(2, 1));

    let mut ev = Evaluator::new(&g, None, EquivalenceConfig::default());
    let contexts = ev.enumerate_contexts(x3, x6).unwrap();
    let rendered: Vec<(String, bool)> = contexts
        .iter()
        .map(|c| (c.key.render(&g), c.is_matched()))
        .collect();
    assert_eq!(contexts.len(), 3, "{rendered:?}");

    let matched: Vec<_> = contexts.iter().filter(|c| c.is_matched()).collect();
    assert_eq!(matched.len(), 1);
    let m = matched[0];
    // (das X3, the X3) under X1 with 1/6, (das X6, the X6) under X7 with 1/3
    assert_eq!(m.count_a(), ratio(1, 6));
    assert_eq!(m.count_b(), ratio(1, 3));
    assert_eq!(m.count_a() / g.count(x3), ratio(1, 6));
    assert_eq!(m.count_b() / g.count(x6), ratio(1, 6));
    let d =
        scfg_core::stats::dissimilarity_exact(&m.count_a(), g.count(x3), &m.count_b(), g.count(x6));
    assert!(d.is_zero());

    // the two X6-only contexts are compared against zero
    let unmatched: Vec<_> = contexts.iter().filter(|c| !c.is_matched()).collect();
    assert!(unmatched
        .iter()
        .all(|c| c.left_a.is_none() && c.count_a().is_zero()));
    let mut counts: Vec<_> = unmatched.iter().map(|c| c.count_b()).collect();
    counts.sort();
    assert_eq!(counts, [ratio(1, 6), ratio(1, 3)]);

    // max D: (neue X6, new X6) gives 2/3 * (1/6)^2 = 1/54; X1 vs X7 only meet in glue
    let dis = ev.nt_dissimilarity(x3, x6).unwrap();
    assert!((dis - 1.0 / 54.0).abs() < 1e-15, "{dis}");

    for alpha in [0.05, 0.01] {
        let cfg = EquivalenceConfig {
            alpha,
            ..Default::default()
        };
        assert!(Evaluator::new(&g, None, cfg).equivalent(x3, x6).unwrap());
        let strict = EquivalenceConfig {
            strict_recursion: true,
            ..cfg
        };
        assert!(Evaluator::new(&g, None, strict).equivalent(x3, x6).unwrap());
    }
}

#[test]
fn enclosing_lefts_only_meet_in_glue() {
    let g = toy_grammar();
    let mut ev = Evaluator::new(&g, None, EquivalenceConfig::default());
    let contexts = ev.enumerate_contexts(x(1), x(7)).unwrap();
    assert_eq!(contexts.len(), 1);
    assert!(contexts[0].is_matched());
    assert_eq!(ev.nt_dissimilarity(x(1), x(7)).unwrap(), 0.0);
    assert!(ev.equivalent(x(1), x(7)).unwrap());
}

#[test]
fn fringe_colouring() {
    let g = toy_grammar();
    let s = init_fringe(&g);
    let ids = |set: &std::collections::BTreeSet<NtId>| set.iter().map(|i| i.0).collect::<Vec<_>>();
    assert_eq!(ids(&s.red), [4, 5, 6]);
    assert_eq!(ids(&s.blue), [2, 3, 7]);
    assert_eq!(ids(&s.white), [1]);
}

#[test]
fn blue_fringe_on_the_toy_grammar() {
    let g = toy_grammar();
    let run = blue_fringe_run(&g, &BlueFringeConfig::default()).unwrap();
    // two sentences never make a test significant, so every blue is merged;
    // equal scores fall back to the lowest red id
    let mut ev = Evaluator::new(&g, None, EquivalenceConfig::default());
    for step in &run.steps {
        if let FringeStep::Merge { red, blue } = *step {
            assert!(ev.equivalent(red, blue).unwrap());
        }
    }
    assert!(run.plan.same_class(x(1), x(7)), "{:?}", run.steps);
    assert!(run.plan.same_class(x(3), x(4)));
    assert!(!run.plan.same_class(x(5), x(6)));
    run.grammar.check_normalization().unwrap();
    let merged = g.apply_merge_plan(&run.plan).unwrap();
    assert_eq!(merged.num_nonterminals(), run.grammar.num_nonterminals());
    assert_eq!(
        coverage_report(&merged, &toy_bitext()).unwrap().fraction(),
        1.0
    );

    // with Hoeffding at a loose level the glue context of X7 sets it apart
    // from every lexical red, so it is promoted and X1 is merged into it
    let loose = BlueFringeConfig {
        equivalence: EquivalenceConfig {
            alpha: 0.999,
            fisher_threshold: 0.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let strict_run = blue_fringe_run(&g, &loose).unwrap();
    assert_eq!(strict_run.steps[0], FringeStep::Promote(x(7)));
    assert!(strict_run.steps.contains(&FringeStep::Merge {
        red: x(7),
        blue: x(1)
    }));
    assert!(strict_run.plan.num_classes() > run.plan.num_classes());
}

#[test]
fn merging_x3_into_x6() {
    let g = toy_grammar();
    let mut plan = MergePlan::identity(g.plain_ids());
    plan.union(x(6), x(3));
    let m = g.apply_merge_plan(&plan).unwrap();
    assert_eq!(*m.count(x(6)), ratio(3, 1));
    assert!(!m.contains(x(3)));
    assert_eq!(m.num_nonterminals(), 7);
    let rules = rule_strings(&m);
    assert!(
        rules.contains(&"X6 -> (neue [X6,1], new [X6,1]) 1/3".to_string()),
        "{rules:#?}"
    );
    assert!(rules.contains(&"X1 -> (das [X6,1], the [X6,1]) 1/6".to_string()));
    assert!(m.productions().all(|(_, p)| !p.coupling.contains(&x(3))));
    m.check_normalization().unwrap();
}

#[test]
fn derivations() {
    let g = toy_grammar();
    let pair = SentencePair::from_text(0, "das neue Haus", "the new house").unwrap();
    let tree = derives(&g, &pair).unwrap().expect("derivable");
    assert_eq!(g.production(tree.production).left, g.initial());
    let bad = SentencePair::from_text(0, "neue das", "new the").unwrap();
    assert!(derives(&g, &bad).unwrap().is_none());
    assert_eq!(coverage_report(&g, &toy_bitext()).unwrap().fraction(), 1.0);
    assert_eq!(
        coverage_report(&Scfg::new(), &toy_bitext())
            .unwrap()
            .fraction(),
        0.0
    );
}
