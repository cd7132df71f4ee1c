//! Synthetic word-aligned corpora from a small template language.
//!
//! Noun phrases translate monotonically; main clauses keep SVO order and
//! subordinate clauses move the verb to the end of the source side, so the
//! alignments contain both monotone and reordered blocks.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use scfg_core::{AlignmentSet, Bitext, SentencePair};

const DETS: [(&str, &str); 2] = [("der", "the"), ("ein", "a")];
const ADJS: [(&str, &str); 4] = [
    ("alte", "old"),
    ("neue", "new"),
    ("kleine", "small"),
    ("rote", "red"),
];
const NOUNS: [(&str, &str); 6] = [
    ("Hund", "dog"),
    ("Mann", "man"),
    ("Ball", "ball"),
    ("Tisch", "table"),
    ("Baum", "tree"),
    ("Stuhl", "chair"),
];
const VERBS: [(&str, &str); 3] = [("sieht", "sees"), ("hat", "has"), ("mag", "likes")];

#[derive(Default)]
struct Builder {
    src: Vec<&'static str>,
    tgt: Vec<&'static str>,
    links: Vec<(u32, u32)>,
}

type Phrase = Vec<(&'static str, &'static str)>;

impl Builder {
    /// Appends word-for-word translated material.
    fn monotone(&mut self, words: &[(&'static str, &'static str)]) {
        for &(s, t) in words {
            self.links
                .push((self.src.len() as u32, self.tgt.len() as u32));
            self.src.push(s);
            self.tgt.push(t);
        }
    }

    fn pair(&self, id: usize) -> (SentencePair, AlignmentSet) {
        (
            SentencePair::from_text(id, &self.src.join(" "), &self.tgt.join(" ")).unwrap(),
            AlignmentSet::new(self.links.clone()).unwrap(),
        )
    }
}

fn noun_phrase(rng: &mut StdRng) -> Phrase {
    let mut np = vec![*DETS.choose(rng).unwrap()];
    if rng.gen_bool(0.4) {
        np.push(*ADJS.choose(rng).unwrap());
    }
    np.push(*NOUNS.choose(rng).unwrap());
    np
}

fn sentence(rng: &mut StdRng, id: usize) -> (SentencePair, AlignmentSet) {
    let mut b = Builder::default();
    match rng.gen_range(0..10) {
        0..=2 => b.monotone(&noun_phrase(rng)),
        3..=7 => {
            let subj = noun_phrase(rng);
            let obj = noun_phrase(rng);
            b.monotone(&subj);
            b.monotone(&[*VERBS.choose(rng).unwrap()]);
            b.monotone(&obj);
        }
        _ => {
            // weil S O V → because S V O
            let subj = noun_phrase(rng);
            let obj = noun_phrase(rng);
            let verb = *VERBS.choose(rng).unwrap();
            b.monotone(&[("weil", "because")]);
            b.monotone(&subj);
            let verb_tgt = b.tgt.len() as u32;
            b.tgt.push(verb.1);
            let obj_start = b.src.len() as u32;
            for (i, &(s, t)) in obj.iter().enumerate() {
                b.links
                    .push((obj_start + i as u32, verb_tgt + 1 + i as u32));
                b.src.push(s);
                b.tgt.push(t);
            }
            b.links.push((b.src.len() as u32, verb_tgt));
            b.src.push(verb.0);
        }
    }
    b.pair(id)
}

pub fn template_corpus(n: usize, seed: u64) -> Bitext {
    let mut rng = StdRng::seed_from_u64(seed);
    let (pairs, aligns) = (0..n).map(|id| sentence(&mut rng, id)).unzip();
    Bitext::new(pairs, aligns).unwrap()
}

pub struct CorpusFiles {
    pub src: PathBuf,
    pub tgt: PathBuf,
    pub align: PathBuf,
}

pub fn write_corpus(dir: &Path, bitext: &Bitext) -> CorpusFiles {
    let files = CorpusFiles {
        src: dir.join("corpus.src"),
        tgt: dir.join("corpus.tgt"),
        align: dir.join("corpus.align"),
    };
    scfg_forge::io::write_bitext(bitext, &files.src, &files.tgt, &files.align).unwrap();
    files
}

/// The two monotone pairs of the worked example.
pub fn toy_corpus() -> Bitext {
    Bitext::new(
        vec![
            SentencePair::from_text(0, "das neue Haus", "the new house").unwrap(),
            SentencePair::from_text(1, "das Haus", "the house").unwrap(),
        ],
        vec![AlignmentSet::monotone(3), AlignmentSet::monotone(2)],
    )
    .unwrap()
}
