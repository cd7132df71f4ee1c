//! Extract → merge → score → export → verify, with a JSON manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use scfg_core::grammar::format_exact;
use scfg_core::{
    blue_fringe, extract_chiang_baseline, extract_specialized, kmedoids_run, merge_report,
    BaselineLimits, Bitext, Coverage, MergePlan, Recognizer, Scfg, SentencePair, UnknownPolicy,
};

use crate::config::{Config, ExtractConfig, InputConfig, MergeConfig, Method, Mode};
use crate::formats;
use crate::io;

pub const RULES_FILE: &str = "rules.txt";
pub const GRAMMAR_FILE: &str = "grammar.dump";
pub const PLAN_FILE: &str = "plan.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads the corpus named by `input`, applying the class map and length
/// filter when configured.
pub fn load_corpus(input: &InputConfig) -> Result<Bitext> {
    let mut bitext = io::read_bitext(&input.src, &input.tgt, &input.align)?;
    if let Some(path) = &input.classes {
        let classes = io::read_class_map(path, UnknownPolicy::reserved())?;
        bitext = bitext
            .apply_classes(&classes)
            .with_context(|| format!("applying classes from {}", path.display()))?;
    }
    if let Some(max_len) = input.max_len {
        bitext = bitext.filter_by_length(max_len)?;
    }
    Ok(bitext)
}

pub struct Extracted {
    pub grammar: Scfg,
    /// Ids of pairs that yielded no full-sentence phrase pair.
    pub skipped: Vec<usize>,
}

pub fn extract(bitext: &Bitext, cfg: &ExtractConfig) -> Result<Extracted> {
    Ok(match cfg.mode {
        Mode::Specialized => {
            let ex = extract_specialized(bitext, &cfg.options())?;
            for id in &ex.skipped {
                log::warn!("sentence pair {id} has no full-sentence phrase pair; skipped");
            }
            Extracted {
                grammar: ex.grammar,
                skipped: ex.skipped,
            }
        }
        Mode::Baseline => Extracted {
            grammar: extract_chiang_baseline(bitext, &BaselineLimits::default())?,
            skipped: Vec::new(),
        },
    })
}

pub fn merge(g: &Scfg, cfg: &MergeConfig) -> Result<Option<MergePlan>> {
    Ok(match cfg.method {
        Method::None => None,
        Method::BlueFringe => Some(blue_fringe(g, &cfg.blue_fringe())?),
        Method::Kmedoids => {
            Some(kmedoids_run(g, cfg.top, cfg.k, cfg.seed, &cfg.equivalence())?.plan)
        }
    })
}

/// Coverage of `pairs`, split over `threads` workers. The result does not
/// depend on the thread count.
pub fn coverage(g: &Scfg, pairs: &[SentencePair], threads: usize) -> scfg_core::Result<Coverage> {
    let chunk = pairs.len().div_ceil(threads.max(1)).max(1);
    let results: Vec<scfg_core::Result<Vec<usize>>> = thread::scope(|s| {
        let handles: Vec<_> = pairs
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    let rec = Recognizer::new(g);
                    let mut failing = Vec::new();
                    for pair in part {
                        if rec.derives(pair)?.is_none() {
                            failing.push(pair.id);
                        }
                    }
                    Ok(failing)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut failing = Vec::new();
    for r in results {
        failing.extend(r?);
    }
    Ok(Coverage {
        derivable: pairs.len() - failing.len(),
        total: pairs.len(),
        failing,
    })
}

/// Pairs that extraction kept, for the derivability check.
pub fn kept_pairs(bitext: &Bitext, skipped: &[usize]) -> Vec<SentencePair> {
    bitext
        .pairs()
        .iter()
        .filter(|p| skipped.binary_search(&p.id).is_err())
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GrammarSummary {
    pub nonterminals: usize,
    pub productions: usize,
    pub count_mass: String,
    pub arity_histogram: BTreeMap<usize, usize>,
}

impl GrammarSummary {
    pub fn of(g: &Scfg) -> Self {
        let s = g.stats();
        Self {
            nonterminals: s.nonterminals,
            productions: s.productions,
            count_mass: format_exact(&s.count_mass),
            arity_histogram: s.arity_histogram,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MergeSummary {
    pub classes: usize,
    pub final_nonterminals: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageSummary {
    pub derivable: usize,
    pub total: usize,
    pub fraction: f64,
    pub failing: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub parameters: Config,
    pub pairs: usize,
    pub skipped: Vec<usize>,
    pub extracted: GrammarSummary,
    pub merge: Option<MergeSummary>,
    pub grammar: GrammarSummary,
    pub coverage: Option<CoverageSummary>,
    pub outputs: BTreeMap<String, PathBuf>,
    /// Wall-clock milliseconds per stage; the only non-reproducible field.
    pub timings_ms: BTreeMap<String, f64>,
}

fn timed<T>(
    timings: &mut BTreeMap<String, f64>,
    stage: &str,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let out = f().with_context(|| format!("{stage} stage failed"))?;
    timings.insert(stage.to_owned(), start.elapsed().as_secs_f64() * 1e3);
    Ok(out)
}

fn write(
    outputs: &mut BTreeMap<String, PathBuf>,
    dir: &Path,
    name: &str,
    text: &str,
) -> Result<()> {
    let path = dir.join(name);
    io::write_text(&path, text)?;
    outputs.insert(name.to_owned(), path);
    Ok(())
}

/// Runs every stage and writes grammar dump, rule table, plan and manifest
/// into the output directory.
pub fn run_pipeline(cfg: &Config) -> Result<Manifest> {
    let mut timings = BTreeMap::new();
    let mut outputs = BTreeMap::new();
    let dir = &cfg.output.dir;

    let bitext = timed(&mut timings, "load", || load_corpus(&cfg.input))?;
    let ex = timed(&mut timings, "extract", || extract(&bitext, &cfg.extract))?;
    let extracted = GrammarSummary::of(&ex.grammar);
    log::info!(
        "extracted {} non-terminals, {} productions",
        extracted.nonterminals,
        extracted.productions
    );

    let plan = timed(&mut timings, "merge", || merge(&ex.grammar, &cfg.merge))?;
    let (merged, merge_summary) = match &plan {
        Some(plan) => {
            let report = merge_report(plan, &ex.grammar);
            let merged = ex.grammar.apply_merge_plan(plan)?;
            write(&mut outputs, dir, PLAN_FILE, &formats::plan_text(plan))?;
            (
                merged,
                Some(MergeSummary {
                    classes: report.classes.len(),
                    final_nonterminals: report.final_nonterminals,
                }),
            )
        }
        None => (ex.grammar, None),
    };

    let scored = timed(&mut timings, "score", || {
        let g = merged.estimate_probabilities()?;
        g.check_normalization()?;
        Ok(g)
    })?;
    timed(&mut timings, "export", || {
        write(
            &mut outputs,
            dir,
            GRAMMAR_FILE,
            &formats::grammar_dump(&scored)?,
        )?;
        write(
            &mut outputs,
            dir,
            RULES_FILE,
            &formats::rule_table(&scored)?,
        )
    })?;

    let coverage = if cfg.run.skip_verify {
        None
    } else {
        let kept = kept_pairs(&bitext, &ex.skipped);
        let c = timed(&mut timings, "verify", || {
            Ok(coverage(&scored, &kept, cfg.run.threads)?)
        })?;
        Some(CoverageSummary {
            derivable: c.derivable,
            total: c.total,
            fraction: c.fraction(),
            failing: c.failing,
        })
    };

    outputs.insert(MANIFEST_FILE.to_owned(), dir.join(MANIFEST_FILE));
    let manifest = Manifest {
        tool: format!("scfg-forge {}", env!("CARGO_PKG_VERSION")),
        parameters: cfg.clone(),
        pairs: bitext.len(),
        skipped: ex.skipped,
        extracted,
        merge: merge_summary,
        grammar: GrammarSummary::of(&scored),
        coverage,
        outputs,
        timings_ms: timings,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    io::write_text(&dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}
