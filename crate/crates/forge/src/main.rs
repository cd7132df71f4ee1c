use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use scfg_core::{phrase_inventory_with, Evaluator, MergePlan, NtId, Recognizer, Scfg, Side};
use scfg_forge::config::{ExtractConfig, InputConfig, MergeConfig, Method, Mode, Score};
use scfg_forge::{formats, io, pipeline, Config};

#[derive(Parser)]
#[command(
    name = "scfg-forge",
    version,
    about = "Induce compact synchronous grammars from word-aligned bitexts"
)]
struct Cli {
    /// Worker threads for derivability checks.
    #[arg(long, global = true, env = "SCFG_FORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a grammar from a word-aligned bitext.
    Extract(ExtractArgs),
    /// Merge non-terminals with the Blue-Fringe search.
    MergeBf(MergeBfArgs),
    /// Merge non-terminals by k-medoids clustering.
    MergeKm(MergeKmArgs),
    /// Apply an optional merge plan and estimate rule probabilities.
    Score(ScoreArgs),
    /// Write the rule table of a grammar.
    Export(ScoreArgs),
    /// Print grammar statistics as key=value lines.
    Stats(GrammarArg),
    /// Check that a grammar derives every sentence pair.
    Verify(VerifyArgs),
    /// Show the context comparisons behind one non-terminal pair.
    Dissim(DissimArgs),
    /// Run every stage from a config file.
    Pipeline(PipelineArgs),
    /// Phrase-pair utilities.
    #[command(subcommand)]
    Phrases(PhrasesCommand),
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    align: PathBuf,
    /// Word-class map applied to both sides.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Drop pairs with a side longer than this.
    #[arg(long)]
    max_len: Option<usize>,
}

impl CorpusArgs {
    fn input(&self) -> InputConfig {
        InputConfig {
            src: self.src.clone(),
            tgt: self.tgt.clone(),
            align: self.align.clone(),
            classes: self.classes.clone(),
            max_len: self.max_len,
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long, value_enum, default_value = "specialized")]
    mode: Mode,
    #[arg(long)]
    max_gaps: Option<usize>,
    #[arg(long)]
    forbid_adjacent_gaps: bool,
    /// Keep pairs with no alignment links as single lexical rules.
    #[arg(long)]
    allow_empty_alignment: bool,
    /// Grammar dump to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GrammarArg {
    #[arg(long)]
    grammar: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long, default_value_t = MergeConfig::default().alpha)]
    alpha: f64,
    /// Use Fisher's exact test when a count is below this.
    #[arg(long, default_value_t = MergeConfig::default().fisher_threshold)]
    fisher_threshold: f64,
    #[arg(long)]
    strict_recursion: bool,
}

impl TestArgs {
    fn merge_config(&self) -> MergeConfig {
        MergeConfig {
            alpha: self.alpha,
            fisher_threshold: self.fisher_threshold,
            strict_recursion: self.strict_recursion,
            ..MergeConfig::default()
        }
    }
}

#[derive(Args)]
struct MergeBfArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[command(flatten)]
    test: TestArgs,
    #[arg(long, value_enum, default_value = "count")]
    score: Score,
    /// Break score ties randomly with this seed.
    #[arg(long)]
    random_ties: Option<u64>,
    /// Merge plan to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the merged grammar here.
    #[arg(long)]
    merged: Option<PathBuf>,
}

#[derive(Args)]
struct MergeKmArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[command(flatten)]
    test: TestArgs,
    /// Number of most frequent non-terminals to cluster.
    #[arg(long, default_value_t = 250)]
    top: usize,
    #[arg(short, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    merged: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    grammar: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    /// Print the derivation of each pair on both sides.
    #[arg(long)]
    emit_tree: bool,
}

#[derive(Args)]
struct DissimArgs {
    #[arg(long)]
    grammar: PathBuf,
    /// Two non-terminals, e.g. `X3,X6`.
    #[arg(long)]
    pair: String,
    #[command(flatten)]
    test: TestArgs,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    top: Option<usize>,
    #[arg(short)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    skip_verify: bool,
}

#[derive(Subcommand)]
enum PhrasesCommand {
    /// Print `u ||| v ||| count` for every phrase pair.
    Dump {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        allow_empty_alignment: bool,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_grammar(path: &Path) -> Result<Scfg> {
    let text = io::read_text(path)?;
    Ok(formats::parse_grammar(&text, path)?)
}

fn load_plan(path: &Path) -> Result<MergePlan> {
    let text = io::read_text(path)?;
    Ok(formats::parse_plan(&text, path)?)
}

fn scored(g: &Scfg, plan: Option<&Path>) -> Result<Scfg> {
    let g = match plan {
        Some(path) => g.apply_merge_plan(&load_plan(path)?)?,
        None => g.clone(),
    };
    Ok(g.estimate_probabilities()?)
}

fn write_plan(g: &Scfg, plan: &MergePlan, out: &Path, merged: Option<&Path>) -> Result<()> {
    io::write_text(out, &formats::plan_text(plan))?;
    let report = scfg_core::merge_report(plan, g);
    eprintln!(
        "classes={} final_nonterminals={}",
        report.classes.len(),
        report.final_nonterminals
    );
    if let Some(path) = merged {
        io::write_text(path, &formats::grammar_dump(&g.apply_merge_plan(plan)?)?)?;
    }
    Ok(())
}

fn print_stats(g: &Scfg) {
    let s = pipeline::GrammarSummary::of(g);
    println!("nonterminals={}", s.nonterminals);
    println!("productions={}", s.productions);
    println!("count_mass={}", s.count_mass);
    for (arity, n) in &s.arity_histogram {
        println!("arity{arity}={n}");
    }
}

fn parse_pair(s: &str) -> Result<(NtId, NtId)> {
    let Some((a, b)) = s.split_once(',') else {
        bail!("--pair expects two names separated by a comma, got `{s}`");
    };
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn run(cli: Cli) -> Result<ExitCode> {
    let threads = cli.threads.unwrap_or(1).max(1);
    match cli.command {
        Command::Extract(a) => {
            let bitext = pipeline::load_corpus(&a.corpus.input())?;
            let defaults = ExtractConfig::default();
            let cfg = ExtractConfig {
                mode: a.mode,
                max_gaps: a.max_gaps.unwrap_or(defaults.max_gaps),
                forbid_adjacent_gaps: a.forbid_adjacent_gaps,
                allow_empty_alignment: a.allow_empty_alignment,
            };
            let ex = pipeline::extract(&bitext, &cfg)?;
            io::write_text(&a.out, &formats::grammar_dump(&ex.grammar)?)?;
            let s = ex.grammar.stats();
            eprintln!(
                "pairs={} skipped={} nonterminals={} productions={}",
                bitext.len(),
                ex.skipped.len(),
                s.nonterminals,
                s.productions
            );
        }
        Command::MergeBf(a) => {
            let g = load_grammar(&a.grammar)?;
            let cfg = MergeConfig {
                method: Method::BlueFringe,
                score: a.score,
                random_ties: a.random_ties,
                ..a.test.merge_config()
            };
            let plan = pipeline::merge(&g, &cfg)?.expect("merge method set");
            write_plan(&g, &plan, &a.out, a.merged.as_deref())?;
        }
        Command::MergeKm(a) => {
            let g = load_grammar(&a.grammar)?;
            let cfg = MergeConfig {
                method: Method::Kmedoids,
                top: a.top,
                k: a.k,
                seed: a.seed,
                ..a.test.merge_config()
            };
            let plan = pipeline::merge(&g, &cfg)?.expect("merge method set");
            write_plan(&g, &plan, &a.out, a.merged.as_deref())?;
        }
        Command::Score(a) => {
            let g = scored(&load_grammar(&a.grammar)?, a.plan.as_deref())?;
            io::write_text(&a.out, &formats::grammar_dump(&g)?)?;
        }
        Command::Export(a) => {
            let g = scored(&load_grammar(&a.grammar)?, a.plan.as_deref())?;
            io::write_text(&a.out, &formats::rule_table(&g)?)?;
        }
        Command::Stats(a) => print_stats(&load_grammar(&a.grammar)?),
        Command::Verify(a) => {
            let g = load_grammar(&a.grammar)?;
            let pairs = io::read_pairs(&a.src, &a.tgt)?;
            let failing = if a.emit_tree {
                let rec = Recognizer::new(&g);
                let mut failing = Vec::new();
                for pair in &pairs {
                    match rec.derives(pair)? {
                        Some(tree) => {
                            println!(
                                "{}\t{}\t{}",
                                pair.id,
                                tree.render(&g, Side::Source),
                                tree.render(&g, Side::Target)
                            );
                        }
                        None => {
                            println!("{}\tFAIL", pair.id);
                            failing.push(pair.id);
                        }
                    }
                }
                failing
            } else {
                pipeline::coverage(&g, &pairs, threads)?.failing
            };
            println!("derivable={}/{}", pairs.len() - failing.len(), pairs.len());
            for id in &failing {
                eprintln!("not derivable: line {}", id + 1);
            }
            if !failing.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Dissim(a) => {
            let g = load_grammar(&a.grammar)?;
            let (x, y) = parse_pair(&a.pair)?;
            let mut ev = Evaluator::new(&g, None, a.test.merge_config().equivalence());
            for (ctx, out) in ev.context_outcomes(x, y)? {
                println!(
                    "{}\tc1={}\tc2={}\tD={:.10}\t{:?}\t{}",
                    ctx.key.render(&g),
                    scfg_core::grammar::format_exact(&ctx.count_a()),
                    scfg_core::grammar::format_exact(&ctx.count_b()),
                    out.dissimilarity,
                    out.test_used,
                    if out.differ { "differ" } else { "same" }
                );
            }
            println!("dissimilarity={:.10}", ev.nt_dissimilarity(x, y)?);
            println!("equivalent={}", ev.equivalent(x, y)?);
        }
        Command::Pipeline(a) => {
            let mut cfg = Config::load(&a.config)?;
            if let Some(mode) = a.mode {
                cfg.extract.mode = mode;
            }
            if let Some(method) = a.method {
                cfg.merge.method = method;
            }
            if let Some(alpha) = a.alpha {
                cfg.merge.alpha = alpha;
            }
            if let Some(top) = a.top {
                cfg.merge.top = top;
            }
            if let Some(k) = a.k {
                cfg.merge.k = k;
            }
            if let Some(seed) = a.seed {
                cfg.merge.seed = seed;
            }
            if let Some(dir) = a.out_dir {
                cfg.output.dir = dir;
            }
            if let Some(t) = cli.threads {
                cfg.run.threads = t.max(1);
            }
            cfg.run.skip_verify |= a.skip_verify;
            let m = pipeline::run_pipeline(&cfg)?;
            println!("nonterminals={}", m.grammar.nonterminals);
            println!("productions={}", m.grammar.productions);
            if let Some(c) = &m.coverage {
                println!("coverage={}/{}", c.derivable, c.total);
                if c.derivable < c.total {
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Phrases(PhrasesCommand::Dump {
            corpus,
            allow_empty_alignment,
            out,
        }) => {
            let input = InputConfig {
                max_len: None,
                ..corpus.input()
            };
            let bitext = pipeline::load_corpus(&input)?;
            let table = formats::phrase_table(&phrase_inventory_with(
                &bitext,
                corpus.max_len,
                allow_empty_alignment,
            ));
            match out {
                Some(path) => io::write_text(&path, &table)?,
                None => print!("{table}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
