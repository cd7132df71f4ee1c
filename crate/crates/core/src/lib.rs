//! Grammar induction over word-aligned bitexts.
//!
//! The extraction stage builds a synchronous context-free grammar with one
//! non-terminal per distinct bilingual phrase pair. The inventory is then
//! reduced by merging statistically equivalent non-terminals, either with a
//! red/blue fringe search or with k-medoids clustering, and the result can be
//! checked against the training pairs with a synchronous recognizer.
//!
//! This crate is `no_std` and only needs `alloc`; file formats and the
//! command-line driver live in `scfg-forge`.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod equivalence;
pub mod error;
pub mod extract;
pub mod grammar;
pub mod merge;
pub mod phrases;
pub mod plan;
pub mod stats;
pub mod verify;
mod vocab;

pub use corpus::{AlignmentSet, Bitext, ClassMap, SentencePair, UnknownPolicy};
pub use equivalence::{ContextPair, EquivalenceConfig, Evaluator, TestKind, TestOutcome};
pub use error::{Error, Result};
pub use extract::{
    extract_chiang_baseline, extract_specialized, BaselineLimits, ExtractOptions, Extraction,
};
pub use grammar::{Count, NonTerminal, NtId, NtKind, ProdId, Production, Scfg, Symbol};
pub use merge::{
    blue_fringe, blue_fringe_run, kmedoids, kmedoids_run, merge_report, BlueFringeConfig,
    MergeReport, MergeScore,
};
pub use phrases::{
    extract_span_pairs, phrase_inventory, phrase_inventory_with, PhraseInventory, PhrasePair,
    SpanPair,
};
pub use plan::MergePlan;
pub use verify::{coverage_report, derives, Coverage, DerivationTree, Recognizer, Side};
pub use vocab::{TokenId, Vocab};
