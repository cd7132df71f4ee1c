//! Parallel corpus types, word-class mapping and length filtering.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One line of a bitext, already tokenised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub id: usize,
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl SentencePair {
    pub fn new(id: usize, source: Vec<String>, target: Vec<String>) -> Result<Self> {
        let pair = Self { id, source, target };
        pair.validate()?;
        Ok(pair)
    }

    /// Splits both sides on whitespace.
    pub fn from_text(id: usize, source: &str, target: &str) -> Result<Self> {
        Self::new(id, tokenize(source), tokenize(target))
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidSentence {
            id: self.id,
            reason,
        };
        if self.source.is_empty() {
            return Err(invalid("empty source side".into()));
        }
        if self.target.is_empty() {
            return Err(invalid("empty target side".into()));
        }
        for tok in self.source.iter().chain(&self.target) {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(invalid(format!("malformed token {tok:?}")));
            }
        }
        Ok(())
    }
}

fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(String::from).collect()
}

/// Word-level alignment links `(source position, target position)`, zero-based.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AlignmentSet {
    links: Vec<(u32, u32)>,
}

impl AlignmentSet {
    /// Builds a link set, rejecting duplicates. Links are kept sorted.
    pub fn new(mut links: Vec<(u32, u32)>) -> Result<Self> {
        links.sort_unstable();
        if let Some(w) = links.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLink {
                id: 0,
                src: w[0].0,
                tgt: w[0].1,
            });
        }
        Ok(Self { links })
    }

    /// Monotone diagonal alignment `i-i` for `len` positions.
    pub fn monotone(len: usize) -> Self {
        Self {
            links: (0..len as u32).map(|i| (i, i)).collect(),
        }
    }

    pub fn links(&self) -> &[(u32, u32)] {
        &self.links
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn validate_for(&self, pair: &SentencePair) -> Result<()> {
        for &(s, t) in &self.links {
            if s as usize >= pair.source.len() || t as usize >= pair.target.len() {
                return Err(Error::AlignmentOutOfRange {
                    id: pair.id,
                    src: s,
                    tgt: t,
                    src_len: pair.source.len(),
                    tgt_len: pair.target.len(),
                });
            }
        }
        if let Some(w) = self.links.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLink {
                id: pair.id,
                src: w[0].0,
                tgt: w[0].1,
            });
        }
        Ok(())
    }
}

/// What to do with tokens missing from a [`ClassMap`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnknownPolicy {
    Reject,
    MapTo(String),
}

impl UnknownPolicy {
    pub fn reserved() -> Self {
        UnknownPolicy::MapTo(String::from("UNK0"))
    }
}

/// Token to word-class mapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    pub mapping: BTreeMap<String, String>,
    pub unknown_policy: UnknownPolicy,
}

impl ClassMap {
    pub fn new(unknown_policy: UnknownPolicy) -> Self {
        Self {
            mapping: BTreeMap::new(),
            unknown_policy,
        }
    }

    /// Adds `token -> class`. A token already mapped to a different class is an error.
    pub fn insert(&mut self, token: &str, class: &str) -> Result<()> {
        match self.mapping.get(token) {
            Some(existing) if existing != class => Err(Error::InvalidParameter(format!(
                "token `{token}` mapped to both `{existing}` and `{class}`"
            ))),
            Some(_) => Ok(()),
            None => {
                self.mapping
                    .insert(String::from(token), String::from(class));
                Ok(())
            }
        }
    }

    pub fn class_of(&self, token: &str) -> Result<&str> {
        match (self.mapping.get(token), &self.unknown_policy) {
            (Some(c), _) => Ok(c),
            (None, UnknownPolicy::MapTo(label)) => Ok(label),
            (None, UnknownPolicy::Reject) => Err(Error::UnknownToken(String::from(token))),
        }
    }
}

/// A validated sequence of sentence pairs with their alignments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitext {
    pairs: Vec<SentencePair>,
    alignments: Vec<AlignmentSet>,
}

impl Bitext {
    /// Validates every pair and alignment and renumbers ids from zero.
    pub fn new(mut pairs: Vec<SentencePair>, alignments: Vec<AlignmentSet>) -> Result<Self> {
        if pairs.len() != alignments.len() {
            return Err(Error::LengthMismatch {
                pairs: pairs.len(),
                alignments: alignments.len(),
            });
        }
        for (i, (pair, align)) in pairs.iter_mut().zip(&alignments).enumerate() {
            pair.id = i;
            pair.validate()?;
            align.validate_for(pair)?;
        }
        Ok(Self { pairs, alignments })
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn alignments(&self) -> &[AlignmentSet] {
        &self.alignments
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SentencePair, &AlignmentSet)> {
        self.pairs.iter().zip(&self.alignments)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Replaces every token by its word class. Alignments are untouched.
    pub fn apply_classes(&self, classes: &ClassMap) -> Result<Bitext> {
        let map_side = |side: &[String]| -> Result<Vec<String>> {
            side.iter()
                .map(|tok| classes.class_of(tok).map(String::from))
                .collect()
        };
        let mut pairs = Vec::with_capacity(self.pairs.len());
        for pair in &self.pairs {
            pairs.push(SentencePair {
                id: pair.id,
                source: map_side(&pair.source)?,
                target: map_side(&pair.target)?,
            });
        }
        Ok(Bitext {
            pairs,
            alignments: self.alignments.clone(),
        })
    }

    /// Keeps the pairs whose sides both have at most `max_len` tokens.
    pub fn filter_by_length(&self, max_len: usize) -> Result<Bitext> {
        if max_len == 0 {
            return Err(Error::InvalidParameter("max_len must be at least 1".into()));
        }
        let mut pairs = Vec::new();
        let mut alignments = Vec::new();
        for (pair, align) in self.iter() {
            if pair.source.len() <= max_len && pair.target.len() <= max_len {
                let mut kept = pair.clone();
                kept.id = pairs.len();
                pairs.push(kept);
                alignments.push(align.clone());
            }
        }
        Ok(Bitext { pairs, alignments })
    }
}
