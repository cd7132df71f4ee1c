//! Experiment presets.
//!
//! ```toml
//! [input]
//! src = "corpus.de"
//! tgt = "corpus.en"
//! align = "corpus.align"
//!
//! [extract]
//! mode = "specialized"
//!
//! [merge]
//! method = "blue-fringe"
//! alpha = 0.01
//!
//! [output]
//! dir = "run1"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scfg_core::{BlueFringeConfig, EquivalenceConfig, ExtractOptions, MergeScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub input: InputConfig,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub merge: MergeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub src: PathBuf,
    pub tgt: PathBuf,
    pub align: PathBuf,
    #[serde(default)]
    pub classes: Option<PathBuf>,
    /// Drop pairs with a side longer than this before extraction.
    #[serde(default)]
    pub max_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Specialized,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub mode: Mode,
    pub max_gaps: usize,
    pub forbid_adjacent_gaps: bool,
    pub allow_empty_alignment: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let opts = ExtractOptions::default();
        Self {
            mode: Mode::Specialized,
            max_gaps: opts.max_gaps,
            forbid_adjacent_gaps: opts.forbid_adjacent_gaps,
            allow_empty_alignment: opts.allow_empty_alignment,
        }
    }
}

impl ExtractConfig {
    pub fn options(&self) -> ExtractOptions {
        ExtractOptions {
            max_gaps: self.max_gaps,
            forbid_adjacent_gaps: self.forbid_adjacent_gaps,
            allow_empty_alignment: self.allow_empty_alignment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    None,
    BlueFringe,
    Kmedoids,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Score {
    Count,
    Dissim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeConfig {
    pub method: Method,
    pub alpha: f64,
    pub fisher_threshold: f64,
    pub strict_recursion: bool,
    pub score: Score,
    pub random_ties: Option<u64>,
    pub top: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        let eq = EquivalenceConfig::default();
        Self {
            method: Method::None,
            alpha: eq.alpha,
            fisher_threshold: eq.fisher_threshold,
            strict_recursion: eq.strict_recursion,
            score: Score::Count,
            random_ties: None,
            top: 250,
            k: 3,
            seed: 0,
        }
    }
}

impl MergeConfig {
    pub fn equivalence(&self) -> EquivalenceConfig {
        EquivalenceConfig {
            alpha: self.alpha,
            fisher_threshold: self.fisher_threshold,
            strict_recursion: self.strict_recursion,
        }
    }

    pub fn blue_fringe(&self) -> BlueFringeConfig {
        BlueFringeConfig {
            equivalence: self.equivalence(),
            score: match self.score {
                Score::Count => MergeScore::Count,
                Score::Dissim => MergeScore::Dissimilarity,
            },
            random_ties: self.random_ties,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub threads: usize,
    /// Skip the final derivability check.
    pub skip_verify: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            threads: 1,
            skip_verify: false,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let mut cfg =
            Self::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        if let Some(base) = path.parent() {
            cfg.resolve(base);
        }
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.src);
        fix(&mut self.input.tgt);
        fix(&mut self.input.align);
        if let Some(c) = self.input.classes.as_mut() {
            fix(c);
        }
        fix(&mut self.output.dir);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = Config::from_toml("[input]\nsrc = \"a\"\ntgt = \"b\"\nalign = \"c\"\n").unwrap();
        assert_eq!(cfg.extract.mode, Mode::Specialized);
        assert_eq!(cfg.merge.method, Method::None);
        assert_eq!(cfg.run.threads, 1);
        assert_eq!(cfg.output.dir, PathBuf::from("out"));
    }

    #[test]
    fn sections_and_unknown_keys() {
        let text = "[input]\nsrc = \"a\"\ntgt = \"b\"\nalign = \"c\"\n[merge]\nmethod = \"kmedoids\"\nk = 4\ntop = 20\n";
        let cfg = Config::from_toml(text).unwrap();
        assert_eq!(cfg.merge.method, Method::Kmedoids);
        assert_eq!((cfg.merge.k, cfg.merge.top), (4, 20));
        assert!(
            Config::from_toml("[input]\nsrc = \"a\"\ntgt = \"b\"\nalign = \"c\"\nfoo = 1\n")
                .is_err()
        );
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut cfg =
            Config::from_toml("[input]\nsrc = \"a\"\ntgt = \"/abs/b\"\nalign = \"c\"\n").unwrap();
        cfg.resolve(Path::new("/base"));
        assert_eq!(cfg.input.src, PathBuf::from("/base/a"));
        assert_eq!(cfg.input.tgt, PathBuf::from("/abs/b"));
        assert_eq!(cfg.output.dir, PathBuf::from("/base/out"));
    }
}
