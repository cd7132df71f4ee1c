//! Plain-text corpus files: one sentence per line, Pharaoh-style alignments
//! (`0-0 1-2 ...`) and tab-separated word-class maps.

use std::fs;
use std::path::{Path, PathBuf};

use scfg_core::{AlignmentSet, Bitext, ClassMap, SentencePair, UnknownPolicy};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] scfg_core::Error),
}

impl FormatError {
    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FormatError>;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| FormatError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn lines_of(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?.lines().map(str::to_owned).collect())
}

/// Parses `i-j` links separated by whitespace.
pub fn parse_alignment(line: &str) -> std::result::Result<Vec<(u32, u32)>, String> {
    line.split_whitespace()
        .map(|link| {
            let (s, t) = link
                .split_once('-')
                .ok_or_else(|| format!("alignment link `{link}` is not of the form i-j"))?;
            let num = |x: &str| {
                x.parse::<u32>()
                    .map_err(|_| format!("alignment link `{link}` has a non-numeric position"))
            };
            Ok((num(s)?, num(t)?))
        })
        .collect()
}

pub fn format_alignment(align: &AlignmentSet) -> String {
    align
        .links()
        .iter()
        .map(|(s, t)| format!("{s}-{t}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads parallel source/target files without alignments.
pub fn read_pairs(src: &Path, tgt: &Path) -> Result<Vec<SentencePair>> {
    let s = lines_of(src)?;
    let t = lines_of(tgt)?;
    if s.len() != t.len() {
        return Err(FormatError::parse(
            tgt,
            t.len().min(s.len()) + 1,
            format!(
                "{} has {} lines but {} has {}",
                src.display(),
                s.len(),
                tgt.display(),
                t.len()
            ),
        ));
    }
    s.iter()
        .zip(&t)
        .enumerate()
        .map(|(i, (sl, tl))| {
            SentencePair::from_text(i, sl, tl).map_err(|e| {
                let path = if sl.trim().is_empty() { src } else { tgt };
                FormatError::parse(path, i + 1, e.to_string())
            })
        })
        .collect()
}

/// Loads a bitext from parallel source/target files and an alignment file
/// with one line per sentence pair.
pub fn read_bitext(src: &Path, tgt: &Path, align: &Path) -> Result<Bitext> {
    let pairs = read_pairs(src, tgt)?;
    let a = lines_of(align)?;
    if a.len() != pairs.len() {
        return Err(FormatError::parse(
            align,
            a.len().min(pairs.len()) + 1,
            format!(
                "expected {} alignment lines, found {}",
                pairs.len(),
                a.len()
            ),
        ));
    }
    let mut aligns = Vec::with_capacity(pairs.len());
    for (i, (pair, al)) in pairs.iter().zip(&a).enumerate() {
        let err = |m: String| FormatError::parse(align, i + 1, m);
        let set =
            AlignmentSet::new(parse_alignment(al).map_err(err)?).map_err(|e| err(e.to_string()))?;
        set.validate_for(pair).map_err(|e| err(e.to_string()))?;
        aligns.push(set);
    }
    Ok(Bitext::new(pairs, aligns)?)
}

/// Writes the three files of a bitext.
pub fn write_bitext(bitext: &Bitext, src: &Path, tgt: &Path, align: &Path) -> Result<()> {
    let mut s = String::new();
    let mut t = String::new();
    let mut a = String::new();
    for (pair, links) in bitext.iter() {
        s.push_str(&pair.source.join(" "));
        s.push('\n');
        t.push_str(&pair.target.join(" "));
        t.push('\n');
        a.push_str(&format_alignment(links));
        a.push('\n');
    }
    write_text(src, &s)?;
    write_text(tgt, &t)?;
    write_text(align, &a)
}

/// Reads `token<TAB>class` lines; blank lines and `#` comments are skipped.
pub fn read_class_map(path: &Path, policy: UnknownPolicy) -> Result<ClassMap> {
    let mut map = ClassMap::new(policy);
    for (i, line) in read_text(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [token, class] = fields[..] else {
            return Err(FormatError::parse(
                path,
                i + 1,
                "expected `token<TAB>class`",
            ));
        };
        map.insert(token, class)
            .map_err(|e| FormatError::parse(path, i + 1, e.to_string()))?;
    }
    Ok(map)
}
