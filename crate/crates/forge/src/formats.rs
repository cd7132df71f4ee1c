//! Text formats for grammars, rule tables, merge plans and phrase tables.
//!
//! A rule line is
//!
//! ```text
//! X1 ||| das [X5,1] Haus ||| the [X5,1] house ||| count=0.1666666667 prob=0.1666666667 ||| exact=1/6
//! ```
//!
//! Decimals are for reading; the trailing `exact` field carries the count as
//! a rational so that parsing reproduces the grammar exactly. A grammar dump
//! is a rule table preceded by one `#nt` line per plain non-terminal giving
//! its phrase pair and count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use scfg_core::grammar::{format_count, format_exact, parse_exact};
use scfg_core::{MergePlan, NtId, PhraseInventory, Production, Scfg, Symbol, TokenId};

use crate::io::{FormatError, Result};

const SEP: &str = " ||| ";

/// Tokens read as gaps; a malformed one is an error, not a terminal.
fn gap_like(tok: &str) -> bool {
    tok.starts_with('[') && (tok.ends_with(']') || tok.contains(','))
}

fn check_token(word: &str) -> std::result::Result<(), String> {
    if word == "|||" || gap_like(word) {
        return Err(format!("token `{word}` clashes with the rule-table syntax"));
    }
    Ok(())
}

fn rule_line(g: &Scfg, p: &Production, scored: bool) -> String {
    let mut line = format!(
        "{}{SEP}{}{SEP}{}{SEP}count={}",
        p.left,
        g.render_side(p, &p.src),
        g.render_side(p, &p.tgt),
        format_count(&p.count)
    );
    if scored {
        let prob = p.prob.as_ref().expect("scored grammar");
        write!(line, " prob={}", format_count(prob)).unwrap();
    }
    write!(line, "{SEP}exact={}", format_exact(&p.count)).unwrap();
    line
}

fn sorted_rules(g: &Scfg, scored: bool) -> std::result::Result<Vec<String>, FormatError> {
    for i in 0..g.vocab().len() {
        check_token(g.vocab().word(TokenId(i as u32)))
            .map_err(|m| FormatError::Core(scfg_core::Error::MalformedProduction(m)))?;
    }
    let mut rows: Vec<((NtId, String, String), String)> = g
        .productions()
        .map(|(_, p)| {
            let key = (p.left, g.render_side(p, &p.src), g.render_side(p, &p.tgt));
            (key, rule_line(g, p, scored))
        })
        .collect();
    rows.sort();
    Ok(rows.into_iter().map(|(_, line)| line).collect())
}

/// One line per production, sorted by left id, then source side, then
/// target side. The grammar must carry probabilities.
pub fn rule_table(g: &Scfg) -> Result<String> {
    if !g.is_scored() {
        return Err(scfg_core::Error::Unscored.into());
    }
    let mut out = String::new();
    for line in sorted_rules(g, true)? {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Full serialization: `#nt` header lines followed by the rules.
pub fn grammar_dump(g: &Scfg) -> Result<String> {
    let mut out = String::new();
    for nt in g.nonterminals().filter(|nt| !nt.id.is_initial()) {
        let (u, v) = g.render_phrase(nt.id).unwrap_or_default();
        writeln!(
            out,
            "#nt {}{SEP}{u}{SEP}{v}{SEP}exact={}",
            nt.id,
            format_exact(&nt.count)
        )
        .unwrap();
    }
    let scored = g.num_productions() > 0 && g.is_scored();
    for line in sorted_rules(g, scored)? {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

fn field<'a>(fields: &[&'a str], key: &str) -> Option<&'a str> {
    fields
        .iter()
        .flat_map(|f| f.split_whitespace())
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// Parses one side; gaps are `[Xn,k]` or `[I,k]`.
fn parse_side(
    g: &mut Scfg,
    text: &str,
    fillers: &mut BTreeMap<u8, NtId>,
) -> std::result::Result<Vec<Symbol>, String> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        if gap_like(tok) {
            let (name, slot) = tok
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .and_then(|inner| inner.split_once(','))
                .ok_or_else(|| format!("bad gap `{tok}`"))?;
            let nt: NtId = name.parse().map_err(|e: scfg_core::Error| e.to_string())?;
            let slot: u8 = slot
                .parse()
                .map_err(|_| format!("bad gap slot in `{tok}`"))?;
            if slot == 0 {
                return Err(format!("bad gap slot in `{tok}`"));
            }
            if let Some(prev) = fillers.insert(slot, nt) {
                if prev != nt {
                    return Err(format!("slot {slot} is filled by both {prev} and {nt}"));
                }
            }
            ensure_nt(g, nt)?;
            out.push(Symbol::Gap(slot));
        } else {
            out.push(Symbol::Terminal(g.vocab_mut().intern(tok)));
        }
    }
    if out.is_empty() {
        return Err("empty right-hand side".into());
    }
    Ok(out)
}

fn ensure_nt(g: &mut Scfg, id: NtId) -> std::result::Result<(), String> {
    if !g.contains(id) {
        g.insert_plain(id, None).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn parse_rule(g: &mut Scfg, line: &str) -> std::result::Result<bool, String> {
    let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
    if fields.len() < 4 {
        return Err("expected `LEFT ||| SRC ||| TGT ||| features [||| exact=n/d]`".into());
    }
    let left: NtId = fields[0]
        .parse()
        .map_err(|e: scfg_core::Error| e.to_string())?;
    ensure_nt(g, left)?;
    let mut fillers = BTreeMap::new();
    let src = parse_side(g, fields[1], &mut fillers)?;
    let src_slots = fillers.len();
    let tgt = parse_side(g, fields[2], &mut fillers)?;
    if fillers.len() != src_slots {
        return Err("target side uses a gap missing from the source side".into());
    }
    let coupling: Vec<NtId> = fillers.values().copied().collect();
    if fillers.keys().copied().ne(1..=coupling.len() as u8) {
        return Err("gap slots must be numbered 1..k".into());
    }
    let count = match field(&fields[3..], "exact") {
        Some(e) => parse_exact(e).map_err(|e| e.to_string())?,
        None => {
            let c = field(&fields[3..], "count").ok_or("missing count")?;
            decimal_count(c)?
        }
    };
    g.add_production(left, src, tgt, coupling, count)
        .map_err(|e| e.to_string())?;
    Ok(field(&fields[3..], "prob").is_some())
}

fn decimal_count(s: &str) -> std::result::Result<scfg_core::Count, String> {
    let bad = || format!("bad count `{s}`");
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = format!("{int}{frac}");
    let denom = format!("1{}", "0".repeat(frac.len()));
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    parse_exact(&format!("{digits}/{denom}")).map_err(|_| bad())
}

fn parse_nt_header(g: &mut Scfg, rest: &str) -> std::result::Result<scfg_core::Count, String> {
    let fields: Vec<&str> = rest.split("|||").map(str::trim).collect();
    if fields.len() != 4 {
        return Err("expected `#nt Xn ||| SRC ||| TGT ||| exact=n/d`".into());
    }
    let id: NtId = fields[0]
        .parse()
        .map_err(|e: scfg_core::Error| e.to_string())?;
    let phrase = if fields[1].is_empty() && fields[2].is_empty() {
        None
    } else {
        let vocab = g.vocab_mut();
        let u = fields[1]
            .split_whitespace()
            .map(|w| vocab.intern(w))
            .collect();
        let v = fields[2]
            .split_whitespace()
            .map(|w| vocab.intern(w))
            .collect();
        Some((u, v))
    };
    g.insert_plain(id, phrase).map_err(|e| e.to_string())?;
    let count = field(&fields[3..], "exact").ok_or("missing exact count")?;
    let count = parse_exact(count).map_err(|e| e.to_string())?;
    g.set_count(id, count.clone()).map_err(|e| e.to_string())?;
    Ok(count)
}

/// Parses a rule table or a grammar dump. Non-terminal counts come from the
/// `#nt` headers when present and are otherwise recomputed from the rules.
/// Probabilities are re-estimated when every rule carried one.
pub fn parse_grammar(text: &str, path: &Path) -> Result<Scfg> {
    let mut g = Scfg::new();
    let mut headers = Vec::new();
    let mut scored = true;
    let mut rules = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| FormatError::parse(path, i + 1, m);
        if let Some(rest) = line.strip_prefix("#nt ") {
            let count = parse_nt_header(&mut g, rest).map_err(err)?;
            headers.push((
                i + 1,
                rest.split("|||").next().unwrap_or("").trim().to_owned(),
                count,
            ));
        } else if line.starts_with('#') {
            continue;
        } else {
            scored &= parse_rule(&mut g, line).map_err(err)?;
            rules += 1;
        }
    }
    let declared: BTreeMap<NtId, scfg_core::Count> = g
        .nonterminals()
        .filter(|nt| !nt.id.is_initial())
        .map(|nt| (nt.id, nt.count.clone()))
        .collect();
    g.recount_nonterminals();
    for (line, name, count) in headers {
        let id: NtId = name
            .parse()
            .map_err(|e: scfg_core::Error| FormatError::parse(path, line, e.to_string()))?;
        if g.count(id) != &count {
            return Err(FormatError::parse(
                path,
                line,
                format!(
                    "{id} declares count {} but its rules sum to {}",
                    format_exact(&count),
                    format_exact(g.count(id))
                ),
            ));
        }
    }
    for (id, count) in declared {
        if g.productions_of(id).next().is_none() {
            g.set_count(id, count)?;
        }
    }
    if scored && rules > 0 {
        g = g.estimate_probabilities()?;
    }
    Ok(g)
}

/// `index: rep,member,...` per class, representative first, in
/// representative order.
pub fn plan_text(plan: &MergePlan) -> String {
    let mut out = String::new();
    for (i, (rep, members)) in plan.classes().into_iter().enumerate() {
        let rest = members.iter().filter(|&&m| m != rep).map(|m| m.to_string());
        let names: Vec<String> = std::iter::once(rep.to_string()).chain(rest).collect();
        writeln!(out, "{i}: {}", names.join(",")).unwrap();
    }
    out
}

pub fn parse_plan(text: &str, path: &Path) -> Result<MergePlan> {
    let mut classes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: String| FormatError::parse(path, i + 1, m);
        let (_, members) = line
            .split_once(':')
            .ok_or_else(|| err("expected `index: rep,member,...`".into()))?;
        let ids = members
            .split(',')
            .map(|m| m.trim().parse::<NtId>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(e.to_string()))?;
        if ids.is_empty() || ids.iter().any(|id| id.is_initial()) {
            return Err(err("classes hold plain non-terminals only".into()));
        }
        classes.push((ids[0], ids));
    }
    MergePlan::from_classes(classes).map_err(|e| FormatError::parse(path, 0, e.to_string()))
}

/// `u ||| v ||| count` lines in lexicographic order.
pub fn phrase_table(inventory: &PhraseInventory) -> String {
    let mut lines: Vec<String> = inventory
        .iter()
        .map(|(p, c)| format!("{}{SEP}{}{SEP}{c}", p.source.join(" "), p.target.join(" ")))
        .collect();
    lines.sort();
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}
