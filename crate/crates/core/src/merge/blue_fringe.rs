//! Red/blue fringe merging adapted to non-terminals.
//!
//! Red non-terminals form a kernel of mutually distinct symbols, blue ones
//! are candidates whose gap fillers are all red, and the rest are white.
//! Each step either promotes a blue that matches no red, or merges the
//! best-scoring equivalent red/blue pair.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::rc::Rc;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::equivalence::{ContextTable, EquivalenceConfig, Evaluator};
use crate::error::Result;
use crate::grammar::{NtId, ProdId, Scfg};
use crate::plan::MergePlan;
use crate::stats::to_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeScore {
    /// `C(red) + C(blue)`.
    Count,
    /// Negated pair dissimilarity.
    Dissimilarity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlueFringeConfig {
    pub equivalence: EquivalenceConfig,
    pub score: MergeScore,
    /// Break promotion ties at random with this seed instead of by
    /// `(count desc, id asc)`.
    pub random_ties: Option<u64>,
}

impl Default for BlueFringeConfig {
    fn default() -> Self {
        Self {
            equivalence: EquivalenceConfig::default(),
            score: MergeScore::Count,
            random_ties: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FringeState {
    pub red: BTreeSet<NtId>,
    pub blue: BTreeSet<NtId>,
    pub white: BTreeSet<NtId>,
}

impl FringeState {
    /// Moves every white whose gap fillers are all red into the fringe.
    fn refresh(&mut self, g: &Scfg) {
        let ready: Vec<NtId> = self
            .white
            .iter()
            .copied()
            .filter(|&w| fillers_all_red(g, w, &self.red))
            .collect();
        for w in ready {
            self.white.remove(&w);
            self.blue.insert(w);
        }
    }
}

impl FringeState {
    /// Whites that fill a gap with `nt`.
    fn white_users(&self, g: &Scfg, nt: NtId) -> BTreeSet<NtId> {
        g.gap_uses(nt)
            .map(|p| g.production(p).left)
            .filter(|w| self.white.contains(w))
            .collect()
    }

    /// [`FringeState::refresh`] limited to `whites`.
    fn refresh_some(&mut self, g: &Scfg, whites: BTreeSet<NtId>) {
        for w in whites {
            if fillers_all_red(g, w, &self.red) {
                self.white.remove(&w);
                self.blue.insert(w);
            }
        }
    }
}

fn fillers_all_red(g: &Scfg, id: NtId, red: &BTreeSet<NtId>) -> bool {
    g.productions_of(id).all(|p| {
        g.production(p)
            .coupling
            .iter()
            .all(|f| red.contains(f) || f.is_initial())
    })
}

/// Leaves (only lexical productions) are red, non-terminals whose fillers
/// are all red are blue, everything else is white.
pub fn init_fringe(g: &Scfg) -> FringeState {
    let mut state = FringeState::default();
    for id in g.plain_ids() {
        if g.productions_of(id).all(|p| g.production(p).is_lexical()) {
            state.red.insert(id);
        } else {
            state.white.insert(id);
        }
    }
    state.refresh(g);
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FringeStep {
    Promote(NtId),
    Merge { red: NtId, blue: NtId },
}

#[derive(Debug, Clone)]
pub struct BlueFringeRun {
    pub plan: MergePlan,
    /// The input grammar with every merge applied.
    pub grammar: Scfg,
    pub steps: Vec<FringeStep>,
}

pub fn blue_fringe(g: &Scfg, cfg: &BlueFringeConfig) -> Result<MergePlan> {
    Ok(blue_fringe_run(g, cfg)?.plan)
}

pub fn blue_fringe_run(g: &Scfg, cfg: &BlueFringeConfig) -> Result<BlueFringeRun> {
    let mut work = g.clone();
    let mut plan = MergePlan::identity(g.plain_ids());
    let depths = g.subtree_depths();
    let mut rng = cfg.random_ties.map(ChaCha8Rng::seed_from_u64);
    let mut state = init_fringe(&work);
    let mut dissim_cache: HashMap<(NtId, NtId), f64> = HashMap::new();
    let mut tables = HashMap::new();
    let mut steps = Vec::new();
    // equivalent reds of every blue whose pairs are up to date
    let mut equivalent: BTreeMap<NtId, BTreeSet<NtId>> = BTreeMap::new();
    // reds whose pairs with every blue need evaluating
    let mut fresh_reds: BTreeSet<NtId> = BTreeSet::new();
    let mut approx: HashMap<NtId, f64> = HashMap::new();

    loop {
        if state.blue.is_empty() {
            break;
        }

        let mut unmatched = Vec::new();
        let mut candidates: Vec<(NtId, NtId)> = Vec::new();
        {
            let mut ev = Evaluator::with_contexts(
                &work,
                None,
                cfg.equivalence,
                core::mem::take(&mut tables),
            );
            for &b in &state.blue {
                let known = equivalent.get_mut(&b);
                let fresh_blue = known.is_none();
                let reds = known.map(core::mem::take).unwrap_or_default();
                let mut eq = reds;
                let pending = if fresh_blue { &state.red } else { &fresh_reds };
                for &r in pending {
                    if ev.equivalent(r, b)? {
                        eq.insert(r);
                    }
                }
                if eq.is_empty() {
                    unmatched.push(b);
                }
                candidates.extend(eq.iter().map(|&r| (r, b)));
                equivalent.insert(b, eq);
            }
            fresh_reds.clear();

            if !unmatched.is_empty() {
                tables = ev.into_contexts();
                let target = pick_promotion(&work, &depths, &unmatched, rng.as_mut());
                state.blue.remove(&target);
                state.red.insert(target);
                equivalent.remove(&target);
                fresh_reds.insert(target);
                steps.push(FringeStep::Promote(target));
                // only whites using the new red can be completed by it
                let users = state.white_users(&work, target);
                state.refresh_some(&work, users);
                continue;
            }

            if cfg.score == MergeScore::Dissimilarity {
                for &(r, b) in &candidates {
                    if !dissim_cache.contains_key(&(r, b)) {
                        let d = ev.nt_dissimilarity(r, b)?;
                        dissim_cache.insert((r, b), d);
                    }
                }
            }
            tables = ev.into_contexts();
        }

        // candidates are non-empty here: every blue matched some red
        let (red, blue) = best_merge(&work, &candidates, cfg.score, &dissim_cache, &mut approx);
        // the whites that used blue now use red and may be complete
        let users = state.white_users(&work, blue);
        let affected = merge_keeping_tables(&mut work, &mut tables, red, blue)?;
        plan.union(red, blue);
        state.blue.remove(&blue);
        equivalent.remove(&blue);
        approx.remove(&red);
        steps.push(FringeStep::Merge { red, blue });

        if cfg.equivalence.strict_recursion {
            equivalent.clear();
        } else {
            for id in &affected {
                if state.red.contains(id) {
                    fresh_reds.insert(*id);
                    for eq in equivalent.values_mut() {
                        eq.remove(id);
                    }
                } else {
                    equivalent.remove(id);
                }
            }
        }
        dissim_cache.clear();
        state.refresh_some(&work, users);
    }

    Ok(BlueFringeRun {
        plan,
        grammar: work,
        steps,
    })
}

/// Merges `blue` into `red` and brings the cached context tables up to
/// date. Returns the affected set.
fn merge_keeping_tables(
    work: &mut Scfg,
    tables: &mut HashMap<NtId, Rc<ContextTable>>,
    red: NtId,
    blue: NtId,
) -> Result<BTreeSet<NtId>> {
    let affected = affected_by_merge(work, red, blue);
    let mut touched = affected.clone();
    for p in work.productions_of(blue) {
        touched.extend(work.production(p).coupling.iter().copied());
    }
    touched.remove(&blue);
    let mut absorbed = tables.remove(&blue);
    let moved: HashMap<ProdId, ProdId> = work.merge_tracked(red, blue)?.into_iter().collect();
    for id in touched {
        let Some(t) = tables.remove(&id) else {
            continue;
        };
        let extra = if id == red {
            // red's contexts now include blue's; without them it is rebuilt
            match absorbed.take() {
                Some(b) => Some(b),
                None => continue,
            }
        } else {
            None
        };
        let t = ContextTable::after_merge(t, extra, red, blue, &moved, work);
        tables.insert(id, Rc::new(t));
    }
    Ok(affected)
}

/// Non-terminals whose contexts change when `blue` is folded into `red`:
/// the pair itself and every co-filler of a production either of them fills.
fn affected_by_merge(g: &Scfg, red: NtId, blue: NtId) -> BTreeSet<NtId> {
    let mut out = BTreeSet::new();
    out.insert(red);
    out.insert(blue);
    for id in [red, blue] {
        for p in g.gap_uses(id) {
            let prod = g.production(p);
            if prod.arity() > 1 {
                out.extend(prod.coupling.iter().copied());
            }
        }
    }
    out
}

fn pick_promotion(
    g: &Scfg,
    depths: &BTreeMap<NtId, u32>,
    unmatched: &[NtId],
    rng: Option<&mut ChaCha8Rng>,
) -> NtId {
    let depth = |id: &NtId| depths.get(id).copied().unwrap_or(0);
    let shallowest = unmatched.iter().map(depth).min().expect("non-empty");
    let mut tied: Vec<NtId> = unmatched
        .iter()
        .copied()
        .filter(|id| depth(id) == shallowest)
        .collect();
    if let Some(rng) = rng {
        let i = (rng.next_u64() % tied.len() as u64) as usize;
        return tied[i];
    }
    tied.sort_by(|a, b| g.count(*b).cmp(g.count(*a)).then(a.cmp(b)));
    tied[0]
}

fn best_merge(
    g: &Scfg,
    candidates: &[(NtId, NtId)],
    score: MergeScore,
    dissim: &HashMap<(NtId, NtId), f64>,
    approx_counts: &mut HashMap<NtId, f64>,
) -> (NtId, NtId) {
    let exact = |(r, b): (NtId, NtId)| g.count(r) + g.count(b);
    let mut approx = |(r, b): (NtId, NtId)| {
        let mut c = |id: NtId| {
            *approx_counts
                .entry(id)
                .or_insert_with(|| to_f64(g.count(id)))
        };
        c(r) + c(b)
    };
    let mut best = candidates[0];
    let mut best_approx = approx(best);
    for &cand in &candidates[1..] {
        let better = match score {
            MergeScore::Count => {
                // exact sums only when the floats cannot separate the two
                let a = approx(cand);
                if a < best_approx * (1.0 - 1e-9) {
                    false
                } else if a > best_approx * (1.0 + 1e-9) {
                    true
                } else {
                    exact(cand) > exact(best)
                }
            }
            MergeScore::Dissimilarity => dissim[&cand] < dissim[&best],
        };
        // candidates arrive in (blue, red) id order; strict comparison keeps the first
        if better {
            best = cand;
            best_approx = approx(best);
        }
    }
    best
}
