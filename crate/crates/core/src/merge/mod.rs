//! Producing merge plans: red/blue fringe search and k-medoids clustering.

mod blue_fringe;
mod kmedoids;

use alloc::vec::Vec;

pub use blue_fringe::{
    blue_fringe, blue_fringe_run, init_fringe, BlueFringeConfig, BlueFringeRun, FringeState,
    FringeStep, MergeScore,
};
pub use kmedoids::{
    greedy_init, kmedoids, kmedoids_run, pam, pam_objective, Cost, DistanceMatrix, KMedoidsRun,
    PamResult,
};

use crate::grammar::{NtId, Scfg};
use crate::plan::MergePlan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeReport {
    /// `(representative, class size)` in representative order.
    pub classes: Vec<(NtId, usize)>,
    /// Non-terminal count of the merged grammar, `I` included.
    pub final_nonterminals: usize,
}

/// Summarizes what applying `plan` to `g` would produce.
pub fn merge_report(plan: &MergePlan, g: &Scfg) -> MergeReport {
    let classes: Vec<(NtId, usize)> = plan
        .classes()
        .into_iter()
        .map(|(rep, members)| (rep, members.len()))
        .collect();
    let outside = g.plain_ids().filter(|&id| !plan.contains(id)).count();
    MergeReport {
        final_nonterminals: 1 + classes.len() + outside,
        classes,
    }
}
