//! k-medoids clustering of the most frequent non-terminals.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::equivalence::{EquivalenceConfig, Evaluator};
use crate::error::{Error, Result};
use crate::grammar::{NtId, Scfg};
use crate::plan::MergePlan;
use crate::stats::to_f64;

/// Dense symmetric dissimilarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, d: f64) {
        self.data[i * self.n + j] = d;
        self.data[j * self.n + i] = d;
    }
}

/// Clustering objective: infinite distances are counted separately so that
/// reducing their number is an improvement even though the float sum stays
/// infinite.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cost {
    pub infinite: usize,
    pub finite: f64,
}

impl Cost {
    fn add(&mut self, d: f64) {
        if d.is_infinite() {
            self.infinite += 1;
        } else {
            self.finite += d;
        }
    }

    /// Strictly better than `other`, ignoring float noise.
    fn improves_on(&self, other: &Cost) -> bool {
        match self.infinite.cmp(&other.infinite) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.finite < other.finite - 1e-12 * other.finite.abs().max(1.0),
        }
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.infinite.cmp(&other.infinite) {
            Ordering::Equal => self.finite.partial_cmp(&other.finite),
            o => Some(o),
        }
    }
}

/// Sum over points of the distance to the nearest medoid, and that medoid's
/// position in `medoids` (first one on ties).
pub fn pam_objective(d: &DistanceMatrix, medoids: &[usize]) -> (Cost, Vec<usize>) {
    let mut cost = Cost::default();
    let mut assignment = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, &med) in medoids.iter().enumerate() {
            let dist = if i == med { 0.0 } else { d.get(i, med) };
            if dist < best_d {
                best = m;
                best_d = dist;
            }
        }
        cost.add(best_d);
        assignment.push(best);
    }
    (cost, assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PamResult {
    pub medoids: Vec<usize>,
    pub assignment: Vec<usize>,
    pub cost: Cost,
    /// Objective after initialization and after every accepted swap.
    pub trace: Vec<Cost>,
}

/// Greedy start: the heaviest point, then repeatedly the point farthest from
/// the chosen set (ties by weight, then by `tie_rank`).
pub fn greedy_init(
    d: &DistanceMatrix,
    k: usize,
    weights: &[f64],
    tie_rank: &[usize],
) -> Vec<usize> {
    let n = d.len();
    let better = |a: usize, b: usize| {
        weights[a]
            .partial_cmp(&weights[b])
            .unwrap_or(Ordering::Equal)
            .then(tie_rank[b].cmp(&tie_rank[a]))
    };
    let mut medoids = Vec::with_capacity(k);
    if n == 0 || k == 0 {
        return medoids;
    }
    let first = (0..n).max_by(|&a, &b| better(a, b)).unwrap();
    medoids.push(first);
    while medoids.len() < k.min(n) {
        let gap = |i: usize| {
            medoids
                .iter()
                .map(|&m| d.get(i, m))
                .fold(f64::INFINITY, f64::min)
        };
        let next = (0..n)
            .filter(|i| !medoids.contains(i))
            .max_by(|&a, &b| {
                gap(a)
                    .partial_cmp(&gap(b))
                    .unwrap_or(Ordering::Equal)
                    .then(better(a, b))
            })
            .unwrap();
        medoids.push(next);
    }
    medoids
}

/// PAM swap phase: apply the best improving medoid/non-medoid swap until
/// none improves the objective.
pub fn pam(d: &DistanceMatrix, init: Vec<usize>) -> PamResult {
    let mut medoids = init;
    let (mut cost, _) = pam_objective(d, &medoids);
    let mut trace = vec![cost];
    loop {
        let mut best: Option<(usize, usize, Cost)> = None;
        for slot in 0..medoids.len() {
            for cand in 0..d.len() {
                if medoids.contains(&cand) {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[slot] = cand;
                let (c, _) = pam_objective(d, &trial);
                let reference = best.as_ref().map_or(&cost, |b| &b.2);
                if c.improves_on(reference) {
                    best = Some((slot, cand, c));
                }
            }
        }
        match best {
            Some((slot, cand, c)) => {
                medoids[slot] = cand;
                cost = c;
                trace.push(c);
            }
            None => break,
        }
    }
    let (cost, assignment) = pam_objective(d, &medoids);
    PamResult {
        medoids,
        assignment,
        cost,
        trace,
    }
}

#[derive(Debug, Clone)]
pub struct KMedoidsRun {
    pub plan: MergePlan,
    /// The clustered top non-terminals, most frequent first.
    pub top: Vec<NtId>,
    pub medoids: Vec<NtId>,
    pub distances: DistanceMatrix,
    pub pam: PamResult,
}

pub fn kmedoids(g: &Scfg, n_top: usize, k: usize, seed: u64) -> Result<MergePlan> {
    Ok(kmedoids_run(g, n_top, k, seed, &EquivalenceConfig::default())?.plan)
}

/// Clusters the `n_top` most frequent plain non-terminals into `k` groups and
/// attaches every other plain non-terminal to its nearest medoid.
pub fn kmedoids_run(
    g: &Scfg,
    n_top: usize,
    k: usize,
    seed: u64,
    cfg: &EquivalenceConfig,
) -> Result<KMedoidsRun> {
    let mut plain: Vec<NtId> = g.plain_ids().collect();
    if k == 0 || k > n_top || n_top > plain.len() {
        return Err(Error::ClusterSize {
            k,
            n_top,
            available: plain.len(),
        });
    }
    plain.sort_by(|a, b| g.count(*b).cmp(g.count(*a)).then(a.cmp(b)));
    let top: Vec<NtId> = plain[..n_top].to_vec();

    let mut ev = Evaluator::new(g, None, *cfg);
    let mut distances = DistanceMatrix::zeros(n_top);
    for i in 0..n_top {
        for j in i + 1..n_top {
            distances.set(i, j, ev.cluster_distance(top[i], top[j])?);
        }
    }

    let weights: Vec<f64> = top.iter().map(|&id| to_f64(g.count(id))).collect();
    let mut tie_rank: Vec<usize> = (0..n_top).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n_top).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        tie_rank.swap(i, j);
    }
    let result = pam(&distances, greedy_init(&distances, k, &weights, &tie_rank));
    let medoids: Vec<NtId> = result.medoids.iter().map(|&i| top[i]).collect();

    let mut plan = MergePlan::identity(plain.iter().copied());
    for (i, &m) in result.assignment.iter().enumerate() {
        plan.union(medoids[m], top[i]);
    }
    for &id in &plain[n_top..] {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, &med) in medoids.iter().enumerate() {
            let dist = ev.cluster_distance(id, med)?;
            if dist < best_d {
                best = m;
                best_d = dist;
            }
        }
        plan.union(medoids[best], id);
    }

    Ok(KMedoidsRun {
        plan,
        top,
        medoids,
        distances,
        pam: result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DistanceMatrix {
        DistanceMatrix::from_fn(points.len(), |i, j| (points[i] - points[j]).abs())
    }

    #[test]
    fn k_equals_n_is_free() {
        let d = line(&[0.0, 1.0, 5.0]);
        let r = pam(&d, vec![0, 1, 2]);
        assert_eq!(r.cost, Cost::default());
    }

    #[test]
    fn single_cluster_picks_the_median() {
        let pts = [0.0, 1.0, 2.0, 10.0, 11.0];
        let d = line(&pts);
        let r = pam(&d, vec![4]);
        let sums: Vec<f64> = (0..5).map(|m| (0..5).map(|i| d.get(i, m)).sum()).collect();
        let argmin = (0..5)
            .min_by(|&a, &b| sums[a].partial_cmp(&sums[b]).unwrap())
            .unwrap();
        assert_eq!(r.medoids, vec![argmin]);
    }

    #[test]
    fn infinite_terms_are_reduced_first() {
        // 0,1 close; 2,3 close; every cross pair infinite
        let d = DistanceMatrix::from_fn(4, |i, j| if i / 2 == j / 2 { 1.0 } else { f64::INFINITY });
        let r = pam(&d, vec![0, 1]);
        assert_eq!(r.cost.infinite, 0);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn greedy_init_spreads_out() {
        let d = line(&[0.0, 1.0, 9.0, 10.0]);
        let init = greedy_init(&d, 2, &[1.0, 5.0, 1.0, 1.0], &[0, 1, 2, 3]);
        assert_eq!(init, vec![1, 3]);
    }
}
