//! Propositional strict Horn systems: unit propagation, model enumeration,
//! and minimal-support analysis.
//!
//! The clause-elimination step of normalization reduces to questions about
//! propositional Horn clauses whose atoms all sit at one grid site: which
//! variables follow from which assumption sets.  This module answers them.
//!
//! * [`HornSystem::closure`] — the least model above a seed set, by counting
//!   unit propagation (linear in total clause size).
//! * [`HornSystem::models`] / [`HornSystem::tautological_consequences`] —
//!   brute-force checks of the Horn property (the least model is the
//!   intersection of all models), used as an independent oracle in tests.
//! * [`minimal_supports`] — for every variable, the antichain of minimal
//!   sets of designated *assumption* variables whose closure contains it.
//!   This runs as a worklist fixpoint over antichains and never enumerates
//!   the powerset of assumptions.

use std::collections::VecDeque;
use std::fmt;

/// `hyps -> concl`, all propositional variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropClause {
    pub hyps: Vec<usize>,
    pub concl: usize,
}

#[derive(Clone, Debug, Default)]
pub struct HornSystem {
    pub vars: usize,
    pub clauses: Vec<PropClause>,
}

impl HornSystem {
    pub fn new(vars: usize) -> Self {
        HornSystem {
            vars,
            clauses: Vec::new(),
        }
    }

    pub fn add(&mut self, hyps: Vec<usize>, concl: usize) {
        debug_assert!(concl < self.vars && hyps.iter().all(|&h| h < self.vars));
        self.clauses.push(PropClause { hyps, concl });
    }

    /// Least model containing `seeds`: counting unit propagation.
    pub fn closure(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut truth = vec![false; self.vars];
        // clauses watching each variable
        let mut watchers: Vec<Vec<usize>> = vec![Vec::new(); self.vars];
        let mut missing: Vec<usize> = Vec::with_capacity(self.clauses.len());
        for (ci, cl) in self.clauses.iter().enumerate() {
            let mut distinct = cl.hyps.clone();
            distinct.sort_unstable();
            distinct.dedup();
            missing.push(distinct.len());
            for &h in &distinct {
                watchers[h].push(ci);
            }
        }
        let mut queue: VecDeque<usize> = VecDeque::new();
        let set = |v: usize, truth: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
            if !truth[v] {
                truth[v] = true;
                queue.push_back(v);
            }
        };
        for s in seeds {
            set(s, &mut truth, &mut queue);
        }
        for (ci, cl) in self.clauses.iter().enumerate() {
            if missing[ci] == 0 {
                set(cl.concl, &mut truth, &mut queue);
            }
        }
        while let Some(v) = queue.pop_front() {
            // each distinct hypothesis variable is watched once and becomes
            // true at most once, so the counters never underflow
            for &ci in &watchers[v] {
                missing[ci] -= 1;
                if missing[ci] == 0 {
                    set(self.clauses[ci].concl, &mut truth, &mut queue);
                }
            }
        }
        truth
    }

    pub fn minimal_model(&self) -> Vec<bool> {
        self.closure(std::iter::empty())
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|cl| !cl.hyps.iter().all(|&h| assignment[h]) || assignment[cl.concl])
    }

    /// All models, by brute force (guarded to small systems).
    pub fn models(&self) -> Vec<Vec<bool>> {
        assert!(self.vars <= 20, "model enumeration is exponential");
        let mut out = Vec::new();
        for bits in 0u64..(1u64 << self.vars) {
            let assignment: Vec<bool> = (0..self.vars).map(|v| bits >> v & 1 == 1).collect();
            if self.satisfied_by(&assignment) {
                out.push(assignment);
            }
        }
        out
    }

    /// Variables implied by the clause set alone (`F -> q` a tautology),
    /// established by enumerating all assignments — an oracle for tests.
    pub fn tautological_consequences(&self) -> Vec<bool> {
        let mut out = vec![true; self.vars];
        for m in self.models() {
            for v in 0..self.vars {
                out[v] &= m[v];
            }
        }
        out
    }
}

/// Antichain of minimal assumption sets, one per variable, produced by
/// [`minimal_supports`].  Masks index into the `assumptions` slice that was
/// passed in (bit `i` = `assumptions[i]`).
#[derive(Clone, Debug)]
pub struct SupportAnalysis {
    pub supports: Vec<Vec<u128>>,
}

impl SupportAnalysis {
    /// Is `var` derivable from the assumption set `mask`?
    pub fn derivable_from(&self, var: usize, mask: u128) -> bool {
        self.supports[var].iter().any(|&b| b & !mask == 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SupportError {
    TooManyAssumptions(usize),
    /// A designated assumption variable is concluded by a clause.
    ConcludedAssumption(usize),
    /// An antichain outgrew the configured cap — the analysis would blow up.
    Blowup { var: usize, cap: usize },
}

impl fmt::Display for SupportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportError::TooManyAssumptions(k) => {
                write!(f, "{k} assumption variables exceed the 128-bit mask")
            }
            SupportError::ConcludedAssumption(v) => {
                write!(f, "assumption variable {v} is concluded by a clause")
            }
            SupportError::Blowup { var, cap } => write!(
                f,
                "minimal-support antichain of variable {var} exceeded {cap} entries"
            ),
        }
    }
}

impl std::error::Error for SupportError {}

#[derive(Clone, Debug)]
pub struct SupportOpts {
    /// Cap on the antichain size of any single variable.
    pub cap: usize,
    /// Mask of assumption bits that are pairwise exclusive: any combined
    /// support containing two of them is discarded as unsatisfiable.
    pub exclusive: u128,
}

impl Default for SupportOpts {
    fn default() -> Self {
        SupportOpts {
            cap: 512,
            exclusive: 0,
        }
    }
}

fn insert_minimal(antichain: &mut Vec<u128>, b: u128) -> bool {
    if antichain.iter().any(|&e| e & !b == 0) {
        return false; // some existing set is a subset of b
    }
    antichain.retain(|&e| b & !e != 0); // drop supersets of b
    antichain.push(b);
    true
}

/// For every variable `q`, computes the minimal sets `B` of assumption
/// variables such that `q` lies in `closure(B)`.  Assumption variables must
/// not be concluded by any clause; their own support is the singleton.
pub fn minimal_supports(
    sys: &HornSystem,
    assumptions: &[usize],
    opts: &SupportOpts,
) -> Result<SupportAnalysis, SupportError> {
    if assumptions.len() > 128 {
        return Err(SupportError::TooManyAssumptions(assumptions.len()));
    }
    for cl in &sys.clauses {
        if assumptions.contains(&cl.concl) {
            return Err(SupportError::ConcludedAssumption(cl.concl));
        }
    }
    let mut supports: Vec<Vec<u128>> = vec![Vec::new(); sys.vars];
    for (i, &a) in assumptions.iter().enumerate() {
        supports[a] = vec![1u128 << i];
    }

    let mut watchers: Vec<Vec<usize>> = vec![Vec::new(); sys.vars];
    for (ci, cl) in sys.clauses.iter().enumerate() {
        for &h in &cl.hyps {
            if !watchers[h].contains(&ci) {
                watchers[h].push(ci);
            }
        }
    }

    let mut queue: VecDeque<usize> = (0..sys.clauses.len()).collect();
    let mut queued = vec![true; sys.clauses.len()];
    while let Some(ci) = queue.pop_front() {
        queued[ci] = false;
        let cl = &sys.clauses[ci];
        // cross product of the hypotheses' antichains, pruned as we go
        let mut candidates: Vec<u128> = vec![0];
        for &h in &cl.hyps {
            if supports[h].is_empty() {
                candidates.clear();
                break;
            }
            let mut next: Vec<u128> = Vec::new();
            for &c in &candidates {
                for &s in &supports[h] {
                    let b = c | s;
                    if (b & opts.exclusive).count_ones() >= 2 {
                        continue;
                    }
                    insert_minimal(&mut next, b);
                }
            }
            candidates = next;
            if candidates.len() > opts.cap * 8 {
                return Err(SupportError::Blowup {
                    var: cl.concl,
                    cap: opts.cap,
                });
            }
        }
        let mut changed = false;
        for b in candidates {
            changed |= insert_minimal(&mut supports[cl.concl], b);
        }
        if supports[cl.concl].len() > opts.cap {
            return Err(SupportError::Blowup {
                var: cl.concl,
                cap: opts.cap,
            });
        }
        if changed {
            for &rc in &watchers[cl.concl] {
                if !queued[rc] {
                    queued[rc] = true;
                    queue.push_back(rc);
                }
            }
        }
    }

    Ok(SupportAnalysis { supports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth_set(v: &[bool]) -> Vec<usize> {
        v.iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    #[test]
    fn footnote_example() {
        // facts p1, p3; p1 & p3 -> p5; p1 & p2 -> p4
        let mut sys = HornSystem::new(6);
        sys.add(vec![], 1);
        sys.add(vec![], 3);
        sys.add(vec![1, 3], 5);
        sys.add(vec![1, 2], 4);
        let m = sys.minimal_model();
        assert_eq!(truth_set(&m), vec![1, 3, 5]);
        assert_eq!(truth_set(&sys.tautological_consequences()), vec![1, 3, 5]);
    }

    #[test]
    fn least_model_is_intersection_of_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let vars = rng.gen_range(1..=6);
            let mut sys = HornSystem::new(vars);
            for _ in 0..rng.gen_range(0..=12) {
                let r = rng.gen_range(0..=3.min(vars));
                let hyps: Vec<usize> = (0..r).map(|_| rng.gen_range(0..vars)).collect();
                sys.add(hyps, rng.gen_range(0..vars));
            }
            let least = sys.minimal_model();
            assert!(sys.satisfied_by(&least));
            let models = sys.models();
            let mut inter = vec![true; vars];
            for m in &models {
                for v in 0..vars {
                    inter[v] &= m[v];
                }
            }
            assert_eq!(least, inter);
            assert_eq!(least, sys.tautological_consequences());
        }
    }

    #[test]
    fn duplicate_hypotheses_fire_correctly() {
        let mut sys = HornSystem::new(3);
        sys.add(vec![0, 0], 1);
        sys.add(vec![], 0);
        let m = sys.minimal_model();
        assert_eq!(truth_set(&m), vec![0, 1]);
    }

    #[test]
    fn minimal_supports_match_bruteforce() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..200 {
            let n_assume = rng.gen_range(1..=5usize);
            let n_inner = rng.gen_range(1..=5usize);
            let vars = n_assume + n_inner;
            let assumptions: Vec<usize> = (0..n_assume).collect();
            let mut sys = HornSystem::new(vars);
            for _ in 0..rng.gen_range(0..=10) {
                let concl = rng.gen_range(n_assume..vars);
                let r = rng.gen_range(0..=3usize);
                let hyps: Vec<usize> = (0..r).map(|_| rng.gen_range(0..vars)).collect();
                sys.add(hyps, concl);
            }
            let analysis =
                minimal_supports(&sys, &assumptions, &SupportOpts::default()).unwrap();
            for q in 0..vars {
                for mask in 0u128..(1 << n_assume) {
                    let seeds = (0..n_assume).filter(|&i| mask >> i & 1 == 1);
                    let direct = sys.closure(seeds)[q];
                    assert_eq!(
                        analysis.derivable_from(q, mask),
                        direct,
                        "round {round}, var {q}, mask {mask:b}"
                    );
                }
            }
        }
    }

    #[test]
    fn exclusive_assumptions_are_pruned() {
        // q needs both assumptions; marking them exclusive removes the support
        let mut sys = HornSystem::new(3);
        sys.add(vec![0, 1], 2);
        let free = minimal_supports(&sys, &[0, 1], &SupportOpts::default()).unwrap();
        assert_eq!(free.supports[2], vec![0b11]);
        let excl = minimal_supports(
            &sys,
            &[0, 1],
            &SupportOpts {
                exclusive: 0b11,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(excl.supports[2].is_empty());
    }
}
