//! Trajectory ensembles and survival statistics.
//!
//! `Gamma` independent trajectories, each seeded from `(master_seed,
//! trajectory index)` through a dedicated ChaCha stream, aggregate into a
//! [`SurvivalTable`]: for every energy level `E` the sorted list of
//! first-passage times, from which the survival probability `p(E, t)` (the
//! fraction of trajectories that have not yet visited an orthant of energy
//! at or below `E` by time `t`) is exact, with no binning. Results are
//! bit-identical for a fixed seed regardless of worker count, since each
//! trajectory is a pure function of its index and aggregation runs in index
//! order.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{
    integrate, random_interior_point, SolverParams, TrajectoryFailure, TrajectoryOutcome,
};
use crate::formula::{Assignment, Formula};
use crate::scalar::{fl, Real};

/// Which states count as "reached level E".
///
/// The survival probability is described with "energy smaller than E" but
/// consumed as the fraction that attained `E`; the inclusive convention
/// makes `n(E) = [1 - p(E, t_max)] * Gamma` count trajectories that reached
/// `E`. The strict variant is the same data shifted by one level and is
/// exposed for sensitivity checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum LevelSemantics {
    /// `p(E, t)` = probability of not yet having visited energy `<= E`.
    #[default]
    Le,
    /// `p(E, t)` = probability of not yet having visited energy `< E`.
    Lt,
}

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("t_max mismatch: {left} vs {right}")]
    TMaxMismatch { left: f64, right: f64 },
    #[error("tables come from different formulas ({left_vars}v/{left_clauses}c vs {right_vars}v/{right_clauses}c)")]
    FormulaMismatch {
        left_vars: usize,
        left_clauses: usize,
        right_vars: usize,
        right_clauses: usize,
    },
}

#[derive(Debug, Error)]
pub enum CostCurveError {
    #[error("no trajectory reached energy level {level}")]
    LevelNeverReached { level: i64 },
}

/// Ensemble aggregate of first-passage statistics.
///
/// Rows cover every integer level from the best energy seen up to the
/// highest starting-orthant energy; levels above that are trivially reached
/// at `t = 0` by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalTable<F> {
    gamma: u64,
    t_max: F,
    num_vars: usize,
    num_clauses: usize,
    min_level: i64,
    /// `rows[i]` = first-passage times to level `min_level + i`, one entry
    /// per trajectory that reached it; sorted ascending once canonical.
    rows: Vec<Vec<F>>,
    best_assignments: BTreeSet<Assignment>,
    failures: u64,
    canonical: bool,
}

impl<F: Real> SurvivalTable<F> {
    pub fn empty(f: &Formula, t_max: F) -> Self {
        SurvivalTable {
            gamma: 0,
            t_max,
            num_vars: f.num_vars(),
            num_clauses: f.num_clauses(),
            min_level: 0,
            rows: Vec::new(),
            best_assignments: BTreeSet::new(),
            failures: 0,
            canonical: true,
        }
    }

    #[inline]
    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    #[inline]
    pub fn t_max(&self) -> F {
        self.t_max
    }

    /// Trajectories excluded (non-finite failure) or truncated (step-size
    /// underflow) by the integrator.
    pub fn failures(&self) -> u64 {
        self.failures
    }

    /// Lowest energy level reached by any trajectory.
    pub fn best_energy(&self) -> Option<i64> {
        (!self.rows.is_empty()).then_some(self.min_level)
    }

    /// Highest starting-orthant energy across trajectories; above this every
    /// level is reached at `t = 0`.
    pub fn ceiling(&self) -> Option<i64> {
        (!self.rows.is_empty()).then(|| self.min_level + self.rows.len() as i64 - 1)
    }

    /// Distinct assignments attaining [`SurvivalTable::best_energy`].
    pub fn best_assignments(&self) -> impl Iterator<Item = &Assignment> {
        self.best_assignments.iter()
    }

    pub fn levels(&self) -> impl Iterator<Item = i64> {
        let lo = self.min_level;
        lo..lo + self.rows.len() as i64
    }

    /// Number of trajectories that reached level `e` by `t_max`.
    pub fn n_at(&self, e: i64) -> u64 {
        match self.row(e) {
            RowRef::Below => 0,
            RowRef::Above => self.gamma,
            RowRef::Stored(r) => r.len() as u64,
        }
    }

    fn row(&self, e: i64) -> RowRef<'_, F> {
        if self.rows.is_empty() || e < self.min_level {
            RowRef::Below
        } else if e >= self.min_level + self.rows.len() as i64 {
            RowRef::Above
        } else {
            RowRef::Stored(&self.rows[(e - self.min_level) as usize])
        }
    }

    /// Exact survival probability `p(e, t)`: the fraction of trajectories
    /// whose first-passage time to level `e` exceeds `t`.
    pub fn survival(&self, e: i64, t: F) -> F {
        assert!(self.canonical, "canonicalize() the table before querying");
        if self.gamma == 0 {
            return F::one();
        }
        let reached = match self.row(e) {
            RowRef::Below => 0,
            RowRef::Above => self.gamma as usize,
            RowRef::Stored(r) => r.partition_point(|&x| x <= t),
        };
        F::one() - fl::<F>(reached as f64) / fl(self.gamma as f64)
    }

    /// [`SurvivalTable::survival`] under either level convention.
    pub fn survival_sem(&self, e: i64, t: F, sem: LevelSemantics) -> F {
        match sem {
            LevelSemantics::Le => self.survival(e, t),
            LevelSemantics::Lt => self.survival(e - 1, t),
        }
    }

    /// `n_at` under either level convention.
    pub fn n_at_sem(&self, e: i64, sem: LevelSemantics) -> u64 {
        match sem {
            LevelSemantics::Le => self.n_at(e),
            LevelSemantics::Lt => self.n_at(e - 1),
        }
    }

    /// Sorted first-passage times stored for level `e`.
    pub fn passage_times(&self, e: i64) -> &[F] {
        match self.row(e) {
            RowRef::Stored(r) => r,
            _ => &[],
        }
    }

    /// Folds one trajectory outcome into the table.
    pub fn push_outcome(&mut self, out: &TrajectoryOutcome<F>) {
        let recs: Vec<(i64, F)> = out.first_passage.iter().map(|(&e, &t)| (e, t)).collect();
        assert!(!recs.is_empty(), "trajectory outcome carries no record");
        let best = recs[0].0;
        let start = recs[recs.len() - 1].0;
        let old_best = self.best_energy();

        if self.rows.is_empty() {
            self.min_level = best;
            self.rows = vec![Vec::new(); (start - best + 1) as usize];
        } else {
            if best < self.min_level {
                let mut grown = vec![Vec::new(); (self.min_level - best) as usize];
                grown.append(&mut self.rows);
                self.rows = grown;
                self.min_level = best;
            }
            let ceiling = self.min_level + self.rows.len() as i64 - 1;
            if start > ceiling {
                // every earlier trajectory sat at or below these levels from t = 0
                for _ in ceiling..start {
                    self.rows.push(vec![F::zero(); self.gamma as usize]);
                }
            }
        }

        let ceiling = self.min_level + self.rows.len() as i64 - 1;
        let mut ri = 0usize;
        for level in best..=ceiling {
            while ri + 1 < recs.len() && recs[ri + 1].0 <= level {
                ri += 1;
            }
            self.rows[(level - self.min_level) as usize].push(recs[ri].1);
        }

        match old_best {
            Some(b) if b < best => {}
            Some(b) if b == best => {
                self.best_assignments.insert(out.best_assignment.clone());
            }
            _ => {
                self.best_assignments.clear();
                self.best_assignments.insert(out.best_assignment.clone());
            }
        }
        self.gamma += 1;
        self.canonical = false;
    }

    fn record_failure(&mut self) {
        self.failures += 1;
    }

    /// Sorts every passage list; queries and comparisons assume this form.
    pub fn canonicalize(&mut self) {
        if self.canonical {
            return;
        }
        for r in self.rows.iter_mut() {
            r.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite passage times"));
        }
        self.canonical = true;
    }

    /// Associative, commutative merge of two ensembles over the same formula
    /// and horizon.
    pub fn merge(&self, other: &Self) -> Result<Self, MergeError> {
        if self.t_max != other.t_max {
            return Err(MergeError::TMaxMismatch {
                left: self.t_max.to_f64().unwrap_or(f64::NAN),
                right: other.t_max.to_f64().unwrap_or(f64::NAN),
            });
        }
        if self.num_vars != other.num_vars || self.num_clauses != other.num_clauses {
            return Err(MergeError::FormulaMismatch {
                left_vars: self.num_vars,
                left_clauses: self.num_clauses,
                right_vars: other.num_vars,
                right_clauses: other.num_clauses,
            });
        }
        let mut merged = SurvivalTable {
            gamma: self.gamma + other.gamma,
            t_max: self.t_max,
            num_vars: self.num_vars,
            num_clauses: self.num_clauses,
            min_level: 0,
            rows: Vec::new(),
            best_assignments: BTreeSet::new(),
            failures: self.failures + other.failures,
            canonical: true,
        };
        let lo = match (self.best_energy(), other.best_energy()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.ceiling(), other.ceiling()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        if let (Some(lo), Some(hi)) = (lo, hi) {
            merged.min_level = lo;
            merged.rows = (lo..=hi)
                .map(|level| {
                    let mut row: Vec<F> = Vec::new();
                    for side in [self, other] {
                        match side.row(level) {
                            RowRef::Below => {}
                            RowRef::Above => {
                                row.extend(std::iter::repeat_n(F::zero(), side.gamma as usize))
                            }
                            RowRef::Stored(r) => row.extend_from_slice(r),
                        }
                    }
                    row.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite passage times"));
                    row
                })
                .collect();
        }
        match (self.best_energy(), other.best_energy()) {
            (Some(a), Some(b)) if a == b => {
                merged.best_assignments = self
                    .best_assignments
                    .union(&other.best_assignments)
                    .cloned()
                    .collect();
            }
            (Some(a), Some(b)) => {
                let src = if a < b { self } else { other };
                merged.best_assignments = src.best_assignments.clone();
            }
            (Some(_), None) => merged.best_assignments = self.best_assignments.clone(),
            (None, _) => merged.best_assignments = other.best_assignments.clone(),
        }
        Ok(merged)
    }

    /// `cost(t) = t / (1 - p(e, t))` over `grid`; grid points where
    /// `p(e, t) = 1` are omitted.
    pub fn cost_curve(&self, e: i64, grid: &[F]) -> Result<Vec<(F, F)>, CostCurveError> {
        if self.n_at(e) == 0 {
            return Err(CostCurveError::LevelNeverReached { level: e });
        }
        Ok(grid
            .iter()
            .filter_map(|&t| {
                let p = self.survival(e, t);
                (p < F::one()).then(|| (t, t / (F::one() - p)))
            })
            .collect())
    }

    /// Structural sanity: sorted rows, monotone level counts, and pointwise
    /// dominance of deeper levels by shallower ones.
    pub fn validate(&self) -> Result<(), String> {
        assert!(self.canonical, "canonicalize() the table before validating");
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() as u64 > self.gamma {
                return Err(format!("level {} has more entries than gamma", i));
            }
            if r.windows(2).any(|w| w[0] > w[1]) {
                return Err(format!("level {} not sorted", i));
            }
            if r.iter().any(|&t| t < F::zero() || t > self.t_max) {
                return Err(format!("level {} has out-of-range time", i));
            }
        }
        for w in self.rows.windows(2) {
            let (deep, shallow) = (&w[0], &w[1]);
            if shallow.len() < deep.len() {
                return Err("n_at not monotone in E".to_string());
            }
            for (a, b) in deep.iter().zip(shallow.iter()) {
                if b > a {
                    return Err("passage to a shallower level later than to a deeper one".into());
                }
            }
        }
        Ok(())
    }

    /// `E,t,p` rows on a uniform grid; presentation-only binning of the
    /// exact table.
    pub fn write_survival_csv<W: Write>(
        &self,
        mut w: W,
        bins: usize,
        sem: LevelSemantics,
    ) -> io::Result<()> {
        writeln!(w, "E,t,p")?;
        let bins = bins.max(2);
        for e in self.levels() {
            for i in 0..bins {
                let t = self.t_max * fl(i as f64) / fl((bins - 1) as f64);
                writeln!(w, "{},{},{}", e, t, self.survival_sem(e, t, sem))?;
            }
        }
        Ok(())
    }

    /// JSON-facing summary: per-level counts and the best assignments.
    pub fn summary(&self) -> TableSummary {
        TableSummary {
            gamma: self.gamma,
            t_max: self.t_max.to_f64().unwrap_or(f64::NAN),
            best_energy: self.best_energy(),
            failures: self.failures,
            n_at: self.levels().map(|e| (e, self.n_at(e))).collect(),
            best_assignments: self
                .best_assignments()
                .map(|a| a.to_compact_string())
                .collect(),
        }
    }
}

enum RowRef<'a, F> {
    /// Level below everything reached: nobody got there.
    Below,
    /// Level above the highest start: everybody was there at `t = 0`.
    Above,
    Stored(&'a [F]),
}

#[derive(Clone, Debug, Serialize)]
pub struct TableSummary {
    pub gamma: u64,
    pub t_max: f64,
    pub best_energy: Option<i64>,
    pub failures: u64,
    pub n_at: std::collections::BTreeMap<i64, u64>,
    pub best_assignments: Vec<String>,
}

/// Initial condition of ensemble trajectory `index`: stream `index` of the
/// ChaCha generator seeded by `master_seed`.
pub fn trajectory_start<F: Real>(f: &Formula, master_seed: u64, index: u64) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    random_interior_point(f.num_vars(), &mut rng)
}

/// Runs trajectory `index` of the ensemble seeded by `master_seed`.
pub fn run_trajectory<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    master_seed: u64,
    index: u64,
) -> Result<TrajectoryOutcome<F>, TrajectoryFailure<F>> {
    integrate(f, params, trajectory_start(f, master_seed, index))
}

/// How many trajectories to materialize per scheduling batch.
const BATCH: u64 = 1024;

pub(crate) fn compute_range<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    master_seed: u64,
    start: u64,
    end: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Vec<Result<TrajectoryOutcome<F>, TrajectoryFailure<F>>> {
    let job = || {
        (start..end)
            .into_par_iter()
            .map(|i| run_trajectory(f, params, master_seed, i))
            .collect()
    };
    match pool {
        Some(p) => p.install(job),
        None => job(),
    }
}

/// Builds a dedicated pool when a specific worker count is requested;
/// `workers = 0` uses the global rayon pool.
pub(crate) fn make_pool(workers: usize) -> Option<rayon::ThreadPool> {
    (workers > 0).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool")
    })
}

pub(crate) fn fold_outcome<F: Real>(
    table: &mut SurvivalTable<F>,
    result: &Result<TrajectoryOutcome<F>, TrajectoryFailure<F>>,
) {
    match result {
        Ok(out) => table.push_outcome(out),
        Err(fail) => {
            // a step-size underflow still carries valid passage statistics;
            // a non-finite trajectory is excluded entirely
            if let Some(partial) = &fail.partial {
                if matches!(fail.kind, crate::dynamics::FailureKind::StepSizeUnderflow { .. }) {
                    table.push_outcome(partial);
                }
            }
            table.record_failure();
        }
    }
}

/// Runs `gamma` trajectories on the global rayon pool.
pub fn run_ensemble<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    gamma: u64,
    master_seed: u64,
) -> SurvivalTable<F> {
    run_ensemble_with_workers(f, params, gamma, master_seed, 0)
}

/// Runs `gamma` trajectories on `workers` threads (0 = global pool). The
/// resulting table is bit-identical for any worker count.
pub fn run_ensemble_with_workers<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    gamma: u64,
    master_seed: u64,
    workers: usize,
) -> SurvivalTable<F> {
    let pool = make_pool(workers);
    let mut table = SurvivalTable::empty(f, params.t_max);
    let mut start = 0;
    while start < gamma {
        let end = (start + BATCH).min(gamma);
        for result in &compute_range(f, params, master_seed, start, end, pool.as_ref()) {
            fold_outcome(&mut table, result);
        }
        start = end;
    }
    table.canonicalize();
    table
}
