//! The continuous-time flow.
//!
//! Boolean variables are relaxed to spins `s_i in [-1,1]`; every clause `m`
//! carries an analog clause function
//!
//! ```text
//! K_m(s) = 2^{-k_m} prod_j (1 - c_mj s_j)
//! ```
//!
//! over its `k_m` literals (`c_mj = +-1`), which vanishes at a hypercube
//! corner iff the corner satisfies the clause. The potential adds a
//! center-repelling "hat" term so that the origin never traps the search:
//!
//! ```text
//! V(s,a) = sum_m a_m K_m^2 + b * alpha * mean(a) * sum_i cos^2(pi s_i / 2)
//! ```
//!
//! The spins follow `-grad_s V` while the auxiliary weights grow as
//! `da_m/dt = a_m K_m`, exponentially amplifying long-unsatisfied clauses.

mod integrator;

pub use integrator::{
    integrate, integrate_observed, integrate_traced, FailureKind, TraceRow, TrajectoryFailure,
    TrajectoryOutcome,
};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::formula::Formula;
use crate::scalar::{fl, sin_pi, Real};

/// Solver state: spins, auxiliary clause weights and analog time.
#[derive(Clone, Debug)]
pub struct ContinuousState<F> {
    /// Spin vector, each component in `[-1, 1]`.
    pub s: Vec<F>,
    /// Auxiliary weights, positive and non-decreasing along a trajectory.
    pub a: Vec<F>,
    /// Analog time.
    pub t: F,
    /// Cumulative `ln` of the factor divided out of `a` by the overflow
    /// guard; zero unless the guard ever fired.
    pub a_log_scale: F,
}

impl<F: Real> ContinuousState<F> {
    /// Fresh state at `t = 0` with unit weights.
    pub fn new(s0: Vec<F>, num_clauses: usize) -> Self {
        ContinuousState {
            s: s0,
            a: vec![F::one(); num_clauses],
            t: F::zero(),
            a_log_scale: F::zero(),
        }
    }

    /// Mean of the auxiliary weights.
    pub fn mean_weight(&self) -> F {
        let mut sum = F::zero();
        for &a in &self.a {
            sum += a;
        }
        sum / fl(self.a.len() as f64)
    }
}

/// Integration and dynamics parameters for a single trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams<F> {
    /// Hat-term strength; `0` recovers the plain SAT flow.
    pub b: F,
    /// Trajectory horizon in analog time.
    pub t_max: F,
    /// Absolute step-error tolerance.
    pub abs_tol: F,
    /// Relative step-error tolerance.
    pub rel_tol: F,
    /// Initial step size.
    pub h_init: F,
    /// Smallest step size before the integrator gives up.
    pub h_min: F,
    /// Largest allowed step size.
    pub h_max: F,
    /// Auxiliary-weight ceiling; above it all `a_m` are divided by their
    /// mean and the log-scale is recorded. Never reached at the default
    /// horizon (`a_m <= e^50`).
    pub renorm_threshold: F,
}

impl<F: Real> Default for SolverParams<F> {
    fn default() -> Self {
        let renorm = fl::<F>(1e100);
        SolverParams {
            b: F::zero(),
            t_max: fl(50.0),
            abs_tol: fl(1e-6),
            rel_tol: fl(1e-4),
            h_init: fl(1e-3),
            h_min: fl(1e-12),
            h_max: F::one(),
            renorm_threshold: if renorm.is_finite() {
                renorm
            } else {
                F::max_value().sqrt()
            },
        }
    }
}

impl<F: Real> SolverParams<F> {
    pub fn with_b(mut self, b: F) -> Self {
        self.b = b;
        self
    }

    pub fn with_t_max(mut self, t_max: F) -> Self {
        self.t_max = t_max;
        self
    }

    /// Parameters for the short `b`-selection probe: large hat term, short
    /// horizon.
    pub fn probe_defaults() -> Self {
        SolverParams::default().with_b(fl(0.1)).with_t_max(fl(10.0))
    }
}

/// `K_m(s)` for clause `m`: in `[0,1]`, zero at a corner iff the corner
/// satisfies the clause.
pub fn clause_function<F: Real>(f: &Formula, s: &[F], m: usize) -> F {
    let clause = f.clause(m);
    let norm = F::powi(fl(0.5), clause.len() as i32);
    let mut prod = F::one();
    for l in clause {
        let c = if l.is_negated() { -F::one() } else { F::one() };
        prod *= F::one() - c * s[l.var()];
    }
    norm * prod
}

/// Mean over clauses of `K_m(0)^2 = 2^{-2 k_m}`; the center value entering
/// the `b` selection rule.
pub fn mean_center_k_squared<F: Real>(f: &Formula) -> F {
    let mut sum = F::zero();
    for m in 0..f.num_clauses() {
        sum += F::powi(fl(0.5), 2 * f.clause_len(m) as i32);
    }
    sum / fl(f.num_clauses() as f64)
}

/// The potential `V(s, a)` with hat strength `b`.
pub fn potential<F: Real>(f: &Formula, state: &ContinuousState<F>, b: F) -> F {
    potential_parts(f, &state.s, &state.a, b)
}

pub(crate) fn potential_parts<F: Real>(f: &Formula, s: &[F], a: &[F], b: F) -> F {
    let mut v = F::zero();
    for (m, &w) in a.iter().enumerate() {
        let k = clause_function(f, s, m);
        v += w * k * k;
    }
    let alpha = fl::<F>(f.constraint_density());
    let mut hat = F::zero();
    for &si in s {
        let c = (F::FRAC_PI_2() * si).cos();
        hat += c * c;
    }
    v + b * alpha * mean_of(a) * hat
}

#[inline]
pub(crate) fn mean_of<F: Real>(xs: &[F]) -> F {
    let mut sum = F::zero();
    for &x in xs {
        sum += x;
    }
    sum / fl(xs.len() as f64)
}

/// Reusable buffers for the gradient computation.
#[derive(Clone, Debug)]
pub struct RhsScratch<F> {
    prefix: Vec<F>,
}

impl<F> Default for RhsScratch<F> {
    fn default() -> Self {
        RhsScratch { prefix: Vec::new() }
    }
}

/// Time derivatives of `(s, a)` written into `ds` and `da`.
///
/// For each clause the per-literal products `K_mi = K_m / (1 - c_mi s_i)`
/// are formed from prefix/suffix partial products rather than by division,
/// so corners where a factor vanishes stay exact.
pub(crate) fn rhs_raw<F: Real>(
    f: &Formula,
    s: &[F],
    a: &[F],
    b: F,
    ds: &mut [F],
    da: &mut [F],
    scratch: &mut RhsScratch<F>,
) {
    ds.fill(F::zero());

    let two = fl::<F>(2.0);
    for (m, da_m) in da.iter_mut().enumerate() {
        let clause = f.clause(m);
        let k_len = clause.len();
        let norm = F::powi(fl(0.5), k_len as i32);
        scratch.prefix.clear();
        scratch.prefix.reserve(k_len);
        let mut prod = F::one();
        for l in clause {
            scratch.prefix.push(prod);
            let c = if l.is_negated() { -F::one() } else { F::one() };
            prod *= F::one() - c * s[l.var()];
        }
        let k_m = norm * prod;
        *da_m = a[m] * k_m;
        if k_m == F::zero() {
            continue; // every gradient contribution carries a factor K_m
        }
        let mut suffix = F::one();
        for (i, l) in clause.iter().enumerate().rev() {
            let c = if l.is_negated() { -F::one() } else { F::one() };
            let k_mi = norm * scratch.prefix[i] * suffix;
            ds[l.var()] += two * a[m] * c * k_mi * k_m;
            suffix *= F::one() - c * s[l.var()];
        }
    }

    if b != F::zero() {
        let alpha = fl::<F>(f.constraint_density());
        let gain = F::FRAC_PI_2() * b * alpha * mean_of(a);
        for (d, &si) in ds.iter_mut().zip(s) {
            *d += gain * sin_pi(si);
        }
    }
}

/// Time derivatives of `(s, a)` at `state`.
pub fn rhs<F: Real>(f: &Formula, state: &ContinuousState<F>, b: F) -> (Vec<F>, Vec<F>) {
    let mut ds = vec![F::zero(); f.num_vars()];
    let mut da = vec![F::zero(); f.num_clauses()];
    rhs_raw(
        f,
        &state.s,
        &state.a,
        b,
        &mut ds,
        &mut da,
        &mut RhsScratch::default(),
    );
    (ds, da)
}

/// Components drawn i.i.d. Uniform(-1, 1), strictly inside the hypercube.
pub fn random_interior_point<F: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<F> {
    (0..n)
        .map(|_| loop {
            let x: F = rng.random_range(-F::one()..F::one());
            if x.abs() < F::one() {
                break x;
            }
        })
        .collect()
}

/// Selects the hat strength `b` from one probe trajectory.
///
/// Runs a single trajectory with the (deliberately large) probe `b`, takes
/// the best corner energy `E'` it reaches and returns
/// `max(0, E'/M - mean_m 2^{-2 k_m})`, the growth-rate balance that keeps
/// the origin from becoming an attractor.
pub fn choose_b<F: Real>(f: &Formula, probe: &SolverParams<F>, rng_seed: u64) -> F {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // dedicated stream, disjoint from the per-trajectory streams
    rng.set_stream(u64::MAX);
    let s0 = random_interior_point(f.num_vars(), &mut rng);
    let best = match integrate(f, probe, s0) {
        Ok(out) => out.best_energy,
        Err(fail) => fail
            .partial
            .map(|o| o.best_energy)
            .unwrap_or(f.num_clauses() as i64),
    };
    let candidate =
        fl::<F>(best as f64) / fl(f.num_clauses() as f64) - mean_center_k_squared(f);
    candidate.max(F::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Assignment, TautologyPolicy};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn f(n: usize, clauses: &[&[i32]]) -> Formula {
        Formula::from_clauses(
            n,
            clauses.iter().map(|c| c.to_vec()),
            TautologyPolicy::Reject,
        )
        .unwrap()
        .0
    }

    fn random_3sat(n: usize, m: usize, seed: u64) -> Formula {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clauses: Vec<Vec<i32>> = (0..m)
            .map(|_| {
                let mut vars: Vec<i32> = Vec::new();
                while vars.len() < 3 {
                    let v = rng.random_range(1..=n as i32);
                    if !vars.contains(&v) {
                        vars.push(v);
                    }
                }
                vars.into_iter()
                    .map(|v| if rng.random_range(0..2) == 0 { v } else { -v })
                    .collect()
            })
            .collect();
        Formula::from_clauses(n, clauses, TautologyPolicy::Reject)
            .unwrap()
            .0
    }

    #[test]
    fn clause_function_at_center_and_corners() {
        let formula = f(3, &[&[1, -2, 3]]);
        let center = vec![0.0f64; 3];
        assert_eq!(clause_function(&formula, &center, 0), 0.125);
        // corner satisfying the clause: one factor vanishes
        let sat = vec![1.0, 0.5, -0.3];
        assert_eq!(clause_function(&formula, &sat, 0), 0.0);
        // corner violating every literal: all factors equal 2
        let unsat = vec![-1.0, 1.0, -1.0];
        assert_eq!(clause_function(&formula, &unsat, 0), 1.0);
    }

    #[test]
    fn potential_at_center_matches_closed_form() {
        // uniform k = 3, uniform a = 1: V(0) = (2^-6 + b) * M
        let formula = random_3sat(6, 24, 7);
        let state = ContinuousState::new(vec![0.0f64; 6], 24);
        let b = 0.05;
        assert_relative_eq!(
            potential(&formula, &state, b),
            (2f64.powi(-6) + b) * 24.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn potential_at_corner_sums_unsatisfied_weights() {
        let formula = random_3sat(8, 40, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..8)
            .map(|_| if rng.random_range(0..2) == 0 { -1.0 } else { 1.0 })
            .collect();
        let mut state = ContinuousState::new(s.clone(), 40);
        for (m, w) in state.a.iter_mut().enumerate() {
            *w = 1.0 + m as f64 * 0.1;
        }
        let x = Assignment::from_signs(&s);
        let expected: f64 = (0..formula.num_clauses())
            .filter(|&m| !formula.clause_satisfied(m, &x))
            .map(|m| state.a[m])
            .sum();
        // hat term vanishes in corners for any b
        assert_relative_eq!(potential(&formula, &state, 0.3), expected, max_relative = 1e-12);
    }

    #[test]
    fn rhs_vanishes_exactly_at_satisfying_corner() {
        // (x1 | x2) & (!x1 | x3): satisfied by (1,1,1)
        let formula = f(3, &[&[1, 2], &[-1, 3]]);
        let state = ContinuousState::new(vec![1.0f64, 1.0, 1.0], 2);
        let (ds, da) = rhs(&formula, &state, 0.25);
        assert!(ds.iter().all(|&v| v == 0.0), "ds = {ds:?}");
        assert!(da.iter().all(|&v| v == 0.0), "da = {da:?}");
    }

    #[test]
    fn rhs_matches_finite_difference_of_potential() {
        let mut worst = 0.0f64;
        for seed in 0..20 {
            let formula = random_3sat(10, 60, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..5 {
                let s: Vec<f64> = (0..10).map(|_| rng.random_range(-0.95..0.95)).collect();
                let mut state = ContinuousState::new(s, 60);
                for w in state.a.iter_mut() {
                    *w = rng.random_range(0.5..3.0);
                }
                let b = 0.07;
                let (ds, _) = rhs(&formula, &state, b);
                let h = 1e-6;
                for (i, &g) in ds.iter().enumerate() {
                    let mut hi = state.clone();
                    hi.s[i] += h;
                    let mut lo = state.clone();
                    lo.s[i] -= h;
                    let fd = (potential(&formula, &hi, b) - potential(&formula, &lo, b))
                        / (2.0 * h);
                    worst = worst.max((fd + g).abs() / g.abs().max(1e-3));
                }
            }
        }
        assert!(worst < 1e-6, "worst relative gradient error {worst}");
    }

    #[test]
    fn da_over_a_equals_clause_function() {
        let formula = random_3sat(7, 30, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut state = ContinuousState::new(s, 30);
        for w in state.a.iter_mut() {
            *w = rng.random_range(0.1..5.0);
        }
        let (_, da) = rhs(&formula, &state, 0.0);
        for (m, &d) in da.iter().enumerate() {
            assert_relative_eq!(
                d / state.a[m],
                clause_function(&formula, &state.s, m),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn b_rule_direct_evaluation() {
        // E' = 8, M = 80, uniform k = 3 -> 0.1 - 2^-6 = 0.084375
        let formula = random_3sat(10, 80, 42);
        let mean = mean_center_k_squared::<f64>(&formula);
        assert_eq!(mean, 2f64.powi(-6));
        let b = (8.0 / 80.0 - mean).max(0.0);
        assert_eq!(b, 0.084375);
    }

    #[test]
    fn choose_b_clamps_to_zero_for_satisfiable_probes() {
        // x1 alone: the probe finds E' = 0 instantly
        let formula = f(1, &[&[1]]);
        let probe = SolverParams::<f64>::probe_defaults();
        assert_eq!(choose_b(&formula, &probe, 1), 0.0);
    }
}
