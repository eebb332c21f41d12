//! Adaptive 5th-order Cash-Karp integration of a single trajectory.
//!
//! A step is accepted when the embedded 4th/5th-order error estimate
//! satisfies `|err_i| <= abs_tol + rel_tol * |y_i|` componentwise. After
//! each accepted step the spins are clamped back into the hypercube, the
//! sign-orthant energy is evaluated, and the first-passage record is
//! updated. A trajectory ends at `t_max` or as soon as an energy-0 orthant
//! is found (a solution corner is an attracting fixed point, so continuing
//! is pointless).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{mean_of, potential_parts, rhs_raw, ContinuousState, RhsScratch, SolverParams};
use crate::formula::{Assignment, Formula};
use crate::scalar::{fl, Real};

/// Per-trajectory record: best orthant reached and when each energy level
/// was first entered.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryOutcome<F> {
    /// Lowest orthant energy visited.
    pub best_energy: i64,
    /// The assignment of the best orthant.
    pub best_assignment: Assignment,
    /// Energy records: `E -> analog time of the first visit to an orthant
    /// with energy <= E`. Keys are the strictly improving energies; use
    /// [`TrajectoryOutcome::time_to_level`] for intermediate levels.
    pub first_passage: BTreeMap<i64, F>,
    /// Accepted integrator steps.
    pub steps_taken: u64,
    /// True when an energy-0 orthant stopped the trajectory early.
    pub terminated_early: bool,
}

impl<F: Real> TrajectoryOutcome<F> {
    /// First time an orthant with energy `<= level` was visited, if ever.
    pub fn time_to_level(&self, level: i64) -> Option<F> {
        // records decrease in energy over time, so the earliest record at
        // or below `level` is the largest key <= level
        self.first_passage.range(..=level).next_back().map(|(_, &t)| t)
    }

    /// Energy of the initial orthant (largest record key, at `t = 0`).
    pub fn start_energy(&self) -> i64 {
        *self.first_passage.keys().next_back().expect("nonempty record")
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum FailureKind {
    #[error("step size underflow (h = {h:e} at t = {t})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state component at t = {t}")]
    NonFinite { t: f64 },
}

/// Integration failure with the state snapshot at the point of failure.
///
/// A step-size underflow still carries the passage record accumulated so
/// far in `partial`; a non-finite state does not.
#[derive(Clone, Debug)]
pub struct TrajectoryFailure<F> {
    pub kind: FailureKind,
    pub partial: Option<TrajectoryOutcome<F>>,
    pub state: ContinuousState<F>,
}

impl<F: Real> fmt::Display for TrajectoryFailure<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

impl<F: Real> std::error::Error for TrajectoryFailure<F> {}

/// One row of the optional trajectory trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow<F> {
    pub t: F,
    /// Orthant energy at the trajectory's current signs.
    pub energy: i64,
    /// Potential V(s, a).
    pub potential: F,
    /// Euclidean norm of the spin vector.
    pub radius: F,
}

// Cash-Karp tableau.
const C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
/// 5th-order solution weights.
const B5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
/// Difference to the embedded 4th-order weights, for the error estimate.
const E: [f64; 6] = [
    37.0 / 378.0 - 2825.0 / 27648.0,
    0.0,
    250.0 / 621.0 - 18575.0 / 48384.0,
    125.0 / 594.0 - 13525.0 / 55296.0,
    -277.0 / 14336.0,
    512.0 / 1771.0 - 1.0 / 4.0,
];

const SAFETY: f64 = 0.9;
const MAX_GROW: f64 = 5.0;
const MAX_SHRINK: f64 = 0.1;

struct StepBuffers<F> {
    k_s: [Vec<F>; 6],
    k_a: [Vec<F>; 6],
    s_tmp: Vec<F>,
    a_tmp: Vec<F>,
    s_new: Vec<F>,
    a_new: Vec<F>,
    signs: Vec<bool>,
    scratch: RhsScratch<F>,
}

impl<F: Real> StepBuffers<F> {
    fn new(n: usize, m: usize) -> Self {
        let zn = vec![F::zero(); n];
        let zm = vec![F::zero(); m];
        StepBuffers {
            k_s: std::array::from_fn(|_| zn.clone()),
            k_a: std::array::from_fn(|_| zm.clone()),
            s_tmp: zn.clone(),
            a_tmp: zm.clone(),
            s_new: zn.clone(),
            a_new: zm,
            signs: vec![false; n],
            scratch: RhsScratch::default(),
        }
    }
}

/// Runs one trajectory from `s0` (auxiliary weights start at 1).
pub fn integrate<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    s0: Vec<F>,
) -> Result<TrajectoryOutcome<F>, TrajectoryFailure<F>> {
    integrate_impl(f, params, s0, &mut |_, _| {})
}

/// Like [`integrate`] but calls `observer(state, orthant_energy)` at `t = 0`
/// and after every accepted step.
pub fn integrate_observed<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    s0: Vec<F>,
    observer: &mut dyn FnMut(&ContinuousState<F>, i64),
) -> Result<TrajectoryOutcome<F>, TrajectoryFailure<F>> {
    integrate_impl(f, params, s0, observer)
}

/// Outcome plus per-step trace rows.
pub type TracedOutcome<F> = (TrajectoryOutcome<F>, Vec<TraceRow<F>>);

/// Like [`integrate`] but also returns rows `(t, E, V, |s|)` at every
/// accepted step.
pub fn integrate_traced<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    s0: Vec<F>,
) -> Result<TracedOutcome<F>, TrajectoryFailure<F>> {
    let mut trace: Vec<TraceRow<F>> = Vec::new();
    let b = params.b;
    let outcome = integrate_impl(f, params, s0, &mut |state, energy| {
        let mut r2 = F::zero();
        for &s in &state.s {
            r2 += s * s;
        }
        trace.push(TraceRow {
            t: state.t,
            energy,
            potential: potential_parts(f, &state.s, &state.a, b),
            radius: r2.sqrt(),
        });
    })?;
    Ok((outcome, trace))
}

#[allow(clippy::needless_range_loop)] // indexed loops mirror the tableau arithmetic
fn integrate_impl<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    s0: Vec<F>,
    observer: &mut dyn FnMut(&ContinuousState<F>, i64),
) -> Result<TrajectoryOutcome<F>, TrajectoryFailure<F>> {
    let n = f.num_vars();
    let m = f.num_clauses();
    debug_assert_eq!(s0.len(), n);
    debug_assert!(s0.iter().all(|&x| x.abs() < F::one()));

    let a_conv: [[F; 5]; 6] = std::array::from_fn(|i| std::array::from_fn(|j| fl(A[i][j])));
    let b5: [F; 6] = std::array::from_fn(|i| fl(B5[i]));
    let e_conv: [F; 6] = std::array::from_fn(|i| fl(E[i]));
    let _ = C; // stage times unused: the flow is autonomous

    let mut state = ContinuousState::new(s0, m);
    let mut buf = StepBuffers::<F>::new(n, m);

    let mut outcome = TrajectoryOutcome {
        best_energy: i64::MAX,
        best_assignment: Assignment::all_false(n),
        first_passage: BTreeMap::new(),
        steps_taken: 0,
        terminated_early: false,
    };
    let e0 = record_orthant(f, &state, &mut outcome, &mut buf.signs);
    observer(&state, e0);
    if e0 == 0 {
        outcome.terminated_early = true;
        return Ok(outcome);
    }

    let mut h = params.h_init.min(params.h_max).max(params.h_min);

    while params.t_max - state.t > params.h_min {
        h = h.min(params.t_max - state.t);

        // six derivative stages
        rhs_raw(
            f,
            &state.s,
            &state.a,
            params.b,
            &mut buf.k_s[0],
            &mut buf.k_a[0],
            &mut buf.scratch,
        );
        for stage in 1..6 {
            let (done_s, rest_s) = buf.k_s.split_at_mut(stage);
            let (done_a, rest_a) = buf.k_a.split_at_mut(stage);
            for i in 0..n {
                let mut acc = F::zero();
                for (j, k) in done_s.iter().enumerate() {
                    acc += a_conv[stage][j] * k[i];
                }
                buf.s_tmp[i] = state.s[i] + h * acc;
            }
            for i in 0..m {
                let mut acc = F::zero();
                for (j, k) in done_a.iter().enumerate() {
                    acc += a_conv[stage][j] * k[i];
                }
                buf.a_tmp[i] = state.a[i] + h * acc;
            }
            rhs_raw(
                f,
                &buf.s_tmp,
                &buf.a_tmp,
                params.b,
                &mut rest_s[0],
                &mut rest_a[0],
                &mut buf.scratch,
            );
        }

        // 5th-order solution and componentwise error ratio
        let mut ratio = F::zero();
        for i in 0..n {
            let mut acc = F::zero();
            let mut err = F::zero();
            for j in 0..6 {
                acc += b5[j] * buf.k_s[j][i];
                err += e_conv[j] * buf.k_s[j][i];
            }
            let y = state.s[i] + h * acc;
            buf.s_new[i] = y;
            let scale = params.abs_tol + params.rel_tol * state.s[i].abs().max(y.abs());
            ratio = ratio.max((h * err).abs() / scale);
        }
        for i in 0..m {
            let mut acc = F::zero();
            let mut err = F::zero();
            for j in 0..6 {
                acc += b5[j] * buf.k_a[j][i];
                err += e_conv[j] * buf.k_a[j][i];
            }
            let y = state.a[i] + h * acc;
            buf.a_new[i] = y;
            let scale = params.abs_tol + params.rel_tol * state.a[i].abs().max(y.abs());
            ratio = ratio.max((h * err).abs() / scale);
        }

        #[allow(clippy::neg_cmp_op_on_partial_ord)] // a NaN ratio must reject
        if !(ratio <= F::one()) {
            let shrink = if ratio.is_finite() {
                fl::<F>(SAFETY) * ratio.powf(fl(-0.25))
            } else {
                fl(MAX_SHRINK)
            };
            h *= shrink.max(fl(MAX_SHRINK));
            if h < params.h_min {
                let kind = if ratio.is_finite() {
                    FailureKind::StepSizeUnderflow {
                        t: state.t.to_f64().unwrap_or(f64::NAN),
                        h: h.to_f64().unwrap_or(f64::NAN),
                    }
                } else {
                    FailureKind::NonFinite {
                        t: state.t.to_f64().unwrap_or(f64::NAN),
                    }
                };
                return Err(TrajectoryFailure {
                    kind,
                    partial: Some(outcome),
                    state,
                });
            }
            continue;
        }

        // accepted
        if buf.s_new.iter().any(|v| !v.is_finite()) || buf.a_new.iter().any(|v| !v.is_finite())
        {
            return Err(TrajectoryFailure {
                kind: FailureKind::NonFinite {
                    t: state.t.to_f64().unwrap_or(f64::NAN),
                },
                partial: Some(outcome),
                state,
            });
        }
        state.t += h;
        for i in 0..n {
            state.s[i] = buf.s_new[i].min(F::one()).max(-F::one());
        }
        for i in 0..m {
            // da/dt = a K >= 0: keep the discrete weights monotone too
            state.a[i] = buf.a_new[i].max(state.a[i]);
        }
        outcome.steps_taken += 1;

        if state.a.iter().any(|&a| a > params.renorm_threshold) {
            let scale = mean_of(&state.a);
            for a in state.a.iter_mut() {
                *a /= scale;
            }
            state.a_log_scale += scale.ln();
        }

        let energy = record_orthant(f, &state, &mut outcome, &mut buf.signs);
        observer(&state, energy);
        if energy == 0 {
            outcome.terminated_early = true;
            return Ok(outcome);
        }

        let grow = fl::<F>(SAFETY) * ratio.powf(fl(-0.2));
        h = (h * grow.min(fl(MAX_GROW))).min(params.h_max).max(params.h_min);
    }

    Ok(outcome)
}

/// Evaluates the sign-orthant energy and updates the passage record.
fn record_orthant<F: Real>(
    f: &Formula,
    state: &ContinuousState<F>,
    outcome: &mut TrajectoryOutcome<F>,
    signs: &mut [bool],
) -> i64 {
    for (b, &s) in signs.iter_mut().zip(&state.s) {
        *b = s >= F::zero();
    }
    let energy = f.energy_bits(signs);
    if energy < outcome.best_energy {
        outcome.best_energy = energy;
        outcome.best_assignment = Assignment::new(signs.to_vec());
        outcome.first_passage.insert(energy, state.t);
    }
    energy
}
