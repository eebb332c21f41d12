//! Escape-rate estimation, optimum prediction and the halting machine.
//!
//! For levels reached by some but not all trajectories the survival value at
//! the horizon gives the energy-dependent escape rate
//! `kappa(E) = -ln p(E, t_max) / t_max`. Fitting `E = E0 + c kappa^beta`
//! and extrapolating to `kappa -> 0` predicts the global optimum as
//! `floor(E0) + 1`; extrapolating to `E_bar - 1` predicts the number of
//! trajectories needed to go one level deeper. The ledger tracks the
//! prediction stream and decides when to stop.

mod driver;
mod fit;

pub use driver::{solve, FitPointJson, SolveOutcome, SolveReport};
pub use fit::{fit_power_law_scan, FitOptions, PowerLawParams};

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::ensemble::{LevelSemantics, SurvivalTable};
use crate::scalar::{fl, Real};

/// One `(E, kappa)` sample of the escape-rate curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscapePoint<F> {
    pub energy: i64,
    /// Escape rate per unit analog time; finite and positive.
    pub kappa: F,
    /// Trajectories that reached this level (`n_at[E]`).
    pub sample_count: u64,
}

/// Best power-law fit over the scanned intercepts.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeFit<F> {
    pub e0: F,
    pub c: F,
    pub beta: F,
    /// Sum of squared residuals `E - (E0 + c kappa^beta)` over `points_used`.
    pub chi2: F,
    pub points_used: Vec<EscapePoint<F>>,
}

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum FitError {
    #[error("{available} escape-rate points available, need at least {needed}")]
    TooFewPoints { available: usize, needed: usize },
    #[error("no intercept candidate produced a convergent fit ({available} points)")]
    NoConvergence { available: usize },
}

impl FitError {
    pub fn points_available(&self) -> usize {
        match *self {
            FitError::TooFewPoints { available, .. } => available,
            FitError::NoConvergence { available } => available,
        }
    }
}

/// Escape rates from the survival table at the inclusive level convention.
pub fn escape_rates<F: Real>(table: &SurvivalTable<F>, min_count: u64) -> Vec<EscapePoint<F>> {
    escape_rates_sem(table, min_count, LevelSemantics::Le)
}

/// Escape rates under either level convention.
///
/// A level enters only when `min_count <= n_at[E] < gamma`, so that
/// `p(E, t_max)` is strictly inside `(0, 1)` and the rate is finite,
/// positive and backed by enough samples.
pub fn escape_rates_sem<F: Real>(
    table: &SurvivalTable<F>,
    min_count: u64,
    sem: LevelSemantics,
) -> Vec<EscapePoint<F>> {
    let gamma = table.gamma();
    if gamma == 0 {
        return Vec::new();
    }
    let min_count = min_count.max(1);
    let shift = match sem {
        LevelSemantics::Le => 0,
        LevelSemantics::Lt => 1,
    };
    let mut points = Vec::new();
    if let (Some(lo), Some(hi)) = (table.best_energy(), table.ceiling()) {
        for e in lo + shift..=hi + shift {
            let n = table.n_at_sem(e, sem);
            if n >= min_count && n < gamma {
                let p = F::one() - fl::<F>(n as f64) / fl(gamma as f64);
                points.push(EscapePoint {
                    energy: e,
                    kappa: -p.ln() / table.t_max(),
                    sample_count: n,
                });
            }
        }
    }
    points
}

/// Fits the power law over escape points, scanning intercepts downward from
/// `e_bar`. Needs at least 3 points; fewer belongs to the easy-problem path
/// of the decision rules.
pub fn fit_power_law<F: Real>(
    points: &[EscapePoint<F>],
    e_bar: i64,
    opts: &FitOptions<F>,
) -> Result<EscapeFit<F>, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints {
            available: points.len(),
            needed: 3,
        });
    }
    let pairs: Vec<(F, F)> = points
        .iter()
        .map(|p| (fl(p.energy as f64), p.kappa))
        .collect();
    let best = fit_power_law_scan(&pairs, fl(e_bar as f64), opts).ok_or(
        FitError::NoConvergence {
            available: points.len(),
        },
    )?;
    Ok(EscapeFit {
        e0: best.e0,
        c: best.c,
        beta: best.beta,
        chi2: best.chi2,
        points_used: points.to_vec(),
    })
}

/// Prediction of the minimum energy from a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinPrediction {
    /// `max(0, floor(E0) + 1)`.
    pub energy: i64,
    /// Set when `floor(E0) + 1 <= 0`: the instance looks fully satisfiable.
    pub satisfiable: bool,
}

/// `E_min^pred = floor(E0) + 1`, clamped at zero.
pub fn predict_min<F: Real>(fit: &EscapeFit<F>) -> MinPrediction {
    let raw = fit.e0.floor().to_i64().expect("finite intercept") + 1;
    MinPrediction {
        energy: raw.max(0),
        satisfiable: raw <= 0,
    }
}

/// Expected total number of trajectories to reach `E_bar - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GammaPrediction {
    /// `ceil(1 / (1 - e^{-kappa(E_bar - 1) t_max}))`.
    Trajectories(u64),
    /// `E_bar - 1` lies at or below the fitted intercept: the fit says the
    /// level does not exist.
    Unreachable,
}

impl GammaPrediction {
    pub fn trajectories(&self) -> Option<u64> {
        match *self {
            GammaPrediction::Trajectories(g) => Some(g),
            GammaPrediction::Unreachable => None,
        }
    }
}

/// Inverts the fit at `E = e_bar - 1` and converts the extrapolated escape
/// rate into a trajectory budget.
pub fn predict_gamma<F: Real>(fit: &EscapeFit<F>, e_bar: i64, t_max: F) -> GammaPrediction {
    let target = fl::<F>((e_bar - 1) as f64);
    if target <= fit.e0 {
        return GammaPrediction::Unreachable;
    }
    let kappa = ((target - fit.e0) / fit.c).powf(F::one() / fit.beta);
    let p = (-kappa * t_max).exp();
    let denom = F::one() - p;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // a NaN denominator is unreachable too
    if !(denom > F::zero()) {
        return GammaPrediction::Unreachable;
    }
    let gamma = (F::one() / denom).ceil();
    GammaPrediction::Trajectories(gamma.to_u64().unwrap_or(u64::MAX))
}

/// Terminal or running status of the prediction loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LedgerStatus {
    Running,
    /// Decided global optimum; always an attained energy.
    Decided(i64),
    /// `Gamma_max` reached without a consistent decision.
    BudgetExhausted,
}

impl LedgerStatus {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, LedgerStatus::Running)
    }
}

/// Thresholds and defaults of the decision rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorConfig<F> {
    /// Trajectories run before the first prediction.
    pub gamma_min: u64,
    /// Hard trajectory budget.
    pub gamma_max: u64,
    /// Minimum samples for a level to enter the escape-rate fit.
    pub min_count: u64,
    /// Minimum escape points to attempt a fit at all.
    pub min_fit_points: usize,
    /// Below this many points the easy-problem fallback may decide.
    pub sparse_fit_points: usize,
    /// Predictions in a row that must agree before anything is decided.
    pub consistency_window: usize,
    /// `n(E_bar)` needed to accept `E_bar` against a higher prediction.
    pub decide_count: u64,
    /// `n(E_bar)` needed for the easy-problem and disagreement fallbacks.
    pub easy_count: u64,
    pub fit: FitOptions<F>,
    /// Level convention used for the escape-rate estimates.
    pub semantics: LevelSemantics,
    /// Optional manual fit range: levels below/above are excluded.
    pub fit_level_min: Option<i64>,
    pub fit_level_max: Option<i64>,
}

impl<F: Real> Default for PredictorConfig<F> {
    fn default() -> Self {
        PredictorConfig {
            gamma_min: 100,
            gamma_max: 2_000_000,
            min_count: 5,
            min_fit_points: 3,
            sparse_fit_points: 5,
            consistency_window: 5,
            decide_count: 100,
            easy_count: 1000,
            fit: FitOptions::default(),
            semantics: LevelSemantics::Le,
            fit_level_min: None,
            fit_level_max: None,
        }
    }
}

/// The evolving prediction/decision state.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionLedger<F> {
    /// Trajectories aggregated so far.
    pub gamma: u64,
    /// Best energy attained (`E_bar`); starts at the trivial ceiling `M`.
    pub e_bar: i64,
    /// Trajectories that attained `E_bar`.
    pub n_e_bar: u64,
    /// Latest `Gamma^pred(E_bar - 1)`.
    pub gamma_pred: GammaPrediction,
    /// Every `E_min^pred` emitted, in order; never reset when `E_bar`
    /// improves.
    pub pred_history: Vec<i64>,
    pub status: LedgerStatus,
    pub fit_latest: Option<EscapeFit<F>>,
    /// Prediction events processed.
    pub events: u64,
}

impl<F: Real> PredictionLedger<F> {
    pub fn new(num_clauses: usize, gamma_min: u64) -> Self {
        PredictionLedger {
            gamma: 0,
            e_bar: num_clauses as i64,
            n_e_bar: 0,
            gamma_pred: GammaPrediction::Trajectories(gamma_min + 1),
            pred_history: Vec::new(),
            status: LedgerStatus::Running,
            fit_latest: None,
            events: 0,
        }
    }

    /// Last prediction emitted, if any.
    pub fn e_pred(&self) -> Option<i64> {
        self.pred_history.last().copied()
    }

    fn consistent(&self, window: usize) -> bool {
        self.pred_history.len() >= window
            && self.pred_history[self.pred_history.len() - window..]
                .windows(2)
                .all(|w| w[0] == w[1])
    }
}

/// One prediction event: refreshes the ledger from the table and the fit
/// outcome, then applies the halting rules.
///
/// Rules, in order: (consistency means the last `consistency_window`
/// predictions agree)
///
/// 1. consistent and `E_pred == E_bar` -> decided `E_bar`;
/// 2. consistent, `E_pred > E_bar`, `n(E_bar) > decide_count` -> decided;
/// 3. fewer than `sparse_fit_points` escape points and
///    `n(E_bar) > easy_count` -> decided (easy problem);
/// 4. consistent, `E_pred < E_bar`, `n(E_bar) > easy_count` and
///    `Gamma > Gamma^pred(E_bar - 1)` -> decided (the fit keeps promising a
///    level the dynamics never finds);
/// 5. `E_pred < E_bar` otherwise -> keep running;
/// 6. `Gamma >= Gamma_max` -> budget exhausted.
///
/// A decision always cites `E_bar`, so it is always an attained energy.
#[allow(clippy::if_same_then_else)] // distinct halting rules, kept in published order
pub fn step_decision<F: Real>(
    ledger: &mut PredictionLedger<F>,
    table: &SurvivalTable<F>,
    fit: Result<EscapeFit<F>, FitError>,
    cfg: &PredictorConfig<F>,
) {
    assert!(
        !ledger.status.is_terminal(),
        "step_decision on a terminal ledger"
    );
    ledger.events += 1;
    ledger.gamma = table.gamma();
    if let Some(best) = table.best_energy() {
        ledger.e_bar = best;
    }
    ledger.n_e_bar = table.n_at(ledger.e_bar);

    let points_available = match &fit {
        Ok(f) => f.points_used.len(),
        Err(e) => e.points_available(),
    };

    if let Ok(fit) = fit {
        let pred = predict_min(&fit);
        ledger.pred_history.push(pred.energy);
        ledger.gamma_pred = predict_gamma(&fit, ledger.e_bar, table.t_max());
        ledger.fit_latest = Some(fit);

        let consistent = ledger.consistent(cfg.consistency_window);
        let e_pred = pred.energy;
        if consistent && e_pred == ledger.e_bar {
            ledger.status = LedgerStatus::Decided(ledger.e_bar);
        } else if consistent && e_pred > ledger.e_bar && ledger.n_e_bar > cfg.decide_count {
            ledger.status = LedgerStatus::Decided(ledger.e_bar);
        } else if points_available < cfg.sparse_fit_points && ledger.n_e_bar > cfg.easy_count {
            ledger.status = LedgerStatus::Decided(ledger.e_bar);
        } else if consistent
            && e_pred < ledger.e_bar
            && ledger.n_e_bar > cfg.easy_count
            && ledger
                .gamma_pred
                .trajectories()
                .is_some_and(|g| ledger.gamma > g)
        {
            ledger.status = LedgerStatus::Decided(ledger.e_bar);
        }
    } else if points_available < cfg.sparse_fit_points && ledger.n_e_bar > cfg.easy_count {
        ledger.status = LedgerStatus::Decided(ledger.e_bar);
    }

    if !ledger.status.is_terminal() && ledger.gamma >= cfg.gamma_max {
        ledger.status = LedgerStatus::BudgetExhausted;
    }
}

/// `E,kappa,n` rows of the escape-rate curve.
pub fn write_escape_csv<F: Real, W: Write>(points: &[EscapePoint<F>], mut w: W) -> io::Result<()> {
    writeln!(w, "E,kappa,n")?;
    for p in points {
        writeln!(w, "{},{},{}", p.energy, p.kappa, p.sample_count)?;
    }
    Ok(())
}
