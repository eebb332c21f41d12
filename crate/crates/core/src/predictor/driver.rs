//! The prediction loop: grow the ensemble, refit at prediction events,
//! stop when the ledger goes terminal.
//!
//! Trajectories are consumed strictly in index order, so events fire exactly
//! as in a sequential run; batches are only a computation-ahead device and
//! never change results (a mid-batch decision discards the unconsumed rest).

use serde::Serialize;

use super::{
    escape_rates_sem, fit_power_law, predict_min, step_decision, EscapeFit, FitError,
    LedgerStatus, PredictionLedger, PredictorConfig,
};
use crate::dynamics::SolverParams;
use crate::ensemble::{compute_range, fold_outcome, make_pool, SurvivalTable};
use crate::formula::{Assignment, Formula};
use crate::scalar::Real;

/// Trajectories computed ahead per scheduling round.
const MAX_BATCH: u64 = 1024;

/// Everything the prediction loop produced.
#[derive(Clone, Debug)]
pub struct SolveOutcome<F> {
    pub table: SurvivalTable<F>,
    pub ledger: PredictionLedger<F>,
    /// Hat strength the trajectories ran with.
    pub b: F,
    pub master_seed: u64,
}

fn compute_fit<F: Real>(
    table: &SurvivalTable<F>,
    cfg: &PredictorConfig<F>,
) -> Result<EscapeFit<F>, FitError> {
    let mut points = escape_rates_sem(table, cfg.min_count, cfg.semantics);
    if let Some(lo) = cfg.fit_level_min {
        points.retain(|p| p.energy >= lo);
    }
    if let Some(hi) = cfg.fit_level_max {
        points.retain(|p| p.energy <= hi);
    }
    if points.len() < cfg.min_fit_points {
        return Err(FitError::TooFewPoints {
            available: points.len(),
            needed: cfg.min_fit_points,
        });
    }
    let e_bar = table.best_energy().unwrap_or(0);
    fit_power_law(&points, e_bar, &cfg.fit)
}

/// Runs the full predict-and-decide loop on `workers` threads (0 = global
/// pool). Deterministic in `(formula, params, cfg, master_seed)`.
pub fn solve<F: Real>(
    f: &Formula,
    params: &SolverParams<F>,
    cfg: &PredictorConfig<F>,
    master_seed: u64,
    workers: usize,
) -> SolveOutcome<F> {
    let pool = make_pool(workers);
    let mut table = SurvivalTable::empty(f, params.t_max);
    let mut ledger = PredictionLedger::<F>::new(f.num_clauses(), cfg.gamma_min);
    let mut next_cadence = cfg.gamma_min.saturating_mul(2).max(2);
    let mut next_index: u64 = 0;

    'run: while table.gamma() < cfg.gamma_max {
        let gamma = table.gamma();
        let mut target = next_cadence.min(cfg.gamma_max);
        if let Some(g) = ledger.gamma_pred.trajectories() {
            if g > gamma {
                target = target.min(g);
            }
        }
        let batch = target.saturating_sub(gamma).clamp(1, MAX_BATCH);
        let results = compute_range(
            f,
            params,
            master_seed,
            next_index,
            next_index + batch,
            pool.as_ref(),
        );
        for result in &results {
            next_index += 1;
            let prev_best = table.best_energy();
            fold_outcome(&mut table, result);
            let gamma = table.gamma();
            if gamma == 0 {
                continue;
            }
            // a trajectory that attains or improves the best energy fires a
            // prediction event, exactly as in the per-trajectory loop
            let outcome_best = match result {
                Ok(out) => Some(out.best_energy),
                Err(fail) => fail.partial.as_ref().map(|p| p.best_energy),
            };
            let touched_best = match (outcome_best, prev_best) {
                (Some(e), Some(old)) => e <= old,
                (Some(_), None) => true,
                (None, _) => false,
            };
            let mut fire = false;
            if gamma > cfg.gamma_min {
                if touched_best {
                    fire = true;
                }
                if ledger.gamma_pred.trajectories() == Some(gamma) {
                    fire = true;
                }
                if gamma >= next_cadence {
                    fire = true;
                    next_cadence = gamma.saturating_mul(2);
                }
            }
            if gamma >= cfg.gamma_max {
                fire = true;
            }
            if fire {
                step_decision(&mut ledger, &table, compute_fit(&table, cfg), cfg);
                if ledger.status.is_terminal() {
                    break 'run;
                }
            }
        }
    }

    if !ledger.status.is_terminal() {
        // only reachable with a degenerate budget (gamma_max <= gamma_min)
        step_decision(&mut ledger, &table, compute_fit(&table, cfg), cfg);
        if !ledger.status.is_terminal() {
            ledger.status = LedgerStatus::BudgetExhausted;
        }
    }
    table.canonicalize();
    SolveOutcome {
        table,
        ledger,
        b: params.b,
        master_seed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPointJson {
    #[serde(rename = "E")]
    pub e: i64,
    pub kappa: f64,
    pub n: u64,
}

/// Machine-readable run summary; the JSON artifact of a solve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub gamma: u64,
    pub e_bar: i64,
    pub n_e_bar: u64,
    #[serde(rename = "E0")]
    pub e0: Option<f64>,
    pub c: Option<f64>,
    pub beta: Option<f64>,
    pub chi2: Option<f64>,
    #[serde(rename = "E_pred")]
    pub e_pred: Option<i64>,
    pub predicted_satisfiable: Option<bool>,
    #[serde(rename = "E_dec")]
    pub e_dec: Option<i64>,
    pub status: String,
    pub gamma_pred_next: Option<u64>,
    pub pred_history: Vec<i64>,
    pub fit_points: Vec<FitPointJson>,
    pub best_assignments: Vec<String>,
    pub failures: u64,
}

impl<F: Real> SolveOutcome<F> {
    /// First (lexicographically smallest) assignment attaining `E_bar`.
    pub fn best_assignment(&self) -> Option<&Assignment> {
        self.table.best_assignments().next()
    }

    pub fn report(&self) -> SolveReport {
        let ledger = &self.ledger;
        let fit = ledger.fit_latest.as_ref();
        let (e_dec, status) = match ledger.status {
            LedgerStatus::Decided(e) => (Some(e), "decided"),
            LedgerStatus::BudgetExhausted => (None, "budget_exhausted"),
            LedgerStatus::Running => (None, "running"),
        };
        SolveReport {
            gamma: ledger.gamma,
            e_bar: ledger.e_bar,
            n_e_bar: ledger.n_e_bar,
            e0: fit.map(|f| f.e0.to_f64().unwrap_or(f64::NAN)),
            c: fit.map(|f| f.c.to_f64().unwrap_or(f64::NAN)),
            beta: fit.map(|f| f.beta.to_f64().unwrap_or(f64::NAN)),
            chi2: fit.map(|f| f.chi2.to_f64().unwrap_or(f64::NAN)),
            e_pred: ledger.e_pred(),
            predicted_satisfiable: fit.map(|f| predict_min(f).satisfiable),
            e_dec,
            status: status.to_string(),
            gamma_pred_next: ledger.gamma_pred.trajectories(),
            pred_history: ledger.pred_history.clone(),
            fit_points: fit
                .map(|f| {
                    f.points_used
                        .iter()
                        .map(|p| FitPointJson {
                            e: p.energy,
                            kappa: p.kappa.to_f64().unwrap_or(f64::NAN),
                            n: p.sample_count,
                        })
                        .collect()
                })
                .unwrap_or_default(),
            best_assignments: self
                .table
                .best_assignments()
                .map(|a| a.to_compact_string())
                .collect(),
            failures: self.table.failures(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::TautologyPolicy;

    fn formula(n: usize, clauses: &[&[i32]]) -> Formula {
        Formula::from_clauses(
            n,
            clauses.iter().map(|c| c.to_vec()),
            TautologyPolicy::Reject,
        )
        .unwrap()
        .0
    }

    #[test]
    fn satisfiable_toy_decides_zero() {
        let f = formula(3, &[&[1, 2], &[-1, 3], &[2, -3], &[1, -2]]);
        let params = SolverParams::<f64>::default().with_t_max(10.0);
        let cfg = PredictorConfig {
            gamma_min: 20,
            gamma_max: 5000,
            ..PredictorConfig::default()
        };
        let out = solve(&f, &params, &cfg, 11, 1);
        assert_eq!(out.ledger.status, LedgerStatus::Decided(0));
        let witness = out.best_assignment().unwrap();
        assert_eq!(f.energy(witness), 0);
    }

    #[test]
    fn unsat_pair_decides_one() {
        // (x) & (!x): minimum energy 1
        let f = formula(1, &[&[1], &[-1]]);
        let params = SolverParams::<f64>::default().with_t_max(5.0);
        let cfg = PredictorConfig {
            gamma_min: 20,
            gamma_max: 4000,
            ..PredictorConfig::default()
        };
        let out = solve(&f, &params, &cfg, 3, 1);
        assert_eq!(out.ledger.status, LedgerStatus::Decided(1));
    }

    #[test]
    fn budget_exhaustion_reports() {
        let f = formula(2, &[&[1, 2], &[-1, 2], &[1, -2], &[-1, -2]]);
        let params = SolverParams::<f64>::default().with_t_max(2.0);
        let cfg = PredictorConfig {
            gamma_min: 5,
            gamma_max: 8,
            easy_count: 1_000_000, // keep every fallback out of reach
            decide_count: 1_000_000,
            consistency_window: 50,
            ..PredictorConfig::default()
        };
        let out = solve(&f, &params, &cfg, 1, 1);
        assert_eq!(out.ledger.status, LedgerStatus::BudgetExhausted);
        assert_eq!(out.report().status, "budget_exhausted");
        assert_eq!(out.ledger.e_bar, 1);
    }

    #[test]
    fn solve_is_deterministic() {
        let f = formula(
            4,
            &[&[1, 2, 3], &[-1, -2, -4], &[2, 3, 4], &[-2, -3, 4], &[1, -3, -4]],
        );
        let params = SolverParams::<f64>::default().with_t_max(5.0).with_b(0.02);
        let cfg = PredictorConfig {
            gamma_min: 10,
            gamma_max: 500,
            ..PredictorConfig::default()
        };
        let a = solve(&f, &params, &cfg, 99, 1);
        let b = solve(&f, &params, &cfg, 99, 2);
        assert_eq!(a.report(), b.report());
        assert_eq!(a.table, b.table);
    }
}
