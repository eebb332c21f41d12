//! Deterministic continuous-time dynamical-system (CTDS) solver for MaxSAT.
//!
//! The solver relaxes Boolean variables to spins `s in [-1,1]^N`, couples
//! them to exponentially growing clause weights, and integrates the
//! resulting chaotic flow with an adaptive Cash-Karp method. Ensembles of
//! short trajectories yield survival curves `p(E,t)` whose decay rates
//! (energy-dependent escape rates) extrapolate, through a power law with an
//! intercept, to a prediction of the global optimum well before an optimal
//! assignment is found. A Ramsey-number-to-SAT encoder with circulant
//! symmetry reduction is included as the flagship application.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`formula`] — CNF model, DIMACS I/O, discrete energy, exhaustive oracle
//! * [`dynamics`] — the flow, parameter selection and single trajectories
//! * [`ensemble`] — deterministic parallel ensembles and survival tables
//! * [`predictor`] — escape rates, power-law fits and the halting machine
//! * [`ramsey`] — clique encodings, circulant reduction, two-phase search

#![allow(clippy::result_large_err)] // failures carry the state snapshot by contract

pub mod dynamics;
pub mod ensemble;
pub mod formula;
pub mod predictor;
pub mod ramsey;
mod scalar;

pub use formula::{Assignment, Formula, Lit};
pub use scalar::Real;

/// Default working precision used by the CLI and the concrete aliases below.
pub type DefaultScalar = f64;

pub type SolverParams64 = dynamics::SolverParams<f64>;
pub type SolverParams32 = dynamics::SolverParams<f32>;
pub type TrajectoryOutcome64 = dynamics::TrajectoryOutcome<f64>;
pub type SurvivalTable64 = ensemble::SurvivalTable<f64>;
pub type PredictorConfig64 = predictor::PredictorConfig<f64>;
pub type EscapeFit64 = predictor::EscapeFit<f64>;
