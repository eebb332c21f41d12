//! Power-law fitting of the energy/escape-rate relation `E = E0 + c k^beta`.
//!
//! Three-parameter fits of this model are fragile, and only the integer
//! interval containing `E0` matters. So the intercept is scanned over a
//! fixed grid (`anchor, anchor-0.1, anchor-0.2, ...`) and for each candidate
//! a two-parameter Levenberg-Marquardt fit of `(c, beta)` runs in
//! log-parameter space (which keeps both positive); the candidate with the
//! smallest linear-space chi^2 wins, ties going to the larger intercept.

use crate::scalar::{fl, Real};

/// Intercept-scan controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions<F> {
    /// Grid spacing of intercept candidates.
    pub scan_step: F,
    /// How far below the anchor to scan.
    pub scan_depth: F,
    /// Hard lower bound for candidates; negative so full satisfiability
    /// (`E0 < 0`) stays detectable.
    pub scan_floor: F,
}

impl<F: Real> Default for FitOptions<F> {
    fn default() -> Self {
        FitOptions {
            scan_step: fl(0.1),
            scan_depth: fl(10.0),
            scan_floor: fl(-1.0),
        }
    }
}

/// Result of one full intercept scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawParams<F> {
    pub e0: F,
    pub c: F,
    pub beta: F,
    /// Sum of squared residuals `E - (E0 + c k^beta)` in linear E-space.
    pub chi2: F,
}

const LM_MAX_ITER: usize = 200;
const LM_LAMBDA_INIT: f64 = 1e-3;
const LM_LAMBDA_MAX: f64 = 1e14;
const LN_BETA_LIMIT: f64 = 12.0; // beta confined to ~[6e-6, 1.6e5]
const LN_C_LIMIT: f64 = 40.0;

fn chi2_at<F: Real>(points: &[(F, F)], e0: F, ln_c: F, ln_beta: F) -> F {
    let (c, beta) = (ln_c.exp(), ln_beta.exp());
    let mut acc = F::zero();
    for &(e, kappa) in points {
        let r = e - e0 - c * kappa.powf(beta);
        acc += r * r;
    }
    acc
}

/// Two-parameter LM fit of `(c, beta)` at a fixed intercept. Returns `None`
/// when fewer than two points lie above the intercept (no usable
/// initialization) or the refinement never produces a finite optimum.
pub(crate) fn fit_fixed_intercept<F: Real>(
    points: &[(F, F)],
    e0: F,
) -> Option<PowerLawParams<F>> {
    // initialize from the log-log regression ln(E - E0) = ln c + beta ln k
    let usable: Vec<(F, F)> = points
        .iter()
        .filter(|&&(e, _)| e - e0 > fl(1e-12))
        .map(|&(e, k)| (k.ln(), (e - e0).ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = fl::<F>(usable.len() as f64);
    let (mut sx, mut sy, mut sxx, mut sxy) = (F::zero(), F::zero(), F::zero(), F::zero());
    for &(x, y) in &usable {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let det = n * sxx - sx * sx;
    if det.abs() < fl(1e-30) {
        return None;
    }
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / n;
    let limit_b = fl::<F>(LN_BETA_LIMIT);
    let limit_c = fl::<F>(LN_C_LIMIT);
    let mut ln_beta = slope.max(fl(1e-3)).ln().min(limit_b).max(-limit_b);
    let mut ln_c = intercept.min(limit_c).max(-limit_c);

    let mut chi2 = chi2_at(points, e0, ln_c, ln_beta);
    if !chi2.is_finite() {
        return None;
    }
    let mut lambda = fl::<F>(LM_LAMBDA_INIT);

    for _ in 0..LM_MAX_ITER {
        let (c, beta) = (ln_c.exp(), ln_beta.exp());
        // normal equations for parameters (ln c, ln beta)
        let (mut juu, mut juv, mut jvv) = (F::zero(), F::zero(), F::zero());
        let (mut gu, mut gv) = (F::zero(), F::zero());
        for &(e, kappa) in points {
            let w = c * kappa.powf(beta); // dm/d(ln c)
            let dv = w * kappa.ln() * beta; // dm/d(ln beta)
            let r = e - e0 - w;
            juu += w * w;
            juv += w * dv;
            jvv += dv * dv;
            gu += w * r;
            gv += dv * r;
        }
        let (auu, avv) = (juu * (F::one() + lambda), jvv * (F::one() + lambda));
        let det = auu * avv - juv * juv;
        if det.abs() < fl(1e-300) || !det.is_finite() {
            break;
        }
        let du = (gu * avv - gv * juv) / det;
        let dv = (gv * auu - gu * juv) / det;
        let cand_c = (ln_c + du).min(limit_c).max(-limit_c);
        let cand_b = (ln_beta + dv).min(limit_b).max(-limit_b);
        let cand_chi2 = chi2_at(points, e0, cand_c, cand_b);
        if cand_chi2.is_finite() && cand_chi2 < chi2 {
            let gain = chi2 - cand_chi2;
            ln_c = cand_c;
            ln_beta = cand_b;
            chi2 = cand_chi2;
            lambda = (lambda / fl(3.0)).max(fl(1e-12));
            if gain <= fl::<F>(1e-14) * chi2.max(F::one()) {
                break;
            }
        } else {
            lambda *= fl(4.0);
            if lambda > fl(LM_LAMBDA_MAX) {
                break;
            }
        }
    }

    let out = PowerLawParams {
        e0,
        c: ln_c.exp(),
        beta: ln_beta.exp(),
        chi2,
    };
    (out.c.is_finite() && out.beta.is_finite() && out.chi2.is_finite()).then_some(out)
}

/// Scans intercept candidates downward from `anchor` and returns the fit
/// with minimal chi^2 (first hit wins ties, i.e. the larger intercept).
pub fn fit_power_law_scan<F: Real>(
    points: &[(F, F)],
    anchor: F,
    opts: &FitOptions<F>,
) -> Option<PowerLawParams<F>> {
    let lower = (anchor - opts.scan_depth).max(opts.scan_floor) - fl(1e-9);
    let mut best: Option<PowerLawParams<F>> = None;
    let mut j = 0u32;
    loop {
        let e0 = anchor - opts.scan_step * fl(j as f64);
        if e0 < lower {
            break;
        }
        if let Some(fit) = fit_fixed_intercept(points, e0) {
            if best.is_none_or(|b| fit.chi2 < b.chi2) {
                best = Some(fit);
            }
        }
        j += 1;
    }
    best
}
