//! Maximum-likelihood fitting and information-criterion selection for pair
//! copulas.
//!
//! Rotations are handled by transforming the data once (density of the
//! rotated family at (u, v) equals the base density at the rotated point),
//! so every family optimizes in its natural parameter space.

use super::{archimedean, BicopFamily, BivariateCopula, Rotation};
use crate::optim::{golden_section_max, nelder_mead_max};
use crate::special::t_quantile;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    Aic,
    Bic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BicopFit {
    pub copula: BivariateCopula,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
}

impl BicopFit {
    fn from_loglik(copula: BivariateCopula, log_likelihood: f64, n: usize) -> Self {
        let k = copula.parameter_count() as f64;
        BicopFit {
            copula,
            log_likelihood,
            aic: 2.0 * k - 2.0 * log_likelihood,
            bic: k * (n as f64).ln() - 2.0 * log_likelihood,
        }
    }

    pub fn criterion_value(&self, criterion: SelectionCriterion) -> f64 {
        match criterion {
            SelectionCriterion::Aic => self.aic,
            SelectionCriterion::Bic => self.bic,
        }
    }
}

/// Logistic map from the real line onto (lo, hi) and its inverse; keeps
/// Nelder-Mead unconstrained while the likelihood sees valid parameters.
fn to_box(t: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-t).exp())
}

fn from_box(x: f64, lo: f64, hi: f64) -> f64 {
    let p = ((x - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

fn check_inputs(u: &[f64], v: &[f64]) -> Result<usize> {
    if u.len() != v.len() {
        return Err(Error::fit("copula data length mismatch"));
    }
    if u.len() < 10 {
        return Err(Error::fit("need at least 10 observations to fit a pair copula"));
    }
    if u.iter().chain(v.iter()).any(|&x| !(0.0 < x && x < 1.0)) {
        return Err(Error::fit("copula data must lie strictly inside (0, 1)"));
    }
    Ok(u.len())
}

fn loglik_with(params_to_cop: impl Fn() -> Result<BivariateCopula>, u: &[f64], v: &[f64]) -> f64 {
    match params_to_cop() {
        Ok(cop) => {
            let ll: f64 = u.iter().zip(v).map(|(&a, &b)| cop.log_density(a, b)).sum();
            if ll.is_finite() {
                ll
            } else {
                f64::NEG_INFINITY
            }
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

const RHO_LO: f64 = -0.9999;
const RHO_HI: f64 = 0.9999;
const NU_LO: f64 = 2.1;
const NU_HI: f64 = 50.0;
const CLAYTON_LO: f64 = 1e-3;
const CLAYTON_HI: f64 = 28.0;
const FRANK_LIM: f64 = 35.0;
const BB1_THETA_LO: f64 = 1e-3;
const BB1_THETA_HI: f64 = 7.0;
const BB1_DELTA_LO: f64 = 1.0;
const BB1_DELTA_HI: f64 = 7.0;

fn fit_gaussian(u: &[f64], v: &[f64], tau: f64) -> (Vec<f64>, f64) {
    let rho0 = (std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-0.99, 0.99);
    let f = |t: &[f64]| {
        let rho = to_box(t[0], RHO_LO, RHO_HI);
        loglik_with(
            || BivariateCopula::new(BicopFamily::Gaussian, Rotation::R0, vec![rho]),
            u,
            v,
        )
    };
    let (t, ll) = nelder_mead_max(&f, &[from_box(rho0, RHO_LO, RHO_HI)], &[0.5], 200);
    (vec![to_box(t[0], RHO_LO, RHO_HI)], ll)
}

/// t-copula log-likelihood with the quantile transforms precomputed.
fn student_loglik_cached(rho: f64, nu: f64, x: &[f64], y: &[f64]) -> f64 {
    if rho.abs() >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let omr2 = 1.0 - rho * rho;
    let lg = ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0));
    let mut ll = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let q = (xi * xi - 2.0 * rho * xi * yi + yi * yi) / (nu * omr2);
        ll += lg - 0.5 * omr2.ln() - 0.5 * (nu + 2.0) * q.ln_1p()
            + 0.5 * (nu + 1.0) * ((xi * xi / nu).ln_1p() + (yi * yi / nu).ln_1p());
    }
    if ll.is_finite() {
        ll
    } else {
        f64::NEG_INFINITY
    }
}

/// Profile likelihood over a log-spaced nu grid with an inner 1-d search for
/// rho, followed by a golden-section polish of nu between the neighbouring
/// grid points. Quantile transforms are cached per nu, which dominates cost.
fn fit_student(u: &[f64], v: &[f64], tau: f64) -> (Vec<f64>, f64) {
    let rho0 = (std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-0.99, 0.99);
    let grid: Vec<f64> = {
        let (lo, hi) = (NU_LO.ln(), NU_HI.ln());
        (0..10).map(|i| (lo + (hi - lo) * i as f64 / 9.0).exp()).collect()
    };
    let profile = |nu: f64, rho_init: f64| -> (f64, f64) {
        let x: Vec<f64> = u.iter().map(|&a| t_quantile(a, nu)).collect();
        let y: Vec<f64> = v.iter().map(|&b| t_quantile(b, nu)).collect();
        let f = |t: &[f64]| student_loglik_cached(to_box(t[0], RHO_LO, RHO_HI), nu, &x, &y);
        let (t, ll) = nelder_mead_max(&f, &[from_box(rho_init, RHO_LO, RHO_HI)], &[0.5], 120);
        (to_box(t[0], RHO_LO, RHO_HI), ll)
    };

    let mut best = (0usize, rho0, f64::NEG_INFINITY);
    for (k, &nu) in grid.iter().enumerate() {
        let (rho, ll) = profile(nu, best.1);
        if ll > best.2 {
            best = (k, rho, ll);
        }
    }
    let lo = grid[best.0.saturating_sub(1)];
    let hi = grid[(best.0 + 1).min(grid.len() - 1)];
    let rho_warm = best.1;
    let ln_nu = golden_section_max(|ln_nu| profile(ln_nu.exp(), rho_warm).1, lo.ln(), hi.ln(), 14);
    let nu = ln_nu.exp();
    let (rho, ll) = profile(nu, rho_warm);
    if ll > best.2 {
        (vec![rho, nu], ll)
    } else {
        (vec![best.1, grid[best.0]], best.2)
    }
}

fn fit_clayton(u: &[f64], v: &[f64], tau: f64) -> (Vec<f64>, f64) {
    let delta0 = archimedean::clayton_delta_from_tau(tau.clamp(0.05, 0.93));
    let f = |t: &[f64]| {
        let delta = to_box(t[0], CLAYTON_LO, CLAYTON_HI);
        loglik_with(|| BivariateCopula::new(BicopFamily::Clayton, Rotation::R0, vec![delta]), u, v)
    };
    let (t, ll) = nelder_mead_max(&f, &[from_box(delta0, CLAYTON_LO, CLAYTON_HI)], &[0.5], 200);
    (vec![to_box(t[0], CLAYTON_LO, CLAYTON_HI)], ll)
}

fn fit_frank(u: &[f64], v: &[f64], tau: f64) -> (Vec<f64>, f64) {
    let delta0 = archimedean::frank_delta_from_tau(tau.clamp(-0.93, 0.93));
    let f = |t: &[f64]| {
        let delta = to_box(t[0], -FRANK_LIM, FRANK_LIM);
        if delta.abs() < 1e-4 {
            // Smooth independence limit; valid for the likelihood even though
            // the stored model requires delta != 0.
            return 0.0;
        }
        loglik_with(|| BivariateCopula::new(BicopFamily::Frank, Rotation::R0, vec![delta]), u, v)
    };
    let (t, ll) = nelder_mead_max(&f, &[from_box(delta0, -FRANK_LIM, FRANK_LIM)], &[0.5], 200);
    let mut delta = to_box(t[0], -FRANK_LIM, FRANK_LIM);
    if delta.abs() < 1e-4 {
        delta = if delta >= 0.0 { 1e-4 } else { -1e-4 };
    }
    (vec![delta], ll)
}

fn fit_bb1(u: &[f64], v: &[f64], tau: f64) -> (Vec<f64>, f64) {
    // tau = 1 - 2 / (delta (theta + 2)) pins one parameter given the other;
    // start from delta = 1.5 and solve for theta.
    let tau_pos = tau.clamp(0.05, 0.9);
    let delta0 = 1.5;
    let theta0 = (2.0 / (delta0 * (1.0 - tau_pos)) - 2.0).clamp(0.05, 6.0);
    let f = |t: &[f64]| {
        let theta = to_box(t[0], BB1_THETA_LO, BB1_THETA_HI);
        let delta = to_box(t[1], BB1_DELTA_LO, BB1_DELTA_HI);
        loglik_with(
            || BivariateCopula::new(BicopFamily::Bb1, Rotation::R0, vec![theta, delta]),
            u,
            v,
        )
    };
    let t0 = [
        from_box(theta0, BB1_THETA_LO, BB1_THETA_HI),
        from_box(delta0, BB1_DELTA_LO, BB1_DELTA_HI),
    ];
    let (t, ll) = nelder_mead_max(&f, &t0, &[0.5, 0.5], 400);
    (
        vec![to_box(t[0], BB1_THETA_LO, BB1_THETA_HI), to_box(t[1], BB1_DELTA_LO, BB1_DELTA_HI)],
        ll,
    )
}

/// Fits one family with a fixed rotation by maximum likelihood.
pub fn fit_bicop(
    u: &[f64],
    v: &[f64],
    family: BicopFamily,
    rotation: Rotation,
) -> Result<BicopFit> {
    let n = check_inputs(u, v)?;
    if rotation != Rotation::R0 && !family.rotatable() {
        return Err(Error::fit(format!("{} does not admit rotations", family.name())));
    }
    if family == BicopFamily::Independence {
        return Ok(BicopFit::from_loglik(BivariateCopula::independence(), 0.0, n));
    }

    // Evaluate the base family at rotated coordinates; likelihoods agree with
    // the rotated model at the original data.
    let (ub, vb): (Vec<f64>, Vec<f64>) = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| rotation.map(a, b))
        .unzip();
    let tau = super::empirical::empirical_tau(&ub, &vb)?;

    let (params, ll) = match family {
        BicopFamily::Gaussian => fit_gaussian(&ub, &vb, tau),
        BicopFamily::StudentT => fit_student(&ub, &vb, tau),
        BicopFamily::Clayton => fit_clayton(&ub, &vb, tau),
        BicopFamily::Frank => fit_frank(&ub, &vb, tau),
        BicopFamily::Bb1 => fit_bb1(&ub, &vb, tau),
        BicopFamily::Independence => unreachable!(),
    };
    if !ll.is_finite() {
        return Err(Error::fit(format!("{} likelihood did not evaluate", family.name())));
    }
    let copula = BivariateCopula::new(family, rotation, params)?;
    Ok(BicopFit::from_loglik(copula, ll, n))
}

/// Candidate set used when none is supplied: elliptical and Frank families
/// unrotated, tail-asymmetric families in all four rotations.
pub fn default_candidates() -> Vec<(BicopFamily, Rotation)> {
    use BicopFamily::*;
    use Rotation::*;
    let mut c = vec![(Gaussian, R0), (StudentT, R0), (Frank, R0)];
    for rot in [R0, R90, R180, R270] {
        c.push((Clayton, rot));
    }
    for rot in [R0, R90, R180, R270] {
        c.push((Bb1, rot));
    }
    c
}

/// Selects a pair copula by information criterion, after a rank-based
/// independence pretest (asymptotic 5% level). If the test does not reject,
/// the independence copula is returned without fitting anything.
pub fn select_bicop(
    u: &[f64],
    v: &[f64],
    candidates: &[(BicopFamily, Rotation)],
    criterion: SelectionCriterion,
) -> Result<BicopFit> {
    let n = check_inputs(u, v)?;
    let test = super::empirical::independence_test_tau(u, v)?;
    if !test.reject {
        return Ok(BicopFit::from_loglik(BivariateCopula::independence(), 0.0, n));
    }
    let candidates: Vec<(BicopFamily, Rotation)> = if candidates.is_empty() {
        default_candidates()
    } else {
        candidates.to_vec()
    };
    let mut best: Option<BicopFit> = None;
    for &(family, rotation) in &candidates {
        let Ok(fit) = fit_bicop(u, v, family, rotation) else {
            continue;
        };
        // Strict inequality keeps the earliest candidate on ties, so the
        // outcome does not depend on iteration incidentals.
        let better = match &best {
            None => true,
            Some(b) => fit.criterion_value(criterion) < b.criterion_value(criterion),
        };
        if better {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::fit("every candidate family failed to fit"))
}
