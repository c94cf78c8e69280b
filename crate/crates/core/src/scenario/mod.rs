//! Stress-scenario estimators on a fitted joint model of risk factors and a
//! portfolio loss.
//!
//! Given factors X, loss L, and a threshold level, a stress scenario is a
//! representative factor configuration for the adverse event {L >= level}.
//! Three model-based estimators are provided, all solved by multi-start
//! differential evolution in the log domain:
//!
//! * CM1 maximizes the joint density sliced at the threshold, which equals
//!   the conditional density of X given L = level up to a constant.
//! * CM2 maximizes the factor density subject to the fitted regression
//!   surface reaching the threshold, with infeasible candidates rejected
//!   outright (death penalty).
//! * CM3 maximizes the factor density weighted by the conditional survival
//!   probability of the loss beyond the threshold.
//!
//! Two references complete the set: an exceedance mean (GKK) that averages
//! observed factor rows with losses beyond the threshold, and an oracle
//! variant (CM*) that runs the CM2 program with a known density and known
//! loss map instead of fitted ones.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bicop::independence_test_tau;
use crate::optim::{maximize_de, DeConfig};
use crate::rvine::{JointVineModel, VineFitConfig};
use crate::univariate::MarginalKind;
use crate::{Error, Result};

/// Exceedance rows injected into initial populations are capped at this many.
const SEED_CAP: usize = 25;

/// Constraint slack accepted when checking feasibility of a returned point.
const FEASIBILITY_SLACK: f64 = 1e-9;

/// Minimum number of exceedances for the exceedance-mean estimator.
const GKK_MIN_EXCEEDANCES: usize = 20;

/// Which estimator produced a [`ScenarioEstimate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioMethod {
    #[serde(rename = "CM1")]
    Cm1,
    #[serde(rename = "CM2")]
    Cm2,
    #[serde(rename = "CM3")]
    Cm3,
    #[serde(rename = "CM_star")]
    CmStar,
    #[serde(rename = "GKK")]
    Gkk,
}

impl fmt::Display for ScenarioMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioMethod::Cm1 => "CM1",
            ScenarioMethod::Cm2 => "CM2",
            ScenarioMethod::Cm3 => "CM3",
            ScenarioMethod::CmStar => "CM*",
            ScenarioMethod::Gkk => "GKK",
        };
        f.write_str(s)
    }
}

/// Settings for the differential-evolution searches.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub population_size: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Mutation weight F of the rand/1/bin scheme, in (0, 2).
    pub differential_weight: f64,
    /// Crossover probability CR, in (0, 1].
    pub crossover: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            population_size: 50,
            iterations: 4000,
            restarts: 10,
            seed: 0,
            differential_weight: 0.8,
            crossover: 0.9,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 5 {
            return Err(Error::domain("population size must be at least 5"));
        }
        if self.iterations == 0 || self.restarts == 0 {
            return Err(Error::domain("iterations and restarts must be positive"));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight < 2.0) {
            return Err(Error::domain("differential weight must lie in (0, 2)"));
        }
        if !(self.crossover > 0.0 && self.crossover <= 1.0) {
            return Err(Error::domain("crossover must lie in (0, 1]"));
        }
        Ok(())
    }

    fn to_de(&self, seed_points: Vec<Vec<f64>>) -> DeConfig {
        DeConfig {
            population: self.population_size,
            iterations: self.iterations,
            restarts: self.restarts,
            differential_weight: self.differential_weight,
            crossover: self.crossover,
            seed: self.seed,
            seed_points,
        }
    }
}

/// How the winning search behaved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerDiagnostics {
    pub restarts: usize,
    pub iterations: usize,
    pub winning_restart: usize,
    /// True if the winning restart stagnated well before its budget ran out.
    pub converged: bool,
    pub evaluations: usize,
}

/// A stress scenario produced by one of the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEstimate {
    pub method: ScenarioMethod,
    /// Estimated factor configuration.
    pub m_hat: Vec<f64>,
    pub threshold: f64,
    /// Fitted loss at `m_hat` (regression prediction, or the known map for
    /// the oracle). Absent for the exceedance mean, which carries no model.
    pub fitted_loss: Option<f64>,
    /// Final objective value in the log domain. Absent for the exceedance
    /// mean.
    pub objective_value: Option<f64>,
    /// Search diagnostics; absent for the exceedance mean.
    pub diagnostics: Option<OptimizerDiagnostics>,
    /// Factors that were pinned at their marginal modes instead of being
    /// optimized, after failing the dependence-on-loss pretest.
    pub screened: Vec<usize>,
}

/// A fitted estimation problem: joint model over (X, L) with the loss as the
/// last, terminal coordinate; a regression model for the fitted loss map; the
/// threshold; and the search box.
#[derive(Clone, Debug)]
pub struct ScenarioProblem {
    joint: JointVineModel,
    regression: JointVineModel,
    threshold: f64,
    bounds: Vec<(f64, f64)>,
    screened: Vec<usize>,
    pinned_modes: Vec<f64>,
    seeds: Vec<Vec<f64>>,
}

impl ScenarioProblem {
    /// Assembles a problem from already-fitted models. `bounds` has one
    /// entry per factor; the loss coordinate is not searched.
    pub fn new(
        joint: JointVineModel,
        regression: JointVineModel,
        threshold: f64,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if joint.dimension() < 2 || joint.dimension() != regression.dimension() {
            return Err(Error::InvalidModel(
                "joint and regression models must share a dimension of at least 2".into(),
            ));
        }
        let loss = joint.dimension() - 1;
        for (name, model) in [("joint", &joint), ("regression", &regression)] {
            if !model.copula().structure().is_terminal_variable(loss) {
                return Err(Error::InvalidModel(format!(
                    "{name} model must keep the loss coordinate terminal in every tree"
                )));
            }
        }
        if !threshold.is_finite() {
            return Err(Error::domain("threshold must be finite"));
        }
        if bounds.len() != loss {
            return Err(Error::domain(format!(
                "expected {loss} factor bounds, got {}",
                bounds.len()
            )));
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::domain(format!(
                    "bounds for factor {j} are not a finite interval: [{lo}, {hi}]"
                )));
            }
        }
        Ok(ScenarioProblem {
            joint,
            regression,
            threshold,
            bounds,
            screened: Vec::new(),
            pinned_modes: Vec::new(),
            seeds: Vec::new(),
        })
    }

    /// Fits both models from data rows laid out as factor columns followed by
    /// the loss column, and derives the search box from the factor ranges
    /// expanded by half a range on each side.
    ///
    /// With `screen_independent` set, factors whose dependence on the loss is
    /// not significant (5% level, rank-correlation test) are pinned at their
    /// fitted marginal modes and excluded from every search.
    pub fn from_data(
        rows: &[Vec<f64>],
        kinds: &[MarginalKind],
        threshold: f64,
        screen_independent: bool,
        cfg: &VineFitConfig,
    ) -> Result<Self> {
        Self::build(rows, kinds, threshold, screen_independent, cfg, None)
    }

    /// As [`from_data`](Self::from_data), but refits marginals and pair
    /// copulas on a frozen vine structure instead of re-selecting the trees.
    pub fn from_data_with_structure(
        rows: &[Vec<f64>],
        kinds: &[MarginalKind],
        threshold: f64,
        screen_independent: bool,
        cfg: &VineFitConfig,
        structure: &crate::rvine::VineStructure,
    ) -> Result<Self> {
        Self::build(rows, kinds, threshold, screen_independent, cfg, Some(structure))
    }

    fn build(
        rows: &[Vec<f64>],
        kinds: &[MarginalKind],
        threshold: f64,
        screen_independent: bool,
        cfg: &VineFitConfig,
        structure: Option<&crate::rvine::VineStructure>,
    ) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if d < 2 {
            return Err(Error::fit("need at least one factor column plus the loss column"));
        }
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::fit("rows must be rectangular"));
        }
        let loss = d - 1;
        let joint = match structure {
            None => JointVineModel::fit_with_response(rows, kinds, cfg, loss)?,
            Some(s) => JointVineModel::fit_fixed(rows, kinds, cfg, s)?,
        };

        let mut bounds = Vec::with_capacity(loss);
        for j in 0..loss {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for r in rows {
                lo = lo.min(r[j]);
                hi = hi.max(r[j]);
            }
            let range = hi - lo;
            if !(range > 0.0) {
                return Err(Error::fit(format!("factor {j} has zero range")));
            }
            bounds.push((lo - 0.5 * range, hi + 0.5 * range));
        }

        let mut problem = ScenarioProblem::new(joint.clone(), joint, threshold, bounds)?;

        if screen_independent {
            let losses: Vec<f64> = rows.iter().map(|r| r[loss]).collect();
            for j in 0..loss {
                let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                let test = independence_test_tau(&col, &losses)?;
                if !test.reject {
                    problem.screened.push(j);
                    problem.pinned_modes.push(problem.joint.marginal(j).mode());
                }
            }
        }

        let mut exceed: Vec<Vec<f64>> = rows
            .iter()
            .filter(|r| r[loss] >= threshold)
            .map(|r| r[..loss].to_vec())
            .collect();
        if !exceed.is_empty() {
            let mean: Vec<f64> = (0..loss)
                .map(|j| exceed.iter().map(|r| r[j]).sum::<f64>() / exceed.len() as f64)
                .collect();
            // Keep an even spread when there are more exceedances than seats.
            if exceed.len() > SEED_CAP {
                let step = exceed.len() as f64 / SEED_CAP as f64;
                exceed = (0..SEED_CAP).map(|k| exceed[(k as f64 * step) as usize].clone()).collect();
            }
            exceed.push(mean);
        }
        problem.seeds = exceed;
        Ok(problem)
    }

    pub fn joint(&self) -> &JointVineModel {
        &self.joint
    }

    pub fn regression(&self) -> &JointVineModel {
        &self.regression
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    /// Index of the loss coordinate in the joint model.
    pub fn loss_index(&self) -> usize {
        self.joint.dimension() - 1
    }

    /// Factors pinned at marginal modes by the dependence pretest.
    pub fn screened(&self) -> &[usize] {
        &self.screened
    }

    fn pinning(&self) -> Pinning {
        Pinning {
            dim: self.loss_index(),
            pinned: self.screened.iter().copied().zip(self.pinned_modes.iter().copied()).collect(),
        }
    }
}

/// Maps between the full factor vector and the subvector that is actually
/// searched when some factors are pinned.
struct Pinning {
    dim: usize,
    pinned: Vec<(usize, f64)>,
}

impl Pinning {
    fn free(&self) -> Vec<usize> {
        (0..self.dim).filter(|j| !self.pinned.iter().any(|&(p, _)| p == *j)).collect()
    }

    fn embed(&self, free_idx: &[usize], free_vals: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for &(j, v) in &self.pinned {
            x[j] = v;
        }
        for (&j, &v) in free_idx.iter().zip(free_vals) {
            x[j] = v;
        }
        x
    }
}

fn run_search(
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    pinning: &Pinning,
    bounds: &[(f64, f64)],
    seeds: &[Vec<f64>],
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, f64, OptimizerDiagnostics)> {
    cfg.validate()?;
    let free = pinning.free();
    if free.is_empty() {
        // Everything pinned: nothing to search, evaluate the single point.
        let x = pinning.embed(&free, &[]);
        let value = objective(&x);
        let diagnostics = OptimizerDiagnostics {
            restarts: 0,
            iterations: 0,
            winning_restart: 0,
            converged: true,
            evaluations: 1,
        };
        return Ok((x, value, diagnostics));
    }
    let free_bounds: Vec<(f64, f64)> = free.iter().map(|&j| bounds[j]).collect();
    let free_seeds: Vec<Vec<f64>> =
        seeds.iter().map(|s| free.iter().map(|&j| s[j]).collect()).collect();
    let wrapped = |free_vals: &[f64]| objective(&pinning.embed(&free, free_vals));
    let outcome = maximize_de(wrapped, &free_bounds, &cfg.to_de(free_seeds))?;
    let diagnostics = OptimizerDiagnostics {
        restarts: cfg.restarts,
        iterations: cfg.iterations,
        winning_restart: outcome.winning_restart,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
    };
    Ok((pinning.embed(&free, &outcome.x), outcome.value, diagnostics))
}

/// Maximizes the joint density of (X, L) with the loss coordinate sliced at
/// the threshold. The loss margin at the threshold is constant in x, so this
/// is the mode of the conditional density of X given L = threshold.
pub fn estimate_cm1(p: &ScenarioProblem, cfg: &OptimizerConfig) -> Result<ScenarioEstimate> {
    let loss = p.loss_index();
    let objective = move |x: &[f64]| {
        let mut point = Vec::with_capacity(loss + 1);
        point.extend_from_slice(x);
        point.push(p.threshold);
        match p.joint.log_density(&point) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    };
    let (m_hat, value, diagnostics) =
        run_search(&objective, &p.pinning(), &p.bounds, &p.seeds, cfg)?;
    let fitted_loss = fitted_loss_at(&p.regression, &m_hat)?;
    Ok(ScenarioEstimate {
        method: ScenarioMethod::Cm1,
        m_hat,
        threshold: p.threshold,
        fitted_loss: Some(fitted_loss),
        objective_value: Some(value),
        diagnostics: Some(diagnostics),
        screened: p.screened.clone(),
    })
}

/// Maximizes the factor density subject to the fitted loss map reaching the
/// threshold. Infeasible candidates are rejected outright, preserving the
/// indicator semantics of the constraint.
pub fn estimate_cm2(p: &ScenarioProblem, cfg: &OptimizerConfig) -> Result<ScenarioEstimate> {
    let loss = p.loss_index();
    let margin = p.joint.without_variable(loss)?;
    // Median(L | x) >= threshold is equivalent to F(threshold | x) <= 1/2,
    // which needs one conditional-cdf evaluation instead of a quantile solve.
    let chain = p.regression.copula().conditional(loss)?;
    let u_level = p.regression.marginal(loss).pit(p.threshold);
    let objective = move |x: &[f64]| {
        let mut point = Vec::with_capacity(loss + 1);
        point.extend_from_slice(x);
        point.push(f64::NAN);
        let u = p.regression.pit_row(&point);
        let feasible = match chain.partner_args(&u) {
            Ok(partners) => chain.cdf_given(&partners, u_level) <= 0.5,
            Err(_) => false,
        };
        if !feasible {
            return f64::NEG_INFINITY;
        }
        match margin.log_density(x) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    };
    let (m_hat, value, diagnostics) =
        run_search(&objective, &p.pinning(), &p.bounds, &p.seeds, cfg).map_err(|e| match e {
            Error::Optimization(_) => {
                Error::Optimization("threshold unattainable in search box".into())
            }
            other => other,
        })?;
    if !value.is_finite() {
        return Err(Error::Optimization("threshold unattainable in search box".into()));
    }
    let fitted_loss = fitted_loss_at(&p.regression, &m_hat)?;
    debug_assert!(fitted_loss >= p.threshold - FEASIBILITY_SLACK);
    Ok(ScenarioEstimate {
        method: ScenarioMethod::Cm2,
        m_hat,
        threshold: p.threshold,
        fitted_loss: Some(fitted_loss),
        objective_value: Some(value),
        diagnostics: Some(diagnostics),
        screened: p.screened.clone(),
    })
}

/// Maximizes the factor density times the conditional survival probability
/// of the loss beyond the threshold.
pub fn estimate_cm3(p: &ScenarioProblem, cfg: &OptimizerConfig) -> Result<ScenarioEstimate> {
    let loss = p.loss_index();
    let margin = p.joint.without_variable(loss)?;
    let chain = p.joint.copula().conditional(loss)?;
    let u_level = p.joint.marginal(loss).pit(p.threshold);
    let objective = move |x: &[f64]| {
        let mut point = Vec::with_capacity(loss + 1);
        point.extend_from_slice(x);
        point.push(f64::NAN);
        let u = p.joint.pit_row(&point);
        let survival = match chain.partner_args(&u) {
            Ok(partners) => 1.0 - chain.cdf_given(&partners, u_level),
            Err(_) => return f64::NEG_INFINITY,
        };
        let log_density = match margin.log_density(x) {
            Ok(v) if v.is_finite() => v,
            _ => return f64::NEG_INFINITY,
        };
        log_density + survival.max(f64::MIN_POSITIVE).ln()
    };
    let (m_hat, value, diagnostics) =
        run_search(&objective, &p.pinning(), &p.bounds, &p.seeds, cfg)?;
    let fitted_loss = fitted_loss_at(&p.regression, &m_hat)?;
    Ok(ScenarioEstimate {
        method: ScenarioMethod::Cm3,
        m_hat,
        threshold: p.threshold,
        fitted_loss: Some(fitted_loss),
        objective_value: Some(value),
        diagnostics: Some(diagnostics),
        screened: p.screened.clone(),
    })
}

/// Oracle variant of the constrained estimator: maximizes a known log
/// density subject to a known loss map reaching the threshold. Used to
/// compute population targets in simulation studies.
pub fn estimate_cm_star(
    log_density: impl Fn(&[f64]) -> f64 + Sync,
    loss_map: impl Fn(&[f64]) -> f64 + Sync,
    threshold: f64,
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<ScenarioEstimate> {
    if !threshold.is_finite() {
        return Err(Error::domain("threshold must be finite"));
    }
    let objective = |x: &[f64]| {
        if loss_map(x) >= threshold {
            let v = log_density(x);
            if v.is_finite() {
                return v;
            }
        }
        f64::NEG_INFINITY
    };
    let pinning = Pinning { dim: bounds.len(), pinned: Vec::new() };
    let (m_hat, value, diagnostics) = run_search(&objective, &pinning, bounds, &[], cfg)
        .map_err(|e| match e {
            Error::Optimization(_) => {
                Error::Optimization("threshold unattainable in search box".into())
            }
            other => other,
        })?;
    let fitted_loss = loss_map(&m_hat);
    debug_assert!(fitted_loss >= threshold - FEASIBILITY_SLACK);
    Ok(ScenarioEstimate {
        method: ScenarioMethod::CmStar,
        m_hat,
        threshold,
        fitted_loss: Some(fitted_loss),
        objective_value: Some(value),
        diagnostics: Some(diagnostics),
        screened: Vec::new(),
    })
}

/// Componentwise mean of the factor rows whose loss reaches the threshold.
/// Model-free reference; requires at least 20 exceedances.
pub fn estimate_gkk(
    factors: &[Vec<f64>],
    losses: &[f64],
    threshold: f64,
) -> Result<ScenarioEstimate> {
    if factors.len() != losses.len() || factors.is_empty() {
        return Err(Error::domain("factor rows and losses must align and be non-empty"));
    }
    let d = factors[0].len();
    if d == 0 || factors.iter().any(|r| r.len() != d) {
        return Err(Error::domain("factor rows must be rectangular and non-empty"));
    }
    if !threshold.is_finite() {
        return Err(Error::domain("threshold must be finite"));
    }
    let exceed: Vec<&Vec<f64>> = factors
        .iter()
        .zip(losses)
        .filter(|(_, &l)| l >= threshold)
        .map(|(r, _)| r)
        .collect();
    if exceed.len() < GKK_MIN_EXCEEDANCES {
        return Err(Error::fit(format!(
            "exceedance mean needs at least {GKK_MIN_EXCEEDANCES} exceedances, got {}",
            exceed.len()
        )));
    }
    let n = exceed.len() as f64;
    let m_hat: Vec<f64> = (0..d).map(|j| exceed.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    Ok(ScenarioEstimate {
        method: ScenarioMethod::Gkk,
        m_hat,
        threshold,
        fitted_loss: None,
        objective_value: None,
        diagnostics: None,
        screened: Vec::new(),
    })
}

/// Maximizes an arbitrary objective over a box with the same multi-start
/// differential-evolution engine the estimators use.
pub fn optimize_density(
    objective: impl Fn(&[f64]) -> f64 + Sync,
    bounds: &[(f64, f64)],
    cfg: &OptimizerConfig,
) -> Result<(Vec<f64>, f64, OptimizerDiagnostics)> {
    let pinning = Pinning { dim: bounds.len(), pinned: Vec::new() };
    run_search(&|x: &[f64]| objective(x), &pinning, bounds, &[], cfg)
}

/// Fitted loss at a factor configuration: the conditional median of the loss
/// under the regression model.
pub fn fitted_loss_at(regression: &JointVineModel, x: &[f64]) -> Result<f64> {
    let loss = regression.dimension() - 1;
    if x.len() != loss {
        return Err(Error::domain(format!("expected {loss} factor values, got {}", x.len())));
    }
    let mut point = Vec::with_capacity(loss + 1);
    point.extend_from_slice(x);
    point.push(f64::NAN);
    regression.predict_median(loss, &point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicop::{BicopFamily, BivariateCopula, Rotation};
    use crate::rvine::{EdgeSpec, RVineModel, VineStructure};
    use crate::univariate::{MarginalModel, SkewTParams};
    use rand::SeedableRng;

    fn quick_cfg(seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            population_size: 40,
            iterations: 400,
            restarts: 2,
            seed,
            ..OptimizerConfig::default()
        }
    }

    fn t_margin(location: f64, scale: f64) -> MarginalModel {
        MarginalModel::SkewT(SkewTParams { location, scale, alpha: 2.0, beta: 2.0 })
    }

    /// One factor plus an independent loss, both heavy tailed.
    fn independence_problem(threshold: f64) -> ScenarioProblem {
        let joint = JointVineModel::new(
            vec![t_margin(1.0, 0.7), t_margin(0.0, 1.0)],
            RVineModel::independence(2).unwrap(),
        )
        .unwrap();
        ScenarioProblem::new(joint.clone(), joint, threshold, vec![(-5.0, 6.0)]).unwrap()
    }

    /// Two factors plus a loss, with real dependence throughout.
    fn dependent_problem(threshold: f64) -> ScenarioProblem {
        let s = VineStructure::new(
            3,
            vec![
                vec![EdgeSpec::new(0, 1, vec![]), EdgeSpec::new(1, 2, vec![])],
                vec![EdgeSpec::new(0, 2, vec![1])],
            ],
        )
        .unwrap();
        let cops = vec![
            vec![
                BivariateCopula::new(BicopFamily::Gaussian, Rotation::R0, vec![0.5]).unwrap(),
                BivariateCopula::new(BicopFamily::Clayton, Rotation::R180, vec![2.0]).unwrap(),
            ],
            vec![BivariateCopula::new(BicopFamily::Gaussian, Rotation::R0, vec![0.3]).unwrap()],
        ];
        let copula = RVineModel::new(s, cops).unwrap();
        let joint = JointVineModel::new(
            vec![t_margin(0.0, 1.0), t_margin(0.0, 1.0), t_margin(0.0, 1.0)],
            copula,
        )
        .unwrap();
        ScenarioProblem::new(joint.clone(), joint, threshold, vec![(-6.0, 6.0), (-6.0, 6.0)])
            .unwrap()
    }

    #[test]
    fn quadratic_optimum_is_recovered() {
        let (x, value, diag) =
            optimize_density(|x| -(x[0] - 2.0) * (x[0] - 2.0), &[(-10.0, 10.0)], &quick_cfg(1))
                .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-6, "{:?}", x);
        assert!(value <= 0.0 && value > -1e-10);
        assert!(diag.converged);
    }

    #[test]
    fn rosenbrock_optimum_is_recovered() {
        let f = |x: &[f64]| {
            -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        };
        let cfg = OptimizerConfig { iterations: 800, restarts: 3, ..quick_cfg(2) };
        let (x, _, _) = optimize_density(f, &[(-5.0, 5.0), (-5.0, 5.0)], &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3, "{:?}", x);
    }

    fn bivariate_t_log_density(nu: f64, rho: f64) -> impl Fn(&[f64]) -> f64 + Sync {
        move |x: &[f64]| {
            let q = (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / (1.0 - rho * rho);
            -0.5 * (nu + 2.0) * (1.0 + q / nu).ln()
        }
    }

    #[test]
    fn bivariate_t_mode_is_the_center() {
        let f = bivariate_t_log_density(4.0, 0.5);
        let (x, _, _) = optimize_density(f, &[(-5.0, 5.0), (-5.0, 5.0)], &quick_cfg(3)).unwrap();
        assert!(x[0].abs() < 1e-4 && x[1].abs() < 1e-4, "{:?}", x);
    }

    #[test]
    fn constrained_oracle_matches_elliptical_closed_form() {
        // For an elliptical density and a linear loss map, the constrained
        // mode sits where the Mahalanobis ball touches the hyperplane.
        let (w0, w1) = (0.7, 0.3);
        let level = 3.3303;
        let f = bivariate_t_log_density(4.0, 0.5);
        let g = move |x: &[f64]| w0 * x[0] + w1 * x[1];
        let cfg = OptimizerConfig { iterations: 900, restarts: 3, ..quick_cfg(4) };
        let est =
            estimate_cm_star(f, g, level, &[(-6.0, 6.0), (-6.0, 6.0)], &cfg).unwrap();
        let denom = 0.7 * 0.85 + 0.3 * 0.65;
        let target = [0.85 * level / denom, 0.65 * level / denom];
        assert!((est.m_hat[0] - target[0]).abs() < 1e-3, "{:?}", est.m_hat);
        assert!((est.m_hat[1] - target[1]).abs() < 1e-3, "{:?}", est.m_hat);
        // Active constraint: the fitted loss sits on the threshold.
        let fitted = est.fitted_loss.unwrap();
        assert!(fitted >= level - 1e-9 && fitted - level < 1e-3, "fitted {fitted}");
    }

    #[test]
    fn independent_loss_reduces_to_the_marginal_mode() {
        let p = independence_problem(2.5);
        let mode = p.joint().marginal(0).mode();
        let cm1 = estimate_cm1(&p, &quick_cfg(5)).unwrap();
        assert!((cm1.m_hat[0] - mode).abs() < 1e-4, "cm1 {:?} vs {mode}", cm1.m_hat);
        let cm3 = estimate_cm3(&p, &quick_cfg(6)).unwrap();
        assert!((cm3.m_hat[0] - mode).abs() < 1e-4, "cm3 {:?} vs {mode}", cm3.m_hat);
        // Far threshold: the fitted loss at the mode stays below it.
        assert!(cm1.fitted_loss.unwrap() < p.threshold());
    }

    #[test]
    fn inactive_constraint_returns_the_unconditional_mode() {
        // Threshold below the constant fitted loss makes every point
        // feasible for the constrained estimator.
        let p = independence_problem(-9.0);
        let est = estimate_cm2(&p, &quick_cfg(7)).unwrap();
        let mode = p.joint().marginal(0).mode();
        assert!((est.m_hat[0] - mode).abs() < 1e-4, "{:?} vs {mode}", est.m_hat);
        assert!(est.fitted_loss.unwrap() >= p.threshold());
    }

    #[test]
    fn unattainable_threshold_is_reported() {
        // Independence keeps the fitted loss at the marginal median
        // regardless of x, so a high threshold is infeasible everywhere.
        let p = independence_problem(50.0);
        let err = estimate_cm2(&p, &quick_cfg(8)).unwrap_err();
        assert!(err.to_string().contains("unattainable"), "{err}");
    }

    #[test]
    fn exceedance_mean_and_its_preconditions() {
        let mut factors = Vec::new();
        let mut losses = Vec::new();
        for _ in 0..10 {
            factors.push(vec![1.0, 2.0]);
            losses.push(1.5);
            factors.push(vec![3.0, 4.0]);
            losses.push(2.5);
        }
        let est = estimate_gkk(&factors, &losses, 1.0).unwrap();
        assert_eq!(est.m_hat, vec![2.0, 3.0]);
        assert_eq!(est.method, ScenarioMethod::Gkk);
        assert!(est.diagnostics.is_none() && est.fitted_loss.is_none());

        // 19 exceedances fail the precondition.
        let err = estimate_gkk(&factors, &losses, 2.0).unwrap_err();
        assert!(err.to_string().contains("20"), "{err}");
        // A threshold above the sample maximum leaves no exceedances.
        assert!(estimate_gkk(&factors, &losses, 99.0).is_err());
    }

    #[test]
    fn grid_search_confirms_the_survival_weighted_optimum() {
        let p = dependent_problem(1.8);
        let cfg = OptimizerConfig { iterations: 300, ..quick_cfg(9) };
        let est = estimate_cm3(&p, &cfg).unwrap();

        // Brute-force lattice over the same objective.
        let margin = p.joint().without_variable(2).unwrap();
        let chain = p.joint().copula().conditional(2).unwrap();
        let u_level = p.joint().marginal(2).pit(p.threshold());
        let cells = 400;
        let (mut best, mut best_val) = (vec![0.0; 2], f64::NEG_INFINITY);
        for i in 0..cells {
            for j in 0..cells {
                let x = [
                    -6.0 + 12.0 * (i as f64 + 0.5) / cells as f64,
                    -6.0 + 12.0 * (j as f64 + 0.5) / cells as f64,
                ];
                let u = p.joint().pit_row(&[x[0], x[1], f64::NAN]);
                let partners = chain.partner_args(&u).unwrap();
                let survival = 1.0 - chain.cdf_given(&partners, u_level);
                let v = margin.log_density(&x).unwrap() + survival.max(f64::MIN_POSITIVE).ln();
                if v > best_val {
                    best_val = v;
                    best = x.to_vec();
                }
            }
        }
        let cell = 12.0 / cells as f64;
        assert!(
            (est.m_hat[0] - best[0]).abs() <= cell && (est.m_hat[1] - best[1]).abs() <= cell,
            "search {:?} vs lattice {:?}",
            est.m_hat,
            best
        );
    }

    #[test]
    fn identical_seeds_give_identical_estimates() {
        let p = dependent_problem(1.5);
        let cfg = OptimizerConfig { iterations: 120, ..quick_cfg(10) };
        let a = estimate_cm1(&p, &cfg).unwrap();
        let b = estimate_cm1(&p, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn screening_pins_factors_unrelated_to_the_loss() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 400;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let noise: f64 = rng.gen::<f64>() - 0.5;
                let x0 = 3.0 * (rng.gen::<f64>() - 0.5);
                let x1: f64 = 2.0 * (rng.gen::<f64>() - 0.5);
                vec![x0, x1, x1 + 0.4 * noise]
            })
            .collect();
        let losses: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let mut sorted = losses.clone();
        sorted.sort_by(f64::total_cmp);
        let threshold = sorted[(0.9 * n as f64) as usize];
        let kinds = [MarginalKind::SkewT, MarginalKind::SkewT, MarginalKind::SkewT];
        let p = ScenarioProblem::from_data(
            &rows,
            &kinds,
            threshold,
            true,
            &VineFitConfig::default(),
        )
        .unwrap();
        assert_eq!(p.screened(), &[0], "only the unrelated factor is pinned");
        let cfg = OptimizerConfig { iterations: 150, ..quick_cfg(12) };
        let est = estimate_cm1(&p, &cfg).unwrap();
        assert_eq!(est.screened, vec![0]);
        assert!((est.m_hat[0] - p.joint().marginal(0).mode()).abs() < 1e-12);
        // The driving factor lands in the upper tail, not at its mode.
        assert!(est.m_hat[1] > 0.5, "{:?}", est.m_hat);
    }

    #[test]
    fn estimators_are_scale_equivariant() {
        use rand::Rng as _;
        let truth = dependent_problem(0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let rows = truth.joint().simulate(900, &mut rng);
        let (a0, b0, a1, b1) = (2.0, -1.0, 0.5, 3.0);
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![a0 * r[0] + b0, a1 * r[1] + b1, r[2]])
            .collect();
        let mut losses: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        losses.sort_by(f64::total_cmp);
        let threshold = losses[(0.9 * losses.len() as f64) as usize];
        let kinds = [MarginalKind::SkewT, MarginalKind::SkewT, MarginalKind::SkewT];
        let cfg = VineFitConfig::default();
        let pa = ScenarioProblem::from_data(&rows, &kinds, threshold, false, &cfg).unwrap();
        let pb = ScenarioProblem::from_data(&scaled, &kinds, threshold, false, &cfg).unwrap();
        let ocfg = OptimizerConfig { iterations: 350, ..quick_cfg(14) };
        let ea = estimate_cm1(&pa, &ocfg).unwrap();
        let eb = estimate_cm1(&pb, &ocfg).unwrap();
        let back = [(eb.m_hat[0] - b0) / a0, (eb.m_hat[1] - b1) / a1];
        for j in 0..2 {
            let scale = ea.m_hat[j].abs().max(0.5);
            assert!(
                (ea.m_hat[j] - back[j]).abs() < 5e-3 * scale.max(1.0),
                "component {j}: {} vs mapped {}",
                ea.m_hat[j],
                back[j]
            );
        }
    }

    #[test]
    fn estimate_serializes_with_stable_method_names() {
        let est = ScenarioEstimate {
            method: ScenarioMethod::CmStar,
            m_hat: vec![1.0, 2.0],
            threshold: 0.5,
            fitted_loss: Some(0.5),
            objective_value: Some(-1.0),
            diagnostics: None,
            screened: vec![],
        };
        let js = serde_json::to_string(&est).unwrap();
        assert!(js.contains("\"CM_star\""), "{js}");
        let back: ScenarioEstimate = serde_json::from_str(&js).unwrap();
        assert_eq!(back, est);
        assert_eq!(ScenarioMethod::Cm1.to_string(), "CM1");
    }

    #[test]
    fn config_validation_rejects_bad_weights() {
        let mut cfg = OptimizerConfig::default();
        cfg.differential_weight = 2.0;
        assert!(cfg.validate().is_err());
        cfg.differential_weight = 0.8;
        cfg.crossover = 0.0;
        assert!(cfg.validate().is_err());
        cfg.crossover = 1.5;
        assert!(cfg.validate().is_err());
    }
}
