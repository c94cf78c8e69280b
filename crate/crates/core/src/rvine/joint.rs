//! Joint models on the original data scale: fitted marginals plus a vine
//! copula, giving densities, simulation, conditional cdfs, and
//! median-regression prediction.

use super::model::{ConditionalChain, RVineModel};
use super::select::{fit_regression_rvine, fit_rvine, VineFitConfig};
use crate::univariate::{MarginalKind, MarginalModel};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Conditional medians are solved inside this quantile bracket before the
/// marginal quantile transform.
const PREDICT_BRACKET: f64 = 1e-6;

/// Marginal models for every variable plus a vine copula over their PITs.
/// The joint density factors into marginal densities times the copula
/// density at the transformed point.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointVineModel {
    marginals: Vec<MarginalModel>,
    copula: RVineModel,
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    marginals: Vec<MarginalModel>,
    copula: RVineModel,
}

impl From<JointVineModel> for JointRepr {
    fn from(m: JointVineModel) -> Self {
        JointRepr { marginals: m.marginals, copula: m.copula }
    }
}

impl TryFrom<JointRepr> for JointVineModel {
    type Error = String;
    fn try_from(r: JointRepr) -> std::result::Result<Self, String> {
        JointVineModel::new(r.marginals, r.copula).map_err(|e| e.to_string())
    }
}

impl JointVineModel {
    pub fn new(marginals: Vec<MarginalModel>, copula: RVineModel) -> Result<Self> {
        if marginals.len() != copula.dimension() {
            return Err(Error::InvalidModel(format!(
                "{} marginals for a {}-dimensional copula",
                marginals.len(),
                copula.dimension()
            )));
        }
        Ok(JointVineModel { marginals, copula })
    }

    /// Two-stage fit: marginals by maximum likelihood, then the vine on the
    /// fitted-marginal PITs.
    pub fn fit(rows: &[Vec<f64>], kinds: &[MarginalKind], cfg: &VineFitConfig) -> Result<Self> {
        let (marginals, pits) = fit_margins(rows, kinds)?;
        let vine = fit_rvine(&pits, cfg)?;
        JointVineModel::new(marginals, vine.model)
    }

    /// As [`fit`](Self::fit), but keeps `response` terminal in every tree so
    /// its conditional distribution given the rest is available in closed
    /// form.
    pub fn fit_with_response(
        rows: &[Vec<f64>],
        kinds: &[MarginalKind],
        cfg: &VineFitConfig,
        response: usize,
    ) -> Result<Self> {
        let (marginals, pits) = fit_margins(rows, kinds)?;
        let vine = fit_regression_rvine(&pits, response, cfg)?;
        JointVineModel::new(marginals, vine.model)
    }

    /// As [`fit`](Self::fit), but reuses a previously selected vine
    /// structure; only marginals and pair-copula families/parameters are
    /// refit. Used by resampling schemes that freeze the trees.
    pub fn fit_fixed(
        rows: &[Vec<f64>],
        kinds: &[MarginalKind],
        cfg: &VineFitConfig,
        structure: &crate::rvine::VineStructure,
    ) -> Result<Self> {
        let (marginals, pits) = fit_margins(rows, kinds)?;
        let vine = crate::rvine::fit_rvine_fixed(&pits, structure, cfg)?;
        JointVineModel::new(marginals, vine.model)
    }

    pub fn dimension(&self) -> usize {
        self.copula.dimension()
    }

    pub fn marginals(&self) -> &[MarginalModel] {
        &self.marginals
    }

    pub fn marginal(&self, j: usize) -> &MarginalModel {
        &self.marginals[j]
    }

    pub fn copula(&self) -> &RVineModel {
        &self.copula
    }

    /// PITs of one data-scale row.
    pub fn pit_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.marginals).map(|(&v, m)| m.pit(v)).collect()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension() {
            return Err(Error::domain("point length does not match model dimension"));
        }
        let margins: f64 = x.iter().zip(&self.marginals).map(|(&v, m)| m.log_density(v)).sum();
        Ok(margins + self.copula.log_density(&self.pit_row(x))?)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// Draws data-scale rows: copula simulation followed by marginal
    /// quantile transforms. Deterministic given the RNG state.
    pub fn simulate<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        self.copula
            .simulate(n, rng)
            .into_iter()
            .map(|row| {
                row.iter().zip(&self.marginals).map(|(&u, m)| m.quantile(u)).collect()
            })
            .collect()
    }

    /// F(x_target <= q | other coordinates), where `x[target] = q`. Needs
    /// `target` terminal in the vine.
    pub fn conditional_cdf(&self, target: usize, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension() {
            return Err(Error::domain("point length does not match model dimension"));
        }
        self.copula.conditional_cdf(target, &self.pit_row(x))
    }

    /// Copula-scale conditional chain for a terminal variable.
    pub fn conditional(&self, target: usize) -> Result<ConditionalChain<'_>> {
        self.copula.conditional(target)
    }

    /// Median regression: the conditional median of `target` given the other
    /// coordinates of `x` (the `target` slot is ignored), on the data scale.
    pub fn predict_median(&self, target: usize, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension() {
            return Err(Error::domain("point length does not match model dimension"));
        }
        let chain = self.copula.conditional(target)?;
        let mut u = self.pit_row(x);
        u[target] = 0.5;
        let med = chain.quantile(0.5, &u)?;
        Ok(self.marginals[target].quantile(med.clamp(PREDICT_BRACKET, 1.0 - PREDICT_BRACKET)))
    }

    /// The model with terminal variable `v` integrated out; variables above
    /// `v` shift down by one.
    pub fn without_variable(&self, v: usize) -> Result<JointVineModel> {
        let copula = self.copula.without_terminal(v)?;
        let marginals = self
            .marginals
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != v)
            .map(|(_, m)| m.clone())
            .collect();
        JointVineModel::new(marginals, copula)
    }
}

fn fit_margins(
    rows: &[Vec<f64>],
    kinds: &[MarginalKind],
) -> Result<(Vec<MarginalModel>, Vec<Vec<f64>>)> {
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::fit("rows must be non-empty and rectangular"));
    }
    if kinds.len() != d {
        return Err(Error::fit(format!("{} marginal kinds for {d} columns", kinds.len())));
    }
    let mut marginals = Vec::with_capacity(d);
    for (j, &kind) in kinds.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let m = MarginalModel::fit(kind, &col)
            .map_err(|e| Error::fit(format!("marginal {j}: {e}")))?;
        marginals.push(m);
    }
    let pits = crate::univariate::pit_columns(&marginals, rows);
    Ok((marginals, pits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicop::{BicopFamily, BivariateCopula, Rotation};
    use crate::rvine::structure::EdgeSpec;
    use crate::rvine::VineStructure;
    use crate::univariate::SkewTParams;
    use rand::SeedableRng;

    fn t4_margin(location: f64, scale: f64) -> MarginalModel {
        // Equal shapes give an exact Student t(4) rescaled.
        MarginalModel::SkewT(SkewTParams {
            location,
            scale,
            alpha: 2.0,
            beta: 2.0,
        })
    }

    fn simple_joint(rho01: f64, rho12: f64) -> JointVineModel {
        let s = VineStructure::new(
            3,
            vec![
                vec![EdgeSpec::new(0, 1, vec![]), EdgeSpec::new(1, 2, vec![])],
                vec![EdgeSpec::new(0, 2, vec![1])],
            ],
        )
        .unwrap();
        let pair = |rho: f64| {
            BivariateCopula::new(BicopFamily::Gaussian, Rotation::R0, vec![rho]).unwrap()
        };
        let cops = vec![vec![pair(rho01), pair(rho12)], vec![pair(0.0)]];
        let copula = RVineModel::new(s, cops).unwrap();
        let margins = vec![t4_margin(0.0, 1.0), t4_margin(1.0, 0.5), t4_margin(-2.0, 2.0)];
        JointVineModel::new(margins, copula).unwrap()
    }

    #[test]
    fn independence_density_is_marginal_product() {
        let copula = RVineModel::independence(3).unwrap();
        let margins = vec![t4_margin(0.0, 1.0), t4_margin(1.0, 0.5), t4_margin(-2.0, 2.0)];
        let joint = JointVineModel::new(margins.clone(), copula).unwrap();
        let x = [0.4, 1.3, -1.0];
        let product: f64 = x.iter().zip(&margins).map(|(&v, m)| m.log_density(v)).sum();
        assert!((joint.log_density(&x).unwrap() - product).abs() < 1e-12);
        // Median prediction collapses to the marginal median for any x.
        let med = joint.predict_median(2, &[5.0, -3.0, f64::NAN]).unwrap();
        assert!((med - margins[2].quantile(0.5)).abs() < 1e-6);
    }

    #[test]
    fn conditional_cdf_limits_and_monotonicity() {
        let joint = simple_joint(0.6, 0.4);
        let base = [0.5, 1.2, f64::NAN];
        let mut prev = 0.0;
        for q in [-30.0, -3.0, -2.0, 0.0, 2.0, 25.0] {
            let mut x = base;
            x[2] = q;
            let p = joint.conditional_cdf(2, &x).unwrap();
            assert!(p >= prev, "conditional cdf must be nondecreasing");
            prev = p;
        }
        let mut x = base;
        x[2] = -60.0;
        assert!(joint.conditional_cdf(2, &x).unwrap() < 1e-4);
        x[2] = 60.0;
        assert!(joint.conditional_cdf(2, &x).unwrap() > 1.0 - 1e-4);
    }

    #[test]
    fn simulate_then_fit_round_trips_coarsely() {
        let truth = simple_joint(0.7, 0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let rows = truth.simulate(2000, &mut rng);
        let cfg = VineFitConfig {
            candidates: vec![(BicopFamily::Gaussian, Rotation::R0)],
            criterion: crate::bicop::SelectionCriterion::Aic,
        };
        let fit = JointVineModel::fit(
            &rows,
            &[MarginalKind::SkewT, MarginalKind::SkewT, MarginalKind::SkewT],
            &cfg,
        )
        .unwrap();
        assert_eq!(fit.dimension(), 3);
        // The strongest pair should be recovered in tree 0 with rho near 0.7.
        let t0 = fit.copula().structure().trees()[0].clone();
        let edge01 = t0.iter().position(|e| e.conditioned == (0, 1)).unwrap();
        let rho = fit.copula().copula(0, edge01).parameters()[0];
        assert!((rho - 0.7).abs() < 0.07, "rho {rho}");
        // Densities stay finite near the data bulk.
        assert!(fit.log_density(&[0.2, 1.1, -2.2]).unwrap().is_finite());
    }

    #[test]
    fn response_fit_keeps_conditional_available() {
        let truth = simple_joint(0.7, 0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let rows = truth.simulate(1200, &mut rng);
        let cfg = VineFitConfig::default();
        let fit = JointVineModel::fit_with_response(
            &rows,
            &[MarginalKind::SkewT, MarginalKind::SkewT, MarginalKind::SkewT],
            &cfg,
            2,
        )
        .unwrap();
        assert!(fit.copula().structure().is_terminal_variable(2));
        let med = fit.predict_median(2, &[0.0, 1.0, f64::NAN]).unwrap();
        assert!(med.is_finite());
        // Margin without the response drops to dimension 2.
        let margin = fit.without_variable(2).unwrap();
        assert_eq!(margin.dimension(), 2);
    }

    #[test]
    fn two_variable_conditional_is_a_single_h_function() {
        let s = VineStructure::new(2, vec![vec![EdgeSpec::new(0, 1, vec![])]]).unwrap();
        let pair =
            BivariateCopula::new(BicopFamily::Gaussian, Rotation::R0, vec![0.8]).unwrap();
        let copula = RVineModel::new(s, vec![vec![pair.clone()]]).unwrap();
        let joint = JointVineModel::new(vec![t4_margin(0.0, 1.0), t4_margin(0.0, 1.0)], copula)
            .unwrap();
        let x = [0.7, 0.3];
        let u = joint.pit_row(&x);
        let want = pair.hfunc1(u[0], u[1]);
        let got = joint.conditional_cdf(1, &x).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_preserves_evaluations() {
        let joint = simple_joint(0.6, 0.4);
        let js = serde_json::to_string(&joint).unwrap();
        let back: JointVineModel = serde_json::from_str(&js).unwrap();
        let x = [0.3, 1.5, -2.5];
        assert!(
            (joint.log_density(&x).unwrap() - back.log_density(&x).unwrap()).abs() < 1e-12
        );
    }
}
