//! Stationary block bootstrap for dependent series and percentile confidence
//! intervals for stress-scenario components.
//!
//! Risk factors and losses arrive as time series, so plain iid resampling
//! understates uncertainty. The stationary bootstrap concatenates blocks of
//! geometrically distributed length with uniform random starts and circular
//! wrap-around, which preserves short-range dependence while keeping every
//! single draw uniform over the original rows. [`bootstrap_ci`] repeats an
//! arbitrary estimator over such resamples; [`bootstrap_scenario_ci`] wires in
//! the full pipeline of marginal fits, vine refit, and scenario search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::mix_seed;
use crate::rvine::{VineFitConfig, VineStructure};
use crate::scenario::{
    estimate_cm1, estimate_cm2, estimate_cm3, estimate_gkk, OptimizerConfig, ScenarioMethod,
    ScenarioProblem,
};
use crate::univariate::MarginalKind;

/// Fraction of failed replications tolerated before the bootstrap as a whole
/// is abandoned.
const FAILURE_BUDGET: f64 = 0.2;

/// Resampling plan: series length, expected block length, replication count,
/// seed stream, and interval level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapPlan {
    /// Length of the observed series; every resample has this length.
    pub n: usize,
    /// Expected geometric block length, at least 1. A value of 1 degenerates
    /// to iid resampling with replacement.
    pub mean_block: f64,
    /// Number of bootstrap replications.
    pub replications: usize,
    /// Root seed. Replication r works from a seed derived from (seed, r), so
    /// results do not depend on thread scheduling.
    pub seed: u64,
    /// Two-sided confidence level of the percentile intervals.
    pub interval_level: f64,
}

impl BootstrapPlan {
    /// A plan with the customary defaults: expected block length n^(1/3),
    /// 500 replications, 95% intervals.
    pub fn new(n: usize, seed: u64) -> Self {
        BootstrapPlan {
            n,
            mean_block: (n as f64).cbrt().max(1.0),
            replications: 500,
            seed,
            interval_level: 0.95,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("cannot resample an empty series"));
        }
        if !(self.mean_block >= 1.0) {
            return Err(Error::domain("mean block length must be at least 1"));
        }
        if self.replications < 2 {
            return Err(Error::domain("percentile intervals need at least two replications"));
        }
        if !(self.interval_level > 0.0 && self.interval_level < 1.0) {
            return Err(Error::domain("interval level must lie strictly inside (0, 1)"));
        }
        Ok(())
    }
}

/// One geometric block length with the given mean:
/// L = 1 + floor(ln U / ln(1 - p)) for p = 1/mean_block and U uniform.
fn block_length<R: Rng>(mean_block: f64, rng: &mut R) -> usize {
    if mean_block <= 1.0 {
        return 1;
    }
    let p = 1.0 / mean_block;
    // 1 - gen() lies in (0, 1], so the logarithm is finite and non-positive.
    let u = 1.0 - rng.gen::<f64>();
    1 + (u.ln() / (1.0 - p).ln()).floor() as usize
}

/// Index vector of one stationary-bootstrap resample: concatenated circular
/// blocks with geometric lengths and uniform starts, truncated to `plan.n`.
pub fn stationary_bootstrap_indices<R: Rng>(
    plan: &BootstrapPlan,
    rng: &mut R,
) -> Result<Vec<usize>> {
    plan.validate()?;
    let n = plan.n;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let start = rng.gen_range(0..n);
        let len = block_length(plan.mean_block, rng).min(n - out.len());
        out.extend((0..len).map(|k| (start + k) % n));
    }
    Ok(out)
}

/// Percentile interval around one scenario component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentInterval {
    pub lower: f64,
    pub point: f64,
    pub upper: f64,
}

/// Bootstrap outcome: one interval per estimate component plus bookkeeping on
/// how many replications actually contributed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiReport {
    pub intervals: Vec<ComponentInterval>,
    pub effective_replications: usize,
    pub failures: usize,
    pub level: f64,
}

/// Linear-interpolation quantile of a sorted sample (the common "type 7"
/// rule).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = q * (m - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(m - 1);
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Percentile confidence intervals for a vector-valued estimator under the
/// stationary bootstrap.
///
/// `estimate` maps a resampled data set and a derived seed to an estimate
/// vector. It runs once on the original rows (that result is the reported
/// point, and an error there is fatal) and once per replication. Failed
/// replications are skipped and counted; once more than 20% fail the whole
/// computation aborts instead of reporting intervals from a thinned sample.
pub fn bootstrap_ci<F>(rows: &[Vec<f64>], plan: &BootstrapPlan, estimate: F) -> Result<CiReport>
where
    F: Fn(&[Vec<f64>], u64) -> Result<Vec<f64>> + Sync,
{
    plan.validate()?;
    if rows.len() != plan.n {
        return Err(Error::domain(format!(
            "plan is for {} rows but the data has {}",
            plan.n,
            rows.len()
        )));
    }
    let point = estimate(rows, plan.seed)?;
    if point.is_empty() {
        return Err(Error::domain("estimator returned no components"));
    }

    let replicates: Vec<Result<Vec<f64>>> = (0..plan.replications)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = mix_seed(plan.seed, rep as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let indices = stationary_bootstrap_indices(plan, &mut rng)?;
            let sample: Vec<Vec<f64>> = indices.iter().map(|&i| rows[i].clone()).collect();
            let est = estimate(&sample, rep_seed)?;
            if est.len() != point.len() {
                return Err(Error::Bootstrap(format!(
                    "replication {rep} returned {} components, expected {}",
                    est.len(),
                    point.len()
                )));
            }
            Ok(est)
        })
        .collect();

    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(plan.replications);
    let mut failures = 0usize;
    let mut first_error: Option<Error> = None;
    for r in replicates {
        match r {
            Ok(est) => kept.push(est),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if (failures as f64) > FAILURE_BUDGET * plan.replications as f64 {
        let detail = first_error.expect("at least one failure recorded");
        return Err(Error::Bootstrap(format!(
            "{failures} of {} replications failed; first failure: {detail}",
            plan.replications
        )));
    }

    let alpha = 1.0 - plan.interval_level;
    let intervals = (0..point.len())
        .map(|j| {
            let mut comp: Vec<f64> = kept.iter().map(|e| e[j]).collect();
            comp.sort_by(f64::total_cmp);
            ComponentInterval {
                lower: percentile(&comp, 0.5 * alpha),
                point: point[j],
                upper: percentile(&comp, 1.0 - 0.5 * alpha),
            }
        })
        .collect();

    Ok(CiReport {
        intervals,
        effective_replications: kept.len(),
        failures,
        level: plan.interval_level,
    })
}

/// Everything needed to refit and re-estimate a stress scenario on each
/// resample.
#[derive(Clone, Debug)]
pub struct ScenarioBootstrapConfig {
    /// Which estimator to bootstrap. `CmStar` is rejected: it evaluates a
    /// known model rather than fitting data, so there is no sampling
    /// variability to propagate.
    pub method: ScenarioMethod,
    /// Marginal family per column, loss column last.
    pub kinds: Vec<MarginalKind>,
    /// Pair-copula selection settings for the vine refits.
    pub vine: VineFitConfig,
    /// Search settings. The seed is replaced per replication.
    pub optimizer: OptimizerConfig,
    /// Loss level defining the stress event, on the original loss scale.
    pub threshold: f64,
    /// Pin factors that fail an independence pretest against the loss.
    pub screen_independent: bool,
    /// Reuse the vine trees selected on the original data instead of
    /// re-selecting them on every resample. Faster and less variable, at the
    /// price of ignoring structure uncertainty.
    pub freeze_structure: bool,
}

/// Bootstrap intervals for the components of a fitted stress scenario.
///
/// Each replication reruns the full pipeline on its resample: marginal fits,
/// vine fit, scenario search. `Gkk` skips the model fits and averages
/// exceedances. The loss must sit in the last column of `rows`.
pub fn bootstrap_scenario_ci(
    rows: &[Vec<f64>],
    cfg: &ScenarioBootstrapConfig,
    plan: &BootstrapPlan,
) -> Result<CiReport> {
    match cfg.method {
        ScenarioMethod::CmStar => Err(Error::domain(
            "CM* evaluates a known model, not a fit; there is nothing to bootstrap",
        )),
        ScenarioMethod::Gkk => bootstrap_ci(rows, plan, |sample, _seed| {
            let d = sample.first().map(|r| r.len()).unwrap_or(0);
            if d < 2 {
                return Err(Error::domain("need at least one factor column plus the loss column"));
            }
            let factors: Vec<Vec<f64>> = sample.iter().map(|r| r[..d - 1].to_vec()).collect();
            let losses: Vec<f64> = sample.iter().map(|r| r[d - 1]).collect();
            Ok(estimate_gkk(&factors, &losses, cfg.threshold)?.m_hat)
        }),
        ScenarioMethod::Cm1 | ScenarioMethod::Cm2 | ScenarioMethod::Cm3 => {
            let frozen: Option<VineStructure> = if cfg.freeze_structure {
                let p = ScenarioProblem::from_data(
                    rows,
                    &cfg.kinds,
                    cfg.threshold,
                    cfg.screen_independent,
                    &cfg.vine,
                )?;
                Some(p.joint().copula().structure().clone())
            } else {
                None
            };
            bootstrap_ci(rows, plan, move |sample, seed| {
                let problem = match &frozen {
                    None => ScenarioProblem::from_data(
                        sample,
                        &cfg.kinds,
                        cfg.threshold,
                        cfg.screen_independent,
                        &cfg.vine,
                    )?,
                    Some(s) => ScenarioProblem::from_data_with_structure(
                        sample,
                        &cfg.kinds,
                        cfg.threshold,
                        cfg.screen_independent,
                        &cfg.vine,
                        s,
                    )?,
                };
                let optimizer = OptimizerConfig { seed, ..cfg.optimizer.clone() };
                let est = match cfg.method {
                    ScenarioMethod::Cm1 => estimate_cm1(&problem, &optimizer)?,
                    ScenarioMethod::Cm2 => estimate_cm2(&problem, &optimizer)?,
                    ScenarioMethod::Cm3 => estimate_cm3(&problem, &optimizer)?,
                    _ => unreachable!("remaining methods handled above"),
                };
                Ok(est.m_hat)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn test_plan(n: usize, mean_block: f64, replications: usize, seed: u64) -> BootstrapPlan {
        BootstrapPlan { n, mean_block, replications, seed, interval_level: 0.95 }
    }

    fn column_means(sample: &[Vec<f64>]) -> Vec<f64> {
        let d = sample[0].len();
        let n = sample.len() as f64;
        (0..d).map(|j| sample.iter().map(|r| r[j]).sum::<f64>() / n).collect()
    }

    /// Three columns: idle noise, a driving factor, and a loss tied to the
    /// driver. Returns the rows and the empirical `q` loss quantile.
    fn driven_rows(n: usize, seed: u64, q: f64) -> (Vec<Vec<f64>>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let noise: f64 = rng.gen::<f64>() - 0.5;
                let x0 = 3.0 * (rng.gen::<f64>() - 0.5);
                let x1: f64 = 2.0 * (rng.gen::<f64>() - 0.5);
                vec![x0, x1, x1 + 0.4 * noise]
            })
            .collect();
        let mut losses: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        losses.sort_by(f64::total_cmp);
        let threshold = losses[(q * n as f64) as usize];
        (rows, threshold)
    }

    #[test]
    fn default_plan_uses_cube_root_block_length() {
        let plan = BootstrapPlan::new(3077, 7);
        assert_abs_diff_eq!(plan.mean_block, 14.545, epsilon = 6e-3);
        assert_eq!(plan.replications, 500);
        assert_eq!(plan.interval_level, 0.95);
        assert!(plan.validate().is_ok());
        assert_eq!(BootstrapPlan::new(1, 0).mean_block, 1.0);
    }

    #[test]
    fn plan_validation_rejects_degenerate_settings() {
        assert!(test_plan(0, 1.0, 10, 0).validate().is_err());
        assert!(test_plan(50, 0.99, 10, 0).validate().is_err());
        // A single replication cannot span a percentile interval.
        assert!(test_plan(50, 2.0, 1, 0).validate().is_err());
        let mut plan = test_plan(50, 2.0, 10, 0);
        plan.interval_level = 1.0;
        assert!(plan.validate().is_err());
    }

    #[test]
    fn same_seed_reproduces_the_index_vector() {
        let plan = test_plan(64, 5.0, 10, 99);
        let a = stationary_bootstrap_indices(&plan, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = stationary_bootstrap_indices(&plan, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let c = stationary_bootstrap_indices(&plan, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn indices_cover_range_and_wrap_circularly() {
        let plan = test_plan(40, 12.0, 10, 0);
        let mut saw_wrap = false;
        for seed in 0..20 {
            let idx =
                stationary_bootstrap_indices(&plan, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(idx.len(), 40);
            assert!(idx.iter().all(|&i| i < 40));
            saw_wrap |= idx.windows(2).any(|w| w[0] == 39 && w[1] == 0);
        }
        assert!(saw_wrap, "no block crossed the series end over 20 draws");
    }

    proptest! {
        #[test]
        fn indices_always_in_range(
            n in 1usize..120,
            mean_block in 1.0f64..20.0,
            seed in proptest::num::u64::ANY,
        ) {
            let plan = test_plan(n, mean_block, 2, 0);
            let idx =
                stationary_bootstrap_indices(&plan, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(idx.len(), n);
            prop_assert!(idx.iter().all(|&i| i < n));
        }
    }

    #[test]
    fn unit_mean_block_resamples_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let mean = (0..draws).map(|_| block_length(1.0, &mut rng) as f64).sum::<f64>()
            / draws as f64;
        assert!((1.0..=1.1).contains(&mean), "mean block length {mean}");
    }

    #[test]
    fn block_lengths_match_the_requested_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for target in [3.0, 14.545] {
            let draws = 10_000;
            let mean = (0..draws).map(|_| block_length(target, &mut rng) as f64).sum::<f64>()
                / draws as f64;
            assert!(
                (mean - target).abs() < 0.1 * target,
                "mean block length {mean} vs requested {target}"
            );
        }
    }

    /// 0.99 quantile of the chi-square distribution with 49 degrees of
    /// freedom.
    const CHI2_CRIT_DF49_AT_1PCT: f64 = 74.919;

    #[test]
    fn resampled_values_follow_the_empirical_distribution() {
        // Unit blocks make the draws independent, so the plain chi-square
        // goodness-of-fit reference applies: 100k draws over 50 equiprobable
        // bins of the 200 source indices.
        let plan = test_plan(200, 1.0, 10, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0u64; 50];
        for _ in 0..500 {
            for i in stationary_bootstrap_indices(&plan, &mut rng).unwrap() {
                counts[i / 4] += 1;
            }
        }
        let expected = 100_000.0 / 50.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < CHI2_CRIT_DF49_AT_1PCT, "chi-square statistic {chi2}");
    }

    #[test]
    fn blocked_resampling_keeps_the_marginal_uniform() {
        // With real blocks the draws are serially dependent, so a chi-square
        // reference is too tight; check uniformity of the marginal with a
        // generous deviation bound instead.
        let plan = test_plan(1000, 15.0, 10, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut counts = vec![0u64; 50];
        for _ in 0..8000 {
            for i in stationary_bootstrap_indices(&plan, &mut rng).unwrap() {
                counts[i / 20] += 1;
            }
        }
        let expected = 8_000_000.0 / 50.0;
        for (bin, &c) in counts.iter().enumerate() {
            let rel = (c as f64 - expected).abs() / expected;
            assert!(rel < 0.05, "bin {bin} deviates by {rel:.3}");
        }
    }

    #[test]
    fn percentile_interpolates_linearly() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&sorted, 0.0), 1.0);
        assert_eq!(percentile(&sorted, 1.0), 4.0);
        assert_abs_diff_eq!(percentile(&sorted, 0.5), 2.5, epsilon = 1e-12);
        assert_eq!(percentile(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn zero_width_intervals_for_a_constant_estimator() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let plan = test_plan(20, 2.0, 2, 3);
        let report = bootstrap_ci(&rows, &plan, |_, _| Ok(vec![1.5, -2.0])).unwrap();
        assert_eq!(report.effective_replications, 2);
        assert_eq!(report.failures, 0);
        for (iv, want) in report.intervals.iter().zip([1.5, -2.0]) {
            assert_eq!(iv.lower, want);
            assert_eq!(iv.point, want);
            assert_eq!(iv.upper, want);
        }
    }

    #[test]
    fn single_row_series_gives_degenerate_intervals() {
        // Every resample of a length-1 series is the original series, so the
        // intervals collapse onto the point estimate.
        let rows = vec![vec![5.0, 2.0]];
        let plan = test_plan(1, 1.0, 4, 0);
        let report = bootstrap_ci(&rows, &plan, |s, _| Ok(column_means(s))).unwrap();
        for (iv, want) in report.intervals.iter().zip([5.0, 2.0]) {
            assert_eq!((iv.lower, iv.point, iv.upper), (want, want, want));
        }
    }

    #[test]
    fn seeded_bootstrap_is_deterministic_and_brackets_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = 0.0f64;
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| {
                x = 0.6 * x + rng.gen::<f64>() - 0.5;
                vec![x, x * x]
            })
            .collect();
        let plan = BootstrapPlan { replications: 60, ..BootstrapPlan::new(80, 21) };
        let run = || bootstrap_ci(&rows, &plan, |s, _| Ok(column_means(s))).unwrap();
        let report = run();
        assert_eq!(report, run());
        assert_eq!(report.effective_replications, 60);
        assert_eq!(report.failures, 0);
        let point = column_means(&rows);
        for (iv, want) in report.intervals.iter().zip(point) {
            assert_eq!(iv.point, want);
            assert!(iv.lower <= iv.point && iv.point <= iv.upper, "{iv:?}");
            assert!(iv.upper > iv.lower, "interval should have positive width");
        }
    }

    #[test]
    fn narrower_level_gives_narrower_intervals() {
        let rows: Vec<Vec<f64>> = {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            (0..60).map(|_| vec![rng.gen::<f64>()]).collect()
        };
        let mut plan = BootstrapPlan { replications: 80, ..BootstrapPlan::new(60, 5) };
        let wide = bootstrap_ci(&rows, &plan, |s, _| Ok(column_means(s))).unwrap();
        plan.interval_level = 0.5;
        let narrow = bootstrap_ci(&rows, &plan, |s, _| Ok(column_means(s))).unwrap();
        let width = |r: &CiReport| r.intervals[0].upper - r.intervals[0].lower;
        assert!(width(&narrow) < width(&wide));
    }

    #[test]
    fn failure_budget_aborts_the_bootstrap() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let plan = test_plan(30, 3.0, 10, 7);
        // Succeeds on the original ordering only; every resample fails.
        let original = rows.clone();
        let err = bootstrap_ci(&rows, &plan, |s, _| {
            if s == original.as_slice() {
                Ok(vec![0.0])
            } else {
                Err(Error::domain("not the original sample"))
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Bootstrap(_)), "{err}");
        assert!(err.to_string().contains("10 replications failed"), "{err}");
    }

    #[test]
    fn component_count_must_stay_stable_across_replications() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let plan = test_plan(30, 3.0, 10, 7);
        let original = rows.clone();
        let err = bootstrap_ci(&rows, &plan, |s, _| {
            if s == original.as_slice() {
                Ok(vec![0.0, 1.0])
            } else {
                Ok(vec![0.0])
            }
        })
        .unwrap_err();
        assert!(err.to_string().contains("expected 2"), "{err}");
    }

    #[test]
    fn plan_length_must_match_the_data() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let plan = test_plan(10, 2.0, 4, 0);
        let err = bootstrap_ci(&rows, &plan, |s, _| Ok(column_means(s))).unwrap_err();
        assert!(err.to_string().contains("plan is for 10 rows"), "{err}");
    }

    #[test]
    fn cm1_bootstrap_runs_end_to_end() {
        let (rows, threshold) = driven_rows(220, 31, 0.88);
        let cfg = ScenarioBootstrapConfig {
            method: ScenarioMethod::Cm1,
            kinds: vec![MarginalKind::SkewT; 3],
            vine: VineFitConfig::default(),
            optimizer: OptimizerConfig {
                population_size: 12,
                iterations: 50,
                restarts: 1,
                ..OptimizerConfig::default()
            },
            threshold,
            screen_independent: false,
            freeze_structure: false,
        };
        let plan = BootstrapPlan { replications: 8, ..BootstrapPlan::new(220, 17) };
        let report = bootstrap_scenario_ci(&rows, &cfg, &plan).unwrap();
        assert_eq!(report.effective_replications + report.failures, 8);
        assert!(report.failures <= 1, "failures: {}", report.failures);
        assert_eq!(report.intervals.len(), 2);
        for iv in &report.intervals {
            assert!(iv.lower.is_finite() && iv.upper.is_finite());
            assert!(iv.lower <= iv.upper, "{iv:?}");
        }
        // The driving factor's interval sits in the upper tail.
        assert!(report.intervals[1].point > 0.4, "{:?}", report.intervals[1]);
        let again = bootstrap_scenario_ci(&rows, &cfg, &plan).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn frozen_structure_bootstrap_reuses_the_original_trees() {
        let (rows, threshold) = driven_rows(220, 31, 0.88);
        let cfg = ScenarioBootstrapConfig {
            method: ScenarioMethod::Cm1,
            kinds: vec![MarginalKind::SkewT; 3],
            vine: VineFitConfig::default(),
            optimizer: OptimizerConfig {
                population_size: 12,
                iterations: 50,
                restarts: 1,
                ..OptimizerConfig::default()
            },
            threshold,
            screen_independent: false,
            freeze_structure: true,
        };
        let plan = BootstrapPlan { replications: 6, ..BootstrapPlan::new(220, 23) };
        let report = bootstrap_scenario_ci(&rows, &cfg, &plan).unwrap();
        assert_eq!(report.intervals.len(), 2);
        assert!(report.failures <= 1, "failures: {}", report.failures);
        for iv in &report.intervals {
            assert!(iv.lower.is_finite() && iv.upper.is_finite());
        }
    }

    #[test]
    fn gkk_bootstrap_skips_model_fitting() {
        let (rows, threshold) = driven_rows(200, 13, 0.5);
        let cfg = ScenarioBootstrapConfig {
            method: ScenarioMethod::Gkk,
            kinds: vec![MarginalKind::SkewT; 3],
            vine: VineFitConfig::default(),
            optimizer: OptimizerConfig::default(),
            threshold,
            screen_independent: false,
            freeze_structure: false,
        };
        let plan = BootstrapPlan { replications: 16, ..BootstrapPlan::new(200, 9) };
        let report = bootstrap_scenario_ci(&rows, &cfg, &plan).unwrap();
        assert_eq!(report.failures, 0);
        assert_eq!(report.intervals.len(), 2);
        for iv in &report.intervals {
            assert!(iv.lower.is_finite() && iv.upper.is_finite());
            assert!(iv.lower <= iv.upper);
        }
        let again = bootstrap_scenario_ci(&rows, &cfg, &plan).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn cm_star_cannot_be_bootstrapped() {
        let (rows, threshold) = driven_rows(100, 1, 0.8);
        let cfg = ScenarioBootstrapConfig {
            method: ScenarioMethod::CmStar,
            kinds: vec![MarginalKind::SkewT; 3],
            vine: VineFitConfig::default(),
            optimizer: OptimizerConfig::default(),
            threshold,
            screen_independent: false,
            freeze_structure: false,
        };
        let plan = BootstrapPlan::new(100, 0);
        let err = bootstrap_scenario_ci(&rows, &cfg, &plan).unwrap_err();
        assert!(err.to_string().contains("CM*"), "{err}");
    }
}
