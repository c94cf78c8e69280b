//! Two-regime clustering of dependence patterns.
//!
//! Observations of (risk factors, loss) are compressed to one factor score
//! per row by kernel PCA, the (score, loss) pairs are rank-transformed to
//! uniforms, and a mixture of two bivariate t copulas is fitted by EM. The
//! posterior over mixture components then splits the sample into regimes,
//! typically a high-dependence and a low- or negative-dependence one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::optim::golden_section_max;
use crate::special::{lngamma, norm_quantile, t_logpdf, t_quantile};
use crate::{Error, Result};

/// Eigenvalue floor below which the kernel matrix is treated as degenerate.
const EIGEN_THRESHOLD: f64 = 1e-10;

/// EM stops when the log-likelihood gain drops below this.
const EM_TOL: f64 = 1e-6;
const EM_MAX_ITER: usize = 500;

/// Mixing weights closer to the boundary than this mean a component died.
const COLLAPSE_LIMIT: f64 = 0.01;

/// Degrees-of-freedom profile grid for the M-step.
const NU_GRID: [f64; 8] = [2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 25.0];

/// Pairs used for the O(n^2) weighted rank correlation are capped at this
/// many rows (deterministic stride subsample).
const TAU_SUBSAMPLE: usize = 1000;

/// Kernel for [`kernel_pca_first_component`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// Inner products; equivalent to classical PCA scores.
    Linear,
    /// Radial basis kernel. Without an explicit bandwidth the median
    /// pairwise distance is used.
    Gaussian { bandwidth: Option<f64> },
}

/// Parameters of a two-component bivariate t-copula mixture, canonicalized
/// so that `rho1 >= rho2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Weight of component 1, in (0, 1).
    pub pi: f64,
    pub rho1: f64,
    pub nu1: f64,
    pub rho2: f64,
    pub nu2: f64,
}

impl MixtureParams {
    pub fn new(pi: f64, rho1: f64, nu1: f64, rho2: f64, nu2: f64) -> Result<Self> {
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::domain("mixing weight must lie in (0, 1)"));
        }
        for (name, rho) in [("rho1", rho1), ("rho2", rho2)] {
            if !(rho > -1.0 && rho < 1.0) {
                return Err(Error::domain(format!("{name} must lie in (-1, 1)")));
            }
        }
        for (name, nu) in [("nu1", nu1), ("nu2", nu2)] {
            if !(nu > 2.0 && nu.is_finite()) {
                return Err(Error::domain(format!("{name} must exceed 2")));
            }
        }
        Ok(MixtureParams { pi, rho1, nu1, rho2, nu2 })
    }

    /// Swaps the components if needed so that `rho1 >= rho2`.
    fn canonicalized(mut self) -> Self {
        if self.rho1 < self.rho2 {
            std::mem::swap(&mut self.rho1, &mut self.rho2);
            std::mem::swap(&mut self.nu1, &mut self.nu2);
            self.pi = 1.0 - self.pi;
        }
        self
    }
}

/// Posterior component probabilities and hard labels for each observation.
/// Labels are 1-based to match the exported reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Per row: (P(component 1 | u), P(component 2 | u)); sums to 1.
    pub posterior: Vec<(f64, f64)>,
    /// Per row: 1 or 2, the argmax of the posterior; ties go to 1.
    pub labels: Vec<u8>,
}

/// First kernel principal-component scores of the rows of `data`, scaled by
/// the square root of the leading eigenvalue. The sign is fixed so the
/// scores correlate positively with the first input column.
pub fn kernel_pca_first_component(data: &[Vec<f64>], kernel: Kernel) -> Result<Vec<f64>> {
    let n = data.len();
    let d = data.first().map(|r| r.len()).unwrap_or(0);
    if d == 0 || data.iter().any(|r| r.len() != d) {
        return Err(Error::domain("data must be rectangular with at least one column"));
    }
    if n <= d {
        return Err(Error::domain(format!(
            "kernel PCA needs more rows than columns, got {n} x {d}"
        )));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::domain("data must be finite"));
    }

    let mut k = vec![0.0; n * n];
    match kernel {
        Kernel::Linear => {
            for i in 0..n {
                for j in i..n {
                    let dot: f64 = data[i].iter().zip(&data[j]).map(|(a, b)| a * b).sum();
                    k[i * n + j] = dot;
                    k[j * n + i] = dot;
                }
            }
        }
        Kernel::Gaussian { bandwidth } => {
            let sigma = match bandwidth {
                Some(s) if s > 0.0 => s,
                Some(s) => return Err(Error::domain(format!("bandwidth must be positive: {s}"))),
                None => median_pairwise_distance(data),
            };
            if !(sigma > 0.0) {
                return Err(Error::Fit("all rows coincide; gaussian kernel is degenerate".into()));
            }
            let denom = 2.0 * sigma * sigma;
            for i in 0..n {
                for j in i..n {
                    let sq: f64 =
                        data[i].iter().zip(&data[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    let v = (-sq / denom).exp();
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
        }
    }

    // Double centering in feature space.
    let row_means: Vec<f64> = (0..n).map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] += grand - row_means[i] - row_means[j];
        }
    }

    let (lambda, v) = top_eigenpair(&k, n);
    if lambda <= EIGEN_THRESHOLD {
        return Err(Error::Fit(format!(
            "kernel matrix is rank deficient (leading eigenvalue {lambda:.3e} below threshold)"
        )));
    }
    let scale = lambda.sqrt();
    let mut scores: Vec<f64> = v.iter().map(|&x| scale * x).collect();

    // Fix the sign against the first input column.
    let col0_mean = data.iter().map(|r| r[0]).sum::<f64>() / n as f64;
    let corr: f64 = scores.iter().zip(data).map(|(&s, r)| s * (r[0] - col0_mean)).sum();
    if corr < 0.0 {
        for s in &mut scores {
            *s = -*s;
        }
    }
    Ok(scores)
}

/// Median Euclidean distance over row pairs, stride-subsampled beyond
/// [`TAU_SUBSAMPLE`] rows to bound the quadratic cost.
fn median_pairwise_distance(data: &[Vec<f64>]) -> f64 {
    let idx = stride_subsample(data.len(), TAU_SUBSAMPLE, 0);
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let sq: f64 = data[i].iter().zip(&data[j]).map(|(x, y)| (x - y) * (x - y)).sum();
            dists.push(sq.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    if m == 0 {
        return 0.0;
    }
    if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    }
}

fn stride_subsample(n: usize, cap: usize, offset: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let step = n as f64 / cap as f64;
    (0..cap).map(|k| (offset + (k as f64 * step) as usize) % n).collect()
}

/// Power iteration for the dominant eigenpair of a symmetric PSD matrix.
fn top_eigenpair(k: &[f64], n: usize) -> (f64, Vec<f64>) {
    // Deterministic ramp start; the all-ones direction lies in the null
    // space of a centered kernel matrix, so it would be a poor choice.
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 - 0.5 * (n as f64 - 1.0)).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let row = &k[i * n..(i + 1) * n];
            w[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let new_lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        normalize(&mut w);
        let drift: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        let done = (new_lambda - lambda).abs() <= 1e-12 * new_lambda.abs().max(1.0)
            && drift < 1e-12;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    (lambda.max(0.0), v)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Log density of the bivariate t copula at cached t-scale coordinates.
/// `log_marg` is the sum of the two marginal t log densities at (x, y).
fn tcop_log_density(x: f64, y: f64, log_marg: f64, rho: f64, nu: f64) -> f64 {
    let det = 1.0 - rho * rho;
    let q = (x * x - 2.0 * rho * x * y + y * y) / det;
    let log_joint = lngamma(0.5 * (nu + 2.0)) - lngamma(0.5 * nu)
        - (nu * std::f64::consts::PI).ln()
        - 0.5 * det.ln()
        - 0.5 * (nu + 2.0) * (1.0 + q / nu).ln();
    log_joint - log_marg
}

/// Per-grid-ν caches of t-quantile transforms of the data.
struct NuCache {
    nu: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    /// t log density of x plus t log density of y, per row.
    log_marg: Vec<f64>,
}

impl NuCache {
    fn build(pairs: &[(f64, f64)], nu: f64) -> Self {
        let x: Vec<f64> = pairs.iter().map(|&(u, _)| t_quantile(u, nu)).collect();
        let y: Vec<f64> = pairs.iter().map(|&(_, v)| t_quantile(v, nu)).collect();
        let log_marg: Vec<f64> =
            x.iter().zip(&y).map(|(&a, &b)| t_logpdf(a, nu) + t_logpdf(b, nu)).collect();
        NuCache { nu, x, y, log_marg }
    }

    fn weighted_loglik(&self, weights: &[f64], rho: f64) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.log_marg)
            .zip(weights)
            .map(|(((&x, &y), &lm), &w)| w * tcop_log_density(x, y, lm, rho, self.nu))
            .sum()
    }
}

/// Weighted pairwise concordance measure on a stride subsample; the plug-in
/// estimate of Kendall's tau under observation weights.
fn weighted_tau(pairs: &[(f64, f64)], weights: &[f64], seed_offset: usize) -> f64 {
    let idx = stride_subsample(pairs.len(), TAU_SUBSAMPLE, seed_offset);
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let w = weights[i] * weights[j];
            if w == 0.0 {
                continue;
            }
            let s = (pairs[i].0 - pairs[j].0) * (pairs[i].1 - pairs[j].1);
            num += w * s.signum();
            den += w;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Weighted maximum likelihood for one t-copula component over the ν grid:
/// per candidate ν, ρ starts at the weighted-tau inversion and is polished
/// by golden section; the best (ρ, ν) by weighted log-likelihood wins. The
/// current parameters stay in the candidate set so the EM objective cannot
/// decrease.
fn m_step(
    caches: &[NuCache],
    pairs: &[(f64, f64)],
    weights: &[f64],
    current: (f64, f64),
    seed_offset: usize,
    full_scan: bool,
) -> (f64, f64, f64) {
    let tau = weighted_tau(pairs, weights, seed_offset);
    let rho_tau = (std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-0.99, 0.99);
    let mut best = (current.0, current.1, f64::NEG_INFINITY);
    for cache in caches {
        // Once the responsibilities settle, ν stops moving; re-scanning the
        // whole grid every round would dominate the runtime for nothing.
        if !full_scan && cache.nu != current.1 {
            continue;
        }
        let lo = (rho_tau - 0.2).max(-0.999);
        let hi = (rho_tau + 0.2).min(0.999);
        let rho = golden_section_max(|r| cache.weighted_loglik(weights, r), lo, hi, 36);
        for candidate in [rho, rho_tau, current.0] {
            let ll = cache.weighted_loglik(weights, candidate);
            if ll > best.2 {
                best = (candidate, cache.nu, ll);
            }
        }
    }
    best
}

/// Fits a two-component bivariate t-copula mixture by EM.
///
/// The E-step computes posterior responsibilities, the M-step reweights the
/// mixing probability and refits each component by weighted maximum
/// likelihood (profile grid over ν, golden-section polish of ρ). Iteration
/// stops when the log-likelihood gain drops below 1e-6 or after 500 rounds.
/// Initialization splits rows by the sign of the product of their normal
/// scores, separating concordant from discordant pairs deterministically.
pub fn fit_tcop_mixture(pairs: &[(f64, f64)], seed: u64) -> Result<MixtureParams> {
    let n = pairs.len();
    if n < 200 {
        return Err(Error::fit(format!("mixture fit needs at least 200 pairs, got {n}")));
    }
    if pairs.iter().any(|&(u, v)| !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) {
        return Err(Error::domain("pairs must lie strictly inside the unit square"));
    }

    let caches: Vec<NuCache> = NU_GRID.iter().map(|&nu| NuCache::build(pairs, nu)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subsample_offset = rng.gen_range(0..n.max(1));

    // Concordant/discordant split on normal scores.
    let mut resp: Vec<f64> = pairs
        .iter()
        .map(|&(u, v)| {
            if norm_quantile(u) * norm_quantile(v) >= 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    let mut pi = resp.iter().sum::<f64>() / n as f64;
    pi = pi.clamp(COLLAPSE_LIMIT, 1.0 - COLLAPSE_LIMIT);
    let co_weights: Vec<f64> = resp.clone();
    let dis_weights: Vec<f64> = resp.iter().map(|&r| 1.0 - r).collect();
    let (mut rho1, mut nu1, _) =
        m_step(&caches, pairs, &co_weights, (0.0, 4.0), subsample_offset, true);
    let (mut rho2, mut nu2, _) =
        m_step(&caches, pairs, &dis_weights, (0.0, 4.0), subsample_offset, true);

    let component_logliks = |rho1: f64, nu1: f64, rho2: f64, nu2: f64| {
        let c1 = caches.iter().position(|c| c.nu == nu1).expect("nu from grid");
        let c2 = caches.iter().position(|c| c.nu == nu2).expect("nu from grid");
        let per_row = |cache: &NuCache, rho: f64| -> Vec<f64> {
            cache
                .x
                .iter()
                .zip(&cache.y)
                .zip(&cache.log_marg)
                .map(|((&x, &y), &lm)| tcop_log_density(x, y, lm, rho, cache.nu))
                .collect()
        };
        (per_row(&caches[c1], rho1), per_row(&caches[c2], rho2))
    };

    let mut old_ll = f64::NEG_INFINITY;
    let mut prev_resp = vec![f64::NAN; n];
    for round in 0..EM_MAX_ITER {
        // E-step.
        let (l1, l2) = component_logliks(rho1, nu1, rho2, nu2);
        let mut ll = 0.0;
        for i in 0..n {
            let a = pi.ln() + l1[i];
            let b = (1.0 - pi).ln() + l2[i];
            let m = a.max(b);
            let za = (a - m).exp();
            let zb = (b - m).exp();
            ll += m + (za + zb).ln();
            resp[i] = za / (za + zb);
        }
        assert!(
            ll >= old_ll - 1e-8 * ll.abs().max(1.0),
            "EM log-likelihood decreased: {old_ll} -> {ll}"
        );
        if (ll - old_ll).abs() < EM_TOL {
            break;
        }
        old_ll = ll;

        // M-step. The ν grid is rescanned while the responsibilities are
        // still moving and occasionally thereafter.
        let drift = resp
            .iter()
            .zip(&prev_resp)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let full_scan = !(drift < 1e-3) || round % 10 == 0;
        prev_resp.copy_from_slice(&resp);

        pi = resp.iter().sum::<f64>() / n as f64;
        if pi < COLLAPSE_LIMIT || pi > 1.0 - COLLAPSE_LIMIT {
            return Err(Error::Fit(format!(
                "degenerate mixture: component weight collapsed to {pi:.4}"
            )));
        }
        let w2: Vec<f64> = resp.iter().map(|&r| 1.0 - r).collect();
        let (r1, n1, _) =
            m_step(&caches, pairs, &resp, (rho1, nu1), subsample_offset, full_scan);
        let (r2, n2, _) = m_step(&caches, pairs, &w2, (rho2, nu2), subsample_offset, full_scan);
        rho1 = r1;
        nu1 = n1;
        rho2 = r2;
        nu2 = n2;
    }

    // One local ν refinement between grid neighbours, with a final ρ polish.
    let w2: Vec<f64> = resp.iter().map(|&r| 1.0 - r).collect();
    let (rho1, nu1) = refine_component(pairs, &resp, rho1, nu1);
    let (rho2, nu2) = refine_component(pairs, &w2, rho2, nu2);

    // Coinciding components mean the data carries one regime, not two; the
    // mixing weight is unidentifiable there, so a boundary check alone
    // would miss it.
    if (rho1 - rho2).abs() < 0.05 && nu1.max(nu2) / nu1.min(nu2) < 1.6 {
        return Err(Error::Fit(format!(
            "degenerate mixture: components coincide (rho {rho1:.3} vs {rho2:.3})"
        )));
    }

    // Spurious splits of one-regime data often land away from both traps
    // above (EM separates the core from the shoulders of a single copula),
    // so a parsimony check against the best single-component fit guards the
    // rest: the mixture must clear a BIC margin for its 3 extra parameters.
    let ones = vec![1.0; n];
    let (rho_s, nu_s, _) = m_step(&caches, pairs, &ones, (0.0, 4.0), subsample_offset, true);
    let (rho_s, nu_s) = refine_component(pairs, &ones, rho_s, nu_s);
    let single = NuCache::build(pairs, nu_s).weighted_loglik(&ones, rho_s);
    let params = MixtureParams::new(pi, rho1, nu1, rho2, nu2)?;
    let mixture = mixture_loglik(pairs, &params);
    if 2.0 * (mixture - single) < 3.0 * (n as f64).ln() {
        return Err(Error::Fit(format!(
            "degenerate mixture: a single component explains the data \
             (log-likelihood gain {:.2})",
            mixture - single
        )));
    }

    Ok(params.canonicalized())
}

/// Observed-data log likelihood of a fitted mixture.
fn mixture_loglik(pairs: &[(f64, f64)], m: &MixtureParams) -> f64 {
    let c1 = NuCache::build(pairs, m.nu1);
    let c2 = NuCache::build(pairs, m.nu2);
    let mut ll = 0.0;
    for i in 0..pairs.len() {
        let a = m.pi.ln() + tcop_log_density(c1.x[i], c1.y[i], c1.log_marg[i], m.rho1, m.nu1);
        let b = (1.0 - m.pi).ln()
            + tcop_log_density(c2.x[i], c2.y[i], c2.log_marg[i], m.rho2, m.nu2);
        let top = a.max(b);
        ll += top + ((a - top).exp() + (b - top).exp()).ln();
    }
    ll
}

/// Golden search for ν between the neighbours of its grid value, then a ρ
/// polish at the refined ν. Keeps the grid solution when no improvement.
fn refine_component(pairs: &[(f64, f64)], weights: &[f64], rho: f64, nu: f64) -> (f64, f64) {
    let pos = NU_GRID.iter().position(|&g| g == nu).expect("nu from grid");
    let lo = if pos == 0 { NU_GRID[0] } else { NU_GRID[pos - 1] };
    let hi = if pos + 1 == NU_GRID.len() { NU_GRID[pos] } else { NU_GRID[pos + 1] };
    let loglik = |r: f64, v: f64| {
        let cache = NuCache::build(pairs, v);
        cache.weighted_loglik(weights, r)
    };
    let nu_refined = golden_section_max(|v| loglik(rho, v), lo, hi, 24);
    let cache = NuCache::build(pairs, nu_refined);
    let rho_refined = golden_section_max(
        |r| cache.weighted_loglik(weights, r),
        (rho - 0.05).max(-0.999),
        (rho + 0.05).min(0.999),
        40,
    );
    let before = loglik(rho, nu);
    let after = cache.weighted_loglik(weights, rho_refined);
    if after > before {
        (rho_refined, nu_refined)
    } else {
        (rho, nu)
    }
}

/// Bayes posterior over the two components for each pair, with hard labels.
pub fn assign_clusters(pairs: &[(f64, f64)], m: &MixtureParams) -> Result<ClusterAssignment> {
    if pairs.iter().any(|&(u, v)| !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) {
        return Err(Error::domain("pairs must lie strictly inside the unit square"));
    }
    let mut posterior = Vec::with_capacity(pairs.len());
    let mut labels = Vec::with_capacity(pairs.len());
    for &(u, v) in pairs {
        let x1 = t_quantile(u, m.nu1);
        let y1 = t_quantile(v, m.nu1);
        let lm1 = t_logpdf(x1, m.nu1) + t_logpdf(y1, m.nu1);
        let x2 = t_quantile(u, m.nu2);
        let y2 = t_quantile(v, m.nu2);
        let lm2 = t_logpdf(x2, m.nu2) + t_logpdf(y2, m.nu2);
        let a = m.pi.ln() + tcop_log_density(x1, y1, lm1, m.rho1, m.nu1);
        let b = (1.0 - m.pi).ln() + tcop_log_density(x2, y2, lm2, m.rho2, m.nu2);
        let top = a.max(b);
        let za = (a - top).exp();
        let zb = (b - top).exp();
        let p1 = za / (za + zb);
        posterior.push((p1, 1.0 - p1));
        labels.push(if p1 >= 0.5 { 1 } else { 2 });
    }
    Ok(ClusterAssignment { posterior, labels })
}

/// Maps a sample to uniforms by ranks over (n + 1), the transform used
/// before mixture fitting.
pub fn rank_uniforms(sample: &[f64]) -> Vec<f64> {
    let n = sample.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sample[i].total_cmp(&sample[j]));
    let mut u = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        u[i] = (rank + 1) as f64 / (n + 1) as f64;
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicop::{BicopFamily, BivariateCopula, Rotation};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn t_pair(rho: f64, nu: f64) -> BivariateCopula {
        BivariateCopula::new(BicopFamily::StudentT, Rotation::R0, vec![rho, nu]).unwrap()
    }

    fn simulate_mixture(
        pi: f64,
        c1: &BivariateCopula,
        c2: &BivariateCopula,
        n: usize,
        seed: u64,
    ) -> (Vec<(f64, f64)>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for _ in 0..n {
            if rng.gen::<f64>() < pi {
                pairs.extend(c1.simulate(1, &mut rng));
                truth.push(1);
            } else {
                pairs.extend(c2.simulate(1, &mut rng));
                truth.push(2);
            }
        }
        (pairs, truth)
    }

    #[test]
    fn linear_kernel_reproduces_classical_pca_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let a: f64 = rng.gen::<f64>() * 2.0 - 1.0;
                let b: f64 = rng.gen::<f64>() * 0.5;
                vec![a + b, 0.7 * a - b]
            })
            .collect();
        let n = data.len() as f64;
        let means: Vec<f64> =
            (0..2).map(|j| data.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        // Covariance of the centered data, then its top eigenvector.
        let mut c = [0.0; 3];
        for r in &data {
            let x = r[0] - means[0];
            let y = r[1] - means[1];
            c[0] += x * x;
            c[1] += x * y;
            c[2] += y * y;
        }
        let half_tr = 0.5 * (c[0] + c[2]);
        let det = c[0] * c[2] - c[1] * c[1];
        let lam = half_tr + (half_tr * half_tr - det).sqrt();
        let w = {
            let (a, b) = (lam - c[2], c[1]);
            let norm = (a * a + b * b).sqrt();
            [a / norm, b / norm]
        };
        let mut classical: Vec<f64> =
            data.iter().map(|r| (r[0] - means[0]) * w[0] + (r[1] - means[1]) * w[1]).collect();
        let cor: f64 = classical.iter().zip(&data).map(|(&s, r)| s * (r[0] - means[0])).sum();
        if cor < 0.0 {
            classical.iter_mut().for_each(|s| *s = -*s);
        }

        let scores = kernel_pca_first_component(&data, Kernel::Linear).unwrap();
        for (a, b) in scores.iter().zip(&classical) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn one_column_scores_are_proportional_to_centered_input() {
        let data: Vec<Vec<f64>> = [3.0, -1.0, 2.0, 5.0, 0.5, -2.5].iter().map(|&v| vec![v]).collect();
        let scores = kernel_pca_first_component(&data, Kernel::Linear).unwrap();
        let mean = 7.0 / 6.0;
        let ratio = scores[0] / (3.0 - mean);
        assert!(ratio > 0.0, "sign convention follows the input column");
        for (s, r) in scores.iter().zip(&data) {
            assert_abs_diff_eq!(s / ratio, r[0] - mean, epsilon = 1e-9);
        }
    }

    #[test]
    fn gaussian_and_linear_scores_agree_in_rank_on_elliptical_data() {
        let pair = BivariateCopula::new(BicopFamily::Gaussian, Rotation::R0, vec![0.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<Vec<f64>> = pair
            .simulate(400, &mut rng)
            .into_iter()
            .map(|(u, v)| vec![norm_quantile(u), norm_quantile(v)])
            .collect();
        let lin = kernel_pca_first_component(&data, Kernel::Linear).unwrap();
        let gau =
            kernel_pca_first_component(&data, Kernel::Gaussian { bandwidth: None }).unwrap();
        let rl = rank_uniforms(&lin);
        let rg = rank_uniforms(&gau);
        let n = rl.len() as f64;
        let (ml, mg) = (0.5 + 0.5 / n, 0.5 + 0.5 / n);
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (a, b) in rl.iter().zip(&rg) {
            num += (a - ml) * (b - mg);
            da += (a - ml) * (a - ml);
            db += (b - mg) * (b - mg);
        }
        let spearman = num / (da * db).sqrt();
        assert!(spearman > 0.95, "rank correlation {spearman}");
    }

    #[test]
    fn degenerate_data_is_rejected() {
        let data: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0, 2.0]).collect();
        assert!(kernel_pca_first_component(&data, Kernel::Linear).is_err());
        let tall: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64; 4]).collect();
        assert!(kernel_pca_first_component(&tall, Kernel::Linear).is_err());
    }

    #[test]
    fn mixture_fit_recovers_well_separated_components() {
        let (pairs, truth) =
            simulate_mixture(0.7, &t_pair(0.8, 4.0), &t_pair(-0.8, 4.0), 3000, 17);
        let m = fit_tcop_mixture(&pairs, 3).unwrap();
        assert!((m.pi - 0.7).abs() < 0.05, "pi {}", m.pi);
        assert!((m.rho1 - 0.8).abs() < 0.05, "rho1 {}", m.rho1);
        assert!((m.rho2 + 0.8).abs() < 0.05, "rho2 {}", m.rho2);
        assert!(m.rho1 >= m.rho2);

        let assignment = assign_clusters(&pairs, &m).unwrap();
        let hits = assignment
            .labels
            .iter()
            .zip(&truth)
            .filter(|(a, b)| a == b)
            .count();
        let accuracy = hits as f64 / truth.len() as f64;
        // The optimal classifier under the true parameters reaches about
        // 83.5% against the latent component indicators (the components
        // overlap near the center of the square), so the fit is held to a
        // bar just under that bound.
        assert!(accuracy >= 0.8, "label accuracy {accuracy}");
        for &(p1, p2) in &assignment.posterior {
            assert!((p1 + p2 - 1.0).abs() < 1e-12);
        }

        // Against the oracle classifier the assignment should be nearly
        // indistinguishable.
        let true_params = MixtureParams::new(0.7, 0.8, 4.0, -0.8, 4.0).unwrap();
        let oracle = assign_clusters(&pairs, &true_params).unwrap();
        let agree = assignment
            .labels
            .iter()
            .zip(&oracle.labels)
            .filter(|(a, b)| a == b)
            .count();
        let agreement = agree as f64 / pairs.len() as f64;
        assert!(agreement >= 0.9, "oracle agreement {agreement}");
    }

    #[test]
    fn single_component_data_collapses_or_flags_the_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pairs = t_pair(0.8, 4.0).simulate(1500, &mut rng);
        let err = fit_tcop_mixture(&pairs, 5).unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn posterior_follows_bayes_rule() {
        // With equal weights, a 10:1 density ratio gives posterior 10/11.
        let m = MixtureParams::new(0.5, 0.8, 4.0, -0.8, 4.0).unwrap();
        let probe = (0.9, 0.9);
        let x1 = t_quantile(probe.0, m.nu1);
        let lm = 2.0 * t_logpdf(x1, m.nu1);
        let d1 = tcop_log_density(x1, x1, lm, m.rho1, m.nu1).exp();
        let d2 = tcop_log_density(x1, x1, lm, m.rho2, m.nu2).exp();
        let want = d1 / (d1 + d2);
        let assignment = assign_clusters(&[probe], &m).unwrap();
        assert_abs_diff_eq!(assignment.posterior[0].0, want, epsilon = 1e-12);
        // The concordant corner point belongs to the positive component.
        assert!(d1 / d2 > 5.0);
        assert_eq!(assignment.labels[0], 1);
    }

    #[test]
    fn near_unit_weight_sends_every_label_to_cluster_one() {
        let m = MixtureParams::new(1.0 - 1e-12, 0.5, 4.0, -0.5, 4.0).unwrap();
        let pairs = [(0.1, 0.9), (0.9, 0.1), (0.5, 0.5), (0.99, 0.99)];
        let assignment = assign_clusters(&pairs, &m).unwrap();
        assert!(assignment.labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn label_swap_leaves_the_likelihood_unchanged() {
        let a = MixtureParams::new(0.3, 0.6, 4.0, -0.4, 7.0).unwrap();
        let b = MixtureParams::new(0.7, -0.4, 7.0, 0.6, 4.0).unwrap();
        let mixture_log_density = |m: &MixtureParams, u: f64, v: f64| {
            let x1 = t_quantile(u, m.nu1);
            let y1 = t_quantile(v, m.nu1);
            let lm1 = t_logpdf(x1, m.nu1) + t_logpdf(y1, m.nu1);
            let x2 = t_quantile(u, m.nu2);
            let y2 = t_quantile(v, m.nu2);
            let lm2 = t_logpdf(x2, m.nu2) + t_logpdf(y2, m.nu2);
            let d1 = m.pi * tcop_log_density(x1, y1, lm1, m.rho1, m.nu1).exp();
            let d2 = (1.0 - m.pi) * tcop_log_density(x2, y2, lm2, m.rho2, m.nu2).exp();
            (d1 + d2).ln()
        };
        for &(u, v) in &[(0.2, 0.3), (0.8, 0.75), (0.45, 0.9)] {
            assert_abs_diff_eq!(
                mixture_log_density(&a, u, v),
                mixture_log_density(&b, u, v),
                epsilon = 1e-12
            );
        }
        // Canonicalization picks the representative with rho1 >= rho2.
        let canon = b.canonicalized();
        assert!((canon.pi - a.pi).abs() < 1e-15 && canon.rho1 == a.rho1);
    }

    #[test]
    fn mixture_fit_preconditions() {
        let few = vec![(0.5, 0.5); 100];
        assert!(fit_tcop_mixture(&few, 1).is_err());
        let bad = vec![(0.5, 1.0); 300];
        assert!(fit_tcop_mixture(&bad, 1).is_err());
    }

    #[test]
    fn rank_uniforms_are_strictly_inside_the_unit_interval() {
        let u = rank_uniforms(&[5.0, -2.0, 3.5, 0.0]);
        assert_eq!(u, vec![0.8, 0.2, 0.6, 0.4]);
    }
}
