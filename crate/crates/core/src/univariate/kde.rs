//! Gaussian kernel density estimate with Silverman's bandwidth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf};

/// Gaussian KDE over a stored sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianKde {
    points: Vec<f64>,
    bandwidth: f64,
}

impl GaussianKde {
    /// Fit with Silverman's rule: 0.9 min(sd, IQR/1.34) n^(-1/5).
    pub fn fit(sample: &[f64]) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::fit("KDE needs at least two observations"));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::fit("sample contains non-finite values"));
        }
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        let mut sorted = sample.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let iqr = super::skew_t::quantile_sorted(&sorted, 0.75)
            - super::skew_t::quantile_sorted(&sorted, 0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        if !(spread > 0.0) {
            return Err(Error::fit("sample is degenerate (zero spread)"));
        }
        let bandwidth = 0.9 * spread * n.powf(-0.2);
        Ok(GaussianKde { points: sorted, bandwidth })
    }

    /// Smoothing bandwidth in data units.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True if the estimate holds no points (never true for fitted values).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Density estimate at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self.points.iter().map(|&p| norm_pdf((x - p) / h)).sum();
        sum / (h * self.points.len() as f64)
    }

    /// Smoothed cdf estimate at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self.points.iter().map(|&p| norm_cdf((x - p) / h)).sum();
        sum / self.points.len() as f64
    }

    /// Inverse of [`Self::cdf`] by bisection (the smoothed cdf is strictly
    /// increasing, so the root is unique).
    pub fn quantile(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0);
        let spread = 10.0 * self.bandwidth;
        let mut lo = self.points.first().unwrap() - spread;
        let mut hi = self.points.last().unwrap() + spread;
        while self.cdf(lo) > p {
            lo -= spread;
        }
        while self.cdf(hi) < p {
            hi += spread;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::Distribution;

    #[test]
    fn kde_approximates_normal_density() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sample: Vec<f64> = (0..5000)
            .map(|_| rand_distr::StandardNormal.sample(&mut rng))
            .collect();
        let kde = GaussianKde::fit(&sample).unwrap();
        assert_abs_diff_eq!(kde.density(0.0), norm_pdf(0.0), epsilon = 0.03);
        assert_abs_diff_eq!(kde.cdf(1.0), norm_cdf(1.0), epsilon = 0.02);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let sample: Vec<f64> = (0..200).map(|i| (i as f64 / 10.0).sin() * 2.0).collect();
        let kde = GaussianKde::fit(&sample).unwrap();
        for &p in &[0.01, 0.2, 0.5, 0.8, 0.99] {
            assert_abs_diff_eq!(kde.cdf(kde.quantile(p)), p, epsilon = 1e-10);
        }
    }
}
