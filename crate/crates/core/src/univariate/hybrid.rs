//! Hybrid marginal: Gaussian-kernel core with generalized Pareto tails.
//!
//! The sample's central part is modelled by a KDE H with density h; beyond
//! the 15% and 85% empirical quantiles the tails are replaced by GPDs whose
//! scales are pinned so the spliced density is continuous at the cut points:
//!
//! ```text
//! sigma_L = H(u_L) / h(u_L)        sigma_R = (1 - H(u_R)) / h(u_R)
//! ```
//!
//! Only the tail shapes are estimated from the excesses, by maximum
//! likelihood. At least 20 excesses are required on each side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::univariate::gpd::{fit_xi_fixed_sigma, GpdTail};
use crate::univariate::kde::GaussianKde;
use crate::univariate::skew_t::quantile_sorted;

/// Fraction of the sample required in each tail piece.
pub const LOWER_CUT_QUANTILE: f64 = 0.15;
/// Upper cut quantile; see [`LOWER_CUT_QUANTILE`].
pub const UPPER_CUT_QUANTILE: f64 = 0.85;
/// Minimum number of excesses per tail.
pub const MIN_TAIL_EXCESSES: usize = 20;

/// Spliced kernel/Pareto marginal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridMarginal {
    kde: GaussianKde,
    lower_cut: f64,
    upper_cut: f64,
    /// KDE cdf at the lower cut, cached for the piecewise formulas.
    h_lower: f64,
    /// KDE cdf at the upper cut.
    h_upper: f64,
    lower_tail: GpdTail,
    upper_tail: GpdTail,
}

impl HybridMarginal {
    /// Fit the spliced model to `sample`.
    pub fn fit(sample: &[f64]) -> Result<Self> {
        let mut sorted = sample.to_vec();
        if sorted.iter().any(|x| !x.is_finite()) {
            return Err(Error::fit("sample contains non-finite values"));
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let kde = GaussianKde::fit(sample)?;
        let lower_cut = quantile_sorted(&sorted, LOWER_CUT_QUANTILE);
        let upper_cut = quantile_sorted(&sorted, UPPER_CUT_QUANTILE);
        if !(lower_cut < upper_cut) {
            return Err(Error::fit("tail cut points are not separated"));
        }

        let lower_excesses: Vec<f64> = sorted
            .iter()
            .filter(|&&x| x < lower_cut)
            .map(|&x| lower_cut - x)
            .collect();
        let upper_excesses: Vec<f64> = sorted
            .iter()
            .filter(|&&x| x > upper_cut)
            .map(|&x| x - upper_cut)
            .collect();
        if lower_excesses.len() < MIN_TAIL_EXCESSES {
            return Err(Error::fit(format!(
                "lower tail has {} excesses, need at least {MIN_TAIL_EXCESSES}",
                lower_excesses.len()
            )));
        }
        if upper_excesses.len() < MIN_TAIL_EXCESSES {
            return Err(Error::fit(format!(
                "upper tail has {} excesses, need at least {MIN_TAIL_EXCESSES}",
                upper_excesses.len()
            )));
        }

        let h_lower = kde.cdf(lower_cut);
        let h_upper = kde.cdf(upper_cut);
        let sigma_lower = h_lower / kde.density(lower_cut);
        let sigma_upper = (1.0 - h_upper) / kde.density(upper_cut);
        let lower_tail = fit_xi_fixed_sigma(&lower_excesses, sigma_lower)?;
        let upper_tail = fit_xi_fixed_sigma(&upper_excesses, sigma_upper)?;

        Ok(HybridMarginal {
            kde,
            lower_cut,
            upper_cut,
            h_lower,
            h_upper,
            lower_tail,
            upper_tail,
        })
    }

    /// Lower and upper splice points in data units.
    pub fn cut_points(&self) -> (f64, f64) {
        (self.lower_cut, self.upper_cut)
    }

    /// Fitted tail pieces (lower, upper).
    pub fn tails(&self) -> (&GpdTail, &GpdTail) {
        (&self.lower_tail, &self.upper_tail)
    }

    /// Spliced density.
    pub fn density(&self, x: f64) -> f64 {
        if x < self.lower_cut {
            self.h_lower * self.lower_tail.density(self.lower_cut - x)
        } else if x > self.upper_cut {
            (1.0 - self.h_upper) * self.upper_tail.density(x - self.upper_cut)
        } else {
            self.kde.density(x)
        }
    }

    /// Spliced cdf; continuous at the cuts by construction.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.lower_cut {
            self.h_lower * (1.0 - self.lower_tail.cdf(self.lower_cut - x))
        } else if x > self.upper_cut {
            1.0 - (1.0 - self.h_upper) * (1.0 - self.upper_tail.cdf(x - self.upper_cut))
        } else {
            self.kde.cdf(x)
        }
    }

    /// Quantile: piecewise inverse of [`Self::cdf`].
    pub fn quantile(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1), got {p}");
        if p < self.h_lower {
            self.lower_cut - self.lower_tail.quantile(1.0 - p / self.h_lower)
        } else if p > self.h_upper {
            self.upper_cut + self.upper_tail.quantile(1.0 - (1.0 - p) / (1.0 - self.h_upper))
        } else {
            // Bisection on the KDE cdf restricted to [lower_cut, upper_cut].
            let (mut lo, mut hi) = (self.lower_cut, self.upper_cut);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if self.kde.cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}
