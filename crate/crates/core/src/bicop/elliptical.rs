//! Gaussian and Student t pair copulas.

use crate::quadrature;
use crate::special::{
    bvn_cdf, norm_cdf, norm_quantile, t_cdf, t_logpdf, t_quantile,
};
use statrs::function::gamma::ln_gamma;

// ---------------------------------------------------------------------------
// Gaussian
// ---------------------------------------------------------------------------

pub fn gaussian_log_density(rho: f64, u: f64, v: f64) -> f64 {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    let omr2 = 1.0 - rho * rho;
    -0.5 * omr2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * omr2)
}

/// F(v | u) = Phi((Phi^-1(v) - rho Phi^-1(u)) / sqrt(1 - rho^2)).
pub fn gaussian_h1(rho: f64, u: f64, v: f64) -> f64 {
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    norm_cdf((y - rho * x) / (1.0 - rho * rho).sqrt())
}

pub fn gaussian_hinv1(rho: f64, p: f64, u: f64) -> f64 {
    let x = norm_quantile(u);
    let y = rho * x + (1.0 - rho * rho).sqrt() * norm_quantile(p);
    norm_cdf(y)
}

pub fn gaussian_cdf(rho: f64, u: f64, v: f64) -> f64 {
    bvn_cdf(norm_quantile(u), norm_quantile(v), rho)
}

pub fn gaussian_tau(rho: f64) -> f64 {
    2.0 * rho.asin() / std::f64::consts::PI
}

// ---------------------------------------------------------------------------
// Student t
// ---------------------------------------------------------------------------

pub fn student_log_density(rho: f64, nu: f64, u: f64, v: f64) -> f64 {
    let x = t_quantile(u, nu);
    let y = t_quantile(v, nu);
    let omr2 = 1.0 - rho * rho;
    let q = (x * x - 2.0 * rho * x * y + y * y) / (nu * omr2);
    let ln_joint = ln_gamma(0.5 * (nu + 2.0)) - ln_gamma(0.5 * nu)
        - (nu * std::f64::consts::PI).ln()
        - 0.5 * omr2.ln()
        - 0.5 * (nu + 2.0) * q.ln_1p();
    ln_joint - t_logpdf(x, nu) - t_logpdf(y, nu)
}

/// F(v | u) for the t copula: a shifted/scaled t with nu + 1 df.
pub fn student_h1(rho: f64, nu: f64, u: f64, v: f64) -> f64 {
    let x = t_quantile(u, nu);
    let y = t_quantile(v, nu);
    let s = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
    t_cdf((y - rho * x) / s, nu + 1.0)
}

pub fn student_hinv1(rho: f64, nu: f64, p: f64, u: f64) -> f64 {
    let x = t_quantile(u, nu);
    let s = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
    let y = rho * x + s * t_quantile(p, nu + 1.0);
    t_cdf(y, nu)
}

/// Bivariate t cdf via the chi-square scale mixture
/// P(T1 <= x, T2 <= y) = E[ Phi2(x sqrt(S/nu), y sqrt(S/nu); rho) ],
/// S ~ chi^2_nu, integrated with Gauss-Legendre after s = nu t/(1-t).
/// Deliberately independent of the h-function formulas so it can serve as a
/// differentiation oracle.
pub fn student_cdf(rho: f64, nu: f64, u: f64, v: f64) -> f64 {
    let x = t_quantile(u, nu);
    let y = t_quantile(v, nu);
    let ln_norm = -ln_gamma(0.5 * nu) - 0.5 * nu * std::f64::consts::LN_2;
    let integrand = |t: f64| {
        let s = nu * t / (1.0 - t);
        let jac = nu / ((1.0 - t) * (1.0 - t));
        let ln_chi2 = (0.5 * nu - 1.0) * s.ln() - 0.5 * s + ln_norm;
        let scale = (s / nu).sqrt();
        bvn_cdf(x * scale, y * scale, rho) * ln_chi2.exp() * jac
    };
    quadrature::integrate_gl(integrand, 1e-12, 1.0 - 1e-12, 200).clamp(0.0, 1.0)
}

pub fn student_tau(rho: f64) -> f64 {
    2.0 * rho.asin() / std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gaussian_density_at_median_point() {
        // c(1/2, 1/2) = 1/sqrt(1 - rho^2).
        let rho: f64 = 0.5;
        let expect = 1.0 / (1.0 - rho * rho).sqrt();
        assert_abs_diff_eq!(gaussian_log_density(rho, 0.5, 0.5).exp(), expect, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_h_inverts() {
        for &(rho, u, p) in &[(0.3, 0.2, 0.7), (-0.8, 0.9, 0.05), (0.95, 0.5, 0.5)] {
            let v = gaussian_hinv1(rho, p, u);
            assert_abs_diff_eq!(gaussian_h1(rho, u, v), p, epsilon = 1e-10);
        }
    }

    #[test]
    fn student_h_inverts() {
        for &(rho, nu, u, p) in &[(0.4, 3.0, 0.3, 0.9), (-0.6, 7.5, 0.8, 0.2)] {
            let v = student_hinv1(rho, nu, p, u);
            assert_abs_diff_eq!(student_h1(rho, nu, u, v), p, epsilon = 1e-9);
        }
    }

    #[test]
    fn student_cdf_matches_margins() {
        // C(u, 1) = u.
        assert_abs_diff_eq!(student_cdf(0.5, 4.0, 0.37, 1.0 - 1e-14), 0.37, epsilon = 1e-7);
        // Exchangeability.
        assert_abs_diff_eq!(
            student_cdf(-0.3, 5.0, 0.2, 0.6),
            student_cdf(-0.3, 5.0, 0.6, 0.2),
            epsilon = 1e-10
        );
    }

    #[test]
    fn elliptical_tau_is_arcsine_of_rho() {
        assert_abs_diff_eq!(gaussian_tau(0.5), 2.0 * 0.5_f64.asin() / std::f64::consts::PI, epsilon = 1e-15);
        assert_abs_diff_eq!(gaussian_tau(1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(student_tau(-0.7071067811865476), -0.5, epsilon = 1e-12);
    }
}
