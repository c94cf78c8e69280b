//! Scalar special functions shared by the distribution and copula code.
//!
//! Thin wrappers around `statrs` gamma/beta/erf routines plus the inverses
//! and bivariate integrals that the copula evaluations need on hot paths:
//! a high-accuracy normal quantile, Student t cdf/quantile through the
//! regularized incomplete beta function, and the Drezner-Wesolowsky
//! bivariate normal cdf used as an h-function-independent oracle.

use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal cdf via the complementary error function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, Cody's rational Chebyshev approximations
/// (W. J. Cody, Math. Comp. 23, 1969). Relative error below 1e-15 on the
/// branches used here; far better than truncating 1 - erf(x).
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= 0.46875 {
        return 1.0 - erf_small(x);
    } else if y <= 4.0 {
        const C: [f64; 9] = [
            5.64188496988670089e-1,
            8.88314979438837594e0,
            6.61191906371416295e1,
            2.98635138197400131e2,
            8.81952221241769090e2,
            1.71204761263407058e3,
            2.05107837782607147e3,
            1.23033935479799725e3,
            2.15311535474403846e-8,
        ];
        const D: [f64; 8] = [
            1.57449261107098347e1,
            1.17693950891312499e2,
            5.37181101862009858e2,
            1.62138957456669019e3,
            3.29079923573345963e3,
            4.36261909014324716e3,
            3.43936767414372164e3,
            1.23033935480374942e3,
        ];
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        exp_mxx(y) * (num + C[7]) / (den + D[7])
    } else if y < 26.6 {
        const P: [f64; 6] = [
            3.05326634961232344e-1,
            3.60344899949804439e-1,
            1.25781726111229246e-1,
            1.60837851487422766e-2,
            6.58749161529837803e-4,
            1.63153871373020978e-2,
        ];
        const Q: [f64; 5] = [
            2.56852019228982242e0,
            1.87295284992346047e0,
            5.27905102951428412e-1,
            6.05183413124413191e-2,
            2.33520497626869185e-3,
        ];
        const INV_SQRT_PI: f64 = 5.6418958354775628695e-1;
        let z = 1.0 / (y * y);
        let mut num = P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + P[i]) * z;
            den = (den + Q[i]) * z;
        }
        let r = z * (num + P[4]) / (den + Q[4]);
        exp_mxx(y) * (INV_SQRT_PI - r) / y
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// erf(x) for |x| <= 0.46875 (Cody).
fn erf_small(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    let z = x * x;
    let mut num = A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + A[i]) * z;
        den = (den + B[i]) * z;
    }
    x * (num + A[3]) / (den + B[3])
}

/// exp(-y^2) split so the squared high part is exact (Cody's trick).
fn exp_mxx(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Standard normal quantile (Wichura's AS 241 rational approximations,
/// absolute error below 1e-15 over (0, 1)).
pub fn norm_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "norm_quantile needs p in (0,1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly7_num(r) / poly7_den(r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly_mid_num(r) / poly_mid_den(r)
    } else {
        r -= 5.0;
        poly_tail_num(r) / poly_tail_den(r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly7_num(r: f64) -> f64 {
    ((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
        + 6.7265770927008700853e4)
        * r
        + 4.5921953931549871457e4)
        * r
        + 1.3731693765509461125e4)
        * r
        + 1.9715909503065514427e3)
        * r
        + 1.3314166789178437745e2)
        * r
        + 3.3871328727963666080e0
}

fn poly7_den(r: f64) -> f64 {
    ((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
        + 3.9307895800092710610e4)
        * r
        + 2.1213794301586595867e4)
        * r
        + 5.3941960214247511077e3)
        * r
        + 6.8718700749205790830e2)
        * r
        + 4.2313330701600911252e1)
        * r
        + 1.0
}

fn poly_mid_num(r: f64) -> f64 {
    ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
        + 2.41780725177450611770e-1)
        * r
        + 1.27045825245236838258e0)
        * r
        + 3.64784832476320460504e0)
        * r
        + 5.76949722146069140550e0)
        * r
        + 4.63033784615654529590e0)
        * r
        + 1.42343711074968357734e0
}

fn poly_mid_den(r: f64) -> f64 {
    ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
        + 1.51986665636164571966e-2)
        * r
        + 1.48103976427480074590e-1)
        * r
        + 6.89767334985100004550e-1)
        * r
        + 1.67638483018380384940e0)
        * r
        + 2.05319162663775882187e0)
        * r
        + 1.0
}

fn poly_tail_num(r: f64) -> f64 {
    ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
        + 1.24266094738807843860e-3)
        * r
        + 2.65321895265761230930e-2)
        * r
        + 2.96560571828504891230e-1)
        * r
        + 1.78482653991729133580e0)
        * r
        + 5.46378491116411436990e0)
        * r
        + 6.65790464350110377720e0
}

fn poly_tail_den(r: f64) -> f64 {
    ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
        + 1.84631831751005468180e-5)
        * r
        + 7.86869131145613259100e-4)
        * r
        + 1.48753612908506148525e-2)
        * r
        + 1.36929880922735805310e-1)
        * r
        + 5.99832206555887937690e-1)
        * r
        + 1.0
}

/// Regularized incomplete beta function I_x(a, b), evaluated with the
/// modified Lentz continued fraction on whichever side converges fast.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    inc_beta_pair(x, 1.0 - x, a, b)
}

/// `inc_beta` with the complement `xc = 1 - x` supplied by the caller.
/// Callers that know the complement analytically (the t cdf below passes
/// nu/(nu+x^2) and x^2/(nu+x^2)) avoid the cancellation of forming `1 - x`.
pub(crate) fn inc_beta_pair(x: f64, xc: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "inc_beta needs positive shapes");
    if x <= 0.0 {
        return 0.0;
    }
    if xc <= 0.0 {
        return 1.0;
    }
    let ln_prefix = a * x.ln() + b * xc.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_prefix.exp() / a) * beta_cf(x, a, b)
    } else {
        1.0 - (ln_prefix.exp() / b) * beta_cf(xc, b, a)
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..400 {
        let m = m as f64;
        let m2 = 2.0 * m;
        // Even step.
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // Odd step.
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Inverse of the regularized incomplete beta function in its first argument:
/// returns x with I_x(a, b) = p. Newton iteration on a bisection safeguard.
pub fn inv_inc_beta(p: f64, a: f64, b: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "inv_inc_beta needs p in [0,1]");
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return 1.0;
    }
    // Initial guess, then safeguarded Newton. Near either end the leading
    // term of the incomplete beta series gives x directly, which keeps the
    // iteration count bounded even for quantiles around 1e-10 with small
    // shape parameters; elsewhere the Beta mean is good enough.
    let ln_b = ln_beta(a, b);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = if p < 0.1 {
        // I_x(a,b) ~ x^a / (a B(a,b)) as x -> 0.
        ((p.ln() + a.ln() + ln_b) / a).exp().clamp(1e-300, 0.99)
    } else if p > 0.9 {
        // 1 - I_x(a,b) ~ (1-x)^b / (b B(a,b)) as x -> 1.
        1.0 - (((1.0 - p).ln() + b.ln() + ln_b) / b).exp().clamp(1e-300, 0.99)
    } else {
        a / (a + b)
    };
    for _ in 0..100 {
        let f = inc_beta(x, a, b) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if f.abs() < 1e-15 {
            break;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b;
        let step = f / ln_pdf.exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Student t log-density with `nu` degrees of freedom.
pub fn t_logpdf(x: f64, nu: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0)
        - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Student t density with `nu` degrees of freedom.
pub fn t_pdf(x: f64, nu: f64) -> f64 {
    t_logpdf(x, nu).exp()
}

/// Student t cdf with `nu` degrees of freedom, via the incomplete beta
/// function. Near the centre it uses P(|T| <= |x|) = I_s(1/2, nu/2) with
/// s = x^2/(nu+x^2); in the tails it uses the mirror identity on
/// w = nu/(nu+x^2). Both arguments are formed directly from x, never as
/// 1 minus each other, so neither regime loses precision.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x == 0.0 {
        return 0.5;
    }
    let x2 = x * x;
    let s = x2 / (nu + x2);
    let w = nu / (nu + x2);
    if x2 <= nu {
        let half_central = 0.5 * inc_beta_pair(s, w, 0.5, 0.5 * nu);
        if x > 0.0 {
            0.5 + half_central
        } else {
            0.5 - half_central
        }
    } else {
        let tail = 0.5 * inc_beta_pair(w, s, 0.5 * nu, 0.5);
        if x > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

/// Student t quantile with `nu` degrees of freedom (exact inversion through
/// the incomplete beta inverse).
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "t_quantile needs p in (0,1), got {p}");
    if p == 0.5 {
        return 0.0;
    }
    let tail = if p < 0.5 { p } else { 1.0 - p };
    let w = inv_inc_beta(2.0 * tail, 0.5 * nu, 0.5);
    // w = nu/(nu + x^2)  =>  x = sqrt(nu (1-w)/w)
    let x = (nu * (1.0 - w) / w).sqrt();
    if p < 0.5 {
        -x
    } else {
        x
    }
}

/// Bivariate standard normal cdf P(X <= x, Y <= y) with correlation `rho`,
/// by Drezner-Wesolowsky quadrature over the correlation parameter:
/// Phi2(x, y; r) = Phi(x)Phi(y) + (1/2pi) Int_0^r exp(...) dr'.
pub fn bvn_cdf(x: f64, y: f64, rho: f64) -> f64 {
    assert!(rho.abs() <= 1.0, "correlation out of range");
    let base = norm_cdf(x) * norm_cdf(y);
    if rho == 0.0 {
        return base;
    }
    if rho.abs() < 1.0 - 1e-12 {
        // 64-point Gauss-Legendre on [0, rho].
        let (nodes, weights) = crate::quadrature::gauss_legendre(64);
        let mut acc = 0.0;
        for (t, w) in nodes.iter().zip(weights.iter()) {
            let r = 0.5 * rho * (t + 1.0);
            let omr2 = 1.0 - r * r;
            let f = (-(x * x - 2.0 * r * x * y + y * y) / (2.0 * omr2)).exp() / omr2.sqrt();
            acc += w * f;
        }
        acc *= 0.5 * rho / (2.0 * std::f64::consts::PI);
        (base + acc).clamp(0.0, 1.0)
    } else if rho > 0.0 {
        // Comonotone limit.
        norm_cdf(x.min(y))
    } else {
        // Countermonotone limit.
        (norm_cdf(x) + norm_cdf(y) - 1.0).max(0.0)
    }
}

/// Log of the gamma function, re-exported for the distribution code.
pub fn lngamma(x: f64) -> f64 {
    ln_gamma(x)
}

/// Log of the beta function.
pub fn lnbeta(a: f64, b: f64) -> f64 {
    ln_beta(a, b)
}
