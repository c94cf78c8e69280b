//! Clayton and Frank pair copulas.
//!
//! Both are evaluated in log space where powers of u^(-delta) would overflow.

use crate::quadrature;

/// log(exp(a) + exp(b)) without overflow.
fn ln_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// ln(u^-d + v^-d - 1), stable for u, v near zero.
fn clayton_ln_sum(delta: f64, u: f64, v: f64) -> f64 {
    let a = -delta * u.ln();
    let b = -delta * v.ln();
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

pub fn clayton_log_density(delta: f64, u: f64, v: f64) -> f64 {
    let ls = clayton_ln_sum(delta, u, v);
    (1.0 + delta).ln() - (delta + 1.0) * (u.ln() + v.ln()) - (2.0 + 1.0 / delta) * ls
}

/// F(v | u) = u^(-d-1) (u^-d + v^-d - 1)^(-1/d - 1).
pub fn clayton_h1(delta: f64, u: f64, v: f64) -> f64 {
    let ls = clayton_ln_sum(delta, u, v);
    ((-delta - 1.0) * u.ln() + (-1.0 / delta - 1.0) * ls).exp()
}

pub fn clayton_hinv1(delta: f64, p: f64, u: f64) -> f64 {
    // v = (1 + u^-d (p^(-d/(d+1)) - 1))^(-1/d); the inner term can overflow
    // for tiny u, in which case v underflows to the lower clamp.
    let ln_w = -delta * u.ln() + (-delta / (delta + 1.0) * p.ln()).exp_m1().ln();
    let v = (-(1.0 / delta) * ln_add_exp(0.0, ln_w)).exp();
    v.clamp(1e-12, 1.0 - 1e-12)
}

pub fn clayton_cdf(delta: f64, u: f64, v: f64) -> f64 {
    (-clayton_ln_sum(delta, u, v) / delta).exp()
}

pub fn clayton_tau(delta: f64) -> f64 {
    delta / (delta + 2.0)
}

pub fn clayton_delta_from_tau(tau: f64) -> f64 {
    2.0 * tau / (1.0 - tau)
}

// ---------------------------------------------------------------------------
// Frank
// ---------------------------------------------------------------------------

/// Below this the Frank expressions are evaluated as their independence limit.
const FRANK_DELTA_EPS: f64 = 1e-6;

// Negative dependence is handled by reflection: the Frank copula with
// parameter -d is the d copula evaluated at (1-u, v). Keeping only the
// positive branch means the denominator below never mixes large magnitudes.

pub fn frank_log_density(delta: f64, u: f64, v: f64) -> f64 {
    if delta.abs() < FRANK_DELTA_EPS {
        return 0.0;
    }
    if delta < 0.0 {
        return frank_log_density(-delta, 1.0 - u, v);
    }
    let e = (-delta).exp();
    // D = (1 - e^-d) - (1 - e^-du)(1 - e^-dv) expanded into terms in (0, 1],
    // which avoids the near-1 cancellation of the factored form.
    let a = (-delta * u).exp();
    let b = (-delta * v).exp();
    let d = a + b - a * b - e;
    delta.ln() + (-e).ln_1p() - delta * (u + v) - 2.0 * d.ln()
}

pub fn frank_h1(delta: f64, u: f64, v: f64) -> f64 {
    if delta.abs() < FRANK_DELTA_EPS {
        return v;
    }
    if delta < 0.0 {
        return frank_h1(-delta, 1.0 - u, v);
    }
    let a = (-delta * u).exp();
    let b = (-delta * v).exp();
    let d = a + b - a * b - (-delta).exp();
    (a * (1.0 - b) / d).clamp(0.0, 1.0)
}

pub fn frank_hinv1(delta: f64, p: f64, u: f64) -> f64 {
    if delta.abs() < FRANK_DELTA_EPS {
        return p;
    }
    if delta < 0.0 {
        return frank_hinv1(-delta, p, 1.0 - u);
    }
    let a = (-delta * u).exp();
    // Solve p = a B / (D(B)) for B = 1 - e^-dv, then invert. The form
    // 1 - B = (a(1-p) + p e^-d) / (a + p(1-a)) avoids cancellation as B -> 1.
    let one_minus_b = (a * (1.0 - p) + p * (-delta).exp()) / (a + p * (1.0 - a));
    let v = -one_minus_b.ln() / delta;
    v.clamp(1e-12, 1.0 - 1e-12)
}

pub fn frank_cdf(delta: f64, u: f64, v: f64) -> f64 {
    if delta.abs() < FRANK_DELTA_EPS {
        return u * v;
    }
    if delta < 0.0 {
        return (v - frank_cdf(-delta, 1.0 - u, v)).clamp(0.0, 1.0);
    }
    let eu = (-delta * u).exp_m1();
    let ev = (-delta * v).exp_m1();
    let ed = (-delta).exp_m1();
    (-1.0 / delta) * (eu * ev / ed).ln_1p()
}

/// Debye function D1(x) = (1/x) Int_0^x t/(e^t - 1) dt.
fn debye1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        return 1.0 - x / 4.0;
    }
    let val = quadrature::integrate_gl(|t| t / t.exp_m1(), 0.0, x, 64);
    val / x
}

pub fn frank_tau(delta: f64) -> f64 {
    if delta.abs() < FRANK_DELTA_EPS {
        return delta / 9.0; // leading term of the expansion at zero
    }
    1.0 - 4.0 / delta + 4.0 * debye1(delta) / delta
}

/// Inverts tau -> delta by bisection; tau must lie strictly inside (-1, 1).
pub fn frank_delta_from_tau(tau: f64) -> f64 {
    if tau.abs() < 1e-10 {
        return 0.0;
    }
    let (mut lo, mut hi) = if tau > 0.0 { (1e-8, 100.0) } else { (-100.0, -1e-8) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frank_tau(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
