//! BB1 pair copula: C(u, v) = (1 + (x + y)^(1/d))^(-1/t) with
//! x = (u^-t - 1)^d and y = (v^-t - 1)^d, theta > 0, delta >= 1.
//!
//! Everything runs in log space: x and y overflow f64 for u near the clamp
//! boundary once theta * delta is moderately large.

/// ln(1 + e^a) without overflow.
fn ln1p_exp(a: f64) -> f64 {
    if a > 35.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// ln x = delta * ln(u^-theta - 1).
fn ln_x(theta: f64, delta: f64, u: f64) -> f64 {
    delta * (-theta * u.ln()).exp_m1().ln()
}

/// (ln T, ln G) with T = x + y and G = 1 + T^(1/delta).
fn ln_t_g(theta: f64, delta: f64, u: f64, v: f64) -> (f64, f64, f64, f64) {
    let lx = ln_x(theta, delta, u);
    let ly = ln_x(theta, delta, v);
    let m = lx.max(ly);
    let lt = m + ((lx - m).exp() + (ly - m).exp()).ln();
    let lg = ln1p_exp(lt / delta);
    (lx, ly, lt, lg)
}

pub fn bb1_log_density(theta: f64, delta: f64, u: f64, v: f64) -> f64 {
    let (lx, ly, lt, lg) = ln_t_g(theta, delta, u, v);
    let lw = lt / delta;
    // bracket = (1 + theta delta) w + theta (delta - 1), in log space.
    let ln_bracket = if lw > 35.0 {
        lw + ((1.0 + theta * delta) + theta * (delta - 1.0) * (-lw).exp()).ln()
    } else {
        ((1.0 + theta * delta) * lw.exp() + theta * (delta - 1.0)).ln()
    };
    (-1.0 / theta - 2.0) * lg
        + (1.0 / delta - 2.0) * lt
        + ln_bracket
        + (-theta - 1.0) * (u.ln() + v.ln())
        + (1.0 - 1.0 / delta) * (lx + ly)
}

/// F(v | u) = G^(-1/t - 1) T^(1/d - 1) u^(-t-1) (u^-t - 1)^(d-1).
pub fn bb1_h1(theta: f64, delta: f64, u: f64, v: f64) -> f64 {
    let (lx, _ly, lt, lg) = ln_t_g(theta, delta, u, v);
    let ln_h = (-1.0 / theta - 1.0) * lg
        + (1.0 / delta - 1.0) * lt
        + (-theta - 1.0) * u.ln()
        + (1.0 - 1.0 / delta) * lx;
    ln_h.exp().clamp(0.0, 1.0)
}

/// No closed form; h1 is a cdf in v so bisection is safe.
pub fn bb1_hinv1(theta: f64, delta: f64, p: f64, u: f64) -> f64 {
    let mut lo = 1e-12;
    let mut hi = 1.0 - 1e-12;
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if bb1_h1(theta, delta, u, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn bb1_cdf(theta: f64, delta: f64, u: f64, v: f64) -> f64 {
    let (_, _, _, lg) = ln_t_g(theta, delta, u, v);
    (-lg / theta).exp()
}

pub fn bb1_tau(theta: f64, delta: f64) -> f64 {
    1.0 - 2.0 / (delta * (theta + 2.0))
}
