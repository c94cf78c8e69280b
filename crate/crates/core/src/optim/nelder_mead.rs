//! Nelder-Mead simplex search (maximization convention).

/// Maximize `f` starting from `x0` with initial simplex steps `scale`.
/// Infeasible regions are handled by returning `f64::NEG_INFINITY` from `f`.
/// The best point ever evaluated is returned, so the result is never worse
/// than the starting point.
pub fn nelder_mead_max(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    scale: &[f64],
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    assert_eq!(scale.len(), n);
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if scale[i] != 0.0 { scale[i] } else { 1e-3 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..max_iter {
        // Sort descending by value; index 0 is the current best.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
        let simplex_sorted: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;

        let spread = values[0] - values[n];
        if spread.is_finite() && spread.abs() < 1e-12 {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[n])
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect > values[0] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(c, r)| c + gamma * (r - c))
                .collect();
            let f_expand = f(&expand);
            if f_expand > f_reflect {
                simplex[n] = expand;
                values[n] = f_expand;
            } else {
                simplex[n] = reflect;
                values[n] = f_reflect;
            }
        } else if f_reflect > values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_reflect;
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + rho * (w - c))
                .collect();
            let f_contract = f(&contract);
            if f_contract > values[n] {
                simplex[n] = contract;
                values[n] = f_contract;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=n {
                    let best = simplex[0].clone();
                    for (x, b) in simplex[i].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    (simplex[best].clone(), values[best])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_quadratic_maximum() {
        let f = |x: &[f64]| -((x[0] - 2.0).powi(2) + 3.0 * (x[1] + 1.0).powi(2));
        let (x, v) = nelder_mead_max(f, &[0.0, 0.0], &[0.5, 0.5], 500);
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-5);
        assert_abs_diff_eq!(x[1], -1.0, epsilon = 1e-5);
        assert!(v > -1e-9);
    }

    #[test]
    fn never_returns_worse_than_start() {
        // A deliberately nasty non-smooth objective.
        let f = |x: &[f64]| -(x[0].abs().sqrt() + (x[1] * 3.0).sin().abs());
        let start = [0.7, -0.4];
        let f0 = f(&start);
        let (_, v) = nelder_mead_max(f, &start, &[0.2, 0.2], 200);
        assert!(v >= f0);
    }
}
