//! Rank-based dependence measures.

use crate::{Error, Result};

/// Average ranks scaled by 1/(n+1), so the output lies strictly inside (0, 1).
pub fn pseudo_observations(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("non-finite value in ranks"));
    let mut u = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // Ties share the average rank of their block.
        let avg_rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &idx in &order[i..=j] {
            u[idx] = avg_rank / (n as f64 + 1.0);
        }
        i = j + 1;
    }
    u
}

/// Column-wise pseudo-observations for row-major data.
pub fn pseudo_observation_rows(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if rows.is_empty() {
        return Err(Error::domain("no rows"));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::domain("ragged rows"));
    }
    let mut out = vec![vec![0.0; d]; rows.len()];
    for j in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let u = pseudo_observations(&col);
        for (i, val) in u.into_iter().enumerate() {
            out[i][j] = val;
        }
    }
    Ok(out)
}

/// Merge sort that counts inversions; `buf` is scratch of the same length.
fn merge_count(values: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut inv = merge_count(left, &mut buf[..mid]) + merge_count(right, &mut buf[mid..]);
    let (mut i, mut j) = (0usize, 0usize);
    for slot in buf[..n].iter_mut() {
        if i < left.len() && (j >= right.len() || left[i] <= right[j]) {
            *slot = left[i];
            i += 1;
        } else {
            *slot = right[j];
            j += 1;
            inv += (left.len() - i) as u64;
        }
    }
    values.copy_from_slice(&buf[..n]);
    inv
}

fn tied_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as u64;
        total += t * (t - 1) / 2;
        i = j + 1;
    }
    total
}

/// Kendall's tau-b in O(n log n) (Knight's algorithm) with tie correction.
pub fn empirical_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::domain("length mismatch in tau"));
    }
    if n < 2 {
        return Err(Error::domain("tau needs at least two observations"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in tau"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .unwrap()
            .then(y[a].partial_cmp(&y[b]).unwrap())
    });
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    // Tied pairs in x, and jointly in (x, y), counted on the sorted order.
    let n1 = tied_pairs(&xs);
    let mut n3 = 0u64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && xs[j + 1] == xs[i] && ys[j + 1] == ys[i] {
                j += 1;
            }
            let t = (j - i + 1) as u64;
            n3 += t * (t - 1) / 2;
            i = j + 1;
        }
    }

    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys); // ys is now fully sorted

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let concordant_minus_discordant =
        n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::domain("tau undefined: a margin is constant"));
    }
    Ok(concordant_minus_discordant as f64 / denom)
}

/// Empirical upper tail dependence at rank threshold q:
/// the fraction of points with both pseudo-observations above q, among
/// points whose first pseudo-observation is above q.
pub fn empirical_upper_tail_dep(x: &[f64], y: &[f64], q: f64) -> Result<f64> {
    let n = x.len();
    if n != y.len() || n == 0 {
        return Err(Error::domain("length mismatch in tail dependence"));
    }
    if !(0.5 < q && q < 1.0) {
        return Err(Error::domain("tail threshold must lie in (0.5, 1)"));
    }
    if (n as f64) * (1.0 - q) < 20.0 {
        return Err(Error::domain(format!(
            "tail threshold {q} leaves fewer than 20 of {n} points above it"
        )));
    }
    let u = pseudo_observations(x);
    let v = pseudo_observations(y);
    let mut above_u = 0usize;
    let mut above_both = 0usize;
    for i in 0..n {
        if u[i] > q {
            above_u += 1;
            if v[i] > q {
                above_both += 1;
            }
        }
    }
    if above_u == 0 {
        return Err(Error::domain("no observations above the tail threshold"));
    }
    Ok(above_both as f64 / above_u as f64)
}

/// Asymptotic tau-based independence test. Under independence
/// tau_hat * sqrt(9n(n-1) / (2(2n+5))) is approximately standard normal.
pub struct IndependenceTest {
    pub tau: f64,
    pub statistic: f64,
    pub reject: bool,
}

pub fn independence_test_tau(x: &[f64], y: &[f64]) -> Result<IndependenceTest> {
    let n = x.len() as f64;
    let tau = empirical_tau(x, y)?;
    let statistic = tau.abs() * (9.0 * n * (n - 1.0) / (2.0 * (2.0 * n + 5.0))).sqrt();
    Ok(IndependenceTest { tau, statistic, reject: statistic > 1.959963984540054 })
}
