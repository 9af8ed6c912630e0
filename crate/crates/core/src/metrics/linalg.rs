//! Least-squares projection onto delayed copies of reference signals.

use super::SDR_RIDGE;

/// Gram matrix of the truncated shifts `x[n - i]`, `i < taps`, for every
/// signal in `signals`, laid out block-wise (signal-major).
///
/// Uses `G[i][j] = G[i-1][j-1] - a[N-i]·b[N-j]`, so only the first row and
/// column of each block need an O(N) correlation.
fn shifted_gram(signals: &[&[f64]], taps: usize) -> Vec<f64> {
    let k = signals.len();
    let dim = k * taps;
    let n = signals[0].len();
    let mut g = vec![0.0; dim * dim];
    let lag_corr = |a: &[f64], b: &[f64], lag: usize| -> f64 {
        // Σ_n a[n] b[n + lag]
        if lag >= n {
            0.0
        } else {
            a[..n - lag].iter().zip(&b[lag..]).map(|(x, y)| x * y).sum()
        }
    };
    for (p, a) in signals.iter().enumerate() {
        for (q, b) in signals.iter().enumerate() {
            let at = |i: usize, j: usize| (p * taps + i) * dim + q * taps + j;
            // Row 0: Σ_n a[n] b[n - j] = Σ_m b[m] a[m + j]
            for j in 0..taps {
                g[at(0, j)] = lag_corr(b, a, j);
            }
            for i in 1..taps {
                g[at(i, 0)] = lag_corr(a, b, i);
            }
            for i in 1..taps {
                for j in 1..taps {
                    let ai = if n >= i { a[n - i] } else { 0.0 };
                    let bj = if n >= j { b[n - j] } else { 0.0 };
                    g[at(i, j)] = g[at(i - 1, j - 1)] - ai * bj;
                }
            }
        }
    }
    g
}

/// In-place Cholesky factorization; returns false if not positive definite.
fn cholesky(a: &mut [f64], dim: usize) -> bool {
    for j in 0..dim {
        let mut d = a[j * dim + j];
        for k in 0..j {
            d -= a[j * dim + k] * a[j * dim + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[j * dim + j] = d;
        for i in j + 1..dim {
            let mut s = a[i * dim + j];
            let (ri, rj) = (i * dim, j * dim);
            for k in 0..j {
                s -= a[ri + k] * a[rj + k];
            }
            a[i * dim + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], dim: usize, b: &mut [f64]) {
    for i in 0..dim {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * dim + k] * b[k];
        }
        b[i] = s / l[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut s = b[i];
        for k in i + 1..dim {
            s -= l[k * dim + i] * b[k];
        }
        b[i] = s / l[i * dim + i];
    }
}

/// Projects `x` onto span{ s[n - i] : s ∈ signals, i < taps }. Returns the
/// projection and whether extra regularization was needed.
pub(super) fn project_onto_shifts(x: &[f64], signals: &[&[f64]], taps: usize) -> (Vec<f64>, bool) {
    let n = x.len();
    let dim = signals.len() * taps;
    let gram = shifted_gram(signals, taps);
    let mut rhs = Vec::with_capacity(dim);
    for s in signals {
        for i in 0..taps {
            // Σ_n x[n] s[n - i]
            rhs.push(if i >= n { 0.0 } else { s[..n - i].iter().zip(&x[i..]).map(|(a, b)| a * b).sum() });
        }
    }
    let mean_diag = (0..dim).map(|i| gram[i * dim + i]).sum::<f64>() / dim as f64;
    let mut ridge = SDR_RIDGE * mean_diag.max(f64::MIN_POSITIVE);
    let mut regularized = false;
    let factor = loop {
        let mut a = gram.clone();
        for i in 0..dim {
            a[i * dim + i] += ridge;
        }
        if cholesky(&mut a, dim) {
            let min_pivot = (0..dim).map(|i| a[i * dim + i]).fold(f64::INFINITY, f64::min);
            // pivot² below 1e-8 of the mean diagonal: treat as rank-deficient
            if min_pivot * min_pivot < 1e-8 * mean_diag {
                regularized = true;
            }
            break a;
        }
        regularized = true;
        ridge *= 1e3;
    };
    cholesky_solve(&factor, dim, &mut rhs);
    let mut out = vec![0.0; n];
    for (p, s) in signals.iter().enumerate() {
        for i in 0..taps.min(n) {
            let h = rhs[p * taps + i];
            for (o, v) in out[i..].iter_mut().zip(&s[..n - i]) {
                *o += h * v;
            }
        }
    }
    (out, regularized)
}
