//! Slow, simple reference computations.
//!
//! Nothing here shares code with `conslaw`: matrices are plain row-major
//! slices and every routine uses the textbook method, so agreement with the
//! library is evidence rather than tautology.

/// Number of eigenvalues of the symmetric `n × n` matrix `a` strictly below `x`.
///
/// Uses Sylvester's law of inertia on the pivots of `A − xI = LDLᵀ`; their
/// product is the characteristic polynomial at `x`, and the count of negative
/// pivots is the count of eigenvalues below it.
pub fn count_below(a: &[f64], n: usize, x: f64) -> usize {
    assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(x.abs()).max(f64::MIN_POSITIVE);
    let tiny = scale * f64::EPSILON * f64::EPSILON;
    let mut m: Vec<f64> = a.to_vec();
    for i in 0..n {
        m[i * n + i] -= x;
    }
    let mut negative = 0;
    for k in 0..n {
        let mut d = m[k * n + k];
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            negative += 1;
        }
        for i in k + 1..n {
            let l = m[i * n + k] / d;
            for j in k + 1..n {
                m[i * n + j] -= l * m[k * n + j];
            }
        }
    }
    negative
}

/// Smallest eigenvalue by bisection on [`count_below`].
pub fn smallest_eigenvalue(a: &[f64], n: usize) -> f64 {
    let radius = (0..n).map(|i| (0..n).map(|j| a[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(a, n, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
/// Exactly zero pivots are nudged, which is what inverse iteration wants.
pub fn solve(m: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut a = m.to_vec();
    let mut x = b.to_vec();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        if a[k * n + k] == 0.0 {
            a[k * n + k] = scale * f64::EPSILON;
        }
        for i in k + 1..n {
            let l = a[i * n + k] / a[k * n + k];
            for j in k..n {
                a[i * n + j] -= l * a[k * n + j];
            }
            x[i] -= l * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k * n + j] * x[j]).sum();
        x[k] = (x[k] - s) / a[k * n + k];
    }
    x
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Unit eigenvector for the eigenvalue nearest `lambda`, by inverse iteration
/// (power iteration on `(A − λI)⁻¹`).
pub fn inverse_iteration(a: &[f64], n: usize, lambda: f64) -> Vec<f64> {
    let mut shifted = a.to_vec();
    for i in 0..n {
        shifted[i * n + i] -= lambda;
    }
    // Not orthogonal to any eigenvector in practice.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()).collect();
    for _ in 0..8 {
        let w = solve(&shifted, n, &v);
        let s = norm(&w);
        v = w.iter().map(|x| x / s).collect();
    }
    v
}

/// `uᵀAu` for the symmetric `a`.
pub fn quadratic_form(a: &[f64], n: usize, u: &[f64]) -> f64 {
    (0..n).map(|i| u[i] * (0..n).map(|j| a[i * n + j] * u[j]).sum::<f64>()).sum()
}

/// Central differences with one step of Richardson extrapolation, which
/// cancels the `h²` error term.
pub fn richardson_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    let mut central = |i: usize, h: f64| {
        let x0 = p[i];
        p[i] = x0 + h;
        let up = f(&p);
        p[i] = x0 - h;
        let down = f(&p);
        p[i] = x0;
        (up - down) / (2.0 * h)
    };
    (0..x.len())
        .map(|i| {
            let coarse = central(i, h);
            let fine = central(i, 0.5 * h);
            (4.0 * fine - coarse) / 3.0
        })
        .collect()
}

/// `‖a − b‖ / ‖b‖`, with `b` the reference.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b).max(f64::MIN_POSITIVE)
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Standard error of a proportion `p` estimated from `n` trials.
pub fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Population mean and variance.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inertia_of_a_diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(count_below(&a, 3, 0.0), 1);
        assert_eq!(count_below(&a, 3, 2.5), 2);
        assert_eq!(count_below(&a, 3, 10.0), 3);
        assert!((smallest_eigenvalue(&a, 3) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_eigenpair() {
        // Eigenvalues 1 and 3, eigenvector (1, -1)/√2 for 1.
        let a = [2.0, 1.0, 1.0, 2.0];
        let l = smallest_eigenvalue(&a, 2);
        assert!((l - 1.0).abs() < 1e-14);
        let v = inverse_iteration(&a, 2, l);
        assert!((v[0] + v[1]).abs() < 1e-12 && (v[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((quadratic_form(&a, 2, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_needs_pivoting() {
        let m = [0.0, 1.0, 1.0, 1.0];
        let x = solve(&m, 2, &[2.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn richardson_is_exact_on_cubics() {
        let g = richardson_gradient(|p| p[0].powi(3) + 2.0 * p[0] * p[1], &[1.5, -0.5], 1e-2);
        assert!((g[0] - (3.0 * 2.25 - 1.0)).abs() < 1e-10);
        assert!((g[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn slope_and_moments() {
        assert!((ols_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
        assert_eq!(mean_var(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(proportion_se(0.5, 100), 0.05);
    }
}
