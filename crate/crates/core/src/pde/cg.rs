//! Conjugate gradient for the symmetric positive-definite step systems.
//!
//! Works on full-grid vectors with constrained cells held at zero; the
//! operator closure must map the constrained subspace to itself.

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final relative residual |b - Ax| / |b|.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CgFailure {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` in place starting from the warm start in `x`.
///
/// `apply(v, out)` must compute `out = A v`. Deterministic: fixed iteration
/// order, sequential dot products.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol_rel: f64,
    max_iter: usize,
) -> Result<CgOutcome, CgFailure> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];

    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= tol_rel * b_norm {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: rr.sqrt() / b_norm,
        });
    }
    p.copy_from_slice(&r);

    for iter in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // loss of positive definiteness (should not happen for these
            // step matrices); report as divergence
            return Err(CgFailure {
                iterations: iter,
                relative_residual: rr.sqrt() / b_norm,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= tol_rel * b_norm {
            return Ok(CgOutcome {
                iterations: iter,
                relative_residual: rr_next.sqrt() / b_norm,
            });
        }
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    Err(CgFailure {
        iterations: max_iter,
        relative_residual: rr.sqrt() / b_norm,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // A = [[4,1],[1,3]], b = [1,2]; exact solution (1/11, 7/11)
        let apply = |v: &[f64], out: &mut [f64]| {
            out[0] = 4.0 * v[0] + v[1];
            out[1] = v[0] + 3.0 * v[1];
        };
        let b = [1.0, 2.0];
        let mut x = [0.0, 0.0];
        let out = conjugate_gradient(apply, &b, &mut x, 1e-14, 100).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn respects_zero_rhs() {
        let apply = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let b = [0.0; 4];
        let mut x = [1.0; 4];
        let out = conjugate_gradient(apply, &b, &mut x, 1e-12, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tridiagonal_laplacian_against_direct_solve() {
        // -u'' = f on 16 cells, Dirichlet 0: compare against dense Gaussian
        // elimination as an independent route.
        let n = 16;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = 2.0 * v[i] - left - right;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = vec![0.0; n];
        conjugate_gradient(apply, &b, &mut x, 1e-13, 1000).unwrap();

        // dense elimination
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 2.0;
            if i > 0 {
                a[i][i - 1] = -1.0;
            }
            if i + 1 < n {
                a[i][i + 1] = -1.0;
            }
        }
        let mut rhs = b.clone();
        for i in 0..n {
            let pivot = a[i][i];
            for j in (i + 1)..n {
                let f = a[j][i] / pivot;
                for k in i..n {
                    a[j][k] -= f * a[i][k];
                }
                rhs[j] -= f * rhs[i];
            }
        }
        let mut exact = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in (i + 1)..n {
                s -= a[i][k] * exact[k];
            }
            exact[i] = s / a[i][i];
        }
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-9, "i={i}");
        }
    }
}
