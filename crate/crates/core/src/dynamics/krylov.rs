//! Restarted GMRES for matrix-free complex linear systems.

use num_complex::Complex64;

use crate::error::{Result, UomError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    /// Stop when `|b - A x| <= tol * |b|`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restart: 200,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresReport {
    pub iterations: usize,
    /// Relative residual from the Arnoldi recurrence.
    pub residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `A x = b` starting from `x`. `apply(v, out)` writes `A v`;
/// `precond(v, out)` writes an approximation of `A^{-1} v` (right preconditioning).
pub fn gmres<A, M>(mut apply: A, mut precond: M, b: &[Complex64], x: &mut [Complex64], opts: &GmresOptions) -> Result<GmresReport>
where
    A: FnMut(&[Complex64], &mut [Complex64]) -> Result<()>,
    M: FnMut(&[Complex64], &mut [Complex64]) -> Result<()>,
{
    let n = b.len();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let m = opts.restart.max(1);
    let mut total = 0;
    let mut w = vec![ZERO; n];
    let mut z = vec![ZERO; n];
    loop {
        // r = b - A x
        apply(x, &mut w)?;
        let r: Vec<Complex64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
        let beta = norm(&r);
        if beta <= opts.tol * bnorm {
            return Ok(GmresReport {
                iterations: total,
                residual: beta / bnorm,
            });
        }
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut zs: Vec<Vec<Complex64>> = Vec::new();
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![ZERO; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_done = 0;
        let mut resid = beta;
        for k in 0..m {
            precond(&v[k], &mut z)?;
            apply(&z, &mut w)?;
            zs.push(z.clone());
            total += 1;
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let c = dot(vj, &w);
                    h[j][k] += c;
                    for (wi, vi) in w.iter_mut().zip(vj) {
                        *wi -= c * vi;
                    }
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = Complex64::new(hn, 0.0);
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if d == 0.0 {
                return Err(UomError::SingularSystem("GMRES breakdown".into()));
            }
            cs[k] = a / d;
            sn[k] = bb / d;
            h[k][k] = Complex64::new(d, 0.0);
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            resid = g[k + 1].norm();
            k_done = k + 1;
            log::trace!("gmres iteration {total}: relative residual {:.3e}", resid / bnorm);
            if resid <= opts.tol * bnorm || hn <= 1e-14 * beta || total >= opts.max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![ZERO; k_done];
        for i in (0..k_done).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_done {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&zs[j]) {
                *xi += yj * zi;
            }
        }
        if resid <= opts.tol * bnorm {
            return Ok(GmresReport {
                iterations: total,
                residual: resid / bnorm,
            });
        }
        if total >= opts.max_iter {
            return Err(UomError::NonConvergent(format!(
                "GMRES stalled at relative residual {:.2e} after {total} iterations",
                resid / bnorm
            )));
        }
    }
}
