//! Lanczos-Krylov action of `exp(−i dt Ĥ)` on a vector.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{HubbardCouplings, SparseHamiltonian};

const MAX_KRYLOV_DIM: usize = 60;

/// Scratch space reused across exponentials of one propagation.
#[derive(Debug, Default)]
pub struct KrylovWorkspace {
    vectors: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Total number of matrix-vector products performed.
    pub matvecs: u64,
    /// Largest subspace dimension used so far.
    pub max_dim: usize,
}

impl KrylovWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, m: usize, n: usize) {
        while self.vectors.len() < m {
            self.vectors.push(vec![Complex64::default(); n]);
        }
        for v in &mut self.vectors {
            if v.len() != n {
                v.resize(n, Complex64::default());
            }
        }
        self.w.resize(n, Complex64::default());
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// `exp(−i dt T) e₁` for the symmetric tridiagonal `T`.
fn small_exp_e1(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let eig = SymmetricEigen::new(tridiagonal(alpha, beta));
    let mut out = vec![Complex64::default(); m];
    for k in 0..m {
        let phase = Complex64::from_polar(eig.eigenvectors[(0, k)], -dt * eig.eigenvalues[k]);
        for (i, o) in out.iter_mut().enumerate() {
            *o += phase * eig.eigenvectors[(i, k)];
        }
    }
    out
}

/// Overwrites `v` with `exp(−i dt Ĥ(c)) v`.
///
/// The Krylov space grows until the a-posteriori estimate
/// `β_m |[exp(−i dt T_m) e₁]_m|` falls below `tol` (relative to `‖v‖`).
pub fn expm_apply(
    h: &SparseHamiltonian,
    c: HubbardCouplings,
    v: &mut [Complex64],
    dt: f64,
    tol: f64,
    ws: &mut KrylovWorkspace,
) -> Result<()> {
    let n = v.len();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 || dt == 0.0 {
        return Ok(());
    }
    let max_m = MAX_KRYLOV_DIM.min(n);
    ws.ensure(max_m + 1, n);
    ws.alpha.clear();
    ws.beta.clear();
    for (q, x) in ws.vectors[0].iter_mut().zip(v.iter()) {
        *q = x / norm;
    }

    let mut coeffs = None;
    for j in 0..max_m {
        let (head, tail) = ws.vectors.split_at_mut(j + 1);
        let qj = &head[j];
        h.apply(c, qj, &mut ws.w);
        ws.matvecs += 1;
        let a: f64 = qj.iter().zip(&ws.w).map(|(x, y)| (x.conj() * y).re).sum();
        for (w, q) in ws.w.iter_mut().zip(qj) {
            *w -= q * a;
        }
        if j > 0 {
            let b = ws.beta[j - 1];
            for (w, q) in ws.w.iter_mut().zip(&head[j - 1]) {
                *w -= q * b;
            }
        }
        // One pass of reorthogonalization against the two previous vectors
        // keeps the short recurrence accurate at these small subspace sizes.
        for q in head.iter().rev().take(2) {
            let ov: Complex64 = q.iter().zip(&ws.w).map(|(x, y)| x.conj() * y).sum();
            for (w, qq) in ws.w.iter_mut().zip(q) {
                *w -= qq * ov;
            }
        }
        ws.alpha.push(a);
        let b = ws.w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let m = j + 1;

        let small = small_exp_e1(&ws.alpha, &ws.beta, dt);
        let err = b * small[m - 1].norm();
        if b < 1e-13 * (1.0 + a.abs()) || err < tol {
            coeffs = Some(small);
            ws.max_dim = ws.max_dim.max(m);
            break;
        }
        ws.beta.push(b);
        for (q, w) in tail[0].iter_mut().zip(&ws.w) {
            *q = w / b;
        }
    }

    let Some(coeffs) = coeffs else {
        return Err(Error::NonConvergence {
            what: "Krylov exponential",
            detail: format!("no convergence within {max_m} vectors for dt = {dt}"),
        });
    };
    for x in v.iter_mut() {
        *x = Complex64::default();
    }
    for (k, ck) in coeffs.iter().enumerate() {
        let s = ck * norm;
        for (x, q) in v.iter_mut().zip(&ws.vectors[k]) {
            *x += q * s;
        }
    }
    Ok(())
}
