#![allow(dead_code)]

use std::sync::Arc;

use latticesim::fock::SectorBasis;
use latticesim::spectral::{DensityMatrix, PureState};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller.
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random::<f64>();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng))
}

pub fn random_vector(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}

pub fn random_state(basis: &Arc<SectorBasis>, rng: &mut impl Rng) -> PureState {
    PureState::new(Arc::clone(basis), random_vector(basis.dim(), rng)).unwrap()
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(d, d, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let phase = r[(j, j)] / r[(j, j)].norm();
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random mixed state of rank `rank` on a `dl × dr` system.
pub fn random_density(dl: usize, dr: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    let n = dl * dr;
    let g = DMatrix::from_fn(n, rank, |_, _| complex_gaussian(rng));
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr, Some((dl, dr)))
}

/// `(U_L ⊗ U_R) ρ (U_L ⊗ U_R)†`.
pub fn local_rotation(rho: &DensityMatrix, ul: &DMatrix<Complex64>, ur: &DMatrix<Complex64>) -> DensityMatrix {
    let u = ul.kronecker(ur);
    DensityMatrix::new(&u * rho.matrix() * u.adjoint(), rho.bipartite())
}

/// `exp(−i H dt) v` for a real symmetric `H` by full diagonalization.
pub fn dense_expm(h: &DMatrix<f64>, dt: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let mut c = q.adjoint() * v;
    for (k, e) in eig.eigenvalues.iter().enumerate() {
        c[k] *= Complex64::new(0.0, -e * dt).exp();
    }
    q * c
}

pub fn overlap_sqr(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr()
}

/// Sectors of dimension at most 50.
pub const SMALL_SECTORS: [(usize, usize); 9] = [(2, 1), (2, 4), (3, 3), (3, 5), (4, 2), (4, 3), (4, 4), (5, 3), (6, 2)];
