//! Particle-number postselection and bipartite entanglement measures.
//!
//! Bipartite vectors and density matrices index the pair (left `i`, right `j`)
//! as `i · dim_right + j`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{BipartiteIndexer, SectorBasis};
use crate::spectral::{DensityMatrix, PureState};

/// Projections with less weight than this cannot be renormalized.
pub const MIN_PROBABILITY: f64 = 1e-12;

/// The balanced-sector component of a state, renormalized.
#[derive(Clone, Debug)]
pub struct PostselectedState {
    indexer: Arc<BipartiteIndexer>,
    coeffs: DMatrix<Complex64>,
    probability: f64,
}

impl PostselectedState {
    /// Builds a postselected state directly from a coefficient matrix, which
    /// is normalized to unit Frobenius norm. `probability` is stored as given.
    pub fn from_coefficients(
        indexer: Arc<BipartiteIndexer>,
        coeffs: DMatrix<Complex64>,
        probability: f64,
    ) -> Result<Self> {
        if coeffs.shape() != (indexer.dim_left(), indexer.dim_right()) {
            return Err(Error::invalid("coefficient matrix does not match the sector shape"));
        }
        let n = coeffs.norm();
        if !(n > 0.0) {
            return Err(Error::invalid("coefficient matrix is zero"));
        }
        Ok(Self {
            indexer,
            coeffs: coeffs / Complex64::new(n, 0.0),
            probability,
        })
    }

    pub fn indexer(&self) -> &Arc<BipartiteIndexer> {
        &self.indexer
    }

    /// `dim_left × dim_right` amplitudes, unit Frobenius norm.
    pub fn coeffs(&self) -> &DMatrix<Complex64> {
        &self.coeffs
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    /// Row-major flattening, `i · dim_right + j`.
    pub fn to_vector(&self) -> DVector<Complex64> {
        let (dl, dr) = self.coeffs.shape();
        DVector::from_fn(dl * dr, |k, _| self.coeffs[(k / dr, k % dr)])
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let v = self.to_vector();
        DensityMatrix::new(&v * v.adjoint(), Some(self.coeffs.shape()))
    }

    /// Schmidt coefficients `σ_i` in descending order.
    pub fn schmidt_coefficients(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.coeffs.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }
}

fn check_basis(parent: &SectorBasis, basis: &SectorBasis) -> Result<()> {
    if parent.sites() != basis.sites() || parent.bosons() != basis.bosons() {
        return Err(Error::invalid("indexer was built on a different sector"));
    }
    Ok(())
}

pub fn postselect(psi: &PureState, indexer: &Arc<BipartiteIndexer>) -> Result<PostselectedState> {
    check_basis(indexer.parent(), psi.basis())?;
    let amps = psi.amplitudes();
    let mut coeffs = DMatrix::zeros(indexer.dim_left(), indexer.dim_right());
    let mut probability = 0.0;
    for &(p, l, r) in indexer.entries() {
        coeffs[(l, r)] = amps[p];
        probability += amps[p].norm_sqr();
    }
    if probability < MIN_PROBABILITY {
        return Err(Error::DegenerateProjection { probability });
    }
    coeffs /= Complex64::new(probability.sqrt(), 0.0);
    Ok(PostselectedState {
        indexer: Arc::clone(indexer),
        coeffs,
        probability,
    })
}

/// `PρP / Tr(PρP)` on the left⊗right space, with `Tr(PρP)`.
pub fn postselect_density(rho: &DensityMatrix, indexer: &BipartiteIndexer) -> Result<(DensityMatrix, f64)> {
    if rho.dim() != indexer.parent().dim() {
        return Err(Error::invalid("density matrix does not live on the indexer's sector"));
    }
    let dr = indexer.dim_right();
    let n = indexer.dim_left() * dr;
    let m = rho.matrix();
    let mut out = DMatrix::zeros(n, n);
    for &(p, l, r) in indexer.entries() {
        let a = l * dr + r;
        for &(q, l2, r2) in indexer.entries() {
            out[(a, l2 * dr + r2)] = m[(p, q)];
        }
    }
    let probability = out.trace().re;
    if probability < MIN_PROBABILITY {
        return Err(Error::DegenerateProjection { probability });
    }
    out /= Complex64::new(probability, 0.0);
    Ok((DensityMatrix::new(out, Some((indexer.dim_left(), dr))), probability))
}

/// Weight of every left-half particle number `0..=N`.
pub fn sector_probabilities(psi: &PureState) -> Vec<f64> {
    let basis = psi.basis();
    let half = basis.sites() / 2;
    let mut out = vec![0.0; basis.bosons() + 1];
    for (s, a) in basis.states().iter().zip(psi.amplitudes()) {
        let left: u32 = s.as_slice()[..half].iter().sum();
        out[left as usize] += a.norm_sqr();
    }
    out
}

fn entropy_bits(probabilities: impl IntoIterator<Item = f64>) -> f64 {
    probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Von Neumann entropy (bits) of either half, from the Schmidt spectrum.
pub fn entropy_of_entanglement(ps: &PostselectedState) -> f64 {
    entropy_bits(ps.schmidt_coefficients().into_iter().map(|s| s * s))
}

/// `((Σ σ_i)² − 1)/2`, the negativity of a pure bipartite state.
pub fn pure_negativity(ps: &PostselectedState) -> f64 {
    let s: f64 = ps.schmidt_coefficients().iter().sum();
    0.5 * (s * s - 1.0)
}

/// Transpose over the right factor.
pub fn partial_transpose(rho: &DensityMatrix) -> Result<DMatrix<Complex64>> {
    let (dl, dr) = rho
        .bipartite()
        .ok_or_else(|| Error::invalid("partial transpose needs a bipartite density matrix"))?;
    let m = rho.matrix();
    Ok(DMatrix::from_fn(dl * dr, dl * dr, |row, col| {
        let (i, j) = (row / dr, row % dr);
        let (k, l) = (col / dr, col % dr);
        m[(i * dr + l, k * dr + j)]
    }))
}

/// Sum of the magnitudes of the negative eigenvalues of `ρ^{T_R}`.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    let pt = partial_transpose(rho)?;
    Ok(SymmetricEigen::new(pt)
        .eigenvalues
        .iter()
        .filter(|&&x| x < 0.0)
        .fold(0.0, |acc, x| acc - x))
}

/// `(‖ρ^{T_R}‖₁ − 1)/2`, with the trace norm from singular values.
pub fn negativity_trace_norm(rho: &DensityMatrix) -> Result<f64> {
    let pt = partial_transpose(rho)?;
    let trace_norm: f64 = pt.svd(false, false).singular_values.iter().sum();
    Ok(0.5 * (trace_norm - 1.0))
}

/// `|⟨a|b⟩|²` between two postselected states of the same sector.
pub fn fidelity(a: &PostselectedState, b: &PostselectedState) -> Result<f64> {
    if !a.indexer.same_sector(&b.indexer) {
        return Err(Error::IndexerMismatch);
    }
    let inner: Complex64 = a.coeffs.iter().zip(b.coeffs.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok(inner.norm_sqr().min(1.0))
}
