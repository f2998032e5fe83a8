//! Ground and thermal states of the static chain.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fock::SectorBasis;
use crate::lattice::{HubbardCouplings, SparseHamiltonian, UnitSystem};

/// Default dimension limit for dense diagonalization.
pub const DENSE_DIMENSION_CAP: usize = 2000;
/// Eigenvalues closer than this are treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// A normalized state vector in a sector basis.
#[derive(Clone, Debug)]
pub struct PureState {
    basis: Arc<SectorBasis>,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Wraps and normalizes `amplitudes`.
    pub fn new(basis: Arc<SectorBasis>, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::invalid(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let n = norm(&amplitudes);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("state has zero or non-finite norm"));
        }
        for a in &mut amplitudes {
            *a /= n;
        }
        Ok(Self { basis, amplitudes })
    }

    /// Fock state `basis.state(rank)`.
    pub fn basis_state(basis: Arc<SectorBasis>, rank: usize) -> Self {
        let mut amplitudes = vec![Complex64::default(); basis.dim()];
        amplitudes[rank] = Complex64::new(1.0, 0.0);
        Self { basis, amplitudes }
    }

    pub(crate) fn from_raw(basis: Arc<SectorBasis>, amplitudes: Vec<Complex64>) -> Self {
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap_sqr(&self, other: &PureState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Mean occupation of every site.
    pub fn site_densities(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.sites()];
        for (s, a) in self.basis.states().iter().zip(&self.amplitudes) {
            let p = a.norm_sqr();
            for (o, &n) in out.iter_mut().zip(s.as_slice()) {
                *o += p * n as f64;
            }
        }
        out
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        DensityMatrix::new(&v * v.adjoint(), None)
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Rotates the global phase so the largest-magnitude amplitude is real positive.
fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() * (1.0 + 1e-12) {
            best = i;
        }
    }
    let ph = v[best].conj() / v[best].norm();
    for z in v.iter_mut() {
        *z *= ph;
    }
}

/// A density operator, optionally tagged with a bipartite `(left, right)` shape.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
    bipartite: Option<(usize, usize)>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<Complex64>, bipartite: Option<(usize, usize)>) -> Self {
        if let Some((a, b)) = bipartite {
            assert_eq!(a * b, matrix.nrows(), "bipartite shape does not match the matrix");
        }
        Self { matrix, bipartite }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn bipartite(&self) -> Option<(usize, usize)> {
        self.bipartite
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Half the trace norm of `self − other`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.matrix - &other.matrix;
        0.5 * SymmetricEigen::new(diff).eigenvalues.iter().map(|x| x.abs()).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundStateOptions {
    /// Bound on `‖Ĥψ − Eψ‖`.
    pub tol: f64,
    /// Lanczos vectors per restart cycle.
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Seed of the random starting vector.
    pub seed: u64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            krylov_dim: 120,
            max_restarts: 200,
            seed: 0x5eed_1a77_1ce5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub state: PureState,
    /// Final residual norm `‖Ĥψ − Eψ‖`.
    pub residual: f64,
    /// Estimate of the distance to the next eigenvalue.
    pub gap: Option<f64>,
}

impl GroundState {
    pub fn is_degenerate(&self) -> bool {
        self.gap.is_some_and(|g| g < DEGENERACY_GAP)
    }
}

/// Lowest eigenpair via restarted Lanczos with full reorthogonalization.
pub fn ground_state(h: &SparseHamiltonian, c: HubbardCouplings, opts: GroundStateOptions) -> Result<GroundState> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("ground-state tolerance must be positive"));
    }
    let n = h.dim();
    if n <= 2 {
        return dense_ground_state(h, c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let m_max = opts.krylov_dim.clamp(2, n);
    let mut hv = vec![0.0; n];
    let mut gap = None;
    let mut last_residual = f64::INFINITY;

    for _ in 0..=opts.max_restarts {
        normalize_real(&mut start);
        let mut q: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut w = vec![0.0; n];
        for j in 0..m_max {
            h.apply_real(c, &q[j], &mut w);
            let a = dot(&q[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for qi in &q {
                    let ov = dot(qi, &w);
                    axpy(-ov, qi, &mut w);
                }
            }
            let b = dot(&w, &w).sqrt();
            if b < 1e-14 * (1.0 + a.abs()) || j + 1 == m_max {
                break;
            }
            // Cheap convergence probe on the tridiagonal matrix.
            if (j + 1) % 10 == 0 {
                let (_, vecs) = tridiagonal_eigen(&alpha, &beta);
                if b * vecs[(j, 0)].abs() < 0.05 * opts.tol {
                    break;
                }
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            q.push(w.clone());
        }
        let m = alpha.len();
        let (vals, vecs) = tridiagonal_eigen(&alpha, &beta[..m - 1]);
        if m > 1 {
            gap = Some(vals[1] - vals[0]);
        }
        let mut ritz = vec![0.0; n];
        for k in 0..m {
            axpy(vecs[(k, 0)], &q[k], &mut ritz);
        }
        normalize_real(&mut ritz);
        h.apply_real(c, &ritz, &mut hv);
        let e = dot(&ritz, &hv);
        let res = hv.iter().zip(&ritz).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
        last_residual = res;
        if res <= opts.tol {
            let mut amps: Vec<Complex64> = ritz.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            fix_phase(&mut amps);
            return Ok(GroundState {
                energy: e,
                state: PureState::from_raw(Arc::clone(h.basis()), amps),
                residual: res,
                gap,
            });
        }
        start = ritz;
    }
    Err(Error::NonConvergence {
        what: "Lanczos ground state",
        detail: format!("residual {last_residual:e} after {} restarts", opts.max_restarts),
    })
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    sorted_eigen(t)
}

/// Eigenpairs of a real symmetric matrix in ascending order.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |i, k| eig.eigenvectors[(i, order[k])]);
    (vals, vecs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

fn normalize_real(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Dense-diagonalization ground state; the lowest-index eigenvector is used
/// when the ground level is degenerate.
pub fn dense_ground_state(h: &SparseHamiltonian, c: HubbardCouplings) -> Result<GroundState> {
    if h.dim() > DENSE_DIMENSION_CAP {
        return Err(Error::Capacity {
            dim: h.dim() as u128,
            cap: DENSE_DIMENSION_CAP,
        });
    }
    let (vals, vecs) = sorted_eigen(h.to_dense(c));
    let mut amps: Vec<Complex64> = vecs.column(0).iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fix_phase(&mut amps);
    let state = PureState::from_raw(Arc::clone(h.basis()), amps);
    let mut tmp = vec![Complex64::default(); h.dim()];
    h.apply(c, state.amplitudes(), &mut tmp);
    let residual = tmp
        .iter()
        .zip(state.amplitudes())
        .map(|(a, b)| (a - b * vals[0]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(GroundState {
        energy: vals[0],
        state,
        residual,
        gap: vals.get(1).map(|v| v - vals[0]),
    })
}

#[derive(Clone, Debug)]
pub struct ThermalState {
    pub rho: DensityMatrix,
    /// Every excited-state weight underflowed; `rho` is the ground projector.
    pub ground_projector_fallback: bool,
    pub ground_degeneracy: usize,
}

/// Canonical state `exp(−Ĥ/k_B T)/Z` in the fixed-N sector, from a full
/// eigendecomposition. At `T = 0` this is the (equal-weight) ground projector.
pub fn thermal_state(
    h: &SparseHamiltonian,
    c: HubbardCouplings,
    kelvin: f64,
    units: &UnitSystem,
    dense_cap: usize,
) -> Result<ThermalState> {
    if !(kelvin >= 0.0 && kelvin.is_finite()) {
        return Err(Error::invalid(format!("temperature must be non-negative, got {kelvin}")));
    }
    if h.dim() > dense_cap {
        return Err(Error::Capacity {
            dim: h.dim() as u128,
            cap: dense_cap,
        });
    }
    let (vals, vecs) = sorted_eigen(h.to_dense(c));
    let e0 = vals[0];
    let degeneracy = vals.iter().take_while(|&&e| e - e0 < DEGENERACY_GAP).count();
    let kt = units.thermal_energy(kelvin);
    let mut weights: Vec<f64> = if kelvin == 0.0 {
        (0..vals.len()).map(|i| if i < degeneracy { 1.0 } else { 0.0 }).collect()
    } else {
        vals.iter().map(|e| (-(e - e0) / kt).exp()).collect()
    };
    let fallback = kelvin > 0.0 && weights[degeneracy..].iter().all(|&w| w == 0.0) && vals.len() > degeneracy;
    if fallback {
        log::warn!("all excited Boltzmann weights underflow at T = {kelvin} K; using the ground projector");
    }
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);

    let n = h.dim();
    let kept: Vec<usize> = (0..n).filter(|&k| weights[k] > 0.0).collect();
    let scaled = DMatrix::from_fn(n, kept.len(), |i, k| vecs[(i, kept[k])] * weights[kept[k]]);
    let basis = DMatrix::from_fn(n, kept.len(), |i, k| vecs[(i, kept[k])]);
    let real = &scaled * basis.transpose();
    let mut rho = real.map(|x| Complex64::new(x, 0.0));
    // Symmetrize away rounding so the result is exactly Hermitian.
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (rho[(i, j)] + rho[(j, i)]);
            rho[(i, j)] = avg;
            rho[(j, i)] = avg;
        }
    }
    Ok(ThermalState {
        rho: DensityMatrix::new(rho, None),
        ground_projector_fallback: fallback,
        ground_degeneracy: degeneracy,
    })
}
