//! Optical-lattice parameters, the drive program and the Bose-Hubbard operator.
//!
//! Internally energies are in recoil units `E_R`, times in `ħ/E_R` and `ħ = 1`.
//! SI quantities only appear at the edges and are converted through
//! [`UnitSystem`]. Every frequency is an angular frequency in rad/s.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{apply_hop, SectorBasis};

/// Reduced Planck constant (J s), CODATA 2018.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K), exact.
pub const K_B: f64 = 1.380_649e-23;
/// Atomic mass unit (kg), CODATA 2018.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    /// Lattice laser wavelength (m).
    pub wavelength: f64,
    /// s-wave scattering length (m).
    pub scattering_length: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Mean lattice depth `V` in units of `E_R`.
    pub depth: f64,
    /// Transverse confinement `V⊥` in units of `E_R`.
    pub transverse_depth: f64,
    /// Relative modulation amplitude `dV`.
    pub drive_amplitude: f64,
    /// Drive angular frequency (rad/s).
    pub drive_frequency: f64,
}

impl PhysicalParams {
    /// ⁸⁷Rb in an 842 nm lattice at `V = 10 E_R`, `V⊥ = 30 E_R`, `dV = 0.2`,
    /// driven resonantly at `ω = U/ħ`.
    pub fn rubidium_842nm() -> Self {
        let mut p = Self {
            wavelength: 842e-9,
            scattering_length: 5.45e-9,
            mass: 86.909 * ATOMIC_MASS_UNIT,
            depth: 10.0,
            transverse_depth: 30.0,
            drive_amplitude: 0.2,
            drive_frequency: 0.0,
        };
        p.drive_frequency = p.resonant_frequency();
        p
    }

    /// `U/ħ` at the mean depth, in rad/s.
    pub fn resonant_frequency(&self) -> f64 {
        let units = recoil_units(self);
        interaction_er(self.depth, self.transverse_depth, self) * units.freq_scale
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("scattering_length", self.scattering_length),
            ("mass", self.mass),
            ("depth", self.depth),
            ("transverse_depth", self.transverse_depth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.drive_amplitude.is_finite() && self.drive_amplitude >= 0.0) {
            return Err(Error::invalid("drive amplitude must be non-negative"));
        }
        if !(self.drive_frequency.is_finite() && self.drive_frequency >= 0.0) {
            return Err(Error::invalid("drive frequency must be non-negative"));
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
}

/// Conversion scales between recoil units and SI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitSystem {
    /// `E_R = ħ²k²/2m` (J).
    pub recoil_energy: f64,
    /// `E_R/ħ` (rad/s).
    pub freq_scale: f64,
    /// `ħ/E_R` (s).
    pub time_unit: f64,
    /// `E_R/k_B` (K).
    pub temp_scale: f64,
}

impl UnitSystem {
    pub fn seconds_to_internal(&self, t: f64) -> f64 {
        t / self.time_unit
    }

    pub fn internal_to_seconds(&self, t: f64) -> f64 {
        t * self.time_unit
    }

    /// `k_B T` in units of `E_R`.
    pub fn thermal_energy(&self, kelvin: f64) -> f64 {
        kelvin / self.temp_scale
    }

    /// Angular frequency in units of `E_R/ħ`.
    pub fn frequency_to_internal(&self, omega: f64) -> f64 {
        omega / self.freq_scale
    }
}

pub fn recoil_units(params: &PhysicalParams) -> UnitSystem {
    let k = params.wavenumber();
    let recoil_energy = HBAR * HBAR * k * k / (2.0 * params.mass);
    UnitSystem {
        recoil_energy,
        freq_scale: recoil_energy / HBAR,
        time_unit: HBAR / recoil_energy,
        temp_scale: recoil_energy / K_B,
    }
}

/// `J/E_R = (4/√π) V₀^{3/4} exp(−2√V₀)` with `V₀` in recoil units.
pub fn tunneling_er(depth: f64) -> f64 {
    4.0 / PI.sqrt() * depth.powf(0.75) * (-2.0 * depth.sqrt()).exp()
}

/// `U/E_R = √(8/π) k a_s (V₀ V⊥²)^{1/4}` with depths in recoil units.
pub fn interaction_er(depth: f64, transverse_depth: f64, params: &PhysicalParams) -> f64 {
    (8.0 / PI).sqrt()
        * params.wavenumber()
        * params.scattering_length
        * (depth * transverse_depth * transverse_depth).powf(0.25)
}

/// Hopping `J` and on-site interaction `U`, both in `E_R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HubbardCouplings {
    pub tunneling: f64,
    pub interaction: f64,
}

impl HubbardCouplings {
    pub fn new(tunneling: f64, interaction: f64) -> Self {
        Self {
            tunneling,
            interaction,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.interaction / self.tunneling
    }
}

pub fn hubbard_couplings(depth: f64, transverse_depth: f64, params: &PhysicalParams) -> HubbardCouplings {
    HubbardCouplings {
        tunneling: tunneling_er(depth),
        interaction: interaction_er(depth, transverse_depth, params),
    }
}

/// Lattice depth that realizes a target `U/J` at fixed `V⊥`.
///
/// `U/J ∝ V₀^{−1/2} exp(2√V₀)` is monotone for `V₀ > 1/4`, the branch searched here.
pub fn depth_for_ratio(ratio: f64, transverse_depth: f64, params: &PhysicalParams) -> Result<f64> {
    let f = |v: f64| interaction_er(v, transverse_depth, params) / tunneling_er(v) - ratio;
    let (mut lo, mut hi) = (0.25, 200.0);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::invalid(format!(
            "U/J = {ratio} is not reachable for depths in [{lo}, {hi}] E_R"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One piece of the lattice-depth program,
/// `V₀(t) = depth · (1 + amplitude · sin(ω (t − phase_origin)))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveSegment {
    /// Start time (s).
    pub start: f64,
    /// End time (s).
    pub end: f64,
    /// Base depth in `E_R`.
    pub depth: f64,
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Time origin of the sine (s).
    pub phase_origin: f64,
}

impl DriveSegment {
    pub fn constant(start: f64, end: f64, depth: f64) -> Self {
        Self {
            start,
            end,
            depth,
            amplitude: 0.0,
            omega: 0.0,
            phase_origin: start,
        }
    }

    pub fn driven(start: f64, end: f64, depth: f64, amplitude: f64, omega: f64) -> Self {
        Self {
            start,
            end,
            depth,
            amplitude,
            omega,
            phase_origin: 0.0,
        }
    }

    pub fn is_static(&self) -> bool {
        self.amplitude == 0.0 || self.omega == 0.0
    }

    pub fn depth_at(&self, t: f64) -> f64 {
        if self.is_static() {
            self.depth
        } else {
            self.depth * (1.0 + self.amplitude * (self.omega * (t - self.phase_origin)).sin())
        }
    }
}

/// Contiguous, time-ordered lattice-depth program.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveSchedule {
    segments: Vec<DriveSegment>,
}

impl DriveSchedule {
    pub fn new(segments: Vec<DriveSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("a schedule needs at least one segment"));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.start < s.end) || !s.start.is_finite() || !s.end.is_finite() {
                return Err(Error::invalid(format!("segment {i} has start >= end")));
            }
            if !(s.depth > 0.0) {
                return Err(Error::invalid(format!("segment {i} has non-positive depth")));
            }
            if !s.is_static() && !(s.amplitude < 1.0) {
                return Err(Error::invalid(format!(
                    "segment {i}: amplitude {} lets the depth reach zero",
                    s.amplitude
                )));
            }
            if s.amplitude < 0.0 || s.omega < 0.0 {
                return Err(Error::invalid(format!("segment {i} has negative amplitude or frequency")));
            }
            if i > 0 {
                let prev = segments[i - 1].end;
                if (s.start - prev).abs() > 1e-12 * prev.abs().max(1e-9) {
                    return Err(Error::ScheduleGap { at: prev });
                }
            }
        }
        // Snap boundaries so that adjacent segments share the exact same float.
        let mut segments = segments;
        for i in 1..segments.len() {
            segments[i].start = segments[i - 1].end;
        }
        Ok(Self { segments })
    }

    /// Driven for `drive_end`, then held at the mean depth until `hold_end`,
    /// then raised to `freeze_depth` until `end`. Zero-length stages are dropped.
    pub fn drive_hold_freeze(
        params: &PhysicalParams,
        drive_end: f64,
        hold_end: f64,
        freeze_depth: f64,
        end: f64,
    ) -> Result<Self> {
        let mut segs = Vec::new();
        if drive_end > 0.0 {
            segs.push(DriveSegment::driven(
                0.0,
                drive_end,
                params.depth,
                params.drive_amplitude,
                params.drive_frequency,
            ));
        }
        if hold_end > drive_end {
            segs.push(DriveSegment::constant(drive_end, hold_end, params.depth));
        }
        if end > hold_end.max(drive_end) {
            segs.push(DriveSegment::constant(hold_end.max(drive_end), end, freeze_depth));
        }
        Self::new(segs)
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    /// Index of the segment active at `t`; boundaries belong to the later segment.
    pub fn segment_index(&self, t: f64) -> Result<usize> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let idx = self.segments.partition_point(|s| s.end <= t);
        Ok(idx.min(self.segments.len() - 1))
    }

    /// Lattice depth `V₀(t)` in `E_R`; `t` in seconds.
    pub fn v0_at(&self, t: f64) -> Result<f64> {
        let i = self.segment_index(t)?;
        Ok(self.segments[i].depth_at(t))
    }
}

/// `Ĥ(J, U) = J · hop + U · pairs` on a fixed sector.
///
/// `hop` holds the matrix elements of `−Σ (a†_l a_{l+1} + h.c.)` in compressed
/// row form, `pairs` the diagonal `½ Σ n_l (n_l − 1)`.
#[derive(Debug)]
pub struct SparseHamiltonian {
    basis: Arc<SectorBasis>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    pairs: Vec<f64>,
}

pub fn build_hamiltonian(basis: Arc<SectorBasis>) -> Result<SparseHamiltonian> {
    let l = basis.sites();
    let dim = basis.dim();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut pairs = Vec::with_capacity(dim);
    row_ptr.push(0);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * l);
    for state in basis.states() {
        row.clear();
        // Row r collects ⟨r| −a†_to a_from |c⟩; by symmetry these equal the
        // amplitudes of hops applied to r itself.
        for site in 0..l - 1 {
            for (from, to) in [(site, site + 1), (site + 1, site)] {
                if let Some((target, amp)) = apply_hop(state, from, to)? {
                    let c = basis.rank(&target).expect("hops stay in the sector");
                    row.push((c, -amp));
                }
            }
        }
        row.sort_by_key(|&(c, _)| c);
        for &(c, v) in &row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
        pairs.push(state.pair_count());
    }
    Ok(SparseHamiltonian {
        basis,
        row_ptr,
        cols,
        vals,
        pairs,
    })
}

impl SparseHamiltonian {
    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn pair_diagonal(&self) -> &[f64] {
        &self.pairs
    }

    /// Nonzeros of row `r` of the hopping part as `(column, value)`.
    pub fn hop_row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    /// `out = (J · hop + U · pairs) v` for complex vectors.
    pub fn apply(&self, c: HubbardCouplings, v: &[Complex64], out: &mut [Complex64]) {
        let (j, u) = (c.tunneling, c.interaction);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += v[self.cols[k]] * self.vals[k];
            }
            *o = acc * j + v[r] * (u * self.pairs[r]);
        }
    }

    /// Real-vector variant of [`apply`](Self::apply).
    pub fn apply_real(&self, c: HubbardCouplings, v: &[f64], out: &mut [f64]) {
        let (j, u) = (c.tunneling, c.interaction);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += v[self.cols[k]] * self.vals[k];
            }
            *o = acc * j + v[r] * (u * self.pairs[r]);
        }
    }

    pub fn to_dense(&self, c: HubbardCouplings) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for (col, v) in self.hop_row(r) {
                m[(r, col)] += c.tunneling * v;
            }
            m[(r, r)] += c.interaction * self.pairs[r];
        }
        m
    }

    /// `⟨ψ|Ĥ|ψ⟩` for a normalized state.
    pub fn expectation(&self, c: HubbardCouplings, psi: &[Complex64]) -> f64 {
        let mut tmp = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(c, psi, &mut tmp);
        psi.iter().zip(&tmp).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Upper bound on the spectral radius (Gershgorin).
    pub fn norm_bound(&self, c: HubbardCouplings) -> f64 {
        (0..self.dim())
            .map(|r| {
                let off: f64 = self.hop_row(r).map(|(_, v)| v.abs()).sum();
                c.tunneling.abs() * off + c.interaction.abs() * self.pairs[r]
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_basis;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ham(l: usize, n: usize) -> SparseHamiltonian {
        build_hamiltonian(Arc::new(enumerate_basis(l, n).unwrap())).unwrap()
    }

    #[test]
    fn recoil_scales_for_rubidium() {
        let p = PhysicalParams::rubidium_842nm();
        let u = recoil_units(&p);
        // E_R/ħ and E_R/k_B evaluated independently: ħ k² / 2m and ħ² k² / 2m k_B.
        let k = 2.0 * PI / 842e-9;
        let m = 86.909 * 1.660_539_066_60e-27;
        let fs = 1.054_571_817e-34 * k * k / (2.0 * m);
        assert_relative_eq!(u.freq_scale, fs, max_relative = 1e-14);
        assert_relative_eq!(u.freq_scale, 2.0345e4, max_relative = 1e-4);
        assert_relative_eq!(u.temp_scale * 1e9, 155.40, max_relative = 1e-4);
        assert_relative_eq!(u.time_unit * u.freq_scale, 1.0, max_relative = 1e-15);

        let mut p2 = p;
        p2.wavelength *= 2.0;
        assert_relative_eq!(recoil_units(&p2).recoil_energy * 4.0, u.recoil_energy, max_relative = 1e-15);
    }

    #[test]
    fn couplings_at_reference_depths() {
        let p = PhysicalParams::rubidium_842nm();
        let units = recoil_units(&p);
        let c = hubbard_couplings(10.0, 30.0, &p);
        assert_relative_eq!(c.interaction * units.freq_scale, 12862.0, max_relative = 5e-4);
        assert_relative_eq!(c.interaction, 0.6321, max_relative = 2e-4);
        assert_relative_eq!(c.tunneling, 0.022739, max_relative = 1e-4);
        assert_relative_eq!(c.ratio(), 27.80, max_relative = 1e-3);
        assert_relative_eq!(tunneling_er(30.0), 5.0567e-4, max_relative = 1e-4);
        assert_relative_eq!(p.drive_frequency, c.interaction * units.freq_scale, max_relative = 1e-15);
    }

    #[test]
    fn ratio_inversion() {
        let p = PhysicalParams::rubidium_842nm();
        let v = depth_for_ratio(27.799, 30.0, &p).unwrap();
        assert!((v - 10.0).abs() < 1e-3);
        let c = hubbard_couplings(depth_for_ratio(5.0, 30.0, &p).unwrap(), 30.0, &p);
        assert_relative_eq!(c.ratio(), 5.0, max_relative = 1e-10);
    }

    #[test]
    fn drive_evaluation() {
        let s = DriveSegment::driven(0.0, 1.0, 10.0, 0.2, 3.0);
        assert_eq!(s.depth_at(0.0), 10.0);
        assert_relative_eq!(s.depth_at(PI / 6.0), 12.0, max_relative = 1e-15);
        let c = DriveSegment::constant(0.0, 1.0, 7.5);
        assert_eq!(c.depth_at(0.37), 7.5);
    }

    #[test]
    fn schedule_lookup_and_errors() {
        let p = PhysicalParams::rubidium_842nm();
        let s = DriveSchedule::drive_hold_freeze(&p, 0.1, 0.15, 30.0, 0.2).unwrap();
        assert_eq!(s.segments().len(), 3);
        assert_eq!(s.v0_at(0.0).unwrap(), 10.0);
        assert_eq!(s.v0_at(0.12).unwrap(), 10.0);
        assert_eq!(s.v0_at(0.15).unwrap(), 30.0);
        assert_eq!(s.v0_at(0.2).unwrap(), 30.0);
        assert!(matches!(s.v0_at(0.21), Err(Error::OutOfRange { .. })));
        assert!(matches!(s.v0_at(-1e-3), Err(Error::OutOfRange { .. })));

        let gap = DriveSchedule::new(vec![
            DriveSegment::constant(0.0, 1.0, 10.0),
            DriveSegment::constant(1.5, 2.0, 10.0),
        ]);
        assert!(matches!(gap, Err(Error::ScheduleGap { .. })));
        assert!(DriveSchedule::new(vec![DriveSegment::driven(0.0, 1.0, 10.0, 1.2, 1.0)]).is_err());
    }

    #[test]
    fn two_site_single_boson() {
        let h = ham(2, 1);
        let d = h.to_dense(HubbardCouplings::new(1.0, 1.0));
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        assert_eq!(h.pair_diagonal(), &[0.0, 0.0]);
        let ev = h.to_dense(HubbardCouplings::new(0.7, 0.0)).symmetric_eigenvalues();
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], -0.7, max_relative = 1e-14);
        assert_relative_eq!(ev[1], 0.7, max_relative = 1e-14);
    }

    #[test]
    fn two_site_two_bosons() {
        let h = ham(2, 2);
        assert_eq!(h.pair_diagonal(), &[1.0, 0.0, 1.0]);
        let d = h.to_dense(HubbardCouplings::new(1.0, 0.0));
        let s2 = 2f64.sqrt();
        assert_relative_eq!(d[(0, 1)], -s2);
        assert_relative_eq!(d[(1, 2)], -s2);
        assert_eq!(d[(0, 2)], 0.0);
    }

    #[test]
    fn pair_diagonal_values_are_triangular_numbers() {
        let h = ham(4, 5);
        for &x in h.pair_diagonal() {
            assert!(x >= 0.0 && x.fract() == 0.0);
        }
        assert_eq!(h.pair_diagonal()[0], 10.0);
    }

    #[test]
    fn hopping_part_is_exactly_symmetric() {
        let h = ham(6, 6);
        let d = h.to_dense(HubbardCouplings::new(1.0, 0.0));
        assert_eq!(d, d.transpose());
        // Each state connects only to states differing by one nearest-neighbour hop.
        for r in 0..h.dim() {
            let a = h.basis().state(r).as_slice();
            for (c, _) in h.hop_row(r) {
                let b = h.basis().state(c).as_slice();
                let diff: Vec<i64> = a.iter().zip(b).map(|(&x, &y)| x as i64 - y as i64).collect();
                let nz: Vec<usize> = (0..diff.len()).filter(|&i| diff[i] != 0).collect();
                assert_eq!(nz.len(), 2);
                assert_eq!(nz[1] - nz[0], 1);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn coupling_linearity(l in 2usize..=7, n in 1usize..=6, j in 0.0f64..2.0, u in 0.0f64..5.0, seed in any::<u64>()) {
            let h = ham(l, n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<Complex64> = (0..h.dim()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let mut full = vec![Complex64::default(); h.dim()];
            let mut hop = full.clone();
            let mut int = full.clone();
            h.apply(HubbardCouplings::new(j, u), &v, &mut full);
            h.apply(HubbardCouplings::new(1.0, 0.0), &v, &mut hop);
            h.apply(HubbardCouplings::new(0.0, 1.0), &v, &mut int);
            for k in 0..h.dim() {
                let expect = hop[k] * j + int[k] * u;
                prop_assert!((full[k] - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
                prop_assert!((int[k] - v[k] * h.pair_diagonal()[k]).norm() == 0.0);
            }
            // Hermiticity through ⟨w|H v⟩ = ⟨H w|v⟩.
            let w: Vec<Complex64> = (0..h.dim()).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let mut hw = vec![Complex64::default(); h.dim()];
            h.apply(HubbardCouplings::new(j, u), &w, &mut hw);
            let lhs: Complex64 = w.iter().zip(&full).map(|(a, b)| a.conj() * b).sum();
            let rhs: Complex64 = hw.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            prop_assert!((lhs - rhs).norm() < 1e-11 * (1.0 + lhs.norm()));
        }

        #[test]
        fn drive_depth_stays_positive(amp in 0.0f64..0.999, omega in 0.0f64..1e5, t in 0.0f64..1.0) {
            let s = DriveSegment::driven(0.0, 1.0, 10.0, amp, omega);
            prop_assert!(s.depth_at(t) > 0.0);
        }
    }
}
