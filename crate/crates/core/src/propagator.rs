//! Time integration of `i ∂ψ/∂t = Ĥ(J(V₀(t)), U(V₀(t))) ψ`.
//!
//! Driven segments use the fourth-order, two-exponential commutator-free
//! Magnus scheme; each exponential is applied with [`expm_apply`]. Static
//! segments are exact up to the Krylov tolerance. Step boundaries always
//! coincide with segment edges and with the requested sample times.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::krylov::{expm_apply, KrylovWorkspace};
use crate::lattice::{hubbard_couplings, DriveSchedule, DriveSegment, HubbardCouplings, PhysicalParams, SparseHamiltonian, UnitSystem};
use crate::spectral::{norm, PureState};

const SQRT3: f64 = 1.732_050_807_568_877_2;
// Gauss-Legendre nodes on [0, 1] and the mixing weights of the scheme.
const C1: f64 = 0.5 - SQRT3 / 6.0;
const C2: f64 = 0.5 + SQRT3 / 6.0;
const A1: f64 = 0.25 + SQRT3 / 6.0;
const A2: f64 = 0.25 - SQRT3 / 6.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConvergenceCheck {
    /// Repeat the run with half the step and require every snapshot of the
    /// two runs to agree in fidelity to within `tol`. On failure the step is
    /// halved again, at most `max_refinements` times.
    StepHalving { tol: f64, max_refinements: u32 },
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Magnus steps per drive period on driven segments.
    pub steps_per_period: usize,
    /// Step on static segments in units of `ħ/E_R`.
    pub static_step: f64,
    /// Local error target of each Krylov exponential.
    pub krylov_tol: f64,
    pub convergence: ConvergenceCheck,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            steps_per_period: 200,
            static_step: 0.1,
            krylov_tol: 1e-12,
            convergence: ConvergenceCheck::StepHalving {
                tol: 1e-8,
                max_refinements: 3,
            },
        }
    }
}

impl EvolveOptions {
    pub fn unchecked(self) -> Self {
        Self {
            convergence: ConvergenceCheck::Skip,
            ..self
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntegratorReport {
    pub steps: u64,
    pub matvecs: u64,
    pub max_krylov_dim: usize,
    /// Largest `|‖ψ‖ − 1|` over all snapshots.
    pub max_norm_drift: f64,
    /// Largest fidelity deficit between the final run and its coarser
    /// counterpart, when the step-halving check ran.
    pub halving_fidelity_error: Option<f64>,
    pub steps_per_period: usize,
    pub converged: bool,
}

/// Snapshots of one propagation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Sample times (s).
    pub sample_times: Vec<f64>,
    pub states: Vec<PureState>,
    pub schedule: DriveSchedule,
    pub report: IntegratorReport,
}

impl Trajectory {
    /// Index of the snapshot taken exactly at `t` (to within `1e-12` relative).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1e-9);
        let i = self.sample_times.partition_point(|&s| s < t - tol);
        (i < self.sample_times.len() && (self.sample_times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn state_at(&self, t: f64) -> Option<&PureState> {
        self.index_of(t).map(|i| &self.states[i])
    }
}

/// Integrates one Hamiltonian under one schedule.
#[derive(Clone, Copy, Debug)]
pub struct Propagator<'a> {
    pub hamiltonian: &'a SparseHamiltonian,
    pub schedule: &'a DriveSchedule,
    pub params: &'a PhysicalParams,
    pub units: UnitSystem,
    pub options: EvolveOptions,
}

impl<'a> Propagator<'a> {
    pub fn new(
        hamiltonian: &'a SparseHamiltonian,
        schedule: &'a DriveSchedule,
        params: &'a PhysicalParams,
        units: UnitSystem,
        options: EvolveOptions,
    ) -> Self {
        Self {
            hamiltonian,
            schedule,
            params,
            units,
            options,
        }
    }

    fn couplings(&self, seg: &DriveSegment, t_internal: f64) -> HubbardCouplings {
        let depth = seg.depth_at(self.units.internal_to_seconds(t_internal));
        hubbard_couplings(depth, self.params.transverse_depth, self.params)
    }

    /// Evolves `psi0` from the start of the schedule.
    pub fn evolve(&self, psi0: &PureState, sample_times: &[f64]) -> Result<Trajectory> {
        self.evolve_from(psi0, self.schedule.start(), sample_times)
    }

    /// Evolves `psi` given at time `t_start` (s) and records it at every
    /// sample time (s).
    pub fn evolve_from(&self, psi: &PureState, t_start: f64, sample_times: &[f64]) -> Result<Trajectory> {
        if psi.basis().dim() != self.hamiltonian.dim() {
            return Err(Error::invalid("state and Hamiltonian live in different sectors"));
        }
        if (psi.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("initial state norm {} is not 1", psi.norm())));
        }
        self.schedule.segment_index(t_start)?;
        for w in sample_times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid("sample times must be strictly increasing"));
            }
        }
        if let (Some(&first), Some(&last)) = (sample_times.first(), sample_times.last()) {
            if first < t_start || last > self.schedule.end() {
                let bad = if first < t_start { first } else { last };
                return Err(Error::OutOfRange {
                    t: bad,
                    start: t_start,
                    end: self.schedule.end(),
                });
            }
        }

        match self.options.convergence {
            ConvergenceCheck::Skip => {
                let (states, mut report) = self.run(psi, t_start, sample_times, 1)?;
                report.converged = true;
                Ok(self.finish(sample_times, states, report))
            }
            ConvergenceCheck::StepHalving { tol, max_refinements } => {
                let (mut coarse, _) = self.run(psi, t_start, sample_times, 1)?;
                let mut worst = f64::NAN;
                for level in 1..=max_refinements {
                    let (fine, mut report) = self.run(psi, t_start, sample_times, 1 << level)?;
                    worst = coarse
                        .iter()
                        .zip(&fine)
                        .map(|(a, b)| 1.0 - a.overlap_sqr(b))
                        .fold(0.0, f64::max);
                    if worst < tol {
                        report.halving_fidelity_error = Some(worst);
                        report.converged = true;
                        return Ok(self.finish(sample_times, fine, report));
                    }
                    coarse = fine;
                }
                Err(Error::NonConvergence {
                    what: "time integration",
                    detail: format!("step-halving fidelity error {worst:e} exceeds {tol:e} after {max_refinements} refinements"),
                })
            }
        }
    }

    fn finish(&self, sample_times: &[f64], states: Vec<PureState>, report: IntegratorReport) -> Trajectory {
        Trajectory {
            sample_times: sample_times.to_vec(),
            states,
            schedule: self.schedule.clone(),
            report,
        }
    }

    fn run(
        &self,
        psi0: &PureState,
        t_start: f64,
        sample_times: &[f64],
        refine: usize,
    ) -> Result<(Vec<PureState>, IntegratorReport)> {
        let basis = psi0.basis();
        let mut psi: Vec<Complex64> = psi0.amplitudes().to_vec();
        let mut ws = KrylovWorkspace::new();
        let mut report = IntegratorReport {
            steps_per_period: self.options.steps_per_period * refine,
            ..Default::default()
        };
        let mut states = Vec::with_capacity(sample_times.len());
        let mut t = t_start;
        let mut pending = sample_times.iter().copied().peekable();

        while let Some(&target) = pending.peek() {
            if target <= t {
                states.push(PureState::from_raw(basis.clone(), psi.clone()));
                report.max_norm_drift = report.max_norm_drift.max((norm(&psi) - 1.0).abs());
                pending.next();
                continue;
            }
            let seg_idx = self.schedule.segment_index(t)?;
            let seg = self.schedule.segments()[seg_idx];
            let stop = target.min(seg.end);
            self.advance(&seg, t, stop, refine, &mut psi, &mut ws, &mut report)?;
            t = stop;
        }
        report.matvecs = ws.matvecs;
        report.max_krylov_dim = ws.max_dim;
        Ok((states, report))
    }

    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        seg: &DriveSegment,
        from: f64,
        to: f64,
        refine: usize,
        psi: &mut [Complex64],
        ws: &mut KrylovWorkspace,
        report: &mut IntegratorReport,
    ) -> Result<()> {
        let a = self.units.seconds_to_internal(from);
        let b = self.units.seconds_to_internal(to);
        let span = b - a;
        let tol = self.options.krylov_tol;
        if seg.is_static() {
            let c = self.couplings(seg, a);
            let base = self.options.static_step / refine as f64;
            let n = ((span / base) - 1e-9).ceil().max(1.0) as u64;
            let dt = span / n as f64;
            for _ in 0..n {
                expm_apply(self.hamiltonian, c, psi, dt, tol, ws)?;
            }
            report.steps += n;
        } else {
            let omega = self.units.frequency_to_internal(seg.omega);
            let period = 2.0 * std::f64::consts::PI / omega;
            let base = period / (self.options.steps_per_period * refine) as f64;
            let n = ((span / base) - 1e-9).ceil().max(1.0) as u64;
            let dt = span / n as f64;
            for k in 0..n {
                let t0 = a + k as f64 * dt;
                let h1 = self.couplings(seg, t0 + C1 * dt);
                let h2 = self.couplings(seg, t0 + C2 * dt);
                let first = HubbardCouplings::new(
                    A1 * h1.tunneling + A2 * h2.tunneling,
                    A1 * h1.interaction + A2 * h2.interaction,
                );
                let second = HubbardCouplings::new(
                    A2 * h1.tunneling + A1 * h2.tunneling,
                    A2 * h1.interaction + A1 * h2.interaction,
                );
                expm_apply(self.hamiltonian, first, psi, dt, tol, ws)?;
                expm_apply(self.hamiltonian, second, psi, dt, tol, ws)?;
            }
            report.steps += n;
        }
        Ok(())
    }
}

/// Free-function form of [`Propagator::evolve`].
pub fn evolve(
    psi0: &PureState,
    hamiltonian: &SparseHamiltonian,
    schedule: &DriveSchedule,
    units: UnitSystem,
    params: &PhysicalParams,
    sample_times: &[f64],
    options: EvolveOptions,
) -> Result<Trajectory> {
    Propagator::new(hamiltonian, schedule, params, units, options).evolve(psi0, sample_times)
}
