//! The drive-then-freeze experiment: prepare the static ground state, modulate
//! the lattice depth, hold, then raise the lattice to stop the dynamics.

use std::sync::Arc;

use crate::entanglement::{entropy_of_entanglement, postselect, PostselectedState};
use crate::error::{Error, Result};
use crate::fock::{balanced_split, split_sector, BipartiteIndexer, SectorBasis};
use crate::lattice::{
    build_hamiltonian, hubbard_couplings, recoil_units, DriveSchedule, DriveSegment, PhysicalParams,
    SparseHamiltonian, UnitSystem,
};
use crate::propagator::{EvolveOptions, Propagator, Trajectory};
use crate::spectral::{ground_state, GroundState, GroundStateOptions, PureState};

/// A perturbable experimental knob.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScanParameter {
    /// Drive duration, offsets in ms.
    Time,
    /// Mean depth `V`, offsets in `E_R`.
    Depth,
    /// Transverse depth `V⊥`, offsets in `E_R`.
    TransverseDepth,
    /// Relative amplitude `dV`.
    DriveAmplitude,
    /// Drive frequency `ω`, offsets in rad/s.
    DriveFrequency,
}

impl ScanParameter {
    pub const ALL: [ScanParameter; 5] = [
        ScanParameter::Time,
        ScanParameter::Depth,
        ScanParameter::TransverseDepth,
        ScanParameter::DriveAmplitude,
        ScanParameter::DriveFrequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::Time => "t",
            ScanParameter::Depth => "V",
            ScanParameter::TransverseDepth => "V_perp",
            ScanParameter::DriveAmplitude => "dV",
            ScanParameter::DriveFrequency => "omega",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            ScanParameter::Time => "ms",
            ScanParameter::Depth | ScanParameter::TransverseDepth => "E_R",
            ScanParameter::DriveAmplitude => "1",
            ScanParameter::DriveFrequency => "rad/s",
        }
    }
}

impl std::str::FromStr for ScanParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScanParameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scan parameter `{s}` (expected t, V, V_perp, dV or omega)")))
    }
}

/// Everything needed to reproduce one run of the experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    pub sites: usize,
    pub bosons: usize,
    pub params: PhysicalParams,
    /// End of the modulation (s).
    pub drive_end: f64,
    /// End of the static hold at the mean depth (s).
    pub hold_end: f64,
    /// Depth after the hold, in `E_R`.
    pub freeze_depth: f64,
    /// End of the run (s).
    pub end: f64,
    pub ground: GroundStateOptions,
    pub evolve: EvolveOptions,
}

impl Protocol {
    /// 100 ms of drive, a 50 ms hold and 50 ms at 30 `E_R`.
    pub fn standard(sites: usize, bosons: usize, params: PhysicalParams) -> Self {
        Self {
            sites,
            bosons,
            params,
            drive_end: 0.1,
            hold_end: 0.15,
            freeze_depth: 30.0,
            end: 0.2,
            ground: GroundStateOptions::default(),
            evolve: EvolveOptions::default(),
        }
    }

    pub fn schedule(&self) -> Result<DriveSchedule> {
        DriveSchedule::drive_hold_freeze(&self.params, self.drive_end, self.hold_end, self.freeze_depth, self.end)
    }

    /// Modulation only, from 0 to `until` (s).
    pub fn drive_only_schedule(&self, until: f64) -> Result<DriveSchedule> {
        let p = &self.params;
        DriveSchedule::new(vec![DriveSegment::driven(0.0, until, p.depth, p.drive_amplitude, p.drive_frequency)])
    }

    /// Copy with one knob moved by `offset` (units of [`ScanParameter::unit`]).
    pub fn perturbed(&self, parameter: ScanParameter, offset: f64) -> Protocol {
        let mut p = self.clone();
        match parameter {
            ScanParameter::Time => p.drive_end += offset * 1e-3,
            ScanParameter::Depth => p.params.depth += offset,
            ScanParameter::TransverseDepth => p.params.transverse_depth += offset,
            ScanParameter::DriveAmplitude => p.params.drive_amplitude += offset,
            ScanParameter::DriveFrequency => p.params.drive_frequency += offset,
        }
        p
    }

    pub fn prepare(&self) -> Result<Prepared> {
        self.params.validate()?;
        let basis = Arc::new(SectorBasis::new(self.sites, self.bosons)?);
        let hamiltonian = build_hamiltonian(Arc::clone(&basis))?;
        let units = recoil_units(&self.params);
        let couplings = hubbard_couplings(self.params.depth, self.params.transverse_depth, &self.params);
        let ground = ground_state(&hamiltonian, couplings, self.ground)?;
        let indexer = Arc::new(split_sector(&basis, balanced_split(self.bosons))?);
        let mirror = if self.bosons % 2 == 1 {
            Some(Arc::new(split_sector(&basis, self.bosons - balanced_split(self.bosons))?))
        } else {
            None
        };
        Ok(Prepared {
            basis,
            hamiltonian,
            units,
            ground,
            indexer,
            mirror,
        })
    }

    /// Runs the full schedule and records the state at `sample_times` (s).
    pub fn run(&self, prepared: &Prepared, sample_times: &[f64]) -> Result<Trajectory> {
        let schedule = self.schedule()?;
        Propagator::new(&prepared.hamiltonian, &schedule, &self.params, prepared.units, self.evolve)
            .evolve(&prepared.ground.state, sample_times)
    }

    /// State after modulating for exactly `drive_end`.
    pub fn driven_state(&self, prepared: &Prepared) -> Result<PureState> {
        if self.drive_end <= 0.0 {
            return Ok(prepared.ground.state.clone());
        }
        let schedule = self.drive_only_schedule(self.drive_end)?;
        let traj = Propagator::new(&prepared.hamiltonian, &schedule, &self.params, prepared.units, self.evolve)
            .evolve(&prepared.ground.state, &[self.drive_end])?;
        Ok(traj.states.into_iter().next().expect("one sample requested"))
    }
}

/// Static-system data shared by every run of a protocol.
#[derive(Debug)]
pub struct Prepared {
    pub basis: Arc<SectorBasis>,
    pub hamiltonian: SparseHamiltonian,
    pub units: UnitSystem,
    pub ground: GroundState,
    /// `(⌊N/2⌋, ⌈N/2⌉)` split used for entanglement.
    pub indexer: Arc<BipartiteIndexer>,
    /// `(⌈N/2⌉, ⌊N/2⌋)` split for odd `N`.
    pub mirror: Option<Arc<BipartiteIndexer>>,
}

/// Entanglement observables of one snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub entropy_bits: f64,
    /// Weight of the `(⌊N/2⌋, ⌈N/2⌉)` sector.
    pub probability: f64,
    /// Weight of both most-even splits; equals `probability` for even `N`.
    pub mirror_sum_probability: f64,
    pub norm_drift: f64,
}

impl Prepared {
    pub fn postselect(&self, psi: &PureState) -> Result<PostselectedState> {
        postselect(psi, &self.indexer)
    }

    pub fn observe(&self, psi: &PureState) -> Result<Observation> {
        let ps = self.postselect(psi)?;
        let mirror = match &self.mirror {
            Some(m) => m.entries().iter().map(|&(p, _, _)| psi.amplitudes()[p].norm_sqr()).sum(),
            None => 0.0,
        };
        Ok(Observation {
            entropy_bits: entropy_of_entanglement(&ps),
            probability: ps.probability(),
            mirror_sum_probability: ps.probability() + mirror,
            norm_drift: (psi.norm() - 1.0).abs(),
        })
    }
}

/// `n` equally spaced times from `0` to `end` inclusive (s), at `cadence` (s).
pub fn snapshot_times(end: f64, cadence: f64) -> Vec<f64> {
    let n = (end / cadence + 1e-9).floor() as usize;
    let mut t: Vec<f64> = (0..=n).map(|k| k as f64 * cadence).collect();
    if end - t[n] > 1e-12 * end {
        t.push(end);
    }
    t
}
