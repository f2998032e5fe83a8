//! Sensitivity of the driven state to experimental imperfections.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::entanglement::{fidelity, negativity, postselect, PostselectedState};
use crate::error::{Error, Result};
use crate::fock::BipartiteIndexer;
use crate::propagator::{Propagator, Trajectory};
use crate::protocol::{Prepared, Protocol, ScanParameter};
use crate::quadrature::GaussianEnsemble;
use crate::spectral::DensityMatrix;

/// Observable sampled over a grid of parameter offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanCurve {
    pub parameter: String,
    /// Strictly increasing offsets, in parameter units.
    pub offsets: Vec<f64>,
    /// `None` marks a grid point whose computation failed.
    pub values: Vec<Option<f64>>,
    /// Unperturbed value of the parameter.
    pub nominal: f64,
}

impl ScanCurve {
    pub fn new(parameter: impl Into<String>, offsets: Vec<f64>, values: Vec<Option<f64>>, nominal: f64) -> Result<Self> {
        check_offsets(&offsets)?;
        if values.len() != offsets.len() {
            return Err(Error::invalid("one value per offset is required"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("scan values must be finite"));
        }
        Ok(Self {
            parameter: parameter.into(),
            offsets,
            values,
            nominal,
        })
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    fn present(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.offsets.iter().zip(&self.values).filter_map(|(&x, v)| v.map(|v| (x, v)))
    }
}

fn check_offsets(offsets: &[f64]) -> Result<()> {
    if offsets.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("offsets must be finite"));
    }
    if offsets.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("offsets must be strictly increasing"));
    }
    Ok(())
}

/// `n` evenly spaced offsets over `[-half_span, half_span]`; odd `n` includes 0.
pub fn symmetric_grid(half_span: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0];
    }
    let step = 2.0 * half_span / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let x = -half_span + k as f64 * step;
            if 2 * k + 1 == n {
                0.0
            } else {
                x
            }
        })
        .collect()
}

fn nominal_value(protocol: &Protocol, parameter: ScanParameter) -> f64 {
    let p = &protocol.params;
    match parameter {
        ScanParameter::Time => protocol.drive_end * 1e3,
        ScanParameter::Depth => p.depth,
        ScanParameter::TransverseDepth => p.transverse_depth,
        ScanParameter::DriveAmplitude => p.drive_amplitude,
        ScanParameter::DriveFrequency => p.drive_frequency,
    }
}

/// Fidelity between the postselected state at the end of the nominal drive
/// and the one obtained with `parameter` shifted by each offset.
///
/// Points run in parallel on the current rayon pool. A failing point is
/// logged and left as `None`.
pub fn fidelity_scan(protocol: &Protocol, parameter: ScanParameter, offsets: &[f64]) -> Result<ScanCurve> {
    check_offsets(offsets)?;
    let prepared = protocol.prepare()?;
    let reference = prepared.postselect(&protocol.driven_state(&prepared)?)?;
    let values = match parameter {
        ScanParameter::Time => time_scan(protocol, &prepared, &reference, offsets)?,
        _ => offsets
            .par_iter()
            .map(|&off| {
                if off == 0.0 {
                    return Some(1.0);
                }
                let perturbed = protocol.perturbed(parameter, off);
                let point = || -> Result<f64> {
                    let own;
                    let prep = match parameter {
                        ScanParameter::Depth | ScanParameter::TransverseDepth => {
                            own = perturbed.prepare()?;
                            &own
                        }
                        _ => &prepared,
                    };
                    let state = prep.postselect(&perturbed.driven_state(prep)?)?;
                    fidelity(&reference, &state)
                };
                point()
                    .map_err(|e| log::warn!("{} offset {off}: {e}", parameter.name()))
                    .ok()
            })
            .collect(),
    };
    ScanCurve::new(parameter.name(), offsets.to_vec(), values, nominal_value(protocol, parameter))
}

fn time_scan(
    protocol: &Protocol,
    prepared: &Prepared,
    reference: &PostselectedState,
    offsets_ms: &[f64],
) -> Result<Vec<Option<f64>>> {
    let t0 = protocol.drive_end;
    let times: Vec<f64> = offsets_ms.iter().map(|o| t0 + o * 1e-3).collect();
    let valid: Vec<f64> = times.iter().copied().filter(|&t| t >= 0.0).collect();
    let until = valid.last().copied().unwrap_or(t0).max(t0);
    let schedule = protocol.drive_only_schedule(until)?;
    let traj = Propagator::new(&prepared.hamiltonian, &schedule, &protocol.params, prepared.units, protocol.evolve)
        .evolve(&prepared.ground.state, &valid)?;
    Ok(offsets_ms
        .iter()
        .zip(&times)
        .map(|(&off, &t)| {
            if off == 0.0 {
                return Some(1.0);
            }
            let psi = traj.state_at(t)?;
            prepared
                .postselect(psi)
                .and_then(|s| fidelity(reference, &s))
                .map_err(|e| log::warn!("t offset {off}: {e}"))
                .ok()
        })
        .collect())
}

/// Full width at half maximum of the peak at offset 0.
pub fn fwhm(curve: &ScanCurve) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve.present().collect();
    let centre = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.abs().total_cmp(&b.1 .0.abs()))
        .map(|(i, _)| i)
        .ok_or(Error::InsufficientPoints { need: 3, got: 0 })?;
    let half = 0.5 * pts[centre].1;
    let crossing = |range: &mut dyn Iterator<Item = usize>, side: &'static str| -> Result<f64> {
        let mut prev = pts[centre];
        for i in range {
            let (x, y) = pts[i];
            if y <= half {
                return Ok(prev.0 + (half - prev.1) * (x - prev.0) / (y - prev.1));
            }
            prev = (x, y);
        }
        Err(Error::NoCrossing { side })
    };
    let right = crossing(&mut (centre + 1..pts.len()), "right")?;
    let left = crossing(&mut (0..centre).rev(), "left")?;
    Ok(right - left)
}

/// Least-squares fit of `N = n0 + c2·τ²` to the points with `τ ≤ max_tau`.
pub fn taylor_fit(curve: &ScanCurve, max_tau: f64) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = curve.present().filter(|&(t, _)| t.abs() <= max_tau).collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientPoints {
            need: 4,
            got: pts.len(),
        });
    }
    let (mut s0, mut s1, mut s2, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        let x = t * t;
        s0 += 1.0;
        s1 += x;
        s2 += x * x;
        b0 += y;
        b1 += x * y;
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() <= f64::EPSILON * s0 * s2 {
        return Err(Error::invalid("fit points do not span distinct values of tau"));
    }
    Ok(((s2 * b0 - s1 * b1) / det, (s0 * b1 - s1 * b0) / det))
}

/// Smallest rule accepted by [`gaussian_mixed_state`].
pub const MIN_NODES: usize = 21;
/// Largest negativity change tolerated when the rule is doubled.
pub const NODE_DOUBLING_TOL: f64 = 1e-4;

/// How the members of the timing ensemble are weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnsembleWeighting {
    /// Gaussian weights on the normalized postselected states.
    #[default]
    Literal,
    /// Gaussian weights times the postselection probability, renormalized.
    ProbabilityWeighted,
}

#[derive(Clone, Debug)]
pub struct MixedState {
    pub rho: DensityMatrix,
    pub negativity: f64,
    /// Nodes of the rule `rho` was built from.
    pub nodes: usize,
    /// Negativity change from the rule with half as many nodes.
    pub node_change: f64,
}

/// `ρ(τ)`: postselected states averaged over drive durations normally
/// distributed around `t0` with standard deviation `tau` (s).
///
/// States at the quadrature times are propagated from the latest snapshot of
/// `traj` not after the earliest node; `propagator` must integrate the same
/// schedule. The rule with `nodes` is compared against the one with twice as
/// many, which is returned.
pub fn gaussian_mixed_state(
    traj: &Trajectory,
    propagator: &Propagator<'_>,
    indexer: &Arc<BipartiteIndexer>,
    t0: f64,
    tau: f64,
    nodes: usize,
    weighting: EnsembleWeighting,
) -> Result<MixedState> {
    if nodes < MIN_NODES {
        return Err(Error::invalid(format!("at least {MIN_NODES} nodes are required, got {nodes}")));
    }
    if *propagator.schedule != traj.schedule {
        return Err(Error::invalid("propagator and trajectory follow different schedules"));
    }
    if tau == 0.0 {
        let rho = ensemble_state(traj, propagator, indexer, &[t0], &[1.0], weighting)?;
        let negativity = negativity(&rho)?;
        return Ok(MixedState {
            rho,
            negativity,
            nodes: 1,
            node_change: 0.0,
        });
    }
    let coarse = ensemble(t0, tau, nodes)?;
    let fine = ensemble(t0, tau, 2 * nodes)?;
    let (start, end) = fine.span();
    if start < traj.sample_times[0] || end > traj.schedule.end() {
        return Err(Error::Coverage {
            need_start: start,
            need_end: end,
        });
    }
    let n_coarse = negativity(&ensemble_state(
        traj,
        propagator,
        indexer,
        &coarse.node_times,
        &coarse.node_weights,
        weighting,
    )?)?;
    let rho = ensemble_state(traj, propagator, indexer, &fine.node_times, &fine.node_weights, weighting)?;
    let n_fine = negativity(&rho)?;
    let node_change = (n_fine - n_coarse).abs();
    if node_change > NODE_DOUBLING_TOL {
        return Err(Error::NonConvergence {
            what: "timing-ensemble quadrature",
            detail: format!("negativity changed by {node_change:.3e} from {nodes} to {} nodes", 2 * nodes),
        });
    }
    Ok(MixedState {
        rho,
        negativity: n_fine,
        nodes: 2 * nodes,
        node_change,
    })
}

/// Doubles the rule from `nodes` until [`gaussian_mixed_state`] converges or
/// the rule would exceed `max_nodes`.
#[allow(clippy::too_many_arguments)]
pub fn converged_mixed_state(
    traj: &Trajectory,
    propagator: &Propagator<'_>,
    indexer: &Arc<BipartiteIndexer>,
    t0: f64,
    tau: f64,
    mut nodes: usize,
    max_nodes: usize,
    weighting: EnsembleWeighting,
) -> Result<MixedState> {
    nodes = nodes.max(MIN_NODES);
    loop {
        match gaussian_mixed_state(traj, propagator, indexer, t0, tau, nodes, weighting) {
            Err(Error::NonConvergence { .. }) if 4 * nodes <= max_nodes => nodes *= 2,
            other => return other,
        }
    }
}

fn ensemble(t0: f64, tau: f64, nodes: usize) -> Result<GaussianEnsemble> {
    let mut e = GaussianEnsemble::new(t0, tau, nodes)?;
    // Nodes closer than the time resolution collapse into one.
    let mut times: Vec<f64> = Vec::with_capacity(e.len());
    let mut weights: Vec<f64> = Vec::with_capacity(e.len());
    for (&t, &w) in e.node_times.iter().zip(&e.node_weights) {
        match times.last() {
            Some(&last) if !(t > last) => *weights.last_mut().unwrap() += w,
            _ => {
                times.push(t);
                weights.push(w);
            }
        }
    }
    e.node_times = times;
    e.node_weights = weights;
    Ok(e)
}

fn ensemble_state(
    traj: &Trajectory,
    propagator: &Propagator<'_>,
    indexer: &Arc<BipartiteIndexer>,
    times: &[f64],
    weights: &[f64],
    weighting: EnsembleWeighting,
) -> Result<DensityMatrix> {
    let first = times[0];
    let k = traj.sample_times.partition_point(|&s| s <= first);
    if k == 0 {
        return Err(Error::Coverage {
            need_start: first,
            need_end: times[times.len() - 1],
        });
    }
    let nodes = propagator.evolve_from(&traj.states[k - 1], traj.sample_times[k - 1], times)?;
    let (dl, dr) = (indexer.dim_left(), indexer.dim_right());
    let mut rho = DMatrix::<Complex64>::zeros(dl * dr, dl * dr);
    let mut total = 0.0;
    for (psi, &w) in nodes.states.iter().zip(weights) {
        let ps = postselect(psi, indexer)?;
        let w = match weighting {
            EnsembleWeighting::Literal => w,
            EnsembleWeighting::ProbabilityWeighted => w * ps.probability(),
        };
        let v = ps.to_vector();
        rho.gerc(Complex64::new(w, 0.0), &v, &v, Complex64::new(1.0, 0.0));
        total += w;
    }
    rho /= Complex64::new(total, 0.0);
    let h = rho.adjoint();
    rho = (rho + h) * Complex64::new(0.5, 0.0);
    Ok(DensityMatrix::new(rho, Some((dl, dr))))
}
