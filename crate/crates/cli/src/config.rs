//! Scenario files.

use std::path::{Path, PathBuf};

use latticesim::lattice::{DriveSchedule, DriveSegment, PhysicalParams, ATOMIC_MASS_UNIT};
use latticesim::propagator::{ConvergenceCheck, EvolveOptions};
use latticesim::protocol::{Protocol, ScanParameter};
use latticesim::robustness::{symmetric_grid, EnsembleWeighting};
use latticesim::spectral::{GroundStateOptions, DENSE_DIMENSION_CAP};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub physical: Physical,
    pub system: System,
    pub schedule: Schedule,
    pub scan: Scan,
    pub numerics: Numerics,
    pub output: Output,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physical {
    pub wavelength_nm: f64,
    pub scattering_length_nm: f64,
    pub mass_u: f64,
    /// `E_R`
    pub depth: f64,
    /// `E_R`
    pub transverse_depth: f64,
    pub drive_amplitude: f64,
    /// rad/s; `U/ħ` at `depth` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_frequency: Option<f64>,
}

impl Default for Physical {
    fn default() -> Self {
        Self {
            wavelength_nm: 842.0,
            scattering_length_nm: 5.45,
            mass_u: 86.909,
            depth: 10.0,
            transverse_depth: 30.0,
            drive_amplitude: 0.2,
            drive_frequency: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct System {
    /// `[L, N]` pairs.
    pub cases: Vec<[usize; 2]>,
}

impl Default for System {
    fn default() -> Self {
        Self { cases: vec![[6, 6]] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration_ms: f64,
    /// `E_R`; the physical depth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
    #[serde(default)]
    pub driven: bool,
    /// Overrides the physical drive amplitude on this segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Overrides the physical drive frequency on this segment (rad/s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

impl Default for Schedule {
    fn default() -> Self {
        let seg = |duration_ms, depth, driven| Segment {
            duration_ms,
            depth,
            driven,
            amplitude: None,
            omega: None,
        };
        Self {
            segments: vec![seg(100.0, None, true), seg(50.0, None, false), seg(50.0, Some(30.0), false)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scan {
    /// Grid of the ground-state scan.
    pub u_over_j: Vec<f64>,
    /// Grid of the thermal scan; realized by tuning the depth at fixed `V⊥`.
    pub thermal_u_over_j: Vec<f64>,
    pub temperatures_nk: Vec<f64>,
    /// One of t, V, V_perp, dV, omega.
    pub parameter: String,
    pub points: usize,
    /// Half-width of the offset grid; four times the typical width when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_span: Option<f64>,
    pub tau_ms: Vec<f64>,
}

impl Default for Scan {
    fn default() -> Self {
        let mut u_over_j: Vec<f64> = (0..=50).map(f64::from).collect();
        u_over_j.push(1e4);
        let mut tau_ms: Vec<f64> = (0..=10).map(|k| f64::from(k) * 0.002).collect();
        tau_ms.extend([0.03, 0.05, 0.1, 0.2, 0.5, 1.0]);
        Self {
            u_over_j,
            thermal_u_over_j: (1..=10).map(|k| f64::from(k) * 5.0).collect(),
            temperatures_nk: vec![0.0, 40.0, 80.0],
            parameter: "t".into(),
            points: 81,
            half_span: None,
            tau_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Worker threads; all cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub steps_per_period: usize,
    /// `ħ/E_R`
    pub static_step: f64,
    pub krylov_tol: f64,
    /// Fidelity tolerance of the step-halving check; 0 disables it.
    pub halving_tol: f64,
    pub max_refinements: u32,
    pub ground_tol: f64,
    pub seed: u64,
    pub dense_cap: usize,
    pub quadrature_nodes: usize,
    pub max_quadrature_nodes: usize,
    pub probability_weighted: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        let ev = EvolveOptions::default();
        let (halving_tol, max_refinements) = match ev.convergence {
            ConvergenceCheck::StepHalving { tol, max_refinements } => (tol, max_refinements),
            ConvergenceCheck::Skip => (0.0, 0),
        };
        let gs = GroundStateOptions::default();
        Self {
            threads: None,
            steps_per_period: ev.steps_per_period,
            static_step: ev.static_step,
            krylov_tol: ev.krylov_tol,
            halving_tol,
            max_refinements,
            ground_tol: gs.tol,
            seed: gs.seed,
            dense_cap: DENSE_DIMENSION_CAP,
            quadrature_nodes: 32,
            max_quadrature_nodes: 8192,
            probability_weighted: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub directory: PathBuf,
    pub snapshot_ms: f64,
    /// Significant digits; shortest round-trip form when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<usize>,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            snapshot_ms: 0.5,
            precision: None,
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads `path` (defaults when `None`) and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| config_error(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        let name = path.map_or_else(|| "<defaults>".to_string(), |p| p.display().to_string());
        // Parsing the typed form first reports the offending line and field.
        toml::from_str::<ExperimentConfig>(&text).map_err(|e| config_error(format!("{name}: {e}")))?;
        let mut table: toml::Table = text.parse().map_err(|e| config_error(format!("{name}: {e}")))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let cfg: ExperimentConfig = ExperimentConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| config_error(format!("{name}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.system.cases.is_empty() {
            return Err(config_error("system.cases: at least one [L, N] pair is required"));
        }
        for &[l, n] in &self.system.cases {
            if l < 2 {
                return Err(config_error(format!("system.cases: L = {l} needs at least two sites")));
            }
            if n == 0 {
                return Err(config_error("system.cases: N must be positive"));
            }
        }
        if self.schedule.segments.is_empty() {
            return Err(config_error("schedule.segments: at least one segment is required"));
        }
        if self.schedule.segments.iter().any(|s| !(s.duration_ms > 0.0)) {
            return Err(config_error("schedule.segments: durations must be positive"));
        }
        if !(self.output.snapshot_ms > 0.0) {
            return Err(config_error("output.snapshot_ms must be positive"));
        }
        let a = self.physical.drive_amplitude;
        if !((0.0..1.0).contains(&a)) {
            return Err(config_error(format!("physical.drive_amplitude = {a} must lie in [0, 1)")));
        }
        if self.scan.points == 0 {
            return Err(config_error("scan.points must be positive"));
        }
        if self.scan.tau_ms.iter().any(|t| !(*t >= 0.0)) {
            return Err(config_error("scan.tau_ms: values must be non-negative"));
        }
        if self.numerics.threads == Some(0) {
            return Err(config_error("numerics.threads must be positive"));
        }
        self.scan_parameter()?;
        self.params().validate().map_err(|e| config_error(format!("physical: {e}")))?;
        Ok(())
    }

    pub fn params(&self) -> PhysicalParams {
        let p = &self.physical;
        let mut params = PhysicalParams {
            wavelength: p.wavelength_nm * 1e-9,
            scattering_length: p.scattering_length_nm * 1e-9,
            mass: p.mass_u * ATOMIC_MASS_UNIT,
            depth: p.depth,
            transverse_depth: p.transverse_depth,
            drive_amplitude: p.drive_amplitude,
            drive_frequency: 0.0,
        };
        params.drive_frequency = p.drive_frequency.unwrap_or_else(|| params.resonant_frequency());
        params
    }

    pub fn scan_parameter(&self) -> Result<ScanParameter, CliError> {
        self.scan
            .parameter
            .parse()
            .map_err(|e| config_error(format!("scan.parameter: {e}")))
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        let n = &self.numerics;
        EvolveOptions {
            steps_per_period: n.steps_per_period,
            static_step: n.static_step,
            krylov_tol: n.krylov_tol,
            convergence: if n.halving_tol > 0.0 {
                ConvergenceCheck::StepHalving {
                    tol: n.halving_tol,
                    max_refinements: n.max_refinements,
                }
            } else {
                ConvergenceCheck::Skip
            },
        }
    }

    pub fn ground_options(&self) -> GroundStateOptions {
        GroundStateOptions {
            tol: self.numerics.ground_tol,
            seed: self.numerics.seed,
            ..GroundStateOptions::default()
        }
    }

    pub fn weighting(&self) -> EnsembleWeighting {
        if self.numerics.probability_weighted {
            EnsembleWeighting::ProbabilityWeighted
        } else {
            EnsembleWeighting::Literal
        }
    }

    /// The configured segments as a schedule in seconds.
    pub fn schedule(&self, params: &PhysicalParams) -> Result<DriveSchedule, CliError> {
        let (mut t, mut elapsed_ms) = (0.0, 0.0);
        let mut segs = Vec::with_capacity(self.schedule.segments.len());
        for s in &self.schedule.segments {
            elapsed_ms += s.duration_ms;
            let end = elapsed_ms / 1e3;
            let depth = s.depth.unwrap_or(params.depth);
            segs.push(if s.driven {
                DriveSegment::driven(
                    t,
                    end,
                    depth,
                    s.amplitude.unwrap_or(params.drive_amplitude),
                    s.omega.unwrap_or(params.drive_frequency),
                )
            } else {
                DriveSegment::constant(t, end, depth)
            });
            t = end;
        }
        DriveSchedule::new(segs).map_err(|e| config_error(format!("schedule.segments: {e}")))
    }

    /// Experiment for one case; the drive lasts as long as the first segment.
    pub fn protocol(&self, sites: usize, bosons: usize) -> Result<Protocol, CliError> {
        let first = &self.schedule.segments[0];
        if !first.driven {
            return Err(config_error("schedule.segments: the first segment must be driven"));
        }
        let mut protocol = Protocol::standard(sites, bosons, self.params());
        protocol.drive_end = first.duration_ms / 1e3;
        protocol.ground = self.ground_options();
        protocol.evolve = self.evolve_options();
        Ok(protocol)
    }

    pub fn scan_offsets(&self) -> Result<Vec<f64>, CliError> {
        let param = self.scan_parameter()?;
        let half = self.scan.half_span.unwrap_or(4.0 * typical_width(param));
        if !(half > 0.0) {
            return Err(config_error("scan.half_span must be positive"));
        }
        Ok(symmetric_grid(half, self.scan.points))
    }
}

/// Expected precision width of each knob for the default experiment.
pub fn typical_width(param: ScanParameter) -> f64 {
    match param {
        ScanParameter::Time => 0.1,
        ScanParameter::Depth => 0.08,
        ScanParameter::TransverseDepth => 0.12,
        ScanParameter::DriveAmplitude => 0.016,
        ScanParameter::DriveFrequency => 14.5,
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{item}` is not of the form key=value")))?;
    let key = key.trim();
    let value: toml::Value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| config_error("empty override key"))?;
    let mut cur = table;
    for part in parts {
        cur = cur
            .entry(part)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
