use std::path::PathBuf;
use std::sync::Arc;

use latticesim::entanglement::{entropy_of_entanglement, negativity, postselect, postselect_density};
use latticesim::fock::{balanced_split, split_sector, SectorBasis};
use latticesim::lattice::{
    build_hamiltonian, depth_for_ratio, hubbard_couplings, recoil_units, HubbardCouplings,
};
use latticesim::propagator::Propagator;
use latticesim::protocol::{snapshot_times, Protocol};
use latticesim::robustness::{converged_mixed_state, fidelity_scan, fwhm, taylor_fit, ScanCurve};
use latticesim::spectral::{ground_state, thermal_state};
use log::info;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::output::{write_effective_config, Floats, Table};
use crate::CliError;

/// Fit window of the small-τ expansion (ms).
const TAYLOR_WINDOW_MS: f64 = 0.02;

fn case_name(prefix: &str, l: usize, n: usize) -> String {
    format!("{prefix}_L{l}_N{n}.csv")
}

fn finish(cfg: &ExperimentConfig, command: &str, files: Vec<PathBuf>) -> Result<Vec<PathBuf>, CliError> {
    let mut files = files;
    files.push(write_effective_config(&cfg.output.directory, command, cfg)?);
    for f in &files {
        info!("wrote {}", f.display());
    }
    Ok(files)
}

pub fn ground_scan(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    const CMD: &str = "ground-scan";
    let fl = Floats(cfg.output.precision);
    let mut files = Vec::new();
    for &[l, n] in &cfg.system.cases {
        info!("{CMD}: L={l} N={n}, {} points", cfg.scan.u_over_j.len());
        let basis = Arc::new(SectorBasis::new(l, n)?);
        let h = build_hamiltonian(Arc::clone(&basis))?;
        let indexer = Arc::new(split_sector(&basis, balanced_split(n))?);
        let rows: Vec<Result<(f64, f64), latticesim::Error>> = cfg
            .scan
            .u_over_j
            .par_iter()
            .map(|&r| {
                let c = HubbardCouplings::new(1.0 / (1.0 + r), r / (1.0 + r));
                let gs = ground_state(&h, c, cfg.ground_options())?;
                let ps = postselect(&gs.state, &indexer)?;
                Ok((entropy_of_entanglement(&ps), ps.probability()))
            })
            .collect();
        let mut table = Table::create(
            &cfg.output.directory,
            &case_name("ground_scan", l, n),
            CMD,
            cfg,
            &[format!("L={l} N={n} n_left={}", balanced_split(n))],
            &["U_over_J", "entropy_bits", "postselect_probability"],
        )?;
        for (&r, row) in cfg.scan.u_over_j.iter().zip(rows) {
            let (e, p) = row?;
            table.row([fl.fmt(r), fl.fmt(e), fl.fmt(p)])?;
        }
        files.push(table.finish()?);
    }
    finish(cfg, CMD, files)
}

pub fn thermal_scan(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    const CMD: &str = "thermal-scan";
    let fl = Floats(cfg.output.precision);
    let params = cfg.params();
    let units = recoil_units(&params);
    let mut files = Vec::new();
    for &[l, n] in &cfg.system.cases {
        info!("{CMD}: L={l} N={n}, {} points", cfg.scan.thermal_u_over_j.len());
        let basis = Arc::new(SectorBasis::new(l, n)?);
        let h = build_hamiltonian(Arc::clone(&basis))?;
        let indexer = split_sector(&basis, balanced_split(n))?;
        let rows: Vec<Result<Vec<[f64; 5]>, latticesim::Error>> = cfg
            .scan
            .thermal_u_over_j
            .par_iter()
            .map(|&r| {
                let depth = depth_for_ratio(r, params.transverse_depth, &params)?;
                let c = hubbard_couplings(depth, params.transverse_depth, &params);
                cfg.scan
                    .temperatures_nk
                    .iter()
                    .map(|&t| {
                        let th = thermal_state(&h, c, t * 1e-9, &units, cfg.numerics.dense_cap)?;
                        let (rho, p) = postselect_density(&th.rho, &indexer)?;
                        Ok([r, t, negativity(&rho)?, p, depth])
                    })
                    .collect()
            })
            .collect();
        let mut table = Table::create(
            &cfg.output.directory,
            &case_name("thermal_scan", l, n),
            CMD,
            cfg,
            &[format!(
                "L={l} N={n} n_left={}, U/J set through the depth at V_perp={}",
                balanced_split(n),
                params.transverse_depth
            )],
            &["U_over_J", "T_nK", "negativity", "postselect_probability", "depth_ER"],
        )?;
        for row in rows {
            for rec in row? {
                table.row(rec.map(|x| fl.fmt(x)))?;
            }
        }
        files.push(table.finish()?);
    }
    finish(cfg, CMD, files)
}

pub fn drive(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    const CMD: &str = "drive";
    let fl = Floats(cfg.output.precision);
    let params = cfg.params();
    let schedule = cfg.schedule(&params)?;
    let times = snapshot_times(schedule.end(), cfg.output.snapshot_ms * 1e-3);
    let mut files = Vec::new();
    for &[l, n] in &cfg.system.cases {
        info!("{CMD}: L={l} N={n}, {} snapshots to {} ms", times.len(), schedule.end() * 1e3);
        let mut protocol = Protocol::standard(l, n, params);
        protocol.ground = cfg.ground_options();
        protocol.evolve = cfg.evolve_options();
        let prep = protocol.prepare()?;
        let traj = Propagator::new(&prep.hamiltonian, &schedule, &params, prep.units, protocol.evolve)
            .evolve(&prep.ground.state, &times)?;
        let rep = &traj.report;
        info!(
            "{CMD}: {} steps, {} matvecs, max Krylov dim {}, norm drift {:.2e}, halving error {:?}",
            rep.steps, rep.matvecs, rep.max_krylov_dim, rep.max_norm_drift, rep.halving_fidelity_error
        );
        let mut table = Table::create(
            &cfg.output.directory,
            &case_name("drive", l, n),
            CMD,
            cfg,
            &[
                format!("L={l} N={n} n_left={}", balanced_split(n)),
                format!(
                    "integrator: steps={} matvecs={} steps_per_period={} max_norm_drift={} halving_fidelity_error={} converged={}",
                    rep.steps,
                    rep.matvecs,
                    rep.steps_per_period,
                    rep.max_norm_drift,
                    fl.opt(rep.halving_fidelity_error),
                    rep.converged
                ),
                "mirror_sum_probability adds the mirrored sector for odd N".into(),
            ],
            &["t_ms", "entropy_bits", "postselect_probability", "norm_drift", "mirror_sum_probability"],
        )?;
        for (t, psi) in traj.sample_times.iter().zip(&traj.states) {
            match prep.observe(psi) {
                Ok(o) => table.row([
                    fl.fmt(t * 1e3),
                    fl.fmt(o.entropy_bits),
                    fl.fmt(o.probability),
                    fl.fmt(o.norm_drift),
                    fl.fmt(o.mirror_sum_probability),
                ])?,
                Err(e) => {
                    log::warn!("t = {} ms: {e}", t * 1e3);
                    table.row([fl.fmt(t * 1e3), String::new(), String::new(), String::new(), String::new()])?
                }
            }
        }
        files.push(table.finish()?);
    }
    finish(cfg, CMD, files)
}

pub fn fidelity(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    const CMD: &str = "fidelity-scan";
    let fl = Floats(cfg.output.precision);
    let param = cfg.scan_parameter()?;
    let offsets = cfg.scan_offsets()?;
    let mut files = Vec::new();
    for &[l, n] in &cfg.system.cases {
        info!("{CMD}: L={l} N={n}, {} offsets in {}", offsets.len(), param.name());
        let protocol = cfg.protocol(l, n)?;
        let curve = fidelity_scan(&protocol, param, &offsets)?;
        let width = fwhm(&curve);
        let summary = match &width {
            Ok(w) => format!("fwhm_{} = {} {}", param.name(), fl.fmt(*w), param.unit()),
            Err(e) => format!("fwhm_{} = unavailable ({e})", param.name()),
        };
        println!("L={l} N={n} {summary} missing_points={}", curve.missing());
        let mut table = Table::create(
            &cfg.output.directory,
            &format!("fidelity_scan_{}_L{l}_N{n}.csv", param.name()),
            CMD,
            cfg,
            &[
                format!("L={l} N={n} parameter={} unit={} nominal={}", param.name(), param.unit(), curve.nominal),
                summary,
            ],
            &["offset", "fidelity"],
        )?;
        for (x, v) in curve.offsets.iter().zip(&curve.values) {
            table.row([fl.fmt(*x), fl.opt(*v)])?;
        }
        files.push(table.finish()?);
    }
    finish(cfg, CMD, files)
}

pub fn mixed_negativity(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    const CMD: &str = "mixed-negativity";
    let fl = Floats(cfg.output.precision);
    if cfg.scan.tau_ms.is_empty() {
        return Err(CliError::Config("scan.tau_ms: at least one value is required".into()));
    }
    let mut taus = cfg.scan.tau_ms.clone();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let tau_max = taus[taus.len() - 1] * 1e-3;
    let mut files = Vec::new();
    for &[l, n] in &cfg.system.cases {
        let protocol = cfg.protocol(l, n)?;
        let t0 = protocol.drive_end;
        let schedule = protocol.drive_only_schedule(t0 + 10.0 * tau_max + 1e-6)?;
        let times = snapshot_times(schedule.end(), cfg.output.snapshot_ms * 1e-3);
        info!("{CMD}: L={l} N={n}, driving to {} ms", schedule.end() * 1e3);
        let prep = protocol.prepare()?;
        let prop = Propagator::new(&prep.hamiltonian, &schedule, &protocol.params, prep.units, protocol.evolve);
        let traj = prop.evolve(&prep.ground.state, &times)?;
        info!("{CMD}: {} values of tau", taus.len());
        let rows: Vec<_> = taus
            .par_iter()
            .map(|&tau| {
                converged_mixed_state(
                    &traj,
                    &prop,
                    &prep.indexer,
                    t0,
                    tau * 1e-3,
                    cfg.numerics.quadrature_nodes,
                    cfg.numerics.max_quadrature_nodes,
                    cfg.weighting(),
                )
            })
            .collect();
        let values: Vec<Option<f64>> = rows.iter().map(|r| r.as_ref().ok().map(|m| m.negativity)).collect();
        let curve = ScanCurve::new("tau", taus.clone(), values, 0.0)?;
        let mut summary = vec![match taylor_fit(&curve, TAYLOR_WINDOW_MS) {
            Ok((n0, c2)) => format!("taylor_fit n0 = {} c2 = {} per ms^2", fl.fmt(n0), fl.fmt(c2)),
            Err(e) => format!("taylor_fit unavailable ({e})"),
        }];
        if let Some(Some(n_pure)) = curve.values.first().filter(|_| taus[0] == 0.0) {
            let raised: Vec<String> = taus
                .iter()
                .zip(&curve.values)
                .filter(|(_, v)| v.is_some_and(|v| v > n_pure + 1e-9))
                .map(|(t, _)| fl.fmt(*t))
                .collect();
            if !raised.is_empty() {
                summary.push(format!("negativity above the unmixed value at tau_ms = {}", raised.join(" ")));
            }
        }
        for line in &summary {
            println!("L={l} N={n} {line}");
        }
        let mut extra = vec![format!(
            "L={l} N={n} t0_ms={} weighting={:?}",
            fl.fmt(t0 * 1e3),
            cfg.weighting()
        )];
        extra.extend(summary);
        let mut table = Table::create(
            &cfg.output.directory,
            &case_name("mixed_negativity", l, n),
            CMD,
            cfg,
            &extra,
            &["tau_ms", "negativity", "quadrature_nodes", "status"],
        )?;
        for (tau, row) in taus.iter().zip(&rows) {
            match row {
                Ok(m) => table.row([fl.fmt(*tau), fl.fmt(m.negativity), m.nodes.to_string(), "ok".into()])?,
                Err(e) => {
                    log::warn!("tau = {tau} ms: {e}");
                    table.row([fl.fmt(*tau), String::new(), String::new(), e.to_string()])?
                }
            }
        }
        files.push(table.finish()?);
    }
    finish(cfg, CMD, files)
}
