//! End-to-end acceptance run. Prints one line per criterion followed by the
//! individual checks. Exits non-zero when a check fails that is not listed in
//! `KNOWN_FAILURES`.

mod common;

use std::sync::Arc;
use std::time::Instant;

use latticesim::entanglement::{
    entropy_of_entanglement, negativity, negativity_trace_norm, postselect, postselect_density, pure_negativity,
    sector_probabilities, PostselectedState,
};
use latticesim::fock::{balanced_split, enumerate_basis, sector_dimension, split_sector, SectorBasis};
use latticesim::lattice::{
    build_hamiltonian, depth_for_ratio, hubbard_couplings, recoil_units, DriveSchedule, DriveSegment,
    HubbardCouplings, PhysicalParams,
};
use latticesim::propagator::{EvolveOptions, Propagator};
use latticesim::protocol::{snapshot_times, Protocol, ScanParameter};
use latticesim::robustness::{converged_mixed_state, fidelity_scan, fwhm, symmetric_grid, taylor_fit, EnsembleWeighting, ScanCurve};
use latticesim::spectral::{ground_state, thermal_state, GroundStateOptions, DENSE_DIMENSION_CAP};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

/// Checks that fail with this model at the stated tolerance.
const KNOWN_FAILURES: &[&str] = &["3/negativity-ordering", "4/probability-L4-N4"];

struct Check {
    id: String,
    pass: bool,
    detail: String,
}

struct Criterion {
    number: u32,
    title: &'static str,
    checks: Vec<Check>,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Self {
            number,
            title,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            id: format!("{}/{name}", self.number),
            pass,
            detail: detail.into(),
        });
    }

    fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn parameter_map() -> Criterion {
    let mut c = Criterion::new(1, "parameter map U/hbar = 12862 rad/s within 0.5%");
    let w = PhysicalParams::rubidium_842nm().resonant_frequency();
    c.check("U-over-hbar", within(w, 12862.0, 0.005), format!("U/hbar = {w:.3} rad/s"));
    c
}

fn ground_entropy(h: &latticesim::lattice::SparseHamiltonian, ix: &Arc<latticesim::fock::BipartiteIndexer>, r: f64) -> (f64, f64) {
    let c = HubbardCouplings::new(1.0 / (1.0 + r), r / (1.0 + r));
    let gs = ground_state(h, c, GroundStateOptions::default()).unwrap();
    let ps = postselect(&gs.state, ix).unwrap();
    (entropy_of_entanglement(&ps), ps.probability())
}

fn static_ceiling() -> Criterion {
    let mut c = Criterion::new(2, "static ground-state entanglement ceiling, L=6");
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.5).collect();
    for n in [2, 3, 6] {
        let basis = Arc::new(SectorBasis::new(6, n).unwrap());
        let h = build_hamiltonian(Arc::clone(&basis)).unwrap();
        let ix = Arc::new(split_sector(&basis, balanced_split(n)).unwrap());
        let entropies: Vec<f64> = grid.iter().map(|&r| ground_entropy(&h, &ix, r).0).collect();
        let (arg, max) = entropies
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (k, &e)| if e > acc.1 { (k, e) } else { acc });
        c.check(
            &format!("max-entropy-N{n}"),
            max <= 0.1,
            format!("max E over U/J in [0, 50] = {max:.4} bits at U/J = {}", grid[arg]),
        );
        c.check(
            &format!("separable-N{n}"),
            entropies[0].abs() <= 1e-6,
            format!("E(U/J = 0) = {:.3e}", entropies[0]),
        );
        if n == 6 {
            let (e, p) = ground_entropy(&h, &ix, 1e4);
            c.check("mott-limit", e < 1e-3 && p > 0.999, format!("U/J = 1e4: E = {e:.3e}, p = {p:.6}"));
        }
    }
    c
}

fn thermal_degradation() -> Criterion {
    let mut c = Criterion::new(3, "thermal ordering T=80 < T=40 < T=0 nK, L=6 N=6");
    let params = PhysicalParams::rubidium_842nm();
    let units = recoil_units(&params);
    let basis = Arc::new(SectorBasis::new(6, 6).unwrap());
    let h = build_hamiltonian(Arc::clone(&basis)).unwrap();
    let ix = split_sector(&basis, 3).unwrap();
    let (mut p_ok, mut n_ok) = (true, true);
    let (mut p_lines, mut n_lines) = (Vec::new(), Vec::new());
    for k in 1..=10 {
        let r = 5.0 * k as f64;
        let depth = depth_for_ratio(r, params.transverse_depth, &params).unwrap();
        let cpl = hubbard_couplings(depth, params.transverse_depth, &params);
        let mut p = [0.0; 3];
        let mut neg = [0.0; 3];
        for (i, t) in [0.0, 40e-9, 80e-9].into_iter().enumerate() {
            let th = thermal_state(&h, cpl, t, &units, DENSE_DIMENSION_CAP).unwrap();
            let (rho, prob) = postselect_density(&th.rho, &ix).unwrap();
            p[i] = prob;
            neg[i] = negativity(&rho).unwrap();
        }
        p_ok &= p[2] < p[1] && p[1] < p[0];
        n_ok &= neg[2] < neg[1] && neg[1] < neg[0];
        p_lines.push(format!("{r}:{:.3}/{:.3}/{:.3}", p[0], p[1], p[2]));
        n_lines.push(format!("{r}:{:.2e}/{:.2e}/{:.2e}", neg[0], neg[1], neg[2]));
    }
    c.check("probability-ordering", p_ok, format!("U/J:p(0/40/80 nK) {}", p_lines.join(" ")));
    c.check("negativity-ordering", n_ok, format!("U/J:N(0/40/80 nK) {}", n_lines.join(" ")));
    c
}

fn late_probability(l: usize, n: usize, evolve: EvolveOptions) -> (f64, bool) {
    let mut p = Protocol::standard(l, n, PhysicalParams::rubidium_842nm());
    p.evolve = evolve;
    let prep = p.prepare().unwrap();
    let times = snapshot_times(p.end, 5e-4);
    let traj = p.run(&prep, &times).unwrap();
    let late: Vec<f64> = traj
        .sample_times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= p.hold_end)
        .map(|(_, s)| prep.observe(s).unwrap().probability)
        .collect();
    (late.iter().sum::<f64>() / late.len() as f64, traj.report.converged)
}

fn driven_enhancement() -> Criterion {
    let mut c = Criterion::new(4, "driven enhancement, saturation and late-time probabilities");
    let p = Protocol::standard(6, 6, PhysicalParams::rubidium_842nm());
    let prep = p.prepare().unwrap();
    let times = snapshot_times(p.end, 5e-4);
    let traj = p.run(&prep, &times).unwrap();
    let entropy: Vec<(f64, f64)> = traj
        .sample_times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| (t * 1e3, prep.observe(s).unwrap().entropy_bits))
        .collect();
    let rep = &traj.report;
    c.check(
        "integrator",
        rep.converged && rep.max_norm_drift < 1e-9,
        format!(
            "steps/period {}, halving error {:.2e}, norm drift {:.2e}",
            rep.steps_per_period,
            rep.halving_fidelity_error.unwrap_or(f64::NAN),
            rep.max_norm_drift
        ),
    );
    let e0 = entropy[0].1;
    let e100 = entropy.iter().find(|(t, _)| (t - 100.0).abs() < 1e-9).unwrap().1;
    c.check(
        "enhancement",
        e100 > 50.0 * e0,
        format!("E(100 ms) = {e100:.4}, E(0) = {e0:.3e}, ratio {:.3e}", e100 / e0),
    );
    let window: Vec<f64> = entropy.iter().filter(|(t, _)| (50.0..=100.0).contains(t)).map(|x| x.1).collect();
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let driven: Vec<(f64, f64)> = entropy.iter().copied().filter(|(t, _)| *t <= 100.0).collect();
    let mut t_sat = 100.0;
    for k in (0..driven.len()).rev() {
        if (driven[k].1 - mean).abs() > 0.15 * mean {
            break;
        }
        t_sat = driven[k].0;
    }
    c.check(
        "saturation",
        t_sat <= 65.0,
        format!("within 15% of the 50-100 ms mean {mean:.4} from t = {t_sat} ms on"),
    );
    for (l, n, target, evolve) in [
        (4, 4, 0.33, EvolveOptions::default()),
        (6, 5, 0.27, EvolveOptions::default()),
        (8, 8, 0.27, EvolveOptions::default().unchecked()),
    ] {
        let (p, converged) = late_probability(l, n, evolve);
        c.check(
            &format!("probability-L{l}-N{n}"),
            (p - target).abs() <= 0.04,
            format!(
                "mean p over 150-200 ms = {p:.4} (target {target} +/- 0.04){}",
                if converged { "" } else { ", step check not run" }
            ),
        );
    }
    c
}

fn timing_precision() -> Criterion {
    let mut c = Criterion::new(5, "precision widths from fidelity scans, L=6 N=6");
    let mut p = Protocol::standard(6, 6, PhysicalParams::rubidium_842nm());
    p.evolve = p.evolve.unchecked();
    for (param, target, rel, half, points) in [
        (ScanParameter::Time, 0.1, 0.3, 0.4, 81),
        (ScanParameter::Depth, 0.08, 0.5, 0.16, 21),
        (ScanParameter::TransverseDepth, 0.12, 0.5, 0.24, 21),
        (ScanParameter::DriveAmplitude, 0.016, 0.5, 0.032, 21),
        (ScanParameter::DriveFrequency, 14.5, 0.5, 29.0, 21),
    ] {
        let curve = fidelity_scan(&p, param, &symmetric_grid(half, points)).unwrap();
        let zero = curve.offsets.iter().position(|&x| x == 0.0).unwrap();
        let (pass, detail) = match fwhm(&curve) {
            Ok(w) => (
                within(w, target, rel) && curve.values[zero] == Some(1.0),
                format!("FWHM = {w:.5} {} (target {target} +/- {:.0}%)", param.unit(), rel * 100.0),
            ),
            Err(e) => (false, e.to_string()),
        };
        c.check(&format!("fwhm-{}", param.name()), pass, detail);
    }
    c
}

fn mixed_state_robustness() -> Criterion {
    let mut c = Criterion::new(6, "Gaussian timing ensemble, L=6 N=6");
    let mut p = Protocol::standard(6, 6, PhysicalParams::rubidium_842nm());
    p.evolve = p.evolve.unchecked();
    let prep = p.prepare().unwrap();
    let t0 = p.drive_end;
    let schedule = p.drive_only_schedule(t0 + 11e-3).unwrap();
    let prop = Propagator::new(&prep.hamiltonian, &schedule, &p.params, prep.units, p.evolve);
    let traj = prop.evolve(&prep.ground.state, &snapshot_times(schedule.end(), 5e-4)).unwrap();
    let mut taus: Vec<f64> = (0..=10).map(|k| k as f64 * 0.002).collect();
    taus.extend([0.05, 0.1, 1.0]);
    let mut values = Vec::new();
    let mut valid = true;
    let mut nodes = Vec::new();
    for &tau in &taus {
        let m = converged_mixed_state(&traj, &prop, &prep.indexer, t0, tau * 1e-3, 32, 8192, EnsembleWeighting::Literal)
            .unwrap();
        let rho = &m.rho;
        valid &= rho.hermiticity_error() <= 1e-12 && (rho.trace() - 1.0).abs() <= 1e-9 && rho.eigenvalues()[0] >= -1e-10;
        values.push(Some(m.negativity));
        nodes.push(m.nodes);
    }
    c.check("valid-states", valid, format!("{} ensembles, nodes {:?}", taus.len(), nodes));
    let curve = ScanCurve::new("tau", taus.clone(), values.clone(), 0.0).unwrap();
    let n_pure = values[0].unwrap();
    let n_10us = values[5].unwrap();
    let n_1ms = values[taus.len() - 1].unwrap();
    match taylor_fit(&curve, 0.02) {
        Ok((n0, c2)) => {
            c.check("n0", within(n0, 3.064, 0.1), format!("n0 = {n0:.4} (target 3.064 +/- 10%)"));
            c.check("c2", within(c2, -900.0, 0.3), format!("c2 = {c2:.1} per ms^2 (target -900 +/- 30%)"));
        }
        Err(e) => c.check("taylor-fit", false, e.to_string()),
    }
    let deficit = (n_pure - n_10us) / n_pure;
    c.check("deficit-10us", deficit < 0.03, format!("N(0.01 ms) = {n_10us:.4}, deficit {:.2}%", deficit * 100.0));
    c.check("tau-1ms", n_1ms >= 0.5, format!("N(1 ms) = {n_1ms:.4}"));
    let raised: Vec<f64> = taus.iter().zip(&values).filter(|(_, v)| v.unwrap() > n_pure + 1e-9).map(|(t, _)| *t).collect();
    if !raised.is_empty() {
        println!("    note: mixing raised the negativity at tau = {raised:?} ms");
    }
    c
}

fn property_suites() -> Criterion {
    let mut c = Criterion::new(7, "property suites");
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let mut ok = true;
    for l in 2..=8 {
        for n in 0..=8 {
            let b = enumerate_basis(l, n).unwrap();
            ok &= b.dim() as u128 == sector_dimension(l, n).unwrap();
            ok &= b.states().iter().enumerate().all(|(k, s)| b.rank(s) == Some(k) && s.total() as usize == n);
        }
    }
    c.check("a-basis", ok, "round trip and completeness for all (L, N) <= (8, 8)");

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (l, n) = (rng.random_range(2..=6), rng.random_range(1..=5));
        let h = build_hamiltonian(Arc::new(SectorBasis::new(l, n).unwrap())).unwrap();
        let (j, u, s) = (rng.random::<f64>() * 2.0, rng.random::<f64>() * 8.0, 0.5 + rng.random::<f64>());
        let x = random_vector(h.dim(), &mut rng);
        let y = random_vector(h.dim(), &mut rng);
        let mut hx = vec![Complex64::default(); h.dim()];
        let mut hy = hx.clone();
        let mut hs = hx.clone();
        h.apply(HubbardCouplings::new(j, u), &x, &mut hx);
        h.apply(HubbardCouplings::new(j, u), &y, &mut hy);
        h.apply(HubbardCouplings::new(s * j, s * u), &x, &mut hs);
        let a: Complex64 = y.iter().zip(&hx).map(|(p, q)| p.conj() * q).sum();
        let b: Complex64 = hy.iter().zip(&x).map(|(p, q)| p.conj() * q).sum();
        worst = worst.max((a - b).norm() / (1.0 + a.norm()));
        for k in 0..h.dim() {
            worst = worst.max((hs[k] - hx[k] * s).norm() / (1.0 + hx[k].norm()));
        }
    }
    c.check("b-hamiltonian", worst < 1e-10, format!("worst relative Hermiticity/linearity error {worst:.2e}"));

    let params = PhysicalParams::rubidium_842nm();
    let units = recoil_units(&params);
    let (mut drift, mut deficit): (f64, f64) = (0.0, 0.0);
    for &(l, n) in &SMALL_SECTORS {
        let basis = Arc::new(SectorBasis::new(l, n).unwrap());
        let h = build_hamiltonian(Arc::clone(&basis)).unwrap();
        let segs = vec![
            DriveSegment::constant(0.0, 4e-4, 6.0 + 10.0 * rng.random::<f64>()),
            DriveSegment::constant(4e-4, 9e-4, 6.0 + 10.0 * rng.random::<f64>()),
            DriveSegment::constant(9e-4, 1.2e-3, 30.0),
        ];
        let schedule = DriveSchedule::new(segs.clone()).unwrap();
        let psi0 = random_state(&basis, &mut rng);
        let ends: Vec<f64> = segs.iter().map(|s| s.end).collect();
        let traj = Propagator::new(&h, &schedule, &params, units, EvolveOptions::default().unchecked())
            .evolve(&psi0, &ends)
            .unwrap();
        let mut v = DVector::from_column_slice(psi0.amplitudes());
        for (seg, s) in segs.iter().zip(&traj.states) {
            let dense = h.to_dense(hubbard_couplings(seg.depth, params.transverse_depth, &params));
            v = dense_expm(&dense, units.seconds_to_internal(seg.end - seg.start), &v);
            deficit = deficit.max(1.0 - overlap_sqr(v.as_slice(), s.amplitudes()));
            drift = drift.max((s.norm() - 1.0).abs());
        }
        let driven = DriveSchedule::new(vec![DriveSegment::driven(0.0, 2e-3, 10.0, 0.2, params.drive_frequency)]).unwrap();
        let traj = Propagator::new(&h, &driven, &params, units, EvolveOptions::default().unchecked())
            .evolve(&psi0, &[1e-3, 2e-3])
            .unwrap();
        drift = drift.max(traj.report.max_norm_drift);
    }
    c.check(
        "c-propagator",
        drift < 1e-9 && deficit < 1e-8,
        format!("norm drift {drift:.2e}, oracle fidelity deficit {deficit:.2e} on dims <= 50"),
    );

    let mut worst_lu: f64 = 0.0;
    let mut worst_route: f64 = 0.0;
    for _ in 0..20 {
        let (l, n) = [(4, 2), (4, 4), (6, 3), (6, 6)][rng.random_range(0..4)];
        let basis = Arc::new(SectorBasis::new(l, n).unwrap());
        let ix = Arc::new(split_sector(&basis, n / 2).unwrap());
        let (dl, dr) = (ix.dim_left(), ix.dim_right());
        let ul = random_unitary(dl, &mut rng);
        let ur = random_unitary(dr, &mut rng);
        let m = DMatrix::from_fn(dl, dr, |_, _| complex_gaussian(&mut rng));
        let a = PostselectedState::from_coefficients(Arc::clone(&ix), m.clone(), 1.0).unwrap();
        let b = PostselectedState::from_coefficients(Arc::clone(&ix), &ul * m * ur.transpose(), 1.0).unwrap();
        worst_lu = worst_lu.max((entropy_of_entanglement(&a) - entropy_of_entanglement(&b)).abs());
        worst_lu = worst_lu.max((pure_negativity(&a) - pure_negativity(&b)).abs());
        let rho = random_density(dl, dr, rng.random_range(1..4), &mut rng);
        let n1 = negativity(&rho).unwrap();
        worst_lu = worst_lu.max((n1 - negativity(&local_rotation(&rho, &ul, &ur)).unwrap()).abs());
        worst_route = worst_route.max((n1 - negativity_trace_norm(&rho).unwrap()).abs());
    }
    c.check("d-local-unitaries", worst_lu < 1e-9, format!("worst change {worst_lu:.2e}"));
    c.check("e-negativity-routes", worst_route < 1e-10, format!("worst disagreement {worst_route:.2e}"));

    let mut worst_p: f64 = 0.0;
    for (l, n) in [(2, 3), (4, 4), (6, 5), (6, 6), (8, 8)] {
        let basis = Arc::new(SectorBasis::new(l, n).unwrap());
        let psi = random_state(&basis, &mut rng);
        let probs = sector_probabilities(&psi);
        worst_p = worst_p.max((probs.iter().sum::<f64>() - 1.0).abs());
        let ps = postselect(&psi, &Arc::new(split_sector(&basis, n / 2).unwrap())).unwrap();
        worst_p = worst_p.max((ps.probability() - probs[n / 2]).abs());
    }
    c.check("f-probability-completeness", worst_p < 1e-9, format!("worst deviation {worst_p:.2e}"));
    c
}

fn main() {
    let criteria: [fn() -> Criterion; 7] = [
        parameter_map,
        static_ceiling,
        thermal_degradation,
        driven_enhancement,
        timing_precision,
        mixed_state_robustness,
        property_suites,
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for (k, run) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k as u32 + 1)) {
            continue;
        }
        let start = Instant::now();
        let c = run();
        println!(
            "criterion {} {}: {} ({:.1} s)",
            c.number,
            if c.passed() { "PASS" } else { "FAIL" },
            c.title,
            start.elapsed().as_secs_f64()
        );
        for check in &c.checks {
            let known = KNOWN_FAILURES.contains(&check.id.as_str());
            let tag = match (check.pass, known) {
                (true, false) => "pass",
                (true, true) => "pass (listed as a known failure)",
                (false, true) => "FAIL (known)",
                (false, false) => "FAIL",
            };
            println!("    {:<32} {tag}: {}", check.id, check.detail);
            if !check.pass && !known {
                unexpected.push(check.id.clone());
            }
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
