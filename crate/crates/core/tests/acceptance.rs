//! End-to-end checks of the reference scenarios. Prints one PASS/FAIL line
//! per criterion and exits non-zero if any fails. Numeric arguments select
//! a subset, e.g. `cargo test --test acceptance -- 2 5`.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use uom_core::dynamics::{
    evolve, liouvillian, propagate_dense, propagator_oracle, steady_state_with, CollapseSet, EvolveOptions, PeriodicOptions,
    SteadyOptions, TimeDependentHamiltonian, Tolerances,
};
use uom_core::effective::{compare_models, dressed_mech_frequency, tune_two_phonon_resonance};
use uom_core::hamiltonians::{
    angular, build_full_hamiltonian, build_reduced, coupling_g, shifted_mech_frequency, to_db, validity_bounds, DriveSpec,
    ReducedModel, SystemParams, TWO_PI,
};
use uom_core::hilbert::{expect, ladder, number, CompositeSpace, Operator, QuantumState, GROUND};
use uom_core::mpa::{analytic_gain, peak_location, phase_grid, quadrature_matrix, simulate_gain, simulate_gain_with, GainOptions, MpaConfig};
use uom_core::spectra::{
    dce_full_steady, dce_model, g2, snr, snr_scan, spectrum, thermal_occupation, DceSettings, SnrModel, SpectrumOptions,
};

type Outcome = Result<(bool, String), String>;

fn khz(w: f64) -> f64 {
    w / TWO_PI / 1e3
}

/// Coupling constant G1.
fn coupling_constant() -> Outcome {
    let g1 = coupling_g(1, &SystemParams::saw_reference());
    let target = angular(-32e3);
    let rel = (g1 - target).abs() / target.abs();
    Ok((rel <= 0.01, format!("G1/2pi = {:.3} kHz vs -32 kHz ({:.2}%)", khz(g1), 100.0 * rel)))
}

/// Full vs reduced two-phonon Rabi oscillation from |g,0,2>.
fn model_reduction() -> Outcome {
    let p = SystemParams::saw_reference();
    let space = CompositeSpace::tripartite(4, 8).map_err(|e| e.to_string())?;
    let wt = dressed_mech_frequency(&p, 0.0, &CompositeSpace::qubit_mech(8).unwrap()).map_err(|e| e.to_string())?;
    let res = tune_two_phonon_resonance(&p, &space, 2.0 * wt, angular(1e6)).map_err(|e| e.to_string())?;
    let mut q = p;
    q.omega_c0 = res.omega_c + q.omega_d;
    let full = build_full_hamiltonian(&q, &space).map_err(|e| e.to_string())?;
    let red = build_reduced(&p, &CompositeSpace::cavity_mech(4, 8).unwrap(), ReducedModel::Quadratic).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..3000).map(|k| k as f64 * 100e-6 / 3000.0).collect();
    let psi = space.basis_ket(&[GROUND, 0, 2]).map_err(|e| e.to_string())?;
    let c = compare_models(&q, &psi, &grid, &full, &red).map_err(|e| e.to_string())?;
    let want = 2.0 * 2f64.sqrt() * coupling_g(1, &p).abs();
    let ratio = c.oscillation_frequency_full / want;
    let pe = c.series("full:P_e").unwrap().iter().cloned().fold(0.0, f64::max);
    let a = c.series("full:P(g,0,2)").unwrap();
    let b = c.series("full:P(g,1,0)").unwrap();
    let leak = a.iter().zip(b).map(|(x, y)| 1.0 - x - y).fold(0.0, f64::max);
    let ok = (ratio - 1.0).abs() <= 0.05 && pe < 0.05 && leak < 0.05;
    Ok((
        ok,
        format!("frequency / 2 sqrt2 |G1| = {ratio:.4}, max P_e = {pe:.2e}, max leakage = {leak:.3}"),
    ))
}

/// Dressed frequency shift against the square-root formula.
fn frequency_shift() -> Outcome {
    let p = SystemParams::saw_reference();
    let s = CompositeSpace::qubit_mech(10).unwrap();
    let w0 = dressed_mech_frequency(&p, 0.0, &s).map_err(|e| e.to_string())?;
    let shift = |xi: f64| -> Result<(f64, f64), String> {
        let num = dressed_mech_frequency(&p, xi, &s).map_err(|e| e.to_string())? - w0;
        let formula = shifted_mech_frequency(&p, xi).map_err(|e| e.to_string())? - p.omega_m;
        Ok((num, formula))
    };
    let mut worst: f64 = 0.0;
    for xi in [-0.5, -0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let (n, f) = shift(xi)?;
        worst = worst.max(((n - f) / f).abs());
    }
    let mut monotone = true;
    let mut devs = Vec::new();
    for sign in [1.0, -1.0] {
        let d: Vec<f64> = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0]
            .iter()
            .map(|&x| shift(sign * x).map(|(n, f)| (n - f).abs()))
            .collect::<Result<_, _>>()?;
        monotone &= d.windows(2).all(|w| w[1] > w[0]);
        devs.push(khz(*d.last().unwrap()));
    }
    Ok((
        worst <= 0.05 && monotone,
        format!(
            "max relative error {:.2}% for |xi| <= 0.5; deviation monotone for |xi| > 1: {monotone} (|xi| = 8: {:.1} / {:.1} kHz)",
            100.0 * worst,
            devs[0],
            devs[1]
        ),
    ))
}

/// Parametric gain: closed form, qubit-explicit simulation, phase of the extremum.
fn mpa_gain() -> Outcome {
    let p = SystemParams::saw_reference();
    let (alpha, kappa) = (angular(0.045e6), p.mech_decay);
    let analytic = analytic_gain(-FRAC_PI_2, alpha, kappa).map_err(|e| e.to_string())?;
    let analytic_ok = (analytic.abs() - 19.0).abs() < 1e-9;

    // pump strength that gives |alpha|/2pi = 0.045 MHz
    let omega_d = alpha / (p.g_x / p.omega_q).powi(2);
    let c_in = 10.0;
    let full_space = CompositeSpace::qubit_mech(20).unwrap();
    let full = simulate_gain(&p, omega_d, -FRAC_PI_2, c_in, &full_space).map_err(|e| e.to_string())?;
    let rel = (full.gain_x.abs() - 19.0).abs() / 19.0;
    let mech_only = CompositeSpace::mech(40).unwrap();
    let reduced = simulate_gain(&p, omega_d, -FRAC_PI_2, c_in, &mech_only).map_err(|e| e.to_string())?;

    // extremum of the closed form on a fine grid, and of the qubit-explicit model near it
    let grid = phase_grid(256);
    let closed: Vec<f64> = grid.iter().map(|&f| analytic_gain(f, alpha, kappa).map(f64::abs).unwrap_or(f64::NAN)).collect();
    let peak_closed = peak_location(&grid, &closed).map_err(|e| e.to_string())?;
    let local: Vec<f64> = (-3..=3).map(|k| -FRAC_PI_2 + 0.1 * k as f64).collect();
    let opts = GainOptions::default();
    let sim: Vec<f64> = uom_core::parallel::try_par_map(&local, |&f| {
        simulate_gain_with(&p, omega_d, f, c_in, &full_space, &opts).map(|g| g.gain_x.abs())
    })
    .map_err(|e| e.to_string())?;
    let peak_full = peak_location(&local, &sim).map_err(|e| e.to_string())?;
    let sim_reduced: Vec<f64> = uom_core::parallel::try_par_map(&local, |&f| {
        simulate_gain_with(&p, omega_d, f, c_in, &mech_only, &opts).map(|g| g.gain_x.abs())
    })
    .map_err(|e| e.to_string())?;
    let peak_reduced = peak_location(&local, &sim_reduced).map_err(|e| e.to_string())?;
    let peak_ok = (peak_closed + FRAC_PI_2).abs() <= 0.05 && (peak_full + FRAC_PI_2).abs() <= 0.05;
    Ok((
        analytic_ok && rel <= 0.2 && peak_ok,
        format!(
            "closed form |G| = {:.6}; qubit-explicit |G| = {:.2} ({:+.1}% vs 19, m = 20); phonon-only H_MPA |G| = {:.2}; extremum at phi + pi/2 = {:+.4} (closed) / {:+.4} (qubit-explicit) / {:+.4} (phonon-only)",
            analytic.abs(),
            full.gain_x.abs(),
            100.0 * (full.gain_x.abs() - 19.0) / 19.0,
            reduced.gain_x.abs(),
            peak_closed + FRAC_PI_2,
            peak_full + FRAC_PI_2,
            peak_reduced + FRAC_PI_2
        ),
    ))
}

/// Critical gain from the Kerr bound.
fn critical_gain() -> Outcome {
    let v = validity_bounds(&SystemParams::saw_reference(), angular(100e6), 1.0);
    let db = to_db(v.g_c_kerr);
    Ok(((db - 28.3).abs() <= 1.0, format!("N_c = {:.1}, 10 log10(8 N_c + 4) = {db:.2} dB", v.n_c_kerr)))
}

/// Phonon output rate of the full cavity-driven model.
fn dce_rate() -> Outcome {
    let mut p = SystemParams::saw_reference();
    p.n_th = 0.0;
    let space = CompositeSpace::tripartite(5, 10).unwrap();
    let r = dce_full_steady(&p, angular(0.05e6), &space, &PeriodicOptions::default()).map_err(|e| e.to_string())?;
    let ratio = r.output_rate / 1e5;
    let ok = (0.5..=2.0).contains(&ratio) && r.tail < 1e-3 && r.residual < 1e-6;
    Ok((
        ok,
        format!(
            "<b^dag b> = {:.4}, P_out = {:.3e} /s ({ratio:.2} x 1e5), truncation tail {:.1e}, residual {:.1e}",
            r.phonons, r.output_rate, r.tail, r.residual
        ),
    ))
}

fn dce_settings(eps_mhz: f64, delta_d: f64) -> DceSettings {
    DceSettings {
        epsilon: angular(eps_mhz * 1e6),
        delta_d,
        cavity_dim: 4,
        mech_dim: 16,
    }
}

/// Pair statistics over a drive scan.
fn dce_statistics() -> Outcome {
    let p = SystemParams::saw_reference();
    let eps = [0.01, 0.02, 0.03, 0.04, 0.05];
    let kappa = p.mech_decay;
    let taus: Vec<f64> = [0.0, 2.0, 3.0, 5.0, 8.0].iter().map(|x| x / kappa).collect();
    let rows = uom_core::parallel::try_par_map(&eps, |&e| {
        let m = dce_model(&p, &dce_settings(e, 0.0))?;
        let rho = m.steady_state()?;
        g2(&m.liouvillian, &rho, &m.b, &taus)
    })
    .map_err(|e| e.to_string())?;
    let g0: Vec<f64> = rows.iter().map(|r| r.g2_zero).collect();
    let decreasing = g0.windows(2).all(|w| w[1] < w[0]);
    let bunched = rows.iter().all(|r| r.g2[1..].iter().all(|g| r.g2_zero / g > 2.0));
    let worst = rows
        .iter()
        .map(|r| r.g2[1..].iter().map(|g| r.g2_zero / g).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    Ok((
        g0[0] > 10.0 && decreasing && bunched,
        format!(
            "g2(0) = [{}] over eps/2pi = {eps:?} MHz; min g2(0)/g2(tau) for kappa tau >= 2: {worst:.2}",
            g0.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

/// Emission spectrum: one peak on resonance, a symmetric pair when detuned.
fn dce_spectrum() -> Outcome {
    let p = SystemParams::saw_reference();
    let n_grid = 601;
    let half = angular(1.5e6);
    let omegas: Vec<f64> = (0..n_grid).map(|j| -half + 2.0 * half * j as f64 / (n_grid - 1) as f64).collect();
    let dw = omegas[1] - omegas[0];
    let mut notes = Vec::new();
    let mut ok = true;
    for delta_mhz in [0.0, 0.6, 1.0] {
        let m = dce_model(&p, &dce_settings(0.05, angular(delta_mhz * 1e6))).map_err(|e| e.to_string())?;
        let rho = m.steady_state().map_err(|e| e.to_string())?;
        let opts = SpectrumOptions {
            frame_offset: m.frame,
            ..Default::default()
        };
        let s = spectrum(&m.liouvillian, &rho, &m.b, p.mech_decay, &omegas, &opts).map_err(|e| e.to_string())?;
        let omega_c = 2.0 * m.frame;
        if delta_mhz == 0.0 {
            let single = s.peak_locations.len() == 1 && (s.peak_locations[0].0 - omega_c / 2.0).abs() <= dw;
            ok &= single;
            notes.push(format!(
                "Delta_d = 0: {} peak(s), offset {:.2} kHz",
                s.peak_locations.len(),
                s.peak_locations.first().map(|q| khz(q.0 - omega_c / 2.0)).unwrap_or(f64::NAN)
            ));
        } else {
            let two = s.peak_locations.len() == 2;
            let sum_err = if two { (s.peak_locations[0].0 + s.peak_locations[1].0 - omega_c).abs() } else { f64::INFINITY };
            ok &= two && sum_err <= 2.0 * dw;
            notes.push(format!(
                "Delta_d/2pi = {delta_mhz} MHz: {} peaks, |w' + w'' - w_c| = {:.2} grid spacings",
                s.peak_locations.len(),
                sum_err / dw
            ));
        }
    }
    Ok((ok, notes.join("; ")))
}

/// Signal-to-noise ratio against thermal occupation.
fn snr_scan_check() -> Outcome {
    let p = SystemParams::saw_reference();
    let drive = DriveSpec::QubitCosine {
        amplitude: angular(100e6),
        omega: None,
        phase: 0.0,
    };
    let ns = [0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0];
    let scan = snr_scan(&p, &drive, &ns, &SnrModel::Dressed { mech_dim: 40 }).map_err(|e| e.to_string())?;
    let n27 = thermal_occupation(0.027, p.omega_m).map_err(|e| e.to_string())?;
    let full = snr(&p, &drive, 1.0, &SnrModel::Full { mech_dim: 30 }).map_err(|e| e.to_string())?;
    let effective_at_1 = scan.snr[2];
    Ok((
        scan.strictly_decreasing && scan.crossings == 1,
        format!(
            "SNR = [{}] over n_th = {ns:?}; crossing at n_th = {} vs n_th(27 mK) = {n27:.3}; qubit-explicit check at n_th = 1: {full:.3} vs {effective_at_1:.3}",
            scan.snr.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(", "),
            scan.crossing.map(|c| format!("{c:.3}")).unwrap_or_else(|| "none".into())
        ),
    ))
}

/// Compact versions of the always-on property suites.
fn property_suites() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut rand_m = |n: usize| DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let opts = EvolveOptions {
        tol: Tolerances { rtol: 1e-12, atol: 1e-14 },
        ..Default::default()
    };
    let (mut drift, mut herm, mut min_eig, mut oracle): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..20 {
        let n = 2 + k % 4;
        let space = CompositeSpace::single(n).unwrap();
        let hm = rand_m(n);
        let h = Operator::from_dense(&space, &((&hm + hm.adjoint()) * Complex64::new(0.5, 0.0))).unwrap();
        let mut c = CollapseSet::new();
        for _ in 0..(1 + k % 3) {
            c.push(Operator::from_dense(&space, &rand_m(n)).unwrap(), 0.2).unwrap();
        }
        let a = rand_m(n);
        let r = &a * a.adjoint();
        let tr = r.trace();
        let rho0 = QuantumState::density(&space, r / tr).unwrap();
        let grid: Vec<f64> = (0..=6).map(|j| j as f64 * 0.25).collect();
        let t = evolve(&rho0, &TimeDependentHamiltonian::constant(h.clone()), &c, &grid, &[], &opts).map_err(|e| e.to_string())?;
        drift = drift.max(t.max_trace_drift);
        herm = herm.max(t.max_hermiticity_defect);
        min_eig = min_eig.min(t.min_eigenvalue);
        let l = liouvillian(&h, &c).map_err(|e| e.to_string())?;
        let want = propagate_dense(&propagator_oracle(&l, 1.5).map_err(|e| e.to_string())?, &rho0.density_matrix());
        let err = (t.final_state.density_matrix() - want).iter().map(|z| z.norm()).fold(0.0, f64::max);
        oracle = oracle.max(err);
    }

    let (mut occ_err, mut g2_err): (f64, f64) = (0.0, 0.0);
    for n_th in [0.3, 1.0, 2.0] {
        let b = ladder(70).unwrap();
        let l = liouvillian(&(&number(70).unwrap() * 1.7), &CollapseSet::thermal(&b, 0.3, n_th).unwrap()).unwrap();
        let rho = steady_state_with(&l, None, &SteadyOptions::default()).map_err(|e| e.to_string())?.state;
        occ_err = occ_err.max((expect(&(&b.adjoint() * &b), &rho).unwrap().re - n_th).abs());
        g2_err = g2_err.max((g2(&l, &rho, &b, &[0.0]).map_err(|e| e.to_string())?.g2_zero - 2.0).abs());
    }

    let mut symp: f64 = 0.0;
    for k in 0..50 {
        let kappa = 0.1 + k as f64 * 0.2;
        let cfg = MpaConfig {
            alpha: Complex64::new(0.9 * kappa / 4.0 * (k as f64 / 50.0), 0.0),
            phi: -3.1 + 0.124 * k as f64,
            kappa,
            kerr: 0.0,
            input: Complex64::new(0.0, 0.0),
            n_c: f64::INFINITY,
        };
        let m = quadrature_matrix(&cfg, 0.0);
        let lam = nalgebra::Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]).symmetric_eigen().eigenvalues;
        symp = symp.max(((1.0 + kappa / lam[0]) * (1.0 + kappa / lam[1]) - 1.0).abs());
    }

    let ok = drift <= 1e-8 && herm <= 1e-8 && min_eig >= -1e-6 && oracle <= 1e-8 && occ_err <= 1e-6 && g2_err <= 1e-3 && symp <= 1e-6;
    Ok((
        ok,
        format!(
            "trace drift {drift:.1e}, hermiticity {herm:.1e}, min eigenvalue {min_eig:.1e}, oracle {oracle:.1e} (20 systems), n_th error {occ_err:.1e}, thermal g2(0) error {g2_err:.1e}, symplectic {symp:.1e}"
        ),
    ))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "coupling constant", coupling_constant),
        (2, "model reduction", model_reduction),
        (3, "frequency shift", frequency_shift),
        (4, "parametric gain", mpa_gain),
        (5, "critical gain", critical_gain),
        (6, "DCE output rate", dce_rate),
        (7, "DCE statistics", dce_statistics),
        (8, "DCE spectrum", dce_spectrum),
        (9, "SNR scan", snr_scan_check),
        (10, "property suites", property_suites),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let (ok, msg) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} ({name}): {msg} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
