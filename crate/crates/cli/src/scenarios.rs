//! One runner per scenario. Each returns a table plus the diagnostics that
//! go into the metadata file.

use serde::Serialize;
use uom_core::dynamics::{PeriodicOptions, SteadyOptions, Tolerances};
use uom_core::effective::{compare_models, dispersive_coefficients, dressed_kerr, dressed_mech_frequency, tune_two_phonon_resonance};
use uom_core::hamiltonians::{
    angular, build_full_hamiltonian, build_reduced, coupling_g, mpa_constants, shifted_mech_frequency, to_db, validity_bounds,
    DriveSpec, ReducedModel, SystemParams, TWO_PI,
};
use uom_core::hilbert::{expect, CompositeSpace, QuantumState, Subsystem, GROUND};
use uom_core::mpa::{analytic_gain, phase_grid, simulate_gain_with, GainOptions};
use uom_core::parallel::try_par_map;
use uom_core::spectra::{
    dce_full_steady, dce_model, g2, modulated_model, snr_scan, spectrum, thermal_occupation, DceSettings, SnrModel, SpectrumOptions,
};
use uom_core::{Result, UomError};

use crate::config::{DriveHz, ModelChoice, Resolved, Scenario, ScenarioConfig};
use crate::table::{Cell, Table};

/// Fock-tail population above which a mode is flagged as under-truncated.
pub const TAIL_LIMIT: f64 = 1e-3;
/// Input amplitude for the simulated gain runs.
pub const GAIN_INPUT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationFlag {
    pub mode: String,
    pub dim: usize,
    /// Largest population of the two highest levels over the run; `None`
    /// when the solver reports only a pass/fail check.
    pub tail: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverTolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        let t = PeriodicOptions::default().tol;
        Self { rtol: t.rtol, atol: t.atol }
    }
}

impl SolverTolerances {
    fn tol(&self) -> Tolerances {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
        }
    }

    fn periodic(&self) -> PeriodicOptions {
        PeriodicOptions {
            tol: self.tol(),
            ..Default::default()
        }
    }

    fn gain(&self) -> GainOptions {
        GainOptions {
            periodic: self.periodic(),
            steady: SteadyOptions {
                tol: self.tol(),
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub truncation: Vec<TruncationFlag>,
    pub notes: Vec<String>,
}

impl Outcome {
    fn new(table: Table) -> Self {
        Self {
            table,
            truncation: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn probe(&mut self, mode: &str, dim: usize, tail: Option<f64>, failed: bool) {
        match self.truncation.iter_mut().find(|f| f.mode == mode && f.dim == dim) {
            Some(f) => {
                f.tail = match (f.tail, tail) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                f.flagged |= failed;
            }
            None => self.truncation.push(TruncationFlag {
                mode: mode.into(),
                dim,
                tail,
                flagged: failed,
            }),
        }
    }

    fn probe_state(&mut self, state: &QuantumState) {
        let dims = state.space().dims().to_vec();
        let labels = state.space().labels().to_vec();
        for (mode, t) in state.tail_populations(2) {
            let dim = labels.iter().zip(&dims).find(|(l, _)| **l == mode).map(|(_, d)| *d).unwrap_or(0);
            self.probe(mode_name(mode), dim, Some(t), t > TAIL_LIMIT);
        }
    }
}

fn mode_name(s: Subsystem) -> &'static str {
    match s {
        Subsystem::Qubit => "qubit",
        Subsystem::Cavity => "cavity",
        Subsystem::Mech => "mech",
        Subsystem::Other => "other",
    }
}

fn hz(w: f64) -> f64 {
    w / TWO_PI
}

/// Default truncations, by scenario and model.
pub fn dims(cfg: &ScenarioConfig) -> (usize, usize) {
    let (c, m) = match (cfg.scenario, cfg.model) {
        (Scenario::Rabi, _) => (4, 8),
        (Scenario::FreqShift, _) => (2, 10),
        (Scenario::DceRate, Some(ModelChoice::Full)) => (5, 10),
        (Scenario::DceRate | Scenario::DceG2, _) => (5, 16),
        (Scenario::DceSpectrum, _) => match cfg.drive {
            Some(DriveHz::QubitCosine { .. }) => (2, 30),
            _ => (5, 16),
        },
        (Scenario::SnrScan, Some(ModelChoice::Full)) => (2, 30),
        (Scenario::SnrScan, _) => (2, 40),
        (Scenario::MpaGain, Some(ModelChoice::Full)) => (2, 20),
        (Scenario::MpaGain, _) => (2, 60),
        (Scenario::ParamsReport, _) => (2, 12),
    };
    (cfg.truncations.cavity.unwrap_or(c), cfg.truncations.mech.unwrap_or(m))
}

pub fn run(cfg: &ScenarioConfig, r: &Resolved, tol: &SolverTolerances) -> Result<Outcome> {
    let (nc, nm) = dims(cfg);
    let p = &r.params;
    let g = &cfg.grids;
    // validate() guarantees every unwrap below
    match cfg.scenario {
        Scenario::Rabi => rabi(p, &g.time.unwrap().values(), nc, nm),
        Scenario::FreqShift => freq_shift(p, &g.xi.unwrap().values(), nm),
        Scenario::DceRate => dce_rate(p, &angulars(g.epsilon.as_ref().unwrap()), nc, nm, cfg.model, tol),
        Scenario::DceG2 => dce_g2(p, &angulars(g.epsilon.as_ref().unwrap()), g.delay.as_ref().unwrap(), nc, nm),
        Scenario::DceSpectrum => {
            let omegas = angulars(&g.frequency.unwrap().values());
            match r.drive.unwrap() {
                DriveSpec::CavityCoherent { epsilon, .. } => {
                    dce_spectrum(p, epsilon, &angulars(g.detuning.as_ref().unwrap()), &omegas, nc, nm)
                }
                DriveSpec::QubitCosine { amplitude, .. } => {
                    modulation_spectrum(p, amplitude, &angulars(g.modulation.as_ref().unwrap()), &omegas, nm)
                }
                _ => unreachable!("rejected by validation"),
            }
        }
        Scenario::SnrScan => snr(p, &r.drive.unwrap(), g.n_th.as_ref().unwrap(), nm, cfg.model),
        Scenario::MpaGain => match r.drive.unwrap() {
            DriveSpec::QubitCosine { amplitude, .. } => mpa_gain(p, amplitude, g.phase_points.unwrap(), nm, cfg.model, tol),
            _ => unreachable!("rejected by validation"),
        },
        Scenario::ParamsReport => params_report(p, r.drive.as_ref(), nm),
    }
}

fn angulars(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| angular(x)).collect()
}

fn rabi(p: &SystemParams, times: &[f64], nc: usize, nm: usize) -> Result<Outcome> {
    let space = CompositeSpace::tripartite(nc, nm)?;
    let wt = dressed_mech_frequency(p, 0.0, &CompositeSpace::qubit_mech(nm)?)?;
    let res = tune_two_phonon_resonance(p, &space, 2.0 * wt, angular(1e6))?;
    let mut q = *p;
    q.omega_c0 = res.omega_c + q.omega_d;
    let full = build_full_hamiltonian(&q, &space)?;
    let red = build_reduced(p, &CompositeSpace::cavity_mech(nc, nm)?, ReducedModel::Quadratic)?;
    let psi = space.basis_ket(&[GROUND, 0, 2])?;
    let c = compare_models(&q, &psi, times, &full, &red)?;

    let mut cols = vec![("t", "s")];
    cols.extend(c.observables.iter().map(|(n, _)| (n.as_str(), "1")));
    let ys: Vec<usize> = (1..cols.len()).collect();
    let mut t = Table::new(&cols).with_plot(0, &ys, None);
    for (k, &time) in c.times.iter().enumerate() {
        let mut row: Vec<Cell> = vec![time.into()];
        row.extend(c.observables.iter().map(|(_, s)| Cell::Num(s[k])));
        t.push(row);
    }
    let mut out = Outcome::new(t);
    out.probe("cavity", nc, None, false);
    out.probe("mech", nm, None, false);
    out.notes.push(format!("cavity tuned to {:.6} Hz (two-phonon gap {:.3} Hz)", hz(res.omega_c), hz(res.gap)));
    out.notes.push(format!(
        "oscillation frequency: full {:.3} Hz, reduced {:.3} Hz; max |P(g,1,0) full - reduced| = {:.3e}",
        hz(c.oscillation_frequency_full),
        hz(c.oscillation_frequency_reduced),
        c.max_deviation
    ));
    Ok(out)
}

fn freq_shift(p: &SystemParams, xis: &[f64], nm: usize) -> Result<Outcome> {
    let space = CompositeSpace::qubit_mech(nm)?;
    let w0 = dressed_mech_frequency(p, 0.0, &space)?;
    let rows = try_par_map(xis, |&xi| {
        let formula = shifted_mech_frequency(p, xi).map(|w| hz(w - p.omega_m)).unwrap_or(f64::NAN);
        let numeric = hz(dressed_mech_frequency(p, xi, &space)? - w0);
        Ok((xi, formula, numeric))
    })?;
    let mut t = Table::new(&[("xi", "1"), ("shift analytic", "Hz"), ("shift numeric", "Hz")]).with_plot(0, &[1, 2], None);
    let mut out_of_range = 0;
    for (xi, f, n) in rows {
        out_of_range += f.is_nan() as usize;
        t.push(vec![xi.into(), f.into(), n.into()]);
    }
    let mut out = Outcome::new(t);
    out.probe("mech", nm, None, false);
    if out_of_range > 0 {
        out.notes.push(format!("{out_of_range} xi values outside the square-root formula's domain (written as NaN)"));
    }
    Ok(out)
}

fn settings(eps: f64, delta_d: f64, nc: usize, nm: usize) -> DceSettings {
    DceSettings {
        epsilon: eps,
        delta_d,
        cavity_dim: nc,
        mech_dim: nm,
    }
}

fn dce_rate(p: &SystemParams, eps: &[f64], nc: usize, nm: usize, model: Option<ModelChoice>, tol: &SolverTolerances) -> Result<Outcome> {
    let q = *p;
    let full = model == Some(ModelChoice::Full);
    let rows = try_par_map(eps, |&e| -> Result<(f64, f64, QuantumState)> {
        if full {
            let r = dce_full_steady(&q, e, &CompositeSpace::tripartite(nc, nm)?, &tol.periodic())?;
            if r.residual > 1e-6 {
                return Err(UomError::NonConvergent(format!("periodic residual {:.2e} at eps = {e:.6e}", r.residual)));
            }
            Ok((r.phonons, r.output_rate, r.state))
        } else {
            let m = dce_model(&q, &settings(e, 0.0, nc, nm))?;
            let rho = m.steady_state()?;
            let n = expect(&(&m.b.adjoint() * &m.b), &rho)?.re;
            Ok((n, q.mech_decay * n, rho))
        }
    })?;
    let mut t = Table::new(&[("epsilon", "Hz"), ("phonons", "1"), ("output rate", "1/s")]).with_plot(0, &[2], None);
    let mut out = Outcome::new(Table::new(&[]));
    for (&e, (n, rate, state)) in eps.iter().zip(&rows) {
        t.push(vec![hz(e).into(), (*n).into(), (*rate).into()]);
        out.probe_state(state);
    }
    out.table = t;
    out.notes.push(format!("model: {}", if full { "qubit-explicit periodic steady state" } else { "reduced cavity-phonon pair source" }));
    Ok(out)
}

fn dce_g2(p: &SystemParams, eps: &[f64], delays: &[f64], nc: usize, nm: usize) -> Result<Outcome> {
    let rows = try_par_map(eps, |&e| {
        let m = dce_model(p, &settings(e, 0.0, nc, nm))?;
        let rho = m.steady_state()?;
        let c = g2(&m.liouvillian, &rho, &m.b, delays)?;
        Ok((c, rho))
    })?;
    let mut t = Table::new(&[("epsilon", "Hz"), ("tau", "s"), ("g2", "1")]).with_plot(1, &[2], Some(0));
    let mut out = Outcome::new(Table::new(&[]));
    for (&e, (c, rho)) in eps.iter().zip(&rows) {
        for (tau, v) in c.delays.iter().zip(&c.g2) {
            t.push(vec![hz(e).into(), (*tau).into(), (*v).into()]);
        }
        out.probe_state(rho);
    }
    out.table = t;
    Ok(out)
}

fn spectrum_rows(
    out: &mut Outcome,
    t: &mut Table,
    label: f64,
    m: &uom_core::spectra::PairModel,
    kappa: f64,
    omegas: &[f64],
) -> Result<()> {
    let rho = m.steady_state()?;
    let opts = SpectrumOptions {
        frame_offset: m.frame,
        ..Default::default()
    };
    let s = spectrum(&m.liouvillian, &rho, &m.b, kappa, omegas, &opts)?;
    for (w, d) in s.frequencies.iter().zip(&s.density) {
        t.push(vec![hz(label).into(), hz(*w).into(), hz(*w + m.frame).into(), (*d).into()]);
    }
    let peaks: Vec<String> = s.peak_locations.iter().map(|(w, _)| format!("{:.1}", hz(*w - m.frame))).collect();
    out.notes.push(format!("{:.6e} Hz: peaks at offsets [{}] Hz", hz(label), peaks.join(", ")));
    out.notes.extend(s.warnings.into_iter().map(|w| format!("{:.6e} Hz: {w}", hz(label))));
    out.probe_state(&rho);
    Ok(())
}

fn dce_spectrum(p: &SystemParams, eps: f64, detunings: &[f64], omegas: &[f64], nc: usize, nm: usize) -> Result<Outcome> {
    let models = try_par_map(detunings, |&d| dce_model(p, &settings(eps, d, nc, nm)))?;
    let mut t = Table::new(&[("detuning", "Hz"), ("offset", "Hz"), ("frequency", "Hz"), ("S", "s")]).with_plot(1, &[3], Some(0));
    let mut out = Outcome::new(Table::new(&[]));
    for (&d, m) in detunings.iter().zip(&models) {
        spectrum_rows(&mut out, &mut t, d, m, p.mech_decay, omegas)?;
    }
    out.table = t;
    Ok(out)
}

fn modulation_spectrum(p: &SystemParams, amplitude: f64, mods: &[f64], omegas: &[f64], nm: usize) -> Result<Outcome> {
    let models = try_par_map(mods, |&w| modulated_model(p, amplitude, w, nm, None))?;
    let mut t = Table::new(&[("modulation", "Hz"), ("offset", "Hz"), ("frequency", "Hz"), ("S", "s")]).with_plot(1, &[3], Some(0));
    let mut out = Outcome::new(Table::new(&[]));
    for (&w, m) in mods.iter().zip(&models) {
        spectrum_rows(&mut out, &mut t, w, m, p.mech_decay, omegas)?;
    }
    out.table = t;
    Ok(out)
}

fn snr(p: &SystemParams, drive: &DriveSpec, ns: &[f64], nm: usize, model: Option<ModelChoice>) -> Result<Outcome> {
    let m = match model.unwrap_or(ModelChoice::Dressed) {
        ModelChoice::Reduced => SnrModel::Effective { mech_dim: nm, kerr: None },
        ModelChoice::Dressed => SnrModel::Dressed { mech_dim: nm },
        ModelChoice::Full => SnrModel::Full { mech_dim: nm },
    };
    let scan = snr_scan(p, drive, ns, &m)?;
    let mut t = Table::new(&[("n_th", "1"), ("SNR", "1")]).with_plot(0, &[1], None);
    for (n, s) in ns.iter().zip(&scan.snr) {
        t.push(vec![(*n).into(), (*s).into()]);
    }
    let mut out = Outcome::new(t);
    out.probe("mech", nm, None, false);
    out.notes.push(match scan.crossing {
        Some(c) => format!("SNR = 1 at n_th = {c:.4} ({} crossing(s))", scan.crossings),
        None => "SNR does not cross 1 on this grid".into(),
    });
    out.notes.push(format!("strictly decreasing: {}", scan.strictly_decreasing));
    Ok(out)
}

fn mpa_gain(p: &SystemParams, amplitude: f64, n: usize, nm: usize, model: Option<ModelChoice>, tol: &SolverTolerances) -> Result<Outcome> {
    let full = model == Some(ModelChoice::Full);
    let space = if full { CompositeSpace::qubit_mech(nm)? } else { CompositeSpace::mech(nm)? };
    let alpha = mpa_constants(p, amplitude, 0.0, false).alpha.norm();
    let phis = phase_grid(n);
    let opts = tol.gain();
    let rows = try_par_map(&phis, |&phi| {
        let closed = analytic_gain(phi, alpha, p.mech_decay).map(f64::abs).unwrap_or(f64::NAN);
        Ok((phi, closed, simulate_gain_with(p, amplitude, phi, GAIN_INPUT, &space, &opts)?))
    })?;
    let mut t = Table::new(&[
        ("phi", "rad"),
        ("|G| analytic", "1"),
        ("|G_x| simulated", "1"),
        ("|G_y| simulated", "1"),
        ("phonons", "1"),
        ("converged", "-"),
    ])
    .with_plot(0, &[1, 2], None);
    let mut out = Outcome::new(Table::new(&[]));
    for (phi, closed, g) in rows {
        t.push(vec![
            phi.into(),
            closed.into(),
            g.gain_x.abs().into(),
            g.gain_y.abs().into(),
            g.steady_n.into(),
            (if g.converged { "true" } else { "false" }).into(),
        ]);
        out.probe("mech", nm, None, !g.converged);
    }
    out.table = t;
    out.notes.push(format!(
        "model: {}; |alpha| = {:.3} Hz; input amplitude {GAIN_INPUT}",
        if full { "qubit-explicit periodic steady state" } else { "phonon-only pumped Kerr" },
        hz(alpha)
    ));
    Ok(out)
}

/// Derived constants of a parameter set. The pump defaults to 100 MHz
/// when the drive is not a longitudinal cosine.
pub fn derived_quantities(p: &SystemParams, drive: Option<&DriveSpec>, nm: usize) -> Result<Vec<(String, f64, &'static str)>> {
    let pump = match drive {
        Some(DriveSpec::QubitCosine { amplitude, .. } | DriveSpec::CurrentSinusoid { amplitude, .. }) => *amplitude,
        _ => angular(100e6),
    };
    let g1 = coupling_g(1, p);
    let v = validity_bounds(p, pump, 20.0 * g1.abs());
    let d = dispersive_coefficients(p, 0.0)?;
    let k = mpa_constants(p, pump, 0.0, false);
    let qm = CompositeSpace::qubit_mech(nm)?;
    let wt = dressed_mech_frequency(p, 0.0, &qm)?;
    let mut q = vec![
        ("G0".to_string(), hz(coupling_g(0, p)), "Hz"),
        ("G1".into(), hz(g1), "Hz"),
        ("G2".into(), hz(coupling_g(2, p)), "Hz"),
        ("pump amplitude".into(), hz(pump), "Hz"),
        ("|alpha|".into(), hz(k.alpha.norm()), "Hz"),
        ("Kerr (formula)".into(), hz(k.kerr), "Hz"),
        ("Kerr (dressed)".into(), hz(dressed_kerr(p, &qm)?), "Hz"),
        ("dressed phonon shift".into(), hz(wt - p.omega_m), "Hz"),
        ("N_c (Kerr branch)".into(), v.n_c_kerr, "1"),
        ("N_c (dispersive branch)".into(), v.n_c_dispersive, "1"),
        ("N_c".into(), v.n_c, "1"),
        ("G_c".into(), to_db(v.g_c), "dB"),
        ("G_c (Kerr branch)".into(), to_db(v.g_c_kerr), "dB"),
        ("G_c (Kerr branch, exact)".into(), to_db(v.g_c_kerr_exact), "dB"),
        ("dispersive phonon limit".into(), v.n_dispersive_max, "1"),
        ("xi_max".into(), v.xi_max, "1"),
        ("chi_k at delta_s = 20 |G1|".into(), hz(v.chi_k), "Hz"),
        ("lambda_plus".into(), d.lambda_plus, "1"),
        ("lambda_minus".into(), d.lambda_minus, "1"),
        ("chi".into(), hz(d.chi), "Hz"),
        ("n_th at 27 mK".into(), thermal_occupation(0.027, p.omega_m)?, "1"),
    ];
    if p.cavity_decay > 0.0 && p.mech_decay > 0.0 {
        q.push(("pair back-action 4 G1^2 / (gamma kappa)".into(), 4.0 * g1 * g1 / (p.cavity_decay * p.mech_decay), "1"));
    }
    Ok(q)
}

fn params_report(p: &SystemParams, drive: Option<&DriveSpec>, nm: usize) -> Result<Outcome> {
    let mut t = Table::new(&[("quantity", "-"), ("value", "see unit"), ("unit", "-")]);
    for (name, v, unit) in derived_quantities(p, drive, nm)? {
        t.push(vec![name.into(), v.into(), unit.into()]);
    }
    let mut out = Outcome::new(t);
    out.probe("mech", nm, None, false);
    Ok(out)
}
