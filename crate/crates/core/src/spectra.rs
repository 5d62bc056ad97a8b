//! Output-field statistics of the phonon pair source: emission rate,
//! second-order correlations, emission spectrum and signal-to-noise ratio.
//!
//! With vacuum input, normally ordered output correlators are `kappa`
//! times the intracavity ones, so everything here is computed from `b`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    floquet_steady_state, liouvillian, steady_state_with, CollapseSet, Dopri5, Liouvillian, PeriodicOptions, SteadyOptions,
    SuperopSystem, TimeDependentHamiltonian, Tolerances,
};
use crate::effective::{dressed_kerr, dressed_mech_frequency};
use crate::error::{Result, UomError};
use crate::hamiltonians::{
    build_full_hamiltonian, build_qubit_mech_hamiltonian, coupling_g, kerr_term, mpa_constants, DriveSpec, Envelope, SystemParams, HBAR,
    K_B,
};
use crate::hilbert::{expect, mode_op, qubit_op, CompositeSpace, Operator, Pauli, QuantumState, Subsystem};
use crate::parallel::try_par_map;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `integral S(w) dw / (kappa <b^dag b>)` for the convention used by [`spectrum`].
pub const SPECTRUM_NORMALIZATION: f64 = PI;

/// Bose occupation `1 / (exp(hbar w / k_B T) - 1)`.
pub fn thermal_occupation(temperature: f64, omega: f64) -> Result<f64> {
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(UomError::InvalidArgument(format!("temperature must be >= 0, got {temperature}")));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(UomError::InvalidArgument(format!("frequency must be > 0, got {omega}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (K_B * temperature)).exp_m1())
}

/// `P_out = kappa <b^dag b>` in phonons per second.
pub fn output_rate(state: &QuantumState, b: &Operator, kappa: f64) -> Result<f64> {
    let n = expect(&(&b.adjoint() * b), state)?.re;
    Ok(kappa * n.max(0.0))
}

fn check_delays(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(UomError::InvalidArgument("empty delay grid".into()));
    }
    if taus[0] < 0.0 || taus.windows(2).any(|w| w[1] < w[0]) || taus.iter().any(|t| !t.is_finite()) {
        return Err(UomError::InvalidArgument("delays must be finite, >= 0 and non-decreasing".into()));
    }
    Ok(())
}

/// Propagates `x0` through `exp(L tau)` and records `Tr(B X(tau))`.
fn regress(l: &Liouvillian, x0: DMatrix<Complex64>, b: &Operator, taus: &[f64]) -> Result<Vec<Complex64>> {
    check_delays(taus)?;
    let n = l.dim();
    if b.dim() != n || x0.nrows() != n {
        return Err(UomError::InvalidDimension(format!(
            "operator of dimension {} on a Liouvillian of dimension {n}",
            b.dim()
        )));
    }
    let scale = x0.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut ode = Dopri5::new(n * n, Tolerances { rtol: 1e-9, atol: 1e-12 * scale });
    ode.max_steps = 10_000_000;
    let mut sys = SuperopSystem { l: l.matrix() };
    let mut y: Vec<Complex64> = x0.as_slice().to_vec();
    let mut t = 0.0;
    let bd = b.to_dense();
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        ode.integrate(&mut sys, t, tau, &mut y)?;
        t = tau;
        // Tr(B X) with X stored column-major
        let mut acc = ZERO;
        for j in 0..n {
            for i in 0..n {
                acc += bd[(j, i)] * y[i + j * n];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// `<A(0) B(tau)> = Tr[B exp(L tau)(rho A)]` by the quantum regression theorem.
pub fn two_time_correlation(l: &Liouvillian, rho: &QuantumState, a: &Operator, b: &Operator, taus: &[f64]) -> Result<Vec<Complex64>> {
    let x0 = rho.density_matrix() * a.to_dense();
    regress(l, x0, b, taus)
}

/// `<A^dag(0) B(tau) A(0)> = Tr[B exp(L tau)(A rho A^dag)]`.
pub fn sandwich_correlation(l: &Liouvillian, rho: &QuantumState, a: &Operator, b: &Operator, taus: &[f64]) -> Result<Vec<Complex64>> {
    let ad = a.to_dense();
    let x0 = &ad * rho.density_matrix() * ad.adjoint();
    regress(l, x0, b, taus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub delays: Vec<f64>,
    pub g2: Vec<f64>,
    pub g2_zero: f64,
}

/// Normalized `g2(tau) = <b^dag b^dag(tau) b(tau) b> / <b^dag b>^2`.
pub fn g2(l: &Liouvillian, rho: &QuantumState, b: &Operator, taus: &[f64]) -> Result<CorrelationResult> {
    let num = &b.adjoint() * b;
    let n = expect(&num, rho)?.re;
    if !(n > 1e-12) {
        return Err(UomError::UndefinedCorrelation(format!("mode occupation {n:.3e} is too small for g2")));
    }
    let pair = &(&b.adjoint() * &b.adjoint()) * &(b * b);
    let g2_zero = expect(&pair, rho)?.re / (n * n);
    let raw = sandwich_correlation(l, rho, b, &num, taus)?;
    Ok(CorrelationResult {
        delays: taus.to_vec(),
        g2: raw.iter().map(|z| (z.re / (n * n)).max(0.0)).collect(),
        g2_zero,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Frequencies with `frame_offset` added back.
    pub frequencies: Vec<f64>,
    pub density: Vec<f64>,
    /// `(frequency, height)`, tallest first.
    pub peak_locations: Vec<(f64, f64)>,
    pub frame_offset: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    /// Largest delay; `None` picks `30 / kappa`.
    pub tau_max: Option<f64>,
    pub delay_points: usize,
    /// Added to the rotating-frame frequencies for reporting.
    pub frame_offset: f64,
    /// Peaks below this fraction of the tallest are dropped.
    pub peak_threshold: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            tau_max: None,
            delay_points: 2400,
            frame_offset: 0.0,
            peak_threshold: 0.05,
        }
    }
}

/// `integral_0^h (c0 + (c1 - c0) u / h) e^{i w u} du`, exact for linear data.
fn filon_segment(c0: Complex64, c1: Complex64, w: f64, h: f64) -> Complex64 {
    let th = w * h;
    let (i0, i1) = if th.abs() < 1e-3 {
        // series of the moments int e^{i w u} and int (u/h) e^{i w u}
        let j = I * th;
        (
            h * (1.0 + j / 2.0 + j * j / 6.0 + j * j * j / 24.0),
            h * (0.5 + j / 3.0 + j * j / 8.0 + j * j * j / 30.0),
        )
    } else {
        let e = Complex64::from_polar(1.0, th);
        let iw = I * w;
        let m0 = (e - 1.0) / iw;
        (m0, (e * h / iw - m0 / iw) / h)
    };
    c0 * (i0 - i1) + c1 * i1
}

/// `Re integral_0^inf C(tau) e^{i w tau} dtau` for `C` sampled on a uniform
/// grid, with piecewise-linear Filon panels and an exponential tail fitted
/// to the last tenth of the samples.
pub fn half_line_transform(delays: &[f64], corr: &[Complex64], omegas: &[f64]) -> Result<(Vec<f64>, Option<String>)> {
    let m = delays.len();
    if m < 10 || corr.len() != m {
        return Err(UomError::InvalidArgument("transform needs >= 10 matching samples".into()));
    }
    let h = delays[1] - delays[0];
    if !(h > 0.0) || delays.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(UomError::InvalidArgument("transform needs a uniform delay grid".into()));
    }
    let k = m / 10;
    let (cl, cp) = (corr[m - 1], corr[m - 1 - k]);
    let mut note = None;
    let rate = if cl.norm() > 0.0 && cp.norm() > 0.0 {
        let s = (cl / cp).ln() / (k as f64 * h);
        if s.re < 0.0 {
            Some(s)
        } else {
            note = Some("correlation tail does not decay; tail omitted".to_string());
            None
        }
    } else {
        None
    };
    let t_end = delays[m - 1];
    let out = omegas
        .iter()
        .map(|&w| {
            let mut acc = ZERO;
            for j in 0..m - 1 {
                acc += Complex64::from_polar(1.0, w * delays[j]) * filon_segment(corr[j], corr[j + 1], w, h);
            }
            if let Some(s) = rate {
                acc += cl * Complex64::from_polar(1.0, w * t_end) * (-1.0 / (s + I * w));
            }
            acc.re
        })
        .collect();
    Ok((out, note))
}

/// Local maxima above `threshold * max`, parabola-refined, tallest first.
pub fn find_peaks(xs: &[f64], ys: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    let top = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks = Vec::new();
    for i in 1..ys.len().saturating_sub(1) {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        if b > a && b >= c && b >= threshold * top {
            let den = a - 2.0 * b + c;
            let shift = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            let x = xs[i] + shift * (xs[i + 1] - xs[i - 1]) / 2.0;
            let y = b - 0.25 * (a - c) * shift;
            peaks.push((x, y));
        }
    }
    peaks.sort_by(|p, q| q.1.total_cmp(&p.1));
    peaks
}

/// Emission spectrum `S(w) = kappa Re integral_0^inf <b^dag(0) b(tau)> e^{i w tau} dtau`
/// on a rotating-frame grid. Integrates to `pi kappa <b^dag b>` over all `w`.
pub fn spectrum(l: &Liouvillian, rho: &QuantumState, b: &Operator, kappa: f64, omegas: &[f64], opts: &SpectrumOptions) -> Result<SpectrumResult> {
    if !(kappa > 0.0) {
        return Err(UomError::InvalidArgument("kappa must be positive".into()));
    }
    if opts.delay_points < 10 {
        return Err(UomError::InvalidArgument("need at least 10 delay points".into()));
    }
    let tau_max = opts.tau_max.unwrap_or(30.0 / kappa);
    let mut warnings = Vec::new();
    if kappa * tau_max < 5.0 {
        warnings.push(format!("delay span kappa tau_max = {:.2} < 5 limits the resolution", kappa * tau_max));
    }
    let taus: Vec<f64> = (0..opts.delay_points).map(|j| tau_max * j as f64 / (opts.delay_points - 1) as f64).collect();
    let corr = two_time_correlation(l, rho, &b.adjoint(), b, &taus)?;
    let (raw, note) = half_line_transform(&taus, &corr, omegas)?;
    warnings.extend(note);
    let density: Vec<f64> = raw.iter().map(|s| kappa * s).collect();
    let frequencies: Vec<f64> = omegas.iter().map(|w| w + opts.frame_offset).collect();
    let peak_locations = find_peaks(&frequencies, &density, opts.peak_threshold);
    Ok(SpectrumResult {
        frequencies,
        density,
        peak_locations,
        frame_offset: opts.frame_offset,
        warnings,
    })
}

/// A static rotating-frame model of a pumped phonon mode.
#[derive(Debug, Clone)]
pub struct PairModel {
    pub liouvillian: Liouvillian,
    pub space: CompositeSpace,
    pub b: Operator,
    /// Phonon rotating-frame frequency (half the pump frequency).
    pub frame: f64,
    /// Effective two-phonon pump amplitude in `A b^dag^2 + h.c.`.
    pub pair_amplitude: Complex64,
}

impl PairModel {
    pub fn steady_state(&self) -> Result<QuantumState> {
        Ok(steady_state_with(&self.liouvillian, None, &SteadyOptions::default())?.state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DceSettings {
    /// Cavity drive strength.
    pub epsilon: f64,
    /// `w_c - 2 w~`, with `w~` the dressed phonon frequency.
    pub delta_d: f64,
    pub cavity_dim: usize,
    pub mech_dim: usize,
}

/// Mean cavity field `-i eps / (gamma / 2)` for a resonant drive.
pub fn cavity_amplitude(params: &SystemParams, epsilon: f64) -> Result<Complex64> {
    if !(params.cavity_decay > 0.0) {
        return Err(UomError::InvalidArgument("cavity drive needs a cavity decay rate".into()));
    }
    Ok(Complex64::new(0.0, -epsilon) / (params.cavity_decay / 2.0))
}

/// Reduced cavity-phonon pair source. The cavity is driven on resonance and
/// displaced by its mean field `alpha_c`; the phonon frame is at `w_c / 2`:
///
/// `H = -(D/2) b^dag b + G1 (alpha_c^* b^2 + alpha_c b^dag^2) + G1 (a^dag b^2 + a b^dag^2)`.
pub fn dce_model(params: &SystemParams, s: &DceSettings) -> Result<PairModel> {
    params.validate()?;
    if !(s.epsilon >= 0.0 && s.epsilon.is_finite() && s.delta_d.is_finite()) {
        return Err(UomError::InvalidArgument("epsilon must be >= 0 and delta_d finite".into()));
    }
    let space = CompositeSpace::cavity_mech(s.cavity_dim, s.mech_dim)?;
    let a = mode_op(&space, Subsystem::Cavity)?;
    let b = mode_op(&space, Subsystem::Mech)?;
    let g1 = coupling_g(1, params);
    let alpha_c = cavity_amplitude(params, s.epsilon)?;
    let bb = &b * &b;
    let bd2 = &b.adjoint() * &b.adjoint();
    let pump = &(&bd2 * (alpha_c * g1)) + &(&bb * (alpha_c.conj() * g1));
    let up = &a.adjoint() * &bb;
    let h = &(&(&(&b.adjoint() * &b) * (-s.delta_d / 2.0)) + &pump) + &(&(&up + &up.adjoint()) * g1);
    let mut c = CollapseSet::thermal(&b, params.mech_decay, params.n_th)?;
    c.push(a, params.cavity_decay)?;
    let w_dressed = dressed_mech_frequency(params, 0.0, &CompositeSpace::qubit_mech(s.mech_dim.max(8))?)?;
    Ok(PairModel {
        liouvillian: liouvillian(&h, &c)?,
        space,
        b,
        frame: w_dressed + s.delta_d / 2.0,
        pair_amplitude: alpha_c * g1,
    })
}

/// Phonon mode whose frequency is modulated by a longitudinal qubit drive
/// `Omega_d sz cos(W t)`, in the frame at `W / 2`:
///
/// `H = (w~ - W/2) b^dag b + A b^dag^2 + A^* b^2 - K b^dag^2 b^2`, `A = Omega_d (g_x / w_q)^2`.
pub fn modulated_model(params: &SystemParams, omega_d: f64, big_omega: f64, mech_dim: usize, kerr: Option<f64>) -> Result<PairModel> {
    params.validate()?;
    if !(big_omega > 0.0) {
        return Err(UomError::InvalidArgument("modulation frequency must be positive".into()));
    }
    let space = CompositeSpace::mech(mech_dim)?;
    let b = mode_op(&space, Subsystem::Mech)?;
    let k = mpa_constants(params, omega_d, 0.0, false);
    let w_dressed = dressed_mech_frequency(params, 0.0, &CompositeSpace::qubit_mech(mech_dim.max(8))?)?;
    let bd2 = &b.adjoint() * &b.adjoint();
    let h = &(&(&(&b.adjoint() * &b) * (w_dressed - big_omega / 2.0)) + &(&(&bd2 * k.alpha) + &(&(&b * &b) * k.alpha.conj())))
        + &kerr_term(&space, kerr.unwrap_or(k.kerr))?;
    let c = CollapseSet::thermal(&b, params.mech_decay, params.n_th)?;
    Ok(PairModel {
        liouvillian: liouvillian(&h, &c)?,
        space,
        b,
        frame: big_omega / 2.0,
        pair_amplitude: k.alpha,
    })
}

#[derive(Debug, Clone)]
pub struct FullDceSteady {
    pub state: QuantumState,
    pub phonons: f64,
    pub output_rate: f64,
    pub residual: f64,
    /// Largest population of the two highest levels of the cavity or phonon.
    pub tail: f64,
    pub drive_frequency: f64,
}

/// Periodic steady state of the full qubit-cavity-phonon model under a
/// resonant cavity drive at twice the dressed phonon frequency.
///
/// The cavity is split as `a = alpha(t) + a'` with the classical response
/// `alpha(t) = alpha_c e^{-i w t}`; the drive then acts on the qubit as
/// `2 g_z |alpha_c| sz cos(w t - arg alpha_c)` and `a'` starts near vacuum.
pub fn dce_full_steady(params: &SystemParams, epsilon: f64, space: &CompositeSpace, opts: &PeriodicOptions) -> Result<FullDceSteady> {
    params.validate()?;
    let nu = dressed_mech_frequency(params, 0.0, space)?;
    let mut p = *params;
    // tune the cavity onto the two-phonon resonance
    p.omega_c0 = 2.0 * nu + p.omega_d;
    let alpha_c = cavity_amplitude(&p, epsilon)?;
    let h0 = build_full_hamiltonian(&p, space)?;
    let sz = qubit_op(space, Pauli::Z)?;
    let h = TimeDependentHamiltonian::constant(h0).with_term(
        sz,
        Envelope::Cos {
            amp: 2.0 * p.g_z() * alpha_c.norm(),
            omega: 2.0 * nu,
            phase: -alpha_c.arg(),
        },
    );
    let b = mode_op(space, Subsystem::Mech)?;
    let mut c = CollapseSet::thermal(&b, p.mech_decay, p.n_th)?;
    c.push(mode_op(space, Subsystem::Cavity)?, p.cavity_decay)?;
    c.push(qubit_op(space, Pauli::Minus)?, p.qubit_decay)?;
    let ss = floquet_steady_state(&h, &c, nu, opts)?;
    let phonons = expect(&(&b.adjoint() * &b), &ss.state)?.re;
    let tail = ss
        .state
        .tail_populations(2)
        .iter()
        .filter(|(l, _)| *l != Subsystem::Qubit)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    Ok(FullDceSteady {
        output_rate: p.mech_decay * phonons,
        phonons,
        residual: ss.residual,
        tail,
        drive_frequency: 2.0 * nu,
        state: ss.state,
    })
}

/// Model used for the signal-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SnrModel {
    /// Static pumped-phonon model with Kerr `-K b^dag^2 b^2` (`None`: `K = g_x^4 / w_q^3`).
    Effective { mech_dim: usize, kerr: Option<f64> },
    /// Static pumped-phonon model with the Kerr of the dressed qubit-ground
    /// ladder from exact diagonalization.
    Dressed { mech_dim: usize },
    /// Qubit and phonon with the lab-frame longitudinal pump.
    Full { mech_dim: usize },
}

fn pump_of(drive: &DriveSpec) -> Result<(f64, Option<f64>, f64)> {
    drive.validate()?;
    match *drive {
        DriveSpec::QubitCosine { amplitude, omega, phase } => Ok((amplitude, omega, phase)),
        DriveSpec::CurrentSinusoid { amplitude, omega } => Ok((amplitude, omega, 0.0)),
        _ => Err(UomError::InvalidArgument("SNR needs a periodic longitudinal qubit drive".into())),
    }
}

/// Phonon number with the modulation on and off.
fn phonons_on_off(params: &SystemParams, drive: &DriveSpec, model: &SnrModel) -> Result<(f64, f64)> {
    let (amp, omega, phase) = pump_of(drive)?;
    match *model {
        SnrModel::Effective { mech_dim, kerr } => {
            let w_dressed = dressed_mech_frequency(params, 0.0, &CompositeSpace::qubit_mech(mech_dim.max(8))?)?;
            let big = omega.unwrap_or(2.0 * w_dressed);
            let n = |a: f64| -> Result<f64> {
                let m = modulated_model(params, a, big, mech_dim, kerr)?;
                let rho = m.steady_state()?;
                Ok(expect(&(&m.b.adjoint() * &m.b), &rho)?.re)
            };
            let _ = phase;
            Ok((n(amp)?, n(0.0)?))
        }
        SnrModel::Dressed { mech_dim } => {
            let kd = dressed_kerr(params, &CompositeSpace::qubit_mech(mech_dim.max(8))?)?;
            phonons_on_off(params, drive, &SnrModel::Effective { mech_dim, kerr: Some(-kd) })
        }
        SnrModel::Full { mech_dim } => {
            let space = CompositeSpace::qubit_mech(mech_dim)?;
            let nu = dressed_mech_frequency(params, 0.0, &space)?;
            let big = omega.unwrap_or(2.0 * nu);
            let h0 = build_qubit_mech_hamiltonian(params, &space)?;
            let b = mode_op(&space, Subsystem::Mech)?;
            let nb = &b.adjoint() * &b;
            let mut c = CollapseSet::thermal(&b, params.mech_decay, params.n_th)?;
            c.push(qubit_op(&space, Pauli::Minus)?, params.qubit_decay)?;
            let off = steady_state_with(&liouvillian(&h0, &c)?, None, &SteadyOptions::default())?.state;
            let h = TimeDependentHamiltonian::constant(h0).with_term(qubit_op(&space, Pauli::Z)?, Envelope::Cos { amp, omega: big, phase });
            let on = floquet_steady_state(&h, &c, big / 2.0, &PeriodicOptions::default())?.state;
            Ok((expect(&nb, &on)?.re, expect(&nb, &off)?.re))
        }
    }
}

/// `SNR = (P_out - P_out^th) / P_out^th` at thermal occupation `n_th`;
/// `+inf` at `n_th = 0`.
pub fn snr(params: &SystemParams, drive: &DriveSpec, n_th: f64, model: &SnrModel) -> Result<f64> {
    if !(n_th >= 0.0 && n_th.is_finite()) {
        return Err(UomError::InvalidArgument(format!("n_th must be >= 0, got {n_th}")));
    }
    if n_th == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut p = *params;
    p.n_th = n_th;
    let (on, off) = phonons_on_off(&p, drive, model)?;
    let (p_on, p_off) = (p.mech_decay * on, p.mech_decay * off);
    if !(p_off > 0.0) {
        return Err(UomError::Inconsistent(format!("zero thermal output at n_th = {n_th}")));
    }
    Ok((p_on - p_off) / p_off)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrScan {
    pub n_th: Vec<f64>,
    pub snr: Vec<f64>,
    /// `n_th` where SNR crosses 1, by linear interpolation, when there is exactly one crossing.
    pub crossing: Option<f64>,
    pub crossings: usize,
    pub strictly_decreasing: bool,
}

pub fn snr_scan(params: &SystemParams, drive: &DriveSpec, n_ths: &[f64], model: &SnrModel) -> Result<SnrScan> {
    let snr_values = try_par_map(n_ths, |&n| snr(params, drive, n, model))?;
    let mut crossings = Vec::new();
    for j in 0..n_ths.len().saturating_sub(1) {
        let (a, b) = (snr_values[j] - 1.0, snr_values[j + 1] - 1.0);
        if a.is_finite() && b.is_finite() && a * b < 0.0 {
            crossings.push(n_ths[j] + (n_ths[j + 1] - n_ths[j]) * a / (a - b));
        } else if a.is_infinite() && b < 0.0 {
            crossings.push(n_ths[j + 1]);
        }
    }
    Ok(SnrScan {
        n_th: n_ths.to_vec(),
        strictly_decreasing: snr_values.windows(2).all(|w| w[1] < w[0]),
        snr: snr_values,
        crossing: if crossings.len() == 1 { Some(crossings[0]) } else { None },
        crossings: crossings.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{ladder, number};
    use approx::assert_relative_eq;

    fn thermal_mode(dim: usize, w: f64, kappa: f64, n_th: f64) -> (Liouvillian, QuantumState, Operator) {
        let b = ladder(dim).unwrap();
        let h = &number(dim).unwrap() * w;
        let l = liouvillian(&h, &CollapseSet::thermal(&b, kappa, n_th).unwrap()).unwrap();
        let rho = steady_state_with(&l, None, &SteadyOptions::default()).unwrap().state;
        (l, rho, b)
    }

    #[test]
    fn bose_function() {
        assert_eq!(thermal_occupation(0.0, 1.0).unwrap(), 0.0);
        let w = 2.0 * PI * 250e6;
        assert_relative_eq!(thermal_occupation(0.027, w).unwrap(), 1.7877, max_relative = 2e-3);
        // Rayleigh-Jeans at hbar w / k T = 0.05
        let t = HBAR * w / (K_B * 0.05);
        let n = thermal_occupation(t, w).unwrap();
        assert!((n - 20.0).abs() / 20.0 < 0.05);
        assert!(thermal_occupation(-1.0, w).is_err());
    }

    #[test]
    fn damped_thermal_correlation() {
        let (w, kappa, n_th) = (1.3, 0.4, 0.7);
        let (l, rho, b) = thermal_mode(30, w, kappa, n_th);
        let taus: Vec<f64> = (0..40).map(|j| j as f64 * 0.25).collect();
        let c = two_time_correlation(&l, &rho, &b.adjoint(), &b, &taus).unwrap();
        for (t, z) in taus.iter().zip(&c) {
            let want = Complex64::from_polar(n_th * (-kappa * t / 2.0).exp(), -w * t);
            assert!((z - want).norm() < 1e-6, "tau {t}: {z} vs {want}");
        }
    }

    #[test]
    fn zero_delay_is_plain_expectation() {
        let (l, rho, b) = thermal_mode(20, 0.5, 1.0, 0.4);
        let c = two_time_correlation(&l, &rho, &b.adjoint(), &b, &[0.0]).unwrap();
        assert_relative_eq!(c[0].re, 0.4, max_relative = 1e-6);
    }

    #[test]
    fn thermal_and_coherent_g2() {
        let (l, rho, b) = thermal_mode(40, 0.5, 1.0, 0.8);
        let taus: Vec<f64> = (0..30).map(|j| j as f64).collect();
        let r = g2(&l, &rho, &b, &taus).unwrap();
        assert!((r.g2_zero - 2.0).abs() < 1e-3, "{}", r.g2_zero);
        assert!((r.g2[0] - r.g2_zero).abs() < 1e-8);
        assert!((r.g2.last().unwrap() - 1.0).abs() < 0.1);

        let dim = 25;
        let a = ladder(dim).unwrap();
        let h = &(&number(dim).unwrap() * 0.3) + &(&(&a + &a.adjoint()) * 0.6);
        let mut c = CollapseSet::new();
        c.push(a.clone(), 1.0).unwrap();
        let l = liouvillian(&h, &c).unwrap();
        let rho = steady_state_with(&l, None, &SteadyOptions::default()).unwrap().state;
        let r = g2(&l, &rho, &a, &[0.0, 1.0]).unwrap();
        assert!((r.g2_zero - 1.0).abs() < 1e-6);

        let (l, rho, b) = thermal_mode(5, 0.5, 1.0, 0.0);
        assert!(matches!(g2(&l, &rho, &b, &[0.0]), Err(UomError::UndefinedCorrelation(_))));
    }

    #[test]
    fn lorentzian_spectrum() {
        let (w, kappa, n_th) = (2.0, 0.5, 0.6);
        let (l, rho, b) = thermal_mode(30, w, kappa, n_th);
        let omegas: Vec<f64> = (0..=1600).map(|j| w - 20.0 + 40.0 * j as f64 / 1600.0).collect();
        let s = spectrum(&l, &rho, &b, kappa, &omegas, &SpectrumOptions::default()).unwrap();
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);
        for (x, y) in s.frequencies.iter().zip(&s.density).step_by(50) {
            let want = kappa * n_th * (kappa / 2.0) / ((kappa / 2.0).powi(2) + (x - w).powi(2));
            assert!((y - want).abs() < 5e-4 * 2.0 * n_th, "{x}: {y} vs {want}");
        }
        assert_eq!(s.peak_locations.len(), 1);
        assert!((s.peak_locations[0].0 - w).abs() < 1e-3);
        let dw = omegas[1] - omegas[0];
        let total: f64 = s.density.iter().sum::<f64>() * dw;
        assert!((total / (SPECTRUM_NORMALIZATION * kappa * n_th) - 1.0).abs() < 0.05);
    }

    #[test]
    fn short_span_is_flagged() {
        let (l, rho, b) = thermal_mode(10, 0.0, 1.0, 0.3);
        let opts = SpectrumOptions {
            tau_max: Some(2.0),
            delay_points: 50,
            ..Default::default()
        };
        let s = spectrum(&l, &rho, &b, 1.0, &[0.0, 0.1], &opts).unwrap();
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn vacuum_has_no_output() {
        let (_, rho, b) = thermal_mode(6, 1.0, 1.0, 0.0);
        assert!(output_rate(&rho, &b, 3.0).unwrap() < 1e-12);
        let (_, rho, b) = thermal_mode(40, 1.0, 2.0, 0.5);
        assert_relative_eq!(output_rate(&rho, &b, 2.0).unwrap(), 1.0, max_relative = 1e-6);
    }

    #[test]
    fn modulation_off_gives_zero_snr() {
        let p = SystemParams::saw_reference();
        let drive = DriveSpec::QubitCosine {
            amplitude: 0.0,
            omega: None,
            phase: 0.0,
        };
        let model = SnrModel::Effective { mech_dim: 20, kerr: None };
        assert!(snr(&p, &drive, 0.5, &model).unwrap().abs() < 1e-8);
        assert_eq!(snr(&p, &drive, 0.0, &model).unwrap(), f64::INFINITY);
    }

    #[test]
    fn pair_source_is_squeezed_vacuum() {
        // resonant pump below threshold: N = 8|A|^2/(k^2 - 16|A|^2) and the Gaussian
        // state has |<b^2>|^2 = N(2N + 1)/2, so g2(0) = 3 + 1/(2N). Here
        // the pair field driven into the cavity feeds back as A -> A / (1 + c (2N + 1)),
        // c = 4 G1^2 / (gamma k), at mean-field level
        let p = SystemParams::saw_reference();
        let s = DceSettings {
            epsilon: 0.02 * 2.0 * PI * 1e6,
            delta_d: 0.0,
            cavity_dim: 3,
            mech_dim: 16,
        };
        let m = dce_model(&p, &s).unwrap();
        let rho = m.steady_state().unwrap();
        let n = expect(&(&m.b.adjoint() * &m.b), &rho).unwrap().re;
        let (k, g1) = (p.mech_decay, coupling_g(1, &p));
        let c = 4.0 * g1 * g1 / (p.cavity_decay * k);
        let mut want = 0.0;
        for _ in 0..50 {
            let a = m.pair_amplitude.norm() / (1.0 + c * (2.0 * want + 1.0));
            want = 8.0 * a * a / (k * k - 16.0 * a * a);
        }
        assert!((n / want - 1.0).abs() < 0.05, "{n} vs {want}");
        let r = g2(&m.liouvillian, &rho, &m.b, &[0.0]).unwrap();
        assert!((r.g2_zero / (3.0 + 0.5 / n) - 1.0).abs() < 0.05, "{}", r.g2_zero);
    }
}
