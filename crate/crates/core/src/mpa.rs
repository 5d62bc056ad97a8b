//! Mechanical parametric amplifier: quadrature equations, closed-form gain
//! and phonon number, and master-equation gains.
//!
//! The pump `Omega_d sz cos(2 w_m t + phi)` gives, with the qubit in its
//! ground state and in the frame at `w_m`,
//! `H = alpha b^dag^2 + alpha^* b^2 - K b^dag^2 b^2`, `alpha = |alpha| e^{-i phi}`.
//! A coherent input `c_in` enters through `db/dt = ... - sqrt(kappa) c_in`
//! and leaves as `c_out = c_in + sqrt(kappa) b`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{floquet_steady_state, liouvillian, steady_state_with, CollapseSet, PeriodicOptions, SteadyOptions, TimeDependentHamiltonian};
use crate::effective::dressed_mech_frequency;
use crate::error::{Result, UomError};
use crate::hamiltonians::{build_qubit_mech_hamiltonian, kerr_term, mpa_constants, validity_bounds, Envelope, SystemParams};
use crate::hilbert::{expect, mode_op, qubit_op, CompositeSpace, Operator, Pauli, QuantumState, Subsystem};
use crate::parallel::try_par_map;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpaConfig {
    /// Pump amplitude `|alpha| e^{-i phi}`.
    pub alpha: Complex64,
    pub phi: f64,
    pub kappa: f64,
    pub kerr: f64,
    /// Mean input field `<c_in>` (sqrt of phonon flux).
    pub input: Complex64,
    /// Critical phonon number of the Kerr bound.
    pub n_c: f64,
}

impl MpaConfig {
    pub fn from_params(params: &SystemParams, omega_d: f64, phi: f64, input: Complex64) -> Self {
        let c = mpa_constants(params, omega_d, phi, false);
        Self {
            alpha: c.alpha,
            phi,
            kappa: params.mech_decay,
            kerr: c.kerr,
            input,
            n_c: validity_bounds(params, omega_d, 1.0).n_c_kerr,
        }
    }

    pub fn below_threshold(&self) -> bool {
        4.0 * self.alpha.norm() < self.kappa
    }

    /// Soft problems: a strong input, or a phonon number beyond `n_c`.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let a = self.alpha.norm();
        if self.input.norm() * self.kappa.sqrt() > 0.1 * a && a > 0.0 {
            w.push(format!(
                "input drive sqrt(kappa)|c_in| = {:.3e} is not small against |alpha| = {a:.3e}",
                self.input.norm() * self.kappa.sqrt()
            ));
        }
        if let Ok(n) = steady_phonons(a, self.kappa) {
            let total = n + self.input.norm_sqr() * 4.0 * self.kappa / (self.kappa - 4.0 * a).powi(2);
            if total > self.n_c {
                w.push(format!("expected phonon number {total:.2} exceeds N_c = {:.2}", self.n_c));
            }
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainResult {
    /// `X_out / X_in`, signed.
    pub gain_x: f64,
    /// `Y_out / Y_in`, signed.
    pub gain_y: f64,
    pub steady_n: f64,
    pub phase: f64,
    /// True for closed-form or mean-field values, false for master-equation runs.
    pub analytic: bool,
    /// False when a truncation or residual check failed.
    pub converged: bool,
}

/// `G(phi) = (16|a|^2 + k^2 - 8|a| k sin phi) / (16|a|^2 - k^2)`, signed.
pub fn analytic_gain(phi: f64, alpha_mag: f64, kappa: f64) -> Result<f64> {
    let a = alpha_mag;
    let den = 16.0 * a * a - kappa * kappa;
    if den.abs() <= 1e-12 * kappa * kappa {
        return Err(UomError::Divergence(format!("gain diverges at threshold 4|alpha| = kappa = {kappa:.4e}")));
    }
    Ok((16.0 * a * a + kappa * kappa - 8.0 * a * kappa * phi.sin()) / den)
}

/// Squeezed-vacuum phonon number `8|a|^2 / (k^2 - 16|a|^2)` below threshold.
pub fn steady_phonons(alpha_mag: f64, kappa: f64) -> Result<f64> {
    let den = kappa * kappa - 16.0 * alpha_mag * alpha_mag;
    if den <= 0.0 {
        return Err(UomError::Divergence(format!(
            "no steady state at or above threshold (4|alpha| = {:.4e} >= kappa = {kappa:.4e})",
            4.0 * alpha_mag
        )));
    }
    Ok(8.0 * alpha_mag * alpha_mag / den)
}

/// Drift matrix of `d(X, Y)/dt` at phonon number `n`.
pub fn quadrature_matrix(cfg: &MpaConfig, n: f64) -> [[f64; 2]; 2] {
    let a = cfg.alpha.norm();
    let (s, c) = cfg.phi.sin_cos();
    let k = cfg.kappa / 2.0;
    let kn = 2.0 * cfg.kerr * n;
    [[-(k + 2.0 * a * s), -2.0 * a * c - kn], [-2.0 * a * c + kn, -(k - 2.0 * a * s)]]
}

fn inverse(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 {
        return Err(UomError::SingularSystem("quadrature drift matrix is singular".into()));
    }
    Ok([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Mean-field fixed point of the quadrature equations, self-consistent in
/// `N = (X^2 + Y^2)/2 + N_sq` when `K != 0`, with `N_sq` the squeezed-vacuum
/// number. Gains are the diagonal input-output responses at that `N`.
/// A Kerr shift `2 K N` beyond `kappa / 2` is reported as Kerr-dominated.
pub fn quadrature_steady(cfg: &MpaConfig, x_in: f64, y_in: f64) -> Result<GainResult> {
    if !cfg.below_threshold() {
        return Err(UomError::Divergence("quadrature steady state needs 4|alpha| < kappa".into()));
    }
    let n_sq = steady_phonons(cfg.alpha.norm(), cfg.kappa)?;
    let sk = cfg.kappa.sqrt();
    let solve = |n: f64| -> Result<([[f64; 2]; 2], f64, f64)> {
        let mi = inverse(quadrature_matrix(cfg, n))?;
        // 0 = M v - sqrt(k) u
        let x = sk * (mi[0][0] * x_in + mi[0][1] * y_in);
        let y = sk * (mi[1][0] * x_in + mi[1][1] * y_in);
        Ok((mi, x, y))
    };
    let mut n = n_sq;
    let mut out = solve(n)?;
    if cfg.kerr != 0.0 {
        let mut done = false;
        for _ in 0..2000 {
            let target = 0.5 * (out.1 * out.1 + out.2 * out.2) + n_sq;
            if !target.is_finite() || target > 1e12 {
                break;
            }
            if (target - n).abs() <= 1e-10 * n.max(1.0) {
                done = true;
                break;
            }
            n = 0.5 * (n + target);
            out = solve(n)?;
        }
        if !done {
            return Err(UomError::KerrDominated(format!(
                "phonon-number fixed point did not settle (K = {:.3e}, last N = {n:.4e})",
                cfg.kerr
            )));
        }
        // the mean-field closure treats 2 K N as a small detuning
        if (2.0 * cfg.kerr * n).abs() > cfg.kappa / 2.0 {
            return Err(UomError::KerrDominated(format!(
                "Kerr shift 2KN = {:.3e} exceeds the half linewidth {:.3e}",
                2.0 * cfg.kerr * n,
                cfg.kappa / 2.0
            )));
        }
    }
    let (mi, _, _) = out;
    Ok(GainResult {
        gain_x: 1.0 + cfg.kappa * mi[0][0],
        gain_y: 1.0 + cfg.kappa * mi[1][1],
        steady_n: n,
        phase: cfg.phi,
        analytic: true,
        converged: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainOptions {
    /// Kerr constant for the phonon-only model; `None` uses `g_x^4 / w_q^3`.
    pub kerr: Option<f64>,
    /// Largest allowed population in the two highest phonon levels.
    pub truncation_tol: f64,
    pub periodic: PeriodicOptions,
    pub steady: SteadyOptions,
}

impl Default for GainOptions {
    fn default() -> Self {
        Self {
            kerr: None,
            truncation_tol: 1e-6,
            periodic: PeriodicOptions::default(),
            steady: SteadyOptions::default(),
        }
    }
}

pub fn simulate_gain(params: &SystemParams, omega_d: f64, phi: f64, c_in: f64, space: &CompositeSpace) -> Result<GainResult> {
    simulate_gain_with(params, omega_d, phi, c_in, space, &GainOptions::default())
}

/// Master-equation gain for a real input amplitude `c_in`. On a phonon-only
/// space this solves the static pumped Kerr model; on `(qubit, mech)` it
/// solves the periodically pumped qubit-phonon model in the lab frame,
/// with pump and signal referenced to the dressed phonon frequency.
/// Each quadrature gain comes from its own run (input `c_in` or `i c_in`).
pub fn simulate_gain_with(
    params: &SystemParams,
    omega_d: f64,
    phi: f64,
    c_in: f64,
    space: &CompositeSpace,
    opts: &GainOptions,
) -> Result<GainResult> {
    params.validate()?;
    if !(c_in.is_finite() && c_in > 0.0) {
        return Err(UomError::InvalidArgument("input amplitude must be positive".into()));
    }
    let mech = space.dims()[space.require(Subsystem::Mech)?];
    let alpha_mag = mpa_constants(params, omega_d, phi, false).alpha.norm();
    let predicted = steady_phonons(alpha_mag, params.mech_decay)?;
    let full = space.position(Subsystem::Qubit).is_some();
    let run = |c: Complex64| -> Result<(Complex64, f64, bool)> {
        let (state, ok) = if full {
            pumped_qubit_mech(params, omega_d, phi, c, space, opts)?
        } else {
            (pumped_mech(params, omega_d, phi, c, space, opts)?, true)
        };
        let b = mode_op(space, Subsystem::Mech)?;
        let beta = expect(&b, &state)?;
        let n = expect(&(&b.adjoint() * &b), &state)?.re;
        let tail: f64 = state.tail_populations(2).iter().map(|(_, p)| p).sum();
        Ok((beta, n, ok && tail <= opts.truncation_tol))
    };
    let sk = params.mech_decay.sqrt();
    let s2 = 2f64.sqrt();
    let (bx, n, okx) = run(Complex64::new(c_in, 0.0))?;
    let (by, _, oky) = run(Complex64::new(0.0, c_in))?;
    // X = sqrt2 Re b, Y = sqrt2 Im b; X_out = sqrt(k) X + X_in
    let gain_x = (sk * s2 * bx.re + s2 * c_in) / (s2 * c_in);
    let gain_y = (sk * s2 * by.im + s2 * c_in) / (s2 * c_in);
    Ok(GainResult {
        gain_x,
        gain_y,
        steady_n: n,
        phase: phi,
        analytic: false,
        converged: okx && oky && mech as f64 >= 4.0 * predicted,
    })
}

/// `i sqrt(k) (c^* b - c b^dag)`, which adds `-sqrt(k) c` to `db/dt`.
fn input_term(b: &Operator, kappa: f64, c: Complex64) -> Operator {
    let sk = kappa.sqrt();
    &(b * (I * sk * c.conj())) + &(&b.adjoint() * (-I * sk * c))
}

fn pumped_mech(params: &SystemParams, omega_d: f64, phi: f64, c: Complex64, space: &CompositeSpace, opts: &GainOptions) -> Result<QuantumState> {
    if !space.has_layout(&[Subsystem::Mech]) {
        return Err(UomError::InvalidDimension(format!("phonon-only model needs a single phonon mode, got {space}")));
    }
    let k = mpa_constants(params, omega_d, phi, false);
    let kerr = opts.kerr.unwrap_or(k.kerr);
    let b = mode_op(space, Subsystem::Mech)?;
    let bd2 = &b.adjoint() * &b.adjoint();
    let pump = &(&bd2 * k.alpha) + &(&(&b * &b) * k.alpha.conj());
    let h = &(&pump + &kerr_term(space, kerr)?) + &input_term(&b, params.mech_decay, c);
    let l = liouvillian(&h, &CollapseSet::thermal(&b, params.mech_decay, params.n_th)?)?;
    Ok(steady_state_with(&l, None, &opts.steady)?.state)
}

fn pumped_qubit_mech(
    params: &SystemParams,
    omega_d: f64,
    phi: f64,
    c: Complex64,
    space: &CompositeSpace,
    opts: &GainOptions,
) -> Result<(QuantumState, bool)> {
    let nu = dressed_mech_frequency(params, 0.0, space)?;
    let b = mode_op(space, Subsystem::Mech)?;
    let x = &b + &b.adjoint();
    let y = &(&b - &b.adjoint()) * I;
    // i sqrt(k)|c| (b e^{i psi} - h.c.) = y cos(psi) - x sin(psi), psi = nu t - arg c
    let amp = params.mech_decay.sqrt() * c.norm();
    let theta = -c.arg();
    let h = TimeDependentHamiltonian::constant(build_qubit_mech_hamiltonian(params, space)?)
        .with_term(qubit_op(space, Pauli::Z)?, Envelope::Cos { amp: omega_d, omega: 2.0 * nu, phase: phi })
        .with_term(y, Envelope::Cos { amp, omega: nu, phase: theta })
        .with_term(&x * -1.0, Envelope::Sin { amp, omega: nu, phase: theta });
    let mut col = CollapseSet::thermal(&b, params.mech_decay, params.n_th)?;
    col.push(qubit_op(space, Pauli::Minus)?, params.qubit_decay)?;
    let ss = floquet_steady_state(&h, &col, nu, &opts.periodic)?;
    log::debug!(
        "pumped qubit-phonon solve: {} GMRES iterations, residual {:.2e}",
        ss.iterations,
        ss.residual
    );
    Ok((ss.state, ss.residual < 1e-6))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phi: f64,
    pub analytic: f64,
    pub simulated: GainResult,
}

/// Gain over a grid of pump phases, one independent solve per point.
pub fn phase_sweep(
    params: &SystemParams,
    omega_d: f64,
    c_in: f64,
    space: &CompositeSpace,
    phis: &[f64],
    opts: &GainOptions,
) -> Result<Vec<PhasePoint>> {
    let alpha = mpa_constants(params, omega_d, 0.0, false).alpha.norm();
    try_par_map(phis, |&phi| {
        Ok(PhasePoint {
            phi,
            analytic: analytic_gain(phi, alpha, params.mech_decay)?,
            simulated: simulate_gain_with(params, omega_d, phi, c_in, space, opts)?,
        })
    })
}

/// `n` phases evenly covering `(-pi, pi]`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

/// Location of the largest value, refined by a parabola through its
/// neighbours on a uniform grid.
pub fn peak_location(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(UomError::InvalidArgument("peak search needs >= 3 matching samples".into()));
    }
    let k = (0..ys.len()).max_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap_or(0);
    if k == 0 || k + 1 == ys.len() {
        return Ok(xs[k]);
    }
    let (a, b, c) = (ys[k - 1], ys[k], ys[k + 1]);
    let den = a - 2.0 * b + c;
    let shift = if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 };
    Ok(xs[k] + shift * (xs[k + 1] - xs[k - 1]) / 2.0)
}

/// The amplifying phase.
pub const AMPLIFYING_PHASE: f64 = -FRAC_PI_2;
