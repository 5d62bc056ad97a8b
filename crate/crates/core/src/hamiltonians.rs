//! Model parameters, Hamiltonian builders, coupling constants and the
//! circuit-to-model parameter map.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UomError};
use crate::hilbert::{mode_op, qubit_op, CompositeSpace, Operator, Pauli, Subsystem};

pub const TWO_PI: f64 = 2.0 * PI;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

/// Converts a `nu/2pi` value in Hz to angular units.
pub fn angular(hz: f64) -> f64 {
    TWO_PI * hz
}

/// Model parameters in angular units (rad/s).
///
/// `omega_c` and `g_z` are derived: the longitudinal modulation at
/// `omega_d` moves the cavity into a frame at `omega_c0 - omega_d` and
/// halves the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_q: f64,
    pub omega_m: f64,
    pub omega_c0: f64,
    /// Longitudinal-modulation frequency; 0 for static coupling.
    pub omega_d: f64,
    pub g_x: f64,
    pub g_z0: f64,
    /// Qubit decay rate.
    pub qubit_decay: f64,
    /// Cavity decay rate.
    pub cavity_decay: f64,
    /// Phonon decay rate.
    pub mech_decay: f64,
    pub n_th: f64,
}

impl SystemParams {
    /// The SAW reference set: g_x = 60 MHz, g_z = 40 MHz, qubit at 3 GHz,
    /// phonon at 250 MHz, cavity at twice the phonon frequency.
    pub fn saw_reference() -> Self {
        Self {
            omega_q: angular(3.0e9),
            omega_m: angular(250.0e6),
            omega_c0: angular(500.0e6),
            omega_d: 0.0,
            g_x: angular(60.0e6),
            g_z0: angular(40.0e6),
            qubit_decay: angular(0.05e6),
            cavity_decay: angular(0.1e6),
            mech_decay: angular(0.2e6),
            n_th: 0.0,
        }
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c0 - self.omega_d
    }

    pub fn g_z(&self) -> f64 {
        if self.omega_d != 0.0 {
            self.g_z0 / 2.0
        } else {
            self.g_z0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("omega_q", self.omega_q),
            ("omega_m", self.omega_m),
            ("omega_c0", self.omega_c0),
            ("omega_d", self.omega_d),
            ("g_x", self.g_x),
            ("g_z0", self.g_z0),
            ("qubit_decay", self.qubit_decay),
            ("cavity_decay", self.cavity_decay),
            ("mech_decay", self.mech_decay),
            ("n_th", self.n_th),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(UomError::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.omega_q <= self.omega_m {
            return Err(UomError::InvalidArgument(format!(
                "dispersive regime needs omega_q > omega_m ({} <= {})",
                self.omega_q, self.omega_m
            )));
        }
        if self.omega_c() < 0.0 {
            return Err(UomError::InvalidArgument("omega_d exceeds omega_c0".into()));
        }
        Ok(())
    }
}

/// `G_n ~ (-1)^n g_x^2 (2 g_z)^n / omega_q^(n+1)`.
pub fn coupling_g(n: u32, params: &SystemParams) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign * params.g_x.powi(2) / params.omega_q.powi(n as i32 + 1) * (2.0 * params.g_z()).powi(n as i32)
}

fn require_layout(space: &CompositeSpace, layout: &[Subsystem]) -> Result<()> {
    if !space.has_layout(layout) {
        let want: Vec<String> = layout.iter().map(|l| l.to_string()).collect();
        return Err(UomError::InvalidDimension(format!(
            "expected layout ({}), got {space}",
            want.join(", ")
        )));
    }
    Ok(())
}

const FULL: [Subsystem; 3] = [Subsystem::Qubit, Subsystem::Cavity, Subsystem::Mech];
const QM: [Subsystem; 2] = [Subsystem::Qubit, Subsystem::Mech];
const CM: [Subsystem; 2] = [Subsystem::Cavity, Subsystem::Mech];

/// `(w_q/2) sz + w_c a^dag a + w_m b^dag b + g_z sz (a + a^dag) + g_x sx (b + b^dag)`
pub fn build_full_hamiltonian(params: &SystemParams, space: &CompositeSpace) -> Result<Operator> {
    require_layout(space, &FULL)?;
    let sz = qubit_op(space, Pauli::Z)?;
    let sx = qubit_op(space, Pauli::X)?;
    let a = mode_op(space, Subsystem::Cavity)?;
    let b = mode_op(space, Subsystem::Mech)?;
    let xa = &a + &a.adjoint();
    let xb = &b + &b.adjoint();
    let h = &(&sz * (params.omega_q / 2.0)) + &(&(&a.adjoint() * &a) * params.omega_c());
    let h = &h + &(&(&b.adjoint() * &b) * params.omega_m);
    let h = &h + &(&(&sz * &xa) * params.g_z());
    Ok(&h + &(&(&sx * &xb) * params.g_x))
}

/// Qubit and phonon only: `(w_q/2) sz + w_m b^dag b + g_x sx (b + b^dag)`.
pub fn build_qubit_mech_hamiltonian(params: &SystemParams, space: &CompositeSpace) -> Result<Operator> {
    require_layout(space, &QM)?;
    let sz = qubit_op(space, Pauli::Z)?;
    let sx = qubit_op(space, Pauli::X)?;
    let b = mode_op(space, Subsystem::Mech)?;
    let h = &(&sz * (params.omega_q / 2.0)) + &(&(&b.adjoint() * &b) * params.omega_m);
    Ok(&h + &(&(&sx * &(&b + &b.adjoint())) * params.g_x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReducedModel {
    /// `w_c a^dag a + w_m b^dag b - G1 (b + b^dag)^2 (a + a^dag)`
    UomFull,
    /// `w_c a^dag a + w_m b^dag b + 2 G1 b^dag b (a + a^dag)`
    UomRwa,
    /// `w_c a^dag a + w_m b^dag b + G1 (a^dag b^2 + a b^dag^2)`
    Quadratic,
    /// `alpha b^dag^2 + alpha^* b^2` on the phonon alone.
    Mpa { alpha_re: f64, alpha_im: f64 },
    /// Dispersive cross-Kerr coupling for cavity detuning `delta_s = w_c - 2 w_m`.
    CrossKerr { delta_s: f64 },
}

pub fn build_reduced(params: &SystemParams, space: &CompositeSpace, variant: ReducedModel) -> Result<Operator> {
    if let ReducedModel::Mpa { alpha_re, alpha_im } = variant {
        if !(alpha_re.is_finite() && alpha_im.is_finite()) {
            return Err(UomError::InvalidArgument("MPA pump amplitude must be finite".into()));
        }
        require_layout(space, &[Subsystem::Mech])?;
        let b = mode_op(space, Subsystem::Mech)?;
        let alpha = Complex64::new(alpha_re, alpha_im);
        let bd2 = &b.adjoint() * &b.adjoint();
        return Ok(&(&bd2 * alpha) + &(&(&b * &b) * alpha.conj()));
    }
    require_layout(space, &CM)?;
    let a = mode_op(space, Subsystem::Cavity)?;
    let b = mode_op(space, Subsystem::Mech)?;
    let (ad, bd) = (a.adjoint(), b.adjoint());
    let na = &ad * &a;
    let nb = &bd * &b;
    let g1 = coupling_g(1, params);
    let free = &(&na * params.omega_c()) + &(&nb * params.omega_m);
    let coupling = match variant {
        ReducedModel::UomFull => {
            let xb = &b + &bd;
            &(&(&xb * &xb) * &(&a + &ad)) * (-g1)
        }
        ReducedModel::UomRwa => &(&nb * &(&a + &ad)) * (2.0 * g1),
        ReducedModel::Quadratic => {
            let up = &ad * &(&b * &b);
            &(&up + &up.adjoint()) * g1
        }
        ReducedModel::CrossKerr { delta_s } => {
            if delta_s == 0.0 || !delta_s.is_finite() {
                return Err(UomError::InvalidArgument("cross-Kerr needs a finite nonzero delta_s".into()));
            }
            let id = Operator::identity(space);
            let two_nb_plus_one = &(&nb * 2.0) + &id;
            let pair = &(&bd * &bd) * &(&b * &b);
            let ck = &(&(&na * &two_nb_plus_one) - &pair) * (2.0 * g1 * g1 / delta_s);
            // second-order dispersive term, shifts the cavity by -2 G2 per phonon
            &ck + &(&(&na * &nb) * (-2.0 * coupling_g(2, params)))
        }
        ReducedModel::Mpa { .. } => unreachable!(),
    };
    Ok(&free + &coupling)
}

/// Kerr term `K b^dag b^dag b b` with the qubit pinned to its ground state.
pub fn kerr_term(space: &CompositeSpace, kerr: f64) -> Result<Operator> {
    let b = mode_op(space, Subsystem::Mech)?;
    let bd = b.adjoint();
    Ok(&(&(&bd * &bd) * &(&b * &b)) * (-kerr))
}

/// Time-dependent drives. Amplitudes are angular frequencies; phases lie in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DriveSpec {
    /// `eps (a e^{i w t} + a^dag e^{-i w t})`
    CavityCoherent { epsilon: f64, omega: f64 },
    /// `Omega_d sz cos(w t + phi)`; `omega = None` means `2 w_m`.
    QubitCosine { amplitude: f64, omega: Option<f64>, phase: f64 },
    /// `Omega_s sz Theta(t - t_on)`
    QubitStep { amplitude: f64, t_on: f64 },
    /// Current `I_c cos(W t)` on the qubit bias line; `amplitude` is the
    /// resulting longitudinal drive strength (see [`circuit_map`]).
    CurrentSinusoid { amplitude: f64, omega: Option<f64> },
}

/// Scalar time dependence multiplying a constant operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Envelope {
    Const(f64),
    Cos { amp: f64, omega: f64, phase: f64 },
    Sin { amp: f64, omega: f64, phase: f64 },
    Step { amp: f64, t_on: f64 },
}

impl Envelope {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Const(c) => c,
            Envelope::Cos { amp, omega, phase } => amp * (omega * t + phase).cos(),
            Envelope::Sin { amp, omega, phase } => amp * (omega * t + phase).sin(),
            Envelope::Step { amp, t_on } => {
                if t >= t_on {
                    amp
                } else {
                    0.0
                }
            }
        }
    }
}

impl DriveSpec {
    pub fn validate(&self) -> Result<()> {
        let (amp, phase) = match *self {
            DriveSpec::CavityCoherent { epsilon, .. } => (epsilon, 0.0),
            DriveSpec::QubitCosine { amplitude, phase, .. } => (amplitude, phase),
            DriveSpec::QubitStep { amplitude, .. } => (amplitude, 0.0),
            DriveSpec::CurrentSinusoid { amplitude, .. } => (amplitude, 0.0),
        };
        if !amp.is_finite() || amp < 0.0 {
            return Err(UomError::InvalidArgument(format!("drive amplitude must be >= 0, got {amp}")));
        }
        if !(phase > -PI && phase <= PI) {
            return Err(UomError::InvalidArgument(format!("drive phase {phase} outside (-pi, pi]")));
        }
        Ok(())
    }

    /// Modulation frequency with the `2 w_m` default resolved.
    pub fn frequency(&self, params: &SystemParams) -> f64 {
        match *self {
            DriveSpec::CavityCoherent { omega, .. } => omega,
            DriveSpec::QubitCosine { omega, .. } | DriveSpec::CurrentSinusoid { omega, .. } => {
                omega.unwrap_or(2.0 * params.omega_m)
            }
            DriveSpec::QubitStep { .. } => 0.0,
        }
    }

    /// Splits the drive into Hermitian operators times real envelopes.
    pub fn terms(&self, params: &SystemParams, space: &CompositeSpace) -> Result<Vec<(Operator, Envelope)>> {
        self.validate()?;
        let w = self.frequency(params);
        match *self {
            DriveSpec::CavityCoherent { epsilon, .. } => {
                let a = mode_op(space, Subsystem::Cavity)
                    .map_err(|_| UomError::InvalidArgument("cavity drive needs a cavity subsystem".into()))?;
                let ad = a.adjoint();
                let x = &a + &ad;
                let p = &(&a - &ad) * Complex64::new(0.0, 1.0);
                Ok(vec![
                    (x, Envelope::Cos { amp: epsilon, omega: w, phase: 0.0 }),
                    (p, Envelope::Sin { amp: epsilon, omega: w, phase: 0.0 }),
                ])
            }
            DriveSpec::QubitCosine { amplitude, phase, .. } => {
                let sz = sigma_z_for(space)?;
                Ok(vec![(sz, Envelope::Cos { amp: amplitude, omega: w, phase })])
            }
            DriveSpec::CurrentSinusoid { amplitude, .. } => {
                let sz = sigma_z_for(space)?;
                Ok(vec![(sz, Envelope::Cos { amp: amplitude, omega: w, phase: 0.0 })])
            }
            DriveSpec::QubitStep { amplitude, t_on } => {
                let sz = sigma_z_for(space)?;
                Ok(vec![(sz, Envelope::Step { amp: amplitude, t_on })])
            }
        }
    }
}

fn sigma_z_for(space: &CompositeSpace) -> Result<Operator> {
    qubit_op(space, Pauli::Z).map_err(|_| UomError::InvalidArgument("qubit drive needs a qubit subsystem".into()))
}

/// The drive Hamiltonian evaluated at time `t`.
pub fn drive_term(spec: &DriveSpec, params: &SystemParams, space: &CompositeSpace, t: f64) -> Result<Operator> {
    let mut h = Operator::zero(space);
    for (op, env) in spec.terms(params, space)? {
        h = &h + &(&op * env.value(t));
    }
    Ok(h)
}

/// Circuit-level description of the charge qubit and its couplings.
/// Energies are angular frequencies (E / hbar); all other fields are SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub e_j: f64,
    pub phi_ext: f64,
    pub phi_0: f64,
    pub mutual_inductance: f64,
    pub i_zpf: f64,
    pub i_c: f64,
    pub c_q: f64,
    pub c_sigma: f64,
    pub u_zpf: f64,
    pub charge: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitMap {
    pub omega_q: f64,
    pub g_z: f64,
    pub g_x: f64,
    pub omega_s: f64,
    /// Flux bias at half a flux quantum: the qubit splitting vanishes.
    pub degenerate: bool,
}

pub fn circuit_map(c: &CircuitParams) -> Result<CircuitMap> {
    let fields = [
        c.e_j,
        c.phi_0,
        c.mutual_inductance,
        c.i_zpf,
        c.i_c,
        c.c_q,
        c.c_sigma,
        c.u_zpf,
        c.charge,
    ];
    if fields.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(UomError::InvalidArgument("circuit parameters must be positive".into()));
    }
    if !(0.0..c.phi_0).contains(&c.phi_ext) {
        return Err(UomError::InvalidArgument("flux bias must lie in [0, Phi_0)".into()));
    }
    let x = PI * c.phi_ext / c.phi_0;
    let omega_q = 2.0 * c.e_j * x.cos();
    let slope = -(PI * c.e_j / c.phi_0) * x.sin() * c.mutual_inductance;
    let degenerate = omega_q.abs() < 1e-12 * c.e_j;
    if degenerate {
        log::warn!("flux bias at Phi_0/2: qubit splitting vanishes");
    }
    Ok(CircuitMap {
        omega_q: if degenerate { 0.0 } else { omega_q },
        g_z: slope * c.i_zpf,
        g_x: c.charge * c.c_q * c.u_zpf / (c.c_sigma * HBAR),
        omega_s: slope * c.i_c,
        degenerate,
    })
}

/// First-order-consistent shifted phonon frequency `sqrt(w_m^2 - 4 G1 w_m xi)`.
pub fn shifted_mech_frequency(params: &SystemParams, xi_mean: f64) -> Result<f64> {
    let rad = params.omega_m.powi(2) - 4.0 * coupling_g(1, params) * params.omega_m * xi_mean;
    if rad <= 0.0 {
        return Err(UomError::Instability(format!(
            "<xi> = {xi_mean} drives the phonon frequency to zero"
        )));
    }
    Ok(rad.sqrt())
}

/// Surface-acoustic-wave cavity geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SawGeometry {
    pub length: f64,
    pub sound_speed: f64,
    pub mode_index: u32,
}

impl SawGeometry {
    /// Angular resonance frequency `2 pi N v / (2 L)`.
    pub fn mech_frequency(&self) -> f64 {
        TWO_PI * self.mode_index as f64 * self.sound_speed / (2.0 * self.length)
    }

    /// Geometry with the mirror separation chosen to resonate at `omega_m`.
    pub fn matching(omega_m: f64, sound_speed: f64, mode_index: u32) -> Self {
        Self {
            length: PI * mode_index as f64 * sound_speed / omega_m,
            sound_speed,
            mode_index,
        }
    }

    pub fn check(&self, params: &SystemParams) -> Result<()> {
        let w = self.mech_frequency();
        if ((w - params.omega_m) / params.omega_m).abs() > 1e-9 {
            return Err(UomError::InvalidArgument(format!(
                "geometry resonates at {w:.6e} rad/s, params say {:.6e}",
                params.omega_m
            )));
        }
        Ok(())
    }
}

/// `(delta w_m, delta L)` for a static longitudinal step `omega_s`.
pub fn static_length_shift(params: &SystemParams, omega_s: f64, geom: &SawGeometry) -> (f64, f64) {
    let dw = 4.0 * (params.g_x / params.omega_q).powi(2) * omega_s;
    (dw, dw / params.omega_m * geom.length)
}

/// Length modulation `delta L(t)` under a drive of strength `omega_drive` at frequency `big_omega`.
pub fn modulated_length(params: &SystemParams, geom: &SawGeometry, t: f64, omega_drive: f64, big_omega: f64) -> f64 {
    let (_, dl) = static_length_shift(params, omega_drive, geom);
    dl * (big_omega * t).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpaConstants {
    pub alpha: Complex64,
    pub kerr: f64,
}

/// Pump amplitude `alpha` and Kerr constant `K` for a longitudinal drive
/// `Omega_d sz cos(2 w_m t + phi)`. `exact` keeps the full prefactor
/// `g_x^2 (w_q^2 + w_m^2) / (w_q^2 - w_m^2)^2`.
pub fn mpa_constants(params: &SystemParams, omega_d: f64, phi: f64, exact: bool) -> MpaConstants {
    let (wq, wm, gx) = (params.omega_q, params.omega_m, params.g_x);
    let pref = if exact {
        gx * gx * (wq * wq + wm * wm) / (wq * wq - wm * wm).powi(2)
    } else {
        (gx / wq).powi(2)
    };
    MpaConstants {
        alpha: Complex64::from_polar(omega_d * pref, -phi),
        kerr: gx.powi(4) / wq.powi(3),
    }
}

/// `10 log10(G)` for a linear power-like gain.
pub fn to_db(gain: f64) -> f64 {
    10.0 * gain.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityBounds {
    /// Kerr branch `Omega_d w_q / g_x^2`.
    pub n_c_kerr: f64,
    /// Quasi-dispersive branch `w_q^2 / (4 g_x^2)`.
    pub n_c_dispersive: f64,
    /// The larger of the two branches.
    pub n_c: f64,
    /// `8 N_c + 4` from the larger branch.
    pub g_c: f64,
    /// `8 N_c + 4` from the Kerr branch.
    pub g_c_kerr: f64,
    /// `(2N+1)(1 + sqrt(2N/(2N+1)))^2` from the Kerr branch.
    pub g_c_kerr_exact: f64,
    /// `1 / (2 lambda_-)^2`
    pub n_dispersive_max: f64,
    /// `2 g_z / w_q`
    pub xi_max: f64,
    /// Cavity shift per phonon `4 G1^2 / delta_s - 2 G2`.
    pub chi_k: f64,
}

pub fn critical_gain(n_c: f64) -> f64 {
    (2.0 * n_c + 1.0) * (1.0 + (2.0 * n_c / (2.0 * n_c + 1.0)).sqrt()).powi(2)
}

pub fn validity_bounds(params: &SystemParams, omega_d: f64, delta_s: f64) -> ValidityBounds {
    let (wq, wm, gx) = (params.omega_q, params.omega_m, params.g_x);
    let n_c_kerr = omega_d * wq / (gx * gx);
    let n_c_dispersive = wq * wq / (4.0 * gx * gx);
    let n_c = n_c_kerr.max(n_c_dispersive);
    let lambda_minus = gx / (wq - wm);
    let g1 = coupling_g(1, params);
    let g2 = coupling_g(2, params);
    ValidityBounds {
        n_c_kerr,
        n_c_dispersive,
        n_c,
        g_c: 8.0 * n_c + 4.0,
        g_c_kerr: 8.0 * n_c_kerr + 4.0,
        g_c_kerr_exact: critical_gain(n_c_kerr),
        n_dispersive_max: 1.0 / (2.0 * lambda_minus).powi(2),
        xi_max: 2.0 * params.g_z() / wq,
        chi_k: 4.0 * g1 * g1 / delta_s - 2.0 * g2,
    }
}
