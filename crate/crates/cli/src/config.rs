//! Scenario configuration. Every frequency and rate in the file is `nu / 2pi`
//! in Hz; [`ScenarioConfig::resolve`] converts them once to angular units.

use serde::{Deserialize, Serialize};
use uom_core::hamiltonians::{angular, DriveSpec, SystemParams};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Rabi,
    FreqShift,
    DceRate,
    DceG2,
    DceSpectrum,
    SnrScan,
    MpaGain,
    ParamsReport,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Rabi => "rabi",
            Scenario::FreqShift => "freq_shift",
            Scenario::DceRate => "dce_rate",
            Scenario::DceG2 => "dce_g2",
            Scenario::DceSpectrum => "dce_spectrum",
            Scenario::SnrScan => "snr_scan",
            Scenario::MpaGain => "mpa_gain",
            Scenario::ParamsReport => "params_report",
        }
    }
}

/// Model parameters in Hz. Missing fields take the SAW reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsHz {
    pub omega_q: f64,
    pub omega_m: f64,
    pub omega_c0: f64,
    pub omega_d: f64,
    pub g_x: f64,
    pub g_z0: f64,
    pub qubit_decay: f64,
    pub cavity_decay: f64,
    pub mech_decay: f64,
    pub n_th: f64,
}

impl Default for ParamsHz {
    fn default() -> Self {
        Self {
            omega_q: 3.0e9,
            omega_m: 250.0e6,
            omega_c0: 500.0e6,
            omega_d: 0.0,
            g_x: 60.0e6,
            g_z0: 40.0e6,
            qubit_decay: 0.05e6,
            cavity_decay: 0.1e6,
            mech_decay: 0.2e6,
            n_th: 0.0,
        }
    }
}

impl ParamsHz {
    pub fn to_angular(&self) -> SystemParams {
        SystemParams {
            omega_q: angular(self.omega_q),
            omega_m: angular(self.omega_m),
            omega_c0: angular(self.omega_c0),
            omega_d: angular(self.omega_d),
            g_x: angular(self.g_x),
            g_z0: angular(self.g_z0),
            qubit_decay: angular(self.qubit_decay),
            cavity_decay: angular(self.cavity_decay),
            mech_decay: angular(self.mech_decay),
            n_th: self.n_th,
        }
    }
}

/// Drive in Hz; phases in rad, times in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DriveHz {
    /// Always resonant with the two-phonon transition.
    CavityCoherent { epsilon: f64 },
    QubitCosine {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
        #[serde(default)]
        phase: f64,
    },
    QubitStep {
        amplitude: f64,
        #[serde(default)]
        t_on: f64,
    },
    CurrentSinusoid {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega: Option<f64>,
    },
}

impl DriveHz {
    pub fn to_angular(&self) -> DriveSpec {
        match *self {
            DriveHz::CavityCoherent { epsilon } => DriveSpec::CavityCoherent {
                epsilon: angular(epsilon),
                omega: 0.0,
            },
            DriveHz::QubitCosine { amplitude, omega, phase } => DriveSpec::QubitCosine {
                amplitude: angular(amplitude),
                omega: omega.map(angular),
                phase,
            },
            DriveHz::QubitStep { amplitude, t_on } => DriveSpec::QubitStep {
                amplitude: angular(amplitude),
                t_on,
            },
            DriveHz::CurrentSinusoid { amplitude, omega } => DriveSpec::CurrentSinusoid {
                amplitude: angular(amplitude),
                omega: omega.map(angular),
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            DriveHz::CavityCoherent { .. } => "cavity_coherent",
            DriveHz::QubitCosine { .. } => "qubit_cosine",
            DriveHz::QubitStep { .. } => "qubit_step",
            DriveHz::CurrentSinusoid { .. } => "current_sinusoid",
        }
    }
}

/// Fock truncations. Unset modes take a per-scenario default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mech: Option<usize>,
}

/// Evenly spaced samples from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + step * k as f64).collect()
    }

    fn check(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(ConfigError::field(field, "start and stop must be finite"));
        }
        if self.points == 0 {
            return Err(ConfigError::field(field, "points must be at least 1"));
        }
        if self.points > 1 && self.stop <= self.start {
            return Err(ConfigError::field(field, "stop must exceed start"));
        }
        Ok(())
    }
}

/// Sampling grids. Which ones a scenario needs is checked by
/// [`ScenarioConfig::validate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// Times in s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Range>,
    /// Mean cavity displacement `<a + a^dag>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Range>,
    /// Number of pump phases covering `(-pi, pi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_points: Option<usize>,
    /// Cavity drive strengths in Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    /// Correlation delays in s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<Vec<f64>>,
    /// Cavity detunings `w_c - 2 w~` in Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<Vec<f64>>,
    /// Modulation frequencies in Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<Vec<f64>>,
    /// Emission frequency offsets from the frame in Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<Range>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_th: Option<Vec<f64>>,
}

/// Solver variant for scenarios that offer more than one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    /// Reduced rotating-frame or phonon-only model.
    Reduced,
    /// Phonon-only model with the dressed Kerr from diagonalization.
    Dressed,
    /// Qubit-explicit model.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub params: ParamsHz,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveHz>,
    #[serde(default)]
    pub truncations: Truncations,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelChoice>,
}

/// Angular-unit view of a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: SystemParams,
    pub drive: Option<DriveSpec>,
}

fn finite_list(field: &str, xs: &[f64], min: f64) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(ConfigError::field(field, "list is empty"));
    }
    if let Some(x) = xs.iter().find(|x| !(x.is_finite() && **x >= min)) {
        return Err(ConfigError::field(field, format!("value {x} must be finite and >= {min}")));
    }
    Ok(())
}

fn need<'a, T>(field: &str, v: &'a Option<T>, scenario: Scenario) -> Result<&'a T, ConfigError> {
    v.as_ref()
        .ok_or_else(|| ConfigError::field(field, format!("required for scenario {}", scenario.name())))
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(ConfigError::from)
    }

    /// Field-level checks for the chosen scenario. Nothing is solved here.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = self.scenario;
        self.params
            .to_angular()
            .validate()
            .map_err(|e| ConfigError::field("params", e.to_string()))?;
        for (field, dim) in [("truncations.cavity", self.truncations.cavity), ("truncations.mech", self.truncations.mech)] {
            if let Some(d) = dim {
                if !(2..=200).contains(&d) {
                    return Err(ConfigError::field(field, format!("dimension {d} outside 2..=200")));
                }
            }
        }
        if let Some(d) = &self.drive {
            let vals: &[f64] = match d {
                DriveHz::CavityCoherent { epsilon } => &[*epsilon],
                DriveHz::QubitCosine { amplitude, phase, .. } => &[*amplitude, *phase],
                DriveHz::QubitStep { amplitude, t_on } => &[*amplitude, *t_on],
                DriveHz::CurrentSinusoid { amplitude, .. } => &[*amplitude],
            };
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::field("drive", "all drive fields must be finite"));
            }
            d.to_angular()
                .validate()
                .map_err(|e| ConfigError::field("drive", e.to_string()))?;
        }

        let allowed: &[ModelChoice] = match s {
            Scenario::DceRate | Scenario::MpaGain => &[ModelChoice::Reduced, ModelChoice::Full],
            Scenario::SnrScan => &[ModelChoice::Reduced, ModelChoice::Dressed, ModelChoice::Full],
            _ => &[],
        };
        if let Some(m) = self.model {
            if !allowed.contains(&m) {
                return Err(ConfigError::field("model", format!("{m:?} is not available for scenario {}", s.name())));
            }
        }

        let g = &self.grids;
        match s {
            Scenario::Rabi => need("grids.time", &g.time, s)?.check("grids.time")?,
            Scenario::FreqShift => need("grids.xi", &g.xi, s)?.check("grids.xi")?,
            Scenario::DceRate => finite_list("grids.epsilon", need("grids.epsilon", &g.epsilon, s)?, 0.0)?,
            Scenario::DceG2 => {
                finite_list("grids.epsilon", need("grids.epsilon", &g.epsilon, s)?, 0.0)?;
                finite_list("grids.delay", need("grids.delay", &g.delay, s)?, 0.0)?;
            }
            Scenario::DceSpectrum => {
                need("grids.frequency", &g.frequency, s)?.check("grids.frequency")?;
                match need("drive", &self.drive, s)? {
                    DriveHz::CavityCoherent { .. } => {
                        finite_list("grids.detuning", need("grids.detuning", &g.detuning, s)?, f64::NEG_INFINITY)?
                    }
                    DriveHz::QubitCosine { .. } => {
                        let m = need("grids.modulation", &g.modulation, s)?;
                        finite_list("grids.modulation", m, 0.0)?;
                        if m.contains(&0.0) {
                            return Err(ConfigError::field("grids.modulation", "frequencies must be positive"));
                        }
                    }
                    other => {
                        return Err(ConfigError::field(
                            "drive",
                            format!("dce_spectrum needs cavity_coherent or qubit_cosine, got {}", other.kind()),
                        ))
                    }
                }
            }
            Scenario::SnrScan => {
                finite_list("grids.n_th", need("grids.n_th", &g.n_th, s)?, 0.0)?;
                if !matches!(need("drive", &self.drive, s)?, DriveHz::QubitCosine { .. } | DriveHz::CurrentSinusoid { .. }) {
                    return Err(ConfigError::field("drive", "snr_scan needs a qubit_cosine or current_sinusoid drive"));
                }
            }
            Scenario::MpaGain => {
                let n = *need("grids.phase_points", &g.phase_points, s)?;
                if n < 3 {
                    return Err(ConfigError::field("grids.phase_points", "need at least 3 phases"));
                }
                if !matches!(need("drive", &self.drive, s)?, DriveHz::QubitCosine { .. }) {
                    return Err(ConfigError::field("drive", "mpa_gain needs a qubit_cosine pump"));
                }
            }
            Scenario::ParamsReport => {}
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        self.validate()?;
        Ok(Resolved {
            params: self.params.to_angular(),
            drive: self.drive.map(|d| d.to_angular()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_set() {
        assert_eq!(ParamsHz::default().to_angular(), SystemParams::saw_reference());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ScenarioConfig::from_json(r#"{"scenario": "params_report", "parms": {}}"#).unwrap_err();
        assert!(e.to_string().contains("parms"), "{e}");
        let e = ScenarioConfig::from_json(r#"{"scenario": "params_report", "params": {"g_y": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("g_y"), "{e}");
    }

    #[test]
    fn missing_grid_names_the_field() {
        let c = ScenarioConfig::from_json(r#"{"scenario": "rabi"}"#).unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.field_name(), Some("grids.time"));
    }

    #[test]
    fn hz_are_converted_once() {
        let c = ScenarioConfig::from_json(
            r#"{"scenario": "mpa_gain", "drive": {"kind": "qubit_cosine", "amplitude": 1e8}, "grids": {"phase_points": 8}}"#,
        )
        .unwrap();
        let r = c.resolve().unwrap();
        match r.drive.unwrap() {
            DriveSpec::QubitCosine { amplitude, omega, .. } => {
                assert_eq!(amplitude, angular(1e8));
                assert_eq!(omega, None);
            }
            d => panic!("{d:?}"),
        }
    }
}
