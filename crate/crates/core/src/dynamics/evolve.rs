use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, UomError};
use crate::hilbert::{expect, top_level_populations, Operator, QuantumState, Subsystem, TRUNCATION_THRESHOLD};
use crate::sparse::CsrMatrix;

use super::generator::{LindbladGenerator, TimeDependentHamiltonian};
use super::integrator::{Dopri5, OdeSystem, StepStats, Tolerances};
use super::CollapseSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub tol: Tolerances,
    pub store_states: bool,
    /// Eigen-decompose every sampled state to track the smallest eigenvalue.
    pub check_positivity: bool,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            store_states: false,
            check_positivity: true,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub expectations: Vec<(String, Vec<Complex64>)>,
    /// Largest population of the top Fock level of each mode over the run.
    pub truncation: Vec<(Subsystem, f64)>,
    pub max_trace_drift: f64,
    pub max_hermiticity_defect: f64,
    pub min_eigenvalue: f64,
    pub stats: StepStats,
    pub final_state: QuantumState,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&[Complex64]> {
        self.expectations.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn real_series(&self, name: &str) -> Option<Vec<f64>> {
        self.series(name).map(|v| v.iter().map(|z| z.re).collect())
    }

    pub fn truncation_ok(&self) -> bool {
        self.truncation.iter().all(|(_, p)| *p <= TRUNCATION_THRESHOLD)
    }
}

struct DensitySystem {
    gen: LindbladGenerator,
}

impl OdeSystem for DensitySystem {
    fn len(&self) -> usize {
        self.gen.dim().pow(2)
    }
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.gen.apply(t, y, dy);
    }
}

struct KetSystem {
    h: CsrMatrix,
    terms: Vec<(CsrMatrix, crate::hamiltonians::Envelope)>,
}

impl OdeSystem for KetSystem {
    fn len(&self) -> usize {
        self.h.nrows()
    }
    fn rhs(&mut self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let mi = Complex64::new(0.0, -1.0);
        dy.fill(Complex64::new(0.0, 0.0));
        self.h.matvec_acc(mi, y, dy);
        for (op, env) in &self.terms {
            let f = env.value(t);
            if f != 0.0 {
                op.matvec_acc(mi * f, y, dy);
            }
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(UomError::InvalidArgument("time grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(UomError::InvalidArgument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_observables(obs: &[(&str, &Operator)], h: &Operator) -> Result<()> {
    for (name, op) in obs {
        if op.space().dims() != h.space().dims() {
            return Err(UomError::InvalidDimension(format!("observable {name} lives on {}", op.space())));
        }
    }
    Ok(())
}

struct Recorder<'a> {
    obs: &'a [(&'a str, &'a Operator)],
    traj: Trajectory,
    check_positivity: bool,
    store: bool,
}

impl<'a> Recorder<'a> {
    fn new(obs: &'a [(&'a str, &'a Operator)], initial: &QuantumState, opts: &EvolveOptions) -> Self {
        let traj = Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            expectations: obs.iter().map(|(n, _)| (n.to_string(), Vec::new())).collect(),
            truncation: top_level_populations(initial.space(), &vec![0.0; initial.dim()]),
            max_trace_drift: 0.0,
            max_hermiticity_defect: 0.0,
            min_eigenvalue: f64::INFINITY,
            stats: StepStats::default(),
            final_state: initial.clone(),
            warnings: Vec::new(),
        };
        Self {
            obs,
            traj,
            check_positivity: opts.check_positivity,
            store: opts.store_states,
        }
    }

    fn record(&mut self, t: f64, state: QuantumState) -> Result<()> {
        self.traj.times.push(t);
        for ((_, op), (_, series)) in self.obs.iter().zip(self.traj.expectations.iter_mut()) {
            series.push(expect(op, &state)?);
        }
        for ((_, worst), (_, p)) in self.traj.truncation.iter_mut().zip(state.top_level_populations()) {
            *worst = worst.max(p);
        }
        self.traj.max_trace_drift = self.traj.max_trace_drift.max((state.trace() - 1.0).abs());
        self.traj.max_hermiticity_defect = self.traj.max_hermiticity_defect.max(state.hermiticity_defect());
        if self.check_positivity {
            self.traj.min_eigenvalue = self.traj.min_eigenvalue.min(state.min_eigenvalue());
        }
        if self.store {
            self.traj.states.push(state.clone());
        }
        self.traj.final_state = state;
        Ok(())
    }

    fn finish(mut self, stats: StepStats) -> Trajectory {
        self.traj.stats = stats;
        let t = &mut self.traj;
        for (label, p) in &t.truncation {
            if *p > TRUNCATION_THRESHOLD {
                let msg = format!("{label} truncation inadequate: top-level population {p:.2e}");
                log::warn!("{msg}");
                t.warnings.push(msg);
            }
        }
        if t.max_trace_drift > 1e-8 {
            t.warnings.push(format!("trace drift {:.2e}", t.max_trace_drift));
        }
        if t.max_hermiticity_defect > 1e-8 {
            t.warnings.push(format!("hermiticity defect {:.2e}", t.max_hermiticity_defect));
        }
        if self.check_positivity && t.min_eigenvalue < -1e-6 {
            t.warnings.push(format!("negative eigenvalue {:.2e}", t.min_eigenvalue));
        }
        if !self.check_positivity {
            t.min_eigenvalue = f64::NAN;
        }
        self.traj
    }
}

/// Integrates the master equation and samples the state on `grid`.
/// The first grid point is the time of `rho0`.
pub fn evolve(
    rho0: &QuantumState,
    h: &TimeDependentHamiltonian,
    collapses: &CollapseSet,
    grid: &[f64],
    observables: &[(&str, &Operator)],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    check_grid(grid)?;
    check_observables(observables, &h.static_part)?;
    if rho0.space().dims() != h.space().dims() {
        return Err(UomError::InvalidDimension(format!(
            "state on {} but Hamiltonian on {}",
            rho0.space(),
            h.space()
        )));
    }
    let space = rho0.space().clone();
    let n = space.total_dim();
    let mut sys = DensitySystem {
        gen: LindbladGenerator::new(h, collapses)?.assume_hermitian(true),
    };
    let mut y: Vec<Complex64> = rho0.density_matrix().as_slice().to_vec();
    let mut ode = Dopri5::new(n * n, opts.tol);
    ode.max_steps = opts.max_steps;
    let mut rec = Recorder::new(observables, rho0, opts);
    rec.record(grid[0], rho0.to_density())?;
    for w in grid.windows(2) {
        ode.integrate(&mut sys, w[0], w[1], &mut y)?;
        let state = QuantumState::density_unchecked(&space, DMatrix::from_column_slice(n, n, &y));
        rec.record(w[1], state)?;
    }
    Ok(rec.finish(ode.stats))
}

/// Schrödinger evolution of a ket.
pub fn evolve_ket(
    psi0: &QuantumState,
    h: &TimeDependentHamiltonian,
    grid: &[f64],
    observables: &[(&str, &Operator)],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    check_grid(grid)?;
    check_observables(observables, &h.static_part)?;
    let v0 = psi0
        .as_ket()
        .ok_or_else(|| UomError::InvalidArgument("evolve_ket needs a ket".into()))?;
    let space = psi0.space().clone();
    let mut sys = KetSystem {
        h: h.static_part.matrix().clone(),
        terms: h.terms.iter().map(|(o, e)| (o.matrix().clone(), *e)).collect(),
    };
    let mut y: Vec<Complex64> = v0.as_slice().to_vec();
    let mut ode = Dopri5::new(y.len(), opts.tol);
    ode.max_steps = opts.max_steps;
    let opts = EvolveOptions {
        check_positivity: false,
        ..*opts
    };
    let mut rec = Recorder::new(observables, psi0, &opts);
    rec.record(grid[0], psi0.clone())?;
    for w in grid.windows(2) {
        ode.integrate(&mut sys, w[0], w[1], &mut y)?;
        let state = QuantumState::normalized_ket(&space, DVector::from_column_slice(&y))
            .map_err(|_| UomError::Divergence("ket collapsed to zero".into()))?;
        rec.record(w[1], state)?;
    }
    let mut traj = rec.finish(ode.stats);
    traj.min_eigenvalue = 0.0;
    Ok(traj)
}

/// Exact closed-system evolution under a static Hamiltonian by dense
/// diagonalization. Intended for small spaces with long runs.
pub fn evolve_ket_spectral(
    psi0: &QuantumState,
    h: &Operator,
    grid: &[f64],
    observables: &[(&str, &Operator)],
) -> Result<Trajectory> {
    check_grid(grid)?;
    check_observables(observables, h)?;
    let v0 = psi0
        .as_ket()
        .ok_or_else(|| UomError::InvalidArgument("spectral evolution needs a ket".into()))?;
    let n = h.dim();
    if n > 4096 {
        return Err(UomError::TooLarge(format!("dense diagonalization of dimension {n}")));
    }
    let eig = h.to_dense().symmetric_eigen();
    let coeffs = eig.eigenvectors.adjoint() * v0;
    let space = psi0.space().clone();
    let opts = EvolveOptions {
        check_positivity: false,
        ..Default::default()
    };
    let mut rec = Recorder::new(observables, psi0, &opts);
    let t0 = grid[0];
    for &t in grid {
        let phased = DVector::from_fn(n, |k, _| coeffs[k] * Complex64::from_polar(1.0, -eig.eigenvalues[k] * (t - t0)));
        let v = &eig.eigenvectors * phased;
        rec.record(t, QuantumState::normalized_ket(&space, v)?)?;
    }
    let mut traj = rec.finish(StepStats::default());
    traj.min_eigenvalue = 0.0;
    Ok(traj)
}
