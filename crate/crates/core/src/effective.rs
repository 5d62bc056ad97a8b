//! Numerical checks of the qubit elimination: dressed phonon frequencies by
//! exact diagonalization, dispersive coefficients, and full-vs-reduced runs.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, evolve_ket_spectral, CollapseSet, EvolveOptions, Trajectory};
use crate::error::{Result, UomError};
use crate::hamiltonians::SystemParams;
use crate::hilbert::{CompositeSpace, Operator, QuantumState, StateData, Subsystem, EXCITED, GROUND};

const OVERLAP_THRESHOLD: f64 = 0.5;

/// Sorted eigenpairs of a Hermitian operator.
fn eigh(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = h.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(h.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Qubit-phonon Hamiltonian with the cavity quadrature replaced by the number `xi`.
fn pinned_hamiltonian(params: &SystemParams, xi: f64, mech: usize) -> Result<Operator> {
    let space = CompositeSpace::qubit_mech(mech)?;
    let mut p = *params;
    // (w_q/2 + g_z xi) sz = (w_q(xi)/2) sz
    p.omega_q = params.omega_q + 2.0 * params.g_z() * xi;
    crate::hamiltonians::build_qubit_mech_hamiltonian(&p, &space)
}

/// The `count` lowest energies of the qubit-ground sector.
fn ground_sector_levels(params: &SystemParams, xi_mean: f64, space: &CompositeSpace, count: usize) -> Result<Vec<f64>> {
    space.require(Subsystem::Qubit)?;
    let mech = space.dims()[space.require(Subsystem::Mech)?];
    if !xi_mean.is_finite() {
        return Err(UomError::InvalidArgument("xi_mean must be finite".into()));
    }
    let h = pinned_hamiltonian(params, xi_mean, mech)?;
    let (vals, vecs) = eigh(&h.to_dense());
    // qubit is the leading factor: ground-sector rows are GROUND*mech .. (GROUND+1)*mech
    let overlap = |c: usize| -> f64 { (0..mech).map(|k| vecs[(GROUND * mech + k, c)].norm_sqr()).sum() };
    let picked: Vec<usize> = (0..vals.len()).filter(|&c| overlap(c) > OVERLAP_THRESHOLD).take(count).collect();
    if picked.len() < count {
        let table: Vec<String> = (0..vals.len().min(6))
            .map(|c| format!("E={:.6e} P_g={:.3}", vals[c], overlap(c)))
            .collect();
        return Err(UomError::NonConvergent(format!(
            "qubit-ground sector not identified: {}",
            table.join("; ")
        )));
    }
    Ok(picked.iter().map(|&c| vals[c]).collect())
}

/// Spacing of the two lowest levels in the qubit-ground sector with the
/// cavity pinned at `<a + a^dag> = xi_mean`. Only the phonon truncation of
/// `space` is used; it must contain a qubit and a phonon mode.
pub fn dressed_mech_frequency(params: &SystemParams, xi_mean: f64, space: &CompositeSpace) -> Result<f64> {
    let e = ground_sector_levels(params, xi_mean, space, 2)?;
    Ok(e[1] - e[0])
}

/// Phonon self-Kerr of the dressed ground sector: the coefficient `K_d`
/// in `E_n = E_0 + n nu + K_d n (n - 1)`, from the three lowest levels.
pub fn dressed_kerr(params: &SystemParams, space: &CompositeSpace) -> Result<f64> {
    let e = ground_sector_levels(params, 0.0, space, 3)?;
    Ok((e[2] - 2.0 * e[1] + e[0]) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveCoefficients {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub chi: f64,
}

/// `lambda_pm = g_x / (w_q(xi) +- w_m)`, `chi = g_x^2 w_q(xi) / (w_q(xi)^2 - w_m^2)`.
pub fn dispersive_coefficients(params: &SystemParams, xi: f64) -> Result<DispersiveCoefficients> {
    let wq = params.omega_q + 2.0 * params.g_z() * xi;
    let wm = params.omega_m;
    if (wq.abs() - wm).abs() <= 1e-12 * wm.max(1.0) {
        return Err(UomError::Divergence(format!(
            "qubit frequency {wq:.6e} resonant with the phonon at xi = {xi}"
        )));
    }
    let gx = params.g_x;
    Ok(DispersiveCoefficients {
        lambda_plus: gx / (wq + wm),
        lambda_minus: gx / (wq - wm),
        chi: gx * gx * wq / (wq * wq - wm * wm),
    })
}

/// Result of tuning the cavity onto the dressed two-phonon resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// Cavity frequency at the avoided crossing.
    pub omega_c: f64,
    /// Minimum splitting between the dressed `|g,1,0>` and `|g,0,2>` branches.
    pub gap: f64,
}

/// Splitting of the two eigenstates with most weight on span{|g,1,0>, |g,0,2>}.
fn pair_gap(params: &SystemParams, space: &CompositeSpace) -> Result<f64> {
    let h = crate::hamiltonians::build_full_hamiltonian(params, space)?;
    let (vals, vecs) = eigh(&h.to_dense());
    let i10 = space.basis_index(&[GROUND, 1, 0])?;
    let i02 = space.basis_index(&[GROUND, 0, 2])?;
    let mut w: Vec<(f64, usize)> = (0..vals.len())
        .map(|c| (vecs[(i10, c)].norm_sqr() + vecs[(i02, c)].norm_sqr(), c))
        .collect();
    w.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok((vals[w[0].1] - vals[w[1].1]).abs())
}

/// Golden-section search of the bare cavity frequency within
/// `centre +- half_width` that minimizes the `|g,1,0>`/`|g,0,2>` splitting.
pub fn tune_two_phonon_resonance(
    params: &SystemParams,
    space: &CompositeSpace,
    centre: f64,
    half_width: f64,
) -> Result<Resonance> {
    if !space.has_layout(&[Subsystem::Qubit, Subsystem::Cavity, Subsystem::Mech]) {
        return Err(UomError::InvalidDimension(format!("resonance tuning needs (qubit, cavity, mech), got {space}")));
    }
    if !(half_width > 0.0) {
        return Err(UomError::InvalidArgument("half_width must be positive".into()));
    }
    let gap_at = |wc: f64| -> Result<f64> {
        let mut p = *params;
        p.omega_c0 = wc + p.omega_d;
        pair_gap(&p, space)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (centre - half_width, centre + half_width);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (gap_at(x1)?, gap_at(x2)?);
    // stop well below the splitting scale; 60 iterations shrink the bracket by 1e-12
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = gap_at(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = gap_at(x2)?;
        }
        if hi - lo < 1e-9 * centre.abs().max(1.0) {
            break;
        }
    }
    let omega_c = 0.5 * (lo + hi);
    if (omega_c - (centre - half_width)).abs() < 1e-3 * half_width || (centre + half_width - omega_c).abs() < 1e-3 * half_width {
        return Err(UomError::NonConvergent(format!(
            "resonance search hit the bracket edge at {omega_c:.6e}"
        )));
    }
    Ok(Resonance { omega_c, gap: gap_at(omega_c)? })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelComparison {
    pub times: Vec<f64>,
    /// `(name, series)`; full-model series carry a `full:` prefix and reduced ones `reduced:`.
    pub observables: Vec<(String, Vec<f64>)>,
    /// Largest `|P_full(g,1,0) - P_reduced(1,0)|` over the grid.
    pub max_deviation: f64,
    pub oscillation_frequency_full: f64,
    pub oscillation_frequency_reduced: f64,
}

impl ModelComparison {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.observables.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Angular frequency of the strongest oscillation in a uniformly sampled
/// real series: Hann-windowed DFT, 8x oversampled, parabolic peak refinement.
pub fn dominant_frequency(times: &[f64], series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 8 || times.len() != n {
        return Err(UomError::InvalidArgument("need at least 8 uniformly spaced samples".into()));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(UomError::InvalidArgument("frequency extraction needs a uniform grid".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(k, v)| (v - mean) * (0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()))
        .collect();
    let over = 8;
    let m = n * over;
    let power = |f: f64| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * f * k as f64;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        re * re + im * im
    };
    // cycles per sample; skip the lowest bins where the window's DC lobe lives
    let bins: Vec<f64> = (0..=m / 2).map(|j| power(j as f64 / m as f64)).collect();
    let start = 2 * over;
    let (kmax, _) = bins
        .iter()
        .enumerate()
        .skip(start)
        .fold((start, f64::MIN), |acc, (j, p)| if *p > acc.1 { (j, *p) } else { acc });
    let mut shift = 0.0;
    if kmax > 0 && kmax + 1 < bins.len() {
        let (a, b, c) = (bins[kmax - 1], bins[kmax], bins[kmax + 1]);
        let denom = a - 2.0 * b + c;
        if denom != 0.0 {
            shift = 0.5 * (a - c) / denom;
        }
    }
    let f = (kmax as f64 + shift) / m as f64;
    Ok(2.0 * PI * f / dt)
}

/// Reduced-model state from a full-model state: project the qubit on `|g>`.
fn project_ground(state: &QuantumState, reduced: &CompositeSpace) -> Result<QuantumState> {
    let full = state.space();
    let n = reduced.total_dim();
    if full.labels().first() != Some(&Subsystem::Qubit) || full.total_dim() != 2 * n {
        return Err(UomError::InvalidDimension(format!("cannot project {full} onto {reduced}")));
    }
    let off = GROUND * n;
    match state.data() {
        StateData::Ket(v) => QuantumState::normalized_ket(reduced, DVector::from_fn(n, |i, _| v[off + i])),
        StateData::Density(m) => {
            let block = m.view((off, off), (n, n)).into_owned();
            let tr = block.trace().re;
            if tr <= 0.0 {
                return Err(UomError::InvalidArgument("state has no qubit-ground component".into()));
            }
            QuantumState::density(reduced, block / Complex64::new(tr, 0.0))
        }
    }
}

fn run_closed(state: &QuantumState, h: &Operator, grid: &[f64], obs: &[(&str, &Operator)]) -> Result<Trajectory> {
    if state.is_ket() && h.dim() <= 4096 {
        evolve_ket_spectral(state, h, grid, obs)
    } else {
        let opts = EvolveOptions {
            check_positivity: false,
            ..Default::default()
        };
        evolve(state, &h.clone().into(), &CollapseSet::new(), grid, obs, &opts)
    }
}

/// Closed-system evolution of `rho0` under the full `(qubit, cavity, mech)`
/// Hamiltonian and of its qubit-ground projection under a `(cavity, mech)`
/// reduced Hamiltonian, tracking the `|0,2>` and `|1,0>` populations.
pub fn compare_models(
    params: &SystemParams,
    rho0: &QuantumState,
    t_grid: &[f64],
    full: &Operator,
    reduced: &Operator,
) -> Result<ModelComparison> {
    params.validate()?;
    let fs = full.space();
    let rs = reduced.space();
    if !fs.has_layout(&[Subsystem::Qubit, Subsystem::Cavity, Subsystem::Mech])
        || !rs.has_layout(&[Subsystem::Cavity, Subsystem::Mech])
        || fs.dims()[1..] != *rs.dims()
    {
        return Err(UomError::InvalidDimension(format!("incompatible model spaces {fs} and {rs}")));
    }
    let p_g02 = fs.basis_projector(&[GROUND, 0, 2])?;
    let p_g10 = fs.basis_projector(&[GROUND, 1, 0])?;
    let mut p_e = Operator::zero(fs);
    for c in 0..fs.dims()[1] {
        for m in 0..fs.dims()[2] {
            p_e = &p_e + &fs.basis_projector(&[EXCITED, c, m])?;
        }
    }
    let r02 = rs.basis_projector(&[0, 2])?;
    let r10 = rs.basis_projector(&[1, 0])?;

    let tf = run_closed(rho0, full, t_grid, &[("g02", &p_g02), ("g10", &p_g10), ("e", &p_e)])?;
    let reduced_state = project_ground(rho0, rs)?;
    let tr = run_closed(&reduced_state, reduced, t_grid, &[("02", &r02), ("10", &r10)])?;

    let get = |t: &Trajectory, n: &str| t.real_series(n).expect("recorded observable");
    let f10 = get(&tf, "g10");
    let r10s = get(&tr, "10");
    let max_deviation = f10.iter().zip(&r10s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let oscillation_frequency_full = dominant_frequency(t_grid, &f10)?;
    let oscillation_frequency_reduced = dominant_frequency(t_grid, &r10s)?;
    Ok(ModelComparison {
        times: t_grid.to_vec(),
        observables: vec![
            ("full:P(g,0,2)".into(), get(&tf, "g02")),
            ("full:P(g,1,0)".into(), f10),
            ("full:P_e".into(), get(&tf, "e")),
            ("reduced:P(0,2)".into(), get(&tr, "02")),
            ("reduced:P(1,0)".into(), r10s),
        ],
        max_deviation,
        oscillation_frequency_full,
        oscillation_frequency_reduced,
    })
}
