use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use uom_core::dynamics::{
    evolve, liouvillian, propagate_dense, propagator_oracle, steady_state_with, CollapseSet, EvolveOptions, SteadyOptions,
    TimeDependentHamiltonian, Tolerances,
};
use uom_core::hamiltonians::Envelope;
use uom_core::hilbert::{expect, ladder, number, CompositeSpace, Operator, QuantumState};
use uom_core::mpa::{quadrature_matrix, quadrature_steady, MpaConfig};
use uom_core::spectra::g2;

fn random_matrix(rng: &mut StdRng, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_hermitian(rng: &mut StdRng, n: usize) -> DMatrix<Complex64> {
    let m = random_matrix(rng, n);
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn random_density(rng: &mut StdRng, n: usize) -> DMatrix<Complex64> {
    let a = random_matrix(rng, n);
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

struct System {
    space: CompositeSpace,
    h: Operator,
    collapses: CollapseSet,
    rho0: QuantumState,
}

fn random_system(seed: u64, n: usize, n_collapse: usize) -> System {
    let mut rng = StdRng::seed_from_u64(seed);
    let space = CompositeSpace::single(n).unwrap();
    let h = Operator::from_dense(&space, &random_hermitian(&mut rng, n)).unwrap();
    let mut collapses = CollapseSet::new();
    for _ in 0..n_collapse {
        let op = Operator::from_dense(&space, &random_matrix(&mut rng, n)).unwrap();
        collapses.push(op, rng.random_range(0.05..0.5)).unwrap();
    }
    let rho0 = QuantumState::density(&space, random_density(&mut rng, n)).unwrap();
    System { space, h, collapses, rho0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_preserves_trace_hermiticity_and_positivity(seed in any::<u64>(), n in 2usize..5, k in 0usize..3, drive in 0.0f64..1.0) {
        let s = random_system(seed, n, k);
        let x = Operator::from_dense(&s.space, &random_hermitian(&mut StdRng::seed_from_u64(seed ^ 1), n)).unwrap();
        let h = TimeDependentHamiltonian::constant(s.h.clone())
            .with_term(x, Envelope::Cos { amp: drive, omega: 1.3, phase: 0.2 });
        let grid: Vec<f64> = (0..=20).map(|j| j as f64 * 0.25).collect();
        let t = evolve(&s.rho0, &h, &s.collapses, &grid, &[], &EvolveOptions::default()).unwrap();
        prop_assert!(t.max_trace_drift <= 1e-8, "trace drift {}", t.max_trace_drift);
        prop_assert!(t.max_hermiticity_defect <= 1e-8, "hermiticity {}", t.max_hermiticity_defect);
        prop_assert!(t.min_eigenvalue >= -1e-6, "min eigenvalue {}", t.min_eigenvalue);
    }

    #[test]
    fn generator_is_traceless(seed in any::<u64>(), n in 2usize..6, k in 0usize..3) {
        let s = random_system(seed, n, k);
        let l = liouvillian(&s.h, &s.collapses).unwrap();
        let out = l.apply(&random_hermitian(&mut StdRng::seed_from_u64(seed ^ 2), n)).unwrap();
        prop_assert!(out.trace().norm() <= 1e-12 * l.max_abs().max(1.0));
    }

    #[test]
    fn symplectic_gain_product(phi in -3.1f64..3.1, frac in 0.0f64..0.95, kappa in 0.1f64..10.0) {
        let cfg = MpaConfig {
            alpha: Complex64::new(frac * kappa / 4.0, 0.0),
            phi,
            kappa,
            kerr: 0.0,
            input: Complex64::new(0.0, 0.0),
            n_c: f64::INFINITY,
        };
        // principal-axis gains 1 + kappa / lambda_i of the drift matrix
        let m = quadrature_matrix(&cfg, 0.0);
        let lam = nalgebra::Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]).symmetric_eigen().eigenvalues;
        let g: Vec<f64> = lam.iter().map(|l| 1.0 + kappa / l).collect();
        prop_assert!((g[0] * g[1] - 1.0).abs() <= 1e-6, "{:?}", g);
        // on the amplifying axis the X and Y gains are the principal ones
        let amp = MpaConfig { phi: -std::f64::consts::FRAC_PI_2, ..cfg };
        let q = quadrature_steady(&amp, 1e-3, 1e-3).unwrap();
        prop_assert!((q.gain_x * q.gain_y - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn principal_quadratures_have_unit_gain_product() {
    for (phi, frac) in [(-std::f64::consts::FRAC_PI_2, 0.9), (std::f64::consts::FRAC_PI_2, 0.5), (0.0, 0.0)] {
        let kappa = 2.0;
        let cfg = MpaConfig {
            alpha: Complex64::new(frac * kappa / 4.0, 0.0),
            phi,
            kappa,
            kerr: 0.0,
            input: Complex64::new(0.0, 0.0),
            n_c: f64::INFINITY,
        };
        let g = quadrature_steady(&cfg, 1e-3, 1e-3).unwrap();
        assert!((g.gain_x * g.gain_y - 1.0).abs() <= 1e-6, "{phi}: {} {}", g.gain_x, g.gain_y);
    }
}

#[test]
fn evolve_matches_dense_exponential() {
    let opts = EvolveOptions {
        tol: Tolerances { rtol: 1e-12, atol: 1e-14 },
        ..Default::default()
    };
    for seed in 0..20u64 {
        let n = 2 + (seed as usize % 4);
        let s = random_system(1000 + seed, n, 1 + seed as usize % 3);
        let l = liouvillian(&s.h, &s.collapses).unwrap();
        let t = 1.5;
        let want = propagate_dense(&propagator_oracle(&l, t).unwrap(), &s.rho0.density_matrix());
        let traj = evolve(&s.rho0, &TimeDependentHamiltonian::constant(s.h.clone()), &s.collapses, &[0.0, t], &[], &opts).unwrap();
        let err = (traj.final_state.density_matrix() - &want).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "system {seed} (n = {n}): {err:.3e}");
    }
}

fn thermal_mode(dim: usize, n_th: f64) -> (uom_core::dynamics::Liouvillian, QuantumState, Operator) {
    let b = ladder(dim).unwrap();
    let h = &number(dim).unwrap() * 1.7;
    let l = liouvillian(&h, &CollapseSet::thermal(&b, 0.3, n_th).unwrap()).unwrap();
    let rho = steady_state_with(&l, None, &SteadyOptions::default()).unwrap().state;
    (l, rho, b)
}

#[test]
fn thermal_bath_sets_occupation() {
    for n_th in [0.1, 0.5, 1.0, 1.79, 3.0] {
        let (_, rho, b) = thermal_mode(80, n_th);
        let n = expect(&(&b.adjoint() * &b), &rho).unwrap().re;
        assert!((n - n_th).abs() <= 1e-6, "{n_th}: {n}");
    }
}

#[test]
fn thermal_light_is_bunched() {
    for n_th in [0.2, 0.8, 2.0] {
        let (l, rho, b) = thermal_mode(80, n_th);
        let r = g2(&l, &rho, &b, &[0.0]).unwrap();
        assert!((r.g2_zero - 2.0).abs() <= 1e-3, "{n_th}: {}", r.g2_zero);
    }
}
