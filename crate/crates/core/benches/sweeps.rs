//! Parallel vs sequential sweeps over independent solves.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uom_core::hamiltonians::{angular, SystemParams};
use uom_core::hilbert::CompositeSpace;
use uom_core::mpa::{phase_grid, simulate_gain_with, GainOptions};
use uom_core::parallel::{par_map, seq_map};
use uom_core::spectra::{dce_model, DceSettings};

fn gain_sweep(c: &mut Criterion) {
    let p = SystemParams::saw_reference();
    let space = CompositeSpace::mech(24).unwrap();
    let opts = GainOptions::default();
    let omega_d = angular(100e6);
    let phis = phase_grid(16);
    let point = |phi: &f64| simulate_gain_with(&p, omega_d, *phi, 1e-3, &space, &opts).map(|g| g.gain_x).unwrap_or(f64::NAN);

    let mut group = c.benchmark_group("mpa_phase_sweep");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sequential", phis.len()), |b| b.iter(|| seq_map(&phis, point)));
    group.bench_function(BenchmarkId::new("parallel", phis.len()), |b| b.iter(|| par_map(&phis, point)));
    group.finish();
}

fn dce_sweep(c: &mut Criterion) {
    let p = SystemParams::saw_reference();
    let eps: Vec<f64> = (1..=8).map(|k| angular(0.01e6 * k as f64)).collect();
    let point = |e: &f64| {
        let s = DceSettings {
            epsilon: *e,
            delta_d: 0.0,
            cavity_dim: 3,
            mech_dim: 12,
        };
        dce_model(&p, &s).and_then(|m| m.steady_state()).map(|r| r.trace()).unwrap_or(f64::NAN)
    };

    let mut group = c.benchmark_group("dce_drive_sweep");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("sequential", eps.len()), |b| b.iter(|| seq_map(&eps, point)));
    group.bench_function(BenchmarkId::new("parallel", eps.len()), |b| b.iter(|| par_map(&eps, point)));
    group.finish();
}

criterion_group!(benches, gain_sweep, dce_sweep);
criterion_main!(benches);
