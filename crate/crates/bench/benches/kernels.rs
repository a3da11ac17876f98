use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use up24_core::circulant::circulant_spectrum;
use up24_core::gegenbauer::{gegenbauer_coefficients, ZonalKernel};
use up24_core::model::{energy_flat, EnergyMode, KernelSpec};
use up24_core::quad_weights::{integration_weights, iid_system};
use up24_core::rng::task_rng;
use up24_core::snake::{compute_snake, Majorant, SnakeOptions};
use up24_core::sphere_asymptotics::random_sphere_points;

fn energy(c: &mut Criterion) {
    let mut rng = task_rng(1, 0, 0);
    let x = random_sphere_points(200, &mut rng);
    let w = vec![1.0 / 200.0; 200];
    let mut g = vec![0.0; x.len()];
    c.bench_function("riesz_energy_grad_n200", |b| {
        b.iter(|| energy_flat(3, black_box(&x), &w, &KernelSpec::Riesz { s: 1.0 }, None, EnergyMode::MeanField, Some(&mut g)).unwrap())
    });
}

fn expansions(c: &mut Criterion) {
    c.bench_function("gegenbauer_abs_power_l40", |b| {
        b.iter(|| gegenbauer_coefficients(black_box(&ZonalKernel::AbsPower { p: 2.5 }), 3, 40).unwrap())
    });
    c.bench_function("snake_sqrt_quadratic_n8", |b| {
        b.iter(|| compute_snake(black_box(&Majorant::SqrtQuadratic), 8, &SnakeOptions::default()).unwrap())
    });
}

fn linear_algebra(c: &mut Criterion) {
    let mut rng = task_rng(2, 0, 0);
    let (system, _) = iid_system(8, &mut rng);
    c.bench_function("integration_weights_n8", |b| b.iter(|| integration_weights(black_box(&system)).unwrap()));
    let seq: Vec<i8> = (0..256).map(|j| if (j * j) % 7 < 3 { 1 } else { -1 }).collect();
    c.bench_function("circulant_spectrum_256", |b| b.iter(|| circulant_spectrum(black_box(&seq)).unwrap()));
}

criterion_group!(benches, energy, expansions, linear_algebra);
criterion_main!(benches);
