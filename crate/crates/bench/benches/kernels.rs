use std::f64::consts::PI;
use std::hint::black_box;
use std::sync::Arc;

use conslaw_core::cochain::Placement;
use conslaw_core::{
    cfl_bound, maxwell_spec, project_proxy, schrodinger_spec, Cochain, CubicalComplex, InitialLevels,
    MaxwellParams, SchrodingerParams, Simulation,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn incidence(c: &mut Criterion) {
    let mut g = c.benchmark_group("incidence");
    for n in [16, 32] {
        let cx = CubicalComplex::new(&[n, n, n], &[1.0 / n as f64; 3]).unwrap();
        for p in 0..3 {
            let d = cx.exterior_derivative(p).unwrap();
            let x: Vec<f64> = (0..d.ncols()).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut out = vec![0.0; d.nrows()];
            g.bench_with_input(BenchmarkId::new(format!("d{p}"), n), &n, |b, _| {
                b.iter(|| d.apply_into(black_box(&x), 1.0, &mut out))
            });
        }
    }
    g.finish();
}

fn maxwell_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("maxwell_step");
    g.sample_size(20);
    for n in [16, 32] {
        let cx = Arc::new(CubicalComplex::new(&[n, n, n], &[1.0 / n as f64; 3]).unwrap());
        let model = Arc::new(maxwell_spec(cx.clone(), MaxwellParams::vacuum()).unwrap());
        let e = project_proxy(&cx, 1, Placement::Primal, |x| {
            let (s, k) = ((PI * x[0]).sin_cos(), ((PI * x[1]).sin_cos(), (PI * x[2]).sin_cos()));
            [s.1 * k.0 .0 * k.1 .0, s.0 * k.0 .1 * k.1 .0, -2.0 * s.0 * k.0 .0 * k.1 .1]
        })
        .unwrap();
        let b = Cochain::zeros(cx.clone(), 2, 1, Placement::Primal).unwrap();
        let dt = 0.5 * cfl_bound(&model);
        let mut sim = Simulation::new(model, dt, vec![e, b], InitialLevels::Synchronized, true).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| bch.iter(|| sim.step().unwrap()));
    }
    g.finish();
}

fn schrodinger_step(c: &mut Criterion) {
    let n = 32;
    let cx = Arc::new(CubicalComplex::periodic(&[n, n, n], &[1.0 / n as f64; 3]).unwrap());
    let model = Arc::new(schrodinger_spec(cx.clone(), SchrodingerParams { hbar: 1.0, mass: 1.0, potential: None }).unwrap());
    let phi = conslaw_core::project_function(&cx, 0, 1, Placement::Primal, |x, _, _| (2.0 * PI * x[0]).cos()).unwrap();
    let psi = phi.zeros_like();
    let dt = 0.5 * cfl_bound(&model);
    let mut sim = Simulation::new(model, dt, vec![phi, psi], InitialLevels::Synchronized, false).unwrap();
    c.bench_function("schrodinger_step/32", |b| b.iter(|| sim.step().unwrap()));
}

criterion_group!(benches, incidence, maxwell_step, schrodinger_step);
criterion_main!(benches);
