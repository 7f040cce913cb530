use std::f64::consts::PI;
use std::sync::Arc;

use conslaw_core::cochain::Placement;
use conslaw_core::{
    cfl_bound, estimate_frequency, maxwell_spec, project_function, project_proxy, vacuum_hodge, Cochain, CubicalComplex,
    InitialLevels, MaxwellParams, Probe, Simulation,
};

/// Frequency of the lowest standing wave between two conducting walls on a
/// quasi-1D grid of `n` cells.
fn standing_wave_frequency(n: usize) -> f64 {
    let c = Arc::new(CubicalComplex::with_periodicity(&[n, 1, 1], &[1.0 / n as f64, 1.0, 1.0], &[false, true, true]).unwrap());
    let model = Arc::new(maxwell_spec(c.clone(), MaxwellParams::vacuum()).unwrap());
    let e = project_proxy(&c, 1, Placement::Primal, |x| [0.0, (PI * x[0]).sin(), 0.0]).unwrap();
    let b = Cochain::zeros(c.clone(), 2, 1, Placement::Primal).unwrap();
    let dt = 0.5 * cfl_bound(&model);
    let mut sim = Simulation::new(model.clone(), dt, vec![e, b], InitialLevels::Synchronized, true).unwrap();
    sim.add_probe(Probe::nearest(&model, 0, [0.5, 0.0, 0.0], Some(0b010), 0).unwrap());
    let steps = (4.0 / dt).ceil() as usize;
    let mut xs = Vec::with_capacity(steps);
    sim.run(steps, |s| {
        xs.push(s.probes[0]);
        Ok(())
    })
    .unwrap();
    estimate_frequency(&xs, dt).unwrap()
}

#[test]
fn standing_wave_frequency_error_is_second_order() {
    let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| (standing_wave_frequency(n) - PI).abs()).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.4..=4.6).contains(&ratio), "{errs:?}");
    }
}

/// `-H0⁻¹ D0ᵀ H1 D0` applied to a smooth function against its Laplacian at
/// interior vertices.
fn laplacian_error(n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let c = Arc::new(CubicalComplex::new(&[n, n, n], &[h; 3]).unwrap());
    let f = |x: &[f64; 4]| (PI * x[0]).sin() * (2.0 * PI * x[1]).cos() * (x[2] * x[2]);
    let lap = |x: &[f64; 4]| {
        let (sx, cy) = ((PI * x[0]).sin(), (2.0 * PI * x[1]).cos());
        -PI * PI * sx * cy * x[2] * x[2] - 4.0 * PI * PI * sx * cy * x[2] * x[2] + 2.0 * sx * cy
    };
    let u = project_function(&c, 0, 1, Placement::Primal, |x, _, _| f(x)).unwrap();
    let du = c.exterior_derivative(0).unwrap().apply(u.values());
    let mut flux = vec![0.0; du.len()];
    vacuum_hodge(&c, 1).unwrap().apply_values(&du, &mut flux);
    let div = c.exterior_derivative_transpose(0).unwrap().apply(&flux);
    let w0 = vacuum_hodge(&c, 0).unwrap();
    let w0 = w0.weights().unwrap();
    (0..c.cell_count(0))
        .filter(|&i| !c.is_boundary(0, i))
        .map(|i| (-div[i] / w0[i] - lap(&c.center(0, i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn laplacian_is_second_order_in_the_interior() {
    let (a, b) = (laplacian_error(16), laplacian_error(32));
    let ratio = a / b;
    assert!((3.5..=4.5).contains(&ratio), "{a} {b}");
}
