use cascade_core::dynamics::{
    exact_linear_evolve, recorded_forces, EvolutionVariant, RunConfig, SimState, Simulation, Stepper,
};
use cascade_core::forcing::{ForceSpec, NoiseStream};
use cascade_core::grid::{forward_transform, inverse_transform};
use cascade_core::{Field, Grid, PhysParams, Space};
use num_complex::Complex64;

fn rel_l2(a: &Field, b: &Field) -> f64 {
    let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.values().iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn heun_matches_characteristics_solution() {
    let n = 4096;
    let grid = Grid::new(n, 1.0).unwrap();
    let params = PhysParams {
        nu: 0.0,
        gamma: 0.0,
        ..PhysParams::default()
    };
    let spec = ForceSpec::new(params.l, params.l_tot, true).unwrap();
    let dt = grid.dx();
    let steps = n as u64;
    let stream = NoiseStream::new(2024, 0);

    let mut stepper = Stepper::new(grid, EvolutionVariant::LinearFractional, params, Some(spec)).unwrap();
    let mut state = SimState::zero(grid, stream);
    for _ in 0..steps {
        stepper.step(&mut state, dt).unwrap();
    }
    let exact = exact_linear_evolve(grid, &params, dt, recorded_forces(grid, spec, stream, steps).unwrap()).unwrap();
    let err = rel_l2(&state.u, &exact);
    assert!(err <= 1e-3, "relative L2 error {err:e}");
}

#[test]
fn nonlinear_without_gamma_tracks_linear_bitwise() {
    let grid = Grid::new(512, 1.0).unwrap();
    let params = PhysParams {
        gamma: 0.0,
        ..PhysParams::default()
    };
    let spec = ForceSpec::new(params.l, params.l_tot, true).unwrap();
    let mut a = Stepper::new(grid, EvolutionVariant::Nonlinear, params, Some(spec)).unwrap();
    let mut b = Stepper::new(grid, EvolutionVariant::LinearFractional, params, Some(spec)).unwrap();
    let mut sa = SimState::zero(grid, NoiseStream::new(9, 1));
    let mut sb = sa.clone();
    for _ in 0..200 {
        a.step(&mut sa, grid.dx()).unwrap();
        b.step(&mut sb, grid.dx()).unwrap();
        assert_eq!(sa, sb);
    }
}

#[test]
fn unforced_hamiltonian_preserves_site_moduli() {
    let grid = Grid::new(256, 1.0).unwrap();
    let params = PhysParams {
        nu: 0.0,
        gamma: 0.0,
        ..PhysParams::default()
    };
    let mut stream = NoiseStream::new(5, 5);
    let u0 = Field::new(grid, Space::Physical, stream.complex_normals(grid.n(), 1.0)).unwrap();
    let mut state = SimState::zero(grid, stream);
    state.u = forward_transform(&u0).unwrap();
    let mut stepper = Stepper::new(grid, EvolutionVariant::Hamiltonian, params, None).unwrap();
    let dt = grid.dx();
    let steps = 500;
    for _ in 0..steps {
        stepper.step(&mut state, dt).unwrap();
    }
    let u = inverse_transform(&state.u).unwrap();
    for (j, (a, b)) in u.values().iter().zip(u0.values()).enumerate() {
        let omega_dt = 2.0 * std::f64::consts::PI * params.c * grid.x(j) * dt;
        // per-step growth factor 1 + (ωdt)⁴/8 compounds over the run
        let bound = b.norm() * ((1.0 + omega_dt.powi(4) / 8.0).powi(steps) - 1.0) + 1e-12;
        let drift = a.norm() - b.norm();
        assert!(drift >= -1e-12 && drift <= bound * 1.01, "site {j}: drift {drift:e} bound {bound:e}");
    }
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let config = RunConfig {
        n: 256,
        t_end: 0.4,
        burn_in: Some(0.1),
        snapshot_interval: Some(0.05),
        seed: 77,
        params: PhysParams {
            gamma: 0.1,
            ..PhysParams::default()
        },
        diagnostics_every: 10,
        ..RunConfig::default()
    };
    let mut full = Vec::new();
    Simulation::new(config.clone())
        .unwrap()
        .run(|s| {
            full.push(s.clone());
            Ok(())
        })
        .unwrap();

    let mut first = Vec::new();
    let halfway = RunConfig {
        t_end: 0.2,
        ..config.clone()
    };
    let mut sim = Simulation::new(halfway).unwrap();
    sim.run(|s| {
        first.push(s.clone());
        Ok(())
    })
    .unwrap();
    let mut resumed = Simulation::resume(config, sim.into_state()).unwrap();
    resumed
        .run(|s| {
            first.push(s.clone());
            Ok(())
        })
        .unwrap();
    assert_eq!(full, first);
}

#[test]
fn replay_is_bitwise() {
    let config = RunConfig {
        n: 128,
        t_end: 0.2,
        burn_in: Some(0.0),
        snapshot_interval: Some(0.05),
        seed: 3,
        ..RunConfig::default()
    };
    let run = || {
        let mut out = Vec::new();
        Simulation::new(config.clone())
            .unwrap()
            .run(|s| {
                out.push(s.u.clone());
                Ok(())
            })
            .unwrap();
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn hamiltonian_solution_vanishes_at_the_boundary() {
    let config = RunConfig {
        n: 1024,
        t_end: 3.0,
        burn_in: Some(0.0),
        snapshot_interval: Some(1.0),
        variant: EvolutionVariant::Hamiltonian,
        params: PhysParams {
            gamma: 0.0,
            nu: 0.0,
            ..PhysParams::default()
        },
        diagnostics_every: 16,
        ..RunConfig::default()
    };
    let report = Simulation::new(config).unwrap().run(|_| Ok(())).unwrap();
    let d = &report.diagnostics;
    let worst = d
        .boundary_abs
        .iter()
        .zip(&d.max_abs)
        .map(|(b, m)| b / m)
        .fold(0.0, f64::max);
    assert!(worst <= 1e-8, "boundary ratio {worst:e}");
}

#[test]
fn solution_vanishes_at_the_boundary() {
    let config = RunConfig {
        n: 1024,
        t_end: 3.0,
        burn_in: Some(0.0),
        snapshot_interval: Some(1.0),
        params: PhysParams {
            gamma: 0.1,
            ..PhysParams::default()
        },
        diagnostics_every: 16,
        ..RunConfig::default()
    };
    let mut sim = Simulation::new(config).unwrap();
    let report = sim.run(|_| Ok(())).unwrap();
    let d = &report.diagnostics;
    let worst = d
        .boundary_abs
        .iter()
        .zip(&d.max_abs)
        .map(|(b, m)| b / m)
        .fold(0.0, f64::max);
    assert!(worst <= 1e-8, "boundary ratio {worst:e}");
}

#[test]
fn hamiltonian_field_becomes_white() {
    // ∫ g(x) C_u(t, x) dx → C_f(0) g(0) / 2|c| with g a unit Gaussian bump
    let grid = Grid::new(512, 1.0).unwrap();
    let params = PhysParams {
        nu: 0.0,
        gamma: 0.0,
        c: 10.0,
        l: 0.1,
        ..PhysParams::default()
    };
    let spec = ForceSpec::new(params.l, params.l_tot, false).unwrap();
    let width: f64 = 0.05;
    let g = |x: f64| (-x * x / (2.0 * width * width)).exp();
    let dt = grid.dx();
    let steps = (4.0 / dt) as usize;
    let lags = (4.0 * width / grid.dx()) as i64;
    let centre: Vec<usize> = (0..grid.n()).filter(|&i| grid.x(i).abs() <= 0.15).collect();
    let mut samples = Vec::new();
    for member in 0..40 {
        let mut stepper = Stepper::new(grid, EvolutionVariant::Hamiltonian, params, Some(spec)).unwrap();
        let mut state = SimState::zero(grid, NoiseStream::new(31, member));
        for _ in 0..steps {
            stepper.step(&mut state, dt).unwrap();
        }
        let u = inverse_transform(&state.u).unwrap();
        let v = u.values();
        let mut acc = Complex64::new(0.0, 0.0);
        for &i in &centre {
            for r in -lags..=lags {
                let j = (i as i64 + r) as usize;
                acc += g(r as f64 * grid.dx()) * v[j] * v[i].conj();
            }
        }
        samples.push(acc.re * grid.dx() / centre.len() as f64);
    }
    let m = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
    let se = (var / samples.len() as f64).sqrt();
    let want = params.cf0() / (2.0 * params.c.abs());
    assert!((m - want).abs() < 4.0 * se + 0.02 * want, "{m} ± {se} vs {want}");
}
