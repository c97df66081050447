use num_complex::Complex64;
use pilotwave::fields::{expectation_position, gaussian_packet, Axis, ComplexField, Grid, PhysicalParams, SpinorField};
use pilotwave::madelung::{spin_state, MadelungView};
use pilotwave::propagators::{evolve, AppliedField, MagneticField, Potential, SpinLayout, SplitStepper, StepConfig};
use proptest::prelude::*;

fn line(n: usize, h: f64) -> Grid {
    Grid::line(Axis::centered(n, h).unwrap())
}

fn run_scalar(grid: &Grid, v: &Potential, p: &PhysicalParams, psi: ComplexField, dt: f64, t: f64) -> ComplexField {
    let mut s = SplitStepper::scalar(grid, v, p, StepConfig::periodic(dt)).unwrap();
    let out = evolve(&mut s, SpinorField::new(vec![psi]).unwrap(), 0.0, t, 0, |_, _| Ok(())).unwrap();
    out.components[0].clone()
}

fn l2_gap(a: &ComplexField, b: &ComplexField) -> f64 {
    let h = a.grid.cell_volume();
    let sum: f64 = a.physical_values().iter().zip(b.physical_values()).map(|(p, q)| (p - q).norm_sqr()).sum();
    (sum * h).sqrt()
}

fn mean_momentum(psi: &ComplexField, p: &PhysicalParams) -> f64 {
    let view = MadelungView::from_spinor(&SpinorField::new(vec![psi.clone()]).unwrap(), p);
    let h = psi.grid.cell_volume();
    p.mass * view.density.iter().zip(&view.velocity[0]).map(|(r, v)| r * v).sum::<f64>() * h
}

#[test]
fn strang_splitting_is_second_order() {
    let grid = line(256, 0.05);
    let p = PhysicalParams::new(1.0, 1.0);
    let v = Potential::harmonic(1.0, 1.0, vec![0.0]);
    // a displaced, squeezed packet so the splitting error is not degenerate
    let psi0 = gaussian_packet(&grid, &[1.5], 0.5, &[0.3], &p).unwrap();
    let dt = 0.02;
    let reference = run_scalar(&grid, &v, &p, psi0.clone(), dt / 4.0, 1.0);
    let e1 = l2_gap(&run_scalar(&grid, &v, &p, psi0.clone(), dt, 1.0), &reference);
    let e2 = l2_gap(&run_scalar(&grid, &v, &p, psi0, dt / 2.0, 1.0), &reference);
    // ideal ratio with a dt/4 reference is (1 − 1/16)/(1/4 − 1/16) = 5
    let ratio = e1 / e2;
    assert!((3.5..6.0).contains(&ratio), "errors {e1:.3e} {e2:.3e}, ratio {ratio:.2}");
}

#[test]
fn galilean_boost_reproduces_shifted_evolution() {
    let grid = line(1024, 0.05);
    let p = PhysicalParams::new(1.3, 1.0);
    let (v, t) = (0.8, 2.5);
    // v·t = 2.0 = 40 cells
    let shift = 40;
    let rest = run_scalar(&grid, &Potential::None, &p, gaussian_packet(&grid, &[-3.0], 0.7, &[0.0], &p).unwrap(), 0.01, t);
    let moving = run_scalar(&grid, &Potential::None, &p, gaussian_packet(&grid, &[-3.0], 0.7, &[v], &p).unwrap(), 0.01, t);
    let (a, b) = (rest.density(), moving.density());
    let worst = (0..grid.len() - shift).map(|i| (a[i] - b[i + shift]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst:e}");
}

#[test]
fn ehrenfest_is_exact_for_linear_potential() {
    let grid = line(1024, 0.05);
    let (m, f, x0, v0) = (2.0, 0.7, -1.0, 0.4);
    let p = PhysicalParams::new(m, 1.0);
    let potential = Potential::Linear { coeffs: vec![f] };
    let mut s = SplitStepper::scalar(&grid, &potential, &p, StepConfig::periodic(0.02)).unwrap();
    let psi = gaussian_packet(&grid, &[x0], 0.8, &[v0], &p).unwrap();
    let mut worst: f64 = 0.0;
    evolve(&mut s, SpinorField::new(vec![psi]).unwrap(), 0.0, 4.0, 10, |t, st| {
        let x = expectation_position(&st.components[0])?[0];
        let pm = mean_momentum(&st.components[0], &p);
        let a = -f / m;
        worst = worst.max((x - (x0 + v0 * t + 0.5 * a * t * t)).abs());
        worst = worst.max((pm - m * (v0 + a * t)).abs());
        Ok(())
    })
    .unwrap();
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn ehrenfest_harmonic_error_is_second_order() {
    let grid = line(256, 0.05);
    let (m, w) = (1.0, 1.3);
    let p = PhysicalParams::new(m, 1.0);
    let v = Potential::harmonic(m, w, vec![0.0]);
    let psi = gaussian_packet(&grid, &[2.0], 0.4, &[0.5], &p).unwrap();
    let t = 2.0;
    // classical motion of the centre: x0 cos wt + v0/w sin wt
    let exact_x = 2.0 * (w * t).cos() + 0.5 / w * (w * t).sin();
    let exact_p = m * (-2.0 * w * (w * t).sin() + 0.5 * (w * t).cos());
    let err = |dt: f64| {
        let out = run_scalar(&grid, &v, &p, psi.clone(), dt, t);
        let x = expectation_position(&out).unwrap()[0];
        (x - exact_x).abs() + (mean_momentum(&out, &p) - exact_p).abs()
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{e1:e} {e2:e}");
}

#[test]
fn pauli_steps_keep_unit_bloch_vectors() {
    let grid = line(512, 0.02);
    let p = PhysicalParams::new(1.0, 1.0).with_magneton(0.5);
    let field = MagneticField::new(3.0, 2.0, (0.0, 0.5));
    let mut s = SplitStepper::new(
        &grid,
        &Potential::None,
        &p,
        StepConfig::periodic(2e-3),
        SpinLayout::single_z(0),
        vec![AppliedField { particle: 0, field }],
    )
    .unwrap();
    let prof = gaussian_packet(&grid, &[0.0], 0.5, &[0.0], &p).unwrap();
    let st = SpinorField::from_profile(&prof, &spin_state(1.1, 0.4));
    let out = evolve(&mut s, st, 0.0, 0.6, 0, |_, _| Ok(())).unwrap();
    let view = MadelungView::from_spinor(&out, &p);
    let (up, dn) = (out.components[0].physical_values(), out.components[1].physical_values());
    for i in (0..grid.len()).filter(|&i| view.valid[i]) {
        let b = pilotwave::madelung::bloch_vector([up[i], dn[i]]);
        let n = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        assert!((n - 1.0).abs() < 1e-9, "cell {i}: |s| = {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn each_step_is_unitary(
        x0 in -2.0f64..2.0,
        v0 in -1.0f64..1.0,
        sigma in 0.3f64..1.0,
        k in 0.0f64..3.0,
        g in -1.0f64..1.0,
    ) {
        let grid = line(256, 0.06);
        let p = PhysicalParams::new(1.0, 1.0).with_gravity(vec![g]);
        let v = Potential::Sum(vec![Potential::gravity(&p), Potential::Harmonic { stiffness: k, center: vec![0.3] }]);
        let mut s = SplitStepper::scalar(&grid, &v, &p, StepConfig::periodic(5e-3)).unwrap();
        let mut st = SpinorField::new(vec![gaussian_packet(&grid, &[x0], sigma, &[v0], &p).unwrap()]).unwrap();
        for n in 0..20 {
            let before = st.norm2();
            s.step(&mut st, n as f64 * 5e-3).unwrap();
            prop_assert!((st.norm2() - before).abs() <= 1e-12);
        }
    }

    #[test]
    fn global_phase_commutes_with_evolution(phase in -3.0f64..3.0) {
        let grid = line(128, 0.1);
        let p = PhysicalParams::new(1.0, 1.0);
        let psi = gaussian_packet(&grid, &[0.5], 0.8, &[0.4], &p).unwrap();
        let mut rotated = psi.clone();
        rotated.scale(Complex64::from_polar(1.0, phase));
        let v = Potential::harmonic(1.0, 0.7, vec![0.0]);
        let a = run_scalar(&grid, &v, &p, psi, 0.01, 0.3);
        let b = run_scalar(&grid, &v, &p, rotated, 0.01, 0.3);
        let gap = a.density().iter().zip(b.density()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-13);
    }
}
