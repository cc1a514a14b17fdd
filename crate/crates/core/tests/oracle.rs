mod common;

use common::c;
use gsmatrix::dynamics::{escape_trajectory_with_margin, FlowOptions};
use gsmatrix::linalg::{ComplexSymMatrix, RMatrix};
use gsmatrix::oracle::{
    assemble_generalized_eigenfunction, energy, extract_packet_params, read_snapshot, solve, solve_observed,
    write_snapshot, EigenfunctionSpec, GridSpec, GridWavefunction,
};
use gsmatrix::packet::{farfield_future, farfield_past, propagate, PropagateOptions, WavePacket};
use gsmatrix::potential::BumpPotential;
use gsmatrix::Error;
use num_complex::Complex64 as C64;

fn packet_1d(x: f64, gamma: f64, h: f64) -> WavePacket {
    WavePacket::gaussian(vec![x], vec![1.0], ComplexSymMatrix::scaled_identity(1, c(gamma, 0.0)), h).unwrap()
}

#[test]
fn grid_validation() {
    assert!(GridSpec::new(3, 256, 1.0).is_err());
    assert!(GridSpec::new(1, 300, 1.0).is_err());
    assert!(GridSpec::new(1, 128, 1.0).is_err());
    let g = GridSpec::new(2, 256, 4.0).unwrap();
    assert_eq!(g.len(), 256 * 256);
    assert_eq!(g.dx(), 8.0 / 256.0);
    assert_eq!(g.coord(g.nearest(1.3)), -4.0 + (g.nearest(1.3) as f64) * g.dx());
}

#[test]
fn free_solver_matches_closed_form() {
    let h = 0.1;
    let grid = GridSpec::new(1, 4096, 40.0).unwrap();
    let p = packet_1d(-5.0, 1.0, h);
    let u0 = GridWavefunction::from_packet(grid, &p).unwrap();
    let u = solve(&u0, &BumpPotential::zero(1), 2.0, 1e-3).unwrap();
    let exact = GridWavefunction::from_packet(grid, &p.free_evolve(2.0).unwrap()).unwrap();
    let err = u.relative_error(&exact);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn free_solver_matches_closed_form_2d() {
    let h = 0.1;
    let grid = GridSpec::new(2, 256, 10.0).unwrap();
    let g = ComplexSymMatrix::from_real(&RMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8])).unwrap();
    let p = WavePacket::gaussian(vec![-2.0, 1.0], vec![0.6, -0.8], g, h).unwrap();
    let u0 = GridWavefunction::from_packet(grid, &p).unwrap();
    let u = solve(&u0, &BumpPotential::zero(2), 3.0, 0.01).unwrap();
    let exact = GridWavefunction::from_packet(grid, &p.free_evolve(3.0).unwrap()).unwrap();
    assert!(u.relative_error(&exact) < 1e-6);
}

#[test]
fn mass_and_energy_are_conserved() {
    let h = 0.1;
    let grid = GridSpec::new(1, 4096, 20.0).unwrap();
    let v = BumpPotential::single(vec![0.0], 1.0, 0.3).unwrap();
    let u0 = GridWavefunction::from_packet(grid, &packet_1d(-3.0, 1.0, h)).unwrap();
    let m0 = u0.mass();
    let e0 = energy(&u0, &v).unwrap();
    let mut worst_mass: f64 = 0.0;
    solve_observed(&u0, &v, 6.0, 0.01, |_, _, u| {
        worst_mass = worst_mass.max((u.mass() - m0).abs() / m0);
    })
    .unwrap();
    assert!(worst_mass < 1e-12, "{worst_mass}");
    let u = solve(&u0, &v, 6.0, 1e-3).unwrap();
    let drift = (energy(&u, &v).unwrap() - e0).abs() / e0.abs();
    assert!(drift < 1e-8, "{drift}");
}

#[test]
fn splitting_is_second_order() {
    let h = 0.1;
    let grid = GridSpec::new(1, 2048, 16.0).unwrap();
    let v = BumpPotential::single(vec![0.0], 1.0, 0.3).unwrap();
    let u0 = GridWavefunction::from_packet(grid, &packet_1d(-2.0, 1.0, h)).unwrap();
    let run = |dt: f64| solve(&u0, &v, 4.0, dt).unwrap();
    let (a, b, d) = (run(0.01), run(0.005), run(0.0025));
    let ratio = a.distance(&b) / b.distance(&d);
    assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
    // Against the finest run as reference the ratio is (1 − 1/16)/(1/4 − 1/16) = 5.
    let against_ref = a.distance(&d) / b.distance(&d);
    assert!((against_ref - 5.0).abs() < 0.5, "{against_ref}");
}

#[test]
fn box_too_small_is_reported() {
    let grid = GridSpec::new(1, 256, 4.0).unwrap();
    let u0 = GridWavefunction::from_packet(grid, &packet_1d(0.0, 1.0, 0.1)).unwrap();
    match solve(&u0, &BumpPotential::zero(1), 10.0, 0.01) {
        Err(Error::BoxTooSmall(f)) => assert!(f > 1e-8),
        other => panic!("expected BoxTooSmall, got {other:?}"),
    }
}

#[test]
fn moments_of_a_gaussian() {
    let h = 0.05;
    let grid = GridSpec::new(2, 256, 6.0).unwrap();
    let re = RMatrix::from_row_slice(2, 2, &[1.5, 0.3, 0.3, 0.9]);
    let p = WavePacket::gaussian(vec![0.7, -1.1], vec![0.6, 0.8], ComplexSymMatrix::from_real(&re).unwrap(), h).unwrap();
    let m = extract_packet_params(&GridWavefunction::from_packet(grid, &p).unwrap()).unwrap();
    for a in 0..2 {
        assert!((m.center[a] - p.center[a]).abs() < 1e-10);
        assert!((m.momentum[a] - p.momentum[a]).abs() < 1e-10);
    }
    let expected = re.try_inverse().unwrap() * (h / 2.0);
    assert!((&m.cov - &expected).amax() < 1e-10, "{} vs {expected}", m.cov);
}

#[test]
fn moments_after_crossing_a_bump_follow_the_flow() {
    let h = 0.05;
    // A broad bump: the deflection varies slowly across the packet.
    let grid = GridSpec::new(2, 512, 12.0).unwrap();
    let v = BumpPotential::single(vec![0.0, 0.0], 3.0, 0.1).unwrap();
    let g = ComplexSymMatrix::scaled_identity(2, c(0.3, 0.0));
    let p = WavePacket::gaussian(vec![-5.0, 0.8], vec![1.0, 0.0], g, h).unwrap();
    let u = solve(&GridWavefunction::from_packet(grid, &p).unwrap(), &v, 10.0, 0.01).unwrap();
    let m = extract_packet_params(&u).unwrap();
    let q = propagate(&p, 10.0, &v, PropagateOptions::new(1e-10)).unwrap();
    for a in 0..2 {
        assert!((m.center[a] - q.center[a]).abs() < h, "{:?} vs {:?}", m.center, q.center);
        assert!((m.momentum[a] - q.momentum[a]).abs() < h, "{:?} vs {:?}", m.momentum, q.momentum);
    }
    let expected = q.gamma.real_part().try_inverse().unwrap() * (h / 2.0);
    let rel = (&m.cov - &expected).norm() / expected.norm();
    assert!(rel < 0.1, "{rel}: {} vs {expected}", m.cov);
}

#[test]
fn two_packets_are_multimodal() {
    let h = 0.05;
    let grid = GridSpec::new(1, 1024, 10.0).unwrap();
    let a = packet_1d(-3.0, 1.0, h);
    let b = packet_1d(3.0, 1.0, h);
    let u = GridWavefunction::from_fn(grid, h, |x| a.eval(x) + b.eval(x)).unwrap();
    assert!(matches!(extract_packet_params(&u), Err(Error::Multimodal(2))));
}

#[test]
fn snapshot_round_trip() {
    let grid = GridSpec::new(2, 256, 3.0).unwrap();
    let u = GridWavefunction::from_fn(grid, 0.1, |x| C64::new(x[0].sin(), x[1] * x[0])).unwrap();
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &u, 1.25).unwrap();
    assert_eq!(buf.len(), 4 + 12 + 24 + 16 * grid.len());
    let (back, t) = read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(t, 1.25);
    assert_eq!(back, u);
    buf[0] = b'X';
    assert!(read_snapshot(buf.as_slice()).is_err());
    assert!(read_snapshot(&buf[..20]).is_err());
}

#[test]
fn free_eigenfunction_solves_the_equation() {
    let h = 0.1;
    let grid = GridSpec::new(1, 4096, 40.0).unwrap();
    let p = packet_1d(0.0, 1.0, h);
    let e = assemble_generalized_eigenfunction(&p, &BumpPotential::zero(1), &EigenfunctionSpec::new(grid, h)).unwrap();
    assert_eq!(e.t_plus, 0.0);
    assert!(e.scaled_residual < 1e-6, "{}", e.scaled_residual);
    // The field itself is of order one.
    let peak = e.field.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(peak > 0.1, "{peak}");
}

#[test]
fn eigenfunction_far_field_matches_profiles() {
    let h = 0.1;
    let grid = GridSpec::new(1, 4096, 40.0).unwrap();
    let v = BumpPotential::single(vec![0.0], 1.0, 0.3).unwrap();
    let p = packet_1d(0.0, 0.5, h);
    let mut spec = EigenfunctionSpec::new(grid, h);
    spec.probes = vec![vec![20.0], vec![-20.0]];
    let e = assemble_generalized_eigenfunction(&p, &v, &spec).unwrap();
    // u⁻ starts behind the bump, so t₊ covers the whole crossing.
    let traj =
        escape_trajectory_with_margin(&v, &e.u_minus.center, &e.u_minus.momentum, FlowOptions::new(1e-10), spec.margin)
            .unwrap();
    assert!((e.t_plus - traj.end().t).abs() < 1e-9);

    let (xr, er) = &e.probes[0];
    let out = farfield_future(&e.u_plus, 0.0).unwrap().eval(&[1.0]) * C64::from_polar(1.0, e.t_plus / (2.0 * h));
    let predicted = out * C64::from_polar(1.0, xr[0] / h);
    assert!((er - predicted).norm() < 0.05 * predicted.norm(), "{er} vs {predicted}");

    let (xl, el) = &e.probes[1];
    let inc = farfield_past(&e.u_minus, 0.0).unwrap().eval(&[-1.0]);
    let predicted = inc * C64::from_polar(1.0, xl[0] / h);
    assert!((el - predicted).norm() < 0.05 * predicted.norm(), "{el} vs {predicted}");
}

#[test]
fn eigenfunction_residual_is_order_h_to_the_half() {
    let grid = GridSpec::new(1, 4096, 40.0).unwrap();
    let v = BumpPotential::single(vec![0.0], 1.0, 0.3).unwrap();
    let scaled: Vec<f64> = [0.2, 0.1]
        .iter()
        .map(|&h| {
            let e = assemble_generalized_eigenfunction(&packet_1d(0.0, 0.5, h), &v, &EigenfunctionSpec::new(grid, h))
                .unwrap();
            assert!((e.scaled_residual - e.propagation_error).abs() < 0.2 * e.propagation_error);
            e.scaled_residual
        })
        .collect();
    let ratio = scaled[0] / scaled[1];
    assert!(ratio > 1.0 && ratio < 2.0, "{ratio}");
}
