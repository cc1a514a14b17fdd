mod common;

use std::f64::consts::PI;

use common::c;
use gsmatrix::dynamics::{escape_trajectory, scattering_map, sphere_coords, FlowOptions};
use gsmatrix::linalg::{CMatrix, ComplexSymMatrix, RMatrix};
use gsmatrix::potential::{make_potential, Bump, BumpPotential, Potential};
use gsmatrix::quad::adaptive;
use gsmatrix::smatrix::{apply_scattering_matrix, state_from_coords, verify_correspondence};
use gsmatrix::sphere::SphereGaussianState;
use gsmatrix::MultiPoly;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn state(h: f64) -> SphereGaussianState {
    let g = ComplexSymMatrix::new(CMatrix::from_row_slice(2, 2, &[c(1.2, 0.3), c(0.1, 0.0), c(0.1, 0.0), c(0.7, -0.2)]))
        .unwrap();
    let q = MultiPoly::from_terms(2, [(vec![0, 0], c(1.0, 0.0)), (vec![1, 0], c(0.0, 0.5)), (vec![0, 2], c(0.2, 0.0))])
        .unwrap();
    SphereGaussianState::new(vec![-0.5, 0.3], vec![0.8, 0.6], g, q, h).unwrap()
}

fn bump() -> BumpPotential {
    BumpPotential::single(vec![0.0, 0.0], 1.0, 0.3).unwrap()
}

fn random_coords(rng: &mut StdRng) -> (Vec<f64>, Vec<f64>) {
    let th: f64 = rng.gen_range(0.0..2.0 * PI);
    let s: f64 = rng.gen_range(-0.9..0.9);
    (vec![th.cos(), th.sin()], vec![-s * th.sin(), s * th.cos()])
}

#[test]
fn free_potential_gives_the_identity_on_a_grid() {
    let s = state(0.05);
    let r = apply_scattering_matrix(&s, &BumpPotential::zero(2)).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..512 {
        let a = 2.0 * PI * k as f64 / 512.0;
        let xh = [a.cos(), a.sin()];
        worst = worst.max((r.eval(&xh, true) - s.eval(&xh, true)).norm());
    }
    assert!(worst <= 1e-8, "{worst}");
    assert_eq!(r.diagnostics.t_plus, 0.0);
    // Applying it again is still the identity.
    let again = apply_scattering_matrix(&r.state, &BumpPotential::zero(2)).unwrap();
    assert!(again.state.gamma0.max_abs_diff(&s.gamma0) < 1e-13);
    assert!(again.state.q0.max_coeff_diff(&s.q0) < 1e-12);
    assert!((r.delta1 + again.delta1).abs() < 1e-14);
}

#[test]
fn normalization_with_standard_state() {
    let s = SphereGaussianState::standard(vec![0.0, 0.4], vec![1.0, 0.0], 0.02).unwrap();
    let r = apply_scattering_matrix(&s, &BumpPotential::zero(2)).unwrap();
    assert!(r.state.q0.max_coeff_diff(&MultiPoly::one(2)) < 1e-13);
    assert!(r.delta1.abs() < 1e-14);
}

#[test]
fn bump_off_the_ray_changes_nothing() {
    let s = state(0.05);
    // The line x₀ + tξ₀ passes at distance 3.3 from (2, 3.5) − well clear of radius 1.
    let v = BumpPotential::single(vec![-2.0, 3.5], 1.0, 0.4).unwrap();
    let free = apply_scattering_matrix(&s, &BumpPotential::zero(2)).unwrap();
    let r = apply_scattering_matrix(&s, &v).unwrap();
    assert!((r.delta1 - free.delta1).abs() < 1e-12);
    assert!(r.state.gamma0.max_abs_diff(&free.state.gamma0) < 1e-12);
    assert!(r.state.q0.max_coeff_diff(&free.state.q0) < 1e-12);
}

#[test]
fn classical_correspondence_for_random_inputs() {
    let v = bump();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..10 {
        let (w, e) = random_coords(&mut rng);
        let report = verify_correspondence(&state_from_coords(&w, &e, 0.05).unwrap(), &v).unwrap();
        assert!(report.passed && report.discrepancy < 1e-7, "{}", report.discrepancy);
    }
    let free = verify_correspondence(&state_from_coords(&[0.0, 1.0], &[0.2, 0.0], 0.05).unwrap(), &BumpPotential::zero(2))
        .unwrap();
    assert_eq!(free.discrepancy, 0.0);
}

#[test]
fn correspondence_in_three_dimensions() {
    let v = make_potential(3, &[(vec![0.0, 0.0, 0.0], 1.0, 0.3), (vec![0.4, -0.3, 0.2], 0.6, -0.15)]).unwrap();
    let w = [0.48, 0.6, 0.64];
    let e = [0.3, 0.1, -0.31875];
    let report = verify_correspondence(&state_from_coords(&w, &e, 0.05).unwrap(), &v).unwrap();
    assert!(report.passed, "{}", report.discrepancy);
}

#[test]
fn rotation_equivariance() {
    let v = make_potential(2, &[(vec![0.2, 0.1], 1.0, 0.3), (vec![-0.4, 0.5], 0.5, 0.2)]).unwrap();
    let th: f64 = 0.9;
    let rot = RMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
    let vr = v.rotated(&rot);
    let apply = |u: &[f64]| -> Vec<f64> { (0..2).map(|i| rot[(i, 0)] * u[0] + rot[(i, 1)] * u[1]).collect() };
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let (w, e) = random_coords(&mut rng);
        let a = apply_scattering_matrix(&state_from_coords(&w, &e, 0.05).unwrap(), &v).unwrap();
        let b = apply_scattering_matrix(&state_from_coords(&apply(&w), &apply(&e), 0.05).unwrap(), &vr).unwrap();
        let ka = &a.diagnostics.kappa;
        let kb = &b.diagnostics.kappa;
        let (rw, re) = (apply(&ka.omega), apply(&ka.eta));
        for i in 0..2 {
            assert!((rw[i] - kb.omega[i]).abs() < 1e-6 && (re[i] - kb.eta[i]).abs() < 1e-6);
        }
        assert!((a.delta1 - b.delta1).abs() < 1e-6);
        let ra = verify_correspondence(&state_from_coords(&w, &e, 0.05).unwrap(), &v).unwrap();
        let rb = verify_correspondence(&state_from_coords(&apply(&w), &apply(&e), 0.05).unwrap(), &vr).unwrap();
        assert!((ra.discrepancy - rb.discrepancy).abs() < 1e-6);
    }
}

#[test]
fn far_bump_is_invisible() {
    let s = state(0.05);
    let v = bump();
    let with_far = v.with_bump(Bump::new(vec![9.0, -7.0], 1.5, 0.5).unwrap()).unwrap();
    let a = apply_scattering_matrix(&s, &v).unwrap();
    let b = apply_scattering_matrix(&s, &with_far).unwrap();
    let ta = escape_trajectory(&v, &s.x0, &s.xi0, FlowOptions::new(1e-10)).unwrap();
    let tb = escape_trajectory(&with_far, &s.x0, &s.xi0, FlowOptions::new(1e-10)).unwrap();
    assert_eq!(ta, tb);
    assert!((a.delta1 - b.delta1).abs() < 1e-8);
    assert!(a.state.gamma0.max_abs_diff(&b.state.gamma0) < 1e-8);
    assert!(a.state.q0.max_coeff_diff(&b.state.q0) < 1e-8);
}

#[test]
fn output_is_a_valid_state() {
    let v = bump();
    let r = apply_scattering_matrix(&state(0.05), &v).unwrap();
    assert!(r.state.gamma0.real_part_min_eigenvalue() > 0.0);
    let n: f64 = r.state.xi0.iter().map(|k| k * k).sum::<f64>().sqrt();
    assert!((n - 1.0).abs() < 1e-12);
    let x1xi1: f64 = r.state.x0.iter().zip(&r.state.xi0).map(|(a, b)| a * b).sum();
    assert!((x1xi1 - (-0.5 * 0.8 + 0.3 * 0.6)).abs() < 1e-12);
    assert!(r.diagnostics.action_mismatch < 1e-8);
    let k = sphere_coords(&r.state.x0, &r.state.xi0).unwrap();
    assert_eq!(k, r.diagnostics.kappa);
}

#[test]
fn transmission_in_one_dimension_matches_wkb() {
    // On S⁰ the state is a single number; transmission multiplies it by
    // e^{(i/h)∫(√(1−2V) − 1)dx} with unit modulus at leading order.
    let v = make_potential(1, &[(vec![0.0], 1.0, 0.3), (vec![0.6], 0.5, -0.2)]).unwrap();
    let s = SphereGaussianState::standard(vec![0.0], vec![1.0], 0.05).unwrap();
    let r = apply_scattering_matrix(&s, &v).unwrap();
    // Split at the support edges; the integrand is flat-but-not-analytic there.
    let f = |x: f64| (1.0 - 2.0 * v.value(&[x])).sqrt() - 1.0;
    let wkb: f64 = [-1.0, 0.1, 1.0, 1.1].windows(2).map(|w| adaptive(f, w[0], w[1], 1e-14)).sum();
    assert!((r.delta1 - wkb).abs() < 1e-8, "{} vs {wkb}", r.delta1);
    let q1 = r.state.q0.eval_real(&[0.0]);
    assert!((q1 - c(1.0, 0.0)).norm() < 1e-8, "{q1}");
    assert_eq!(r.state.xi0, vec![1.0]);
}

#[test]
fn delta_is_the_virial_integral() {
    let v = bump();
    let s = state_from_coords(&[1.0, 0.0], &[0.0, 0.3], 0.05).unwrap();
    let r = apply_scattering_matrix(&s, &v).unwrap();
    let traj = escape_trajectory(&v, &s.x0, &s.xi0, FlowOptions::new(1e-10)).unwrap();
    assert!((r.delta1 - traj.end().virial).abs() < 1e-9);
    // Sanity: the deflected output agrees with the classical map.
    let im = scattering_map(&v, &[1.0, 0.0], &[0.0, 0.3], 1e-10).unwrap();
    assert!((r.state.xi0[0] - im.omega[0]).abs() < 1e-8);
}
