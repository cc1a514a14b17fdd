use gsmatrix::dynamics::{
    action_integral, escape_times, flow, incoming_point, integrate_trajectory, integrate_until_escape, scattering_map, sphere_coords,
    variational_frame, FlowOptions, PhasePoint,
};
use gsmatrix::potential::{make_potential, BumpPotential, Potential};
use gsmatrix::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// `(ω′, η′, t′)` for the bump `A = 0.3`, radius 1 and `ω = e₁`, `η = 0.3e₂`,
/// from integrations at tolerances 1e−11, 1e−12, 1e−13 (agreeing to 1e−12).
const DEFLECTION_FIXTURE: ([f64; 2], [f64; 2], f64) = (
    [0.801_298_934_632_087, 0.598_264_170_210_353],
    [-0.179_479_251_063_106, 0.240_389_680_389_627],
    0.089_994_386_405_303,
);

fn bump2() -> BumpPotential {
    BumpPotential::single(vec![0.0, 0.0], 1.0, 0.3).unwrap()
}

fn angle(v: &[f64]) -> f64 {
    v[1].atan2(v[0])
}

#[test]
fn bump_values() {
    let v = bump2();
    assert_eq!(v.value(&[0.0, 0.0]), 0.3);
    for x in [[1.0, 0.0], [0.6, 0.8], [2.0, -3.0]] {
        assert_eq!(v.value(&x), 0.0);
        assert!(v.gradient(&x).iter().all(|g| *g == 0.0));
        assert!(v.hessian(&x).iter().all(|g| *g == 0.0));
    }
    assert_eq!(v.support_radius(), 1.0);
}

#[test]
fn bump_derivatives_match_finite_differences() {
    let v = make_potential(2, &[(vec![0.0, 0.0], 1.0, 0.3), (vec![0.7, -0.2], 0.5, -0.1)]).unwrap();
    let e = 1e-5;
    for x in [[0.5, 0.0], [0.3, -0.4], [0.8, -0.1]] {
        let g = v.gradient(&x);
        let hs = v.hessian(&x);
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += e;
            xm[a] -= e;
            let fd = (v.value(&xp) - v.value(&xm)) / (2.0 * e);
            assert!((fd - g[a]).abs() < 1e-6, "grad {a} at {x:?}");
            let gp = v.gradient(&xp);
            let gm = v.gradient(&xm);
            for b in 0..2 {
                assert!(((gp[b] - gm[b]) / (2.0 * e) - hs[(b, a)]).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn make_potential_validation() {
    assert!(matches!(make_potential(2, &[(vec![0.0, 0.0], 0.0, 1.0)]), Err(Error::NonPositiveRadius(_))));
    let empty = make_potential(2, &[]).unwrap();
    assert_eq!(empty.value(&[0.0, 0.0]), 0.0);
    let two = make_potential(2, &[(vec![3.0, 0.0], 1.0, 0.2), (vec![0.0, -1.0], 0.5, 0.1)]).unwrap();
    assert_eq!(two.support_radius(), 4.0);
}

#[test]
fn free_flow_is_a_straight_line() {
    let rho = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
    let out = flow(&BumpPotential::zero(2), &rho, 3.0, 1e-10).unwrap();
    assert!((out.x[0] - 3.0).abs() < 1e-12 && out.x[1].abs() < 1e-12);
    assert_eq!(out.xi, vec![1.0, 0.0]);
}

#[test]
fn energy_is_conserved_through_the_bump() {
    let v = bump2();
    let tol = 1e-10;
    let rho = PhasePoint::new(vec![0.0, 0.2], vec![0.9, (1.0f64 - 2.0 * 0.3 * 0.99 - 0.81).max(0.0).sqrt()]).unwrap();
    let e0 = rho.energy(&v);
    for t in [-5.0, -2.5, 2.5, 5.0] {
        let traj = integrate_trajectory(&v, &rho, t, FlowOptions::new(tol), |_| false).unwrap();
        for s in &traj.samples {
            assert!((s.point.energy(&v) - e0).abs() < 1e-9, "drift at {}", s.t);
            assert!((s.point.energy(&v) - e0).abs() <= 10.0 * tol * (1.0 + s.t.abs()));
        }
    }
}

#[test]
fn group_property() {
    let v = bump2();
    let tol = 1e-10;
    let rho = PhasePoint::new(vec![-2.0, 0.4], vec![1.0, 0.0]).unwrap();
    for (s, t) in [(1.0, 2.5), (2.7, 1.1), (-0.5, 3.0)] {
        let a = flow(&v, &flow(&v, &rho, t, tol).unwrap(), s, tol).unwrap();
        let b = flow(&v, &rho, s + t, tol).unwrap();
        assert!(a.distance(&b) < 10.0 * tol * 10.0, "{}", a.distance(&b));
    }
}

#[test]
fn frames() {
    let v = bump2();
    let rho = PhasePoint::new(vec![-2.0, 0.3], vec![1.0, 0.0]).unwrap();
    let id = variational_frame(&v, &rho, 0.0, 1e-10).unwrap();
    assert_eq!(id.matrix(), nalgebra::DMatrix::identity(4, 4));
    let free = variational_frame(&BumpPotential::zero(2), &rho, 2.5, 1e-10).unwrap();
    assert!((free.matrix() - gsmatrix::dynamics::VariationalFrame::free(2, 2.5).matrix()).amax() < 1e-12);
    let m = variational_frame(&v, &rho, 4.5, 1e-10).unwrap();
    assert!(m.symplectic_defect() < 1e-8);
    assert!((m.determinant() - 1.0).abs() < 1e-9);
}

#[test]
fn frame_matches_finite_differences_of_the_flow() {
    let v = bump2();
    let tol = 1e-12;
    let rho = PhasePoint::new(vec![-1.5, 0.25], vec![0.95, 0.1]).unwrap();
    let t = 3.0;
    let m = variational_frame(&v, &rho, t, tol).unwrap().matrix();
    let e = 1e-6;
    for col in 0..4 {
        let shift = |s: f64| {
            let mut z: Vec<f64> = rho.x.iter().chain(&rho.xi).cloned().collect();
            z[col] += s;
            let p = flow(&v, &PhasePoint::new(z[..2].to_vec(), z[2..].to_vec()).unwrap(), t, tol).unwrap();
            p.x.into_iter().chain(p.xi).collect::<Vec<f64>>()
        };
        let (zp, zm) = (shift(e), shift(-e));
        for row in 0..4 {
            assert!(((zp[row] - zm[row]) / (2.0 * e) - m[(row, col)]).abs() < 1e-5);
        }
    }
}

#[test]
fn incoming_points() {
    let p = incoming_point(&[1.0, 0.0], &[0.0, 0.0], 2.0).unwrap();
    assert_eq!((p.x.clone(), p.xi.clone()), (vec![-3.0, 0.0], vec![1.0, 0.0]));
    assert!(matches!(incoming_point(&[1.0, 0.0], &[0.1, 0.2], 2.0), Err(Error::NotOrthogonal(_))));
    let v = bump2();
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let s: f64 = rng.gen_range(-2.0..2.0);
        let omega = [th.cos(), th.sin()];
        let eta = [-s * th.sin(), s * th.cos()];
        let p = incoming_point(&omega, &eta, v.support_radius()).unwrap();
        assert!((p.energy(&v) - 0.5).abs() < 1e-15);
        let along = p.x[0] * omega[0] + p.x[1] * omega[1];
        for a in 0..2 {
            assert!((p.x[a] - along * omega[a] - eta[a]).abs() < 1e-14);
        }
        // Backward in time the point follows the free line tω + η.
        let back = flow(&v, &p, -1.5, 1e-10).unwrap();
        let t = -(v.support_radius() + 1.0) - 1.5;
        for a in 0..2 {
            assert!((back.x[a] - (t * omega[a] + eta[a])).abs() < 1e-9);
        }
    }
}

#[test]
fn scattering_map_trivial_cases() {
    let free = scattering_map(&BumpPotential::zero(2), &[0.6, 0.8], &[-0.4, 0.3], 1e-10).unwrap();
    assert_eq!(free.omega, vec![0.6, 0.8]);
    assert!((free.eta[0] + 0.4).abs() < 1e-14 && (free.eta[1] - 0.3).abs() < 1e-14);
    assert!(free.time_delay.abs() < 1e-12);

    // A line that misses the support is not bent at all.
    let miss = scattering_map(&bump2(), &[1.0, 0.0], &[0.0, 1.2], 1e-10).unwrap();
    assert_eq!(miss.omega, vec![1.0, 0.0]);
    assert_eq!(miss.eta, vec![0.0, 1.2]);
}

#[test]
fn deflection_fixture() {
    let im = scattering_map(&bump2(), &[1.0, 0.0], &[0.0, 0.3], 1e-10).unwrap();
    let (w, e, t) = DEFLECTION_FIXTURE;
    assert!((angle(&im.omega) - angle(&w)).abs() < 1e-8);
    assert!((im.eta[0] - e[0]).abs() < 1e-8 && (im.eta[1] - e[1]).abs() < 1e-8);
    assert!((im.time_delay - t).abs() < 1e-8);
}

#[test]
fn scattering_map_is_symplectic() {
    let v = bump2();
    let tol = 1e-12;
    let image = |th: f64, s: f64| {
        let omega = [th.cos(), th.sin()];
        let eta = [-s * th.sin(), s * th.cos()];
        let im = scattering_map(&v, &omega, &eta, tol).unwrap();
        // Signed impact parameter with respect to the rotated frame.
        let wp = &im.omega;
        (angle(wp), -im.eta[0] * wp[1] + im.eta[1] * wp[0])
    };
    let e = 1e-5;
    for (th, s) in [(0.0, 0.3), (0.7, -0.5), (2.0, 0.8)] {
        let (a1, b1) = image(th + e, s);
        let (a0, b0) = image(th - e, s);
        let (a3, b3) = image(th, s + e);
        let (a2, b2) = image(th, s - e);
        let j = [[(a1 - a0) / (2.0 * e), (a3 - a2) / (2.0 * e)], [(b1 - b0) / (2.0 * e), (b3 - b2) / (2.0 * e)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        assert!((det - 1.0).abs() < 1e-4, "det {det}");
    }
}

#[test]
fn time_reversal() {
    let v = make_potential(2, &[(vec![0.0, 0.0], 1.0, 0.3), (vec![0.5, 0.8], 0.6, -0.2)]).unwrap();
    for (th, s) in [(0.2, 0.3), (1.3, -0.6), (3.0, 0.1)] {
        let omega = [f64::cos(th), f64::sin(th)];
        let eta = [-s * th.sin(), s * th.cos()];
        let out = scattering_map(&v, &omega, &eta, 1e-11).unwrap();
        let back_w: Vec<f64> = out.omega.iter().map(|c| -c).collect();
        let back = scattering_map(&v, &back_w, &out.eta, 1e-11).unwrap();
        for a in 0..2 {
            assert!((back.omega[a] + omega[a]).abs() < 1e-7);
            assert!((back.eta[a] - eta[a]).abs() < 1e-7);
        }
    }
}

#[test]
fn escape_radius_does_not_matter() {
    // Starting the same line further out only shifts the base point.
    let v = bump2();
    let a = scattering_map(&v, &[1.0, 0.0], &[0.0, 0.3], 1e-11).unwrap();
    let far = v.with_bump(gsmatrix::potential::Bump::new(vec![0.0, 30.0], 0.1, 0.0).unwrap()).unwrap();
    let b = scattering_map(&far, &[1.0, 0.0], &[0.0, 0.3], 1e-11).unwrap();
    for k in 0..2 {
        assert!((a.omega[k] - b.omega[k]).abs() < 1e-8);
        assert!((a.eta[k] - b.eta[k]).abs() < 1e-8);
    }
    assert!((a.time_delay - b.time_delay).abs() < 1e-8);
}

#[test]
fn trapping_is_reported() {
    // Inside a deep well at energy below zero the trajectory never leaves.
    let v = BumpPotential::single(vec![0.0, 0.0], 1.0, -5.0).unwrap();
    let rho = PhasePoint::new(vec![0.1, 0.0], vec![0.0, 0.5]).unwrap();
    let r = integrate_until_escape(&v, &rho, FlowOptions::new(1e-8), 200.0, 1.0);
    assert!(matches!(r, Err(Error::TrappedTrajectory(_))));
}

#[test]
fn action_examples() {
    let v = bump2();
    let rho = PhasePoint::new(vec![-3.0, 0.2], vec![1.0, 0.0]).unwrap();
    let a0 = action_integral(&v, &rho, 0.0, 1e-10).unwrap();
    assert_eq!(a0.centered, -rho.x_dot_xi());
    for t in [1.0, 4.0, 7.5] {
        let free = action_integral(&BumpPotential::zero(2), &rho, t, 1e-10).unwrap();
        assert!((free.centered + rho.x_dot_xi()).abs() < 1e-12);
        assert!((free.packet + t / 2.0).abs() < 1e-12);
    }
    let a = action_integral(&v, &rho, 7.0, 1e-10).unwrap();
    let b = action_integral(&v, &rho, 8.0, 1e-10).unwrap();
    assert!((a.centered - b.centered).abs() < 1e-9);
    assert!(a.mismatch() < 1e-9);
}

#[test]
fn escape_time_examples() {
    let v = bump2();
    let e = escape_times(&v, &[-3.0, 0.0], &[1.0, 0.0], 1e-10).unwrap();
    assert!(e.t_plus >= 4.0 + 1.0);
    let p = flow(&v, &e.minus, e.t_plus, 1e-10).unwrap();
    assert!(p.distance(&e.plus) < 1e-9);
    assert!(e.plus.x_dot_xi() > 0.0);
    assert!(e.plus.x[0].hypot(e.plus.x[1]) > v.support_radius());

    let free = escape_times(&BumpPotential::zero(2), &[0.5, 0.1], &[0.0, 1.0], 1e-10).unwrap();
    assert_eq!(free.t_plus, 0.0);
    let coords = sphere_coords(&free.plus.x, &free.plus.xi).unwrap();
    assert_eq!(coords.omega, vec![0.0, 1.0]);
}

#[test]
fn sphere_coordinates() {
    let k = sphere_coords(&[-3.0, 0.3], &[1.0, 0.0]).unwrap();
    assert_eq!((k.omega, k.eta), (vec![1.0, 0.0], vec![0.0, 0.3]));
    let k = sphere_coords(&[1.2, 1.6], &[0.6, 0.8]).unwrap();
    assert!(k.eta.iter().all(|e| e.abs() < 1e-15));
    let mut rng = StdRng::seed_from_u64(3);
    let base = sphere_coords(&[0.4, -0.7], &[0.8, -0.6]).unwrap();
    for _ in 0..20 {
        let t: f64 = rng.gen_range(-10.0..10.0);
        let k = sphere_coords(&[0.4 + 0.8 * t, -0.7 - 0.6 * t], &[0.8, -0.6]).unwrap();
        for a in 0..2 {
            assert!((k.eta[a] - base.eta[a]).abs() < 1e-13);
        }
    }
    assert!(matches!(sphere_coords(&[0.0, 0.0], &[2.0, 0.0]), Err(Error::OffShell(_))));
}
