//! Hamiltonian flow of `p(x, ξ) = |ξ|²/2 + V(x)`, its linearization, the
//! action integrals and the classical scattering map.

use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::ode::{Control, Dopri5};
use crate::potential::Potential;

/// Largest step of the joint integrator. It is a fixed number (not tied to
/// the support radius) so that the step sequence only depends on the
/// potential along the trajectory.
pub const MAX_STEP: f64 = 0.5;

/// Distance kept between the outgoing ray and the support when deciding that
/// a trajectory has escaped.
pub const ESCAPE_MARGIN: f64 = 1.0;

/// Default trapping guard factor: `T_max = 10³ (T₀ + 1)`.
pub const TRAP_FACTOR: f64 = 1e3;

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: xi.len() });
        }
        if x.iter().chain(&xi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("phase point has non-finite entries".into()));
        }
        Ok(Self { x, xi })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn energy(&self, v: &dyn Potential) -> f64 {
        0.5 * dot(&self.xi, &self.xi) + v.value(&self.x)
    }

    /// `x·ξ`.
    pub fn x_dot_xi(&self) -> f64 {
        dot(&self.x, &self.xi)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.xi.iter().zip(&other.xi))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobian of the flow, `(δx_t, δξ_t) = M (δx₀, δξ₀)` with
/// `M = [[Dxx, Dxξ], [Dξx, Dξξ]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalFrame {
    pub dxx: RMatrix,
    pub dxxi: RMatrix,
    pub dxix: RMatrix,
    pub dxixi: RMatrix,
}

impl VariationalFrame {
    pub fn identity(d: usize) -> Self {
        Self {
            dxx: RMatrix::identity(d, d),
            dxxi: RMatrix::zeros(d, d),
            dxix: RMatrix::zeros(d, d),
            dxixi: RMatrix::identity(d, d),
        }
    }

    /// Frame of the free flow over time `t`.
    pub fn free(d: usize, t: f64) -> Self {
        Self { dxxi: RMatrix::identity(d, d) * t, ..Self::identity(d) }
    }

    pub fn dim(&self) -> usize {
        self.dxx.nrows()
    }

    pub fn matrix(&self) -> RMatrix {
        let d = self.dim();
        let mut m = RMatrix::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.dxx);
        m.view_mut((0, d), (d, d)).copy_from(&self.dxxi);
        m.view_mut((d, 0), (d, d)).copy_from(&self.dxix);
        m.view_mut((d, d), (d, d)).copy_from(&self.dxixi);
        m
    }

    pub fn from_matrix(m: &RMatrix) -> Self {
        let d = m.nrows() / 2;
        Self {
            dxx: m.view((0, 0), (d, d)).into_owned(),
            dxxi: m.view((0, d), (d, d)).into_owned(),
            dxix: m.view((d, 0), (d, d)).into_owned(),
            dxixi: m.view((d, d), (d, d)).into_owned(),
        }
    }

    /// `self ∘ earlier`: the frame over the concatenated time interval.
    pub fn compose(&self, earlier: &Self) -> Self {
        Self::from_matrix(&(self.matrix() * earlier.matrix()))
    }

    /// `‖MᵀJM − J‖_∞` (max entry).
    pub fn symplectic_defect(&self) -> f64 {
        let d = self.dim();
        let mut j = RMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            j[(i, d + i)] = 1.0;
            j[(d + i, i)] = -1.0;
        }
        let m = self.matrix();
        (m.transpose() * &j * &m - j).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub tol: f64,
    pub max_step: f64,
}

impl FlowOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_step: MAX_STEP }
    }
}

/// State of the joint integration at one accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub point: PhasePoint,
    pub frame: VariationalFrame,
    /// `∫₀ᵗ (|ξ|²/2 − V(x)) ds`.
    pub lagrangian: f64,
    /// `∫₀ᵗ x·∇V(x) ds`.
    pub virial: f64,
}

/// Accepted steps of a joint flow/frame/action integration.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn start(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn end(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

struct Layout {
    d: usize,
}

impl Layout {
    fn len(&self) -> usize {
        2 * self.d + 4 * self.d * self.d + 2
    }

    fn pack(&self, s: &TrajectorySample) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len());
        y.extend_from_slice(&s.point.x);
        y.extend_from_slice(&s.point.xi);
        y.extend(s.frame.matrix().iter());
        y.push(s.lagrangian);
        y.push(s.virial);
        y
    }

    fn unpack(&self, t: f64, y: &[f64]) -> TrajectorySample {
        let d = self.d;
        let n = 2 * d;
        let m = RMatrix::from_column_slice(n, n, &y[n..n + n * n]);
        TrajectorySample {
            t,
            point: PhasePoint { x: y[..d].to_vec(), xi: y[d..n].to_vec() },
            frame: VariationalFrame::from_matrix(&m),
            lagrangian: y[n + n * n],
            virial: y[n + n * n + 1],
        }
    }
}

fn rhs(v: &dyn Potential, d: usize, y: &[f64], dy: &mut [f64]) {
    let n = 2 * d;
    let x = &y[..d];
    let xi = &y[d..n];
    let grad = v.gradient(x);
    let hess = v.hessian(x);
    dy[..d].copy_from_slice(xi);
    for i in 0..d {
        dy[d + i] = -grad[i];
    }
    // Ṁ = [[0, I], [−∇²V, 0]] M, column-major storage.
    let m = &y[n..n + n * n];
    let dm = &mut dy[n..n + n * n];
    for col in 0..n {
        let c = &m[col * n..col * n + n];
        for i in 0..d {
            dm[col * n + i] = c[d + i];
            let mut acc = 0.0;
            for k in 0..d {
                acc -= hess[(i, k)] * c[k];
            }
            dm[col * n + d + i] = acc;
        }
    }
    dy[n + n * n] = 0.5 * dot(xi, xi) - v.value(x);
    dy[n + n * n + 1] = dot(x, &grad);
}

/// Integrates flow, frame and action integrals from `rho0` over `[0, t]`,
/// recording every accepted step. `stop` may end the integration early.
pub fn integrate_trajectory<S>(
    v: &dyn Potential,
    rho0: &PhasePoint,
    t: f64,
    opts: FlowOptions,
    mut stop: S,
) -> Result<Trajectory>
where
    S: FnMut(&TrajectorySample) -> bool,
{
    let d = rho0.dim();
    if d != v.dim() {
        return Err(Error::DimensionMismatch { expected: v.dim(), got: d });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let layout = Layout { d };
    let start = TrajectorySample {
        t: 0.0,
        point: rho0.clone(),
        frame: VariationalFrame::identity(d),
        lagrangian: 0.0,
        virial: 0.0,
    };
    let y0 = layout.pack(&start);
    let ode = Dopri5::new(opts.tol).with_max_step(opts.max_step);
    let mut samples = Vec::new();
    ode.integrate(
        |_, y, dy| rhs(v, d, y, dy),
        0.0,
        &y0,
        t,
        |tt, y| {
            let s = layout.unpack(tt, y);
            let halt = stop(&s);
            samples.push(s);
            if halt {
                Control::Stop
            } else {
                Control::Continue
            }
        },
    )?;
    Ok(Trajectory { samples })
}

fn integrate_to(v: &dyn Potential, rho0: &PhasePoint, t: f64, tol: f64) -> Result<TrajectorySample> {
    let traj = integrate_trajectory(v, rho0, t, FlowOptions::new(tol), |_| false)?;
    Ok(traj.end().clone())
}

/// `Φ^t(ρ₀)`.
pub fn flow(v: &dyn Potential, rho0: &PhasePoint, t: f64, tol: f64) -> Result<PhasePoint> {
    Ok(integrate_to(v, rho0, t, tol)?.point)
}

/// Jacobian of `Φ^t` at `ρ₀`.
pub fn variational_frame(v: &dyn Potential, rho0: &PhasePoint, t: f64, tol: f64) -> Result<VariationalFrame> {
    Ok(integrate_to(v, rho0, t, tol)?.frame)
}

/// Action integrals along `Φ^s(ρ₋)`, `s ∈ [0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    /// `∫₀ᵗ(|ξ|²/2 − V) − (x_t·ξ_t + x₋·ξ₋)/2`.
    pub centered: f64,
    /// Phase carried by a packet `e^{ix·ξ/h}` transported along the
    /// trajectory: `∫₀ᵗ(|ξ|²/2 − V) − (x_t·ξ_t − x₋·ξ₋)`.
    pub packet: f64,
    /// The same phase through `∫₀ᵗ x·∇V − t·p(ρ₋)`.
    pub packet_virial: f64,
    pub lagrangian: f64,
    pub virial: f64,
    pub end: PhasePoint,
}

impl Action {
    fn from_samples(start: &TrajectorySample, end: &TrajectorySample, energy: f64) -> Self {
        let t = end.t - start.t;
        let lagrangian = end.lagrangian - start.lagrangian;
        let virial = end.virial - start.virial;
        let xs0 = start.point.x_dot_xi();
        let xs1 = end.point.x_dot_xi();
        Self {
            centered: lagrangian - 0.5 * (xs1 + xs0),
            packet: lagrangian - (xs1 - xs0),
            packet_virial: virial - t * energy,
            lagrangian,
            virial,
            end: end.point.clone(),
        }
    }

    pub fn mismatch(&self) -> f64 {
        (self.packet - self.packet_virial).abs()
    }
}

/// Tolerance used to compare the two routes to the packet phase.
pub fn action_tolerance(tol: f64, t: f64) -> f64 {
    10.0 * tol * (1.0 + t.abs())
}

pub fn action_integral(v: &dyn Potential, rho_minus: &PhasePoint, t: f64, tol: f64) -> Result<Action> {
    let traj = integrate_trajectory(v, rho_minus, t, FlowOptions::new(tol), |_| false)?;
    let action = Action::from_samples(traj.start(), traj.end(), rho_minus.energy(v));
    check_action(&action, tol, t)?;
    Ok(action)
}

pub(crate) fn check_action(action: &Action, tol: f64, t: f64) -> Result<()> {
    let scale = 1.0 + action.lagrangian.abs().max(action.virial.abs());
    if action.mismatch() > action_tolerance(tol, t) * scale {
        return Err(Error::ActionMismatch(action.mismatch()));
    }
    Ok(())
}

impl Trajectory {
    /// Action integrals between the first and the last sample.
    pub fn action(&self, energy: f64) -> Action {
        Action::from_samples(self.start(), self.end(), energy)
    }
}

fn check_unit(omega: &[f64]) -> Result<()> {
    let n = norm(omega);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit(n));
    }
    Ok(())
}

/// `ρ_{ω,η} = (−(T₀+1)ω + η, ω)`.
pub fn incoming_point(omega: &[f64], eta: &[f64], t0: f64) -> Result<PhasePoint> {
    if omega.len() != eta.len() {
        return Err(Error::DimensionMismatch { expected: omega.len(), got: eta.len() });
    }
    check_unit(omega)?;
    let ortho = dot(omega, eta).abs();
    if ortho > 1e-10 {
        return Err(Error::NotOrthogonal(ortho));
    }
    let x = omega.iter().zip(eta).map(|(w, e)| -(t0 + 1.0) * w + e).collect();
    PhasePoint::new(x, omega.to_vec())
}

/// `(ω, η)` coordinates of the line through `x` with direction `ω`.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereCotangent {
    pub omega: Vec<f64>,
    pub eta: Vec<f64>,
}

/// `(ω, η) = (ξ, x − (x·ξ)ξ)` for unit `ξ`.
pub fn sphere_coords(x: &[f64], xi: &[f64]) -> Result<SphereCotangent> {
    let n = norm(xi);
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::OffShell(n));
    }
    let s = dot(x, xi);
    Ok(SphereCotangent { omega: xi.to_vec(), eta: x.iter().zip(xi).map(|(a, b)| a - s * b).collect() })
}

/// Image of `(ω, η)` under the scattering map with the time delay `t'`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringImage {
    pub omega: Vec<f64>,
    pub eta: Vec<f64>,
    pub time_delay: f64,
}

fn escape_guard(v: &dyn Potential) -> f64 {
    TRAP_FACTOR * (v.support_radius() + 1.0)
}

/// Integrates from `rho` until the forward ray is clear of the support,
/// failing once `t_max` is exceeded.
pub fn integrate_until_escape(
    v: &dyn Potential,
    rho: &PhasePoint,
    opts: FlowOptions,
    t_max: f64,
    margin: f64,
) -> Result<Trajectory> {
    let traj = integrate_trajectory(v, rho, t_max, opts, |s| v.ray_clear(&s.point.x, &s.point.xi, margin))?;
    let end = traj.end();
    if !v.ray_clear(&end.point.x, &end.point.xi, margin) {
        return Err(Error::TrappedTrajectory(end.t));
    }
    Ok(traj)
}

pub fn scattering_map(v: &dyn Potential, omega: &[f64], eta: &[f64], tol: f64) -> Result<ScatteringImage> {
    let t0 = v.support_radius();
    let rho = incoming_point(omega, eta, t0)?;
    let traj = integrate_until_escape(v, &rho, FlowOptions::new(tol), escape_guard(v), ESCAPE_MARGIN)?;
    let end = traj.end();
    let speed = norm(&end.point.xi);
    let omega_out: Vec<f64> = end.point.xi.iter().map(|c| c / speed).collect();
    let coords = sphere_coords(&end.point.x, &omega_out)?;
    let time = -(t0 + 1.0) + end.t;
    let time_delay = time - dot(&end.point.x, &omega_out);
    Ok(ScatteringImage { omega: coords.omega, eta: coords.eta, time_delay })
}

/// Times bracketing the interaction of the line through `(x₀, ξ₀)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeTimes {
    /// Backward free time: the line `x₀ − sξ₀` stays clear of the support
    /// (with margin) for `s ≥ t_minus`.
    pub t_minus: f64,
    /// Forward interacting time from `(x₋, ξ₀)`, after which the forward ray
    /// is clear of the support (with margin).
    pub t_plus: f64,
    pub minus: PhasePoint,
    pub plus: PhasePoint,
}

pub fn escape_times(v: &dyn Potential, x0: &[f64], xi0: &[f64], tol: f64) -> Result<EscapeTimes> {
    let traj = escape_trajectory(v, x0, xi0, FlowOptions::new(tol))?;
    let t_minus = v.backward_clear_time(x0, xi0, ESCAPE_MARGIN);
    Ok(EscapeTimes {
        t_minus,
        t_plus: traj.end().t,
        minus: traj.start().point.clone(),
        plus: traj.end().point.clone(),
    })
}

/// Trajectory from `x₋ = x₀ − t₋ξ₀` until escape.
pub fn escape_trajectory(v: &dyn Potential, x0: &[f64], xi0: &[f64], opts: FlowOptions) -> Result<Trajectory> {
    escape_trajectory_with_margin(v, x0, xi0, opts, ESCAPE_MARGIN)
}

pub fn escape_trajectory_with_margin(
    v: &dyn Potential,
    x0: &[f64],
    xi0: &[f64],
    opts: FlowOptions,
    margin: f64,
) -> Result<Trajectory> {
    if x0.len() != xi0.len() {
        return Err(Error::DimensionMismatch { expected: x0.len(), got: xi0.len() });
    }
    let t_minus = v.backward_clear_time(x0, xi0, margin);
    let x_minus = x0.iter().zip(xi0).map(|(x, k)| x - t_minus * k).collect();
    let rho = PhasePoint::new(x_minus, xi0.to_vec())?;
    integrate_until_escape(v, &rho, opts, escape_guard(v), margin)
}
