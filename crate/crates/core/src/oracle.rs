//! Grid solution of `ih∂ₜu = (−h²Δ/2 + V)u` on a periodic box, used as an
//! independent check of the semiclassical constructions.
//!
//! Nodes are `x_k = −L + k·2L/n`; in two dimensions the first coordinate runs
//! fastest (`index = k₀ + n·k₁`).

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::dynamics::{escape_trajectory_with_margin, FlowOptions};
use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::packet::{transport_along, PropagateOptions, WavePacket};
use crate::potential::Potential;

/// Mass fraction allowed in the boundary ring before a run is rejected.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-8;

/// Nodes closer than `L/16` to the box edge form the boundary ring.
const RING_FRACTION: f64 = 1.0 / 16.0;

const SNAPSHOT_MAGIC: &[u8; 4] = b"GSWF";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if n < 256 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("points per axis must be a power of two >= 256, got {n}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidArgument(format!("box half-width must be positive, got {half_width}")));
        }
        Ok(Self { dim, n, half_width })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.dx()
    }

    /// Node index nearest to `x` along one axis.
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x + self.half_width) / self.dx()).round();
        (k.max(0.0) as usize).min(self.n - 1)
    }

    pub fn axes(&self, index: usize) -> [usize; 2] {
        [index % self.n, index / self.n]
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let ax = self.axes(index);
        (0..self.dim).map(|a| self.coord(ax[a])).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Angular wave numbers of the discrete transform in FFT order.
    pub fn wave_numbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let scale = PI / self.half_width;
        (0..n).map(|j| if j < n / 2 { j } else { j - n } as f64 * scale).collect()
    }

    fn in_ring(&self, index: usize) -> bool {
        let ring = (self.n as f64 * RING_FRACTION / 2.0).ceil() as usize;
        let ax = self.axes(index);
        (0..self.dim).any(|a| ax[a] < ring || ax[a] >= self.n - ring)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridWavefunction {
    pub grid: GridSpec,
    pub h: f64,
    pub values: Vec<C64>,
}

impl GridWavefunction {
    pub fn new(grid: GridSpec, h: f64, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
        }
        Ok(Self { grid, h, values })
    }

    pub fn from_fn<F>(grid: GridSpec, h: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        let values = (0..grid.len()).into_par_iter().map(|i| f(&grid.point(i))).collect();
        Self::new(grid, h, values)
    }

    pub fn from_packet(grid: GridSpec, packet: &WavePacket) -> Result<Self> {
        if packet.dim() != grid.dim {
            return Err(Error::DimensionMismatch { expected: grid.dim, got: packet.dim() });
        }
        Self::from_fn(grid, packet.h, |x| packet.eval(x))
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<C64>() * self.grid.cell_volume()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn relative_error(&self, reference: &Self) -> f64 {
        self.distance(reference) / reference.norm()
    }

    /// Fraction of the mass sitting in the boundary ring.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let ring: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.in_ring(*i))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        ring / total
    }

    fn check_boundary(&self) -> Result<()> {
        let f = self.boundary_mass_fraction();
        if f > BOUNDARY_MASS_LIMIT {
            Err(Error::BoxTooSmall(f))
        } else {
            Ok(())
        }
    }
}

/// Forward/inverse transforms over all axes of a grid. The inverse is
/// normalized so that a round trip is the identity.
struct Spectral {
    grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self { grid, fwd: planner.plan_fft_forward(grid.n), inv: planner.plan_fft_inverse(grid.n) }
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        plan.process(data);
        if self.grid.dim == 2 {
            transpose(data, self.grid.n);
            plan.process(data);
            transpose(data, self.grid.n);
        }
    }

    fn forward(&self, data: &mut [C64]) {
        self.transform(data, &self.fwd);
    }

    fn inverse(&self, data: &mut [C64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    /// `|k|²` at every spectral node.
    fn k_squared(&self) -> Vec<f64> {
        let k = self.grid.wave_numbers();
        let n = self.grid.n;
        (0..self.grid.len())
            .map(|i| match self.grid.dim {
                1 => k[i] * k[i],
                _ => k[i % n].powi(2) + k[i / n].powi(2),
            })
            .collect()
    }
}

fn transpose(data: &mut [C64], n: usize) {
    for r in 0..n {
        for c in r + 1..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

fn potential_on_grid(grid: &GridSpec, v: &dyn Potential) -> Result<Vec<f64>> {
    if v.dim() != grid.dim {
        return Err(Error::DimensionMismatch { expected: grid.dim, got: v.dim() });
    }
    Ok((0..grid.len()).map(|i| v.value(&grid.point(i))).collect())
}

/// Strang split-step propagation over time `t` with at most `dt` per step;
/// `observe(step, time, u)` sees the initial state and every step.
pub fn solve_observed<F>(u0: &GridWavefunction, v: &dyn Potential, t: f64, dt: f64, mut observe: F) -> Result<GridWavefunction>
where
    F: FnMut(usize, f64, &GridWavefunction),
{
    if !(dt > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("need dt > 0 and finite T, got dt = {dt}, T = {t}")));
    }
    let steps = (t.abs() / dt).ceil() as usize;
    solve_steps(u0, v, t, steps, &mut observe)
}

pub fn solve(u0: &GridWavefunction, v: &dyn Potential, t: f64, dt: f64) -> Result<GridWavefunction> {
    solve_observed(u0, v, t, dt, |_, _, _| {})
}

fn solve_steps<F>(u0: &GridWavefunction, v: &dyn Potential, t: f64, steps: usize, observe: &mut F) -> Result<GridWavefunction>
where
    F: FnMut(usize, f64, &GridWavefunction),
{
    let grid = u0.grid;
    let h = u0.h;
    let mut u = u0.clone();
    observe(0, 0.0, &u);
    if steps == 0 {
        u.check_boundary()?;
        return Ok(u);
    }
    let tau = t / steps as f64;
    let spectral = Spectral::new(grid);
    let half: Vec<C64> = potential_on_grid(&grid, v)?
        .iter()
        .map(|&p| C64::from_polar(1.0, -0.5 * tau * p / h))
        .collect();
    let kinetic: Vec<C64> = spectral.k_squared().iter().map(|&k2| C64::from_polar(1.0, -0.5 * h * tau * k2)).collect();
    let audit_every = 16;
    for step in 1..=steps {
        u.values.iter_mut().zip(&half).for_each(|(a, b)| *a *= b);
        spectral.forward(&mut u.values);
        u.values.iter_mut().zip(&kinetic).for_each(|(a, b)| *a *= b);
        spectral.inverse(&mut u.values);
        u.values.iter_mut().zip(&half).for_each(|(a, b)| *a *= b);
        if step % audit_every == 0 || step == steps {
            u.check_boundary()?;
        }
        observe(step, step as f64 * tau, &u);
    }
    Ok(u)
}

/// `⟨u, P_h u⟩` with the kinetic part evaluated spectrally.
pub fn energy(u: &GridWavefunction, v: &dyn Potential) -> Result<f64> {
    let spectral = Spectral::new(u.grid);
    let mut hat = u.values.clone();
    spectral.forward(&mut hat);
    let k2 = spectral.k_squared();
    let half_h2 = 0.5 * u.h * u.h;
    hat.iter_mut().zip(&k2).for_each(|(a, k)| *a *= half_h2 * k);
    spectral.inverse(&mut hat);
    let pot = potential_on_grid(&u.grid, v)?;
    let e: C64 = u
        .values
        .iter()
        .zip(&hat)
        .zip(&pot)
        .map(|((a, t), p)| a.conj() * (t + a * p))
        .sum();
    Ok(e.re * u.grid.cell_volume())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketMoments {
    pub center: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Centered second position moments of `|u|²/‖u‖²`.
    pub cov: RMatrix,
}

/// Number of connected regions where `|u|²` exceeds a tenth of its maximum
/// (periodic neighbours).
pub fn count_peaks(u: &GridWavefunction) -> usize {
    let grid = u.grid;
    let dens: Vec<f64> = u.values.iter().map(|v| v.norm_sqr()).collect();
    let max = dens.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    let above: Vec<bool> = dens.iter().map(|&p| p > 0.1 * max).collect();
    let mut seen = vec![false; above.len()];
    let n = grid.n;
    let mut regions = 0;
    let mut stack = Vec::new();
    for start in 0..above.len() {
        if !above[start] || seen[start] {
            continue;
        }
        regions += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let [a, b] = grid.axes(i);
            let mut nbrs = vec![b * n + (a + 1) % n, b * n + (a + n - 1) % n];
            if grid.dim == 2 {
                nbrs.push(((b + 1) % n) * n + a);
                nbrs.push(((b + n - 1) % n) * n + a);
            }
            for j in nbrs {
                if above[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    regions
}

pub fn extract_packet_params(u: &GridWavefunction) -> Result<PacketMoments> {
    let peaks = count_peaks(u);
    if peaks > 1 {
        return Err(Error::Multimodal(peaks));
    }
    let grid = u.grid;
    let d = grid.dim;
    let total: f64 = u.values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::InvalidArgument("wavefunction vanishes".into()));
    }
    let mut center = vec![0.0; d];
    for (i, v) in u.values.iter().enumerate() {
        let x = grid.point(i);
        let p = v.norm_sqr() / total;
        for a in 0..d {
            center[a] += p * x[a];
        }
    }
    let mut cov = RMatrix::zeros(d, d);
    for (i, v) in u.values.iter().enumerate() {
        let x = grid.point(i);
        let p = v.norm_sqr() / total;
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += p * (x[a] - center[a]) * (x[b] - center[b]);
            }
        }
    }
    let spectral = Spectral::new(grid);
    let mut hat = u.values.clone();
    spectral.forward(&mut hat);
    let k = grid.wave_numbers();
    let total_hat: f64 = hat.iter().map(|v| v.norm_sqr()).sum();
    let mut momentum = vec![0.0; d];
    for (i, v) in hat.iter().enumerate() {
        let ax = grid.axes(i);
        let p = v.norm_sqr() / total_hat;
        for a in 0..d {
            momentum[a] += p * u.h * k[ax[a]];
        }
    }
    Ok(PacketMoments { center, momentum, cov })
}

/// Writes `u` at time `t`: magic, version, dim, n (u32), L, h, t (f64), then
/// interleaved real/imaginary parts, all little endian.
pub fn write_snapshot<W: Write>(mut w: W, u: &GridWavefunction, t: f64) -> std::io::Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    for x in [SNAPSHOT_VERSION, u.grid.dim as u32, u.grid.n as u32] {
        w.write_all(&x.to_le_bytes())?;
    }
    for x in [u.grid.half_width, u.h, t] {
        w.write_all(&x.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(16 * u.values.len());
    for v in &u.values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(GridWavefunction, f64)> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("snapshot: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::InvalidArgument("snapshot: bad magic".into()));
    }
    let mut u32s = [0u32; 3];
    for x in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(io)?;
        *x = u32::from_le_bytes(b);
    }
    if u32s[0] != SNAPSHOT_VERSION {
        return Err(Error::InvalidArgument(format!("snapshot: unsupported version {}", u32s[0])));
    }
    let mut f64s = [0f64; 3];
    for x in &mut f64s {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(io)?;
        *x = f64::from_le_bytes(b);
    }
    let grid = GridSpec::new(u32s[1] as usize, u32s[2] as usize, f64s[0])?;
    let mut raw = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut raw).map_err(io)?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    Ok((GridWavefunction::new(grid, f64s[1], values)?, f64s[2]))
}

/// Parameters of the generalized-eigenfunction assembly.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenfunctionSpec {
    /// Box of the interacting solve.
    pub grid: GridSpec,
    /// Half-width of the cube `[−W, W]^d` where the field and residual are kept.
    pub window: f64,
    /// Largest time-quadrature step.
    pub dt: f64,
    /// Length of the incoming free piece.
    pub t_back: f64,
    /// Length of the outgoing free piece.
    pub t_forward: f64,
    /// Length of the smooth switch-off at the far end of each free piece.
    pub taper: f64,
    /// Clearance of the incoming and outgoing lines from the potential.
    pub margin: f64,
    /// Extra points (snapped to solver nodes) where the field is recorded.
    pub probes: Vec<Vec<f64>>,
    pub tol: f64,
}

impl EigenfunctionSpec {
    /// Defaults for a packet at scale `h` on `grid`.
    pub fn new(grid: GridSpec, h: f64) -> Self {
        Self {
            grid,
            window: 6.0,
            dt: h / 10.0,
            t_back: 120.0,
            t_forward: 120.0,
            taper: 60.0,
            margin: 3.0,
            probes: Vec::new(),
            tol: 1e-10,
        }
    }
}

/// Values of a field on the nodes of a sub-cube of a solver grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowField {
    pub dim: usize,
    /// First node coordinate along every axis.
    pub start: f64,
    pub dx: f64,
    /// Nodes per axis.
    pub m: usize,
    pub values: Vec<C64>,
}

impl WindowField {
    pub fn point(&self, index: usize) -> Vec<f64> {
        let ax = [index % self.m, index / self.m];
        (0..self.dim).map(|a| self.start + ax[a] as f64 * self.dx).collect()
    }

    /// Discrete `L²` norm of `(P_h − E)f` over the nodes at least four steps
    /// from the edge, with an eighth-order Laplacian.
    pub fn residual_norm(&self, v: &dyn Potential, h: f64, energy: f64) -> f64 {
        const C: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
        let m = self.m;
        let stride = [1, m];
        let idx2 = |i: usize| [i % m, i / m];
        let inv_dx2 = 1.0 / (self.dx * self.dx);
        let mut sum = 0.0;
        for i in 0..self.values.len() {
            let ax = idx2(i);
            if (0..self.dim).any(|a| ax[a] < 4 || ax[a] + 4 >= m) {
                continue;
            }
            let mut lap = C64::new(0.0, 0.0);
            for s in stride.iter().take(self.dim) {
                lap += self.values[i] * C[0];
                for (o, c) in C.iter().enumerate().skip(1) {
                    lap += (self.values[i + o * s] + self.values[i - o * s]) * *c;
                }
            }
            let r = -0.5 * h * h * lap * inv_dx2 + (v.value(&self.point(i)) - energy) * self.values[i];
            sum += r.norm_sqr();
        }
        (sum * self.dx.powi(self.dim as i32)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedEigenfunction {
    pub field: WindowField,
    /// `‖(P_h − 1/2)E‖` over the window interior.
    pub residual: f64,
    /// `residual / (h‖u⁻‖)`.
    pub scaled_residual: f64,
    /// Field at the snapped probe points, with the points used.
    pub probes: Vec<(Vec<f64>, C64)>,
    pub u_minus: WavePacket,
    pub u_plus: WavePacket,
    pub t_plus: f64,
    /// `‖U(t₊)u⁻ − ũ⁺‖ / ‖u⁻‖` on the solver grid.
    pub propagation_error: f64,
}

/// Smooth switch from 0 (`s ≤ 0`) to 1 (`s ≥ 1`).
fn smooth_step(s: f64) -> f64 {
    let f = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
    let a = f(s);
    let b = f(1.0 - s);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Composite Simpson weights on `[0, len]` with an even number of steps of
/// size at most `dt`.
fn simpson(len: f64, dt: f64) -> Vec<(f64, f64)> {
    if len <= 0.0 {
        return Vec::new();
    }
    let mut steps = (len / dt).ceil() as usize;
    steps += steps % 2;
    let tau = len / steps as f64;
    (0..=steps)
        .map(|k| {
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (k as f64 * tau, w * tau / 3.0)
        })
        .collect()
}

/// Numerical assembly of
/// `E = ∫_{−T_b}^0 U₀(t)u⁻ e^{it/2h} + ∫_0^{t₊} U(t)u⁻ e^{it/2h} + e^{it₊/2h}∫_0^{T_f} U₀(t)ũ⁺ e^{it/2h}`
/// where `u⁻` is `packet` moved back until its line clears the potential and
/// `ũ⁺` its leading-order image after the interaction. The free integrals
/// are switched off smoothly over `taper` at their far ends.
pub fn assemble_generalized_eigenfunction(
    packet: &WavePacket,
    v: &dyn Potential,
    spec: &EigenfunctionSpec,
) -> Result<GeneralizedEigenfunction> {
    let d = packet.dim();
    let grid = spec.grid;
    if grid.dim != d || v.dim() != d {
        return Err(Error::DimensionMismatch { expected: grid.dim, got: d });
    }
    if !(spec.window > 0.0 && spec.window < grid.half_width) {
        return Err(Error::InvalidArgument("window must lie inside the solver box".into()));
    }
    if !(spec.taper > 0.0 && spec.taper <= spec.t_back && spec.taper <= spec.t_forward && spec.dt > 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and 0 < taper <= t_back, t_forward".into()));
    }
    let h = packet.h;
    let t_minus = v.backward_clear_time(&packet.center, &packet.momentum, spec.margin);
    let u_minus = packet.free_evolve(-t_minus)?;
    let traj = escape_trajectory_with_margin(v, &packet.center, &packet.momentum, FlowOptions::new(spec.tol), spec.margin)?;
    let u_plus = transport_along(&u_minus, &traj, v, PropagateOptions::new(spec.tol))?;
    let t_plus = traj.end().t;

    // Observation nodes: the window cube, then the probes.
    let k_lo = grid.nearest(-spec.window);
    let k_hi = grid.nearest(spec.window);
    let m = k_hi - k_lo + 1;
    let n = grid.n;
    let mut nodes: Vec<usize> = match d {
        1 => (k_lo..=k_hi).collect(),
        _ => (0..m * m).map(|i| (k_lo + i % m) + n * (k_lo + i / m)).collect(),
    };
    let probe_nodes: Vec<usize> = spec
        .probes
        .iter()
        .map(|p| match d {
            1 => grid.nearest(p[0]),
            _ => grid.nearest(p[0]) + n * grid.nearest(p[1]),
        })
        .collect();
    nodes.extend_from_slice(&probe_nodes);
    let points: Vec<Vec<f64>> = nodes.iter().map(|&i| grid.point(i)).collect();

    let phase = |t: f64| C64::from_polar(1.0, t / (2.0 * h));
    let mut acc = vec![C64::new(0.0, 0.0); nodes.len()];

    // Free pieces.
    let mut weighted: Vec<(C64, WavePacket)> = Vec::new();
    for (s, w) in simpson(spec.t_back, spec.dt) {
        let t = -s;
        let ramp = smooth_step((spec.t_back - s) / spec.taper);
        if ramp > 0.0 {
            weighted.push((w * ramp * phase(t), u_minus.free_evolve(t)?));
        }
    }
    for (t, w) in simpson(spec.t_forward, spec.dt) {
        let ramp = smooth_step((spec.t_forward - t) / spec.taper);
        if ramp > 0.0 {
            weighted.push((w * ramp * phase(t_plus + t), u_plus.free_evolve(t)?));
        }
    }
    let free: Vec<C64> = points
        .par_iter()
        .map(|x| weighted.iter().map(|(w, p)| w * p.eval(x)).sum())
        .collect();
    acc.iter_mut().zip(&free).for_each(|(a, f)| *a += f);

    // Interacting piece, Simpson over the solver steps.
    let start = GridWavefunction::from_packet(grid, &u_minus)?;
    let mut steps = (t_plus / spec.dt).ceil() as usize;
    steps += steps % 2;
    let mut evolved = start.clone();
    if steps > 0 {
        let tau = t_plus / steps as f64;
        evolved = solve_steps(&start, v, t_plus, steps, &mut |k, t, u: &GridWavefunction| {
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            } * tau
                / 3.0;
            let c = w * phase(t);
            for (a, &i) in acc.iter_mut().zip(&nodes) {
                *a += c * u.values[i];
            }
        })?;
    }
    let predicted = GridWavefunction::from_packet(grid, &u_plus)?;
    let propagation_error = evolved.distance(&predicted) / start.norm();

    let split = acc.len() - probe_nodes.len();
    let field = WindowField { dim: d, start: grid.coord(k_lo), dx: grid.dx(), m, values: acc[..split].to_vec() };
    let residual = field.residual_norm(v, h, 0.5);
    let probes = probe_nodes.iter().zip(&acc[split..]).map(|(&i, &e)| (grid.point(i), e)).collect();
    Ok(GeneralizedEigenfunction {
        scaled_residual: residual / (h * u_minus.norm()?),
        field,
        residual,
        probes,
        u_minus,
        u_plus,
        t_plus,
        propagation_error,
    })
}
