//! Experiment configuration: embedded defaults, optional `GS_DEFAULTS`
//! overlay, the run file and command-line overrides, merged in that order.

use std::path::Path;

use gsmatrix::linalg::{CMatrix, ComplexSymMatrix};
use gsmatrix::oracle::GridSpec;
use gsmatrix::packet::WavePacket;
use gsmatrix::potential::{make_potential, BumpPotential};
use gsmatrix::sphere::SphereGaussianState;
use gsmatrix::MultiPoly;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::to_json_string;

pub const DEFAULTS: &str = include_str!("defaults.toml");
pub const DEFAULTS_ENV: &str = "GS_DEFAULTS";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot parse {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub bumps: Vec<BumpConfig>,
}

/// Coefficient of `y^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponent: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi0: Option<Vec<f64>>,
    /// Row-major real and imaginary parts of `Γ₀`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_re: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_im: Option<Vec<Vec<f64>>>,
    pub q0: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatmapConfig {
    pub rows: usize,
    pub omega_angle: f64,
    pub eta_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagateConfig {
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarfieldConfig {
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmatrixConfig {
    pub grid: usize,
    pub random_inputs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveConfig {
    pub samples: usize,
    pub truncation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump1d {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n: usize,
    pub half_width: f64,
    pub dt_over_h: f64,
    pub t: f64,
    pub center: f64,
    pub momentum: f64,
    pub gamma: f64,
    pub bumps: Vec<Bump1d>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenfunConfig {
    pub n: usize,
    pub half_width: f64,
    pub center: f64,
    pub window: f64,
    pub dt_over_h: f64,
    pub t_back: f64,
    pub t_forward: f64,
    pub taper: f64,
    pub margin: f64,
    pub probes: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub h: Vec<f64>,
    pub out: String,
    pub seed: u64,
    pub potential: PotentialConfig,
    pub state: StateConfig,
    pub integrator: IntegratorConfig,
    pub scatmap: ScatmapConfig,
    pub propagate: PropagateConfig,
    pub farfield: FarfieldConfig,
    pub smatrix: SmatrixConfig,
    pub resolve: ResolveConfig,
    pub oracle: OracleConfig,
    pub eigenfun: EigenfunConfig,
}

/// Values given on the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<String>,
    pub h: Vec<f64>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
}

fn parse(text: &str, origin: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError::Parse { origin: origin.into(), message: e.to_string() })
}

fn read(path: &Path) -> Result<toml::Table, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    parse(&text, &path.display().to_string())
}

/// Recursive overlay: tables merge key by key, everything else is replaced.
fn overlay(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => overlay(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Defaults, then `GS_DEFAULTS` if set, then `path`, then `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut table = parse(DEFAULTS, "built-in defaults")?;
        if let Some(alt) = std::env::var_os(DEFAULTS_ENV) {
            overlay(&mut table, read(Path::new(&alt))?);
        }
        if let Some(p) = path {
            overlay(&mut table, read(p)?);
        }
        let mut cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse { origin: "merged configuration".into(), message: e.to_string() })?;
        if let Some(out) = &overrides.out {
            cfg.out = out.clone();
        }
        if !overrides.h.is_empty() {
            cfg.h = overrides.h.clone();
        }
        if let Some(d) = overrides.dim {
            cfg.dim = d;
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        cfg.resolve_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills the dimension-dependent entries left open by the defaults.
    fn resolve_defaults(&mut self) {
        let d = self.dim;
        for b in &mut self.potential.bumps {
            b.center.get_or_insert_with(|| vec![0.0; d]);
        }
        let s = &mut self.state;
        s.x0.get_or_insert_with(|| {
            let mut x = vec![0.0; d];
            if d > 1 {
                x[1] = 0.3;
            }
            x
        });
        s.xi0.get_or_insert_with(|| {
            let mut e = vec![0.0; d];
            if d > 0 {
                e[0] = 1.0;
            }
            e
        });
        s.gamma_re.get_or_insert_with(|| (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect());
        s.gamma_im.get_or_insert_with(|| vec![vec![0.0; d]; d]);
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(1..=3).contains(&self.dim) {
            return bad(format!("dim must be 1, 2 or 3, got {}", self.dim));
        }
        if self.h.is_empty() {
            return bad("at least one h is required".into());
        }
        if let Some(h) = self.h.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
            return bad(format!("h must be positive and finite, got {h}"));
        }
        let mut numbers: Vec<(&str, f64)> = vec![
            ("integrator.tol", self.integrator.tol),
            ("scatmap.omega_angle", self.scatmap.omega_angle),
            ("scatmap.eta_max", self.scatmap.eta_max),
            ("propagate.t", self.propagate.t),
            ("resolve.truncation", self.resolve.truncation),
            ("oracle.half_width", self.oracle.half_width),
            ("oracle.dt_over_h", self.oracle.dt_over_h),
            ("oracle.t", self.oracle.t),
            ("oracle.center", self.oracle.center),
            ("oracle.momentum", self.oracle.momentum),
            ("oracle.gamma", self.oracle.gamma),
            ("eigenfun.half_width", self.eigenfun.half_width),
            ("eigenfun.center", self.eigenfun.center),
            ("eigenfun.window", self.eigenfun.window),
            ("eigenfun.dt_over_h", self.eigenfun.dt_over_h),
            ("eigenfun.t_back", self.eigenfun.t_back),
            ("eigenfun.t_forward", self.eigenfun.t_forward),
            ("eigenfun.taper", self.eigenfun.taper),
            ("eigenfun.margin", self.eigenfun.margin),
        ];
        for b in &self.potential.bumps {
            numbers.push(("potential.bumps.radius", b.radius));
            numbers.push(("potential.bumps.amplitude", b.amplitude));
            numbers.extend(b.center.iter().flatten().map(|&c| ("potential.bumps.center", c)));
        }
        for b in &self.oracle.bumps {
            numbers.extend([("oracle.bumps", b.center), ("oracle.bumps", b.radius), ("oracle.bumps", b.amplitude)]);
        }
        let s = &self.state;
        for (name, v) in [("state.x0", &s.x0), ("state.xi0", &s.xi0)] {
            numbers.extend(v.iter().flatten().map(|&c| (name, c)));
        }
        for (name, m) in [("state.gamma_re", &s.gamma_re), ("state.gamma_im", &s.gamma_im)] {
            numbers.extend(m.iter().flatten().flatten().map(|&c| (name, c)));
        }
        numbers.extend(s.q0.iter().flat_map(|t| [("state.q0", t.re), ("state.q0", t.im)]));
        numbers.extend(self.eigenfun.probes.iter().map(|&p| ("eigenfun.probes", p)));
        if let Some((name, v)) = numbers.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{name} must be finite, got {v}"));
        }
        if !(self.integrator.tol > 0.0) {
            return bad("integrator.tol must be positive".into());
        }
        if self.scatmap.rows == 0 || !(self.scatmap.eta_max > 0.0) {
            return bad("scatmap needs rows ≥ 1 and eta_max > 0".into());
        }
        if self.smatrix.grid == 0 || self.farfield.samples == 0 {
            return bad("smatrix.grid and farfield.samples must be positive".into());
        }
        if !(self.oracle.dt_over_h > 0.0 && self.eigenfun.dt_over_h > 0.0) {
            return bad("dt_over_h must be positive".into());
        }
        let d = self.dim;
        let lens = [
            s.x0.as_ref().map_or(d, Vec::len),
            s.xi0.as_ref().map_or(d, Vec::len),
            s.gamma_re.as_ref().map_or(d, Vec::len),
            s.gamma_im.as_ref().map_or(d, Vec::len),
        ];
        let rows_ok = [&s.gamma_re, &s.gamma_im].iter().all(|m| m.iter().flatten().all(|r| r.len() == d));
        let bumps_ok = self.potential.bumps.iter().all(|b| b.center.as_ref().is_none_or(|c| c.len() == d));
        let terms_ok = s.q0.iter().all(|t| t.exponent.len() == d);
        if lens.iter().any(|&l| l != d) || !rows_ok || !bumps_ok || !terms_ok {
            return bad(format!("state, potential and q0 entries must all have dimension {d}"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let text = to_json_string(self).expect("configuration serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn potential(&self) -> gsmatrix::Result<BumpPotential> {
        let spec: Vec<(Vec<f64>, f64, f64)> = self
            .potential
            .bumps
            .iter()
            .map(|b| (b.center.clone().unwrap_or_else(|| vec![0.0; self.dim]), b.radius, b.amplitude))
            .collect();
        make_potential(self.dim, &spec)
    }

    pub fn gamma(&self) -> gsmatrix::Result<ComplexSymMatrix> {
        let d = self.dim;
        let re = self.state.gamma_re.as_ref().expect("resolved");
        let im = self.state.gamma_im.as_ref().expect("resolved");
        ComplexSymMatrix::new(CMatrix::from_fn(d, d, |i, j| C64::new(re[i][j], im[i][j])))
    }

    pub fn poly(&self) -> gsmatrix::Result<MultiPoly> {
        if self.state.q0.is_empty() {
            return Ok(MultiPoly::one(self.dim));
        }
        MultiPoly::from_terms(self.dim, self.state.q0.iter().map(|t| (t.exponent.clone(), C64::new(t.re, t.im))))
    }

    pub fn sphere_state(&self, h: f64) -> gsmatrix::Result<SphereGaussianState> {
        let s = &self.state;
        SphereGaussianState::new(s.x0.clone().expect("resolved"), s.xi0.clone().expect("resolved"), self.gamma()?, self.poly()?, h)
    }

    /// Packet with center `x0`, momentum `ξ0`, matrix `Γ₀` and polynomial `Q₀`.
    pub fn packet(&self, h: f64) -> gsmatrix::Result<WavePacket> {
        let s = &self.state;
        WavePacket::new(s.x0.clone().expect("resolved"), s.xi0.clone().expect("resolved"), self.gamma()?, self.poly()?, 0.0, h)
    }

    pub fn oracle_potential(&self) -> gsmatrix::Result<BumpPotential> {
        let spec: Vec<(Vec<f64>, f64, f64)> =
            self.oracle.bumps.iter().map(|b| (vec![b.center], b.radius, b.amplitude)).collect();
        make_potential(1, &spec)
    }

    pub fn oracle_packet(&self, center: f64, h: f64) -> gsmatrix::Result<WavePacket> {
        let o = &self.oracle;
        WavePacket::gaussian(vec![center], vec![o.momentum], ComplexSymMatrix::scaled_identity(1, C64::new(o.gamma, 0.0)), h)
    }

    pub fn oracle_grid(&self, n: usize, half_width: f64) -> gsmatrix::Result<GridSpec> {
        GridSpec::new(1, n, half_width)
    }
}
