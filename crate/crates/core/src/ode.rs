//! Dormand–Prince 5(4) integrator with adaptive step control.

use crate::error::{Error, Result};

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Fifth-order weights minus the embedded fourth-order ones.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// What the observer wants after an accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on `|step|`.
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, max_step: 0.5, min_step: 1e-14, max_steps: 5_000_000 }
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    fn error_norm(&self, y: &[f64], y_new: &[f64], err: &[f64]) -> f64 {
        let n = y.len() as f64;
        let sum: f64 = y
            .iter()
            .zip(y_new)
            .zip(err)
            .map(|((a, b), e)| {
                let sc = self.atol + self.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    fn initial_step<F>(&self, f: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let sc: Vec<f64> = y0.iter().map(|y| self.atol + self.rtol * y.abs()).collect();
        let rms = |v: &[f64]| {
            (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let d0 = rms(y0);
        let d1 = rms(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.max_step);
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + dir * h0 * k).collect();
        let mut f1 = vec![0.0; y0.len()];
        f(t0 + dir * h0, &y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.max_step)
    }

    /// Integrates `y' = f(t, y)` from `t0` towards `t_end` (either direction).
    ///
    /// `observer` sees every accepted step, including the initial state, and
    /// may stop the integration early. Returns the final `(t, y)`.
    pub fn integrate<F, O>(
        &self,
        mut f: F,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        mut observer: O,
    ) -> Result<(f64, Vec<f64>)>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]) -> Control,
    {
        let n = y0.len();
        let mut t = t0;
        let mut y = y0.to_vec();
        if observer(t, &y) == Control::Stop || t_end == t0 {
            return Ok((t, y));
        }
        let dir = (t_end - t0).signum();
        let mut k1 = vec![0.0; n];
        f(t, &y, &mut k1);
        let mut h = self.initial_step(&mut f, t, &y, &k1, dir);
        let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];
        let mut rejected_last = false;

        for _ in 0..self.max_steps {
            let remaining = (t_end - t) * dir;
            if remaining <= 0.0 {
                return Ok((t, y));
            }
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = h * dir;

            for i in 0..n {
                tmp[i] = y[i] + hs * A21 * k1[i];
            }
            f(t + C2 * hs, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * hs, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * hs, &tmp, &mut k4);
            for i in 0..n {
                tmp[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * hs, &tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + hs, &tmp, &mut k6);
            for i in 0..n {
                y_new[i] = y[i]
                    + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(t + hs, &y_new, &mut k7);
            for i in 0..n {
                err[i] = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let e = self.error_norm(&y, &y_new, &err);

            if e <= 1.0 {
                t = if last { t_end } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                if observer(t, &y) == Control::Stop || last {
                    return Ok((t, y));
                }
                let mut factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                if rejected_last {
                    factor = factor.min(1.0);
                }
                rejected_last = false;
                h = (h * factor).min(self.max_step);
            } else {
                rejected_last = true;
                h *= (0.9 * e.powf(-0.2)).max(0.2);
                if h < self.min_step {
                    return Err(Error::StepFailure { t, step: h });
                }
            }
            if !e.is_finite() {
                return Err(Error::StepFailure { t, step: h });
            }
        }
        Err(Error::StepFailure { t, step: h })
    }
}
