//! Dormand–Prince 5(4) adaptive stepping for a scalar complex ODE.

use num_complex::Complex64;

use crate::error::{Error, Result};

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, h_max: f64::INFINITY, h_min: 1e-14 }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1`. `on_step(t_new, y_old, y_new)`
    /// is called after every accepted step; returning `false` rejects the step
    /// and halves it (used to bound per-step phase increments).
    pub fn solve<F, S>(&self, mut f: F, t0: f64, t1: f64, y0: Complex64, mut on_step: S) -> Result<(Complex64, Stats)>
    where
        F: FnMut(f64, Complex64) -> Complex64,
        S: FnMut(f64, Complex64, Complex64) -> bool,
    {
        let span = t1 - t0;
        let mut stats = Stats::default();
        if span <= 0.0 {
            return Ok((y0, stats));
        }
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, y);
        let scale0 = self.atol + self.rtol * y.norm();
        let mut h = if k1.norm() > 0.0 { 0.01 * scale0 / k1.norm() * span.max(1.0) } else { span * 1e-3 };
        h = h.clamp(self.h_min.max(span * 1e-12), self.h_max.min(span));
        let h_floor = self.h_min.max(span * 1e-15);
        while t < t1 {
            if t + h > t1 {
                h = t1 - t;
            }
            let k2 = f(t + C2 * h, y + k1 * (h * A21));
            let k3 = f(t + C3 * h, y + (k1 * A31 + k2 * A32) * h);
            let k4 = f(t + C4 * h, y + (k1 * A41 + k2 * A42 + k3 * A43) * h);
            let k5 = f(t + C5 * h, y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
            let k6 = f(t + h, y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
            let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
            let t_new = if t1 - (t + h) < h_floor { t1 } else { t + h };
            let k7 = f(t_new, y_new);
            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let sc = self.atol + self.rtol * y.norm().max(y_new.norm());
            let err = err_vec.norm() / sc;
            if !err.is_finite() {
                return Err(Error::Integration { t, reason: "non-finite derivative".into() });
            }
            if err <= 1.0 && on_step(t_new, y, y_new) {
                stats.accepted += 1;
                t = t_new;
                y = y_new;
                k1 = k7;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * factor).min(self.h_max);
            } else {
                stats.rejected += 1;
                let factor = if err > 1.0 { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.5 };
                h *= factor;
                if h < h_floor {
                    return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:e})") });
                }
            }
        }
        Ok((y, stats))
    }
}
