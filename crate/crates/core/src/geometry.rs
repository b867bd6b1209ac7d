//! Closed loops of the coupling axis `e(t)` and the rotating-frame fields
//! they induce.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Quad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoopShape {
    /// `θ = θ₀`, `φ = 2πk·t/t_p`. `winding = 0` gives a static axis.
    Cap {
        theta0: f64,
        #[serde(default = "one")]
        winding: i32,
        #[serde(default)]
        phi0: f64,
    },
    /// `θ = θ₀ + a·sin(h·φ)`, `φ = 2πk·t/t_p`.
    Wobble {
        theta0: f64,
        amplitude: f64,
        harmonic: i32,
        #[serde(default = "one")]
        winding: i32,
    },
    /// Samples `(s, θ, φ)` with `s = t/t_p ∈ [0, 1]`, joined by monotone cubics.
    PiecewiseTable { s: Vec<f64>, theta: Vec<f64>, phi: Vec<f64> },
}

fn one() -> i32 {
    1
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Config("interpolation needs at least two matching samples".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("interpolation abscissae must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    fn segment(&self, t: f64) -> usize {
        self.x.partition_point(|&v| v <= t).clamp(1, self.x.len() - 1) - 1
    }

    /// Value and first derivative at `t` (clamped to the table range).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(self.x[0], self.x[self.x.len() - 1]);
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k], self.d[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1;
        let dv = ((6.0 * s2 - 6.0 * s) * y0 + (-6.0 * s2 + 6.0 * s) * y1) / h + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (3.0 * s2 - 2.0 * s) * d1;
        (v, dv)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Angles of the axis and their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angles {
    pub theta: f64,
    pub phi: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSpec {
    shape: LoopShape,
    t_p: f64,
    table: Option<(MonotoneCubic, MonotoneCubic)>,
}

const CLOSURE_TOL: f64 = 1e-9;

impl LoopSpec {
    pub fn new(shape: LoopShape, t_p: f64) -> Result<Self> {
        if !(t_p.is_finite() && t_p > 0.0) {
            return Err(Error::Config(format!("loop period must be positive, got {t_p}")));
        }
        let in_range = |th: f64| (0.0..=PI).contains(&th);
        let table = match &shape {
            LoopShape::Cap { theta0, .. } => {
                if !in_range(*theta0) {
                    return Err(Error::Config(format!("theta0 must lie in [0, pi], got {theta0}")));
                }
                None
            }
            LoopShape::Wobble { theta0, amplitude, .. } => {
                if !(in_range(theta0 - amplitude.abs()) && in_range(theta0 + amplitude.abs())) {
                    return Err(Error::Config("wobble leaves theta in [0, pi]".into()));
                }
                None
            }
            LoopShape::PiecewiseTable { s, theta, phi } => {
                if s.len() != theta.len() || s.len() != phi.len() || s.len() < 3 {
                    return Err(Error::Config("loop table needs at least three (s, theta, phi) rows".into()));
                }
                if (s[0] - 0.0).abs() > CLOSURE_TOL || (s[s.len() - 1] - 1.0).abs() > CLOSURE_TOL {
                    return Err(Error::Config("loop table must span s in [0, 1]".into()));
                }
                if theta.iter().any(|&t| !in_range(t)) {
                    return Err(Error::Config("loop table theta outside [0, pi]".into()));
                }
                let n = s.len() - 1;
                if (theta[n] - theta[0]).abs() > CLOSURE_TOL {
                    return Err(Error::Closure(format!("theta(1) - theta(0) = {}", theta[n] - theta[0])));
                }
                let turns = (phi[n] - phi[0]) / (2.0 * PI);
                if (turns - turns.round()).abs() * 2.0 * PI > CLOSURE_TOL {
                    return Err(Error::Closure(format!("phi advances by {turns} turns")));
                }
                Some((MonotoneCubic::new(s.clone(), theta.clone())?, MonotoneCubic::new(s.clone(), phi.clone())?))
            }
        };
        Ok(Self { shape, t_p, table })
    }

    pub fn cap(theta0: f64, t_p: f64) -> Result<Self> {
        Self::new(LoopShape::Cap { theta0, winding: 1, phi0: 0.0 }, t_p)
    }

    pub fn shape(&self) -> &LoopShape {
        &self.shape
    }

    pub fn t_p(&self) -> f64 {
        self.t_p
    }

    /// Same shape traversed in period `t_p`.
    pub fn with_period(&self, t_p: f64) -> Result<Self> {
        Self::new(self.shape.clone(), t_p)
    }

    /// Same path traversed backwards.
    pub fn reversed(&self) -> Result<Self> {
        let shape = match &self.shape {
            LoopShape::Cap { theta0, winding, phi0 } => LoopShape::Cap { theta0: *theta0, winding: -winding, phi0: *phi0 },
            LoopShape::Wobble { theta0, amplitude, harmonic, winding } => {
                LoopShape::Wobble { theta0: *theta0, amplitude: *amplitude, harmonic: *harmonic, winding: -winding }
            }
            LoopShape::PiecewiseTable { s, theta, phi } => LoopShape::PiecewiseTable {
                s: s.iter().rev().map(|v| 1.0 - v).collect(),
                theta: theta.iter().rev().copied().collect(),
                phi: phi.iter().rev().copied().collect(),
            },
        };
        Self::new(shape, self.t_p)
    }

    /// Angles at normalized time `s = t/t_p`, derivatives with respect to `s`.
    fn angles_s(&self, s: f64) -> Angles {
        match &self.shape {
            LoopShape::Cap { theta0, winding, phi0 } => {
                let w = 2.0 * PI * *winding as f64;
                Angles { theta: *theta0, phi: phi0 + w * s, theta_dot: 0.0, phi_dot: w }
            }
            LoopShape::Wobble { theta0, amplitude, harmonic, winding } => {
                let w = 2.0 * PI * *winding as f64;
                let phi = w * s;
                let h = *harmonic as f64;
                Angles {
                    theta: theta0 + amplitude * (h * phi).sin(),
                    phi,
                    theta_dot: amplitude * h * (h * phi).cos() * w,
                    phi_dot: w,
                }
            }
            LoopShape::PiecewiseTable { .. } => {
                let (th, ph) = self.table.as_ref().expect("table loops carry interpolants");
                let (theta, theta_dot) = th.eval(s);
                let (phi, phi_dot) = ph.eval(s);
                Angles { theta, phi, theta_dot, phi_dot }
            }
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.t_p;
        if !(t >= -slack && t <= self.t_p + slack) {
            return Err(Error::Domain { t, t_p: self.t_p });
        }
        Ok(())
    }

    pub fn angles(&self, t: f64) -> Result<Angles> {
        self.check_time(t)?;
        let a = self.angles_s((t / self.t_p).clamp(0.0, 1.0));
        Ok(Angles { theta_dot: a.theta_dot / self.t_p, phi_dot: a.phi_dot / self.t_p, ..a })
    }

    /// Unit coupling axis `e(t)`.
    pub fn axis(&self, t: f64) -> Result<[f64; 3]> {
        let a = self.angles(t)?;
        Ok(axis_of(a.theta, a.phi))
    }

    pub fn frame_field(&self, b_lab: [f64; 3], t: f64) -> Result<FrameField> {
        let a = self.angles(t)?;
        Ok(FrameField::from_angles(&a, b_lab))
    }

    /// `𝒜 = ∮ (1 − cos θ) dφ`.
    pub fn solid_angle(&self) -> Result<f64> {
        match &self.shape {
            LoopShape::Cap { theta0, winding, .. } => Ok(2.0 * PI * *winding as f64 * (1.0 - theta0.cos())),
            _ => {
                let q = Quad::with_tolerance(1e-13, 1e-12).panels(self.panel_count());
                let est = q.integrate(
                    |s| {
                        let a = self.angles_s(s);
                        (1.0 - a.theta.cos()) * a.phi_dot
                    },
                    0.0,
                    1.0,
                )?;
                Ok(est.value)
            }
        }
    }

    /// Suggested number of initial quadrature panels over one period.
    pub fn panel_count(&self) -> usize {
        match &self.shape {
            LoopShape::Cap { .. } => 4,
            LoopShape::Wobble { harmonic, winding, .. } => 8 * (harmonic.unsigned_abs() as usize * winding.unsigned_abs() as usize).max(1),
            LoopShape::PiecewiseTable { s, .. } => s.len() - 1,
        }
    }

    /// Knot times of a tabulated loop (where derivatives may jump), in `[0, t_p]`.
    pub fn knots(&self) -> Vec<f64> {
        match &self.table {
            Some((th, _)) => th.knots().iter().map(|s| s * self.t_p).collect(),
            None => vec![0.0, self.t_p],
        }
    }

    /// `∫₀^{t_p} g(F(t)) dt` over the loop, honouring table knots.
    pub fn integrate_field<G: Fn(&FrameField) -> f64>(&self, b_lab: [f64; 3], g: G) -> Result<f64> {
        let knots = self.knots();
        let per = (self.panel_count() / (knots.len() - 1)).max(1);
        let q = Quad::with_tolerance(1e-15, 1e-12).panels(per);
        let mut total = 0.0;
        for w in knots.windows(2) {
            let est = q.integrate(
                |t| {
                    let a = self.angles_s((t / self.t_p).clamp(0.0, 1.0));
                    let a = Angles { theta_dot: a.theta_dot / self.t_p, phi_dot: a.phi_dot / self.t_p, ..a };
                    g(&FrameField::from_angles(&a, b_lab))
                },
                w[0],
                w[1],
            )?;
            total += est.value;
        }
        Ok(total)
    }

    /// The SU(2) frame unitary `𝒰 = e^{−iφσ_z/2} e^{iθσ_y/2} e^{iφσ_z/2}`.
    pub fn frame_unitary(&self, t: f64) -> Result<Su2> {
        let a = self.angles(t)?;
        Ok(Su2::frame(a.theta, a.phi))
    }
}

pub fn axis_of(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Rotating-frame angular velocity and field at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameField {
    pub omega: [f64; 3],
    pub omega_perp: f64,
    /// Lab field expressed in the rotating frame.
    pub b: [f64; 3],
}

impl FrameField {
    pub fn from_angles(a: &Angles, b_lab: [f64; 3]) -> Self {
        let (st, ct) = a.theta.sin_cos();
        let (sp, cp) = a.phi.sin_cos();
        let omega = [
            -a.phi_dot * st * cp - a.theta_dot * sp,
            -a.phi_dot * st * sp + a.theta_dot * cp,
            -a.phi_dot * (1.0 - ct),
        ];
        let omega_perp = omega[0].hypot(omega[1]);
        FrameField { omega, omega_perp, b: rotate_to_frame(a.theta, a.phi, b_lab) }
    }

    /// `ω + b` component-wise.
    pub fn total(&self) -> [f64; 3] {
        [self.omega[0] + self.b[0], self.omega[1] + self.b[1], self.omega[2] + self.b[2]]
    }

    /// `(ω_x + b_x)² + (ω_y + b_y)²`.
    pub fn perp_sq(&self) -> f64 {
        let w = self.total();
        w[0] * w[0] + w[1] * w[1]
    }
}

/// `R_z(φ) R_y(−θ) R_z(−φ) v`.
pub fn rotate_to_frame(theta: f64, phi: f64, v: [f64; 3]) -> [f64; 3] {
    let rz = |a: f64, v: [f64; 3]| {
        let (s, c) = a.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
    };
    let ry = |a: f64, v: [f64; 3]| {
        let (s, c) = a.sin_cos();
        [c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2]]
    };
    rz(phi, ry(-theta, rz(-phi, v)))
}

/// 2×2 unitary stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2(pub [[Complex64; 2]; 2]);

impl Su2 {
    pub fn identity() -> Self {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        Su2([[l, o], [o, l]])
    }

    /// `exp(i (v·σ) / 2)`.
    pub fn exp_half(v: [f64; 3]) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let (s, c) = (0.5 * n).sin_cos();
        let k = if n > 0.0 { s / n } else { 0.5 };
        let i = Complex64::new(0.0, 1.0);
        Su2([
            [Complex64::new(c, k * v[2]), i * k * Complex64::new(v[0], -v[1])],
            [i * k * Complex64::new(v[0], v[1]), Complex64::new(c, -k * v[2])],
        ])
    }

    pub fn frame(theta: f64, phi: f64) -> Self {
        let a = Su2::exp_half([0.0, 0.0, -phi]);
        let b = Su2::exp_half([0.0, theta, 0.0]);
        let c = Su2::exp_half([0.0, 0.0, phi]);
        a.mul(&b).mul(&c)
    }

    pub fn mul(&self, o: &Su2) -> Su2 {
        let a = &self.0;
        let b = &o.0;
        Su2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }

    pub fn dagger(&self) -> Su2 {
        let a = &self.0;
        Su2([[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]])
    }

    pub fn apply(&self, psi: [Complex64; 2]) -> [Complex64; 2] {
        let a = &self.0;
        [a[0][0] * psi[0] + a[0][1] * psi[1], a[1][0] * psi[0] + a[1][1] * psi[1]]
    }
}
