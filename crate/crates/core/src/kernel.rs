//! Bath correlation kernels, the `I(b)` integrals and the complex rate that
//! drives the coherence equation.

use std::f64::consts::PI;

use errorfunctions::RealErrorFunctions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Quad;
use crate::spectral::{coth_half, CouplingConstants, Regime, SpectralModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    ExactTrace,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEvaluation {
    pub tau: f64,
    pub a_even_sym: f64,
    pub a_even_asym: f64,
    pub a_odd_sym: f64,
    pub a_odd_asym: f64,
    pub method: KernelMethod,
}

/// `∫₀^∞ Ā(τ) e^{−iωτ} dτ` with `Ā` the mean of the even and odd symmetric
/// kernels, evaluated at `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexRate {
    pub omega: f64,
    pub lambda: Complex64,
}

/// `f(τ)` of the displaced-bath trace, with `f(0) = F`.
pub fn f_exact(model: &SpectralModel, tau: f64) -> Result<Complex64> {
    model.validate()?;
    let w = model.omega_m * tau;
    let quad = Quad::with_tolerance(1e-14, 1e-12).max_intervals(40000).panels(8 + (4.0 * w.abs()) as usize);
    match model.regime {
        Regime::Classical => {
            let re = model.density.integrate(|x| (x * w).cos() / (x * x), -2, &quad)?;
            Ok(Complex64::new(re, 0.0))
        }
        Regime::Quantum => {
            let b = model.beta_omega_m;
            let sp = if b.is_finite() { -3 } else { -2 };
            let re = model.density.integrate(|x| coth_half(b, x) * (x * w).cos() / (x * x), sp, &quad)?;
            let im = model.density.integrate(|x| -(x * w).sin() / (x * x), -1, &quad)?;
            Ok(Complex64::new(re, im))
        }
    }
}

fn traces(f: Complex64, ff: f64) -> (Complex64, Complex64) {
    // e^{-2F}(cosh 2f - 1) and e^{-2F} sinh 2f without forming e^{±2f}.
    let up = (2.0 * (f - ff)).exp();
    let down = (-2.0 * (f + ff)).exp();
    let base = (-2.0 * ff).exp();
    (0.5 * (up + down) - base, 0.5 * (up - down))
}

/// Kernels from the exact trace formulas at lag `tau`.
pub fn kernel_exact(model: &SpectralModel, tau: f64) -> Result<KernelEvaluation> {
    let ff = f_exact(model, 0.0)?.re;
    kernel_exact_with_f(model, ff, tau)
}

fn kernel_exact_with_f(model: &SpectralModel, ff: f64, tau: f64) -> Result<KernelEvaluation> {
    let f = f_exact(model, tau)?;
    let (even, odd) = traces(f, ff);
    Ok(KernelEvaluation {
        tau,
        a_even_sym: even.re,
        a_even_asym: even.im,
        a_odd_sym: odd.re,
        a_odd_asym: odd.im,
        method: KernelMethod::ExactTrace,
    })
}

/// `½ exp[−G((Ω_mτ)² + 2iχ₁Ω_mτ)]`, the second-order expansion of `½e^{2(f−F)}`.
pub fn kernel_gaussian(c: &CouplingConstants, tau: f64) -> KernelEvaluation {
    let w = c.omega_m * tau;
    let z = 0.5 * Complex64::new(-c.g_dis * w * w, -2.0 * c.g_dis * c.chi[1] * w).exp();
    KernelEvaluation {
        tau,
        a_even_sym: z.re,
        a_even_asym: z.im,
        a_odd_sym: z.re,
        a_odd_asym: z.im,
        method: KernelMethod::Gaussian,
    }
}

/// `∫₀^∞ e^{−aτ² − ikτ} dτ` in closed form (Dawson function for the sine part).
pub fn half_gaussian_fourier(a: f64, k: f64) -> Complex64 {
    let ra = a.sqrt();
    let x = k / (2.0 * ra);
    Complex64::new(0.5 * PI.sqrt() / ra * (-x * x).exp(), -x.dawson() / ra)
}

/// Parameters of the `I(b)` family `∫₀^∞ exp[−½g((Ω_mτ)² + 2i(χ₁+b)Ω_mτ)] dτ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IParams {
    pub g: f64,
    pub chi1: f64,
    pub omega_m: f64,
}

impl IParams {
    pub fn from_constants(c: &CouplingConstants) -> Self {
        Self { g: c.g_dis, chi1: c.chi[1], omega_m: c.omega_m }
    }

    fn a(&self) -> f64 {
        0.5 * self.g * self.omega_m * self.omega_m
    }

    fn k(&self, b: f64) -> f64 {
        self.g * (self.chi1 + b) * self.omega_m
    }

    /// Upper limit of the τ quadrature and the bound on the neglected tail.
    pub fn tau_max(&self) -> (f64, f64) {
        let om = self.omega_m;
        let t = 8.0 / (om * (0.5 * self.g).sqrt()) + 8.0 / (om * self.g * self.chi1.abs() + om);
        let a = self.a();
        let tail = 0.5 * (PI / a).sqrt() * libm_erfc(a.sqrt() * t);
        (t, tail)
    }

    fn panels(&self, span: f64, b: f64) -> usize {
        let width = PI / (self.omega_m * self.g * (self.chi1 + b).abs() + self.omega_m);
        ((span / width).ceil() as usize).clamp(4, 20000)
    }

    /// Direct quadrature of the half-line integral.
    pub fn quadrature(&self, b: f64) -> Result<Complex64> {
        let (a, k) = (self.a(), self.k(b));
        let (t, _) = self.tau_max();
        let q = Quad::with_tolerance(1e-15, 1e-12).max_intervals(100000).panels(self.panels(t, b));
        Ok(q.integrate(|tau| Complex64::new(-a * tau * tau, -k * tau).exp(), 0.0, t)?.value)
    }

    /// Quadrature of the real part over the full line `(−∞, ∞)`.
    pub fn full_line_real_quadrature(&self, b: f64) -> Result<f64> {
        let (a, k) = (self.a(), self.k(b));
        let (t, _) = self.tau_max();
        let q = Quad::with_tolerance(1e-15, 1e-12).max_intervals(100000).panels(2 * self.panels(t, b));
        Ok(q.integrate(|tau| (-a * tau * tau).exp() * (k * tau).cos(), -t, t)?.value)
    }

    /// Exact half-line value through the Dawson function.
    pub fn closed(&self, b: f64) -> Complex64 {
        half_gaussian_fourier(self.a(), self.k(b))
    }

    /// `π^{1/2} e^{−G(χ₁+b)²/2} / (Ω_m (G/2)^{1/2})`.
    pub fn re_closed(&self, b: f64) -> f64 {
        let s = self.chi1 + b;
        PI.sqrt() * (-0.5 * self.g * s * s).exp() / (self.omega_m * (0.5 * self.g).sqrt())
    }

    /// `−1 / (Ω_m G (χ₁+b))`, the large-`Gχ₁` form.
    pub fn im_closed(&self, b: f64) -> Result<f64> {
        let s = self.chi1 + b;
        if s == 0.0 {
            return Err(Error::Pole("chi1 + b = 0".into()));
        }
        Ok(-1.0 / (self.omega_m * self.g * s))
    }

    /// `2b / (Ω_m G)`, the small-`Gχ₁` form quoted for classical noise.
    pub fn im_closed_classical(&self, b: f64) -> f64 {
        2.0 * b / (self.omega_m * self.g)
    }
}

fn libm_erfc(x: f64) -> f64 {
    RealErrorFunctions::erfc(x)
}

/// `I(b)` for the model's constants, by direct quadrature.
pub fn i_integral(c: &CouplingConstants, b: f64) -> Result<Complex64> {
    IParams::from_constants(c).quadrature(b)
}

/// Gaussian-kernel rate: `¼[I(b) + I*(−b)]` with the `I` family at `g = 2G`
/// and `b = ω/(2GΩ_m)`, evaluated in closed form.
pub fn complex_rate(c: &CouplingConstants, omega: f64) -> ComplexRate {
    let p = IParams { g: 2.0 * c.g_dis, chi1: c.chi[1], omega_m: c.omega_m };
    let b = omega / (2.0 * c.g_dis * c.omega_m);
    let lambda = 0.25 * (p.closed(b) + p.closed(-b).conj());
    ComplexRate { omega, lambda }
}

/// Same rate by τ-quadrature of the Gaussian kernel (independent check).
pub fn complex_rate_quadrature(c: &CouplingConstants, omega: f64) -> Result<ComplexRate> {
    let p = IParams { g: 2.0 * c.g_dis, chi1: c.chi[1], omega_m: c.omega_m };
    let (t, _) = p.tau_max();
    let n = p.panels(t, omega.abs() / (2.0 * c.g_dis * c.omega_m));
    let q = Quad::with_tolerance(1e-15, 1e-12).max_intervals(100000).panels(n);
    let v = q.integrate(|tau| kernel_gaussian(c, tau).a_even_sym * Complex64::new(0.0, -omega * tau).exp(), 0.0, t)?;
    Ok(ComplexRate { omega, lambda: v.value })
}

/// Rate from the exact trace kernels: `∫₀^∞ ½(A_even^sym + A_odd^sym) e^{−iωτ} dτ`.
///
/// The τ integral is marched panel by panel until the kernel has decayed below
/// `1e-13` of its peak over three consecutive panels, or `tau_cap` is reached.
pub fn complex_rate_exact(model: &SpectralModel, omega: f64, tau_cap: f64) -> Result<ComplexRate> {
    let c = model.coupling_constants()?;
    let ff = c.franck_condon_f;
    let om = model.omega_m;
    let width = 0.5 / (om * c.g_dis.sqrt());
    let q = Quad::with_tolerance(1e-15, 1e-10).max_intervals(2000);
    let kern = |tau: f64| -> Result<f64> {
        let k = kernel_exact_with_f(model, ff, tau)?;
        Ok(0.5 * (k.a_even_sym + k.a_odd_sym))
    };
    let peak = kern(0.0)?.abs().max(1e-300);
    let mut total = Complex64::new(0.0, 0.0);
    let mut quiet = 0;
    let mut t0 = 0.0;
    while t0 < tau_cap && quiet < 3 {
        let t1 = (t0 + width).min(tau_cap);
        let mut failure = None;
        let mut seen: f64 = 0.0;
        let est = q.integrate(
            |tau| match kern(tau) {
                Ok(v) => {
                    seen = seen.max(v.abs());
                    Complex64::new(0.0, -omega * tau).exp() * v
                }
                Err(e) => {
                    failure = Some(e);
                    Complex64::new(0.0, 0.0)
                }
            },
            t0,
            t1,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        total += est.value;
        quiet = if seen < 1e-13 * peak { quiet + 1 } else { 0 };
        t0 = t1;
    }
    Ok(ComplexRate { omega, lambda: total })
}

/// Coefficients of the small-`ω` expansion of a rate function
/// `λ(ω) ≈ λ₀ + λ₁ω`: dephasing `Re λ₀` and phase slope `−Im λ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateExpansion {
    pub dephasing: f64,
    pub phase_slope: f64,
}

/// Expansion of the Gaussian-kernel rate, in closed form.
pub fn rate_expansion(c: &CouplingConstants) -> RateExpansion {
    let a = c.g_dis * c.omega_m * c.omega_m;
    let x = c.chi[1] * c.g_dis.sqrt();
    let dephasing = 0.25 * (PI / a).sqrt() * (-x * x).exp();
    let phase_slope = (1.0 - 2.0 * x * x.dawson()) / (4.0 * a);
    RateExpansion { dephasing, phase_slope }
}

/// Small-`α` overlap `⟨m + Δm| D(α) |m⟩` of a displaced oscillator.
pub fn mode_overlap(m: i64, alpha: f64, delta_m: i32) -> Result<f64> {
    if m < 0 {
        return Err(Error::InvalidArgument(format!("occupation must be non-negative, got {m}")));
    }
    let mf = m as f64;
    match delta_m {
        0 => Ok(1.0 - (mf + 0.5) * alpha * alpha),
        -1 => Ok(mf.sqrt() * alpha),
        1 => Ok(-(mf + 1.0).sqrt() * alpha),
        d => Err(Error::InvalidArgument(format!("delta_m must be -1, 0 or 1, got {d}"))),
    }
}
