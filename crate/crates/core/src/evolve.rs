//! Rotating-frame coherence dynamics and the closed-form phase and
//! dephasing predictions.

use std::cell::RefCell;
use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FrameField, LoopSpec};
use crate::kernel::{complex_rate, complex_rate_exact, rate_expansion, KernelMethod};
use crate::ode::Dopri5;
use crate::spectral::{CouplingConstants, SpectralModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// Gaussian kernel when the validity flags hold, exact trace otherwise.
    #[default]
    Auto,
    Gaussian,
    ExactTrace,
    /// Rate forced to zero: the bare Born–Oppenheimer limit.
    Off,
}

/// Spacing of the frequency grid on which the exact-trace rate is tabulated.
pub const RATE_CADENCE: f64 = 1e-3;

/// Upper τ limit for the exact-trace rate integral, in units of `1/Ω_m`.
pub const EXACT_TAU_CAP: f64 = 200.0;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: SpectralModel,
    pub loop_spec: LoopSpec,
    pub b_lab: [f64; 3],
    pub kernel: KernelChoice,
    pub integrator_tolerance: f64,
    pub record_trace: bool,
}

impl RunConfig {
    pub fn new(model: SpectralModel, loop_spec: LoopSpec) -> Self {
        Self { model, loop_spec, b_lab: [0.0; 3], kernel: KernelChoice::Auto, integrator_tolerance: 1e-10, record_trace: false }
    }

    pub fn with_field(mut self, b_lab: [f64; 3]) -> Self {
        self.b_lab = b_lab;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelChoice) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.integrator_tolerance = tol;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    pub fn t_p(&self) -> f64 {
        self.loop_spec.t_p()
    }

    pub fn with_period(&self, t_p: f64) -> Result<Self> {
        Ok(Self { loop_spec: self.loop_spec.with_period(t_p)?, ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let tol = self.integrator_tolerance;
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(Error::Config(format!("integrator_tolerance must lie in (0, 1e-3], got {tol}")));
        }
        if self.b_lab.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("b_lab must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub re_s: f64,
    pub im_s: f64,
    pub omega_z: f64,
    pub omega_perp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub s_plus_initial: Complex64,
    pub s_plus_final: Complex64,
    pub phi_total: f64,
    pub d_total: f64,
    pub prediction_phi: f64,
    pub prediction_d: f64,
    /// Kernel actually used; `None` when the rate was switched off.
    pub method: Option<KernelMethod>,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
}

/// Rotating-frame coherence `s′₊` at `t = 0` (spin along `x′`).
pub const S_PLUS_INITIAL: f64 = 0.5;

enum Rate<'a> {
    Gaussian(CouplingConstants),
    Exact { model: &'a SpectralModel, cache: RefCell<HashMap<i64, Complex64>>, failure: RefCell<Option<Error>> },
    Off,
}

impl Rate<'_> {
    fn at(&self, omega: f64) -> Complex64 {
        match self {
            Rate::Gaussian(c) => complex_rate(c, omega).lambda,
            Rate::Off => Complex64::new(0.0, 0.0),
            Rate::Exact { model, cache, failure } => {
                let step = RATE_CADENCE * model.omega_m;
                let u = omega / step;
                let k0 = u.floor();
                let frac = u - k0;
                let node = |k: i64| -> Complex64 {
                    if let Some(v) = cache.borrow().get(&k) {
                        return *v;
                    }
                    let tau_cap = EXACT_TAU_CAP / model.omega_m;
                    let v = match complex_rate_exact(model, k as f64 * step, tau_cap) {
                        Ok(r) => r.lambda,
                        Err(e) => {
                            failure.borrow_mut().get_or_insert(e);
                            Complex64::new(0.0, 0.0)
                        }
                    };
                    cache.borrow_mut().insert(k, v);
                    v
                };
                let a = node(k0 as i64);
                if frac == 0.0 {
                    a
                } else {
                    a * (1.0 - frac) + node(k0 as i64 + 1) * frac
                }
            }
        }
    }
}

fn resolve_method(cfg: &RunConfig, c: &CouplingConstants) -> Option<KernelMethod> {
    match cfg.kernel {
        KernelChoice::Off => None,
        KernelChoice::Gaussian => Some(KernelMethod::Gaussian),
        KernelChoice::ExactTrace => Some(KernelMethod::ExactTrace),
        KernelChoice::Auto => {
            if c.validity.gaussian_kernel_ok && c.validity.franck_condon_large {
                Some(KernelMethod::Gaussian)
            } else {
                Some(KernelMethod::ExactTrace)
            }
        }
    }
}

/// Integrates `ds′₊/dt = [−i w_z − (w_x² + w_y²) λ(w_z)] s′₊` with `w = ω + b`
/// over one loop period, `λ` being the stationary kernel rate.
pub fn integrate_coherence(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let consts = cfg.model.coupling_constants()?;
    let method = resolve_method(cfg, &consts);
    let rate = match method {
        None => Rate::Off,
        Some(KernelMethod::Gaussian) => Rate::Gaussian(consts.clone()),
        Some(KernelMethod::ExactTrace) => {
            Rate::Exact { model: &cfg.model, cache: RefCell::new(HashMap::new()), failure: RefCell::new(None) }
        }
    };
    let lp = &cfg.loop_spec;
    let t_p = lp.t_p();
    let field = |t: f64| -> FrameField {
        lp.frame_field(cfg.b_lab, t.clamp(0.0, t_p)).expect("time clamped into the loop period")
    };
    let generator = |t: f64| -> Complex64 {
        let f = field(t);
        let w = f.total();
        Complex64::new(0.0, -w[2]) - f.perp_sq() * rate.at(w[2])
    };

    let s0 = Complex64::new(S_PLUS_INITIAL, 0.0);
    let tol = cfg.integrator_tolerance;
    let mut solver = Dopri5::new(tol, tol * 1e-3 * S_PLUS_INITIAL);
    let knots = lp.knots();
    solver.h_max = t_p / (4.0 * lp.panel_count() as f64);
    let mut phase = 0.0;
    let mut steps = 0;
    let mut trace = cfg.record_trace.then(|| {
        let f = field(0.0);
        vec![TraceRow { t: 0.0, re_s: s0.re, im_s: s0.im, omega_z: f.omega[2], omega_perp: f.omega_perp }]
    });
    let mut s = s0;
    for w in knots.windows(2) {
        let (s_end, stats) = solver.solve(
            |t, y| generator(t) * y,
            w[0],
            w[1],
            s,
            |t, old, new| {
                let d = (new / old).arg();
                if d.abs() > std::f64::consts::FRAC_PI_2 {
                    return false;
                }
                phase -= d;
                if let Some(tr) = trace.as_mut() {
                    let f = field(t);
                    tr.push(TraceRow { t, re_s: new.re, im_s: new.im, omega_z: f.omega[2], omega_perp: f.omega_perp });
                }
                true
            },
        )?;
        steps += stats.accepted;
        s = s_end;
    }
    if let Rate::Exact { failure, .. } = &rate {
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
    }
    let pred = predict_closed_form(cfg)?;
    Ok(RunResult {
        s_plus_initial: s0,
        s_plus_final: s,
        phi_total: phase,
        d_total: -(s.norm() / s0.norm()).ln(),
        prediction_phi: pred.phi_total,
        prediction_d: pred.d_total,
        method,
        steps,
        trace,
    })
}

/// Where the coefficients of the closed forms come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coefficients {
    /// `γ₁ e^{−Gχ₁²/2}` and `γ₂` from the coupling constants.
    #[default]
    CouplingConstants,
    /// Small-frequency expansion of the Gaussian-kernel rate used by the evolver.
    KernelRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseParts {
    pub dynamic: f64,
    pub berry: f64,
    pub non_adiabatic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DephasingParts {
    pub dynamic: f64,
    pub berry: f64,
    pub non_adiabatic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    pub phi_total: f64,
    pub d_total: f64,
    pub phase: PhaseParts,
    pub dephasing: DephasingParts,
    /// `γ₁² ∫ ω⊥³ dt`, the size of the first omitted phase term.
    pub residual_bound: f64,
    /// Dephasing coefficient multiplying `∫(ω⊥+b⊥)²`.
    pub dephasing_coefficient: f64,
    /// Phase coefficient multiplying `∫(ω⊥+b⊥)²(ω_z+b_z)`.
    pub phase_coefficient: f64,
}

pub fn predict_closed_form(cfg: &RunConfig) -> Result<ClosedForm> {
    predict_closed_form_with(cfg, Coefficients::CouplingConstants)
}

pub fn predict_closed_form_with(cfg: &RunConfig, source: Coefficients) -> Result<ClosedForm> {
    cfg.validate()?;
    let c = cfg.model.coupling_constants()?;
    let (kd, kp) = match source {
        Coefficients::CouplingConstants => (c.gamma1 * c.suppression(), c.gamma2),
        Coefficients::KernelRate => {
            let e = rate_expansion(&c);
            (e.dephasing, e.phase_slope)
        }
    };
    let lp = &cfg.loop_spec;
    let b = cfg.b_lab;
    let int = |g: &dyn Fn(&FrameField) -> f64| lp.integrate_field(b, g);
    let dyn_phase = int(&|f| f.b[2])?;
    let berry = int(&|f| f.omega[2])?;
    let na_phase = -kp * int(&|f| f.perp_sq() * (f.omega[2] + f.b[2]))?;
    let d_dyn = kd * int(&|f| f.b[0] * f.b[0] + f.b[1] * f.b[1])?;
    let d_bp = 2.0 * kd * int(&|f| f.b[0] * f.omega[0] + f.b[1] * f.omega[1])?;
    let d_na = kd * int(&|f| f.omega_perp * f.omega_perp)?;
    let residual_bound = c.gamma1 * c.gamma1 * int(&|f| f.omega_perp.powi(3))?;
    Ok(ClosedForm {
        phi_total: dyn_phase + berry + na_phase,
        d_total: d_dyn + d_bp + d_na,
        phase: PhaseParts { dynamic: dyn_phase, berry, non_adiabatic: na_phase },
        dephasing: DephasingParts { dynamic: d_dyn, berry: d_bp, non_adiabatic: d_na },
        residual_bound,
        dephasing_coefficient: kd,
        phase_coefficient: kp,
    })
}

/// `x` wrapped into `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let r = x.rem_euclid(tau);
    if r > std::f64::consts::PI {
        r - tau
    } else {
        r
    }
}
