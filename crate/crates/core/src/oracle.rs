//! Monte-Carlo reference: a spin driven by explicit classical noise along the
//! rotating axis, integrated in the lab frame and averaged over realizations.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{wrap_angle, S_PLUS_INITIAL};
use crate::geometry::{LoopSpec, Su2};
use crate::quad::Quad;
use crate::spectral::{Regime, SpectralModel};

/// `Σ⟨A_j²⟩ = NOISE_POWER_PER_G · G_dis Ω_m²`: matches the short-time
/// dephasing of the ensemble to the `τ²` term of the exact classical kernel.
pub const NOISE_POWER_PER_G: f64 = 4.0;

const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseMode {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRealization {
    pub modes: Vec<NoiseMode>,
    pub seed: u64,
    pub stream: u64,
}

impl NoiseRealization {
    /// `ξ(t) = Σ a_j cos(Ω_j t + φ_j)`.
    pub fn xi(&self, t: f64) -> f64 {
        self.modes.iter().map(|m| m.amplitude * (m.omega * t + m.phase).cos()).sum()
    }

    /// `Ξ(t) = ∫ξ dt = Σ (a_j/Ω_j) sin(Ω_j t + φ_j)`.
    pub fn xi_integral(&self, t: f64) -> f64 {
        self.modes.iter().map(|m| m.amplitude / m.omega * (m.omega * t + m.phase).sin()).sum()
    }
}

/// Precomputed stratification of a classical density into noise modes.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    /// Cumulative mass table `(x, F(x))` over the support, `F` normalized to 1.
    cdf: Vec<(f64, f64)>,
    point: Option<f64>,
    n_modes: usize,
    /// Variance `⟨A_j²⟩` of every mode.
    variance: f64,
    omega_m: f64,
}

const CDF_CELLS: usize = 4096;

impl NoiseSampler {
    pub fn new(model: &SpectralModel, n_modes: usize) -> Result<Self> {
        model.validate()?;
        if model.regime != Regime::Classical {
            return Err(Error::Regime("noise sampling needs a classical model".into()));
        }
        if n_modes == 0 {
            return Err(Error::InvalidArgument("need at least one noise mode".into()));
        }
        let g = model.g_dis()?;
        let om = model.omega_m;
        let variance = NOISE_POWER_PER_G * g * om * om / n_modes as f64;
        let d = &model.density;
        let (lo, hi) = support_of(model);
        if lo == hi {
            return Ok(Self { cdf: Vec::new(), point: Some(lo), n_modes, variance, omega_m: om });
        }
        let q = Quad::with_tolerance(1e-14, 1e-10);
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        let mut acc = 0.0;
        cdf.push((lo, 0.0));
        for k in 0..CDF_CELLS {
            let a = lo + (hi - lo) * k as f64 / CDF_CELLS as f64;
            let b = lo + (hi - lo) * (k + 1) as f64 / CDF_CELLS as f64;
            acc += q.integrate(|x| d.eval(x), a, b)?.value;
            cdf.push((b, acc));
        }
        if acc > 0.0 {
            for p in cdf.iter_mut() {
                p.1 /= acc;
            }
        } else {
            cdf = vec![(lo, 0.0), (hi, 1.0)];
        }
        Ok(Self { cdf, point: None, n_modes, variance, omega_m: om })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `Σ⟨A_j²⟩`.
    pub fn total_power(&self) -> f64 {
        self.variance * self.n_modes as f64
    }

    /// Largest mode frequency the sampler can emit.
    pub fn max_omega(&self) -> f64 {
        match self.point {
            Some(c) => c * self.omega_m,
            None => self.cdf.last().map(|p| p.0).unwrap_or(1.0) * self.omega_m,
        }
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|p| p.1 < u).clamp(1, self.cdf.len() - 1);
        let (x0, f0) = self.cdf[k - 1];
        let (x1, f1) = self.cdf[k];
        if f1 > f0 {
            x0 + (u - f0) / (f1 - f0) * (x1 - x0)
        } else {
            x0
        }
    }

    /// Realization `index` of the ensemble seeded by `base_seed`.
    pub fn realization(&self, base_seed: u64, index: u64) -> NoiseRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(index);
        let sd = self.variance.sqrt();
        let n = self.n_modes as f64;
        let modes = (0..self.n_modes)
            .map(|j| {
                let u: f64 = rng.random();
                let x = match self.point {
                    Some(c) => c,
                    None => self.inverse_cdf((j as f64 + u) / n),
                };
                let z: f64 = StandardNormal.sample(&mut rng);
                let phase = 2.0 * PI * rng.random::<f64>();
                NoiseMode { omega: x * self.omega_m, amplitude: sd * z, phase }
            })
            .collect();
        NoiseRealization { modes, seed: base_seed, stream: index }
    }

    /// Default step bound `0.05 / max(Ω_max, ξ_rms)`.
    pub fn default_dt_max(&self) -> f64 {
        let xi_rms = (0.5 * self.total_power()).sqrt();
        0.05 / self.max_omega().max(xi_rms).max(1e-12)
    }
}

fn support_of(model: &SpectralModel) -> (f64, f64) {
    let s = model.density.support();
    (s.lo, s.hi)
}

pub fn sample_realization(model: &SpectralModel, n_modes: usize, base_seed: u64, index: u64) -> Result<NoiseRealization> {
    Ok(NoiseSampler::new(model, n_modes)?.realization(base_seed, index))
}

/// Per-step data shared by all realizations of an ensemble.
#[derive(Debug, Clone)]
pub struct StepPlan {
    dt: f64,
    n: usize,
    /// Axis at each step midpoint.
    axis_mid: Vec<[f64; 3]>,
    b_lab: [f64; 3],
    u_start_dagger: Su2,
    u_end: Su2,
}

impl StepPlan {
    pub fn new(loop_spec: &LoopSpec, b_lab: [f64; 3], dt_max: f64) -> Result<Self> {
        if !(dt_max > 0.0 && dt_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
        }
        let t_p = loop_spec.t_p();
        let n = (t_p / dt_max).ceil().max(1.0) as usize;
        let dt = t_p / n as f64;
        let axis_mid = (0..n).map(|k| loop_spec.axis((k as f64 + 0.5) * dt)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dt,
            n,
            axis_mid,
            b_lab,
            u_start_dagger: loop_spec.frame_unitary(0.0)?.dagger(),
            u_end: loop_spec.frame_unitary(t_p)?,
        })
    }

    pub fn steps(&self) -> usize {
        self.n
    }
}

/// Integrates one realization and returns the rotating-frame coherence with
/// the accumulated noise phase `Ξ(t_p) − Ξ(0)` removed.
pub fn integrate_realization(real: &NoiseRealization, plan: &StepPlan) -> Result<Complex64> {
    let m = real.modes.len();
    let mut c = Vec::with_capacity(m);
    let mut s = Vec::with_capacity(m);
    let mut rc = Vec::with_capacity(m);
    let mut rs = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for md in &real.modes {
        let (si, co) = md.phase.sin_cos();
        c.push(co);
        s.push(si);
        let (a, b) = (md.omega * plan.dt).sin_cos();
        rs.push(a);
        rc.push(b);
        w.push(if md.omega > 0.0 { md.amplitude / md.omega } else { 0.0 });
    }
    let xi_of = |s: &[f64]| -> f64 { s.iter().zip(&w).map(|(a, b)| a * b).sum() };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = plan.u_start_dagger.apply([Complex64::new(h, 0.0), Complex64::new(h, 0.0)]);
    let xi0 = xi_of(&s);
    let mut xi_prev = xi0;
    let bdt = [plan.b_lab[0] * plan.dt, plan.b_lab[1] * plan.dt, plan.b_lab[2] * plan.dt];
    for k in 0..plan.n {
        for j in 0..m {
            let (cj, sj) = (c[j], s[j]);
            c[j] = cj * rc[j] - sj * rs[j];
            s[j] = sj * rc[j] + cj * rs[j];
        }
        if k % 1024 == 1023 {
            for j in 0..m {
                let r = c[j].hypot(s[j]);
                c[j] /= r;
                s[j] /= r;
            }
        }
        let xi_now = xi_of(&s);
        let dxi = xi_now - xi_prev;
        xi_prev = xi_now;
        let e = plan.axis_mid[k];
        let u = Su2::exp_half([e[0] * dxi + bdt[0], e[1] * dxi + bdt[1], e[2] * dxi + bdt[2]]);
        psi = u.apply(psi);
    }
    let norm = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Integration { t: plan.n as f64 * plan.dt, reason: format!("norm drift {}", norm - 1.0) });
    }
    let rot = plan.u_end.apply(psi);
    let coherence = rot[1] * rot[0].conj();
    Ok(coherence * Complex64::new(0.0, xi_prev - xi0).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleEstimate {
    pub mean_s_plus: Complex64,
    pub phi_mc: f64,
    pub d_mc: f64,
    pub stderr_phi: f64,
    pub stderr_d: f64,
    pub n_realizations: usize,
    pub n_modes: usize,
    pub dt: f64,
    pub base_seed: u64,
    /// Per-realization coherences in index order.
    #[serde(skip)]
    pub samples: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_modes: usize,
    pub n_realizations: usize,
    pub base_seed: u64,
    /// `None` selects the sampler's default bound.
    pub dt_max: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n_modes: 64, n_realizations: 4000, base_seed: 1, dt_max: None }
    }
}

pub fn ensemble_average(model: &SpectralModel, loop_spec: &LoopSpec, b_lab: [f64; 3], cfg: &EnsembleConfig) -> Result<EnsembleEstimate> {
    if cfg.n_realizations < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 realizations, got {}", cfg.n_realizations)));
    }
    let sampler = NoiseSampler::new(model, cfg.n_modes)?;
    let dt_max = cfg.dt_max.unwrap_or_else(|| sampler.default_dt_max());
    let plan = StepPlan::new(loop_spec, b_lab, dt_max)?;
    let samples = (0..cfg.n_realizations as u64)
        .into_par_iter()
        .map(|i| integrate_realization(&sampler.realization(cfg.base_seed, i), &plan))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(samples, cfg, plan.dt))
}

fn summarize(samples: Vec<Complex64>, cfg: &EnsembleConfig, dt: f64) -> EnsembleEstimate {
    let n = samples.len();
    let s0 = Complex64::new(S_PLUS_INITIAL, 0.0);
    let mean = samples.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b) / n as f64;
    let phi = -(mean / s0).arg();
    let d = -(mean.norm() / s0.norm()).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed ^ BOOTSTRAP_SALT);
    let mut dphi = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut dd = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut acc = Complex64::new(0.0, 0.0);
        for _ in 0..n {
            acc += samples[rng.random_range(0..n)];
        }
        let m = acc / n as f64;
        dphi.push(wrap_angle(-(m / s0).arg() - phi));
        dd.push(-(m.norm() / s0.norm()).ln() - d);
    }
    EnsembleEstimate {
        mean_s_plus: mean,
        phi_mc: phi,
        d_mc: d,
        stderr_phi: std_dev(&dphi),
        stderr_d: std_dev(&dd),
        n_realizations: n,
        n_modes: cfg.n_modes,
        dt,
        base_seed: cfg.base_seed,
        samples,
    }
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
