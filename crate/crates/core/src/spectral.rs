//! Spectral densities `j(x)` and the coupling constants derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Quad;

/// Shape of the dimensionless coupling density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density {
    /// Normal profile truncated at 14 widths; `width = 0` is a point mass.
    GaussianBump { center: f64, width: f64, weight: f64 },
    /// Lorentzian profile restricted to `|x - center| < cutoff·width`.
    LorentzianBump {
        center: f64,
        width: f64,
        weight: f64,
        #[serde(default = "default_cutoff")]
        cutoff: f64,
    },
    /// Piecewise-linear through `(x, j)`; zero outside the table.
    Tabulated { x: Vec<f64>, j: Vec<f64> },
    /// `scale · x^power · base(x)`.
    Reweighted { base: Box<Density>, scale: f64, power: i32 },
}

fn default_cutoff() -> f64 {
    10.0
}

const GAUSS_SPAN: f64 = 14.0;

/// A Gaussian bump centred at least this many widths above zero is treated as
/// vanishing near the origin: its lower edge moves to `x = width`, where the
/// density is below `e^{-28}` of the peak.
const GAUSS_ORIGIN_CLEARANCE: f64 = 8.5;

fn gaussian_lower_edge(center: f64, width: f64) -> f64 {
    let lo = center - GAUSS_SPAN * width;
    if lo > 0.0 {
        lo
    } else if center >= GAUSS_ORIGIN_CLEARANCE * width {
        width
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralModel {
    pub density: Density,
    #[serde(default = "one")]
    pub omega_m: f64,
    /// `βΩ_m`; infinite at zero temperature, exactly 0 in the classical regime.
    #[serde(with = "beta_serde")]
    pub beta_omega_m: f64,
    pub regime: Regime,
}

fn one() -> f64 {
    1.0
}

mod beta_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Support of a density as `[lo, hi]` in `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Density {
    pub fn gaussian(center: f64, width: f64, weight: f64) -> Self {
        Density::GaussianBump { center, width, weight }
    }

    pub fn point_mass(center: f64, weight: f64) -> Self {
        Density::GaussianBump { center, width: 0.0, weight }
    }

    pub fn lorentzian(center: f64, width: f64, weight: f64) -> Self {
        Density::LorentzianBump { center, width, weight, cutoff: default_cutoff() }
    }

    pub fn tabulated(x: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        let d = Density::Tabulated { x, j };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Density::GaussianBump { center, width, weight } => {
                finite_nonneg("weight", *weight)?;
                finite_nonneg("width", *width)?;
                if !(center.is_finite() && *center > 0.0) {
                    return Err(Error::Config(format!("bump center must be positive, got {center}")));
                }
            }
            Density::LorentzianBump { center, width, weight, cutoff } => {
                finite_nonneg("weight", *weight)?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::Config(format!("lorentzian width must be positive, got {width}")));
                }
                if !(cutoff.is_finite() && *cutoff > 0.0) {
                    return Err(Error::Config(format!("lorentzian cutoff must be positive, got {cutoff}")));
                }
                if !(center.is_finite() && *center > 0.0) {
                    return Err(Error::Config(format!("bump center must be positive, got {center}")));
                }
            }
            Density::Tabulated { x, j } => {
                if x.len() != j.len() || x.len() < 2 {
                    return Err(Error::Config("tabulated density needs at least two (x, j) rows".into()));
                }
                if x.iter().chain(j.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::Config("tabulated density contains non-finite values".into()));
                }
                if x[0] < 0.0 {
                    return Err(Error::Config(format!("tabulated abscissa must be non-negative, got {}", x[0])));
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("tabulated abscissae must be strictly increasing".into()));
                }
                if j.iter().any(|&v| v < 0.0) {
                    return Err(Error::Config("tabulated density must be non-negative".into()));
                }
            }
            Density::Reweighted { base, scale, .. } => {
                base.validate()?;
                finite_nonneg("scale", *scale)?;
            }
        }
        Ok(())
    }

    /// `j(x)`; zero for `x ≤ 0`. A point mass evaluates to 0 off its location
    /// and to +∞ on it.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Density::GaussianBump { center, width, weight } => {
                if *width == 0.0 {
                    return if x == *center { f64::INFINITY } else { 0.0 };
                }
                let z = (x - center) / width;
                if z > GAUSS_SPAN || x < gaussian_lower_edge(*center, *width) {
                    0.0
                } else {
                    weight / (width * (2.0 * std::f64::consts::PI).sqrt()) * (-0.5 * z * z).exp()
                }
            }
            Density::LorentzianBump { center, width, weight, cutoff } => {
                let z = (x - center) / width;
                if z.abs() >= *cutoff {
                    0.0
                } else {
                    let norm = 2.0 * cutoff.atan();
                    weight / (norm * width * (1.0 + z * z))
                }
            }
            Density::Tabulated { x: xs, j } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
                let (x0, x1) = (xs[k - 1], xs[k]);
                let s = (x - x0) / (x1 - x0);
                j[k - 1] + s * (j[k] - j[k - 1])
            }
            Density::Reweighted { base, scale, power } => scale * x.powi(*power) * base.eval(x),
        }
    }

    /// Location and mass of a point-mass density, if it is one.
    fn as_point_mass(&self) -> Option<(f64, f64)> {
        match self {
            Density::GaussianBump { center, width, weight } if *width == 0.0 => Some((*center, *weight)),
            Density::Reweighted { base, scale, power } => {
                base.as_point_mass().map(|(c, m)| (c, m * scale * c.powi(*power)))
            }
            _ => None,
        }
    }

    pub(crate) fn support(&self) -> Support {
        match self {
            Density::GaussianBump { center, width, .. } => Support {
                lo: gaussian_lower_edge(*center, *width),
                hi: center + GAUSS_SPAN * width,
            },
            Density::LorentzianBump { center, width, cutoff, .. } => Support {
                lo: (center - cutoff * width).max(0.0),
                hi: center + cutoff * width,
            },
            Density::Tabulated { x, .. } => Support { lo: x[0], hi: x[x.len() - 1] },
            Density::Reweighted { base, .. } => base.support(),
        }
    }

    /// Leading power `p` of `j(x) ~ x^p` as `x → 0⁺`, or `None` when the
    /// density vanishes identically near the origin.
    fn origin_power(&self) -> Option<i32> {
        match self {
            Density::GaussianBump { .. } | Density::LorentzianBump { .. } => {
                if self.support().lo == 0.0 {
                    Some(0)
                } else {
                    None
                }
            }
            Density::Tabulated { x, j } => {
                if x[0] > 0.0 {
                    None
                } else if j[0] > 0.0 {
                    Some(0)
                } else if j[1] > 0.0 {
                    Some(1)
                } else {
                    None
                }
            }
            Density::Reweighted { base, power, .. } => base.origin_power().map(|p| p + power),
        }
    }

    /// Interval endpoints the integrator should treat as panel boundaries.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Density::Tabulated { x, .. } => x.clone(),
            Density::Reweighted { base, .. } => base.breakpoints(),
            _ => {
                let s = self.support();
                vec![s.lo, s.hi]
            }
        }
    }

    /// `∫₀^∞ j(x) g(x) dx`. `singular_power` is the power of `g` at the origin
    /// and is used to reject non-integrable moments before integrating.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, singular_power: i32, quad: &Quad) -> Result<f64> {
        if let Some((c, m)) = self.as_point_mass() {
            return Ok(m * g(c));
        }
        if let Some(p) = self.origin_power() {
            if p + singular_power <= -1 {
                return Err(Error::NonIntegrableMoment { exponent: singular_power });
            }
        }
        let bp = self.breakpoints();
        let mut total = 0.0;
        for w in bp.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let f = |x: f64| self.eval(x) * g(x);
            let est = if a == 0.0 {
                quad.integrate_from_zero(f, b)?
            } else if bp.len() == 2 {
                quad.panels(quad.initial_panels.max(8)).integrate_log(f, a, b)?
            } else {
                quad.integrate(f, a, b)?
            };
            total += est.value;
        }
        Ok(total)
    }
}

fn finite_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")))
    }
}

/// `coth(βx/2)`, equal to 1 at zero temperature.
pub fn coth_half(beta: f64, x: f64) -> f64 {
    if beta.is_infinite() {
        return 1.0;
    }
    let y = beta * x;
    if y > 40.0 {
        1.0 + 2.0 * (-y).exp()
    } else {
        1.0 / (0.5 * y).tanh()
    }
}

fn quad() -> Quad {
    Quad::with_tolerance(1e-14, 1e-12).max_intervals(20000)
}

impl SpectralModel {
    pub fn quantum(density: Density, beta_omega_m: f64) -> Self {
        Self { density, omega_m: 1.0, beta_omega_m, regime: Regime::Quantum }
    }

    pub fn classical(density: Density) -> Self {
        Self { density, omega_m: 1.0, beta_omega_m: 0.0, regime: Regime::Classical }
    }

    pub fn with_omega_m(mut self, omega_m: f64) -> Self {
        self.omega_m = omega_m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        if !(self.omega_m.is_finite() && self.omega_m > 0.0) {
            return Err(Error::Config(format!("omega_m must be positive, got {}", self.omega_m)));
        }
        match self.regime {
            Regime::Quantum if !(self.beta_omega_m > 0.0) => Err(Error::Config(format!(
                "quantum regime needs beta_omega_m in (0, inf], got {}",
                self.beta_omega_m
            ))),
            Regime::Classical if self.beta_omega_m != 0.0 => Err(Error::Config(format!(
                "classical regime needs beta_omega_m = 0, got {}",
                self.beta_omega_m
            ))),
            _ => Ok(()),
        }
    }

    pub fn eval_density(&self, x: f64) -> f64 {
        self.density.eval(x)
    }

    fn thermal(&self) -> bool {
        self.regime == Regime::Quantum && self.beta_omega_m.is_finite()
    }

    pub fn g_dis(&self) -> Result<f64> {
        self.validate()?;
        match self.regime {
            Regime::Classical => self.density.integrate(|_| 1.0, 0, &quad()),
            Regime::Quantum => {
                let b = self.beta_omega_m;
                let sp = if self.thermal() { -1 } else { 0 };
                self.density.integrate(|x| coth_half(b, x), sp, &quad())
            }
        }
    }

    /// Unnormalized moment `G·χ_n`.
    fn raw_moment(&self, n: i32) -> Result<f64> {
        let p = n - 2;
        match self.regime {
            Regime::Classical => {
                if n % 2 != 0 {
                    return Ok(0.0);
                }
                self.density.integrate(|x| x.powi(p), p, &quad())
            }
            Regime::Quantum => {
                let b = self.beta_omega_m;
                if n % 2 == 0 {
                    let sp = if self.thermal() { p - 1 } else { p };
                    self.density.integrate(|x| x.powi(p) * coth_half(b, x), sp, &quad())
                } else {
                    self.density.integrate(|x| x.powi(p), p, &quad())
                }
            }
        }
    }

    pub fn chi_moment(&self, n: i32) -> Result<f64> {
        if !(0..=4).contains(&n) {
            return Err(Error::InvalidArgument(format!("moment order must be in 0..=4, got {n}")));
        }
        let raw = self.raw_moment(n)?;
        let g = self.g_dis()?;
        if g <= 0.0 {
            return Err(Error::Config("density has zero total weight".into()));
        }
        Ok(raw / g)
    }

    pub fn coupling_constants(&self) -> Result<CouplingConstants> {
        let g = self.g_dis()?;
        if !(g > 0.0) {
            return Err(Error::Config("density has zero total weight".into()));
        }
        let mut chi = [0.0; 5];
        for (n, c) in chi.iter_mut().enumerate() {
            *c = self.raw_moment(n as i32)? / g;
        }
        Ok(CouplingConstants::from_moments(g, chi, self.omega_m, self.regime))
    }

    /// The classical model obtained by `j_cl(x) = j(x) / (βΩ_m x)`.
    pub fn classical_limit(&self) -> Result<SpectralModel> {
        self.validate()?;
        if self.regime != Regime::Quantum {
            return Err(Error::Regime("classical limit needs a quantum model".into()));
        }
        let b = self.beta_omega_m;
        if b.is_infinite() {
            return Err(Error::ZeroTemperatureClassicalLimit);
        }
        let density = match &self.density {
            Density::Reweighted { base, scale, power } => {
                let scale = scale / b;
                let power = power - 1;
                if scale == 1.0 && power == 0 {
                    (**base).clone()
                } else {
                    Density::Reweighted { base: base.clone(), scale, power }
                }
            }
            d => Density::Reweighted { base: Box::new(d.clone()), scale: 1.0 / b, power: -1 },
        };
        Ok(SpectralModel { density, omega_m: self.omega_m, beta_omega_m: 0.0, regime: Regime::Classical })
    }

    /// Bins the density into `n_modes` equal-width frequency bins and returns
    /// `(Ω_j, K_j²)` with `π Σ K_j² (·) = ∫ J(Ω) (·) dΩ` and `J(xΩ_m) = Ω_m j(x)`.
    pub fn discretize(&self, n_modes: usize) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        if n_modes == 0 {
            return Err(Error::InvalidArgument("need at least one mode".into()));
        }
        let om = self.omega_m;
        let pi = std::f64::consts::PI;
        if let Some((c, m)) = self.density.as_point_mass() {
            return Ok(vec![(c * om, om * om * m / pi)]);
        }
        let s = self.density.support();
        let q = quad();
        let mut out = Vec::with_capacity(n_modes);
        for k in 0..n_modes {
            let a = s.lo + (s.hi - s.lo) * k as f64 / n_modes as f64;
            let b = s.lo + (s.hi - s.lo) * (k + 1) as f64 / n_modes as f64;
            let mass = q.integrate(|x| self.density.eval(x), a, b)?.value;
            if mass <= 0.0 {
                continue;
            }
            let first = q.integrate(|x| x * self.density.eval(x), a, b)?.value;
            out.push((first / mass * om, om * om * mass / pi));
        }
        Ok(out)
    }

    /// Ratio of the discrete-mode coupling `Ω_m⁻² Σ K_j² coth(βΩ_j/2)` to the
    /// continuum `G_dis` for a quantum model. It is `1/π` for every density.
    pub fn discrete_continuum_ratio(&self, n_modes: usize) -> Result<f64> {
        if self.regime != Regime::Quantum {
            return Err(Error::Regime("discrete/continuum ratio is defined for quantum models".into()));
        }
        let om = self.omega_m;
        let modes = self.discretize(n_modes)?;
        let disc: f64 = modes.iter().map(|&(w, k2)| k2 * coth_half(self.beta_omega_m, w / om)).sum::<f64>() / (om * om);
        Ok(disc / self.g_dis()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub gaussian_kernel_ok: bool,
    pub exponential_dephasing_suppression_ok: bool,
    pub franck_condon_large: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConstants {
    pub regime: Regime,
    pub omega_m: f64,
    pub g_dis: f64,
    /// `χ_0 … χ_4`.
    pub chi: [f64; 5],
    pub franck_condon_f: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub validity: Validity,
    /// Set when `G_dis ≤ 1`.
    pub weak_coupling: bool,
}

impl CouplingConstants {
    pub fn from_moments(g: f64, chi: [f64; 5], omega_m: f64, regime: Regime) -> Self {
        let gamma1 = (2.0 * std::f64::consts::PI / g).sqrt() / omega_m;
        let gamma2 = match regime {
            Regime::Quantum => (2.0 * omega_m * g * chi[1]).powi(-2),
            Regime::Classical => 1.0 / (2.0 * omega_m * omega_m * g * g),
        };
        let gaussian_kernel_ok = match regime {
            Regime::Quantum => chi[3] <= 0.3 * g.sqrt(),
            Regime::Classical => chi[4] <= 0.3 * g,
        };
        let f = chi[0] * g;
        CouplingConstants {
            regime,
            omega_m,
            g_dis: g,
            chi,
            franck_condon_f: f,
            gamma1,
            gamma2,
            validity: Validity {
                gaussian_kernel_ok,
                exponential_dephasing_suppression_ok: g * chi[1] * chi[1] >= 20.0,
                franck_condon_large: f >= 10.0,
            },
            weak_coupling: g <= 1.0,
        }
    }

    /// `e^{-Gχ₁²/2}`; exactly 1 in the classical regime.
    pub fn suppression(&self) -> f64 {
        (-0.5 * self.g_dis * self.chi[1] * self.chi[1]).exp()
    }

    pub fn all_valid(&self) -> bool {
        let v = self.validity;
        v.gaussian_kernel_ok && v.franck_condon_large && !self.weak_coupling
    }

    /// Human-readable list of failed validity checks.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.weak_coupling {
            w.push(format!("weak coupling: G_dis = {} <= 1", self.g_dis));
        }
        if !self.validity.gaussian_kernel_ok {
            w.push("Gaussian kernel approximation outside its validity range".into());
        }
        if !self.validity.franck_condon_large {
            w.push(format!("Franck-Condon factor F = {} < 10", self.franck_condon_f));
        }
        w
    }
}
