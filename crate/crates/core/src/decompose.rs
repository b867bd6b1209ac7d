//! Scaling regressions over loop periods and the labelled phase and
//! dephasing decomposition built from them.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::wrap_angle;
use crate::geometry::LoopShape;

/// Powers of `t_p` in the regression basis.
pub const EXPONENTS: [i32; 4] = [1, 0, -1, -2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Term {
    pub exponent: i32,
    pub value: f64,
    /// `None` when the fit has no residual degrees of freedom.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub coefficients: Vec<Term>,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Condition number of the column-equilibrated design matrix.
    pub condition_number: f64,
    pub tp_grid: Vec<f64>,
}

impl ScalingFit {
    pub fn term(&self, exponent: i32) -> Term {
        *self.coefficients.iter().find(|t| t.exponent == exponent).expect("exponent is part of the basis")
    }

    pub fn coef(&self, exponent: i32) -> f64 {
        self.term(exponent).value
    }

    pub fn stderr(&self, exponent: i32) -> f64 {
        self.term(exponent).stderr.unwrap_or(f64::NAN)
    }

    pub fn predict(&self, t_p: f64) -> f64 {
        self.coefficients.iter().map(|t| t.value * t_p.powi(t.exponent)).sum()
    }
}

struct LeastSquares {
    beta: Vec<f64>,
    stderr: Option<Vec<f64>>,
    rms: f64,
    cond: f64,
}

/// Column-equilibrated least squares through the SVD.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let (n, p) = x.shape();
    let scale: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument("design matrix has a degenerate column".into()));
    }
    let mut xs = x.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = xs.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > smax * 1e-14) {
        return Err(Error::InvalidArgument("design matrix is rank deficient".into()));
    }
    let bs = svd.solve(y, 0.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let resid = y - &xs * &bs;
    let rss = resid.norm_squared();
    let beta: Vec<f64> = (0..p).map(|j| bs[j] / scale[j]).collect();
    let stderr = (n > p).then(|| {
        let sigma2 = rss / (n - p) as f64;
        let v = svd.v_t.as_ref().expect("V requested").transpose();
        (0..p)
            .map(|j| {
                let var: f64 = (0..p).map(|k| (v[(j, k)] / sv[k]).powi(2)).sum::<f64>() * sigma2;
                var.sqrt() / scale[j]
            })
            .collect()
    });
    Ok(LeastSquares { beta, stderr, rms: (rss / n as f64).sqrt(), cond: smax / smin })
}

/// Least-squares fit of `y(t_p)` in the basis `{t_p, 1, t_p⁻¹, t_p⁻²}`.
pub fn fit_scaling(values: &[(f64, f64)]) -> Result<ScalingFit> {
    let p = EXPONENTS.len();
    let mut grid: Vec<f64> = values.iter().map(|v| v.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if values.len() < p || grid.len() < p {
        return Err(Error::Underdetermined { points: grid.len().min(values.len()), params: p });
    }
    if values.iter().any(|&(t, y)| !(t > 0.0 && t.is_finite() && y.is_finite())) {
        return Err(Error::InvalidArgument("fit needs positive finite t_p and finite values".into()));
    }
    let x = DMatrix::from_fn(values.len(), p, |i, j| values[i].0.powi(EXPONENTS[j]));
    let y = DVector::from_iterator(values.len(), values.iter().map(|v| v.1));
    let ls = least_squares(&x, &y)?;
    let coefficients = EXPONENTS
        .iter()
        .enumerate()
        .map(|(j, &e)| Term { exponent: e, value: ls.beta[j], stderr: ls.stderr.as_ref().map(|s| s[j]) })
        .collect();
    Ok(ScalingFit { coefficients, residual: ls.rms, condition_number: ls.cond, tp_grid: grid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub prefactor: f64,
}

/// Fit of `|y| = c·t_p^k` on log-log axes.
pub fn fit_power_law(values: &[(f64, f64)]) -> Result<PowerLaw> {
    if values.len() < 3 {
        return Err(Error::Underdetermined { points: values.len(), params: 2 });
    }
    let sign = values[0].1.signum();
    if values.iter().any(|&(t, y)| !(t > 0.0) || y == 0.0 || y.signum() != sign || !y.is_finite()) {
        return Err(Error::InvalidArgument("power-law fit needs same-signed nonzero values".into()));
    }
    let x = DMatrix::from_fn(values.len(), 2, |i, j| if j == 0 { values[i].0.ln() } else { 1.0 });
    let y = DVector::from_iterator(values.len(), values.iter().map(|v| v.1.abs().ln()));
    let ls = least_squares(&x, &y)?;
    Ok(PowerLaw {
        exponent: ls.beta[0],
        exponent_stderr: ls.stderr.map(|s| s[0]).unwrap_or(f64::NAN),
        prefactor: sign * ls.beta[1].exp(),
    })
}

/// `t_p` values spaced geometrically over `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| if k + 1 == n { hi } else { lo * (r * k as f64).exp() }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Labeled {
    pub value: f64,
    pub stderr: f64,
}

impl Labeled {
    fn of(fit: &ScalingFit, e: i32) -> Self {
        Labeled { value: fit.coef(e), stderr: fit.stderr(e) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseDecomposition {
    /// Coefficient of `t_p`: dynamic phase per unit period.
    pub dynamic_density: Labeled,
    pub berry: Labeled,
    pub non_adiabatic_1: Labeled,
    pub non_adiabatic_2: Labeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DephasingDecomposition {
    pub dynamic_density: Labeled,
    pub berry: Labeled,
    pub non_adiabatic_1: Labeled,
    /// Coefficient of `t_p⁻²`, outside the labelled terms.
    pub higher_order: Labeled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub allowed: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub phase: PhaseDecomposition,
    pub dephasing: DephasingDecomposition,
    pub phase_fit: ScalingFit,
    pub dephasing_fit: ScalingFit,
    pub checks: Vec<Check>,
    /// Set for families with a lab field, whose `t_p⁰` phase may carry
    /// field-dependent corrections.
    pub field_present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    /// Multiple of the fit standard error accepted for vanishing terms.
    pub sigmas: f64,
    /// Absolute floor added to every allowance (numerical noise of the runs).
    pub floor: f64,
    /// Solid angle of the loop, if the Berry term should be checked.
    pub solid_angle: Option<f64>,
    pub field_present: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self { sigmas: 2.0, floor: 1e-12, solid_angle: None, field_present: false }
    }
}

pub fn decompose_phases(phase_fit: &ScalingFit, dephasing_fit: &ScalingFit, opts: &DecomposeOptions) -> Decomposition {
    let phase = PhaseDecomposition {
        dynamic_density: Labeled::of(phase_fit, 1),
        berry: Labeled::of(phase_fit, 0),
        non_adiabatic_1: Labeled::of(phase_fit, -1),
        non_adiabatic_2: Labeled::of(phase_fit, -2),
    };
    let dephasing = DephasingDecomposition {
        dynamic_density: Labeled::of(dephasing_fit, 1),
        berry: Labeled::of(dephasing_fit, 0),
        non_adiabatic_1: Labeled::of(dephasing_fit, -1),
        higher_order: Labeled::of(dephasing_fit, -2),
    };
    let mut checks = Vec::new();
    let mut zero = |name: &str, l: Labeled| {
        let allowed = opts.sigmas * if l.stderr.is_finite() { l.stderr } else { 0.0 } + opts.floor;
        checks.push(Check { name: name.into(), value: l.value, allowed, passed: l.value.abs() <= allowed });
    };
    if !opts.field_present {
        zero("phase_dynamic_zero", phase.dynamic_density);
        zero("phase_non_adiabatic_1_zero", phase.non_adiabatic_1);
        zero("dephasing_dynamic_zero", dephasing.dynamic_density);
        zero("dephasing_berry_zero", dephasing.berry);
    }
    if let Some(a) = opts.solid_angle {
        // The geometric phase accumulates as ∫ω_z dt = −𝒜.
        zero("berry_equals_solid_angle", Labeled { value: wrap_angle(phase.berry.value + a), ..phase.berry });
    }
    Decomposition {
        phase,
        dephasing,
        phase_fit: phase_fit.clone(),
        dephasing_fit: dephasing_fit.clone(),
        checks,
        field_present: opts.field_present,
    }
}

/// One run of a family: loop shape and field are shared, `t_p` varies.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub shape: LoopShape,
    pub b_lab: [f64; 3],
    pub t_p: f64,
    pub phi_total: f64,
    pub d_total: f64,
}

/// Fits and decomposes a family after checking it shares one loop shape and field.
pub fn decompose_family(members: &[FamilyMember], opts: &DecomposeOptions) -> Result<Decomposition> {
    let first = members.first().ok_or(Error::Underdetermined { points: 0, params: EXPONENTS.len() })?;
    for m in members {
        if m.shape != first.shape {
            return Err(Error::FamilyMismatch("loop shapes differ across the family".into()));
        }
        if m.b_lab != first.b_lab {
            return Err(Error::FamilyMismatch("lab fields differ across the family".into()));
        }
    }
    let phi: Vec<(f64, f64)> = members.iter().map(|m| (m.t_p, m.phi_total)).collect();
    let d: Vec<(f64, f64)> = members.iter().map(|m| (m.t_p, m.d_total)).collect();
    let opts = DecomposeOptions { field_present: opts.field_present || first.b_lab.iter().any(|&b| b != 0.0), ..*opts };
    Ok(decompose_phases(&fit_scaling(&phi)?, &fit_scaling(&d)?, &opts))
}
