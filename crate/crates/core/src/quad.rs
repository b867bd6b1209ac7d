//! Adaptive Gauss–Kronrod quadrature (21-point rule) for real and complex
//! integrands, with a logarithmic substitution for positive half-lines.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208932709238,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss 10-point weights, paired with the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Values the integrator can accumulate.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn is_finite_value(&self) -> bool;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Number of equal panels the interval is cut into before adapting.
    pub initial_panels: usize,
}

impl Default for Quad {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-8, max_intervals: 4000, initial_panels: 1 }
    }
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<T: Integrand, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    for i in 0..10 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kron = kron + pair * WGK[i];
        if i % 2 == 1 {
            gauss = gauss + pair * WG[i / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).magnitude())
}

impl Quad {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn panels(mut self, n: usize) -> Self {
        self.initial_panels = n.max(1);
        self
    }

    pub fn max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }

    /// Integrates `f` over the finite interval `[a, b]`.
    pub fn integrate<T: Integrand, F: FnMut(f64) -> T>(&self, mut f: F, a: f64, b: f64) -> Result<Estimate<T>> {
        if a == b {
            return Ok(Estimate { value: T::zero(), error: 0.0, evaluations: 0 });
        }
        let n0 = self.initial_panels.max(1);
        let mut heap = BinaryHeap::with_capacity(self.max_intervals + n0);
        let mut total = T::zero();
        let mut err = 0.0;
        for k in 0..n0 {
            let lo = a + (b - a) * k as f64 / n0 as f64;
            let hi = if k + 1 == n0 { b } else { a + (b - a) * (k + 1) as f64 / n0 as f64 };
            let (v, e) = gk21(&mut f, lo, hi);
            total = total + v;
            err += e;
            heap.push(Panel { a: lo, b: hi, value: v, error: e });
        }
        let mut evaluations = 21 * n0;
        while err > self.abs_tol.max(self.rel_tol * total.magnitude()) {
            if !total.is_finite_value() || heap.len() >= self.max_intervals {
                return Err(Error::Quadrature { a, b, value: total.magnitude(), error: err });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                return Err(Error::Quadrature { a, b, value: total.magnitude(), error: err });
            }
            let (v1, e1) = gk21(&mut f, worst.a, mid);
            let (v2, e2) = gk21(&mut f, mid, worst.b);
            evaluations += 42;
            total = total - worst.value + v1 + v2;
            err += e1 + e2 - worst.error;
            heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        }
        // Re-sum to shed the drift of incremental updates.
        let mut value = T::zero();
        let mut error = 0.0;
        for p in heap.iter() {
            value = value + p.value;
            error += p.error;
        }
        Ok(Estimate { value, error, evaluations })
    }

    /// Integrates over `[lo, hi]` with `0 < lo < hi` using `x = e^u`.
    pub fn integrate_log<T: Integrand, F: FnMut(f64) -> T>(&self, mut f: F, lo: f64, hi: f64) -> Result<Estimate<T>> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!("log substitution needs 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        self.integrate(
            |u| {
                let x = u.exp();
                f(x) * x
            },
            lo.ln(),
            hi.ln(),
        )
    }

    /// Integrates over `[0, hi]`: a direct panel near the origin and the
    /// logarithmic map above `hi·1e-6`.
    pub fn integrate_from_zero<T: Integrand, F: FnMut(f64) -> T>(&self, mut f: F, hi: f64) -> Result<Estimate<T>> {
        let split = hi * 1e-6;
        let near = Quad { initial_panels: 1, ..*self }.integrate(&mut f, 0.0, split)?;
        let far = self.integrate_log(&mut f, split, hi)?;
        Ok(Estimate { value: near.value + far.value, error: near.error + far.error, evaluations: near.evaluations + far.evaluations })
    }
}
