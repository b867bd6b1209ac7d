use std::f64::consts::PI;

use geophase::kernel::{
    complex_rate, complex_rate_exact, complex_rate_quadrature, f_exact, half_gaussian_fourier, kernel_exact,
    kernel_gaussian, mode_overlap, rate_expansion, IParams,
};
use geophase::spectral::{Density, SpectralModel};
use geophase::{Complex64, Error};
use proptest::prelude::*;

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn laguerre(n: u64, k: u64, x: f64) -> f64 {
    let mut fact = 1.0;
    let mut sum = 0.0;
    for i in 0..=n {
        if i > 0 {
            fact *= i as f64;
        }
        sum += (-1f64).powi(i as i32) * binom(n + k, n - i) * x.powi(i as i32) / fact;
    }
    sum
}

/// `⟨m+Δm| e^{α(a − a†)} |m⟩` from the associated Laguerre closed forms.
fn exact_overlap(m: u64, alpha: f64, dm: i32) -> f64 {
    let g = (-0.5 * alpha * alpha).exp();
    match dm {
        0 => g * laguerre(m, 0, alpha * alpha),
        1 => -alpha * g * laguerre(m, 1, alpha * alpha) / ((m + 1) as f64).sqrt(),
        -1 => alpha * g * laguerre(m - 1, 1, alpha * alpha) / (m as f64).sqrt(),
        _ => unreachable!(),
    }
}

#[test]
fn f_is_anchored_at_franck_condon() {
    for model in [
        SpectralModel::quantum(Density::gaussian(1.0, 0.05, 12.0), 2.0),
        SpectralModel::classical(Density::lorentzian(1.3, 0.1, 4.0)),
    ] {
        let c = model.coupling_constants().unwrap();
        let f0 = f_exact(&model, 0.0).unwrap();
        assert!((f0.re - c.franck_condon_f).abs() < 1e-10 * c.franck_condon_f);
        assert_eq!(f0.im, 0.0);
    }
}

#[test]
fn single_mode_closed_forms() {
    let q = SpectralModel::quantum(Density::point_mass(1.0, 9.0), f64::INFINITY);
    let c = SpectralModel::classical(Density::point_mass(1.0, 9.0));
    for tau in [0.0, 0.3, 1.7, 12.0] {
        let fq = f_exact(&q, tau).unwrap();
        assert!((fq - 9.0 * Complex64::new(0.0, -tau).exp()).norm() < 1e-8);
        let fc = f_exact(&c, tau).unwrap();
        assert!((fc.re - 9.0 * tau.cos()).abs() < 1e-8);
        assert_eq!(fc.im, 0.0);
    }
}

#[test]
fn expansion_of_f_gives_coupling_and_first_moment() {
    let model = SpectralModel::quantum(Density::gaussian(1.1, 0.06, 15.0), 4.0);
    let c = model.coupling_constants().unwrap();
    let f = |t: f64| f_exact(&model, t).unwrap();
    let f0 = f(0.0);
    let d1 = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let d2 = |h: f64| (f(h) - 2.0 * f0 + f(-h)) / (h * h);
    let slope = (4.0 * d1(0.01) - d1(0.02)) / 3.0;
    let curve = (4.0 * d2(0.01) - d2(0.02)) / 3.0;
    // −2(f − F) has first derivative 2iGχ₁ and second derivative 2G.
    assert!((-2.0 * slope - Complex64::new(0.0, 2.0 * c.g_dis * c.chi[1])).norm() < 1e-6 * c.g_dis);
    assert!((-2.0 * curve.re - 2.0 * c.g_dis).abs() < 1e-6 * c.g_dis);
    assert!(curve.im.abs() < 1e-6 * c.g_dis);
}

#[test]
fn exact_kernel_at_zero_lag() {
    let model = SpectralModel::quantum(Density::gaussian(1.0, 0.05, 3.0), 5.0);
    let ff = model.coupling_constants().unwrap().franck_condon_f;
    let k = kernel_exact(&model, 0.0).unwrap();
    let e = (-2.0 * ff).exp();
    assert!((k.a_even_sym - e * ((2.0 * ff).cosh() - 1.0)).abs() < 1e-10);
    assert!((k.a_odd_sym - e * (2.0 * ff).sinh()).abs() < 1e-10);
    assert_eq!(k.a_even_asym, 0.0);
    assert_eq!(k.a_odd_asym, 0.0);
}

#[test]
fn weak_mode_odd_kernel_is_linear_in_f() {
    let ff = 0.01;
    let model = SpectralModel::quantum(Density::point_mass(1.0, ff), f64::INFINITY);
    for tau in [0.2, 1.0, 2.5, 4.0] {
        let k = kernel_exact(&model, tau).unwrap();
        let lin = 2.0 * ff * tau.cos() * (-2.0 * ff).exp();
        assert!((k.a_odd_sym - lin).abs() < 1e-4 * 2.0 * ff, "tau {tau}");
    }
}

#[test]
fn gaussian_kernel_special_values() {
    let q = SpectralModel::quantum(Density::point_mass(1.0, 25.0), f64::INFINITY).coupling_constants().unwrap();
    let k0 = kernel_gaussian(&q, 0.0);
    assert_eq!((k0.a_even_sym, k0.a_even_asym), (0.5, 0.0));
    assert_eq!((k0.a_odd_sym, k0.a_odd_asym), (0.5, 0.0));
    let k = kernel_gaussian(&q, 0.1);
    let z = 0.5 * Complex64::new(-0.25, -5.0).exp();
    assert!((k.a_even_sym - z.re).abs() < 1e-15 && (k.a_even_asym - z.im).abs() < 1e-15);
    let c = SpectralModel::classical(Density::point_mass(1.0, 25.0)).coupling_constants().unwrap();
    for tau in [0.05, 0.3, 2.0] {
        assert_eq!(kernel_gaussian(&c, tau).a_even_asym, 0.0);
    }
}

#[test]
fn gaussian_kernel_tracks_exact_kernel_at_short_lag() {
    let model = SpectralModel::quantum(Density::gaussian(1.0, 0.02, 25.0), f64::INFINITY);
    let c = model.coupling_constants().unwrap();
    let tau = 0.1;
    let ex = kernel_exact(&model, tau).unwrap();
    let ga = kernel_gaussian(&c, tau);
    let e = Complex64::new(ex.a_even_sym, ex.a_even_asym);
    let g = Complex64::new(ga.a_even_sym, ga.a_even_asym);
    assert!((e - g).norm() / g.norm() < 1e-2);
    assert!((e.norm() / g.norm() - 1.0).abs() < 1e-3);
}

#[test]
fn i_integral_real_part_against_closed_form() {
    let p = IParams { g: 9.0, chi1: 1.0, omega_m: 1.0 };
    let re0 = p.re_closed(0.0);
    assert!((re0 - 9.28e-3).abs() < 5e-5, "{re0}");
    for b in [0.0, 0.05, -0.05] {
        let full = p.full_line_real_quadrature(b).unwrap();
        let half = p.quadrature(b).unwrap();
        assert!((full / p.re_closed(b) - 1.0).abs() < 1e-4);
        assert!((full - 2.0 * half.re).abs() < 1e-10);
        assert!((half - p.closed(b)).norm() < 1e-10);
    }
}

#[test]
fn classical_i_integral() {
    let p = IParams { g: 16.0, chi1: 0.0, omega_m: 1.0 };
    assert!((p.re_closed(0.0) - PI.sqrt() / 8f64.sqrt()).abs() < 1e-15);
    assert!(p.quadrature(0.0).unwrap().im.abs() < 1e-13);
    assert_eq!(p.im_closed_classical(0.0), 0.0);
    assert!(matches!(p.im_closed(0.0), Err(Error::Pole(_))));
    // Small-b slope of the half-line integral is −1/Ω_m, not 2/(Ω_m G).
    let h = 1e-4;
    let slope = (p.quadrature(h).unwrap().im - p.quadrature(-h).unwrap().im) / (2.0 * h);
    assert!((slope + 1.0).abs() < 1e-6, "{slope}");
}

#[test]
fn large_coupling_imaginary_part() {
    for (g, chi1) in [(5.0, 1.0), (20.0, 1.0), (8.0, 1.25)] {
        let p = IParams { g, chi1, omega_m: 1.0 };
        let ratio = p.quadrature(0.0).unwrap().im / p.im_closed(0.0).unwrap();
        assert!((ratio - 1.0).abs() <= 2.0 / (g * chi1), "{g} {chi1} {ratio}");
    }
}

#[test]
fn tail_bound_is_small() {
    let p = IParams { g: 9.0, chi1: 1.0, omega_m: 1.0 };
    let (t, tail) = p.tau_max();
    assert!(t > 0.0 && tail < 1e-15);
}

#[test]
fn rate_at_zero_frequency_is_real() {
    let c = SpectralModel::quantum(Density::point_mass(1.0, 9.0), f64::INFINITY).coupling_constants().unwrap();
    let r = complex_rate(&c, 0.0);
    let p = IParams { g: 2.0 * c.g_dis, chi1: c.chi[1], omega_m: 1.0 };
    assert!(r.lambda.im.abs() < 1e-16);
    assert!((r.lambda.re - 0.5 * p.closed(0.0).re).abs() < 1e-16);
}

#[test]
fn quantum_rate_is_exponentially_small() {
    let c = SpectralModel::quantum(Density::point_mass(1.0, 25.0), f64::INFINITY).coupling_constants().unwrap();
    let r = complex_rate(&c, 0.0);
    assert!(r.lambda.re <= 0.5 * c.gamma1 * (-12.5f64).exp());
}

#[test]
fn closed_rate_matches_tau_quadrature() {
    for model in [
        SpectralModel::quantum(Density::point_mass(1.0, 9.0), f64::INFINITY),
        SpectralModel::classical(Density::point_mass(1.0, 25.0)),
    ] {
        let c = model.coupling_constants().unwrap();
        for w in [-0.3, -0.01, 0.0, 0.02, 0.5] {
            let a = complex_rate(&c, w).lambda;
            let b = complex_rate_quadrature(&c, w).unwrap().lambda;
            assert!((a - b).norm() < 1e-12, "{w}: {a} {b}");
        }
    }
}

#[test]
fn classical_rate_slope_matches_expansion() {
    let c = SpectralModel::classical(Density::point_mass(1.0, 25.0)).coupling_constants().unwrap();
    let e = rate_expansion(&c);
    let h = 1e-4;
    let slope = -(complex_rate(&c, h).lambda.im - complex_rate(&c, -h).lambda.im) / (2.0 * h);
    assert!((slope / e.phase_slope - 1.0).abs() < 1e-3);
    assert!((complex_rate(&c, 0.0).lambda.re - e.dephasing).abs() < 1e-15);
    // The kernel-consistent slope is 1/(4G), a factor G/2 above γ₂ = 1/(2G²).
    assert!((e.phase_slope / c.gamma2 - 12.5).abs() < 1e-9);
}

#[test]
fn exact_rate_is_close_to_gaussian_rate_for_a_smooth_bump() {
    let model = SpectralModel::classical(Density::LorentzianBump { center: 1.0, width: 0.1, weight: 25.0, cutoff: 5.0 });
    let c = model.coupling_constants().unwrap();
    let ex = complex_rate_exact(&model, 0.0, 200.0).unwrap().lambda;
    let ga = complex_rate(&c, 0.0).lambda;
    assert!((ex.re / ga.re - 1.0).abs() < 0.05, "{ex} {ga}");
}

#[test]
fn mode_overlap_values() {
    assert!((mode_overlap(0, 0.01, 0).unwrap() - 0.99995).abs() < 1e-15);
    assert_eq!(mode_overlap(0, 0.01, -1).unwrap(), 0.0);
    assert!((mode_overlap(3, 0.02, 1).unwrap() + 0.04).abs() < 1e-15);
    assert!(matches!(mode_overlap(-1, 0.1, 0), Err(Error::InvalidArgument(_))));
    assert!(matches!(mode_overlap(1, 0.1, 2), Err(Error::InvalidArgument(_))));
}

#[test]
fn half_gaussian_fourier_against_quadrature() {
    let q = geophase::quad::Quad::with_tolerance(1e-15, 1e-13).panels(64);
    for (a, k) in [(1.0, 0.0), (3.0, 2.5), (0.5, -4.0)] {
        let v = q.integrate(|t| Complex64::new(-a * t * t, -k * t).exp(), 0.0, 40.0).unwrap().value;
        assert!((v - half_gaussian_fourier(a, k)).norm() < 1e-13);
    }
}

proptest! {
    #[test]
    fn overlap_matches_laguerre_to_second_order(m in 0i64..20, alpha in 1e-4f64..0.02, dm in -1i32..=1) {
        prop_assume!(!(m == 0 && dm == -1));
        let approx = mode_overlap(m, alpha, dm).unwrap();
        let exact = exact_overlap(m as u64, alpha, dm);
        let scale = ((m + 2) as f64).powi(2);
        prop_assert!((approx - exact).abs() <= scale * alpha.powi(3), "{} {}", approx, exact);
    }

    #[test]
    fn gaussian_symmetric_kernels_coincide(g in 1.0f64..80.0, chi1 in 0.0f64..1.5, tau in 0.0f64..3.0) {
        let c = geophase::spectral::CouplingConstants::from_moments(g, [1.0, chi1, 1.0, chi1, 1.0], 1.0, geophase::spectral::Regime::Quantum);
        let k = kernel_gaussian(&c, tau);
        prop_assert_eq!(k.a_even_sym, k.a_odd_sym);
        prop_assert!(k.a_even_sym.abs() <= 0.5 * (-g * tau * tau).exp() + 1e-300);
    }
}
