//! Log-domain modified Bessel functions of the first kind, used for the
//! von Mises-Fisher normalizing constant.
//!
//! Two regimes: the ascending power series for small argument and the
//! large-argument asymptotic expansion evaluated in scaled form. The
//! switchover is validated against a Monte Carlo normalization check in the
//! geometry tests.

use std::f64::consts::PI;

/// Arguments below this use the power series, above it the asymptotic form.
const SERIES_CUTOFF: f64 = 50.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments (Lanczos).
pub fn ln_gamma(z: f64) -> f64 {
    debug_assert!(z > 0.0, "ln_gamma needs z > 0, got {z}");
    if z < 0.5 {
        // reflection: Γ(z)Γ(1−z) = π / sin(πz)
        return PI.ln() - (PI * z).sin().ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// ln I_nu(x) for x > 0 and nu >= -1/2.
pub fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    debug_assert!(nu >= -0.5);
    if x < SERIES_CUTOFF {
        ln_bessel_i_series(nu, x)
    } else {
        ln_bessel_i_asymptotic(nu, x)
    }
}

/// Ascending series: I_nu(x) = sum_m (x/2)^(2m+nu) / (m! Gamma(m+nu+1)).
///
/// Terms are built recursively so only the leading term needs the gamma
/// function. Safe from overflow for x below the cutoff.
fn ln_bessel_i_series(nu: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let ln_t0 = nu * half.ln() - ln_gamma(nu + 1.0);
    let ratio_base = half * half;
    let mut term = 1.0_f64; // relative to t0
    let mut sum = term;
    let mut m = 1.0_f64;
    loop {
        term *= ratio_base / (m * (m + nu));
        sum += term;
        if term < sum * f64::EPSILON {
            break;
        }
        m += 1.0;
        debug_assert!(m < 10_000.0, "bessel series failed to converge");
    }
    ln_t0 + sum.ln()
}

/// Large-argument expansion: I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k a_k, with
/// a_0 = 1 and a_k = -a_(k-1) (mu - (2k-1)^2) / (8 k x), mu = 4 nu^2.
/// Truncated at the smallest term, as usual for asymptotic series.
fn ln_bessel_i_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut prev_abs = f64::INFINITY;
    for k in 1..=40u32 {
        let kf = f64::from(k);
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (8.0 * kf * x);
        if term.abs() >= prev_abs {
            break; // divergent tail reached
        }
        prev_abs = term.abs();
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// ln of the vMF normalizer C_d(kappa) so that the density on the unit
/// sphere in R^d is exp(kappa <mean, x> + ln C_d(kappa)).
///
/// C_d(k) = k^(d/2-1) / ((2 pi)^(d/2) I_(d/2-1)(k)); kappa = 0 reduces to
/// the inverse surface area of the sphere.
pub fn ln_vmf_normalizer(d: usize, kappa: f64) -> f64 {
    debug_assert!(d >= 1);
    debug_assert!(kappa >= 0.0);
    let df = d as f64;
    if kappa < 1e-300 {
        // -ln area(S^{d-1}), area = 2 pi^(d/2) / Gamma(d/2)
        return ln_gamma(0.5 * df) - (2.0_f64).ln() - 0.5 * df * PI.ln();
    }
    let nu = 0.5 * df - 1.0;
    nu * kappa.ln() - 0.5 * df * (2.0 * PI).ln() - ln_bessel_i(nu, kappa)
}

/// Mean resultant length A_d(kappa) = I_(d/2)(kappa) / I_(d/2-1)(kappa):
/// the expected cosine between a vMF draw and its mean direction.
pub fn mean_resultant_length(d: usize, kappa: f64) -> f64 {
    debug_assert!(d >= 2);
    if kappa <= 0.0 {
        return 0.0;
    }
    let nu = 0.5 * d as f64 - 1.0;
    (ln_bessel_i(nu + 1.0, kappa) - ln_bessel_i(nu, kappa)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(5.0), 24.0_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(0.5), PI.ln() * 0.5, epsilon = 1e-12);
        // Gamma(3/2) = sqrt(pi)/2
        assert_relative_eq!(ln_gamma(1.5), (PI.sqrt() / 2.0).ln(), epsilon = 1e-12);
    }

    #[test]
    fn bessel_integer_order_reference_values() {
        // Reference values for I_0 and I_1 (Abramowitz & Stegun tables).
        assert_relative_eq!(
            ln_bessel_i(0.0, 1.0).exp(),
            1.266_065_877_752_008_4,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            ln_bessel_i(0.0, 10.0).exp(),
            2_815.716_628_466_254,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            ln_bessel_i(1.0, 10.0).exp(),
            2_670.988_303_701_254,
            max_relative = 1e-12
        );
    }

    // Half-integer orders have closed forms, giving an oracle independent of
    // both evaluation branches. Evaluated in log space to survive large x.
    fn ln_i_half_closed(x: f64) -> f64 {
        // ln sinh(x) = x - ln 2 + ln(1 - e^(-2x))
        let ln_sinh = if x > 20.0 {
            x - (2.0_f64).ln() + (-(-2.0 * x).exp()).ln_1p()
        } else {
            x.sinh().ln()
        };
        0.5 * (2.0 / (PI * x)).ln() + ln_sinh
    }

    fn ln_i_three_half_closed(x: f64) -> f64 {
        // cosh(x) - sinh(x)/x = e^x/2 [(1 - 1/x) + e^(-2x) (1 + 1/x)]
        let ln_body = if x > 20.0 {
            x - (2.0_f64).ln() + ((1.0 - 1.0 / x) + (-2.0 * x).exp() * (1.0 + 1.0 / x)).ln()
        } else {
            (x.cosh() - x.sinh() / x).ln()
        };
        0.5 * (2.0 / (PI * x)).ln() + ln_body
    }

    #[test]
    fn bessel_half_integer_series_branch() {
        for &x in &[0.1, 1.0, 2.0, 10.0, 49.0] {
            assert_relative_eq!(
                ln_bessel_i(0.5, x),
                ln_i_half_closed(x),
                max_relative = 1e-11
            );
            assert_relative_eq!(
                ln_bessel_i(1.5, x),
                ln_i_three_half_closed(x),
                max_relative = 1e-11
            );
        }
    }

    #[test]
    fn bessel_half_integer_asymptotic_branch() {
        for &x in &[50.5, 80.0, 200.0, 1e4, 1e6] {
            assert_relative_eq!(
                ln_bessel_i(0.5, x),
                ln_i_half_closed(x),
                max_relative = 1e-10
            );
            assert_relative_eq!(
                ln_bessel_i(1.5, x),
                ln_i_three_half_closed(x),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn branches_agree_at_cutoff() {
        for nu in [0.0, 0.5, 1.0, 3.0, 7.0] {
            let series = ln_bessel_i_series(nu, SERIES_CUTOFF);
            let asymptotic = ln_bessel_i_asymptotic(nu, SERIES_CUTOFF);
            assert_relative_eq!(series, asymptotic, max_relative = 1e-6);
        }
    }

    #[test]
    fn normalizer_uniform_limits() {
        // kappa = 0 on S^2: density 1/(4 pi)
        assert_relative_eq!(
            ln_vmf_normalizer(3, 0.0),
            (1.0 / (4.0 * PI)).ln(),
            epsilon = 1e-12
        );
        // kappa = 0 on S^1: density 1/(2 pi)
        assert_relative_eq!(
            ln_vmf_normalizer(2, 0.0),
            (1.0 / (2.0 * PI)).ln(),
            epsilon = 1e-12
        );
        // kappa -> 0 is continuous
        assert_relative_eq!(
            ln_vmf_normalizer(5, 1e-9),
            ln_vmf_normalizer(5, 0.0),
            epsilon = 1e-6
        );
    }

    #[test]
    fn mean_resultant_length_langevin() {
        // d = 3 has the closed form coth(k) - 1/k.
        for &k in &[0.5_f64, 2.0, 10.0, 60.0] {
            let langevin = 1.0 / k.tanh() - 1.0 / k;
            assert_relative_eq!(mean_resultant_length(3, k), langevin, max_relative = 1e-9);
        }
        assert_relative_eq!(
            mean_resultant_length(3, 2.0),
            0.537_314_720_727_548_2,
            epsilon = 1e-12
        );
    }
}
