//! Gamma-function helpers for the tail antiderivatives: the surface area of
//! the unit sphere and the upper incomplete gamma function
//! `Γ(a, x) = ∫_x^∞ t^(a-1) e^(-t) dt`, which closes the integrals
//! `∫_R^∞ ρ^(c-1) (ln ρ)^κ dρ` of log-corrected power tails.

/// Surface area of the unit sphere `S^(n-1)` in `R^n`, by the recursion
/// `ω(n) = 2π/(n-2) · ω(n-2)` with `ω(1) = 2`, `ω(2) = 2π`.
pub fn sphere_surface_area(n: u32) -> f64 {
    assert!(n >= 1, "dimension must be at least 1");
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    let mut omega = if n % 2 == 1 {
        2.0
    } else {
        2.0 * std::f64::consts::PI
    };
    while k < n {
        omega *= 2.0 * std::f64::consts::PI / f64::from(k);
        k += 2;
    }
    omega
}

/// Lanczos approximation of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    // g = 7, n = 9 coefficients (Godfrey's table); ~1e-14 relative accuracy.
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx).
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Upper incomplete gamma `Γ(a, x)` for `a > 0`, `x >= 0`.
///
/// Series for the lower function when `x < a + 1`, Lentz continued fraction
/// for the upper function otherwise.
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "invalid arguments a = {a}, x = {x}");
    let ln_g = ln_gamma(a);
    if x == 0.0 {
        return ln_g.exp();
    }
    if x < a + 1.0 {
        // Γ(a,x) = Γ(a) (1 - P(a,x)) with the series for P.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut k = a;
        for _ in 0..500 {
            k += 1.0;
            term *= x / k;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        let p = sum * (-x + a * x.ln() - ln_g).exp();
        ln_g.exp() * (1.0 - p)
    } else {
        // Modified Lentz evaluation of the continued fraction for Γ(a,x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + a * x.ln()).exp() * h
    }
}

/// `∫_R^∞ ρ^(c-1) (ln ρ)^κ dρ` for `c < 0`, `κ >= 0`, `R > 1`.
///
/// Substituting `τ = ln ρ` gives `∫_(ln R)^∞ e^(cτ) τ^κ dτ
/// = Γ(κ+1, -c ln R) / (-c)^(κ+1)`.
pub fn log_power_tail_integral(c: f64, kappa: f64, radius: f64) -> f64 {
    assert!(c < 0.0, "tail integral requires a decaying power, got c = {c}");
    assert!(kappa >= 0.0, "log power must be nonnegative, got {kappa}");
    let rate = -c;
    if kappa == 0.0 {
        return (c * radius.ln()).exp() / rate;
    }
    assert!(radius > 1.0, "log-corrected tail integral requires R > 1, got {radius}");
    upper_incomplete_gamma(kappa + 1.0, rate * radius.ln())
        / (rate.ln() * (kappa + 1.0)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas_match_closed_forms() {
        let pi = std::f64::consts::PI;
        assert!((sphere_surface_area(2) - 2.0 * pi).abs() < 1e-14);
        assert!((sphere_surface_area(3) - 4.0 * pi).abs() < 1e-14);
        assert!((sphere_surface_area(4) - 2.0 * pi * pi).abs() < 1e-13);
        assert!((sphere_surface_area(5) - 8.0 * pi * pi / 3.0).abs() < 1e-13);
        assert!((sphere_surface_area(6) - pi * pi * pi).abs() < 1e-13);
    }

    #[test]
    fn ln_gamma_on_integers_and_halves() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-13);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((ln_gamma(0.5) - sqrt_pi.ln()).abs() < 1e-13);
        assert!((ln_gamma(2.5) - (0.75 * sqrt_pi).ln()).abs() < 1e-13);
    }

    #[test]
    fn incomplete_gamma_matches_elementary_cases() {
        // Γ(1, x) = e^(-x).
        for x in [0.1, 1.0, 5.0, 30.0] {
            let got = upper_incomplete_gamma(1.0, x);
            assert!(
                (got - (-x).exp()).abs() < 1e-15 * (1.0 + got),
                "x = {x}: {got}"
            );
        }
        // Γ(2, x) = (x + 1) e^(-x).
        for x in [0.5, 2.0, 10.0] {
            let got = upper_incomplete_gamma(2.0, x);
            let want = (x + 1.0) * (-x).exp();
            assert!((got - want).abs() < 1e-14 * want.max(1.0), "x = {x}");
        }
        // Γ(3, x) = (x^2 + 2x + 2) e^(-x).
        let got = upper_incomplete_gamma(3.0, 4.0);
        let want = (16.0 + 8.0 + 2.0) * (-4.0f64).exp();
        assert!((got - want).abs() < 1e-13 * want);
    }

    #[test]
    fn tail_integral_matches_hand_antiderivatives() {
        // ∫_R^∞ ρ^(-3) dρ = R^(-2)/2 (c = -2, κ = 0).
        let got = log_power_tail_integral(-2.0, 0.0, 10.0);
        assert!((got - 0.005).abs() < 1e-17);

        // ∫_R^∞ ρ^(-3) ln ρ dρ = R^(-2)(ln R / 2 + 1/4).
        let r: f64 = 25.0;
        let got = log_power_tail_integral(-2.0, 1.0, r);
        let want = r.powi(-2) * (r.ln() / 2.0 + 0.25);
        assert!((got - want).abs() < 1e-14 * want, "got {got}, want {want}");

        // ∫_R^∞ ρ^(-2) (ln ρ)^2 dρ = R^(-1)((ln R)^2 + 2 ln R + 2).
        let r: f64 = 100.0;
        let got = log_power_tail_integral(-1.0, 2.0, r);
        let want = ((r.ln()).powi(2) + 2.0 * r.ln() + 2.0) / r;
        assert!((got - want).abs() < 1e-13 * want, "got {got}, want {want}");
    }

    #[test]
    fn tail_integral_handles_fractional_log_powers() {
        // Cross-check a fractional κ against midpoint quadrature in τ = ln ρ.
        let (c, kappa, radius) = (-1.5, 10.0 / 7.0, 20.0);
        let got = log_power_tail_integral(c, kappa, radius);
        let tau0 = radius.ln();
        let mut sum = 0.0;
        let h = 1e-4;
        for i in 0..2_000_000 {
            let tau = tau0 + (i as f64 + 0.5) * h;
            sum += (c * tau).exp() * tau.powf(kappa) * h;
        }
        assert!(
            (got - sum).abs() < 1e-8 * sum,
            "closed form {got} vs quadrature {sum}"
        );
    }
}
