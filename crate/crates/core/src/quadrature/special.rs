//! Special functions: scaled complementary error function and modified
//! Bessel functions of the second kind.

use std::f64::consts::PI;
use std::sync::OnceLock;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Number of Taylor terms used by [`erfcx_neg_diff`].
const SERIES_TERMS: usize = 48;

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Overflows to `+inf` for `x < -26.6`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 3.0 {
        if x < -26.6 {
            return f64::INFINITY;
        }
        return (x * x).exp() * libm::erfc(x);
    }
    // Continued fraction erfcx(x) = 1/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))),
    // evaluated from the tail.
    let depth = if x < 6.0 { 120 } else { 40 };
    let mut tail = x;
    for k in (1..=depth).rev() {
        tail = x + 0.5 * k as f64 / tail;
    }
    FRAC_1_SQRT_PI / tail
}

fn inv_gamma_half_table() -> &'static [f64; SERIES_TERMS] {
    static TABLE: OnceLock<[f64; SERIES_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // c_n = 1/Γ(n/2 + 1)
        let mut c = [0.0; SERIES_TERMS];
        c[0] = 1.0;
        c[1] = 2.0 * FRAC_1_SQRT_PI;
        for n in 2..SERIES_TERMS {
            c[n] = c[n - 2] / (0.5 * n as f64);
        }
        c
    })
}

/// `erfcx(-a) - erfcx(-b)` without cancellation when `a ≈ b` or both are small.
///
/// Uses `erfcx(-x) = Σ xⁿ/Γ(n/2+1)` for `|a|, |b| ≤ 1` and direct
/// subtraction otherwise.
pub fn erfcx_neg_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a.abs() > 1.0 || b.abs() > 1.0 {
        return erfcx(-a) - erfcx(-b);
    }
    let c = inv_gamma_half_table();
    let diff = a - b;
    // d_n = aⁿ - bⁿ, d_{n+1} = a·d_n + bⁿ·(a - b)
    let mut d = diff;
    let mut b_pow = b;
    let mut sum = c[1] * d;
    for cn in c.iter().skip(2) {
        d = a * d + b_pow * diff;
        b_pow *= b;
        let term = cn * d;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Exponentially scaled modified Bessel function `e^z K_ν(z)` for real ν and z > 0.
///
/// Trapezoidal rule on `∫₀^∞ exp(-z (cosh t - 1)) cosh(νt) dt`; the integrand is
/// entire and decays doubly exponentially, so the rule converges geometrically
/// in the inverse step.
pub fn bessel_k_scaled(nu: f64, z: f64) -> f64 {
    assert!(z > 0.0, "bessel_k_scaled requires z > 0");
    let h = 0.05;
    let mut sum = 0.5;
    let mut k = 1usize;
    loop {
        let t = h * k as f64;
        let term = (-z * (t.cosh() - 1.0) + nu * t).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        sum += term;
        if term < 1e-18 * sum && z * (t.cosh() - 1.0) > 8.0 {
            break;
        }
        k += 1;
        if k > 100_000 {
            break;
        }
    }
    h * sum
}

/// Modified Bessel function of the second kind `K_ν(z)`.
pub fn bessel_k(nu: f64, z: f64) -> f64 {
    (-z).exp() * bessel_k_scaled(nu, z)
}

pub fn bessel_k0(z: f64) -> f64 {
    bessel_k(0.0, z)
}

pub fn bessel_k1(z: f64) -> f64 {
    bessel_k(1.0, z)
}

/// `K₀` by its ascending series, accurate for `z ≲ 2`; used as an independent check.
pub fn bessel_k0_series(z: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
    }
    -((0.5 * z).ln() + EULER_GAMMA) * i0 + tail
}

/// `Γ(ν)/2 · (2/z)^ν`, the small-argument leading behaviour of `K_ν`.
pub fn bessel_k_small_leading(nu: f64, z: f64) -> f64 {
    debug_assert!(nu > 0.0);
    0.5 * libm::tgamma(nu) * (2.0 / z).powf(nu)
}

/// `2/√π`, handy when differentiating `erfc`.
pub const TWO_OVER_SQRT_PI: f64 = 2.0 * FRAC_1_SQRT_PI;

/// `1/√π`.
pub const ONE_OVER_SQRT_PI: f64 = FRAC_1_SQRT_PI;

/// `(4π)^{-3/2}`.
pub fn four_pi_pow_m32() -> f64 {
    (4.0 * PI).powf(-1.5)
}
