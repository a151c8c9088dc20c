//! Momentum-space evaluation of the flat-space single-boson kernel.
//!
//! `R(E; d) = 1/(4π²d) ∫₀^∞ k sin(kd) / (ω(ω − E)) dk` with `ω = √(k² + m²)`.
//! The slowly decaying part of the integrand is removed by expanding
//! `1/(ω − E) = Σ Eⁿ/ωⁿ⁺¹` to third order; each of those sine transforms has a
//! closed form in Bessel functions, and the remainder decays like `k⁻⁵`.

use std::f64::consts::PI;

use super::rules::GaussLegendre;
use super::special::{bessel_k0, bessel_k1};
use crate::error::{domain, Result};

pub fn flat_resolvent_oracle(e: f64, d: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(domain(format!("mass must be positive, got {m}")));
    }
    if !(e.abs() < m) {
        return Err(domain(format!("energy {e} outside (-m, m) for m = {m}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(domain(format!("oracle needs a positive separation, got {d}")));
    }
    let md = m * d;
    let decay = (-md).exp();
    let s0 = 0.5 * PI * decay;
    let s1 = d * bessel_k0(md);
    let s2 = PI * d / (4.0 * m) * decay;
    let s3 = d * d * bessel_k1(md) / (3.0 * m);
    let closed = s0 + e * (s1 + e * (s2 + e * s3));

    let e4 = e.powi(4);
    let remainder = |k: f64| {
        let w = (k * k + m * m).sqrt();
        e4 * k / (w.powi(5) * (w - e)) * (k * d).sin()
    };
    // Below d = 0.1/m the remainder no longer oscillates before the cutoff and
    // its tail beyond k_max is at most E⁴/(3 k_max³).
    let k_max = 1000.0 * m.max((1.0 / d).min(10.0 * m));
    let width = (PI / d).min(m);
    let panels = (k_max / width).ceil() as usize;
    let rule = GaussLegendre::cached(16);
    let tail: f64 = (0..panels)
        .map(|p| {
            let a = p as f64 * width;
            rule.integrate(a, a + width, remainder)
        })
        .sum();
    Ok((closed + tail) / (4.0 * PI * PI * d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yukawa_limit() {
        let r = flat_resolvent_oracle(0.0, 1.0, 1.0).unwrap();
        let want = (-1.0f64).exp() / (8.0 * PI);
        assert!(((r - want) / want).abs() < 1e-13);
        assert!((r - 0.014_637_457_881_079_8).abs() < 1e-15);
        let r = flat_resolvent_oracle(0.0, 3.0, 1.0).unwrap();
        let want = (-3.0f64).exp() / (24.0 * PI);
        assert!(((r - want) / want).abs() < 1e-13);
        assert!((r - 6.603_215_027_333_07e-4).abs() < 1e-16);
    }

    #[test]
    fn matches_high_precision_reference() {
        // mpmath quadosc of the defining integral, 25 digits
        let r = flat_resolvent_oracle(0.5, 1.0, 1.0).unwrap();
        let want = 0.022_805_525_103_057_111;
        assert!(((r - want) / want).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(flat_resolvent_oracle(0.0, 0.0, 1.0).is_err());
        assert!(flat_resolvent_oracle(1.0, 1.0, 1.0).is_err());
        assert!(flat_resolvent_oracle(0.0, 1.0, -1.0).is_err());
    }
}
