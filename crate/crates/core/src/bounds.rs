//! Closed-form estimates: near-diagonal envelope, uniform diagonal lower
//! bound, off-diagonal upper bound and the Geršgorin energy threshold `E*`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::curves::CurveFamily;
use crate::error::{domain, Result};
use crate::manifold::ManifoldSpec;

/// Heat-kernel bound constants.
///
/// The Gaussian kernel of flat space saturates the generic bounds with
/// `A = 1/2`, `B = C = D = 1` and no volume term. The torus and hyperbolic
/// defaults reuse these values with `F = 1`; they are not sharp there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub f: f64,
    /// Manifold volume; `None` for noncompact manifolds.
    pub volume: Option<f64>,
}

impl BoundConstants {
    pub fn euclidean() -> Self {
        Self {
            a: 0.5,
            b: 1.0,
            c: 1.0,
            d: 1.0,
            f: 0.0,
            volume: None,
        }
    }

    pub fn for_manifold(manifold: &ManifoldSpec) -> Self {
        match manifold {
            ManifoldSpec::Euclidean3 => Self::euclidean(),
            ManifoldSpec::FlatTorus3 { .. } => Self {
                f: 1.0,
                volume: Some(manifold.volume()),
                ..Self::euclidean()
            },
            ManifoldSpec::Hyperbolic3 { .. } => Self {
                f: 1.0,
                ..Self::euclidean()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(self.f >= 0.0 && self.f.is_finite()) {
            return Err(domain("bound constants must be positive and finite"));
        }
        if let Some(v) = self.volume {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("volume must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self::euclidean()
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_open(label: &str, x: f64, m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(domain(format!("mass must be positive, got {m}")));
    }
    if !(x.abs() < m) {
        return Err(domain(format!("{label} = {x} outside (-m, m) with m = {m}")));
    }
    Ok(())
}

/// `(m/x) log(m/(m - x))`, with its removable singularity at `x = 0`.
fn log_ratio(x: f64, m: f64) -> f64 {
    let t = x / m;
    if t.abs() < 1e-4 {
        1.0 + t / 2.0 + t * t / 3.0
    } else {
        -(-t).ln_1p() / t
    }
}

/// Upper estimate of the `|ξ| < δ` part of the renormalized diagonal.
pub fn near_diagonal_envelope(e: f64, mu: f64, m: f64, k: &BoundConstants, kappa_delta: f64) -> Result<f64> {
    check_open("energy", e, m)?;
    check_open("mu", mu, m)?;
    if !(0.0..1.0).contains(&kappa_delta) {
        return Err(domain(format!("kappa*delta must lie in [0, 1), got {kappa_delta}")));
    }
    let (ge, gm) = ((m * m - e * e).sqrt(), (m * m - mu * mu).sqrt());
    let bracket = (ge / gm).ln() + sgn(mu) * ((m + mu.abs()) / gm).ln() - sgn(e) * ((m + e.abs()) / ge).ln();
    Ok(k.b * k.c.sqrt() / (4.0 * PI * (1.0 - kappa_delta).sqrt()) * bracket)
}

/// Uniform lower bound on the diagonal entries for `E < μ_min`.
pub fn diagonal_lower_bound(e: f64, mu_min: f64, m: f64, l_min: f64, k: &BoundConstants) -> Result<f64> {
    check_open("energy", e, m)?;
    check_open("mu_min", mu_min, m)?;
    if !(e < mu_min) {
        return Err(domain(format!("diagonal bound needs E < mu_min, got E = {e}, mu_min = {mu_min}")));
    }
    if !(l_min > 0.0) {
        return Err(domain(format!("curve length must be positive, got {l_min}")));
    }
    let sd = k.d.sqrt();
    let screen = 1.0 - 0.5 * PI * (-m * l_min / (2.0 * sd)).exp();
    let value = screen * ((m - e) / (m - mu_min)).ln() + log_ratio(e, m) - log_ratio(mu_min, m);
    Ok(k.a * sd / (8.0 * PI * PI) * value)
}

/// Upper bound on `|Φ_ij|` for curves at least `d_min` apart.
pub fn offdiagonal_upper_bound(e: f64, m: f64, d_min: f64, l_max: f64, k: &BoundConstants) -> Result<f64> {
    check_open("energy", e, m)?;
    if !(d_min > 0.0) {
        return Err(domain(format!("minimum distance must be positive, got {d_min}")));
    }
    let volume_term = match k.volume {
        Some(v) => 0.5 * k.f / (m * (m - e)) * (l_max / v),
        None => 0.0,
    };
    let sc = k.c.sqrt();
    let local = k.b * sc / (4.0 * PI * PI) * (m / (m - e)) * (l_max / d_min) * (1.0 + sc / (m * d_min));
    Ok(volume_term + local)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    /// The single disk has zero radius: `E* = μ₁`.
    SingleCurve,
    /// Diagonal dominance fails somewhere; `E*` is its first failure.
    Crossing,
    /// Diagonal dominance never holds on the bracket; `E* = -m` is all that follows.
    NoCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub status: ThresholdStatus,
    pub e_star: f64,
}

/// Lowest energy where the diagonal lower bound stops dominating the
/// `N - 1` off-diagonal bounds; below it no eigenvalue of `Φ` can vanish.
pub fn gersgorin_threshold(family: &CurveFamily, k: &BoundConstants) -> Result<Threshold> {
    k.validate()?;
    let m = family.mass;
    let n = family.len();
    let mu_min = family.mu_min();
    if n == 1 {
        return Ok(Threshold {
            status: ThresholdStatus::SingleCurve,
            e_star: family.mu[0],
        });
    }
    let l_min = family.min_length();
    let l_max = family.max_length();
    let d_min = family.min_separation();
    let g = |e: f64| -> Result<f64> {
        Ok(diagonal_lower_bound(e, mu_min, m, l_min, k)? - (n - 1) as f64 * offdiagonal_upper_bound(e, m, d_min, l_max, k)?)
    };
    let lo = -m * (1.0 - 1e-9);
    let hi = mu_min - 1e-12 * m;
    let steps = 512;
    let mut prev = (lo, g(lo)?);
    if prev.1 <= 0.0 {
        return Ok(Threshold {
            status: ThresholdStatus::NoCrossing,
            e_star: -m,
        });
    }
    for i in 1..=steps {
        let e = lo + (hi - lo) * i as f64 / steps as f64;
        let ge = g(e)?;
        if ge <= 0.0 {
            let (mut a, mut b) = (prev.0, e);
            for _ in 0..200 {
                let c = 0.5 * (a + b);
                if c <= a || c >= b {
                    break;
                }
                if g(c)? > 0.0 {
                    a = c;
                } else {
                    b = c;
                }
            }
            return Ok(Threshold {
                status: ThresholdStatus::Crossing,
                e_star: a,
            });
        }
        prev = (e, ge);
    }
    // dominance up to the top of the bracket
    Ok(Threshold {
        status: ThresholdStatus::Crossing,
        e_star: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: BoundConstants = BoundConstants {
        a: 0.5,
        b: 1.0,
        c: 1.0,
        d: 1.0,
        f: 0.0,
        volume: None,
    };

    #[test]
    fn envelope_values() {
        assert_eq!(near_diagonal_envelope(0.3, 0.3, 1.0, &K, 0.25).unwrap(), 0.0);
        assert_eq!(near_diagonal_envelope(-0.4, -0.4, 1.0, &K, 0.0).unwrap(), 0.0);
        let v = near_diagonal_envelope(-0.5, 0.0, 1.0, &K, 0.0).unwrap();
        let want = (0.5 * 0.75f64.ln() + (1.5 / 0.75f64.sqrt()).ln()) / (4.0 * PI);
        assert!((v - want).abs() < 1e-16);
        assert!((v - 0.032_265_888_103_352).abs() < 1e-14);
        for kd in [0.9, 0.99, 0.999_999] {
            let r = near_diagonal_envelope(-0.5, 0.0, 1.0, &K, kd).unwrap() * (1.0 - kd).sqrt();
            assert!((r - v).abs() < 1e-15);
        }
        assert!(near_diagonal_envelope(1.0, 0.0, 1.0, &K, 0.0).is_err());
        assert!(near_diagonal_envelope(0.0, 0.0, 1.0, &K, 1.0).is_err());
    }

    #[test]
    fn envelope_nonnegative_below_mu() {
        for mu in [-0.7, -0.2, 0.0, 0.4, 0.8] {
            for k in 0..20 {
                let e = -0.99 + (mu + 0.99) * k as f64 / 20.0;
                assert!(near_diagonal_envelope(e, mu, 1.0, &K, 0.25).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn log_ratio_series_matches_direct() {
        assert_eq!(log_ratio(0.0, 1.0), 1.0);
        for x in [1e-5f64, -3e-5] {
            let series = 1.0 + x / 2.0 + x * x / 3.0 + x * x * x / 4.0;
            assert!((log_ratio(x, 1.0) - series).abs() < 3e-13, "x={x}");
        }
        for x in [2e-4f64, -0.3, 0.6] {
            let direct = (1.0 / (1.0 - x)).ln() / x;
            assert!((log_ratio(x, 1.0) - direct).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn diagonal_bound_example() {
        let v = diagonal_lower_bound(-0.5, 0.0, 1.0, 10.0, &K).unwrap();
        let screen = 1.0 - 0.5 * PI * (-5.0f64).exp();
        let want = (screen * 1.5f64.ln() + 2.0 * 1.5f64.ln() - 1.0) / (16.0 * PI * PI);
        assert!((v - want).abs() < 1e-17);
        assert!(v > 0.0);
        // vanishes as E approaches mu_min
        let near = diagonal_lower_bound(0.2 - 1e-9, 0.2, 1.0, 10.0, &K).unwrap();
        assert!(near.abs() < 1e-9);
        assert!(diagonal_lower_bound(0.2, 0.2, 1.0, 10.0, &K).is_err());
    }

    #[test]
    fn offdiagonal_bound_example() {
        let v = offdiagonal_upper_bound(0.0, 1.0, 10.0, 2.0 * PI, &K).unwrap();
        let want = (2.0 * PI / 10.0) * 1.1 / (4.0 * PI * PI);
        assert!((v - want).abs() < 1e-17);
        assert!((v - 0.017_507).abs() < 1e-5);
        assert!(offdiagonal_upper_bound(0.0, 1.0, 1e9, 2.0 * PI, &K).unwrap() < 1e-9);
        assert!(offdiagonal_upper_bound(1.0 - 1e-12, 1.0, 10.0, 2.0 * PI, &K).unwrap() > 1e9);
        assert!(offdiagonal_upper_bound(0.0, 1.0, 0.0, 1.0, &K).is_err());
        let torus = BoundConstants {
            f: 1.0,
            volume: Some(8.0),
            ..K
        };
        let with_volume = offdiagonal_upper_bound(0.0, 1.0, 10.0, 2.0, &torus).unwrap();
        let without = offdiagonal_upper_bound(0.0, 1.0, 10.0, 2.0, &K).unwrap();
        assert!((with_volume - without - 0.5 * 2.0 / 8.0).abs() < 1e-16);
    }

    #[test]
    fn offdiagonal_bound_decreases_with_distance() {
        let mut prev = f64::INFINITY;
        for d in [0.5, 1.0, 2.0, 5.0, 20.0, 100.0] {
            let v = offdiagonal_upper_bound(-0.3, 1.0, d, 6.0, &K).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }
}
