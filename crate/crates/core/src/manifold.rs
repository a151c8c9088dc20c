//! Heat kernels and geodesic distances on the supported model 3-manifolds,
//! plus the intrinsic circle kernel.
//!
//! Conventions: `K_u(x, y)` solves `∂_u K = ∇² K` with `K_0 = δ`, so on
//! Euclidean space `K_u = (4πu)^{-3/2} exp(-d²/4u)`. Hyperbolic space uses
//! upper-half-space coordinates `(x₁, x₂, z)` with `z > 0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};

/// A point in the coordinate chart of a manifold.
pub type Point = [f64; 3];

/// One of the supported model 3-manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ManifoldSpec {
    Euclidean3,
    /// Flat torus `ℝ³ / (ℓ₁ℤ × ℓ₂ℤ × ℓ₃ℤ)`.
    FlatTorus3 { lengths: [f64; 3] },
    /// Hyperbolic space of curvature `-1/a²`.
    Hyperbolic3 { radius: f64 },
}

impl ManifoldSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ManifoldSpec::Euclidean3 => Ok(()),
            ManifoldSpec::FlatTorus3 { lengths } => {
                if lengths.iter().all(|l| l.is_finite() && *l > 0.0) {
                    Ok(())
                } else {
                    Err(domain(format!("torus circumferences must be positive and finite, got {lengths:?}")))
                }
            }
            ManifoldSpec::Hyperbolic3 { radius } => {
                if radius.is_finite() && radius > 0.0 {
                    Ok(())
                } else {
                    Err(domain(format!("hyperbolic curvature radius must be positive and finite, got {radius}")))
                }
            }
        }
    }

    /// Riemannian volume; infinite for the non-compact manifolds.
    pub fn volume(&self) -> f64 {
        match *self {
            ManifoldSpec::FlatTorus3 { lengths } => lengths.iter().product(),
            _ => f64::INFINITY,
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self, ManifoldSpec::Hyperbolic3 { .. })
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.iter().any(|c| !c.is_finite()) {
            return Err(domain(format!("non-finite coordinates {x:?}")));
        }
        if let ManifoldSpec::Hyperbolic3 { .. } = self {
            if x[2] <= 0.0 {
                return Err(domain(format!("upper-half-space point needs z > 0, got {x:?}")));
            }
        }
        Ok(())
    }

    /// Precomputes what the heat kernel needs to know about a point pair.
    pub fn pair(&self, x: &Point, y: &Point) -> PairGeometry {
        match *self {
            ManifoldSpec::Euclidean3 => PairGeometry::Euclidean {
                d: euclidean_norm(&sub(x, y)),
            },
            ManifoldSpec::FlatTorus3 { lengths } => {
                let mut disp = sub(x, y);
                for (c, l) in disp.iter_mut().zip(lengths) {
                    *c = wrap_half(*c, l);
                }
                PairGeometry::Torus { disp, lengths }
            }
            ManifoldSpec::Hyperbolic3 { radius } => PairGeometry::Hyperbolic {
                d: hyperbolic_distance(radius, x, y),
                a: radius,
            },
        }
    }
}

/// Signed offset wrapped into `[-ℓ/2, ℓ/2]`.
pub(crate) fn wrap_half(x: f64, l: f64) -> f64 {
    x - l * (x / l).round()
}

pub(crate) fn sub(x: &Point, y: &Point) -> Point {
    [x[0] - y[0], x[1] - y[1], x[2] - y[2]]
}

pub(crate) fn euclidean_norm(v: &Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn hyperbolic_distance(a: f64, x: &Point, y: &Point) -> f64 {
    let chord = euclidean_norm(&sub(x, y));
    2.0 * a * (chord / (2.0 * (x[2] * y[2]).sqrt())).asinh()
}

/// Truncation and representation-switch settings for periodic kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSeriesConfig {
    /// Images `|k| ≤ image_sum_radius` are summed in the Gaussian representation.
    pub image_sum_radius: u32,
    /// Modes `|n| ≤ spectral_terms` are summed in the Fourier representation.
    pub spectral_terms: u32,
    /// Fourier representation is used when `u / L² > poisson_switch_u`.
    pub poisson_switch_u: f64,
}

impl Default for KernelSeriesConfig {
    fn default() -> Self {
        Self {
            image_sum_radius: 6,
            spectral_terms: 8,
            poisson_switch_u: 1.0 / (4.0 * PI),
        }
    }
}

impl KernelSeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_sum_radius < 1 || self.spectral_terms < 1 {
            return Err(domain("kernel series truncations must be >= 1"));
        }
        if !(self.poisson_switch_u.is_finite() && self.poisson_switch_u > 0.0) {
            return Err(domain("poisson_switch_u must be positive"));
        }
        Ok(())
    }
}

/// Geometry of a point pair, reduced to what the heat kernel depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairGeometry {
    Euclidean { d: f64 },
    Torus { disp: Point, lengths: [f64; 3] },
    Hyperbolic { d: f64, a: f64 },
}

impl PairGeometry {
    pub fn distance(&self) -> f64 {
        match *self {
            PairGeometry::Euclidean { d } | PairGeometry::Hyperbolic { d, .. } => d,
            PairGeometry::Torus { disp, .. } => euclidean_norm(&disp),
        }
    }

    /// Extra exponential decay rate of the kernel at large `u`.
    pub fn spectral_gap(&self) -> f64 {
        match *self {
            PairGeometry::Hyperbolic { a, .. } => 1.0 / (a * a),
            _ => 0.0,
        }
    }

    /// `K_u(x, y)`.
    pub fn kernel(&self, u: f64, cfg: &KernelSeriesConfig) -> f64 {
        self.scaled_kernel(u, cfg) * (4.0 * PI * u).powf(-1.5)
    }

    /// `(4πu)^{3/2} K_u(x, y)`, bounded as `u → 0`.
    pub fn scaled_kernel(&self, u: f64, cfg: &KernelSeriesConfig) -> f64 {
        match *self {
            PairGeometry::Euclidean { d } => (-d * d / (4.0 * u)).exp(),
            PairGeometry::Hyperbolic { d, a } => {
                let rho = d / a;
                rho_over_sinh(rho) * (-u / (a * a) - d * d / (4.0 * u)).exp()
            }
            PairGeometry::Torus { disp, lengths } => disp
                .iter()
                .zip(lengths)
                .map(|(&x, l)| scaled_circle_kernel(u, x, l, cfg))
                .product(),
        }
    }
}

/// `ρ / sinh ρ`, with its removable singularity at 0.
fn rho_over_sinh(rho: f64) -> f64 {
    if rho < 1e-4 {
        let r2 = rho * rho;
        1.0 - r2 / 6.0 + 7.0 * r2 * r2 / 360.0
    } else {
        rho / rho.sinh()
    }
}

/// Heat kernel `K_u(x, y)` on the manifold.
pub fn heat_kernel(manifold: &ManifoldSpec, u: f64, x: &Point, y: &Point, cfg: &KernelSeriesConfig) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(domain(format!("diffusion time must be positive, got {u}")));
    }
    manifold.check_point(x)?;
    manifold.check_point(y)?;
    Ok(manifold.pair(x, y).kernel(u, cfg))
}

/// Coincidence value `K_u(x, x)`.
pub fn heat_kernel_diagonal(manifold: &ManifoldSpec, u: f64, cfg: &KernelSeriesConfig) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(domain(format!("diffusion time must be positive, got {u}")));
    }
    let base = (4.0 * PI * u).powf(-1.5);
    Ok(match *manifold {
        ManifoldSpec::Euclidean3 => base,
        ManifoldSpec::Hyperbolic3 { radius } => base * (-u / (radius * radius)).exp(),
        ManifoldSpec::FlatTorus3 { lengths } => lengths
            .iter()
            .map(|&l| circle_kernel_unchecked(u, 0.0, l, cfg))
            .product(),
    })
}

/// Geodesic distance between two points.
pub fn geodesic_distance(manifold: &ManifoldSpec, x: &Point, y: &Point) -> Result<f64> {
    manifold.check_point(x)?;
    manifold.check_point(y)?;
    Ok(manifold.pair(x, y).distance())
}

/// Heat kernel on a circle of circumference `l` at signed arc separation `xi`.
pub fn circle_heat_kernel(u: f64, xi: f64, l: f64, cfg: &KernelSeriesConfig) -> Result<f64> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(domain(format!("diffusion time must be positive, got {u}")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(domain(format!("circumference must be positive, got {l}")));
    }
    Ok(circle_kernel_unchecked(u, xi, l, cfg))
}

pub(crate) fn circle_kernel_unchecked(u: f64, xi: f64, l: f64, cfg: &KernelSeriesConfig) -> f64 {
    if u / (l * l) > cfg.poisson_switch_u {
        circle_kernel_spectral(u, xi, l, cfg.spectral_terms)
    } else {
        circle_kernel_images(u, xi, l, cfg.image_sum_radius)
    }
}

/// `√(4πu) K_u(ξ)` on the circle; equals the bare image sum.
pub(crate) fn scaled_circle_kernel(u: f64, xi: f64, l: f64, cfg: &KernelSeriesConfig) -> f64 {
    if u / (l * l) > cfg.poisson_switch_u {
        (4.0 * PI * u).sqrt() * circle_kernel_spectral(u, xi, l, cfg.spectral_terms)
    } else {
        image_sum(u, xi, l, cfg.image_sum_radius)
    }
}

fn image_sum(u: f64, xi: f64, l: f64, radius: u32) -> f64 {
    let x = wrap_half(xi, l);
    let r = radius as i64;
    (-r..=r)
        .map(|k| {
            let y = x + k as f64 * l;
            (-y * y / (4.0 * u)).exp()
        })
        .sum()
}

/// Gaussian image-sum representation `(4πu)^{-1/2} Σ_k exp(-(ξ + kL)²/4u)`.
pub fn circle_kernel_images(u: f64, xi: f64, l: f64, radius: u32) -> f64 {
    image_sum(u, xi, l, radius) / (4.0 * PI * u).sqrt()
}

/// Fourier representation `(1/L) Σ_n exp(-4π²n²u/L²) cos(2πnξ/L)`.
pub fn circle_kernel_spectral(u: f64, xi: f64, l: f64, terms: u32) -> f64 {
    let a = 4.0 * PI * PI * u / (l * l);
    let phase = 2.0 * PI * xi / l;
    let tail: f64 = (1..=terms as i64)
        .map(|n| {
            let nf = n as f64;
            (-a * nf * nf).exp() * (nf * phase).cos()
        })
        .sum();
    (1.0 + 2.0 * tail) / l
}
