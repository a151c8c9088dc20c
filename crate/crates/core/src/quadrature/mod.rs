//! Subordination integrals for the pair kernels.
//!
//! All kernels share the form `∫₀^∞ dt e^{-t²/4} ∫₀^∞ du e^{-m²u} g(t√u) K_u(x, y)`.
//! The Gaussian `t`-integral is taken in closed form,
//!
//! ```text
//! ∫₀^∞ exp(-t²/4 + a t) dt = √π · erfcx(-a),
//! ```
//!
//! leaving a single `u`-integral that is done on graded panels (uniform in
//! `ln u`) whose extent follows the decay of `exp(-d²/4u - κ²u)`. The
//! two-dimensional `(t, u)` form is kept in [`pair_kernel_plain_tu`] as an
//! independent check of that reduction.

pub mod oracle;
pub mod rules;
pub mod special;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::manifold::{KernelSeriesConfig, ManifoldSpec, PairGeometry, Point};
use rules::{composite, uniform_breaks, Estimate};
use special::{erfcx, erfcx_neg_diff, ONE_OVER_SQRT_PI};

pub use oracle::flat_resolvent_oracle;

/// Treatment of the `|ξ| < δ` band around the curve diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingularWindow {
    /// The band is integrated down to `ξ₀ = δ·e^{-depth}`; below that a
    /// `a·ln ξ + b` fit is integrated exactly.
    pub depth: f64,
    /// Panel width in `w = ln(δ/ξ)`.
    pub panel_width: f64,
    /// Gauss nodes per panel.
    pub nodes: usize,
}

impl Default for SingularWindow {
    fn default() -> Self {
        Self {
            depth: 14.0,
            panel_width: 2.0,
            nodes: 16,
        }
    }
}

/// Node counts, panel layout and tolerances for every integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Gauss nodes per panel for explicit `t`-integrations.
    pub t_nodes: usize,
    /// Gauss nodes per `ln u` panel.
    pub u_nodes: usize,
    /// Width of the graded `u` panels, measured in `ln u`.
    pub u_panel_width: f64,
    /// Number of panels for algebraically decaying `u` tails (in `w = u^{-1/2}`).
    pub u_tail_panels: usize,
    /// Exponential tails are dropped once they fall below `e^{-cutoff}`.
    pub cutoff: f64,
    /// Gauss nodes per panel along a curve.
    pub xi_nodes: usize,
    /// Curve panels are at most this many windows `δ` wide.
    pub xi_panel_windows: f64,
    pub window: SingularWindow,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub series: KernelSeriesConfig,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            t_nodes: 24,
            u_nodes: 20,
            u_panel_width: 1.0,
            u_tail_panels: 6,
            cutoff: 40.0,
            xi_nodes: 16,
            xi_panel_windows: 1.0,
            window: SingularWindow::default(),
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            series: KernelSeriesConfig::default(),
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_nodes < 16 || self.u_nodes < 16 {
            return Err(domain("t_nodes and u_nodes must be >= 16"));
        }
        if self.t_nodes > 256 || self.u_nodes > 256 || self.xi_nodes > 256 || self.window.nodes > 256 {
            return Err(domain("node counts above 256 are not supported"));
        }
        if self.xi_nodes < 4 || self.window.nodes < 4 || self.u_tail_panels < 1 {
            return Err(domain("curve and window rules need at least 4 nodes"));
        }
        let positive = [
            self.u_panel_width,
            self.cutoff,
            self.xi_panel_windows,
            self.window.depth,
            self.window.panel_width,
            self.rel_tol,
            self.abs_tol,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(domain("widths, cutoff and tolerances must be positive"));
        }
        self.series.validate()
    }

    /// Same configuration with every node count doubled.
    pub fn refined(&self) -> Self {
        let mut c = *self;
        c.t_nodes = (2 * c.t_nodes).min(256);
        c.u_nodes = (2 * c.u_nodes).min(256);
        c.xi_nodes = (2 * c.xi_nodes).min(256);
        c.window.nodes = (2 * c.window.nodes).min(256);
        c
    }

    pub(crate) fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// A pair-kernel value together with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairKernelValue {
    pub value: f64,
    pub err_estimate: f64,
}

impl From<Estimate> for PairKernelValue {
    fn from(e: Estimate) -> Self {
        Self {
            value: e.value,
            err_estimate: e.err,
        }
    }
}

/// `e^{-m²u} · erfcx(-E√u)`: the `t`-integrated subordination weight divided by `√π`.
pub(crate) fn weight(e: f64, m2: f64, u: f64) -> f64 {
    let a = e * u.sqrt();
    if a > 0.0 {
        ((e * e - m2) * u).exp() * libm::erfc(-a)
    } else {
        (-m2 * u).exp() * erfcx(-a)
    }
}

/// `weight(mu) - weight(e)` without cancellation at small `u`.
fn weight_diff(mu: f64, e: f64, m2: f64, u: f64) -> f64 {
    let s = u.sqrt();
    if (mu * s).abs() <= 1.0 && (e * s).abs() <= 1.0 {
        (-m2 * u).exp() * erfcx_neg_diff(mu * s, e * s)
    } else {
        weight(mu, m2, u) - weight(e, m2, u)
    }
}

/// Range in `u` outside of which `exp(-d²/4u - κ²u)` is below `e^{-c}` of its peak.
fn u_range(d: f64, kappa2: f64, c: f64) -> (f64, f64) {
    let kappa = kappa2.sqrt();
    let b = d * kappa + c;
    let u_hi = (b + (c * (2.0 * d * kappa + c)).sqrt()) / (2.0 * kappa2);
    let u_lo = (0.25 * d * d / (kappa2 * u_hi)).max(1e-30 * u_hi);
    (u_lo, u_hi)
}

/// `∫ f(u) du` over `[u_lo, u_hi]` on uniform panels in `ln u`.
fn integrate_log_u(u_lo: f64, u_hi: f64, cfg: &QuadratureConfig, f: impl Fn(f64) -> f64) -> Estimate {
    let breaks = uniform_breaks(u_lo.ln(), u_hi.ln(), cfg.u_panel_width);
    composite(&breaks, cfg.u_nodes, |v| {
        let u = v.exp();
        u * f(u)
    })
}

/// `∫_{u_split}^∞ f(u) du` through `w = u^{-1/2}`, for integrands decaying like `u^{-3/2}`.
fn integrate_u_tail(u_split: f64, cfg: &QuadratureConfig, f: impl Fn(f64) -> f64) -> Estimate {
    let w_max = u_split.powf(-0.5);
    let breaks = uniform_breaks(0.0, w_max, w_max / cfg.u_tail_panels as f64);
    composite(&breaks, cfg.u_nodes, |w| {
        let u = 1.0 / (w * w);
        2.0 * u * u.sqrt() * f(u)
    })
}

fn check_energy(label: &str, e: f64, m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(domain(format!("mass must be positive, got {m}")));
    }
    if !(e.abs() < m) {
        return Err(domain(format!("{label} = {e} outside (-m, m) with m = {m}")));
    }
    Ok(())
}

fn decay_rate(m: f64, energies: &[f64], pair: &PairGeometry) -> f64 {
    let top = energies.iter().fold(0.0f64, |acc, e| acc.max(*e));
    (m * m - top * top) + pair.spectral_gap()
}

/// Plain kernel on a precomputed pair; the pair must not be coincident.
pub(crate) fn plain_on_pair(e: f64, m: f64, pair: &PairGeometry, cfg: &QuadratureConfig) -> Estimate {
    let m2 = m * m;
    let (lo, hi) = u_range(pair.distance(), decay_rate(m, &[e], pair), cfg.cutoff + 10.0);
    integrate_log_u(lo, hi, cfg, |u| 0.5 * weight(e, m2, u) * pair.kernel(u, &cfg.series))
}

/// Energy derivative of the plain kernel on a precomputed pair.
pub(crate) fn derivative_on_pair(e: f64, m: f64, pair: &PairGeometry, cfg: &QuadratureConfig) -> Estimate {
    let m2 = m * m;
    let (lo, hi) = u_range(pair.distance(), decay_rate(m, &[e], pair), cfg.cutoff + 10.0);
    integrate_log_u(lo, hi, cfg, |u| {
        let dh = e * u * weight(e, m2, u) + u.sqrt() * (-m2 * u).exp() * ONE_OVER_SQRT_PI;
        dh * pair.kernel(u, &cfg.series)
    })
}

/// Renormalized kernel on a precomputed pair; zero when `e == mu`.
pub(crate) fn renormalized_on_pair(e: f64, mu: f64, m: f64, pair: &PairGeometry, cfg: &QuadratureConfig) -> Estimate {
    if e == mu {
        return Estimate::default();
    }
    let m2 = m * m;
    let (lo, hi) = u_range(pair.distance(), decay_rate(m, &[e, mu], pair), cfg.cutoff + 10.0);
    integrate_log_u(lo, hi, cfg, |u| 0.5 * weight_diff(mu, e, m2, u) * pair.kernel(u, &cfg.series))
}

/// Per-pair integrand of the counterterm form: the intrinsic circle kernel at
/// arc separation `xi` (circumference `l`) weighted at scale `mu`, minus the
/// plain ambient kernel at energy `e`.
pub(crate) fn counterterm_on_pair(
    e: f64,
    mu: f64,
    m: f64,
    xi: f64,
    l: f64,
    pair: &PairGeometry,
    cfg: &QuadratureConfig,
) -> Estimate {
    let m2 = m * m;
    let series = &cfg.series;
    let integrand = |u: f64| {
        let s = u.sqrt();
        let q = weight(e, m2, u);
        let p_minus_q = if (mu * s).abs() <= 1.0 && (e * s).abs() <= 1.0 {
            erfcx_neg_diff(-mu * s, e * s) - (-m2 * u).exp_m1() * erfcx(-e * s)
        } else {
            erfcx(mu * s) - q
        };
        let a = crate::manifold::scaled_circle_kernel(u, xi, l, series);
        let b = pair.scaled_kernel(u, series);
        0.5 * (4.0 * PI * u).powf(-1.5) * (p_minus_q * a + q * (a - b))
    };
    let d = pair.distance().min(xi.abs());
    let kappa2 = decay_rate(m, &[e], pair);
    let (lo, hi_ambient) = u_range(d, kappa2, cfg.cutoff + 10.0);
    // the counterterm part decays algebraically; switch to the w-substitution
    // once the ambient part is gone and the circle kernel is near its constant mode
    let split = hi_ambient.max(l * l).max(1.0 / (mu * mu));
    integrate_log_u(lo, split, cfg, integrand) + integrate_u_tail(split, cfg, integrand)
}

fn check_points(manifold: &ManifoldSpec, x: &Point, y: &Point) -> Result<PairGeometry> {
    manifold.validate()?;
    manifold.check_point(x)?;
    manifold.check_point(y)?;
    Ok(manifold.pair(x, y))
}

/// `G(E; x, y) = (1/2√π) ∫dt e^{-t²/4} ∫du e^{-m²u} e^{Et√u} K_u(x, y)`.
pub fn pair_kernel_plain(
    e: f64,
    x: &Point,
    y: &Point,
    m: f64,
    manifold: &ManifoldSpec,
    cfg: &QuadratureConfig,
) -> Result<PairKernelValue> {
    check_energy("energy", e, m)?;
    let pair = check_points(manifold, x, y)?;
    if pair.distance() <= 0.0 {
        return Err(domain("plain kernel diverges at coincident points; use the renormalized kernel"));
    }
    Ok(plain_on_pair(e, m, &pair, cfg).into())
}

/// `G_ren = (1/2√π) ∫dt e^{-t²/4} ∫du e^{-m²u}(e^{μt√u} - e^{Et√u}) K_u(x, y)`.
///
/// The value is finite for every separated pair and grows like
/// `log(1/d)` as the points merge; at exact coincidence it is infinite unless
/// `E = μ`, in which case it is zero.
pub fn pair_kernel_renormalized(
    e: f64,
    mu: f64,
    x: &Point,
    y: &Point,
    m: f64,
    manifold: &ManifoldSpec,
    cfg: &QuadratureConfig,
) -> Result<PairKernelValue> {
    check_energy("energy", e, m)?;
    check_energy("renormalization scale", mu, m)?;
    let pair = check_points(manifold, x, y)?;
    if e == mu {
        return Ok(PairKernelValue {
            value: 0.0,
            err_estimate: 0.0,
        });
    }
    if pair.distance() <= 0.0 {
        return Err(domain(
            "renormalized kernel diverges logarithmically at coincident points; it is integrable along the curve",
        ));
    }
    Ok(renormalized_on_pair(e, mu, m, &pair, cfg).into())
}

/// `∂G/∂E = (1/2√π) ∫dt t e^{-t²/4} ∫du √u e^{-m²u} e^{Et√u} K_u(x, y)`.
pub fn pair_kernel_derivative(
    e: f64,
    x: &Point,
    y: &Point,
    m: f64,
    manifold: &ManifoldSpec,
    cfg: &QuadratureConfig,
) -> Result<PairKernelValue> {
    check_energy("energy", e, m)?;
    let pair = check_points(manifold, x, y)?;
    if pair.distance() <= 0.0 {
        return Err(domain("derivative kernel diverges at coincident points"));
    }
    Ok(derivative_on_pair(e, m, &pair, cfg).into())
}

/// The plain kernel with both subordination integrals done numerically.
pub fn pair_kernel_plain_tu(
    e: f64,
    x: &Point,
    y: &Point,
    m: f64,
    manifold: &ManifoldSpec,
    cfg: &QuadratureConfig,
) -> Result<PairKernelValue> {
    check_energy("energy", e, m)?;
    let pair = check_points(manifold, x, y)?;
    if pair.distance() <= 0.0 {
        return Err(domain("plain kernel diverges at coincident points"));
    }
    let m2 = m * m;
    let (lo, hi) = u_range(pair.distance(), decay_rate(m, &[e], &pair), cfg.cutoff + 10.0);
    let t_width = 2.0;
    let est = integrate_log_u(lo, hi, cfg, |u| {
        let a = e * u.sqrt();
        let t_max = 2.0 * a.max(0.0) + 4.0 * (cfg.cutoff + 10.0).sqrt();
        let t_int = composite(&uniform_breaks(0.0, t_max, t_width), cfg.t_nodes, |t| {
            (-0.25 * t * t + a * t - m2 * u).exp()
        });
        t_int.value * pair.kernel(u, &cfg.series) / (2.0 * PI.sqrt())
    });
    Ok(est.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn at(d: f64) -> (Point, Point) {
        ([0.0; 3], [d, 0.0, 0.0])
    }

    #[test]
    fn yukawa_reduction() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(1.0);
        let g = pair_kernel_plain(0.0, &x, &y, 1.0, &e3, &cfg()).unwrap();
        assert!((g.value - 0.014_637_457_881_079_8).abs() < 1e-12);
        let (x, y) = at(0.5);
        let g = pair_kernel_plain(0.0, &x, &y, 2.0, &e3, &cfg()).unwrap();
        let want = (-1.0f64).exp() / (4.0 * PI);
        assert!(((g.value - want) / want).abs() < 1e-10);
        assert!(g.err_estimate >= 0.0);
    }

    #[test]
    fn plain_matches_momentum_oracle() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(1.0);
        for e in [0.5, -0.5] {
            let g = pair_kernel_plain(e, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
            let r = flat_resolvent_oracle(e, 1.0, 1.0).unwrap();
            assert!(((g - r) / r).abs() < 1e-8, "e={e} g={g} r={r}");
        }
    }

    #[test]
    fn two_dimensional_route_agrees() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(0.7);
        for e in [-0.8, 0.0, 0.6] {
            let a = pair_kernel_plain(e, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
            let b = pair_kernel_plain_tu(e, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
            assert!(((a - b) / a).abs() < 1e-10, "e={e}");
        }
    }

    #[test]
    fn renormalized_is_difference_of_plain() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(1.0);
        let g = pair_kernel_renormalized(0.1, 0.3, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
        let want = flat_resolvent_oracle(0.3, 1.0, 1.0).unwrap() - flat_resolvent_oracle(0.1, 1.0, 1.0).unwrap();
        assert!(((g - want) / want).abs() < 1e-8);
        let z = pair_kernel_renormalized(0.2, 0.2, &x, &x, 1.0, &e3, &cfg()).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(pair_kernel_renormalized(0.1, 0.2, &x, &x, 1.0, &e3, &cfg()).is_err());
    }

    #[test]
    fn renormalized_sign_follows_scale_ordering() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(0.3);
        let above = pair_kernel_renormalized(-0.4, 0.2, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
        let below = pair_kernel_renormalized(0.6, 0.2, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
        assert!(above > 0.0 && below < 0.0);
    }

    #[test]
    fn renormalized_log_growth_near_coincidence() {
        let e3 = ManifoldSpec::Euclidean3;
        let ds = [1e-2, 1e-3, 1e-4];
        let vals: Vec<f64> = ds
            .iter()
            .map(|&d| {
                let (x, y) = at(d);
                pair_kernel_renormalized(-0.5, 0.0, &x, &y, 1.0, &e3, &cfg()).unwrap().value
            })
            .collect();
        // least-squares fit c1·log(1/d) + c2
        let xs: Vec<f64> = ds.iter().map(|d| (1.0 / d).ln()).collect();
        let n = 3.0;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = vals.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&vals).map(|(x, y)| x * y).sum();
        let c1 = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let c2 = (sy - c1 * sx) / n;
        for (x, y) in xs.iter().zip(&vals) {
            assert!(((c1 * x + c2 - y) / y).abs() < 0.01);
        }
        // leading slope (μ - E)/(4π²)
        assert!((c1 - 0.5 / (4.0 * PI * PI)).abs() / c1 < 0.01);
    }

    #[test]
    fn derivative_closed_form_at_zero_energy() {
        let e3 = ManifoldSpec::Euclidean3;
        for (d, want) in [(1.0, 0.010_664_673_606_224_7), (2.0, 0.002_884_965_499_148_13)] {
            let (x, y) = at(d);
            let g = pair_kernel_derivative(0.0, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
            let exact = special::bessel_k0(d) / (4.0 * PI * PI);
            assert!(((g - exact) / exact).abs() < 1e-10);
            assert!(((g - want) / want).abs() < 1e-10);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(1.0);
        let h = 1e-4;
        let g = |e| pair_kernel_plain(e, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
        let fd = (g(0.2 + h) - g(0.2 - h)) / (2.0 * h);
        let an = pair_kernel_derivative(0.2, &x, &y, 1.0, &e3, &cfg()).unwrap().value;
        assert!(((fd - an) / an).abs() < 1e-6);
    }

    #[test]
    fn energy_domain_is_enforced() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(1.0);
        assert!(pair_kernel_plain(1.0, &x, &y, 1.0, &e3, &cfg()).is_err());
        assert!(pair_kernel_plain(0.0, &x, &x, 1.0, &e3, &cfg()).is_err());
        assert!(pair_kernel_renormalized(0.0, -1.2, &x, &y, 1.0, &e3, &cfg()).is_err());
        assert!(pair_kernel_derivative(-1.0, &x, &y, 1.0, &e3, &cfg()).is_err());
    }

    #[test]
    fn monotone_in_energy() {
        let e3 = ManifoldSpec::Euclidean3;
        let (x, y) = at(0.8);
        let grid = [-0.9, -0.5, 0.0, 0.5, 0.9];
        let plain: Vec<f64> = grid
            .iter()
            .map(|&e| pair_kernel_plain(e, &x, &y, 1.0, &e3, &cfg()).unwrap().value)
            .collect();
        let ren: Vec<f64> = grid
            .iter()
            .map(|&e| pair_kernel_renormalized(e, 0.3, &x, &y, 1.0, &e3, &cfg()).unwrap().value)
            .collect();
        assert!(plain.windows(2).all(|w| w[1] > w[0]));
        assert!(ren.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn torus_and_hyperbolic_kernels_are_positive_and_finite() {
        let t = ManifoldSpec::FlatTorus3 { lengths: [3.0; 3] };
        let g = pair_kernel_plain(0.2, &[0.0; 3], &[1.0, 0.5, 0.0], 1.0, &t, &cfg()).unwrap();
        assert!(g.value.is_finite() && g.value > 0.0);
        // the compact manifold adds the periodic images on top of flat space
        let flat = pair_kernel_plain(0.2, &[0.0; 3], &[1.0, 0.5, 0.0], 1.0, &ManifoldSpec::Euclidean3, &cfg()).unwrap();
        assert!(g.value > flat.value);
        let h = ManifoldSpec::Hyperbolic3 { radius: 1.0 };
        let gh = pair_kernel_plain(0.2, &[0.0, 0.0, 1.0], &[0.3, 0.0, 1.2], 1.0, &h, &cfg()).unwrap();
        assert!(gh.value.is_finite() && gh.value > 0.0);
    }

    #[test]
    fn refinement_is_stable() {
        let e3 = ManifoldSpec::Euclidean3;
        let c = cfg();
        let r = c.refined();
        for d in [0.05, 1.0, 4.0] {
            let (x, y) = at(d);
            for e in [-0.7, 0.4] {
                let a = pair_kernel_renormalized(e, 0.1, &x, &y, 1.0, &e3, &c).unwrap().value;
                let b = pair_kernel_renormalized(e, 0.1, &x, &y, 1.0, &e3, &r).unwrap().value;
                assert!(((a - b) / a).abs() < c.rel_tol);
            }
        }
    }
}
