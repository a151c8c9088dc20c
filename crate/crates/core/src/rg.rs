//! Running coupling of the RG prescription: beta function, closed-form
//! flow, an independent ODE integration of the flow, and the scaling
//! identity of `Φ_R`.
//!
//! With the circumference-`L` circle kernel only the constant mode survives
//! the double curve integral, `∬ K_u^{S¹} = L`, so
//! `β(λ) = -λ²/(8π^{3/2} L) · 2√π L = -λ²/(4π)` for every curve length.

use serde::Serialize;
use std::f64::consts::PI;

use crate::curves::SampledCurve;
use crate::error::{domain, Error, Result};
use crate::manifold::{circle_kernel_unchecked, ManifoldSpec};
use crate::principal::rg_assemble;
use crate::quadrature::rules::{composite, uniform_breaks, Estimate, GaussLegendre};
use crate::quadrature::QuadratureConfig;

/// Smooth reparametrization `θ ↦ L(θ + ε sin(2πθ)/2π)` of `[0, 1)` onto the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reparametrization {
    pub epsilon: f64,
}

impl Reparametrization {
    pub const IDENTITY: Reparametrization = Reparametrization { epsilon: 0.0 };

    fn map(&self, theta: f64, l: f64) -> f64 {
        l * (theta + self.epsilon * (2.0 * PI * theta).sin() / (2.0 * PI))
    }

    fn speed(&self, theta: f64, l: f64) -> f64 {
        l * (1.0 + self.epsilon * (2.0 * PI * theta).cos())
    }
}

/// Number of outer `θ` nodes in the curve double integral.
const THETA_NODES: usize = 8;

/// `∬ dθ̃ dθ̃' K_u^{S¹}(θ̃, θ̃')` in the given parametrization.
fn circle_double_integral(u: f64, l: f64, rep: Reparametrization, cfg: &QuadratureConfig) -> f64 {
    let rule = GaussLegendre::cached(cfg.xi_nodes);
    let mut total = 0.0;
    for k in 0..THETA_NODES {
        let theta = k as f64 / THETA_NODES as f64;
        let s = rep.map(theta, l);
        let sigma = u.sqrt() / rep.speed(theta, l);
        // panels graded geometrically away from θ' = θ at the kernel width
        let mut offsets = vec![0.0];
        let mut r = sigma;
        while r < 0.5 {
            offsets.push(r);
            r *= 2.0;
        }
        offsets.push(0.5);
        let mut inner = 0.0;
        for sign in [1.0, -1.0] {
            for w in offsets.windows(2) {
                inner += rule.integrate(w[0], w[1], |o| {
                    let tp = theta + sign * o;
                    rep.speed(tp, l) * circle_kernel_unchecked(u, s - rep.map(tp, l), l, &cfg.series)
                });
            }
        }
        total += rep.speed(theta, l) * inner;
    }
    total / THETA_NODES as f64
}

/// `T(w) = ∫₀^∞ t e^{-t} e^{-t²w²/4} dt` by Gauss–Legendre panels.
fn t_integral(w: f64, cfg: &QuadratureConfig) -> f64 {
    let t_max = (cfg.cutoff + 10.0).min(2.0 * (cfg.cutoff + 10.0).sqrt() / w.max(1e-300));
    composite(&uniform_breaks(0.0, t_max, 2.0), cfg.t_nodes, |t| t * (-t - 0.25 * t * t * w * w).exp()).value
}

/// `∬dθ̃dθ̃' ∫dt t e^{-t} ∫du e^{-t²/4u} u^{-3/2} K_u^{S¹}` by quadrature in all four variables.
///
/// The `u`-integral is taken in `w = u^{-1/2}` on `[0, 1]` and in `v = 1/w`
/// beyond, where the integrand is smooth in each variable.
pub fn beta_integral(l: f64, rep: Reparametrization, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(domain(format!("curve length must be positive, got {l}")));
    }
    if !(rep.epsilon.abs() < 1.0) {
        return Err(domain("reparametrization must be monotone (|epsilon| < 1)"));
    }
    let panels = uniform_breaks(0.0, 1.0, 0.25);
    let near = composite(&panels, cfg.u_nodes, |w| {
        if w == 0.0 {
            return 0.0;
        }
        2.0 * t_integral(w, cfg) * circle_double_integral(1.0 / (w * w), l, rep, cfg)
    });
    let far = composite(&panels, cfg.u_nodes, |v| {
        // w = 1/v, dw = dv/v², u = v²
        2.0 * t_integral(1.0 / v, cfg) / (v * v) * circle_double_integral(v * v, l, rep, cfg)
    });
    Ok(near + far)
}

fn check_coupling(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("coupling must be positive, got {lambda}")));
    }
    Ok(())
}

/// `β(λ) = -λ²/(8π^{3/2} L) · ∬∫∫ …`, evaluated by quadrature.
pub fn beta(lambda: f64, l: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    beta_reparametrized(lambda, l, Reparametrization::IDENTITY, cfg)
}

pub fn beta_reparametrized(lambda: f64, l: f64, rep: Reparametrization, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_coupling(lambda)?;
    let i = beta_integral(l, rep, cfg)?;
    Ok(i.scaled(-lambda * lambda / (8.0 * PI.powf(1.5) * l)))
}

/// Constant-mode reduction `-λ²/(4π)`.
pub fn beta_closed_form(lambda: f64) -> f64 {
    -lambda * lambda / (4.0 * PI)
}

/// Integration constant of the flow, `C = 2√π L`.
pub fn flow_constant(l: f64) -> f64 {
    2.0 * PI.sqrt() * l
}

/// `λ(τμ) = λ(μ) / (1 + λ(μ) C log τ / (8π^{3/2} L))`.
pub fn flow_coupling(lambda_mu: f64, tau: f64, l: f64) -> Result<f64> {
    check_coupling(lambda_mu)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain(format!("scale factor must be positive, got {tau}")));
    }
    if !(l > 0.0) {
        return Err(domain(format!("curve length must be positive, got {l}")));
    }
    let slope = lambda_mu * flow_constant(l) / (8.0 * PI.powf(1.5) * l);
    let denominator = 1.0 + slope * tau.ln();
    if !(denominator > 0.0) {
        return Err(Error::FlowPole {
            denominator,
            critical_tau: (-1.0 / slope).exp(),
        });
    }
    Ok(lambda_mu / denominator)
}

/// Classical fourth-order Runge–Kutta integration of `dλ/d log μ = β(λ)`.
pub fn flow_ode(lambda_mu: f64, tau: f64, steps: usize) -> Result<f64> {
    check_coupling(lambda_mu)?;
    if !(tau > 0.0) || steps == 0 {
        return Err(domain("flow integration needs tau > 0 and at least one step"));
    }
    let h = tau.ln() / steps as f64;
    let mut y = lambda_mu;
    for _ in 0..steps {
        let k1 = beta_closed_form(y);
        let k2 = beta_closed_form(y + 0.5 * h * k1);
        let k3 = beta_closed_form(y + 0.5 * h * k2);
        let k4 = beta_closed_form(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !y.is_finite() || y <= 0.0 {
            return Err(domain("flow integration ran into the pole"));
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub tau_grid: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    /// Relative difference between the closed form and the ODE integration at each point.
    pub closed_form_residual: Vec<f64>,
}

/// Coupling, beta function and ODE cross-check over a grid of scale factors.
pub fn coupling_flow(lambda_mu: f64, taus: &[f64], l: f64) -> Result<FlowResult> {
    let mut out = FlowResult {
        tau_grid: taus.to_vec(),
        lambda_values: Vec::with_capacity(taus.len()),
        beta_values: Vec::with_capacity(taus.len()),
        closed_form_residual: Vec::with_capacity(taus.len()),
    };
    for &tau in taus {
        let lam = flow_coupling(lambda_mu, tau, l)?;
        let ode = flow_ode(lambda_mu, tau, 2000)?;
        out.lambda_values.push(lam);
        out.beta_values.push(beta_closed_form(lam));
        out.closed_form_residual.push(((lam - ode) / lam).abs());
    }
    Ok(out)
}

/// Relative mismatch between `Φ_R` with `(τm, τE)` on the curve scaled by
/// `1/τ` at coupling `λ(μ)`, and `Φ_R` with `(m, E)` on the original curve at
/// coupling `λ(τμ)`.
pub fn rg_invariance_residual(
    curve: &SampledCurve,
    e: f64,
    m: f64,
    mu: f64,
    lambda_r: f64,
    tau: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if curve.manifold != ManifoldSpec::Euclidean3 {
        return Err(domain("the scaling identity is checked on Euclidean space"));
    }
    if tau == 1.0 {
        return Ok(0.0);
    }
    let scaled = curve.scaled(1.0 / tau)?;
    let lhs = rg_assemble(&scaled, tau * e, mu, lambda_r, tau * m, cfg)?;
    let lambda_tau = flow_coupling(lambda_r, tau, curve.length)?;
    let rhs = rg_assemble(curve, e, mu, lambda_tau, m, cfg)?;
    Ok(((lhs - rhs) / rhs).abs())
}
