//! Assembly of the principal matrix `Φ(E)` and its energy derivative.
//!
//! Diagonal entries integrate a pair kernel along one curve. Writing the
//! second point as `s + ξ`, the `ξ`-integral is split into the band
//! `|ξ| < δ`, where the kernel grows like `log(1/|ξ|)`, and the regular
//! remainder. The band is integrated in `w = ln(δ/|ξ|)` down to
//! `ξ₀ = δ e^{-depth}`; below `ξ₀` the kernel is replaced by its
//! `a ln ξ + b` fit, whose integral is `ξ₀ f(ξ₀/e)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curves::{CurveFamily, QuadNode, SampledCurve};
use crate::error::{domain, Error, Result};
use crate::manifold::PairGeometry;
use crate::quadrature::rules::{uniform_breaks, Estimate, GaussLegendre};
use crate::quadrature::{
    counterterm_on_pair, derivative_on_pair, plain_on_pair, renormalized_on_pair, QuadratureConfig,
};

/// Renormalization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Prescription {
    /// `1/λ_R = 0` and each curve subtracted at its own binding scale `μ_i`.
    #[serde(rename = "minimal")]
    MinimalBoundState,
    /// Intrinsic circle counterterm at scale `mu > 0` with coupling
    /// `lambda_r`; a missing coupling means `1/λ_R = 0`.
    #[serde(rename = "rg")]
    RgScale { mu: f64, lambda_r: Option<f64> },
}

impl Prescription {
    pub fn inverse_coupling(&self) -> f64 {
        match *self {
            Prescription::MinimalBoundState => 0.0,
            Prescription::RgScale { lambda_r, .. } => lambda_r.map_or(0.0, |l| 1.0 / l),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Prescription::RgScale { mu, lambda_r } = *self {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(domain(format!("RG scale must be positive, got mu = {mu}")));
            }
            if let Some(l) = lambda_r {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(domain(format!("renormalized coupling must be positive, got {l}")));
                }
            }
        }
        Ok(())
    }

    /// Upper end of the admissible energy range for the family.
    pub fn energy_ceiling(&self, family: &CurveFamily) -> f64 {
        match *self {
            Prescription::MinimalBoundState => family.mu_min(),
            Prescription::RgScale { mu, .. } => mu.min(family.mass),
        }
    }
}

/// `Φ(E)` with entrywise error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalMatrix {
    pub energy: f64,
    pub entries: DMatrix<f64>,
    pub err: DMatrix<f64>,
    pub fingerprint: String,
}

impl PrincipalMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.entries.row(i).iter().copied().collect()).collect()
    }
}

/// A diagonal curve integral split at the singular window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiagonalParts {
    /// Contribution of `|ξ| < δ`, including the analytic tail below `ξ₀`.
    pub window: Estimate,
    /// Contribution of `δ ≤ |ξ| ≤ L/2`.
    pub regular: Estimate,
}

impl DiagonalParts {
    pub fn total(&self) -> Estimate {
        self.window + self.regular
    }

    /// Sum of the part magnitudes, the scale convergence is judged against.
    pub fn magnitude(&self) -> f64 {
        self.window.value.abs() + self.regular.value.abs()
    }

    fn scaled(self, c: f64) -> Self {
        Self {
            window: self.window.scaled(c),
            regular: self.regular.scaled(c),
        }
    }
}

/// Stable digest of everything the matrix depends on apart from energy and quadrature.
pub fn family_fingerprint(family: &CurveFamily) -> String {
    let mut h = Sha256::new();
    h.update(format!("{:?}|{:?}|{:?}", family.manifold(), family.mass, family.mu).as_bytes());
    for c in &family.curves {
        h.update(format!("|{:?}|{}", c.spec.shape, c.len()).as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The regular part always has at least this many panels per curve length.
const MIN_CURVE_PANELS: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Window,
    Regular,
}

/// One inner node of the `ξ` rule.
#[derive(Debug, Clone, Copy)]
struct XiNode {
    xi: f64,
    fine: f64,
    coarse: f64,
    panel: usize,
    part: Part,
}

/// Inner rule in `ξ` for one curve: panel nodes plus the two tail probes per side.
struct XiRule {
    nodes: Vec<XiNode>,
    panels: usize,
    panel_parts: Vec<Part>,
    /// Points `±ξ₀/e` whose values give the tail integrals.
    tail_probes: [f64; 2],
    xi0: f64,
    delta: f64,
}

fn push_panel(out: &mut Vec<XiNode>, a: f64, b: f64, n: usize, panel: usize, part: Part, map: impl Fn(f64) -> (f64, f64)) {
    let fine = GaussLegendre::cached(n);
    let coarse = GaussLegendre::cached((n / 2).max(2));
    for (t, w) in fine.mapped(a, b) {
        let (xi, jac) = map(t);
        out.push(XiNode {
            xi,
            fine: w * jac,
            coarse: 0.0,
            panel,
            part,
        });
    }
    for (t, w) in coarse.mapped(a, b) {
        let (xi, jac) = map(t);
        out.push(XiNode {
            xi,
            fine: 0.0,
            coarse: w * jac,
            panel,
            part,
        });
    }
}

impl XiRule {
    /// `kinks` are signed offsets where the integrand loses smoothness
    /// (corners seen from the base point); they become panel breaks.
    fn new(curve: &SampledCurve, cfg: &QuadratureConfig, kinks: &[f64]) -> Self {
        let delta = curve.delta_window;
        let half = 0.5 * curve.length;
        let win = cfg.window;
        let xi0 = delta * (-win.depth).exp();
        let mut nodes = Vec::new();
        let mut panel = 0;
        for sign in [1.0, -1.0] {
            let side: Vec<f64> = kinks.iter().filter(|k| *k * sign > 0.0).map(|k| k.abs()).collect();
            let mut w_breaks = uniform_breaks(0.0, win.depth, win.panel_width);
            w_breaks.extend(side.iter().filter(|&&x| x > xi0 && x < delta).map(|&x| (delta / x).ln()));
            sort_breaks(&mut w_breaks);
            for w in w_breaks.windows(2) {
                push_panel(&mut nodes, w[0], w[1], win.nodes, panel, Part::Window, |t| {
                    let xi = delta * (-t).exp();
                    (sign * xi, xi)
                });
                panel += 1;
            }
            let mut r_breaks = graded_breaks(delta, half, delta * cfg.xi_panel_windows, curve.length / MIN_CURVE_PANELS);
            r_breaks.extend(side.iter().filter(|&&x| x > delta && x < half));
            sort_breaks(&mut r_breaks);
            for w in r_breaks.windows(2) {
                push_panel(&mut nodes, w[0], w[1], cfg.xi_nodes, panel, Part::Regular, |t| (sign * t, 1.0));
                panel += 1;
            }
        }
        let mut panel_parts = vec![Part::Regular; panel];
        for node in &nodes {
            panel_parts[node.panel] = node.part;
        }
        let probe = xi0 * (-1.0f64).exp();
        Self {
            nodes,
            panels: panel,
            panel_parts,
            tail_probes: [probe, -probe],
            xi0,
            delta,
        }
    }

    fn len(&self) -> usize {
        self.nodes.len() + 2
    }

    fn xi(&self, k: usize) -> f64 {
        if k < self.nodes.len() {
            self.nodes[k].xi
        } else {
            self.tail_probes[k - self.nodes.len()]
        }
    }

    /// Combines evaluated values (ordered like the nodes) into the two parts.
    fn combine(&self, values: &[Estimate]) -> DiagonalParts {
        let mut fine = vec![0.0; self.panels];
        let mut coarse = vec![0.0; self.panels];
        let mut parts = DiagonalParts::default();
        for (node, v) in self.nodes.iter().zip(values) {
            fine[node.panel] += node.fine * v.value;
            coarse[node.panel] += node.coarse * v.value;
            let target = match node.part {
                Part::Window => &mut parts.window,
                Part::Regular => &mut parts.regular,
            };
            target.err += node.fine * v.err;
        }
        for p in 0..self.panels {
            let target = match self.panel_parts[p] {
                Part::Window => &mut parts.window,
                Part::Regular => &mut parts.regular,
            };
            target.value += fine[p];
            target.err += (fine[p] - coarse[p]).abs();
        }
        // the fit misses terms of relative order ξ/δ
        for v in &values[self.nodes.len()..] {
            parts.window.value += self.xi0 * v.value;
            parts.window.err += self.xi0 * (v.err + v.value.abs() * self.xi0 / self.delta);
        }
        parts
    }
}

/// Panels of the regular part start at width `first` and double until they
/// reach `max(first, widest)`.
fn graded_breaks(a: f64, b: f64, first: f64, widest: f64) -> Vec<f64> {
    let cap = first.max(widest);
    let mut out = vec![a];
    let mut width = first;
    let mut x = a;
    while x < b {
        if b - x <= cap {
            out.extend(uniform_breaks(x, b, width.min(cap)).into_iter().skip(1));
            break;
        }
        x += width;
        out.push(x);
        width = (2.0 * width).min(cap);
    }
    out
}

fn sort_breaks(breaks: &mut Vec<f64>) {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
}

/// Corner offsets from base `s`, wrapped into `(-L/2, L/2]`.
fn corner_offsets(curve: &SampledCurve, s: f64) -> Vec<f64> {
    let l = curve.length;
    curve
        .corners
        .iter()
        .map(|&c| {
            let x = (c - s).rem_euclid(l);
            if x > 0.5 * l {
                x - l
            } else {
                x
            }
        })
        .filter(|x| *x != 0.0)
        .collect()
}

/// `(1/L) ∬ ds ds' f(pair(s, s'), s' - s)` over one curve.
fn diagonal_integral<F>(curve: &SampledCurve, cfg: &QuadratureConfig, f: F) -> DiagonalParts
where
    F: Fn(&PairGeometry, f64) -> Estimate + Sync,
{
    let bases: Vec<QuadNode> = if curve.homogeneous {
        vec![QuadNode {
            s: 0.0,
            point: curve.point_at(0.0),
            fine: curve.length,
            coarse: curve.length,
        }]
    } else {
        curve.rule.clone()
    };
    let rules: Vec<XiRule> = bases.iter().map(|b| XiRule::new(curve, cfg, &corner_offsets(curve, b.s))).collect();
    let mut offsets = Vec::with_capacity(rules.len() + 1);
    offsets.push(0);
    for r in &rules {
        offsets.push(offsets.last().unwrap() + r.len());
    }
    let total = *offsets.last().unwrap();
    let values: Vec<Estimate> = (0..total)
        .into_par_iter()
        .map(|k| {
            let b = offsets.partition_point(|&o| o <= k) - 1;
            let s = bases[b].s;
            let xi = rules[b].xi(k - offsets[b]);
            let pair = curve.manifold.pair(&bases[b].point, &curve.point_at(s + xi));
            f(&pair, xi)
        })
        .collect();
    let mut fine = DiagonalParts::default();
    let (mut coarse_w, mut coarse_r) = (0.0, 0.0);
    for (b, base) in bases.iter().enumerate() {
        let p = rules[b].combine(&values[offsets[b]..offsets[b + 1]]);
        fine.window += p.window.scaled(base.fine);
        fine.regular += p.regular.scaled(base.fine);
        coarse_w += base.coarse * p.window.value;
        coarse_r += base.coarse * p.regular.value;
    }
    fine.window.err += (coarse_w - fine.window.value).abs();
    fine.regular.err += (coarse_r - fine.regular.value).abs();
    fine.scaled(1.0 / curve.length)
}

/// `(1/√(L_a L_b)) ∬ ds ds' f(pair(s, s'))` over two distinct curves.
fn offdiagonal_integral<F>(a: &SampledCurve, b: &SampledCurve, f: F) -> Estimate
where
    F: Fn(&PairGeometry) -> Estimate + Sync,
{
    let pairs: Vec<(&QuadNode, &QuadNode)> = a
        .rule
        .iter()
        .flat_map(|p| b.rule.iter().map(move |q| (p, q)))
        .filter(|(p, q)| p.fine * q.fine != 0.0 || p.coarse * q.coarse != 0.0)
        .collect();
    let values: Vec<Estimate> = pairs.par_iter().map(|(p, q)| f(&a.manifold.pair(&p.point, &q.point))).collect();
    let mut total = Estimate::default();
    let mut coarse = 0.0;
    for ((p, q), v) in pairs.iter().zip(&values) {
        let w = p.fine * q.fine;
        total.value += w * v.value;
        total.err += w * v.err;
        coarse += p.coarse * q.coarse * v.value;
    }
    total.err += (coarse - total.value).abs();
    total.scaled(1.0 / (a.length * b.length).sqrt())
}

fn check_energy(e: f64, m: f64) -> Result<()> {
    if !(e.abs() < m) {
        return Err(domain(format!("energy {e} outside (-m, m) with m = {m}")));
    }
    Ok(())
}

/// `scale` is the size the relative tolerance refers to; for sums of parts
/// that cancel it is the sum of their magnitudes.
fn check_converged(location: String, value: Estimate, scale: f64, cfg: &QuadratureConfig) -> Result<()> {
    let tolerance = cfg.tolerance_for(scale);
    if !(value.err <= tolerance) || !value.value.is_finite() {
        return Err(Error::Convergence {
            location,
            err_estimate: value.err,
            tolerance,
        });
    }
    Ok(())
}

/// Minimal-prescription diagonal `(1/L)∬ G_ren(E, μ)`, split at the window.
pub fn renormalized_diagonal_parts(curve: &SampledCurve, e: f64, mu: f64, m: f64, cfg: &QuadratureConfig) -> Result<DiagonalParts> {
    check_energy(e, m)?;
    check_energy(mu, m)?;
    if e == mu {
        return Ok(DiagonalParts::default());
    }
    Ok(diagonal_integral(curve, cfg, |pair, _| renormalized_on_pair(e, mu, m, pair, cfg)))
}

/// RG-prescription diagonal without the coupling term, split at the window.
pub fn rg_diagonal_parts(curve: &SampledCurve, e: f64, mu: f64, m: f64, cfg: &QuadratureConfig) -> Result<DiagonalParts> {
    check_energy(e, m)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("RG scale must be positive, got mu = {mu}")));
    }
    if !(e < mu) {
        return Err(domain(format!("RG prescription needs E < mu, got E = {e}, mu = {mu}")));
    }
    let l = curve.length;
    Ok(diagonal_integral(curve, cfg, |pair, xi| counterterm_on_pair(e, mu, m, xi, l, pair, cfg)))
}

/// `Φ_R(E) = 1/λ_R + (1/L)∬[counterterm(μ) - G(E)]` for a single curve.
pub fn rg_assemble(curve: &SampledCurve, e: f64, mu: f64, lambda_r: f64, m: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(lambda_r > 0.0) {
        return Err(domain(format!("renormalized coupling must be positive, got {lambda_r}")));
    }
    let parts = rg_diagonal_parts(curve, e, mu, m, cfg)?;
    let total = parts.total();
    check_converged("rg diagonal".into(), total, parts.magnitude(), cfg)?;
    Ok(1.0 / lambda_r + total.value)
}

fn diagonal_entry(family: &CurveFamily, i: usize, e: f64, p: &Prescription, cfg: &QuadratureConfig) -> Result<(Estimate, f64)> {
    let curve = &family.curves[i];
    let m = family.mass;
    let parts = match *p {
        Prescription::MinimalBoundState => renormalized_diagonal_parts(curve, e, family.mu[i], m, cfg)?,
        Prescription::RgScale { mu, .. } => rg_diagonal_parts(curve, e, mu, m, cfg)?,
    };
    let mut total = parts.total();
    total.value += p.inverse_coupling();
    Ok((total, parts.magnitude() + p.inverse_coupling().abs()))
}

fn build_matrix(
    family: &CurveFamily,
    e: f64,
    cfg: &QuadratureConfig,
    diagonal: impl Fn(usize) -> Result<(Estimate, f64)>,
    offdiagonal: impl Fn(usize, usize) -> Estimate,
) -> Result<PrincipalMatrix> {
    let n = family.len();
    let mut entries = DMatrix::zeros(n, n);
    let mut err = DMatrix::zeros(n, n);
    for i in 0..n {
        let (d, scale) = diagonal(i)?;
        check_converged(format!("entry ({i}, {i}) at E = {e}"), d, scale, cfg)?;
        entries[(i, i)] = d.value;
        err[(i, i)] = d.err;
        for j in (i + 1)..n {
            let o = offdiagonal(i, j);
            check_converged(format!("entry ({i}, {j}) at E = {e}"), o, o.value.abs(), cfg)?;
            entries[(i, j)] = o.value;
            entries[(j, i)] = o.value;
            err[(i, j)] = o.err;
            err[(j, i)] = o.err;
        }
    }
    Ok(PrincipalMatrix {
        energy: e,
        entries,
        err,
        fingerprint: family_fingerprint(family),
    })
}

/// `Φ_ij(E)` for the whole family.
pub fn assemble(family: &CurveFamily, e: f64, p: &Prescription, cfg: &QuadratureConfig) -> Result<PrincipalMatrix> {
    let m = family.mass;
    check_energy(e, m)?;
    p.validate()?;
    if let Prescription::RgScale { mu, .. } = *p {
        if !(e < mu) {
            return Err(domain(format!("RG prescription needs E < mu, got E = {e}, mu = {mu}")));
        }
    }
    build_matrix(
        family,
        e,
        cfg,
        |i| diagonal_entry(family, i, e, p, cfg),
        |i, j| {
            offdiagonal_integral(&family.curves[i], &family.curves[j], |pair| plain_on_pair(e, m, pair, cfg)).scaled(-1.0)
        },
    )
}

/// `∂Φ_ij/∂E`; identical for both prescriptions.
pub fn derivative_matrix(family: &CurveFamily, e: f64, cfg: &QuadratureConfig) -> Result<PrincipalMatrix> {
    let m = family.mass;
    check_energy(e, m)?;
    build_matrix(
        family,
        e,
        cfg,
        |i| {
            let parts = diagonal_integral(&family.curves[i], cfg, |pair, _| derivative_on_pair(e, m, pair, cfg));
            Ok((parts.total().scaled(-1.0), parts.magnitude()))
        },
        |i, j| {
            offdiagonal_integral(&family.curves[i], &family.curves[j], |pair| derivative_on_pair(e, m, pair, cfg))
                .scaled(-1.0)
        },
    )
}
