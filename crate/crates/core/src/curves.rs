//! Closed curves: construction, arc-length sampling and the geometric
//! quantities the principal operator needs (length, curvature bound,
//! singular window, self-distance, pairwise separations).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, validation, Result};
use crate::manifold::{euclidean_norm, sub, ManifoldSpec, Point};
use crate::quadrature::rules::{uniform_breaks, GaussLegendre};

/// Safety factor applied to discrete curvature estimates.
const CURVATURE_SAFETY: f64 = 1.1;

/// Minimum number of sample nodes a `2δ` window should hold.
const NODES_PER_WINDOW: f64 = 4.0;

/// Intervals of the arc-length table for curves without a closed form.
const ARC_TABLE_INTERVALS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveShape {
    Circle {
        center: Point,
        radius: f64,
        /// Normal of the plane of the circle; normalized on use.
        normal: Point,
    },
    /// Closed polyline; a repeated final point is dropped.
    ParametricSamples { points: Vec<Point> },
    /// Closed geodesic of the flat torus winding `(p, q, r)` times around the cell.
    TorusLoop {
        winding: [i32; 3],
        #[serde(default)]
        offsets: Point,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub shape: CurveShape,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    64
}

impl CurveSpec {
    pub fn circle(center: Point, radius: f64, normal: Point, samples: usize) -> Self {
        Self {
            shape: CurveShape::Circle { center, radius, normal },
            samples,
        }
    }

    pub fn polyline(points: Vec<Point>, samples: usize) -> Self {
        Self {
            shape: CurveShape::ParametricSamples { points },
            samples,
        }
    }

    pub fn torus_loop(winding: [i32; 3], offsets: Point, samples: usize) -> Self {
        Self {
            shape: CurveShape::TorusLoop { winding, offsets },
            samples,
        }
    }

    /// The same curve with all coordinates multiplied by `factor` (flat space only).
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |p: &Point| [p[0] * factor, p[1] * factor, p[2] * factor];
        let shape = match &self.shape {
            CurveShape::Circle { center, radius, normal } => CurveShape::Circle {
                center: scale(center),
                radius: radius * factor,
                normal: *normal,
            },
            CurveShape::ParametricSamples { points } => CurveShape::ParametricSamples {
                points: points.iter().map(scale).collect(),
            },
            CurveShape::TorusLoop { winding, offsets } => CurveShape::TorusLoop {
                winding: *winding,
                offsets: scale(offsets),
            },
        };
        Self {
            shape,
            samples: self.samples,
        }
    }
}

/// Continuous arc-length parametrization backing a sampled curve.
#[derive(Debug, Clone)]
enum Trace {
    /// `center + R(cos φ e₁ + sin φ e₂)` traversed at unit speed.
    FlatCircle { center: Point, radius: f64, e1: Point, e2: Point },
    FlatLine { origin: Point, step: Point },
    /// Polyline with cumulative arc lengths, straight in coordinates.
    Polyline { points: Vec<Point>, cum: Vec<f64>, hyperbolic_radius: Option<f64> },
    /// Hyperbolic circle parametrized by coordinate angle, with an arc-length table.
    HyperbolicCircle {
        center: Point,
        radius: f64,
        e1: Point,
        e2: Point,
        a: f64,
        cum: Vec<f64>,
    },
}

fn axpy(x: &Point, a: f64, y: &Point) -> Point {
    [x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]]
}

fn dot(x: &Point, y: &Point) -> f64 {
    x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
}

fn cross(x: &Point, y: &Point) -> Point {
    [
        x[1] * y[2] - x[2] * y[1],
        x[2] * y[0] - x[0] * y[2],
        x[0] * y[1] - x[1] * y[0],
    ]
}

fn normalized(x: &Point) -> Option<Point> {
    let n = euclidean_norm(x);
    (n > 0.0 && n.is_finite()).then(|| [x[0] / n, x[1] / n, x[2] / n])
}

/// Orthonormal basis `(e₁, e₂)` of the plane orthogonal to `normal`.
fn plane_basis(normal: &Point) -> Option<(Point, Point)> {
    let n = normalized(normal)?;
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalized(&cross(&n, &helper))?;
    let e2 = cross(&n, &e1);
    Some((e1, e2))
}

impl Trace {
    fn hyperbolic_circle_point(center: &Point, radius: f64, e1: &Point, e2: &Point, phi: f64) -> Point {
        axpy(&axpy(center, radius * phi.cos(), e1), radius * phi.sin(), e2)
    }

    /// Hyperbolic speed `a|c'(φ)|/z` of the coordinate circle.
    fn hyperbolic_circle_speed(center: &Point, radius: f64, e1: &Point, e2: &Point, a: f64, phi: f64) -> f64 {
        let p = Self::hyperbolic_circle_point(center, radius, e1, e2, phi);
        a * radius / p[2]
    }

    fn point_at(&self, s: f64, length: f64) -> Point {
        let s = s.rem_euclid(length);
        match self {
            Trace::FlatCircle { center, radius, e1, e2 } => {
                let phi = s / radius;
                axpy(&axpy(center, radius * phi.cos(), e1), radius * phi.sin(), e2)
            }
            Trace::FlatLine { origin, step } => axpy(origin, s, step),
            Trace::Polyline {
                points,
                cum,
                hyperbolic_radius,
            } => {
                let k = cum.partition_point(|&c| c <= s).clamp(1, points.len()) - 1;
                let p = points[k];
                let q = points[(k + 1) % points.len()];
                let local = s - cum[k];
                let seg = sub(&q, &p);
                let t = match hyperbolic_radius {
                    None => local / (cum[k + 1] - cum[k]),
                    Some(a) => {
                        let chord = euclidean_norm(&seg);
                        let dz = seg[2];
                        if dz.abs() <= 1e-12 * p[2] {
                            local * p[2] / (a * chord)
                        } else {
                            p[2] * ((local * dz / (a * chord)).exp() - 1.0) / dz
                        }
                    }
                };
                axpy(&p, t.clamp(0.0, 1.0), &seg)
            }
            Trace::HyperbolicCircle {
                center,
                radius,
                e1,
                e2,
                a,
                cum,
            } => {
                let h = 2.0 * PI / ARC_TABLE_INTERVALS as f64;
                let k = (cum.partition_point(|&c| c <= s).clamp(1, ARC_TABLE_INTERVALS)) - 1;
                let phi0 = k as f64 * h;
                let speed = |phi: f64| Self::hyperbolic_circle_speed(center, *radius, e1, e2, *a, phi);
                let rule = GaussLegendre::cached(8);
                let mut phi = phi0 + h * (s - cum[k]) / (cum[k + 1] - cum[k]);
                for _ in 0..20 {
                    let arc = cum[k] + rule.integrate(phi0, phi, speed);
                    let step = (arc - s) / speed(phi);
                    phi -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                Self::hyperbolic_circle_point(center, *radius, e1, e2, phi)
            }
        }
    }
}

/// A closed curve sampled at uniform arc-length nodes.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    pub spec: CurveSpec,
    pub manifold: ManifoldSpec,
    /// Arc-length positions `s_k = kL/n`.
    pub nodes: Vec<f64>,
    pub points: Vec<Point>,
    /// Trapezoid weights, all equal to `L/n`.
    pub weights: Vec<f64>,
    pub length: f64,
    pub kappa_star: f64,
    /// Half-width `δ` of the near-diagonal window, `min(1/(4κ*), L/8)`.
    pub delta_window: f64,
    /// Minimum distance over node pairs farther than `δ` apart along the curve.
    pub self_distance: f64,
    /// `false` when the `2δ` window holds fewer than four nodes.
    pub window_resolved: bool,
    /// The diagonal pair integral is the same from every base point (an
    /// isometry acts transitively along the curve).
    pub homogeneous: bool,
    /// Arc-length positions of polyline corners; empty for smooth curves.
    pub corners: Vec<f64>,
    /// Outer rule for integrals along the curve.
    pub rule: Vec<QuadNode>,
    trace: Trace,
}

/// Node of the outer arc-length rule, carrying weights of a fine rule and of
/// a coarser companion used for the error estimate (either may be zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadNode {
    pub s: f64,
    pub point: Point,
    pub fine: f64,
    pub coarse: f64,
}

/// Panel length of the polyline rule, in units of the sample spacing.
const POLYLINE_PANEL_SPACINGS: f64 = 4.0;
const POLYLINE_PANEL_NODES: usize = 16;

/// Periodic trapezoid on the uniform nodes, with every other node as companion.
fn trapezoid_rule(nodes: &[f64], points: &[Point], h: f64) -> Vec<QuadNode> {
    let n = nodes.len();
    let nested = n.is_multiple_of(2);
    (0..n)
        .map(|k| QuadNode {
            s: nodes[k],
            point: points[k],
            fine: h,
            coarse: match (nested, k % 2) {
                (false, _) => h,
                (true, 0) => 2.0 * h,
                (true, _) => 0.0,
            },
        })
        .collect()
}

/// Gauss–Legendre panels that never straddle a corner.
fn corner_aligned_rule(trace: &Trace, corners: &[f64], length: f64, h: f64) -> Vec<QuadNode> {
    let fine = GaussLegendre::cached(POLYLINE_PANEL_NODES);
    let coarse = GaussLegendre::cached(POLYLINE_PANEL_NODES / 2);
    let mut out = Vec::new();
    for (k, &a) in corners.iter().enumerate() {
        let b = corners.get(k + 1).copied().unwrap_or(length);
        for w in uniform_breaks(a, b, POLYLINE_PANEL_SPACINGS * h).windows(2) {
            for (s, wt) in fine.mapped(w[0], w[1]) {
                out.push(QuadNode { s, point: trace.point_at(s, length), fine: wt, coarse: 0.0 });
            }
            for (s, wt) in coarse.mapped(w[0], w[1]) {
                out.push(QuadNode { s, point: trace.point_at(s, length), fine: 0.0, coarse: wt });
            }
        }
    }
    out
}

impl SampledCurve {
    /// Point at arc length `s` (taken modulo `L`).
    pub fn point_at(&self, s: f64) -> Point {
        self.trace.point_at(s, self.length)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Geodesic distance between the points at arc lengths `s` and `t`.
    pub fn distance(&self, s: f64, t: f64) -> f64 {
        self.manifold.pair(&self.point_at(s), &self.point_at(t)).distance()
    }

    /// The same curve with every length multiplied by `factor` (Euclidean space only).
    pub fn scaled(&self, factor: f64) -> Result<SampledCurve> {
        if self.manifold != ManifoldSpec::Euclidean3 {
            return Err(domain("curve scaling is only defined on Euclidean space"));
        }
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(domain(format!("scale factor must be positive, got {factor}")));
        }
        resample_arclength(&self.spec.scaled(factor), self.len(), &self.manifold)
    }
}

fn build_trace(spec: &CurveSpec, manifold: &ManifoldSpec) -> Result<(Trace, f64)> {
    match (&spec.shape, manifold) {
        (CurveShape::Circle { center, radius, normal }, _) => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(validation(format!("circle radius must be positive, got {radius}")));
            }
            let (e1, e2) = plane_basis(normal).ok_or_else(|| validation("circle normal must be a nonzero vector"))?;
            match manifold {
                ManifoldSpec::Hyperbolic3 { radius: a } => {
                    let lowest = center[2] - radius * (e1[2].powi(2) + e2[2].powi(2)).sqrt();
                    if !(lowest > 0.0) {
                        return Err(validation("circle leaves the upper half-space"));
                    }
                    let h = 2.0 * PI / ARC_TABLE_INTERVALS as f64;
                    let rule = GaussLegendre::cached(8);
                    let mut cum = Vec::with_capacity(ARC_TABLE_INTERVALS + 1);
                    cum.push(0.0);
                    for k in 0..ARC_TABLE_INTERVALS {
                        let phi = k as f64 * h;
                        let piece = rule.integrate(phi, phi + h, |p| {
                            Trace::hyperbolic_circle_speed(center, *radius, &e1, &e2, *a, p)
                        });
                        cum.push(cum[k] + piece);
                    }
                    let length = cum[ARC_TABLE_INTERVALS];
                    let trace = Trace::HyperbolicCircle {
                        center: *center,
                        radius: *radius,
                        e1,
                        e2,
                        a: *a,
                        cum,
                    };
                    Ok((trace, length))
                }
                _ => Ok((
                    Trace::FlatCircle {
                        center: *center,
                        radius: *radius,
                        e1,
                        e2,
                    },
                    2.0 * PI * radius,
                )),
            }
        }
        (CurveShape::ParametricSamples { points }, _) => {
            let mut pts = points.clone();
            if pts.len() >= 2 && pts.first() == pts.last() {
                pts.pop();
            }
            if pts.len() < 3 {
                return Err(validation("a closed polyline needs at least three distinct points"));
            }
            if pts.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                return Err(validation("polyline points must be finite"));
            }
            let hyperbolic_radius = match manifold {
                ManifoldSpec::Hyperbolic3 { radius } => Some(*radius),
                _ => None,
            };
            let n = pts.len();
            let mut cum = Vec::with_capacity(n + 1);
            cum.push(0.0);
            for k in 0..n {
                let p = pts[k];
                let q = pts[(k + 1) % n];
                let chord = euclidean_norm(&sub(&q, &p));
                if chord <= 1e-14 * (1.0 + euclidean_norm(&p)) {
                    return Err(validation(format!("polyline has repeated consecutive points at index {k}")));
                }
                let seg = match hyperbolic_radius {
                    None => chord,
                    Some(a) => {
                        if !(p[2] > 0.0 && q[2] > 0.0) {
                            return Err(validation("polyline leaves the upper half-space"));
                        }
                        let dz = q[2] - p[2];
                        if dz.abs() <= 1e-12 * p[2] {
                            a * chord / p[2]
                        } else {
                            a * chord * (q[2] / p[2]).ln() / dz
                        }
                    }
                };
                cum.push(cum[k] + seg);
            }
            check_polyline_simple(&pts)?;
            let length = cum[n];
            Ok((
                Trace::Polyline {
                    points: pts,
                    cum,
                    hyperbolic_radius,
                },
                length,
            ))
        }
        (CurveShape::TorusLoop { winding, offsets }, ManifoldSpec::FlatTorus3 { lengths }) => {
            if winding.iter().all(|&w| w == 0) {
                return Err(validation("torus loop needs a nonzero winding vector"));
            }
            let span = [
                winding[0] as f64 * lengths[0],
                winding[1] as f64 * lengths[1],
                winding[2] as f64 * lengths[2],
            ];
            let length = euclidean_norm(&span);
            let step = [span[0] / length, span[1] / length, span[2] / length];
            Ok((Trace::FlatLine { origin: *offsets, step }, length))
        }
        (CurveShape::TorusLoop { .. }, _) => Err(validation("torus loops require the flat torus manifold")),
    }
}

/// Euclidean distance between segments `[p0, p1]` and `[q0, q1]`.
pub(crate) fn segment_distance(p0: &Point, p1: &Point, q0: &Point, q1: &Point) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let c = dot(&d1, &r);
    let b = dot(&d1, &d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    let cp = axpy(p0, s, &d1);
    let cq = axpy(q0, t, &d2);
    euclidean_norm(&sub(&cp, &cq))
}

fn check_polyline_simple(pts: &[Point]) -> Result<()> {
    let n = pts.len();
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let d = segment_distance(&pts[i], &pts[(i + 1) % n], &pts[j], &pts[(j + 1) % n]);
            if d <= 1e-12 {
                return Err(validation(format!("polyline self-intersects between segments {i} and {j}")));
            }
        }
    }
    Ok(())
}

/// Menger curvature `4·Area/(abc)` of a triangle with side lengths `a, b, c`.
fn menger_curvature(a: f64, b: f64, c: f64) -> f64 {
    let s = 0.5 * (a + b + c);
    let area2 = (s * (s - a) * (s - b) * (s - c)).max(0.0);
    4.0 * area2.sqrt() / (a * b * c)
}

/// Samples a curve at `n` uniform arc-length nodes and populates its geometry.
pub fn resample_arclength(spec: &CurveSpec, n: usize, manifold: &ManifoldSpec) -> Result<SampledCurve> {
    if n < 8 {
        return Err(validation(format!("need at least 8 samples per curve, got {n}")));
    }
    manifold.validate()?;
    let (trace, length) = build_trace(spec, manifold)?;
    if !(length > 0.0 && length.is_finite()) {
        return Err(validation("curve has zero or non-finite length"));
    }
    let h = length / n as f64;
    let nodes: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
    let points: Vec<Point> = nodes.iter().map(|&s| trace.point_at(s, length)).collect();
    for p in &points {
        manifold.check_point(p)?;
    }
    let weights = vec![h; n];
    let dist = |i: usize, j: usize| manifold.pair(&points[i], &points[j]).distance();

    let flat = manifold.is_flat();
    let (kappa_star, homogeneous) = match (&spec.shape, manifold) {
        (CurveShape::Circle { radius, .. }, ManifoldSpec::Euclidean3) => (1.0 / radius, true),
        (CurveShape::Circle { radius, .. }, ManifoldSpec::FlatTorus3 { .. }) => (1.0 / radius, false),
        (CurveShape::TorusLoop { .. }, _) => (0.0, true),
        (shape, _) => {
            let kappa = (0..n)
                .map(|k| {
                    let (a, b) = ((k + n - 1) % n, (k + 1) % n);
                    menger_curvature(dist(a, k), dist(k, b), dist(a, b))
                })
                .fold(0.0, f64::max);
            let level = match (shape, manifold) {
                (CurveShape::Circle { normal, .. }, ManifoldSpec::Hyperbolic3 { .. }) => {
                    plane_basis(normal).is_some_and(|(e1, e2)| e1[2] == 0.0 && e2[2] == 0.0)
                }
                _ => false,
            };
            (CURVATURE_SAFETY * kappa, level)
        }
    };
    let delta_window = if kappa_star > 0.0 {
        (0.25 / kappa_star).min(length / 8.0)
    } else {
        length / 8.0
    };

    let mut self_distance = f64::INFINITY;
    let shrink = (1.0 - kappa_star * delta_window).sqrt();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (j - i) as f64 * h;
            let xi = gap.min(length - gap);
            let d = dist(i, j);
            if xi > delta_window {
                self_distance = self_distance.min(d);
            } else if flat {
                let tol = 1e-12 * xi;
                if d > xi + tol || d < shrink * xi - tol {
                    return Err(validation(format!(
                        "chord bound violated between nodes {i} and {j}: d = {d}, arc = {xi}"
                    )));
                }
            }
        }
    }
    if !(self_distance > 0.0) {
        return Err(validation("curve comes back onto itself (zero self-distance)"));
    }
    let window_resolved = 2.0 * delta_window / h >= NODES_PER_WINDOW;
    let corners = match &trace {
        Trace::Polyline { points, cum, .. } => cum[..points.len()].to_vec(),
        _ => Vec::new(),
    };
    let rule = if corners.is_empty() {
        trapezoid_rule(&nodes, &points, h)
    } else {
        corner_aligned_rule(&trace, &corners, length, h)
    };
    Ok(SampledCurve {
        spec: spec.clone(),
        manifold: *manifold,
        nodes,
        points,
        weights,
        length,
        kappa_star,
        delta_window,
        self_distance,
        window_resolved,
        homogeneous,
        corners,
        rule,
        trace,
    })
}

/// Curves together with their binding scales and pairwise minimum distances.
#[derive(Debug, Clone)]
pub struct CurveFamily {
    pub curves: Vec<SampledCurve>,
    pub mu: Vec<f64>,
    pub mass: f64,
    pub d_matrix: Vec<Vec<f64>>,
}

impl CurveFamily {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.curves[0].manifold
    }

    pub fn mu_min(&self) -> f64 {
        self.mu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_length(&self) -> f64 {
        self.curves.iter().map(|c| c.length).fold(f64::INFINITY, f64::min)
    }

    pub fn max_length(&self) -> f64 {
        self.curves.iter().map(|c| c.length).fold(0.0, f64::max)
    }

    /// Smallest off-diagonal distance; infinite for a single curve.
    pub fn min_separation(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, row) in self.d_matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    d = d.min(*v);
                }
            }
        }
        d
    }
}

/// Builds a family, checking disjointness and the binding-scale range.
pub fn family_geometry(curves: Vec<SampledCurve>, manifold: &ManifoldSpec, mu: Vec<f64>, mass: f64) -> Result<CurveFamily> {
    if curves.is_empty() {
        return Err(validation("a family needs at least one curve"));
    }
    if mu.len() != curves.len() {
        return Err(validation(format!("{} binding scales for {} curves", mu.len(), curves.len())));
    }
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(domain(format!("mass must be positive, got {mass}")));
    }
    if let Some(c) = curves.iter().position(|c| c.manifold != *manifold) {
        return Err(validation(format!("curve {c} was sampled on a different manifold")));
    }
    if let Some((i, m)) = mu.iter().enumerate().find(|(_, m)| !(m.abs() < mass)) {
        return Err(domain(format!("binding scale mu[{i}] = {m} outside (-m, m) with m = {mass}")));
    }
    let n = curves.len();
    let mut d_matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d = f64::INFINITY;
            for p in &curves[i].points {
                for q in &curves[j].points {
                    d = d.min(manifold.pair(p, q).distance());
                }
            }
            if *manifold == ManifoldSpec::Euclidean3 {
                let (a, b) = (&curves[i].points, &curves[j].points);
                let mut seg = f64::INFINITY;
                for k in 0..a.len() {
                    for l in 0..b.len() {
                        seg = seg.min(segment_distance(&a[k], &a[(k + 1) % a.len()], &b[l], &b[(l + 1) % b.len()]));
                    }
                }
                if seg <= 1e-12 {
                    return Err(validation(format!("curves {i} and {j} intersect")));
                }
            }
            if !(d > 0.0) {
                return Err(validation(format!("curves {i} and {j} intersect")));
            }
            d_matrix[i][j] = d;
            d_matrix[j][i] = d;
        }
    }
    Ok(CurveFamily {
        curves,
        mu,
        mass,
        d_matrix,
    })
}

/// Samples every spec and builds the family.
pub fn build_family(specs: &[CurveSpec], manifold: &ManifoldSpec, mu: Vec<f64>, mass: f64) -> Result<CurveFamily> {
    let curves = specs
        .iter()
        .map(|s| resample_arclength(s, s.samples, manifold))
        .collect::<Result<Vec<_>>>()?;
    family_geometry(curves, manifold, mu, mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    const E3: ManifoldSpec = ManifoldSpec::Euclidean3;

    fn unit_circle(n: usize) -> SampledCurve {
        resample_arclength(&CurveSpec::circle([0.0; 3], 1.0, [0.0, 0.0, 1.0], n), n, &E3).unwrap()
    }

    #[test]
    fn circle_geometry_is_exact() {
        let c = unit_circle(64);
        assert!((c.length - 2.0 * PI).abs() < 1e-15);
        assert_eq!(c.kappa_star, 1.0);
        assert!(c.weights.iter().all(|&w| (w - 2.0 * PI / 64.0).abs() < 1e-16));
        assert_eq!(c.delta_window, 0.25);
        assert!(c.homogeneous && c.window_resolved);
        let total: f64 = c.weights.iter().sum();
        assert!((total - c.length).abs() < 1e-10 * c.length);
    }

    #[test]
    fn adjacent_chord_of_radius_two_circle() {
        let spec = CurveSpec::circle([1.0, 2.0, 3.0], 2.0, [1.0, 1.0, 0.0], 32);
        let c = resample_arclength(&spec, 32, &E3).unwrap();
        let chord = euclidean_norm(&sub(&c.points[1], &c.points[0]));
        assert!((chord - 4.0 * (PI / 32.0).sin()).abs() < 1e-14);
    }

    #[test]
    fn square_loop_length() {
        let square = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let oracle: f64 = (0..4).map(|k| euclidean_norm(&sub(&square[(k + 1) % 4], &square[k]))).sum();
        let c = resample_arclength(&CurveSpec::polyline(square, 40), 40, &E3).unwrap();
        assert!((c.length - oracle).abs() < 1e-6);
        assert!((c.length - 4.0).abs() < 1e-12);
        // nodes land on the corners, where the discrete curvature is large
        assert!(c.kappa_star > 10.0);
        assert!(!c.window_resolved);
    }

    #[test]
    fn circle_self_distance_profile() {
        let c = unit_circle(48);
        for k in 1..48 {
            let xi = c.nodes[k];
            let d = E3.pair(&c.points[0], &c.points[k]).distance();
            let want = 2.0 * (0.5 * xi).sin();
            assert!(((d - want) / want).abs() < 1e-12);
        }
        // the nearest pair outside the δ = 1/4 window is two steps apart
        assert!((c.self_distance - 2.0 * (2.0 * PI / 48.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn refinement_keeps_length() {
        let pts: Vec<Point> = (0..200)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 200.0;
                [t.cos() * (1.0 + 0.2 * (3.0 * t).cos()), t.sin(), 0.1 * t.sin()]
            })
            .collect();
        let a = resample_arclength(&CurveSpec::polyline(pts.clone(), 64), 64, &E3).unwrap();
        let b = resample_arclength(&CurveSpec::polyline(pts, 128), 128, &E3).unwrap();
        assert!(((a.length - b.length) / a.length).abs() < 1e-8);
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let bad_radius = CurveSpec::circle([0.0; 3], 0.0, [0.0, 0.0, 1.0], 16);
        assert!(resample_arclength(&bad_radius, 16, &E3).is_err());
        let bad_normal = CurveSpec::circle([0.0; 3], 1.0, [0.0; 3], 16);
        assert!(resample_arclength(&bad_normal, 16, &E3).is_err());
        let repeated = CurveSpec::polyline(vec![[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 16);
        assert!(resample_arclength(&repeated, 16, &E3).is_err());
        let bow_tie = CurveSpec::polyline(vec![[0.0; 3], [1.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 16);
        assert!(resample_arclength(&bow_tie, 16, &E3).is_err());
        assert!(resample_arclength(&CurveSpec::circle([0.0; 3], 1.0, [0.0, 0.0, 1.0], 4), 4, &E3).is_err());
        let loop_in_flat = CurveSpec::torus_loop([1, 0, 0], [0.0; 3], 16);
        assert!(resample_arclength(&loop_in_flat, 16, &E3).is_err());
    }

    #[test]
    fn torus_loop_is_a_straight_geodesic() {
        let t = ManifoldSpec::FlatTorus3 { lengths: [2.0, 3.0, 4.0] };
        let c = resample_arclength(&CurveSpec::torus_loop([1, 1, 0], [0.1, 0.2, 0.3], 32), 32, &t).unwrap();
        assert!((c.length - 13f64.sqrt()).abs() < 1e-14);
        assert_eq!(c.kappa_star, 0.0);
        assert!((c.delta_window - c.length / 8.0).abs() < 1e-15);
        let p = c.point_at(c.length);
        assert!(t.pair(&p, &c.points[0]).distance() < 1e-12);
    }

    #[test]
    fn hyperbolic_level_circle_matches_closed_form() {
        let h = ManifoldSpec::Hyperbolic3 { radius: 1.5 };
        let c = resample_arclength(&CurveSpec::circle([0.0, 0.0, 2.0], 0.5, [0.0, 0.0, 1.0], 32), 32, &h).unwrap();
        assert!((c.length - 1.5 * 2.0 * PI * 0.5 / 2.0).abs() < 1e-12);
        assert!(c.homogeneous);
        // tilted circle: arc-length nodes are equally spaced along the curve
        let t = resample_arclength(&CurveSpec::circle([0.0, 0.0, 2.0], 0.5, [1.0, 0.0, 1.0], 64), 64, &h).unwrap();
        assert!(!t.homogeneous);
        let gaps: Vec<f64> = (0..64).map(|k| t.distance(t.nodes[k], t.nodes[(k + 1) % 64])).collect();
        let (lo, hi) = gaps.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &g| (a.min(g), b.max(g)));
        assert!(hi - lo < 1e-3 * hi);
        assert!((t.point_at(0.0)[2] - t.point_at(t.length)[2]).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_polyline_arc_length_inversion() {
        let h = ManifoldSpec::Hyperbolic3 { radius: 1.0 };
        let tri = vec![[0.0, 0.0, 1.0], [1.0, 0.0, 2.0], [0.0, 1.0, 1.5]];
        let c = resample_arclength(&CurveSpec::polyline(tri, 60), 60, &h).unwrap();
        // geodesic chords between points one small arc step apart are never
        // longer than the step, and away from the three corners they match it
        let steps = 6000;
        let h_arc = c.length / steps as f64;
        let mut close = 0;
        for k in 0..steps {
            let s0 = h_arc * k as f64;
            let d = h.pair(&c.point_at(s0), &c.point_at(s0 + h_arc)).distance();
            assert!(d <= h_arc * (1.0 + 1e-9));
            if d >= h_arc * (1.0 - 1e-6) {
                close += 1;
            }
        }
        assert!(close >= steps - 3);
    }

    #[test]
    fn coaxial_circles_family() {
        let a = CurveSpec::circle([0.0; 3], 1.0, [0.0, 0.0, 1.0], 32);
        let b = CurveSpec::circle([0.0, 0.0, 5.0], 1.0, [0.0, 0.0, 1.0], 32);
        let fam = build_family(&[a.clone(), b], &E3, vec![0.0, 0.0], 1.0).unwrap();
        // brute-force oracle over sample pairs
        let mut oracle = f64::INFINITY;
        for p in &fam.curves[0].points {
            for q in &fam.curves[1].points {
                oracle = oracle.min(euclidean_norm(&sub(p, q)));
            }
        }
        assert_eq!(fam.d_matrix[0][1], oracle);
        assert!((fam.d_matrix[0][1] - 5.0).abs() < 1e-14);
        assert_eq!(fam.d_matrix[1][0], fam.d_matrix[0][1]);
        let single = build_family(std::slice::from_ref(&a), &E3, vec![0.0], 1.0).unwrap();
        assert_eq!(single.d_matrix, vec![vec![0.0]]);
        assert!(matches!(
            build_family(std::slice::from_ref(&a), &E3, vec![1.5], 1.0),
            Err(crate::Error::Domain(_))
        ));
        let crossing = CurveSpec::circle([1.0, 0.0, 0.0], 1.0, [0.0, 0.0, 1.0], 32);
        assert!(build_family(&[a.clone(), crossing], &E3, vec![0.0, 0.0], 1.0).is_err());
        assert!(build_family(&[a.clone(), a], &E3, vec![0.0, 0.0], 1.0).is_err());
    }
}
