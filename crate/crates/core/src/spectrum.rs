//! Eigenvalues of `Φ(E)`, ground-state root finding and the
//! Feynman–Hellman and Perron checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::curves::CurveFamily;
use crate::error::{domain, Result};
use crate::principal::{assemble, derivative_matrix, Prescription};
use crate::quadrature::QuadratureConfig;

/// Off-diagonal entries below this magnitude mark the family as disconnected.
pub const DISCONNECTED_THRESHOLD: f64 = 1e-14;

/// Relative eigenvalue gap below which the Feynman–Hellman check is skipped.
pub const DEGENERACY_GAP: f64 = 1e-6;

/// Default bracket stops short of `-m`, where the integrals degrade.
pub const BRACKET_FLOOR: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` belongs to `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    /// Lowest eigenvector with the sign chosen so its components sum to a positive number.
    pub fn ground_vector(&self) -> Vec<f64> {
        let v: Vec<f64> = self.vectors.column(0).iter().copied().collect();
        let sum: f64 = v.iter().sum();
        if sum < 0.0 {
            v.iter().map(|x| -x).collect()
        } else {
            v
        }
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub fn eigen_decompose(m: &DMatrix<f64>) -> Result<Eigen> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(domain("eigendecomposition needs a nonempty square matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(domain("matrix has non-finite entries"));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(Eigen { values, vectors })
}

/// Number of negative components of a sign-normalized ground vector.
pub fn perron_violations(v: &[f64]) -> usize {
    v.iter().filter(|&&x| x <= 0.0).count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralFlowResult {
    pub energies: Vec<f64>,
    /// `eigenvalues[i][k]` is `ω^(k)` at `energies[i]`, ascending in `k`.
    pub eigenvalues: Vec<Vec<f64>>,
    pub ground_vectors: Vec<Vec<f64>>,
}

/// Eigenvalues of `Φ(E)` over an energy grid.
pub fn spectral_flow(family: &CurveFamily, p: &Prescription, cfg: &QuadratureConfig, energies: &[f64]) -> Result<SpectralFlowResult> {
    let points = energies
        .par_iter()
        .map(|&e| {
            let phi = assemble(family, e, p, cfg)?;
            let eig = eigen_decompose(&phi.entries)?;
            Ok((eig.values.clone(), eig.ground_vector()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (eigenvalues, ground_vectors) = points.into_iter().unzip();
    Ok(SpectralFlowResult {
        energies: energies.to_vec(),
        eigenvalues,
        ground_vectors,
    })
}

/// `n` evenly spaced energies including both ends.
pub fn energy_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let mut grid: Vec<f64> = (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect();
    grid[n - 1] = hi;
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundStatus {
    /// Interior zero of the lowest eigenvalue.
    Root,
    /// The lowest eigenvalue vanishes at the upper end of the bracket.
    Endpoint,
    /// No sign change in the bracket.
    NoBoundState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundState {
    pub status: GroundStatus,
    /// Ground-state energy; `None` without a bound state.
    pub energy: Option<f64>,
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// Lowest eigenvalue at the returned energy (or at the bracket top without a root).
    pub residual: f64,
    /// Eigenvalues of `Φ` within the root tolerance of zero.
    pub multiplicity: usize,
    /// Some off-diagonal entry is below the disconnection threshold.
    pub disconnected: bool,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Tolerance on the energy, in units of the mass.
    pub energy_tol: f64,
    /// `|ω|` below this counts as zero.
    pub residual_tol: f64,
    /// Bracket width (in units of `m`) where bisection hands over to secant steps.
    pub secant_switch: f64,
    pub max_iterations: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            energy_tol: 1e-8,
            residual_tol: 1e-14,
            secant_switch: 0.05,
            max_iterations: 200,
        }
    }
}

fn lowest(family: &CurveFamily, e: f64, p: &Prescription, cfg: &QuadratureConfig) -> Result<(f64, DMatrix<f64>)> {
    let phi = assemble(family, e, p, cfg)?;
    let eig = eigen_decompose(&phi.entries)?;
    Ok((eig.values[0], phi.entries))
}

/// Default bracket `(-0.999m, ceiling]`; the RG ceiling `μ` itself is excluded.
pub fn default_bracket(family: &CurveFamily, p: &Prescription) -> (f64, f64) {
    let m = family.mass;
    let top = match p {
        Prescription::MinimalBoundState => family.mu_min(),
        Prescription::RgScale { mu, .. } => mu.min(m) - 1e-9 * m,
    };
    (-BRACKET_FLOOR * m, top)
}

/// Zero of the lowest eigenvalue of `Φ(E)` inside the bracket.
pub fn ground_state_energy(
    family: &CurveFamily,
    p: &Prescription,
    cfg: &QuadratureConfig,
    bracket: Option<(f64, f64)>,
    opts: &RootOptions,
) -> Result<GroundState> {
    let m = family.mass;
    let (lo, hi) = bracket.unwrap_or_else(|| default_bracket(family, p));
    let ceiling = p.energy_ceiling(family);
    if !(lo < hi && lo > -m && hi <= ceiling) {
        return Err(domain(format!(
            "bracket ({lo}, {hi}) must satisfy -m < lo < hi <= {ceiling}"
        )));
    }
    let tol = opts.energy_tol * m;
    let finish = |status, energy: Option<f64>, iterations, residual: f64, matrix: DMatrix<f64>| -> Result<GroundState> {
        let eig = eigen_decompose(&matrix)?;
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let multiplicity = if energy.is_some() {
            eig.values
                .iter()
                .filter(|w| w.abs() <= opts.residual_tol.max(1e-10 * scale))
                .count()
                .max(1)
        } else {
            0
        };
        let n = matrix.nrows();
        let disconnected = (0..n).any(|i| (0..n).any(|j| i != j && matrix[(i, j)].abs() < DISCONNECTED_THRESHOLD));
        Ok(GroundState {
            status,
            energy,
            bracket: (lo, hi),
            iterations,
            residual,
            multiplicity,
            disconnected,
            matrix: (0..n).map(|i| matrix.row(i).iter().copied().collect()).collect(),
        })
    };

    let (w_hi, phi_hi) = lowest(family, hi, p, cfg)?;
    if w_hi.abs() <= opts.residual_tol {
        return finish(GroundStatus::Endpoint, Some(hi), 1, w_hi, phi_hi);
    }
    if w_hi > 0.0 {
        return finish(GroundStatus::NoBoundState, None, 1, w_hi, phi_hi);
    }
    let (w_lo, phi_lo) = lowest(family, lo, p, cfg)?;
    if w_lo < 0.0 {
        return finish(GroundStatus::NoBoundState, None, 2, w_lo, phi_lo);
    }

    // ω decreases: ω(a) > 0 > ω(b)
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, w_lo, w_hi);
    let mut iterations = 2;
    let mut last = (hi, w_hi, phi_hi);
    while b - a > opts.secant_switch * m && iterations < opts.max_iterations {
        let c = 0.5 * (a + b);
        let (fc, phi) = lowest(family, c, p, cfg)?;
        iterations += 1;
        last = (c, fc, phi);
        if fc == 0.0 {
            return finish(GroundStatus::Root, Some(c), iterations, fc, last.2);
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
        } else {
            b = c;
            fb = fc;
        }
    }
    // Illinois variant of regula falsi: bracketing, superlinear
    let mut side = 0i8;
    while iterations < opts.max_iterations {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let (fc, phi) = lowest(family, c, p, cfg)?;
        iterations += 1;
        let step = (c - last.0).abs();
        last = (c, fc, phi);
        if fc.abs() <= opts.residual_tol || step < 0.01 * tol || b - a < tol {
            break;
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    finish(GroundStatus::Root, Some(last.0), iterations, last.1, last.2)
}

/// Sign changes of the lowest eigenvalue on a uniform grid over the bracket.
pub fn count_sign_changes(family: &CurveFamily, p: &Prescription, cfg: &QuadratureConfig, lo: f64, hi: f64, points: usize) -> Result<usize> {
    let grid = energy_grid(lo, hi, points.max(2));
    let flow = spectral_flow(family, p, cfg, &grid)?;
    let signs: Vec<f64> = flow.eigenvalues.iter().map(|w| w[0]).collect();
    Ok(signs.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeynmanHellman {
    pub index: usize,
    pub eigenvalue: f64,
    /// `A^(k)ᵀ (∂Φ/∂E) A^(k)`.
    pub analytic: f64,
    pub finite_difference: f64,
    /// Relative disagreement; `None` for eigenvalues closer than the degeneracy gap.
    pub residual: Option<f64>,
}

/// Eigenvalue slopes from the derivative matrix against central differences with step `h`.
pub fn feynman_hellman_residual(
    family: &CurveFamily,
    e: f64,
    p: &Prescription,
    cfg: &QuadratureConfig,
    h: f64,
) -> Result<Vec<FeynmanHellman>> {
    let phi = assemble(family, e, p, cfg)?;
    let eig = eigen_decompose(&phi.entries)?;
    let deriv = derivative_matrix(family, e, cfg)?;
    let plus = eigen_decompose(&assemble(family, e + h, p, cfg)?.entries)?;
    let minus = eigen_decompose(&assemble(family, e - h, p, cfg)?.entries)?;
    let n = eig.values.len();
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    Ok((0..n)
        .map(|k| {
            let v: DVector<f64> = eig.vectors.column(k).into();
            let analytic = v.dot(&(&deriv.entries * &v));
            let finite_difference = (plus.values[k] - minus.values[k]) / (2.0 * h);
            let gap = (0..n)
                .filter(|&j| j != k)
                .map(|j| (eig.values[j] - eig.values[k]).abs())
                .fold(f64::INFINITY, f64::min);
            let residual = (gap > DEGENERACY_GAP * scale)
                .then(|| ((analytic - finite_difference) / analytic).abs());
            FeynmanHellman {
                index: k,
                eigenvalue: eig.values[k],
                analytic,
                finite_difference,
                residual,
            }
        })
        .collect())
}
