//! The five tasks. Each computes its result and writes one artifact.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use kgcurve_core::bounds::{Threshold, ThresholdStatus};
use kgcurve_core::quadrature::flat_resolvent_oracle;
use kgcurve_core::rg::coupling_flow;
use kgcurve_core::spectrum::{count_sign_changes, energy_grid, perron_violations, spectral_flow, GroundStatus, RootOptions};
use kgcurve_core::{
    assemble, beta_closed_form, eigen_decompose, feynman_hellman_residual, flow_coupling, gersgorin_threshold,
    ground_state_energy, near_diagonal_envelope, CurveFamily, GroundState, ManifoldSpec, Prescription,
};

use crate::output::{write_csv, write_json, Header};
use crate::{CliError, RunConfig};

#[derive(Debug, Serialize)]
pub struct SolveResult {
    pub status: GroundStatus,
    pub energy: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub multiplicity: usize,
    pub disconnected: bool,
    pub bracket: (f64, f64),
    /// Eigenvalues of the stored matrix, ascending.
    pub eigenvalues: Vec<f64>,
    pub ground_vector: Vec<f64>,
    /// `Φ` at the returned energy, or at the bracket end that decided the status.
    pub matrix: Vec<Vec<f64>>,
}

fn ground_state(config: &RunConfig, family: &CurveFamily) -> Result<GroundState, CliError> {
    Ok(ground_state_energy(
        family,
        &config.prescription,
        &config.quadrature,
        config.solve.bracket,
        &RootOptions::default(),
    )?)
}

fn summarize(gs: GroundState) -> Result<SolveResult, CliError> {
    let n = gs.matrix.len();
    let phi = DMatrix::from_fn(n, n, |i, j| gs.matrix[i][j]);
    let eig = eigen_decompose(&phi)?;
    Ok(SolveResult {
        status: gs.status,
        energy: gs.energy,
        residual: gs.residual,
        iterations: gs.iterations,
        multiplicity: gs.multiplicity,
        disconnected: gs.disconnected,
        bracket: gs.bracket,
        ground_vector: eig.ground_vector(),
        eigenvalues: eig.values,
        matrix: gs.matrix,
    })
}

pub fn solve(config: &RunConfig, family: &CurveFamily, header: &Header, out: &Path) -> Result<PathBuf, CliError> {
    let result = summarize(ground_state(config, family)?)?;
    write_json(out, "solve.json", header, &result)
}

pub fn scan(config: &RunConfig, family: &CurveFamily, header: &Header, out: &Path) -> Result<PathBuf, CliError> {
    let s = &config.scan;
    let grid = energy_grid(s.e_min, s.e_max, s.points);
    let flow = spectral_flow(family, &config.prescription, &config.quadrature, &grid)?;
    let n = family.len();
    let mut columns = vec!["E".to_string()];
    columns.extend((1..=n).map(|k| format!("omega_{k}")));
    columns.extend((1..=n).map(|k| format!("a_{k}")));
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let mut row = vec![flow.energies[i]];
            row.extend(&flow.eigenvalues[i]);
            row.extend(&flow.ground_vectors[i]);
            row
        })
        .collect();
    write_csv(out, "scan.csv", header, &columns, &rows)
}

#[derive(Debug, Serialize)]
pub struct CurveBounds {
    pub length: f64,
    pub kappa_star: f64,
    pub delta_window: f64,
    /// Envelope of the `|ξ| < δ` diagonal part at `E = E*` (or at `-0.5 m` without a crossing).
    pub near_diagonal_envelope: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BoundsResult {
    pub e_star: f64,
    pub threshold: ThresholdStatus,
    pub e_gr: Option<f64>,
    pub ground_status: Option<GroundStatus>,
    /// `E* ≤ E_gr`; `None` when no ground state was computed or found.
    pub ordering_holds: Option<bool>,
    pub min_separation: f64,
    pub min_length: f64,
    pub max_length: f64,
    pub mu_min: f64,
    pub constants: kgcurve_core::BoundConstants,
    pub curves: Vec<CurveBounds>,
}

fn envelope_energy(config: &RunConfig, t: &Threshold) -> f64 {
    match t.status {
        ThresholdStatus::Crossing => t.e_star,
        _ => -0.5 * config.mass,
    }
}

pub fn bounds(config: &RunConfig, family: &CurveFamily, header: &Header, out: &Path) -> Result<PathBuf, CliError> {
    let k = config.constants();
    let t = gersgorin_threshold(family, &k)?;
    let gs = if config.bounds.solve {
        Some(ground_state(config, family)?)
    } else {
        None
    };
    let e_gr = gs.as_ref().and_then(|g| g.energy);
    let e_env = envelope_energy(config, &t);
    let curves = family
        .curves
        .iter()
        .zip(&family.mu)
        .map(|(c, &mu)| CurveBounds {
            length: c.length,
            kappa_star: c.kappa_star,
            delta_window: c.delta_window,
            near_diagonal_envelope: (e_env <= mu)
                .then(|| near_diagonal_envelope(e_env, mu, config.mass, &k, c.kappa_star * c.delta_window).ok())
                .flatten(),
        })
        .collect();
    let result = BoundsResult {
        e_star: t.e_star,
        threshold: t.status,
        e_gr,
        ground_status: gs.as_ref().map(|g| g.status),
        ordering_holds: e_gr.map(|e| t.e_star <= e),
        min_separation: family.min_separation(),
        min_length: family.min_length(),
        max_length: family.max_length(),
        mu_min: family.mu_min(),
        constants: k,
        curves,
    };
    write_json(out, "bounds.json", header, &result)
}

pub fn flow(config: &RunConfig, family: &CurveFamily, header: &Header, out: &Path) -> Result<PathBuf, CliError> {
    let f = &config.flow;
    let (a, b) = (f.tau_min.ln(), f.tau_max.ln());
    let taus: Vec<f64> = (0..f.points)
        .map(|i| (a + (b - a) * i as f64 / (f.points - 1) as f64).exp())
        .collect();
    let table = coupling_flow(f.lambda, &taus, family.curves[0].length)?;
    let rows: Vec<Vec<f64>> = (0..taus.len())
        .map(|i| {
            vec![
                table.tau_grid[i],
                table.lambda_values[i],
                table.beta_values[i],
                table.closed_form_residual[i],
            ]
        })
        .collect();
    let columns = ["tau", "lambda", "beta", "residual"].map(String::from);
    write_csv(out, "flow.csv", header, &columns, &rows)
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub property: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(property: &'static str, passed: bool, detail: String) -> Check {
    Check {
        property,
        passed,
        detail,
    }
}

#[derive(Debug, Serialize)]
pub struct ValidateResult {
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Invariant suite on the configured family.
pub fn validate_checks(config: &RunConfig, family: &CurveFamily) -> Result<Vec<Check>, CliError> {
    let m = config.mass;
    let p: &Prescription = &config.prescription;
    let cfg = &config.quadrature;
    let top = match p {
        Prescription::MinimalBoundState => family.mu_min(),
        Prescription::RgScale { mu, .. } => mu.min(m) - 1e-6 * m,
    };
    let lo = -0.9 * m;
    let mut checks = Vec::new();

    let mid = 0.5 * (lo + top);
    let phi = assemble(family, mid, p, cfg)?;
    let asym = (&phi.entries - phi.entries.transpose()).amax();
    checks.push(check("matrix_symmetric", asym == 0.0, format!("max |Φ - Φᵀ| = {asym:e} at E = {mid}")));

    let grid = energy_grid(lo, top, 6);
    let sf = spectral_flow(family, p, cfg, &grid)?;
    let decreasing = sf.eigenvalues.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| b < a));
    checks.push(check("eigenvalues_decrease", decreasing, format!("{} energies in [{lo}, {top}]", grid.len())));

    let mut worst = 0.0f64;
    let mut slopes_negative = true;
    for e in [lo + 0.25 * (top - lo), lo + 0.75 * (top - lo)] {
        for fh in feynman_hellman_residual(family, e, p, cfg, 1e-4 * m)? {
            slopes_negative &= fh.analytic < 0.0;
            if let Some(r) = fh.residual {
                worst = worst.max(r);
            }
        }
    }
    checks.push(check(
        "feynman_hellman",
        worst < 1e-5 && slopes_negative,
        format!("max relative residual {worst:e}, slopes negative: {slopes_negative}"),
    ));

    let gs = ground_state(config, family)?;
    let e_gr = gs.energy;
    match e_gr {
        Some(e) => {
            let n = gs.matrix.len();
            let v = eigen_decompose(&DMatrix::from_fn(n, n, |i, j| gs.matrix[i][j]))?.ground_vector();
            let violations = perron_violations(&v);
            checks.push(check("perron_ground_vector", violations == 0, format!("{violations} nonpositive components at E = {e}")));
        }
        None => checks.push(check("perron_ground_vector", true, "no bound state in the bracket".into())),
    }
    let zeros = count_sign_changes(family, p, cfg, -0.99 * m, top, 12)?;
    let expected = usize::from(e_gr.is_some() && gs.status == GroundStatus::Root);
    checks.push(check(
        "unique_zero",
        zeros == expected || (expected == 0 && zeros <= 1),
        format!("{zeros} sign changes of the lowest eigenvalue"),
    ));

    if matches!(p, Prescription::MinimalBoundState) {
        let t = gersgorin_threshold(family, &config.constants())?;
        let holds = e_gr.is_none_or(|e| t.e_star <= e);
        checks.push(check("gersgorin_ordering", holds, format!("E* = {} ({:?}), E_gr = {e_gr:?}", t.e_star, t.status)));
    }

    let lambda = config.flow.lambda;
    let l = family.curves[0].length;
    let mut semigroup = 0.0f64;
    for (a, b) in [(0.5, 2.0), (0.7, 1.3), (1.6, 1.2)] {
        let direct = flow_coupling(lambda, a * b, l)?;
        let stepped = flow_coupling(flow_coupling(lambda, a, l)?, b, l)?;
        semigroup = semigroup.max(((stepped - direct) / direct).abs());
    }
    checks.push(check("flow_semigroup", semigroup < 1e-10, format!("max relative mismatch {semigroup:e}")));
    let table = coupling_flow(lambda, &[0.5, 0.75, 1.5, 2.0], l)?;
    let ode = table.closed_form_residual.iter().copied().fold(0.0, f64::max);
    checks.push(check("flow_matches_ode", ode < 1e-8, format!("max relative residual {ode:e}")));
    checks.push(check("beta_negative", beta_closed_form(lambda) < 0.0, format!("beta({lambda}) = {}", beta_closed_form(lambda))));

    if *family.manifold() == ManifoldSpec::Euclidean3 {
        let mut worst = 0.0f64;
        for e in [-0.5, 0.0, 0.5] {
            for d in [0.5, 2.0] {
                let x = [0.0; 3];
                let y = [d / m, 0.0, 0.0];
                let g = kgcurve_core::quadrature::pair_kernel_plain(e * m, &x, &y, m, family.manifold(), cfg)?.value;
                let oracle = m * flat_resolvent_oracle(e, d, 1.0)?;
                worst = worst.max(((g - oracle) / oracle).abs());
            }
        }
        checks.push(check("pair_kernel_oracle", worst < 1e-8, format!("max relative difference {worst:e}")));
    }
    Ok(checks)
}

pub fn validate(config: &RunConfig, family: &CurveFamily, header: &Header, out: &Path) -> Result<PathBuf, CliError> {
    let checks = validate_checks(config, family)?;
    let passed = checks.iter().all(|c| c.passed);
    let result = ValidateResult { passed, checks };
    let path = write_json(out, "validate.json", header, &result)?;
    if !passed {
        let failed: Vec<&str> = result.checks.iter().filter(|c| !c.passed).map(|c| c.property).collect();
        return Err(CliError::ValidationFailed(failed.join(", ")));
    }
    Ok(path)
}
