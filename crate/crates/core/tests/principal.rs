use std::f64::consts::PI;
use std::sync::OnceLock;

use kgcurve_core::principal::renormalized_diagonal_parts;
use kgcurve_core::quadrature::flat_resolvent_oracle;
use kgcurve_core::quadrature::rules::composite;
use kgcurve_core::quadrature::special::bessel_k0;
use kgcurve_core::{
    assemble, build_family, derivative_matrix, eigen_decompose, resample_arclength, CurveFamily, CurveSpec, Error,
    ManifoldSpec, Prescription, QuadratureConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const FLAT: ManifoldSpec = ManifoldSpec::Euclidean3;
const MINIMAL: Prescription = Prescription::MinimalBoundState;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn unit_circle(center: [f64; 3], n: usize) -> CurveSpec {
    CurveSpec::circle(center, 1.0, [0.0, 0.0, 1.0], n)
}

fn coaxial(d: f64, mu: [f64; 2]) -> CurveFamily {
    build_family(&[unit_circle([0.0; 3], 32), unit_circle([0.0, 0.0, d], 32)], &FLAT, mu.to_vec(), 1.0).unwrap()
}

fn three_curves() -> &'static CurveFamily {
    static FAMILY: OnceLock<CurveFamily> = OnceLock::new();
    FAMILY.get_or_init(|| {
        let specs = [
            unit_circle([0.0; 3], 48),
            CurveSpec::circle([0.5, 0.0, 2.0], 0.7, [0.0, 1.0, 1.0], 48),
            CurveSpec::circle([3.0, -0.5, 0.0], 1.3, [1.0, 0.0, 0.2], 48),
        ];
        build_family(&specs, &FLAT, vec![-0.2, 0.1, -0.4], 1.0).unwrap()
    })
}

/// Integral over `ψ ∈ (0, 2π)` of a function with an integrable singularity
/// at both ends, on panels graded geometrically towards them.
fn periodic_singular_integral(depth: i32, f: impl Fn(f64) -> f64) -> f64 {
    let mut breaks: Vec<f64> = (0..=depth).rev().map(|k| PI * 0.5f64.powi(k)).collect();
    breaks.insert(0, 0.0);
    2.0 * composite(&breaks, 16, f).value
}

#[test]
fn unit_circle_diagonal_matches_high_precision_value() {
    // Two-dimensional mpmath quadrature of the chord-distance kernel over the
    // unit circle at m = 1, μ = 0, E = -0.5.
    let reference = 0.03429393621484209621;
    let curve = resample_arclength(&unit_circle([0.0; 3], 32), 32, &FLAT).unwrap();
    let parts = renormalized_diagonal_parts(&curve, -0.5, 0.0, 1.0, &cfg()).unwrap();
    let total = parts.total().value;
    assert!((total - reference).abs() < 1e-8 * reference, "{total}");
    assert!(parts.window.value > 0.0 && parts.regular.value > 0.0);
}

#[test]
fn unit_circle_diagonal_against_oracle_difference() {
    // (1/L)∬ G_ren = ∫₀^{2π} [R(μ) - R(E)](2 sin(ψ/2)) dψ on the unit circle.
    let (e, mu) = (-0.3, 0.2);
    let expected = periodic_singular_integral(36, |psi| {
        let d = 2.0 * (0.5 * psi).sin();
        flat_resolvent_oracle(mu, d, 1.0).unwrap() - flat_resolvent_oracle(e, d, 1.0).unwrap()
    });
    let curve = resample_arclength(&unit_circle([0.0; 3], 32), 32, &FLAT).unwrap();
    let value = renormalized_diagonal_parts(&curve, e, mu, 1.0, &cfg()).unwrap().total().value;
    assert!((value / expected - 1.0).abs() < 1e-8, "{value} vs {expected}");
}

#[test]
fn coaxial_offdiagonal_against_oracle() {
    let (d, e) = (1.5, -0.3);
    let expected = -2.0 * PI / 256.0
        * (0..256)
            .map(|k| {
                let psi = 2.0 * PI * k as f64 / 256.0;
                flat_resolvent_oracle(e, (d * d + 2.0 - 2.0 * psi.cos()).sqrt(), 1.0).unwrap()
            })
            .sum::<f64>();
    let phi = assemble(&coaxial(d, [0.0, 0.0]), e, &MINIMAL, &cfg()).unwrap();
    assert!((phi.entries[(0, 1)] / expected - 1.0).abs() < 1e-8, "{} vs {expected}", phi.entries[(0, 1)]);
}

#[test]
fn single_circle_slope_at_zero_energy() {
    let expected = -periodic_singular_integral(60, |psi| bessel_k0(2.0 * (0.5 * psi).sin()) / (4.0 * PI * PI));
    let family = build_family(&[unit_circle([0.0; 3], 32)], &FLAT, vec![0.3], 1.0).unwrap();
    let value = derivative_matrix(&family, 0.0, &cfg()).unwrap().entries[(0, 0)];
    assert!((value / expected - 1.0).abs() < 1e-8, "{value} vs {expected}");
}

#[test]
fn congruent_circles_give_equal_diagonals() {
    let phi = assemble(&coaxial(3.0, [-0.1, -0.1]), -0.4, &MINIMAL, &cfg()).unwrap();
    assert_eq!(phi.entries[(0, 0)], phi.entries[(1, 1)]);
    assert_eq!(phi.entries[(0, 1)], phi.entries[(1, 0)]);
    assert!(phi.entries[(0, 1)] < 0.0);
    assert!(phi.entries[(0, 0)] > 0.0);
}

#[test]
fn derivative_matrix_matches_central_difference() {
    let family = three_curves();
    let (e, h) = (-0.5, 1e-4);
    let slope = derivative_matrix(family, e, &cfg()).unwrap().entries;
    let plus = assemble(family, e + h, &MINIMAL, &cfg()).unwrap().entries;
    let minus = assemble(family, e - h, &MINIMAL, &cfg()).unwrap().entries;
    let fd = (plus - minus) / (2.0 * h);
    for i in 0..3 {
        for j in 0..3 {
            let scale = slope[(i, j)].abs().max(1e-12);
            assert!((slope[(i, j)] - fd[(i, j)]).abs() < 1e-6 * scale, "({i}, {j})");
        }
    }
}

#[test]
fn minimal_prescription_vanishes_at_binding_energy() {
    let family = three_curves();
    for i in 0..3 {
        let phi = assemble(family, family.mu[i], &MINIMAL, &cfg()).unwrap();
        assert_eq!(phi.entries[(i, i)], 0.0);
    }
}

#[test]
fn rg_prescription_shifts_diagonal_by_inverse_coupling() {
    let family = coaxial(4.0, [0.0, 0.0]);
    let bare = assemble(&family, -0.2, &Prescription::RgScale { mu: 0.5, lambda_r: None }, &cfg()).unwrap();
    let coupled = assemble(&family, -0.2, &Prescription::RgScale { mu: 0.5, lambda_r: Some(2.0) }, &cfg()).unwrap();
    let diff = coupled.entries - bare.entries;
    assert!((diff[(0, 0)] - 0.5).abs() < 1e-15 && (diff[(1, 1)] - 0.5).abs() < 1e-15);
    assert_eq!(diff[(0, 1)], 0.0);
}

#[test]
fn large_torus_reproduces_flat_matrix() {
    let specs = [unit_circle([5.0, 5.0, 5.0], 32), unit_circle([5.0, 5.0, 7.0], 32)];
    let torus = ManifoldSpec::FlatTorus3 { lengths: [40.0; 3] };
    let on_torus = build_family(&specs, &torus, vec![0.0, 0.0], 1.0).unwrap();
    let flat = build_family(&specs, &FLAT, vec![0.0, 0.0], 1.0).unwrap();
    let a = assemble(&on_torus, -0.3, &MINIMAL, &cfg()).unwrap().entries;
    let b = assemble(&flat, -0.3, &MINIMAL, &cfg()).unwrap().entries;
    assert!((a - &b).amax() < 1e-9 * b.amax());
}

#[test]
fn hyperbolic_family_is_symmetric_with_negative_coupling() {
    let h = ManifoldSpec::Hyperbolic3 { radius: 2.0 };
    let specs = [
        CurveSpec::circle([0.0, 0.0, 2.0], 0.5, [0.0, 0.0, 1.0], 32),
        CurveSpec::circle([0.0, 0.0, 4.0], 1.0, [0.0, 0.0, 1.0], 32),
    ];
    let family = build_family(&specs, &h, vec![-0.1, -0.3], 1.0).unwrap();
    let phi = assemble(&family, -0.6, &MINIMAL, &cfg()).unwrap();
    assert_eq!(phi.entries[(0, 1)], phi.entries[(1, 0)]);
    assert!(phi.entries[(0, 1)] < 0.0);
    assert!(phi.entries[(0, 0)] > 0.0 && phi.entries[(1, 1)] > 0.0);
}

#[test]
fn energies_outside_the_gap_are_rejected() {
    let family = coaxial(3.0, [0.0, 0.0]);
    for e in [-1.0, 1.0, 2.0, f64::NAN] {
        assert!(matches!(assemble(&family, e, &MINIMAL, &cfg()), Err(Error::Domain(_))), "E = {e}");
    }
    let rg = Prescription::RgScale { mu: 0.3, lambda_r: None };
    assert!(matches!(assemble(&family, 0.3, &rg, &cfg()), Err(Error::Domain(_))));
}

#[test]
fn assembly_is_deterministic() {
    let family = three_curves();
    let a = assemble(family, -0.45, &MINIMAL, &cfg()).unwrap();
    let b = assemble(family, -0.45, &MINIMAL, &cfg()).unwrap();
    assert_eq!(a, b);
}

fn unit_square(n: usize) -> CurveSpec {
    CurveSpec::polyline(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]], n)
}

#[test]
fn polyline_offdiagonal_against_segmentwise_quadrature() {
    use kgcurve_core::quadrature::pair_kernel_plain;
    use kgcurve_core::quadrature::rules::uniform_breaks;
    let e = -0.2;
    let circle = unit_circle([0.5, 0.5, 1.5], 32);
    let family = build_family(&[unit_square(16), circle], &FLAT, vec![0.0, 0.0], 1.0).unwrap();
    let corners = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    let expected = -(0..64)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / 64.0;
            let y = [0.5 + phi.cos(), 0.5 + phi.sin(), 1.5];
            (0..4)
                .map(|j| {
                    let (p, q) = (corners[j], corners[(j + 1) % 4]);
                    composite(&uniform_breaks(0.0, 1.0, 0.25), 20, |t| {
                        let x = [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), 0.0];
                        pair_kernel_plain(e, &x, &y, 1.0, &FLAT, &cfg()).unwrap().value
                    })
                    .value
                })
                .sum::<f64>()
                * 2.0
                * PI
                / 64.0
        })
        .sum::<f64>()
        / (4.0 * 2.0 * PI).sqrt();
    let relaxed = QuadratureConfig {
        rel_tol: 1e-4,
        ..cfg()
    };
    let phi = assemble(&family, e, &MINIMAL, &relaxed).unwrap();
    assert!(phi.err[(0, 1)] < 1e-10 * phi.entries[(0, 1)].abs());
    assert!((phi.entries[(0, 1)] / expected - 1.0).abs() < 1e-10, "{} vs {expected}", phi.entries[(0, 1)]);
}

#[test]
fn polyline_diagonal_does_not_depend_on_the_window_split() {
    let relaxed = QuadratureConfig {
        rel_tol: 1e-3,
        ..cfg()
    };
    let value = |n: usize| {
        let curve = resample_arclength(&unit_square(n), n, &FLAT).unwrap();
        (curve.delta_window, renormalized_diagonal_parts(&curve, -0.5, -0.2, 1.0, &relaxed).unwrap().total())
    };
    // n = 8 and n = 16 share the corner-aligned outer rule but not the window
    let ((d8, a), (d16, b)) = (value(8), value(16));
    assert!(d16 < d8);
    assert!((a.value - b.value).abs() < 1e-12 * a.value, "{a:?} vs {b:?}");
    assert!(b.value > 0.0 && b.err < 1e-3 * b.value);
    // corners violate the curvature bound: the outer rule converges only
    // algebraically and the default tolerance is out of reach
    assert!(b.err > cfg().rel_tol * b.value);
}

fn slope_matrix() -> &'static DMatrix<f64> {
    static SLOPE: OnceLock<DMatrix<f64>> = OnceLock::new();
    SLOPE.get_or_init(|| derivative_matrix(three_curves(), -0.3, &cfg()).unwrap().entries)
}

fn weyl_pair() -> &'static (DMatrix<f64>, DMatrix<f64>) {
    static PAIR: OnceLock<(DMatrix<f64>, DMatrix<f64>)> = OnceLock::new();
    PAIR.get_or_init(|| {
        let lo = assemble(three_curves(), -0.7, &MINIMAL, &cfg()).unwrap().entries;
        let hi = assemble(three_curves(), -0.6, &MINIMAL, &cfg()).unwrap().entries;
        (lo, hi)
    })
}

#[test]
fn eigenvalues_decrease_with_energy() {
    let (lo, hi) = weyl_pair();
    let a = eigen_decompose(lo).unwrap().values;
    let b = eigen_decompose(hi).unwrap().values;
    for k in 0..3 {
        assert!(b[k] < a[k], "eigenvalue {k}: {} !< {}", b[k], a[k]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn slope_quadratic_form_is_negative(v in prop::array::uniform3(-1.0f64..1.0)) {
        let v = DVector::from_row_slice(&v);
        prop_assume!(v.norm() > 1e-3);
        let form = v.dot(&(slope_matrix() * &v));
        prop_assert!(form < 0.0, "{form}");
    }

    #[test]
    fn matrix_difference_is_positive_definite(v in prop::array::uniform3(-1.0f64..1.0)) {
        let v = DVector::from_row_slice(&v);
        prop_assume!(v.norm() > 1e-3);
        let (lo, hi) = weyl_pair();
        prop_assert!(v.dot(&((lo - hi) * &v)) > 0.0);
    }
}
