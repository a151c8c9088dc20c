//! Bound states of a relativistic scalar particle coupled to closed curves
//! through delta interactions, computed from the renormalized principal
//! operator.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod curves;
pub mod error;
pub mod manifold;
pub mod principal;
pub mod quadrature;
pub mod rg;
pub mod spectrum;

pub use error::{Error, Result};
pub use manifold::{KernelSeriesConfig, ManifoldSpec, Point};
pub use quadrature::{PairKernelValue, QuadratureConfig};
pub use curves::{build_family, family_geometry, resample_arclength, CurveFamily, CurveShape, CurveSpec, QuadNode, SampledCurve};
pub use principal::{assemble, derivative_matrix, rg_assemble, DiagonalParts, PrincipalMatrix, Prescription};
pub use bounds::{diagonal_lower_bound, gersgorin_threshold, near_diagonal_envelope, offdiagonal_upper_bound, BoundConstants};
pub use rg::{beta, beta_closed_form, flow_coupling, rg_invariance_residual, FlowResult};
pub use spectrum::{eigen_decompose, feynman_hellman_residual, ground_state_energy, GroundState, SpectralFlowResult};
