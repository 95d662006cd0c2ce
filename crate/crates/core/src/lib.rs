//! Numerical laboratory for reproducing kernels, biorthogonal systems,
//! Lagrange series and planar Cauchy transforms in truncated radial weighted
//! Fock spaces, together with the completeness machinery built on them.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cauchy;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod grid;
pub mod paleywiener;
pub mod poly;
pub mod quadrature;
pub mod systems;
pub mod weights;
pub mod young;

pub use cauchy::{
    cauchy_exact, disc_mean_value_check, planar_cauchy, verify_decay_bound, verify_growth_bound,
    BoundReport, CauchySample, DensityFunction, GrowthBoundReport,
};
pub use error::{Error, Result};
pub use fock::{
    compute_moments, growth_bound_check, CoeffFunction, GrowthReport, SpaceDescriptor,
    TruncatedFockSpace,
};
pub use num_complex::Complex64;
pub use paleywiener::{
    punctured_system, pw_completeness_sweep, pw_inner, pw_q_transform, s_eval, PWFunction,
    PwClosedForm, PwQResult, PwQuadConfig, PwSweepRow,
};
pub use systems::{
    biorthogonal, build_system, completeness_defect, gram_matrix, lagrange_reconstruct,
    perturb_and_track, BiorthogonalFamily, CompletenessDefect, PointSystem, StepDiagnostics,
};
pub use weights::{oscillation_check, regularity_check, RadialWeight, RegularityReport, Verdict};
pub use young::{
    a1_a2_bounds, contradiction_check, factor_t, make_instance, q_transform, ContradictionReport,
    QResult, QuadConfig, SplitBoundReport, TFactorization, YoungInstance,
};
