//! k-skeleton maximal operators on dyadic grids.
//!
//! The crate evaluates the maximal operator that averages a function over
//! sup-norm neighborhoods of the faces of axis-parallel cube skeletons,
//! together with a linearized variant driven by a per-cell radius and a
//! per-skeleton face choice. Around the operators sit the tools used to
//! study how their `Lᵖ → Lᑫ` norms grow as the neighborhood width shrinks:
//! face selection with controlled coplanar overlap, multiplicity counting,
//! explicit extremal test functions and log-log slope fits.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod operators;
pub mod scaling;
pub mod selection;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{
    box_intersection_volume, enumerate_faces, face_count, face_neighborhood, plane_key, AxisBox,
    AxisRole, KFace, PlaneKey,
};
pub use grid::{centers, indicator_measure, lp_norm, psi, BoxUnionIndicator, Grid, GridFunction};
pub use operators::{
    face_average, linearized_field, min_face_average, skeleton_maximal_at, skeleton_maximal_field,
    Backend, MaximalField, OperatorConfig, RadiusFunction, SkeletonMaximal, TestFunction,
};
pub use scaling::{
    big_cube_growth, norm_ratio, norm_scan, predicted_exponent, skeleton_extremizer,
    weak_type_params, weak_type_scan, Candidate, ExponentPrediction, NormDomain, Regime,
    ScalingSeries, ScanSettings, WeakTypeParams,
};
pub use selection::{
    brute_force_select, coplanar_growth_experiment, greedy_select, multiplicity_mu,
    overlap_report, FaceSelection, MultiplicityProfile, OverlapReport, SkeletonFamily,
};
pub use stats::{fit_loglog, LogLogFit};
