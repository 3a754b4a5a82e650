//! Geometry of tangent sweeps of Lagrangian submanifolds in linear
//! symplectic space, and the outer-billiard correspondence they induce.
//!
//! The crate is organized around three representations:
//!
//! * graph models `y = grad F(x)` for a polynomial potential F
//!   ([`LagrangianGraph`]), where tangency counting, sweep-map pullbacks,
//!   and local multiplicity predictions are effective;
//! * products of convex plane curves ([`ProductCurveLagrangian`]), compact
//!   models where periodic orbits of the correspondence are found
//!   variationally;
//! * single convex plane curves ([`PlaneCurve`]), the classical planar
//!   outer billiard, used both standalone and as the per-factor check for
//!   product orbits.
//!
//! Everything numerical is deterministic for a fixed seed, independent of
//! thread count.

/// Crate version, echoed by downstream tools for reproducibility.
pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub mod billiard;
pub mod error;
pub mod lagrangian;
mod optim;
pub mod planar;
pub mod poly;
pub mod sweep;
pub mod symplectic;

pub use billiard::{
    action, conormal_check, correspondents, find_periodic_orbits, linear_iso,
    linear_iso_inverse, linear_iso_matrix, omega_difference_matrix, orbit_verify,
    pair_through_foot, reconstruct_orbit_points, step_from_foot, ConormalReport,
    CorrespondencePair, CorrespondentsReport, IsoCoords, OrbitCandidate, OrbitVerifyReport,
};
pub use error::{Error, Result};
pub use lagrangian::{
    LagrangianGraph, LagrangianModel, ModelSpec, NondegeneracyWitness, ProductCurveLagrangian,
    TangentFrame,
};
pub use planar::{
    find_planar_periodic, mamikon_area_check, planar_outer_step, tractrix_area,
    tractrix_area_on, Branch, CurveSpec, PlanarOrbit, PlanarStep, PlaneCurve, SweepRegion,
};
pub use poly::SparsePolynomial;
pub use sweep::{
    count_tangent_spaces, critical_function, newton_number, predicted_multiplicity, sweep_map,
    verify_symplectomorphism, CountParams, PullbackReport, RootRecord, RootReport, SearchBox,
    SweepSample,
};
pub use symplectic::{
    fd_jacobian, is_symplectic, omega, omega_matrix, DarbouxPoint, SymplecticCheck,
};
