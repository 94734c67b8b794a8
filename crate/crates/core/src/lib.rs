//! Numerical solvers for modified wave equations: a non-relativistic
//! Schrödinger-like equation with effective potential `3V − V²/(E − V)`, a
//! rescaled Klein-Gordon equation, and a two-component Dirac-type operator,
//! alongside conventional reference solvers they are compared against.

pub mod error;
pub mod linalg;
pub mod modified_nr;
pub mod modified_rel;
pub mod numgrid;
pub mod planewave;
pub mod potentials;
pub mod quadrature;
pub mod reference;
pub mod shooting;
pub mod spin_half;
pub mod units;

pub use error::{Result, WaveError};
pub use modified_nr::{
    additional_term_report, effective_potential, propagate_timedep, separated_solution, solve_stationary_fixed_point,
    solve_stationary_shooting, AdditionalTermReport, FixedPointOptions, GuardPolicy, ModifiedEigenResult, SingularGuard,
    TimeDepState,
};
pub use modified_rel::{propagate_rel_timedep, solve_rel_stationary, RelScenario};
pub use numgrid::{build_laplacian, build_radial_laplacian, inner_product, BandedOperator, Boundary, Discretization, Grid, GridKind, WaveField};
pub use potentials::{find_singular_set, PotentialShape, PotentialSpec, SingularKind, SingularSet};
pub use reference::{propagate_schrodinger, solve_schrodinger_stationary, SpectrumResult, Trajectory};
pub use shooting::Ends;
pub use spin_half::{
    apply_modified_hamiltonian, clifford_check, propagate_massless, solve_massless, solve_spin_half_stationary, CliffordSet,
    SpinorField,
};
pub use units::UnitSystem;
