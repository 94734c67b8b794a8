//! Shared fixtures for the solver benchmarks.

use std::f64::consts::PI;

use wavekit_core::{Boundary, Grid, PotentialSpec, UnitSystem};

pub fn units() -> UnitSystem {
    UnitSystem::natural()
}

pub fn dirichlet_box(n: usize) -> Grid {
    Grid::line(0.0, PI, n, Boundary::Dirichlet).expect("valid box")
}

pub fn periodic_line(n: usize) -> Grid {
    Grid::line(0.0, 2.0 * PI, n, Boundary::Periodic).expect("valid line")
}

/// Depth 20, half-width 1, on `[-6, 6]`.
pub fn square_well(n: usize) -> (Grid, PotentialSpec) {
    (
        Grid::line(-6.0, 6.0, n, Boundary::Dirichlet).expect("valid line"),
        PotentialSpec::square_well(20.0, 1.0),
    )
}
