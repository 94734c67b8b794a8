//! Uniform grids, finite-difference Laplacians and trapezoidal quadrature.
//!
//! Dirichlet line grids carry their walls on the two end nodes. Radial grids
//! start one spacing away from the origin (`x_min = h`); the origin acts as a
//! ghost wall where the reduced function `u(r) = r R(r)` vanishes, and the
//! outer wall sits on the last node. Periodic grids identify `x_max` with
//! `x_min`, so `h = (x_max - x_min) / n`.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::linalg::BandedSym;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Line,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Where a Dirichlet wall sits relative to the node array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wall {
    /// The wall coincides with node `i`, whose value is pinned to zero.
    Node(usize),
    /// The wall sits one spacing left of node 0 (radial origin).
    GhostLeft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    kind: GridKind,
    x_min: f64,
    x_max: f64,
    n_points: usize,
    h: f64,
    boundary: Boundary,
}

pub const MIN_POINTS: usize = 8;

impl Grid {
    pub fn line(x_min: f64, x_max: f64, n_points: usize, boundary: Boundary) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(WaveError::config(format!(
                "grid interval [{x_min}, {x_max}] is empty or not finite"
            )));
        }
        if n_points < MIN_POINTS {
            return Err(WaveError::config(format!(
                "grid needs at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        let h = match boundary {
            Boundary::Dirichlet => (x_max - x_min) / (n_points - 1) as f64,
            Boundary::Periodic => (x_max - x_min) / n_points as f64,
        };
        Ok(Grid {
            kind: GridKind::Line,
            x_min,
            x_max,
            n_points,
            h,
            boundary,
        })
    }

    /// Radial grid on `(0, r_max]` with nodes `r_i = (i + 1) h`, `h = r_max / n`.
    pub fn radial(r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(WaveError::config(format!("radial extent must be > 0, got {r_max}")));
        }
        if n_points < MIN_POINTS {
            return Err(WaveError::config(format!(
                "grid needs at least {MIN_POINTS} points, got {n_points}"
            )));
        }
        let h = r_max / n_points as f64;
        Ok(Grid {
            kind: GridKind::Radial,
            x_min: h,
            x_max: r_max,
            n_points,
            h,
            boundary: Boundary::Dirichlet,
        })
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Length of the physical domain (wall to wall, or one period).
    pub fn domain_length(&self) -> f64 {
        match (self.kind, self.boundary) {
            (GridKind::Radial, _) => self.x_max,
            _ => self.x_max - self.x_min,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    fn walls(&self) -> Option<(Wall, Wall)> {
        match (self.kind, self.boundary) {
            (_, Boundary::Periodic) => None,
            (GridKind::Line, Boundary::Dirichlet) => {
                Some((Wall::Node(0), Wall::Node(self.n_points - 1)))
            }
            (GridKind::Radial, Boundary::Dirichlet) => {
                Some((Wall::GhostLeft, Wall::Node(self.n_points - 1)))
            }
        }
    }

    /// Node indices that carry unknowns (everything except pinned wall nodes).
    pub fn active(&self) -> Range<usize> {
        match self.walls() {
            None => 0..self.n_points,
            Some((left, _)) => {
                let start = match left {
                    Wall::Node(i) => i + 1,
                    Wall::GhostLeft => 0,
                };
                start..self.n_points - 1
            }
        }
    }

    /// Trapezoidal weights; pinned wall nodes get their half weight even though
    /// admissible fields vanish there.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.n_points];
        if let Some((left, _)) = self.walls() {
            if left == Wall::Node(0) {
                w[0] = 0.5 * self.h;
            }
            w[self.n_points - 1] = 0.5 * self.h;
        }
        w
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Complex amplitudes on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl WaveField {
    pub fn zeros(grid: &Grid) -> Self {
        WaveField {
            grid: *grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        WaveField {
            grid: *grid,
            values: grid.points().into_iter().map(f).collect(),
        }
    }

    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(WaveError::usage(format!(
                "{} samples for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(WaveField {
            grid: *grid,
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid
            .quadrature_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns a copy scaled to unit norm; the zero field is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        self.scaled(Complex64::new(1.0 / n, 0.0))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        WaveField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Number of sign changes of the real part over the active nodes, after
    /// rotating out a global phase. Values below `1e-12` of the maximum are skipped.
    pub fn node_count(&self) -> usize {
        let phase = self
            .values
            .iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .map(|v| if v.norm() > 0.0 { v.conj() / v.norm() } else { Complex64::new(1.0, 0.0) })
            .unwrap_or(Complex64::new(1.0, 0.0));
        let real: Vec<f64> = self.values.iter().map(|v| (v * phase).re).collect();
        count_sign_changes(&real[self.grid.active()])
    }
}

pub(crate) fn count_sign_changes(values: &[f64]) -> usize {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-12 * scale;
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v.abs() <= floor {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

/// Trapezoidal `<a|b>`.
pub fn inner_product(a: &WaveField, b: &WaveField) -> Result<Complex64> {
    if !a.grid.same_as(&b.grid) {
        return Err(WaveError::usage("inner product of fields on different grids"));
    }
    Ok(a.grid
        .quadrature_weights()
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .map(|(w, (x, y))| x.conj() * y * *w)
        .sum())
}

/// A real symmetric banded operator on a grid's nodes.
///
/// `upper[d][i]` holds `A[i][i + d]` (indices wrap on periodic grids). Rows of
/// pinned wall nodes are masked to zero on application, but interior rows keep
/// their couplings to the wall values, so the operator acts correctly on fields
/// that do not vanish at the walls. Restricted to [`Grid::active`] it is
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOperator {
    grid: Grid,
    upper: Vec<Vec<f64>>,
}

impl BandedOperator {
    fn zeros(grid: &Grid, bandwidth: usize) -> Self {
        BandedOperator {
            grid: *grid,
            upper: vec![vec![0.0; grid.len()]; bandwidth + 1],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bandwidth(&self) -> usize {
        self.upper.len() - 1
    }

    /// The `d`-th superdiagonal (`d = 0` is the main diagonal).
    pub fn diagonal(&self, d: usize) -> &[f64] {
        &self.upper[d]
    }

    fn slot(&self, i: usize, j: usize) -> Option<(usize, usize)> {
        let n = self.grid.len();
        let k = self.bandwidth();
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d <= k {
            return Some((d, lo));
        }
        if self.grid.is_periodic() && n - d <= k {
            return Some((n - d, hi));
        }
        None
    }

    /// `A[i][j]`, zero outside the band.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |(d, r)| self.upper[d][r])
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (d, r) = self.slot(i, j).expect("entry outside band");
        // A symmetric slot serves both (i, j) and (j, i); the diagonal is
        // visited once per row, off-diagonals once from each active row.
        self.upper[d][r] += v;
    }

    /// Adds `v[i]` to the main diagonal.
    pub fn add_diagonal(&mut self, v: &[f64]) {
        for (a, b) in self.upper[0].iter_mut().zip(v) {
            *a += b;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BandedOperator {
            grid: self.grid,
            upper: self
                .upper
                .iter()
                .map(|band| band.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    /// Applies the operator to raw samples; rows of wall nodes yield zero.
    pub fn apply_values<T>(&self, psi: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let n = self.grid.len();
        let active = self.grid.active();
        let k = self.bandwidth();
        let periodic = self.grid.is_periodic();
        let mut out = vec![T::default(); n];
        for i in active {
            let mut acc = psi[i] * self.upper[0][i];
            for d in 1..=k {
                if periodic {
                    let jp = (i + d) % n;
                    let jm = (i + n - d) % n;
                    acc = acc + psi[jp] * self.upper[d][i] + psi[jm] * self.upper[d][jm];
                } else {
                    if i + d < n {
                        acc = acc + psi[i + d] * self.upper[d][i];
                    }
                    if i >= d {
                        acc = acc + psi[i - d] * self.upper[d][i - d];
                    }
                }
            }
            out[i] = acc;
        }
        out
    }

    pub fn apply(&self, psi: &WaveField) -> Result<WaveField> {
        if !psi.grid.same_as(&self.grid) {
            return Err(WaveError::usage("operator applied to a field on another grid"));
        }
        Ok(WaveField {
            grid: self.grid,
            values: self.apply_values(&psi.values),
        })
    }

    /// Largest eigenvalue magnitude bound (Gershgorin) over the active rows.
    pub fn gershgorin_radius(&self) -> f64 {
        let n = self.grid.len();
        let periodic = self.grid.is_periodic();
        let mut best = 0.0f64;
        for i in self.grid.active() {
            let mut r = self.upper[0][i].abs();
            for d in 1..=self.bandwidth() {
                if periodic {
                    r += self.upper[d][i].abs() + self.upper[d][(i + n - d) % n].abs();
                } else {
                    if i + d < n {
                        r += self.upper[d][i].abs();
                    }
                    if i >= d {
                        r += self.upper[d][i - d].abs();
                    }
                }
            }
            best = best.max(r);
        }
        best
    }
}

impl BandedOperator {
    /// `scale·A + diag(shift)` restricted to the active nodes, with weight `weight`
    /// (indexed by active node).
    pub(crate) fn restrict(&self, scale: f64, shift: &[f64], weight: Vec<f64>) -> Result<BandedSym> {
        let start = self.grid.active().start;
        let n = self.grid.active().len();
        BandedSym::from_fn(n, self.bandwidth(), self.grid.is_periodic(), weight, |i, j| {
            let (gi, gj) = (start + i, start + j);
            let mut v = scale * self.entry(gi, gj);
            if gi == gj {
                v += shift[gi];
            }
            v
        })
    }
}

impl Grid {
    /// Embeds values on the active nodes into a full-grid vector (zero at walls).
    pub(crate) fn lift<T: Copy + Default>(&self, active: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.n_points];
        out[self.active()].copy_from_slice(active);
        out
    }
}

fn stencil(order: usize, h: f64) -> Result<Vec<f64>> {
    let h2 = h * h;
    match order {
        2 => Ok(vec![1.0 / h2, -2.0 / h2, 1.0 / h2]),
        4 => Ok([-1.0, 16.0, -30.0, 16.0, -1.0]
            .iter()
            .map(|c| c / (12.0 * h2))
            .collect()),
        _ => Err(WaveError::config(format!(
            "unsupported finite-difference order {order} (expected 2 or 4)"
        ))),
    }
}

/// Stencil order and angular momentum for the kinetic operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    pub order: usize,
    /// Only used on radial grids.
    pub angular_momentum: i64,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            order: 2,
            angular_momentum: 0,
        }
    }
}

/// The Laplacian appropriate for the grid: the reduced radial operator on
/// radial grids, the plain one otherwise.
pub fn laplacian_for(grid: &Grid, disc: Discretization) -> Result<BandedOperator> {
    match grid.kind() {
        GridKind::Radial => build_radial_laplacian(grid, disc.angular_momentum, disc.order),
        GridKind::Line => build_laplacian(grid, disc.order),
    }
}

/// Centered-difference `d²/dx²` with the grid's boundary condition.
///
/// Near a Dirichlet wall the stencil's out-of-grid points are filled by odd
/// reflection about the wall, which keeps the active block symmetric and is
/// exact for linear functions.
pub fn build_laplacian(grid: &Grid, order: usize) -> Result<BandedOperator> {
    let coeffs = stencil(order, grid.spacing())?;
    let k = coeffs.len() / 2;
    let n = grid.len();
    if grid.is_periodic() && n < 2 * k + 1 {
        return Err(WaveError::config("periodic grid too small for the stencil"));
    }
    let mut op = BandedOperator::zeros(grid, k);
    let walls = grid.walls();
    let active = grid.active();

    // Accumulate row by row into a dense row buffer so that each symmetric slot
    // is written exactly once.
    for i in active.clone() {
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * k + 2);
        for (s, &c) in coeffs.iter().enumerate() {
            let j = i as isize + s as isize - k as isize;
            if grid.is_periodic() {
                row.push((j.rem_euclid(n as isize) as usize, c));
                continue;
            }
            let (left, right) = walls.expect("dirichlet grid has walls");
            if j >= 0 && (j as usize) < n {
                row.push((j as usize, c));
            } else if j < 0 {
                match left {
                    Wall::Node(w) => {
                        let w = w as isize;
                        row.push((w as usize, 2.0 * c));
                        row.push(((2 * w - j) as usize, -c));
                    }
                    Wall::GhostLeft => {
                        // wall at index -1 with value 0
                        if j < -1 {
                            row.push(((-2 - j) as usize, -c));
                        }
                    }
                }
            } else {
                let Wall::Node(w) = right else { unreachable!() };
                let w = w as isize;
                row.push((w as usize, 2.0 * c));
                row.push(((2 * w - j) as usize, -c));
            }
        }
        for (j, c) in row {
            // Off-diagonal slots shared by two active rows are written from the
            // lower-indexed row only; slots touching a wall are written from
            // the active side.
            if j == i {
                op.add(i, j, c);
            } else if !active.contains(&j) {
                op.add(i, j, c);
            } else if in_upper_half(i, j, n, grid.is_periodic(), k) {
                op.add(i, j, c);
            }
        }
    }
    Ok(op)
}

/// True when `(i, j)` is stored in row `i`'s forward half of the band.
fn in_upper_half(i: usize, j: usize, n: usize, periodic: bool, k: usize) -> bool {
    if periodic {
        let fwd = (j + n - i) % n;
        fwd >= 1 && fwd <= k
    } else {
        j > i
    }
}

/// Reduced radial operator `u ↦ u'' - l(l+1)/r² u`. The kinetic operator is
/// `-ħ²/2m` times this.
pub fn build_radial_laplacian(grid: &Grid, l: i64, order: usize) -> Result<BandedOperator> {
    if grid.kind() != GridKind::Radial {
        return Err(WaveError::config("radial Laplacian needs a radial grid"));
    }
    if l < 0 {
        return Err(WaveError::config(format!("angular momentum l must be >= 0, got {l}")));
    }
    let mut op = build_laplacian(grid, order)?;
    if l > 0 {
        let ll = (l * (l + 1)) as f64;
        let centrifugal: Vec<f64> = grid.points().iter().map(|r| -ll / (r * r)).collect();
        op.add_diagonal(&centrifugal);
    }
    Ok(op)
}
