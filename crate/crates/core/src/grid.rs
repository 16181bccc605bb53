//! Rectangular MAC discretization of `(0, lx) x (0, ly)` and the field
//! containers living on it.
//!
//! Scalars sit at cell centres `((i + 1/2) hx, (j + 1/2) hy)` and are stored
//! row-major (`j * nx + i`). The x-velocity lives on vertical faces
//! `(i hx, (j + 1/2) hy)`, `i = 0..=nx`, the y-velocity on horizontal faces
//! `((i + 1/2) hx, j hy)`, `j = 0..=ny`. Wall faces carry the normal velocity
//! and are pinned to zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
}

/// Builds a grid, rejecting fewer than four cells per axis or non-positive
/// extents.
pub fn build_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
    Grid::new(nx, ny, lx, ly)
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 cells per axis, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive and finite, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    /// `|Omega|`.
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }
    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }
    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }
    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }
    pub fn xf(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }
    pub fn yf(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Cell-centred scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.cells()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.xc(i), grid.yc(j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "scalar field needs {} values, got {}",
                grid.cells(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, libm::fabs(*v)))
    }

    /// Discrete `L^2` inner product `hx hy sum a b`.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.grid.cell_volume() * dot(&self.values, &other.values)
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Values on the four edges of the rectangle, sampled at edge midpoints of
/// the adjacent boundary cells. `left`/`right` have `ny` entries, `bottom`/`top`
/// have `nx`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTrace {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl EdgeTrace {
    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            left: vec![c; grid.ny],
            right: vec![c; grid.ny],
            bottom: vec![c; grid.nx],
            top: vec![c; grid.nx],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            left: (0..grid.ny).map(|j| f(0.0, grid.yc(j))).collect(),
            right: (0..grid.ny).map(|j| f(grid.lx, grid.yc(j))).collect(),
            bottom: (0..grid.nx).map(|i| f(grid.xc(i), 0.0)).collect(),
            top: (0..grid.nx).map(|i| f(grid.xc(i), grid.ly)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let m = |v: &Vec<f64>| v.iter().map(|&x| f(x)).collect();
        Self {
            left: m(&self.left),
            right: m(&self.right),
            bottom: m(&self.bottom),
            top: m(&self.top),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.left
            .iter()
            .chain(&self.right)
            .chain(&self.bottom)
            .chain(&self.top)
            .copied()
    }

    pub fn min(&self) -> f64 {
        self.iter().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.iter().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| f64::max(m, libm::fabs(v)))
    }

    /// Largest edge-wise difference to another trace.
    pub fn max_diff(&self, other: &EdgeTrace) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(a - b)))
    }
}

/// Face-centred velocity on the MAC layout.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            ux: vec![0.0; (grid.nx + 1) * grid.ny],
            uy: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    /// Builds from raw face arrays; wall-normal entries are forced to zero.
    pub fn from_components(grid: Grid, ux: Vec<f64>, uy: Vec<f64>) -> Result<Self> {
        if ux.len() != (grid.nx + 1) * grid.ny || uy.len() != grid.nx * (grid.ny + 1) {
            return Err(Error::GridMismatch(format!(
                "velocity arrays have lengths {} / {}, expected {} / {}",
                ux.len(),
                uy.len(),
                (grid.nx + 1) * grid.ny,
                grid.nx * (grid.ny + 1)
            )));
        }
        let mut v = Self { grid, ux, uy };
        v.enforce_no_penetration();
        Ok(v)
    }

    /// Samples a continuous velocity at face centres.
    pub fn from_fn(grid: Grid, fx: impl Fn(f64, f64) -> f64, fy: impl Fn(f64, f64) -> f64) -> Self {
        let mut v = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                v.ux[j * (grid.nx + 1) + i] = fx(grid.xf(i), grid.yc(j));
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                v.uy[j * grid.nx + i] = fy(grid.xc(i), grid.yf(j));
            }
        }
        v.enforce_no_penetration();
        v
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn ux(&self) -> &[f64] {
        &self.ux
    }
    pub fn uy(&self) -> &[f64] {
        &self.uy
    }
    pub fn ux_mut(&mut self) -> &mut [f64] {
        &mut self.ux
    }
    pub fn uy_mut(&mut self) -> &mut [f64] {
        &mut self.uy
    }

    #[inline]
    pub fn ix(&self, i: usize, j: usize) -> usize {
        j * (self.grid.nx + 1) + i
    }
    #[inline]
    pub fn iy(&self, i: usize, j: usize) -> usize {
        j * self.grid.nx + i
    }
    #[inline]
    pub fn ux_at(&self, i: usize, j: usize) -> f64 {
        self.ux[self.ix(i, j)]
    }
    #[inline]
    pub fn uy_at(&self, i: usize, j: usize) -> f64 {
        self.uy[self.iy(i, j)]
    }

    pub fn enforce_no_penetration(&mut self) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        for j in 0..ny {
            self.ux[j * (nx + 1)] = 0.0;
            self.ux[j * (nx + 1) + nx] = 0.0;
        }
        for i in 0..nx {
            self.uy[i] = 0.0;
            self.uy[ny * nx + i] = 0.0;
        }
    }

    /// True when all wall-normal components are exactly `0.0`.
    pub fn normal_components_vanish(&self) -> bool {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        (0..ny).all(|j| self.ux[j * (nx + 1)] == 0.0 && self.ux[j * (nx + 1) + nx] == 0.0)
            && (0..nx).all(|i| self.uy[i] == 0.0 && self.uy[ny * nx + i] == 0.0)
    }

    pub fn divergence(&self) -> ScalarField {
        let g = self.grid;
        let mut d = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                d.values[g.idx(i, j)] = (self.ux_at(i + 1, j) - self.ux_at(i, j)) / g.hx
                    + (self.uy_at(i, j + 1) - self.uy_at(i, j)) / g.hy;
            }
        }
        d
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence().max_abs()
    }

    pub fn max_abs_ux(&self) -> f64 {
        self.ux.iter().fold(0.0, |m, v| f64::max(m, libm::fabs(*v)))
    }
    pub fn max_abs_uy(&self) -> f64 {
        self.uy.iter().fold(0.0, |m, v| f64::max(m, libm::fabs(*v)))
    }

    /// Discrete `L^2` inner product: every face carries the weight `hx hy`.
    pub fn dot(&self, other: &VectorField) -> f64 {
        self.grid.cell_volume() * (dot(&self.ux, &other.ux) + dot(&self.uy, &other.uy))
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    /// `1/2 ||u||^2`.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.dot(self)
    }

    pub fn axpy(&self, s: f64, other: &VectorField) -> Self {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        Self {
            grid: self.grid,
            ux: f(&self.ux, &other.ux),
            uy: f(&self.uy, &other.uy),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            ux: self.ux.iter().map(|v| v * s).collect(),
            uy: self.uy.iter().map(|v| v * s).collect(),
        }
    }

    pub fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        if let Some(k) = self.ux.iter().position(|v| !v.is_finite()) {
            return Some(("ux", k));
        }
        self.uy.iter().position(|v| !v.is_finite()).map(|k| ("uy", k))
    }
}

/// The evolving pair `(u, Theta)` with its clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub u: VectorField,
    pub theta: ScalarField,
}

impl SimState {
    pub fn new(u: VectorField, theta: ScalarField) -> Result<Self> {
        if u.grid() != theta.grid() {
            return Err(Error::GridMismatch(format!(
                "velocity on {}x{}, temperature on {}x{}",
                u.grid().nx(),
                u.grid().ny(),
                theta.grid().nx(),
                theta.grid().ny()
            )));
        }
        Ok(Self {
            t: 0.0,
            step: 0,
            u,
            theta,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.theta.grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings() {
        let g = build_grid(64, 64, 1.0, 1.0).unwrap();
        assert_eq!(g.hx(), 1.0 / 64.0);
        assert_eq!(g.hy(), 1.0 / 64.0);
        let g = build_grid(4, 8, 2.0, 1.0).unwrap();
        assert_eq!(g.hx(), 0.5);
        assert_eq!(g.hy(), 0.125);
        assert_eq!(g.area(), 2.0);
    }

    #[test]
    fn rejects_small_or_degenerate() {
        assert!(build_grid(2, 4, 1.0, 1.0).is_err());
        assert!(build_grid(4, 3, 1.0, 1.0).is_err());
        assert!(build_grid(4, 4, 0.0, 1.0).is_err());
        assert!(build_grid(4, 4, 1.0, -1.0).is_err());
        assert!(build_grid(4, 4, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn lengths_round_trip() {
        for &(nx, ny, lx, ly) in &[(7usize, 13usize, 0.3, 2.7), (128, 64, 1.0, 3.0), (33, 5, 10.0, 0.1)] {
            let g = build_grid(nx, ny, lx, ly).unwrap();
            assert!((g.hx() * nx as f64 - lx).abs() <= 4.0 * f64::EPSILON * lx);
            assert!((g.hy() * ny as f64 - ly).abs() <= 4.0 * f64::EPSILON * ly);
        }
    }

    #[test]
    fn wall_normals_are_zero() {
        let g = build_grid(6, 5, 1.0, 1.0).unwrap();
        let u = VectorField::from_fn(g, |_, _| 1.0, |_, _| -2.0);
        assert!(u.normal_components_vanish());
        let raw = VectorField::from_components(g, vec![3.0; 7 * 5], vec![1.0; 6 * 6]).unwrap();
        assert!(raw.normal_components_vanish());
    }
}
