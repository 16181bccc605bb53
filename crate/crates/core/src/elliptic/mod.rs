//! Matrix-free elliptic solvers on the cell-centred layout: Dirichlet and
//! Neumann Poisson, implicit-diffusion (Helmholtz) systems, the rank-one
//! closure for the non-local boundary mean, and the Dirichlet Poincaré
//! constant.
//!
//! All operators are five-point stencils. A Dirichlet value `b` on an edge
//! enters through the ghost `2b - u` of the adjacent cell, so the boundary
//! contribution to the right-hand side is `2b / h^2` per edge.

mod cg;
mod stencil;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

pub(crate) use cg::{iteration_cap, pcg, CgSettings, Criterion};
pub(crate) use stencil::{End, Stencil};

use crate::error::{Error, Result};
use crate::grid::{dot, EdgeTrace, Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    /// Final relative residual (true, not recursive).
    pub residual: f64,
    pub converged: bool,
}

impl LinearSolveReport {
    fn combine(self, other: LinearSolveReport) -> Self {
        Self {
            iterations: self.iterations + other.iterations,
            residual: self.residual.max(other.residual),
            converged: self.converged && other.converged,
        }
    }

    /// Turns a non-converged report into an error.
    pub fn require(self, solver: &'static str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                solver,
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        })
    }
}

pub(crate) fn dirichlet_stencil(grid: &Grid) -> Stencil {
    Stencil::new(grid.nx(), grid.ny(), grid.hx(), grid.hy(), [End::Cell; 4])
}

pub(crate) fn neumann_stencil(grid: &Grid) -> Stencil {
    Stencil::new(grid.nx(), grid.ny(), grid.hx(), grid.hy(), [End::Neumann; 4])
}

/// Adds `scale * 2 b / h^2` for every boundary cell of the trace.
pub(crate) fn add_boundary_terms(grid: &Grid, trace: &EdgeTrace, scale: f64, rhs: &mut [f64]) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let wx = scale * 2.0 / (grid.hx() * grid.hx());
    let wy = scale * 2.0 / (grid.hy() * grid.hy());
    for j in 0..ny {
        rhs[grid.idx(0, j)] += wx * trace.left[j];
        rhs[grid.idx(nx - 1, j)] += wx * trace.right[j];
    }
    for i in 0..nx {
        rhs[grid.idx(i, 0)] += wy * trace.bottom[i];
        rhs[grid.idx(i, ny - 1)] += wy * trace.top[i];
    }
}

/// Applies the discrete Laplacian with Dirichlet trace `trace`.
pub fn dirichlet_laplacian(field: &ScalarField, trace: &EdgeTrace) -> ScalarField {
    let grid = *field.grid();
    let op = dirichlet_stencil(&grid);
    let mut out = vec![0.0; grid.cells()];
    op.apply(field.values(), &mut out);
    let mut b = vec![0.0; grid.cells()];
    add_boundary_terms(&grid, trace, 1.0, &mut b);
    let values = out.iter().zip(&b).map(|(a, b)| b - a).collect();
    ScalarField::from_values(grid, values).expect("same grid")
}

/// `||grad v||^2` for `v` vanishing on the boundary, consistent with the
/// discrete Dirichlet Laplacian (`<-Lap_h v, v>`).
pub fn dirichlet_gradient_energy(v: &ScalarField) -> f64 {
    let grid = v.grid();
    grid.cell_volume() * dirichlet_stencil(grid).energy(v.values())
}

/// Solves `(shift I + scale A) u = rhs + scale * B(trace)`.
fn solve_dirichlet_system(
    grid: &Grid,
    shift: f64,
    scale: f64,
    rhs: &[f64],
    trace: &EdgeTrace,
    tol: f64,
    guess: Option<&ScalarField>,
) -> (ScalarField, LinearSolveReport) {
    let op = dirichlet_stencil(grid).with_shift_scale(shift, scale);
    let mut b = rhs.to_vec();
    add_boundary_terms(grid, trace, scale, &mut b);
    let mut x = match guess {
        Some(g) => g.values().to_vec(),
        None => vec![0.0; grid.cells()],
    };
    let report = pcg(&op, &b, &mut x, &CgSettings::relative(grid.cells(), tol));
    (ScalarField::from_values(*grid, x).expect("same grid"), report)
}

/// `Lap_h u = rhs` with Dirichlet data on the edges.
pub fn solve_poisson_dirichlet(
    grid: &Grid,
    rhs: &ScalarField,
    boundary: &EdgeTrace,
    tol: f64,
) -> Result<(ScalarField, LinearSolveReport)> {
    solve_poisson_dirichlet_from(grid, rhs, boundary, tol, None)
}

/// As [`solve_poisson_dirichlet`], starting CG from `guess`.
pub fn solve_poisson_dirichlet_from(
    grid: &Grid,
    rhs: &ScalarField,
    boundary: &EdgeTrace,
    tol: f64,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, LinearSolveReport)> {
    check_tol(tol)?;
    let neg: Vec<f64> = rhs.values().iter().map(|v| -v).collect();
    Ok(solve_dirichlet_system(grid, 0.0, 1.0, &neg, boundary, tol, guess))
}

/// `Lap_h u = rhs` with zero-flux walls, in the mean-zero class.
pub fn solve_poisson_neumann_zero_mean(
    grid: &Grid,
    rhs: &ScalarField,
    tol: f64,
) -> Result<(ScalarField, LinearSolveReport)> {
    check_tol(tol)?;
    let m = rhs.values().iter().sum::<f64>() / grid.cells() as f64;
    let scale = rhs.max_abs().max(1.0);
    if libm::fabs(m) > tol * scale {
        return Err(Error::IncompatibleRhs {
            mean: m,
            tol: tol * scale,
        });
    }
    let b: Vec<f64> = rhs.values().iter().map(|v| -(v - m)).collect();
    let mut x = vec![0.0; grid.cells()];
    let settings = CgSettings {
        mean_free: true,
        ..CgSettings::relative(grid.cells(), tol)
    };
    let report = pcg(&neumann_stencil(grid), &b, &mut x, &settings);
    Ok((ScalarField::from_values(*grid, x).expect("same grid"), report))
}

/// `(Id - c Lap_h) u = rhs` with Dirichlet data.
pub fn solve_helmholtz_dirichlet(
    grid: &Grid,
    c: f64,
    rhs: &ScalarField,
    boundary: &EdgeTrace,
    tol: f64,
) -> Result<(ScalarField, LinearSolveReport)> {
    check_tol(tol)?;
    check_c(c)?;
    Ok(solve_dirichlet_system(grid, 1.0, c, rhs.values(), boundary, tol, None))
}

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "c",
            reason: format!("diffusion coefficient must be positive, got {c}"),
        })
    }
}

/// Response of `(Id - c Lap_h)` to a unit boundary trace with zero source.
/// It depends on the grid and `c` only, so it is computed once per time step
/// size and reused.
#[derive(Debug, Clone)]
pub struct RankOneClosure {
    c: f64,
    unit_response: ScalarField,
    /// Mean of `unit_response`, in `(0, 1]`.
    m1: f64,
    report: LinearSolveReport,
}

impl RankOneClosure {
    pub fn new(grid: &Grid, c: f64, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        check_c(c)?;
        let zero = vec![0.0; grid.cells()];
        let ones = EdgeTrace::constant(grid, 1.0);
        let (unit_response, report) = solve_dirichlet_system(grid, 1.0, c, &zero, &ones, tol, None);
        let m1 = mean_of(&unit_response);
        Ok(Self {
            c,
            unit_response,
            m1,
            report,
        })
    }

    /// The closure for a new coefficient, warm-started from this one.
    pub fn rebuilt(&self, c: f64, tol: f64) -> Result<Self> {
        check_tol(tol)?;
        check_c(c)?;
        let grid = *self.unit_response.grid();
        let zero = vec![0.0; grid.cells()];
        let ones = EdgeTrace::constant(&grid, 1.0);
        let (unit_response, report) =
            solve_dirichlet_system(&grid, 1.0, c, &zero, &ones, tol, Some(&self.unit_response));
        let m1 = mean_of(&unit_response);
        Ok(Self {
            c,
            unit_response,
            m1,
            report,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn grid(&self) -> &Grid {
        self.unit_response.grid()
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    /// Solves `(Id - c Lap_h) u = rhs` with trace `thetab - alpha mean(u)`.
    /// Returns the solution, the trace actually imposed, and the combined
    /// report of both partial solves.
    pub fn solve(
        &self,
        rhs: &ScalarField,
        thetab: &EdgeTrace,
        alpha: f64,
        tol: f64,
        guess: Option<&ScalarField>,
    ) -> Result<(ScalarField, EdgeTrace, LinearSolveReport)> {
        let grid = *rhs.grid();
        // A guess for the solution has mean m, so the matching base is
        // guess + alpha m U.
        let lifted = guess.map(|g| g.axpy(alpha * mean_of(g), &self.unit_response));
        let (base, report) = solve_dirichlet_system(&grid, 1.0, self.c, rhs.values(), thetab, tol, lifted.as_ref());
        let denom = 1.0 + alpha * self.m1;
        if libm::fabs(denom) <= 1e-12 {
            return Err(Error::SingularCoupling(denom));
        }
        let m = mean_of(&base) / denom;
        let u = base.axpy(-alpha * m, &self.unit_response);
        let trace = thetab.shifted(-alpha * m);
        Ok((u, trace, report.combine(self.report)))
    }
}

fn mean_of(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() / f.values().len() as f64
}

/// `(Id - c Lap_h) u = rhs` with the non-local trace `thetab - alpha mean(u)`,
/// solved exactly by superposing the response to `thetab` and the response
/// to a unit trace.
pub fn solve_helmholtz_rank_one(
    grid: &Grid,
    c: f64,
    rhs: &ScalarField,
    thetab_trace: &EdgeTrace,
    alpha: f64,
    tol: f64,
) -> Result<(ScalarField, LinearSolveReport)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let closure = RankOneClosure::new(grid, c, tol)?;
    let (u, _, report) = closure.solve(rhs, thetab_trace, alpha, tol, None)?;
    Ok((u, report))
}

/// `sqrt(lambda_1)` of the discrete Dirichlet Laplacian by inverse power
/// iteration, stopped when successive Rayleigh quotients agree to `tol`
/// relatively.
pub fn poincare_constant(grid: &Grid, tol: f64) -> Result<f64> {
    Ok(libm::sqrt(smallest_dirichlet_eigenvalue(grid, tol)?.0))
}

/// Smallest eigenvalue of `-Lap_h` (homogeneous Dirichlet) and its
/// eigenvector, normalised to unit discrete `L^2` norm.
pub fn smallest_dirichlet_eigenvalue(grid: &Grid, tol: f64) -> Result<(f64, ScalarField)> {
    check_tol(tol)?;
    const MAX_ITER: usize = 500;
    let op = dirichlet_stencil(grid);
    let n = grid.cells();
    let inner_tol = (tol * 1e-3).clamp(1e-12, 1e-10);
    let settings = CgSettings::relative(n, inner_tol);
    let mut v = vec![1.0; n];
    normalise(&mut v);
    let mut lambda = op.energy(&v);
    let mut next = vec![0.0; n];
    for it in 1..=MAX_ITER {
        next.copy_from_slice(&v);
        let report = pcg(&op, &v, &mut next, &settings);
        report.require("inverse iteration inner solve")?;
        normalise(&mut next);
        core::mem::swap(&mut v, &mut next);
        let updated = op.energy(&v);
        let change = libm::fabs(updated - lambda) / updated;
        lambda = updated;
        if change <= tol && it > 1 {
            let mut field = ScalarField::from_values(*grid, v).expect("same grid");
            let norm = field.l2_norm();
            field.values_mut().iter_mut().for_each(|x| *x /= norm);
            return Ok((lambda, field));
        }
    }
    Err(Error::NotConverged {
        solver: "inverse power iteration",
        iterations: MAX_ITER,
        residual: f64::NAN,
    })
}

fn normalise(v: &mut [f64]) {
    let norm = libm::sqrt(dot(v, v));
    v.iter_mut().for_each(|x| *x /= norm);
}
