//! Means, the operator `Lambda Z = Z - alpha/(1+alpha) mean(Z)`, the
//! homogenising transform `T = Theta + alpha mean(Theta) - thetaB`, and the
//! assembly of the non-local wall trace.

use crate::data::{Params, ThetaBSpec};
use crate::elliptic::{dirichlet_laplacian, solve_poisson_dirichlet_from, LinearSolveReport};
use crate::error::{Error, Result};
use crate::grid::{EdgeTrace, Grid, ScalarField};

/// Cell average by midpoint quadrature.
pub fn mean(field: &ScalarField) -> f64 {
    let g = field.grid();
    field.values().iter().sum::<f64>() * g.cell_volume() / g.area()
}

pub fn lambda_apply(field: &ScalarField, alpha: f64) -> ScalarField {
    field.add_scalar(-alpha / (1.0 + alpha) * mean(field))
}

pub fn lambda_inverse(field: &ScalarField, alpha: f64) -> ScalarField {
    field.add_scalar(alpha * mean(field))
}

/// `<Lambda Z, W>` in the discrete `L^2` inner product.
pub fn lambda_inner(z: &ScalarField, w: &ScalarField, alpha: f64) -> f64 {
    let g = z.grid();
    z.dot(w) - alpha / (1.0 + alpha) * mean(z) * mean(w) * g.area()
}

/// Boundary data together with its discrete harmonic extension.
#[derive(Debug, Clone)]
pub struct BoundaryClosure {
    thetab: ScalarField,
    trace: EdgeTrace,
    alpha: f64,
    report: LinearSolveReport,
}

impl BoundaryClosure {
    /// Builds the extension of `spec` by a Laplace solve, started from the
    /// sampled closed form (exact already for harmonic specs).
    pub fn new(grid: &Grid, spec: &ThetaBSpec, alpha: f64, tol: f64) -> Result<Self> {
        let guess = ScalarField::from_fn(*grid, |x, y| spec.eval(grid, x, y));
        Self::extend(spec.trace(grid), alpha, tol, Some(&guess), grid)
    }

    pub fn from_params(grid: &Grid, params: &Params) -> Result<Self> {
        Self::new(grid, &params.thetab_spec, params.alpha, params.lin_tol)
    }

    /// Extension of an arbitrary edge trace.
    pub fn from_trace(grid: &Grid, trace: EdgeTrace, alpha: f64, tol: f64) -> Result<Self> {
        Self::extend(trace, alpha, tol, None, grid)
    }

    fn extend(trace: EdgeTrace, alpha: f64, tol: f64, guess: Option<&ScalarField>, grid: &Grid) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        let zero = ScalarField::zeros(*grid);
        let (thetab, report) = solve_poisson_dirichlet_from(grid, &zero, &trace, tol, guess)?;
        let report = report.require("harmonic extension")?;
        Ok(Self {
            thetab,
            trace,
            alpha,
            report,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.thetab.grid()
    }

    /// Harmonic extension of the boundary data.
    pub fn thetab(&self) -> &ScalarField {
        &self.thetab
    }

    pub fn trace(&self) -> &EdgeTrace {
        &self.trace
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn report(&self) -> LinearSolveReport {
        self.report
    }

    /// Same boundary data under a different coefficient.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(Self { alpha, ..self.clone() })
    }

    /// Max-norm of the discrete Laplacian of the stored extension.
    pub fn harmonic_residual(&self) -> f64 {
        dirichlet_laplacian(&self.thetab, &self.trace).max_abs()
    }
}

pub fn to_cal_t(theta: &ScalarField, closure: &BoundaryClosure) -> ScalarField {
    theta
        .add_scalar(closure.alpha * mean(theta))
        .axpy(-1.0, &closure.thetab)
}

pub fn from_cal_t(cal_t: &ScalarField, closure: &BoundaryClosure) -> ScalarField {
    let s = cal_t.axpy(1.0, &closure.thetab);
    lambda_apply(&s, closure.alpha)
}

/// Wall trace `thetaB - alpha mean(theta)`.
pub fn boundary_value(theta: &ScalarField, closure: &BoundaryClosure) -> EdgeTrace {
    closure.trace.shifted(-closure.alpha * mean(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn unit(n: usize) -> Grid {
        build_grid(n, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn mean_examples() {
        let g = unit(16);
        assert_eq!(mean(&ScalarField::constant(g, 3.25)), 3.25);
        assert!((mean(&ScalarField::from_fn(g, |_, y| 1.0 - y)) - 0.5).abs() <= 1e-12);
        let odd = ScalarField::from_fn(g, |x, _| libm::sin(2.0 * core::f64::consts::PI * x));
        assert!(mean(&odd).abs() <= 1e-12);
    }

    #[test]
    fn lambda_examples() {
        let g = unit(8);
        let l = lambda_apply(&ScalarField::constant(g, 3.0), 0.5);
        assert!(l.add_scalar(-2.0).max_abs() < 1e-15);
        let z = ScalarField::from_fn(g, |x, _| x - 0.5);
        assert!(lambda_apply(&z, 0.7).axpy(-1.0, &z).max_abs() < 1e-15);
        assert_eq!(lambda_apply(&z, 0.0), z);
        let w = lambda_inverse(&ScalarField::constant(g, 2.0), 0.25);
        assert!(w.add_scalar(-2.5).max_abs() < 1e-15);
    }

    #[test]
    fn closure_of_linear_data_is_exact() {
        let g = unit(16);
        let spec = ThetaBSpec::LinearY { a: 1.0, b: -1.0 };
        let cl = BoundaryClosure::new(&g, &spec, 0.5, 1e-10).unwrap();
        assert_eq!(cl.report().iterations, 0);
        assert!(cl.harmonic_residual() <= 1e-10);
        assert!(cl.thetab().axpy(-1.0, &ScalarField::from_fn(g, |_, y| 1.0 - y)).max_abs() < 1e-14);
    }

    #[test]
    fn closure_of_cosine_data_is_harmonic() {
        let g = unit(16);
        let spec = ThetaBSpec::CosineX { amp: 1.0, k: 1.0 };
        let cl = BoundaryClosure::new(&g, &spec, 0.5, 1e-11).unwrap();
        // Residual relative to the O(1/h^2) boundary forcing.
        assert!(cl.harmonic_residual() <= 1e-11 * 2.0 * 256.0 * 64.0);
    }

    #[test]
    fn cal_t_examples() {
        let g = unit(12);
        let zero = BoundaryClosure::new(&g, &ThetaBSpec::Constant(0.0), 0.5, 1e-10).unwrap();
        assert_eq!(to_cal_t(&ScalarField::zeros(g), &zero).max_abs(), 0.0);

        let cl = BoundaryClosure::new(&g, &ThetaBSpec::LinearY { a: 1.0, b: -1.0 }, 0.5, 1e-10).unwrap();
        let theta0 = from_cal_t(&ScalarField::zeros(g), &cl);
        let expected = cl.thetab().add_scalar(-0.5 / 1.5 * mean(cl.thetab()));
        assert!(theta0.axpy(-1.0, &expected).max_abs() < 1e-15);
        // That state satisfies the boundary condition at its own mean.
        let trace = boundary_value(&theta0, &cl);
        assert!(trace.max_diff(&cl.trace().shifted(-1.0 / 6.0)) < 1e-14);

        let decoupled = cl.with_alpha(0.0).unwrap();
        let t = ScalarField::from_fn(g, |x, y| x * y);
        assert!(from_cal_t(&t, &decoupled).axpy(-1.0, &t.axpy(1.0, cl.thetab())).max_abs() < 1e-15);
    }

    #[test]
    fn boundary_value_examples() {
        let g = unit(8);
        let cl = BoundaryClosure::new(&g, &ThetaBSpec::Constant(2.0), 0.5, 1e-10).unwrap();
        let tr = boundary_value(&ScalarField::constant(g, 1.0), &cl);
        assert!(tr.max_diff(&EdgeTrace::constant(&g, 1.5)) < 1e-15);
        let free = cl.with_alpha(0.0).unwrap();
        assert_eq!(boundary_value(&ScalarField::constant(g, 7.0), &free), *cl.trace());
    }

    #[test]
    fn rejects_alpha_outside_unit_interval() {
        let g = unit(8);
        assert!(matches!(
            BoundaryClosure::new(&g, &ThetaBSpec::Constant(1.0), 1.0, 1e-10),
            Err(Error::AlphaOutOfRange(_))
        ));
    }
}
