//! Stationary states: the closed form for boundary data aligned with the
//! potential, pseudo-time steady solves for the general case, the
//! sufficient stability condition for aligned data and a computable
//! decay margin for the relative energy.

use crate::data::{make_potential, GSpec, Params};
use crate::elliptic::poincare_constant;
use crate::error::{Error, Result};
use crate::flow::Stepper;
use crate::grid::{EdgeTrace, ScalarField, SimState, VectorField};
use crate::nonlocal::{boundary_value, from_cal_t, to_cal_t, BoundaryClosure};

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub us: VectorField,
    pub thetas: ScalarField,
    pub cal_ts: ScalarField,
    /// Wall trace of `thetas` under the non-local condition.
    pub trace: EdgeTrace,
    /// Steady-state residual: per-unit-time change for marched solutions,
    /// harmonic residual of the extension for the closed form.
    pub residual: f64,
}

impl EquilibriumSolution {
    pub fn state(&self) -> SimState {
        SimState::new(self.us.clone(), self.thetas.clone()).expect("grids agree")
    }

    fn from_state(state: &SimState, closure: &BoundaryClosure, residual: f64) -> Self {
        Self {
            us: state.u.clone(),
            thetas: state.theta.clone(),
            cal_ts: to_cal_t(&state.theta, closure),
            trace: boundary_value(&state.theta, closure),
            residual,
        }
    }
}

/// How missing neighbours are filled when differencing at the walls.
#[derive(Clone, Copy)]
enum Ghost<'a> {
    Dirichlet(&'a EdgeTrace),
    OneSided,
}

/// Cell-centred gradient of a scalar field.
fn cell_gradient(f: &ScalarField, ghost: Ghost<'_>, i: usize, j: usize) -> (f64, f64) {
    let g = f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let c = f.at(i, j);
    let side = |nb: Option<f64>, wall: Option<f64>, far: f64| match (nb, ghost) {
        (Some(v), _) => v,
        (None, Ghost::Dirichlet(_)) => 2.0 * wall.unwrap_or(c) - c,
        (None, Ghost::OneSided) => 2.0 * c - far,
    };
    let (left, right) = (i.checked_sub(1).map(|k| f.at(k, j)), (i + 1 < nx).then(|| f.at(i + 1, j)));
    let (down, up) = (j.checked_sub(1).map(|k| f.at(i, k)), (j + 1 < ny).then(|| f.at(i, j + 1)));
    let tr = match ghost {
        Ghost::Dirichlet(t) => Some(t),
        Ghost::OneSided => None,
    };
    let w = side(left, tr.map(|t| t.left[j]), right.unwrap_or(c));
    let e = side(right, tr.map(|t| t.right[j]), left.unwrap_or(c));
    let s = side(down, tr.map(|t| t.bottom[i]), up.unwrap_or(c));
    let n = side(up, tr.map(|t| t.top[i]), down.unwrap_or(c));
    ((e - w) / (2.0 * g.hx()), (n - s) / (2.0 * g.hy()))
}

fn gradient_sup(f: &ScalarField, ghost: Ghost<'_>) -> f64 {
    let g = f.grid();
    let mut m: f64 = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (gx, gy) = cell_gradient(f, ghost, i, j);
            m = m.max(libm::hypot(gx, gy));
        }
    }
    m
}

/// `max |grad thetaB x grad G|` over cell centres.
pub fn alignment_defect(closure: &BoundaryClosure, g_spec: &GSpec) -> f64 {
    let g = closure.grid();
    let tb = closure.thetab();
    let mut m: f64 = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let (ax, ay) = cell_gradient(tb, Ghost::Dirichlet(closure.trace()), i, j);
            let (bx, by) = g_spec.gradient(g.xc(i), g.yc(j));
            m = m.max(libm::fabs(ax * by - ay * bx));
        }
    }
    m
}

/// `u_s = 0`, `Theta_s = thetaB - alpha m / (1 + alpha)` with `m` the mean
/// of the harmonic extension. Fails for non-aligned data, which needs
/// [`steady_solve`].
pub fn aligned_equilibrium(closure: &BoundaryClosure, g_spec: &GSpec) -> Result<EquilibriumSolution> {
    let g = *closure.grid();
    let defect = alignment_defect(closure, g_spec);
    let scale = gradient_sup(closure.thetab(), Ghost::Dirichlet(closure.trace()))
        * gradient_sup(&make_potential(&g, g_spec), Ghost::OneSided);
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::NotAligned(defect));
    }
    let thetas = from_cal_t(&ScalarField::zeros(g), closure);
    let state = SimState::new(VectorField::zeros(g), thetas).expect("same grid");
    Ok(EquilibriumSolution::from_state(&state, closure, closure.harmonic_residual()))
}

/// Marches the coupled system until the change of `(u, Theta)` over one
/// unit of time drops below `tol_steady`.
pub fn steady_solve(
    closure: &BoundaryClosure,
    params: &Params,
    init: SimState,
    tol_steady: f64,
    max_t: f64,
) -> Result<EquilibriumSolution> {
    if !(tol_steady > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol_steady",
            reason: alloc::format!("must be positive, got {tol_steady}"),
        });
    }
    let mut stepper = Stepper::new(closure.clone(), params.clone());
    let mut state = init;
    let mut snapshot = state.clone();
    let mut residual = f64::INFINITY;
    while state.t < max_t {
        let next = stepper.step(&state)?.state;
        if next.u == state.u && next.theta == state.theta {
            return Ok(EquilibriumSolution::from_state(&next, closure, 0.0));
        }
        state = next;
        if state.t >= snapshot.t + 1.0 {
            residual = state.theta.axpy(-1.0, &snapshot.theta).l2_norm() + state.u.axpy(-1.0, &snapshot.u).l2_norm();
            residual /= state.t - snapshot.t;
            if residual < tol_steady {
                return Ok(EquilibriumSolution::from_state(&state, closure, residual));
            }
            snapshot = state.clone();
        }
    }
    Err(Error::SteadyNotReached { t: state.t, residual })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub cp: f64,
    pub grad_g: f64,
    pub grad_thetab: f64,
    /// `||grad G|| ||grad thetaB||`.
    pub lhs: f64,
    /// `cp^2 mu kappa`.
    pub rhs: f64,
    pub aligned: bool,
    pub satisfied: bool,
    pub optimal_z: Option<f64>,
    pub margin: f64,
    /// `min_Z (Z ||grad G|| + ||grad thetaB|| / Z) = 2 sqrt(lhs)`.
    pub quadratic_min: f64,
    /// `2 cp^2 sqrt(mu kappa)`.
    pub quadratic_bound: f64,
}

impl StabilityReport {
    /// Positive definiteness of the two-weight quadratic form.
    pub fn quadratic_form_definite(&self) -> bool {
        self.quadratic_min < self.quadratic_bound
    }
}

pub fn stability_check(closure: &BoundaryClosure, g_spec: &GSpec, params: &Params) -> Result<StabilityReport> {
    let g = *closure.grid();
    let cp = poincare_constant(&g, 1e-10)?;
    stability_check_with(closure, g_spec, params, cp)
}

/// As [`stability_check`] with a precomputed Poincaré constant.
pub fn stability_check_with(closure: &BoundaryClosure, g_spec: &GSpec, params: &Params, cp: f64) -> Result<StabilityReport> {
    let g = *closure.grid();
    let grad_g = gradient_sup(&make_potential(&g, g_spec), Ghost::OneSided);
    let grad_thetab = gradient_sup(closure.thetab(), Ghost::Dirichlet(closure.trace()));
    let lhs = grad_g * grad_thetab;
    let rhs = cp * cp * params.mu * params.kappa;
    let scale = lhs.max(1.0);
    let optimal_z = (grad_g > 0.0 && grad_thetab > 0.0).then(|| libm::sqrt(grad_thetab / grad_g));
    Ok(StabilityReport {
        cp,
        grad_g,
        grad_thetab,
        lhs,
        rhs,
        aligned: alignment_defect(closure, g_spec) <= 1e-10 * scale,
        satisfied: lhs <= rhs,
        optimal_z,
        margin: rhs - lhs,
        quadratic_min: 2.0 * libm::sqrt(lhs),
        quadratic_bound: 2.0 * cp * cp * libm::sqrt(params.mu * params.kappa),
    })
}

/// Frobenius sup-norm of the cell-centred velocity Jacobian, with no-slip
/// ghosts at the walls.
fn velocity_gradient_sup(u: &VectorField) -> f64 {
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let uc = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
            return f64::NAN;
        }
        let (i, j) = (i as usize, j as usize);
        0.5 * (u.ux_at(i, j) + u.ux_at(i + 1, j))
    };
    let vc = |i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
            return f64::NAN;
        }
        let (i, j) = (i as usize, j as usize);
        0.5 * (u.uy_at(i, j) + u.uy_at(i, j + 1))
    };
    // Reflect through the wall: tangential ghost `-v`, so the wall value is 0.
    let get = |f: &dyn Fn(isize, isize) -> f64, i: isize, j: isize, ci: isize, cj: isize| {
        let v = f(i, j);
        if v.is_nan() {
            -f(ci, cj)
        } else {
            v
        }
    };
    let mut m: f64 = 0.0;
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let dux = (u.ux_at(i as usize + 1, j as usize) - u.ux_at(i as usize, j as usize)) / g.hx();
            let dvy = (u.uy_at(i as usize, j as usize + 1) - u.uy_at(i as usize, j as usize)) / g.hy();
            let duy = (get(&uc, i, j + 1, i, j) - get(&uc, i, j - 1, i, j)) / (2.0 * g.hy());
            let dvx = (get(&vc, i + 1, j, i, j) - get(&vc, i - 1, j, i, j)) / (2.0 * g.hx());
            m = m.max(libm::sqrt(dux * dux + duy * duy + dvx * dvx + dvy * dvy));
        }
    }
    m
}

/// Gap of the decisive coefficient in the summed relative-energy balance,
/// with the coupling split by the weight `beta` that equalises the two
/// coefficients:
/// `min(mu cp^2 - |grad u_s| - s beta, kappa cp^2 - s / beta)`,
/// `s = (|grad G| + |grad(thetaB + T_s)|) / 2`.
/// A positive value certifies exponential decay of the relative energy.
pub fn smallness_margin(eq: &EquilibriumSolution, closure: &BoundaryClosure, g_spec: &GSpec, params: &Params) -> Result<f64> {
    let g = *closure.grid();
    let cp = poincare_constant(&g, 1e-10)?;
    Ok(smallness_margin_with(eq, closure, g_spec, params, cp))
}

pub fn smallness_margin_with(
    eq: &EquilibriumSolution,
    closure: &BoundaryClosure,
    g_spec: &GSpec,
    params: &Params,
    cp: f64,
) -> f64 {
    let g = *closure.grid();
    let grad_g = gradient_sup(&make_potential(&g, g_spec), Ghost::OneSided);
    let total = closure.thetab().axpy(1.0, &eq.cal_ts);
    let grad_total = gradient_sup(&total, Ghost::Dirichlet(closure.trace()));
    let p = params.mu * cp * cp - velocity_gradient_sup(&eq.us);
    let q = params.kappa * cp * cp;
    let s = 0.5 * (grad_g + grad_total);
    balanced_margin(p, q, s)
}

fn balanced_margin(p: f64, q: f64, s: f64) -> f64 {
    if s == 0.0 {
        return p.min(q);
    }
    let beta = ((p - q) + libm::sqrt((q - p) * (q - p) + 4.0 * s * s)) / (2.0 * s);
    (p - s * beta).min(q - s / beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ThetaBSpec;
    use crate::nonlocal::mean;
    use crate::grid::{build_grid, Grid};
    use core::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        build_grid(n, n, 1.0, 1.0).unwrap()
    }

    fn closure(g: &Grid, spec: ThetaBSpec, alpha: f64) -> BoundaryClosure {
        BoundaryClosure::new(g, &spec, alpha, 1e-10).unwrap()
    }

    #[test]
    fn aligned_closed_form() {
        let g = unit(16);
        let cl = closure(&g, ThetaBSpec::LinearY { a: 1.0, b: -1.0 }, 0.5);
        let eq = aligned_equilibrium(&cl, &GSpec::LinearY(-1.0)).unwrap();
        assert_eq!(eq.us.l2_norm(), 0.0);
        let expected = ScalarField::from_fn(g, |_, y| 1.0 - y - 1.0 / 6.0);
        assert!(eq.thetas.axpy(-1.0, &expected).max_abs() < 1e-13);
        assert!((mean(&eq.thetas) - 1.0 / 3.0).abs() < 1e-13);
        assert!(eq.cal_ts.max_abs() < 1e-13);
        assert!(eq.trace.max_diff(&cl.trace().shifted(-0.5 * mean(&eq.thetas))) < 1e-15);

        let free = cl.with_alpha(0.0).unwrap();
        let eq0 = aligned_equilibrium(&free, &GSpec::LinearY(-1.0)).unwrap();
        assert_eq!(&eq0.thetas, free.thetab());

        let c = closure(&g, ThetaBSpec::Constant(3.0), 0.5);
        let eqc = aligned_equilibrium(&c, &GSpec::LinearX(2.0)).unwrap();
        assert!(eqc.thetas.add_scalar(-2.0).max_abs() < 1e-13);
    }

    #[test]
    fn misaligned_data_is_rejected() {
        let g = unit(16);
        let cl = closure(&g, ThetaBSpec::LinearX { a: 0.0, b: 1.0 }, 0.5);
        assert!(matches!(aligned_equilibrium(&cl, &GSpec::LinearY(-1.0)), Err(Error::NotAligned(_))));
    }

    #[test]
    fn stability_examples() {
        let g = unit(32);
        let cl = closure(&g, ThetaBSpec::LinearY { a: 1.0, b: -1.0 }, 0.5);
        let params = Params::default();
        let r = stability_check(&cl, &GSpec::LinearY(-1.0), &params).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!((r.rhs - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 2e-3);
        assert!(r.satisfied && r.aligned);
        assert!((r.margin - (r.rhs - 1.0)).abs() < 1e-12);
        assert!((r.optimal_z.unwrap() - 1.0).abs() < 1e-12);

        let flat = closure(&g, ThetaBSpec::Constant(2.0), 0.5);
        let r = stability_check_with(&flat, &GSpec::LinearY(-1.0), &params, r.cp).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.satisfied);

        let soft = Params {
            mu: 0.1,
            kappa: 0.1,
            ..params
        };
        let r = stability_check_with(&cl, &GSpec::LinearY(-1.0), &soft, r.cp).unwrap();
        assert!(r.rhs < 1.0 && !r.satisfied);
    }

    #[test]
    fn verdict_symmetric_in_data_roles() {
        let g = unit(16);
        let params = Params::default();
        let cp = poincare_constant(&g, 1e-10).unwrap();
        let a = closure(&g, ThetaBSpec::LinearY { a: 0.0, b: 3.0 }, 0.5);
        let b = closure(&g, ThetaBSpec::LinearY { a: 0.0, b: 5.0 }, 0.5);
        let r1 = stability_check_with(&a, &GSpec::LinearY(5.0), &params, cp).unwrap();
        let r2 = stability_check_with(&b, &GSpec::LinearY(3.0), &params, cp).unwrap();
        assert!((r1.lhs - r2.lhs).abs() < 1e-10);
        assert_eq!(r1.satisfied, r2.satisfied);
    }

    #[test]
    fn margin_examples() {
        let g = unit(16);
        let params = Params::default();
        let cp = poincare_constant(&g, 1e-10).unwrap();
        let zero = closure(&g, ThetaBSpec::Constant(0.0), 0.5);
        let eq = aligned_equilibrium(&zero, &GSpec::LinearY(0.0)).unwrap();
        let m = smallness_margin_with(&eq, &zero, &GSpec::LinearY(0.0), &params, cp);
        assert!((m - cp * cp).abs() < 1e-12);

        let cl = closure(&g, ThetaBSpec::LinearY { a: 1.0, b: -1.0 }, 0.5);
        let eq = aligned_equilibrium(&cl, &GSpec::LinearY(-1.0)).unwrap();
        let m = smallness_margin_with(&eq, &cl, &GSpec::LinearY(-1.0), &params, cp);
        // Hand bound: s = 1, beta = 1, margin = C^2 - 1.
        assert!((m - (cp * cp - 1.0)).abs() < 1e-10, "{m}");

        let mut last = f64::INFINITY;
        for c in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let m = smallness_margin_with(&eq, &cl, &GSpec::LinearY(-c), &params, cp);
            assert!(m <= last);
            last = m;
        }
    }

    #[test]
    fn zero_data_is_steady_at_once() {
        let g = unit(8);
        let params = Params {
            thetab_spec: ThetaBSpec::Constant(0.0),
            ..Params::default()
        };
        let cl = BoundaryClosure::from_params(&g, &params).unwrap();
        let init = SimState::new(VectorField::zeros(g), ScalarField::zeros(g)).unwrap();
        let eq = steady_solve(&cl, &params, init, 1e-8, 10.0).unwrap();
        assert_eq!(eq.thetas.max_abs(), 0.0);
        assert_eq!(eq.residual, 0.0);
    }
}
