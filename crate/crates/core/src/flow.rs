//! Momentum transport on the staggered layout: explicit skew-symmetric
//! advection, backward-Euler viscosity with no-slip walls, buoyancy
//! `-Theta grad G`, and a non-incremental pressure projection. Also the
//! coupled step and step-size control.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{make_potential, Params};
use crate::elliptic::{iteration_cap, neumann_stencil, pcg, CgSettings, Criterion, End, LinearSolveReport, Stencil};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, SimState, VectorField};
use crate::heat::{HeatStepper, TemperatureStep};
use crate::nonlocal::BoundaryClosure;

/// `dt_cfl * min(1 / rate, dt_max)` where `rate = max(|ux|/hx, |uy|/hy)`.
pub(crate) fn compute_dt_for(rate: f64, params: &Params) -> f64 {
    let limit = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    params.dt_cfl * limit.min(params.dt_max)
}

/// Advective step size, capped by `dt_max`.
pub fn compute_dt(state: &SimState, params: &Params) -> f64 {
    let g = state.grid();
    let rate = (state.u.max_abs_ux() / g.hx()).max(state.u.max_abs_uy() / g.hy());
    compute_dt_for(rate, params)
}

/// `-Theta grad_h G` on interior faces, with `Theta` averaged to the face.
/// For `G = c (y - ly/2)` and `Theta = 1` this is `-c` on every interior
/// y-face.
pub fn buoyancy_force(theta: &ScalarField, g: &ScalarField) -> VectorField {
    let grid = *theta.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut f = VectorField::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            let th = 0.5 * (theta.at(i - 1, j) + theta.at(i, j));
            let k = f.ix(i, j);
            f.ux_mut()[k] = -th * (g.at(i, j) - g.at(i - 1, j)) / grid.hx();
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let th = 0.5 * (theta.at(i, j - 1) + theta.at(i, j));
            let k = f.iy(i, j);
            f.uy_mut()[k] = -th * (g.at(i, j) - g.at(i, j - 1)) / grid.hy();
        }
    }
    f
}

/// `div(u (x) u)` on interior faces in flux form with centred averages.
/// For discretely solenoidal `u` it satisfies `<C(u) u, u> = 0` up to
/// rounding.
pub fn momentum_advection(u: &VectorField) -> VectorField {
    let grid = *u.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let ux = |i: usize, j: usize| u.ux_at(i, j);
    let uy = |i: usize, j: usize| u.uy_at(i, j);
    let mut c = VectorField::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            let ue = 0.5 * (ux(i, j) + ux(i + 1, j));
            let uw = 0.5 * (ux(i - 1, j) + ux(i, j));
            let mut fy = 0.0;
            if j + 1 < ny {
                let vn = 0.5 * (uy(i - 1, j + 1) + uy(i, j + 1));
                fy += vn * 0.5 * (ux(i, j) + ux(i, j + 1));
            }
            if j > 0 {
                let vs = 0.5 * (uy(i - 1, j) + uy(i, j));
                fy -= vs * 0.5 * (ux(i, j - 1) + ux(i, j));
            }
            let k = c.ix(i, j);
            c.ux_mut()[k] = (ue * ue - uw * uw) / hx + fy / hy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let vn = 0.5 * (uy(i, j) + uy(i, j + 1));
            let vs = 0.5 * (uy(i, j - 1) + uy(i, j));
            let mut fx = 0.0;
            if i + 1 < nx {
                let ue = 0.5 * (ux(i + 1, j - 1) + ux(i + 1, j));
                fx += ue * 0.5 * (uy(i, j) + uy(i + 1, j));
            }
            if i > 0 {
                let uw = 0.5 * (ux(i, j - 1) + ux(i, j));
                fx -= uw * 0.5 * (uy(i - 1, j) + uy(i, j));
            }
            let k = c.iy(i, j);
            c.uy_mut()[k] = fx / hx + (vn * vn - vs * vs) / hy;
        }
    }
    c
}

/// Negative Laplacians on the interior x-faces and y-faces. Walls normal to
/// a component sit one spacing from its first unknown, walls tangential to
/// it half a spacing.
fn viscous_stencils(grid: &Grid) -> (Stencil, Stencil) {
    let (nx, ny, hx, hy) = (grid.nx(), grid.ny(), grid.hx(), grid.hy());
    (
        Stencil::new(nx - 1, ny, hx, hy, [End::Node, End::Node, End::Cell, End::Cell]),
        Stencil::new(nx, ny - 1, hx, hy, [End::Cell, End::Cell, End::Node, End::Node]),
    )
}

fn interior_x(u: &VectorField) -> Vec<f64> {
    let g = u.grid();
    let mut v = Vec::with_capacity((g.nx() - 1) * g.ny());
    for j in 0..g.ny() {
        v.extend((1..g.nx()).map(|i| u.ux_at(i, j)));
    }
    v
}

fn interior_y(u: &VectorField) -> Vec<f64> {
    let g = u.grid();
    u.uy()[g.nx()..g.nx() * g.ny()].to_vec()
}

fn scatter(grid: Grid, x: &[f64], y: &[f64]) -> VectorField {
    let mut u = VectorField::zeros(grid);
    let nx = grid.nx();
    for j in 0..grid.ny() {
        for i in 1..nx {
            let k = u.ix(i, j);
            u.ux_mut()[k] = x[j * (nx - 1) + i - 1];
        }
    }
    u.uy_mut()[nx..nx * grid.ny()].copy_from_slice(y);
    u
}

/// `||grad u||^2`, consistent with the viscous operator.
pub fn velocity_gradient_energy(u: &VectorField) -> f64 {
    let g = u.grid();
    let (ax, ay) = viscous_stencils(g);
    g.cell_volume() * (ax.energy(&interior_x(u)) + ay.energy(&interior_y(u)))
}

/// Solves `(Id - mu dt Lap_h) u = rhs` with no-slip walls.
pub fn viscous_solve(rhs: &VectorField, mu: f64, dt: f64, tol: f64) -> (VectorField, LinearSolveReport) {
    let grid = *rhs.grid();
    let (ax, ay) = viscous_stencils(&grid);
    let bx = interior_x(rhs);
    let by = interior_y(rhs);
    let mut x = bx.clone();
    let mut y = by.clone();
    let ax = ax.with_shift_scale(1.0, mu * dt);
    let ay = ay.with_shift_scale(1.0, mu * dt);
    let rx = pcg(&ax, &bx, &mut x, &CgSettings::relative(bx.len(), tol));
    let ry = pcg(&ay, &by, &mut y, &CgSettings::relative(by.len(), tol));
    let report = LinearSolveReport {
        iterations: rx.iterations + ry.iterations,
        residual: rx.residual.max(ry.residual),
        converged: rx.converged && ry.converged,
    };
    (scatter(grid, &x, &y), report)
}

/// Removes the gradient part of `v`: solves `Lap_h phi = div v / dt` with
/// zero-flux walls and returns `v - dt grad phi`, whose max-norm divergence
/// is at most `tol`. `phi` starts from its previous value.
pub fn project(v: &VectorField, dt: f64, tol: f64, phi: &mut Vec<f64>) -> (VectorField, LinearSolveReport) {
    let grid = *v.grid();
    let n = grid.cells();
    if phi.len() != n {
        *phi = vec![0.0; n];
    }
    let div = v.divergence();
    let m = div.values().iter().sum::<f64>() / n as f64;
    let b: Vec<f64> = div.values().iter().map(|d| -(d - m) / dt).collect();
    let settings = CgSettings {
        tol,
        criterion: Criterion::AbsoluteInf { scale: dt },
        max_iter: iteration_cap(n, tol),
        mean_free: true,
    };
    let report = pcg(&neumann_stencil(&grid), &b, phi, &settings);
    let mut u = v.clone();
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        for i in 1..nx {
            let k = u.ix(i, j);
            u.ux_mut()[k] -= dt * (phi[grid.idx(i, j)] - phi[grid.idx(i - 1, j)]) / grid.hx();
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let k = u.iy(i, j);
            u.uy_mut()[k] -= dt * (phi[grid.idx(i, j)] - phi[grid.idx(i, j - 1)]) / grid.hy();
        }
    }
    (u, report)
}

#[derive(Debug, Clone)]
pub struct MomentumStep {
    pub u: VectorField,
    /// Pressure potential of the projection.
    pub phi: ScalarField,
    pub div_max: f64,
    pub viscous: LinearSolveReport,
    pub projection: LinearSolveReport,
}

/// Advances `u` by one step, driven by the already updated temperature.
/// Buoyancy is added after the viscous solve so that a gradient force is
/// removed exactly by the projection.
pub fn momentum_step(
    u: &VectorField,
    theta: &ScalarField,
    potential: &ScalarField,
    params: &Params,
    dt: f64,
    phi: &mut Vec<f64>,
) -> Result<MomentumStep> {
    let star = u.axpy(-dt, &momentum_advection(u));
    let (visc, viscous) = viscous_solve(&star, params.mu, dt, params.lin_tol);
    let viscous = viscous.require("viscous solve")?;
    let forced = visc.axpy(dt, &buoyancy_force(theta, potential));
    let (next, projection) = project(&forced, dt, params.lin_tol, phi);
    let projection = projection.require("pressure projection")?;
    let div_max = next.max_divergence();
    Ok(MomentumStep {
        phi: ScalarField::from_values(*u.grid(), phi.clone())?,
        u: next,
        div_max,
        viscous,
        projection,
    })
}

/// Everything produced by one coupled step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SimState,
    pub dt: f64,
    pub heat: TemperatureStep,
    pub flow: MomentumStep,
}

/// Coupled stepper: temperature with the old velocity, then momentum with
/// the new temperature. Keeps the diffusion response and the pressure
/// potential between steps.
#[derive(Debug, Clone)]
pub struct Stepper {
    closure: BoundaryClosure,
    params: Params,
    potential: ScalarField,
    heat: HeatStepper,
    phi: Vec<f64>,
}

fn check_finite(state: &SimState) -> Result<()> {
    if let Some(index) = state.theta.first_non_finite() {
        return Err(Error::NonFinite { array: "theta", index });
    }
    if let Some((array, index)) = state.u.first_non_finite() {
        return Err(Error::NonFinite { array, index });
    }
    Ok(())
}

impl Stepper {
    pub fn new(closure: BoundaryClosure, params: Params) -> Self {
        let potential = make_potential(closure.grid(), &params.g_spec);
        Self {
            closure,
            params,
            potential,
            heat: HeatStepper::new(),
            phi: Vec::new(),
        }
    }

    pub fn closure(&self) -> &BoundaryClosure {
        &self.closure
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn step(&mut self, state: &SimState) -> Result<StepOutcome> {
        self.step_until(state, f64::INFINITY)
    }

    /// Like [`Stepper::step`] but shortens the step so it does not pass
    /// `t_stop`.
    pub fn step_until(&mut self, state: &SimState, t_stop: f64) -> Result<StepOutcome> {
        if state.grid() != self.closure.grid() {
            return Err(Error::GridMismatch("state and boundary data live on different grids".into()));
        }
        check_finite(state)?;
        let mut dt = compute_dt(state, &self.params);
        if state.t + dt > t_stop {
            dt = t_stop - state.t;
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "t_stop",
                reason: format!("no time left to step: t = {}, stop = {t_stop}", state.t),
            });
        }
        let heat = self.heat.step(state, &self.closure, &self.params, dt)?;
        let flow = momentum_step(&state.u, &heat.theta, &self.potential, &self.params, dt, &mut self.phi)?;
        let next = SimState {
            t: state.t + dt,
            step: state.step + 1,
            u: flow.u.clone(),
            theta: heat.theta.clone(),
        };
        check_finite(&next)?;
        let tol = 10.0 * self.params.lin_tol;
        if flow.div_max > tol {
            return Err(Error::Incompressibility {
                divergence: flow.div_max,
                tol,
            });
        }
        Ok(StepOutcome {
            state: next,
            dt,
            heat,
            flow,
        })
    }
}

/// One coupled step from scratch (no reused solver data).
pub fn full_step(state: &SimState, closure: &BoundaryClosure, params: &Params) -> Result<SimState> {
    Ok(Stepper::new(closure.clone(), params.clone()).step(state)?.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{GSpec, ThetaBSpec};
    use crate::grid::build_grid;
    use core::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        build_grid(n, n, 1.0, 1.0).unwrap()
    }

    /// Curl of a vertex streamfunction vanishing at the walls.
    fn swirl(g: Grid, amp: f64) -> VectorField {
        let psi = |x: f64, y: f64| amp * libm::pow(libm::sin(PI * x) * libm::sin(PI * y), 2.0) * (1.0 + x * y);
        let mut ux = vec![0.0; (g.nx() + 1) * g.ny()];
        let mut uy = vec![0.0; g.nx() * (g.ny() + 1)];
        for j in 0..g.ny() {
            for i in 0..=g.nx() {
                ux[j * (g.nx() + 1) + i] = (psi(g.xf(i), g.yf(j + 1)) - psi(g.xf(i), g.yf(j))) / g.hy();
            }
        }
        for j in 0..=g.ny() {
            for i in 0..g.nx() {
                uy[j * g.nx() + i] = -(psi(g.xf(i + 1), g.yf(j)) - psi(g.xf(i), g.yf(j))) / g.hx();
            }
        }
        VectorField::from_components(g, ux, uy).unwrap()
    }

    #[test]
    fn dt_examples() {
        let g = build_grid(64, 64, 1.0, 1.0).unwrap();
        let params = Params::default();
        let rest = SimState::new(VectorField::zeros(g), ScalarField::zeros(g)).unwrap();
        assert_eq!(compute_dt(&rest, &params), params.dt_cfl * params.dt_max);
        let mut u = VectorField::zeros(g);
        let k = u.ix(10, 10);
        u.ux_mut()[k] = 1.0;
        let moving = SimState::new(u.clone(), ScalarField::zeros(g)).unwrap();
        let params = Params { dt_max: 1.0, ..params };
        assert!(compute_dt(&moving, &params) <= 0.5 / 64.0);
        let faster = SimState::new(u.scaled(3.0), ScalarField::zeros(g)).unwrap();
        assert!(compute_dt(&faster, &params) <= compute_dt(&moving, &params));
    }

    #[test]
    fn buoyancy_examples() {
        let g = unit(8);
        let pot = make_potential(&g, &GSpec::LinearY(2.0));
        assert_eq!(buoyancy_force(&ScalarField::zeros(g), &pot).l2_norm(), 0.0);
        let f = buoyancy_force(&ScalarField::constant(g, 1.0), &pot);
        assert!(f.max_abs_ux() < 1e-14);
        for j in 1..g.ny() {
            for i in 0..g.nx() {
                assert!((f.uy_at(i, j) + 2.0).abs() < 1e-12);
            }
        }
        let pot1 = make_potential(&g, &GSpec::LinearY(1.0));
        let f = buoyancy_force(&ScalarField::from_fn(g, |_, y| y), &pot1);
        for j in 1..g.ny() {
            assert!((f.uy_at(3, j) + g.yf(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn advection_is_energy_neutral() {
        let g = unit(24);
        let u = swirl(g, 1.0);
        assert!(u.max_divergence() < 1e-11);
        let c = momentum_advection(&u);
        assert!(c.dot(&u).abs() < 1e-12 * c.l2_norm() * u.l2_norm());
        assert_eq!(momentum_advection(&VectorField::zeros(g)).l2_norm(), 0.0);
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let g = unit(12);
        let params = Params::default();
        let pot = make_potential(&g, &params.g_spec);
        let mut phi = Vec::new();
        let out = momentum_step(&VectorField::zeros(g), &ScalarField::zeros(g), &pot, &params, 0.01, &mut phi).unwrap();
        assert_eq!(out.u.l2_norm(), 0.0);
    }

    #[test]
    fn gradient_buoyancy_is_projected_out() {
        let g = unit(16);
        let params = Params::default();
        let pot = make_potential(&g, &GSpec::LinearY(-3.0));
        let mut phi = Vec::new();
        let out =
            momentum_step(&VectorField::zeros(g), &ScalarField::constant(g, 0.8), &pot, &params, 0.01, &mut phi).unwrap();
        assert!(out.u.max_abs_ux().max(out.u.max_abs_uy()) <= 10.0 * params.lin_tol);
    }

    #[test]
    fn projection_meets_divergence_bound() {
        let g = unit(32);
        let v = VectorField::from_fn(g, |x, y| libm::sin(3.0 * x) * y, |x, y| x * libm::cos(2.0 * y));
        let mut phi = Vec::new();
        let (u, rep) = project(&v, 0.01, 1e-10, &mut phi);
        assert!(rep.converged);
        assert!(u.max_divergence() <= 1e-10 * 1.01, "{}", u.max_divergence());
        assert!(u.normal_components_vanish());
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let g = unit(12);
        let params = Params {
            thetab_spec: ThetaBSpec::Constant(0.0),
            ..Params::default()
        };
        let cl = BoundaryClosure::from_params(&g, &params).unwrap();
        let mut stepper = Stepper::new(cl, params);
        let mut s = SimState::new(VectorField::zeros(g), ScalarField::zeros(g)).unwrap();
        for _ in 0..5 {
            s = stepper.step(&s).unwrap().state;
        }
        assert_eq!(s.theta.max_abs(), 0.0);
        assert_eq!(s.u.l2_norm(), 0.0);
        assert_eq!(s.step, 5);
    }

    #[test]
    fn aligned_equilibrium_is_a_fixed_point() {
        let g = unit(32);
        let params = Params::default();
        let cl = BoundaryClosure::from_params(&g, &params).unwrap();
        let theta = crate::nonlocal::from_cal_t(&ScalarField::zeros(g), &cl);
        let s = SimState::new(VectorField::zeros(g), theta.clone()).unwrap();
        let next = full_step(&s, &cl, &params).unwrap();
        let change = next.u.l2_norm() + next.theta.axpy(-1.0, &theta).l2_norm();
        assert!(change <= 1e-8, "{change}");
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let g = unit(8);
        let params = Params::default();
        let cl = BoundaryClosure::from_params(&g, &params).unwrap();
        let mut theta = ScalarField::zeros(g);
        theta.values_mut()[5] = f64::NAN;
        let s = SimState::new(VectorField::zeros(g), theta).unwrap();
        assert_eq!(
            full_step(&s, &cl, &params).unwrap_err(),
            Error::NonFinite { array: "theta", index: 5 }
        );
    }

    #[test]
    fn viscous_energy_matches_sine_mode() {
        // ux = sin(pi x) sin(pi y): ||grad u||^2 = pi^2 / 2.
        let g = unit(64);
        let u = VectorField::from_fn(g, |x, y| libm::sin(PI * x) * libm::sin(PI * y), |_, _| 0.0);
        let e = velocity_gradient_energy(&u);
        let exact = PI * PI / 2.0;
        assert!((e - exact).abs() / exact < 1e-3, "{e} vs {exact}");
    }
}
