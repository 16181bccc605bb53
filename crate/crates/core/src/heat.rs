//! One step of the temperature equation: donor-cell advection followed by
//! backward-Euler diffusion with the non-local wall trace, plus the
//! frozen-velocity contraction experiment.

use alloc::vec::Vec;

use crate::data::{AdvectionScheme, BcCoupling, Params};
use crate::diagnostics::fit_decay_rate;
use crate::elliptic::{poincare_constant, solve_helmholtz_dirichlet, LinearSolveReport, RankOneClosure};
use crate::error::{Error, Result};
use crate::flow::compute_dt_for;
use crate::grid::{EdgeTrace, ScalarField, SimState, VectorField};
use crate::nonlocal::{lambda_inner, mean, BoundaryClosure};

/// Largest cell inflow Courant number `dt * sum_faces |u_f| / (2 h_f)` and
/// the cell where it occurs.
pub fn courant_number(u: &VectorField, dt: f64) -> (f64, usize, usize) {
    let g = *u.grid();
    let mut worst = (0.0, 0, 0);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let cx = libm::fabs(u.ux_at(i, j)) + libm::fabs(u.ux_at(i + 1, j));
            let cy = libm::fabs(u.uy_at(i, j)) + libm::fabs(u.uy_at(i, j + 1));
            let c = 0.5 * dt * (cx / g.hx() + cy / g.hy());
            if c > worst.0 {
                worst = (c, i, j);
            }
        }
    }
    worst
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if libm::fabs(a) < libm::fabs(b) {
        a
    } else {
        b
    }
}

/// Upwind face value between `left` (index `k`) and `right` (index `k + 1`)
/// along a line of `n` values read through `at`.
fn face_value(at: &impl Fn(usize) -> f64, n: usize, k: usize, vel: f64, scheme: AdvectionScheme) -> f64 {
    let (l, r) = (at(k), at(k + 1));
    match scheme {
        AdvectionScheme::Upwind => {
            if vel >= 0.0 {
                l
            } else {
                r
            }
        }
        AdvectionScheme::Limited => {
            if vel >= 0.0 {
                let slope = if k >= 1 { minmod(l - at(k - 1), r - l) } else { 0.0 };
                l + 0.5 * slope
            } else {
                let slope = if k + 2 < n { minmod(r - l, at(k + 2) - r) } else { 0.0 };
                r - 0.5 * slope
            }
        }
    }
}

/// Conservative donor-cell transport. Walls carry no flux because the
/// normal velocity vanishes there.
pub fn advect_temperature(theta: &ScalarField, u: &VectorField, dt: f64) -> Result<ScalarField> {
    advect_temperature_with(theta, u, dt, AdvectionScheme::Upwind)
}

pub fn advect_temperature_with(
    theta: &ScalarField,
    u: &VectorField,
    dt: f64,
    scheme: AdvectionScheme,
) -> Result<ScalarField> {
    let g = *theta.grid();
    if *u.grid() != g {
        return Err(Error::GridMismatch("temperature and velocity grids differ".into()));
    }
    let (courant, i, j) = courant_number(u, dt);
    if courant > 1.0 + 1e-12 {
        return Err(Error::CflViolation { i, j, courant });
    }
    let (nx, ny) = (g.nx(), g.ny());
    let t = theta.values();
    let mut out = t.to_vec();
    let (lx, ly) = (dt / g.hx(), dt / g.hy());
    for j in 0..ny {
        let row = |k: usize| t[g.idx(k, j)];
        for i in 1..nx {
            let v = u.ux_at(i, j);
            if v == 0.0 {
                continue;
            }
            let flux = v * face_value(&row, nx, i - 1, v, scheme) * lx;
            out[g.idx(i - 1, j)] -= flux;
            out[g.idx(i, j)] += flux;
        }
    }
    for i in 0..nx {
        let col = |k: usize| t[g.idx(i, k)];
        for j in 1..ny {
            let v = u.uy_at(i, j);
            if v == 0.0 {
                continue;
            }
            let flux = v * face_value(&col, ny, j - 1, v, scheme) * ly;
            out[g.idx(i, j - 1)] -= flux;
            out[g.idx(i, j)] += flux;
        }
    }
    ScalarField::from_values(g, out)
}

/// The unit-trace response for the current `kappa dt`, rebuilt (warm
/// started) only when the step size changes.
#[derive(Debug, Clone, Default)]
pub struct DiffusionCache {
    closure: Option<RankOneClosure>,
}

impl DiffusionCache {
    pub fn closure(&mut self, closure: &BoundaryClosure, c: f64, tol: f64) -> Result<&RankOneClosure> {
        let fresh = match self.closure.take() {
            Some(old) if old.c() == c && old.grid() == closure.grid() => old,
            Some(old) if old.grid() == closure.grid() => old.rebuilt(c, tol)?,
            _ => RankOneClosure::new(closure.grid(), c, tol)?,
        };
        Ok(self.closure.insert(fresh))
    }
}

/// `(Id - kappa dt Lap_h) Theta = theta_star` with the wall trace
/// `thetaB - alpha mean(Theta)` imposed at the new level.
pub fn diffuse_temperature(
    theta_star: &ScalarField,
    closure: &BoundaryClosure,
    kappa: f64,
    dt: f64,
    tol: f64,
) -> Result<ScalarField> {
    let mut cache = DiffusionCache::default();
    let (theta, _, report) = diffuse_implicit(theta_star, closure, kappa * dt, tol, &mut cache, None)?;
    report.require("implicit diffusion")?;
    Ok(theta)
}

fn diffuse_implicit(
    theta_star: &ScalarField,
    closure: &BoundaryClosure,
    c: f64,
    tol: f64,
    cache: &mut DiffusionCache,
    guess: Option<&ScalarField>,
) -> Result<(ScalarField, EdgeTrace, LinearSolveReport)> {
    let rank_one = cache.closure(closure, c, tol)?;
    rank_one.solve(theta_star, closure.trace(), closure.alpha(), tol, guess)
}

/// Extremes allowed by the discrete maximum principle for one step and the
/// extremes actually reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub lo: f64,
    pub hi: f64,
    pub min: f64,
    pub max: f64,
}

impl Envelope {
    /// Amount by which the new field leaves `[lo, hi]` (zero if inside).
    pub fn excess(&self) -> f64 {
        (self.lo - self.min).max(self.max - self.hi).max(0.0)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.excess() <= tol
    }
}

/// `sum ([Theta - hi]^+)^2` and `sum ([Theta - lo]^-)^2`, cell weighted.
pub fn truncation_energies(theta: &ScalarField, lo: f64, hi: f64) -> (f64, f64) {
    let w = theta.grid().cell_volume();
    theta.values().iter().fold((0.0, 0.0), |(p, n), &v| {
        let a = (v - hi).max(0.0);
        let b = (lo - v).max(0.0);
        (p + w * a * a, n + w * b * b)
    })
}

/// Truncation energies before and after a step, measured against the
/// extremes of the new wall trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub before: (f64, f64),
    pub after: (f64, f64),
}

impl Truncation {
    /// Largest increase of either energy across the step.
    pub fn increase(&self) -> f64 {
        (self.after.0 - self.before.0).max(self.after.1 - self.before.1)
    }
}

#[derive(Debug, Clone)]
pub struct TemperatureStep {
    pub theta: ScalarField,
    pub trace: EdgeTrace,
    pub envelope: Envelope,
    pub truncation: Truncation,
    pub report: LinearSolveReport,
}

/// Temperature stepper owning the reusable diffusion data.
#[derive(Debug, Clone, Default)]
pub struct HeatStepper {
    cache: DiffusionCache,
}

impl HeatStepper {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(
        &mut self,
        state: &SimState,
        closure: &BoundaryClosure,
        params: &Params,
        dt: f64,
    ) -> Result<TemperatureStep> {
        let theta_n = &state.theta;
        let star = advect_temperature_with(theta_n, &state.u, dt, params.advection)?;
        let c = params.kappa * dt;
        let tol = params.lin_tol;
        let (theta, trace, report) = match params.bc_coupling {
            BcCoupling::Implicit => diffuse_implicit(&star, closure, c, tol, &mut self.cache, Some(theta_n))?,
            BcCoupling::Lagged => {
                let trace = closure.trace().shifted(-closure.alpha() * mean(theta_n));
                let (theta, report) = solve_helmholtz_dirichlet(closure.grid(), c, &star, &trace, tol)?;
                (theta, trace, report)
            }
        };
        let report = report.require("implicit diffusion")?;
        let envelope = Envelope {
            lo: theta_n.min().min(trace.min()),
            hi: theta_n.max().max(trace.max()),
            min: theta.min(),
            max: theta.max(),
        };
        let (lo, hi) = (trace.min(), trace.max());
        let truncation = Truncation {
            before: truncation_energies(theta_n, lo, hi),
            after: truncation_energies(&theta, lo, hi),
        };
        Ok(TemperatureStep {
            theta,
            trace,
            envelope,
            truncation,
            report,
        })
    }
}

pub fn temperature_step(
    state: &SimState,
    closure: &BoundaryClosure,
    params: &Params,
    dt: f64,
) -> Result<TemperatureStep> {
    HeatStepper::new().step(state, closure, params, dt)
}

/// `1/2 <Lambda dT, dT>` for the transformed difference
/// `dT = dTheta + alpha mean(dTheta)`.
pub fn contraction_energy(theta1: &ScalarField, theta2: &ScalarField, alpha: f64) -> f64 {
    let d = theta1.axpy(-1.0, theta2);
    let dt = d.add_scalar(alpha * mean(&d));
    0.5 * lambda_inner(&dt, &dt, alpha)
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Energy never grew by more than `1e-12 E(0)` in one step.
    pub monotone: bool,
    pub max_increase: f64,
    pub cp: f64,
    /// Smallest `eps` with `E(t) <= E(0) exp(-2 kappa cp^2 t (1 - eps))` at
    /// every sample.
    pub epsilon_h: f64,
    /// Fitted decay rate over the whole run, if the series allows a fit.
    pub rate: Option<f64>,
}

impl DecayReport {
    pub fn bound_holds(&self) -> bool {
        self.epsilon_h <= 0.1
    }
}

/// Evolves two temperatures under the same prescribed velocities and
/// tracks the energy of their difference. Step `n` uses
/// `u_series[min(n, len - 1)]`; an empty series means a fluid at rest.
pub fn frozen_velocity_contraction(
    theta1_0: &ScalarField,
    theta2_0: &ScalarField,
    u_series: &[VectorField],
    closure: &BoundaryClosure,
    params: &Params,
    t_end: f64,
) -> Result<DecayReport> {
    let grid = *closure.grid();
    let rest = VectorField::zeros(grid);
    let velocity = |n: usize| u_series.get(n).or(u_series.last()).unwrap_or(&rest);
    let umax = u_series
        .iter()
        .fold(0.0f64, |m, u| m.max(u.max_abs_ux() / grid.hx()).max(u.max_abs_uy() / grid.hy()));
    let dt = compute_dt_for(umax, params);
    let cp = poincare_constant(&grid, 1e-10)?;
    let alpha = closure.alpha();

    let mut s1 = SimState::new(rest.clone(), theta1_0.clone())?;
    let mut s2 = SimState::new(rest.clone(), theta2_0.clone())?;
    let (mut h1, mut h2) = (HeatStepper::new(), HeatStepper::new());
    let e0 = contraction_energy(theta1_0, theta2_0, alpha);
    let mut times = alloc::vec![0.0];
    let mut energies = alloc::vec![e0];
    let mut max_increase = f64::NEG_INFINITY;
    let mut epsilon_h: f64 = 0.0;
    let mut n = 0;
    let mut t = 0.0;
    while t < t_end - 1e-12 * t_end {
        let step = dt.min(t_end - t);
        s1.u = velocity(n).clone();
        s2.u = s1.u.clone();
        s1.theta = h1.step(&s1, closure, params, step)?.theta;
        s2.theta = h2.step(&s2, closure, params, step)?.theta;
        t += step;
        n += 1;
        let e = contraction_energy(&s1.theta, &s2.theta, alpha);
        max_increase = max_increase.max(e - energies[energies.len() - 1]);
        if e0 > 0.0 && e > 0.0 {
            let rate = libm::log(e0 / e) / (2.0 * params.kappa * cp * cp * t);
            epsilon_h = epsilon_h.max(1.0 - rate);
        }
        times.push(t);
        energies.push(e);
    }
    let rate = fit_decay_rate(&times, &energies, t_end, 0.0).ok().map(|f| f.rate);
    Ok(DecayReport {
        monotone: max_increase <= 1e-12 * e0,
        max_increase,
        cp,
        epsilon_h,
        rate,
        times,
        energies,
    })
}
