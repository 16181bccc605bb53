//! Time series of energies, extrema and energy-balance residuals, with the
//! event log of bound violations, decay-rate fits, running time averages
//! and the empirical absorbing radius.

use alloc::vec::Vec;

use crate::data::Params;
use crate::elliptic::dirichlet_gradient_energy;
use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::flow::{buoyancy_force, velocity_gradient_energy, StepOutcome};
use crate::grid::{ScalarField, SimState, VectorField};
use crate::nonlocal::{lambda_inner, mean, to_cal_t, BoundaryClosure};

/// `max|Theta_0| + 2/(1 - alpha^2) max|thetaB|`.
pub fn ut1_bound(theta0: &ScalarField, closure: &BoundaryClosure) -> Result<f64> {
    let a = closure.alpha();
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::AlphaOutOfRange(a));
    }
    Ok(theta0.max_abs() + 2.0 / (1.0 - a * a) * closure.trace().max_abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// New extrema outside the envelope of old interior values and new trace.
    MaxPrinciple,
    /// `|Theta|` above the uniform bound.
    Ut1,
    /// A truncation energy grew across a step.
    Truncation,
}

impl ViolationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ViolationKind::MaxPrinciple => "max_principle",
            ViolationKind::Ut1 => "ut1",
            ViolationKind::Truncation => "truncation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub step: u64,
    pub t: f64,
    pub kind: ViolationKind,
    pub value: f64,
    pub limit: f64,
}

/// Slack above which a truncation-energy increase is logged.
pub const TRUNCATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DiagnosticsLog {
    pub times: Vec<f64>,
    pub kinetic: Vec<f64>,
    /// `1/2 <Lambda T, T>`.
    pub thermal: Vec<f64>,
    pub theta_min: Vec<f64>,
    pub theta_max: Vec<f64>,
    pub ut1_bound: f64,
    pub div_max: Vec<f64>,
    pub w7_residual: Vec<f64>,
    pub w15_residual: Vec<f64>,
    /// Empty unless an equilibrium was registered.
    pub rel_energy: Vec<f64>,
    pub mean_theta: Vec<f64>,
    pub u_l2: Vec<f64>,
    pub theta_l2: Vec<f64>,
    pub cal_t_l2: Vec<f64>,
    pub violations: Vec<Violation>,
    /// Steps with a positive kinetic-energy residual.
    pub w7_positive: usize,
    alpha: f64,
    tol: f64,
    mu: f64,
    kappa: f64,
    equilibrium: Option<(VectorField, ScalarField)>,
}

impl DiagnosticsLog {
    pub fn new(
        initial: &SimState,
        closure: &BoundaryClosure,
        params: &Params,
        equilibrium: Option<&EquilibriumSolution>,
    ) -> Result<Self> {
        let mut log = Self {
            times: Vec::new(),
            kinetic: Vec::new(),
            thermal: Vec::new(),
            theta_min: Vec::new(),
            theta_max: Vec::new(),
            ut1_bound: ut1_bound(&initial.theta, closure)?,
            div_max: Vec::new(),
            w7_residual: Vec::new(),
            w15_residual: Vec::new(),
            rel_energy: Vec::new(),
            mean_theta: Vec::new(),
            u_l2: Vec::new(),
            theta_l2: Vec::new(),
            cal_t_l2: Vec::new(),
            violations: Vec::new(),
            w7_positive: 0,
            alpha: closure.alpha(),
            tol: params.lin_tol,
            mu: params.mu,
            kappa: params.kappa,
            equilibrium: equilibrium.map(|e| (e.us.clone(), e.cal_ts.clone())),
        };
        let cal_t = to_cal_t(&initial.theta, closure);
        log.push_state(initial, &cal_t, initial.u.max_divergence(), 0.0, 0.0);
        Ok(log)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push_state(&mut self, s: &SimState, cal_t: &ScalarField, div: f64, w7: f64, w15: f64) {
        self.times.push(s.t);
        self.kinetic.push(s.u.kinetic_energy());
        self.thermal.push(0.5 * lambda_inner(cal_t, cal_t, self.alpha));
        self.theta_min.push(s.theta.min());
        self.theta_max.push(s.theta.max());
        self.div_max.push(div);
        self.w7_residual.push(w7);
        self.w15_residual.push(w15);
        self.mean_theta.push(mean(&s.theta));
        self.u_l2.push(s.u.l2_norm());
        self.theta_l2.push(s.theta.l2_norm());
        self.cal_t_l2.push(cal_t.l2_norm());
        if let Some((us, cal_ts)) = &self.equilibrium {
            let du = s.u.axpy(-1.0, us);
            let dt = cal_t.axpy(-1.0, cal_ts);
            self.rel_energy.push(0.5 * (du.dot(&du) + lambda_inner(&dt, &dt, self.alpha)));
        }
        let bound = self.ut1_bound + 10.0 * self.tol;
        let peak = s.theta.max_abs();
        if peak > bound {
            self.flag(s, ViolationKind::Ut1, peak, bound);
        }
    }

    fn flag(&mut self, s: &SimState, kind: ViolationKind, value: f64, limit: f64) {
        self.violations.push(Violation {
            step: s.step,
            t: s.t,
            kind,
            value,
            limit,
        });
    }

    /// Appends the row for `outcome`, the step taken from `prev`.
    pub fn record(&mut self, prev: &SimState, outcome: &StepOutcome, closure: &BoundaryClosure, potential: &ScalarField) {
        let next = &outcome.state;
        let dt = outcome.dt;
        let cal_t = to_cal_t(&next.theta, closure);
        let cal_t_prev = to_cal_t(&prev.theta, closure);

        let work = buoyancy_force(&next.theta, potential).dot(&next.u);
        let w7 = next.u.kinetic_energy() - prev.u.kinetic_energy() + dt * self.mu * velocity_gradient_energy(&next.u)
            - dt * work;
        let thermal_prev = 0.5 * lambda_inner(&cal_t_prev, &cal_t_prev, self.alpha);
        let thermal = 0.5 * lambda_inner(&cal_t, &cal_t, self.alpha);
        let w15 = thermal - thermal_prev + dt * self.kappa * dirichlet_gradient_energy(&cal_t)
            - dt * transport_work(&prev.u, closure.thetab(), &cal_t);
        if w7 > 0.0 {
            self.w7_positive += 1;
        }
        self.push_state(next, &cal_t, outcome.flow.div_max, w7, w15);

        let env = outcome.heat.envelope;
        let tol = 10.0 * self.tol;
        if !env.holds(tol) {
            let (value, limit) = if env.max - env.hi > env.lo - env.min {
                (env.max, env.hi + tol)
            } else {
                (env.min, env.lo - tol)
            };
            self.flag(next, ViolationKind::MaxPrinciple, value, limit);
        }
        let inc = outcome.heat.truncation.increase();
        if inc > TRUNCATION_SLACK {
            self.flag(next, ViolationKind::Truncation, inc, TRUNCATION_SLACK);
        }
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn max_abs_theta(&self) -> f64 {
        self.theta_min
            .iter()
            .zip(&self.theta_max)
            .fold(0.0, |m, (a, b)| f64::max(m, libm::fabs(*a).max(libm::fabs(*b))))
    }
}

/// `sum_f u_f thetaB_f (grad T)_f hx hy` over interior faces.
fn transport_work(u: &VectorField, thetab: &ScalarField, cal_t: &ScalarField) -> f64 {
    let g = *u.grid();
    let mut s = 0.0;
    for j in 0..g.ny() {
        for i in 1..g.nx() {
            let tb = 0.5 * (thetab.at(i - 1, j) + thetab.at(i, j));
            s += u.ux_at(i, j) * tb * (cal_t.at(i, j) - cal_t.at(i - 1, j)) / g.hx();
        }
    }
    for j in 1..g.ny() {
        for i in 0..g.nx() {
            let tb = 0.5 * (thetab.at(i, j - 1) + thetab.at(i, j));
            s += u.uy_at(i, j) * tb * (cal_t.at(i, j) - cal_t.at(i, j - 1)) / g.hy();
        }
    }
    s * g.cell_volume()
}

/// Least-squares fit of `log E = log C - K t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Fits the samples with `t >= t_last - window`. Values at or below `floor`
/// end the usable series: the error carries the first such time.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: f64, floor: f64) -> Result<DecayFit> {
    let n = times.len().min(values.len());
    if n == 0 {
        return Err(Error::TooFewSamples(0));
    }
    let start = times[n - 1] - window;
    let (mut ts, mut ls) = (Vec::new(), Vec::new());
    for k in 0..n {
        if times[k] < start {
            continue;
        }
        if !(values[k] > floor) {
            return Err(Error::NoiseFloor(times[k]));
        }
        ts.push(times[k]);
        ls.push(libm::log(values[k]));
    }
    if ts.len() < 8 {
        return Err(Error::TooFewSamples(ts.len()));
    }
    let m = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let lm = ls.iter().sum::<f64>() / m;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for (t, l) in ts.iter().zip(&ls) {
        stt += (t - tm) * (t - tm);
        stl += (t - tm) * (l - lm);
        sll += (l - lm) * (l - lm);
    }
    let slope = stl / stt;
    let intercept = lm - slope * tm;
    let ss_res: f64 = ts
        .iter()
        .zip(&ls)
        .map(|(t, l)| {
            let e = l - (intercept + slope * t);
            e * e
        })
        .sum();
    let r2 = if sll > 0.0 { 1.0 - ss_res / sll } else { 1.0 };
    Ok(DecayFit {
        rate: -slope,
        prefactor: libm::exp(intercept),
        r2,
        samples: ts.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicAverage {
    /// `(1/(t - t0)) int_{t0}^t F`, with `running[0] = F(t0)`.
    pub running: Vec<f64>,
    /// Largest oscillation of the running mean over `[T/4, T/2]` and
    /// `[T/2, T]`.
    pub cauchy_gap: f64,
}

/// Trapezoidal running time average of a sampled functional.
pub fn ergodic_average(times: &[f64], values: &[f64]) -> ErgodicAverage {
    let n = times.len().min(values.len());
    if n < 2 {
        return ErgodicAverage {
            running: values[..n].to_vec(),
            cauchy_gap: f64::INFINITY,
        };
    }
    let t0 = times[0];
    let mut running = Vec::with_capacity(n);
    running.push(values[0]);
    let mut integral = 0.0;
    for k in 1..n {
        integral += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
        running.push(integral / (times[k] - t0));
    }
    let span = times[n - 1] - t0;
    let oscillation = |a: f64, b: f64| {
        let (lo, hi) = (0..n)
            .filter(|&k| times[k] - t0 >= a && times[k] - t0 <= b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(running[k]), hi.max(running[k])));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    };
    let cauchy_gap = oscillation(0.25 * span, 0.5 * span).max(oscillation(0.5 * span, span));
    ErgodicAverage { running, cauchy_gap }
}

/// `max` over runs of `sup_{t > discard} (||u|| + ||Theta||)`.
pub fn absorbing_radius<'a>(logs: impl IntoIterator<Item = &'a DiagnosticsLog>, discard: f64) -> Result<f64> {
    let mut radius: f64 = 0.0;
    for log in logs {
        let have = log.times.last().copied().unwrap_or(0.0);
        if have < 2.0 * discard {
            return Err(Error::InsufficientDuration {
                have,
                need: 2.0 * discard,
            });
        }
        for k in 0..log.len() {
            if log.times[k] > discard {
                radius = radius.max(log.u_l2[k] + log.theta_l2[k]);
            }
        }
    }
    Ok(radius)
}
