//! Named verification suites. Each runs a fixed ensemble built from the
//! physics and numerics of a base configuration (its grid, horizon and
//! initial data are replaced per member), evaluates its assertions and
//! writes `report.json` into `<out>/<suite>/`.
//!
//! | suite          | ensemble                                                                     |
//! |----------------|------------------------------------------------------------------------------|
//! | maxprinciple   | 16², 32²; alpha 0.1/0.5/0.9; seeds 1, 2; t = 2; lagged coupling; constant states |
//! | bounds         | 16², 32²; alpha 0.1/0.5/0.9; seeds 1, 2, 3; t = 50                            |
//! | dissipativity  | 16²; alpha 0.1/0.5/0.9; amplitudes 1, 10, 100; t = 40; energy refinement 32²/64² |
//! | ergodic        | 16²; alpha 0.1/0.5/0.9; t = 100                                              |
//! | stability      | 16²; alpha 0.1/0.5/0.9; base and tilted boundary data                        |
//! | rayleigh       | 32²; alpha 0.1/0.5/0.9; aligned data required                                |
//! | uniqueness     | 32² eigenmode at alpha = 0; 24² random differences, at rest and swirled      |
//!
//! Every suite forces upwind advection.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use obrb_core::diagnostics::{absorbing_radius, ergodic_average, fit_decay_rate, ut1_bound, DecayFit, ViolationKind};
use obrb_core::elliptic::poincare_constant;
use obrb_core::equilibrium::{aligned_equilibrium, smallness_margin_with, stability_check_with, steady_solve};
use obrb_core::heat::frozen_velocity_contraction;
use obrb_core::init::{random_divfree, stokes_cell, Theta0Spec, U0Spec, PRNG_NAME};
use obrb_core::nonlocal::from_cal_t;
use obrb_core::{
    build_grid, AdvectionScheme, BoundaryClosure, DiagnosticsLog, Grid, ScalarField, SimState, ThetaBSpec, VectorField,
};

use crate::config::{RunConfig, U0Source};
use crate::error::{Error, Result};
use crate::run::{prepare, simulate, simulate_from, Setup, Trajectory};

pub const ALPHAS: [f64; 3] = [0.1, 0.5, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    MaxPrinciple,
    Bounds,
    Dissipativity,
    Ergodic,
    Stability,
    Rayleigh,
    Uniqueness,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::MaxPrinciple,
        Suite::Bounds,
        Suite::Dissipativity,
        Suite::Ergodic,
        Suite::Stability,
        Suite::Rayleigh,
        Suite::Uniqueness,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::MaxPrinciple => "maxprinciple",
            Suite::Bounds => "bounds",
            Suite::Dissipativity => "dissipativity",
            Suite::Ergodic => "ergodic",
            Suite::Stability => "stability",
            Suite::Rayleigh => "rayleigh",
            Suite::Uniqueness => "uniqueness",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            format!("unknown suite `{s}`; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct MemberReport {
    pub name: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub violations: BTreeMap<String, usize>,
    pub failures: Vec<String>,
    pub solver_error: Option<String>,
    pub checkpoint: Option<String>,
}

impl MemberReport {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            ..Self::default()
        }
    }

    fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v);
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.passed = false;
            self.failures.push(what());
        }
    }

    fn solver(&mut self, e: &Error) {
        self.passed = false;
        self.solver_error = Some(e.to_string());
        if let Error::Solver {
            checkpoint: Some(p), ..
        } = e
        {
            self.checkpoint = Some(p.display().to_string());
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub prng: String,
    pub metrics: BTreeMap<String, f64>,
    pub failures: Vec<String>,
    /// Checkpoint of the first failing member.
    pub counterexample: Option<String>,
    pub members: Vec<MemberReport>,
}

impl SuiteReport {
    fn assemble(suite: Suite, members: Vec<MemberReport>, metrics: BTreeMap<String, f64>, mut failures: Vec<String>) -> Self {
        for m in &members {
            failures.extend(m.failures.iter().map(|f| format!("{}: {f}", m.name)));
            if let Some(e) = &m.solver_error {
                failures.push(format!("{}: {e}", m.name));
            }
        }
        let counterexample = members.iter().filter(|m| !m.passed).find_map(|m| m.checkpoint.clone());
        Self {
            suite: suite.name().to_string(),
            passed: failures.is_empty(),
            prng: PRNG_NAME.to_string(),
            metrics,
            failures,
            counterexample,
            members,
        }
    }

    /// Events of `kind` summed over members.
    pub fn violation_total(&self, kind: ViolationKind) -> usize {
        self.members.iter().filter_map(|m| m.violations.get(kind.name())).sum()
    }

    pub fn solver_failed(&self) -> bool {
        self.members.iter().any(|m| m.solver_error.is_some())
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn member(&self, name: &str) -> Option<&MemberReport> {
        self.members.iter().find(|m| m.name == name)
    }
}

struct Ctx<'a> {
    base: &'a RunConfig,
    dir: PathBuf,
}

impl Ctx<'_> {
    fn config(&self, name: &str, n: usize, alpha: f64, seed: u64, t_end: f64) -> RunConfig {
        let mut c = self.base.clone();
        c.grid = build_grid(n, n, 1.0, 1.0).expect("suite grids are valid");
        c.params.alpha = alpha;
        c.params.gamma = None;
        c.params.seed = seed;
        c.params.advection = AdvectionScheme::Upwind;
        c.t_end = t_end;
        c.output_every = 20;
        c.checkpoint_every = 0;
        c.out_dir = self.dir.join(name);
        c
    }
}

fn aligned(config: &RunConfig) -> bool {
    prepare_closure(config).and_then(|cl| aligned_equilibrium(&cl, &config.params.g_spec).ok()).is_some()
}

fn prepare_closure(config: &RunConfig) -> Option<BoundaryClosure> {
    BoundaryClosure::from_params(&config.grid, &config.params).ok()
}

fn peak(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Checks every run must pass, plus the standard metrics.
fn standard(traj: &Trajectory, m: &mut MemberReport) {
    let log = &traj.log;
    let tol = traj.setup.params.lin_tol;
    for kind in [ViolationKind::MaxPrinciple, ViolationKind::Ut1, ViolationKind::Truncation] {
        m.violations.insert(kind.name().to_string(), log.count(kind));
    }
    m.metric("steps", traj.state.step as f64);
    m.metric("ut1_bound", log.ut1_bound);
    m.metric("max_abs_theta", log.max_abs_theta());
    m.metric("max_div", peak(&log.div_max));
    m.metric("max_w7_res", log.w7_residual.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)));
    m.metric("max_abs_w15_res", peak(&log.w15_residual));
    m.metric("w7_positive_steps", log.w7_positive as f64);

    let mp = log.count(ViolationKind::MaxPrinciple);
    m.check(mp == 0, || format!("{mp} max-principle envelope events"));
    let ut = log.count(ViolationKind::Ut1);
    m.check(ut == 0 && log.max_abs_theta() <= log.ut1_bound + 10.0 * tol, || {
        format!("|Theta| reached {} above the bound {}", log.max_abs_theta(), log.ut1_bound)
    });
    let div = peak(&log.div_max);
    m.check(div <= 10.0 * tol, || format!("divergence {div:e} above {:e}", 10.0 * tol));
    m.check(log.times.windows(2).all(|w| w[1] > w[0]), || "times not strictly increasing".into());
    let alpha = traj.setup.params.alpha;
    let comparable = (0..log.len()).all(|k| {
        let n2 = log.cal_t_l2[k] * log.cal_t_l2[k];
        let slack = 1e-12 * (1.0 + n2);
        log.thermal[k] >= n2 / (2.0 * (1.0 + alpha)) - slack && log.thermal[k] <= 0.5 * n2 + slack
    });
    m.check(comparable, || "thermal energy outside its Lambda bounds".into());
    if !m.passed {
        m.checkpoint = traj
            .first_snapshot
            .as_ref()
            .or(traj.final_checkpoint.as_ref())
            .map(|p| p.display().to_string());
    }
}

fn run_member(config: &RunConfig, name: &str, extra: impl FnOnce(&Trajectory, &mut MemberReport)) -> MemberReport {
    let mut m = MemberReport::new(name);
    match simulate(config, Some(&config.out_dir)) {
        Ok(traj) => {
            standard(&traj, &mut m);
            extra(&traj, &mut m);
            if !m.passed && m.checkpoint.is_none() {
                m.checkpoint = traj.final_checkpoint.as_ref().map(|p| p.display().to_string());
            }
        }
        Err(e) => m.solver(&e),
    }
    m
}

/// Log-linear fit over the second half of the part of the series that
/// stays above `floor`.
fn tail_fit(times: &[f64], values: &[f64], floor: f64) -> Option<DecayFit> {
    let end = values.iter().position(|v| *v <= floor).unwrap_or(values.len());
    if end < 16 {
        return None;
    }
    let span = times[end - 1] - times[0];
    fit_decay_rate(&times[..end], &values[..end], 0.5 * span, floor).ok()
}

/// Largest one-step increase after the first step, relative to `E(1)`.
fn worst_increase(values: &[f64]) -> f64 {
    let e1 = values.get(1).copied().unwrap_or(0.0);
    values
        .windows(2)
        .skip(1)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
        / e1.max(f64::MIN_POSITIVE)
}

pub fn verify(suite: Suite, base: &RunConfig, out: &Path) -> Result<SuiteReport> {
    let dir = out.join(suite.name());
    fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let ctx = Ctx { base, dir };
    let report = match suite {
        Suite::MaxPrinciple => max_principle(&ctx),
        Suite::Bounds => bounds(&ctx),
        Suite::Dissipativity => dissipativity(&ctx),
        Suite::Ergodic => ergodic(&ctx),
        Suite::Stability => stability(&ctx)?,
        Suite::Rayleigh => rayleigh(&ctx)?,
        Suite::Uniqueness => uniqueness(&ctx)?,
    };
    let path = ctx.dir.join("report.json");
    let json = serde_json::to_string_pretty(&report).expect("reports serialise");
    fs::write(&path, json).map_err(Error::io(&path))?;
    Ok(report)
}

fn max_principle(ctx: &Ctx) -> SuiteReport {
    let mut jobs: Vec<RunConfig> = Vec::new();
    for n in [16, 32] {
        for alpha in ALPHAS {
            for seed in [1, 2] {
                let name = format!("n{n}-a{alpha}-s{seed}");
                let mut c = ctx.config(&name, n, alpha, seed, 2.0);
                c.theta0 = Theta0Spec::Random(1.0);
                c.u0 = U0Source::Spec(U0Spec::RandomDivfree(1.0));
                jobs.push(c);
            }
        }
    }
    let mut lagged = ctx.config("lagged-n16-a0.5", 16, 0.5, 1, 2.0);
    lagged.params.bc_coupling = obrb_core::BcCoupling::Lagged;
    lagged.theta0 = Theta0Spec::Random(1.0);
    lagged.u0 = U0Source::Spec(U0Spec::RandomDivfree(1.0));
    jobs.push(lagged);
    let mut members: Vec<MemberReport> = jobs
        .par_iter()
        .map(|c| {
            let name = c.out_dir.file_name().unwrap().to_string_lossy().into_owned();
            run_member(c, &name, |traj, m| {
                let tr = traj.log.count(ViolationKind::Truncation);
                m.check(tr == 0, || format!("{tr} truncation-energy increases"));
            })
        })
        .collect();

    // Constant states under a stirring flow.
    let constants: Vec<MemberReport> = ALPHAS
        .par_iter()
        .map(|&alpha| {
            let name = format!("constant-a{alpha}");
            let mut c = ctx.config(&name, 16, alpha, 3, 1.0);
            c.params.thetab_spec = ThetaBSpec::Constant(1.0);
            let value = 1.0 / (1.0 + alpha);
            c.theta0 = Theta0Spec::Constant(value);
            c.u0 = U0Source::Spec(U0Spec::RandomDivfree(1.0));
            run_member(&c, &name, |traj, m| {
                let drift = traj.state.theta.add_scalar(-value).max_abs();
                let drift = drift.max(traj.log.theta_max.iter().chain(&traj.log.theta_min).fold(0.0, |a, v| f64::max(a, (v - value).abs())));
                m.metric("constant_drift", drift);
                m.check(drift <= 1e-8, || format!("constant state drifted by {drift:e}"));
            })
        })
        .collect();
    members.extend(constants);
    let mut metrics = BTreeMap::new();
    metrics.insert(
        "max_principle_events".into(),
        members.iter().filter_map(|m| m.violations.get("max_principle")).sum::<usize>() as f64,
    );
    SuiteReport::assemble(Suite::MaxPrinciple, members, metrics, Vec::new())
}

fn bounds(ctx: &Ctx) -> SuiteReport {
    let mut jobs = Vec::new();
    for n in [16, 32] {
        for alpha in ALPHAS {
            for seed in [1, 2, 3] {
                let name = format!("n{n}-a{alpha}-s{seed}");
                let mut c = ctx.config(&name, n, alpha, seed, 50.0);
                c.theta0 = Theta0Spec::Random(1.0);
                c.u0 = U0Source::Spec(U0Spec::RandomDivfree(1.0));
                jobs.push(c);
            }
        }
    }
    let members: Vec<MemberReport> = jobs
        .par_iter()
        .map(|c| {
            let name = c.out_dir.file_name().unwrap().to_string_lossy().into_owned();
            run_member(c, &name, |traj, m| {
                let log = &traj.log;
                m.metric("ut1_slack", log.ut1_bound + 10.0 * traj.setup.params.lin_tol - log.max_abs_theta());
            })
        })
        .collect();

    // Closed-form reference: Theta0 = 0, thetaB = 1, alpha = 0.5.
    let mut metrics = BTreeMap::new();
    let mut failures = Vec::new();
    let g = build_grid(8, 8, 1.0, 1.0).expect("valid grid");
    match BoundaryClosure::new(&g, &ThetaBSpec::Constant(1.0), 0.5, 1e-12)
        .and_then(|cl| ut1_bound(&ScalarField::zeros(g), &cl))
    {
        Ok(b) => {
            metrics.insert("ut1_reference".into(), b);
            if (b - 8.0 / 3.0).abs() > 1e-12 {
                failures.push(format!("reference bound {b} differs from 8/3"));
            }
        }
        Err(e) => failures.push(format!("reference bound: {e}")),
    }
    metrics.insert(
        "ut1_events".into(),
        members.iter().filter_map(|m| m.violations.get("ut1")).sum::<usize>() as f64,
    );
    SuiteReport::assemble(Suite::Bounds, members, metrics, failures)
}

pub const AMPLITUDES: [f64; 3] = [1.0, 10.0, 100.0];
const DISCARD: f64 = 20.0;

fn dissipativity(ctx: &Ctx) -> SuiteReport {
    let probe = ctx.config("probe", 16, 0.5, 1, 1.0);
    let use_eq = aligned(&probe);
    let mut jobs = Vec::new();
    for alpha in ALPHAS {
        for amp in AMPLITUDES {
            let name = format!("a{alpha}-amp{amp}");
            let mut c = ctx.config(&name, 16, alpha, 1, 2.0 * DISCARD);
            c.theta0 = if use_eq {
                Theta0Spec::AlignedPlusRandom(amp)
            } else {
                Theta0Spec::Random(amp)
            };
            c.u0 = U0Source::Spec(U0Spec::RandomDivfree(amp));
            jobs.push(c);
        }
    }
    let runs: Vec<(MemberReport, Option<f64>)> = jobs
        .par_iter()
        .map(|c| {
            let name = c.out_dir.file_name().unwrap().to_string_lossy().into_owned();
            let mut radius = None;
            let m = run_member(c, &name, |traj, m| match absorbing_radius([&traj.log], DISCARD) {
                Ok(r) => {
                    m.metric("radius", r);
                    radius = Some(r);
                }
                Err(e) => m.check(false, || e.to_string()),
            });
            (m, radius)
        })
        .collect();
    let mut metrics = BTreeMap::new();
    let mut failures = Vec::new();
    for (k, alpha) in ALPHAS.iter().enumerate() {
        let radii: Vec<f64> = runs[3 * k..3 * k + 3].iter().filter_map(|(_, r)| *r).collect();
        if radii.len() < 3 {
            continue;
        }
        let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = radii.iter().copied().fold(0.0, f64::max);
        let spread = hi / lo - 1.0;
        metrics.insert(format!("radius_spread_a{alpha}"), spread);
        metrics.insert(format!("radius_a{alpha}"), hi);
        if !(spread <= 0.2) {
            failures.push(format!("alpha {alpha}: absorbing radii {radii:?} differ by {:.1}%", 100.0 * spread));
        }
    }
    let mut members: Vec<MemberReport> = runs.into_iter().map(|(m, _)| m).collect();

    // Energy balances under joint refinement of h and dt.
    let refinement: Vec<MemberReport> = [32usize, 64]
        .par_iter()
        .map(|&n| {
            let name = format!("energy-n{n}");
            let mut c = ctx.config(&name, n, ctx.base.params.alpha, 1, 0.2);
            c.params.dt_cfl = 1.0;
            c.params.dt_max = 0.064 / n as f64;
            c.params.lin_tol = 1e-12;
            c.theta0 = if use_eq {
                Theta0Spec::AlignedPlusMode { amp: 0.5, kx: 2.0, ky: 1.0 }
            } else {
                Theta0Spec::Mode { amp: 0.5, kx: 2.0, ky: 1.0 }
            };
            c.u0 = U0Source::Spec(U0Spec::Eigenmode(0.5));
            run_member(&c, &name, |traj, m| {
                m.metric("peak_w7", peak(&traj.log.w7_residual));
                m.metric("peak_w15", peak(&traj.log.w15_residual));
            })
        })
        .collect();
    let get = |k: usize, key: &str| refinement[k].metrics.get(key).copied();
    for key in ["w7", "w15"] {
        let col = format!("peak_{key}");
        if let (Some(a), Some(b)) = (get(0, &col), get(1, &col)) {
            let ratio = a / b;
            metrics.insert(format!("refinement_ratio_{key}"), ratio);
            if !(3.0..=5.0).contains(&ratio) {
                failures.push(format!("{key} residual refinement ratio {ratio:.3} outside [3, 5]"));
            }
        }
    }
    members.extend(refinement);
    SuiteReport::assemble(Suite::Dissipativity, members, metrics, failures)
}

pub const ERGODIC_T: f64 = 100.0;
pub const ERGODIC_GAP: f64 = 1e-6;

fn ergodic(ctx: &Ctx) -> SuiteReport {
    let probe = ctx.config("probe", 16, 0.5, 1, 1.0);
    let use_eq = aligned(&probe);
    let members: Vec<MemberReport> = ALPHAS
        .par_iter()
        .map(|&alpha| {
            let name = format!("a{alpha}");
            let mut c = ctx.config(&name, 16, alpha, 1, ERGODIC_T);
            c.theta0 = if use_eq {
                Theta0Spec::AlignedPlusMode { amp: 0.1, kx: 2.0, ky: 1.0 }
            } else {
                Theta0Spec::Mode { amp: 0.1, kx: 2.0, ky: 1.0 }
            };
            c.u0 = U0Source::Spec(U0Spec::RandomDivfree(0.05));
            run_member(&c, &name, |traj, m| {
                let log = &traj.log;
                for (key, series) in [("ke", &log.kinetic), ("mean_theta", &log.mean_theta)] {
                    let avg = ergodic_average(&log.times, series);
                    m.metric(&format!("gap_{key}"), avg.cauchy_gap);
                    m.metric(&format!("running_{key}"), *avg.running.last().unwrap_or(&f64::NAN));
                    m.check(avg.cauchy_gap <= ERGODIC_GAP, || {
                        format!("running mean of {key} has cauchy gap {:e} > {ERGODIC_GAP:e}", avg.cauchy_gap)
                    });
                }
                if let Some(eq) = &traj.setup.equilibrium {
                    m.metric("ke_equilibrium", eq.us.kinetic_energy());
                }
            })
        })
        .collect();
    SuiteReport::assemble(Suite::Ergodic, members, BTreeMap::new(), Vec::new())
}

const TOL_STEADY: f64 = 1e-8;

/// Steady states from two starts, the decay margin, and a perturbed run
/// measured against the first equilibrium.
fn stability_member(ctx: &Ctx, name: &str, thetab: ThetaBSpec, alpha: f64, cp: f64) -> MemberReport {
    let mut m = MemberReport::new(name);
    let mut c = ctx.config(name, 16, alpha, 1, 1.0);
    c.params.thetab_spec = thetab;
    let grid = c.grid;
    let closure = match BoundaryClosure::from_params(&grid, &c.params) {
        Ok(cl) => cl,
        Err(e) => {
            m.solver(&Error::from_core(e, 0.0, 0));
            return m;
        }
    };
    let start = from_cal_t(&ScalarField::zeros(grid), &closure);
    let bump = Theta0Spec::Mode { amp: 0.2, kx: 1.0, ky: 1.0 }.build(&grid, 0, None).expect("plain mode");
    let stirred = random_divfree(&grid, 0.2, 7);
    let state_a = SimState::new(VectorField::zeros(grid), start.clone()).expect("same grid");
    let state_b = SimState::new(stirred.clone(), start.axpy(1.0, &bump)).expect("same grid");
    let solve = |s: SimState| steady_solve(&closure, &c.params, s, TOL_STEADY, 200.0);
    let (eq_a, eq_b) = match (solve(state_a), solve(state_b)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            m.solver(&Error::from_core(e, 0.0, 0));
            return m;
        }
    };
    let distance = eq_a.thetas.axpy(-1.0, &eq_b.thetas).l2_norm() + eq_a.us.axpy(-1.0, &eq_b.us).l2_norm();
    let margin = smallness_margin_with(&eq_a, &closure, &c.params.g_spec, &c.params, cp);
    m.metric("equilibrium_distance", distance);
    m.metric("margin", margin);
    m.metric("us_l2", eq_a.us.l2_norm());
    if margin <= 0.0 {
        // Outside the certified regime nothing is asserted.
        m.metric("certified", 0.0);
        return m;
    }
    m.metric("certified", 1.0);
    m.check(distance <= 10.0 * TOL_STEADY, || {
        format!("equilibria from two starts differ by {distance:e} > {:e}", 10.0 * TOL_STEADY)
    });

    let initial = SimState::new(stirred, eq_a.thetas.axpy(1.0, &bump)).expect("same grid");
    let setup = Setup {
        closure: closure.clone(),
        params: c.params.clone(),
        equilibrium: Some(eq_a),
        initial,
    };
    match simulate_from(&c, setup, Some(&c.out_dir)) {
        Ok(traj) => {
            standard(&traj, &mut m);
            relative_energy_checks(&traj.log, 1e-12, &mut m);
        }
        Err(e) => m.solver(&e),
    }
    m
}

/// Monotone decay after the first step with a log-linear tail fit.
fn relative_energy_checks(log: &DiagnosticsLog, floor_ratio: f64, m: &mut MemberReport) -> Option<DecayFit> {
    let e = &log.rel_energy;
    let e0 = e.first().copied().unwrap_or(0.0);
    let floor = floor_ratio * e0;
    let end = e.iter().position(|v| *v <= floor).unwrap_or(e.len());
    let rise = worst_increase(&e[..end]);
    m.metric("rel_energy_initial", e0);
    m.metric("rel_energy_final_ratio", e.last().copied().unwrap_or(f64::NAN) / e0);
    m.metric("rel_energy_worst_increase", rise);
    m.check(rise <= 1e-10, || format!("relative energy grew by {rise:e} of E(1) in one step"));
    let fit = tail_fit(&log.times, e, floor);
    match fit {
        Some(f) => {
            m.metric("decay_rate", f.rate);
            m.metric("fit_r2", f.r2);
            m.check(f.rate > 0.0, || format!("fitted decay rate {} is not positive", f.rate));
        }
        None => m.check(false, || "too few samples above the noise floor to fit a decay rate".into()),
    }
    fit
}

fn tilted(base: &ThetaBSpec) -> ThetaBSpec {
    match *base {
        ThetaBSpec::LinearY { a, b } => ThetaBSpec::LinearX { a, b: 0.3 * b },
        _ => ThetaBSpec::LinearX { a: 1.0, b: -0.3 },
    }
}

fn stability(ctx: &Ctx) -> Result<SuiteReport> {
    let grid = build_grid(16, 16, 1.0, 1.0).expect("valid grid");
    let cp = poincare_constant(&grid, 1e-10).map_err(|e| Error::from_core(e, 0.0, 0))?;
    let base = ctx.base.params.thetab_spec;
    let mut jobs = Vec::new();
    for alpha in ALPHAS {
        jobs.push((format!("base-a{alpha}"), base, alpha));
        jobs.push((format!("tilted-a{alpha}"), tilted(&base), alpha));
    }
    let members: Vec<MemberReport> = jobs
        .par_iter()
        .map(|(name, spec, alpha)| stability_member(ctx, name, *spec, *alpha, cp))
        .collect();
    let mut metrics = BTreeMap::new();
    metrics.insert("cp".into(), cp);
    let certified = members.iter().filter(|m| m.metrics.get("certified") == Some(&1.0)).count();
    metrics.insert("certified_members".into(), certified as f64);
    let mut failures = Vec::new();
    if certified == 0 {
        failures.push("no member satisfied the smallness margin".into());
    }
    Ok(SuiteReport::assemble(Suite::Stability, members, metrics, failures))
}

pub const RAYLEIGH_T: f64 = 1.0;
pub const RAYLEIGH_TOL_STEADY: f64 = 1e-9;

fn rayleigh(ctx: &Ctx) -> Result<SuiteReport> {
    let n = 32;
    let probe = ctx.config("probe", n, 0.5, 1, 1.0);
    if !aligned(&probe) {
        return Err(Error::Setup(format!(
            "the rayleigh suite needs aligned data; thetab_spec = {} and g_spec = {} are not",
            probe.params.thetab_spec, probe.params.g_spec
        )));
    }
    let grid = probe.grid;
    let cp = poincare_constant(&grid, 1e-10).map_err(|e| Error::from_core(e, 0.0, 0))?;
    let members: Vec<MemberReport> = ALPHAS
        .par_iter()
        .map(|&alpha| {
            let name = format!("a{alpha}");
            let mut m = MemberReport::new(&name);
            let mut c = ctx.config(&name, n, alpha, 1, RAYLEIGH_T);
            c.theta0 = Theta0Spec::AlignedPlusMode { amp: 0.1, kx: 2.0, ky: 1.0 };
            c.u0 = U0Source::Spec(U0Spec::RandomDivfree(0.1));
            let setup = match prepare(&c) {
                Ok(s) => s,
                Err(e) => {
                    m.solver(&e);
                    return m;
                }
            };
            let report = match stability_check_with(&setup.closure, &c.params.g_spec, &c.params, cp) {
                Ok(r) => r,
                Err(e) => {
                    m.solver(&Error::from_core(e, 0.0, 0));
                    return m;
                }
            };
            for (k, v) in [
                ("lhs", report.lhs),
                ("rhs", report.rhs),
                ("rb_margin", report.margin),
                ("cp", report.cp),
                ("quadratic_min", report.quadratic_min),
                ("quadratic_bound", report.quadratic_bound),
            ] {
                m.metric(k, v);
            }
            m.check(report.aligned, || "alignment test failed".into());
            m.check(report.satisfied, || format!("stability condition fails: {} > {}", report.lhs, report.rhs));
            let eq = setup.equilibrium.clone().expect("aligned data register an equilibrium");

            let steady = steady_solve(&setup.closure, &c.params, setup.initial.clone(), RAYLEIGH_TOL_STEADY, 100.0);
            match steady {
                Ok(s) => {
                    let d = s.thetas.axpy(-1.0, &eq.thetas).l2_norm() + s.us.l2_norm();
                    m.metric("steady_vs_closed_form", d);
                    m.check(d <= 10.0 * RAYLEIGH_TOL_STEADY, || {
                        format!("steady solve is {d:e} from the closed form, above {:e}", 10.0 * RAYLEIGH_TOL_STEADY)
                    });
                }
                Err(e) => {
                    m.solver(&Error::from_core(e, 0.0, 0));
                    return m;
                }
            }

            match simulate_from(&c, setup, Some(&c.out_dir)) {
                Ok(traj) => {
                    standard(&traj, &mut m);
                    if let Some(fit) = relative_energy_checks(&traj.log, 1e-12, &mut m) {
                        m.check(fit.r2 >= 0.99, || format!("tail fit R^2 = {} below 0.99", fit.r2));
                    }
                    let ratio = m.metrics["rel_energy_final_ratio"];
                    m.check(ratio <= 1e-8, || format!("final relative energy is {ratio:e} of the initial value"));
                    if !m.passed && m.checkpoint.is_none() {
                        m.checkpoint = traj.final_checkpoint.as_ref().map(|p| p.display().to_string());
                    }
                }
                Err(e) => m.solver(&e),
            }
            m
        })
        .collect();
    let mut metrics = BTreeMap::new();
    metrics.insert("cp".into(), cp);
    Ok(SuiteReport::assemble(Suite::Rayleigh, members, metrics, Vec::new()))
}

pub const EIGEN_RATE_TOL: f64 = 0.05;

fn uniqueness(ctx: &Ctx) -> Result<SuiteReport> {
    let mut members = Vec::new();

    // First Dirichlet mode at alpha = 0 against 2 kappa lambda_1.
    let n = 32;
    let mut c = ctx.config("eigenmode", n, 0.5, 1, 0.1);
    c.params.dt_cfl = 1.0;
    c.params.dt_max = 2e-3;
    let mut m = MemberReport::new("eigenmode");
    match eigenmode_member(&c, &mut m) {
        Ok(()) => {}
        Err(e) => m.solver(&e),
    }
    members.push(m);

    let grid = build_grid(24, 24, 1.0, 1.0).expect("valid grid");
    let mut jobs = Vec::new();
    for alpha in ALPHAS {
        jobs.push((format!("rest-a{alpha}"), alpha, false));
        jobs.push((format!("swirl-a{alpha}"), alpha, true));
    }
    let rest: Vec<MemberReport> = jobs
        .par_iter()
        .map(|(name, alpha, swirl)| {
            let mut m = MemberReport::new(name);
            let mut c = ctx.config(name, 24, *alpha, 1, 0.2);
            c.params.dt_max = 2e-3;
            c.params.dt_cfl = 0.5;
            let closure = match BoundaryClosure::from_params(&grid, &c.params) {
                Ok(cl) => cl,
                Err(e) => {
                    m.solver(&Error::from_core(e, 0.0, 0));
                    return m;
                }
            };
            let a = Theta0Spec::Random(1.0).build(&grid, 1, None).expect("plain field");
            let b = Theta0Spec::Random(1.0).build(&grid, 2, None).expect("plain field");
            let u: Vec<VectorField> = if *swirl { vec![stokes_cell(&grid, 2.0)] } else { Vec::new() };
            match frozen_velocity_contraction(&a, &b, &u, &closure, &c.params, c.t_end) {
                Ok(r) => {
                    m.metric("max_increase", r.max_increase);
                    m.metric("epsilon_h", r.epsilon_h);
                    m.metric("final_ratio", r.energies.last().copied().unwrap_or(f64::NAN) / r.energies[0]);
                    m.check(r.monotone, || format!("difference energy grew by {:e}", r.max_increase));
                    m.check(r.bound_holds(), || format!("decay slack epsilon_h = {} above 0.1", r.epsilon_h));
                }
                Err(e) => m.solver(&Error::from_core(e, 0.0, 0)),
            }
            m
        })
        .collect();
    members.extend(rest);
    Ok(SuiteReport::assemble(Suite::Uniqueness, members, BTreeMap::new(), Vec::new()))
}

fn eigenmode_member(c: &RunConfig, m: &mut MemberReport) -> Result<()> {
    let grid: Grid = c.grid;
    let closure = BoundaryClosure::from_params(&grid, &c.params)
        .and_then(|cl| cl.with_alpha(0.0))
        .map_err(|e| Error::from_core(e, 0.0, 0))?;
    let base = from_cal_t(&ScalarField::zeros(grid), &closure);
    let mode = Theta0Spec::Mode { amp: 0.1, kx: 1.0, ky: 1.0 }.build(&grid, 0, None).expect("plain mode");
    let r = frozen_velocity_contraction(&base.axpy(1.0, &mode), &base, &[], &closure, &c.params, c.t_end)
        .map_err(|e| Error::from_core(e, 0.0, 0))?;
    let lambda1 = r.cp * r.cp;
    let target = 2.0 * c.params.kappa * lambda1;
    m.metric("lambda1", lambda1);
    m.metric("target_rate", target);
    m.metric("continuum_rate", 4.0 * std::f64::consts::PI * std::f64::consts::PI * c.params.kappa);
    m.check(r.monotone, || format!("difference energy grew by {:e}", r.max_increase));
    match r.rate {
        Some(rate) => {
            let rel = (rate / target - 1.0).abs();
            m.metric("rate", rate);
            m.metric("rate_rel_error", rel);
            m.check(rel <= EIGEN_RATE_TOL, || format!("decay rate {rate} is {:.2}% from {target}", 100.0 * rel));
        }
        None => m.check(false, || "no decay rate could be fitted".into()),
    }
    Ok(())
}
