//! Bodies of the `obrb` subcommands. Each returns the JSON it prints.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use obrb_core::elliptic::smallest_dirichlet_eigenvalue;
use obrb_core::equilibrium::{aligned_equilibrium, stability_check, steady_solve, EquilibriumSolution};
use obrb_core::{build_grid, BoundaryClosure, SimState};

use crate::checkpoint;
use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::run::{prepare, run as run_config};
use crate::suites::{verify as verify_suite, Suite, SuiteReport};

pub const STEADY_TOL: f64 = 1e-8;
pub const STEADY_MAX_T: f64 = 200.0;

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse_config(&text).map_err(|source| Error::Config {
        path: path.display().to_string(),
        source,
    })
}

pub fn run(config: &RunConfig) -> Result<Value> {
    let summary = run_config(config)?;
    Ok(serde_json::to_value(summary).expect("summary serialises"))
}

/// A failing suite is an assertion error carrying the first counterexample;
/// a member whose solver broke down makes it a solver error instead.
pub fn verify(suite: Suite, config: &RunConfig) -> Result<SuiteReport> {
    let report = verify_suite(suite, config, &config.out_dir)?;
    if report.passed {
        return Ok(report);
    }
    if let Some(m) = report.members.iter().find(|m| m.solver_error.is_some()) {
        return Err(Error::MemberSolver {
            member: format!("{suite}/{}", m.name),
            message: m.solver_error.clone().unwrap_or_default(),
        });
    }
    Err(Error::Assertion {
        message: format!("suite {suite}: {}", report.failures.join("; ")),
        counterexample: report.counterexample.as_ref().map(PathBuf::from),
    })
}

/// Closed form for aligned data, otherwise a steady solve from rest.
pub fn equilibrium(config: &RunConfig) -> Result<Value> {
    let closure = BoundaryClosure::from_params(&config.grid, &config.params).map_err(|e| Error::from_core(e, 0.0, 0))?;
    let (method, eq) = match aligned_equilibrium(&closure, &config.params.g_spec) {
        Ok(eq) => ("closed_form", eq),
        Err(_) => {
            let setup = prepare(config)?;
            let eq = steady_solve(&closure, &config.params, setup.initial, STEADY_TOL, STEADY_MAX_T)
                .map_err(|e| Error::from_core(e, STEADY_MAX_T, 0))?;
            ("steady_solve", eq)
        }
    };
    fs::create_dir_all(&config.out_dir).map_err(Error::io(&config.out_dir))?;
    let path = config.out_dir.join("equilibrium.chk");
    checkpoint::write(&eq.state(), &path)?;
    Ok(describe(method, &eq, &path))
}

fn describe(method: &str, eq: &EquilibriumSolution, path: &Path) -> Value {
    let s: SimState = eq.state();
    json!({
        "method": method,
        "residual": eq.residual,
        "u_l2": eq.us.l2_norm(),
        "theta_min": s.theta.min(),
        "theta_max": s.theta.max(),
        "theta_mean": obrb_core::nonlocal::mean(&s.theta),
        "checkpoint": path.display().to_string(),
    })
}

/// Returns the report and whether the stability condition holds.
pub fn stability(config: &RunConfig) -> Result<(Value, bool)> {
    let p = &config.params;
    let closure = BoundaryClosure::from_params(&config.grid, p).map_err(|e| Error::from_core(e, 0.0, 0))?;
    let r = stability_check(&closure, &p.g_spec, p).map_err(|e| Error::from_core(e, 0.0, 0))?;
    let v = json!({
        "cp": r.cp,
        "grad_g": r.grad_g,
        "grad_thetab": r.grad_thetab,
        "lhs": r.lhs,
        "rhs": r.rhs,
        "margin": r.margin,
        "aligned": r.aligned,
        "satisfied": r.satisfied,
        "optimal_z": r.optimal_z,
        "quadratic_min": r.quadratic_min,
        "quadratic_bound": r.quadratic_bound,
        "quadratic_form_definite": r.quadratic_form_definite(),
    });
    Ok((v, r.satisfied))
}

pub const POINCARE_TOL: f64 = 1e-12;

pub fn poincare(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Value> {
    let grid = build_grid(nx, ny, lx, ly).map_err(|e| Error::Setup(e.to_string()))?;
    let (lambda, _) = smallest_dirichlet_eigenvalue(&grid, POINCARE_TOL).map_err(|e| Error::from_core(e, 0.0, 0))?;
    let cp = lambda.sqrt();
    let exact = std::f64::consts::PI * (1.0 / (lx * lx) + 1.0 / (ly * ly)).sqrt();
    Ok(json!({
        "nx": nx,
        "ny": ny,
        "lx": lx,
        "ly": ly,
        "lambda1": lambda,
        "cp": cp,
        "cp_exact": exact,
        "rel_error": (cp - exact).abs() / exact,
    }))
}
