//! The time loop and its files.

use std::fs;
use std::path::{Path, PathBuf};

use obrb_core::equilibrium::{aligned_equilibrium, EquilibriumSolution};
use obrb_core::{BoundaryClosure, DiagnosticsLog, Params, SimState, Stepper};

use crate::checkpoint;
use crate::config::{RunConfig, U0Source};
use crate::error::{Error, Result};
use crate::output::{self, COLUMNS, VIOLATION_COLUMNS};

/// Violation snapshots written per run; later events are listed without one.
pub const SNAPSHOT_CAP: usize = 32;

/// Boundary data, optional registered equilibrium and initial state.
#[derive(Debug, Clone)]
pub struct Setup {
    pub closure: BoundaryClosure,
    pub params: Params,
    pub equilibrium: Option<EquilibriumSolution>,
    pub initial: SimState,
}

/// Aligned data register their closed-form equilibrium, which fills the
/// `rel_energy` column.
pub fn prepare(config: &RunConfig) -> Result<Setup> {
    let grid = config.grid;
    let params = config.params.clone();
    let closure = BoundaryClosure::from_params(&grid, &params).map_err(|e| Error::from_core(e, 0.0, 0))?;
    let equilibrium = aligned_equilibrium(&closure, &params.g_spec).ok();
    if config.theta0.needs_equilibrium() && equilibrium.is_none() {
        return Err(Error::Setup(format!(
            "theta0_spec = {} needs aligned data, but thetab_spec = {} and g_spec = {} are not aligned",
            config.theta0, params.thetab_spec, params.g_spec
        )));
    }
    let theta = config
        .theta0
        .build(&grid, params.seed, equilibrium.as_ref())
        .map_err(|e| Error::Setup(e.to_string()))?;
    let u = match &config.u0 {
        U0Source::Spec(s) => s.build(&grid, params.seed),
        U0Source::File(path) => checkpoint::read_on(path, &grid)?.u,
    };
    let initial = SimState::new(u, theta).map_err(|e| Error::Setup(e.to_string()))?;
    Ok(Setup {
        closure,
        params,
        equilibrium,
        initial,
    })
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub setup: Setup,
    pub log: DiagnosticsLog,
    pub state: SimState,
    /// First violation snapshot, if any was written.
    pub first_snapshot: Option<PathBuf>,
    pub final_checkpoint: Option<PathBuf>,
}

struct Sink<'a> {
    dir: &'a Path,
    csv: String,
    violations: String,
    snapshots: usize,
    first_snapshot: Option<PathBuf>,
}

impl<'a> Sink<'a> {
    fn open(dir: &'a Path, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let head = output::header(config);
        Ok(Self {
            dir,
            csv: format!("{head}{}\n", COLUMNS.join(",")),
            violations: format!("{head}{}\n", VIOLATION_COLUMNS.join(",")),
            snapshots: 0,
            first_snapshot: None,
        })
    }

    fn checkpoint(&self, name: &str, state: &SimState) -> Result<PathBuf> {
        let path = self.dir.join(name);
        checkpoint::write(state, &path)?;
        Ok(path)
    }

    fn flush(&self) -> Result<()> {
        let d = self.dir.join("diagnostics.csv");
        fs::write(&d, &self.csv).map_err(Error::io(&d))?;
        let v = self.dir.join("violations.csv");
        fs::write(&v, &self.violations).map_err(Error::io(&v))
    }
}

/// Runs the configured case. With `out` set, writes `diagnostics.csv`,
/// `violations.csv`, periodic and final checkpoints and violation
/// snapshots there. A solver failure still flushes the files and a final
/// checkpoint of the last good state.
pub fn simulate(config: &RunConfig, out: Option<&Path>) -> Result<Trajectory> {
    let setup = prepare(config)?;
    simulate_from(config, setup, out)
}

pub fn simulate_from(config: &RunConfig, setup: Setup, out: Option<&Path>) -> Result<Trajectory> {
    let mut sink = out.map(|d| Sink::open(d, config)).transpose()?;
    let mut state = setup.initial.clone();
    let mut log = DiagnosticsLog::new(&state, &setup.closure, &setup.params, setup.equilibrium.as_ref())
        .map_err(|e| Error::Setup(e.to_string()))?;
    if let Some(s) = sink.as_mut() {
        output::diagnostics_row(&mut s.csv, &log, 0);
    }
    let mut stepper = Stepper::new(setup.closure.clone(), setup.params.clone());
    let t_end = config.t_end;
    let mut seen = 0;
    while state.t < t_end * (1.0 - 1e-12) {
        let outcome = match stepper.step_until(&state, t_end) {
            Ok(o) => o,
            Err(source) => {
                let mut checkpoint = None;
                if let Some(s) = sink.as_ref() {
                    s.flush()?;
                    checkpoint = Some(s.checkpoint("final.chk", &state)?);
                }
                return Err(Error::Solver {
                    source,
                    t: state.t,
                    step: state.step,
                    checkpoint,
                });
            }
        };
        log.record(&state, &outcome, &setup.closure, stepper.potential());
        state = outcome.state;
        let done = state.t >= t_end * (1.0 - 1e-12);
        if let Some(s) = sink.as_mut() {
            for v in &log.violations[seen..] {
                let snap = if s.snapshots < SNAPSHOT_CAP {
                    s.snapshots += 1;
                    let p = s.checkpoint(&format!("violation_{:08}_{}.chk", v.step, v.kind.name()), &state)?;
                    s.first_snapshot.get_or_insert_with(|| p.clone());
                    p.file_name().map(|n| n.to_string_lossy().into_owned())
                } else {
                    None
                };
                output::violation_row(&mut s.violations, v, snap.as_deref());
            }
            if state.step % config.output_every == 0 || done {
                output::diagnostics_row(&mut s.csv, &log, log.len() - 1);
            }
            if config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0 {
                s.checkpoint(&format!("step_{:08}.chk", state.step), &state)?;
            }
        }
        seen = log.violations.len();
    }
    let mut final_checkpoint = None;
    let mut first_snapshot = None;
    if let Some(s) = sink {
        s.flush()?;
        final_checkpoint = Some(s.checkpoint("final.chk", &state)?);
        first_snapshot = s.first_snapshot;
    }
    Ok(Trajectory {
        setup,
        log,
        state,
        first_snapshot,
        final_checkpoint,
    })
}

/// What `obrb run` prints on success.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub steps: u64,
    pub t: f64,
    pub out_dir: String,
    pub ut1_bound: f64,
    pub max_abs_theta: f64,
    pub max_divergence: f64,
    pub violations: usize,
}

pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let traj = simulate(config, Some(&config.out_dir))?;
    Ok(RunSummary {
        steps: traj.state.step,
        t: traj.state.t,
        out_dir: config.out_dir.display().to_string(),
        ut1_bound: traj.log.ut1_bound,
        max_abs_theta: traj.log.max_abs_theta(),
        max_divergence: traj.log.div_max.iter().fold(0.0, |m, d| f64::max(m, *d)),
        violations: traj.log.violations.len(),
    })
}
