//! `diagnostics.csv` and `violations.csv`.

use std::fmt::Write as _;

use obrb_core::diagnostics::Violation;
use obrb_core::init::PRNG_NAME;
use obrb_core::DiagnosticsLog;

use crate::config::RunConfig;

pub const COLUMNS: [&str; 11] = [
    "t",
    "KE",
    "thermal_E",
    "theta_min",
    "theta_max",
    "ut1_bound",
    "div_max",
    "w7_res",
    "w15_res",
    "rel_energy",
    "mean_theta",
];

pub const VIOLATION_COLUMNS: [&str; 6] = ["step", "t", "kind", "value", "limit", "snapshot"];

/// `#` lines that open every output file.
pub fn header(config: &RunConfig) -> String {
    let mut h = String::new();
    let p = &config.params;
    let g = &config.grid;
    let _ = writeln!(h, "# obrb {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# prng = {PRNG_NAME}");
    let _ = writeln!(h, "# seed = {}", p.seed);
    let _ = writeln!(h, "# grid = {}x{} lx = {} ly = {}", g.nx(), g.ny(), g.lx(), g.ly());
    let _ = writeln!(
        h,
        "# mu = {} kappa = {} alpha = {} g_spec = {} thetab_spec = {}",
        p.mu, p.kappa, p.alpha, p.g_spec, p.thetab_spec
    );
    let _ = writeln!(h, "# theta0_spec = {} u0_spec = {}", config.theta0, config.u0);
    h
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:e}");
}

pub fn diagnostics_row(out: &mut String, log: &DiagnosticsLog, k: usize) {
    let rel = log.rel_energy.get(k).copied().unwrap_or(f64::NAN);
    let row = [
        log.times[k],
        log.kinetic[k],
        log.thermal[k],
        log.theta_min[k],
        log.theta_max[k],
        log.ut1_bound,
        log.div_max[k],
        log.w7_residual[k],
        log.w15_residual[k],
        rel,
        log.mean_theta[k],
    ];
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        num(out, *v);
    }
    out.push('\n');
}

pub fn violation_row(out: &mut String, v: &Violation, snapshot: Option<&str>) {
    let _ = write!(out, "{},", v.step);
    num(out, v.t);
    let _ = write!(out, ",{},", v.kind.name());
    num(out, v.value);
    out.push(',');
    num(out, v.limit);
    let _ = writeln!(out, ",{}", snapshot.unwrap_or(""));
}

/// A parsed diagnostics file: column names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let columns: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for l in lines {
            let row: Option<Vec<f64>> = l.split(',').map(|c| c.parse().ok()).collect();
            let row = row?;
            if row.len() != columns.len() {
                return None;
            }
            rows.push(row);
        }
        Some(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}
