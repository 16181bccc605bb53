//! Closed-form descriptors for the potential `G` and the boundary temperature
//! `thetaB`, plus the physical/numerical parameter record.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{EdgeTrace, Grid, ScalarField};

/// Harmonic, zero-mean gravitational potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GSpec {
    /// `c (y - ly/2)`
    LinearY(f64),
    /// `c (x - lx/2)`
    LinearX(f64),
    /// `c (x y - lx ly / 4)`
    HarmonicXy(f64),
}

impl GSpec {
    pub fn eval(&self, grid: &Grid, x: f64, y: f64) -> f64 {
        match *self {
            GSpec::LinearY(c) => c * (y - 0.5 * grid.ly()),
            GSpec::LinearX(c) => c * (x - 0.5 * grid.lx()),
            GSpec::HarmonicXy(c) => c * (x * y - 0.25 * grid.lx() * grid.ly()),
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            GSpec::LinearY(c) => (0.0, c),
            GSpec::LinearX(c) => (c, 0.0),
            GSpec::HarmonicXy(c) => (c * y, c * x),
        }
    }

    /// Scales the amplitude by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            GSpec::LinearY(c) => GSpec::LinearY(c * s),
            GSpec::LinearX(c) => GSpec::LinearX(c * s),
            GSpec::HarmonicXy(c) => GSpec::HarmonicXy(c * s),
        }
    }
}

/// Samples `G` at cell centres and removes the discrete mean, so the
/// returned field has `|mean| <= 1e-12` for every built-in.
pub fn make_potential(grid: &Grid, spec: &GSpec) -> ScalarField {
    let g = ScalarField::from_fn(*grid, |x, y| spec.eval(grid, x, y));
    let m = g.values().iter().sum::<f64>() / grid.cells() as f64;
    g.add_scalar(-m)
}

/// Boundary temperature, given as a globally smooth function restricted to
/// the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaBSpec {
    Constant(f64),
    /// `a + b y`
    LinearY { a: f64, b: f64 },
    /// `a + b x`
    LinearX { a: f64, b: f64 },
    /// `c x y`
    Bilinear(f64),
    /// `amp cos(k pi x / lx)`
    CosineX { amp: f64, k: f64 },
}

impl ThetaBSpec {
    pub fn eval(&self, grid: &Grid, x: f64, y: f64) -> f64 {
        match *self {
            ThetaBSpec::Constant(b) => b,
            ThetaBSpec::LinearY { a, b } => a + b * y,
            ThetaBSpec::LinearX { a, b } => a + b * x,
            ThetaBSpec::Bilinear(c) => c * x * y,
            ThetaBSpec::CosineX { amp, k } => amp * libm::cos(k * PI * x / grid.lx()),
        }
    }

    pub fn trace(&self, grid: &Grid) -> EdgeTrace {
        EdgeTrace::from_fn(grid, |x, y| self.eval(grid, x, y))
    }

    /// Whether the descriptor is itself harmonic (then its cell samples are
    /// the exact discrete harmonic extension).
    pub fn is_harmonic(&self) -> bool {
        !matches!(self, ThetaBSpec::CosineX { .. })
    }

    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            ThetaBSpec::Constant(b) => ThetaBSpec::Constant(b * s),
            ThetaBSpec::LinearY { a, b } => ThetaBSpec::LinearY { a: a * s, b: b * s },
            ThetaBSpec::LinearX { a, b } => ThetaBSpec::LinearX { a: a * s, b: b * s },
            ThetaBSpec::Bilinear(c) => ThetaBSpec::Bilinear(c * s),
            ThetaBSpec::CosineX { amp, k } => ThetaBSpec::CosineX { amp: amp * s, k },
        }
    }
}

/// Splits `name(a, b, ...)` into the name and its numeric arguments.
pub fn parse_call(text: &str) -> Result<(String, Vec<f64>)> {
    let text = text.trim();
    let bad = || Error::UnknownSpec(text.to_string());
    let Some(open) = text.find('(') else {
        return Ok((text.to_string(), Vec::new()));
    };
    if !text.ends_with(')') {
        return Err(bad());
    }
    let name = text[..open].trim().to_string();
    let inner = text[open + 1..text.len() - 1].trim();
    let args = if inner.is_empty() {
        Vec::new()
    } else {
        inner
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    };
    Ok((name, args))
}

impl FromStr for GSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        match (name.as_str(), args.as_slice()) {
            ("linear_y", [c]) => Ok(GSpec::LinearY(*c)),
            ("linear_x", [c]) => Ok(GSpec::LinearX(*c)),
            ("harmonic_xy", [c]) => Ok(GSpec::HarmonicXy(*c)),
            _ => Err(Error::UnknownSpec(s.trim().to_string())),
        }
    }
}

impl fmt::Display for GSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GSpec::LinearY(c) => write!(f, "linear_y({c})"),
            GSpec::LinearX(c) => write!(f, "linear_x({c})"),
            GSpec::HarmonicXy(c) => write!(f, "harmonic_xy({c})"),
        }
    }
}

impl FromStr for ThetaBSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        match (name.as_str(), args.as_slice()) {
            ("constant", [b]) => Ok(ThetaBSpec::Constant(*b)),
            ("linear_y", [a, b]) => Ok(ThetaBSpec::LinearY { a: *a, b: *b }),
            ("linear_x", [a, b]) => Ok(ThetaBSpec::LinearX { a: *a, b: *b }),
            ("bilinear", [c]) => Ok(ThetaBSpec::Bilinear(*c)),
            ("cosine_x", [amp, k]) => Ok(ThetaBSpec::CosineX { amp: *amp, k: *k }),
            _ => Err(Error::UnknownSpec(s.trim().to_string())),
        }
    }
}

impl fmt::Display for ThetaBSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaBSpec::Constant(b) => write!(f, "constant({b})"),
            ThetaBSpec::LinearY { a, b } => write!(f, "linear_y({a}, {b})"),
            ThetaBSpec::LinearX { a, b } => write!(f, "linear_x({a}, {b})"),
            ThetaBSpec::Bilinear(c) => write!(f, "bilinear({c})"),
            ThetaBSpec::CosineX { amp, k } => write!(f, "cosine_x({amp}, {k})"),
        }
    }
}

/// `alpha = gamma - 1`, the ideal-gas value of the non-local coefficient.
pub fn alpha_from_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 1.0 && gamma < 2.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("gamma = {gamma} gives alpha = gamma - 1 outside (0, 1), violating hypothesis (UU)"),
        });
    }
    Ok(gamma - 1.0)
}

/// Treatment of the mean in the temperature boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BcCoupling {
    /// Solved exactly at the new time level by the rank-one closure.
    #[default]
    Implicit,
    /// Mean taken from the previous time level.
    Lagged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionScheme {
    /// First-order donor cell; satisfies the discrete maximum principle.
    #[default]
    Upwind,
    /// Minmod-limited second-order reconstruction. Not used by the
    /// verification suites.
    Limited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    /// Recorded when `alpha` was derived via [`alpha_from_gamma`].
    pub gamma: Option<f64>,
    pub g_spec: GSpec,
    pub thetab_spec: ThetaBSpec,
    pub dt_cfl: f64,
    pub dt_max: f64,
    pub lin_tol: f64,
    pub seed: u64,
    pub bc_coupling: BcCoupling,
    pub advection: AdvectionScheme,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            mu: 1.0,
            kappa: 1.0,
            alpha: 0.5,
            gamma: None,
            g_spec: GSpec::LinearY(-1.0),
            thetab_spec: ThetaBSpec::LinearY { a: 1.0, b: -1.0 },
            dt_cfl: 0.5,
            dt_max: 0.01,
            lin_tol: 1e-10,
            seed: 0,
            bc_coupling: BcCoupling::Implicit,
            advection: AdvectionScheme::Upwind,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::AlphaOutOfRange(self.alpha));
        }
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("mu", self.mu)?;
        positive("kappa", self.kappa)?;
        positive("dt_max", self.dt_max)?;
        positive("lin_tol", self.lin_tol)?;
        if !(self.dt_cfl > 0.0 && self.dt_cfl <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "dt_cfl",
                reason: format!("must lie in (0, 1], got {}", self.dt_cfl),
            });
        }
        if let Some(gamma) = self.gamma {
            let a = alpha_from_gamma(gamma)?;
            if a != self.alpha {
                return Err(Error::InvalidParameter {
                    name: "gamma",
                    reason: format!("alpha = {} disagrees with gamma - 1 = {a}", self.alpha),
                });
            }
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}
