//! Initial data: seeded solenoidal velocities and temperature descriptors.
//!
//! Random draws use `ChaCha8Rng` from `rand_chacha` 0.3, seeded with
//! `seed_from_u64`, so a seed fixes the data on every platform.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::parse_call;
use crate::equilibrium::EquilibriumSolution;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

/// Generator name written into output headers.
pub const PRNG_NAME: &str = "rand_chacha 0.3 ChaCha8Rng (seed_from_u64)";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of random Fourier modes per direction in the streamfunction.
const MODES: usize = 4;

/// Velocity as the discrete curl of
/// `psi = (sin(pi x/lx) sin(pi y/ly))^2 R(x, y)` sampled at vertices, where
/// `R` is a random trigonometric polynomial. The result is divergence-free
/// to rounding, vanishes on every wall face, and is scaled so that the
/// largest face velocity equals `amplitude`.
pub fn random_divfree(grid: &Grid, amplitude: f64, seed: u64) -> VectorField {
    let mut r = rng(seed);
    let mut coef = [[0.0f64; MODES]; MODES];
    let mut phase = [[0.0f64; MODES]; MODES];
    for k in 0..MODES {
        for l in 0..MODES {
            coef[k][l] = r.gen_range(-1.0..1.0) / (1.0 + (k * k + l * l) as f64);
            phase[k][l] = r.gen_range(0.0..2.0 * PI);
        }
    }
    let (lx, ly) = (grid.lx(), grid.ly());
    let psi = |x: f64, y: f64| {
        let bump = libm::sin(PI * x / lx) * libm::sin(PI * y / ly);
        let mut s = 0.0;
        for k in 0..MODES {
            for l in 0..MODES {
                s += coef[k][l] * libm::cos(PI * (k as f64 * x / lx + l as f64 * y / ly) + phase[k][l]);
            }
        }
        bump * bump * s
    };
    curl_scaled(grid, psi, amplitude)
}

/// Curl of `(sin(pi x/lx) sin(pi y/ly))^2`: a single smooth cell that
/// approximates the slowest no-slip Stokes mode.
pub fn stokes_cell(grid: &Grid, amplitude: f64) -> VectorField {
    let (lx, ly) = (grid.lx(), grid.ly());
    curl_scaled(
        grid,
        |x, y| libm::pow(libm::sin(PI * x / lx) * libm::sin(PI * y / ly), 2.0),
        amplitude,
    )
}

fn curl_scaled(grid: &Grid, psi: impl Fn(f64, f64) -> f64, amplitude: f64) -> VectorField {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut p = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            p[j * (nx + 1) + i] = psi(grid.xf(i), grid.yf(j));
        }
    }
    // Exact zeros on the boundary vertices.
    for i in 0..=nx {
        p[i] = 0.0;
        p[ny * (nx + 1) + i] = 0.0;
    }
    for j in 0..=ny {
        p[j * (nx + 1)] = 0.0;
        p[j * (nx + 1) + nx] = 0.0;
    }
    let at = |i: usize, j: usize| p[j * (nx + 1) + i];
    let mut ux = vec![0.0; (nx + 1) * ny];
    let mut uy = vec![0.0; nx * (ny + 1)];
    for j in 0..ny {
        for i in 0..=nx {
            ux[j * (nx + 1) + i] = (at(i, j + 1) - at(i, j)) / grid.hy();
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            uy[j * nx + i] = -(at(i + 1, j) - at(i, j)) / grid.hx();
        }
    }
    let peak = ux.iter().chain(&uy).fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
    let s = if peak > 0.0 { amplitude / peak } else { 0.0 };
    ux.iter_mut().chain(uy.iter_mut()).for_each(|v| *v *= s);
    VectorField::from_components(*grid, ux, uy).expect("sizes match the grid")
}

/// Initial velocity descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum U0Spec {
    Zero,
    RandomDivfree(f64),
    /// Single-cell approximate Stokes mode with the given peak.
    Eigenmode(f64),
}

impl U0Spec {
    pub fn build(&self, grid: &Grid, seed: u64) -> VectorField {
        match *self {
            U0Spec::Zero => VectorField::zeros(*grid),
            U0Spec::RandomDivfree(a) => random_divfree(grid, a, seed),
            U0Spec::Eigenmode(a) => stokes_cell(grid, a),
        }
    }
}

impl FromStr for U0Spec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        match (name.as_str(), args.as_slice()) {
            ("zero", []) => Ok(U0Spec::Zero),
            ("random_divfree", [a]) => Ok(U0Spec::RandomDivfree(*a)),
            ("eigenmode", []) => Ok(U0Spec::Eigenmode(1.0)),
            ("eigenmode", [a]) => Ok(U0Spec::Eigenmode(*a)),
            _ => Err(Error::UnknownSpec(s.trim().to_string())),
        }
    }
}

impl fmt::Display for U0Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            U0Spec::Zero => write!(f, "zero"),
            U0Spec::RandomDivfree(a) => write!(f, "random_divfree({a})"),
            U0Spec::Eigenmode(a) => write!(f, "eigenmode({a})"),
        }
    }
}

/// Initial temperature descriptor. The `aligned*` forms start from the
/// closed-form equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta0Spec {
    Zero,
    Constant(f64),
    /// Independent uniform values in `[-a, a]`.
    Random(f64),
    /// `a sin(kx pi x / lx) sin(ky pi y / ly)`.
    Mode { amp: f64, kx: f64, ky: f64 },
    Aligned,
    AlignedPlusMode { amp: f64, kx: f64, ky: f64 },
    AlignedPlusRandom(f64),
}

impl Theta0Spec {
    pub fn needs_equilibrium(&self) -> bool {
        matches!(
            self,
            Theta0Spec::Aligned | Theta0Spec::AlignedPlusMode { .. } | Theta0Spec::AlignedPlusRandom(_)
        )
    }

    /// `eq` is required for the `aligned*` forms.
    pub fn build(&self, grid: &Grid, seed: u64, eq: Option<&EquilibriumSolution>) -> Result<ScalarField> {
        let mode = |amp: f64, kx: f64, ky: f64| {
            ScalarField::from_fn(*grid, |x, y| {
                amp * libm::sin(kx * PI * x / grid.lx()) * libm::sin(ky * PI * y / grid.ly())
            })
        };
        let random = |a: f64| {
            let mut r = rng(seed ^ 0x7e3a_91c5_0000_0001);
            let v: Vec<f64> = (0..grid.cells()).map(|_| r.gen_range(-a..=a)).collect();
            ScalarField::from_values(*grid, v).expect("length matches")
        };
        let base = || {
            eq.map(|e| e.thetas.clone())
                .ok_or_else(|| Error::UnknownSpec("aligned initial temperature needs an equilibrium".into()))
        };
        Ok(match *self {
            Theta0Spec::Zero => ScalarField::zeros(*grid),
            Theta0Spec::Constant(c) => ScalarField::constant(*grid, c),
            Theta0Spec::Random(a) => random(a),
            Theta0Spec::Mode { amp, kx, ky } => mode(amp, kx, ky),
            Theta0Spec::Aligned => base()?,
            Theta0Spec::AlignedPlusMode { amp, kx, ky } => base()?.axpy(1.0, &mode(amp, kx, ky)),
            Theta0Spec::AlignedPlusRandom(a) => base()?.axpy(1.0, &random(a)),
        })
    }
}

impl FromStr for Theta0Spec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = parse_call(s)?;
        let mode = |a: &[f64]| match a {
            [amp, kx, ky] => Some((*amp, *kx, *ky)),
            _ => None,
        };
        let spec = match (name.as_str(), args.as_slice()) {
            ("zero", []) => Some(Theta0Spec::Zero),
            ("constant", [c]) => Some(Theta0Spec::Constant(*c)),
            ("random", [a]) => Some(Theta0Spec::Random(*a)),
            ("mode", a) => mode(a).map(|(amp, kx, ky)| Theta0Spec::Mode { amp, kx, ky }),
            ("aligned", []) => Some(Theta0Spec::Aligned),
            ("aligned_plus_mode", a) => mode(a).map(|(amp, kx, ky)| Theta0Spec::AlignedPlusMode { amp, kx, ky }),
            ("aligned_plus_random", [a]) => Some(Theta0Spec::AlignedPlusRandom(*a)),
            _ => None,
        };
        spec.ok_or_else(|| Error::UnknownSpec(s.trim().to_string()))
    }
}

impl fmt::Display for Theta0Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta0Spec::Zero => write!(f, "zero"),
            Theta0Spec::Constant(c) => write!(f, "constant({c})"),
            Theta0Spec::Random(a) => write!(f, "random({a})"),
            Theta0Spec::Mode { amp, kx, ky } => write!(f, "mode({amp}, {kx}, {ky})"),
            Theta0Spec::Aligned => write!(f, "aligned"),
            Theta0Spec::AlignedPlusMode { amp, kx, ky } => write!(f, "aligned_plus_mode({amp}, {kx}, {ky})"),
            Theta0Spec::AlignedPlusRandom(a) => write!(f, "aligned_plus_random({a})"),
        }
    }
}
