//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! [grid]
//! nx = 64
//! ny = 64
//! lx = 1
//! ly = 1
//!
//! [physics]
//! mu = 1
//! kappa = 1
//! alpha = 0.5          # or: gamma = 1.5
//! g_spec = linear_y(-1)
//! thetab_spec = linear_y(1, -1)
//!
//! [numerics]
//! dt_cfl = 0.5
//! dt_max = 0.01
//! lin_tol = 1e-10
//! bc_coupling = implicit   # implicit | lagged
//! advection = upwind       # upwind | limited
//!
//! [run]
//! t_end = 1
//! output_every = 10        # steps
//! checkpoint_every = 0     # steps, 0 = final checkpoint only
//! seed = 1
//! out_dir = out
//!
//! [initial]
//! theta0_spec = aligned_plus_mode(0.1, 2, 1)
//! u0_spec = random_divfree(0.1)   # zero | eigenmode(a) | file(path)
//! ```
//!
//! Every key is required except `gamma`/`alpha` (exactly one), `seed`
//! (default 0), `out_dir` (default `out`), `checkpoint_every` (default 0),
//! `bc_coupling` and `advection`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use obrb_core::init::{Theta0Spec, U0Spec};
use obrb_core::{alpha_from_gamma, build_grid, AdvectionScheme, BcCoupling, GSpec, Grid, Params, ThetaBSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum U0Source {
    Spec(U0Spec),
    /// Velocity of a checkpoint file.
    File(PathBuf),
}

impl fmt::Display for U0Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            U0Source::Spec(s) => s.fmt(f),
            U0Source::File(p) => write!(f, "file({})", p.display()),
        }
    }
}

impl FromStr for U0Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("file(").and_then(|r| r.strip_suffix(')')) {
            let path = inner.trim();
            if path.is_empty() {
                return Err("file() needs a path".into());
            }
            return Ok(U0Source::File(PathBuf::from(path)));
        }
        s.parse::<U0Spec>().map(U0Source::Spec).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub params: Params,
    pub t_end: f64,
    pub output_every: u64,
    pub checkpoint_every: u64,
    pub out_dir: PathBuf,
    pub theta0: Theta0Spec,
    pub u0: U0Source,
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["nx", "ny", "lx", "ly"]),
    ("physics", &["mu", "kappa", "alpha", "gamma", "g_spec", "thetab_spec"]),
    ("numerics", &["dt_cfl", "dt_max", "lin_tol", "bc_coupling", "advection"]),
    ("run", &["t_end", "output_every", "checkpoint_every", "seed", "out_dir"]),
    ("initial", &["theta0_spec", "u0_spec"]),
];

struct Entry {
    line: usize,
    value: String,
}

struct Sections {
    entries: BTreeMap<(String, String), Entry>,
    headers: BTreeMap<String, usize>,
    last_line: usize,
}

impl Sections {
    fn lex(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut headers = BTreeMap::new();
        let mut section: Option<String> = None;
        let mut last_line = 0;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            last_line = line;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::new(line, format!("malformed section header `{body}`")))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::new(line, format!("unknown section `[{name}]`")));
                }
                if headers.insert(name.to_string(), line).is_some() {
                    return Err(ConfigError::new(line, format!("section `[{name}]` appears twice")));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::new(line, format!("expected `key = value`, got `{body}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = &section else {
                return Err(ConfigError::new(line, format!("key `{key}` outside any section")));
            };
            let known = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(ConfigError::new(line, format!("unknown key `{key}` in [{sec}]")));
            }
            if value.is_empty() {
                return Err(ConfigError::new(line, format!("key `{key}` has no value")));
            }
            let slot = (sec.clone(), key.to_string());
            if entries.contains_key(&slot) {
                return Err(ConfigError::new(line, format!("key `{key}` repeated in [{sec}]")));
            }
            entries.insert(
                slot,
                Entry {
                    line,
                    value: value.to_string(),
                },
            );
        }
        Ok(Self {
            entries,
            headers,
            last_line,
        })
    }

    fn get(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(sec.to_string(), key.to_string()))
    }

    fn require(&self, sec: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.get(sec, key).ok_or_else(|| {
            let line = self.headers.get(sec).copied().unwrap_or(self.last_line);
            ConfigError::new(line, format!("missing required key `{key}` in [{sec}]"))
        })
    }

    fn parse<T: FromStr>(&self, sec: &str, key: &str, what: &str) -> Result<(T, usize), ConfigError>
    where
        T::Err: fmt::Display,
    {
        let e = self.require(sec, key)?;
        Self::convert(e, key, what)
    }

    fn parse_or<T: FromStr>(&self, sec: &str, key: &str, what: &str, default: T) -> Result<(T, usize), ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(sec, key) {
            Some(e) => Self::convert(e, key, what),
            None => Ok((default, self.headers.get(sec).copied().unwrap_or(0))),
        }
    }

    fn convert<T: FromStr>(e: &Entry, key: &str, what: &str) -> Result<(T, usize), ConfigError>
    where
        T::Err: fmt::Display,
    {
        e.value
            .parse::<T>()
            .map(|v| (v, e.line))
            .map_err(|err| ConfigError::new(e.line, format!("`{key}` expects {what}, got `{}` ({err})", e.value)))
    }
}

fn parse_coupling(s: &str) -> Result<BcCoupling, String> {
    match s {
        "implicit" => Ok(BcCoupling::Implicit),
        "lagged" => Ok(BcCoupling::Lagged),
        _ => Err("expected implicit or lagged".into()),
    }
}

fn parse_advection(s: &str) -> Result<AdvectionScheme, String> {
    match s {
        "upwind" => Ok(AdvectionScheme::Upwind),
        "limited" => Ok(AdvectionScheme::Limited),
        _ => Err("expected upwind or limited".into()),
    }
}

pub fn coupling_name(c: BcCoupling) -> &'static str {
    match c {
        BcCoupling::Implicit => "implicit",
        BcCoupling::Lagged => "lagged",
    }
}

pub fn advection_name(a: AdvectionScheme) -> &'static str {
    match a {
        AdvectionScheme::Upwind => "upwind",
        AdvectionScheme::Limited => "limited",
    }
}

struct Named<T>(T);

impl FromStr for Named<BcCoupling> {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_coupling(s).map(Named)
    }
}

impl FromStr for Named<AdvectionScheme> {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_advection(s).map(Named)
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let s = Sections::lex(text)?;

    let (nx, nx_line) = s.parse::<usize>("grid", "nx", "a cell count")?;
    let (ny, _) = s.parse::<usize>("grid", "ny", "a cell count")?;
    let (lx, _) = s.parse::<f64>("grid", "lx", "a length")?;
    let (ly, _) = s.parse::<f64>("grid", "ly", "a length")?;
    let grid = build_grid(nx, ny, lx, ly).map_err(|e| ConfigError::new(nx_line, e.to_string()))?;

    let (mu, mu_line) = s.parse::<f64>("physics", "mu", "a number")?;
    let (kappa, kappa_line) = s.parse::<f64>("physics", "kappa", "a number")?;
    let (alpha, gamma) = match (s.get("physics", "alpha"), s.get("physics", "gamma")) {
        (Some(a), Some(g)) => {
            return Err(ConfigError::new(
                a.line.max(g.line),
                "give exactly one of `alpha` and `gamma`, not both",
            ))
        }
        (None, None) => {
            let line = s.headers.get("physics").copied().unwrap_or(s.last_line);
            return Err(ConfigError::new(line, "one of `alpha` or `gamma` is required in [physics]"));
        }
        (Some(a), None) => {
            let (v, line) = Sections::convert::<f64>(a, "alpha", "a number")?;
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::new(line, obrb_core::Error::AlphaOutOfRange(v).to_string()));
            }
            (v, None)
        }
        (None, Some(g)) => {
            let (v, line) = Sections::convert::<f64>(g, "gamma", "a number")?;
            let a = alpha_from_gamma(v).map_err(|e| ConfigError::new(line, e.to_string()))?;
            (a, Some(v))
        }
    };
    let (g_spec, _) = s.parse::<GSpec>("physics", "g_spec", "a potential descriptor")?;
    let (thetab_spec, _) = s.parse::<ThetaBSpec>("physics", "thetab_spec", "a boundary-data descriptor")?;

    let (dt_cfl, cfl_line) = s.parse::<f64>("numerics", "dt_cfl", "a number in (0, 1]")?;
    let (dt_max, dtmax_line) = s.parse::<f64>("numerics", "dt_max", "a number")?;
    let (lin_tol, tol_line) = s.parse::<f64>("numerics", "lin_tol", "a number")?;
    let (Named(bc_coupling), _) = s.parse_or("numerics", "bc_coupling", "implicit or lagged", Named(BcCoupling::Implicit))?;
    let (Named(advection), _) = s.parse_or("numerics", "advection", "upwind or limited", Named(AdvectionScheme::Upwind))?;

    let (t_end, t_line) = s.parse::<f64>("run", "t_end", "a time")?;
    let (output_every, out_line) = s.parse::<u64>("run", "output_every", "a step count")?;
    let (checkpoint_every, _) = s.parse_or::<u64>("run", "checkpoint_every", "a step count", 0)?;
    let (seed, _) = s.parse_or::<u64>("run", "seed", "an unsigned integer", 0)?;
    let (out_dir, _) = s.parse_or::<PathBuf>("run", "out_dir", "a path", PathBuf::from("out"))?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(ConfigError::new(t_line, format!("`t_end` must be positive, got {t_end}")));
    }
    if output_every == 0 {
        return Err(ConfigError::new(out_line, "`output_every` must be positive"));
    }

    let (theta0, _) = s.parse::<Theta0Spec>("initial", "theta0_spec", "an initial temperature descriptor")?;
    let (u0, _) = s.parse::<U0Source>("initial", "u0_spec", "an initial velocity descriptor")?;

    let params = Params {
        mu,
        kappa,
        alpha,
        gamma,
        g_spec,
        thetab_spec,
        dt_cfl,
        dt_max,
        lin_tol,
        seed,
        bc_coupling,
        advection,
    };
    if let Err(e) = params.validate() {
        let line = match &e {
            obrb_core::Error::InvalidParameter { name, .. } => match *name {
                "mu" => mu_line,
                "kappa" => kappa_line,
                "dt_cfl" => cfl_line,
                "dt_max" => dtmax_line,
                "lin_tol" => tol_line,
                _ => 0,
            },
            _ => 0,
        };
        return Err(ConfigError::new(line, e.to_string()));
    }
    Ok(RunConfig {
        grid,
        params,
        t_end,
        output_every,
        checkpoint_every,
        out_dir,
        theta0,
        u0,
    })
}

impl fmt::Display for RunConfig {
    /// Writes the configuration back in the input grammar.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.grid;
        let p = &self.params;
        writeln!(f, "[grid]\nnx = {}\nny = {}\nlx = {}\nly = {}\n", g.nx(), g.ny(), g.lx(), g.ly())?;
        writeln!(f, "[physics]\nmu = {}\nkappa = {}", p.mu, p.kappa)?;
        match p.gamma {
            Some(gamma) => writeln!(f, "gamma = {gamma}")?,
            None => writeln!(f, "alpha = {}", p.alpha)?,
        }
        writeln!(f, "g_spec = {}\nthetab_spec = {}\n", p.g_spec, p.thetab_spec)?;
        writeln!(
            f,
            "[numerics]\ndt_cfl = {}\ndt_max = {}\nlin_tol = {:e}\nbc_coupling = {}\nadvection = {}\n",
            p.dt_cfl,
            p.dt_max,
            p.lin_tol,
            coupling_name(p.bc_coupling),
            advection_name(p.advection)
        )?;
        writeln!(
            f,
            "[run]\nt_end = {}\noutput_every = {}\ncheckpoint_every = {}\nseed = {}\nout_dir = {}\n",
            self.t_end,
            self.output_every,
            self.checkpoint_every,
            p.seed,
            self.out_dir.display()
        )?;
        write!(f, "[initial]\ntheta0_spec = {}\nu0_spec = {}\n", self.theta0, self.u0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const GOLDEN: &str = include_str!("../configs/default.conf");

    #[test]
    fn golden_file_parses() {
        let c = parse_config(GOLDEN).unwrap();
        assert_eq!((c.grid.nx(), c.grid.ny()), (64, 64));
        assert_eq!(c.params.alpha, 0.5);
        assert_eq!(c.params.mu, 1.0);
        assert_eq!(c.params.g_spec, GSpec::LinearY(-1.0));
    }

    #[test]
    fn display_round_trips() {
        let c = parse_config(GOLDEN).unwrap();
        assert_eq!(parse_config(&c.to_string()).unwrap(), c);
    }

    fn with(replace: &str, by: &str) -> String {
        assert!(GOLDEN.contains(replace));
        GOLDEN.replacen(replace, by, 1)
    }

    fn line_of(text: &str, needle: &str) -> usize {
        text.lines().position(|l| l.contains(needle)).unwrap() + 1
    }

    #[test]
    fn alpha_above_one_cites_the_hypothesis() {
        let text = with("alpha = 0.5", "alpha = 1.2");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, line_of(&text, "alpha = 1.2"));
        assert!(e.message.contains("(UU)"), "{e}");
        assert!(e.message.contains("0 < alpha < 1"));
    }

    #[test]
    fn alpha_and_gamma_are_exclusive() {
        let text = with("alpha = 0.5", "alpha = 0.5\ngamma = 1.4");
        let e = parse_config(&text).unwrap_err();
        assert!(e.message.contains("exactly one"), "{e}");
        let text = with("alpha = 0.5", "gamma = 1.4");
        let c = parse_config(&text).unwrap();
        assert!((c.params.alpha - 0.4).abs() < 1e-15);
        let e = parse_config(&with("alpha = 0.5", "gamma = 2.5")).unwrap_err();
        assert!(e.message.contains("(UU)"));
    }

    #[test]
    fn errors_name_the_line() {
        let text = with("kappa = 1", "kapa = 1");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, line_of(&text, "kapa"));
        assert!(e.message.contains("unknown key `kapa`"));

        let text = with("nx = 64", "nx = sixty");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, line_of(&text, "nx = sixty"));

        let text = with("t_end = 1", "t_end = -1");
        assert_eq!(parse_config(&text).unwrap_err().line, line_of(&text, "t_end = -1"));

        let text = with("mu = 1\n", "");
        let e = parse_config(&text).unwrap_err();
        assert!(e.message.contains("missing required key `mu`"));
        assert_eq!(e.line, line_of(&text, "[physics]"));

        let text = with("g_spec = linear_y(-1)", "g_spec = spiral(2)");
        assert_eq!(parse_config(&text).unwrap_err().line, line_of(&text, "spiral"));
    }

    #[test]
    fn u0_file_source() {
        let t = with("u0_spec = zero", "u0_spec = file(start.chk)");
        assert_eq!(parse_config(&t).unwrap().u0, U0Source::File("start.chk".into()));
    }
}
