//! Run configuration: a flat `key = value` file with `#` comments, defaults per
//! problem, and command-line overrides on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseGrid};
use crate::integrators::Scheme;
use crate::par_spline::{ClosureKind, Workers};
use crate::problems::{ProblemKind, ProblemSpec};
use crate::psido::SingularPolicy;
use crate::spline::BoundaryCondition;

/// How `Theta` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaMethod {
    Psm,
    /// Exact gradient form, quadratic potentials only.
    Local,
    /// Direct sums; tiny grids only.
    Quadrature,
}

/// Everything one experiment needs. Fully deterministic, no seeds.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub scheme: Scheme,
    pub closure: ClosureKind,
    pub patches: usize,
    /// 1 runs every patch on the calling thread; more runs one thread per patch.
    pub workers: usize,
    pub boundary: BoundaryCondition,
    /// Position bounds, shared by every position axis.
    pub x_min: f64,
    pub x_max: f64,
    /// Position points per axis.
    pub nx: usize,
    /// Momentum half width: `k in [-k_max, k_max)`.
    pub k_max: f64,
    pub nk: usize,
    pub hbar: f64,
    pub mass: f64,
    pub tau: f64,
    pub t_final: f64,
    /// Record metrics every this many steps (the final step is always recorded).
    pub output_every: usize,
    pub out: Option<PathBuf>,
    /// Abort once `max|f|` exceeds this multiple of `max|f0|`.
    pub blowup_factor: f64,
    pub theta: ThetaMethod,
    pub policy: SingularPolicy,
    pub allow_heavy: bool,
}

const KEYS: &[&str] = &[
    "problem",
    "scheme",
    "closure",
    "nnb",
    "patches",
    "workers",
    "boundary",
    "x_min",
    "x_max",
    "nx",
    "dx",
    "k_max",
    "nk",
    "hbar",
    "mass",
    "tau",
    "t_final",
    "output_every",
    "out",
    "blowup_factor",
    "theta",
    "policy",
    "allow_heavy",
    "a",
    "k0",
    "omega",
    "n_y",
    "strength",
    "soft",
];

/// Parse `key = value` lines. Later keys win; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
        let key = k.trim().to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::config(format!("line {}: unknown key `{key}`", n + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_problem(v: &str) -> Result<ProblemKind> {
    match v.to_ascii_lowercase().as_str() {
        "sine" | "sine_spline" => Ok(ProblemKind::SineSpline),
        "free_advection" | "free" => Ok(ProblemKind::FreeAdvection2D),
        "harmonic" => Ok(ProblemKind::Harmonic2D),
        "hydrogen" | "hydrogen_1s" => Ok(ProblemKind::Hydrogen1s),
        "singular" | "coulomb" => Ok(ProblemKind::SingularCoulomb),
        other => Err(Error::config(format!(
            "unknown problem `{other}` (sine, free_advection, harmonic, singular, hydrogen)"
        ))),
    }
}

/// `serial`, `clshbc` or `pmbc`; `nnb` only matters for `pmbc`.
pub fn parse_closure(v: &str, nnb: usize) -> Result<ClosureKind> {
    match v.to_ascii_lowercase().as_str() {
        "serial" => Ok(ClosureKind::Serial),
        "clshbc" | "cls" => Ok(ClosureKind::ClsHbc),
        "pmbc" => Ok(ClosureKind::Pmbc { n_nb: nnb }),
        other => Err(Error::config(format!("unknown closure `{other}` (serial, clshbc, pmbc)"))),
    }
}

fn parse_policy(v: &str) -> Result<SingularPolicy> {
    let v = v.to_ascii_lowercase();
    match v.split_once(':') {
        None if v == "zero" => Ok(SingularPolicy::ZeroAtSingularity),
        None if v == "none" => Ok(SingularPolicy::None),
        Some(("shift", d)) => Ok(SingularPolicy::GridShift(parse_num("policy", d)?)),
        _ => Err(Error::config(format!("unknown policy `{v}` (zero, none, shift:<dx>)"))),
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(format!("`{key}`: expected true/false, got `{v}`"))),
    }
}

impl RunConfig {
    /// Desk-scale defaults for a problem.
    pub fn defaults(kind: ProblemKind) -> Self {
        let base = RunConfig {
            problem: ProblemSpec::free_advection_default(),
            scheme: Scheme::Lpc1,
            closure: ClosureKind::Serial,
            patches: 1,
            workers: 1,
            boundary: BoundaryCondition::Neumann,
            x_min: -12.0,
            x_max: 12.0,
            nx: 81,
            k_max: 6.4,
            nk: 128,
            hbar: 1.0,
            mass: 1.0,
            tau: 0.05,
            t_final: 5.0,
            output_every: 10,
            out: None,
            blowup_factor: 100.0,
            theta: ThetaMethod::Psm,
            policy: SingularPolicy::ZeroAtSingularity,
            allow_heavy: false,
        };
        match kind {
            ProblemKind::FreeAdvection2D => base,
            ProblemKind::SineSpline => RunConfig {
                problem: ProblemSpec::new(kind, &[]).unwrap(),
                closure: ClosureKind::Pmbc { n_nb: 12 },
                patches: 4,
                x_min: 0.0,
                x_max: 8.0,
                nx: 161,
                t_final: 0.0,
                ..base
            },
            ProblemKind::Harmonic2D => RunConfig {
                problem: ProblemSpec::harmonic_default(),
                boundary: BoundaryCondition::Natural,
                nx: 241,
                nk: 64,
                tau: 1e-4,
                t_final: 2.0,
                output_every: 1000,
                ..base
            },
            ProblemKind::SingularCoulomb => RunConfig {
                problem: ProblemSpec::new(kind, &[("strength", 1.0)]).unwrap(),
                boundary: BoundaryCondition::Natural,
                x_min: -6.0,
                x_max: 6.0,
                nx: 41,
                k_max: 4.0,
                nk: 32,
                tau: 0.025,
                t_final: 5.0,
                ..base
            },
            ProblemKind::Hydrogen1s => RunConfig {
                problem: ProblemSpec::new(kind, &[("n_y", 16.0)]).unwrap(),
                boundary: BoundaryCondition::Natural,
                x_min: -6.0,
                x_max: 6.0,
                nx: 9,
                k_max: 3.2,
                nk: 8,
                tau: 0.025,
                t_final: 0.25,
                output_every: 1,
                ..base
            },
        }
    }

    /// Build from parsed keys: problem defaults first, then every key present.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let kind = match map.get("problem") {
            Some(v) => parse_problem(v)?,
            None => return Err(Error::config("missing key `problem`")),
        };
        let mut cfg = Self::defaults(kind);
        cfg.apply(map)?;
        Ok(cfg)
    }

    pub fn from_str_config(text: &str) -> Result<Self> {
        Self::from_map(&parse_key_values(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_str_config(&text)
    }

    /// Apply keys on top of the current values.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        let get = |k: &str| map.get(k).map(String::as_str);
        if let Some(v) = get("problem") {
            if parse_problem(v)? != self.problem.kind {
                return Err(Error::config("`problem` cannot change once defaults are chosen"));
            }
        }
        for key in ["a", "k0", "omega", "n_y", "strength", "soft"] {
            if let Some(v) = get(key) {
                self.problem.params.insert(key.to_string(), parse_num(key, v)?);
            }
        }
        if let Some(v) = get("scheme") {
            self.scheme = v.parse()?;
        }
        let nnb = match (get("nnb"), self.closure) {
            (Some(v), _) => parse_num("nnb", v)?,
            (None, ClosureKind::Pmbc { n_nb }) => n_nb,
            (None, _) => 20,
        };
        if let Some(v) = get("closure") {
            self.closure = parse_closure(v, nnb)?;
        } else if let ClosureKind::Pmbc { .. } = self.closure {
            self.closure = ClosureKind::Pmbc { n_nb: nnb };
        }
        if let Some(v) = get("patches") {
            self.patches = parse_num("patches", v)?;
        }
        if let Some(v) = get("workers") {
            self.workers = parse_num("workers", v)?;
        }
        if let Some(v) = get("boundary") {
            self.boundary = match v.to_ascii_lowercase().as_str() {
                "neumann" => BoundaryCondition::Neumann,
                "natural" => BoundaryCondition::Natural,
                other => return Err(Error::config(format!("unknown boundary `{other}` (neumann, natural)"))),
            };
        }
        for (key, slot) in [
            ("x_min", &mut self.x_min),
            ("x_max", &mut self.x_max),
            ("k_max", &mut self.k_max),
            ("hbar", &mut self.hbar),
            ("mass", &mut self.mass),
            ("tau", &mut self.tau),
            ("t_final", &mut self.t_final),
            ("blowup_factor", &mut self.blowup_factor),
        ] {
            if let Some(v) = get(key) {
                *slot = parse_num(key, v)?;
            }
        }
        match (get("nx"), get("dx")) {
            (Some(_), Some(_)) => return Err(Error::config("give either `nx` or `dx`, not both")),
            (Some(v), None) => self.nx = parse_num("nx", v)?,
            (None, Some(v)) => self.set_dx(parse_num("dx", v)?)?,
            (None, None) => {}
        }
        if let Some(v) = get("nk") {
            self.nk = parse_num("nk", v)?;
        }
        if let Some(v) = get("output_every") {
            self.output_every = parse_num("output_every", v)?;
        }
        if let Some(v) = get("out") {
            self.out = Some(PathBuf::from(v));
        }
        if let Some(v) = get("theta") {
            self.theta = match v.to_ascii_lowercase().as_str() {
                "psm" => ThetaMethod::Psm,
                "local" => ThetaMethod::Local,
                "quadrature" => ThetaMethod::Quadrature,
                other => return Err(Error::config(format!("unknown theta `{other}` (psm, local, quadrature)"))),
            };
        }
        if let Some(v) = get("policy") {
            self.policy = parse_policy(v)?;
        }
        if let Some(v) = get("allow_heavy") {
            self.allow_heavy = parse_bool("allow_heavy", v)?;
        }
        self.validate()
    }

    /// Set the point count from a spacing that must divide the domain.
    pub fn set_dx(&mut self, dx: f64) -> Result<()> {
        if dx <= 0.0 {
            return Err(Error::config("dx must be positive"));
        }
        let cells = (self.x_max - self.x_min) / dx;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::config(format!("dx = {dx} does not divide [{}, {}]", self.x_min, self.x_max)));
        }
        self.nx = cells.round() as usize + 1;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        let positive = [
            ("k_max", self.k_max),
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("blowup_factor", self.blowup_factor),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("`{k}` must be positive, got {v}")));
            }
        }
        if !(self.x_max > self.x_min) {
            return Err(Error::config("x_max must exceed x_min"));
        }
        if self.problem.kind != ProblemKind::SineSpline {
            if !(self.tau > 0.0) || self.t_final < 0.0 {
                return Err(Error::config("tau must be positive and t_final non-negative"));
            }
            let steps = self.t_final / self.tau;
            if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
                return Err(Error::config(format!("t_final = {} is not a multiple of tau = {}", self.t_final, self.tau)));
            }
            if self.nk < 2 || self.nk % 2 != 0 {
                return Err(Error::config(format!("nk must be even and >= 2, got {}", self.nk)));
            }
        }
        if self.patches == 0 || self.workers == 0 || self.output_every == 0 {
            return Err(Error::config("patches, workers and output_every must be positive"));
        }
        if self.patches > 1 && self.closure == ClosureKind::Serial {
            return Err(Error::config("closure `serial` needs patches = 1"));
        }
        if self.nx < 4 {
            return Err(Error::config(format!("nx must be at least 4, got {}", self.nx)));
        }
        Ok(())
    }

    /// Number of time steps.
    pub fn steps(&self) -> usize {
        (self.t_final / self.tau).round() as usize
    }

    pub fn dim(&self) -> usize {
        if self.problem.kind == ProblemKind::Hydrogen1s {
            3
        } else {
            1
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        let d = self.dim();
        let x = Axis::nodal(self.x_min, self.x_max, self.nx)?;
        let k = Axis::momentum(self.k_max, self.nk)?;
        PhaseGrid::new(vec![x; d], vec![k; d], self.hbar, self.mass)
    }

    pub fn worker_mode(&self) -> Workers {
        if self.workers > 1 {
            Workers::Threads { timeout: Duration::from_secs(30) }
        } else {
            Workers::Sequential
        }
    }
}
