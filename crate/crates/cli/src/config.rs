//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys
//! are case-sensitive; unknown and repeated keys are rejected with their line
//! number. The `init` value names an initial condition followed by optional
//! whitespace-separated `name=value` parameters, e.g.
//!
//! ```text
//! init = random offset=0.25 amplitude=0.4
//! ```

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gradflow::diagnostics::Scenario;
use gradflow::initcond::{InitSpec, Patch, DEFAULT_SEED};
use gradflow::linsolve::{DEFAULT_MAXIT, DEFAULT_TOL};
use gradflow::models::{ModelKind, ModelParams, ModelSpec};
use gradflow::spectral::{Field, Grid2D};
use gradflow::timestep::{Correction, Scheme, SchemeConfig, Stepper};

pub const KEYS: [&str; 26] = [
    "model",
    "stepper",
    "correction",
    "eta",
    "nx",
    "ny",
    "x0",
    "x1",
    "y0",
    "y1",
    "tau",
    "T",
    "alpha0",
    "eps",
    "M",
    "kappa",
    "beta",
    "C0",
    "init",
    "seed",
    "lin_tol",
    "lin_maxit",
    "dealias",
    "snapshot_every",
    "trace_every",
    "out_dir",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, msg: impl Into<String>) -> Self {
        ConfigError { line: Some(line), msg: msg.into() }
    }

    fn global(msg: impl Into<String>) -> Self {
        ConfigError { line: None, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.msg),
            None => f.write_str(&self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub stepper: Stepper,
    pub correction: Correction,
    pub nx: usize,
    pub ny: usize,
    pub bounds: [f64; 4],
    pub tau: f64,
    pub t_final: f64,
    pub init: InitSpec,
    pub lin_tol: f64,
    pub lin_maxit: usize,
    pub dealias: bool,
    pub snapshot_every: usize,
    pub trace_every: usize,
    pub out_dir: PathBuf,
}

struct Entries {
    map: HashMap<&'static str, (String, usize)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<(T, usize)>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(|x| Some((x, line)))
                .map_err(|e| ConfigError::at(line, format!("invalid value '{v}' for {key}: {e}"))),
        }
    }

    fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parsed(key)?.map_or(default, |(v, _)| v))
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<(T, usize), ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.parsed(key)?.ok_or_else(|| ConfigError::global(format!("missing required key '{key}'")))
    }

    /// Physical parameter: finite and strictly positive.
    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let (v, line) = self.required::<f64>(key)?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::at(line, format!("{key} must be positive, got {v}")))
        }
    }
}

fn parse_entries(text: &str) -> Result<Entries, ConfigError> {
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::at(line, format!("expected 'key = value', found '{content}'")));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::at(line, format!("unknown key '{key}'")));
        };
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("empty value for {key}")));
        }
        if let Some((_, first)) = map.insert(known, (value.to_string(), line)) {
            return Err(ConfigError::at(line, format!("duplicate key '{key}' (first set on line {first})")));
        }
    }
    Ok(Entries { map })
}

fn init_params(line: usize, name: &str, tokens: &[&str], allowed: &[&str]) -> Result<HashMap<String, f64>, ConfigError> {
    let mut out = HashMap::new();
    for tok in tokens {
        let Some((k, v)) = tok.split_once('=') else {
            return Err(ConfigError::at(line, format!("init parameter '{tok}' is not name=value")));
        };
        if !allowed.contains(&k) {
            return Err(ConfigError::at(
                line,
                format!("unknown parameter '{k}' for init {name} (expected one of: {})", allowed.join(", ")),
            ));
        }
        let v: f64 = v.parse().map_err(|_| ConfigError::at(line, format!("invalid number '{v}' for init {name}.{k}")))?;
        if !v.is_finite() {
            return Err(ConfigError::at(line, format!("init {name}.{k} must be finite")));
        }
        if out.insert(k.to_string(), v).is_some() {
            return Err(ConfigError::at(line, format!("init parameter '{k}' given twice")));
        }
    }
    Ok(out)
}

fn parse_init(value: &str, line: usize, eps: f64, seed: u64) -> Result<InitSpec, ConfigError> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    let (name, rest) = tokens.split_first().expect("value is non-empty");
    let name = *name;
    let take = |allowed: &[&str]| init_params(line, name, rest, allowed);
    let spec = match name {
        "tanh_star" => {
            let p = take(&["a", "b", "c", "eps"])?;
            let get = |k: &str, d: f64| p.get(k).copied().unwrap_or(d);
            InitSpec::TanhStar { a: get("a", 1.5), b: get("b", 1.2), c: get("c", 2.0 * PI), eps: get("eps", eps) }
        }
        "random" => {
            let p = take(&["offset", "amplitude"])?;
            let get = |k: &str, d: f64| p.get(k).copied().unwrap_or(d);
            InitSpec::SeededRandom { offset: get("offset", 0.25), amplitude: get("amplitude", 0.4), seed }
        }
        "ellipse_circle" => {
            let p = take(&["ellipse_x", "ellipse_y", "axis_a", "axis_b", "circle_x", "circle_y", "radius", "eps"])?;
            let get = |k: &str, d: f64| p.get(k).copied().unwrap_or(d);
            InitSpec::EllipseCircle {
                ellipse_center: [get("ellipse_x", -0.1), get("ellipse_y", -0.1)],
                axes: [get("axis_a", SQRT_2 / 5.0), get("axis_b", SQRT_2 / 10.0)],
                circle_center: [get("circle_x", 0.25), get("circle_y", 0.25)],
                radius: get("radius", 0.1),
                eps: get("eps", eps),
            }
        }
        "polycrystal" => {
            let p = take(&["mean", "amplitude", "k", "radius"])?;
            let InitSpec::Polycrystal { patches, mean, amplitude, wavenumber } = InitSpec::polycrystal() else {
                unreachable!("polycrystal() builds a polycrystal");
            };
            let radius = p.get("radius").copied();
            let patches = patches.into_iter().map(|pt| Patch { radius: radius.unwrap_or(pt.radius), ..pt }).collect();
            InitSpec::Polycrystal {
                patches,
                mean: p.get("mean").copied().unwrap_or(mean),
                amplitude: p.get("amplitude").copied().unwrap_or(amplitude),
                wavenumber: p.get("k").copied().unwrap_or(wavenumber),
            }
        }
        "mbe_bench" => {
            take(&[])?;
            InitSpec::MbeBenchmark
        }
        other => {
            return Err(ConfigError::at(
                line,
                format!("unknown init '{other}' (expected tanh_star, random, ellipse_circle, polycrystal or mbe_bench)"),
            ))
        }
    };
    Ok(spec)
}

fn default_init(kind: ModelKind, eps: f64, seed: u64) -> InitSpec {
    match kind {
        ModelKind::Ac => InitSpec::tanh_star(eps),
        ModelKind::Ch => InitSpec::seeded_random(seed),
        ModelKind::Pfc => InitSpec::polycrystal(),
        ModelKind::Mbe => InitSpec::MbeBenchmark,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = parse_entries(text)?;
        let (kind, model_line) = e.required::<ModelKind>("model")?;

        let eps = e.positive("eps")?;
        let mobility = e.positive("M")?;
        let needs = |k: &str| match k {
            "alpha0" => matches!(kind, ModelKind::Ac | ModelKind::Ch),
            "C0" => kind != ModelKind::Pfc,
            "beta" => kind == ModelKind::Pfc,
            _ => false,
        };
        let opt_positive = |k: &str| if needs(k) || e.raw(k).is_some() { e.positive(k) } else { Ok(0.0) };
        let alpha0 = opt_positive("alpha0")?;
        let c0 = opt_positive("C0")?;
        let beta = opt_positive("beta")?;
        let kappa = match e.parsed::<f64>("kappa")? {
            Some((k, line)) if !(k.is_finite() && k >= 0.0) => {
                return Err(ConfigError::at(line, format!("kappa must be non-negative, got {k}")))
            }
            Some((k, _)) => k,
            None => 0.0,
        };
        let params = ModelParams {
            alpha0: if needs("alpha0") { alpha0 } else { 0.0 },
            eps,
            mobility,
            kappa: if kind == ModelKind::Ch { kappa } else { 0.0 },
            beta: if needs("beta") { beta } else { 0.0 },
            c0: if needs("C0") { c0 } else { 0.0 },
        };
        let model = ModelSpec::new(kind, params).map_err(|err| ConfigError::at(model_line, err.to_string()))?;

        let stepper = e.get_or("stepper", Stepper::Cn)?;
        let mut correction = e.get_or("correction", Correction::EnergyOpt)?;
        if let Some((eta, line)) = e.parsed::<f64>("eta")? {
            if !(0.0..=1.0).contains(&eta) {
                return Err(ConfigError::at(line, format!("eta must lie in [0, 1], got {eta}")));
            }
            if let Correction::Relax(_) = correction {
                let explicit = e.raw("correction").is_some_and(|(v, _)| v.contains(':'));
                if explicit {
                    return Err(ConfigError::at(line, "eta given twice (also in correction = relax:eta)"));
                }
                correction = Correction::Relax(eta);
            }
        }

        let (nx, _) = e.required::<usize>("nx")?;
        let ny = e.get_or("ny", nx)?;
        let bounds = [e.get_or("x0", -0.5)?, e.get_or("x1", 0.5)?, e.get_or("y0", -0.5)?, e.get_or("y1", 0.5)?];
        let tau = e.positive("tau")?;
        let t_final = e.positive("T")?;
        let seed = e.get_or("seed", DEFAULT_SEED)?;
        let init = match e.raw("init") {
            Some((v, line)) => parse_init(v, line, eps, seed)?,
            None => default_init(kind, eps, seed),
        };
        let lin_tol = match e.parsed::<f64>("lin_tol")? {
            Some((t, line)) if !(t.is_finite() && t > 0.0) => {
                return Err(ConfigError::at(line, format!("lin_tol must be positive, got {t}")))
            }
            Some((t, _)) => t,
            None => DEFAULT_TOL,
        };
        let lin_maxit = match e.parsed::<usize>("lin_maxit")? {
            Some((0, line)) => return Err(ConfigError::at(line, "lin_maxit must be at least 1")),
            Some((m, _)) => m,
            None => DEFAULT_MAXIT,
        };
        let dealias = match e.parsed::<u8>("dealias")? {
            None | Some((0, _)) => false,
            Some((1, _)) => true,
            Some((v, line)) => return Err(ConfigError::at(line, format!("dealias must be 0 or 1, got {v}"))),
        };
        let snapshot_every = e.get_or("snapshot_every", 0)?;
        let trace_every = e.get_or("trace_every", 1)?;
        let out_dir = PathBuf::from(e.raw("out_dir").map_or("out", |(v, _)| v));

        let cfg = RunConfig {
            model,
            stepper,
            correction,
            nx,
            ny,
            bounds,
            tau,
            t_final,
            init,
            lin_tol,
            lin_maxit,
            dealias,
            snapshot_every,
            trace_every,
            out_dir,
        };
        cfg.grid().map_err(|err| ConfigError::global(err.to_string()))?;
        cfg.scheme_config(cfg.correction).steps().map_err(|err| ConfigError::global(err.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| ConfigError::global(format!("cannot read {}: {err}", path.display())))?;
        Self::parse(&text)
    }

    pub fn grid(&self) -> gradflow::Result<Arc<Grid2D>> {
        let [x0, x1, y0, y1] = self.bounds;
        Grid2D::build(self.nx, self.ny, x0, x1, y0, y1, self.dealias)
    }

    pub fn scheme_config(&self, correction: Correction) -> SchemeConfig {
        SchemeConfig {
            stepper: self.stepper,
            correction,
            tau: self.tau,
            t_final: self.t_final,
            lin_tol: self.lin_tol,
            lin_maxit: self.lin_maxit,
        }
    }

    pub fn scheme(&self, grid: &Arc<Grid2D>, correction: Correction) -> gradflow::Result<Scheme> {
        Scheme::new(self.model, Arc::clone(grid), self.scheme_config(correction))
    }

    pub fn initial_field(&self, grid: &Arc<Grid2D>) -> Field {
        self.init.build(grid)
    }

    pub fn scenario(&self) -> gradflow::Result<Scenario> {
        let grid = self.grid()?;
        Ok(Scenario {
            model: self.model,
            phi0: self.initial_field(&grid),
            grid,
            stepper: self.stepper,
            correction: self.correction,
            t_final: self.t_final,
            lin_tol: self.lin_tol,
            lin_maxit: self.lin_maxit,
        })
    }
}
