//! Experiment configuration read from TOML.
//!
//! The schema is strict: unknown keys are rejected with their dotted path.

use crate::dist::{BatchLaw, Family, Law};
use crate::engine::ClassSpec;
use crate::fields::ClassField;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("invalid or unknown key `{0}`")]
    ValidationError(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FixedN,
    VaryingN,
    AlgebraCheck,
    SkorohodCheck,
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed-n" => Ok(Mode::FixedN),
            "varying-n" => Ok(Mode::VaryingN),
            "algebra-check" => Ok(Mode::AlgebraCheck),
            "skorohod-check" => Ok(Mode::SkorohodCheck),
            _ => Err(ConfigError::ValidationError("mode".into())),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::FixedN => "fixed-n",
            Mode::VaryingN => "varying-n",
            Mode::AlgebraCheck => "algebra-check",
            Mode::SkorohodCheck => "skorohod-check",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassConfig {
    pub spec: ClassSpec,
    pub field: ClassField,
}

impl Default for ClassConfig {
    fn default() -> Self {
        Self {
            spec: ClassSpec::new(Family::Exponential, BatchLaw::unit(), Law::exponential(1.0)),
            field: ClassField::Constant {
                lambda: 1.0,
                alpha2: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub reps: usize,
    pub t_star: f64,
    pub output_dir: PathBuf,
    /// Qubit count of a fixed-n experiment.
    pub n: usize,
    pub n_ladder: Vec<usize>,
    pub r_ladder: Vec<f64>,
    pub theta: f64,
    /// Drift per level; `theta (1 - 2^-k)` when absent.
    pub theta_k: Option<Vec<f64>>,
    pub oracle_reps: usize,
    pub oracle_steps: usize,
    pub grid_per_unit: f64,
    pub emit_paths: bool,
    pub paths_max_reps: usize,
    pub cap_rho0: f64,
    pub cap_levels: usize,
    /// Polar angles and phase of the cap center; zeros when empty.
    pub center: Vec<f64>,
    pub limit_point: Vec<f64>,
    pub classes: Vec<ClassConfig>,
}

impl ExperimentConfig {
    /// Defaults for every key except `mode` and `seed`.
    pub fn with_defaults(mode: Mode, seed: u64) -> Self {
        Self {
            mode,
            seed,
            reps: 2000,
            t_star: 1.0,
            output_dir: PathBuf::from("out"),
            n: 1,
            n_ladder: vec![1, 2, 3, 4],
            r_ladder: vec![16.0, 64.0, 256.0],
            theta: -1.0,
            theta_k: None,
            oracle_reps: 20_000,
            oracle_steps: 4096,
            grid_per_unit: 64.0,
            emit_paths: false,
            paths_max_reps: 5,
            cap_rho0: 0.2,
            cap_levels: 3,
            center: Vec::new(),
            limit_point: vec![FRAC_PI_4; 32],
            classes: vec![ClassConfig::default()],
        }
    }

    /// Number of ladder levels of the configured mode.
    pub fn levels(&self) -> usize {
        match self.mode {
            Mode::VaryingN => self.n_ladder.len(),
            _ => self.cap_levels,
        }
    }

    pub fn theta_sequence(&self) -> Vec<f64> {
        self.theta_k
            .clone()
            .unwrap_or_else(|| crate::fields::default_theta_sequence(self.theta, self.levels()))
    }

    pub fn specs(&self) -> Vec<ClassSpec> {
        self.classes.iter().map(|c| c.spec.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |k: &str| Err(ConfigError::ValidationError(k.into()));
        if self.reps == 0 {
            return bad("reps");
        }
        if !(self.t_star.is_finite() && self.t_star > 0.0) {
            return bad("t_star");
        }
        if !(1..=crate::qubit::MAX_QUBITS).contains(&self.n) {
            return bad("n");
        }
        if self.n_ladder.is_empty()
            || self.n_ladder[0] == 0
            || self.n_ladder.windows(2).any(|w| w[1] <= w[0])
            || *self.n_ladder.last().expect("nonempty") > crate::qubit::MAX_QUBITS
        {
            return bad("n_ladder");
        }
        if self.r_ladder.is_empty()
            || self.r_ladder.iter().any(|r| !(r.is_finite() && *r >= 1.0))
            || self.r_ladder.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("r_ladder");
        }
        if !self.theta.is_finite() {
            return bad("theta");
        }
        if let Some(tk) = &self.theta_k {
            if tk.len() != self.levels() || tk.iter().any(|t| !t.is_finite()) {
                return bad("theta_k");
            }
        }
        if self.oracle_reps == 0 {
            return bad("oracle_reps");
        }
        if self.oracle_steps < crate::limits::MIN_ORACLE_STEPS {
            return bad("oracle_steps");
        }
        if !(self.grid_per_unit.is_finite() && self.grid_per_unit > 0.0) {
            return bad("grid_per_unit");
        }
        if !(self.cap_rho0 > 0.0 && self.cap_rho0 <= FRAC_PI_4) {
            return bad("cap.rho0");
        }
        if self.cap_levels == 0 {
            return bad("cap.levels");
        }
        if !self.center.is_empty() && self.center.len() != 1 << self.n {
            return bad("center.angles");
        }
        if self
            .center
            .iter()
            .chain(&self.limit_point)
            .any(|a| !a.is_finite())
        {
            return bad("center.angles");
        }
        if self.classes.is_empty() {
            return bad("class");
        }
        Ok(())
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

fn check_keys(t: &Table, prefix: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            let key = if prefix.is_empty() {
                k.clone()
            } else {
                format!("{prefix}.{k}")
            };
            return Err(ConfigError::ValidationError(key));
        }
    }
    Ok(())
}

fn invalid(key: &str) -> ConfigError {
    ConfigError::ValidationError(key.into())
}

fn as_f64(v: &Value, key: &str) -> Result<f64, ConfigError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(key)),
    }
}

fn as_u64(v: &Value, key: &str) -> Result<u64, ConfigError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(invalid(key)),
    }
}

fn as_str<'a>(v: &'a Value, key: &str) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| invalid(key))
}

fn as_table<'a>(v: &'a Value, key: &str) -> Result<&'a Table, ConfigError> {
    v.as_table().ok_or_else(|| invalid(key))
}

fn f64_list(v: &Value, key: &str) -> Result<Vec<f64>, ConfigError> {
    v.as_array()
        .ok_or_else(|| invalid(key))?
        .iter()
        .map(|x| as_f64(x, key))
        .collect()
}

fn opt_f64(t: &Table, name: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
    t.get(name).map_or(Ok(default), |v| as_f64(v, key))
}

fn parse_class(v: &Value, idx: usize) -> Result<ClassConfig, ConfigError> {
    let p = format!("class[{idx}]");
    let t = as_table(v, &p)?;
    check_keys(t, &p, &["inter_arrival", "batch", "packet", "field"])?;
    let mut out = ClassConfig::default();
    if let Some(v) = t.get("inter_arrival") {
        let key = format!("{p}.inter_arrival");
        out.spec.inter_family = as_str(v, &key)?.parse().map_err(|_| invalid(&key))?;
    }
    if let Some(v) = t.get("batch") {
        let key = format!("{p}.batch");
        let b = as_table(v, &key)?;
        check_keys(b, &key, &["family", "mean"])?;
        let family = b
            .get("family")
            .map_or(Ok("deterministic"), |v| as_str(v, &format!("{key}.family")))?;
        let mean = opt_f64(b, "mean", &format!("{key}.mean"), 1.0)?;
        out.spec.batch = BatchLaw::new(family, mean).map_err(|_| invalid(&key))?;
    }
    if let Some(v) = t.get("packet") {
        let key = format!("{p}.packet");
        let b = as_table(v, &key)?;
        check_keys(b, &key, &["family", "mean", "scv"])?;
        let fk = format!("{key}.family");
        let family: Family = match b.get("family") {
            Some(v) => as_str(v, &fk)?.parse().map_err(|_| invalid(&fk))?,
            None => Family::Exponential,
        };
        let default_scv = match family {
            Family::Deterministic => 0.0,
            _ => 1.0,
        };
        let mean = opt_f64(b, "mean", &format!("{key}.mean"), 1.0)?;
        let scv = opt_f64(b, "scv", &format!("{key}.scv"), default_scv)?;
        out.spec.packet = Law::new(family, mean, scv).map_err(|_| invalid(&key))?;
    }
    if let Some(v) = t.get("field") {
        let key = format!("{p}.field");
        let f = as_table(v, &key)?;
        let family = f
            .get("family")
            .map_or(Ok("constant"), |v| as_str(v, &format!("{key}.family")))?;
        let alpha2 = opt_f64(f, "alpha2", &format!("{key}.alpha2"), 1.0)?;
        if !(alpha2.is_finite() && alpha2 > 0.0) {
            return Err(invalid(&format!("{key}.alpha2")));
        }
        out.field = match family {
            "constant" => {
                check_keys(f, &key, &["family", "lambda", "alpha2"])?;
                let lambda = opt_f64(f, "lambda", &format!("{key}.lambda"), 1.0)?;
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(invalid(&format!("{key}.lambda")));
                }
                ClassField::Constant { lambda, alpha2 }
            }
            "affine-in-angles" => {
                check_keys(f, &key, &["family", "base", "slopes", "alpha2"])?;
                let base = opt_f64(f, "base", &format!("{key}.base"), 1.0)?;
                let slopes = match f.get("slopes") {
                    Some(v) => f64_list(v, &format!("{key}.slopes"))?,
                    None => Vec::new(),
                };
                if !base.is_finite() || slopes.iter().any(|s| !s.is_finite()) {
                    return Err(invalid(&key));
                }
                ClassField::AffineInAngles {
                    base,
                    slopes,
                    alpha2,
                }
            }
            _ => return Err(invalid(&format!("{key}.family"))),
        };
    }
    Ok(out)
}

/// Parses and validates a configuration document.
pub fn parse_config(src: &str) -> Result<ExperimentConfig, ConfigError> {
    let t: Table = src
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::ParseError {
            line: e.span().map_or(0, |s| line_of(src, s.start)),
            msg: e.message().to_string(),
        })?;
    check_keys(
        &t,
        "",
        &[
            "mode",
            "seed",
            "reps",
            "t_star",
            "output_dir",
            "n",
            "n_ladder",
            "r_ladder",
            "theta",
            "theta_k",
            "oracle_reps",
            "oracle_steps",
            "grid_per_unit",
            "emit_paths",
            "paths_max_reps",
            "cap",
            "center",
            "limit_point",
            "class",
        ],
    )?;
    let mode: Mode = as_str(t.get("mode").ok_or_else(|| invalid("mode"))?, "mode")?.parse()?;
    let seed = as_u64(t.get("seed").ok_or_else(|| invalid("seed"))?, "seed")?;
    let mut c = ExperimentConfig::with_defaults(mode, seed);
    for (k, v) in &t {
        match k.as_str() {
            "reps" => c.reps = as_u64(v, k)? as usize,
            "t_star" => c.t_star = as_f64(v, k)?,
            "output_dir" => c.output_dir = PathBuf::from(as_str(v, k)?),
            "n" => c.n = as_u64(v, k)? as usize,
            "n_ladder" => {
                c.n_ladder = v
                    .as_array()
                    .ok_or_else(|| invalid(k))?
                    .iter()
                    .map(|x| as_u64(x, k).map(|n| n as usize))
                    .collect::<Result<_, _>>()?
            }
            "r_ladder" => c.r_ladder = f64_list(v, k)?,
            "theta" => c.theta = as_f64(v, k)?,
            "theta_k" => c.theta_k = Some(f64_list(v, k)?),
            "oracle_reps" => c.oracle_reps = as_u64(v, k)? as usize,
            "oracle_steps" => c.oracle_steps = as_u64(v, k)? as usize,
            "grid_per_unit" => c.grid_per_unit = as_f64(v, k)?,
            "emit_paths" => c.emit_paths = v.as_bool().ok_or_else(|| invalid(k))?,
            "paths_max_reps" => c.paths_max_reps = as_u64(v, k)? as usize,
            "cap" => {
                let cap = as_table(v, k)?;
                check_keys(cap, k, &["rho0", "levels"])?;
                c.cap_rho0 = opt_f64(cap, "rho0", "cap.rho0", c.cap_rho0)?;
                if let Some(l) = cap.get("levels") {
                    c.cap_levels = as_u64(l, "cap.levels")? as usize;
                }
            }
            "center" | "limit_point" => {
                let tab = as_table(v, k)?;
                check_keys(tab, k, &["angles"])?;
                let key = format!("{k}.angles");
                let angles = f64_list(tab.get("angles").ok_or_else(|| invalid(&key))?, &key)?;
                if k == "center" {
                    c.center = angles;
                } else {
                    c.limit_point = angles;
                }
            }
            "class" => {
                c.classes = v
                    .as_array()
                    .ok_or_else(|| invalid(k))?
                    .iter()
                    .enumerate()
                    .map(|(i, x)| parse_class(x, i))
                    .collect::<Result<_, _>>()?
            }
            _ => {}
        }
    }
    c.validate()?;
    Ok(c)
}
