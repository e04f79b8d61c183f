//! Diffusion scaling, one-dimensional reflection, the reflected Brownian
//! motion oracle and the statistics used to compare simulated workloads
//! with it.

use crate::engine::{
    simulate_queues, xi, ClassParams, ClassSpec, EngineError, InitialQueue, QueuePath, SimOptions,
};
use crate::fields::{FieldError, RegimeLadder, RegimeMode};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitError {
    #[error("path horizon {horizon} is shorter than the required {needed}")]
    HorizonTooShort { horizon: f64, needed: f64 },
    #[error("sample set is empty")]
    EmptySamples,
    #[error("grids differ: {left} vs {right} points")]
    GridMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("degenerate configuration at level {level}: sigma^2 = {sigma2}")]
    DegenerateConfiguration { level: usize, sigma2: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Keeps grid points with `t / r <= t_end` and maps them to
/// `(t / r, x / sqrt(r))`.
pub fn scale_series(times: &[f64], x: &[f64], r: f64, t_end: f64) -> (Vec<f64>, Vec<f64>) {
    let s = r.sqrt();
    times
        .iter()
        .zip(x)
        .take_while(|(t, _)| **t / r <= t_end * (1.0 + 1e-12))
        .map(|(t, v)| (t / r, v / s))
        .unzip()
}

/// Diffusion-scaled processes on `[0, t_end]` in scaled time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPath {
    pub r: f64,
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    /// `(A_j(rt) - r m_j lambda_j t) / sqrt(r)`.
    pub a_hat: Vec<Vec<f64>>,
    /// `(D_j(rt) - Lambda_j B_j(rt)) / sqrt(r)`.
    pub s_hat: Vec<Vec<f64>>,
    /// `B_j(rt) / r`.
    pub b_bar: Vec<Vec<f64>>,
    pub i_hat: Vec<f64>,
}

impl ScaledPath {
    pub fn grid_step(&self) -> f64 {
        self.times.get(1).map_or(0.0, |t| t - self.times[0])
    }

    /// `sup_t |sum_j B_j(rt)/r - t|`.
    pub fn fluid_deviation(&self) -> f64 {
        (0..self.times.len())
            .map(|i| (self.b_bar.iter().map(|b| b[i]).sum::<f64>() - self.times[i]).abs())
            .fold(0.0, f64::max)
    }
}

pub fn diffusion_scale(
    path: &QueuePath,
    classes: &[ClassParams],
    r: f64,
    t_end: f64,
) -> Result<ScaledPath, LimitError> {
    if !(r >= 1.0 && r.is_finite()) {
        return Err(LimitError::InvalidParams(format!("r = {r}")));
    }
    if classes.len() != path.classes() {
        return Err(LimitError::InvalidParams(
            "class count differs from path".into(),
        ));
    }
    let needed = r * t_end;
    if path.horizon() < needed * (1.0 - 1e-12) {
        return Err(LimitError::HorizonTooShort {
            horizon: path.horizon(),
            needed,
        });
    }
    let sr = r.sqrt();
    let (times, v) = scale_series(&path.times, &path.v, r, t_end);
    let len = times.len();
    let mut a_hat = Vec::with_capacity(classes.len());
    let mut s_hat = Vec::with_capacity(classes.len());
    let mut b_bar = Vec::with_capacity(classes.len());
    for (j, c) in classes.iter().enumerate() {
        let rate = c.spec.m() * c.lambda;
        a_hat.push(
            (0..len)
                .map(|i| (path.a[j][i] as f64 - rate * path.times[i]) / sr)
                .collect(),
        );
        s_hat.push(
            (0..len)
                .map(|i| (path.d[j][i] as f64 - c.service_rate * path.b[j][i]) / sr)
                .collect(),
        );
        b_bar.push(path.b[j][..len].iter().map(|b| b / r).collect());
    }
    let rates: Vec<f64> = classes.iter().map(|c| c.service_rate).collect();
    let c = xi(&rates, &path.mu) / sr;
    let i_hat = path.idle[..len].iter().map(|x| c * x.max(0.0)).collect();
    Ok(ScaledPath {
        r,
        times,
        v,
        a_hat,
        s_hat,
        b_bar,
        i_hat,
    })
}

/// One-dimensional Skorohod map on grid samples:
/// `I_i = max(0, max_{s <= i} -x_s)`, `V = x + I`.
pub fn skorohod_reflect(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = Vec::with_capacity(x.len());
    let mut i = Vec::with_capacity(x.len());
    let mut sup = 0.0f64;
    for &xs in x {
        sup = sup.max(-xs);
        i.push(sup);
        v.push(xs + sup);
    }
    (v, i)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complementarity {
    pub residual: f64,
    pub epsilon: f64,
    pub pass: bool,
}

/// Discrete `int V dI` with the smaller endpoint value of `V` on each
/// step, against the tolerance `2 * max V * max_k (I_k - I_{k-1})`, i.e.
/// twice the largest workload times the grid resolution of `I`.
pub fn complementarity_check(v: &[f64], i: &[f64]) -> Result<Complementarity, LimitError> {
    if v.len() != i.len() {
        return Err(LimitError::GridMismatch {
            left: v.len(),
            right: i.len(),
        });
    }
    let mut residual = 0.0;
    let mut step = 0.0f64;
    for k in 1..v.len() {
        let di = i[k] - i[k - 1];
        if di != 0.0 {
            residual += v[k - 1].min(v[k]) * di;
            step = step.max(di);
        }
    }
    let vmax = v.iter().copied().fold(0.0, f64::max);
    let epsilon = 2.0 * vmax * step;
    Ok(Complementarity {
        residual,
        epsilon,
        pass: residual <= epsilon,
    })
}

/// Workload variance rate
/// `sum_j (m_j^2 lambda_j (zeta_j^2 + alpha_j^2) + Lambda_j beta_j^2) / mu_j^2`.
pub fn aggregate_variance(
    classes: &[ClassSpec],
    lambda: &[f64],
    alpha2: &[f64],
    big_lambda: &[f64],
) -> f64 {
    classes
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let ga = c.m() * c.m() * lambda[j] * (c.zeta2() + alpha2[j]);
            let gs = big_lambda[j] * c.beta2();
            (ga + gs) / (c.mu() * c.mu())
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RbmParams {
    pub theta: f64,
    pub sigma2: f64,
    pub v0: f64,
}

impl RbmParams {
    pub fn new(theta: f64, sigma2: f64, v0: f64) -> Result<Self, LimitError> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(LimitError::InvalidParams(format!("sigma^2 = {sigma2}")));
        }
        if !(v0.is_finite() && v0 >= 0.0) || !theta.is_finite() {
            return Err(LimitError::InvalidParams(format!(
                "theta = {theta}, v0 = {v0}"
            )));
        }
        Ok(Self { theta, sigma2, v0 })
    }
}

pub const MIN_ORACLE_STEPS: usize = 4096;

/// Samples of the reflected Brownian motion at time `t`, each from an
/// Euler path on `steps` points passed through [`skorohod_reflect`].
/// One base seed is drawn from `rng`; sample `i` uses its own stream.
pub fn rbm_oracle<R: Rng + ?Sized>(
    params: &RbmParams,
    t: f64,
    reps: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>, LimitError> {
    if reps == 0 {
        return Err(LimitError::InvalidParams("reps must be >= 1".into()));
    }
    if steps < MIN_ORACLE_STEPS {
        return Err(LimitError::InvalidParams(format!(
            "steps must be >= {MIN_ORACLE_STEPS}"
        )));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(LimitError::InvalidParams(format!("t = {t}")));
    }
    let base: u64 = rng.random();
    let dt = t / steps as f64;
    let drift = params.theta * dt;
    let sd = (params.sigma2 * dt).sqrt();
    let out = (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0.0; steps + 1],
            |x, i| {
                let mut g = stream_rng(base, 0, i as u64);
                x[0] = params.v0;
                for k in 1..=steps {
                    let z: f64 = StandardNormal.sample(&mut g);
                    x[k] = x[k - 1] + drift + sd * z;
                }
                let (v, _) = skorohod_reflect(x);
                v[steps]
            },
        )
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub ks: f64,
    pub ks_critical_1pct: f64,
    pub ks_pass: bool,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub compl_residual: Option<f64>,
    pub compl_pass: Option<bool>,
}

/// `1.63 sqrt((n + m) / (n m))`.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.63 * ((n + m) / (n * m)).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic; ties are stepped over together.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, LimitError> {
    if a.is_empty() || b.is_empty() {
        return Err(LimitError::EmptySamples);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 {
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

pub fn compare_distributions(a: &[f64], b: &[f64]) -> Result<ComparisonReport, LimitError> {
    let ks = ks_statistic(a, b)?;
    let crit = ks_critical_1pct(a.len(), b.len());
    let (mean_a, var_a) = moments(a);
    let (mean_b, var_b) = moments(b);
    Ok(ComparisonReport {
        ks,
        ks_critical_1pct: crit,
        ks_pass: ks <= crit,
        n_a: a.len(),
        n_b: b.len(),
        mean_a,
        mean_b,
        var_a,
        var_b,
        compl_residual: None,
        compl_pass: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentParams {
    pub reps: usize,
    pub t_star: f64,
    pub oracle_reps: usize,
    pub oracle_steps: usize,
    /// Grid points per unit of unscaled time.
    pub grid_per_unit: f64,
    pub seed: u64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            reps: 2000,
            t_star: 1.0,
            oracle_reps: 20_000,
            oracle_steps: MIN_ORACLE_STEPS,
            grid_per_unit: 64.0,
            seed: 0,
        }
    }
}

/// One `(r, level)` cell of a convergence experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub mode: &'static str,
    pub level: usize,
    pub r: f64,
    pub reps: usize,
    pub theta_k: f64,
    pub sigma2_k: f64,
    pub comparison: ComparisonReport,
    pub compl_residual_max: f64,
    pub compl_violations: usize,
    pub fluid_sup_dev: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

struct RepOutcome {
    v_end: f64,
    compl: Complementarity,
    fluid: f64,
}

/// Unscaled path of replication `rep` in the cell with stream id `stream`.
pub fn cell_path(
    classes: &[ClassParams],
    r: f64,
    p: &ExperimentParams,
    stream: u64,
    rep: u64,
) -> Result<QueuePath, LimitError> {
    let mut rng = stream_rng(p.seed, stream, rep);
    let horizon = r * p.t_star;
    Ok(simulate_queues(
        classes,
        horizon,
        1.0 / p.grid_per_unit,
        &mut rng,
        &SimOptions::default(),
    )?)
}

fn run_rep(
    classes: &[ClassParams],
    r: f64,
    p: &ExperimentParams,
    stream: u64,
    rep: u64,
) -> Result<RepOutcome, LimitError> {
    let path = cell_path(classes, r, p, stream, rep)?;
    let sp = diffusion_scale(&path, classes, r, p.t_star)?;
    let compl = complementarity_check(&sp.v, &sp.i_hat)?;
    Ok(RepOutcome {
        v_end: *sp.v.last().expect("nonempty"),
        compl,
        fluid: sp.fluid_deviation(),
    })
}

/// Stream id of a ladder cell; oracle streams use the high bit.
pub fn cell_stream(level: usize, r_index: usize) -> u64 {
    ((level as u64) << 32) | r_index as u64
}

/// For each level (outer) and `r` (inner): simulate `reps` paths, read
/// `V(r t*) / sqrt(r)`, and compare with the reflected Brownian motion
/// with drift `theta^k` and variance `sigma^2(k)`. The oracle sample of a
/// level is drawn once and shared by its `r` cells.
pub fn convergence_experiment(
    ladder: &RegimeLadder,
    specs: &[ClassSpec],
    p: &ExperimentParams,
) -> Result<Vec<CellReport>, LimitError> {
    if p.reps == 0 || p.oracle_reps == 0 {
        return Err(LimitError::InvalidParams("reps must be >= 1".into()));
    }
    if !(p.t_star > 0.0 && p.grid_per_unit > 0.0) {
        return Err(LimitError::InvalidParams(
            "t* and grid must be positive".into(),
        ));
    }
    if specs.iter().any(|s| s.initial != InitialQueue::Empty) {
        return Err(LimitError::InvalidParams(
            "convergence experiments start from empty queues".into(),
        ));
    }
    let mode = match ladder.mode {
        RegimeMode::FixedN => "fixed-n",
        RegimeMode::VaryingN => "varying-n",
    };
    let mut out = Vec::with_capacity(ladder.entries.len());
    let mut oracle: Option<(usize, f64, Vec<f64>)> = None;
    let r_values = ladder.r_values();
    for e in &ladder.entries {
        let sigma2 = aggregate_variance(specs, &e.lambda, &e.alpha2, &e.big_lambda_limit);
        if !(sigma2 > 1e-12) {
            return Err(LimitError::DegenerateConfiguration {
                level: e.level,
                sigma2,
            });
        }
        if oracle.as_ref().is_none_or(|(lvl, _, _)| *lvl != e.level) {
            let params = RbmParams::new(e.theta_k, sigma2, 0.0)?;
            let mut g = stream_rng(p.seed, (1 << 63) | e.level as u64, 0);
            let s = rbm_oracle(&params, p.t_star, p.oracle_reps, p.oracle_steps, &mut g)?;
            oracle = Some((e.level, sigma2, s));
        }
        let (_, _, oracle_samples) = oracle.as_ref().expect("set above");
        let classes = e.class_params(specs)?;
        let r_index = r_values.iter().position(|&r| r == e.r).unwrap_or(0);
        let stream = cell_stream(e.level, r_index);
        let reps: Vec<RepOutcome> = (0..p.reps as u64)
            .into_par_iter()
            .map(|rep| run_rep(&classes, e.r, p, stream, rep))
            .collect::<Result<_, _>>()?;
        let samples: Vec<f64> = reps.iter().map(|o| o.v_end).collect();
        let mut comparison = compare_distributions(&samples, oracle_samples)?;
        let compl_residual_max = reps.iter().map(|o| o.compl.residual).fold(0.0, f64::max);
        let compl_violations = reps.iter().filter(|o| !o.compl.pass).count();
        comparison.compl_residual = Some(compl_residual_max);
        comparison.compl_pass = Some(compl_violations == 0);
        let fluid_sup_dev = reps.iter().map(|o| o.fluid).sum::<f64>() / reps.len() as f64;
        out.push(CellReport {
            mode,
            level: e.level,
            r: e.r,
            reps: p.reps,
            theta_k: e.theta_k,
            sigma2_k: sigma2,
            comparison,
            compl_residual_max,
            compl_violations,
            fluid_sup_dev,
            samples,
        });
    }
    Ok(out)
}
