//! Sphere geometry, per-class rate fields and heavy-traffic ladders.
//!
//! A point of level `n` uses the same `2^n` angles as a qubit state and is
//! embedded in `R^{2^n + 1}` through its amplitudes, the last complex
//! amplitude contributing two real coordinates.

use crate::engine::{ClassParams, ClassSpec, EngineError};
use crate::qubit::{from_angles, QubitError, SphericalAngles};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid cap radius {0}")]
    InvalidRadius(f64),
    #[error("cap ladder length must be at least 1")]
    EmptyLadder,
    #[error("infeasible service rate {value} for class {class} at r = {r}, level {level}")]
    InfeasibleRates {
        class: usize,
        r: f64,
        level: usize,
        value: f64,
    },
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error(transparent)]
    Qubit(#[from] QubitError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    angles: SphericalAngles,
}

impl SpherePoint {
    pub fn new(angles: SphericalAngles) -> Self {
        Self { angles }
    }

    pub fn from_theta(n: usize, theta: Vec<f64>) -> Result<Self, FieldError> {
        Ok(Self {
            angles: SphericalAngles::new(n, theta)?,
        })
    }

    pub fn n(&self) -> usize {
        self.angles.n()
    }

    pub fn theta(&self) -> &[f64] {
        self.angles.theta()
    }

    pub fn angles(&self) -> &SphericalAngles {
        &self.angles
    }

    /// Unit vector in `R^{2^n + 1}`.
    pub fn embed(&self) -> Vec<f64> {
        let s = from_angles(&self.angles);
        let amps = s.amplitudes();
        let d = amps.len();
        let mut x: Vec<f64> = amps[..d - 1].iter().map(|z| z.re).collect();
        x.push(amps[d - 1].re);
        x.push(amps[d - 1].im);
        x
    }

    /// Inverse of [`SpherePoint::embed`]; polar angles land in `[0, pi]`,
    /// the phase in `[0, 2 pi)`.
    pub fn from_embedding(n: usize, x: &[f64]) -> Result<Self, FieldError> {
        let d = 1usize << n;
        if x.len() != d + 1 {
            return Err(QubitError::LengthMismatch {
                expected: d + 1,
                got: x.len(),
            }
            .into());
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(QubitError::ZeroVector.into());
        }
        let mut tail = vec![0.0f64; d + 2];
        for k in (0..=d).rev() {
            tail[k] = tail[k + 1].hypot(x[k] / norm);
        }
        let mut theta = vec![0.0; d];
        for k in 0..d - 1 {
            theta[k] = tail[k + 1].atan2(x[k] / norm);
        }
        let phase = x[d].atan2(x[d - 1]).rem_euclid(TAU);
        theta[d - 1] = if phase >= TAU { 0.0 } else { phase };
        Self::from_theta(n, theta)
    }
}

pub fn geodesic_distance(p: &SpherePoint, q: &SpherePoint) -> f64 {
    let dot: f64 = p.embed().iter().zip(q.embed()).map(|(a, b)| a * b).sum();
    dot.clamp(-1.0, 1.0).acos()
}

/// Move `step` radians along a uniformly chosen great circle.
pub fn geodesic_walk_step<R: Rng + ?Sized>(p: &SpherePoint, step: f64, rng: &mut R) -> SpherePoint {
    if !(step > 0.0) {
        return p.clone();
    }
    let x = p.embed();
    loop {
        let g: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(rng)).collect();
        let along: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
        let u: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - along * b).collect();
        let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if un < 1e-12 {
            continue;
        }
        let (s, c) = step.sin_cos();
        let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| c * a + s * b / un).collect();
        return SpherePoint::from_embedding(p.n(), &y).expect("unit vector of the right length");
    }
}

/// Geodesic cap on the `2^n`-sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Cap {
    pub center: SpherePoint,
    pub radius: f64,
    pub area: f64,
    /// Natural log of the area; stays finite where `area` underflows.
    pub log_area: f64,
}

impl Cap {
    pub fn new(center: SpherePoint, radius: f64) -> Result<Self, FieldError> {
        if !(radius.is_finite() && radius > 0.0 && radius <= PI) {
            return Err(FieldError::InvalidRadius(radius));
        }
        let dim = 1usize << center.n();
        let log_area = log_cap_area(dim, radius);
        Ok(Self {
            center,
            radius,
            area: log_area.exp(),
            log_area,
        })
    }

    pub fn contains(&self, p: &SpherePoint) -> bool {
        geodesic_distance(&self.center, p) <= self.radius + 1e-12
    }
}

/// `ln |S^m|`, from `|S^0| = 2`, `|S^1| = 2 pi`, `|S^m| = 2 pi |S^{m-2}| / (m - 1)`.
pub fn log_sphere_area(m: usize) -> f64 {
    let mut a = if m.is_multiple_of(2) {
        2f64.ln()
    } else {
        TAU.ln()
    };
    let mut k = if m.is_multiple_of(2) { 0 } else { 1 };
    while k < m {
        k += 2;
        a += TAU.ln() - ((k - 1) as f64).ln();
    }
    a
}

/// `ln` of the area of a cap of radius `rho` on `S^dim`:
/// `|S^{dim-1}| * int_0^rho sin^{dim-1}(t) dt`, Simpson's rule with the
/// integrand scaled by `sin^{dim-1}(rho)` (or its peak) to avoid underflow.
pub fn log_cap_area(dim: usize, rho: f64) -> f64 {
    let m = (dim - 1) as f64;
    let peak = rho.min(PI / 2.0).sin().ln();
    let f = |t: f64| {
        let s = t.sin();
        if s <= 0.0 {
            0.0
        } else {
            (m * (s.ln() - peak)).exp()
        }
    };
    let n = 2000;
    let h = rho / n as f64;
    let mut sum = f(0.0) + f(rho);
    for i in 1..n {
        sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    log_sphere_area(dim - 1) + m * peak + (sum * h / 3.0).ln()
}

/// Caps of radii `rho0 * 2^{-(k-1)}`, `k = 1..=levels`.
pub fn cap_ladder(center: &SpherePoint, rho0: f64, levels: usize) -> Result<Vec<Cap>, FieldError> {
    if !(rho0 > 0.0 && rho0 <= FRAC_PI_4) {
        return Err(FieldError::InvalidRadius(rho0));
    }
    if levels == 0 {
        return Err(FieldError::EmptyLadder);
    }
    (0..levels)
        .map(|k| Cap::new(center.clone(), rho0 * 0.5f64.powi(k as i32)))
        .collect()
}

/// Rate family of a single class.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassField {
    Constant {
        lambda: f64,
        alpha2: f64,
    },
    /// `lambda(x) = max(0, base + sum_i slopes[i] * theta_i(x))`.
    AffineInAngles {
        base: f64,
        slopes: Vec<f64>,
        alpha2: f64,
    },
}

impl ClassField {
    fn validate(&self) -> Result<(), FieldError> {
        let (ok, a2) = match self {
            ClassField::Constant { lambda, alpha2 } => {
                (lambda.is_finite() && *lambda >= 0.0, *alpha2)
            }
            ClassField::AffineInAngles {
                base,
                slopes,
                alpha2,
            } => (
                base.is_finite() && slopes.iter().all(|s| s.is_finite()),
                *alpha2,
            ),
        };
        if !ok {
            return Err(FieldError::InvalidField(format!("{self:?}")));
        }
        if !(a2.is_finite() && a2 > 0.0) {
            return Err(FieldError::InvalidField(format!(
                "alpha2 must be positive, got {a2}"
            )));
        }
        Ok(())
    }

    /// Angles missing from `theta` count as zero.
    pub fn eval_angles(&self, theta: &[f64]) -> (f64, f64) {
        match self {
            ClassField::Constant { lambda, alpha2 } => (*lambda, *alpha2),
            ClassField::AffineInAngles {
                base,
                slopes,
                alpha2,
            } => {
                let s: f64 = slopes.iter().zip(theta).map(|(a, t)| a * t).sum();
                ((base + s).max(0.0), *alpha2)
            }
        }
    }

    /// Lipschitz constant for the max-angle distance.
    pub fn lipschitz(&self) -> f64 {
        match self {
            ClassField::Constant { .. } => 0.0,
            ClassField::AffineInAngles { slopes, .. } => slopes.iter().map(|s| s.abs()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateField {
    classes: Vec<ClassField>,
}

impl RateField {
    pub fn new(classes: Vec<ClassField>) -> Result<Self, FieldError> {
        if classes.is_empty() {
            return Err(FieldError::InvalidField("no classes".into()));
        }
        for c in &classes {
            c.validate()?;
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, j: usize) -> &ClassField {
        &self.classes[j]
    }

    /// `(lambda_j(x), alpha_j^2(x))`.
    pub fn eval(&self, j: usize, p: &SpherePoint) -> (f64, f64) {
        self.classes[j].eval_angles(p.theta())
    }

    pub fn lipschitz(&self) -> f64 {
        self.classes
            .iter()
            .map(ClassField::lipschitz)
            .fold(0.0, f64::max)
    }
}

/// Field value at the cap center.
pub fn rate_at(field: &RateField, cap: &Cap, j: usize) -> (f64, f64) {
    field.eval(j, &cap.center)
}

/// `sum_j (1/mu_j) (m_j lambda_j - Lambda_j)`.
pub fn drift_mu(classes: &[ClassSpec], lambda: &[f64], big_lambda: &[f64]) -> f64 {
    classes
        .iter()
        .zip(lambda.iter().zip(big_lambda))
        .map(|(c, (l, bl))| (c.m() * l - bl) / c.mu())
        .sum()
}

/// `theta^k = theta (1 - 2^{-k})`, `k = 1..=levels`.
pub fn default_theta_sequence(theta: f64, levels: usize) -> Vec<f64> {
    (1..=levels)
        .map(|k| theta * (1.0 - 0.5f64.powi(k as i32)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeMode {
    FixedN,
    VaryingN,
}

impl RegimeMode {
    pub fn label(&self) -> &'static str {
        match self {
            RegimeMode::FixedN => "fixed-n",
            RegimeMode::VaryingN => "varying-n",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeEntry {
    pub r: f64,
    /// `k` for fixed-n ladders, `n` for varying-n ladders.
    pub level: usize,
    pub cap: Cap,
    pub lambda: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub big_lambda: Vec<f64>,
    /// Limit service rates `m_j lambda_j` at this level.
    pub big_lambda_limit: Vec<f64>,
    pub mu_rk: f64,
    pub theta_k: f64,
}

impl RegimeEntry {
    pub fn class_params(&self, specs: &[ClassSpec]) -> Result<Vec<ClassParams>, FieldError> {
        specs
            .iter()
            .enumerate()
            .map(|(j, s)| {
                ClassParams::new(
                    s.clone(),
                    self.lambda[j],
                    self.alpha2[j],
                    self.big_lambda[j],
                )
                .map_err(FieldError::from)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLadder {
    pub mode: RegimeMode,
    pub theta: f64,
    pub entries: Vec<RegimeEntry>,
}

impl RegimeLadder {
    /// `max |sqrt(r) mu^{rk} - theta^k|` over all entries.
    pub fn max_ladder_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| (e.r.sqrt() * e.mu_rk - e.theta_k).abs())
            .fold(0.0, f64::max)
    }

    pub fn levels(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.entries.iter().map(|e| e.level).collect();
        v.dedup();
        v
    }

    pub fn r_values(&self) -> Vec<f64> {
        let first = self.entries[0].level;
        self.entries
            .iter()
            .take_while(|e| e.level == first)
            .map(|e| e.r)
            .collect()
    }
}

fn check_r_ladder(r: &[f64]) -> Result<(), FieldError> {
    if r.is_empty() {
        return Err(FieldError::InvalidLadder("empty r ladder".into()));
    }
    if r.iter().any(|x| !(x.is_finite() && *x >= 1.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FieldError::InvalidLadder(
            "r ladder must be >= 1 and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn entry(
    field: &RateField,
    classes: &[ClassSpec],
    cap: &Cap,
    r: f64,
    level: usize,
    theta_k: f64,
) -> Result<RegimeEntry, FieldError> {
    let jn = classes.len();
    let mut lambda = Vec::with_capacity(jn);
    let mut alpha2 = Vec::with_capacity(jn);
    let mut big = Vec::with_capacity(jn);
    let mut limit = Vec::with_capacity(jn);
    for (j, c) in classes.iter().enumerate() {
        let (l, a2) = rate_at(field, cap, j);
        let bl = c.m() * l - c.mu() * theta_k / (jn as f64 * r.sqrt());
        if !(bl > 0.0) {
            return Err(FieldError::InfeasibleRates {
                class: j,
                r,
                level,
                value: bl,
            });
        }
        lambda.push(l);
        alpha2.push(a2);
        big.push(bl);
        limit.push(c.m() * l);
    }
    let mu_rk = drift_mu(classes, &lambda, &big);
    Ok(RegimeEntry {
        r,
        level,
        cap: cap.clone(),
        lambda,
        alpha2,
        big_lambda: big,
        big_lambda_limit: limit,
        mu_rk,
        theta_k,
    })
}

/// Fixed-level ladder: for each cap `k` (outer) and `r` (inner), service
/// rates are set so that `sqrt(r) mu^{rk} = theta^k` exactly, the
/// deficit split equally over classes.
pub fn build_regime_fixed_n(
    field: &RateField,
    classes: &[ClassSpec],
    theta: f64,
    theta_k: &[f64],
    r_ladder: &[f64],
    caps: &[Cap],
) -> Result<RegimeLadder, FieldError> {
    check_r_ladder(r_ladder)?;
    if caps.is_empty() {
        return Err(FieldError::EmptyLadder);
    }
    if theta_k.len() != caps.len() {
        return Err(FieldError::InvalidLadder(format!(
            "{} theta values for {} caps",
            theta_k.len(),
            caps.len()
        )));
    }
    if field.classes() != classes.len() {
        return Err(FieldError::InvalidField(
            "class count differs from field".into(),
        ));
    }
    let mut entries = Vec::with_capacity(caps.len() * r_ladder.len());
    for (k, (cap, &tk)) in caps.iter().zip(theta_k).enumerate() {
        for &r in r_ladder {
            entries.push(entry(field, classes, cap, r, k + 1, tk)?);
        }
    }
    Ok(RegimeLadder {
        mode: RegimeMode::FixedN,
        theta,
        entries,
    })
}

/// Point of the infinite-dimensional sphere given by finitely many polar
/// angles; every later angle is 0, so the amplitude sequence ends right
/// after the support.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPoint {
    angles: Vec<f64>,
}

impl LimitPoint {
    pub fn new(angles: Vec<f64>) -> Result<Self, FieldError> {
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(FieldError::InvalidField("non-finite limit angle".into()));
        }
        Ok(Self { angles })
    }

    pub fn angle(&self, i: usize) -> f64 {
        self.angles.get(i).copied().unwrap_or(0.0)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    fn amplitudes(&self, len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut prefix = 1.0;
        for i in 0..len {
            let t = self.angle(i);
            out.push(prefix * t.cos());
            prefix *= t.sin();
        }
        out
    }

    /// Level-`n` representative: the first `2^n` amplitudes, renormalized.
    pub fn truncate(&self, n: usize) -> Result<SpherePoint, FieldError> {
        let d = 1usize << n;
        let mut x = self.amplitudes(d);
        x.push(0.0);
        SpherePoint::from_embedding(n, &x)
    }
}

/// Varying-level ladder: level `n` uses the truncation of `x` to `2^n`
/// amplitudes as cap center, with radii `rho0 2^{-i}` along the ladder.
#[allow(clippy::too_many_arguments)]
pub fn build_regime_varying_n(
    point: &LimitPoint,
    field: &RateField,
    classes: &[ClassSpec],
    theta: f64,
    theta_n: &[f64],
    r_ladder: &[f64],
    n_ladder: &[usize],
    rho0: f64,
) -> Result<RegimeLadder, FieldError> {
    check_r_ladder(r_ladder)?;
    if n_ladder.is_empty() {
        return Err(FieldError::EmptyLadder);
    }
    if n_ladder.windows(2).any(|w| w[1] <= w[0]) || n_ladder[0] == 0 {
        return Err(FieldError::InvalidLadder(
            "n ladder must be positive and strictly increasing".into(),
        ));
    }
    if theta_n.len() != n_ladder.len() {
        return Err(FieldError::InvalidLadder(format!(
            "{} theta values for {} levels",
            theta_n.len(),
            n_ladder.len()
        )));
    }
    if !(rho0 > 0.0 && rho0 <= FRAC_PI_4) {
        return Err(FieldError::InvalidRadius(rho0));
    }
    if field.classes() != classes.len() {
        return Err(FieldError::InvalidField(
            "class count differs from field".into(),
        ));
    }
    let mut entries = Vec::with_capacity(n_ladder.len() * r_ladder.len());
    for (i, (&n, &tn)) in n_ladder.iter().zip(theta_n).enumerate() {
        let cap = Cap::new(point.truncate(n)?, rho0 * 0.5f64.powi(i as i32))?;
        for &r in r_ladder {
            entries.push(entry(field, classes, &cap, r, n, tn)?);
        }
    }
    Ok(RegimeLadder {
        mode: RegimeMode::VaryingN,
        theta,
        entries,
    })
}
