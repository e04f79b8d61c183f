//! Invariant suites for the sphere algebra and the reflection map.
//!
//! Each suite takes the implementation under test as a function pointer so
//! that deliberately broken variants can be shown to fail.

use crate::limits::{complementarity_check, skorohod_reflect};
use crate::qubit::{
    apply_channel, channel_gain, channel_gain_pinv, coeff_map, from_angles, inner, normalize,
    op_combine, to_angles, OpKind, QubitError, QubitState, RawAmplitudes, SphericalAngles,
};
use crate::rng::stream_rng;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, TAU};

pub type CoeffFn = fn(
    OpKind,
    &QubitState,
    &QubitState,
    &SphericalAngles,
    &SphericalAngles,
) -> Result<QubitState, QubitError>;
pub type ReflectFn = fn(&[f64]) -> (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error of the checked quantity.
    pub max_error: f64,
}

#[derive(Default)]
struct Tally {
    cases: usize,
    failures: usize,
    max_error: f64,
}

impl Tally {
    fn record(&mut self, err: f64, tol: f64) {
        self.cases += 1;
        if err.is_nan() || err > tol {
            self.failures += 1;
        }
        self.max_error = if err.is_nan() {
            f64::INFINITY
        } else {
            self.max_error.max(err)
        };
    }

    fn fail(&mut self) {
        self.record(f64::INFINITY, 0.0);
    }

    fn finish(self, name: &str) -> CheckOutcome {
        CheckOutcome {
            name: name.to_string(),
            pass: self.failures == 0 && self.cases > 0,
            cases: self.cases,
            failures: self.failures,
            max_error: self.max_error,
        }
    }
}

fn op_name(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Add => "add",
        OpKind::Sub => "sub",
        OpKind::Mul => "mul",
        OpKind::Div => "div",
    }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn uniform_angles<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SphericalAngles {
    let d = 1usize << n;
    SphericalAngles::new(n, (0..d).map(|_| rng.random_range(lo..hi)).collect())
        .expect("finite angles")
}

fn random_state<R: Rng>(rng: &mut R, n: usize) -> QubitState {
    let d = 1usize << n;
    let v = (0..d)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    normalize(&RawAmplitudes::new(n, v).expect("finite"))
        .expect("nonzero")
        .0
}

/// Unit norm of the chart on arbitrary angles, n = 1..=6.
pub fn check_normalization(seed: u64, draws: usize) -> CheckOutcome {
    let mut t = Tally::default();
    for n in 1..=6 {
        let mut rng = stream_rng(seed, 0x10, n as u64);
        for _ in 0..draws {
            let a = uniform_angles(&mut rng, n, -20.0, 20.0);
            t.record((from_angles(&a).norm_squared() - 1.0).abs(), 1e-12);
        }
    }
    t.finish("normalization")
}

/// Direct coefficient formulas against the chart image of the combined angles.
pub fn check_consistency(seed: u64, draws: usize, kind: OpKind, coeff: CoeffFn) -> CheckOutcome {
    let mut t = Tally::default();
    let mut rng = stream_rng(seed, 0x20 + kind as u64, 0);
    for i in 0..draws {
        let n = 1 + i % 4;
        let a = uniform_angles(&mut rng, n, 0.05, FRAC_PI_2 - 0.05);
        let b = uniform_angles(&mut rng, n, 0.05, FRAC_PI_2 - 0.05);
        let expected = from_angles(&op_combine(kind, &a, &b).expect("same n"));
        match coeff(kind, &from_angles(&a), &from_angles(&b), &a, &b) {
            Ok(got) => t.record(max_diff(got.amplitudes(), expected.amplitudes()), 1e-9),
            Err(_) => t.fail(),
        }
    }
    t.finish(&format!("consistency-{}", op_name(kind)))
}

/// Inverse chart after the chart on the open nominal domain, n = 1..=4.
pub fn check_round_trip(seed: u64, draws: usize) -> CheckOutcome {
    let mut t = Tally::default();
    for n in 1..=4 {
        let mut rng = stream_rng(seed, 0x30, n as u64);
        let d = 1usize << n;
        for _ in 0..draws {
            let mut theta: Vec<f64> = (0..d - 1)
                .map(|_| rng.random_range(0.05..FRAC_PI_2 - 0.05))
                .collect();
            theta.push(rng.random_range(0.05..TAU - 0.05));
            let a = SphericalAngles::new(n, theta).expect("finite");
            match to_angles(&from_angles(&a)) {
                Ok((back, None)) => {
                    let e = a
                        .theta()
                        .iter()
                        .zip(back.theta())
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    t.record(e, 1e-10);
                }
                _ => t.fail(),
            }
        }
    }
    t.finish("round-trip")
}

/// `G(phi, phi) = 1`, `<phi, psi - phi G> = 0`, `|G| <= 1` and agreement with
/// the pseudo-inverse evaluation on random unit pairs.
pub fn check_channel(seed: u64, draws: usize) -> CheckOutcome {
    let mut t = Tally::default();
    let mut rng = stream_rng(seed, 0x40, 0);
    for i in 0..draws {
        let n = 1 + i % 4;
        let phi = random_state(&mut rng, n);
        let psi = random_state(&mut rng, n);
        let self_gain = channel_gain(&phi, &phi).expect("same n").value;
        t.record((self_gain - 1.0).norm(), 1e-12);
        let proj = apply_channel(&phi, &psi).expect("same n");
        let resid: Vec<Complex64> = psi
            .amplitudes()
            .iter()
            .zip(proj.values())
            .map(|(p, q)| p - q)
            .collect();
        t.record(inner(phi.amplitudes(), &resid).norm(), 1e-10);
        let g = channel_gain(&phi, &psi).expect("same n").value;
        t.record((g.norm() - 1.0).max(0.0), 1e-12);
        let gp = channel_gain_pinv(&phi, &psi).expect("same n").value;
        t.record((g - gp).norm(), 1e-10);
    }
    t.finish("channel")
}

pub fn algebra_suite(seed: u64, draws: usize, coeff: CoeffFn) -> Vec<CheckOutcome> {
    let mut out = vec![check_normalization(seed, draws)];
    out.extend(
        OpKind::ALL
            .iter()
            .map(|&k| check_consistency(seed, draws, k, coeff)),
    );
    out.push(check_round_trip(seed, draws));
    out.push(check_channel(seed, draws));
    out
}

/// `I_i = max(0, max_{s <= i} -x_s)` by direct rescanning.
pub fn brute_force_regulator(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| x[..=i].iter().fold(0.0f64, |m, v| m.max(-v)))
        .collect()
}

/// Piecewise random walk with up to 1000 points and a few drift regimes.
pub fn random_path<R: Rng>(rng: &mut R) -> Vec<f64> {
    let len = rng.random_range(2..=1000usize);
    let pieces = rng.random_range(1..=5usize);
    let mut x = Vec::with_capacity(len);
    let mut cur: f64 = StandardNormal.sample(rng);
    let mut drift = 0.0;
    let mut scale = 1.0;
    for i in 0..len {
        if i % len.div_ceil(pieces) == 0 {
            drift = rng.random_range(-0.5..0.5);
            scale = rng.random_range(0.0..1.0);
        }
        x.push(cur);
        let z: f64 = StandardNormal.sample(rng);
        cur += drift + scale * z;
    }
    x
}

pub fn skorohod_suite(
    seed: u64,
    paths: usize,
    candidates: usize,
    reflect: ReflectFn,
) -> Vec<CheckOutcome> {
    let mut oracle = Tally::default();
    let mut constraints = Tally::default();
    let mut compl = Tally::default();
    let mut minimal = Tally::default();
    for p in 0..paths {
        let mut rng = stream_rng(seed, 0x50, p as u64);
        let x = random_path(&mut rng);
        let (v, i) = reflect(&x);
        if v.len() != x.len() || i.len() != x.len() {
            oracle.fail();
            constraints.fail();
            compl.fail();
            minimal.fail();
            continue;
        }
        let bf = brute_force_regulator(&x);
        oracle.record(if bf == i { 0.0 } else { 1.0 }, 0.0);

        let neg = v.iter().map(|&y| (-y).max(0.0)).fold(0.0, f64::max);
        let drop = i
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max);
        let sum = x
            .iter()
            .zip(&i)
            .zip(&v)
            .map(|((a, b), c)| if a + b == *c { 0.0 } else { 1.0 })
            .fold(0.0, f64::max);
        constraints.record(neg.max(drop).max(sum).max((-i[0]).max(0.0)), 0.0);

        match complementarity_check(&v, &i) {
            Ok(c) => compl.record(c.residual.abs(), 0.0),
            Err(_) => compl.fail(),
        }

        for _ in 0..candidates {
            let mut cand = Vec::with_capacity(x.len());
            let mut acc: f64 = rng.random_range(0.0..1.0);
            for _ in 0..x.len() {
                if rng.random_bool(0.1) {
                    acc += rng.random_range(0.0..1.0);
                }
                cand.push(acc);
            }
            let shift = x
                .iter()
                .zip(&cand)
                .map(|(a, c)| -(a + c))
                .fold(0.0, f64::max);
            for c in cand.iter_mut() {
                *c += shift;
            }
            // rounding in the shift can leave a point infeasible by an ulp
            for (c, a) in cand.iter_mut().zip(&x) {
                while *a + *c < 0.0 {
                    *c = c.next_up();
                }
            }
            let mut run = 0.0f64;
            for c in cand.iter_mut() {
                run = run.max(*c);
                *c = run;
            }
            let excess = i.iter().zip(&cand).map(|(a, c)| a - c).fold(0.0, f64::max);
            minimal.record(excess, 0.0);
        }
    }
    vec![
        oracle.finish("skorohod-oracle"),
        constraints.finish("skorohod-constraints"),
        compl.finish("skorohod-complementarity"),
        minimal.finish("skorohod-minimality"),
    ]
}

/// Both suites on the shipped implementations.
pub fn run_selfcheck(seed: u64) -> Vec<CheckOutcome> {
    let mut out = algebra_suite(seed, 1000, coeff_map);
    out.extend(skorohod_suite(seed, 200, 100, skorohod_reflect));
    out
}
