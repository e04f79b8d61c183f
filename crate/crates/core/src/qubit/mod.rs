//! n-qubit states as points on the unit sphere.
//!
//! A state of `n` qubits is a unit-norm complex vector of length `d = 2^n`.
//! The hyperspherical chart used here has `d` angles: the first `d - 1`
//! are polar angles producing real nonnegative amplitudes on the nominal
//! domain, and the last one is the phase carried by the final amplitude.
//!
//! ```text
//! psi_1 = cos t_1
//! psi_k = sin t_1 ... sin t_{k-1} cos t_k           (1 < k < d)
//! psi_d = e^{i t_d} sin t_1 ... sin t_{d-1}
//! ```

mod channel;
mod coeff;
mod format;

use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

pub use channel::{apply_channel, channel_gain, channel_gain_pinv, ChannelGain};
pub use coeff::coeff_map;
pub use format::{parse_state, write_state};

/// Hard tolerance on the unit-norm constraint.
pub const NORM_TOL: f64 = 1e-12;
/// Guard applied to every denominator of the coefficient formulas.
pub const SINGULAR_TOL: f64 = 1e-6;
/// Largest supported qubit count (2^20 amplitudes).
pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QubitError {
    #[error("qubit count must be in 1..={MAX_QUBITS}, got {0}")]
    InvalidQubitCount(usize),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("qubit counts differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("bit {index} is {value}, expected 0 or 1")]
    InvalidBit { index: usize, value: u8 },
    #[error("amplitudes are not unit norm (|sum - 1| = {deviation:e})")]
    NotNormalized { deviation: f64 },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("amplitude {index} is outside the chart (negative or complex)")]
    DomainError { index: usize },
    #[error("singular denominator at index {index}")]
    SingularDenominator { index: usize },
    #[error("division by near-zero amplitude at index {index}")]
    DivisionByZeroAmplitude { index: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn dim_for(n: usize) -> Result<usize, QubitError> {
    if n == 0 || n > MAX_QUBITS {
        return Err(QubitError::InvalidQubitCount(n));
    }
    Ok(1usize << n)
}

fn check_len(n: usize, got: usize) -> Result<(), QubitError> {
    let expected = dim_for(n)?;
    if got != expected {
        return Err(QubitError::LengthMismatch { expected, got });
    }
    Ok(())
}

fn same_n(a: usize, b: usize) -> Result<(), QubitError> {
    if a != b {
        return Err(QubitError::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

/// Computational-basis label `(j_1, ..., j_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new(bits: Vec<u8>) -> Result<Self, QubitError> {
        if bits.is_empty() || bits.len() > 63 {
            return Err(QubitError::InvalidQubitCount(bits.len()));
        }
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(QubitError::InvalidBit { index, value });
        }
        Ok(Self { bits })
    }

    /// Inverse of [`reindex`]: `j_l` is bit `l - 1` of `h`.
    pub fn from_index(n: usize, h: u64) -> Result<Self, QubitError> {
        if n == 0 || n > 63 || h >> n != 0 {
            return Err(QubitError::InvalidQubitCount(n));
        }
        Ok(Self {
            bits: (0..n).map(|l| ((h >> l) & 1) as u8).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }
}

/// `h = 2^{n-1} j_n + ... + 2 j_2 + j_1`.
pub fn reindex(bits: &BitString) -> u64 {
    bits.bits
        .iter()
        .rev()
        .fold(0u64, |h, &b| (h << 1) | b as u64)
}

/// Unit-norm amplitude vector of length `2^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitState {
    n: usize,
    amps: Vec<Complex64>,
}

impl QubitState {
    pub fn new(n: usize, amps: Vec<Complex64>) -> Result<Self, QubitError> {
        check_len(n, amps.len())?;
        if let Some(index) = amps
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(QubitError::NonFinite { index });
        }
        let deviation = (norm_sq(&amps) - 1.0).abs();
        if deviation >= NORM_TOL {
            return Err(QubitError::NotNormalized { deviation });
        }
        Ok(Self { n, amps })
    }

    pub(crate) fn new_unchecked(n: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n);
        Self { n, amps }
    }

    /// Basis state `|h>`.
    pub fn basis(n: usize, h: usize) -> Result<Self, QubitError> {
        let d = dim_for(n)?;
        if h >= d {
            return Err(QubitError::LengthMismatch {
                expected: d,
                got: h + 1,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); d];
        amps[h] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, bits: &BitString) -> Option<Complex64> {
        (bits.n() == self.n).then(|| self.amps[reindex(bits) as usize])
    }

    pub fn norm_squared(&self) -> f64 {
        norm_sq(&self.amps)
    }

    pub fn to_raw(&self) -> RawAmplitudes {
        RawAmplitudes {
            n: self.n,
            values: self.amps.clone(),
        }
    }
}

/// Chart coordinates of a state; entries may leave the nominal domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalAngles {
    n: usize,
    theta: Vec<f64>,
}

impl SphericalAngles {
    pub fn new(n: usize, theta: Vec<f64>) -> Result<Self, QubitError> {
        check_len(n, theta.len())?;
        if let Some(index) = theta.iter().position(|t| !t.is_finite()) {
            return Err(QubitError::NonFinite { index });
        }
        Ok(Self { n, theta })
    }

    pub fn zeros(n: usize) -> Result<Self, QubitError> {
        let d = dim_for(n)?;
        Ok(Self {
            n,
            theta: vec![0.0; d],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phase(&self) -> f64 {
        self.theta[self.theta.len() - 1]
    }
}

/// Amplitudes with no norm constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct RawAmplitudes {
    n: usize,
    values: Vec<Complex64>,
}

impl RawAmplitudes {
    pub fn new(n: usize, values: Vec<Complex64>) -> Result<Self, QubitError> {
        check_len(n, values.len())?;
        if let Some(index) = values
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(QubitError::NonFinite { index });
        }
        Ok(Self { n, values })
    }

    pub fn from_real(n: usize, values: &[f64]) -> Result<Self, QubitError> {
        Self::new(n, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div];
}

/// Non-fatal notice that the inverse chart hit a vanishing sine prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegenerateWarning {
    /// 1-based index of the first angle fixed by convention.
    pub from_index: usize,
}

fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn from_angles(angles: &SphericalAngles) -> QubitState {
    let d = angles.theta.len();
    let mut amps = Vec::with_capacity(d);
    let mut prefix = 1.0;
    for &t in &angles.theta[..d - 1] {
        amps.push(Complex64::new(prefix * t.cos(), 0.0));
        prefix *= t.sin();
    }
    amps.push(Complex64::from_polar(prefix, angles.theta[d - 1]));
    QubitState { n: angles.n, amps }
}

/// Inverse chart on the nominal domain.
///
/// Polar angles are recovered as `atan2(tail, psi_k)`, where `tail` is the
/// norm of the amplitudes after `k`; this equals the sequential arccos
/// inversion but stays accurate near the poles. When the remaining norm
/// drops below `1e-12`, the remaining angles are set to 0 and a warning is
/// returned.
pub fn to_angles(
    state: &QubitState,
) -> Result<(SphericalAngles, Option<DegenerateWarning>), QubitError> {
    let d = state.amps.len();
    for (index, z) in state.amps[..d - 1].iter().enumerate() {
        if z.im.abs() > NORM_TOL || z.re < -NORM_TOL {
            return Err(QubitError::DomainError { index: index + 1 });
        }
    }
    // suffix[k] = sqrt(sum_{j >= k} |psi_j|^2)
    let mut suffix = vec![0.0f64; d + 1];
    for k in (0..d).rev() {
        suffix[k] = (suffix[k + 1].powi(2) + state.amps[k].norm_sqr()).sqrt();
    }
    let mut theta = vec![0.0; d];
    for k in 0..d {
        if suffix[k] < NORM_TOL {
            let warning = DegenerateWarning { from_index: k + 1 };
            return Ok((SphericalAngles { n: state.n, theta }, Some(warning)));
        }
        if k < d - 1 {
            theta[k] = suffix[k + 1].atan2(state.amps[k].re.max(0.0));
        } else {
            theta[k] = state.amps[k].arg().rem_euclid(TAU);
            if theta[k] >= TAU {
                theta[k] = 0.0;
            }
        }
    }
    Ok((SphericalAngles { n: state.n, theta }, None))
}

pub fn norm_squared(raw: &RawAmplitudes) -> f64 {
    norm_sq(&raw.values)
}

/// Returns the normalized state and the constant `||raw||`.
pub fn normalize(raw: &RawAmplitudes) -> Result<(QubitState, f64), QubitError> {
    let ns = norm_squared(raw);
    if ns <= 1e-24 {
        return Err(QubitError::ZeroVector);
    }
    let c = ns.sqrt();
    let amps = raw.values.iter().map(|z| z / c).collect();
    Ok((QubitState { n: raw.n, amps }, c))
}

pub fn op_combine(
    kind: OpKind,
    phi: &SphericalAngles,
    psi: &SphericalAngles,
) -> Result<SphericalAngles, QubitError> {
    same_n(phi.n, psi.n)?;
    let f: fn(f64, f64) -> f64 = match kind {
        OpKind::Add => |a, b| (a + b) / 2.0,
        OpKind::Sub => |a, b| (a - b) / 2.0,
        OpKind::Mul => |a, b| a + b,
        OpKind::Div => |a, b| a - b,
    };
    let theta = phi
        .theta
        .iter()
        .zip(&psi.theta)
        .map(|(&a, &b)| f(a, b))
        .collect();
    Ok(SphericalAngles { n: phi.n, theta })
}

/// Component-wise arithmetic on amplitudes; the result is generally off the sphere.
pub fn elementwise_combine(
    kind: OpKind,
    phi: &QubitState,
    psi: &QubitState,
) -> Result<RawAmplitudes, QubitError> {
    same_n(phi.n, psi.n)?;
    if kind == OpKind::Div {
        if let Some(index) = psi.amps.iter().position(|z| z.norm() < NORM_TOL) {
            return Err(QubitError::DivisionByZeroAmplitude { index: index + 1 });
        }
    }
    let values = phi
        .amps
        .iter()
        .zip(&psi.amps)
        .map(|(&a, &b)| match kind {
            OpKind::Add => a + b,
            OpKind::Sub => a - b,
            OpKind::Mul => a * b,
            OpKind::Div => a / b,
        })
        .collect();
    Ok(RawAmplitudes { n: phi.n, values })
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `||a + b||` via `||a||^2 + ||b||^2 + 2 Re<a,b>`.
pub fn norm_of_sum(a: &RawAmplitudes, b: &RawAmplitudes) -> Result<f64, QubitError> {
    same_n(a.n, b.n)?;
    let s = norm_squared(a) + norm_squared(b) + 2.0 * inner(&a.values, &b.values).re;
    Ok(s.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn angles(n: usize, t: &[f64]) -> SphericalAngles {
        SphericalAngles::new(n, t.to_vec()).unwrap()
    }

    fn state(n: usize, v: &[Complex64]) -> QubitState {
        QubitState::new(n, v.to_vec()).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn reindex_examples() {
        let b = |v: &[u8]| BitString::new(v.to_vec()).unwrap();
        assert_eq!(reindex(&b(&[0, 0, 0])), 0);
        assert_eq!(reindex(&b(&[1, 0, 1])), 5);
        assert_eq!(reindex(&b(&[1])), 1);
        assert_eq!(reindex(&b(&[0, 1, 1])), 6);
    }

    #[test]
    fn bitstring_rejects_bad_input() {
        assert!(BitString::new(vec![]).is_err());
        assert_eq!(
            BitString::new(vec![0, 2]),
            Err(QubitError::InvalidBit { index: 1, value: 2 })
        );
    }

    #[test]
    fn reindex_is_bijective() {
        for n in 1..=10 {
            let d = 1u64 << n;
            let mut seen = vec![false; d as usize];
            for h in 0..d {
                let bits = BitString::from_index(n, h).unwrap();
                let back = reindex(&bits);
                assert!(back < d);
                assert!(!seen[back as usize]);
                seen[back as usize] = true;
                assert_eq!(back, h);
            }
        }
    }

    #[test]
    fn from_angles_examples() {
        let s = from_angles(&angles(1, &[0.0, 0.0]));
        assert!(close(s.amps[0], c(1.0, 0.0), 1e-15));
        assert!(close(s.amps[1], c(0.0, 0.0), 1e-15));

        let s = from_angles(&angles(1, &[FRAC_PI_3, FRAC_PI_2]));
        assert!(close(s.amps[0], c(0.5, 0.0), 1e-15));
        assert!(close(s.amps[1], c(0.0, 3f64.sqrt() / 2.0), 1e-15));

        let s = from_angles(&angles(2, &[FRAC_PI_4, FRAC_PI_4, FRAC_PI_4, 0.0]));
        let h = 0.5f64.sqrt();
        let want = [h, 0.5, 0.5 * h, 0.5 * h];
        for (z, w) in s.amps.iter().zip(want) {
            assert!(close(*z, c(w, 0.0), 1e-15));
        }
        assert!((s.norm_squared() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn to_angles_examples() {
        let (a, w) = to_angles(&state(1, &[c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(a.theta, vec![0.0, 0.0]);
        assert_eq!(w, Some(DegenerateWarning { from_index: 2 }));

        let s = from_angles(&angles(1, &[FRAC_PI_3, FRAC_PI_2]));
        let (a, w) = to_angles(&s).unwrap();
        assert!(w.is_none());
        assert!((a.theta[0] - FRAC_PI_3).abs() < 1e-15);
        assert!((a.theta[1] - FRAC_PI_2).abs() < 1e-15);

        let (a, w) = to_angles(&state(1, &[c(0.0, 0.0), c(1.0, 0.0)])).unwrap();
        assert!(w.is_none());
        assert!((a.theta[0] - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(a.theta[1], 0.0);
    }

    #[test]
    fn to_angles_rejects_off_chart() {
        let h = 0.5f64.sqrt();
        let e = to_angles(&state(1, &[c(-h, 0.0), c(h, 0.0)])).unwrap_err();
        assert_eq!(e, QubitError::DomainError { index: 1 });
        let e = to_angles(&state(1, &[c(0.0, h), c(h, 0.0)])).unwrap_err();
        assert_eq!(e, QubitError::DomainError { index: 1 });
        // a negative last amplitude is just a phase of pi
        let (a, _) = to_angles(&state(1, &[c(h, 0.0), c(-h, 0.0)])).unwrap();
        assert!((a.theta[1] - PI).abs() < 1e-15);
    }

    #[test]
    fn degenerate_tail_sets_remaining_angles_to_zero() {
        let s = from_angles(&angles(2, &[0.3, 0.0, 1.0, 2.0]));
        let (a, w) = to_angles(&s).unwrap();
        assert_eq!(w, Some(DegenerateWarning { from_index: 3 }));
        assert!((a.theta[0] - 0.3).abs() < 1e-15);
        assert_eq!(&a.theta[1..], &[0.0, 0.0, 0.0]);
        let back = from_angles(&a);
        for (x, y) in back.amps.iter().zip(&s.amps) {
            assert!(close(*x, *y, 1e-15));
        }
    }

    #[test]
    fn norm_squared_examples() {
        let n = 3;
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        assert_eq!(norm_squared(&RawAmplitudes::from_real(n, &v).unwrap()), 1.0);
        let mut v = vec![0.0; 8];
        v[6] = 1.0;
        v[7] = 1.0;
        assert_eq!(norm_squared(&RawAmplitudes::from_real(n, &v).unwrap()), 2.0);
        let mut v = vec![0.0; 8];
        v[0] = 1.0;
        v[5] = 1.0;
        v[7] = 1.0;
        assert_eq!(norm_squared(&RawAmplitudes::from_real(n, &v).unwrap()), 3.0);
    }

    #[test]
    fn normalize_examples() {
        let (s, k) = normalize(&RawAmplitudes::from_real(1, &[2.0, 0.0]).unwrap()).unwrap();
        assert_eq!(k, 2.0);
        assert_eq!(s.amps, vec![c(1.0, 0.0), c(0.0, 0.0)]);

        let (s, k) = normalize(&RawAmplitudes::from_real(1, &[3.0, 4.0]).unwrap()).unwrap();
        assert!((k - 5.0).abs() < 1e-15);
        assert!(close(s.amps[0], c(0.6, 0.0), 1e-15));
        assert!(close(s.amps[1], c(0.8, 0.0), 1e-15));

        let mut v = vec![0.0; 8];
        v[6] = 1.0;
        v[7] = 1.0;
        let (s, k) = normalize(&RawAmplitudes::from_real(3, &v).unwrap()).unwrap();
        assert!((k - 2f64.sqrt()).abs() < 1e-15);
        for z in &s.amps[..6] {
            assert_eq!(*z, c(0.0, 0.0));
        }
        assert!(close(s.amps[6], c(0.5f64.sqrt(), 0.0), 1e-15));
        assert!((s.norm_squared() - 1.0).abs() < 1e-15);

        let zero = RawAmplitudes::from_real(1, &[0.0, 1e-13]).unwrap();
        assert_eq!(normalize(&zero).unwrap_err(), QubitError::ZeroVector);
    }

    #[test]
    fn op_combine_examples() {
        let a = op_combine(
            OpKind::Add,
            &angles(1, &[FRAC_PI_2, 0.0]),
            &angles(1, &[0.0, 0.0]),
        );
        assert_eq!(a.unwrap().theta, vec![FRAC_PI_4, 0.0]);

        let p = angles(2, &[0.1, 0.7, 1.3, 4.0]);
        let z = op_combine(OpKind::Sub, &p, &p).unwrap();
        assert!(z.theta.iter().all(|&t| t == 0.0));
        assert_eq!(from_angles(&z).amps[0], c(1.0, 0.0));

        let m = op_combine(
            OpKind::Mul,
            &angles(1, &[FRAC_PI_6, 0.0]),
            &angles(1, &[FRAC_PI_3, 0.0]),
        )
        .unwrap();
        assert!((m.theta[0] - FRAC_PI_2).abs() < 1e-15);
        let s = from_angles(&m);
        assert!(close(s.amps[0], c(0.0, 0.0), 1e-15));
        assert!(close(s.amps[1], c(1.0, 0.0), 1e-15));

        let e = op_combine(OpKind::Div, &angles(1, &[0.0, 0.0]), &p).unwrap_err();
        assert_eq!(e, QubitError::DimensionMismatch { left: 1, right: 2 });
    }

    #[test]
    fn out_of_domain_angles_are_kept() {
        let a = angles(1, &[0.2, 0.0]);
        let b = angles(1, &[1.4, 0.0]);
        let d = op_combine(OpKind::Div, &a, &b).unwrap();
        assert!((d.theta[0] + 1.2).abs() < 1e-15);
        assert!((from_angles(&d).norm_squared() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn elementwise_examples() {
        let e = state(1, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let r = elementwise_combine(OpKind::Add, &e, &e).unwrap();
        assert_eq!(r.values, vec![c(2.0, 0.0), c(0.0, 0.0)]);

        let s = state(1, &[c(0.6, 0.0), c(0.8, 0.0)]);
        let r = elementwise_combine(OpKind::Mul, &s, &s).unwrap();
        assert!(close(r.values[0], c(0.36, 0.0), 1e-15));
        assert!(close(r.values[1], c(0.64, 0.0), 1e-15));
        assert!((norm_squared(&r) - 1.0).abs() > 0.1);

        let r = elementwise_combine(OpKind::Sub, &s, &s).unwrap();
        assert_eq!(norm_squared(&r), 0.0);

        let err = elementwise_combine(OpKind::Div, &s, &e).unwrap_err();
        assert_eq!(err, QubitError::DivisionByZeroAmplitude { index: 2 });
    }

    #[test]
    fn norm_of_sum_keeps_cross_term() {
        let a = RawAmplitudes::from_real(1, &[1.0, 1.0]).unwrap();
        let b = RawAmplitudes::from_real(1, &[1.0, 0.0]).unwrap();
        // ||(2,1)|| = sqrt 5, not sqrt(2 + 1)
        assert!((norm_of_sum(&a, &b).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        let b = RawAmplitudes::from_real(1, &[1.0, -1.0]).unwrap();
        assert!((norm_of_sum(&a, &b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            QubitState::new(1, vec![c(1.0, 0.0), c(0.1, 0.0)]),
            Err(QubitError::NotNormalized { .. })
        ));
        assert!(matches!(
            SphericalAngles::new(2, vec![0.0; 3]),
            Err(QubitError::LengthMismatch {
                expected: 4,
                got: 3
            })
        ));
        assert!(matches!(
            SphericalAngles::new(1, vec![0.0, f64::NAN]),
            Err(QubitError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            SphericalAngles::zeros(0),
            Err(QubitError::InvalidQubitCount(0))
        ));
    }
}
