//! Direct coefficient formulas for the four sphere operations.
//!
//! Each output amplitude is assembled from the input amplitudes and angles
//! without going back through the chart, so it serves as an independent
//! check on `from_angles(op_combine(..))`. Every formula divides by a
//! trigonometric quantity that may vanish; those are guarded and reported
//! as [`QubitError::SingularDenominator`] with the 1-based angle index.

use super::{same_n, OpKind, QubitError, QubitState, SphericalAngles, SINGULAR_TOL};
use num_complex::Complex64;

fn guard(x: f64, index: usize) -> Result<f64, QubitError> {
    if x.abs() <= SINGULAR_TOL {
        Err(QubitError::SingularDenominator { index })
    } else {
        Ok(x)
    }
}

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

pub fn coeff_map(
    kind: OpKind,
    phi: &QubitState,
    psi: &QubitState,
    a: &SphericalAngles,
    b: &SphericalAngles,
) -> Result<QubitState, QubitError> {
    same_n(phi.n, psi.n)?;
    same_n(phi.n, a.n)?;
    same_n(phi.n, b.n)?;
    let (f, g) = (phi.amplitudes(), psi.amplitudes());
    let (a, b) = (a.theta(), b.theta());
    let d = f.len();
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let v = match kind {
            OpKind::Add => add(k, d, f, g, a, b)?,
            OpKind::Sub => sub(k, d, f, g, a, b)?,
            OpKind::Mul => mul(k, d, f, g, a, b)?,
            OpKind::Div => div(k, d, f, g, a, b)?,
        };
        out.push(v);
    }
    Ok(QubitState::new_unchecked(phi.n, out))
}

// prod over j of 2 cos((a_j + sign b_j) / 2), j < k, or j <= k when `include_k`.
fn half_cos_den(
    k: usize,
    a: &[f64],
    b: &[f64],
    sign: f64,
    include_k: bool,
) -> Result<f64, QubitError> {
    let upto = if include_k { k + 1 } else { k };
    let mut den = 1.0;
    for j in 0..upto {
        den *= 2.0 * guard(((a[j] + sign * b[j]) / 2.0).cos(), j + 1)?;
    }
    Ok(den)
}

fn add(
    k: usize,
    d: usize,
    f: &[Complex64],
    g: &[Complex64],
    a: &[f64],
    b: &[f64],
) -> Result<Complex64, QubitError> {
    let sum_sin: f64 = (0..k).map(|j| a[j].sin() + b[j].sin()).product();
    let pa: f64 = (0..k).map(|j| a[j].sin()).product();
    let pb: f64 = (0..k).map(|j| b[j].sin()).product();
    if k < d - 1 {
        let num = (f[k] + g[k]).re + sum_sin * (a[k].cos() + b[k].cos())
            - (pa * a[k].cos() + pb * b[k].cos());
        let den = half_cos_den(k, a, b, -1.0, true)?;
        Ok(Complex64::new(num / den, 0.0))
    } else {
        let (pa_, pb_) = (a[k], b[k]);
        let num = (f[k] + g[k]) + cis(pa_ + pb_) * sum_sin - (cis(pa_) * pa + cis(pb_) * pb);
        let den = cis((pa_ + pb_) / 2.0) * half_cos_den(k, a, b, -1.0, false)?;
        Ok(num / den)
    }
}

fn sub(
    k: usize,
    d: usize,
    f: &[Complex64],
    g: &[Complex64],
    a: &[f64],
    b: &[f64],
) -> Result<Complex64, QubitError> {
    let diff_sin: f64 = (0..k).map(|j| a[j].sin() - b[j].sin()).product();
    let pa: f64 = (0..k).map(|j| a[j].sin()).product();
    let pb: f64 = (0..k).map(|j| b[j].sin()).product();
    if k < d - 1 {
        let num = (f[k] - g[k]).re + diff_sin * (a[k].cos() + b[k].cos())
            - (pa * a[k].cos() - pb * b[k].cos());
        let den = half_cos_den(k, a, b, 1.0, true)?;
        Ok(Complex64::new(num / den, 0.0))
    } else {
        let (pa_, pb_) = (a[k], b[k]);
        let num = (f[k] - g[k]) + cis(pa_ - pb_) * diff_sin - (cis(pa_) * pa - cis(pb_) * pb);
        let den = cis((pa_ - pb_) / 2.0) * half_cos_den(k, a, b, 1.0, false)?;
        Ok(num / den)
    }
}

fn mul(
    k: usize,
    d: usize,
    f: &[Complex64],
    g: &[Complex64],
    a: &[f64],
    b: &[f64],
) -> Result<Complex64, QubitError> {
    let mut ratio = 1.0;
    for (j, aj) in a[..k].iter().enumerate() {
        ratio *= 2.0 * aj.cos() / guard(aj.sin(), j + 1)?;
    }
    let sp = |j: usize| (a[j] + b[j]).sin();
    let sm = |j: usize| (a[j] - b[j]).sin();
    let diff: f64 = (0..k).map(|j| sp(j) - sm(j)).product();
    let plus: f64 = (0..k).map(sp).product();
    if k < d - 1 {
        let cm = (a[k] - b[k]).cos();
        let cp = (a[k] + b[k]).cos();
        let lead = 2.0 * ratio * (f[k] * g[k]).re;
        Ok(Complex64::new(lead - (diff * (cm + cp) - plus * cp), 0.0))
    } else {
        let lead = f[k] * g[k] * ratio;
        Ok(lead - cis(a[k] + b[k]) * (diff - plus))
    }
}

fn div(
    k: usize,
    d: usize,
    f: &[Complex64],
    g: &[Complex64],
    a: &[f64],
    b: &[f64],
) -> Result<Complex64, QubitError> {
    let mut ratio = 1.0;
    let mut sb2 = 1.0;
    for j in 0..k {
        ratio *= -2.0 * a[j].cos() / guard(a[j].sin(), j + 1)?;
        sb2 *= guard(b[j].sin(), j + 1)?.powi(2);
    }
    let sp = |j: usize| (a[j] + b[j]).sin();
    let sm = |j: usize| (a[j] - b[j]).sin();
    let neg_diff: f64 = (0..k).map(|j| -(sp(j) - sm(j))).product();
    let minus: f64 = (0..k).map(sm).product();
    if k < d - 1 {
        let cb = guard(b[k].cos(), k + 1)?;
        let cm = (a[k] - b[k]).cos();
        let cp = (a[k] + b[k]).cos();
        let lead = 2.0 * ratio * (f[k] / g[k]).re * sb2 * cb * cb;
        Ok(Complex64::new(
            lead - (neg_diff * (cm + cp) - minus * cm),
            0.0,
        ))
    } else {
        let lead = f[k] / g[k] * ratio * sb2;
        Ok(lead - cis(a[k] - b[k]) * (neg_diff - minus))
    }
}
