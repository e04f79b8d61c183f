//! Measurement-channel gain `G = H(phi)^+ pinv(H(phi) H(phi)^+) H(psi)`.
//!
//! `H(phi) H(phi)^+` is a rank-one outer product, so the inverse is the
//! Moore-Penrose pseudo-inverse. For unit-norm `phi` the gain collapses to
//! the inner product `<phi|psi>`, which is the fast path.

use super::{inner, same_n, QubitError, QubitState, RawAmplitudes};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGain {
    pub value: Complex64,
}

pub fn channel_gain(phi: &QubitState, psi: &QubitState) -> Result<ChannelGain, QubitError> {
    same_n(phi.n, psi.n)?;
    let value = inner(phi.amplitudes(), psi.amplitudes()) / phi.norm_squared();
    Ok(ChannelGain { value })
}

/// Moore-Penrose inverse of a complex matrix through its real embedding
/// `[[A, -B], [B, A]]`, whose pseudo-inverse embeds the complex one.
fn complex_pinv(m: &DMatrix<Complex64>, eps: f64) -> DMatrix<Complex64> {
    let (r, c) = m.shape();
    let real = DMatrix::from_fn(2 * r, 2 * c, |i, j| {
        let z = m[(i % r, j % c)];
        match (i < r, j < c) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let p = real.pseudo_inverse(eps).expect("eps is nonnegative");
    DMatrix::from_fn(c, r, |i, j| Complex64::new(p[(i, j)], p[(i + c, j)]))
}

/// Same gain evaluated literally through an SVD pseudo-inverse.
pub fn channel_gain_pinv(phi: &QubitState, psi: &QubitState) -> Result<ChannelGain, QubitError> {
    same_n(phi.n, psi.n)?;
    let h = DVector::from_column_slice(phi.amplitudes());
    let hp = DVector::from_column_slice(psi.amplitudes());
    let outer: DMatrix<Complex64> = &h * h.adjoint();
    let g = h.adjoint() * complex_pinv(&outer, 1e-12) * hp;
    Ok(ChannelGain { value: g[(0, 0)] })
}

/// `|phi> G(phi, psi)`, the component of `psi` along `phi`.
pub fn apply_channel(phi: &QubitState, psi: &QubitState) -> Result<RawAmplitudes, QubitError> {
    let g = channel_gain(phi, psi)?.value;
    let values = phi.amplitudes().iter().map(|z| z * g).collect();
    RawAmplitudes::new(phi.n, values)
}
