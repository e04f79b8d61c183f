//! Plain-text state fixtures.
//!
//! ```text
//! n=1
//! 6.00000000000000000e-1 0.00000000000000000e0
//! 8.00000000000000000e-1 0.00000000000000000e0
//! ```

use super::{QubitError, QubitState};
use num_complex::Complex64;
use std::fmt::Write;

pub fn write_state(state: &QubitState) -> String {
    let mut out = format!("n={}\n", state.n());
    for z in state.amplitudes() {
        writeln!(out, "{:.17e} {:.17e}", z.re, z.im).expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_state(text: &str) -> Result<QubitState, QubitError> {
    let perr = |line: usize, msg: &str| QubitError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
    let n: usize = header
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| perr(line, "expected header n=<int>"))?;
    if n == 0 || n > super::MAX_QUBITS {
        return Err(perr(line, "qubit count out of range"));
    }
    let mut amps = Vec::with_capacity(1 << n);
    for (line, l) in lines {
        let mut parts = l.split_whitespace();
        let (Some(re), Some(im), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(perr(line, "expected two numbers \"re im\""));
        };
        let re: f64 = re.parse().map_err(|_| perr(line, "bad real part"))?;
        let im: f64 = im.parse().map_err(|_| perr(line, "bad imaginary part"))?;
        amps.push(Complex64::new(re, im));
    }
    QubitState::new(n, amps)
}
