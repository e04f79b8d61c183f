//! Positive laws parameterized by mean and squared coefficient of variation.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Geometric, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("unsupported distribution: {0}")]
    UnsupportedDistribution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Continuous families for inter-arrival times and packet lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Deterministic,
    Exponential,
    Erlang,
    LogNormal,
}

impl FromStr for Family {
    type Err = DistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deterministic" => Ok(Family::Deterministic),
            "exponential" => Ok(Family::Exponential),
            "erlang" => Ok(Family::Erlang),
            "lognormal" => Ok(Family::LogNormal),
            other => Err(DistError::UnsupportedDistribution(other.to_string())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Deterministic => "deterministic",
            Family::Exponential => "exponential",
            Family::Erlang => "erlang",
            Family::LogNormal => "lognormal",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Deterministic {
        value: f64,
    },
    Exponential {
        mean: f64,
    },
    Erlang {
        k: u32,
        mean: f64,
    },
    LogNormal {
        mean: f64,
        scv: f64,
        mu: f64,
        sigma: f64,
    },
}

impl Law {
    /// Law of `family` with the given mean and SCV.
    ///
    /// Deterministic needs `scv = 0`, exponential `scv = 1`, Erlang
    /// `scv = 1/k` for an integer `k`, log-normal any `scv > 0`.
    pub fn new(family: Family, mean: f64, scv: f64) -> Result<Self, DistError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "mean must be positive, got {mean}"
            )));
        }
        if !(scv.is_finite() && scv >= 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "scv must be nonnegative, got {scv}"
            )));
        }
        let bad = || DistError::UnsupportedDistribution(format!("{family} with scv {scv}"));
        match family {
            Family::Deterministic if scv == 0.0 => Ok(Law::Deterministic { value: mean }),
            Family::Exponential if (scv - 1.0).abs() < 1e-12 => Ok(Law::Exponential { mean }),
            Family::Erlang if scv > 0.0 => {
                let k = (1.0 / scv).round();
                if (k * scv - 1.0).abs() > 1e-9 || !(1.0..=1e6).contains(&k) {
                    return Err(bad());
                }
                Ok(Law::Erlang { k: k as u32, mean })
            }
            Family::LogNormal if scv > 0.0 => {
                let s2 = scv.ln_1p();
                Ok(Law::LogNormal {
                    mean,
                    scv,
                    mu: mean.ln() - s2 / 2.0,
                    sigma: s2.sqrt(),
                })
            }
            _ => Err(bad()),
        }
    }

    pub fn exponential(mean: f64) -> Self {
        Law::Exponential { mean }
    }

    pub fn deterministic(value: f64) -> Self {
        Law::Deterministic { value }
    }

    pub fn family(&self) -> Family {
        match self {
            Law::Deterministic { .. } => Family::Deterministic,
            Law::Exponential { .. } => Family::Exponential,
            Law::Erlang { .. } => Family::Erlang,
            Law::LogNormal { .. } => Family::LogNormal,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Deterministic { value } => value,
            Law::Exponential { mean } | Law::Erlang { mean, .. } | Law::LogNormal { mean, .. } => {
                mean
            }
        }
    }

    pub fn scv(&self) -> f64 {
        match *self {
            Law::Deterministic { .. } => 0.0,
            Law::Exponential { .. } => 1.0,
            Law::Erlang { k, .. } => 1.0 / k as f64,
            Law::LogNormal { scv, .. } => scv,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Deterministic { value } => value,
            Law::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                e * mean
            }
            Law::Erlang { k, mean } => Gamma::new(k as f64, mean / k as f64)
                .expect("validated")
                .sample(rng),
            Law::LogNormal { mu, sigma, .. } => {
                LogNormal::new(mu, sigma).expect("validated").sample(rng)
            }
        }
    }
}

/// Integer batch sizes, always at least 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchLaw {
    Deterministic {
        size: u64,
    },
    /// `1 + Geometric(1/m)`; SCV `1 - 1/m`.
    Geometric {
        mean: f64,
    },
    /// `1 + Poisson(m - 1)`; SCV `(m - 1)/m^2`.
    PoissonShifted {
        mean: f64,
    },
}

impl BatchLaw {
    pub fn new(family: &str, mean: f64) -> Result<Self, DistError> {
        if !(mean.is_finite() && mean >= 1.0) {
            return Err(DistError::InvalidParameter(format!(
                "batch mean must be >= 1, got {mean}"
            )));
        }
        match family {
            "deterministic" => {
                if mean.fract() != 0.0 {
                    return Err(DistError::InvalidParameter(format!(
                        "deterministic batch needs an integer size, got {mean}"
                    )));
                }
                Ok(BatchLaw::Deterministic { size: mean as u64 })
            }
            "geometric" => Ok(BatchLaw::Geometric { mean }),
            "poisson-shifted" => Ok(BatchLaw::PoissonShifted { mean }),
            other => Err(DistError::UnsupportedDistribution(other.to_string())),
        }
    }

    pub fn unit() -> Self {
        BatchLaw::Deterministic { size: 1 }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            BatchLaw::Deterministic { .. } => "deterministic",
            BatchLaw::Geometric { .. } => "geometric",
            BatchLaw::PoissonShifted { .. } => "poisson-shifted",
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BatchLaw::Deterministic { size } => size as f64,
            BatchLaw::Geometric { mean } | BatchLaw::PoissonShifted { mean } => mean,
        }
    }

    pub fn scv(&self) -> f64 {
        match *self {
            BatchLaw::Deterministic { .. } => 0.0,
            BatchLaw::Geometric { mean } => 1.0 - 1.0 / mean,
            BatchLaw::PoissonShifted { mean } => (mean - 1.0) / (mean * mean),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            BatchLaw::Deterministic { size } => size,
            BatchLaw::Geometric { mean } => {
                if mean == 1.0 {
                    return 1;
                }
                1 + Geometric::new(1.0 / mean).expect("validated").sample(rng)
            }
            BatchLaw::PoissonShifted { mean } => {
                if mean == 1.0 {
                    return 1;
                }
                let x: f64 = Poisson::new(mean - 1.0).expect("validated").sample(rng);
                1 + x as u64
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn family_constraints() {
        assert!(Law::new(Family::Deterministic, 1.0, 0.5).is_err());
        assert!(Law::new(Family::Exponential, 1.0, 0.5).is_err());
        assert!(Law::new(Family::Erlang, 1.0, 0.3).is_err());
        assert_eq!(
            Law::new(Family::Erlang, 2.0, 0.25).unwrap(),
            Law::Erlang { k: 4, mean: 2.0 }
        );
        assert!(Law::new(Family::LogNormal, 1.0, 0.0).is_err());
        assert!(Law::new(Family::Exponential, 0.0, 1.0).is_err());
        assert!("weibull".parse::<Family>().is_err());
        assert!(BatchLaw::new("deterministic", 1.5).is_err());
        assert!(BatchLaw::new("zipf", 2.0).is_err());
    }

    #[test]
    fn sample_moments_match_parameters() {
        let laws = [
            Law::new(Family::Deterministic, 0.5, 0.0).unwrap(),
            Law::new(Family::Exponential, 2.0, 1.0).unwrap(),
            Law::new(Family::Erlang, 1.0, 0.5).unwrap(),
            Law::new(Family::LogNormal, 1.5, 2.0).unwrap(),
        ];
        let mut rng = stream_rng(1, 0, 0);
        for law in laws {
            let xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
            assert!(xs.iter().all(|&x| x > 0.0));
            let (m, v) = moments(&xs);
            assert!((m / law.mean() - 1.0).abs() < 0.02, "{law:?} mean {m}");
            let scv = v / (m * m);
            let tol = if law.scv() > 1.0 { 0.15 } else { 0.03 };
            assert!(
                (scv - law.scv()).abs() <= tol * law.scv().max(1e-9) + 1e-12,
                "{law:?} scv {scv}"
            );
        }
    }

    #[test]
    fn batch_moments_match_parameters() {
        let laws = [
            BatchLaw::new("deterministic", 3.0).unwrap(),
            BatchLaw::new("geometric", 2.0).unwrap(),
            BatchLaw::new("poisson-shifted", 4.0).unwrap(),
        ];
        let mut rng = stream_rng(2, 0, 0);
        for law in laws {
            let xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng) as f64).collect();
            assert!(xs.iter().all(|&x| x >= 1.0));
            let (m, v) = moments(&xs);
            assert!((m / law.mean() - 1.0).abs() < 0.01, "{law:?} mean {m}");
            let scv = v / (m * m);
            assert!((scv - law.scv()).abs() < 0.02, "{law:?} scv {scv}");
        }
        assert_eq!(BatchLaw::new("geometric", 2.0).unwrap().scv(), 0.5);
    }
}
