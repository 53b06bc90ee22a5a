use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PollingModel;

const MOMENT_TOL: f64 = 1e-9;

/// Law of the time between a poll and the next one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TravelLaw {
    Deterministic(f64),
    Exponential(f64),
    /// `lo` with probability `p_lo`, otherwise `hi`.
    TwoPoint { lo: f64, hi: f64, p_lo: f64 },
}

impl TravelLaw {
    /// Two-point law with the given mean and second moment: `{m - sd, m + sd}`
    /// with equal weights when that stays nonnegative, otherwise `{0, s/m}`.
    pub fn two_point(mean: f64, second: f64) -> Result<TravelLaw> {
        let var = second - mean * mean;
        if !(mean > 0.0) || var < -MOMENT_TOL * (1.0 + second) {
            return Err(Error::InvalidConfig(format!(
                "no nonnegative two-point law has mean {mean} and second moment {second}"
            )));
        }
        let var = var.max(0.0);
        Ok(if var <= mean * mean {
            let sd = var.sqrt();
            TravelLaw::TwoPoint {
                lo: mean - sd,
                hi: mean + sd,
                p_lo: 0.5,
            }
        } else {
            let hi = second / mean;
            TravelLaw::TwoPoint {
                lo: 0.0,
                hi,
                p_lo: 1.0 - mean / hi,
            }
        })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TravelLaw::Deterministic(t) | TravelLaw::Exponential(t) => t,
            TravelLaw::TwoPoint { lo, hi, p_lo } => p_lo * lo + (1.0 - p_lo) * hi,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            TravelLaw::Deterministic(t) => t * t,
            TravelLaw::Exponential(t) => 2.0 * t * t,
            TravelLaw::TwoPoint { lo, hi, p_lo } => p_lo * lo * lo + (1.0 - p_lo) * hi * hi,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TravelLaw::Deterministic(t) => t,
            TravelLaw::Exponential(t) => Exp::new(1.0 / t).expect("positive mean").sample(rng),
            TravelLaw::TwoPoint { lo, hi, p_lo } => {
                if rng.random::<f64>() < p_lo {
                    lo
                } else {
                    hi
                }
            }
        }
    }

    /// `E[exp(-s T)]`.
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        match *self {
            TravelLaw::Deterministic(t) => (-s * t).exp(),
            TravelLaw::Exponential(t) => 1.0 / (1.0 + s * t),
            TravelLaw::TwoPoint { lo, hi, p_lo } => p_lo * (-s * lo).exp() + (1.0 - p_lo) * (-s * hi).exp(),
        }
    }

    /// Finite mixture of deterministic times, if the law is one.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            TravelLaw::Deterministic(t) => Some(vec![(1.0, t)]),
            TravelLaw::Exponential(_) => None,
            TravelLaw::TwoPoint { lo, hi, p_lo } => Some(vec![(p_lo, lo), (1.0 - p_lo, hi)]),
        }
    }
}

/// Travel laws of one station: after a service and after finding it empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationLaws {
    pub busy: TravelLaw,
    pub empty: TravelLaw,
}

/// How travel laws are derived from the model moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TravelChoice {
    Deterministic,
    Exponential,
    /// Matches `tau2` and `tau_tilde2`, which must be present.
    TwoPoint,
    PerStation(Vec<StationLaws>),
}

fn check_law(law: &TravelLaw, mean: f64, second: Option<f64>, path: &str) -> Result<()> {
    if (law.mean() - mean).abs() > MOMENT_TOL * (1.0 + mean) {
        return Err(Error::InvalidConfig(format!(
            "{path}: travel law mean {} does not match {mean}",
            law.mean()
        )));
    }
    if let Some(s) = second {
        if (law.second_moment() - s).abs() > MOMENT_TOL * (1.0 + s) {
            return Err(Error::InvalidConfig(format!(
                "{path}: travel law second moment {} does not match {s}",
                law.second_moment()
            )));
        }
    }
    Ok(())
}

/// Resolves per-station laws and checks them against `tau`, `tau_tilde` and
/// the second moments when the model carries them.
pub fn resolve_travel(m: &PollingModel, choice: &TravelChoice) -> Result<Vec<StationLaws>> {
    let n = m.n();
    let laws: Vec<StationLaws> = match choice {
        TravelChoice::Deterministic => (0..n)
            .map(|i| StationLaws {
                busy: TravelLaw::Deterministic(m.tau[i]),
                empty: TravelLaw::Deterministic(m.tau_tilde[i]),
            })
            .collect(),
        TravelChoice::Exponential => (0..n)
            .map(|i| StationLaws {
                busy: TravelLaw::Exponential(m.tau[i]),
                empty: TravelLaw::Exponential(m.tau_tilde[i]),
            })
            .collect(),
        TravelChoice::TwoPoint => {
            let t2 = m.tau2()?;
            let tt2 = m.tau_tilde2()?;
            (0..n)
                .map(|i| {
                    Ok(StationLaws {
                        busy: TravelLaw::two_point(m.tau[i], t2[i])?,
                        empty: TravelLaw::two_point(m.tau_tilde[i], tt2[i])?,
                    })
                })
                .collect::<Result<_>>()?
        }
        TravelChoice::PerStation(v) => {
            if v.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "{} station laws given for {n} stations",
                    v.len()
                )));
            }
            v.clone()
        }
    };
    for (i, l) in laws.iter().enumerate() {
        check_law(&l.busy, m.tau[i], m.tau2.as_ref().map(|v| v[i]), &format!("tau[{}]", i + 1))?;
        check_law(
            &l.empty,
            m.tau_tilde[i],
            m.tau_tilde2.as_ref().map(|v| v[i]),
            &format!("tau_tilde[{}]", i + 1),
        )?;
    }
    Ok(laws)
}

/// Batch size law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BatchLaw {
    Deterministic(u32),
    /// Geometric on `{1, 2, ...}` with the given mean.
    Geometric(f64),
}

impl BatchLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            BatchLaw::Deterministic(b) => b as f64,
            BatchLaw::Geometric(b) => b,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            BatchLaw::Deterministic(b) => (b as f64).powi(2),
            BatchLaw::Geometric(b) => {
                let p = 1.0 / b;
                (2.0 - p) / (p * p)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            BatchLaw::Deterministic(b) => b as u64,
            BatchLaw::Geometric(b) => 1 + Geometric::new(1.0 / b).expect("mean at least 1").sample(rng),
        }
    }

    /// `E[z^B]`.
    pub fn pgf(&self, z: Complex64) -> Complex64 {
        match *self {
            BatchLaw::Deterministic(b) => z.powu(b),
            BatchLaw::Geometric(b) => {
                let p = 1.0 / b;
                p * z / (1.0 - (1.0 - p) * z)
            }
        }
    }
}

/// The batch law of the model: single arrivals without a `batch` entry,
/// otherwise the given law, which must match the batch moments.
pub fn resolve_batch(m: &PollingModel, law: Option<BatchLaw>) -> Result<BatchLaw> {
    let target = m.batch_or_poisson();
    let law = match law {
        Some(l) => l,
        None => {
            let b = target.mean;
            if (target.second_moment - b * b).abs() <= MOMENT_TOL * (1.0 + b * b) && b.fract() == 0.0 {
                BatchLaw::Deterministic(b as u32)
            } else {
                BatchLaw::Geometric(b)
            }
        }
    };
    if let BatchLaw::Geometric(b) = law {
        if !(b >= 1.0) {
            return Err(Error::InvalidConfig(format!("geometric batch mean {b} below 1")));
        }
    }
    if (law.mean() - target.mean).abs() > MOMENT_TOL * target.mean
        || (law.second_moment() - target.second_moment).abs() > MOMENT_TOL * target.second_moment
    {
        return Err(Error::InvalidConfig(format!(
            "batch law moments ({}, {}) do not match the model ({}, {})",
            law.mean(),
            law.second_moment(),
            target.mean,
            target.second_moment
        )));
    }
    Ok(law)
}
