//! Exact stationary law of the embedded chain `(S(n), X(n))` on a box of
//! side `cap + 1`, with arrivals that would overflow clipped to `cap`.
//!
//! Transitions are applied in tensor-product form: arrivals at different
//! queues are independent given the travel time, so each mixture component
//! of the travel law acts axis by axis.

use serde::Serialize;

use super::laws::{resolve_batch, resolve_travel, BatchLaw, StationLaws, TravelChoice, TravelLaw};
use crate::error::{Error, Result};
use crate::model::{ensure_valid, PollingModel};

pub const MAX_STATES: usize = 2_000_000;
pub const MAX_STATIONS: usize = 3;
const TOL: f64 = 1e-14;
const MAX_ITERATIONS: usize = 500_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub f: Vec<f64>,
    pub f_tilde: Vec<f64>,
    /// `E[X_i | S = i]`.
    pub queue_at_poll: Vec<f64>,
    /// `E[X_i]` over all polling instants.
    pub queue: Vec<f64>,
    /// Stationary probability that a transition clips at least one queue.
    pub tail_bound: f64,
    pub states: usize,
    pub iterations: usize,
}

struct Layout {
    side: usize,
    size: usize,
}

impl Layout {
    fn stride(&self, q: usize) -> usize {
        self.side.pow(q as u32)
    }

    fn digit(&self, idx: usize, q: usize) -> usize {
        idx / self.stride(q) % self.side
    }
}

/// Column `k` of the clipped kernel: `cdf[k] = P(K <= k)` for `K ~ Poisson(mu)`.
fn poisson_cdf(mu: f64, len: usize) -> Vec<f64> {
    let mut p = (-mu).exp();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        acc += p;
        out.push(acc.min(1.0));
        p *= mu / (k + 1) as f64;
    }
    out
}

/// One axis of the arrival kernel: `y -> min(y + b K, cap)`.
struct AxisKernel {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    b: usize,
}

impl AxisKernel {
    fn new(mu: f64, b: usize, cap: usize) -> Self {
        let len = cap / b + 1;
        let cdf = poisson_cdf(mu, len);
        let pmf = (0..len)
            .map(|k| if k == 0 { cdf[0] } else { cdf[k] - cdf[k - 1] })
            .collect();
        AxisKernel { pmf, cdf, b }
    }

    /// `P(y + b K > cap)`.
    fn clip_probability(&self, y: usize, cap: usize) -> f64 {
        1.0 - self.cdf[(cap - y) / self.b]
    }

    fn apply(&self, buf: &[f64], out: &mut [f64], lay: &Layout, q: usize) {
        let cap = lay.side - 1;
        let stride = lay.stride(q);
        out.iter_mut().for_each(|x| *x = 0.0);
        for base in 0..lay.size {
            if lay.digit(base, q) != 0 {
                continue;
            }
            for y in 0..=cap {
                let mass = buf[base + y * stride];
                if mass == 0.0 {
                    continue;
                }
                let mut k = 0;
                while y + self.b * k < cap {
                    out[base + (y + self.b * k) * stride] += mass * self.pmf[k];
                    k += 1;
                }
                let below = if k == 0 { 0.0 } else { self.cdf[k - 1] };
                out[base + cap * stride] += mass * (1.0 - below);
            }
        }
    }
}

/// One travel-time atom from station `s` in busy or empty mode.
struct Component {
    weight: f64,
    axes: Vec<AxisKernel>,
}

/// Stationary law with deterministic travel times and the model's batch law.
pub fn truncated_chain_oracle(m: &PollingModel, cap: usize) -> Result<OracleResult> {
    truncated_chain_oracle_with(m, cap, &TravelChoice::Deterministic, None)
}

pub fn truncated_chain_oracle_with(
    m: &PollingModel,
    cap: usize,
    travel: &TravelChoice,
    batch: Option<BatchLaw>,
) -> Result<OracleResult> {
    ensure_valid(m)?;
    let n = m.n();
    if n > MAX_STATIONS {
        return Err(Error::Precondition(format!(
            "the oracle handles at most {MAX_STATIONS} stations, got {n}"
        )));
    }
    if cap == 0 {
        return Err(Error::InvalidConfig("cap must be positive".into()));
    }
    let side = cap + 1;
    let states = side
        .checked_pow(n as u32)
        .and_then(|s| s.checked_mul(n))
        .unwrap_or(usize::MAX);
    if states > MAX_STATES {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: MAX_STATES,
        });
    }
    let laws = resolve_travel(m, travel)?;
    let b = match resolve_batch(m, batch)? {
        BatchLaw::Deterministic(b) => b as usize,
        other => {
            return Err(Error::UnsupportedLaw(format!(
                "the oracle needs a bounded batch law, got {other:?}"
            )))
        }
    };
    let lay = Layout {
        side,
        size: side.pow(n as u32),
    };

    let components = |law: &TravelLaw| -> Result<Vec<Component>> {
        let atoms = law.atoms().ok_or_else(|| {
            Error::UnsupportedLaw(format!("the oracle needs finitely many travel times, got {law:?}"))
        })?;
        Ok(atoms
            .into_iter()
            .filter(|&(w, _)| w > 0.0)
            .map(|(weight, t)| Component {
                weight,
                axes: (0..n)
                    .map(|q| AxisKernel::new(m.lambda[q] / b as f64 * t, b, cap))
                    .collect(),
            })
            .collect())
    };
    // [station][busy = 0, empty = 1]
    let kernels: Vec<[Vec<Component>; 2]> = laws
        .iter()
        .map(|l: &StationLaws| Ok([components(&l.busy)?, components(&l.empty)?]))
        .collect::<Result<_>>()?;

    let mut pi = vec![vec![1.0 / states as f64; lay.size]; n];
    let mut next = vec![vec![0.0; lay.size]; n];
    let mut bufs = [vec![0.0; lay.size], vec![0.0; lay.size]];
    let mut work = vec![0.0; lay.size];
    let mut tmp = vec![0.0; lay.size];

    let mut iterations = 0;
    loop {
        iterations += 1;
        for (j, row) in next.iter_mut().enumerate() {
            // lazy step: half the mass stays put, which removes periodicity
            row.iter_mut().zip(&pi[j]).for_each(|(x, p)| *x = 0.5 * p);
        }
        for s in 0..n {
            split_by_mode(&pi[s], s, &lay, &mut bufs);
            for (mode, buf) in bufs.iter().enumerate() {
                let route = if mode == 0 { &m.p } else { &m.p_tilde };
                for comp in &kernels[s][mode] {
                    work.copy_from_slice(buf);
                    for (q, axis) in comp.axes.iter().enumerate() {
                        axis.apply(&work, &mut tmp, &lay, q);
                        std::mem::swap(&mut work, &mut tmp);
                    }
                    for (j, row) in next.iter_mut().enumerate() {
                        let w = 0.5 * comp.weight * route[(s, j)];
                        if w != 0.0 {
                            row.iter_mut().zip(&work).for_each(|(x, v)| *x += w * v);
                        }
                    }
                }
            }
        }
        let diff: f64 = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            .sum();
        std::mem::swap(&mut pi, &mut next);
        if diff < TOL {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::Precondition(format!(
                "truncated chain did not converge (last change {diff:e})"
            )));
        }
    }
    let total: f64 = pi.iter().map(|r| r.iter().sum::<f64>()).sum();
    pi.iter_mut().for_each(|r| r.iter_mut().for_each(|x| *x /= total));

    let mut f = vec![0.0; n];
    let mut f_tilde = vec![0.0; n];
    let mut at_poll = vec![0.0; n];
    let mut queue = vec![0.0; n];
    let mut tail = 0.0;
    for s in 0..n {
        for (idx, &p) in pi[s].iter().enumerate() {
            let xs = lay.digit(idx, s);
            f[s] += p;
            at_poll[s] += p * xs as f64;
            if xs == 0 {
                f_tilde[s] += p;
            }
            for (q, acc) in queue.iter_mut().enumerate() {
                *acc += p * lay.digit(idx, q) as f64;
            }
            let mode = usize::from(xs == 0);
            for comp in &kernels[s][mode] {
                let kept: f64 = (0..n)
                    .map(|q| {
                        let y = lay.digit(idx, q) - usize::from(q == s && mode == 0);
                        1.0 - comp.axes[q].clip_probability(y, cap)
                    })
                    .product();
                tail += p * comp.weight * (1.0 - kept);
            }
        }
    }
    Ok(OracleResult {
        queue_at_poll: (0..n).map(|i| at_poll[i] / f[i]).collect(),
        f,
        f_tilde,
        queue,
        tail_bound: tail,
        states,
        iterations,
    })
}

/// Splits the mass at station `s` into the busy part (after removing the
/// served customer) and the empty part.
fn split_by_mode(pi_s: &[f64], s: usize, lay: &Layout, bufs: &mut [Vec<f64>; 2]) {
    let stride = lay.stride(s);
    bufs.iter_mut().for_each(|b| b.iter_mut().for_each(|x| *x = 0.0));
    for (idx, &p) in pi_s.iter().enumerate() {
        if lay.digit(idx, s) == 0 {
            bufs[1][idx] += p;
        } else {
            bufs[0][idx - stride] += p;
        }
    }
}
