//! Polling-model instances and their derived traffic quantities.
//!
//! Stations are numbered `1..=N` in every report and stored 0-based.
//! A [`PollingModel`] is plain data: it can hold invalid values, and
//! [`validate_model`] reports every violated invariant instead of fixing it.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// `|rho_hat - 1|` below this is a degenerate instance.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Batch-size law summary for compound-Poisson arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMoments {
    /// Mean batch size `b`.
    pub mean: f64,
    /// Second moment `b^(2)`.
    pub second_moment: f64,
}

impl BatchMoments {
    pub const POISSON: BatchMoments = BatchMoments {
        mean: 1.0,
        second_moment: 1.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PollingModel {
    /// Routing after a service: `p[(i, j)]`.
    pub p: DMatrix<f64>,
    /// Routing after finding station `i` empty.
    pub p_tilde: DMatrix<f64>,
    /// Arrival rates per station (customers per unit time).
    pub lambda: Vec<f64>,
    /// Mean time from polling a non-empty station to the next polling instant.
    pub tau: Vec<f64>,
    /// Same, for an empty station.
    pub tau_tilde: Vec<f64>,
    pub tau2: Option<Vec<f64>>,
    pub tau_tilde2: Option<Vec<f64>>,
    pub batch: Option<BatchMoments>,
}

impl PollingModel {
    /// Builds a model from row-major matrices. No validation is performed.
    pub fn new(
        p: Vec<Vec<f64>>,
        p_tilde: Vec<Vec<f64>>,
        lambda: Vec<f64>,
        tau: Vec<f64>,
        tau_tilde: Vec<f64>,
    ) -> Self {
        PollingModel {
            p: matrix_from_rows(&p),
            p_tilde: matrix_from_rows(&p_tilde),
            lambda,
            tau,
            tau_tilde,
            tau2: None,
            tau_tilde2: None,
            batch: None,
        }
    }

    pub fn with_second_moments(mut self, tau2: Vec<f64>, tau_tilde2: Vec<f64>) -> Self {
        self.tau2 = Some(tau2);
        self.tau_tilde2 = Some(tau_tilde2);
        self
    }

    pub fn with_batch(mut self, batch: BatchMoments) -> Self {
        self.batch = Some(batch);
        self
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Batch law, defaulting to single arrivals.
    pub fn batch_or_poisson(&self) -> BatchMoments {
        self.batch.unwrap_or(BatchMoments::POISSON)
    }

    /// Poisson batch-stream rate `lambda_q / b` at station `q`.
    pub fn batch_rate(&self, q: usize) -> f64 {
        self.lambda[q] / self.batch_or_poisson().mean
    }

    /// True when `P` and `P~` agree entrywise to `tol`.
    pub fn routing_is_state_independent(&self, tol: f64) -> bool {
        self.p.shape() == self.p_tilde.shape()
            && self
                .p
                .iter()
                .zip(self.p_tilde.iter())
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Relabels stations: new station `k` is old station `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> PollingModel {
        let n = self.n();
        let pm = |m: &DMatrix<f64>| DMatrix::from_fn(n, n, |i, j| m[(perm[i], perm[j])]);
        let pv = |v: &[f64]| perm.iter().map(|&k| v[k]).collect::<Vec<_>>();
        PollingModel {
            p: pm(&self.p),
            p_tilde: pm(&self.p_tilde),
            lambda: pv(&self.lambda),
            tau: pv(&self.tau),
            tau_tilde: pv(&self.tau_tilde),
            tau2: self.tau2.as_deref().map(pv),
            tau_tilde2: self.tau_tilde2.as_deref().map(pv),
            batch: self.batch,
        }
    }

    pub fn tau2(&self) -> Result<&[f64]> {
        self.tau2.as_deref().ok_or(Error::MissingField("tau2"))
    }

    pub fn tau_tilde2(&self) -> Result<&[f64]> {
        self.tau_tilde2
            .as_deref()
            .ok_or(Error::MissingField("tau_tilde2"))
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        // Ragged input: keep the shape visibly wrong so validation reports it.
        return DMatrix::from_element(r, 0, f64::NAN);
    }
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

/// A set of stations, stored 0-based, displayed 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StationSet(pub Vec<usize>);

impl StationSet {
    pub fn contains(&self, s: usize) -> bool {
        self.0.contains(&s)
    }
}

impl fmt::Display for StationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, s) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s + 1)?;
        }
        write!(f, "}}")
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Field path with 1-based indices, e.g. `p[2]` or `tau_tilde[1]`.
    pub path: String,
    pub message: String,
    /// Measured defect (distance from the admissible set).
    pub defect: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} (defect {:e})", self.path, self.message, self.defect)
    }
}

fn check_stochastic(name: &str, m: &DMatrix<f64>, n: usize, out: &mut Vec<Violation>) {
    if m.nrows() != n || m.ncols() != n {
        out.push(Violation {
            path: name.to_string(),
            message: format!("must be {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
            defect: f64::NAN,
        });
        return;
    }
    for i in 0..n {
        for j in 0..n {
            let x = m[(i, j)];
            if !(0.0..=1.0).contains(&x) {
                let defect = if x.is_nan() { f64::NAN } else { (x - x.clamp(0.0, 1.0)).abs() };
                out.push(Violation {
                    path: format!("{name}[{}][{}]", i + 1, j + 1),
                    message: "entry must lie in [0, 1]".into(),
                    defect,
                });
            }
        }
        let sum: f64 = m.row(i).iter().sum();
        if !((sum - 1.0).abs() <= STOCHASTIC_TOL) {
            out.push(Violation {
                path: format!("{name}[{}]", i + 1),
                message: format!("row sums to {sum}, must sum to 1"),
                defect: (sum - 1.0).abs(),
            });
        }
    }
}

fn check_positive(name: &str, v: &[f64], n: usize, out: &mut Vec<Violation>) -> bool {
    if v.len() != n {
        out.push(Violation {
            path: name.to_string(),
            message: format!("must have length {n}, got {}", v.len()),
            defect: f64::NAN,
        });
        return false;
    }
    for (i, &x) in v.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            out.push(Violation {
                path: format!("{name}[{}]", i + 1),
                message: format!("{name} must be positive"),
                defect: if x.is_finite() { -x } else { f64::NAN },
            });
        }
    }
    true
}

fn check_second_moment(
    name: &str,
    second: &[f64],
    mean: &[f64],
    n: usize,
    out: &mut Vec<Violation>,
) {
    if second.len() != n {
        out.push(Violation {
            path: name.to_string(),
            message: format!("must have length {n}, got {}", second.len()),
            defect: f64::NAN,
        });
        return;
    }
    for (i, (&s, &m)) in second.iter().zip(mean).enumerate() {
        let floor = m * m;
        if !(s >= floor * (1.0 - 1e-12)) {
            out.push(Violation {
                path: format!("{name}[{}]", i + 1),
                message: "second moment below squared mean (negative variance)".into(),
                defect: floor - s,
            });
        }
    }
}

/// Lists every invariant violation; an empty list means the model is valid.
pub fn validate_model(m: &PollingModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = m.n();
    if n < 2 {
        out.push(Violation {
            path: "n".into(),
            message: format!("need at least 2 stations, got {n}"),
            defect: (2 - n) as f64,
        });
        return out;
    }
    check_stochastic("p", &m.p, n, &mut out);
    check_stochastic("p_tilde", &m.p_tilde, n, &mut out);
    check_positive("lambda", &m.lambda, n, &mut out);
    let tau_ok = check_positive("tau", &m.tau, n, &mut out);
    let tt_ok = check_positive("tau_tilde", &m.tau_tilde, n, &mut out);
    if let (Some(t2), true) = (&m.tau2, tau_ok) {
        check_second_moment("tau2", t2, &m.tau, n, &mut out);
    }
    if let (Some(t2), true) = (&m.tau_tilde2, tt_ok) {
        check_second_moment("tau_tilde2", t2, &m.tau_tilde, n, &mut out);
    }
    if let Some(b) = m.batch {
        if !(b.mean >= 1.0) {
            out.push(Violation {
                path: "batch.mean".into(),
                message: "mean batch size must be at least 1".into(),
                defect: 1.0 - b.mean,
            });
        }
        if !(b.second_moment >= b.mean) {
            out.push(Violation {
                path: "batch.second_moment".into(),
                message: "second moment must be at least the mean".into(),
                defect: b.mean - b.second_moment,
            });
        } else if !(b.second_moment >= b.mean * b.mean * (1.0 - 1e-12)) {
            out.push(Violation {
                path: "batch.second_moment".into(),
                message: "second moment below squared mean (negative variance)".into(),
                defect: b.mean * b.mean - b.second_moment,
            });
        }
    }
    out
}

/// Fails with [`Error::InvalidModel`] when any invariant is violated.
pub fn ensure_valid(m: &PollingModel) -> Result<()> {
    let v = validate_model(m);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(v))
    }
}

/// Closed communicating classes of the chain with transition matrix `p_tilde`,
/// sorted by smallest member.
pub fn essential_classes(p_tilde: &DMatrix<f64>) -> Vec<StationSet> {
    let n = p_tilde.nrows();
    // reach[i][j]: j reachable from i in zero or more steps
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        let mut stack = vec![i];
        row[i] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if p_tilde[(u, v)] > 0.0 && !row[v] {
                    row[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut classes = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        // closed iff nothing reachable from the class lies outside it
        let closed = (0..n).all(|j| !reach[i][j] || class.contains(&j));
        if closed {
            classes.push(StationSet(class));
        }
    }
    classes
}

/// For each class `E_m`, `sum_{j in E_m} sum_i lambda_i (p_ij - p~_ij)`.
/// The chain can only be ergodic if all of these vanish.
pub fn compatibility_check(m: &PollingModel, classes: &[StationSet]) -> Vec<f64> {
    let n = m.n();
    classes
        .iter()
        .map(|class| {
            class
                .0
                .iter()
                .map(|&j| {
                    (0..n)
                        .map(|i| m.lambda[i] * (m.p[(i, j)] - m.p_tilde[(i, j)]))
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrafficSummary {
    /// `sum_i lambda_i (tau_i - tau~_i)`.
    pub rho_hat: f64,
    /// `sum_j lambda_j tau_j`.
    pub load_sum: f64,
    /// `rho_hat` equals 1 to within [`DEGENERATE_TOL`].
    pub degenerate: bool,
}

pub fn traffic_summary(m: &PollingModel) -> TrafficSummary {
    let rho_hat: f64 = (0..m.n())
        .map(|i| m.lambda[i] * (m.tau[i] - m.tau_tilde[i]))
        .sum();
    let load_sum = m.lambda.iter().zip(&m.tau).map(|(l, t)| l * t).sum();
    TrafficSummary {
        rho_hat,
        load_sum,
        degenerate: (rho_hat - 1.0).abs() <= DEGENERATE_TOL,
    }
}

/// Mean arrivals at station `q` between a poll of `i` and the next poll.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalMatrices {
    /// `a_mat[(i, q)] = lambda_q * tau_i`.
    pub a_mat: DMatrix<f64>,
    /// `a_tilde_mat[(i, q)] = lambda_q * tau~_i`.
    pub a_tilde_mat: DMatrix<f64>,
}

pub fn arrival_matrices(m: &PollingModel) -> ArrivalMatrices {
    let n = m.n();
    ArrivalMatrices {
        a_mat: DMatrix::from_fn(n, n, |i, q| m.lambda[q] * m.tau[i]),
        a_tilde_mat: DMatrix::from_fn(n, n, |i, q| m.lambda[q] * m.tau_tilde[i]),
    }
}
