//! Ergodicity classification through induced chains, the second vector
//! field and a linear Lyapunov certificate.
//!
//! A face `L` is the set of queues held saturated. `L = {}` is the original
//! system; `L = S` (all queues saturated) is ergodic by definition, its
//! induced chain being the server walk under `P`.
//!
//! For `P != P~`, face ergodicity uses the induced chain's necessary
//! conditions, which are only conjectured to be sufficient. Verdicts that
//! depend on them are tagged `conjecture_based`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::model::{ensure_valid, essential_classes, traffic_summary, PollingModel, DEGENERATE_TOL};
use crate::server::{necessary_conditions, solve_server_distribution, NecessaryConditions};

/// Strict inequalities are decided only outside `[-MARGIN, MARGIN]`.
pub const MARGIN: f64 = 1e-9;
/// Hard limit on the number of stations for exhaustive face enumeration.
pub const MAX_STATIONS: usize = 20;

/// A set of saturated stations (bit `i` = station `i + 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Face(pub u32);

impl Face {
    pub const EMPTY: Face = Face(0);

    pub fn full(n: usize) -> Face {
        Face(((1u64 << n) - 1) as u32)
    }

    pub fn from_stations(stations: &[usize]) -> Face {
        Face(stations.iter().fold(0, |acc, &s| acc | (1 << s)))
    }

    pub fn contains(self, s: usize) -> bool {
        self.0 & (1 << s) != 0
    }

    pub fn with(self, s: usize) -> Face {
        Face(self.0 | (1 << s))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_full(self, n: usize) -> bool {
        self == Face::full(n)
    }

    pub fn stations(self, n: usize) -> impl Iterator<Item = usize> {
        (0..n).filter(move |&s| self.contains(s))
    }

    /// All non-empty faces of an `n`-station system.
    pub fn all_nonempty(n: usize) -> impl Iterator<Item = Face> {
        (1..(1u64 << n)).map(|m| Face(m as u32))
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for s in 0..32 {
            if self.contains(s) {
                if !first {
                    write!(f, ",")?;
                }
                write!(f, "{}", s + 1)?;
                first = false;
            }
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FaceStatus {
    Ergodic,
    NonErgodic,
    /// Passes the necessary conditions of its induced chain with `P != P~`.
    ConjecturedErgodic,
}

impl FaceStatus {
    pub fn is_ergodic(self) -> bool {
        !matches!(self, FaceStatus::NonErgodic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedChainSolution {
    pub face: Face,
    /// Stationary server position of the induced chain.
    pub pi: Vec<f64>,
    /// `sum_{s not in L} lambda_s (tau_s - tau~_s)`.
    pub rho_hat_l: f64,
    pub tau_bar_l: f64,
    /// Second vector field: `lambda_j tau_bar_l - pi_j` on the face, 0 off it.
    pub v: Vec<f64>,
    pub ergodic_flag: FaceStatus,
    /// Smallest of `1 - rho_hat_l` and `pi_j - lambda_j tau_bar_l` over
    /// `j` off the face (`+inf` for the full face).
    pub margin: f64,
}

impl InducedChainSolution {
    /// True when a strict inequality behind the flag sits inside `[-MARGIN, MARGIN]`.
    pub fn is_borderline(&self) -> bool {
        self.margin.abs() <= MARGIN
            || self
                .face
                .stations(self.pi.len())
                .any(|j| self.v[j].abs() <= MARGIN)
    }
}

/// Solves the `N + 1` equations of the induced chain on `face`.
pub fn solve_induced_chain(m: &PollingModel, face: Face) -> Result<InducedChainSolution> {
    let n = m.n();
    let sat = |s: usize| face.contains(s);
    let rho_hat_l: f64 = (0..n)
        .filter(|&s| !sat(s))
        .map(|s| m.lambda[s] * (m.tau[s] - m.tau_tilde[s]))
        .sum();
    if (rho_hat_l - 1.0).abs() <= DEGENERATE_TOL {
        return Err(Error::DegenerateTraffic { rho_hat: rho_hat_l });
    }

    // pi_t - sum_s pi_s R_st - tau_bar * sum_{s off L} lambda_s (p_st - p~_st) = 0
    let routing = |s: usize, t: usize| if sat(s) { m.p[(s, t)] } else { m.p_tilde[(s, t)] };
    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut b = DVector::zeros(n + 1);
    for t in 0..n - 1 {
        a[(t, t)] += 1.0;
        for s in 0..n {
            a[(t, s)] -= routing(s, t);
            if !sat(s) {
                a[(t, n)] -= m.lambda[s] * (m.p[(s, t)] - m.p_tilde[(s, t)]);
            }
        }
    }
    for s in 0..n {
        a[(n - 1, s)] = 1.0;
        a[(n, s)] = -if sat(s) { m.tau[s] } else { m.tau_tilde[s] };
    }
    b[n - 1] = 1.0;
    a[(n, n)] = 1.0 - rho_hat_l;

    let sol = solve_dense(&a, &b)?;
    let pi: Vec<f64> = sol.x.iter().take(n).copied().collect();
    let tau_bar_l = sol.x[n];
    let v = (0..n)
        .map(|j| if sat(j) { m.lambda[j] * tau_bar_l - pi[j] } else { 0.0 })
        .collect();

    let (ergodic_flag, margin) = if face.is_full(n) {
        (FaceStatus::Ergodic, f64::INFINITY)
    } else {
        let margin = (0..n)
            .filter(|&j| !sat(j))
            .map(|j| pi[j] - m.lambda[j] * tau_bar_l)
            .fold(1.0 - rho_hat_l, f64::min);
        let status = if margin <= 0.0 {
            FaceStatus::NonErgodic
        } else if m.routing_is_state_independent(0.0) {
            FaceStatus::Ergodic
        } else {
            FaceStatus::ConjecturedErgodic
        };
        (status, margin)
    };

    Ok(InducedChainSolution {
        face,
        pi,
        rho_hat_l,
        tau_bar_l,
        v,
        ergodic_flag,
        margin,
    })
}

/// Solves every non-empty face. Results are ordered by face bitmask.
pub fn solve_all_faces(m: &PollingModel) -> Result<Vec<InducedChainSolution>> {
    let n = m.n();
    if n > MAX_STATIONS {
        return Err(Error::TooManyFaces {
            stations: n,
            limit: MAX_STATIONS,
        });
    }
    let faces: Vec<Face> = Face::all_nonempty(n).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        faces.par_iter().map(|&f| solve_induced_chain(m, f)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        faces.iter().map(|&f| solve_induced_chain(m, f)).collect()
    }
}

/// `f_i(x) = x_i + lambda_i sum_j x_j (tau_j - tau~_j) / (1 - rho_hat)`.
pub fn lyapunov_components(m: &PollingModel, x: &[f64]) -> Vec<f64> {
    let rho_hat = traffic_summary(m).rho_hat;
    let drift: f64 = (0..m.n())
        .map(|j| x[j] * (m.tau[j] - m.tau_tilde[j]))
        .sum::<f64>()
        / (1.0 - rho_hat);
    (0..m.n()).map(|i| x[i] + m.lambda[i] * drift).collect()
}

/// Closed form of `f_i(v^L)` for `i` on the face:
/// `lambda_i sum_j pi_j tau~_j / (1 - rho_hat) - pi_i`.
pub fn lyapunov_on_face(m: &PollingModel, sol: &InducedChainSolution, i: usize) -> f64 {
    let rho_hat = traffic_summary(m).rho_hat;
    let s: f64 = sol.pi.iter().zip(&m.tau_tilde).map(|(p, t)| p * t).sum();
    m.lambda[i] * s / (1.0 - rho_hat) - sol.pi[i]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaceLyapunov {
    pub face: Face,
    /// `f(v^L) = sum_i u_i f_i(v^L)`.
    pub value: f64,
    /// `f_i(v^L)` for the stations of the face, in station order.
    pub components: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    pub u: Vec<f64>,
    pub epsilon: f64,
    /// `f(e_k)` for each canonical direction; all positive.
    pub basis_values: Vec<f64>,
    pub face_values: Vec<FaceLyapunov>,
}

fn certificate_with(
    m: &PollingModel,
    sols: &[InducedChainSolution],
    epsilon: f64,
) -> std::result::Result<LyapunovCertificate, Error> {
    let n = m.n();
    let u: Vec<f64> = (0..n)
        .map(|i| (m.tau_tilde[i] - m.tau[i]).max(epsilon))
        .collect();
    let weigh = |fx: &[f64]| fx.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
    let noise = 10.0 * f64::EPSILON;

    let mut basis_values = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let val = weigh(&lyapunov_components(m, &e));
        if !(val > noise * u[k].max(1.0)) {
            return Err(Error::CertificateFailed {
                face: "positivity".into(),
                coordinate: k,
                reason: format!("f(e_{}) = {val:e} is not positive", k + 1),
            });
        }
        basis_values.push(val);
    }

    let mut face_values = Vec::new();
    for sol in sols.iter().filter(|s| !s.face.is_empty() && s.ergodic_flag.is_ergodic()) {
        let fx = lyapunov_components(m, &sol.v);
        let value = weigh(&fx);
        let components: Vec<(usize, f64)> = sol.face.stations(n).map(|i| (i, fx[i])).collect();
        if !(value < -noise) {
            let (coordinate, worst) = components
                .iter()
                .copied()
                .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
            return Err(Error::CertificateFailed {
                face: sol.face.to_string(),
                coordinate,
                reason: format!("f(v) = {value:e} is not negative (largest f_i = {worst:e})"),
            });
        }
        face_values.push(FaceLyapunov {
            face: sol.face,
            value,
            components,
        });
    }
    Ok(LyapunovCertificate {
        u,
        epsilon,
        basis_values,
        face_values,
    })
}

/// Builds `f = sum_i u_i f_i` with `u_i = max(tau~_i - tau_i, eps)` and checks
/// `f > 0` on the orthant and `f(v^L) < 0` on every ergodic face in `sols`.
///
/// `eps` starts at `1e-3 * min positive (tau~_i - tau_i)` (or `1e-6`) and is
/// divided by 10 on failure down to `1e-12`.
pub fn lyapunov_certificate(
    m: &PollingModel,
    sols: &[InducedChainSolution],
) -> Result<LyapunovCertificate> {
    let t = traffic_summary(m);
    if !(t.rho_hat < 1.0) {
        return Err(Error::Precondition(format!(
            "rho_hat = {} must be below 1",
            t.rho_hat
        )));
    }
    let min_gap = (0..m.n())
        .map(|i| m.tau_tilde[i] - m.tau[i])
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut epsilon = if min_gap.is_finite() { 1e-3 * min_gap } else { 1e-6 };
    loop {
        match certificate_with(m, sols, epsilon) {
            Ok(c) => return Ok(c),
            Err(e) if epsilon / 10.0 < 1e-12 => return Err(e),
            Err(_) => epsilon /= 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Ergodic,
    Transient,
    NotErgodic,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Ergodic => "ergodic",
            Verdict::Transient => "transient",
            Verdict::NotErgodic => "not ergodic",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// The verdict relies on the conjectured face criterion (`P != P~`).
    pub conjecture_based: bool,
    pub rho_hat: f64,
    pub necessary: Option<NecessaryConditions>,
    pub faces: Vec<InducedChainSolution>,
    pub certificate: Option<LyapunovCertificate>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Refuse to enumerate more than this many non-empty faces.
    pub max_faces: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            max_faces: (1 << MAX_STATIONS) - 1,
        }
    }
}

pub fn classify(m: &PollingModel) -> Result<Classification> {
    classify_with(m, ClassifyOptions::default())
}

pub fn classify_with(m: &PollingModel, opts: ClassifyOptions) -> Result<Classification> {
    ensure_valid(m)?;
    let n = m.n();
    let equal_routing = m.routing_is_state_independent(0.0);
    let t = traffic_summary(m);
    let mut out = Classification {
        verdict: Verdict::Inconclusive,
        conjecture_based: false,
        rho_hat: t.rho_hat,
        necessary: None,
        faces: Vec::new(),
        certificate: None,
        notes: Vec::new(),
    };
    let not_ergodic = |equal_routing: bool| {
        if equal_routing {
            Verdict::Transient
        } else {
            Verdict::NotErgodic
        }
    };

    if (1.0 - t.rho_hat).abs() <= MARGIN {
        out.notes.push(format!("rho_hat = {} is within {MARGIN:e} of 1", t.rho_hat));
        return Ok(out);
    }

    let classes = essential_classes(&m.p_tilde);
    if classes.len() > 1 {
        let residuals = crate::model::compatibility_check(m, &classes);
        if residuals.iter().any(|r| r.abs() > 1e-12) {
            out.verdict = Verdict::NotErgodic;
            out.notes.push(format!(
                "p_tilde has {} essential classes and the compatibility residuals {residuals:?} do not vanish",
                classes.len()
            ));
            return Ok(out);
        }
        return Err(Error::MultipleEssentialClasses { classes, residuals });
    }

    let d = solve_server_distribution(m)?;
    let nc = necessary_conditions(m, &d);
    let rho_bad = nc.rho_margin < -MARGIN;
    let flux_bad = nc.flux_margins.iter().any(|&x| x < -MARGIN);
    let borderline =
        nc.rho_margin.abs() <= MARGIN || nc.flux_margins.iter().any(|x| x.abs() <= MARGIN);
    out.necessary = Some(nc.clone());
    if rho_bad || flux_bad {
        out.verdict = not_ergodic(equal_routing);
        if rho_bad {
            out.notes.push(format!("rho_hat = {} >= 1", t.rho_hat));
        }
        for (i, &x) in nc.flux_margins.iter().enumerate() {
            if x < -MARGIN {
                out.notes.push(format!("lambda_{0} tau_bar exceeds F_{0} by {1:e}", i + 1, -x));
            }
        }
        return Ok(out);
    }
    if borderline {
        out.notes.push("a necessary condition holds only within the decision margin".into());
        return Ok(out);
    }

    let face_count = (1usize << n) - 1;
    if n > MAX_STATIONS || face_count > opts.max_faces {
        return Err(Error::TooManyFaces {
            stations: n,
            limit: MAX_STATIONS.min((opts.max_faces + 1).ilog2() as usize),
        });
    }
    let faces = solve_all_faces(m)?;
    let borderline_faces: Vec<String> = faces
        .iter()
        .filter(|s| s.is_borderline())
        .map(|s| s.face.to_string())
        .collect();
    out.conjecture_based = faces
        .iter()
        .any(|s| s.ergodic_flag == FaceStatus::ConjecturedErgodic);
    out.faces = faces;
    if !borderline_faces.is_empty() {
        out.notes.push(format!(
            "faces {} sit within the decision margin",
            borderline_faces.join(" ")
        ));
        return Ok(out);
    }

    match lyapunov_certificate(m, &out.faces) {
        Ok(cert) => {
            out.certificate = Some(cert);
            out.verdict = Verdict::Ergodic;
            if !equal_routing {
                out.conjecture_based = true;
                out.notes.push(
                    "P != P~: necessary conditions are only conjectured sufficient; verdict rests on the face criterion".into(),
                );
            }
        }
        Err(e) => {
            out.notes.push(e.to_string());
        }
    }
    Ok(out)
}

/// Left-hand side of the face comparison identity:
/// `(lambda_k tau_bar^L - F_k)(1 - rho_hat^L)`.
pub fn compare_term(m: &PollingModel, sol: &InducedChainSolution, f_k: f64, k: usize) -> f64 {
    (m.lambda[k] * sol.tau_bar_l - f_k) * (1.0 - sol.rho_hat_l)
}

/// Relative defect of the identity between faces `L` and `L + {k}`
/// (`P = P~`, `F` the server distribution).
pub fn compare_identity_defect(m: &PollingModel, f: &[f64], face: Face, k: usize) -> Result<f64> {
    let lo = solve_induced_chain(m, face)?;
    let hi = solve_induced_chain(m, face.with(k))?;
    let a = compare_term(m, &hi, f[k], k);
    let b = compare_term(m, &lo, f[k], k);
    let scale = a.abs().max(b.abs());
    Ok(if scale == 0.0 { 0.0 } else { (a - b).abs() / scale })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepStep {
    pub face: Face,
    /// Station whose drift component is inspected.
    pub station: usize,
    /// `v^L` at that station.
    pub drift: f64,
    /// Relative defect of the comparison identity between this face and the
    /// next smaller one on the walk.
    pub compare_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransienceSweep {
    /// Stations sorted by ascending `lambda_i / F_i`.
    pub order: Vec<usize>,
    /// Adjacent pairs in `order` with equal ratios (broken by index).
    pub ties: Vec<(usize, usize)>,
    pub steps: Vec<SweepStep>,
    pub verdict: Verdict,
}

/// Walks the faces `{o_i, .., o_N}` for `i = 1..N` (stations ordered by
/// `lambda/F`) and stops at the first outgoing drift component.
pub fn transience_sweep(m: &PollingModel) -> Result<TransienceSweep> {
    ensure_valid(m)?;
    if !m.routing_is_state_independent(0.0) {
        return Err(Error::Precondition("transience sweep requires P = P~".into()));
    }
    let n = m.n();
    let d = solve_server_distribution(m)?;
    let ratio: Vec<f64> = (0..n).map(|i| m.lambda[i] / d.f[i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ratio[a].total_cmp(&ratio[b]).then(a.cmp(&b)));
    let ties = order
        .windows(2)
        .filter(|w| (ratio[w[0]] - ratio[w[1]]).abs() <= 1e-12 * ratio[w[0]].abs().max(1.0))
        .map(|w| (w[0], w[1]))
        .collect();

    let mut steps = Vec::new();
    let mut verdict = Verdict::Ergodic;
    for i in 0..n {
        let face = Face::from_stations(&order[i..]);
        let station = order[i];
        let sol = solve_induced_chain(m, face)?;
        let smaller = Face::from_stations(&order[i + 1..]);
        let compare_defect = compare_identity_defect(m, &d.f, smaller, station)?;
        let drift = sol.v[station];
        steps.push(SweepStep {
            face,
            station,
            drift,
            compare_defect,
        });
        if drift.abs() <= MARGIN {
            verdict = Verdict::Inconclusive;
            break;
        }
        if drift > 0.0 {
            verdict = Verdict::Transient;
            break;
        }
    }
    Ok(TransienceSweep {
        order,
        ties,
        steps,
        verdict,
    })
}
