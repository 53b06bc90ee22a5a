//! Rotationally symmetric systems: circulant spectral tools and the closed
//! forms for the empty probability and mean queue lengths.
//!
//! Distances are 1-based and wrap: `p[d - 1]` is the probability of moving
//! from station `i` to station `i + d (mod N)`, so `p[N - 1]` is "stay".

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ensure_valid, PollingModel};

const SUM_TOL: f64 = 1e-12;
/// Assumption A2 margin: `|1 - mu~_k|` must exceed this for `k < N`.
pub const A2_MARGIN: f64 = 1e-9;
const A1_TOL: f64 = 1e-12;
const A3_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-9;

/// `omega^e` for `omega = exp(2 pi i / n)`, reduced mod `n` before the
/// trigonometric call.
fn root_pow(n: usize, e: i64) -> Complex64 {
    let r = e.rem_euclid(n as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * r / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CirculantBasis {
    /// `omega[k - 1] = exp(2 pi i k / N)`.
    pub omega: Vec<Complex64>,
    /// `v[k - 1][i - 1] = omega_k^(-i)`.
    pub v: Vec<Vec<Complex64>>,
}

impl CirculantBasis {
    pub fn new(n: usize) -> Self {
        let omega = (1..=n).map(|k| root_pow(n, k as i64)).collect();
        let v = (1..=n)
            .map(|k| (1..=n).map(|i| root_pow(n, -((k * i) as i64))).collect())
            .collect();
        CirculantBasis { omega, v }
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    /// `(1/N) sum_k omega_k^i v_k`, which is the canonical vector `e_i`.
    pub fn reconstruct(&self, i: usize) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|c| {
                (1..=n)
                    .map(|k| root_pow(n, (k * i) as i64) * self.v[k - 1][c])
                    .sum::<Complex64>()
                    / n as f64
            })
            .collect()
    }
}

/// `mu_k = sum_d m_d omega_k^d` for `k = 1..N`, with `m[d - 1] = m_d`.
pub fn circulant_eigenvalues(m: &[f64]) -> Vec<Complex64> {
    let n = m.len();
    (1..=n)
        .map(|k| {
            (1..=n)
                .map(|d| m[d - 1] * root_pow(n, (k * d) as i64))
                .sum()
        })
        .collect()
}

/// Distance distribution read from the first row: `p_d = P[0][d mod N]`.
pub fn distance_distribution(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    (1..=n).map(|d| p[(0, d % n)]).collect()
}

/// Circulant routing matrix `P[i][j] = p_{(j - i) mod N}`.
pub fn circulant_matrix(p_dist: &[f64]) -> DMatrix<f64> {
    let n = p_dist.len();
    DMatrix::from_fn(n, n, |i, j| {
        let d = (j + n - i) % n;
        p_dist[if d == 0 { n - 1 } else { d - 1 }]
    })
}

/// `sum_{l<N} 1/(1 - mu_l)`. `mu` holds all `N` eigenvalues with `mu_N = 1` last.
pub fn eigen_sum(mu: &[Complex64]) -> Result<f64> {
    let n = mu.len();
    let mut s = Complex64::new(0.0, 0.0);
    for (l, &m) in mu.iter().enumerate().take(n.saturating_sub(1)) {
        if (Complex64::new(1.0, 0.0) - m).norm() <= A2_MARGIN {
            return Err(Error::DegenerateEigenvalue {
                index: l + 1,
                value: format!("{m}"),
            });
        }
        s += 1.0 / (1.0 - m);
    }
    if s.im.abs() > 1e-10 * (1.0 + s.re.abs()) {
        return Err(Error::ComplexResidual {
            real: s.re,
            imag: s.im,
        });
    }
    Ok(s.re)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub pass: bool,
    pub defect: f64,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Rotational symmetry of routing and scalars.
    pub a1: AssumptionCheck,
    /// `mu~_k != 1` for `k < N`.
    pub a2: AssumptionCheck,
    /// `[I - P][I - P~^T] = [I - P^T][I - P~]`.
    pub a3: AssumptionCheck,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.a1.pass && self.a2.pass && self.a3.pass
    }
}

fn circulant_defect(p: &DMatrix<f64>, name: &str) -> (f64, Option<String>) {
    let q = circulant_matrix(&distance_distribution(p));
    let mut worst = (0.0, None);
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let d = (p[(i, j)] - q[(i, j)]).abs();
            if d > worst.0 {
                worst = (d, Some(format!("{name}[{}][{}]", i + 1, j + 1)));
            }
        }
    }
    worst
}

fn spread(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

pub fn check_assumptions(m: &PollingModel) -> AssumptionReport {
    let n = m.n();
    let mut a1_defect = 0.0;
    let mut a1_detail = None;
    for (d, detail) in [circulant_defect(&m.p, "p"), circulant_defect(&m.p_tilde, "p_tilde")] {
        if d > a1_defect {
            a1_defect = d;
            a1_detail = detail;
        }
    }
    for (name, x) in [("lambda", &m.lambda), ("tau", &m.tau), ("tau_tilde", &m.tau_tilde)] {
        let s = spread(x);
        if s > a1_defect {
            a1_defect = s;
            a1_detail = Some(format!("{name} is not constant"));
        }
    }
    for (name, x) in [("tau2", &m.tau2), ("tau_tilde2", &m.tau_tilde2)] {
        if let Some(x) = x {
            let s = spread(x);
            if s > a1_defect {
                a1_defect = s;
                a1_detail = Some(format!("{name} is not constant"));
            }
        }
    }
    let a1_pass = a1_defect <= A1_TOL;

    let mu_t = circulant_eigenvalues(&distance_distribution(&m.p_tilde));
    let (a2_gap, a2_k) = mu_t
        .iter()
        .take(n - 1)
        .enumerate()
        .map(|(k, mu)| ((Complex64::new(1.0, 0.0) - mu).norm(), k + 1))
        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
    let a2_pass = a2_gap > A2_MARGIN;

    let id = DMatrix::<f64>::identity(n, n);
    let lhs = (&id - &m.p) * (&id - m.p_tilde.transpose());
    let rhs = (&id - m.p.transpose()) * (&id - &m.p_tilde);
    let a3_defect = (lhs - rhs).amax();
    let a3_pass = a3_defect <= A3_TOL;

    AssumptionReport {
        a1: AssumptionCheck {
            pass: a1_pass,
            defect: a1_defect,
            detail: if a1_pass { None } else { a1_detail },
        },
        a2: AssumptionCheck {
            pass: a2_pass,
            defect: a2_gap,
            detail: (!a2_pass).then(|| format!("|1 - mu~_{a2_k}| = {a2_gap:e}")),
        },
        a3: AssumptionCheck {
            pass: a3_pass,
            defect: a3_defect,
            detail: (!a3_pass).then(|| format!("commutation defect {a3_defect:e}")),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetricProfile {
    pub n: usize,
    pub p_dist: Vec<f64>,
    pub p_tilde_dist: Vec<f64>,
    pub alpha: f64,
    pub alpha_tilde: f64,
    /// `alpha2[d - 1]` for `d = 1..N`.
    pub alpha2: Vec<f64>,
    pub alpha_tilde2: Vec<f64>,
    pub mu: Vec<Complex64>,
    pub mu_tilde: Vec<Complex64>,
    /// Mixed first moment; `None` when `N alpha >= 1`.
    pub alpha_bar: Option<f64>,
    pub alpha_bar2: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl SymmetricProfile {
    pub fn new(
        p_dist: Vec<f64>,
        p_tilde_dist: Vec<f64>,
        alpha: f64,
        alpha_tilde: f64,
        alpha2: Vec<f64>,
        alpha_tilde2: Vec<f64>,
    ) -> Result<Self> {
        let n = p_dist.len();
        if n < 2 || [p_tilde_dist.len(), alpha2.len(), alpha_tilde2.len()] != [n; 3] {
            return Err(Error::InvalidConfig(format!(
                "profile vectors must all have length N >= 2 (got {n}, {}, {}, {})",
                p_tilde_dist.len(),
                alpha2.len(),
                alpha_tilde2.len()
            )));
        }
        for (name, p) in [("p_dist", &p_dist), ("p_tilde_dist", &p_tilde_dist)] {
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > SUM_TOL || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidConfig(format!(
                    "{name} is not a probability vector (sum {s})"
                )));
            }
        }
        let mut warnings = Vec::new();
        for (name, a2) in [("alpha2", &alpha2), ("alpha_tilde2", &alpha_tilde2)] {
            let asym = (1..n)
                .map(|d| (a2[d - 1] - a2[n - d - 1]).abs())
                .fold(0.0, f64::max);
            if asym > SUM_TOL * (1.0 + a2.iter().fold(0.0_f64, |a, b| a.max(b.abs()))) {
                warnings.push(format!(
                    "{name} is not symmetric in the distance (defect {asym:e})"
                ));
            }
        }
        if alpha_tilde == 0.0 {
            warnings.push(
                "alpha_tilde = 0: the empty probability degenerates to 1 and the chain may be periodic"
                    .into(),
            );
        }
        let mu = circulant_eigenvalues(&p_dist);
        let mu_tilde = circulant_eigenvalues(&p_tilde_dist);
        let nf = n as f64;
        let (alpha_bar, alpha_bar2) = if nf * alpha < 1.0 {
            let p0 = (1.0 - nf * alpha) / (1.0 - nf * alpha + nf * alpha_tilde);
            (
                Some((1.0 - p0) * alpha + p0 * alpha_tilde),
                Some(
                    alpha2
                        .iter()
                        .zip(&alpha_tilde2)
                        .map(|(a, t)| (1.0 - p0) * a + p0 * t)
                        .collect(),
                ),
            )
        } else {
            (None, None)
        };
        Ok(SymmetricProfile {
            n,
            p_dist,
            p_tilde_dist,
            alpha,
            alpha_tilde,
            alpha2,
            alpha_tilde2,
            mu,
            mu_tilde,
            alpha_bar,
            alpha_bar2,
            warnings,
        })
    }

    /// Builds the profile of a compound Poisson model (its `batch`, or
    /// Poisson). A1 must hold and `tau2`, `tau_tilde2` must be present.
    pub fn from_model(m: &PollingModel) -> Result<Self> {
        ensure_valid(m)?;
        let report = check_assumptions(m);
        if !report.a1.pass {
            return Err(Error::Precondition(format!(
                "model is not rotationally symmetric: {}",
                report.a1.detail.unwrap_or_default()
            )));
        }
        let batch = m.batch_or_poisson();
        let spec = crate::waiting::CompoundPoissonSpec {
            lambda_hat: m.lambda[0] / batch.mean,
            b: batch.mean,
            b2: batch.second_moment,
            tau: m.tau[0],
            tau2: m.tau2()?[0],
            tau_tilde: m.tau_tilde[0],
            tau_tilde2: m.tau_tilde2()?[0],
            service: None,
        };
        Self::from_compound_poisson(
            &spec,
            distance_distribution(&m.p),
            distance_distribution(&m.p_tilde),
        )
    }

    pub fn from_compound_poisson(
        spec: &crate::waiting::CompoundPoissonSpec,
        p_dist: Vec<f64>,
        p_tilde_dist: Vec<f64>,
    ) -> Result<Self> {
        let mm = crate::waiting::compound_poisson_moments(spec, p_dist.len());
        Self::new(
            p_dist,
            p_tilde_dist,
            mm.alpha,
            mm.alpha_tilde,
            mm.alpha2,
            mm.alpha_tilde2,
        )
    }

    fn load(&self) -> f64 {
        self.n as f64 * self.alpha
    }

    fn stable(&self) -> Result<(f64, &[f64])> {
        match (self.alpha_bar, &self.alpha_bar2) {
            (Some(a), Some(a2)) => Ok((a, a2)),
            _ => Err(Error::UnstableRegime { load: self.load() }),
        }
    }

    fn check_a2(&self) -> Result<()> {
        for (l, m) in self.mu_tilde.iter().take(self.n - 1).enumerate() {
            if (Complex64::new(1.0, 0.0) - m).norm() <= A2_MARGIN {
                return Err(Error::DegenerateEigenvalue {
                    index: l + 1,
                    value: format!("{m}"),
                });
            }
        }
        Ok(())
    }

    /// `sum_{l<N} (mu_l - mu~_l)/(1 - mu~_l) * (1/2) sum_d alpha_bar2_d omega_l^d`.
    fn cross_sum(&self, ab2: &[f64]) -> Complex64 {
        let n = self.n;
        (1..n)
            .map(|l| {
                let inner: Complex64 = (1..=n)
                    .map(|d| ab2[d - 1] * root_pow(n, (l * d) as i64))
                    .sum();
                (self.mu[l - 1] - self.mu_tilde[l - 1]) / (1.0 - self.mu_tilde[l - 1]) * 0.5 * inner
            })
            .sum()
    }

    fn tilde_sum(&self) -> Complex64 {
        self.mu_tilde
            .iter()
            .take(self.n - 1)
            .map(|m| 1.0 / (1.0 - m))
            .sum()
    }
}

fn real_or_residual(z: Complex64) -> Result<f64> {
    if z.im.abs() > IMAG_TOL * (1.0 + z.re.abs()) {
        Err(Error::ComplexResidual {
            real: z.re,
            imag: z.im,
        })
    } else {
        Ok(z.re)
    }
}

/// Probability that the server finds its station empty,
/// `(1 - N alpha)/(1 - N alpha + N alpha~)`.
pub fn empty_probability(prof: &SymmetricProfile) -> Result<f64> {
    let na = prof.load();
    if na >= 1.0 {
        return Err(Error::UnstableRegime { load: na });
    }
    Ok((1.0 - na) / (1.0 - na + prof.n as f64 * prof.alpha_tilde))
}

/// Mean number of customers the server finds at the station it polls.
pub fn mean_queue_at_polling(prof: &SymmetricProfile) -> Result<f64> {
    let (ab, ab2) = prof.stable()?;
    prof.check_a2()?;
    let nf = prof.n as f64;
    let na = prof.load();
    let nat = nf * prof.alpha_tilde;
    let d = 1.0 - na;
    let total: Complex64 = nf * ab
        + nat * ab / d * prof.tilde_sum()
        + Complex64::from((1.0 - na + nat) / d * nf / 2.0 * ab2[prof.n - 1])
        + (na - nat) / d * 0.5 * ab2.iter().sum::<f64>()
        - nat / d * prof.cross_sum(ab2);
    real_or_residual(total)
}

/// Mean number of customers at an arbitrary station at a polling instant.
pub fn mean_queue_arbitrary(prof: &SymmetricProfile) -> Result<f64> {
    let (ab, ab2) = prof.stable()?;
    prof.check_a2()?;
    let nf = prof.n as f64;
    let na = prof.load();
    let nat = nf * prof.alpha_tilde;
    let d = 1.0 - na;
    let total: Complex64 = ab
        + prof.alpha_tilde / d * prof.tilde_sum()
        + Complex64::from((1.0 - na + nat) / d * nf / 2.0 * ab2[prof.n - 1])
        + (na - nat) / d * 0.5 * ab2.iter().sum::<f64>()
        - (1.0 - na + nat) / d * prof.cross_sum(ab2);
    real_or_residual(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::server::solve_server_distribution;
    use crate::waiting::CompoundPoissonSpec;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn cyclic(n: usize) -> Vec<f64> {
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        p
    }

    fn poisson_profile(n: usize, p: Vec<f64>, pt: Vec<f64>, lambda: f64, tau: f64, tt: f64) -> SymmetricProfile {
        let spec = CompoundPoissonSpec::poisson(lambda, tau, tau * tau, tt, tt * tt);
        assert_eq!(p.len(), n);
        SymmetricProfile::from_compound_poisson(&spec, p, pt).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        let mu = circulant_eigenvalues(&cyclic(5));
        let basis = CirculantBasis::new(5);
        for k in 0..5 {
            assert!((mu[k] - basis.omega[k]).norm() < 1e-14);
        }
        let mut id = vec![0.0; 4];
        id[3] = 1.0;
        for m in circulant_eigenvalues(&id) {
            assert!((m - 1.0).norm() < 1e-14);
        }
        let mu = circulant_eigenvalues(&[0.2; 5]);
        for m in &mu[..4] {
            assert!(m.norm() < 1e-14);
        }
        assert!((mu[4] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn basis_is_orthogonal_and_ends_with_ones() {
        let b = CirculantBasis::new(6);
        for x in &b.v[5] {
            assert!((x - 1.0).norm() < 1e-14);
        }
        for k in 0..6 {
            for l in 0..6 {
                let ip: Complex64 = b.v[k].iter().zip(&b.v[l]).map(|(x, y)| x * y.conj()).sum();
                let want = if k == l { 6.0 } else { 0.0 };
                assert!((ip - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigen_sum_examples() {
        close(eigen_sum(&circulant_eigenvalues(&cyclic(4))).unwrap(), 1.5, 1e-12);
        close(eigen_sum(&circulant_eigenvalues(&[0.2; 5])).unwrap(), 4.0, 1e-12);
        let mut stay = vec![0.0; 3];
        stay[2] = 1.0;
        assert!(matches!(
            eigen_sum(&circulant_eigenvalues(&stay)),
            Err(Error::DegenerateEigenvalue { index: 1, .. })
        ));
    }

    fn log_abs_det_shifted(p: &DMatrix<f64>, x: f64) -> f64 {
        let n = p.nrows();
        let a = DMatrix::identity(n, n) * x - p;
        a.determinant().abs().ln() - (x - 1.0).abs().ln()
    }

    #[test]
    fn eigen_sum_matches_characteristic_polynomial() {
        for p in [vec![0.5, 0.2, 0.3], vec![0.1, 0.6, 0.1, 0.2], cyclic(5)] {
            let pm = circulant_matrix(&p);
            let h = 1e-5;
            let deriv = (log_abs_det_shifted(&pm, 1.0 + h) - log_abs_det_shifted(&pm, 1.0 - h)) / (2.0 * h);
            close(eigen_sum(&circulant_eigenvalues(&p)).unwrap(), deriv, 1e-6);
        }
    }

    #[test]
    fn assumption_examples() {
        let p = circulant_matrix(&cyclic(3));
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        let m = PollingModel::new(rows(&p), rows(&p), vec![0.1; 3], vec![1.0; 3], vec![0.5; 3]);
        assert!(check_assumptions(&m).all_pass());

        let sym = circulant_matrix(&[0.3, 0.3, 0.4]);
        let sym_t = circulant_matrix(&[0.25, 0.25, 0.5]);
        let m = PollingModel::new(rows(&sym), rows(&sym_t), vec![0.1; 3], vec![1.0; 3], vec![0.5; 3]);
        assert!(check_assumptions(&m).a3.pass);

        let bad = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]];
        let m = PollingModel::new(bad.clone(), bad, vec![0.1; 3], vec![1.0; 3], vec![0.5; 3]);
        let r = check_assumptions(&m);
        assert!(!r.a1.pass);
        assert_eq!(r.a1.detail.as_deref(), Some("p[3][1]"));
    }

    #[test]
    fn empty_probability_examples() {
        let prof = SymmetricProfile::new(cyclic(2), cyclic(2), 0.1, 0.1, vec![0.0; 2], vec![0.0; 2]).unwrap();
        close(empty_probability(&prof).unwrap(), 0.8, 1e-15);
        let prof = SymmetricProfile::new(cyclic(2), cyclic(2), 0.1, 0.2, vec![0.0; 2], vec![0.0; 2]).unwrap();
        close(empty_probability(&prof).unwrap(), 2.0 / 3.0, 1e-15);
        let prof = SymmetricProfile::new(cyclic(2), cyclic(2), 0.1, 0.0, vec![0.0; 2], vec![0.0; 2]).unwrap();
        close(empty_probability(&prof).unwrap(), 1.0, 0.0);
        assert!(!prof.warnings.is_empty());
        let prof = SymmetricProfile::new(cyclic(2), cyclic(2), 0.5, 0.1, vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(matches!(empty_probability(&prof), Err(Error::UnstableRegime { .. })));
        assert!(matches!(mean_queue_at_polling(&prof), Err(Error::UnstableRegime { .. })));
    }

    #[test]
    fn empty_probability_matches_solver() {
        let p = circulant_matrix(&[0.2, 0.2, 0.6]);
        let pt = circulant_matrix(&[0.4, 0.4, 0.2]);
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        let m = PollingModel::new(rows(&p), rows(&pt), vec![0.08; 3], vec![1.2; 3], vec![0.4; 3])
            .with_second_moments(vec![1.44; 3], vec![0.16; 3]);
        let d = solve_server_distribution(&m).unwrap();
        let prof = SymmetricProfile::from_model(&m).unwrap();
        for i in 0..3 {
            close(d.f[i], 1.0 / 3.0, 1e-10);
        }
        close(empty_probability(&prof).unwrap(), d.f_tilde[0] / d.f[0], 1e-10);
    }

    // Reference values come from the stationary law of the exact embedded
    // chain, truncated far out in the tail.
    #[test]
    fn closed_forms_match_exact_chain() {
        let prof = poisson_profile(2, cyclic(2), cyclic(2), 0.1, 1.5, 0.5);
        close(mean_queue_at_polling(&prof).unwrap(), 0.136607, 1e-6);
        close(mean_queue_arbitrary(&prof).unwrap(), 0.105357, 1e-6);
        close(empty_probability(&prof).unwrap(), 0.875, 1e-12);

        let prof = poisson_profile(2, vec![0.7, 0.3], vec![0.5, 0.5], 0.15, 1.0, 0.6);
        close(mean_queue_at_polling(&prof).unwrap(), 0.246623, 1e-6);
        close(mean_queue_arbitrary(&prof).unwrap(), 0.246623, 1e-6);
        close(empty_probability(&prof).unwrap(), 0.795455, 1e-6);

        let prof = poisson_profile(3, cyclic(3), cyclic(3), 0.08, 1.5, 0.5);
        close(mean_queue_at_polling(&prof).unwrap(), 0.17625, 1e-6);
        close(mean_queue_arbitrary(&prof).unwrap(), 0.123618, 1e-6);

        let prof = poisson_profile(3, vec![0.2, 0.2, 0.6], vec![0.4, 0.4, 0.2], 0.08, 1.2, 0.4);
        close(mean_queue_at_polling(&prof).unwrap(), 0.131919, 1e-6);
        close(mean_queue_arbitrary(&prof).unwrap(), 0.118718, 1e-6);
    }

    #[test]
    fn distance_symmetric_output_is_real() {
        let prof = poisson_profile(3, vec![0.3, 0.3, 0.4], vec![0.35, 0.35, 0.3], 0.1, 1.0, 0.5);
        let x = mean_queue_at_polling(&prof).unwrap();
        assert!(x.is_finite() && x > 0.0);
    }
}
