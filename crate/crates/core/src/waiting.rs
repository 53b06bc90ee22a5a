//! Mean waiting time in symmetric systems with compound Poisson arrivals,
//! plus closed forms for the common special schedules.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Violation;
use crate::symmetric::{circulant_eigenvalues, eigen_sum, A2_MARGIN};

/// Switchover and service moments of a symmetric system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceMoments {
    /// Mean switchover time.
    pub w: f64,
    pub w2: f64,
    /// Mean service time.
    pub sigma: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompoundPoissonSpec {
    /// Batch rate per station.
    pub lambda_hat: f64,
    pub b: f64,
    pub b2: f64,
    pub tau: f64,
    pub tau2: f64,
    pub tau_tilde: f64,
    pub tau_tilde2: f64,
    pub service: Option<ServiceMoments>,
}

impl CompoundPoissonSpec {
    /// Single arrivals at rate `lambda`.
    pub fn poisson(lambda: f64, tau: f64, tau2: f64, tau_tilde: f64, tau_tilde2: f64) -> Self {
        CompoundPoissonSpec {
            lambda_hat: lambda,
            b: 1.0,
            b2: 1.0,
            tau,
            tau2,
            tau_tilde,
            tau_tilde2,
            service: None,
        }
    }

    /// Inter-poll moments composed from independent switchover and service
    /// times: `tau = w + sigma`, `tau~ = w`.
    pub fn from_service(lambda_hat: f64, b: f64, b2: f64, s: ServiceMoments) -> Self {
        CompoundPoissonSpec {
            lambda_hat,
            b,
            b2,
            tau: s.w + s.sigma,
            tau2: s.w2 + 2.0 * s.w * s.sigma + s.sigma2,
            tau_tilde: s.w,
            tau_tilde2: s.w2,
            service: Some(s),
        }
    }

    /// Customer arrival rate `lambda_hat * b`.
    pub fn lambda(&self) -> f64 {
        self.lambda_hat * self.b
    }

    pub fn is_poisson(&self) -> bool {
        (self.b2 - self.b).abs() <= 1e-12
    }

    pub fn validate(&self) -> Result<()> {
        let mut out = Vec::new();
        let mut bad = |path: &str, message: &str, defect: f64| {
            out.push(Violation {
                path: path.into(),
                message: message.into(),
                defect,
            })
        };
        if !(self.lambda_hat > 0.0) {
            bad("lambda_hat", "batch rate must be positive", -self.lambda_hat);
        }
        if !(self.b >= 1.0) {
            bad("b", "mean batch size must be at least 1", 1.0 - self.b);
        }
        if !(self.b2 >= self.b && self.b2 >= self.b * self.b * (1.0 - 1e-12)) {
            bad("b2", "batch second moment must be at least b and b^2", self.b.max(self.b * self.b) - self.b2);
        }
        let mut pair = |name: &str, name2: &str, m: f64, m2: f64| {
            if !(m > 0.0) {
                bad(name, "mean must be positive", -m);
            } else if !(m2 >= m * m * (1.0 - 1e-12)) {
                bad(name2, "second moment below squared mean (negative variance)", m * m - m2);
            }
        };
        pair("tau", "tau2", self.tau, self.tau2);
        pair("tau_tilde", "tau_tilde2", self.tau_tilde, self.tau_tilde2);
        if let Some(s) = self.service {
            pair("service.w", "service.w2", s.w, s.w2);
            if !(s.sigma >= 0.0 && s.sigma2 >= s.sigma * s.sigma * (1.0 - 1e-12)) {
                bad("service.sigma2", "service moments are inconsistent", s.sigma * s.sigma - s.sigma2);
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(out))
        }
    }

    fn service(&self) -> Result<ServiceMoments> {
        self.service.ok_or(Error::MissingField("service"))
    }
}

/// First and second moments of the arrivals per inter-poll interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrivalMoments {
    pub alpha: f64,
    pub alpha_tilde: f64,
    /// `alpha2[d - 1]`, `d = 1..N`; index `N - 1` is the station itself.
    pub alpha2: Vec<f64>,
    pub alpha_tilde2: Vec<f64>,
}

pub fn compound_poisson_moments(spec: &CompoundPoissonSpec, n: usize) -> ArrivalMoments {
    let lam = spec.lambda();
    let family = |t: f64, t2: f64| {
        let mut v = vec![lam * lam * t2; n];
        v[n - 1] += spec.lambda_hat * (spec.b2 - spec.b) * t;
        v
    };
    ArrivalMoments {
        alpha: lam * spec.tau,
        alpha_tilde: lam * spec.tau_tilde,
        alpha2: family(spec.tau, spec.tau2),
        alpha_tilde2: family(spec.tau_tilde, spec.tau_tilde2),
    }
}

fn denominator(n: usize, lambda: f64, tau: f64) -> Result<f64> {
    let load = n as f64 * lambda * tau;
    if load >= 1.0 {
        Err(Error::UnstableRegime { load })
    } else {
        Ok(1.0 - load)
    }
}

/// Mean stationary waiting time. `mu` and `mu_tilde` are the eigenvalues of
/// `P` and `P~` (length `N`, `mu_N = 1` last).
pub fn mean_wait(spec: &CompoundPoissonSpec, mu: &[Complex64], mu_tilde: &[Complex64]) -> Result<f64> {
    spec.validate()?;
    let n = mu.len();
    if mu_tilde.len() != n || n < 2 {
        return Err(Error::InvalidConfig("mu and mu_tilde must have equal length N >= 2".into()));
    }
    let d = denominator(n, spec.lambda(), spec.tau)?;
    let tilde_sum = eigen_sum(mu_tilde)?;
    let cross: Complex64 = (0..n - 1)
        .map(|l| (mu[l] - mu_tilde[l]) / (1.0 - mu_tilde[l]))
        .sum();
    if cross.im.abs() > 1e-9 * (1.0 + cross.re.abs()) {
        return Err(Error::ComplexResidual {
            real: cross.re,
            imag: cross.im,
        });
    }
    let nf = n as f64;
    let tt = spec.tau_tilde;
    Ok(tt / d * tilde_sum
        + nf * spec.lambda() * spec.tau2 / (2.0 * d)
        + spec.tau_tilde2 / (2.0 * tt)
        + (spec.b2 - spec.b) / (2.0 * spec.b)
            * ((spec.tau + (nf - 1.0) * tt) / d - tt / d * cross.re))
}

/// 1-limited service with `P = P~`, `tau = w + sigma`, `tau~ = w`.
pub fn mean_wait_state_independent(spec: &CompoundPoissonSpec, mu: &[Complex64]) -> Result<f64> {
    spec.validate()?;
    let s = spec.service()?;
    let n = mu.len();
    let nf = n as f64;
    let lam = spec.lambda();
    let d = denominator(n, lam, s.w + s.sigma)?;
    Ok(s.w / d * eigen_sum(mu)?
        + nf * lam * (s.w2 + 2.0 * s.w * s.sigma + s.sigma2) / (2.0 * d)
        + s.w2 / (2.0 * s.w)
        + (spec.b2 - spec.b) / (2.0 * spec.b) * (nf * s.w + s.sigma) / d)
}

/// Bernoulli schedule: after a service the server leaves with probability
/// `pi` (routing by `P~`) and otherwise stays. Poisson arrivals only.
pub fn mean_wait_bernoulli(spec: &CompoundPoissonSpec, p_tilde_dist: &[f64], pi: f64) -> Result<f64> {
    spec.validate()?;
    let s = spec.service()?;
    if !(0.0..=1.0).contains(&pi) {
        return Err(Error::Precondition(format!("exit probability {pi} outside [0, 1]")));
    }
    if !spec.is_poisson() {
        return Err(Error::Precondition(
            "the Bernoulli form requires single (Poisson) arrivals".into(),
        ));
    }
    let n = p_tilde_dist.len();
    let nf = n as f64;
    let lam = spec.lambda();
    let d = denominator(n, lam, pi * s.w + s.sigma)?;
    let mu_t = circulant_eigenvalues(p_tilde_dist);
    Ok(s.w / d * eigen_sum(&mu_t)?
        + nf * lam * (pi * s.w2 + 2.0 * pi * s.w * s.sigma + s.sigma2) / (2.0 * d)
        + s.w2 / (2.0 * s.w))
}

/// Exhaustive service with routing `P~` between queues. Poisson arrivals only.
pub fn mean_wait_exhaustive(spec: &CompoundPoissonSpec, p_tilde_dist: &[f64]) -> Result<f64> {
    spec.validate()?;
    let s = spec.service()?;
    if !spec.is_poisson() {
        return Err(Error::Precondition(
            "the exhaustive form requires single (Poisson) arrivals".into(),
        ));
    }
    let n = p_tilde_dist.len();
    let nf = n as f64;
    let lam = spec.lambda();
    let d = denominator(n, lam, s.sigma)?;
    let mu_t = circulant_eigenvalues(p_tilde_dist);
    Ok(s.w / d * eigen_sum(&mu_t)? + nf * lam * s.sigma2 / (2.0 * d) + s.w2 / (2.0 * s.w))
}

/// Routing distance distribution `P = (1 - pi) I + pi P~`.
pub fn bernoulli_routing(p_tilde_dist: &[f64], pi: f64) -> Vec<f64> {
    let n = p_tilde_dist.len();
    p_tilde_dist
        .iter()
        .enumerate()
        .map(|(d, &p)| pi * p + if d == n - 1 { 1.0 - pi } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub name: String,
    /// Distance distribution used for both `P` and `P~`.
    pub p_dist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyRow {
    pub name: String,
    pub mean_wait: f64,
    pub eigen_sum: f64,
    /// `Some(s)` when the candidate is the pure shift by `s`, co-prime to `N`.
    pub pure_shift: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyTable {
    /// Sorted by ascending mean wait.
    pub rows: Vec<StrategyRow>,
    /// `Some(true)` when a pure co-prime shift is present and ranks first (up
    /// to 1e-12); `None` when no such candidate is present.
    pub cyclic_is_minimal: Option<bool>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The shift `s < N` when `p_s = 1` and `gcd(s, N) = 1`.
pub fn pure_shift(p_dist: &[f64]) -> Option<usize> {
    let n = p_dist.len();
    let s = p_dist.iter().position(|&p| (p - 1.0).abs() <= 1e-12)? + 1;
    (s < n && gcd(s, n) == 1).then_some(s)
}

/// Ranks state-independent Markovian strategies (`P = P~`) by mean wait.
pub fn strategy_compare(spec: &CompoundPoissonSpec, candidates: &[Candidate]) -> Result<StrategyTable> {
    let mut rows = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mu = circulant_eigenvalues(&c.p_dist);
        if mu.iter().take(mu.len() - 1).any(|m| (1.0 - m).norm() <= A2_MARGIN) {
            return Err(Error::Precondition(format!(
                "candidate `{}` is reducible (an eigenvalue other than mu_N equals 1)",
                c.name
            )));
        }
        rows.push(StrategyRow {
            name: c.name.clone(),
            mean_wait: mean_wait(spec, &mu, &mu)?,
            eigen_sum: eigen_sum(&mu)?,
            pure_shift: pure_shift(&c.p_dist),
        });
    }
    rows.sort_by(|a, b| a.mean_wait.total_cmp(&b.mean_wait));
    let best = rows.first().map(|r| r.mean_wait);
    let cyclic_is_minimal = rows
        .iter()
        .filter(|r| r.pure_shift.is_some())
        .map(|r| r.mean_wait)
        .reduce(f64::min)
        .zip(best)
        .map(|(c, b)| c <= b + 1e-12);
    Ok(StrategyTable {
        rows,
        cyclic_is_minimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetric::{empty_probability, mean_queue_at_polling, SymmetricProfile};

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn cyclic(n: usize) -> Vec<f64> {
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        p
    }

    fn service() -> ServiceMoments {
        ServiceMoments {
            w: 0.5,
            w2: 0.25,
            sigma: 1.0,
            sigma2: 1.0,
        }
    }

    #[test]
    fn moment_examples() {
        let spec = CompoundPoissonSpec {
            lambda_hat: 0.1,
            b: 2.0,
            b2: 6.0,
            tau: 1.0,
            tau2: 1.0,
            tau_tilde: 0.5,
            tau_tilde2: 0.25,
            service: None,
        };
        let m = compound_poisson_moments(&spec, 3);
        close(m.alpha, 0.2, 1e-15);
        close(m.alpha2[2], 0.44, 1e-15);
        close(m.alpha2[0], 0.04, 1e-15);
        close(m.alpha_tilde2[2], 0.01 + 0.2, 1e-15);

        let m = compound_poisson_moments(&CompoundPoissonSpec::poisson(0.1, 1.0, 2.0, 0.5, 0.5), 2);
        close(m.alpha2[1], 0.02, 1e-15);
    }

    #[test]
    fn cyclic_two_station_wait() {
        let spec = CompoundPoissonSpec::from_service(0.1, 1.0, 1.0, service());
        let mu = circulant_eigenvalues(&cyclic(2));
        close(mean_wait(&spec, &mu, &mu).unwrap(), 0.9285714285714286, 1e-12);
        close(mean_wait_state_independent(&spec, &mu).unwrap(), 0.9285714285714286, 1e-12);
    }

    #[test]
    fn batch_wait_matches_exact_chain() {
        // tau = 1.5, tau~ = 0.5, batches of exactly 2 at rate 0.04
        let s = ServiceMoments {
            w: 0.5,
            w2: 0.25,
            sigma: 1.0,
            sigma2: 1.0,
        };
        let spec = CompoundPoissonSpec::from_service(0.04, 2.0, 4.0, s);
        let mu = circulant_eigenvalues(&cyclic(2));
        let w = mean_wait(&spec, &mu, &mu).unwrap();
        close(w, 2.1316, 1e-4);
        close(mean_wait_state_independent(&spec, &mu).unwrap(), w, 1e-12);
    }

    #[test]
    fn head_of_line_identity() {
        for (p, pt) in [
            (vec![0.7, 0.3], vec![0.5, 0.5]),
            (vec![0.2, 0.2, 0.6], vec![0.4, 0.4, 0.2]),
            (vec![0.1, 0.3, 0.3, 0.3], vec![0.3, 0.2, 0.3, 0.2]),
        ] {
            let spec = CompoundPoissonSpec {
                lambda_hat: 0.03,
                b: 1.7,
                b2: 4.1,
                tau: 1.1,
                tau2: 1.6,
                tau_tilde: 0.4,
                tau_tilde2: 0.3,
                service: None,
            };
            let prof = SymmetricProfile::from_compound_poisson(&spec, p, pt).unwrap();
            let x = mean_queue_at_polling(&prof).unwrap();
            let p0 = empty_probability(&prof).unwrap();
            let w = mean_wait(&spec, &prof.mu, &prof.mu_tilde).unwrap();
            let hol = 1.0 + spec.lambda() * w + (spec.b2 - spec.b) / (2.0 * spec.b);
            close(x / (1.0 - p0), hol, 1e-9);
        }
    }

    #[test]
    fn random_minus_cyclic_is_eigen_sum_gap() {
        let spec = CompoundPoissonSpec::from_service(0.05, 1.0, 1.0, service());
        let n = 5;
        let c = mean_wait_state_independent(&spec, &circulant_eigenvalues(&cyclic(n))).unwrap();
        let r = mean_wait_state_independent(&spec, &circulant_eigenvalues(&vec![0.2; n])).unwrap();
        close(r - c, 0.5 / (1.0 - 5.0 * 0.05 * 1.5) * 2.0, 1e-12);
    }

    #[test]
    fn bernoulli_limits_and_cross_check() {
        let spec = CompoundPoissonSpec::from_service(0.05, 1.0, 1.0, service());
        let pt = vec![0.6, 0.1, 0.3];
        let ex = mean_wait_exhaustive(&spec, &pt).unwrap();
        close(mean_wait_bernoulli(&spec, &pt, 0.0).unwrap(), ex, 1e-12);
        for pi in [0.0, 0.3, 1.0] {
            let s = spec.service.unwrap();
            let composed = CompoundPoissonSpec::poisson(
                0.05,
                pi * s.w + s.sigma,
                pi * s.w2 + 2.0 * pi * s.w * s.sigma + s.sigma2,
                s.w,
                s.w2,
            );
            let mu = circulant_eigenvalues(&bernoulli_routing(&pt, pi));
            let mu_t = circulant_eigenvalues(&pt);
            close(
                mean_wait(&composed, &mu, &mu_t).unwrap(),
                mean_wait_bernoulli(&spec, &pt, pi).unwrap(),
                1e-12,
            );
        }
        let mu_t = circulant_eigenvalues(&pt);
        close(
            mean_wait_bernoulli(&spec, &pt, 1.0).unwrap(),
            mean_wait_state_independent(&spec, &mu_t).unwrap(),
            1e-12,
        );
    }

    #[test]
    fn unstable_and_missing_inputs() {
        let spec = CompoundPoissonSpec::from_service(0.4, 1.0, 1.0, service());
        let mu = circulant_eigenvalues(&cyclic(2));
        assert!(matches!(mean_wait(&spec, &mu, &mu), Err(Error::UnstableRegime { .. })));
        let spec = CompoundPoissonSpec::poisson(0.1, 1.5, 2.25, 0.5, 0.25);
        assert!(matches!(
            mean_wait_state_independent(&spec, &mu),
            Err(Error::MissingField("service"))
        ));
    }

    #[test]
    fn strategy_ranking() {
        let spec = CompoundPoissonSpec::from_service(0.05, 1.0, 1.0, service());
        let t = strategy_compare(
            &spec,
            &[
                Candidate {
                    name: "random".into(),
                    p_dist: vec![0.2; 5],
                },
                Candidate {
                    name: "cyclic".into(),
                    p_dist: cyclic(5),
                },
            ],
        )
        .unwrap();
        assert_eq!(t.rows[0].name, "cyclic");
        assert_eq!(t.rows[0].pure_shift, Some(1));
        assert_eq!(t.cyclic_is_minimal, Some(true));

        let t = strategy_compare(
            &spec,
            &[Candidate {
                name: "random".into(),
                p_dist: vec![0.2; 5],
            }],
        )
        .unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.cyclic_is_minimal, None);
    }

    #[test]
    fn shift_detection() {
        assert_eq!(pure_shift(&[0.0, 1.0, 0.0, 0.0, 0.0]), Some(2));
        assert_eq!(pure_shift(&[0.0, 1.0, 0.0, 0.0]), None);
        assert_eq!(pure_shift(&[0.0, 0.0, 1.0]), None);
    }
}
