//! Stationary distribution of the server position.
//!
//! Unknowns are `(F_1, .., F_N, tau_bar)`. The balance equations
//!
//! ```text
//! F_j = sum_i p~_ij F_i + tau_bar * sum_i lambda_i (p_ij - p~_ij)
//! (1 - rho_hat) tau_bar = sum_j F_j tau~_j
//! sum_j F_j = 1
//! ```
//!
//! have one redundant balance row (they sum to zero); the last one is
//! replaced by the normalisation. `F~_j = F_j - lambda_j tau_bar` and the
//! mean cycle time of station `j` is `tau_bar / F_j`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve_dense, CONDITION_WARNING};
use crate::model::{
    arrival_matrices, compatibility_check, ensure_valid, essential_classes, traffic_summary,
    PollingModel,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerDistribution {
    /// `F_j = P(S = j)`.
    pub f: Vec<f64>,
    /// `F~_j = P(S = j, X_j = 0)`. Negative entries signal an unstable instance.
    pub f_tilde: Vec<f64>,
    /// Mean time between two polling instants.
    pub tau_bar: f64,
    /// Mean time between consecutive visits to each station.
    pub cycle: Vec<f64>,
    pub rho_hat: f64,
    /// 2-norm condition number of the solved system.
    pub condition: f64,
    pub warnings: Vec<String>,
}

impl ServerDistribution {
    /// `P(X_j = 0 | S = j)`.
    pub fn empty_given_polled(&self) -> Vec<f64> {
        self.f_tilde.iter().zip(&self.f).map(|(a, b)| a / b).collect()
    }
}

pub fn solve_server_distribution(m: &PollingModel) -> Result<ServerDistribution> {
    ensure_valid(m)?;
    let n = m.n();
    let traffic = traffic_summary(m);
    if traffic.degenerate {
        return Err(Error::DegenerateTraffic {
            rho_hat: traffic.rho_hat,
        });
    }
    let classes = essential_classes(&m.p_tilde);
    if classes.len() > 1 {
        let residuals = compatibility_check(m, &classes);
        return Err(Error::MultipleEssentialClasses { classes, residuals });
    }

    let mut a = DMatrix::zeros(n + 1, n + 1);
    let mut b = DVector::zeros(n + 1);
    for j in 0..n - 1 {
        a[(j, j)] += 1.0;
        for i in 0..n {
            a[(j, i)] -= m.p_tilde[(i, j)];
            a[(j, n)] -= m.lambda[i] * (m.p[(i, j)] - m.p_tilde[(i, j)]);
        }
    }
    for i in 0..n {
        a[(n - 1, i)] = 1.0;
    }
    b[n - 1] = 1.0;
    for i in 0..n {
        a[(n, i)] = -m.tau_tilde[i];
    }
    a[(n, n)] = 1.0 - traffic.rho_hat;

    let sol = solve_dense(&a, &b)?;
    let f: Vec<f64> = sol.x.iter().take(n).copied().collect();
    let tau_bar = sol.x[n];

    let mut warnings = Vec::new();
    if sol.condition > CONDITION_WARNING {
        warnings.push(format!("ill-conditioned system (condition {:e})", sol.condition));
    }
    // psi_j = F_j / tau_bar must satisfy sum_i psi_i tau~_i = 1 - rho_hat
    let psi_defect = (f.iter().zip(&m.tau_tilde).map(|(x, t)| x * t).sum::<f64>() / tau_bar
        - (1.0 - traffic.rho_hat))
        .abs();
    if psi_defect > 1e-8 {
        warnings.push(format!("psi normalisation defect {psi_defect:e}"));
    }

    let f_tilde: Vec<f64> = (0..n).map(|j| f[j] - m.lambda[j] * tau_bar).collect();
    if let Some(j) = f_tilde.iter().position(|&x| x < 0.0) {
        warnings.push(format!(
            "F~_{} = {} < 0: lambda_j tau_bar exceeds F_j, the instance cannot be ergodic",
            j + 1,
            f_tilde[j]
        ));
    }
    let cycle = f.iter().map(|&x| tau_bar / x).collect();
    Ok(ServerDistribution {
        f,
        f_tilde,
        tau_bar,
        cycle,
        rho_hat: traffic.rho_hat,
        condition: sol.condition,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowResiduals {
    /// Max-norm of `F^T [I - P] - F~^T [P~ - P]`.
    pub routing: f64,
    /// Max-norm of `F^T [I - A] - F~^T [I - A + A~]`.
    pub flux: f64,
}

impl FlowResiduals {
    pub fn max(&self) -> f64 {
        self.routing.max(self.flux)
    }
}

/// Residuals of the two matrix balance equations, evaluated on `d`.
pub fn flow_residuals(m: &PollingModel, d: &ServerDistribution) -> FlowResiduals {
    let n = m.n();
    let f = DVector::from_column_slice(&d.f);
    let ft = DVector::from_column_slice(&d.f_tilde);
    let id = DMatrix::<f64>::identity(n, n);
    let am = arrival_matrices(m);

    let r1 = (id.clone() - &m.p).tr_mul(&f) - (&m.p_tilde - &m.p).tr_mul(&ft);
    let r2 = (id.clone() - &am.a_mat).tr_mul(&f)
        - (id - &am.a_mat + &am.a_tilde_mat).tr_mul(&ft);
    FlowResiduals {
        routing: r1.amax(),
        flux: r2.amax(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryConditions {
    /// `1 - rho_hat`; must be positive.
    pub rho_margin: f64,
    /// `F_i - lambda_i tau_bar` per station; each must be positive.
    pub flux_margins: Vec<f64>,
    /// `1 - sum_j lambda_j tau_j`; positive whenever the other two hold.
    pub load_margin: f64,
}

impl NecessaryConditions {
    pub fn rho_holds(&self) -> bool {
        self.rho_margin > 0.0
    }

    pub fn flux_holds(&self) -> bool {
        self.flux_margins.iter().all(|&x| x > 0.0)
    }

    pub fn load_holds(&self) -> bool {
        self.load_margin > 0.0
    }

    pub fn all_hold(&self) -> bool {
        self.rho_holds() && self.flux_holds() && self.load_holds()
    }

    /// Smallest margin among the strict conditions.
    pub fn min_margin(&self) -> f64 {
        self.flux_margins
            .iter()
            .copied()
            .fold(self.rho_margin, f64::min)
    }
}

pub fn necessary_conditions(m: &PollingModel, d: &ServerDistribution) -> NecessaryConditions {
    let t = traffic_summary(m);
    NecessaryConditions {
        rho_margin: 1.0 - t.rho_hat,
        flux_margins: (0..m.n())
            .map(|i| d.f[i] - m.lambda[i] * d.tau_bar)
            .collect(),
        load_margin: 1.0 - t.load_sum,
    }
}
