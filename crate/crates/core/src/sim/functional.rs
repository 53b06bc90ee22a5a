//! Empirical check of the functional equation linking the generating
//! functions `F(z)` and `F~(z)` at polling instants:
//! `[I - A D(z)] F(z) = [A~(z) - A D(z)] F~(z)`, `D(z) = diag(1/z_i)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::engine::{run_replications, Engine, PollObserver, SimConfig};
use crate::error::{Error, Result};
use crate::model::PollingModel;

pub const BOOTSTRAP_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub z: Vec<Complex64>,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    /// Bootstrap standard error of the residual vector (root of the summed
    /// component variances).
    pub se: f64,
    /// Residual with the stations of the estimates swapped (reversed),
    /// which should be far from zero.
    pub control_residual: f64,
}

impl ResidualPoint {
    pub fn standardized(&self) -> f64 {
        self.residual / self.se
    }

    pub fn control_standardized(&self) -> f64 {
        self.control_residual / self.se
    }
}

struct PgfObserver<'a> {
    z: &'a [Vec<Complex64>],
    // [point][station] running sums of z^X 1{S = i} and z^X 1{S = i, X_i = 0}
    f: Vec<Vec<Complex64>>,
    f_tilde: Vec<Vec<Complex64>>,
    polls: u64,
}

impl PollObserver for PgfObserver<'_> {
    fn observe(&mut self, s: usize, queues: &[usize]) {
        self.polls += 1;
        for (k, z) in self.z.iter().enumerate() {
            let w: Complex64 = z
                .iter()
                .zip(queues)
                .map(|(zq, &x)| zq.powu(x as u32))
                .product();
            self.f[k][s] += w;
            if queues[s] == 0 {
                self.f_tilde[k][s] += w;
            }
        }
    }
}

/// `(A(z), A~(z))` with `A_ij = p_ji a_ji(z)`, where `a_ji` is the joint
/// generating function of arrivals while travelling from `j`.
fn arrival_transforms(engine: &Engine, m: &PollingModel, z: &[Complex64]) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n = m.n();
    let batch = engine.batch();
    let s: Complex64 = (0..n)
        .map(|q| m.lambda[q] / batch.mean() * (1.0 - batch.pgf(z[q])))
        .sum();
    let laws = engine.laws();
    let a = DMatrix::from_fn(n, n, |i, j| m.p[(j, i)] * laws[j].busy.laplace(s));
    let at = DMatrix::from_fn(n, n, |i, j| m.p_tilde[(j, i)] * laws[j].empty.laplace(s));
    (a, at)
}

fn residual_vector(
    a: &DMatrix<Complex64>,
    at: &DMatrix<Complex64>,
    z: &[Complex64],
    f: &[Complex64],
    ft: &[Complex64],
) -> DVector<Complex64> {
    let n = z.len();
    let ad = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / z[j]);
    let id = DMatrix::<Complex64>::identity(n, n);
    let f = DVector::from_column_slice(f);
    let ft = DVector::from_column_slice(ft);
    (&id - &ad) * f - (at - &ad) * ft
}

fn norm(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Estimates the functional-equation residual at each point of the closed
/// unit polydisc, from the same simulated paths. Points must have non-zero
/// coordinates.
pub fn functional_residual(m: &PollingModel, cfg: &SimConfig, z_points: &[Vec<Complex64>]) -> Result<Vec<ResidualPoint>> {
    let n = m.n();
    for z in z_points {
        if z.len() != n || z.iter().any(|c| !(c.norm() <= 1.0 && c.norm() > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "z points need {n} non-zero coordinates with modulus at most 1"
            )));
        }
    }
    if cfg.replications < 2 {
        return Err(Error::InvalidConfig("the bootstrap needs at least two replications".into()));
    }
    let engine = Engine::new(m, cfg)?;
    let k = z_points.len();
    let runs = run_replications(&engine, cfg, || PgfObserver {
        z: z_points,
        f: vec![vec![Complex64::new(0.0, 0.0); n]; k],
        f_tilde: vec![vec![Complex64::new(0.0, 0.0); n]; k],
        polls: 0,
    });
    // per-replication estimates [rep][point][station]
    let scale = |v: &Vec<Vec<Complex64>>, polls: u64| -> Vec<Vec<Complex64>> {
        v.iter()
            .map(|row| row.iter().map(|c| c / polls as f64).collect())
            .collect()
    };
    let f_reps: Vec<_> = runs.iter().map(|(_, o)| scale(&o.f, o.polls)).collect();
    let ft_reps: Vec<_> = runs.iter().map(|(_, o)| scale(&o.f_tilde, o.polls)).collect();
    let reps = runs.len();

    let mean_over = |idx: &[usize], data: &[Vec<Vec<Complex64>>], p: usize| -> Vec<Complex64> {
        (0..n)
            .map(|i| idx.iter().map(|&r| data[r][p][i]).sum::<Complex64>() / idx.len() as f64)
            .collect()
    };

    let mut boot_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_b007);
    let all: Vec<usize> = (0..reps).collect();
    let samples: Vec<Vec<usize>> = (0..BOOTSTRAP_SAMPLES)
        .map(|_| (0..reps).map(|_| boot_rng.random_range(0..reps)).collect())
        .collect();

    let mut out = Vec::with_capacity(k);
    for (p, z) in z_points.iter().enumerate() {
        let (a, at) = arrival_transforms(&engine, m, z);
        let f = mean_over(&all, &f_reps, p);
        let ft = mean_over(&all, &ft_reps, p);
        let r = residual_vector(&a, &at, z, &f, &ft);

        let boots: Vec<DVector<Complex64>> = samples
            .iter()
            .map(|idx| residual_vector(&a, &at, z, &mean_over(idx, &f_reps, p), &mean_over(idx, &ft_reps, p)))
            .collect();
        let bmean = boots.iter().fold(DVector::zeros(n), |acc, b| acc + b).map(|c| c / BOOTSTRAP_SAMPLES as f64);
        let var: f64 = boots.iter().map(|b| norm(&(b - &bmean)).powi(2)).sum::<f64>()
            / (BOOTSTRAP_SAMPLES - 1) as f64;

        let rev = |v: &[Complex64]| v.iter().rev().copied().collect::<Vec<_>>();
        let control = residual_vector(&a, &at, z, &rev(&f), &rev(&ft));
        out.push(ResidualPoint {
            z: z.clone(),
            residual: norm(&r),
            se: var.sqrt(),
            control_residual: norm(&control),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::laws::TravelChoice;

    #[test]
    fn rejects_points_outside_the_polydisc() {
        let m = PollingModel::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.1; 2],
            vec![1.0; 2],
            vec![0.5; 2],
        );
        let cfg = SimConfig {
            horizon: 10_000,
            replications: 2,
            ..SimConfig::default()
        };
        let z = vec![vec![Complex64::new(1.1, 0.0), Complex64::new(0.5, 0.0)]];
        assert!(functional_residual(&m, &cfg, &z).is_err());
    }

    #[test]
    fn residual_is_small_at_the_identity_point() {
        let m = PollingModel::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![0.1, 0.2],
            vec![1.0; 2],
            vec![0.5; 2],
        );
        let cfg = SimConfig {
            horizon: 50_000,
            replications: 4,
            travel_law: TravelChoice::Exponential,
            ..SimConfig::default()
        };
        let one = Complex64::new(1.0, 0.0);
        let r = functional_residual(&m, &cfg, &[vec![one, one]]).unwrap();
        assert!(r[0].standardized() < 5.0, "{:?}", r[0]);
    }
}
