use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::laws::{resolve_batch, resolve_travel, BatchLaw, StationLaws, TravelChoice};
use crate::error::{Error, Result};
use crate::model::{ensure_valid, PollingModel};

pub const MIN_HORIZON: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of polling instants per replication.
    pub horizon: u64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub replications: usize,
    pub travel_law: TravelChoice,
    /// `None` derives the law from the model's batch moments.
    pub batch_law: Option<BatchLaw>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 100_000,
            warmup_fraction: 0.1,
            seed: 1,
            replications: 10,
            travel_law: TravelChoice::Deterministic,
            batch_law: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < MIN_HORIZON {
            return Err(Error::InvalidConfig(format!(
                "horizon {} below the minimum of {MIN_HORIZON}",
                self.horizon
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidConfig(format!(
                "warmup fraction {} outside [0, 1)",
                self.warmup_fraction
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("at least one replication is required".into()));
        }
        Ok(())
    }

    fn warmup(&self) -> u64 {
        (self.horizon as f64 * self.warmup_fraction) as u64
    }
}

/// Hook called at every post-warmup polling instant with the polled station
/// and the queue lengths found there.
pub(crate) trait PollObserver {
    fn observe(&mut self, station: usize, queues: &[usize]);
}

impl PollObserver for () {
    fn observe(&mut self, _: usize, _: &[usize]) {}
}

/// Statistics of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationResult {
    pub polls: u64,
    pub served: u64,
    /// Share of polls at each station.
    pub f: Vec<f64>,
    /// Share of polls that found the station empty.
    pub f_tilde: Vec<f64>,
    /// Mean queue length at the polled station, per station.
    pub queue_at_poll: Vec<f64>,
    /// Mean queue length of each station over all polls.
    pub queue: Vec<f64>,
    /// Mean time between consecutive polls of each station.
    pub return_time: Vec<f64>,
    /// Mean time between consecutive polls.
    pub tau_bar: f64,
    pub mean_wait: f64,
    /// Mean total queue length in four consecutive blocks of polls.
    pub block_means: [f64; 4],
    pub final_total: usize,
}

impl ReplicationResult {
    pub fn empty_given_polled(&self) -> Vec<f64> {
        self.f_tilde.iter().zip(&self.f).map(|(t, f)| t / f).collect()
    }

    /// Four strictly increasing blocks with the last above `2 * first + 10`.
    pub fn looks_unstable(&self) -> bool {
        let b = self.block_means;
        b.windows(2).all(|w| w[1] > w[0]) && b[3] > 2.0 * b[0] + 10.0
    }
}

pub(crate) struct Engine<'a> {
    m: &'a PollingModel,
    laws: Vec<StationLaws>,
    batch: BatchLaw,
    route: Vec<WeightedIndex<f64>>,
    route_tilde: Vec<WeightedIndex<f64>>,
    gaps: Vec<Exp<f64>>,
}

fn routing_rows(p: &nalgebra::DMatrix<f64>) -> Result<Vec<WeightedIndex<f64>>> {
    (0..p.nrows())
        .map(|i| {
            WeightedIndex::new(p.row(i).iter().copied())
                .map_err(|e| Error::InvalidConfig(format!("routing row {}: {e}", i + 1)))
        })
        .collect()
}

impl<'a> Engine<'a> {
    pub(crate) fn new(m: &'a PollingModel, cfg: &SimConfig) -> Result<Self> {
        ensure_valid(m)?;
        cfg.validate()?;
        let laws = resolve_travel(m, &cfg.travel_law)?;
        let batch = resolve_batch(m, cfg.batch_law)?;
        let gaps = (0..m.n())
            .map(|q| Exp::new(m.lambda[q] / batch.mean()).expect("positive rate"))
            .collect();
        Ok(Engine {
            m,
            laws,
            batch,
            route: routing_rows(&m.p)?,
            route_tilde: routing_rows(&m.p_tilde)?,
            gaps,
        })
    }

    pub(crate) fn laws(&self) -> &[StationLaws] {
        &self.laws
    }

    pub(crate) fn batch(&self) -> BatchLaw {
        self.batch
    }

    pub(crate) fn run<O: PollObserver>(&self, cfg: &SimConfig, rep: usize, obs: &mut O) -> ReplicationResult {
        let n = self.m.n();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(rep as u64);

        let warmup = cfg.warmup();
        let measured = cfg.horizon - warmup;
        let block_len = (measured / 4).max(1);

        let mut queues: Vec<VecDeque<f64>> = vec![VecDeque::new(); n];
        let mut lens = vec![0usize; n];
        let mut next_arrival: Vec<f64> = self.gaps.iter().map(|g| g.sample(&mut rng)).collect();
        let mut t = 0.0;
        let mut s = 0;

        let mut polls_at = vec![0u64; n];
        let mut empty_at = vec![0u64; n];
        let mut sum_at = vec![0.0; n];
        let mut sum_q = vec![0.0; n];
        let mut last_poll = vec![f64::NAN; n];
        let mut ret_sum = vec![0.0; n];
        let mut ret_cnt = vec![0u64; n];
        let mut wait_sum = 0.0;
        let mut served = 0u64;
        let mut blocks = [0.0; 4];
        let mut t_start = 0.0;

        for k in 0..cfg.horizon {
            let counting = k >= warmup;
            if k == warmup {
                t_start = t;
            }
            let empty = lens[s] == 0;
            if counting {
                polls_at[s] += 1;
                sum_at[s] += lens[s] as f64;
                let mut total = 0;
                for q in 0..n {
                    sum_q[q] += lens[q] as f64;
                    total += lens[q];
                }
                let b = (((k - warmup) / block_len) as usize).min(3);
                blocks[b] += total as f64;
                if empty {
                    empty_at[s] += 1;
                }
                if last_poll[s].is_finite() {
                    ret_sum[s] += t - last_poll[s];
                    ret_cnt[s] += 1;
                }
                last_poll[s] = t;
                obs.observe(s, &lens);
            }

            let (next, dt) = if empty {
                (self.route_tilde[s].sample(&mut rng), self.laws[s].empty.sample(&mut rng))
            } else {
                let arrived = queues[s].pop_front().expect("non-empty queue");
                lens[s] -= 1;
                if counting {
                    wait_sum += t - arrived;
                    served += 1;
                }
                (self.route[s].sample(&mut rng), self.laws[s].busy.sample(&mut rng))
            };
            let t_next = t + dt;
            for q in 0..n {
                while next_arrival[q] <= t_next {
                    let size = self.batch.sample(&mut rng) as usize;
                    queues[q].extend(std::iter::repeat_n(next_arrival[q], size));
                    lens[q] += size;
                    next_arrival[q] += self.gaps[q].sample(&mut rng);
                }
            }
            t = t_next;
            s = next;
        }

        let polls = measured as f64;
        let per_block = [block_len, block_len, block_len, measured - 3 * block_len];
        ReplicationResult {
            polls: measured,
            served,
            f: polls_at.iter().map(|&c| c as f64 / polls).collect(),
            f_tilde: empty_at.iter().map(|&c| c as f64 / polls).collect(),
            queue_at_poll: (0..n).map(|i| sum_at[i] / polls_at[i] as f64).collect(),
            queue: sum_q.iter().map(|x| x / polls).collect(),
            return_time: (0..n).map(|i| ret_sum[i] / ret_cnt[i] as f64).collect(),
            // the time after the last counted poll is not part of any interval
            tau_bar: (last_poll.iter().copied().fold(t_start, f64::max) - t_start) / (polls - 1.0),
            mean_wait: wait_sum / served as f64,
            block_means: std::array::from_fn(|b| blocks[b] / per_block[b].max(1) as f64),
            final_total: lens.iter().sum(),
        }
    }
}

/// Point estimate and standard error across replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Estimate {
        let r = x.len() as f64;
        let mean = x.iter().sum::<f64>() / r;
        let se = if x.len() < 2 {
            f64::NAN
        } else {
            (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt()
        };
        Estimate { mean, se }
    }

    /// `|mean - target| <= k * se + 1e-12`; the floor covers quantities that
    /// are exact in every replication (such as cyclic visit shares).
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstabilityReport {
    pub replication: usize,
    pub block_means: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationEstimate {
    pub f: Vec<Estimate>,
    pub f_tilde: Vec<Estimate>,
    pub empty_given_polled: Vec<Estimate>,
    pub queue_at_poll: Vec<Estimate>,
    pub queue: Vec<Estimate>,
    pub return_time: Vec<Estimate>,
    pub tau_bar: Estimate,
    pub mean_wait: Estimate,
    /// Set when a replication shows steadily growing queues. Estimates are
    /// still returned but are not stationary quantities.
    pub instability: Option<InstabilityReport>,
    pub replications: Vec<ReplicationResult>,
}

/// Station averages, for rotationally symmetric models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PooledEstimate {
    pub empty_given_polled: Estimate,
    pub queue_at_poll: Estimate,
    pub queue: Estimate,
    pub return_time: Estimate,
}

fn per_station(reps: &[ReplicationResult], n: usize, get: impl Fn(&ReplicationResult) -> Vec<f64>) -> Vec<Estimate> {
    let cols: Vec<Vec<f64>> = reps.iter().map(get).collect();
    (0..n)
        .map(|i| Estimate::from_samples(&cols.iter().map(|c| c[i]).collect::<Vec<_>>()))
        .collect()
}

impl SimulationEstimate {
    fn from_replications(reps: Vec<ReplicationResult>) -> Self {
        let n = reps[0].f.len();
        let scalar = |get: fn(&ReplicationResult) -> f64| {
            Estimate::from_samples(&reps.iter().map(get).collect::<Vec<_>>())
        };
        let instability = reps
            .iter()
            .position(|r| r.looks_unstable())
            .map(|i| InstabilityReport {
                replication: i,
                block_means: reps[i].block_means,
            });
        SimulationEstimate {
            f: per_station(&reps, n, |r| r.f.clone()),
            f_tilde: per_station(&reps, n, |r| r.f_tilde.clone()),
            empty_given_polled: per_station(&reps, n, |r| r.empty_given_polled()),
            queue_at_poll: per_station(&reps, n, |r| r.queue_at_poll.clone()),
            queue: per_station(&reps, n, |r| r.queue.clone()),
            return_time: per_station(&reps, n, |r| r.return_time.clone()),
            tau_bar: scalar(|r| r.tau_bar),
            mean_wait: scalar(|r| r.mean_wait),
            instability,
            replications: reps,
        }
    }

    pub fn pooled(&self) -> PooledEstimate {
        let avg = |get: fn(&ReplicationResult) -> Vec<f64>| {
            let x: Vec<f64> = self
                .replications
                .iter()
                .map(|r| {
                    let v = get(r);
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            Estimate::from_samples(&x)
        };
        PooledEstimate {
            empty_given_polled: avg(|r| r.empty_given_polled()),
            queue_at_poll: avg(|r| r.queue_at_poll.clone()),
            queue: avg(|r| r.queue.clone()),
            return_time: avg(|r| r.return_time.clone()),
        }
    }

    /// Column names of [`SimulationEstimate::csv_records`].
    pub fn csv_header(n: usize) -> Vec<String> {
        let mut h: Vec<String> = ["replication", "polls", "served", "tau_bar", "mean_wait", "final_total"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for name in ["f", "f_tilde", "queue_at_poll", "queue", "return_time"] {
            h.extend((1..=n).map(|i| format!("{name}_{i}")));
        }
        h
    }

    /// One record per replication, numbers in shortest round-trip form.
    pub fn csv_records(&self) -> Vec<Vec<String>> {
        self.replications
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mut row = vec![
                    k.to_string(),
                    r.polls.to_string(),
                    r.served.to_string(),
                    r.tau_bar.to_string(),
                    r.mean_wait.to_string(),
                    r.final_total.to_string(),
                ];
                for v in [&r.f, &r.f_tilde, &r.queue_at_poll, &r.queue, &r.return_time] {
                    row.extend(v.iter().map(|x| x.to_string()));
                }
                row
            })
            .collect()
    }
}

pub(crate) fn run_replications<O, F>(engine: &Engine, cfg: &SimConfig, make: F) -> Vec<(ReplicationResult, O)>
where
    O: PollObserver + Send,
    F: Fn() -> O + Sync,
{
    let one = |rep: usize| {
        let mut obs = make();
        let r = engine.run(cfg, rep, &mut obs);
        (r, obs)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..cfg.replications).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.replications).map(one).collect()
    }
}

/// Runs `cfg.replications` independent replications of the embedded
/// polling chain. Replication `k` uses stream `k` of a generator seeded
/// with `cfg.seed`, so results do not depend on thread scheduling.
pub fn simulate(m: &PollingModel, cfg: &SimConfig) -> Result<SimulationEstimate> {
    let engine = Engine::new(m, cfg)?;
    let reps = run_replications(&engine, cfg, || ())
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    Ok(SimulationEstimate::from_replications(reps))
}
