//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statepoll_core::ergodicity::{classify, compare_identity_defect, Face, Verdict};
use statepoll_core::server::{flow_residuals, solve_server_distribution};
use statepoll_core::sim::{functional_residual, simulate, truncated_chain_oracle, SimConfig, TravelChoice};
use statepoll_core::symmetric::{
    check_assumptions, circulant_eigenvalues, circulant_matrix, eigen_sum, empty_probability,
    mean_queue_at_polling, SymmetricProfile,
};
use statepoll_core::waiting::{
    mean_wait, mean_wait_bernoulli, mean_wait_exhaustive, mean_wait_state_independent, CompoundPoissonSpec,
    ServiceMoments,
};
use statepoll_core::PollingModel;

type Outcome = Result<String, String>;

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Distance distribution with `p_d = p_{N-d}`.
fn random_symmetric_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut p: Vec<f64> = (1..=n)
        .map(|d| if d == n { raw[n - 1] } else { 0.5 * (raw[d - 1] + raw[n - d - 1]) })
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

fn cyclic(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    p
}

fn random_service(rng: &mut ChaCha8Rng) -> ServiceMoments {
    let w = rng.random_range(0.1..1.0);
    let sigma = rng.random_range(0.2..1.5);
    ServiceMoments {
        w,
        w2: w * w * rng.random_range(1.0..2.0),
        sigma,
        sigma2: sigma * sigma * rng.random_range(1.0..2.0),
    }
}

/// Poisson rate leaving `N lambda tau` in (0.1, 0.9).
fn stable_rate(rng: &mut ChaCha8Rng, n: usize, tau: f64) -> f64 {
    rng.random_range(0.1..0.9) / (n as f64 * tau)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut flow, mut norm, mut flux) = (0.0f64, 0.0f64, 0.0f64);
    let mut solved = 0;
    while solved < 200 {
        let n = rng.random_range(2..=6);
        let p = (0..n).map(|_| random_row(&mut rng, n)).collect();
        let pt = (0..n).map(|_| random_row(&mut rng, n)).collect();
        let lambda = (0..n).map(|_| rng.random_range(0.01..0.3)).collect();
        let tau = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let tt = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let m = PollingModel::new(p, pt, lambda, tau, tt);
        let rho: f64 = (0..n).map(|i| m.lambda[i] * (m.tau[i] - m.tau_tilde[i])).sum();
        if (rho - 1.0).abs() < 1e-3 {
            continue;
        }
        let d = solve_server_distribution(&m).map_err(|e| e.to_string())?;
        flow = flow.max(flow_residuals(&m, &d).max());
        norm = norm.max((d.f.iter().sum::<f64>() - 1.0).abs());
        for i in 0..n {
            flux = flux.max((d.f_tilde[i] - (d.f[i] - m.lambda[i] * d.tau_bar)).abs());
        }
        solved += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!(
        "200 instances, flow residual {flow:.1e}, |sum F - 1| {norm:.1e}, F~ defect {flux:.1e}, {secs:.2} s"
    );
    if flow <= 1e-10 && norm <= 1e-12 && flux <= 1e-12 && secs < 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn taxicab() -> PollingModel {
    PollingModel::new(
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        vec![0.1, 0.2],
        vec![1.0, 1.0],
        vec![0.5, 0.5],
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let m = taxicab();
    let d = solve_server_distribution(&m).map_err(|e| e.to_string())?;
    let o = truncated_chain_oracle(&m, 40).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let gap = (0..2).map(|i| (o.f[i] - d.f[i]).abs()).fold(0.0, f64::max);
    let expected = (d.f[0] - 0.529412).abs() < 5e-7
        && (d.f[1] - 0.470588).abs() < 5e-7
        && (d.tau_bar - 10.0 / 17.0).abs() < 1e-12;
    let msg = format!(
        "F = ({:.6}, {:.6}), tau_bar = {:.12}, oracle gap {gap:.1e}, tail bound {:.1e}, {secs:.2} s",
        d.f[0], d.f[1], d.tau_bar, o.tail_bound
    );
    if expected && gap <= 1e-6 && o.tail_bound <= 1e-8 && secs < 30.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for n in 2..=12 {
        let c = eigen_sum(&circulant_eigenvalues(&cyclic(n))).map_err(|e| e.to_string())?;
        let u = eigen_sum(&circulant_eigenvalues(&vec![1.0 / n as f64; n])).map_err(|e| e.to_string())?;
        worst = worst.max((c - (n as f64 - 1.0) / 2.0).abs());
        worst = worst.max((u - (n as f64 - 1.0)).abs());
    }
    let msg = format!("N = 2..12, largest deviation {worst:.1e}");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 5;
    let pt = random_symmetric_dist(&mut rng, n);
    let s = random_service(&mut rng);
    let lam = stable_rate(&mut rng, n, s.w + s.sigma);
    let spec = CompoundPoissonSpec::from_service(lam, 1.0, 1.0, s);
    let mu_t = circulant_eigenvalues(&pt);
    let mut waits = Vec::new();
    for _ in 0..20 {
        let p = random_symmetric_dist(&mut rng, n);
        let m = PollingModel::new(
            rows(&circulant_matrix(&p)),
            rows(&circulant_matrix(&pt)),
            vec![lam; n],
            vec![spec.tau; n],
            vec![spec.tau_tilde; n],
        );
        let report = check_assumptions(&m);
        if !report.all_pass() {
            return Err(format!("generated routing violates the assumptions: {report:?}"));
        }
        waits.push(mean_wait(&spec, &circulant_eigenvalues(&p), &mu_t).map_err(|e| e.to_string())?);
    }
    let spread = waits.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - waits.iter().copied().fold(f64::INFINITY, f64::min);
    let msg = format!("20 routings sharing P~, E[W] = {:.6}, spread {spread:.1e}", waits[0]);
    if spread <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(2..=8);
        let s = random_service(&mut rng);
        let spec = CompoundPoissonSpec::from_service(stable_rate(&mut rng, n, s.w + s.sigma), 1.0, 1.0, s);
        let cand = random_row(&mut rng, n);
        let c = mean_wait_state_independent(&spec, &circulant_eigenvalues(&cyclic(n))).map_err(|e| e.to_string())?;
        let mu = circulant_eigenvalues(&cand);
        let w = mean_wait(&spec, &mu, &mu).map_err(|e| e.to_string())?;
        worst = worst.max(c - w);
    }
    let msg = format!("100 instances, max E[W]_cyclic - E[W]_candidate = {worst:.3e}");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_step = f64::NEG_INFINITY;
    let mut worst_gap = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let s = random_service(&mut rng);
        // stable for every pi in [0, 1]
        let spec = CompoundPoissonSpec::from_service(stable_rate(&mut rng, n, s.w + s.sigma), 1.0, 1.0, s);
        let pt = random_row(&mut rng, n);
        let grid: Vec<f64> = (0..=10)
            .map(|k| mean_wait_bernoulli(&spec, &pt, k as f64 / 10.0))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for w in grid.windows(2) {
            worst_step = worst_step.max(w[0] - w[1]);
        }
        let ex = mean_wait_exhaustive(&spec, &pt).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max((grid[0] - ex).abs());
    }
    let msg = format!("20 instances, largest decrease {worst_step:.1e}, pi = 0 vs exhaustive {worst_gap:.1e}");
    if worst_step <= 0.0 && worst_gap <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let n = 3;
    let s = ServiceMoments {
        w: 0.5,
        w2: 0.25,
        sigma: 1.0,
        sigma2: 1.0,
    };
    let spec = CompoundPoissonSpec::from_service(0.05, 1.0, 1.0, s);
    let cyc = circulant_matrix(&cyclic(n));
    let m = PollingModel::new(rows(&cyc), rows(&cyc), vec![0.05; n], vec![spec.tau; n], vec![spec.tau_tilde; n])
        .with_second_moments(vec![spec.tau2; n], vec![spec.tau_tilde2; n]);
    let prof = SymmetricProfile::from_model(&m).map_err(|e| e.to_string())?;
    let d = solve_server_distribution(&m).map_err(|e| e.to_string())?;
    let want_w = mean_wait(&spec, &prof.mu, &prof.mu_tilde).map_err(|e| e.to_string())?;
    let want_x = mean_queue_at_polling(&prof).map_err(|e| e.to_string())?;
    let want_p0 = empty_probability(&prof).map_err(|e| e.to_string())?;

    let cfg = SimConfig {
        horizon: 1_000_000,
        replications: 10,
        seed: 1,
        ..SimConfig::default()
    };
    let est = simulate(&m, &cfg).map_err(|e| e.to_string())?;
    let pooled = est.pooled();
    let secs = start.elapsed().as_secs_f64();

    let mut fails = Vec::new();
    let mut check = |name: &str, e: statepoll_core::sim::Estimate, target: f64| {
        if !e.agrees_with(target, 3.0) {
            fails.push(format!("{name}: {:.6} +- {:.1e} vs {target:.6}", e.mean, e.se));
        }
    };
    check("E[W]", est.mean_wait, want_w);
    check("E[X|S]", pooled.queue_at_poll, want_x);
    check("P(X=0|S)", pooled.empty_given_polled, want_p0);
    for i in 0..n {
        check(&format!("F_{}", i + 1), est.f[i], d.f[i]);
        check(&format!("E[T_{0}{0}]", i + 1), est.return_time[i], d.cycle[i]);
    }
    let msg = format!(
        "E[W] {:.5} +- {:.1e} (analytic {want_w:.5}), E[X|S] {:.5} +- {:.1e} (analytic {want_x:.5}), \
         P0 {:.5} +- {:.1e} (analytic {want_p0:.5}), {secs:.1} s",
        est.mean_wait.mean, est.mean_wait.se, pooled.queue_at_poll.mean, pooled.queue_at_poll.se,
        pooled.empty_given_polled.mean, pooled.empty_given_polled.se
    );
    if fails.is_empty() && secs <= 60.0 {
        Ok(msg)
    } else {
        Err(format!("{msg}; {}", fails.join("; ")))
    }
}

fn criterion_8() -> Outcome {
    let swap = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let mut parts = Vec::new();
    let mut ok = true;
    for lam in [0.3, 0.45, 0.55, 0.6] {
        let m = PollingModel::new(swap.clone(), swap.clone(), vec![lam; 2], vec![1.0; 2], vec![1.0; 2]);
        let d = solve_server_distribution(&m).map_err(|e| e.to_string())?;
        let c = classify(&m).map_err(|e| e.to_string())?;
        let want = if lam * d.tau_bar < 0.5 { Verdict::Ergodic } else { Verdict::Transient };
        let cfg = SimConfig {
            horizon: 200_000,
            replications: 2,
            seed: 8,
            ..SimConfig::default()
        };
        let est = simulate(&m, &cfg).map_err(|e| e.to_string())?;
        let grows = est.instability.is_some();
        ok &= c.verdict == want && grows == (want == Verdict::Transient);
        parts.push(format!(
            "lambda {lam}: {} / {}",
            c.verdict,
            if grows { "queues grow" } else { "bounded" }
        ));
    }
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for _ in 0..50 {
        let n = rng.random_range(2..=4);
        let p: Vec<Vec<f64>> = (0..n).map(|_| random_row(&mut rng, n)).collect();
        let m = PollingModel::new(
            p.clone(),
            p,
            (0..n).map(|_| rng.random_range(0.01..0.2)).collect(),
            (0..n).map(|_| rng.random_range(0.2..2.0)).collect(),
            (0..n).map(|_| rng.random_range(0.2..2.0)).collect(),
        );
        let d = solve_server_distribution(&m).map_err(|e| e.to_string())?;
        for mask in 0..(1u32 << n) {
            let face = Face(mask);
            for k in (0..n).filter(|&k| !face.contains(k)) {
                worst = worst.max(compare_identity_defect(&m, &d.f, face, k).map_err(|e| e.to_string())?);
                pairs += 1;
            }
        }
    }
    let msg = format!("{pairs} face pairs on 50 instances, largest relative defect {worst:.1e}");
    if worst <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_10() -> Outcome {
    // unequal travel times, so that swapping the stations does not map
    // solutions to solutions at symmetric z
    let m = PollingModel::new(
        vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        vec![0.1, 0.2],
        vec![1.0, 1.5],
        vec![0.5, 0.3],
    );
    if classify(&m).map_err(|e| e.to_string())?.verdict != Verdict::Ergodic {
        return Err("instance is not ergodic".into());
    }
    let cfg = SimConfig {
        horizon: 1_000_000,
        replications: 10,
        seed: 10,
        travel_law: TravelChoice::Exponential,
        ..SimConfig::default()
    };
    let c = |a: f64, b: f64| vec![Complex64::new(a, 0.0), Complex64::new(b, 0.0)];
    let pts = functional_residual(&m, &cfg, &[c(0.9, 0.9), c(0.8, 0.95), c(0.95, 0.8)]).map_err(|e| e.to_string())?;
    let ok = pts
        .iter()
        .all(|p| p.standardized() <= 5.0 && p.control_standardized() > 5.0);
    let msg = pts
        .iter()
        .map(|p| {
            format!(
                "z = ({}, {}): {:.2} SE, control {:.0} SE",
                p.z[0].re,
                p.z[1].re,
                p.standardized(),
                p.control_standardized()
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("solver correctness", criterion_1),
        ("oracle equivalence", criterion_2),
        ("closed-form eigen sums", criterion_3),
        ("routing independence", criterion_4),
        ("cyclic optimality", criterion_5),
        ("Bernoulli monotonicity", criterion_6),
        ("Monte-Carlo agreement", criterion_7),
        ("ergodicity exactness", criterion_8),
        ("face comparison identity", criterion_9),
        ("functional-equation residual", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
