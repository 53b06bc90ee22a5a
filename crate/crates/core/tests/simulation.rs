use statepoll_core::server::solve_server_distribution;
use statepoll_core::sim::{simulate, truncated_chain_oracle, truncated_chain_oracle_with, SimConfig, TravelChoice};
use statepoll_core::symmetric::{circulant_matrix, mean_queue_arbitrary, mean_queue_at_polling, SymmetricProfile};
use statepoll_core::{BatchMoments, PollingModel};

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
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

fn symmetric3() -> PollingModel {
    let p = circulant_matrix(&[0.2, 0.2, 0.6]);
    let pt = circulant_matrix(&[0.4, 0.4, 0.2]);
    PollingModel::new(rows(&p), rows(&pt), vec![0.08; 3], vec![1.2; 3], vec![0.4; 3])
        .with_second_moments(vec![1.44; 3], vec![0.16; 3])
}

#[test]
fn simulated_shares_match_solver_with_state_dependent_routing() {
    let m = taxicab();
    let d = solve_server_distribution(&m).unwrap();
    let cfg = SimConfig {
        horizon: 200_000,
        seed: 21,
        ..SimConfig::default()
    };
    let e = simulate(&m, &cfg).unwrap();
    for i in 0..2 {
        assert!(e.f[i].agrees_with(d.f[i], 3.0), "{:?} vs {}", e.f[i], d.f[i]);
        assert!(e.f_tilde[i].agrees_with(d.f_tilde[i], 3.0));
        assert!(e.return_time[i].agrees_with(d.cycle[i], 3.0));
    }
    assert!(e.tau_bar.agrees_with(d.tau_bar, 3.0));
    // flux relation on the estimates themselves
    for r in &e.replications {
        for i in 0..2 {
            assert!((r.f_tilde[i] - (r.f[i] - m.lambda[i] * r.tau_bar)).abs() < 5e-3);
        }
    }
}

#[test]
fn oracle_is_stable_under_larger_caps() {
    let m = taxicab();
    let a = truncated_chain_oracle(&m, 20).unwrap();
    let b = truncated_chain_oracle(&m, 30).unwrap();
    for i in 0..2 {
        assert!((a.f[i] - b.f[i]).abs() <= a.tail_bound.max(1e-12));
    }
}

#[test]
fn oracle_matches_closed_forms_on_three_stations() {
    let m = symmetric3();
    let prof = SymmetricProfile::from_model(&m).unwrap();
    let o = truncated_chain_oracle(&m, 14).unwrap();
    assert!(o.tail_bound < 1e-8, "{}", o.tail_bound);
    for i in 0..3 {
        assert!((o.f[i] - 1.0 / 3.0).abs() < 1e-9);
        assert!((o.queue_at_poll[i] - mean_queue_at_polling(&prof).unwrap()).abs() < 1e-7);
        assert!((o.queue[i] - mean_queue_arbitrary(&prof).unwrap()).abs() < 1e-7);
    }
}

#[test]
fn oracle_handles_batches_and_two_point_travel() {
    let swap = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let m = PollingModel::new(swap.clone(), swap, vec![0.08; 2], vec![1.5; 2], vec![0.5; 2])
        .with_second_moments(vec![3.0; 2], vec![0.5; 2])
        .with_batch(BatchMoments {
            mean: 2.0,
            second_moment: 4.0,
        });
    let prof = SymmetricProfile::from_model(&m).unwrap();
    let o = truncated_chain_oracle_with(&m, 40, &TravelChoice::TwoPoint, None).unwrap();
    assert!(o.tail_bound < 1e-8);
    assert!((o.queue_at_poll[0] - mean_queue_at_polling(&prof).unwrap()).abs() < 1e-7);
    assert!((o.queue[1] - mean_queue_arbitrary(&prof).unwrap()).abs() < 1e-7);
}

#[test]
fn simulated_queue_lengths_match_closed_forms() {
    let m = symmetric3();
    let prof = SymmetricProfile::from_model(&m).unwrap();
    let cfg = SimConfig {
        horizon: 300_000,
        seed: 22,
        ..SimConfig::default()
    };
    let e = simulate(&m, &cfg).unwrap();
    let pooled = e.pooled();
    assert!(pooled.queue_at_poll.agrees_with(mean_queue_at_polling(&prof).unwrap(), 3.0));
    assert!(pooled.queue.agrees_with(mean_queue_arbitrary(&prof).unwrap(), 3.0));
}
