use etcd_core::data::{box_noise_bound, build_theta, from_csv, membership, run_experiment, to_csv, ExperimentConfig};
use etcd_core::network::{discretize, pendulum_network, Graph, NetworkSystem, PendulumConstants};
use nalgebra::DMatrix;

fn pendulum() -> NetworkSystem {
    discretize(&pendulum_network(&PendulumConstants::default(), Graph::chain(3), 0.01).unwrap(), 0.01).unwrap()
}

#[test]
fn true_system_is_consistent_for_many_seeds() {
    let sys = pendulum();
    for seed in 0..10 {
        let cfg = ExperimentConfig { seed, ..Default::default() };
        let data = run_experiment(&sys, &cfg).unwrap();
        let theta = build_theta(&data, &box_noise_bound(cfg.w_max, data.horizon(), 6), &sys.bw).unwrap();
        let m = membership(&sys.a, &sys.b, &theta).unwrap();
        assert!(m.member, "seed {seed}: {m:?}");
    }
}

#[test]
fn distant_system_is_rejected() {
    let sys = pendulum();
    let cfg = ExperimentConfig::default();
    let data = run_experiment(&sys, &cfg).unwrap();
    let theta = build_theta(&data, &box_noise_bound(cfg.w_max, data.horizon(), 6), &sys.bw).unwrap();
    let wrong = &sys.a + DMatrix::identity(6, 6) * 0.1;
    assert!(!membership(&wrong, &sys.b, &theta).unwrap().member);
}

#[test]
fn data_reproduce_the_recorded_residual() {
    let sys = pendulum();
    let data = run_experiment(&sys, &ExperimentConfig { seed: 11, ..Default::default() }).unwrap();
    assert!(data.residual(&sys.a, &sys.b, &sys.bw).amax() <= 1e-12);
    let back = from_csv(&to_csv(&data)).unwrap();
    assert_eq!(back, data);
}

#[test]
fn short_experiment_warns() {
    let sys = pendulum();
    let cfg = ExperimentConfig { horizon: 5, ..Default::default() };
    assert!(cfg.informativity_warning(&sys).is_some());
    assert!(ExperimentConfig::default().informativity_warning(&sys).is_none());
}
