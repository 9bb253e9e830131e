use std::collections::BTreeMap;

use etcd_core::ets::{
    eta_step, replay_decisions, simulate_closed_loop, trigger_decision, AgentParams, EtsConfig, NeighborStateSource,
    TriggerParams,
};
use etcd_core::network::{assemble_global, Graph, NetworkSystem, Subsystem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn admissible() -> impl Strategy<Value = (f64, f64, f64)> {
    (1.05f64..1e6, 0.0f64..1.0, 0.0f64..10.0).prop_map(|(theta, frac, eta0)| {
        let lambda = (1.0 - 1.0 / theta) * frac.max(1e-3);
        (theta, lambda, eta0)
    })
}

fn chain(a: [f64; 3]) -> NetworkSystem {
    let s = |v: f64| DMatrix::from_element(1, 1, v);
    assemble_global(
        Graph::chain(3),
        vec![
            Subsystem { a: s(a[0]), b: s(1.0), couplings: BTreeMap::from([(1, s(0.05))]), bw: s(1.0) },
            Subsystem { a: s(a[1]), b: s(1.0), couplings: BTreeMap::from([(0, s(0.05)), (2, s(-0.05))]), bw: s(1.0) },
            Subsystem { a: s(a[2]), b: s(1.0), couplings: BTreeMap::from([(1, s(0.05))]), bw: s(1.0) },
        ],
    )
    .unwrap()
}

proptest! {
    #[test]
    fn eta_stays_non_negative_without_triggers((theta, lambda, eta0) in admissible(), draws in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let mut eta = eta0;
        for d in draws {
            // Any ρ with η + θρ ≥ 0 keeps the agent silent.
            let rho = -eta / theta + d * 5.0 - 1.0;
            if trigger_decision(eta, rho, theta) {
                continue;
            }
            eta = eta_step(eta, rho, lambda);
            prop_assert!(eta >= -1e-12, "eta = {eta}");
        }
    }

    #[test]
    fn events_lie_on_the_sampling_grid(
        h in 1usize..5,
        (theta, lambda, _) in admissible(),
        sigma1 in 0.0f64..0.2,
        sigma2 in 0.0f64..0.2,
        x0 in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let sys = chain([1.02, 0.97, 1.01]);
        let params = TriggerParams::uniform(&sys, h, AgentParams { sigma1, theta, lambda, eta0: 0.0 }, sigma2);
        let cfg = EtsConfig::new(&sys, params, vec![DMatrix::identity(1, 1); 3], NeighborStateSource::LastTransmitted).unwrap();
        let k = DMatrix::from_row_slice(3, 3, &[-0.6, -0.05, 0.0, -0.05, -0.5, 0.05, 0.0, -0.05, -0.6]);
        let log = simulate_closed_loop(&sys, &k, &cfg, &DVector::from_vec(x0), 60).unwrap();
        for events in &log.events {
            prop_assert_eq!(events.first(), Some(&0));
            prop_assert!(events.iter().all(|t| t % h == 0));
            prop_assert!(events.windows(2).all(|w| w[1] > w[0]));
        }
        prop_assert!(log.min_eta() >= -1e-12);
        prop_assert_eq!(replay_decisions(&log.states, &cfg), log.events.clone());
    }
}

#[test]
fn theta_saturates_in_replay() {
    let sys = chain([1.02, 0.97, 1.01]);
    let params = TriggerParams::uniform(&sys, 2, AgentParams { sigma1: 0.02, theta: 2.0, lambda: 0.2, eta0: 0.0 }, 0.01);
    let cfg = EtsConfig::new(&sys, params, vec![DMatrix::identity(1, 1); 3], NeighborStateSource::LastTransmitted).unwrap();
    let k = DMatrix::from_row_slice(3, 3, &[-0.6, -0.05, 0.0, -0.05, -0.5, 0.05, 0.0, -0.05, -0.6]);
    let log = simulate_closed_loop(&sys, &k, &cfg, &DVector::from_vec(vec![1.0, -0.5, 0.3]), 40).unwrap();
    let total = |theta: f64| replay_decisions(&log.states, &cfg.with_theta(theta)).iter().map(Vec::len).sum::<usize>();
    assert_eq!(total(1e6), total(1e9));
}

#[test]
fn synchronous_neighbor_samples_change_only_the_control() {
    let sys = chain([1.02, 0.97, 1.01]);
    let params = TriggerParams::uniform(&sys, 1, AgentParams { sigma1: 0.05, theta: 4.0, lambda: 0.2, eta0: 0.0 }, 0.02);
    let k = DMatrix::from_row_slice(3, 3, &[-0.6, -0.05, 0.0, -0.05, -0.5, 0.05, 0.0, -0.05, -0.6]);
    let x0 = DVector::from_vec(vec![1.0, -0.5, 0.3]);
    let run = |source| {
        let cfg = EtsConfig::new(&sys, params.clone(), vec![DMatrix::identity(1, 1); 3], source).unwrap();
        simulate_closed_loop(&sys, &k, &cfg, &x0, 100).unwrap()
    };
    let last = run(NeighborStateSource::LastTransmitted);
    let sync = run(NeighborStateSource::SynchronousSample);
    assert_eq!(last.control_inputs[0], sync.control_inputs[0]);
    assert!(last.settling_time(1e-3).is_some() && sync.settling_time(1e-3).is_some());
}
