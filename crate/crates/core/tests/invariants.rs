mod common;

use common::model;
use proptest::prelude::*;
use pushcell_core::dp::policy_iteration;
use pushcell_core::markov::analyze_policy;
use pushcell_core::mdp::EnergyArrival;
use pushcell_core::sim::{self, SimConfig};
use pushcell_core::threshold::{
    build_policy, gotb_search, potb_threshold, predicted_blocking, spec_for, theorem1_blocking, theorem2_blocking,
    PolicyKind,
};
use pushcell_core::Model;

fn instance() -> impl Strategy<Value = Model> {
    (1u32..=3, 1u32..=5, 0.0f64..2.0, 0.05f64..1.0, 0.05f64..1.0, 0.2f64..3.0)
        .prop_flat_map(|(classes, contents, skew, pu, pc, mean)| {
            (classes..=classes + 5).prop_map(move |e_max| {
                model(e_max, classes, contents as usize, skew, pu, pc, EnergyArrival::Poisson { mean })
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kernel_rows_are_distributions(m in instance()) {
        for x in m.enumerate_states() {
            for u in m.feasible_actions(&x) {
                let row = m.transition(&x, u).unwrap();
                prop_assert!(row.iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
                let total: f64 = row.iter().map(|e| e.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn threshold_policies_have_valid_stationary_laws(m in instance()) {
        for kind in PolicyKind::ALL {
            let spec = spec_for(kind, m.params()).unwrap();
            let policy = build_policy(&spec, &m).unwrap();
            policy.validate(&m).unwrap();
            let a = analyze_policy(&m, &policy).unwrap();
            let probs = &a.distribution.probs;
            prop_assert!(probs.iter().all(|&p| p >= 0.0));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let cost: f64 = m
                .enumerate_states()
                .iter()
                .enumerate()
                .map(|(i, x)| probs[i] * Model::stage_cost(x, policy.action(i)))
                .sum();
            prop_assert!((cost - a.blocking).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.blocking));
            prop_assert!(a.mean_battery <= m.space().battery_units as f64 + 1e-9);
        }
    }

    #[test]
    fn optimal_gain_dominates_threshold_policies(m in instance()) {
        let pi = policy_iteration(&m, None).unwrap();
        prop_assert!(pi.bellman_residual < 1e-9);
        prop_assert!(pi.trace.windows(2).all(|w| w[1].gain <= w[0].gain + 1e-12));
        for kind in PolicyKind::ALL {
            let policy = build_policy(&spec_for(kind, m.params()).unwrap(), &m).unwrap();
            let blocking = analyze_policy(&m, &policy).unwrap().blocking;
            prop_assert!(pi.evaluation.gain <= blocking + 1e-9, "{kind}: {} > {blocking}", pi.evaluation.gain);
        }
    }

    #[test]
    fn gotb_prediction_is_the_smallest(m in instance()) {
        let p = m.params();
        let g = gotb_search(p).unwrap();
        let best = g.predicted.unwrap();
        prop_assert!(best <= theorem1_blocking(p).unwrap() + 1e-15);
        if let Ok(t2) = theorem2_blocking(p) {
            prop_assert!(best <= t2 + 1e-15);
        }
        for c in 0..=potb_threshold(p).unwrap() {
            let m_thr = pushcell_core::threshold::eetb_dtilde(p, c).unwrap();
            prop_assert!(best <= predicted_blocking(p, c, m_thr).unwrap() + 1e-15);
        }
    }

    #[test]
    fn simulation_is_deterministic_and_bounded(m in instance(), seed in any::<u64>()) {
        let policy = build_policy(&spec_for(PolicyKind::Gotb, m.params()).unwrap(), &m).unwrap();
        let config = SimConfig { warmup: 100, ..SimConfig::new(3_000, seed) };
        let a = sim::run(&m, &policy, &config).unwrap();
        prop_assert_eq!(&a, &sim::run(&m, &policy, &config).unwrap());
        prop_assert!(a.mean_battery >= 0.0 && a.mean_battery <= m.space().battery_units as f64);
        prop_assert!(a.blocked <= a.requests && a.requests <= a.counted_slots);
        let total: f64 = a.action_frequency.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
