use netmimo::harness::config::SimConfig;
use netmimo::oracle::{joint_rvi, per_user_rvi, solve};
use proptest::prelude::*;

#[test]
fn bundled_tiny_instance() {
    let cfg = SimConfig::tiny();
    let mut inst = cfg.tiny_instance(&[0.5]).unwrap();
    inst.service_cap = Some(vec![0.3, 0.3]);
    let report = solve(&inst).unwrap();
    assert_eq!(report.users.len(), 2);
    assert!(report.max_residual < 1e-10);
    assert_eq!(report.grid_violations, 0);
    let gap = report.max_decomposition_gap.expect("joint solution");
    assert!(gap < 1e-8, "{gap}");
    let joint = report.joint.unwrap();
    assert!((joint.theta - report.theta_sum).abs() < 1e-8);
    for s in &report.users {
        assert_eq!(s.values[0], 0.0);
        assert!(s.values.windows(2).all(|w| w[1] >= w[0]), "{:?}", s.values);
        for (m, lt) in s.mean_service.iter().zip(&inst.lambda_tau) {
            assert!(*m >= 0.0 && *m <= 0.3 + 1e-12 && *m <= 1.0 - lt);
        }
    }
}

#[test]
fn no_power_price_means_full_service() {
    let cfg = SimConfig::tiny();
    let cheap = per_user_rvi(&cfg.tiny_instance(&[0.0]).unwrap(), 0).unwrap();
    let dear = per_user_rvi(&cfg.tiny_instance(&[5.0]).unwrap(), 0).unwrap();
    assert!(cheap.theta <= dear.theta);
    assert!(cheap.mean_service[1] >= dear.mean_service[1]);
}

#[test]
fn rayleigh_config_has_no_tiny_instance() {
    assert!(SimConfig::desk().tiny_instance(&[1.0; 7]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decomposition_holds_across_multipliers(gamma in 0.0f64..3.0, beta in 0.1f64..5.0) {
        let mut cfg = SimConfig::tiny();
        cfg.cost.beta = beta;
        let mut inst = cfg.tiny_instance(&[gamma]).unwrap();
        inst.service_cap = Some(vec![0.3, 0.3]);
        let users: Vec<_> = (0..2).map(|u| per_user_rvi(&inst, u).unwrap()).collect();
        let joint = joint_rvi(&inst).unwrap();
        prop_assert!((joint.theta - users[0].theta - users[1].theta).abs() < 1e-8);
        for q0 in 0..=3usize {
            for q1 in 0..=3usize {
                let sum = users[0].values[q0] + users[1].values[q1];
                prop_assert!((joint.values[q0 * 4 + q1] - sum).abs() < 1e-8);
            }
        }
    }
}
