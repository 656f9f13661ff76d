use nalgebra::{DMatrix, DVector};
use netmimo::control::{project_lm, LagrangeMultipliers, PotentialStore};
use netmimo::learning::{update_lm, update_potential, LearningObservation, StepSizeSchedule};
use netmimo::topology::{NetworkTopology, PatternCatalog};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn store(capacity: u64) -> PotentialStore {
    let topo = NetworkTopology::from_path_gains(1, 1, &[vec![1.0]], vec![vec![]]).unwrap();
    let cat = PatternCatalog::from_patterns(&topo, vec![], 1).unwrap();
    PotentialStore::new(&cat, 1, capacity, 1).unwrap()
}

/// Relative values of a fixed birth-death chain with `V(0) = 0`.
fn poisson(cost: &[f64], lt: f64, mt: f64) -> Vec<f64> {
    let n = cost.len();
    let cap = n - 1;
    // Unknowns: theta, V(1..=cap).
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for q in 0..n {
        let up = if q < cap { lt } else { 0.0 };
        let down = if q > 0 { mt } else { 0.0 };
        a[(q, 0)] = 1.0;
        let mut add = |j: usize, w: f64| {
            if j > 0 {
                a[(q, j)] += w;
            }
        };
        add(q, 1.0 - (1.0 - up - down));
        if q < cap {
            add(q + 1, -up);
        }
        if q > 0 {
            add(q - 1, -down);
        }
        b[q] = cost[q];
    }
    let x = a.lu().solve(&b).unwrap();
    let mut v = vec![0.0];
    v.extend(x.iter().skip(1));
    v
}

#[test]
fn potentials_track_policy_evaluation() {
    let (lt, mt) = (0.2, 0.35);
    let cost = [0.0, 5.0, 10.0, 15.0];
    let oracle = poisson(&cost, lt, mt);
    let mut st = store(3);
    let sched = StepSizeSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut q = 0u64;
    for _ in 0..400_000 {
        let arrival = rng.random::<f64>() < lt;
        let grows = arrival && q < 3;
        let obs = LearningObservation {
            cluster: 0,
            user: 0,
            queue: q,
            cost: cost[q as usize],
            mu_tau: mt,
            arrived: grows,
        };
        update_potential(&mut st, &obs, &sched).unwrap();
        assert_eq!(st.tables[0][0].values[0], 0.0);
        if grows {
            q += 1;
        } else if !arrival && q > 0 && rng.random::<f64>() * (1.0 - lt) < mt {
            q -= 1;
        }
    }
    let learned = &st.tables[0][0].values;
    let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (l, o) in learned.iter().zip(&oracle) {
        assert!((l - o).abs() <= 0.1 * scale, "{learned:?} vs {oracle:?}");
    }
}

proptest! {
    #[test]
    fn multiplier_stays_in_box(g0 in 0.0f64..10.0, p in 0.0f64..100.0, eps in 0.0f64..5.0) {
        let mut lm = LagrangeMultipliers::new(1, g0, 10.0).unwrap();
        update_lm(&mut lm, &[p], &[1.0], eps);
        prop_assert!((0.0..=10.0).contains(&lm.gamma[0]));
        prop_assert_eq!(lm.gamma[0], project_lm(g0 + eps * (p - 1.0), 10.0));
    }

    #[test]
    fn potential_steps_outlast_multiplier_steps(n in 1_000u64..1_000_000_000) {
        let s = StepSizeSchedule::default();
        prop_assert!(s.multiplier_step(n) < s.potential_step(n));
        prop_assert!(s.multiplier_step(10 * n) / s.potential_step(10 * n) < s.multiplier_step(n) / s.potential_step(n));
    }
}
