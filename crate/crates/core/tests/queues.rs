use netmimo::queueing::{
    birth_death_kernel, departure_uniforms, QueueMode, sample_arrivals, step_queue_bits, step_queue_packets, QueueState,
    TrafficConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn packet_step_follows_kernel() {
    let (cap, lt, mt) = (4u64, 0.25, 0.45);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 40_000usize;
    for q0 in 0..=cap {
        let mut moves = [0usize; 3];
        for _ in 0..n {
            let mut st = QueueState::empty(1, cap);
            st.q[0] = q0;
            let arrival = u64::from(rng.random::<f64>() < lt);
            step_queue_packets(&mut st, &[mt], &[lt], &[arrival], &[rng.random()]).unwrap();
            moves[(st.q[0] + 1 - q0) as usize] += 1;
        }
        let k = birth_death_kernel(q0, cap, lt, mt).unwrap();
        for (m, p) in moves.iter().zip(k) {
            let f = *m as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() <= 4.0 * sd + 1e-12, "q {q0}: {f} vs {p}");
        }
    }
}

#[test]
fn kernel_rejects_overfull_probabilities() {
    assert!(birth_death_kernel(1, 3, 0.6, 0.5).is_err());
    let mut st = QueueState::empty(1, 3);
    st.q[0] = 1;
    assert!(step_queue_packets(&mut st, &[0.6], &[0.5], &[0], &[0.0]).is_err());
}

#[test]
fn arrival_frequency() {
    let traffic = TrafficConfig::uniform(3, 10.0, 1e5, 0.005, QueueMode::Packets);
    let lt = traffic.arrival_prob(0);
    let n = 100_000u64;
    let count: u64 = (0..n).map(|t| sample_arrivals(&traffic, 3, t)[1]).sum();
    let f = count as f64 / n as f64;
    assert!((f - lt).abs() <= 3.0 * (lt * (1.0 - lt) / n as f64).sqrt());
    assert_eq!(sample_arrivals(&traffic, 3, 17), sample_arrivals(&traffic, 3, 17));
    assert_eq!(departure_uniforms(3, 9, 2), departure_uniforms(3, 9, 2));
}

proptest! {
    #[test]
    fn kernel_rows_are_distributions(q in 0u64..10, cap in 1u64..10, lt in 0.0f64..0.5, mt in 0.0f64..0.5) {
        let q = q.min(cap);
        let k = birth_death_kernel(q, cap, lt, mt).unwrap();
        prop_assert!(k.iter().all(|x| *x >= 0.0));
        prop_assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        if q == 0 { prop_assert_eq!(k[0], 0.0); }
        if q == cap { prop_assert_eq!(k[2], 0.0); }
    }

    #[test]
    fn bit_step_conserves_packets(q in 0u64..8, served in 0.0f64..10.0, a in 0u64..4) {
        let cap = 8;
        let mut st = QueueState::empty(1, cap);
        st.q[0] = q;
        let ev = step_queue_bits(&mut st, &[served], &[a])[0];
        prop_assert!(st.q[0] <= cap);
        prop_assert_eq!(st.q[0], q - ev.departed + ev.arrived);
        prop_assert_eq!(ev.arrived + ev.dropped, a);
        let left = (q as f64 - served).max(0.0).ceil() as u64;
        prop_assert_eq!(st.q[0], (left + a).min(cap));
    }

    #[test]
    fn packet_step_moves_at_most_one(q in 0u64..6, arr in 0u64..2, u in 0.0f64..1.0, mt in 0.0f64..0.7) {
        let lt = 0.3;
        let mut st = QueueState::empty(1, 5);
        st.q[0] = q.min(5);
        let before = st.q[0];
        let ev = step_queue_packets(&mut st, &[mt], &[lt], &[arr], &[u]).unwrap()[0];
        prop_assert!(st.q[0].abs_diff(before) <= 1);
        prop_assert!(ev.arrived + ev.departed + ev.dropped <= 1);
        prop_assert!(st.q[0] <= 5);
    }
}
