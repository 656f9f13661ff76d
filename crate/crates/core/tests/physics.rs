use netmimo::baselines::{sum_rate_power, waterfill_sum_power};
use netmimo::channel::{sample_channel, ChannelState};
use netmimo::harness::SimConfig;
use netmimo::phy::{build_coupling_matrix, compute_zf_precoders, per_bs_power, rate, zf_cluster};
use netmimo::topology::{build_hex_topology, ClusteringPattern};
use num_complex::Complex64;
use proptest::prelude::*;

fn received(channel: &ChannelState, rx: usize, w: &[Complex64], bss: &[usize]) -> Complex64 {
    let nt = channel.antennas;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &b) in bss.iter().enumerate() {
        for a in 0..nt {
            acc += channel.h[(rx * channel.num_cells + b) * nt + a] * w[i * nt + a];
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zf_nulls_intra_cluster_streams(seed in 0u64..10_000, k in 1usize..=2, extra in 0usize..=2, size in 1usize..=3) {
        let nt = k + extra;
        let topo = build_hex_topology(1, 500.0, k, nt, seed).unwrap();
        let ch = sample_channel(&topo, seed, 0);
        let bss: Vec<usize> = (0..size).collect();
        let pre = zf_cluster(&ch, &bss, k).unwrap();
        let m = pre.users.len();
        for j in 0..m {
            let w = &pre.w[j * size * nt..(j + 1) * size * nt];
            for (r, &rx) in pre.users.iter().enumerate() {
                let g = received(&ch, rx, w, &bss);
                if r == j {
                    prop_assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-9);
                } else {
                    prop_assert!(g.norm_sqr() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bs_power_is_weighted_sum(seed in 0u64..10_000, p in proptest::collection::vec(0.0f64..5.0, 7)) {
        let topo = build_hex_topology(1, 500.0, 1, 2, seed).unwrap();
        let ch = sample_channel(&topo, seed, 3);
        let pattern = ClusteringPattern::new(vec![vec![0, 1, 2], vec![3, 4], vec![5], vec![6]]);
        let set = compute_zf_precoders(&ch, &pattern).unwrap();
        let power = per_bs_power(&set, &p);
        for b in 0..7 {
            let expected: f64 = (0..7).map(|u| set.norm_sqr(u, b) * p[u]).sum();
            prop_assert!((power[b] - expected).abs() <= 1e-12 * (1.0 + expected));
        }
        let s = build_coupling_matrix(&ch, &set);
        for rx in 0..7 {
            for tx in 0..7 {
                if set.cluster_of_user(rx) == set.cluster_of_user(tx) {
                    prop_assert_eq!(s[(rx, tx)], 0.0);
                } else {
                    prop_assert!(s[(rx, tx)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn waterfill_meets_kkt(a in proptest::collection::vec(0.01f64..10.0, 1..6), budget in 0.01f64..20.0, scale in 0.1f64..100.0) {
        let p = waterfill_sum_power(&a, budget, scale);
        let used: f64 = a.iter().zip(&p).map(|(x, y)| x * y).sum();
        prop_assert!((used - budget).abs() <= 1e-9 * (1.0 + budget));
        let level = a.iter().zip(&p).find(|(_, &y)| y > 0.0).map(|(x, y)| x * (y + 1.0 / scale)).unwrap();
        for (x, y) in a.iter().zip(&p) {
            prop_assert!(*y >= 0.0);
            if *y > 0.0 {
                prop_assert!((x * (y + 1.0 / scale) - level).abs() <= 1e-9 * level);
            } else {
                prop_assert!(x / scale >= level * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn multi_bs_power_is_feasible(seed in 0u64..10_000, budget in 0.1f64..10.0) {
        let mut cfg = SimConfig::desk();
        cfg.topology.placement_seed = Some(seed);
        let topo = cfg.build_topology().unwrap();
        let ch = sample_channel(&topo, seed, 1);
        let pre = zf_cluster(&ch, &[0, 1, 2], 1).unwrap();
        let budgets = [budget; 3];
        let p = sum_rate_power(&pre, &budgets, 10.0);
        let loads: Vec<f64> = (0..3).map(|i| pre.bs_power(i, &p)).collect();
        for l in &loads {
            prop_assert!(*l <= budget * (1.0 + 1e-9));
        }
        prop_assert!(loads.iter().any(|l| (l - budget).abs() <= 1e-6 * budget));
    }

    #[test]
    fn rate_is_shannon(p in 0.0f64..1e4, i in 0.0f64..1e3) {
        let r = rate(p, i);
        prop_assert!((r - (1.0 + p / (1.0 + i)).log2()).abs() <= 1e-12 * (1.0 + r));
    }
}

#[test]
fn waterfill_examples() {
    let p = waterfill_sum_power(&[1.0, 1.0], 2.0, 1.0);
    assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    let p = waterfill_sum_power(&[1.0, 4.0], 0.5, 1.0);
    assert_eq!(p, vec![0.5, 0.0]);
}

#[test]
fn rank_deficient_cluster_is_rejected() {
    let mut ch = ChannelState::zeros(2, 1, 2, 0);
    ch.h = vec![Complex64::new(1.0, 0.0); 4];
    assert!(zf_cluster(&ch, &[0], 2).is_err());
}
