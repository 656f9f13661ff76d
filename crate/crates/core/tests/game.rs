use nalgebra::DMatrix;
use netmimo::game::{contraction_report, qsiwfa, waterfill_best_response, GameInstance};
use netmimo::oracle::{closed_form_power, inner_objective, water_level};
use proptest::prelude::*;

fn game(n: usize, seed: u64, spread: f64) -> GameInstance {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64
    };
    let coupling = DMatrix::from_fn(n, n, |r, c| if r == c { 0.0 } else { spread * next() });
    let numerators = (0..n).map(|_| 1.0 + 20.0 * next()).collect();
    let prices = (0..n).map(|_| 0.1 + next()).collect();
    GameInstance::new(numerators, prices, coupling)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn converged_point_is_a_nash_equilibrium(seed in 0u64..100_000, n in 2usize..6) {
        let g = game(n, seed, 0.9 / n as f64);
        let report = contraction_report(&g);
        prop_assert!(report.satisfied);
        let out = qsiwfa(&g, &vec![0.0; n], 1e-12, 500);
        prop_assert!(out.converged);
        for u in 0..n {
            let i: f64 = (0..n).map(|c| g.coupling[(u, c)] * out.p[c]).sum();
            let br = (g.numerators[u] / g.prices[u] - 1.0 - i).max(0.0);
            prop_assert!((out.p[u] - br).abs() <= 1e-9 * (1.0 + br));
        }
        let far: Vec<f64> = g.numerators.iter().zip(&g.prices).map(|(a, b)| a / b).collect();
        let other = qsiwfa(&g, &far, 1e-12, 500);
        for (a, b) in out.p.iter().zip(&other.p) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
        }
    }

    #[test]
    fn best_response_is_nonexpansive_in_interference(seed in 0u64..100_000) {
        let g = game(3, seed, 0.3);
        let p = vec![1.0, 2.0, 3.0];
        let q = vec![1.5, 0.5, 3.5];
        let a = waterfill_best_response(&g, &p);
        let b = waterfill_best_response(&g, &q);
        let lhs = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let diff: Vec<f64> = p.iter().zip(&q).map(|(x, y)| x - y).collect();
        let rhs = g.interference(&diff).iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn closed_form_beats_dense_scan(dv in 0.0f64..50.0, price in 0.01f64..5.0, i in 0.0f64..10.0, kappa in 0.05f64..1.0) {
        let cap = 0.7;
        let p_max = 1e3;
        let p = closed_form_power(kappa, dv, price, i, cap, p_max);
        let f = |x: f64| inner_objective(x, kappa, dv, price, i, cap);
        let best = (0..=20_000)
            .map(|k| p_max * (k as f64 / 20_000.0).powi(3))
            .map(f)
            .fold(f64::INFINITY, f64::min);
        prop_assert!(f(p) <= best + 1e-9 * (1.0 + best.abs()));
        prop_assert!((0.0..=p_max).contains(&p));
    }
}

#[test]
fn water_level_example() {
    assert!((water_level(0.1, 2.0) - 0.2 / std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn strong_coupling_is_flagged() {
    let g = game(3, 5, 4.0);
    assert!(!contraction_report(&g).satisfied);
}
