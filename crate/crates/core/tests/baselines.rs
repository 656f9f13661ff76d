use netmimo::baselines::{fca_allocate, fca_colors, greedy_dynamic_cluster, static_cluster_allocate};
use netmimo::channel::sample_channel;
use netmimo::harness::SimConfig;
use netmimo::topology::{enumerate_patterns, CatalogMode, ClusteringPattern};

#[test]
fn baselines_respect_budgets_and_catalog() {
    let cfg = SimConfig::desk();
    let topo = cfg.build_topology().unwrap();
    let catalog = enumerate_patterns(&topo, 3, CatalogMode::Tiling).unwrap();
    let budgets = vec![1.0; topo.num_cells];
    for slot in 0..40 {
        let ch = sample_channel(&topo, 17, slot);
        let single = static_cluster_allocate(&ch, &ClusteringPattern::singletons(7), &budgets).unwrap();
        let greedy = greedy_dynamic_cluster(&ch, &topo, &catalog, &budgets).unwrap();
        let fca = fca_allocate(&ch, &topo, &budgets).unwrap();
        for alloc in [&single, &greedy, &fca] {
            assert!(alloc.bs_power.iter().all(|&p| p <= 1.0 + 1e-9), "{:?}", alloc.bs_power);
            assert!(alloc.rates.iter().all(|r| r.is_finite() && *r >= 0.0));
        }
        let sum = |r: &[f64]| r.iter().sum::<f64>();
        assert!(sum(&greedy.rates) >= sum(&single.rates) - 1e-9);
        for c in &greedy.pattern.clusters {
            assert!(catalog.cluster_id(c).is_some(), "{c:?}");
        }
        assert!(greedy.pattern.pattern_id.is_none() || catalog.find(&greedy.pattern) == greedy.pattern.pattern_id);
    }
}

#[test]
fn fca_reuse_colors_are_distinct_in_first_ring() {
    let topo = SimConfig::desk().build_topology().unwrap();
    let colors = fca_colors(&topo);
    let mut sorted = colors.clone();
    sorted.sort_unstable();
    sorted.dedup();
    assert_eq!(sorted.len(), 7);
}
