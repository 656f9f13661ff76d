use std::collections::BTreeMap;
use std::path::Path;

use netmimo::harness::config::{Scheme, SimConfig};
use netmimo::harness::sweep::mean_ci;
use netmimo::harness::{run_episode, run_episode_with, run_sweep, write_episode, write_sweep, TraceOptions};
use netmimo::Error;

fn short_desk(slots: u64) -> SimConfig {
    let mut cfg = SimConfig::desk();
    cfg.run.slots = slots;
    cfg.output.dir = None;
    cfg
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

#[test]
fn sweep_aggregates_recompute_from_points_csv() {
    let base = short_desk(600);
    let seeds = [1, 2, 3];
    let schemes = [Scheme::Proposed, Scheme::Fca];
    let sweep = run_sweep(&base, "radio.budget_dbm", &[25.0, 35.0], &seeds, &schemes).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_sweep(dir.path(), &sweep).unwrap();

    let (h, points) = read_rows(&dir.path().join("delay_vs_budget_dbm_points.csv"));
    assert_eq!(points.len(), 2 * seeds.len() * schemes.len());
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for row in &points {
        groups
            .entry((row[col(&h, "scheme")].clone(), row[col(&h, "value")].clone()))
            .or_default()
            .push(row[col(&h, "mean_delay_slots")].parse().unwrap());
    }

    let (ha, aggs) = read_rows(&dir.path().join("delay_vs_budget_dbm_aggregate.csv"));
    assert_eq!(aggs.len(), groups.len());
    for row in &aggs {
        let xs = &groups[&(row[col(&ha, "scheme")].clone(), row[col(&ha, "value")].clone())];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // Student-t 0.975 quantile with two degrees of freedom.
        let half = 4.302652729696142 * sd / n.sqrt();
        let get = |name: &str| row[col(&ha, name)].parse::<f64>().unwrap();
        assert_eq!(get("n") as usize, xs.len());
        assert!((get("mean_delay_slots") - mean).abs() <= 1e-9);
        assert!((get("ci_low") - (mean - half)).abs() <= 1e-9);
        assert!((get("ci_high") - (mean + half)).abs() <= 1e-9);
    }

    let (hw, wide) = read_rows(&dir.path().join("delay_vs_budget_dbm.csv"));
    assert_eq!(wide.len(), 2);
    for row in &wide {
        for s in ["proposed", "fca"] {
            let xs = &groups[&(s.to_string(), row[0].clone())];
            let (mean, _) = mean_ci(xs);
            let got: f64 = row[col(&hw, &format!("{s}_mean"))].parse().unwrap();
            assert!((got - mean).abs() <= 1e-9);
        }
    }
}

#[test]
fn single_point_sweep_matches_episode() {
    let base = short_desk(400);
    let sweep = run_sweep(&base, "radio.budget_dbm", &[base.radio.budget_dbm], &[5], &[Scheme::Static]).unwrap();
    let mut cfg = base.clone();
    cfg.run.seed = 5;
    cfg.scheme.kind = Scheme::Static;
    let direct = run_episode(&cfg).unwrap();
    assert_eq!(sweep.points[0].summary, direct.summary);
    assert_eq!(sweep.aggregates[0].ci_half_width, 0.0);
}

#[test]
fn unknown_axis_is_a_config_error() {
    let base = short_desk(10);
    let err = run_sweep(&base, "radio.warp_factor", &[1.0], &[1], &[Scheme::Fca]).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert_eq!(err.kind(), "config");
}

#[test]
fn empty_sweep_is_rejected() {
    let base = short_desk(10);
    assert!(run_sweep(&base, "radio.budget_dbm", &[], &[1], &[Scheme::Fca]).is_err());
}

#[test]
fn malformed_configs_are_reported() {
    assert!(matches!(SimConfig::from_toml("schema_version = ["), Err(Error::Toml(_))));
    let text = SimConfig::desk().to_toml().replace("queue_capacity = 9", "queue_capacity = -1");
    assert!(SimConfig::from_toml(&text).is_err());
    let mut cfg = SimConfig::desk();
    cfg.traffic.slot_seconds = 0.0;
    assert!(cfg.validate().is_err());
    cfg = SimConfig::desk();
    cfg.schema_version = 99;
    assert!(cfg.validate().unwrap_err().to_string().contains("schema_version"));
}

#[test]
fn bundled_config_round_trips() {
    let cfg = SimConfig::desk();
    let back = SimConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn no_arrivals_means_no_delay() {
    for scheme in Scheme::ALL {
        let mut cfg = short_desk(300);
        cfg.traffic.arrival_rate = 0.0;
        cfg.scheme.kind = scheme;
        let s = run_episode(&cfg).unwrap().summary;
        assert_eq!(s.mean_delay_slots, 0.0, "{scheme:?}");
        assert_eq!(s.mean_queue, 0.0);
        assert_eq!(s.drop_rate, 0.0);
    }
}

#[test]
fn reruns_are_identical() {
    for scheme in Scheme::ALL {
        let mut cfg = short_desk(300);
        cfg.scheme.kind = scheme;
        let a = run_episode_with(&cfg, TraceOptions { slots: true, snapshot_every: 50 }).unwrap();
        let b = run_episode_with(&cfg, TraceOptions { slots: true, snapshot_every: 50 }).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.slots, b.slots);
        assert_eq!(a.potentials, b.potentials);
    }
}

#[test]
fn seeds_change_the_outcome() {
    let mut cfg = short_desk(500);
    let a = run_episode(&cfg).unwrap().summary;
    cfg.run.seed += 1;
    let b = run_episode(&cfg).unwrap().summary;
    assert_ne!(a.mean_queue, b.mean_queue);
}

#[test]
fn per_bs_power_recomputes_from_trace() {
    let mut cfg = short_desk(800);
    let dir = tempfile::tempdir().unwrap();
    cfg.output.dir = Some(dir.path().to_path_buf());
    let r = run_episode(&cfg).unwrap();
    write_episode(dir.path(), &r).unwrap();

    let (h, slots) = read_rows(&dir.path().join("slots.csv"));
    assert_eq!(slots.len() as u64, cfg.run.slots);
    let warmup = r.summary.warmup_slots as usize;
    let (hb, bss) = read_rows(&dir.path().join("bs.csv"));
    for (b, row) in bss.iter().enumerate() {
        let c = col(&h, &format!("power_{b}"));
        let powers: Vec<f64> = slots.iter().map(|s| s[c].parse().unwrap()).collect();
        let mean = powers.iter().sum::<f64>() / powers.len() as f64;
        let steady = powers[warmup..].iter().sum::<f64>() / (powers.len() - warmup) as f64;
        let reported: f64 = row[col(&hb, "mean_power")].parse().unwrap();
        let reported_steady: f64 = row[col(&hb, "steady_power")].parse().unwrap();
        assert!((reported - mean).abs() <= 1e-9);
        assert!((reported_steady - steady).abs() <= 1e-9);
    }

    let (hu, users) = read_rows(&dir.path().join("users.csv"));
    for (u, row) in users.iter().enumerate() {
        let c = col(&h, &format!("queue_{u}"));
        let q: Vec<f64> = slots[warmup..].iter().map(|s| s[c].parse().unwrap()).collect();
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        let reported: f64 = row[col(&hu, "mean_queue")].parse().unwrap();
        assert!((reported - mean).abs() <= 1e-9);
    }

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["slots"].as_u64(), Some(cfg.run.slots));
    assert!(dir.path().join("potentials.csv").exists());
}

#[test]
fn little_and_sojourn_agree_at_desk_scale() {
    let s = run_episode(&short_desk(10_000)).unwrap().summary;
    let gap = (s.sojourn_delay_slots - s.little_delay_slots).abs() / s.little_delay_slots;
    assert!(gap < 0.05, "{gap}");
}
