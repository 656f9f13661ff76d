//! CSV and JSON writers for episode results.

use std::fs;
use std::path::Path;

use csv::Writer;

use crate::{Error, Result};

use super::engine::EpisodeResult;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `summary.json`, `users.csv`, `bs.csv` and, when traced,
/// `slots.csv` and `potentials.csv` into `dir`.
pub fn write_episode(dir: &Path, result: &EpisodeResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&result.summary)? + "\n",
    )?;
    write_users(dir, result)?;
    write_bss(dir, result)?;
    if !result.slots.is_empty() {
        write_slots(dir, result)?;
    }
    if !result.potentials.is_empty() {
        write_potentials(dir, result)?;
    }
    Ok(())
}

fn write_users(dir: &Path, result: &EpisodeResult) -> Result<()> {
    let mut w = Writer::from_path(dir.join("users.csv")).map_err(csv_err)?;
    let k = result.scenario.topology.users_per_cell;
    w.write_record([
        "user", "bs", "k", "mean_queue", "delay_slots", "sojourn_slots", "admitted", "dropped",
        "departed", "mean_rate",
    ])
    .map_err(csv_err)?;
    for s in &result.summary.users {
        w.write_record([
            s.user.to_string(),
            (s.user / k).to_string(),
            (s.user % k).to_string(),
            s.mean_queue.to_string(),
            s.delay_slots.to_string(),
            s.sojourn_slots.to_string(),
            s.admitted.to_string(),
            s.dropped.to_string(),
            s.departed.to_string(),
            s.mean_rate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_bss(dir: &Path, result: &EpisodeResult) -> Result<()> {
    let mut w = Writer::from_path(dir.join("bs.csv")).map_err(csv_err)?;
    w.write_record(["bs", "mean_power", "steady_power", "final_gamma", "min_gamma", "max_gamma"])
        .map_err(csv_err)?;
    for b in &result.summary.bss {
        w.write_record([
            b.bs.to_string(),
            b.mean_power.to_string(),
            b.steady_power.to_string(),
            opt(b.final_gamma),
            opt(b.min_gamma),
            opt(b.max_gamma),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_slots(dir: &Path, result: &EpisodeResult) -> Result<()> {
    let topo = &result.scenario.topology;
    let mut w = Writer::from_path(dir.join("slots.csv")).map_err(csv_err)?;
    let mut header: Vec<String> = [
        "slot", "skipped", "pattern_id", "num_clusters", "qsiwfa_iterations", "qsiwfa_converged",
        "alpha", "contraction_satisfied", "drops",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..topo.num_users()).map(|u| format!("queue_{u}")));
    header.extend((0..topo.num_cells).map(|b| format!("power_{b}")));
    let with_gamma = result.slots.iter().any(|s| !s.gamma.is_empty());
    if with_gamma {
        header.extend((0..topo.num_cells).map(|b| format!("gamma_{b}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for s in &result.slots {
        let mut row = vec![
            s.slot.to_string(),
            u8::from(s.skipped).to_string(),
            opt(s.pattern_id),
            s.num_clusters.to_string(),
            opt(s.game.map(|g| g.iterations)),
            opt(s.game.map(|g| u8::from(g.converged))),
            opt(s.game.map(|g| g.alpha)),
            opt(s.game.map(|g| u8::from(g.satisfied))),
            s.drops.to_string(),
        ];
        row.extend(s.queues.iter().map(|q| q.to_string()));
        row.extend(s.bs_power.iter().map(|p| p.to_string()));
        if with_gamma {
            row.extend(s.gamma.iter().map(|g| g.to_string()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_potentials(dir: &Path, result: &EpisodeResult) -> Result<()> {
    let mut w = Writer::from_path(dir.join("potentials.csv")).map_err(csv_err)?;
    w.write_record(["slot", "cluster", "user", "q", "value"]).map_err(csv_err)?;
    for p in &result.potentials {
        w.write_record([
            p.slot.to_string(),
            p.cluster.to_string(),
            p.user.to_string(),
            p.q.to_string(),
            p.value.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
