//! Parameter sweeps over values x seeds x schemes with confidence intervals.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use csv::Writer;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

use super::config::{Scheme, SimConfig};
use super::engine::{run_episode_with, TraceOptions};
use super::metrics::Summary;

/// One episode of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scheme: Scheme,
    pub value: f64,
    pub seed: u64,
    pub summary: Summary,
}

/// Seed-aggregated delay at one (scheme, value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub value: f64,
    pub n: usize,
    pub mean: f64,
    /// Half-width of the two-sided 95% Student-t interval.
    pub ci_half_width: f64,
}

impl Aggregate {
    pub fn ci_low(&self) -> f64 {
        self.mean - self.ci_half_width
    }

    pub fn ci_high(&self) -> f64 {
        self.mean + self.ci_half_width
    }

    pub fn overlaps(&self, other: &Aggregate) -> bool {
        self.ci_low() <= other.ci_high() && other.ci_low() <= self.ci_high()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub points: Vec<SweepPoint>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepResult {
    pub fn aggregate(&self, scheme: Scheme, value: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.scheme == scheme && a.value == value)
    }
}

/// Mean and 95% half-width of a sample.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Runs every (value, seed, scheme) combination. Episodes run on all
/// available cores; results are ordered deterministically.
pub fn run_sweep(
    base: &SimConfig,
    axis: &str,
    values: &[f64],
    seeds: &[u64],
    schemes: &[Scheme],
) -> Result<SweepResult> {
    if values.is_empty() || seeds.is_empty() || schemes.is_empty() {
        return Err(Error::config("a sweep needs at least one value, seed and scheme"));
    }
    let mut jobs = Vec::new();
    for &value in values {
        let cfg = base.with_field(axis, value)?;
        for &seed in seeds {
            for &scheme in schemes {
                let mut c = cfg.clone();
                c.run.seed = seed;
                c.scheme.kind = scheme;
                c.output.dir = None;
                c.validate()?;
                jobs.push((scheme, value, seed, c));
            }
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Summary>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, _, _, cfg)) = jobs.get(i) else {
                    break;
                };
                let r = run_episode_with(cfg, TraceOptions::NONE).map(|e| e.summary);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    let summaries = results.into_inner().expect("no poisoned workers");
    let mut points = Vec::with_capacity(jobs.len());
    for ((scheme, value, seed, _), r) in jobs.into_iter().zip(summaries) {
        let summary = r.expect("every job ran")?;
        points.push(SweepPoint {
            scheme,
            value,
            seed,
            summary,
        });
    }
    let mut aggregates = Vec::new();
    for &value in values {
        for &scheme in schemes {
            let xs: Vec<f64> = points
                .iter()
                .filter(|p| p.scheme == scheme && p.value == value)
                .map(|p| p.summary.mean_delay_slots)
                .collect();
            let (mean, half) = mean_ci(&xs);
            aggregates.push(Aggregate {
                scheme,
                value,
                n: xs.len(),
                mean,
                ci_half_width: half,
            });
        }
    }
    Ok(SweepResult {
        axis: axis.to_string(),
        values: values.to_vec(),
        schemes: schemes.to_vec(),
        points,
        aggregates,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// File stem of a sweep's figure family, e.g. `delay_vs_budget_dbm`.
pub fn family_stem(axis: &str) -> String {
    format!("delay_vs_{}", axis.rsplit('.').next().unwrap_or(axis))
}

/// Writes `<stem>_points.csv` (one row per episode), `<stem>_aggregate.csv`
/// (one row per scheme and value) and `<stem>.csv` (one row per value with
/// mean and interval columns per scheme).
pub fn write_sweep(dir: &Path, result: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let stem = family_stem(&result.axis);

    let mut w = Writer::from_path(dir.join(format!("{stem}_points.csv"))).map_err(csv_err)?;
    w.write_record([
        "axis", "value", "scheme", "seed", "mean_delay_slots", "mean_delay_seconds", "mean_power",
        "steady_power", "drop_rate",
    ])
    .map_err(csv_err)?;
    for p in &result.points {
        w.write_record([
            result.axis.clone(),
            p.value.to_string(),
            p.scheme.name().to_string(),
            p.seed.to_string(),
            p.summary.mean_delay_slots.to_string(),
            p.summary.mean_delay_seconds.to_string(),
            p.summary.mean_power.to_string(),
            p.summary.steady_power.to_string(),
            p.summary.drop_rate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = Writer::from_path(dir.join(format!("{stem}_aggregate.csv"))).map_err(csv_err)?;
    w.write_record(["axis", "value", "scheme", "n", "mean_delay_slots", "ci_low", "ci_high"])
        .map_err(csv_err)?;
    for a in &result.aggregates {
        w.write_record([
            result.axis.clone(),
            a.value.to_string(),
            a.scheme.name().to_string(),
            a.n.to_string(),
            a.mean.to_string(),
            a.ci_low().to_string(),
            a.ci_high().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = Writer::from_path(dir.join(format!("{stem}.csv"))).map_err(csv_err)?;
    let mut header = vec!["value".to_string()];
    for s in &result.schemes {
        header.push(format!("{}_mean", s.name()));
        header.push(format!("{}_ci_low", s.name()));
        header.push(format!("{}_ci_high", s.name()));
    }
    w.write_record(&header).map_err(csv_err)?;
    for &value in &result.values {
        let mut row = vec![value.to_string()];
        for &s in &result.schemes {
            let a = result.aggregate(s, value).expect("aggregate per scheme and value");
            row.push(a.mean.to_string());
            row.push(a.ci_low().to_string());
            row.push(a.ci_high().to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_of_constant_sample_is_zero() {
        let (m, h) = mean_ci(&[2.0, 2.0, 2.0]);
        assert_eq!(m, 2.0);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn ci_two_points() {
        let (m, h) = mean_ci(&[0.0, 2.0]);
        assert_eq!(m, 1.0);
        assert!((h - 12.706204736).abs() < 1e-6);
    }

    #[test]
    fn stem() {
        assert_eq!(family_stem("radio.budget_dbm"), "delay_vs_budget_dbm");
    }
}
