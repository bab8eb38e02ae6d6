//! Monte Carlo studies: decay-rate scaling, the one-arm exponent, dual
//! circuits and frame events, loop counts along a row of frames, and the
//! rectangle construction on random paths.
//!
//! Every experiment is a deterministic function of its [`ExperimentConfig`]:
//! independent chains get their own RNG stream and results are gathered in
//! task order.

mod decay;
mod frames;
mod geometry;
mod onearm;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::{RngStream, SimRng};
use crate::stats::{Estimate, LinearFit};

pub use decay::{fit_decay, DecayFit, DecayPoint};
pub use geometry::{random_lattice_path, RandomPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "decay")]
    Decay,
    #[serde(rename = "onearm")]
    OneArm,
    #[serde(rename = "rsw")]
    Rsw,
    #[serde(rename = "hR")]
    HR,
    #[serde(rename = "loops")]
    Loops,
    #[serde(rename = "rectangles")]
    Rectangles,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Decay,
        ExperimentKind::OneArm,
        ExperimentKind::Rsw,
        ExperimentKind::HR,
        ExperimentKind::Loops,
        ExperimentKind::Rectangles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Decay => "decay",
            ExperimentKind::OneArm => "onearm",
            ExperimentKind::Rsw => "rsw",
            ExperimentKind::HR => "hR",
            ExperimentKind::Loops => "loops",
            ExperimentKind::Rectangles => "rectangles",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
                Error::invalid(format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Parameters of one experiment run. Lengths are in lattice units at
/// spacing 1 unless noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Side of the square box (decay).
    pub size: usize,
    pub spacings: Vec<f64>,
    pub fields: Vec<f64>,
    /// Separations along the axes (decay).
    pub distances: Vec<usize>,
    /// Box half-widths (onearm).
    pub radii: Vec<usize>,
    /// Frame counts per row (loops).
    pub frames: Vec<usize>,
    /// Independent chains per grid point.
    pub replicas: usize,
    /// Measured sweeps per chain.
    pub sweeps: u64,
    pub burn_in: u64,
    /// Batches per chain for batch-means errors.
    pub batches: usize,
    /// Random paths (rectangles).
    pub paths: usize,
    /// Sets all internal couplings to 0 (rsw diagnostic).
    #[serde(default)]
    pub zero_internal_couplings: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            kind,
            seed: 1,
            size: 0,
            spacings: vec![1.0],
            fields: vec![0.0],
            distances: vec![],
            radii: vec![],
            frames: vec![],
            replicas: 2,
            sweeps: 1000,
            burn_in: 200,
            batches: 10,
            paths: 0,
            zero_internal_couplings: false,
            out: None,
        };
        match kind {
            ExperimentKind::Decay => ExperimentConfig {
                size: 256,
                fields: vec![0.0, 0.05, 0.1, 0.2, 0.4, 1.0],
                distances: (1..=48).collect(),
                sweeps: 1200,
                ..base
            },
            ExperimentKind::OneArm => ExperimentConfig {
                spacings: vec![1.0, 0.5],
                radii: vec![8, 16, 32, 64, 128],
                sweeps: 4000,
                ..base
            },
            ExperimentKind::Rsw => ExperimentConfig {
                spacings: vec![1.0, 0.5, 0.25, 0.125],
                fields: vec![0.0, 1e-4, 0.05],
                sweeps: 1000,
                ..base
            },
            ExperimentKind::HR => ExperimentConfig {
                spacings: vec![1.0, 0.5, 0.25, 0.125],
                fields: vec![0.1],
                sweeps: 3000,
                ..base
            },
            ExperimentKind::Loops => ExperimentConfig {
                spacings: vec![0.5],
                fields: vec![0.1],
                frames: vec![4, 8, 16, 32],
                sweeps: 6000,
                ..base
            },
            ExperimentKind::Rectangles => ExperimentConfig {
                paths: 10_000,
                replicas: 1,
                sweeps: 1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.replicas == 0 || self.sweeps == 0 || self.batches == 0 {
            return bad("replicas, sweeps and batches must be positive".into());
        }
        if self.spacings.is_empty() || self.fields.is_empty() {
            return bad("spacing and field grids must be nonempty".into());
        }
        if let Some(a) = self.spacings.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return bad(format!("spacing {a} is outside (0, 1]"));
        }
        if let Some(h) = self.fields.iter().find(|&&h| !(h >= 0.0 && h.is_finite())) {
            return bad(format!("field {h} must be finite and >= 0"));
        }
        match self.kind {
            ExperimentKind::Decay => {
                if self.distances.is_empty() {
                    return bad("distance grid must be nonempty".into());
                }
                let reach = *self.distances.iter().max().unwrap();
                if self.size < 8 || reach == 0 || 2 * reach >= self.size {
                    return bad(format!(
                        "distances up to {reach} do not fit the central half of a {} box",
                        self.size
                    ));
                }
            }
            ExperimentKind::OneArm => {
                if self.radii.is_empty() || self.radii.contains(&0) {
                    return bad("radius grid must be nonempty and positive".into());
                }
            }
            ExperimentKind::Loops => {
                if self.frames.is_empty() {
                    return bad("frame-count grid must be nonempty".into());
                }
                if let Some(n) = self.frames.iter().find(|&&n| n > MAX_FRAMES) {
                    return bad(format!("{n} frames exceed the row limit of {MAX_FRAMES}"));
                }
            }
            ExperimentKind::Rectangles => {
                if self.paths == 0 {
                    return bad("path count must be positive".into());
                }
            }
            ExperimentKind::Rsw | ExperimentKind::HR => {}
        }
        Ok(())
    }

    /// Multiplies the sweep budget and burn-in by `factor`, keeping at least
    /// one sweep per batch.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("budget scale {factor} must be positive")));
        }
        let mut c = self.clone();
        c.sweeps = ((self.sweeps as f64 * factor).round() as u64).max(self.batches as u64);
        c.burn_in = (self.burn_in as f64 * factor).round() as u64;
        if self.kind == ExperimentKind::Rectangles {
            c.paths = ((self.paths as f64 * factor).round() as usize).max(1);
        }
        Ok(c)
    }
}

/// Longest row accepted by the loop-count experiment.
pub const MAX_FRAMES: usize = 64;

/// A numeric table with a header row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Machine-readable outcome of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment: String,
    pub parameters: ExperimentConfig,
    pub estimates: BTreeMap<String, Estimate>,
    pub fits: BTreeMap<String, LinearFit>,
    pub flags: BTreeMap<String, bool>,
    pub notes: Vec<String>,
}

impl Summary {
    fn new(cfg: &ExperimentConfig) -> Self {
        Summary {
            experiment: cfg.kind.name().to_string(),
            parameters: cfg.clone(),
            estimates: BTreeMap::new(),
            fits: BTreeMap::new(),
            flags: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.get(name).copied()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub table: Table,
    pub summary: Summary,
}

impl ExperimentOutput {
    /// Writes `<name>.csv` and `<name>.json` into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let name = &self.summary.experiment;
        let csv = dir.join(format!("{name}.csv"));
        let json = dir.join(format!("{name}.json"));
        self.table.write_csv(&csv)?;
        std::fs::write(&json, serde_json::to_string_pretty(&self.summary)? + "\n")?;
        Ok(vec![csv, json])
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Decay => decay::decay_scan(cfg),
        ExperimentKind::OneArm => onearm::onearm_scan(cfg),
        ExperimentKind::Rsw => frames::rsw_probe(cfg),
        ExperimentKind::HR => frames::hr_probe(cfg),
        ExperimentKind::Loops => frames::loop_count_probe(cfg),
        ExperimentKind::Rectangles => geometry::rectangle_check(cfg),
    }
}

pub fn decay_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::Decay)?;
    run_experiment(cfg)
}

pub fn onearm_scan(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::OneArm)?;
    run_experiment(cfg)
}

pub fn rsw_probe(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::Rsw)?;
    run_experiment(cfg)
}

pub fn hr_probe(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::HR)?;
    run_experiment(cfg)
}

pub fn loop_count_probe(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::Loops)?;
    run_experiment(cfg)
}

pub fn rectangle_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::Rectangles)?;
    run_experiment(cfg)
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::invalid(format!("config is for {}, not {kind}", cfg.kind)));
    }
    Ok(())
}

/// Runs `job(point, replica, rng)` for every grid point and replica in
/// parallel, each on its own stream, and returns the results grouped by point
/// in replica order.
fn per_replica<P, T, F>(cfg: &ExperimentConfig, points: &[P], job: F) -> Result<Vec<Vec<T>>>
where
    P: Sync,
    T: Send,
    F: Fn(&P, &mut SimRng) -> Result<T> + Sync,
{
    per_replica_from(cfg, 0, points, job)
}

/// As [`per_replica`], with stream indices starting at `first_stream`.
fn per_replica_from<P, T, F>(
    cfg: &ExperimentConfig,
    first_stream: u64,
    points: &[P],
    job: F,
) -> Result<Vec<Vec<T>>>
where
    P: Sync,
    T: Send,
    F: Fn(&P, &mut SimRng) -> Result<T> + Sync,
{
    let r = cfg.replicas;
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..r).map(move |k| (p, k)))
        .collect();
    let results: Vec<T> = tasks
        .par_iter()
        .map(|&(p, k)| {
            let mut rng = RngStream::new(cfg.seed, first_stream + (p * r + k) as u64).rng();
            job(&points[p], &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut grouped: Vec<Vec<T>> = (0..points.len()).map(|_| Vec::with_capacity(r)).collect();
    for (t, (p, _)) in results.into_iter().zip(tasks) {
        grouped[p].push(t);
    }
    Ok(grouped)
}

/// Batch means of one chain's series, `batches` values.
fn chain_batches(series: &[f64], batches: usize) -> Vec<f64> {
    let batches = batches.clamp(1, series.len().max(1));
    let len = series.len() / batches;
    if len == 0 {
        return series.to_vec();
    }
    (0..batches)
        .map(|b| series[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64)
        .collect()
}

/// Pools the batch means of several chains into one estimate. A series that
/// never varies gets the binomial floor `1/(2n)` as its error so no estimate
/// carries a zero error.
fn pooled(chains: &[Vec<f64>], batches: usize) -> Estimate {
    let all: Vec<f64> = chains.iter().flat_map(|c| chain_batches(c, batches)).collect();
    let mut est = Estimate::from_batches(&all);
    let n: usize = chains.iter().map(Vec::len).sum();
    let floor = 0.5 / n.max(1) as f64;
    if !(est.se > 0.0) || !est.se.is_finite() {
        est.se = floor;
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            ExperimentConfig::defaults(k).validate().unwrap();
        }
        assert!("hr".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn validation_rejects_empty_grids() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::Decay);
        c.fields.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::OneArm);
        c.sweeps = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::defaults(ExperimentKind::Loops);
        c.frames = vec![MAX_FRAMES + 1];
        assert!(c.validate().is_err());
    }

    #[test]
    fn scaling_keeps_one_sweep_per_batch() {
        let c = ExperimentConfig::defaults(ExperimentKind::Rsw).scaled(1e-6).unwrap();
        assert_eq!(c.sweeps, c.batches as u64);
        assert!(ExperimentConfig::defaults(ExperimentKind::Rsw).scaled(0.0).is_err());
    }

    #[test]
    fn pooled_error_is_never_zero() {
        let e = pooled(&[vec![0.0; 100], vec![0.0; 100]], 10);
        assert_eq!(e.value, 0.0);
        assert!(e.se > 0.0);
    }
}
