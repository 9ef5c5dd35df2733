//! Parameter grids, batch execution and the bandwidth-doubling ablation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{self, ConfigError, JobConfig};
use crate::engine::{run_batch, IterationTrace, SimError};
use crate::metrics::{attach_multipliers, format_sig9, CsvRow, MetricsError, SweepRow, BASELINE_DISTANCE};
use crate::units::Bandwidth;

pub const DEFAULT_SWEEP_CAP: usize = 10_000;

/// Scenario sizes the default grids are built for.
pub const TABLE1_TOTAL_GPUS: [u32; 3] = [256, 2048, 8192];
pub const DEFAULT_DISTANCE_AXIS: &str = "0.3:1000:13";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("bad range `{value}` for `{key}`: {reason}")]
    BadRange { key: String, value: String, reason: String },
    #[error("sweep expands to {size} configs, above the cap of {cap}")]
    CapExceeded { size: u128, cap: usize },
    #[error("{} invalid combinations; first: {}", .0.len(), .0[0].1)]
    InvalidCombinations(Vec<(usize, ConfigError)>),
    #[error("simulation of config {index} failed: {source}")]
    Simulation { index: usize, source: SimError },
}

/// A base scenario plus the axes to vary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSpec {
    /// Keys with one value.
    pub base: BTreeMap<String, String>,
    /// Keys with more than one value, expanded in key order.
    pub axes: BTreeMap<String, Vec<String>>,
}

/// `steps` points from `lo` to `hi` inclusive with a constant ratio.
pub fn geometric_range(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln();
            let last = (steps - 1) as f64;
            (0..steps)
                .map(|i| match i {
                    0 => lo,
                    i if i == steps - 1 => hi,
                    i => lo * (ratio * i as f64 / last).exp(),
                })
                .collect()
        }
    }
}

fn parse_geometric(key: &str, value: &str) -> Result<Vec<String>, SweepError> {
    let bad = |reason: &str| SweepError::BadRange { key: key.into(), value: value.into(), reason: reason.into() };
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let [lo, hi, steps] = parts[..] else { return Err(bad("expected lo:hi:steps")) };
    let lo: f64 = lo.parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.parse().map_err(|_| bad("hi is not a number"))?;
    let steps: usize = steps.parse().map_err(|_| bad("steps is not an integer"))?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(bad("need 0 < lo <= hi"));
    }
    if steps == 0 {
        return Err(bad("steps must be >= 1"));
    }
    Ok(geometric_range(lo, hi, steps).into_iter().map(|v| v.to_string()).collect())
}

impl SweepSpec {
    /// Parses a grid document: scenario keys whose values may be
    /// comma-separated lists, and `lo:hi:steps` ranges for distance.
    pub fn parse(text: &str) -> Result<SweepSpec, SweepError> {
        let entries = config::parse_entries(text)?;
        let mut spec = SweepSpec::default();
        for (key, entry) in entries {
            let values: Vec<String> = if key == "inter_distance_km" && entry.value.contains(':') {
                parse_geometric(&key, &entry.value)?
            } else {
                entry.value.split(',').map(|v| v.trim().to_string()).collect()
            };
            if values.iter().any(String::is_empty) {
                return Err(ConfigError::Syntax {
                    line: entry.line,
                    column: 1,
                    message: format!("empty list item for `{key}`"),
                }
                .into());
            }
            spec.set(&key, values);
        }
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, mut values: Vec<String>) {
        self.base.remove(key);
        self.axes.remove(key);
        if values.len() == 1 {
            self.base.insert(key.to_string(), values.pop().unwrap());
        } else {
            self.axes.insert(key.to_string(), values);
        }
    }

    /// Models x GPUs x fibers x 13 log-spaced distances at one cluster size.
    pub fn table1(total_gpus: u32) -> SweepSpec {
        let text = format!(
            "model=gpt3-13b,gpt3-175b\ngpu=a100,h100\nfiber=hcf,smf\ntotal_gpus={total_gpus}\ninter_distance_km={DEFAULT_DISTANCE_AXIS}\n"
        );
        SweepSpec::parse(&text).expect("built-in grid parses")
    }

    pub fn cardinality(&self) -> u128 {
        self.axes.values().map(|v| v.len() as u128).product()
    }

    pub fn expand(&self) -> Result<Vec<JobConfig>, SweepError> {
        expand_sweep(self, DEFAULT_SWEEP_CAP)
    }
}

/// Cartesian product over the axes, last key varying fastest.
pub fn expand_sweep(spec: &SweepSpec, cap: usize) -> Result<Vec<JobConfig>, SweepError> {
    let size = spec.cardinality();
    if size > cap as u128 {
        return Err(SweepError::CapExceeded { size, cap });
    }
    let axes: Vec<(&str, &[String])> = spec.axes.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
    let mut configs = Vec::with_capacity(size as usize);
    let mut errors = Vec::new();
    let mut index = vec![0usize; axes.len()];
    for n in 0..size as usize {
        let mut values: BTreeMap<&str, &str> = spec.base.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        for (a, &(key, vals)) in axes.iter().enumerate() {
            values.insert(key, &vals[index[a]]);
        }
        match config::resolve(&values) {
            Ok(c) => configs.push(c),
            Err(e) => errors.push((n, e)),
        }
        for a in (0..axes.len()).rev() {
            index[a] += 1;
            if index[a] < axes[a].1.len() {
                break;
            }
            index[a] = 0;
        }
    }
    if errors.is_empty() {
        Ok(configs)
    } else {
        Err(SweepError::InvalidCombinations(errors))
    }
}

/// Runs every config, then any missing 0.3 km baselines, and returns rows with
/// multipliers attached, in input order.
pub fn run_sweep(configs: &[JobConfig], jobs: usize) -> Result<(Vec<SweepRow>, Vec<IterationTrace>), SweepError> {
    let traces = collect(run_batch(configs, jobs))?;
    let mut rows: Vec<SweepRow> = configs.iter().zip(&traces).map(|(c, t)| SweepRow::new(c, t)).collect();

    let have: std::collections::BTreeSet<_> =
        rows.iter().filter(|r| r.distance == BASELINE_DISTANCE).map(SweepRow::group).collect();
    let mut extra = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (c, r) in configs.iter().zip(&rows) {
        let g = r.group();
        if !have.contains(&g) && seen.insert(g) {
            let mut base = c.clone();
            base.topology.inter_distance = BASELINE_DISTANCE;
            extra.push(base);
        }
    }
    let extra_traces = collect(run_batch(&extra, jobs))?;
    let mut baseline_rows: Vec<SweepRow> = extra.iter().zip(&extra_traces).map(|(c, t)| SweepRow::new(c, t)).collect();
    let n = rows.len();
    rows.append(&mut baseline_rows);
    attach_multipliers(&mut rows).expect("every group has a baseline");
    rows.truncate(n);
    Ok((rows, traces))
}

fn collect(results: Vec<Result<IterationTrace, SimError>>) -> Result<Vec<IterationTrace>, SweepError> {
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| r.map_err(|source| SweepError::Simulation { index, source }))
        .collect()
}

/// One grid point of the bandwidth-doubling ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationPoint {
    pub base: SweepRow,
    pub doubled: SweepRow,
    /// `eta(2B) - eta(B)`.
    pub improvement: f64,
    /// Serialization time saved by doubling, as a fraction of the original
    /// iteration. Bounds `improvement` from above.
    pub serialization_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub points: Vec<AblationPoint>,
}

impl AblationReport {
    pub fn max_improvement(&self) -> f64 {
        self.points.iter().map(|p| p.improvement).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_serialization_share(&self) -> f64 {
        self.points.iter().map(|p| p.serialization_share).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> Option<&AblationPoint> {
        self.points.iter().max_by(|a, b| a.improvement.total_cmp(&b.improvement))
    }
}

pub const ABLATION_HEADER: [&str; 11] = [
    "model",
    "gpu",
    "fiber",
    "total_gpus",
    "distance_m",
    "inter_bw_Bps",
    "bucket_bytes",
    "eta_base",
    "eta_doubled",
    "improvement",
    "serialization_share",
];

impl AblationReport {
    /// One record per grid point, sorted like the sweep table.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), MetricsError> {
        let mut points: Vec<&AblationPoint> = self.points.iter().collect();
        points.sort_by(|a, b| a.base.order(&b.base));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        w.write_record(ABLATION_HEADER)?;
        for p in points {
            let mut rec = p.base.record();
            rec.truncate(7);
            rec.extend([p.base.eta, p.doubled.eta, p.improvement, p.serialization_share].map(format_sig9));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Saved long-haul serialization time over `t_total`, analytically.
pub fn serialization_share(config: &JobConfig, t_total_s: f64) -> f64 {
    let Bandwidth::BytesPerSec(bw) = config.topology.inter_bandwidth else { return 0.0 };
    let bytes = config.model.gradient_bytes() as f64 * config.topology.inter_traversals as f64;
    let saved = bytes / bw as f64 - bytes / (2.0 * bw as f64);
    saved / t_total_s
}

/// Runs each config at its bandwidth and at twice that.
pub fn bandwidth_ablation(configs: &[JobConfig], jobs: usize) -> Result<AblationReport, SweepError> {
    let doubled: Vec<JobConfig> = configs
        .iter()
        .map(|c| {
            let mut d = c.clone();
            d.topology.inter_bandwidth = c.topology.inter_bandwidth.doubled();
            d
        })
        .collect();
    let base = collect(run_batch(configs, jobs))?;
    let fast = collect(run_batch(&doubled, jobs))?;
    let points = configs
        .iter()
        .zip(&doubled)
        .zip(base.iter().zip(&fast))
        .map(|((c, d), (tb, tf))| {
            let base = SweepRow::new(c, tb);
            let doubled = SweepRow::new(d, tf);
            AblationPoint {
                improvement: doubled.eta - base.eta,
                serialization_share: serialization_share(c, base.t_total_s),
                base,
                doubled,
            }
        })
        .collect();
    Ok(AblationReport { points })
}
