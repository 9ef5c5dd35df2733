//! Overlap, HCF benefit and training-time multiplier, plus CSV tables.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::config::{FiberKind, JobConfig};
use crate::engine::IterationTrace;
use crate::units::{Bandwidth, Distance, Picos};

/// Distance every multiplier is measured against.
pub const BASELINE_DISTANCE: Distance = Distance::from_meters(300);

pub const SWEEP_HEADER: [&str; 11] = [
    "model",
    "gpu",
    "fiber",
    "total_gpus",
    "distance_m",
    "inter_bw_Bps",
    "bucket_bytes",
    "t_compute_s",
    "t_total_s",
    "eta",
    "multiplier",
];

pub const DELTA_HEADER: [&str; 7] =
    ["model", "gpu", "total_gpus", "distance_m", "inter_bw_Bps", "bucket_bytes", "delta_eta"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("iteration time is zero")]
    ZeroTotal,
    #[error("no 0.3 km baseline for {0}")]
    MissingBaseline(String),
    #[error("baseline row does not match: {0}")]
    BaselineMismatch(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad csv record {line}: {reason}")]
    BadRecord { line: u64, reason: String },
}

/// `t_compute / t_total`.
pub fn overlap_ratio(t_compute: Picos, t_total: Picos) -> f64 {
    assert!(t_total.0 > 0, "overlap undefined for a zero-length iteration");
    t_compute.0 as f64 / t_total.0 as f64
}

pub fn overlap(trace: &IterationTrace) -> Result<f64, MetricsError> {
    if trace.t_total.0 == 0 {
        return Err(MetricsError::ZeroTotal);
    }
    Ok(overlap_ratio(trace.t_compute, trace.t_total))
}

/// Coordinates shared by every row of one curve, ignoring distance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub model: String,
    pub gpu: String,
    pub fiber: FiberKind,
    pub total_gpus: u64,
    pub inter_bw: Bandwidth,
    pub bucket_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub model: String,
    pub gpu: String,
    pub fiber: FiberKind,
    pub total_gpus: u64,
    pub distance: Distance,
    pub inter_bw: Bandwidth,
    pub bucket_bytes: u64,
    pub t_compute_s: f64,
    pub t_total_s: f64,
    pub eta: f64,
    /// Filled once the matching baseline row is known.
    pub multiplier: Option<f64>,
}

impl SweepRow {
    pub fn new(config: &JobConfig, trace: &IterationTrace) -> SweepRow {
        SweepRow {
            model: config.model.name.clone(),
            gpu: config.gpu.name.clone(),
            fiber: config.topology.fiber.kind,
            total_gpus: config.topology.total_gpus(),
            distance: config.topology.inter_distance,
            inter_bw: config.topology.inter_bandwidth,
            bucket_bytes: config.bucket_bytes,
            t_compute_s: trace.t_compute.as_secs_f64(),
            t_total_s: trace.t_total.as_secs_f64(),
            eta: overlap_ratio(trace.t_compute, trace.t_total),
            multiplier: None,
        }
    }

    pub fn group(&self) -> GroupKey {
        GroupKey {
            model: self.model.clone(),
            gpu: self.gpu.clone(),
            fiber: self.fiber,
            total_gpus: self.total_gpus,
            inter_bw: self.inter_bw,
            bucket_bytes: self.bucket_bytes,
        }
    }

    fn sort_key(&self) -> (GroupKey, Distance) {
        (self.group(), self.distance)
    }

    fn pair_key(&self) -> PairKey {
        PairKey {
            model: self.model.clone(),
            gpu: self.gpu.clone(),
            total_gpus: self.total_gpus,
            distance: self.distance,
            inter_bw: self.inter_bw,
            bucket_bytes: self.bucket_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct PairKey {
    model: String,
    gpu: String,
    total_gpus: u64,
    distance: Distance,
    inter_bw: Bandwidth,
    bucket_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub model: String,
    pub gpu: String,
    pub total_gpus: u64,
    pub distance: Distance,
    pub inter_bw: Bandwidth,
    pub bucket_bytes: u64,
    pub delta_eta: f64,
}

/// A row whose other-fiber partner is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Unpaired {
    pub model: String,
    pub gpu: String,
    pub fiber: FiberKind,
    pub distance: Distance,
}

/// `eta(HCF) - eta(SMF)` for every coordinate present with both fibers.
pub fn delta_eta(rows: &[SweepRow]) -> (Vec<DeltaRow>, Vec<Unpaired>) {
    let mut by_key: BTreeMap<PairKey, (Option<&SweepRow>, Option<&SweepRow>)> = BTreeMap::new();
    for r in rows {
        let slot = by_key.entry(r.pair_key()).or_default();
        match r.fiber {
            FiberKind::Hcf => slot.0 = Some(r),
            FiberKind::Smf => slot.1 = Some(r),
        }
    }
    let mut deltas = Vec::new();
    let mut unpaired = Vec::new();
    for (k, slot) in by_key {
        match slot {
            (Some(h), Some(s)) => deltas.push(DeltaRow {
                model: k.model,
                gpu: k.gpu,
                total_gpus: k.total_gpus,
                distance: k.distance,
                inter_bw: k.inter_bw,
                bucket_bytes: k.bucket_bytes,
                delta_eta: h.eta - s.eta,
            }),
            (Some(r), None) | (None, Some(r)) => unpaired.push(Unpaired {
                model: r.model.clone(),
                gpu: r.gpu.clone(),
                fiber: r.fiber,
                distance: r.distance,
            }),
            (None, None) => unreachable!(),
        }
    }
    (deltas, unpaired)
}

/// `t_total / t_total(baseline)`; the baseline must be the same curve at 0.3 km.
pub fn time_multiplier(row: &SweepRow, baseline: &SweepRow) -> Result<f64, MetricsError> {
    if baseline.distance != BASELINE_DISTANCE {
        return Err(MetricsError::BaselineMismatch(format!("baseline distance {} m", baseline.distance.meters())));
    }
    if row.group() != baseline.group() {
        return Err(MetricsError::BaselineMismatch(format!("{:?} vs {:?}", row.group(), baseline.group())));
    }
    Ok(row.t_total_s / baseline.t_total_s)
}

/// Fills `multiplier` on every row from the baseline row of its curve.
pub fn attach_multipliers(rows: &mut [SweepRow]) -> Result<(), MetricsError> {
    let baselines: BTreeMap<GroupKey, f64> =
        rows.iter().filter(|r| r.distance == BASELINE_DISTANCE).map(|r| (r.group(), r.t_total_s)).collect();
    for r in rows.iter_mut() {
        let base =
            baselines.get(&r.group()).ok_or_else(|| MetricsError::MissingBaseline(format!("{:?}", r.group())))?;
        r.multiplier = Some(r.t_total_s / base);
    }
    Ok(())
}

/// `%g`-style rendering with nine significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if !(-5..9).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    let fixed = format!("{x:.decimals$}");
    if fixed.contains('.') {
        fixed.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        fixed
    }
}

/// A record for one of the two CSV tables.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn record(&self) -> Vec<String>;
    fn order(&self, other: &Self) -> Ordering;
}

impl CsvRow for SweepRow {
    fn header() -> &'static [&'static str] {
        &SWEEP_HEADER
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            self.gpu.clone(),
            self.fiber.name().to_string(),
            self.total_gpus.to_string(),
            format_sig9(self.distance.meters()),
            self.inter_bw.to_string(),
            self.bucket_bytes.to_string(),
            format_sig9(self.t_compute_s),
            format_sig9(self.t_total_s),
            format_sig9(self.eta),
            self.multiplier.map(format_sig9).unwrap_or_default(),
        ]
    }

    fn order(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl CsvRow for DeltaRow {
    fn header() -> &'static [&'static str] {
        &DELTA_HEADER
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            self.gpu.clone(),
            self.total_gpus.to_string(),
            format_sig9(self.distance.meters()),
            self.inter_bw.to_string(),
            self.bucket_bytes.to_string(),
            format_sig9(self.delta_eta),
        ]
    }

    fn order(&self, other: &Self) -> Ordering {
        let key = |r: &DeltaRow| (r.model.clone(), r.gpu.clone(), r.total_gpus, r.distance, r.inter_bw, r.bucket_bytes);
        key(self).cmp(&key(other))
    }
}

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes header plus rows sorted by coordinates. Returns bytes written.
pub fn emit_csv<R: CsvRow, W: Write>(rows: &[R], destination: W) -> Result<u64, MetricsError> {
    let mut sorted: Vec<&R> = rows.iter().collect();
    sorted.sort_by(|a, b| a.order(b));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(CountingWriter { inner: destination, written: 0 });
    w.write_record(R::header())?;
    for r in sorted {
        w.write_record(r.record())?;
    }
    w.flush()?;
    let inner = w.into_inner().map_err(|e| MetricsError::Io(io::Error::other(e.to_string())))?;
    Ok(inner.written)
}

fn bandwidth_field(s: &str) -> Option<Bandwidth> {
    if s == "inf" {
        Some(Bandwidth::Unlimited)
    } else {
        s.parse().ok().map(Bandwidth::BytesPerSec)
    }
}

/// Reads a sweep table written by [`emit_csv`].
pub fn read_sweep_csv<R: Read>(source: R) -> Result<Vec<SweepRow>, MetricsError> {
    let mut rdr = csv::Reader::from_reader(source);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(MetricsError::BadRecord { line: 1, reason: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |field: &str| MetricsError::BadRecord { line, reason: format!("bad {field}") };
        let f = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| f(i).parse::<f64>().map_err(|_| bad(SWEEP_HEADER[i]));
        rows.push(SweepRow {
            model: f(0).to_string(),
            gpu: f(1).to_string(),
            fiber: FiberKind::from_name(f(2)).ok_or_else(|| bad("fiber"))?,
            total_gpus: f(3).parse().map_err(|_| bad("total_gpus"))?,
            distance: Distance::from_meters_f64(num(4)?),
            inter_bw: bandwidth_field(f(5)).ok_or_else(|| bad("inter_bw_Bps"))?,
            bucket_bytes: f(6).parse().map_err(|_| bad("bucket_bytes"))?,
            t_compute_s: num(7)?,
            t_total_s: num(8)?,
            eta: num(9)?,
            multiplier: if f(10).is_empty() { None } else { Some(num(10)?) },
        });
    }
    Ok(rows)
}
