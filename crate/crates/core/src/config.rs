//! Scenario types, presets, validation and the `key=value` scenario format.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::units::{exact_decimal, Bandwidth, Distance, Picos, Quantum, NANOMETERS_PER_METER};

/// Signal speed in standard single-mode fiber, m/s.
pub const SMF_SPEED_MPS: u64 = 200_000_000;
/// Signal speed in hollow-core fiber, m/s.
pub const HCF_SPEED_MPS: u64 = 300_000_000;

pub const MIN_BUCKET_BYTES: u64 = 1_000_000;
pub const MAX_BUCKET_BYTES: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FiberKind {
    Smf,
    Hcf,
}

impl FiberKind {
    pub fn name(self) -> &'static str {
        match self {
            FiberKind::Smf => "smf",
            FiberKind::Hcf => "hcf",
        }
    }

    pub fn from_name(name: &str) -> Option<FiberKind> {
        match name.to_ascii_lowercase().as_str() {
            "smf" => Some(FiberKind::Smf),
            "hcf" => Some(FiberKind::Hcf),
            _ => None,
        }
    }
}

impl fmt::Display for FiberKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FiberType {
    pub kind: FiberKind,
    /// Meters per second.
    pub propagation_speed: u64,
}

impl FiberType {
    pub const SMF: FiberType = FiberType { kind: FiberKind::Smf, propagation_speed: SMF_SPEED_MPS };
    pub const HCF: FiberType = FiberType { kind: FiberKind::Hcf, propagation_speed: HCF_SPEED_MPS };

    pub fn preset(kind: FiberKind) -> FiberType {
        match kind {
            FiberKind::Smf => FiberType::SMF,
            FiberKind::Hcf => FiberType::HCF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GpuSpec {
    pub name: String,
    /// Peak dense FLOP/s.
    pub peak_flops: u64,
}

impl GpuSpec {
    pub const PRESETS: [(&'static str, u64); 2] = [("a100", 312_000_000_000_000), ("h100", 989_000_000_000_000)];

    pub fn a100() -> GpuSpec {
        GpuSpec::preset("a100").unwrap()
    }

    pub fn h100() -> GpuSpec {
        GpuSpec::preset("h100").unwrap()
    }

    pub fn preset(name: &str) -> Option<GpuSpec> {
        let name = name.to_ascii_lowercase();
        GpuSpec::PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(n, peak_flops)| GpuSpec { name: n.to_string(), peak_flops })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub name: String,
    pub parameter_count: u64,
    pub layer_count: u32,
    pub grad_bytes_per_param: u8,
}

impl ModelSpec {
    /// GPT-3 family sizes: (name, parameters, layers).
    pub const PRESETS: [(&'static str, u64, u32); 2] =
        [("gpt3-13b", 13_000_000_000, 40), ("gpt3-175b", 175_000_000_000, 96)];
    /// fp16/bf16 gradients.
    pub const DEFAULT_GRAD_BYTES: u8 = 2;

    pub fn gpt3_13b() -> ModelSpec {
        ModelSpec::preset("gpt3-13b").unwrap()
    }

    pub fn gpt3_175b() -> ModelSpec {
        ModelSpec::preset("gpt3-175b").unwrap()
    }

    pub fn preset(name: &str) -> Option<ModelSpec> {
        let name = name.to_ascii_lowercase();
        ModelSpec::PRESETS.iter().find(|(n, ..)| *n == name).map(|&(n, parameter_count, layer_count)| ModelSpec {
            name: n.to_string(),
            parameter_count,
            layer_count,
            grad_bytes_per_param: ModelSpec::DEFAULT_GRAD_BYTES,
        })
    }

    pub fn gradient_bytes(&self) -> u128 {
        self.parameter_count as u128 * self.grad_bytes_per_param as u128
    }
}

/// Two lumped datacenters joined by one long-haul link.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TopologySpec {
    pub dc_count: u32,
    pub gpus_per_dc: u32,
    pub intra_bandwidth: Bandwidth,
    pub intra_latency: Picos,
    pub inter_bandwidth: Bandwidth,
    pub inter_distance: Distance,
    pub fiber: FiberType,
    /// Number of times one all-reduce crosses the inter-DC link.
    pub inter_traversals: u32,
}

impl TopologySpec {
    pub fn new(gpus_per_dc: u32, inter_distance: Distance, fiber: FiberType) -> TopologySpec {
        TopologySpec {
            dc_count: 2,
            gpus_per_dc,
            intra_bandwidth: Bandwidth::BytesPerSec(600_000_000_000),
            intra_latency: Picos(1_000_000),
            inter_bandwidth: Bandwidth::BytesPerSec(100_000_000_000),
            inter_distance,
            fiber,
            inter_traversals: 1,
        }
    }

    pub fn total_gpus(&self) -> u64 {
        self.dc_count as u64 * self.gpus_per_dc as u64
    }
}

/// One fully resolved simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub model: ModelSpec,
    pub gpu: GpuSpec,
    pub topology: TopologySpec,
    pub tokens_per_gpu: u64,
    pub bucket_bytes: u64,
    pub optimizer_step: Picos,
    /// Achieved fraction of peak FLOP/s, in (0, 1].
    pub compute_efficiency: f64,
    /// Whether the forward pass is simulated and counted as compute.
    pub include_forward: bool,
    pub quantum: Quantum,
}

impl JobConfig {
    pub const DEFAULT_TOKENS_PER_GPU: u64 = 8192;
    pub const DEFAULT_BUCKET_BYTES: u64 = 25_000_000;
    pub const DEFAULT_TOTAL_GPUS: u32 = 8192;

    /// A scenario with every optional field at its default.
    pub fn new(
        model: ModelSpec,
        gpu: GpuSpec,
        fiber: FiberType,
        total_gpus: u32,
        inter_distance: Distance,
    ) -> JobConfig {
        JobConfig {
            model,
            gpu,
            topology: TopologySpec::new(total_gpus / 2, inter_distance, fiber),
            tokens_per_gpu: Self::DEFAULT_TOKENS_PER_GPU,
            bucket_bytes: Self::DEFAULT_BUCKET_BYTES,
            optimizer_step: Picos::ZERO,
            compute_efficiency: 1.0,
            include_forward: false,
            quantum: Quantum::PICOSECOND,
        }
    }

    /// Returns the config unchanged when every invariant holds, else all violations.
    pub fn validate(self) -> Result<JobConfig, Vec<Violation>> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(violations)
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, constraint: &str, actual: String| {
            if !ok {
                out.push(Violation { field: field.to_string(), constraint: constraint.to_string(), actual });
            }
        };
        let m = &self.model;
        check(m.parameter_count > 0, "parameter_count", "> 0", m.parameter_count.to_string());
        check(m.layer_count >= 1, "layer_count", ">= 1", m.layer_count.to_string());
        check(
            matches!(m.grad_bytes_per_param, 1 | 2 | 4),
            "grad_bytes_per_param",
            "in {1, 2, 4}",
            m.grad_bytes_per_param.to_string(),
        );
        check(self.gpu.peak_flops > 0, "peak_flops", "> 0", self.gpu.peak_flops.to_string());
        let t = &self.topology;
        check(t.dc_count == 2, "dc_count", "== 2", t.dc_count.to_string());
        check(t.gpus_per_dc >= 1, "gpus_per_dc", ">= 1", t.gpus_per_dc.to_string());
        check(t.intra_bandwidth.is_positive(), "intra_bandwidth", "> 0", t.intra_bandwidth.to_string());
        check(t.inter_bandwidth.is_positive(), "inter_bandwidth", "> 0", t.inter_bandwidth.to_string());
        check(t.fiber.propagation_speed > 0, "propagation_speed", "> 0", t.fiber.propagation_speed.to_string());
        check(t.inter_traversals >= 1, "inter_traversals", ">= 1", t.inter_traversals.to_string());
        check(self.tokens_per_gpu >= 1, "tokens_per_gpu", ">= 1", self.tokens_per_gpu.to_string());
        check(
            (MIN_BUCKET_BYTES..=MAX_BUCKET_BYTES).contains(&self.bucket_bytes),
            "bucket_bytes",
            "in [1e6, 1e8]",
            format!("{:e}", self.bucket_bytes as f64),
        );
        check(
            self.compute_efficiency > 0.0 && self.compute_efficiency <= 1.0,
            "compute_efficiency",
            "in (0, 1]",
            self.compute_efficiency.to_string(),
        );
        out
    }

    /// Renders the config as a scenario document that parses back to `self`.
    pub fn to_scenario_string(&self) -> String {
        let t = &self.topology;
        let bw = |b: Bandwidth| match b {
            Bandwidth::BytesPerSec(v) => exact_decimal(v, 9),
            Bandwidth::Unlimited => "inf".to_string(),
        };
        let lines = [
            ("model", self.model.name.clone()),
            ("parameter_count", self.model.parameter_count.to_string()),
            ("layer_count", self.model.layer_count.to_string()),
            ("grad_bytes_per_param", self.model.grad_bytes_per_param.to_string()),
            ("gpu", self.gpu.name.clone()),
            ("gpu_peak_tflops", exact_decimal(self.gpu.peak_flops, 12)),
            ("compute_efficiency", self.compute_efficiency.to_string()),
            ("fiber", t.fiber.kind.name().to_string()),
            ("fiber_speed_mps", t.fiber.propagation_speed.to_string()),
            ("dc_count", t.dc_count.to_string()),
            ("total_gpus", t.total_gpus().to_string()),
            ("inter_distance_km", exact_decimal(t.inter_distance.nanometers(), 12)),
            ("inter_bandwidth_gbytes", bw(t.inter_bandwidth)),
            ("inter_traversals", t.inter_traversals.to_string()),
            ("intra_bandwidth_gbytes", bw(t.intra_bandwidth)),
            ("intra_latency_us", exact_decimal(t.intra_latency.0, 6)),
            ("tokens_per_gpu", self.tokens_per_gpu.to_string()),
            ("bucket_mbytes", exact_decimal(self.bucket_bytes, 6)),
            ("optimizer_step_ms", exact_decimal(self.optimizer_step.0, 9)),
            ("include_forward", self.include_forward.to_string()),
            ("quantum_ps", self.quantum.picos().to_string()),
        ];
        let mut s = String::new();
        for (k, v) in lines {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        }
        s
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub constraint: String,
    pub actual: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, got {}", self.field, self.constraint, self.actual)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { key: String, line: usize },
    #[error("duplicate key `{key}` at line {line}")]
    DuplicateKey { key: String, line: usize },
    #[error("unknown {kind} preset `{name}`")]
    UnknownPreset { kind: &'static str, name: String },
    #[error("missing required key: {0}")]
    MissingKey(&'static str),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Every key accepted in a scenario or sweep document.
pub const KNOWN_KEYS: &[&str] = &[
    "model",
    "gpu",
    "fiber",
    "total_gpus",
    "inter_distance_km",
    "inter_bandwidth_gbytes",
    "intra_bandwidth_gbytes",
    "intra_latency_us",
    "tokens_per_gpu",
    "bucket_mbytes",
    "grad_bytes_per_param",
    "optimizer_step_ms",
    "parameter_count",
    "layer_count",
    "gpu_peak_tflops",
    "fiber_speed_mps",
    "compute_efficiency",
    "inter_traversals",
    "include_forward",
    "dc_count",
    "quantum_ps",
];

/// A parsed `key=value` entry with its source line.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Entry {
    pub value: String,
    pub line: usize,
}

/// Splits a document into key/value entries. `#` starts a comment.
pub(crate) fn parse_entries(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let column = content.len() - content.trim_start().len() + 1;
            return Err(ConfigError::Syntax { line, column, message: "expected `key=value`".into() });
        };
        let key = content[..eq].trim();
        let value = content[eq + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line, column: eq + 1, message: "empty key".into() });
        }
        if let Some(pos) = key.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
            let column = content.find(key).unwrap_or(0) + pos + 1;
            return Err(ConfigError::Syntax { line, column, message: format!("invalid character in key `{key}`") });
        }
        if value.is_empty() {
            return Err(ConfigError::Syntax { line, column: eq + 2, message: format!("missing value for `{key}`") });
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { key: key.to_string(), line });
        }
        if entries.insert(key.to_string(), Entry { value: value.to_string(), line }).is_some() {
            return Err(ConfigError::DuplicateKey { key: key.to_string(), line });
        }
    }
    Ok(entries)
}

/// Parses a scenario document into a validated, fully resolved config.
pub fn parse_config(text: &str) -> Result<JobConfig, ConfigError> {
    let entries = parse_entries(text)?;
    let values: BTreeMap<&str, &str> = entries.iter().map(|(k, e)| (k.as_str(), e.value.as_str())).collect();
    resolve(&values)
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), value: value.to_string(), reason: reason.into() }
}

fn number(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = value.parse().map_err(|_| invalid(key, value, "not a number"))?;
    if v.is_nan() || v < 0.0 {
        return Err(invalid(key, value, "must be a non-negative number"));
    }
    Ok(v)
}

/// Decimal quantity scaled to integer base units.
fn scaled(key: &str, value: &str, scale: f64) -> Result<u64, ConfigError> {
    let v = number(key, value)?;
    let units = (v * scale).round();
    if !units.is_finite() || units > u64::MAX as f64 {
        return Err(invalid(key, value, "out of range"));
    }
    Ok(units as u64)
}

fn integer<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| invalid(key, value, "not a non-negative integer"))
}

fn bandwidth(key: &str, value: &str) -> Result<Bandwidth, ConfigError> {
    if value.eq_ignore_ascii_case("inf") {
        return Ok(Bandwidth::Unlimited);
    }
    Ok(Bandwidth::BytesPerSec(scaled(key, value, 1e9)?))
}

/// Builds a config from already-split key/value pairs.
pub(crate) fn resolve(values: &BTreeMap<&str, &str>) -> Result<JobConfig, ConfigError> {
    let required = |key: &'static str| values.get(key).copied().ok_or(ConfigError::MissingKey(key));

    let has = |key: &str| values.contains_key(key);

    // Unknown names are accepted when every preset field is given explicitly.
    let model_name = required("model")?;
    let mut model = match ModelSpec::preset(model_name) {
        Some(m) => m,
        None if has("parameter_count") && has("layer_count") => ModelSpec {
            name: model_name.to_string(),
            parameter_count: 0,
            layer_count: 0,
            grad_bytes_per_param: ModelSpec::DEFAULT_GRAD_BYTES,
        },
        None => return Err(ConfigError::UnknownPreset { kind: "model", name: model_name.to_string() }),
    };
    let gpu_name = required("gpu")?;
    let mut gpu = match GpuSpec::preset(gpu_name) {
        Some(g) => g,
        None if has("gpu_peak_tflops") => GpuSpec { name: gpu_name.to_string(), peak_flops: 0 },
        None => return Err(ConfigError::UnknownPreset { kind: "gpu", name: gpu_name.to_string() }),
    };
    let fiber_name = required("fiber")?;
    let mut fiber = FiberKind::from_name(fiber_name)
        .map(FiberType::preset)
        .ok_or_else(|| ConfigError::UnknownPreset { kind: "fiber", name: fiber_name.to_string() })?;
    let distance_raw = required("inter_distance_km")?;
    let inter_distance =
        Distance::from_nanometers(scaled("inter_distance_km", distance_raw, 1000.0 * NANOMETERS_PER_METER as f64)?);

    let opt = |key: &str| values.get(key).copied();

    if let Some(v) = opt("parameter_count") {
        model.parameter_count = scaled("parameter_count", v, 1.0)?;
    }
    if let Some(v) = opt("layer_count") {
        model.layer_count = integer("layer_count", v)?;
    }
    if let Some(v) = opt("grad_bytes_per_param") {
        model.grad_bytes_per_param = integer("grad_bytes_per_param", v)?;
    }
    if let Some(v) = opt("gpu_peak_tflops") {
        gpu.peak_flops = scaled("gpu_peak_tflops", v, 1e12)?;
    }
    if let Some(v) = opt("fiber_speed_mps") {
        fiber.propagation_speed = scaled("fiber_speed_mps", v, 1.0)?;
    }

    let total_gpus: u32 = match opt("total_gpus") {
        Some(v) => integer("total_gpus", v)?,
        None => JobConfig::DEFAULT_TOTAL_GPUS,
    };
    let dc_count: u32 = match opt("dc_count") {
        Some(v) => integer("dc_count", v)?,
        None => 2,
    };
    if dc_count == 0 || !total_gpus.is_multiple_of(dc_count) {
        return Err(invalid(
            "total_gpus",
            &total_gpus.to_string(),
            format!("must be a multiple of dc_count ({dc_count})"),
        ));
    }

    let mut config = JobConfig::new(model, gpu, fiber, total_gpus, inter_distance);
    let topo = &mut config.topology;
    topo.dc_count = dc_count;
    topo.gpus_per_dc = total_gpus / dc_count;
    if let Some(v) = opt("inter_bandwidth_gbytes") {
        topo.inter_bandwidth = bandwidth("inter_bandwidth_gbytes", v)?;
    }
    if let Some(v) = opt("intra_bandwidth_gbytes") {
        topo.intra_bandwidth = bandwidth("intra_bandwidth_gbytes", v)?;
    }
    if let Some(v) = opt("intra_latency_us") {
        topo.intra_latency = Picos(scaled("intra_latency_us", v, 1e6)?);
    }
    if let Some(v) = opt("inter_traversals") {
        topo.inter_traversals = integer("inter_traversals", v)?;
    }
    if let Some(v) = opt("tokens_per_gpu") {
        config.tokens_per_gpu = scaled("tokens_per_gpu", v, 1.0)?;
    }
    if let Some(v) = opt("bucket_mbytes") {
        config.bucket_bytes = scaled("bucket_mbytes", v, 1e6)?;
    }
    if let Some(v) = opt("optimizer_step_ms") {
        config.optimizer_step = Picos(scaled("optimizer_step_ms", v, 1e9)?);
    }
    if let Some(v) = opt("compute_efficiency") {
        config.compute_efficiency = number("compute_efficiency", v)?;
    }
    if let Some(v) = opt("include_forward") {
        config.include_forward = match v.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            _ => return Err(invalid("include_forward", v, "expected true or false")),
        };
    }
    if let Some(v) = opt("quantum_ps") {
        config.quantum =
            Quantum::new(integer("quantum_ps", v)?).ok_or_else(|| invalid("quantum_ps", v, "must be >= 1"))?;
    }

    config.validate().map_err(ConfigError::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "model=gpt3-13b\ngpu=a100\nfiber=smf\ninter_distance_km=100\n";

    #[test]
    fn model_preset_expands() {
        let c = parse_config(BASE).unwrap();
        assert_eq!(c.model.parameter_count, 13_000_000_000);
        assert_eq!(c.model.layer_count, 40);
        assert_eq!(c.model.grad_bytes_per_param, 2);
        let c = parse_config(&BASE.replace("gpt3-13b", "GPT3-175B")).unwrap();
        assert_eq!(c.model.parameter_count, 175_000_000_000);
        assert_eq!(c.model.layer_count, 96);
    }

    #[test]
    fn fiber_and_gpu_presets() {
        let c = parse_config(&BASE.replace("fiber=smf", "fiber=hcf")).unwrap();
        assert_eq!(c.topology.fiber, FiberType { kind: FiberKind::Hcf, propagation_speed: 300_000_000 });
        assert_eq!(c.gpu.peak_flops, 312_000_000_000_000);
        assert_eq!(GpuSpec::h100().peak_flops, 989_000_000_000_000);
        assert_eq!(FiberType::SMF.propagation_speed, 200_000_000);
    }

    #[test]
    fn defaults_applied() {
        let c = parse_config(BASE).unwrap();
        let t = &c.topology;
        assert_eq!(t.intra_bandwidth, Bandwidth::BytesPerSec(600_000_000_000));
        assert_eq!(t.inter_bandwidth, Bandwidth::BytesPerSec(100_000_000_000));
        assert_eq!(t.intra_latency, Picos(1_000_000));
        assert_eq!(t.inter_distance, Distance::from_meters(100_000));
        assert_eq!(t.total_gpus(), 8192);
        assert_eq!(c.tokens_per_gpu, 8192);
        assert_eq!(c.bucket_bytes, 25_000_000);
        assert_eq!(c.optimizer_step, Picos::ZERO);
    }

    #[test]
    fn empty_document_is_missing_model() {
        let err = parse_config("").unwrap_err();
        assert_eq!(err, ConfigError::MissingKey("model"));
        assert_eq!(err.to_string(), "missing required key: model");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_config("model=gpt3-13b\n  garbage\n").unwrap_err();
        assert_eq!(err, ConfigError::Syntax { line: 2, column: 3, message: "expected `key=value`".into() });
    }

    #[test]
    fn unknown_key_and_preset() {
        let err = parse_config(&format!("{BASE}colour=blue\n")).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { ref key, line: 5 } if key == "colour"));
        let err = parse_config(&BASE.replace("a100", "v100")).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownPreset { kind: "gpu", .. }));
    }

    #[test]
    fn custom_presets_need_every_field() {
        let text = BASE.replace("gpt3-13b", "tiny");
        assert!(matches!(parse_config(&text), Err(ConfigError::UnknownPreset { kind: "model", .. })));
        let c = parse_config(&format!("{text}parameter_count=1e8\nlayer_count=12\n")).unwrap();
        assert_eq!((c.model.name.as_str(), c.model.parameter_count, c.model.layer_count), ("tiny", 100_000_000, 12));
        let c = parse_config(&format!("{}gpu_peak_tflops=100\n", BASE.replace("a100", "x1"))).unwrap();
        assert_eq!(c.gpu.peak_flops, 100_000_000_000_000);
    }

    #[test]
    fn out_of_range_bucket_rejected() {
        let err = parse_config(&format!("{BASE}bucket_mbytes=500\n")).unwrap_err();
        let ConfigError::Invalid(v) = err else { panic!("expected validation error") };
        assert_eq!(
            v,
            vec![Violation { field: "bucket_bytes".into(), constraint: "in [1e6, 1e8]".into(), actual: "5e8".into() }]
        );
    }

    #[test]
    fn validate_accepts_typical_bucket() {
        let mut c = parse_config(BASE).unwrap();
        c.bucket_bytes = 25_000_000;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validate_reports_every_violation() {
        let mut c = parse_config(BASE).unwrap();
        c.topology.dc_count = 3;
        c.bucket_bytes = 500_000_000;
        c.tokens_per_gpu = 0;
        let errs = c.clone().validate().unwrap_err();
        let fields: Vec<_> = errs.iter().map(|v| v.field.as_str()).collect();
        assert_eq!(fields, ["dc_count", "tokens_per_gpu", "bucket_bytes"]);
        assert_eq!(errs[0], Violation { field: "dc_count".into(), constraint: "== 2".into(), actual: "3".into() });
        // Idempotent and pure.
        assert_eq!(c.clone().validate().unwrap_err(), errs);
    }

    #[test]
    fn dc_count_key_must_be_two() {
        let err = parse_config(&format!("{BASE}dc_count=4\n")).unwrap_err();
        let ConfigError::Invalid(v) = err else { panic!() };
        assert_eq!(v[0].field, "dc_count");
    }

    #[test]
    fn unlimited_bandwidth_round_trips() {
        let c = parse_config(&format!("{BASE}inter_bandwidth_gbytes=inf\nintra_latency_us=0\n")).unwrap();
        assert_eq!(c.topology.inter_bandwidth, Bandwidth::Unlimited);
        assert_eq!(parse_config(&c.to_scenario_string()).unwrap(), c);
    }

    #[test]
    fn preset_tables_cover_grid() {
        assert_eq!(ModelSpec::PRESETS.len() * GpuSpec::PRESETS.len() * 2, 8);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let doc = format!("# scenario\n\n{BASE}tokens_per_gpu = 4096 # smaller batch\n");
        assert_eq!(parse_config(&doc).unwrap().tokens_per_gpu, 4096);
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config(&format!("{BASE}gpu=h100\n")).unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { .. }));
    }
}
