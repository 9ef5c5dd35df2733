//! Per-layer compute durations and gradient buckets for one iteration.
//!
//! Compute is the dense-transformer estimate of 6 FLOPs per parameter per
//! token (2 forward, 4 backward), spread uniformly over layers and executed at
//! the GPU's peak rate scaled by `compute_efficiency`. Gradient bytes are also
//! spread uniformly, and buckets fill in backward order from the last layer.

use thiserror::Error;

use crate::config::{GpuSpec, JobConfig, ModelSpec};
use crate::units::{Picos, Quantum, PICOS_PER_SECOND};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("FLOP count overflows for {parameters} parameters x {tokens} tokens")]
    FlopOverflow { parameters: u64, tokens: u64 },
    #[error("tokens_per_gpu must be at least 1")]
    NoTokens,
    #[error("model has no layers")]
    NoLayers,
    #[error("effective peak FLOP/s is zero")]
    NoCompute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopCount {
    pub forward: u128,
    pub backward: u128,
}

impl FlopCount {
    pub fn total(&self) -> u128 {
        self.forward + self.backward
    }
}

/// Training FLOPs for one iteration: `6 * params * tokens`, a third of it forward.
pub fn flops_per_iteration(model: &ModelSpec, tokens_per_gpu: u64) -> Result<FlopCount, WorkloadError> {
    if tokens_per_gpu == 0 {
        return Err(WorkloadError::NoTokens);
    }
    let overflow = || WorkloadError::FlopOverflow { parameters: model.parameter_count, tokens: tokens_per_gpu };
    let forward = (model.parameter_count as u128)
        .checked_mul(tokens_per_gpu as u128)
        .and_then(|x| x.checked_mul(2))
        .ok_or_else(overflow)?;
    let backward = forward.checked_mul(2).ok_or_else(overflow)?;
    forward.checked_add(backward).ok_or_else(overflow)?;
    Ok(FlopCount { forward, backward })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerTiming {
    pub layer_index: u32,
    pub forward: Picos,
    pub backward: Picos,
}

/// Uniform per-layer timings. Backward is exactly twice the quantized forward.
pub fn build_layer_timings(
    model: &ModelSpec,
    gpu: &GpuSpec,
    tokens_per_gpu: u64,
    compute_efficiency: f64,
    quantum: Quantum,
) -> Result<Vec<LayerTiming>, WorkloadError> {
    if model.layer_count == 0 {
        return Err(WorkloadError::NoLayers);
    }
    let flops = flops_per_iteration(model, tokens_per_gpu)?;
    let peak = (gpu.peak_flops as f64 * compute_efficiency).round() as u128;
    if peak == 0 {
        return Err(WorkloadError::NoCompute);
    }
    let overflow = || WorkloadError::FlopOverflow { parameters: model.parameter_count, tokens: tokens_per_gpu };
    let numerator = flops.forward.checked_mul(PICOS_PER_SECOND as u128).ok_or_else(overflow)?;
    let forward = quantum.ceil_ratio(numerator, peak * model.layer_count as u128);
    let backward = forward.checked_mul(2).ok_or_else(overflow)?;
    Ok((0..model.layer_count).map(|layer_index| LayerTiming { layer_index, forward, backward }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucket {
    pub bucket_index: u32,
    pub bytes: u64,
    /// Model layer whose backward completion fills this bucket.
    pub ready_after_layer: u32,
}

/// Cuts the model's gradients into `bucket_bytes` chunks in backward order.
pub fn build_buckets(model: &ModelSpec, bucket_bytes: u64) -> Vec<Bucket> {
    let total = model.gradient_bytes();
    let layers = model.layer_count as u128;
    if total == 0 || layers == 0 || bucket_bytes == 0 {
        return Vec::new();
    }
    let size = bucket_bytes as u128;
    let count = total.div_ceil(size);
    (0..count)
        .map(|b| {
            let boundary = ((b + 1) * size).min(total);
            // Layers completed (in backward order) when the cumulative
            // gradient volume first reaches the boundary.
            let completed = (boundary * layers).div_ceil(total);
            Bucket {
                bucket_index: b as u32,
                bytes: (boundary - b * size) as u64,
                ready_after_layer: (layers - completed) as u32,
            }
        })
        .collect()
}

/// Everything one iteration needs from the model side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadPlan {
    pub layers: Vec<LayerTiming>,
    pub buckets: Vec<Bucket>,
    /// Forward plus backward time over all layers.
    pub total_compute: Picos,
}

impl WorkloadPlan {
    pub fn build(config: &JobConfig) -> Result<WorkloadPlan, WorkloadError> {
        let layers = build_layer_timings(
            &config.model,
            &config.gpu,
            config.tokens_per_gpu,
            config.compute_efficiency,
            config.quantum,
        )?;
        let buckets = build_buckets(&config.model, config.bucket_bytes);
        let total_compute = Picos(layers.iter().map(|l| l.forward.0 + l.backward.0).sum());
        Ok(WorkloadPlan { layers, buckets, total_compute })
    }

    pub fn backward_compute(&self) -> Picos {
        Picos(self.layers.iter().map(|l| l.backward.0).sum())
    }
}
