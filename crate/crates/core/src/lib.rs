//! Discrete-event model of data-parallel LLM training split across two
//! datacenters joined by a single long-haul fiber link.
//!
//! The pipeline is: [`config`] resolves a scenario, [`workload`] turns it into
//! per-layer compute and gradient buckets, [`engine`] plays one iteration with
//! bucketed all-reduce overlapping the backward pass ([`collective`] and
//! [`network`] give the costs), and [`metrics`] / [`plot`] summarize sweeps
//! built by [`sweep`].

pub mod collective;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod network;
pub mod plot;
pub mod sweep;
pub mod units;
pub mod workload;

pub use collective::{
    allreduce_phases, allreduce_pipeline_time, pipeline_completions, CollectiveCost, Phase, PhaseCost,
};
pub use config::{
    parse_config, ConfigError, FiberKind, FiberType, GpuSpec, JobConfig, ModelSpec, TopologySpec, Violation,
};
pub use engine::{run_batch, run_iteration, Event, EventKind, IterationTrace, SimError, SimOptions};
pub use metrics::{delta_eta, emit_csv, overlap, read_sweep_csv, time_multiplier, DeltaRow, SweepRow};
pub use network::{equivalent_distance, propagation_delay, transfer_time, CommTime, LinkSpec};
pub use plot::emit_plots;
pub use sweep::{bandwidth_ablation, expand_sweep, run_sweep, AblationReport, SweepSpec};
pub use units::{Bandwidth, Distance, Picos, Quantum};
pub use workload::{build_buckets, build_layer_timings, flops_per_iteration, Bucket, LayerTiming, WorkloadPlan};
