//! Discrete-event kernel for one training iteration.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::collective::{allreduce_phases, CollectiveCost, Phase};
use crate::config::{JobConfig, Violation};
use crate::units::Picos;
use crate::workload::{WorkloadError, WorkloadPlan};

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ForwardLayerDone(u32),
    BackwardLayerDone(u32),
    BucketReady(u32),
    PhaseDone(u32, Phase),
    CollectiveDone(u32),
    IterationDone,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ForwardLayerDone(_) => "forward_layer_done",
            EventKind::BackwardLayerDone(_) => "backward_layer_done",
            EventKind::BucketReady(_) => "bucket_ready",
            EventKind::PhaseDone(..) => "phase_done",
            EventKind::CollectiveDone(_) => "collective_done",
            EventKind::IterationDone => "iteration_done",
        }
    }

    fn detail(&self) -> String {
        match self {
            EventKind::ForwardLayerDone(l) | EventKind::BackwardLayerDone(l) => format!("layer={l}"),
            EventKind::BucketReady(b) | EventKind::CollectiveDone(b) => format!("bucket={b}"),
            EventKind::PhaseDone(b, p) => format!("bucket={b} phase={}", p.name()),
            EventKind::IterationDone => "-".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub timestamp: Picos,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.timestamp, self.sequence).cmp(&(other.timestamp, other.sequence))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.timestamp.0, self.kind.name(), self.kind.detail())
    }
}

/// Everything observed during one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationTrace {
    /// Dispatched events in dispatch order.
    pub events: Vec<Event>,
    pub t_compute: Picos,
    pub t_total: Picos,
    /// When each bucket's backward layer finished.
    pub bucket_ready: Vec<Picos>,
    pub per_bucket_completion: Vec<Picos>,
    /// When the last backward layer finished.
    pub compute_end: Picos,
}

impl IterationTrace {
    /// Writes one `timestamp_ps<TAB>kind<TAB>detail` line per event.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(out, "{e}")?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.events.len() * 32);
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn overlap(&self) -> f64 {
        crate::metrics::overlap_ratio(self.t_compute, self.t_total)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<Violation>),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("event cap of {0} exceeded")]
    EventCapExceeded(u64),
    #[error("simulated time overflowed u64 picoseconds")]
    TimeOverflow,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub event_cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { event_cap: DEFAULT_EVENT_CAP }
    }
}

struct Kernel<'a> {
    plan: &'a WorkloadPlan,
    costs: Vec<CollectiveCost>,
    queue: BinaryHeap<Reverse<Event>>,
    next_sequence: u64,
    cap: u64,
    now: Picos,
    /// Buckets that finished their reduce, keyed by (arrival, index).
    waiting: BinaryHeap<Reverse<(Picos, u32)>>,
    link_busy: bool,
    buckets_by_layer: Vec<Vec<u32>>,
    bucket_ready: Vec<Picos>,
    completion: Vec<Picos>,
    collectives_done: usize,
    compute_end: Option<Picos>,
    finished: bool,
    optimizer_step: Picos,
    log: Vec<Event>,
}

impl Kernel<'_> {
    fn schedule(&mut self, delay: Picos, kind: EventKind) -> Result<(), SimError> {
        if self.next_sequence >= self.cap {
            return Err(SimError::EventCapExceeded(self.cap));
        }
        let timestamp = self.now.checked_add(delay).ok_or(SimError::TimeOverflow)?;
        self.queue.push(Reverse(Event { timestamp, sequence: self.next_sequence, kind }));
        self.next_sequence += 1;
        Ok(())
    }

    fn start_exchange(&mut self) -> Result<(), SimError> {
        if self.link_busy {
            return Ok(());
        }
        if let Some(Reverse((_, b))) = self.waiting.pop() {
            self.link_busy = true;
            let d = self.costs[b as usize].phase(Phase::InterExchange).total;
            self.schedule(d, EventKind::PhaseDone(b, Phase::InterExchange))?;
        }
        Ok(())
    }

    fn maybe_finish(&mut self) -> Result<(), SimError> {
        if !self.finished && self.compute_end.is_some() && self.collectives_done == self.completion.len() {
            self.finished = true;
            self.schedule(self.optimizer_step, EventKind::IterationDone)?;
        }
        Ok(())
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<bool, SimError> {
        let layers = &self.plan.layers;
        match kind {
            EventKind::ForwardLayerDone(l) => {
                let next = l as usize + 1;
                if next < layers.len() {
                    self.schedule(layers[next].forward, EventKind::ForwardLayerDone(next as u32))?;
                } else {
                    let last = layers.len() - 1;
                    self.schedule(layers[last].backward, EventKind::BackwardLayerDone(last as u32))?;
                }
            }
            EventKind::BackwardLayerDone(l) => {
                for i in 0..self.buckets_by_layer[l as usize].len() {
                    let b = self.buckets_by_layer[l as usize][i];
                    self.schedule(Picos::ZERO, EventKind::BucketReady(b))?;
                }
                if l > 0 {
                    let prev = l as usize - 1;
                    self.schedule(layers[prev].backward, EventKind::BackwardLayerDone(prev as u32))?;
                } else {
                    self.compute_end = Some(self.now);
                    self.maybe_finish()?;
                }
            }
            EventKind::BucketReady(b) => {
                self.bucket_ready[b as usize] = self.now;
                let d = self.costs[b as usize].phase(Phase::IntraReduce).total;
                self.schedule(d, EventKind::PhaseDone(b, Phase::IntraReduce))?;
            }
            EventKind::PhaseDone(b, Phase::IntraReduce) => {
                self.waiting.push(Reverse((self.now, b)));
                self.start_exchange()?;
            }
            EventKind::PhaseDone(b, Phase::InterExchange) => {
                self.link_busy = false;
                self.start_exchange()?;
                let d = self.costs[b as usize].phase(Phase::IntraBroadcast).total;
                self.schedule(d, EventKind::PhaseDone(b, Phase::IntraBroadcast))?;
            }
            EventKind::PhaseDone(b, Phase::IntraBroadcast) => {
                self.schedule(Picos::ZERO, EventKind::CollectiveDone(b))?;
            }
            EventKind::CollectiveDone(b) => {
                self.completion[b as usize] = self.now;
                self.collectives_done += 1;
                self.maybe_finish()?;
            }
            EventKind::IterationDone => return Ok(true),
        }
        Ok(false)
    }
}

/// Plays one iteration with default options.
pub fn run_iteration(config: &JobConfig) -> Result<IterationTrace, SimError> {
    run_iteration_with(config, SimOptions::default())
}

pub fn run_iteration_with(config: &JobConfig, options: SimOptions) -> Result<IterationTrace, SimError> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(SimError::InvalidConfig(violations));
    }
    let plan = WorkloadPlan::build(config)?;
    simulate(config, &plan, options)
}

/// Runs the kernel over a prebuilt plan.
pub fn simulate(config: &JobConfig, plan: &WorkloadPlan, options: SimOptions) -> Result<IterationTrace, SimError> {
    let n_layers = plan.layers.len();
    let n_buckets = plan.buckets.len();
    let mut buckets_by_layer = vec![Vec::new(); n_layers];
    for b in &plan.buckets {
        buckets_by_layer[b.ready_after_layer as usize].push(b.bucket_index);
    }
    let costs = plan.buckets.iter().map(|b| allreduce_phases(b.bytes, &config.topology, config.quantum)).collect();
    let mut k = Kernel {
        plan,
        costs,
        queue: BinaryHeap::new(),
        next_sequence: 0,
        cap: options.event_cap,
        now: Picos::ZERO,
        waiting: BinaryHeap::new(),
        link_busy: false,
        buckets_by_layer,
        bucket_ready: vec![Picos::ZERO; n_buckets],
        completion: vec![Picos::ZERO; n_buckets],
        collectives_done: 0,
        compute_end: None,
        finished: false,
        optimizer_step: config.quantum.align(config.optimizer_step),
        log: Vec::with_capacity(5 * n_buckets + 2 * n_layers + 1),
    };

    let last = n_layers - 1;
    if config.include_forward {
        k.schedule(plan.layers[0].forward, EventKind::ForwardLayerDone(0))?;
    } else {
        k.schedule(plan.layers[last].backward, EventKind::BackwardLayerDone(last as u32))?;
    }

    while let Some(Reverse(event)) = k.queue.pop() {
        debug_assert!(event.timestamp >= k.now);
        k.now = event.timestamp;
        k.log.push(event);
        if k.dispatch(event.kind)? {
            break;
        }
    }

    let t_compute = if config.include_forward { plan.total_compute } else { plan.backward_compute() };
    Ok(IterationTrace {
        events: k.log,
        t_compute,
        t_total: k.now,
        bucket_ready: k.bucket_ready,
        per_bucket_completion: k.completion,
        compute_end: k.compute_end.unwrap_or(k.now),
    })
}

/// Independent runs, results in input order. `jobs == 0` uses every core.
pub fn run_batch(configs: &[JobConfig], jobs: usize) -> Vec<Result<IterationTrace, SimError>> {
    if configs.is_empty() {
        return Vec::new();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    pool.install(|| configs.par_iter().map(run_iteration).collect())
}
