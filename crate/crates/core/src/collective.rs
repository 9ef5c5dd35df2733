//! Closed-form cost of bucketed all-reduce over two lumped DCs.
//!
//! One all-reduce is reduce inside each DC, a bidirectional exchange over the
//! long-haul link, then broadcast inside each DC. The long-haul link serves
//! one exchange at a time in arrival order and every exchange pays the full
//! propagation delay.

use thiserror::Error;

use crate::config::TopologySpec;
use crate::network::{transfer_time, CommTime, LinkSpec};
use crate::units::{Picos, Quantum};
use crate::workload::Bucket;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    IntraReduce,
    InterExchange,
    IntraBroadcast,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::IntraReduce, Phase::InterExchange, Phase::IntraBroadcast];

    pub fn name(self) -> &'static str {
        match self {
            Phase::IntraReduce => "intra_reduce",
            Phase::InterExchange => "inter_exchange",
            Phase::IntraBroadcast => "intra_broadcast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseCost {
    pub phase: Phase,
    pub comm: CommTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectiveCost {
    pub phases: [PhaseCost; 3],
    pub total: Picos,
}

impl CollectiveCost {
    pub fn phase(&self, phase: Phase) -> CommTime {
        self.phases[phase as usize].comm
    }
}

/// Phase costs for one all-reduce of `bytes`. The phases run back to back.
pub fn allreduce_phases(bytes: u64, topology: &TopologySpec, quantum: Quantum) -> CollectiveCost {
    let intra = transfer_time(bytes, &LinkSpec::intra(topology), quantum);
    let inter = transfer_time(bytes, &LinkSpec::inter(topology), quantum).repeated(topology.inter_traversals);
    let phases = [
        PhaseCost { phase: Phase::IntraReduce, comm: intra },
        PhaseCost { phase: Phase::InterExchange, comm: inter },
        PhaseCost { phase: Phase::IntraBroadcast, comm: intra },
    ];
    let total = Picos(phases.iter().map(|p| p.comm.total.0).sum());
    CollectiveCost { phases, total }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CollectiveError {
    #[error("{buckets} buckets but {starts} start times")]
    LengthMismatch { buckets: usize, starts: usize },
    #[error("start times must be non-decreasing (index {0})")]
    Unsorted(usize),
}

/// Completion time of every bucket's all-reduce when bucket `i` becomes
/// ready at `start_times[i]`.
///
/// Exchanges are served in order of reduce completion, ties to the lower
/// bucket index, and each starts at `max(own reduce done, previous exchange
/// done)`.
pub fn pipeline_completions(
    buckets: &[Bucket],
    topology: &TopologySpec,
    start_times: &[Picos],
    quantum: Quantum,
) -> Result<Vec<Picos>, CollectiveError> {
    if buckets.len() != start_times.len() {
        return Err(CollectiveError::LengthMismatch { buckets: buckets.len(), starts: start_times.len() });
    }
    if let Some(i) = start_times.windows(2).position(|w| w[1] < w[0]) {
        return Err(CollectiveError::Unsorted(i + 1));
    }
    let costs: Vec<CollectiveCost> = buckets.iter().map(|b| allreduce_phases(b.bytes, topology, quantum)).collect();
    let reduced: Vec<Picos> =
        start_times.iter().zip(&costs).map(|(s, c)| *s + c.phase(Phase::IntraReduce).total).collect();
    let mut order: Vec<usize> = (0..buckets.len()).collect();
    order.sort_by_key(|&i| (reduced[i], i));

    let mut completions = vec![Picos::ZERO; buckets.len()];
    let mut link_free = Picos::ZERO;
    for i in order {
        let start = reduced[i].max(link_free);
        link_free = start + costs[i].phase(Phase::InterExchange).total;
        completions[i] = link_free + costs[i].phase(Phase::IntraBroadcast).total;
    }
    Ok(completions)
}

/// Completion time of the last bucket.
pub fn allreduce_pipeline_time(
    buckets: &[Bucket],
    topology: &TopologySpec,
    start_times: &[Picos],
    quantum: Quantum,
) -> Result<Picos, CollectiveError> {
    Ok(pipeline_completions(buckets, topology, start_times, quantum)?.into_iter().max().unwrap_or(Picos::ZERO))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FiberType;
    use crate::units::Distance;
    use proptest::prelude::*;

    const PS: Quantum = Quantum::PICOSECOND;

    fn topo(meters: u64, fiber: FiberType) -> TopologySpec {
        TopologySpec::new(4096, Distance::from_meters(meters), fiber)
    }

    fn uniform(n: u32, bytes: u64) -> Vec<Bucket> {
        (0..n).map(|i| Bucket { bucket_index: i, bytes, ready_after_layer: 0 }).collect()
    }

    #[test]
    fn phase_examples() {
        let c = allreduce_phases(25_000_000, &topo(100_000, FiberType::SMF), PS);
        let order: Vec<_> = c.phases.iter().map(|p| p.phase).collect();
        assert_eq!(order, Phase::ALL);
        // 25e6 / 600e9 = 41.666.. us, + 1 us fabric latency
        assert_eq!(c.phase(Phase::IntraReduce).total, Picos(42_666_667));
        assert_eq!(c.phase(Phase::InterExchange), CommTime::new(Picos(250_000_000), Picos(500_000_000)));
        assert_eq!(c.total, Picos(835_333_334));

        let c = allreduce_phases(25_000_000, &topo(300, FiberType::SMF), PS);
        assert_eq!(c.phase(Phase::InterExchange).propagation, Picos(1_500_000));
        assert_eq!(c.total, Picos(336_833_334));

        let c = allreduce_phases(0, &topo(300, FiberType::SMF), PS);
        assert_eq!(c.total, Picos(1_000_000 + 1_500_000 + 1_000_000));
    }

    #[test]
    fn extra_traversals_scale_exchange() {
        let mut t = topo(100_000, FiberType::SMF);
        t.inter_traversals = 2;
        let c = allreduce_phases(25_000_000, &t, PS);
        assert_eq!(c.phase(Phase::InterExchange).total, Picos(1_500_000_000));
    }

    #[test]
    fn single_bucket_is_one_collective() {
        let t = topo(100_000, FiberType::SMF);
        let b = uniform(1, 25_000_000);
        let total = allreduce_pipeline_time(&b, &t, &[Picos::ZERO], PS).unwrap();
        assert_eq!(total, allreduce_phases(25_000_000, &t, PS).total);
    }

    #[test]
    fn queued_bucket_waits_full_exchange() {
        let t = topo(1_000_000, FiberType::SMF);
        let done = pipeline_completions(&uniform(2, 25_000_000), &t, &[Picos::ZERO; 2], PS).unwrap();
        let exchange = allreduce_phases(25_000_000, &t, PS).phase(Phase::InterExchange).total;
        assert_eq!(done[1] - done[0], exchange);
    }

    #[test]
    fn long_haul_backlog() {
        let t = topo(1_000_000, FiberType::SMF);
        let b = uniform(14000, 25_000_000);
        let total = allreduce_pipeline_time(&b, &t, &vec![Picos::ZERO; 14000], PS).unwrap();
        // 42.666667 us + 14000 * (250 us + 5 ms) + 42.666667 us
        assert_eq!(total, Picos(73_500_085_333_334));
    }

    #[test]
    fn input_errors() {
        let t = topo(300, FiberType::SMF);
        assert_eq!(
            allreduce_pipeline_time(&uniform(2, 1), &t, &[Picos::ZERO], PS),
            Err(CollectiveError::LengthMismatch { buckets: 2, starts: 1 })
        );
        assert_eq!(
            allreduce_pipeline_time(&uniform(2, 1), &t, &[Picos(5), Picos(1)], PS),
            Err(CollectiveError::Unsorted(1))
        );
    }

    #[test]
    fn smaller_tail_bucket_overtakes() {
        let t = topo(300, FiberType::SMF);
        let b = vec![
            Bucket { bucket_index: 0, bytes: 100_000_000, ready_after_layer: 0 },
            Bucket { bucket_index: 1, bytes: 1_000_000, ready_after_layer: 0 },
        ];
        let done = pipeline_completions(&b, &t, &[Picos::ZERO, Picos::ZERO], PS).unwrap();
        assert!(done[1] < done[0]);
    }

    proptest! {
        #[test]
        fn total_monotone(bytes in 0u64..100_000_000, extra in 1u64..10_000_000, m in 0u64..1_000_000, dm in 1u64..100_000,
                          bw in 1_000_000_000u64..1_000_000_000_000) {
            let mut base = topo(m, FiberType::SMF);
            base.inter_bandwidth = crate::units::Bandwidth::BytesPerSec(bw);
            let c = allreduce_phases(bytes, &base, PS).total;
            prop_assert!(allreduce_phases(bytes + extra, &base, PS).total >= c);
            prop_assert!(allreduce_phases(bytes, &topo(m + dm, FiberType::SMF), PS).total >= allreduce_phases(bytes, &topo(m, FiberType::SMF), PS).total);
            let mut slower = base.clone();
            slower.inter_bandwidth = crate::units::Bandwidth::BytesPerSec(bw / 2);
            prop_assert!(allreduce_phases(bytes, &slower, PS).total >= c);
        }

        #[test]
        fn hcf_never_slower(bytes in 0u64..100_000_000, m in 0u64..1_000_000) {
            let smf = allreduce_phases(bytes, &topo(m, FiberType::SMF), PS).total;
            let hcf = allreduce_phases(bytes, &topo(m, FiberType::HCF), PS).total;
            if m == 0 { prop_assert_eq!(smf, hcf); } else { prop_assert!(hcf < smf); }
        }
    }
}
