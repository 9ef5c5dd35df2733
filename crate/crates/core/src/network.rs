//! Point-to-point transfer time: serialization plus propagation.

use num_rational::Ratio;

use crate::config::{FiberType, TopologySpec};
use crate::units::{Bandwidth, Distance, Picos, Quantum, PICOS_PER_SECOND};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkSpec {
    pub bandwidth: Bandwidth,
    pub distance: Distance,
    pub fiber: FiberType,
    /// Latency charged once per message regardless of distance.
    pub fixed_latency: Picos,
}

impl LinkSpec {
    /// Lumped intra-DC fabric: no distance, only the fabric latency.
    pub fn intra(topology: &TopologySpec) -> LinkSpec {
        LinkSpec {
            bandwidth: topology.intra_bandwidth,
            distance: Distance::ZERO,
            fiber: topology.fiber,
            fixed_latency: topology.intra_latency,
        }
    }

    /// Long-haul link between the two DCs. Switch latency is taken as zero.
    pub fn inter(topology: &TopologySpec) -> LinkSpec {
        LinkSpec {
            bandwidth: topology.inter_bandwidth,
            distance: topology.inter_distance,
            fiber: topology.fiber,
            fixed_latency: Picos::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommTime {
    pub serialization: Picos,
    pub propagation: Picos,
    pub total: Picos,
}

impl CommTime {
    pub fn new(serialization: Picos, propagation: Picos) -> CommTime {
        CommTime { serialization, propagation, total: serialization + propagation }
    }

    /// The same message sent `n` times back to back.
    pub fn repeated(self, n: u32) -> CommTime {
        let n = u64::from(n);
        CommTime::new(Picos(self.serialization.0 * n), Picos(self.propagation.0 * n))
    }
}

/// Exact one-way signal delay in picoseconds, before any rounding.
pub fn propagation_delay_exact(distance: Distance, fiber: FiberType) -> Ratio<u128> {
    // nm * 1e12 ps/s / (1e9 nm/m * speed m/s) = nm * 1000 / speed
    Ratio::new(distance.nanometers() as u128 * 1000, fiber.propagation_speed as u128)
}

/// One-way signal delay rounded up to the quantum.
pub fn propagation_delay(distance: Distance, fiber: FiberType, quantum: Quantum) -> Picos {
    let exact = propagation_delay_exact(distance, fiber);
    quantum.ceil_ratio(*exact.numer(), *exact.denom())
}

pub fn serialization_delay(bytes: u64, bandwidth: Bandwidth, quantum: Quantum) -> Picos {
    match bandwidth {
        Bandwidth::BytesPerSec(bps) => quantum.ceil_ratio(bytes as u128 * PICOS_PER_SECOND as u128, bps as u128),
        Bandwidth::Unlimited => Picos::ZERO,
    }
}

/// Time to push `bytes` across `link`. Each component is rounded up separately.
pub fn transfer_time(bytes: u64, link: &LinkSpec, quantum: Quantum) -> CommTime {
    let serialization = serialization_delay(bytes, link.bandwidth, quantum);
    let propagation = quantum.align(link.fixed_latency) + propagation_delay(link.distance, link.fiber, quantum);
    CommTime::new(serialization, propagation)
}

/// Distance over fiber `to` whose delay equals `distance` over fiber `from`.
pub fn equivalent_distance(distance: Distance, from: FiberType, to: FiberType) -> Distance {
    let nm = Ratio::new(distance.nanometers() as u128 * to.propagation_speed as u128, from.propagation_speed as u128);
    Distance::from_nanometers(nm.round().to_integer() as u64)
}

/// SMF distance with the same delay as `distance_hcf` of hollow-core fiber.
pub fn smf_equivalent_distance(distance_hcf: Distance) -> Distance {
    equivalent_distance(distance_hcf, FiberType::HCF, FiberType::SMF)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PS: Quantum = Quantum::PICOSECOND;

    fn long_haul(distance_km: u64, fiber: FiberType) -> LinkSpec {
        LinkSpec {
            bandwidth: Bandwidth::BytesPerSec(100_000_000_000),
            distance: Distance::from_meters(distance_km * 1000),
            fiber,
            fixed_latency: Picos::ZERO,
        }
    }

    #[test]
    fn propagation_examples() {
        let d = Distance::from_meters(100_000);
        assert_eq!(propagation_delay(d, FiberType::SMF, PS), Picos(500_000_000));
        // 1e5 / 3e8 s = 333.333... us, rounded up at the last picosecond
        assert_eq!(propagation_delay(d, FiberType::HCF, PS), Picos(333_333_334));
        assert_eq!(propagation_delay(Distance::ZERO, FiberType::SMF, PS), Picos::ZERO);
        assert_eq!(propagation_delay(Distance::ZERO, FiberType::HCF, PS), Picos::ZERO);
    }

    #[test]
    fn transfer_examples() {
        let smf = transfer_time(100_000_000, &long_haul(100, FiberType::SMF), PS);
        assert_eq!(smf, CommTime::new(Picos(1_000_000_000), Picos(500_000_000)));
        assert_eq!(smf.total, Picos(1_500_000_000));
        let hcf = transfer_time(100_000_000, &long_haul(100, FiberType::HCF), PS);
        assert_eq!(hcf.total, Picos(1_333_333_334));
        let empty = transfer_time(0, &long_haul(100, FiberType::SMF), PS);
        assert_eq!(
            empty,
            CommTime { serialization: Picos::ZERO, propagation: Picos(500_000_000), total: Picos(500_000_000) }
        );
    }

    #[test]
    fn fixed_latency_is_propagation() {
        let link = LinkSpec {
            bandwidth: Bandwidth::BytesPerSec(600_000_000_000),
            distance: Distance::ZERO,
            fiber: FiberType::SMF,
            fixed_latency: Picos(1_000_000),
        };
        let t = transfer_time(25_000_000, &link, PS);
        assert_eq!(t.serialization, Picos(41_666_667));
        assert_eq!(t.propagation, Picos(1_000_000));
    }

    #[test]
    fn equivalent_distance_examples() {
        assert_eq!(smf_equivalent_distance(Distance::from_meters(150_000)), Distance::from_meters(100_000));
        assert_eq!(smf_equivalent_distance(Distance::ZERO), Distance::ZERO);
        assert_eq!(smf_equivalent_distance(Distance::from_meters(1_500)), Distance::from_meters(1_000));
    }

    #[test]
    fn coarse_quantum_rounds_up() {
        let q = Quantum::new(1_000_000).unwrap();
        let t = transfer_time(25_000_000, &long_haul(100, FiberType::HCF), q);
        assert_eq!(t.serialization, Picos(250_000_000));
        assert_eq!(t.propagation, Picos(334_000_000));
    }

    proptest! {
        #[test]
        fn serialization_is_linear(bytes in 0u64..1_000_000_000, bw in 1u64..2_000_000_000_000) {
            let link = LinkSpec { bandwidth: Bandwidth::BytesPerSec(bw), ..long_haul(10, FiberType::SMF) };
            let one = transfer_time(bytes, &link, PS).serialization.0;
            let two = transfer_time(bytes * 2, &link, PS).serialization.0;
            prop_assert!(two.abs_diff(2 * one) <= 1);
        }

        #[test]
        fn bandwidth_never_touches_propagation(bytes in 0u64..1_000_000_000, bw in 1u64..1_000_000_000_000, km in 0u64..2000) {
            let a = LinkSpec { bandwidth: Bandwidth::BytesPerSec(bw), ..long_haul(km, FiberType::HCF) };
            let b = LinkSpec { bandwidth: Bandwidth::BytesPerSec(bw.saturating_mul(3)), ..a };
            prop_assert_eq!(transfer_time(bytes, &a, PS).propagation, transfer_time(bytes, &b, PS).propagation);
        }

        #[test]
        fn doubling_bandwidth_halves_serialization(bytes in 0u64..1_000_000_000, bw in 1u64..1_000_000_000_000) {
            let a = LinkSpec { bandwidth: Bandwidth::BytesPerSec(bw), ..long_haul(100, FiberType::SMF) };
            let b = LinkSpec { bandwidth: a.bandwidth.doubled(), ..a };
            let (ta, tb) = (transfer_time(bytes, &a, PS), transfer_time(bytes, &b, PS));
            // Exact halving of the unrounded value; rounding moves each by < 1 ps.
            let exact = Ratio::new(bytes as u128 * PICOS_PER_SECOND as u128, bw as u128 * 2);
            prop_assert_eq!(tb.serialization.0 as u128, exact.ceil().to_integer());
            prop_assert!((2 * tb.serialization.0).abs_diff(ta.serialization.0) <= 2);
            prop_assert_eq!(ta.propagation, tb.propagation);
        }

        #[test]
        fn hcf_reaches_half_again_as_far(half_nm in 0u64..1_000_000_000_000_000) {
            let d = 2 * half_nm;
            let smf = propagation_delay_exact(Distance::from_nanometers(d), FiberType::SMF);
            let hcf = propagation_delay_exact(Distance::from_nanometers(3 * half_nm), FiberType::HCF);
            prop_assert_eq!(hcf, smf);
        }
    }
}
