//! Integer physical quantities.
//!
//! Every simulated duration is an unsigned count of picoseconds. Conversions
//! from rational quantities always round up to the active time quantum, so a
//! run is bit-reproducible on any platform.

use std::fmt;
use std::num::NonZeroU64;
use std::ops::{Add, Sub};

pub const PICOS_PER_SECOND: u64 = 1_000_000_000_000;
pub const NANOMETERS_PER_METER: u64 = 1_000_000_000;

/// A duration or timestamp in picoseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Picos(pub u64);

impl Picos {
    pub const ZERO: Picos = Picos(0);

    pub fn from_secs_f64(secs: f64) -> Picos {
        Picos((secs * PICOS_PER_SECOND as f64).round() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        // Split to keep full precision for values beyond 2^53 ps.
        let whole = self.0 / PICOS_PER_SECOND;
        let frac = self.0 % PICOS_PER_SECOND;
        whole as f64 + frac as f64 / PICOS_PER_SECOND as f64
    }

    pub fn checked_add(self, other: Picos) -> Option<Picos> {
        self.0.checked_add(other.0).map(Picos)
    }

    pub fn checked_mul(self, factor: u64) -> Option<Picos> {
        self.0.checked_mul(factor).map(Picos)
    }
}

impl Add for Picos {
    type Output = Picos;
    fn add(self, rhs: Picos) -> Picos {
        Picos(self.0 + rhs.0)
    }
}

impl Sub for Picos {
    type Output = Picos;
    fn sub(self, rhs: Picos) -> Picos {
        Picos(self.0 - rhs.0)
    }
}

impl fmt::Display for Picos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.0)
    }
}

/// Resolution of the simulated clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quantum(NonZeroU64);

impl Quantum {
    pub const PICOSECOND: Quantum = Quantum(NonZeroU64::MIN);

    pub fn new(picos: u64) -> Option<Quantum> {
        NonZeroU64::new(picos).map(Quantum)
    }

    pub fn picos(self) -> u64 {
        self.0.get()
    }

    /// `ceil(numerator / denominator)` picoseconds, rounded up to a whole
    /// number of quanta. Saturates at `u64::MAX`.
    pub fn ceil_ratio(self, numerator: u128, denominator: u128) -> Picos {
        debug_assert!(denominator > 0);
        let q = self.0.get() as u128;
        let den = denominator * q;
        let quanta = numerator / den + u128::from(!numerator.is_multiple_of(den));
        Picos(u64::try_from(quanta * q).unwrap_or(u64::MAX))
    }

    /// Rounds an integer duration up to the quantum.
    pub fn align(self, t: Picos) -> Picos {
        self.ceil_ratio(t.0 as u128, 1)
    }
}

impl Default for Quantum {
    fn default() -> Self {
        Quantum::PICOSECOND
    }
}

/// Link capacity in bytes per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bandwidth {
    BytesPerSec(u64),
    /// Serialization is free. Used for communication-free limit runs.
    Unlimited,
}

impl Bandwidth {
    pub fn is_positive(self) -> bool {
        !matches!(self, Bandwidth::BytesPerSec(0))
    }

    pub fn doubled(self) -> Bandwidth {
        match self {
            Bandwidth::BytesPerSec(b) => Bandwidth::BytesPerSec(b.saturating_mul(2)),
            Bandwidth::Unlimited => Bandwidth::Unlimited,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Bandwidth::BytesPerSec(b) => b as f64,
            Bandwidth::Unlimited => f64::INFINITY,
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bandwidth::BytesPerSec(b) => write!(f, "{b}"),
            Bandwidth::Unlimited => f.write_str("inf"),
        }
    }
}

/// A length stored in whole nanometers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Distance(u64);

impl Distance {
    pub const ZERO: Distance = Distance(0);

    pub const fn from_nanometers(nm: u64) -> Distance {
        Distance(nm)
    }

    pub const fn from_meters(m: u64) -> Distance {
        Distance(m * NANOMETERS_PER_METER)
    }

    pub fn from_meters_f64(m: f64) -> Distance {
        Distance((m * NANOMETERS_PER_METER as f64).round() as u64)
    }

    pub fn from_km_f64(km: f64) -> Distance {
        Distance::from_meters_f64(km * 1000.0)
    }

    pub fn nanometers(self) -> u64 {
        self.0
    }

    pub fn meters(self) -> f64 {
        let whole = self.0 / NANOMETERS_PER_METER;
        let frac = self.0 % NANOMETERS_PER_METER;
        whole as f64 + frac as f64 / NANOMETERS_PER_METER as f64
    }

    pub fn km(self) -> f64 {
        self.meters() / 1000.0
    }
}

/// Renders `value / 10^scale` as an exact decimal, trimming trailing zeros.
pub(crate) fn exact_decimal(value: u64, scale: u32) -> String {
    let div = 10u64.pow(scale);
    let whole = value / div;
    let frac = value % div;
    if frac == 0 {
        return whole.to_string();
    }
    let digits = format!("{frac:0width$}", width = scale as usize);
    format!("{whole}.{}", digits.trim_end_matches('0'))
}
