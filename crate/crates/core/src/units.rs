//! Exact energy bookkeeping.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

const PICO_PER_UNIT: f64 = 1e12;

/// Energy in watt·slot units, stored as an integer count of pico watt·slot.
///
/// Battery levels, charge, discharge and grid draw are all carried in this
/// type so that conservation identities hold bit-exactly across a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Energy(i64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    /// Rounds a real-valued amount to the nearest representable quantum.
    pub fn from_units(value: f64) -> Self {
        debug_assert!(value.is_finite());
        Energy((value * PICO_PER_UNIT).round() as i64)
    }

    pub fn from_pico(raw: i64) -> Self {
        Energy(raw)
    }

    pub fn as_units(self) -> f64 {
        self.0 as f64 / PICO_PER_UNIT
    }

    pub fn pico(self) -> i64 {
        self.0
    }

    /// `[self]^+`
    pub fn positive_part(self) -> Self {
        Energy(self.0.max(0))
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Energy {
    fn sub_assign(&mut self, rhs: Energy) {
        self.0 -= rhs.0;
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        iter.fold(Energy::ZERO, Add::add)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_units())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_quantum() {
        assert_eq!(Energy::from_units(3.2).pico(), 3_200_000_000_000);
        assert_eq!(Energy::from_units(0.1 + 0.2), Energy::from_units(0.3));
        assert_eq!(Energy::from_units(-1.5).positive_part(), Energy::ZERO);
    }

    #[test]
    fn arithmetic_is_exact() {
        let a = Energy::from_units(440.0);
        let b = Energy::from_units(3.612_345_678_9);
        assert_eq!(a - b + b, a);
        let parts = [b; 1000];
        let total: Energy = parts.iter().copied().sum();
        assert_eq!(total.pico(), 1000 * b.pico());
    }
}
