//! Extended real line `R ∪ {+∞}`, the value type of Hamiltonian evaluation.

use std::cmp::Ordering;
use std::fmt;

/// A finite real number or `+∞`.
///
/// Sup-type Hamiltonians over unbounded control sets may diverge; the
/// positive-infinite outcome is an ordinary, comparable value here rather
/// than an error or a float `inf` produced by overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn is_pos_infinity(self) -> bool {
        matches!(self, ExtendedReal::PosInfinity)
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }

    /// Total order: every finite value precedes `+∞`.
    pub fn total_cmp(&self, other: &ExtendedReal) -> Ordering {
        use ExtendedReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.total_cmp(b),
            (Finite(_), PosInfinity) => Ordering::Less,
            (PosInfinity, Finite(_)) => Ordering::Greater,
            (PosInfinity, PosInfinity) => Ordering::Equal,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(v: f64) -> Self {
        ExtendedReal::Finite(v)
    }
}

impl std::ops::Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        use ExtendedReal::*;
        match (self, rhs) {
            (Finite(a), Finite(b)) => Finite(a + b),
            _ => PosInfinity,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &ExtendedReal) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_absorbs_infinity() {
        let a = ExtendedReal::Finite(1.5);
        let b = ExtendedReal::Finite(-0.5);
        assert_eq!(a + b, ExtendedReal::Finite(1.0));
        assert_eq!(a + ExtendedReal::PosInfinity, ExtendedReal::PosInfinity);
        assert_eq!(
            ExtendedReal::PosInfinity + ExtendedReal::PosInfinity,
            ExtendedReal::PosInfinity
        );
    }

    #[test]
    fn order_is_total_with_infinity_on_top() {
        let vals = [
            ExtendedReal::Finite(-1e300),
            ExtendedReal::Finite(0.0),
            ExtendedReal::Finite(7.0),
            ExtendedReal::PosInfinity,
        ];
        for w in vals.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(ExtendedReal::PosInfinity >= ExtendedReal::PosInfinity);
    }
}
