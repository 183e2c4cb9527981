use std::cmp::{max, min};
use std::fmt;

use serde::{Serialize, Serializer};

use crate::ir::CmpOp;

/// An interval end point over the extended integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    NegInf,
    Fin(i64),
    PosInf,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::NegInf => f.write_str("-oo"),
            Bound::Fin(v) => write!(f, "{v}"),
            Bound::PosInf => f.write_str("+oo"),
        }
    }
}

/// Wide intermediate value used while combining bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Wide {
    NegInf,
    Fin(i128),
    PosInf,
}

impl From<Bound> for Wide {
    fn from(b: Bound) -> Self {
        match b {
            Bound::NegInf => Wide::NegInf,
            Bound::Fin(v) => Wide::Fin(v as i128),
            Bound::PosInf => Wide::PosInf,
        }
    }
}

impl Wide {
    fn add(self, o: Wide) -> Wide {
        match (self, o) {
            (Wide::Fin(a), Wide::Fin(b)) => Wide::Fin(a + b),
            (Wide::NegInf, _) | (_, Wide::NegInf) => Wide::NegInf,
            _ => Wide::PosInf,
        }
    }

    fn mul(self, o: Wide) -> Wide {
        match (self, o) {
            (Wide::Fin(a), Wide::Fin(b)) => match a.checked_mul(b) {
                Some(p) => Wide::Fin(p),
                None if (a < 0) == (b < 0) => Wide::PosInf,
                None => Wide::NegInf,
            },
            (Wide::Fin(0), _) | (_, Wide::Fin(0)) => Wide::Fin(0),
            (a, b) => {
                let neg = |w: Wide| matches!(w, Wide::NegInf) || matches!(w, Wide::Fin(v) if v < 0);
                if neg(a) == neg(b) {
                    Wide::PosInf
                } else {
                    Wide::NegInf
                }
            }
        }
    }

    fn neg(self) -> Wide {
        match self {
            Wide::NegInf => Wide::PosInf,
            Wide::PosInf => Wide::NegInf,
            Wide::Fin(v) => Wide::Fin(-v),
        }
    }

    fn as_lower(self) -> Bound {
        match self {
            Wide::NegInf => Bound::NegInf,
            Wide::PosInf => Bound::Fin(i64::MAX),
            Wide::Fin(v) if v < i64::MIN as i128 => Bound::NegInf,
            Wide::Fin(v) => Bound::Fin(v.min(i64::MAX as i128) as i64),
        }
    }

    fn as_upper(self) -> Bound {
        match self {
            Wide::PosInf => Bound::PosInf,
            Wide::NegInf => Bound::Fin(i64::MIN),
            Wide::Fin(v) if v > i64::MAX as i128 => Bound::PosInf,
            Wide::Fin(v) => Bound::Fin(v.max(i64::MIN as i128) as i64),
        }
    }
}

/// An integer interval, or the empty interval `Bottom`. The order is an
/// arbitrary total order used for canonical iteration, not containment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Interval {
    Bottom,
    Range { lo: Bound, hi: Bound },
}

impl Interval {
    pub const TOP: Interval = Interval::Range { lo: Bound::NegInf, hi: Bound::PosInf };

    pub fn new(lo: Bound, hi: Bound) -> Self {
        if lo > hi || lo == Bound::PosInf || hi == Bound::NegInf {
            Interval::Bottom
        } else {
            Interval::Range { lo, hi }
        }
    }

    pub fn finite(lo: i64, hi: i64) -> Self {
        Interval::new(Bound::Fin(lo), Bound::Fin(hi))
    }

    pub fn singleton(v: i64) -> Self {
        Interval::finite(v, v)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Interval::Bottom)
    }

    pub fn is_top(&self) -> bool {
        *self == Interval::TOP
    }

    pub fn bounds(&self) -> Option<(Bound, Bound)> {
        match *self {
            Interval::Bottom => None,
            Interval::Range { lo, hi } => Some((lo, hi)),
        }
    }

    pub fn as_singleton(&self) -> Option<i64> {
        match *self {
            Interval::Range { lo: Bound::Fin(a), hi: Bound::Fin(b) } if a == b => Some(a),
            _ => None,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        match *self {
            Interval::Bottom => false,
            Interval::Range { lo, hi } => lo <= Bound::Fin(v) && Bound::Fin(v) <= hi,
        }
    }

    /// Least upper bound.
    pub fn join(&self, other: &Interval) -> Interval {
        match (self.bounds(), other.bounds()) {
            (None, _) => *other,
            (_, None) => *self,
            (Some((a, b)), Some((c, d))) => Interval::new(min(a, c), max(b, d)),
        }
    }

    pub fn meet(&self, other: &Interval) -> Interval {
        match (self.bounds(), other.bounds()) {
            (Some((a, b)), Some((c, d))) => Interval::new(max(a, c), min(b, d)),
            _ => Interval::Bottom,
        }
    }

    /// Containment order.
    pub fn leq(&self, other: &Interval) -> bool {
        match (self.bounds(), other.bounds()) {
            (None, _) => true,
            (_, None) => false,
            (Some((a, b)), Some((c, d))) => a >= c && b <= d,
        }
    }

    /// Standard widening: an unstable bound jumps to infinity.
    pub fn widen(&self, next: &Interval) -> Interval {
        match (self.bounds(), next.bounds()) {
            (None, _) => *next,
            (_, None) => *self,
            (Some((a, b)), Some((c, d))) => {
                let lo = if c < a { Bound::NegInf } else { a };
                let hi = if d > b { Bound::PosInf } else { b };
                Interval::new(lo, hi)
            }
        }
    }

    fn lift(&self, other: &Interval, f: impl Fn(Wide, Wide, Wide, Wide) -> (Wide, Wide)) -> Interval {
        match (self.bounds(), other.bounds()) {
            (Some((a, b)), Some((c, d))) => {
                let (lo, hi) = f(a.into(), b.into(), c.into(), d.into());
                Interval::new(lo.as_lower(), hi.as_upper())
            }
            _ => Interval::Bottom,
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        self.lift(other, |a, b, c, d| (a.add(c), b.add(d)))
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        self.lift(other, |a, b, c, d| (a.add(d.neg()), b.add(c.neg())))
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        self.lift(other, |a, b, c, d| {
            let corners = [a.mul(c), a.mul(d), b.mul(c), b.mul(d)];
            (*corners.iter().min().unwrap(), *corners.iter().max().unwrap())
        })
    }

    pub fn neg(&self) -> Interval {
        match self.bounds() {
            None => Interval::Bottom,
            Some((a, b)) => {
                let (a, b): (Wide, Wide) = (a.into(), b.into());
                Interval::new(b.neg().as_lower(), a.neg().as_upper())
            }
        }
    }

    /// Values of `self` that may satisfy `self op other` for some value of `other`.
    pub fn refine(&self, op: CmpOp, other: &Interval) -> Interval {
        let Some((olo, ohi)) = other.bounds() else {
            return Interval::Bottom;
        };
        let shift = |b: Bound, by: i128| -> Wide { Wide::from(b).add(Wide::Fin(by)) };
        match op {
            CmpOp::Eq => self.meet(other),
            CmpOp::Ne => match (other.as_singleton(), self.bounds()) {
                (Some(c), Some((lo, hi))) => {
                    let lo = if lo == Bound::Fin(c) { shift(lo, 1).as_lower() } else { lo };
                    let hi = if hi == Bound::Fin(c) { shift(hi, -1).as_upper() } else { hi };
                    Interval::new(lo, hi)
                }
                _ => *self,
            },
            CmpOp::Lt => self.meet(&Interval::new(Bound::NegInf, shift(ohi, -1).as_upper())),
            CmpOp::Le => self.meet(&Interval::new(Bound::NegInf, ohi)),
            CmpOp::Gt => self.meet(&Interval::new(shift(olo, 1).as_lower(), Bound::PosInf)),
            CmpOp::Ge => self.meet(&Interval::new(olo, Bound::PosInf)),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Bottom => f.write_str("_|_"),
            Interval::Range { lo, hi } => write!(f, "[{lo},{hi}]"),
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
