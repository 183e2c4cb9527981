//! Non-relational interval domain.
//!
//! The environment interface (`join`, `leq`, `widen`, `assume`, `eval`,
//! `transfer`) is all the analysis relies on.

mod env;
mod interval;

pub use env::{env_join, env_leq, env_widen, may_be_false, transfer, AbstractEnv};
pub use interval::{Bound, Interval};

/// Free-function forms of the interval lattice operations.
pub fn join(a: &Interval, b: &Interval) -> Interval {
    a.join(b)
}

pub fn leq(a: &Interval, b: &Interval) -> bool {
    a.leq(b)
}

pub fn widen(a: &Interval, b: &Interval) -> Interval {
    a.widen(b)
}
