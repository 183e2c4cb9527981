use std::collections::BTreeMap;
use std::fmt;

use super::Interval;
use crate::ir::{Cond, Expr, Instruction, VarId};

/// Map from variables to intervals. Unmapped variables are Top; `None`
/// is the unreachable (Bottom) environment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct AbstractEnv {
    vars: Option<BTreeMap<VarId, Interval>>,
}

impl AbstractEnv {
    pub fn bottom() -> Self {
        AbstractEnv { vars: None }
    }

    pub fn top() -> Self {
        AbstractEnv { vars: Some(BTreeMap::new()) }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, Interval)>) -> Self {
        let mut env = AbstractEnv::top();
        for (v, i) in pairs {
            env.set(v, i);
        }
        env
    }

    pub fn is_bottom(&self) -> bool {
        self.vars.is_none()
    }

    pub fn get(&self, v: &VarId) -> Interval {
        match &self.vars {
            None => Interval::Bottom,
            Some(m) => m.get(v).copied().unwrap_or(Interval::TOP),
        }
    }

    /// Binds `v`; binding Bottom collapses the whole environment.
    pub fn set(&mut self, v: VarId, value: Interval) {
        let Some(m) = &mut self.vars else { return };
        if value.is_bottom() {
            self.vars = None;
        } else if value.is_top() {
            m.remove(&v);
        } else {
            m.insert(v, value);
        }
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&VarId, &Interval)> {
        self.vars.iter().flat_map(|m| m.iter())
    }

    fn pointwise(&self, other: &Self, f: impl Fn(&Interval, &Interval) -> Interval) -> Self {
        match (&self.vars, &other.vars) {
            (None, _) => other.clone(),
            (_, None) => self.clone(),
            (Some(a), Some(b)) => {
                let mut out = AbstractEnv::top();
                for (k, va) in a {
                    if let Some(vb) = b.get(k) {
                        out.set(k.clone(), f(va, vb));
                    }
                }
                out
            }
        }
    }

    pub fn join(&self, other: &Self) -> Self {
        self.pointwise(other, Interval::join)
    }

    pub fn widen(&self, next: &Self) -> Self {
        self.pointwise(next, Interval::widen)
    }

    pub fn leq(&self, other: &Self) -> bool {
        match (&self.vars, &other.vars) {
            (None, _) => true,
            (_, None) => false,
            (Some(_), Some(b)) => b.iter().all(|(k, vb)| self.get(k).leq(vb)),
        }
    }

    pub fn eval(&self, e: &Expr) -> Interval {
        if self.is_bottom() {
            return Interval::Bottom;
        }
        match e {
            Expr::Const(c) => Interval::singleton(*c),
            Expr::Var(v) => self.get(v),
            Expr::Neg(inner) => self.eval(inner).neg(),
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.eval(a), self.eval(b));
                match op {
                    crate::ir::BinOp::Add => a.add(&b),
                    crate::ir::BinOp::Sub => a.sub(&b),
                    crate::ir::BinOp::Mul => a.mul(&b),
                }
            }
        }
    }

    /// One forward constraint-propagation pass assuming `cond` holds.
    pub fn assume(&self, cond: &Cond) -> Self {
        if self.is_bottom() {
            return self.clone();
        }
        match cond {
            Cond::Bool(true) => self.clone(),
            Cond::Bool(false) => AbstractEnv::bottom(),
            Cond::Cmp(op, a, b) => {
                let (ia, ib) = (self.eval(a), self.eval(b));
                let ra = ia.refine(*op, &ib);
                let rb = ib.refine(op.flip(), &ia);
                if ra.is_bottom() || rb.is_bottom() {
                    return AbstractEnv::bottom();
                }
                let mut out = self.clone();
                if let Expr::Var(v) = a {
                    out.set(v.clone(), ra);
                }
                if let Expr::Var(v) = b {
                    let cur = out.get(v);
                    out.set(v.clone(), cur.meet(&rb));
                }
                out
            }
            Cond::And(a, b) => self.assume(a).assume(b),
            Cond::Or(a, b) => self.assume(a).join(&self.assume(b)),
            Cond::Not(c) => self.assume(&c.negate()),
        }
    }

    /// False only when every valuation described by `self` satisfies `cond`.
    pub fn may_be_false(&self, cond: &Cond) -> bool {
        !self.assume(&cond.negate()).is_bottom()
    }

    /// Abstract effect of one instruction. A load copies the thread's own
    /// view of the global; remote values are injected by the caller.
    pub fn transfer(&self, instr: &Instruction) -> Self {
        if self.is_bottom() {
            return self.clone();
        }
        match instr {
            Instruction::Load { dst, src } => {
                let mut out = self.clone();
                out.set(dst.clone(), self.get(src));
                out
            }
            Instruction::Store { dst, src } | Instruction::LocalAssign { dst, src } => {
                let mut out = self.clone();
                out.set(dst.clone(), self.eval(src));
                out
            }
            Instruction::Assume(c) => self.assume(c),
            Instruction::Fence
            | Instruction::Membar(_)
            | Instruction::Assert { .. }
            | Instruction::ThreadCreate(_)
            | Instruction::ThreadJoin(_)
            | Instruction::Nop => self.clone(),
        }
    }
}

impl fmt::Display for AbstractEnv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.vars {
            None => f.write_str("_|_"),
            Some(m) => {
                f.write_str("{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}->{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Free-function forms of the environment lattice operations.
pub fn env_join(a: &AbstractEnv, b: &AbstractEnv) -> AbstractEnv {
    a.join(b)
}

pub fn env_leq(a: &AbstractEnv, b: &AbstractEnv) -> bool {
    a.leq(b)
}

pub fn env_widen(a: &AbstractEnv, b: &AbstractEnv) -> AbstractEnv {
    a.widen(b)
}

pub fn transfer(instr: &Instruction, env: &AbstractEnv) -> AbstractEnv {
    env.transfer(instr)
}

pub fn may_be_false(cond: &Cond, env: &AbstractEnv) -> bool {
    env.may_be_false(cond)
}
