//! Small semi-naive Datalog engine over relations of `u32` tuples.
//!
//! Rules are Horn clauses with positive atoms, negated atoms over relations
//! that never occur in a head, and disequalities. Evaluation is incremental:
//! facts inserted after [`Engine::run`] are treated as the next delta, so a
//! later `run` extends the previous fixpoint instead of recomputing it.

use std::collections::{HashMap, HashSet};
use std::fmt;

pub const MAX_ARITY: usize = 4;

type Row = [u32; MAX_ARITY];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term {
    Var(usize),
    Const(u32),
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub rel: RelId,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(rel: RelId, terms: impl Into<Vec<Term>>) -> Self {
        Atom { rel, terms: terms.into() }
    }
}

#[derive(Clone, Debug)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Neq(Term, Term),
}

#[derive(Clone, Debug)]
struct Rule {
    head: Atom,
    pos: Vec<Atom>,
    filters: Vec<Literal>,
    vars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleError {
    Arity { rel: String, expected: usize, got: usize },
    Unsafe(usize),
    NegatedHead(String),
}

impl fmt::Display for RuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleError::Arity { rel, expected, got } => write!(f, "{rel} has arity {expected}, atom has {got}"),
            RuleError::Unsafe(v) => write!(f, "variable {v} is not bound by a positive atom"),
            RuleError::NegatedHead(r) => write!(f, "{r} is negated but derived by a rule"),
        }
    }
}

impl std::error::Error for RuleError {}

#[derive(Clone, Debug, Default)]
struct Relation {
    name: String,
    arity: usize,
    rows: Vec<Row>,
    set: HashSet<Row>,
    index: Vec<HashMap<u32, Vec<u32>>>,
    /// Rows before this index were already seen by every rule.
    delta_start: usize,
}

impl Relation {
    fn insert(&mut self, row: Row) -> bool {
        if !self.set.insert(row) {
            return false;
        }
        let idx = self.rows.len() as u32;
        for (col, ix) in self.index.iter_mut().enumerate() {
            ix.entry(row[col]).or_default().push(idx);
        }
        self.rows.push(row);
        true
    }
}

#[derive(Clone, Debug, Default)]
pub struct Engine {
    rels: Vec<Relation>,
    rules: Vec<Rule>,
}

fn pad(tuple: &[u32]) -> Row {
    let mut row = [0; MAX_ARITY];
    row[..tuple.len()].copy_from_slice(tuple);
    row
}

impl Engine {
    pub fn new() -> Self {
        Engine::default()
    }

    pub fn relation(&mut self, name: &str, arity: usize) -> RelId {
        assert!((1..=MAX_ARITY).contains(&arity), "unsupported arity {arity}");
        self.rels.push(Relation {
            name: name.to_string(),
            arity,
            index: vec![HashMap::new(); arity],
            ..Relation::default()
        });
        RelId(self.rels.len() - 1)
    }

    pub fn name(&self, rel: RelId) -> &str {
        &self.rels[rel.0].name
    }

    pub fn arity(&self, rel: RelId) -> usize {
        self.rels[rel.0].arity
    }

    pub fn insert(&mut self, rel: RelId, tuple: &[u32]) -> bool {
        let r = &mut self.rels[rel.0];
        assert_eq!(tuple.len(), r.arity, "arity mismatch inserting into {}", r.name);
        r.insert(pad(tuple))
    }

    pub fn contains(&self, rel: RelId, tuple: &[u32]) -> bool {
        self.rels[rel.0].set.contains(&pad(tuple))
    }

    pub fn len(&self, rel: RelId) -> usize {
        self.rels[rel.0].rows.len()
    }

    pub fn is_empty(&self, rel: RelId) -> bool {
        self.len(rel) == 0
    }

    /// Tuples in insertion order.
    pub fn tuples(&self, rel: RelId) -> impl Iterator<Item = &[u32]> + '_ {
        let r = &self.rels[rel.0];
        r.rows.iter().map(move |row| &row[..r.arity])
    }

    pub fn rule(&mut self, head: Atom, body: Vec<Literal>) -> Result<(), RuleError> {
        let check = |a: &Atom| {
            let expected = self.rels[a.rel.0].arity;
            if a.terms.len() != expected {
                return Err(RuleError::Arity { rel: self.rels[a.rel.0].name.clone(), expected, got: a.terms.len() });
            }
            Ok(())
        };
        check(&head)?;
        let mut pos = Vec::new();
        let mut filters = Vec::new();
        for lit in body {
            match lit {
                Literal::Pos(a) => {
                    check(&a)?;
                    pos.push(a);
                }
                Literal::Neg(a) => {
                    check(&a)?;
                    filters.push(Literal::Neg(a));
                }
                other => filters.push(other),
            }
        }
        let mut bound = HashSet::new();
        for a in &pos {
            for t in &a.terms {
                if let Term::Var(v) = t {
                    bound.insert(*v);
                }
            }
        }
        let mut mentioned: Vec<Term> = head.terms.clone();
        for f in &filters {
            match f {
                Literal::Neg(a) => mentioned.extend(a.terms.iter().copied()),
                Literal::Neq(a, b) => mentioned.extend([*a, *b]),
                Literal::Pos(_) => unreachable!(),
            }
        }
        for t in &mentioned {
            if let Term::Var(v) = t {
                if !bound.contains(v) {
                    return Err(RuleError::Unsafe(*v));
                }
            }
        }
        let vars = bound.iter().max().map_or(0, |m| m + 1);
        let rule = Rule { head, pos, filters, vars };
        self.rules.push(rule);
        let checked = self.check_negation();
        if checked.is_err() {
            self.rules.pop();
        }
        checked
    }

    fn check_negation(&self) -> Result<(), RuleError> {
        let heads: HashSet<RelId> = self.rules.iter().map(|r| r.head.rel).collect();
        for r in &self.rules {
            for f in &r.filters {
                if let Literal::Neg(a) = f {
                    if heads.contains(&a.rel) {
                        return Err(RuleError::NegatedHead(self.rels[a.rel.0].name.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Runs to fixpoint; returns the number of derived tuples.
    pub fn run(&mut self) -> usize {
        let mut derived = 0;
        loop {
            let ends: Vec<usize> = self.rels.iter().map(|r| r.rows.len()).collect();
            let starts: Vec<usize> = self.rels.iter().map(|r| r.delta_start).collect();
            if (0..self.rels.len()).all(|i| starts[i] == ends[i]) {
                return derived;
            }
            let mut fresh: Vec<(RelId, Row)> = Vec::new();
            for rule in &self.rules {
                for d in 0..rule.pos.len() {
                    let rel = rule.pos[d].rel.0;
                    if starts[rel] == ends[rel] {
                        continue;
                    }
                    let mut order = Vec::with_capacity(rule.pos.len());
                    order.push((d, starts[rel], ends[rel]));
                    for (i, a) in rule.pos.iter().enumerate() {
                        if i != d {
                            order.push((i, 0, ends[a.rel.0]));
                        }
                    }
                    let mut binding = vec![None; rule.vars];
                    self.join(rule, &order, 0, &mut binding, &mut fresh);
                }
            }
            for (i, r) in self.rels.iter_mut().enumerate() {
                r.delta_start = ends[i];
            }
            for (rel, row) in fresh {
                if self.rels[rel.0].insert(row) {
                    derived += 1;
                }
            }
        }
    }

    fn join(
        &self,
        rule: &Rule,
        order: &[(usize, usize, usize)],
        depth: usize,
        binding: &mut Vec<Option<u32>>,
        out: &mut Vec<(RelId, Row)>,
    ) {
        if depth == order.len() {
            if self.filters_hold(rule, binding) {
                let mut row = [0; MAX_ARITY];
                for (i, t) in rule.head.terms.iter().enumerate() {
                    row[i] = value(*t, binding).expect("safe rule");
                }
                if !self.rels[rule.head.rel.0].set.contains(&row) {
                    out.push((rule.head.rel, row));
                }
            }
            return;
        }
        let (ai, lo, hi) = order[depth];
        let atom = &rule.pos[ai];
        let rel = &self.rels[atom.rel.0];
        let key = atom.terms.iter().enumerate().find_map(|(c, t)| value(*t, binding).map(|v| (c, v)));
        let mut visit = |row: &Row, binding: &mut Vec<Option<u32>>| {
            let mut newly = Vec::new();
            let mut ok = true;
            for (c, t) in atom.terms.iter().enumerate() {
                match *t {
                    Term::Const(k) => ok &= row[c] == k,
                    Term::Var(v) => match binding[v] {
                        Some(b) => ok &= row[c] == b,
                        None => {
                            binding[v] = Some(row[c]);
                            newly.push(v);
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok {
                self.join(rule, order, depth + 1, binding, out);
            }
            for v in newly {
                binding[v] = None;
            }
        };
        match key {
            Some((c, v)) => {
                if let Some(ids) = rel.index[c].get(&v) {
                    let from = ids.partition_point(|&i| (i as usize) < lo);
                    for &i in &ids[from..] {
                        if i as usize >= hi {
                            break;
                        }
                        visit(&rel.rows[i as usize], binding);
                    }
                }
            }
            None => {
                for row in &rel.rows[lo..hi] {
                    visit(row, binding);
                }
            }
        }
    }

    fn filters_hold(&self, rule: &Rule, binding: &[Option<u32>]) -> bool {
        rule.filters.iter().all(|f| match f {
            Literal::Neq(a, b) => value(*a, binding) != value(*b, binding),
            Literal::Neg(atom) => {
                let row: Vec<u32> = atom.terms.iter().map(|t| value(*t, binding).expect("safe rule")).collect();
                !self.rels[atom.rel.0].set.contains(&pad(&row))
            }
            Literal::Pos(_) => true,
        })
    }
}

fn value(t: Term, binding: &[Option<u32>]) -> Option<u32> {
    match t {
        Term::Const(k) => Some(k),
        Term::Var(v) => binding[v],
    }
}

/// Shorthand constructors for rule bodies.
pub fn pos(rel: RelId, terms: impl Into<Vec<Term>>) -> Literal {
    Literal::Pos(Atom::new(rel, terms))
}

pub fn neg(rel: RelId, terms: impl Into<Vec<Term>>) -> Literal {
    Literal::Neg(Atom::new(rel, terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Term::Var as V;

    fn closure_engine() -> (Engine, RelId, RelId) {
        let mut e = Engine::new();
        let edge = e.relation("Edge", 2);
        let path = e.relation("Path", 2);
        e.rule(Atom::new(path, [V(0), V(1)]), vec![pos(edge, [V(0), V(1)])]).unwrap();
        e.rule(Atom::new(path, [V(0), V(2)]), vec![pos(path, [V(0), V(1)]), pos(path, [V(1), V(2)])]).unwrap();
        (e, edge, path)
    }

    #[test]
    fn transitive_closure_of_chain() {
        let (mut e, edge, path) = closure_engine();
        for i in 0..5 {
            e.insert(edge, &[i, i + 1]);
        }
        e.run();
        assert_eq!(e.len(path), 15);
        assert!(e.contains(path, &[0, 5]));
        assert!(!e.contains(path, &[5, 0]));
    }

    #[test]
    fn incremental_run_extends_fixpoint() {
        let (mut e, edge, path) = closure_engine();
        e.insert(edge, &[0, 1]);
        e.insert(edge, &[2, 3]);
        e.run();
        assert_eq!(e.len(path), 2);
        let mut again = e.clone();
        again.insert(edge, &[1, 2]);
        again.run();
        assert!(again.contains(path, &[0, 3]));
        assert_eq!(again.len(path), 6);
        assert_eq!(e.len(path), 2);
    }

    #[test]
    fn negation_and_disequality() {
        let mut e = Engine::new();
        let node = e.relation("Node", 1);
        let blocked = e.relation("Blocked", 1);
        let pair = e.relation("Pair", 2);
        e.rule(
            Atom::new(pair, [V(0), V(1)]),
            vec![pos(node, [V(0)]), pos(node, [V(1)]), Literal::Neq(V(0), V(1)), neg(blocked, [V(1)])],
        )
        .unwrap();
        for n in 0..3 {
            e.insert(node, &[n]);
        }
        e.insert(blocked, &[2]);
        e.run();
        let mut got: Vec<Vec<u32>> = e.tuples(pair).map(|t| t.to_vec()).collect();
        got.sort();
        assert_eq!(got, vec![vec![0, 1], vec![1, 0], vec![2, 0], vec![2, 1]]);
    }

    #[test]
    fn rejects_bad_rules() {
        let mut e = Engine::new();
        let a = e.relation("A", 1);
        let b = e.relation("B", 2);
        assert!(matches!(e.rule(Atom::new(b, [V(0), V(1)]), vec![pos(a, [V(0)])]), Err(RuleError::Unsafe(1))));
        assert!(matches!(e.rule(Atom::new(a, [V(0)]), vec![pos(b, [V(0)])]), Err(RuleError::Arity { .. })));
        e.rule(Atom::new(a, [V(0)]), vec![pos(b, [V(0), V(1)])]).unwrap();
        let c = e.relation("C", 1);
        assert!(matches!(
            e.rule(Atom::new(c, [V(0)]), vec![pos(b, [V(0), V(1)]), neg(a, [V(1)])]),
            Err(RuleError::NegatedHead(_))
        ));
    }

    #[test]
    fn constants_in_atoms() {
        let (mut e, edge, path) = closure_engine();
        let from_zero = e.relation("FromZero", 1);
        e.rule(Atom::new(from_zero, [V(0)]), vec![pos(path, [Term::Const(0), V(0)])]).unwrap();
        e.insert(edge, &[0, 1]);
        e.insert(edge, &[1, 2]);
        e.insert(edge, &[3, 4]);
        e.run();
        assert_eq!(e.len(from_zero), 2);
        let _ = path;
    }
}
