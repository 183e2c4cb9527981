//! Lowering from syntax trees to per-thread flow graphs of atomic
//! instructions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::FrontendError;
use crate::ir::{
    Cond, Expr, FlowGraph, Instruction, MembarKind, NodeId, Program, ThreadId, VarId,
};

/// Name of the virtual thread holding trailing top-level asserts.
pub const EPILOGUE_THREAD: &str = "__epilogue";
/// Name of the virtual root thread.
pub const ROOT_THREAD: &str = "__root";

struct Ctx<'a> {
    globals: &'a BTreeMap<String, i64>,
    thread_ids: &'a HashMap<String, ThreadId>,
    /// Every declared local, by thread, for foreign-access diagnostics.
    all_locals: &'a HashMap<String, ThreadId>,
    next_node: u32,
    next_temp: u32,
    lines: BTreeMap<NodeId, usize>,
}

struct Builder {
    thread: ThreadId,
    nodes: BTreeMap<NodeId, Instruction>,
    edges: BTreeSet<(NodeId, NodeId)>,
    frontier: Vec<NodeId>,
    locals: BTreeSet<String>,
}

impl Builder {
    fn add(&mut self, ctx: &mut Ctx, instr: Instruction, line: Option<usize>) -> NodeId {
        let id = NodeId(ctx.next_node);
        ctx.next_node += 1;
        self.nodes.insert(id, instr);
        for &f in &self.frontier {
            self.edges.insert((f, id));
        }
        self.frontier = vec![id];
        if let Some(l) = line {
            ctx.lines.insert(id, l);
        }
        id
    }

    fn resolve(&self, ctx: &Ctx, name: &str, span: Span) -> Result<VarId, FrontendError> {
        if self.locals.contains(name) {
            Ok(VarId::local(name, self.thread))
        } else if ctx.globals.contains_key(name) {
            Ok(VarId::global(name))
        } else if let Some(&owner) = ctx.all_locals.get(name) {
            Err(FrontendError::ForeignLocal { name: name.to_string(), owner: owner.0, span })
        } else {
            Err(FrontendError::Undeclared { name: name.to_string(), span })
        }
    }

    /// Emits one load per distinct global mentioned (left to right) and
    /// returns the substitution from global name to fresh local.
    fn hoist(
        &mut self,
        ctx: &mut Ctx,
        idents: &[(String, Span)],
        line: usize,
    ) -> Result<(HashMap<String, VarId>, Option<NodeId>), FrontendError> {
        let mut subst = HashMap::new();
        let mut first = None;
        for (name, span) in idents {
            let v = self.resolve(ctx, name, *span)?;
            if v.is_global() && !subst.contains_key(name) {
                let tmp = VarId::local(format!("__t{}", ctx.next_temp), self.thread);
                ctx.next_temp += 1;
                let n = self.add(ctx, Instruction::Load { dst: tmp.clone(), src: v }, Some(line));
                first.get_or_insert(n);
                subst.insert(name.clone(), tmp);
            }
        }
        Ok((subst, first))
    }

    fn expr(&self, ctx: &Ctx, e: &AstExpr, subst: &HashMap<String, VarId>) -> Result<Expr, FrontendError> {
        Ok(match e {
            AstExpr::Int(i) => Expr::Const(*i),
            AstExpr::Ident(n, s) => match subst.get(n) {
                Some(t) => Expr::Var(t.clone()),
                None => Expr::Var(self.resolve(ctx, n, *s)?),
            },
            AstExpr::Neg(inner) => Expr::Neg(Box::new(self.expr(ctx, inner, subst)?)),
            AstExpr::Bin(op, a, b) => Expr::bin(*op, self.expr(ctx, a, subst)?, self.expr(ctx, b, subst)?),
        })
    }

    fn cond(&self, ctx: &Ctx, c: &AstCond, subst: &HashMap<String, VarId>) -> Result<Cond, FrontendError> {
        Ok(match c {
            AstCond::Bool(b) => Cond::Bool(*b),
            AstCond::Cmp(op, a, b) => Cond::Cmp(*op, self.expr(ctx, a, subst)?, self.expr(ctx, b, subst)?),
            AstCond::And(a, b) => Cond::And(Box::new(self.cond(ctx, a, subst)?), Box::new(self.cond(ctx, b, subst)?)),
            AstCond::Or(a, b) => Cond::Or(Box::new(self.cond(ctx, a, subst)?), Box::new(self.cond(ctx, b, subst)?)),
            AstCond::Not(inner) => Cond::Not(Box::new(self.cond(ctx, inner, subst)?)),
        })
    }

    fn thread_ref(&self, ctx: &Ctx, name: &str, span: Span) -> Result<ThreadId, FrontendError> {
        ctx.thread_ids
            .get(name)
            .copied()
            .ok_or_else(|| FrontendError::UnknownThread { name: name.to_string(), span })
    }

    fn block(&mut self, ctx: &mut Ctx, stmts: &[Stmt]) -> Result<(), FrontendError> {
        for s in stmts {
            self.stmt(ctx, s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, ctx: &mut Ctx, s: &Stmt) -> Result<(), FrontendError> {
        let line = s.span.line;
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let dst = self.resolve(ctx, target, s.span)?;
                let mut ids = Vec::new();
                value.idents(&mut ids);
                let (subst, _) = self.hoist(ctx, &ids, line)?;
                let src = self.expr(ctx, value, &subst)?;
                let instr = if dst.is_global() {
                    Instruction::Store { dst, src }
                } else {
                    Instruction::LocalAssign { dst, src }
                };
                self.add(ctx, instr, Some(line));
            }
            StmtKind::Local { name, init } => {
                if let Some(value) = init {
                    let mut ids = Vec::new();
                    value.idents(&mut ids);
                    let (subst, _) = self.hoist(ctx, &ids, line)?;
                    let src = self.expr(ctx, value, &subst)?;
                    self.locals.insert(name.clone());
                    let dst = VarId::local(name.clone(), self.thread);
                    self.add(ctx, Instruction::LocalAssign { dst, src }, Some(line));
                } else {
                    self.locals.insert(name.clone());
                }
            }
            StmtKind::Fence | StmtKind::Lock(_) | StmtKind::Unlock(_) => {
                self.add(ctx, Instruction::Fence, Some(line));
            }
            StmtKind::Membar(kinds) => {
                let set: BTreeSet<MembarKind> = kinds.iter().copied().collect();
                self.add(ctx, Instruction::Membar(set), Some(line));
            }
            StmtKind::Assert(c) => {
                let mut ids = Vec::new();
                c.idents(&mut ids);
                let (subst, _) = self.hoist(ctx, &ids, line)?;
                let cond = self.cond(ctx, c, &subst)?;
                let location = s.span.to_string();
                self.add(ctx, Instruction::Assert { cond, location }, Some(line));
            }
            StmtKind::If { cond, then_block, else_block } => {
                let mut ids = Vec::new();
                cond.idents(&mut ids);
                let (subst, _) = self.hoist(ctx, &ids, line)?;
                let c = self.cond(ctx, cond, &subst)?;
                let branch_point = self.frontier.clone();
                self.add(ctx, Instruction::Assume(c.clone()), Some(line));
                self.block(ctx, then_block)?;
                let mut after = std::mem::replace(&mut self.frontier, branch_point);
                self.add(ctx, Instruction::Assume(c.negate()), Some(line));
                if let Some(e) = else_block {
                    self.block(ctx, e)?;
                }
                after.append(&mut self.frontier);
                self.frontier = after;
            }
            StmtKind::While { cond, body } => {
                let mut ids = Vec::new();
                cond.idents(&mut ids);
                let has_globals = ids.iter().any(|(n, _)| !self.locals.contains(n) && ctx.globals.contains_key(n));
                let head = if has_globals {
                    None
                } else {
                    Some(self.add(ctx, Instruction::Nop, Some(line)))
                };
                let (subst, first_load) = self.hoist(ctx, &ids, line)?;
                let head = head.or(first_load).expect("loop head");
                let c = self.cond(ctx, cond, &subst)?;
                let branch_point = self.frontier.clone();
                self.add(ctx, Instruction::Assume(c.clone()), Some(line));
                self.block(ctx, body)?;
                for &f in &self.frontier {
                    self.edges.insert((f, head));
                }
                self.frontier = branch_point;
                self.add(ctx, Instruction::Assume(c.negate()), Some(line));
            }
            StmtKind::Create(t) => {
                let tid = self.thread_ref(ctx, t, s.span)?;
                self.add(ctx, Instruction::ThreadCreate(tid), Some(line));
            }
            StmtKind::Join(t) => {
                let tid = self.thread_ref(ctx, t, s.span)?;
                self.add(ctx, Instruction::ThreadJoin(tid), Some(line));
            }
        }
        Ok(())
    }

    fn finish(mut self, ctx: &mut Ctx, name: &str, entry: NodeId) -> FlowGraph {
        let exit = self.add(ctx, Instruction::Nop, None);
        FlowGraph { thread: self.thread, name: name.to_string(), nodes: self.nodes, entry, exit, edges: self.edges }
    }
}

fn collect_creates(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Create(t) => {
                out.insert(t.clone());
            }
            StmtKind::If { then_block, else_block, .. } => {
                collect_creates(then_block, out);
                if let Some(e) = else_block {
                    collect_creates(e, out);
                }
            }
            StmtKind::While { body, .. } => collect_creates(body, out),
            _ => {}
        }
    }
}

fn collect_locals(stmts: &[Stmt], owner: ThreadId, out: &mut HashMap<String, ThreadId>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Local { name, .. } => {
                out.entry(name.clone()).or_insert(owner);
            }
            StmtKind::If { then_block, else_block, .. } => {
                collect_locals(then_block, owner, out);
                if let Some(e) = else_block {
                    collect_locals(e, owner, out);
                }
            }
            StmtKind::While { body, .. } => collect_locals(body, owner, out),
            _ => {}
        }
    }
}

/// Lowers a parsed program. Node ids follow root, then threads in
/// declaration order, then the epilogue; statements in source order.
pub fn lower(ast: &SourceProgram) -> Result<Program, FrontendError> {
    let globals: BTreeMap<String, i64> =
        ast.globals.iter().map(|g| (g.name.clone(), g.init.unwrap_or(0))).collect();
    let root = ThreadId(0);
    let mut thread_ids = HashMap::new();
    for (i, t) in ast.threads.iter().enumerate() {
        thread_ids.insert(t.name.clone(), ThreadId(i as u32 + 1));
    }
    let epilogue = (!ast.epilogue.is_empty()).then(|| ThreadId(ast.threads.len() as u32 + 1));
    let mut all_locals = HashMap::new();
    for t in &ast.threads {
        collect_locals(&t.body, thread_ids[&t.name], &mut all_locals);
    }
    let mut explicit = BTreeSet::new();
    for t in &ast.threads {
        collect_creates(&t.body, &mut explicit);
    }
    let mut ctx = Ctx {
        globals: &globals,
        thread_ids: &thread_ids,
        all_locals: &all_locals,
        next_node: 0,
        next_temp: 0,
        lines: BTreeMap::new(),
    };

    let new_builder = |thread| Builder {
        thread,
        nodes: BTreeMap::new(),
        edges: BTreeSet::new(),
        frontier: Vec::new(),
        locals: BTreeSet::new(),
    };

    let mut threads = BTreeMap::new();
    // Root: initial stores, then start and wait for every top-level thread.
    let mut rb = new_builder(root);
    let entry = rb.add(&mut ctx, Instruction::Nop, None);
    for g in &ast.globals {
        let value = g.init.unwrap_or(0);
        rb.add(&mut ctx, Instruction::Store { dst: VarId::global(&g.name), src: Expr::Const(value) }, None);
    }
    let top: Vec<ThreadId> = ast
        .threads
        .iter()
        .filter(|t| !explicit.contains(&t.name))
        .map(|t| thread_ids[&t.name])
        .collect();
    for &t in &top {
        rb.add(&mut ctx, Instruction::ThreadCreate(t), None);
    }
    for &t in &top {
        rb.add(&mut ctx, Instruction::ThreadJoin(t), None);
    }
    if let Some(e) = epilogue {
        rb.add(&mut ctx, Instruction::ThreadCreate(e), None);
        rb.add(&mut ctx, Instruction::ThreadJoin(e), None);
    }
    threads.insert(root, rb.finish(&mut ctx, ROOT_THREAD, entry));

    for t in &ast.threads {
        let tid = thread_ids[&t.name];
        let mut b = new_builder(tid);
        let entry = b.add(&mut ctx, Instruction::Nop, None);
        b.block(&mut ctx, &t.body)?;
        threads.insert(tid, b.finish(&mut ctx, &t.name, entry));
    }
    if let Some(e) = epilogue {
        let mut b = new_builder(e);
        let entry = b.add(&mut ctx, Instruction::Nop, None);
        b.block(&mut ctx, &ast.epilogue)?;
        threads.insert(e, b.finish(&mut ctx, EPILOGUE_THREAD, entry));
    }
    let lines = ctx.lines;
    Ok(Program { globals, threads, root, lines, model: ast.model.clone() })
}
