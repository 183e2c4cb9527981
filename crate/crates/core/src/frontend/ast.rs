//! Surface syntax tree for `.lit` programs, plus a printer.

use std::fmt::{self, Write};

use crate::ir::{BinOp, CmpOp, MembarKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstExpr {
    Int(i64),
    Ident(String, Span),
    Neg(Box<AstExpr>),
    Bin(BinOp, Box<AstExpr>, Box<AstExpr>),
}

impl AstExpr {
    pub fn idents(&self, out: &mut Vec<(String, Span)>) {
        match self {
            AstExpr::Int(_) => {}
            AstExpr::Ident(n, s) => out.push((n.clone(), *s)),
            AstExpr::Neg(e) => e.idents(out),
            AstExpr::Bin(_, a, b) => {
                a.idents(out);
                b.idents(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstCond {
    Bool(bool),
    Cmp(CmpOp, AstExpr, AstExpr),
    And(Box<AstCond>, Box<AstCond>),
    Or(Box<AstCond>, Box<AstCond>),
    Not(Box<AstCond>),
}

impl AstCond {
    pub fn idents(&self, out: &mut Vec<(String, Span)>) {
        match self {
            AstCond::Bool(_) => {}
            AstCond::Cmp(_, a, b) => {
                a.idents(out);
                b.idents(out);
            }
            AstCond::And(a, b) | AstCond::Or(a, b) => {
                a.idents(out);
                b.idents(out);
            }
            AstCond::Not(c) => c.idents(out),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Assign { target: String, value: AstExpr },
    Local { name: String, init: Option<AstExpr> },
    Fence,
    Membar(Vec<MembarKind>),
    Assert(AstCond),
    If { cond: AstCond, then_block: Vec<Stmt>, else_block: Option<Vec<Stmt>> },
    While { cond: AstCond, body: Vec<Stmt> },
    Create(String),
    Join(String),
    Lock(String),
    Unlock(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalDecl {
    pub name: String,
    pub init: Option<i64>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadBlock {
    pub name: String,
    pub body: Vec<Stmt>,
    pub span: Span,
}

/// A parsed `.lit` file. Top-level asserts after the last thread are kept
/// in `epilogue`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SourceProgram {
    pub model: Option<String>,
    pub globals: Vec<GlobalDecl>,
    pub threads: Vec<ThreadBlock>,
    pub epilogue: Vec<Stmt>,
}

fn expr_prec(e: &AstExpr) -> u8 {
    match e {
        AstExpr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        AstExpr::Bin(BinOp::Mul, ..) => 2,
        AstExpr::Neg(_) => 3,
        _ => 4,
    }
}

fn write_expr(out: &mut String, e: &AstExpr, min_prec: u8) {
    let p = expr_prec(e);
    let paren = p < min_prec;
    if paren {
        out.push('(');
    }
    match e {
        AstExpr::Int(i) if *i < 0 => {
            let _ = write!(out, "({i})");
        }
        AstExpr::Int(i) => {
            let _ = write!(out, "{i}");
        }
        AstExpr::Ident(n, _) => out.push_str(n),
        AstExpr::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, 3);
        }
        AstExpr::Bin(op, a, b) => {
            write_expr(out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            // left-associative: right operand binds tighter
            write_expr(out, b, p + 1);
        }
    }
    if paren {
        out.push(')');
    }
}

fn cond_prec(c: &AstCond) -> u8 {
    match c {
        AstCond::Or(..) => 1,
        AstCond::And(..) => 2,
        AstCond::Not(_) => 3,
        _ => 4,
    }
}

fn write_cond(out: &mut String, c: &AstCond, min_prec: u8) {
    let p = cond_prec(c);
    let paren = p < min_prec;
    if paren {
        out.push('(');
    }
    match c {
        AstCond::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        AstCond::Cmp(op, a, b) => {
            write_expr(out, a, 0);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, 0);
        }
        AstCond::And(a, b) => {
            write_cond(out, a, 2);
            out.push_str(" && ");
            write_cond(out, b, 3);
        }
        AstCond::Or(a, b) => {
            write_cond(out, a, 1);
            out.push_str(" || ");
            write_cond(out, b, 2);
        }
        AstCond::Not(inner) => {
            out.push('!');
            // always parenthesize so `!a == b` never appears
            out.push('(');
            write_cond(out, inner, 0);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

fn write_block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "    ".repeat(depth);
    out.push_str(&pad);
    match &s.kind {
        StmtKind::Assign { target, value } => {
            let _ = write!(out, "{target} = ");
            write_expr(out, value, 0);
            out.push_str(";\n");
        }
        StmtKind::Local { name, init } => {
            let _ = write!(out, "local {name}");
            if let Some(e) = init {
                out.push_str(" = ");
                write_expr(out, e, 0);
            }
            out.push_str(";\n");
        }
        StmtKind::Fence => out.push_str("fence;\n"),
        StmtKind::Membar(kinds) => {
            out.push_str("membar");
            for k in kinds {
                let _ = write!(out, " {}", k.mnemonic());
            }
            out.push_str(";\n");
        }
        StmtKind::Assert(c) => {
            out.push_str("assert(");
            write_cond(out, c, 0);
            out.push_str(");\n");
        }
        StmtKind::If { cond, then_block, else_block } => {
            out.push_str("if (");
            write_cond(out, cond, 0);
            out.push_str(") {\n");
            write_block(out, then_block, depth + 1);
            let _ = write!(out, "{pad}}}");
            if let Some(e) = else_block {
                out.push_str(" else {\n");
                write_block(out, e, depth + 1);
                let _ = write!(out, "{pad}}}");
            }
            out.push('\n');
        }
        StmtKind::While { cond, body } => {
            out.push_str("while (");
            write_cond(out, cond, 0);
            out.push_str(") {\n");
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        StmtKind::Create(t) => {
            let _ = writeln!(out, "create({t});");
        }
        StmtKind::Join(t) => {
            let _ = writeln!(out, "join({t});");
        }
        StmtKind::Lock(m) => {
            let _ = writeln!(out, "lock({m});");
        }
        StmtKind::Unlock(m) => {
            let _ = writeln!(out, "unlock({m});");
        }
    }
}

impl SourceProgram {
    /// Canonical source text; parsing it yields the same tree up to spans.
    pub fn print(&self) -> String {
        let mut out = String::new();
        if let Some(m) = &self.model {
            let _ = writeln!(out, "model {m};");
        }
        for g in &self.globals {
            match g.init {
                Some(v) if v < 0 => {
                    let _ = writeln!(out, "global {} = -{};", g.name, v.unsigned_abs());
                }
                Some(v) => {
                    let _ = writeln!(out, "global {} = {v};", g.name);
                }
                None => {
                    let _ = writeln!(out, "global {};", g.name);
                }
            }
        }
        for t in &self.threads {
            let _ = writeln!(out, "thread {} {{", t.name);
            write_block(&mut out, &t.body, 1);
            out.push_str("}\n");
        }
        write_block(&mut out, &self.epilogue, 0);
        out
    }
}
