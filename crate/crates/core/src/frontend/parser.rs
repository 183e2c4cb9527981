//! Lexer and recursive-descent parser for `.lit` programs.

use std::collections::{BTreeSet, HashSet};

use super::ast::*;
use super::FrontendError;
use crate::ir::{BinOp, CmpOp, MembarKind};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Membar(MembarKind),
    Punct(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(i) => format!("integer `{i}`"),
            Tok::Membar(k) => format!("`{}`", k.mnemonic()),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "model", "global", "thread", "local", "fence", "membar", "assert", "if", "else", "while",
    "create", "join", "lock", "unlock", "true", "false",
];

const PUNCTS: &[&str] = &[
    "==", "!=", "<=", ">=", "&&", "||", "{", "}", "(", ")", ";", ",", "=", "+", "-", "*", "<", ">",
    "!",
];

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, FrontendError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            if word.starts_with("__") {
                return Err(FrontendError::Syntax {
                    span,
                    found: format!("identifier `{word}`"),
                    expected: vec!["an identifier not starting with `__` (reserved)".into()],
                });
            }
            out.push((Tok::Ident(word), span));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            col += i - start;
            let value = digits.parse::<i64>().map_err(|_| FrontendError::Syntax {
                span,
                found: format!("integer `{digits}`"),
                expected: vec!["an integer that fits in 64 bits".into()],
            })?;
            out.push((Tok::Int(value), span));
            continue;
        }
        if c == '#' {
            let kind: String = chars[i..(i + 3).min(chars.len())].iter().collect();
            let k = match kind.as_str() {
                "#LL" => MembarKind::LoadLoad,
                "#LS" => MembarKind::LoadStore,
                "#SL" => MembarKind::StoreLoad,
                "#SS" => MembarKind::StoreStore,
                _ => {
                    return Err(FrontendError::Syntax {
                        span,
                        found: format!("`{kind}`"),
                        expected: vec!["#LL".into(), "#LS".into(), "#SL".into(), "#SS".into()],
                    })
                }
            };
            i += 3;
            col += 3;
            out.push((Tok::Membar(k), span));
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                i += p.len();
                col += p.len();
                out.push((Tok::Punct(p), span));
            }
            None => {
                return Err(FrontendError::Syntax {
                    span,
                    found: format!("character `{c}`"),
                    expected: vec!["a token".into()],
                })
            }
        }
    }
    out.push((Tok::Eof, Span { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(FrontendError::Syntax {
            span: self.span(),
            found: self.peek().describe(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == k)
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<Span> {
        if self.is_punct(p) {
            Ok(self.bump().1)
        } else {
            self.error(&[p])
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                let span = self.bump().1;
                Ok((w, span))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn program(&mut self) -> PResult<SourceProgram> {
        let mut prog = SourceProgram::default();
        if self.is_keyword("model") {
            self.bump();
            prog.model = Some(self.ident()?.0);
            self.expect_punct(";")?;
        }
        while self.is_keyword("global") {
            self.bump();
            loop {
                let (name, span) = self.ident()?;
                let init = if self.is_punct("=") {
                    self.bump();
                    Some(self.signed_int()?)
                } else {
                    None
                };
                prog.globals.push(GlobalDecl { name, init, span });
                if self.is_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.expect_punct(";")?;
        }
        if !self.is_keyword("thread") {
            return self.error(&["global", "thread"]);
        }
        while self.is_keyword("thread") {
            let span = self.bump().1;
            let name = self.ident()?.0;
            let body = self.block()?;
            prog.threads.push(ThreadBlock { name, body, span });
        }
        while self.is_keyword("assert") {
            prog.epilogue.push(self.stmt()?);
        }
        if *self.peek() != Tok::Eof {
            return self.error(&["thread", "assert", "end of input"]);
        }
        Ok(prog)
    }

    fn signed_int(&mut self) -> PResult<i64> {
        let neg = if self.is_punct("-") {
            self.bump();
            true
        } else {
            false
        };
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.error(&["integer"]),
        }
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return self.error(&["}"]);
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn paren_ident(&mut self) -> PResult<String> {
        self.expect_punct("(")?;
        let name = self.ident()?.0;
        self.expect_punct(")")?;
        self.expect_punct(";")?;
        Ok(name)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let word = match self.peek() {
            Tok::Ident(w) => w.clone(),
            _ => return self.error(&["statement"]),
        };
        let kind = match word.as_str() {
            "local" => {
                self.bump();
                let name = self.ident()?.0;
                let init = if self.is_punct("=") {
                    self.bump();
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                StmtKind::Local { name, init }
            }
            "fence" => {
                self.bump();
                self.expect_punct(";")?;
                StmtKind::Fence
            }
            "membar" => {
                self.bump();
                let mut kinds = Vec::new();
                while let Tok::Membar(k) = *self.peek() {
                    self.bump();
                    kinds.push(k);
                }
                if kinds.is_empty() {
                    return self.error(&["#LL", "#LS", "#SL", "#SS"]);
                }
                self.expect_punct(";")?;
                StmtKind::Membar(kinds)
            }
            "assert" => {
                self.bump();
                self.expect_punct("(")?;
                let c = self.cond()?;
                self.expect_punct(")")?;
                self.expect_punct(";")?;
                StmtKind::Assert(c)
            }
            "if" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.cond()?;
                self.expect_punct(")")?;
                let then_block = self.block()?;
                let else_block = if self.is_keyword("else") {
                    self.bump();
                    Some(self.block()?)
                } else {
                    None
                };
                StmtKind::If { cond, then_block, else_block }
            }
            "while" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.cond()?;
                self.expect_punct(")")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            "create" | "join" | "lock" | "unlock" => {
                self.bump();
                let name = self.paren_ident()?;
                match word.as_str() {
                    "create" => StmtKind::Create(name),
                    "join" => StmtKind::Join(name),
                    "lock" => StmtKind::Lock(name),
                    _ => StmtKind::Unlock(name),
                }
            }
            _ => {
                let (target, _) = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                self.expect_punct(";")?;
                StmtKind::Assign { target, value }
            }
        };
        Ok(Stmt { kind, span })
    }

    fn expr(&mut self) -> PResult<AstExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_punct("+") {
                BinOp::Add
            } else if self.is_punct("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.term()?;
            lhs = AstExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<AstExpr> {
        let mut lhs = self.unary()?;
        while self.is_punct("*") {
            self.bump();
            let rhs = self.unary()?;
            lhs = AstExpr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstExpr> {
        if self.is_punct("-") {
            self.bump();
            return Ok(AstExpr::Neg(Box::new(self.unary()?)));
        }
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(AstExpr::Int(v))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let (n, s) = self.ident()?;
                Ok(AstExpr::Ident(n, s))
            }
            _ => self.error(&["integer", "identifier", "(", "-"]),
        }
    }

    fn cond(&mut self) -> PResult<AstCond> {
        let mut lhs = self.cond_and()?;
        while self.is_punct("||") {
            self.bump();
            let rhs = self.cond_and()?;
            lhs = AstCond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_and(&mut self) -> PResult<AstCond> {
        let mut lhs = self.cond_unary()?;
        while self.is_punct("&&") {
            self.bump();
            let rhs = self.cond_unary()?;
            lhs = AstCond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_unary(&mut self) -> PResult<AstCond> {
        if self.is_punct("!") {
            self.bump();
            return Ok(AstCond::Not(Box::new(self.cond_unary()?)));
        }
        if self.is_keyword("true") || self.is_keyword("false") {
            let b = self.is_keyword("true");
            self.bump();
            return Ok(AstCond::Bool(b));
        }
        if self.is_punct("(") {
            // `( cond )` or an arithmetic operand starting with `(`
            let save = self.pos;
            self.bump();
            if let Ok(c) = self.cond() {
                if self.is_punct(")") {
                    self.bump();
                    if !self.at_comparison_continuation() {
                        return Ok(c);
                    }
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Punct("==") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Ne,
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct(">=") => CmpOp::Ge,
            _ => return self.error(&["==", "!=", "<", "<=", ">", ">="]),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(AstCond::Cmp(op, lhs, rhs))
    }

    fn at_comparison_continuation(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Punct("==" | "!=" | "<" | "<=" | ">" | ">=" | "+" | "-" | "*")
        )
    }
}

/// Scope rules: identifiers declared before use, a name is never both
/// global and local, no duplicate declarations.
fn check_scopes(prog: &SourceProgram) -> PResult<()> {
    let mut globals = HashSet::new();
    for g in &prog.globals {
        if !globals.insert(g.name.as_str()) {
            return Err(FrontendError::Duplicate { name: g.name.clone(), span: g.span });
        }
    }
    let mut threads = HashSet::new();
    for t in &prog.threads {
        if !threads.insert(t.name.as_str()) {
            return Err(FrontendError::Duplicate { name: t.name.clone(), span: t.span });
        }
        let mut locals = BTreeSet::new();
        check_block(&t.body, &globals, &mut locals)?;
    }
    let mut none = BTreeSet::new();
    check_block(&prog.epilogue, &globals, &mut none)
}

fn check_use(
    name: &str,
    span: Span,
    globals: &HashSet<&str>,
    locals: &BTreeSet<String>,
) -> PResult<()> {
    if globals.contains(name) || locals.contains(name) {
        Ok(())
    } else {
        Err(FrontendError::Undeclared { name: name.to_string(), span })
    }
}

fn check_block(
    stmts: &[Stmt],
    globals: &HashSet<&str>,
    locals: &mut BTreeSet<String>,
) -> PResult<()> {
    let uses = |ids: Vec<(String, Span)>, locals: &BTreeSet<String>| {
        ids.into_iter().try_for_each(|(n, s)| check_use(&n, s, globals, locals))
    };
    for s in stmts {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                check_use(target, s.span, globals, locals)?;
                let mut ids = Vec::new();
                value.idents(&mut ids);
                uses(ids, locals)?;
            }
            StmtKind::Local { name, init } => {
                if let Some(e) = init {
                    let mut ids = Vec::new();
                    e.idents(&mut ids);
                    uses(ids, locals)?;
                }
                if globals.contains(name.as_str()) || !locals.insert(name.clone()) {
                    return Err(FrontendError::Duplicate { name: name.clone(), span: s.span });
                }
            }
            StmtKind::Assert(c) => {
                let mut ids = Vec::new();
                c.idents(&mut ids);
                uses(ids, locals)?;
            }
            StmtKind::If { cond, then_block, else_block } => {
                let mut ids = Vec::new();
                cond.idents(&mut ids);
                uses(ids, locals)?;
                check_block(then_block, globals, locals)?;
                if let Some(e) = else_block {
                    check_block(e, globals, locals)?;
                }
            }
            StmtKind::While { cond, body } => {
                let mut ids = Vec::new();
                cond.idents(&mut ids);
                uses(ids, locals)?;
                check_block(body, globals, locals)?;
            }
            StmtKind::Fence
            | StmtKind::Membar(_)
            | StmtKind::Create(_)
            | StmtKind::Join(_)
            | StmtKind::Lock(_)
            | StmtKind::Unlock(_) => {}
        }
    }
    Ok(())
}

/// Parses `.lit` source text into a syntax tree.
pub fn parse(text: &str) -> Result<SourceProgram, FrontendError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let prog = p.program()?;
    check_scopes(&prog)?;
    Ok(prog)
}
