//! Concrete syntax: lexer, parser and pretty-printer for `.ord` and `.afn`.

use std::fmt::Write as _;

use thiserror::Error;

pub use crate::sugar::{desugar, from_expr, SurfaceExpr};
use crate::syntax::{freshen, Expr, Name, Side, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dialect {
    Core,
    Affine,
}

impl Dialect {
    pub fn from_path(path: &str) -> Option<Dialect> {
        if path.ends_with(".ord") {
            Some(Dialect::Core)
        } else if path.ends_with(".afn") {
            Some(Dialect::Affine)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: `{keyword}` is only available in the affine dialect")]
    Dialect {
        line: usize,
        col: usize,
        keyword: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u32),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "let", "in", "fun", "match", "inl", "inr", "fst", "snd", "new", "delete", "drop", "raise",
    "move", "try", "unless", "coerce",
];

const AFFINE_ONLY: &[&str] = &["drop", "raise", "move", "try", "unless", "coerce"];

// longest first
const SYMBOLS: &[&str] = &[
    "->", "-o", "<-", "(", ")", ",", "<", ">", "{", "}", "[", "]", ":", ";", "|", "=", "*", "+",
    "&", "#",
];

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = vec![];
    let (mut i, mut line, mut col) = (0, 1, 1);
    let bump = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                bump(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '\'')
            {
                j += 1;
            }
            let word: String = chars[start..j].iter().collect();
            bump(&mut i, &mut line, &mut col, j - start);
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            };
            out.push(Token {
                tok,
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let word: String = chars[start..j].iter().collect();
            let n = word.parse::<u32>().map_err(|_| ParseError::Syntax {
                line: l0,
                col: c0,
                msg: format!("number out of range: {word}"),
            })?;
            bump(&mut i, &mut line, &mut col, j - start);
            out.push(Token {
                tok: Tok::Num(n),
                line: l0,
                col: c0,
            });
            continue;
        }
        let sym = SYMBOLS.iter().find(|s| {
            let sc: Vec<char> = s.chars().collect();
            chars[i..].starts_with(&sc)
        });
        match sym {
            Some(s) => {
                bump(&mut i, &mut line, &mut col, s.chars().count());
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: l0,
                    col: c0,
                });
            }
            None => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;
type S = SurfaceExpr;

fn bx(e: S) -> Box<S> {
    Box::new(e)
}

impl Parser {
    fn new(text: &str, dialect: Dialect) -> PResult<Parser> {
        let toks = lex(text)?;
        for t in &toks {
            if let Tok::Kw(k) = t.tok {
                if dialect == Dialect::Core && AFFINE_ONLY.contains(&k) {
                    return Err(ParseError::Dialect {
                        line: t.line,
                        col: t.col,
                        keyword: k.to_string(),
                    });
                }
            }
        }
        Ok(Parser { toks, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Kw(k) => format!("`{k}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Kw(t) if *t == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.is_kw(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn finish(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err(format!("unexpected {}", self.describe()))
        }
    }

    // types

    fn ty(&mut self) -> PResult<Type> {
        let a = self.ty_with()?;
        if self.eat_sym("-o") {
            let b = self.ty()?;
            Ok(Type::larrow(a, b))
        } else {
            Ok(a)
        }
    }

    fn ty_with(&mut self) -> PResult<Type> {
        let mut a = self.ty_sum()?;
        while self.eat_sym("&") {
            a = Type::with(a, self.ty_sum()?);
        }
        Ok(a)
    }

    fn ty_sum(&mut self) -> PResult<Type> {
        let mut a = self.ty_tensor()?;
        while self.eat_sym("+") {
            a = Type::sum(a, self.ty_tensor()?);
        }
        Ok(a)
    }

    fn ty_tensor(&mut self) -> PResult<Type> {
        let mut a = self.ty_atom()?;
        while self.eat_sym("*") {
            a = Type::tensor(a, self.ty_atom()?);
        }
        Ok(a)
    }

    fn ty_atom(&mut self) -> PResult<Type> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "R" => {
                self.pos += 1;
                Ok(Type::Res)
            }
            Tok::Num(1) => {
                self.pos += 1;
                Ok(Type::Unit)
            }
            Tok::Sym("(") => {
                self.pos += 1;
                let t = self.ty()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => self.err(format!("expected a type, found {}", self.describe())),
        }
    }

    // terms

    fn expr(&mut self) -> PResult<S> {
        let t = self.stmt()?;
        if self.eat_sym(";") {
            let u = self.expr()?;
            Ok(S::Seq(bx(t), bx(u)))
        } else {
            Ok(t)
        }
    }

    fn stmt(&mut self) -> PResult<S> {
        match self.peek() {
            Tok::Kw("let") => {
                self.pos += 1;
                let x = self.ident()?;
                let ty = if self.eat_sym(":") {
                    Some(self.ty()?)
                } else {
                    None
                };
                self.expect_sym("=")?;
                let bound = self.expr()?;
                self.expect_kw("in")?;
                let body = self.expr()?;
                Ok(S::Let {
                    x,
                    ty,
                    bound: bx(bound),
                    body: bx(body),
                })
            }
            Tok::Kw("fun") => {
                self.pos += 1;
                let (x, ty) = if self.eat_sym("(") {
                    let x = self.ident()?;
                    self.expect_sym(":")?;
                    let t = self.ty()?;
                    self.expect_sym(")")?;
                    (x, Some(t))
                } else {
                    (self.ident()?, None)
                };
                self.expect_sym("->")?;
                let body = self.expr()?;
                Ok(S::Lambda(x, ty, bx(body)))
            }
            Tok::Kw("move") => {
                self.pos += 1;
                self.expect_sym("(")?;
                let x = self.ident()?;
                self.expect_sym(",")?;
                let y = self.ident()?;
                self.expect_sym(")")?;
                self.expect_kw("in")?;
                let body = self.expr()?;
                Ok(S::MoveIn { x, y, body: bx(body) })
            }
            Tok::Kw("try") => {
                self.pos += 1;
                let x = self.ident()?;
                self.expect_sym("<-")?;
                let bound = self.expr()?;
                self.expect_kw("in")?;
                let body = self.expr()?;
                self.expect_kw("unless")?;
                let exc = self.ident()?;
                self.expect_sym("->")?;
                let handler = self.expr()?;
                Ok(S::TryIn {
                    x,
                    bound: bx(bound),
                    body: bx(body),
                    exc,
                    handler: bx(handler),
                })
            }
            _ => {
                let a = self.app()?;
                if self.eat_sym(":") {
                    let t = self.ty()?;
                    Ok(S::Ascribe(bx(a), t))
                } else {
                    Ok(a)
                }
            }
        }
    }

    fn starts_operand(&self) -> bool {
        match self.peek() {
            Tok::Ident(_) => true,
            Tok::Kw(k) => matches!(
                *k,
                "new" | "delete" | "drop" | "raise" | "match" | "inl" | "inr" | "fst" | "snd"
                    | "coerce"
            ),
            Tok::Sym(s) => matches!(*s, "(" | "<" | "[" | "#"),
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<S> {
        let mut f = self.prefix()?;
        while self.starts_operand() {
            if matches!(self.peek(), Tok::Kw("inl" | "inr" | "fst" | "snd" | "coerce")) {
                return self.err("prefix form used as an argument needs parentheses");
            }
            let a = self.atom()?;
            f = S::App(bx(f), bx(a));
        }
        Ok(f)
    }

    fn prefix(&mut self) -> PResult<S> {
        let build: Option<fn(Box<S>) -> S> = match self.peek() {
            Tok::Kw("inl") => Some(|e| S::Inj(Side::L, e)),
            Tok::Kw("inr") => Some(|e| S::Inj(Side::R, e)),
            Tok::Kw("fst") => Some(|e| S::Proj(Side::L, e)),
            Tok::Kw("snd") => Some(|e| S::Proj(Side::R, e)),
            Tok::Kw("coerce") => Some(S::Coerce),
            _ => None,
        };
        match build {
            Some(b) => {
                self.pos += 1;
                let e = self.prefix()?;
                Ok(b(bx(e)))
            }
            None => self.atom(),
        }
    }

    fn atom(&mut self) -> PResult<S> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.pos += 1;
                Ok(S::Var(x))
            }
            Tok::Sym("#") => {
                self.pos += 1;
                match *self.peek() {
                    Tok::Num(n) => {
                        self.pos += 1;
                        Ok(S::ResLit(n))
                    }
                    _ => self.err("expected a resource index after `#`"),
                }
            }
            Tok::Kw("new") => {
                self.pos += 1;
                Ok(S::New)
            }
            Tok::Kw("delete") => {
                self.pos += 1;
                Ok(S::Delete)
            }
            Tok::Kw("drop") => {
                self.pos += 1;
                Ok(S::Drop)
            }
            Tok::Kw("raise") => {
                self.pos += 1;
                Ok(S::Raise)
            }
            Tok::Sym("(") => {
                self.pos += 1;
                if self.eat_sym(")") {
                    return Ok(S::Unit);
                }
                let a = self.expr()?;
                if self.eat_sym(",") {
                    let b = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(S::Pair(bx(a), bx(b)))
                } else {
                    self.expect_sym(")")?;
                    Ok(a)
                }
            }
            Tok::Sym("<") => {
                self.pos += 1;
                let a = self.expr()?;
                self.expect_sym(",")?;
                let b = self.expr()?;
                self.expect_sym(">")?;
                Ok(S::LazyPair(bx(a), bx(b)))
            }
            Tok::Sym("[") => {
                self.pos += 1;
                let a = self.expr()?;
                self.expect_sym("]")?;
                Ok(S::Keep(bx(a)))
            }
            Tok::Kw("match") => {
                self.pos += 1;
                let scrut = bx(self.expr()?);
                self.expect_sym("{")?;
                let r = if self.is_sym("(") && *self.peek_at(1) == Tok::Sym(")") {
                    self.pos += 2;
                    self.expect_sym("->")?;
                    let body = bx(self.expr()?);
                    S::MatchUnit { scrut, body }
                } else if self.eat_sym("(") {
                    let x = self.ident()?;
                    self.expect_sym(",")?;
                    let y = self.ident()?;
                    self.expect_sym(")")?;
                    self.expect_sym("->")?;
                    let body = bx(self.expr()?);
                    S::MatchPair { scrut, x, y, body }
                } else if self.is_kw("inl") {
                    self.pos += 1;
                    let x1 = self.ident()?;
                    self.expect_sym("->")?;
                    let body1 = bx(self.expr()?);
                    self.expect_sym("|")?;
                    self.expect_kw("inr")?;
                    let x2 = self.ident()?;
                    self.expect_sym("->")?;
                    let body2 = bx(self.expr()?);
                    S::MatchSum {
                        scrut,
                        x1,
                        body1,
                        x2,
                        body2,
                    }
                } else {
                    return self.err(format!("expected a match arm, found {}", self.describe()));
                };
                self.expect_sym("}")?;
                Ok(r)
            }
            _ => self.err(format!("expected an expression, found {}", self.describe())),
        }
    }
}

pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new(text, Dialect::Core)?;
    let t = p.ty()?;
    p.finish()?;
    Ok(t)
}

/// Parses a program without desugaring.
pub fn parse_surface(text: &str, dialect: Dialect) -> Result<SurfaceExpr, ParseError> {
    let mut p = Parser::new(text, dialect)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses, desugars and alpha-freshens a program.
pub fn parse_program(text: &str, dialect: Dialect) -> Result<Expr, ParseError> {
    let s = parse_surface(text, dialect)?;
    Ok(freshen(&desugar(&s)))
}

// printing

const SEQ: u8 = 0;
const STMT: u8 = 1;
const APP: u8 = 2;
const PRE: u8 = 3;
const ATOM: u8 = 4;

fn level(e: &S) -> u8 {
    match e {
        S::Seq(..) => SEQ,
        S::Let { .. } | S::Lambda(..) | S::MoveIn { .. } | S::TryIn { .. } => STMT,
        S::App(..) => APP,
        S::Inj(..) | S::Proj(..) | S::Coerce(_) => PRE,
        _ => ATOM,
    }
}

fn print_at(out: &mut String, e: &S, min: u8) {
    if level(e) < min {
        out.push('(');
        print_s(out, e);
        out.push(')');
    } else {
        print_s(out, e);
    }
}

fn print_s(out: &mut String, e: &S) {
    match e {
        S::Var(x) => out.push_str(x),
        S::ResLit(n) => {
            let _ = write!(out, "#{n}");
        }
        S::Unit => out.push_str("()"),
        S::New => out.push_str("new"),
        S::Delete => out.push_str("delete"),
        S::Drop => out.push_str("drop"),
        S::Raise => out.push_str("raise"),
        S::Keep(a) => {
            out.push('[');
            print_s(out, a);
            out.push(']');
        }
        S::Pair(a, b) => {
            out.push('(');
            print_s(out, a);
            out.push_str(", ");
            print_s(out, b);
            out.push(')');
        }
        S::LazyPair(a, b) => {
            out.push('<');
            print_s(out, a);
            out.push_str(", ");
            print_s(out, b);
            out.push('>');
        }
        S::Inj(i, a) | S::Proj(i, a) => {
            let kw = match (e, i) {
                (S::Inj(..), Side::L) => "inl ",
                (S::Inj(..), Side::R) => "inr ",
                (_, Side::L) => "fst ",
                (_, Side::R) => "snd ",
            };
            out.push_str(kw);
            print_at(out, a, PRE);
        }
        S::Coerce(a) => {
            out.push_str("coerce ");
            print_at(out, a, PRE);
        }
        S::App(f, a) => {
            print_at(out, f, APP);
            out.push(' ');
            print_at(out, a, ATOM);
        }
        S::Ascribe(a, t) => {
            out.push('(');
            print_at(out, a, APP);
            let _ = write!(out, " : {t})");
        }
        S::Lambda(x, t, b) => {
            match t {
                Some(t) => {
                    let _ = write!(out, "fun ({x} : {t}) -> ");
                }
                None => {
                    let _ = write!(out, "fun {x} -> ");
                }
            }
            print_s(out, b);
        }
        S::Let { x, ty, bound, body } => {
            match ty {
                Some(t) => {
                    let _ = write!(out, "let {x} : {t} = ");
                }
                None => {
                    let _ = write!(out, "let {x} = ");
                }
            }
            print_s(out, bound);
            out.push_str(" in ");
            print_s(out, body);
        }
        S::Seq(t, u) => {
            print_at(out, t, STMT);
            out.push_str("; ");
            print_s(out, u);
        }
        S::MatchPair { scrut, x, y, body } => {
            out.push_str("match ");
            print_s(out, scrut);
            let _ = write!(out, " {{ ({x}, {y}) -> ");
            print_s(out, body);
            out.push_str(" }");
        }
        S::MatchUnit { scrut, body } => {
            out.push_str("match ");
            print_s(out, scrut);
            out.push_str(" { () -> ");
            print_s(out, body);
            out.push_str(" }");
        }
        S::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
        } => {
            out.push_str("match ");
            print_s(out, scrut);
            let _ = write!(out, " {{ inl {x1} -> ");
            print_s(out, body1);
            let _ = write!(out, " | inr {x2} -> ");
            print_s(out, body2);
            out.push_str(" }");
        }
        S::MoveIn { x, y, body } => {
            let _ = write!(out, "move ({x}, {y}) in ");
            print_s(out, body);
        }
        S::TryIn {
            x,
            bound,
            body,
            exc,
            handler,
        } => {
            let _ = write!(out, "try {x} <- ");
            print_s(out, bound);
            out.push_str(" in ");
            print_s(out, body);
            let _ = write!(out, " unless {exc} -> ");
            print_s(out, handler);
        }
    }
}

pub fn print_surface(e: &SurfaceExpr) -> String {
    let mut out = String::new();
    print_s(&mut out, e);
    out
}

/// Prints a core term; polarity annotations are not part of the concrete
/// syntax and are dropped.
pub fn pretty_print(e: &Expr) -> String {
    print_surface(&from_expr(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, erase_polarities};

    #[test]
    fn types_parse_with_precedence() {
        assert_eq!(
            parse_type("R -o 1").unwrap(),
            Type::larrow(Type::Res, Type::Unit)
        );
        assert_eq!(
            parse_type("1 * 1 + 1").unwrap(),
            Type::sum(Type::tensor(Type::Unit, Type::Unit), Type::Unit)
        );
        assert_eq!(
            parse_type("R + 1").unwrap(),
            Type::sum(Type::Res, Type::Unit)
        );
        assert_eq!(
            parse_type("R -o R -o 1").unwrap(),
            Type::larrow(Type::Res, Type::larrow(Type::Res, Type::Unit))
        );
        assert_eq!(
            parse_type("1 & R + 1 -o 1").unwrap(),
            Type::larrow(
                Type::with(Type::Unit, Type::sum(Type::Res, Type::Unit)),
                Type::Unit
            )
        );
    }

    #[test]
    fn type_errors_carry_positions() {
        match parse_type("R -o\n  *") {
            Err(ParseError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn let_chain_parses() {
        let e = parse_program("let r = new () in delete r", Dialect::Core).unwrap();
        let expect = Expr::let_(
            "r",
            None,
            Expr::app(Expr::NewConst, Expr::UnitVal),
            Expr::app(Expr::DeleteConst, Expr::var("r")),
        );
        assert!(alpha_eq(&e, &expect));
    }

    #[test]
    fn affine_keywords_are_gated() {
        assert!(matches!(
            parse_program("drop x", Dialect::Core),
            Err(ParseError::Dialect { .. })
        ));
        let src = "let r = new () in let s = new () in let t = new () in drop t; drop s; drop r";
        assert!(parse_program(src, Dialect::Affine).is_ok());
    }

    #[test]
    fn simple_prints() {
        assert_eq!(pretty_print(&Expr::UnitVal), "()");
        assert_eq!(
            pretty_print(&Expr::lam("x", None, Expr::var("x"))),
            "fun x -> x"
        );
    }

    #[test]
    fn comments_are_skipped() {
        let e = parse_program("-- a comment\n() -- trailing", Dialect::Core).unwrap();
        assert_eq!(e, Expr::UnitVal);
    }

    #[test]
    fn match_forms() {
        let src = "match new () { inl r -> delete r | inr i -> i }";
        let e = parse_program(src, Dialect::Core).unwrap();
        assert!(matches!(e, Expr::Let { .. }));
        let src = "fun p -> match p { (a, b) -> match a { () -> b } }";
        let e = parse_program(src, Dialect::Core).unwrap();
        assert!(matches!(e, Expr::Lambda(..)));
    }

    #[test]
    fn round_trip_samples() {
        let samples = [
            "let r = new () in delete r",
            "fun (x : R) -> delete x",
            "<fun x -> x, ()>",
            "fst <(), ()>",
            "match new () { inl r -> delete r; () | inr i -> i }",
            "(fun (x : 1) -> x : 1 -o 1) ()",
            "([fst p], inl [snd q])",
            "let f : R -o 1 = fun x -> delete x in f",
            "fun x -> fun y -> (y, x)",
            "#3",
        ];
        for s in samples {
            let e = parse_program(s, Dialect::Core).unwrap();
            let printed = pretty_print(&e);
            let e2 = parse_program(&printed, Dialect::Core)
                .unwrap_or_else(|err| panic!("{s} printed as {printed}: {err}"));
            assert!(
                alpha_eq(&erase_polarities(&e), &e2),
                "{s} -> {printed} -> {e2:?}"
            );
        }
    }

    #[test]
    fn affine_round_trip() {
        let src = "fun x -> fun y -> move (x, y) in try z <- drop x in drop y unless e -> raise e";
        let e = parse_program(src, Dialect::Affine).unwrap();
        let printed = pretty_print(&e);
        let e2 = parse_program(&printed, Dialect::Affine).unwrap();
        assert!(alpha_eq(&e, &e2), "{printed}");
    }

    #[test]
    fn binders_are_freshened() {
        let e = parse_program("(fun x -> x, fun x -> x)", Dialect::Core).unwrap();
        let mut names = vec![];
        e.visit(&mut |n| {
            if let Expr::Lambda(x, _, _) = n {
                names.push(x.clone())
            }
        });
        assert_eq!(names.len(), 2);
        assert_ne!(names[0], names[1]);
    }
}
