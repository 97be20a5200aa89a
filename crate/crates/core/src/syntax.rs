//! Types, terms and the syntactic operations shared by every other module.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

pub type Name = String;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    /// The atomic resource type `R`.
    Res,
    /// `1`
    Unit,
    /// `A * B`
    Tensor(Box<Type>, Box<Type>),
    /// `A + B`
    Sum(Box<Type>, Box<Type>),
    /// `A -o B`, binding the leftmost variable of the context.
    LArrow(Box<Type>, Box<Type>),
    /// `A & B`
    With(Box<Type>, Box<Type>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Pos,
    Neg,
}

/// Index of an injection, projection or sum branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    L,
    R,
}

impl Side {
    pub fn index(self) -> u8 {
        match self {
            Side::L => 1,
            Side::R => 2,
        }
    }
}

impl Type {
    pub fn tensor(a: Type, b: Type) -> Type {
        Type::Tensor(Box::new(a), Box::new(b))
    }
    pub fn sum(a: Type, b: Type) -> Type {
        Type::Sum(Box::new(a), Box::new(b))
    }
    pub fn larrow(a: Type, b: Type) -> Type {
        Type::LArrow(Box::new(a), Box::new(b))
    }
    pub fn with(a: Type, b: Type) -> Type {
        Type::With(Box::new(a), Box::new(b))
    }

    pub fn polarity(&self) -> Polarity {
        polarity(self)
    }

    pub fn size(&self) -> usize {
        match self {
            Type::Res | Type::Unit => 1,
            Type::Tensor(a, b) | Type::Sum(a, b) | Type::LArrow(a, b) | Type::With(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

pub fn polarity(t: &Type) -> Polarity {
    match t {
        Type::Res | Type::Unit | Type::Tensor(..) | Type::Sum(..) => Polarity::Pos,
        Type::LArrow(..) | Type::With(..) => Polarity::Neg,
    }
}

/// True iff `t` is generated by `W ::= 1 | W * W | W + W`.
pub fn is_central(t: &Type) -> bool {
    match t {
        Type::Unit => true,
        Type::Tensor(a, b) | Type::Sum(a, b) => is_central(a) && is_central(b),
        _ => false,
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Pos => write!(f, "+"),
            Polarity::Neg => write!(f, "-"),
        }
    }
}

fn type_level(t: &Type) -> u8 {
    match t {
        Type::LArrow(..) => 0,
        Type::With(..) => 1,
        Type::Sum(..) => 2,
        Type::Tensor(..) => 3,
        Type::Res | Type::Unit => 4,
    }
}

fn write_type(f: &mut fmt::Formatter<'_>, t: &Type, min: u8) -> fmt::Result {
    let lvl = type_level(t);
    if lvl < min {
        write!(f, "(")?;
    }
    match t {
        Type::Res => write!(f, "R")?,
        Type::Unit => write!(f, "1")?,
        Type::LArrow(a, b) => {
            write_type(f, a, 1)?;
            write!(f, " -o ")?;
            write_type(f, b, 0)?;
        }
        Type::With(a, b) | Type::Sum(a, b) | Type::Tensor(a, b) => {
            let op = match t {
                Type::With(..) => "&",
                Type::Sum(..) => "+",
                _ => "*",
            };
            write_type(f, a, lvl)?;
            write!(f, " {op} ")?;
            write_type(f, b, lvl + 1)?;
        }
    }
    if lvl < min {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_type(f, self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(Name),
    /// Runtime resource `r_n`; never written in source programs.
    ResLit(u32),
    UnitVal,
    Pair(Box<Expr>, Box<Expr>),
    Inj(Side, Box<Expr>),
    Lambda(Name, Option<Type>, Box<Expr>),
    LazyPair(Box<Expr>, Box<Expr>),
    NewConst,
    DeleteConst,
    /// `(let x^bind = bound in body)^ann`. `bind = Pos` is the
    /// positive let (any expression bound), `bind = Neg` binds a value.
    Let {
        x: Name,
        ty: Option<Type>,
        bound: Box<Expr>,
        body: Box<Expr>,
        bind: Option<Polarity>,
        ann: Option<Polarity>,
    },
    MatchPair {
        scrut: Box<Expr>,
        x: Name,
        y: Name,
        body: Box<Expr>,
        ann: Option<Polarity>,
    },
    MatchUnit {
        scrut: Box<Expr>,
        body: Box<Expr>,
        ann: Option<Polarity>,
    },
    MatchSum {
        scrut: Box<Expr>,
        x1: Name,
        body1: Box<Expr>,
        x2: Name,
        body2: Box<Expr>,
        ann: Option<Polarity>,
    },
    App {
        fun: Box<Expr>,
        arg: Box<Expr>,
        ann: Option<Polarity>,
    },
    Proj(Side, Box<Expr>, Option<Polarity>),
    /// Type ascription `(t : A)`; computationally inert.
    Ascribe(Box<Expr>, Type),
    DropConst,
    RaiseConst,
    MoveIn {
        x: Name,
        y: Name,
        body: Box<Expr>,
    },
    TryIn {
        x: Name,
        bound: Box<Expr>,
        body: Box<Expr>,
        exc: Name,
        handler: Box<Expr>,
    },
    Coerce(Box<Expr>),
}

/// An ordered typing context.
pub type Context = Vec<(Name, Type)>;

impl Expr {
    pub fn var(x: &str) -> Expr {
        Expr::Var(x.to_string())
    }
    pub fn pair(a: Expr, b: Expr) -> Expr {
        Expr::Pair(Box::new(a), Box::new(b))
    }
    pub fn inj(side: Side, a: Expr) -> Expr {
        Expr::Inj(side, Box::new(a))
    }
    pub fn lam(x: &str, ty: Option<Type>, body: Expr) -> Expr {
        Expr::Lambda(x.to_string(), ty, Box::new(body))
    }
    pub fn lazy(a: Expr, b: Expr) -> Expr {
        Expr::LazyPair(Box::new(a), Box::new(b))
    }
    pub fn let_(x: &str, ty: Option<Type>, bound: Expr, body: Expr) -> Expr {
        Expr::Let {
            x: x.to_string(),
            ty,
            bound: Box::new(bound),
            body: Box::new(body),
            bind: None,
            ann: None,
        }
    }
    pub fn match_pair(scrut: Expr, x: &str, y: &str, body: Expr) -> Expr {
        Expr::MatchPair {
            scrut: Box::new(scrut),
            x: x.to_string(),
            y: y.to_string(),
            body: Box::new(body),
            ann: None,
        }
    }
    pub fn match_unit(scrut: Expr, body: Expr) -> Expr {
        Expr::MatchUnit {
            scrut: Box::new(scrut),
            body: Box::new(body),
            ann: None,
        }
    }
    pub fn match_sum(scrut: Expr, x1: &str, body1: Expr, x2: &str, body2: Expr) -> Expr {
        Expr::MatchSum {
            scrut: Box::new(scrut),
            x1: x1.to_string(),
            body1: Box::new(body1),
            x2: x2.to_string(),
            body2: Box::new(body2),
            ann: None,
        }
    }
    pub fn app(fun: Expr, arg: Expr) -> Expr {
        Expr::App {
            fun: Box::new(fun),
            arg: Box::new(arg),
            ann: None,
        }
    }
    pub fn proj(side: Side, v: Expr) -> Expr {
        Expr::Proj(side, Box::new(v), None)
    }
    pub fn ascribe(e: Expr, ty: Type) -> Expr {
        Expr::Ascribe(Box::new(e), ty)
    }
    /// `t; u` as `let x = t in match x { () -> u }`.
    pub fn seq(t: Expr, u: Expr) -> Expr {
        let x = fresh_name("u");
        Expr::let_(&x, None, t, Expr::match_unit(Expr::Var(x.clone()), u))
    }

    /// Outer polarity annotation of an eliminator or let, if any.
    pub fn annotation(&self) -> Option<Polarity> {
        match self {
            Expr::Let { ann, .. }
            | Expr::MatchPair { ann, .. }
            | Expr::MatchUnit { ann, .. }
            | Expr::MatchSum { ann, .. }
            | Expr::App { ann, .. }
            | Expr::Proj(_, _, ann) => *ann,
            _ => None,
        }
    }

    /// Strips ascriptions at the root.
    pub fn peel(&self) -> &Expr {
        let mut e = self;
        while let Expr::Ascribe(inner, _) = e {
            e = inner;
        }
        e
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Pre-order traversal of every node.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_)
            | Expr::ResLit(_)
            | Expr::UnitVal
            | Expr::NewConst
            | Expr::DeleteConst
            | Expr::DropConst
            | Expr::RaiseConst => vec![],
            Expr::Pair(a, b) | Expr::LazyPair(a, b) => vec![a, b],
            Expr::Inj(_, a) | Expr::Proj(_, a, _) | Expr::Ascribe(a, _) | Expr::Coerce(a) => vec![a],
            Expr::Lambda(_, _, b) => vec![b],
            Expr::Let { bound, body, .. } => vec![bound, body],
            Expr::MatchPair { scrut, body, .. } | Expr::MatchUnit { scrut, body, .. } => {
                vec![scrut, body]
            }
            Expr::MatchSum {
                scrut, body1, body2, ..
            } => vec![scrut, body1, body2],
            Expr::App { fun, arg, .. } => vec![fun, arg],
            Expr::MoveIn { body, .. } => vec![body],
            Expr::TryIn {
                bound,
                body,
                handler,
                ..
            } => vec![bound, body, handler],
        }
    }

    pub fn is_affine_only(&self) -> bool {
        matches!(
            self,
            Expr::DropConst
                | Expr::RaiseConst
                | Expr::MoveIn { .. }
                | Expr::TryIn { .. }
                | Expr::Coerce(_)
        )
    }

    pub fn contains(&self, pred: &impl Fn(&Expr) -> bool) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= pred(e));
        found
    }

    pub fn mentions_affine(&self) -> bool {
        self.contains(&|e| e.is_affine_only())
    }

    pub fn resources(&self) -> Vec<u32> {
        let mut out = vec![];
        self.visit(&mut |e| {
            if let Expr::ResLit(n) = e {
                out.push(*n)
            }
        });
        out
    }
}

static FRESH: AtomicU64 = AtomicU64::new(0);

/// A name that cannot clash with any parsed identifier: parsed names never
/// contain a quote followed only by digits unless produced here.
pub fn fresh_name(base: &str) -> Name {
    let stem = match base.find('\'') {
        Some(i) => &base[..i],
        None => base,
    };
    let stem = if stem.is_empty() { "v" } else { stem };
    let n = FRESH.fetch_add(1, Ordering::Relaxed);
    format!("{stem}'{n}")
}

/// Free variables in left-to-right textual order; duplicates are kept.
pub fn free_var_sequence(e: &Expr) -> Vec<Name> {
    let mut out = vec![];
    let mut bound: Vec<Name> = vec![];
    fv_walk(e, &mut bound, &mut out);
    out
}

fn fv_walk(e: &Expr, bound: &mut Vec<Name>, out: &mut Vec<Name>) {
    match e {
        Expr::Var(x) => {
            if !bound.contains(x) {
                out.push(x.clone())
            }
        }
        Expr::Lambda(x, _, b) => under(bound, &[x], |bd| fv_walk(b, bd, out)),
        Expr::Let {
            x, bound: t, body, ..
        } => {
            fv_walk(t, bound, out);
            under(bound, &[x], |bd| fv_walk(body, bd, out));
        }
        Expr::MatchPair {
            scrut, x, y, body, ..
        } => {
            fv_walk(scrut, bound, out);
            under(bound, &[x, y], |bd| fv_walk(body, bd, out));
        }
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ..
        } => {
            fv_walk(scrut, bound, out);
            under(bound, &[x1], |bd| fv_walk(body1, bd, out));
            under(bound, &[x2], |bd| fv_walk(body2, bd, out));
        }
        Expr::MoveIn { x, y, body } => {
            // move mentions x and y without consuming them
            let _ = (x, y);
            fv_walk(body, bound, out)
        }
        Expr::TryIn {
            x,
            bound: t,
            body,
            exc,
            handler,
        } => {
            fv_walk(t, bound, out);
            under(bound, &[x], |bd| fv_walk(body, bd, out));
            under(bound, &[exc], |bd| fv_walk(handler, bd, out));
        }
        _ => {
            for c in e.children() {
                fv_walk(c, bound, out)
            }
        }
    }
}

fn under(bound: &mut Vec<Name>, names: &[&Name], f: impl FnOnce(&mut Vec<Name>)) {
    let n = bound.len();
    bound.extend(names.iter().map(|s| (*s).clone()));
    f(bound);
    bound.truncate(n);
}

pub fn free_vars(e: &Expr) -> BTreeSet<Name> {
    free_var_sequence(e).into_iter().collect()
}

pub fn is_closed(e: &Expr) -> bool {
    free_var_sequence(e).is_empty()
}

/// Value predicate of the grammar: variables, resources, introductions over
/// values, and every negative-annotated eliminator or let.
pub fn is_value(e: &Expr) -> bool {
    match e {
        Expr::Var(_)
        | Expr::ResLit(_)
        | Expr::UnitVal
        | Expr::NewConst
        | Expr::DeleteConst
        | Expr::DropConst
        | Expr::RaiseConst
        | Expr::Lambda(..)
        | Expr::LazyPair(..) => true,
        Expr::Pair(a, b) => is_value(a) && is_value(b),
        Expr::Inj(_, a) | Expr::Ascribe(a, _) => is_value(a),
        Expr::Let { ann, .. }
        | Expr::MatchPair { ann, .. }
        | Expr::MatchUnit { ann, .. }
        | Expr::MatchSum { ann, .. }
        | Expr::App { ann, .. }
        | Expr::Proj(_, _, ann) => *ann == Some(Polarity::Neg),
        Expr::MoveIn { .. } | Expr::TryIn { .. } | Expr::Coerce(_) => false,
    }
}

/// Values recognisable without polarity information.
pub fn is_syntactic_value(e: &Expr) -> bool {
    match e {
        Expr::Var(_)
        | Expr::ResLit(_)
        | Expr::UnitVal
        | Expr::NewConst
        | Expr::DeleteConst
        | Expr::DropConst
        | Expr::RaiseConst
        | Expr::Lambda(..)
        | Expr::LazyPair(..) => true,
        Expr::Pair(a, b) => is_syntactic_value(a) && is_syntactic_value(b),
        Expr::Inj(_, a) | Expr::Ascribe(a, _) => is_syntactic_value(a),
        _ => false,
    }
}

/// Final values `v_t`, looking through ascriptions.
pub fn is_final_value(e: &Expr) -> bool {
    matches!(
        e.peel(),
        Expr::UnitVal
            | Expr::Pair(..)
            | Expr::Inj(..)
            | Expr::ResLit(_)
            | Expr::LazyPair(..)
            | Expr::Lambda(..)
            | Expr::NewConst
            | Expr::DeleteConst
    )
}

/// Capture-avoiding substitution `e[v/x]`.
pub fn substitute(e: &Expr, x: &str, v: &Expr) -> Expr {
    let fv = free_vars(v);
    subst(e, x, v, &fv)
}

/// Simultaneous substitution for distinct variables, as in the pair rule.
pub fn substitute2(e: &Expr, x: &str, v: &Expr, y: &str, w: &Expr) -> Expr {
    // neither x nor y occurs in the closed values the machine substitutes,
    // but open callers get sequential semantics made safe by renaming y first
    if free_vars(v).contains(y) {
        let y2 = fresh_name(y);
        let e = substitute(e, y, &Expr::Var(y2.clone()));
        let e = substitute(&e, x, v);
        substitute(&e, &y2, w)
    } else {
        let e = substitute(e, x, v);
        substitute(&e, y, w)
    }
}

fn subst(e: &Expr, x: &str, v: &Expr, fv: &BTreeSet<Name>) -> Expr {
    let s = |t: &Expr| Box::new(subst(t, x, v, fv));
    match e {
        Expr::Var(y) if y == x => v.clone(),
        Expr::Var(_)
        | Expr::ResLit(_)
        | Expr::UnitVal
        | Expr::NewConst
        | Expr::DeleteConst
        | Expr::DropConst
        | Expr::RaiseConst => e.clone(),
        Expr::Pair(a, b) => Expr::Pair(s(a), s(b)),
        Expr::LazyPair(a, b) => Expr::LazyPair(s(a), s(b)),
        Expr::Inj(i, a) => Expr::Inj(*i, s(a)),
        Expr::Proj(i, a, p) => Expr::Proj(*i, s(a), *p),
        Expr::Ascribe(a, t) => Expr::Ascribe(s(a), t.clone()),
        Expr::Coerce(a) => Expr::Coerce(s(a)),
        Expr::App { fun, arg, ann } => Expr::App {
            fun: s(fun),
            arg: s(arg),
            ann: *ann,
        },
        Expr::Lambda(y, t, b) => {
            let (y, b) = bind1(y, b, x, v, fv);
            Expr::Lambda(y, t.clone(), Box::new(b))
        }
        Expr::Let {
            x: y,
            ty,
            bound,
            body,
            bind,
            ann,
        } => {
            let (y, body) = bind1(y, body, x, v, fv);
            Expr::Let {
                x: y,
                ty: ty.clone(),
                bound: s(bound),
                body: Box::new(body),
                bind: *bind,
                ann: *ann,
            }
        }
        Expr::MatchPair {
            scrut,
            x: a,
            y: b,
            body,
            ann,
        } => {
            let (names, body) = bind_many(&[a, b], body, x, v, fv);
            Expr::MatchPair {
                scrut: s(scrut),
                x: names[0].clone(),
                y: names[1].clone(),
                body: Box::new(body),
                ann: *ann,
            }
        }
        Expr::MatchUnit { scrut, body, ann } => Expr::MatchUnit {
            scrut: s(scrut),
            body: s(body),
            ann: *ann,
        },
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ann,
        } => {
            let (x1, body1) = bind1(x1, body1, x, v, fv);
            let (x2, body2) = bind1(x2, body2, x, v, fv);
            Expr::MatchSum {
                scrut: s(scrut),
                x1,
                body1: Box::new(body1),
                x2,
                body2: Box::new(body2),
                ann: *ann,
            }
        }
        Expr::MoveIn { x: a, y: b, body } => {
            let rename = |n: &Name| -> Name {
                if n == x {
                    match v {
                        Expr::Var(z) => z.clone(),
                        _ => n.clone(),
                    }
                } else {
                    n.clone()
                }
            };
            Expr::MoveIn {
                x: rename(a),
                y: rename(b),
                body: s(body),
            }
        }
        Expr::TryIn {
            x: a,
            bound,
            body,
            exc,
            handler,
        } => {
            let (a, body) = bind1(a, body, x, v, fv);
            let (exc, handler) = bind1(exc, handler, x, v, fv);
            Expr::TryIn {
                x: a,
                bound: s(bound),
                body: Box::new(body),
                exc,
                handler: Box::new(handler),
            }
        }
    }
}

fn bind1(y: &Name, body: &Expr, x: &str, v: &Expr, fv: &BTreeSet<Name>) -> (Name, Expr) {
    let (names, body) = bind_many(&[y], body, x, v, fv);
    (names.into_iter().next().unwrap(), body)
}

fn bind_many(
    ys: &[&Name],
    body: &Expr,
    x: &str,
    v: &Expr,
    fv: &BTreeSet<Name>,
) -> (Vec<Name>, Expr) {
    if ys.iter().any(|y| y.as_str() == x) {
        return (ys.iter().map(|y| (*y).clone()).collect(), body.clone());
    }
    let mut body = body.clone();
    let mut names = vec![];
    for y in ys {
        if fv.contains(*y) {
            let y2 = fresh_name(y);
            body = substitute(&body, y, &Expr::Var(y2.clone()));
            names.push(y2);
        } else {
            names.push((*y).clone());
        }
    }
    (names, subst(&body, x, v, fv))
}

/// Alpha-equivalence, comparing annotations and ascriptions exactly.
pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    let mut env = vec![];
    aeq(a, b, &mut env)
}

fn lookup<'a>(env: &'a [(Name, Name)], x: &str, left: bool) -> Option<&'a Name> {
    env.iter().rev().find_map(|(l, r)| {
        if left && l == x {
            Some(r)
        } else if !left && r == x {
            Some(l)
        } else {
            None
        }
    })
}

fn aeq_var(x: &str, y: &str, env: &[(Name, Name)]) -> bool {
    match (lookup(env, x, true), lookup(env, y, false)) {
        (Some(r), Some(l)) => r == y && l == x,
        (None, None) => x == y,
        _ => false,
    }
}

fn aeq_bind(
    pairs: &[(&Name, &Name)],
    a: &Expr,
    b: &Expr,
    env: &mut Vec<(Name, Name)>,
) -> bool {
    let n = env.len();
    for (x, y) in pairs {
        env.push(((*x).clone(), (*y).clone()));
    }
    let r = aeq(a, b, env);
    env.truncate(n);
    r
}

fn aeq(a: &Expr, b: &Expr, env: &mut Vec<(Name, Name)>) -> bool {
    use Expr::*;
    match (a, b) {
        (Var(x), Var(y)) => aeq_var(x, y, env),
        (ResLit(m), ResLit(n)) => m == n,
        (UnitVal, UnitVal)
        | (NewConst, NewConst)
        | (DeleteConst, DeleteConst)
        | (DropConst, DropConst)
        | (RaiseConst, RaiseConst) => true,
        (Pair(a1, a2), Pair(b1, b2)) | (LazyPair(a1, a2), LazyPair(b1, b2)) => {
            aeq(a1, b1, env) && aeq(a2, b2, env)
        }
        (Inj(i, a), Inj(j, b)) => i == j && aeq(a, b, env),
        (Proj(i, a, p), Proj(j, b, q)) => i == j && p == q && aeq(a, b, env),
        (Ascribe(a, s), Ascribe(b, t)) => s == t && aeq(a, b, env),
        (Coerce(a), Coerce(b)) => aeq(a, b, env),
        (Lambda(x, s, a), Lambda(y, t, b)) => s == t && aeq_bind(&[(x, y)], a, b, env),
        (
            App {
                fun: f1,
                arg: a1,
                ann: p,
            },
            App {
                fun: f2,
                arg: a2,
                ann: q,
            },
        ) => p == q && aeq(f1, f2, env) && aeq(a1, a2, env),
        (
            Let {
                x,
                ty: s,
                bound: t1,
                body: u1,
                bind: b1,
                ann: p,
            },
            Let {
                x: y,
                ty: t,
                bound: t2,
                body: u2,
                bind: b2,
                ann: q,
            },
        ) => {
            s == t && b1 == b2 && p == q && aeq(t1, t2, env) && aeq_bind(&[(x, y)], u1, u2, env)
        }
        (
            MatchPair {
                scrut: s1,
                x: x1,
                y: y1,
                body: b1,
                ann: p,
            },
            MatchPair {
                scrut: s2,
                x: x2,
                y: y2,
                body: b2,
                ann: q,
            },
        ) => p == q && aeq(s1, s2, env) && aeq_bind(&[(x1, x2), (y1, y2)], b1, b2, env),
        (
            MatchUnit {
                scrut: s1,
                body: b1,
                ann: p,
            },
            MatchUnit {
                scrut: s2,
                body: b2,
                ann: q,
            },
        ) => p == q && aeq(s1, s2, env) && aeq(b1, b2, env),
        (
            MatchSum {
                scrut: s1,
                x1: a1,
                body1: c1,
                x2: a2,
                body2: d1,
                ann: p,
            },
            MatchSum {
                scrut: s2,
                x1: b1,
                body1: c2,
                x2: b2,
                body2: d2,
                ann: q,
            },
        ) => {
            p == q
                && aeq(s1, s2, env)
                && aeq_bind(&[(a1, b1)], c1, c2, env)
                && aeq_bind(&[(a2, b2)], d1, d2, env)
        }
        (
            MoveIn {
                x: x1,
                y: y1,
                body: b1,
            },
            MoveIn {
                x: x2,
                y: y2,
                body: b2,
            },
        ) => aeq_var(x1, x2, env) && aeq_var(y1, y2, env) && aeq(b1, b2, env),
        (
            TryIn {
                x: x1,
                bound: t1,
                body: u1,
                exc: e1,
                handler: h1,
            },
            TryIn {
                x: x2,
                bound: t2,
                body: u2,
                exc: e2,
                handler: h2,
            },
        ) => {
            aeq(t1, t2, env)
                && aeq_bind(&[(x1, x2)], u1, u2, env)
                && aeq_bind(&[(e1, e2)], h1, h2, env)
        }
        _ => false,
    }
}

/// Removes every polarity annotation.
pub fn erase_polarities(e: &Expr) -> Expr {
    map_expr(e, &|e| match e {
        Expr::Let {
            x,
            ty,
            bound,
            body,
            ..
        } => Some(Expr::Let {
            x: x.clone(),
            ty: ty.clone(),
            bound: Box::new(erase_polarities(bound)),
            body: Box::new(erase_polarities(body)),
            bind: None,
            ann: None,
        }),
        _ => None,
    })
    .with_annotations_cleared()
}

/// Removes ascriptions, binder types, let types and polarity annotations.
pub fn erase_all(e: &Expr) -> Expr {
    let e = erase_polarities(e);
    strip_types(&e)
}

fn strip_types(e: &Expr) -> Expr {
    match e {
        Expr::Ascribe(a, _) => strip_types(a),
        Expr::Lambda(x, _, b) => Expr::Lambda(x.clone(), None, Box::new(strip_types(b))),
        Expr::Let {
            x,
            bound,
            body,
            bind,
            ann,
            ..
        } => Expr::Let {
            x: x.clone(),
            ty: None,
            bound: Box::new(strip_types(bound)),
            body: Box::new(strip_types(body)),
            bind: *bind,
            ann: *ann,
        },
        _ => map_children(e, &strip_types),
    }
}

impl Expr {
    fn with_annotations_cleared(self) -> Expr {
        clear_ann(&self)
    }
}

fn clear_ann(e: &Expr) -> Expr {
    let mut out = map_children(e, &clear_ann);
    match &mut out {
        Expr::Let { bind, ann, .. } => {
            *bind = None;
            *ann = None;
        }
        Expr::MatchPair { ann, .. }
        | Expr::MatchUnit { ann, .. }
        | Expr::MatchSum { ann, .. }
        | Expr::App { ann, .. }
        | Expr::Proj(_, _, ann) => *ann = None,
        _ => {}
    }
    out
}

fn map_expr(e: &Expr, f: &impl Fn(&Expr) -> Option<Expr>) -> Expr {
    match f(e) {
        Some(r) => r,
        None => map_children(e, &|c| map_expr(c, f)),
    }
}

/// Rebuilds `e` with `f` applied to each immediate child.
pub fn map_children(e: &Expr, f: &impl Fn(&Expr) -> Expr) -> Expr {
    let b = |t: &Expr| Box::new(f(t));
    match e {
        Expr::Var(_)
        | Expr::ResLit(_)
        | Expr::UnitVal
        | Expr::NewConst
        | Expr::DeleteConst
        | Expr::DropConst
        | Expr::RaiseConst => e.clone(),
        Expr::Pair(x, y) => Expr::Pair(b(x), b(y)),
        Expr::LazyPair(x, y) => Expr::LazyPair(b(x), b(y)),
        Expr::Inj(i, x) => Expr::Inj(*i, b(x)),
        Expr::Proj(i, x, p) => Expr::Proj(*i, b(x), *p),
        Expr::Ascribe(x, t) => Expr::Ascribe(b(x), t.clone()),
        Expr::Coerce(x) => Expr::Coerce(b(x)),
        Expr::Lambda(x, t, body) => Expr::Lambda(x.clone(), t.clone(), b(body)),
        Expr::Let {
            x,
            ty,
            bound,
            body,
            bind,
            ann,
        } => Expr::Let {
            x: x.clone(),
            ty: ty.clone(),
            bound: b(bound),
            body: b(body),
            bind: *bind,
            ann: *ann,
        },
        Expr::MatchPair {
            scrut,
            x,
            y,
            body,
            ann,
        } => Expr::MatchPair {
            scrut: b(scrut),
            x: x.clone(),
            y: y.clone(),
            body: b(body),
            ann: *ann,
        },
        Expr::MatchUnit { scrut, body, ann } => Expr::MatchUnit {
            scrut: b(scrut),
            body: b(body),
            ann: *ann,
        },
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ann,
        } => Expr::MatchSum {
            scrut: b(scrut),
            x1: x1.clone(),
            body1: b(body1),
            x2: x2.clone(),
            body2: b(body2),
            ann: *ann,
        },
        Expr::App { fun, arg, ann } => Expr::App {
            fun: b(fun),
            arg: b(arg),
            ann: *ann,
        },
        Expr::MoveIn { x, y, body } => Expr::MoveIn {
            x: x.clone(),
            y: y.clone(),
            body: b(body),
        },
        Expr::TryIn {
            x,
            bound,
            body,
            exc,
            handler,
        } => Expr::TryIn {
            x: x.clone(),
            bound: b(bound),
            body: b(body),
            exc: exc.clone(),
            handler: b(handler),
        },
    }
}

/// Renames binders so that no binder name is reused or clashes with a free
/// variable of `e`.
pub fn freshen(e: &Expr) -> Expr {
    let mut seen: BTreeSet<Name> = free_vars(e);
    fresh_walk(e, &mut seen)
}

fn pick(x: &Name, seen: &mut BTreeSet<Name>) -> Name {
    let name = if seen.contains(x) { fresh_name(x) } else { x.clone() };
    seen.insert(name.clone());
    name
}

fn rebind(x: &Name, body: &Expr, seen: &mut BTreeSet<Name>) -> (Name, Expr) {
    let x2 = pick(x, seen);
    let body = if &x2 != x {
        substitute(body, x, &Expr::Var(x2.clone()))
    } else {
        body.clone()
    };
    (x2, body)
}

fn fresh_walk(e: &Expr, seen: &mut BTreeSet<Name>) -> Expr {
    match e {
        Expr::Lambda(x, t, b) => {
            let (x, b) = rebind(x, b, seen);
            Expr::Lambda(x, t.clone(), Box::new(fresh_walk(&b, seen)))
        }
        Expr::Let {
            x,
            ty,
            bound,
            body,
            bind,
            ann,
        } => {
            let bound = fresh_walk(bound, seen);
            let (x, body) = rebind(x, body, seen);
            Expr::Let {
                x,
                ty: ty.clone(),
                bound: Box::new(bound),
                body: Box::new(fresh_walk(&body, seen)),
                bind: *bind,
                ann: *ann,
            }
        }
        Expr::MatchPair {
            scrut,
            x,
            y,
            body,
            ann,
        } => {
            let scrut = fresh_walk(scrut, seen);
            let (x, body) = rebind(x, body, seen);
            let (y, body) = rebind(y, &body, seen);
            Expr::MatchPair {
                scrut: Box::new(scrut),
                x,
                y,
                body: Box::new(fresh_walk(&body, seen)),
                ann: *ann,
            }
        }
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ann,
        } => {
            let scrut = fresh_walk(scrut, seen);
            let (x1, body1) = rebind(x1, body1, seen);
            let body1 = fresh_walk(&body1, seen);
            let (x2, body2) = rebind(x2, body2, seen);
            let body2 = fresh_walk(&body2, seen);
            Expr::MatchSum {
                scrut: Box::new(scrut),
                x1,
                body1: Box::new(body1),
                x2,
                body2: Box::new(body2),
                ann: *ann,
            }
        }
        Expr::TryIn {
            x,
            bound,
            body,
            exc,
            handler,
        } => {
            let bound = fresh_walk(bound, seen);
            let (x, body) = rebind(x, body, seen);
            let body = fresh_walk(&body, seen);
            let (exc, handler) = rebind(exc, handler, seen);
            let handler = fresh_walk(&handler, seen);
            Expr::TryIn {
                x,
                bound: Box::new(bound),
                body: Box::new(body),
                exc,
                handler: Box::new(handler),
            }
        }
        _ => map_children_mut(e, seen),
    }
}

fn map_children_mut(e: &Expr, seen: &mut BTreeSet<Name>) -> Expr {
    // sequential walk so that `seen` accumulates left to right
    let kids: Vec<Expr> = e.children().into_iter().map(|c| fresh_walk(c, seen)).collect();
    let mut it = kids.into_iter();
    let mut next = || Box::new(it.next().unwrap());
    match e {
        Expr::Pair(..) => Expr::Pair(next(), next()),
        Expr::LazyPair(..) => Expr::LazyPair(next(), next()),
        Expr::Inj(i, _) => Expr::Inj(*i, next()),
        Expr::Proj(i, _, p) => Expr::Proj(*i, next(), *p),
        Expr::Ascribe(_, t) => Expr::Ascribe(next(), t.clone()),
        Expr::Coerce(_) => Expr::Coerce(next()),
        Expr::App { ann, .. } => Expr::App {
            fun: next(),
            arg: next(),
            ann: *ann,
        },
        Expr::MatchUnit { ann, .. } => Expr::MatchUnit {
            scrut: next(),
            body: next(),
            ann: *ann,
        },
        Expr::MoveIn { x, y, .. } => Expr::MoveIn {
            x: x.clone(),
            y: y.clone(),
            body: next(),
        },
        _ => e.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polarity_follows_outer_constructor() {
        assert_eq!(polarity(&Type::Res), Polarity::Pos);
        assert_eq!(polarity(&Type::with(Type::Unit, Type::Unit)), Polarity::Neg);
        let t = Type::tensor(Type::larrow(Type::Res, Type::Unit), Type::Res);
        assert_eq!(polarity(&t), Polarity::Pos);
    }

    #[test]
    fn central_types() {
        assert!(is_central(&Type::Unit));
        assert!(is_central(&Type::sum(
            Type::Unit,
            Type::tensor(Type::Unit, Type::Unit)
        )));
        assert!(!is_central(&Type::Res));
        assert!(!is_central(&Type::with(Type::Unit, Type::Unit)));
    }

    #[test]
    fn free_variables_in_order() {
        let e = Expr::pair(Expr::var("x"), Expr::var("y"));
        assert_eq!(free_var_sequence(&e), vec!["x", "y"]);
        let e = Expr::lam("x", None, Expr::app(Expr::var("f"), Expr::var("x")));
        assert_eq!(free_var_sequence(&e), vec!["f"]);
        let e = Expr::match_pair(
            Expr::var("p"),
            "a",
            "b",
            Expr::pair(Expr::var("b"), Expr::var("a")),
        );
        assert_eq!(free_var_sequence(&e), vec!["p"]);
        let e = Expr::pair(Expr::var("x"), Expr::var("x"));
        assert_eq!(free_var_sequence(&e), vec!["x", "x"]);
    }

    #[test]
    fn substitution_basics() {
        assert_eq!(
            substitute(&Expr::var("x"), "x", &Expr::ResLit(3)),
            Expr::ResLit(3)
        );
        let e = Expr::pair(Expr::var("x"), Expr::UnitVal);
        assert_eq!(
            substitute(&e, "x", &Expr::UnitVal),
            Expr::pair(Expr::UnitVal, Expr::UnitVal)
        );
        let e = Expr::var("z");
        assert_eq!(substitute(&e, "x", &Expr::UnitVal), e);
    }

    #[test]
    fn substitution_avoids_capture() {
        let e = Expr::lam("y", None, Expr::var("x"));
        let r = substitute(&e, "x", &Expr::var("y"));
        match &r {
            Expr::Lambda(y2, None, body) => {
                assert_ne!(y2, "y");
                assert_eq!(**body, Expr::var("y"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(free_var_sequence(&r), vec!["y"]);
    }

    #[test]
    fn shadowed_binder_blocks_substitution() {
        let e = Expr::lam("x", None, Expr::var("x"));
        assert_eq!(substitute(&e, "x", &Expr::UnitVal), e);
    }

    #[test]
    fn values_follow_annotations() {
        let mut e = Expr::app(Expr::var("f"), Expr::var("x"));
        assert!(!is_value(&e));
        if let Expr::App { ann, .. } = &mut e {
            *ann = Some(Polarity::Neg);
        }
        assert!(is_value(&e));
        assert!(is_value(&Expr::pair(Expr::UnitVal, Expr::var("x"))));
        assert!(!is_value(&Expr::pair(
            Expr::UnitVal,
            Expr::app(Expr::NewConst, Expr::UnitVal)
        )));
    }

    #[test]
    fn alpha_equivalence() {
        let a = Expr::lam("x", None, Expr::var("x"));
        let b = Expr::lam("y", None, Expr::var("y"));
        assert!(alpha_eq(&a, &b));
        let c = Expr::lam("y", None, Expr::var("x"));
        assert!(!alpha_eq(&a, &c));
        let d = Expr::lam("x", None, Expr::var("z"));
        assert!(!alpha_eq(&c, &d));
    }

    #[test]
    fn type_display_precedence() {
        let t = Type::sum(Type::tensor(Type::Unit, Type::Unit), Type::Unit);
        assert_eq!(t.to_string(), "1 * 1 + 1");
        let t = Type::larrow(Type::Res, Type::larrow(Type::Res, Type::Unit));
        assert_eq!(t.to_string(), "R -o R -o 1");
        let t = Type::larrow(Type::larrow(Type::Res, Type::Unit), Type::Unit);
        assert_eq!(t.to_string(), "(R -o 1) -o 1");
        let t = Type::tensor(Type::Unit, Type::sum(Type::Unit, Type::Res));
        assert_eq!(t.to_string(), "1 * (1 + R)");
    }

    #[test]
    fn freshen_makes_binders_unique() {
        let e = Expr::pair(
            Expr::lam("x", None, Expr::var("x")),
            Expr::lam("x", None, Expr::var("x")),
        );
        let f = freshen(&e);
        assert!(alpha_eq(&e, &f));
        let mut binders = vec![];
        f.visit(&mut |n| {
            if let Expr::Lambda(x, _, _) = n {
                binders.push(x.clone())
            }
        });
        assert_ne!(binders[0], binders[1]);
    }
}
