//! Surface terms with starred sugar, and their expansion into core terms.

use crate::syntax::{fresh_name, is_syntactic_value, Expr, Name, Side, Type};

/// Terms as written. Compound expressions in value positions are starred
/// forms and get let-bound by [`desugar`]; `Keep` marks a position whose
/// content stays in place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SurfaceExpr {
    Var(Name),
    ResLit(u32),
    Unit,
    Pair(Box<SurfaceExpr>, Box<SurfaceExpr>),
    Inj(Side, Box<SurfaceExpr>),
    Lambda(Name, Option<Type>, Box<SurfaceExpr>),
    LazyPair(Box<SurfaceExpr>, Box<SurfaceExpr>),
    New,
    Delete,
    Drop,
    Raise,
    Let {
        x: Name,
        ty: Option<Type>,
        bound: Box<SurfaceExpr>,
        body: Box<SurfaceExpr>,
    },
    MatchPair {
        scrut: Box<SurfaceExpr>,
        x: Name,
        y: Name,
        body: Box<SurfaceExpr>,
    },
    MatchUnit {
        scrut: Box<SurfaceExpr>,
        body: Box<SurfaceExpr>,
    },
    MatchSum {
        scrut: Box<SurfaceExpr>,
        x1: Name,
        body1: Box<SurfaceExpr>,
        x2: Name,
        body2: Box<SurfaceExpr>,
    },
    App(Box<SurfaceExpr>, Box<SurfaceExpr>),
    Proj(Side, Box<SurfaceExpr>),
    Ascribe(Box<SurfaceExpr>, Type),
    MoveIn {
        x: Name,
        y: Name,
        body: Box<SurfaceExpr>,
    },
    TryIn {
        x: Name,
        bound: Box<SurfaceExpr>,
        body: Box<SurfaceExpr>,
        exc: Name,
        handler: Box<SurfaceExpr>,
    },
    Coerce(Box<SurfaceExpr>),
    /// `t; u`
    Seq(Box<SurfaceExpr>, Box<SurfaceExpr>),
    /// `[t]`
    Keep(Box<SurfaceExpr>),
}

type S = SurfaceExpr;

fn bx(e: S) -> Box<S> {
    Box::new(e)
}

/// Whether `e` may stand in a value position without being let-bound.
fn stays(e: &S) -> bool {
    match e {
        S::Var(_)
        | S::ResLit(_)
        | S::Unit
        | S::New
        | S::Delete
        | S::Drop
        | S::Raise
        | S::Lambda(..)
        | S::LazyPair(..)
        | S::Keep(_) => true,
        S::Pair(a, b) => stays(a) && stays(b),
        S::Inj(_, a) | S::Ascribe(a, _) => stays(a),
        _ => false,
    }
}

/// Binds `e` to a fresh name unless it can stay in place; `k` builds the
/// term using the resulting value.
fn in_value(e: &S, base: &str, k: impl FnOnce(Expr) -> Expr) -> Expr {
    let d = desugar(e);
    if stays(e) {
        k(d)
    } else {
        let z = fresh_name(base);
        Expr::let_(&z, None, d, k(Expr::Var(z.clone())))
    }
}

pub fn desugar(s: &SurfaceExpr) -> Expr {
    match s {
        S::Var(x) => Expr::Var(x.clone()),
        S::ResLit(n) => Expr::ResLit(*n),
        S::Unit => Expr::UnitVal,
        S::New => Expr::NewConst,
        S::Delete => Expr::DeleteConst,
        S::Drop => Expr::DropConst,
        S::Raise => Expr::RaiseConst,
        S::Keep(e) => desugar(e),
        S::Pair(a, b) => {
            if stays(a) && stays(b) {
                Expr::pair(desugar(a), desugar(b))
            } else {
                let x = fresh_name("x");
                let y = fresh_name("y");
                Expr::let_(
                    &x,
                    None,
                    desugar(a),
                    Expr::let_(
                        &y,
                        None,
                        desugar(b),
                        Expr::pair(Expr::Var(x.clone()), Expr::Var(y.clone())),
                    ),
                )
            }
        }
        S::Inj(i, a) => in_value(a, "x", |v| Expr::inj(*i, v)),
        S::Lambda(x, t, b) => Expr::Lambda(x.clone(), t.clone(), bx_e(desugar(b))),
        S::LazyPair(a, b) => Expr::lazy(desugar(a), desugar(b)),
        S::Let { x, ty, bound, body } => Expr::let_(x, ty.clone(), desugar(bound), desugar(body)),
        S::MatchPair { scrut, x, y, body } => {
            let body = desugar(body);
            in_value(scrut, "z", |v| Expr::match_pair(v, x, y, body))
        }
        S::MatchUnit { scrut, body } => {
            let body = desugar(body);
            in_value(scrut, "z", |v| Expr::match_unit(v, body))
        }
        S::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
        } => {
            let b1 = desugar(body1);
            let b2 = desugar(body2);
            in_value(scrut, "z", |v| Expr::match_sum(v, x1, b1, x2, b2))
        }
        S::App(f, a) => {
            if stays(f) {
                let fv = desugar(f);
                in_value(a, "x", |av| Expr::app(fv, av))
            } else {
                let g = fresh_name("g");
                let inner = in_value(a, "x", |av| Expr::app(Expr::Var(g.clone()), av));
                Expr::let_(&g, None, desugar(f), inner)
            }
        }
        S::Proj(i, a) => in_value(a, "z", |v| Expr::proj(*i, v)),
        S::Ascribe(a, t) => Expr::ascribe(desugar(a), t.clone()),
        S::MoveIn { x, y, body } => Expr::MoveIn {
            x: x.clone(),
            y: y.clone(),
            body: bx_e(desugar(body)),
        },
        S::TryIn {
            x,
            bound,
            body,
            exc,
            handler,
        } => Expr::TryIn {
            x: x.clone(),
            bound: bx_e(desugar(bound)),
            body: bx_e(desugar(body)),
            exc: exc.clone(),
            handler: bx_e(desugar(handler)),
        },
        S::Coerce(a) => in_value(a, "z", |v| Expr::Coerce(bx_e(v))),
        S::Seq(t, u) => Expr::seq(desugar(t), desugar(u)),
    }
}

fn bx_e(e: Expr) -> Box<Expr> {
    Box::new(e)
}

/// A surface term that desugars back to `e` up to alpha-equivalence and
/// polarity annotations.
pub fn from_expr(e: &Expr) -> SurfaceExpr {
    let val = |c: &Expr| {
        let s = from_expr(c);
        if is_syntactic_value(c) {
            s
        } else {
            S::Keep(bx(s))
        }
    };
    match e {
        Expr::Var(x) => S::Var(x.clone()),
        Expr::ResLit(n) => S::ResLit(*n),
        Expr::UnitVal => S::Unit,
        Expr::NewConst => S::New,
        Expr::DeleteConst => S::Delete,
        Expr::DropConst => S::Drop,
        Expr::RaiseConst => S::Raise,
        Expr::Pair(a, b) => S::Pair(bx(val(a)), bx(val(b))),
        Expr::Inj(i, a) => S::Inj(*i, bx(val(a))),
        Expr::Lambda(x, t, b) => S::Lambda(x.clone(), t.clone(), bx(from_expr(b))),
        Expr::LazyPair(a, b) => S::LazyPair(bx(from_expr(a)), bx(from_expr(b))),
        Expr::Let {
            x,
            ty,
            bound,
            body,
            ..
        } => {
            if ty.is_none() {
                if let Expr::MatchUnit {
                    scrut, body: rest, ..
                } = &**body
                {
                    if matches!(&**scrut, Expr::Var(z) if z == x)
                        && !crate::syntax::free_vars(rest).contains(x)
                    {
                        return S::Seq(bx(from_expr(bound)), bx(from_expr(rest)));
                    }
                }
            }
            S::Let {
                x: x.clone(),
                ty: ty.clone(),
                bound: bx(from_expr(bound)),
                body: bx(from_expr(body)),
            }
        }
        Expr::MatchPair {
            scrut, x, y, body, ..
        } => S::MatchPair {
            scrut: bx(val(scrut)),
            x: x.clone(),
            y: y.clone(),
            body: bx(from_expr(body)),
        },
        Expr::MatchUnit { scrut, body, .. } => S::MatchUnit {
            scrut: bx(val(scrut)),
            body: bx(from_expr(body)),
        },
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ..
        } => S::MatchSum {
            scrut: bx(val(scrut)),
            x1: x1.clone(),
            body1: bx(from_expr(body1)),
            x2: x2.clone(),
            body2: bx(from_expr(body2)),
        },
        Expr::App { fun, arg, .. } => S::App(bx(val(fun)), bx(val(arg))),
        Expr::Proj(i, a, _) => S::Proj(*i, bx(val(a))),
        Expr::Ascribe(a, t) => S::Ascribe(bx(from_expr(a)), t.clone()),
        Expr::MoveIn { x, y, body } => S::MoveIn {
            x: x.clone(),
            y: y.clone(),
            body: bx(from_expr(body)),
        },
        Expr::TryIn {
            x,
            bound,
            body,
            exc,
            handler,
        } => S::TryIn {
            x: x.clone(),
            bound: bx(from_expr(bound)),
            body: bx(from_expr(body)),
            exc: exc.clone(),
            handler: bx(from_expr(handler)),
        },
        Expr::Coerce(a) => S::Coerce(bx(val(a))),
    }
}
