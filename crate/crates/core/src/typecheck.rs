//! Bidirectional checking of the ordered (O) and linear (L) typing rules,
//! shared with the affine front end, plus stack and command typing.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::machine::{Command, Frame, FrameMemo};
use crate::syntax::{polarity, Context, Expr, Name, Polarity, Side, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Ordered,
    Linear,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Ordered => write!(f, "ordered"),
            Mode::Linear => write!(f, "linear"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    UnboundVariable,
    UnusedVariable,
    DuplicateUse,
    OrderViolation,
    PolarityMismatch,
    TypeMismatch,
    AnnotationRequired,
    MoveForbidden,
    TryOnNegative,
    AffineConstruct,
    ResourceInSource,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind:?} in rule `{rule}`: {message}")]
pub struct TypeError {
    pub kind: ErrorKind,
    pub rule: &'static str,
    pub message: String,
}

fn err<T>(kind: ErrorKind, rule: &'static str, message: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError {
        kind,
        rule,
        message: message.into(),
    })
}

type R<T> = Result<T, TypeError>;

/// Settings for the affine calculus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineRules {
    pub allow_move: bool,
    pub exc_type: Type,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckConfig {
    pub mode: Mode,
    /// Accept resource literals (the `p` judgment).
    pub runtime: bool,
    pub affine: Option<AffineRules>,
}

impl CheckConfig {
    pub fn core(mode: Mode) -> CheckConfig {
        CheckConfig {
            mode,
            runtime: false,
            affine: None,
        }
    }
    pub fn runtime(mode: Mode) -> CheckConfig {
        CheckConfig {
            mode,
            runtime: true,
            affine: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    Var(Name),
    Res(u32),
    Unit,
    New,
    Delete,
    Drop,
    Raise,
    Pair,
    Inj(Side),
    Lambda(Name),
    LazyPair,
    Let(Name),
    MatchPair(Name, Name),
    MatchUnit,
    MatchSum(Name, Name),
    App,
    Proj(Side),
    Ascribe,
    Move(Name, Name),
    Try(Name, Name),
    Coerce,
}

/// A typing derivation: conclusion `ctx ⊢ e : ty`, with premises in the
/// order of the term's children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deriv {
    pub ctx: Context,
    pub ty: Type,
    pub rule: Rule,
    pub kids: Vec<Deriv>,
}

pub type TypedExpr = Deriv;

impl Deriv {
    pub fn polarity(&self) -> Polarity {
        polarity(&self.ty)
    }

    /// Value predicate on the decorated term.
    pub fn is_value(&self) -> bool {
        match &self.rule {
            Rule::Var(_)
            | Rule::Res(_)
            | Rule::Unit
            | Rule::New
            | Rule::Delete
            | Rule::Drop
            | Rule::Raise
            | Rule::Lambda(_)
            | Rule::LazyPair => true,
            Rule::Pair => self.kids.iter().all(|k| k.is_value()),
            Rule::Inj(_) | Rule::Ascribe => self.kids[0].is_value(),
            Rule::Let(_)
            | Rule::MatchPair(..)
            | Rule::MatchUnit
            | Rule::MatchSum(..)
            | Rule::App
            | Rule::Proj(_) => self.polarity() == Polarity::Neg,
            Rule::Move(..) | Rule::Try(..) | Rule::Coerce => false,
        }
    }

    /// Syntactic value of the source term, ignoring polarities.
    pub fn is_intro_value(&self) -> bool {
        match &self.rule {
            Rule::Var(_)
            | Rule::Res(_)
            | Rule::Unit
            | Rule::New
            | Rule::Delete
            | Rule::Drop
            | Rule::Raise
            | Rule::Lambda(_)
            | Rule::LazyPair => true,
            Rule::Pair => self.kids.iter().all(|k| k.is_intro_value()),
            Rule::Inj(_) | Rule::Ascribe => self.kids[0].is_intro_value(),
            _ => false,
        }
    }

    /// The term with binder types, let types, polarity annotations and
    /// ascriptions on every node that cannot synthesize its own type.
    pub fn to_expr(&self) -> Expr {
        let k = |i: usize| Box::new(self.kids[i].to_expr());
        let pol = Some(self.polarity());
        let wrap = |e: Expr| Expr::Ascribe(Box::new(e), self.ty.clone());
        match &self.rule {
            Rule::Var(x) => wrap(Expr::Var(x.clone())),
            Rule::Res(n) => Expr::ResLit(*n),
            Rule::Unit => Expr::UnitVal,
            Rule::New => Expr::NewConst,
            Rule::Delete => Expr::DeleteConst,
            Rule::Drop => wrap(Expr::DropConst),
            Rule::Raise => wrap(Expr::RaiseConst),
            Rule::Pair => Expr::Pair(k(0), k(1)),
            Rule::Inj(i) => wrap(Expr::Inj(*i, k(0))),
            Rule::Lambda(x) => {
                let dom = self.kids[0].ctx[0].1.clone();
                wrap(Expr::Lambda(x.clone(), Some(dom), k(0)))
            }
            Rule::LazyPair => wrap(Expr::LazyPair(k(0), k(1))),
            Rule::Let(x) => Expr::Let {
                x: x.clone(),
                ty: Some(self.kids[0].ty.clone()),
                bound: k(0),
                body: k(1),
                bind: Some(self.kids[0].polarity()),
                ann: pol,
            },
            Rule::MatchPair(x, y) => Expr::MatchPair {
                scrut: k(0),
                x: x.clone(),
                y: y.clone(),
                body: k(1),
                ann: pol,
            },
            Rule::MatchUnit => Expr::MatchUnit {
                scrut: k(0),
                body: k(1),
                ann: pol,
            },
            Rule::MatchSum(x1, x2) => Expr::MatchSum {
                scrut: k(0),
                x1: x1.clone(),
                body1: k(1),
                x2: x2.clone(),
                body2: k(2),
                ann: pol,
            },
            Rule::App => Expr::App {
                fun: k(0),
                arg: k(1),
                ann: pol,
            },
            Rule::Proj(i) => Expr::Proj(*i, k(0), pol),
            Rule::Ascribe => {
                let inner = self.kids[0].to_expr();
                match &inner {
                    Expr::Ascribe(_, t) if *t == self.ty => inner,
                    _ => wrap(inner),
                }
            }
            Rule::Move(x, y) => Expr::MoveIn {
                x: x.clone(),
                y: y.clone(),
                body: k(0),
            },
            Rule::Try(x, e) => Expr::TryIn {
                x: x.clone(),
                bound: k(0),
                body: k(1),
                exc: e.clone(),
                handler: k(2),
            },
            Rule::Coerce => Expr::Coerce(k(0)),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.kids.iter().map(|k| k.size()).sum::<usize>()
    }

    /// Whether any node uses a given rule.
    pub fn any(&self, pred: &impl Fn(&Rule) -> bool) -> bool {
        pred(&self.rule) || self.kids.iter().any(|k| k.any(pred))
    }
}

/// Sorted, duplicate-free interned variable ids.
type VarSet = Vec<u32>;

fn union(a: &[u32], b: &[u32]) -> VarSet {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Free-variable sets memoized by node address for the duration of a check.
struct FvCache {
    map: HashMap<*const Expr, Rc<VarSet>>,
    ids: HashMap<Name, u32>,
    names: Vec<Name>,
}

impl FvCache {
    fn new() -> Self {
        FvCache {
            map: HashMap::new(),
            ids: HashMap::new(),
            names: vec![],
        }
    }

    fn id(&mut self, x: &str) -> u32 {
        if let Some(i) = self.ids.get(x) {
            return *i;
        }
        let i = self.names.len() as u32;
        self.names.push(x.to_string());
        self.ids.insert(x.to_string(), i);
        i
    }

    fn minus(&mut self, inner: &[u32], bound: &[&Name]) -> VarSet {
        let b: Vec<u32> = bound.iter().map(|x| self.id(x)).collect();
        inner.iter().copied().filter(|v| !b.contains(v)).collect()
    }

    fn get(&mut self, e: &Expr) -> Rc<VarSet> {
        let key = e as *const Expr;
        if let Some(s) = self.map.get(&key) {
            return s.clone();
        }
        let s: VarSet = match e {
            Expr::Var(x) => vec![self.id(x)],
            Expr::Lambda(x, _, b) => {
                let fb = self.get(b);
                self.minus(&fb, &[x])
            }
            Expr::Let { x, bound, body, .. } => {
                let fb = self.get(body);
                let rest = self.minus(&fb, &[x]);
                union(&self.get(bound), &rest)
            }
            Expr::MatchPair {
                scrut, x, y, body, ..
            } => {
                let fb = self.get(body);
                let rest = self.minus(&fb, &[x, y]);
                union(&self.get(scrut), &rest)
            }
            Expr::MatchSum {
                scrut,
                x1,
                body1,
                x2,
                body2,
                ..
            } => {
                let r1 = self.under(body1, &[x1]);
                let r2 = self.under(body2, &[x2]);
                union(&self.get(scrut), &union(&r1, &r2))
            }
            Expr::TryIn {
                x,
                bound,
                body,
                exc,
                handler,
            } => {
                let r1 = self.under(body, &[x]);
                let r2 = self.under(handler, &[exc]);
                union(&self.get(bound), &union(&r1, &r2))
            }
            _ => {
                let mut s = vec![];
                for c in e.children() {
                    s = union(&s, &self.get(c));
                }
                s
            }
        };
        let rc = Rc::new(s);
        self.map.insert(key, rc.clone());
        rc
    }

    /// Free variables of `body` minus `bound`.
    fn under(&mut self, body: &Expr, bound: &[&Name]) -> VarSet {
        let fb = self.get(body);
        self.minus(&fb, bound)
    }
}

struct Checker<'c> {
    cfg: &'c CheckConfig,
    fv: FvCache,
}

fn lookup<'a>(ctx: &'a Context, x: &str) -> Option<&'a Type> {
    ctx.iter().find(|(n, _)| n == x).map(|(_, t)| t)
}

fn names(ctx: &Context) -> String {
    let v: Vec<String> = ctx.iter().map(|(n, t)| format!("{n}:{t}")).collect();
    format!("[{}]", v.join(", "))
}

fn check_ann(rule: &'static str, given: Option<Polarity>, inferred: Polarity) -> R<()> {
    match given {
        Some(p) if p != inferred => err(
            ErrorKind::PolarityMismatch,
            rule,
            format!("annotated {p} but the type has polarity {inferred}"),
        ),
        _ => Ok(()),
    }
}

fn require_value(rule: &'static str, d: &Deriv) -> R<()> {
    if d.is_value() {
        Ok(())
    } else {
        err(
            ErrorKind::PolarityMismatch,
            rule,
            format!("a value is required here, found a positive expression of type {}", d.ty),
        )
    }
}

fn mismatch<T>(rule: &'static str, expected: &Type, found: &Type) -> R<T> {
    err(
        ErrorKind::TypeMismatch,
        rule,
        format!("expected {expected}, found {found}"),
    )
}

impl<'c> Checker<'c> {
    fn new(cfg: &'c CheckConfig) -> Self {
        Checker {
            cfg,
            fv: FvCache::new(),
        }
    }

    fn ordered(&self) -> bool {
        self.cfg.mode == Mode::Ordered
    }

    /// Assigns every context entry to the unique part mentioning it.
    fn partition(
        &mut self,
        rule: &'static str,
        ctx: &Context,
        parts: &[VarSet],
    ) -> R<Vec<Vec<usize>>> {
        let mut out = vec![vec![]; parts.len()];
        for (i, (x, _)) in ctx.iter().enumerate() {
            let id = self.fv.id(x);
            let owners: Vec<usize> = (0..parts.len())
                .filter(|p| parts[*p].binary_search(&id).is_ok())
                .collect();
            match owners.len() {
                0 => {
                    return err(
                        ErrorKind::UnusedVariable,
                        rule,
                        format!("`{x}` is never used"),
                    )
                }
                1 => out[owners[0]].push(i),
                _ => {
                    return err(
                        ErrorKind::DuplicateUse,
                        rule,
                        format!("`{x}` is used more than once"),
                    )
                }
            }
        }
        for p in parts {
            for id in p {
                let x = &self.fv.names[*id as usize];
                if lookup(ctx, x).is_none() {
                    return err(
                        ErrorKind::UnboundVariable,
                        rule,
                        format!("`{x}` is not available in {}", names(ctx)),
                    );
                }
            }
        }
        Ok(out)
    }

    /// Splits `ctx` as `Γ, Δ` where `left` owns Γ and `right` owns Δ.
    fn split2(
        &mut self,
        rule: &'static str,
        ctx: &Context,
        left: VarSet,
        right: VarSet,
    ) -> R<(Context, Context)> {
        let idx = self.partition(rule, ctx, &[left, right])?;
        if self.ordered() {
            if let (Some(l), Some(r)) = (idx[0].last(), idx[1].first()) {
                if l > r {
                    return err(
                        ErrorKind::OrderViolation,
                        rule,
                        format!("context {} is not split in the required order", names(ctx)),
                    );
                }
            }
        }
        let pick = |is: &[usize]| is.iter().map(|i| ctx[*i].clone()).collect::<Context>();
        Ok((pick(&idx[0]), pick(&idx[1])))
    }

    /// Splits `ctx` as `Γ, Δ, Γ'` with Δ owned by `scrut`; returns Δ and the
    /// candidate continuation contexts `Γ, binders, Γ'`.
    fn split_around(
        &mut self,
        rule: &'static str,
        ctx: &Context,
        scrut: VarSet,
        rest: VarSet,
        binders: &[(Name, Type)],
    ) -> R<(Context, Vec<Context>)> {
        let idx = self.partition(rule, ctx, &[scrut, rest])?;
        let delta: Context = idx[0].iter().map(|i| ctx[*i].clone()).collect();
        let splice = |lo: usize, hi: usize| {
            let mut c: Context = ctx[..lo].to_vec();
            c.extend(binders.iter().cloned());
            c.extend(ctx[hi..].iter().cloned());
            c
        };
        if !self.ordered() {
            let mut c: Context = idx[1].iter().map(|i| ctx[*i].clone()).collect();
            c.extend(binders.iter().cloned());
            return Ok((delta, vec![c]));
        }
        if idx[0].is_empty() {
            if binders.is_empty() {
                return Ok((delta, vec![ctx.clone()]));
            }
            let n = ctx.len();
            return Ok((delta, (0..=n).rev().map(|i| splice(i, i)).collect()));
        }
        let lo = idx[0][0];
        let hi = *idx[0].last().unwrap() + 1;
        if hi - lo != idx[0].len() {
            return err(
                ErrorKind::OrderViolation,
                rule,
                format!("the scrutinee's variables are not contiguous in {}", names(ctx)),
            );
        }
        Ok((delta, vec![splice(lo, hi)]))
    }

    fn closed(&self, rule: &'static str, ctx: &Context) -> R<()> {
        match ctx.first() {
            Some((x, _)) => err(
                ErrorKind::UnusedVariable,
                rule,
                format!("`{x}` is never used"),
            ),
            None => Ok(()),
        }
    }

    fn affine(&self, rule: &'static str) -> R<&AffineRules> {
        match &self.cfg.affine {
            Some(a) => Ok(a),
            None => err(
                ErrorKind::AffineConstruct,
                rule,
                "only available in the affine calculus",
            ),
        }
    }

    fn leaf(ctx: &Context, ty: Type, rule: Rule) -> Deriv {
        Deriv {
            ctx: ctx.clone(),
            ty,
            rule,
            kids: vec![],
        }
    }

    fn finish(
        &self,
        rule: &'static str,
        d: Deriv,
        exp: Option<&Type>,
    ) -> R<Deriv> {
        match exp {
            Some(t) if *t != d.ty => mismatch(rule, t, &d.ty),
            _ => Ok(d),
        }
    }

    /// Checks against `exp` when given, synthesizes otherwise.
    fn go(&mut self, ctx: &Context, e: &Expr, exp: Option<&Type>) -> R<Deriv> {
        match e {
            Expr::Var(x) => {
                let rule = "var";
                let Some(t) = lookup(ctx, x) else {
                    return err(
                        ErrorKind::UnboundVariable,
                        rule,
                        format!("`{x}` is not available in {}", names(ctx)),
                    );
                };
                if let Some((y, _)) = ctx.iter().find(|(n, _)| n != x) {
                    return err(
                        ErrorKind::UnusedVariable,
                        rule,
                        format!("`{y}` is never used"),
                    );
                }
                if ctx.len() > 1 {
                    return err(
                        ErrorKind::DuplicateUse,
                        rule,
                        format!("`{x}` occurs twice in the context"),
                    );
                }
                self.finish(rule, Self::leaf(ctx, t.clone(), Rule::Var(x.clone())), exp)
            }
            Expr::ResLit(n) => {
                if !self.cfg.runtime {
                    return err(
                        ErrorKind::ResourceInSource,
                        "resource",
                        format!("resource literal #{n} outside a runtime term"),
                    );
                }
                self.closed("resource", ctx)?;
                self.finish("resource", Self::leaf(ctx, Type::Res, Rule::Res(*n)), exp)
            }
            Expr::UnitVal => {
                self.closed("1i", ctx)?;
                self.finish("1i", Self::leaf(ctx, Type::Unit, Rule::Unit), exp)
            }
            Expr::NewConst => {
                self.closed("new", ctx)?;
                let cod = if self.cfg.affine.is_some() {
                    Type::Res
                } else {
                    Type::sum(Type::Res, Type::Unit)
                };
                self.finish(
                    "new",
                    Self::leaf(ctx, Type::larrow(Type::Unit, cod), Rule::New),
                    exp,
                )
            }
            Expr::DeleteConst => {
                self.closed("delete", ctx)?;
                self.finish(
                    "delete",
                    Self::leaf(ctx, Type::larrow(Type::Res, Type::Unit), Rule::Delete),
                    exp,
                )
            }
            Expr::DropConst => {
                self.affine("drop")?;
                self.closed("drop", ctx)?;
                match exp {
                    Some(t @ Type::LArrow(_, b)) if **b == Type::Unit => {
                        Ok(Self::leaf(ctx, t.clone(), Rule::Drop))
                    }
                    Some(t) => mismatch("drop", &Type::larrow(Type::Res, Type::Unit), t)
                        .map_err(|mut e: TypeError| {
                            e.message = format!("drop has type A -o 1, not {t}");
                            e
                        }),
                    None => err(
                        ErrorKind::AnnotationRequired,
                        "drop",
                        "the dropped type must be known",
                    ),
                }
            }
            Expr::RaiseConst => {
                let exc = self.affine("raise")?.exc_type.clone();
                self.closed("raise", ctx)?;
                match exp {
                    Some(t @ Type::LArrow(a, _)) if **a == exc => {
                        Ok(Self::leaf(ctx, t.clone(), Rule::Raise))
                    }
                    Some(t) => err(
                        ErrorKind::TypeMismatch,
                        "raise",
                        format!("raise has type {exc} -o A, not {t}"),
                    ),
                    None => err(
                        ErrorKind::AnnotationRequired,
                        "raise",
                        "the raised type must be known",
                    ),
                }
            }
            Expr::Pair(a, b) => {
                let rule = "tensor-i";
                let (ea, eb) = match exp {
                    Some(Type::Tensor(x, y)) => (Some(&**x), Some(&**y)),
                    Some(t) => {
                        return err(
                            ErrorKind::TypeMismatch,
                            rule,
                            format!("a pair cannot have type {t}"),
                        )
                    }
                    None => (None, None),
                };
                let (fa, fb) = ((*self.fv.get(a)).clone(), (*self.fv.get(b)).clone());
                let (ca, cb) = self.split2(rule, ctx, fa, fb)?;
                let da = self.go(&ca, a, ea)?;
                require_value(rule, &da)?;
                let db = self.go(&cb, b, eb)?;
                require_value(rule, &db)?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: Type::tensor(da.ty.clone(), db.ty.clone()),
                    rule: Rule::Pair,
                    kids: vec![da, db],
                })
            }
            Expr::Inj(i, a) => {
                let rule = "plus-i";
                let Some(t) = exp else {
                    return err(
                        ErrorKind::AnnotationRequired,
                        rule,
                        "an injection needs its sum type",
                    );
                };
                let Type::Sum(l, r) = t else {
                    return err(
                        ErrorKind::TypeMismatch,
                        rule,
                        format!("an injection cannot have type {t}"),
                    );
                };
                let comp = if *i == Side::L { l } else { r };
                let da = self.go(ctx, a, Some(comp))?;
                require_value(rule, &da)?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: t.clone(),
                    rule: Rule::Inj(*i),
                    kids: vec![da],
                })
            }
            Expr::Lambda(x, ann, body) => {
                let rule = "lolli-i";
                let (dom, cod) = match exp {
                    Some(Type::LArrow(a, b)) => (Some((**a).clone()), Some(&**b)),
                    Some(t) => {
                        return err(
                            ErrorKind::TypeMismatch,
                            rule,
                            format!("a function cannot have type {t}"),
                        )
                    }
                    None => (None, None),
                };
                let dom = match (dom, ann) {
                    (Some(d), Some(a)) if d != *a => return mismatch(rule, &d, a),
                    (Some(d), _) => d,
                    (None, Some(a)) => a.clone(),
                    (None, None) => {
                        return err(
                            ErrorKind::AnnotationRequired,
                            rule,
                            format!("the type of `{x}` must be known"),
                        )
                    }
                };
                self.lambda(ctx, x, dom, body, cod)
            }
            Expr::LazyPair(a, b) => {
                let rule = "with-i";
                let (ea, eb) = match exp {
                    Some(Type::With(x, y)) => (Some(&**x), Some(&**y)),
                    Some(t) => {
                        return err(
                            ErrorKind::TypeMismatch,
                            rule,
                            format!("a lazy pair cannot have type {t}"),
                        )
                    }
                    None => (None, None),
                };
                let da = self.go(ctx, a, ea)?;
                let db = self.go(ctx, b, eb)?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: Type::with(da.ty.clone(), db.ty.clone()),
                    rule: Rule::LazyPair,
                    kids: vec![da, db],
                })
            }
            Expr::Let {
                x,
                ty,
                bound,
                body,
                bind,
                ann,
            } => {
                let rule = "let";
                let rest = self.fv.under(body, &[x]);
                let fb = (*self.fv.get(bound)).clone();
                let (gamma, delta) = self.split2(rule, ctx, rest, fb)?;
                let db = self.go(&delta, bound, ty.as_ref())?;
                check_ann(rule, *bind, db.polarity())?;
                let mut c2 = gamma;
                c2.push((x.clone(), db.ty.clone()));
                let du = self.go(&c2, body, exp)?;
                check_ann(rule, *ann, du.polarity())?;
                if db.polarity() == Polarity::Neg {
                    require_value(rule, &db)?;
                }
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: du.ty.clone(),
                    rule: Rule::Let(x.clone()),
                    kids: vec![db, du],
                })
            }
            Expr::MatchPair {
                scrut,
                x,
                y,
                body,
                ann,
            } => {
                let rule = "tensor-e";
                let fs = (*self.fv.get(scrut)).clone();
                let rest = self.fv.under(body, &[x, y]);
                let idx = self.partition(rule, ctx, &[fs, rest])?;
                let delta: Context = idx[0].iter().map(|i| ctx[*i].clone()).collect();
                let ds = self.go(&delta, scrut, None)?;
                require_value(rule, &ds)?;
                let Type::Tensor(a, b) = &ds.ty else {
                    return err(
                        ErrorKind::TypeMismatch,
                        rule,
                        format!("scrutinee has type {}, not a tensor", ds.ty),
                    );
                };
                let binders = [(x.clone(), (**a).clone()), (y.clone(), (**b).clone())];
                let fs = (*self.fv.get(scrut)).clone();
                let rest = self.fv.under(body, &[x, y]);
                let (_, cands) = self.split_around(rule, ctx, fs, rest, &binders)?;
                let du = self.first_ok(&cands, |me, c| me.go(c, body, exp))?;
                check_ann(rule, *ann, du.polarity())?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: du.ty.clone(),
                    rule: Rule::MatchPair(x.clone(), y.clone()),
                    kids: vec![ds, du],
                })
            }
            Expr::MatchUnit { scrut, body, ann } => {
                let rule = "one-e";
                let fs = (*self.fv.get(scrut)).clone();
                let rest = (*self.fv.get(body)).clone();
                let (delta, cands) = self.split_around(rule, ctx, fs, rest, &[])?;
                let ds = self.go(&delta, scrut, Some(&Type::Unit))?;
                require_value(rule, &ds)?;
                let du = self.first_ok(&cands, |me, c| me.go(c, body, exp))?;
                check_ann(rule, *ann, du.polarity())?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: du.ty.clone(),
                    rule: Rule::MatchUnit,
                    kids: vec![ds, du],
                })
            }
            Expr::MatchSum {
                scrut,
                x1,
                body1,
                x2,
                body2,
                ann,
            } => {
                let rule = "plus-e";
                let fs = (*self.fv.get(scrut)).clone();
                let r1 = self.fv.under(body1, &[x1]);
                let r2 = self.fv.under(body2, &[x2]);
                let rest = union(&r1, &r2);
                let idx = self.partition(rule, ctx, &[fs.clone(), rest.clone()])?;
                let delta: Context = idx[0].iter().map(|i| ctx[*i].clone()).collect();
                let ds = self.go(&delta, scrut, None)?;
                require_value(rule, &ds)?;
                let Type::Sum(a, b) = &ds.ty else {
                    return err(
                        ErrorKind::TypeMismatch,
                        rule,
                        format!("scrutinee has type {}, not a sum", ds.ty),
                    );
                };
                let marker: Name = "\u{0}".into();
                let (_, cands) =
                    self.split_around(rule, ctx, fs, rest, &[(marker.clone(), Type::Unit)])?;
                let (a, b) = ((**a).clone(), (**b).clone());
                let (d1, d2) = self.first_ok(&cands, |me, c| {
                    let with = |n: &Name, t: &Type| -> Context {
                        c.iter()
                            .map(|(v, ty)| {
                                if *v == marker {
                                    (n.clone(), t.clone())
                                } else {
                                    (v.clone(), ty.clone())
                                }
                            })
                            .collect()
                    };
                    let d1 = me.go(&with(x1, &a), body1, exp)?;
                    let d2 = me.go(&with(x2, &b), body2, Some(exp.unwrap_or(&d1.ty)))?;
                    Ok((d1, d2))
                })?;
                check_ann(rule, *ann, d1.polarity())?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: d1.ty.clone(),
                    rule: Rule::MatchSum(x1.clone(), x2.clone()),
                    kids: vec![ds, d1, d2],
                })
            }
            Expr::App { fun, arg, ann } => {
                let rule = "lolli-e";
                let fa = (*self.fv.get(arg)).clone();
                let ff = (*self.fv.get(fun)).clone();
                let (gamma, delta) = self.split2(rule, ctx, fa, ff)?;
                let (df, da) = match self.go(&delta, fun, None) {
                    Ok(df) => {
                        let Type::LArrow(a, _) = &df.ty else {
                            return err(
                                ErrorKind::TypeMismatch,
                                rule,
                                format!("applying a term of type {}", df.ty),
                            );
                        };
                        let a = (**a).clone();
                        let da = self.go(&gamma, arg, Some(&a))?;
                        (df, da)
                    }
                    Err(e) if e.kind == ErrorKind::AnnotationRequired => {
                        let da = self.go(&gamma, arg, None)?;
                        let df = match (exp, fun.peel()) {
                            (Some(t), _) => {
                                self.go(&delta, fun, Some(&Type::larrow(da.ty.clone(), t.clone())))?
                            }
                            (None, Expr::DropConst) => self.go(
                                &delta,
                                fun,
                                Some(&Type::larrow(da.ty.clone(), Type::Unit)),
                            )?,
                            (None, Expr::Lambda(x, None, body)) => {
                                let df = self.lambda(&delta, x, da.ty.clone(), body, None)?;
                                if matches!(&**fun, Expr::Ascribe(..)) {
                                    self.go(&delta, fun, Some(&df.ty))?
                                } else {
                                    df
                                }
                            }
                            _ => return Err(e),
                        };
                        (df, da)
                    }
                    Err(e) => return Err(e),
                };
                require_value(rule, &df)?;
                require_value(rule, &da)?;
                let Type::LArrow(_, b) = &df.ty else {
                    unreachable!()
                };
                let b = (**b).clone();
                check_ann(rule, *ann, polarity(&b))?;
                self.finish(
                    rule,
                    Deriv {
                        ctx: ctx.clone(),
                        ty: b,
                        rule: Rule::App,
                        kids: vec![df, da],
                    },
                    exp,
                )
            }
            Expr::Proj(i, v, ann) => {
                let rule = if *i == Side::L { "with-e1" } else { "with-e2" };
                let dv = self.go(ctx, v, None)?;
                require_value(rule, &dv)?;
                let Type::With(a, b) = &dv.ty else {
                    return err(
                        ErrorKind::TypeMismatch,
                        rule,
                        format!("projecting from a term of type {}", dv.ty),
                    );
                };
                let t = if *i == Side::L { (**a).clone() } else { (**b).clone() };
                check_ann(rule, *ann, polarity(&t))?;
                self.finish(
                    rule,
                    Deriv {
                        ctx: ctx.clone(),
                        ty: t,
                        rule: Rule::Proj(*i),
                        kids: vec![dv],
                    },
                    exp,
                )
            }
            Expr::Ascribe(a, t) => {
                let da = self.go(ctx, a, Some(t))?;
                self.finish(
                    "ascription",
                    Deriv {
                        ctx: ctx.clone(),
                        ty: t.clone(),
                        rule: Rule::Ascribe,
                        kids: vec![da],
                    },
                    exp,
                )
            }
            Expr::MoveIn { x, y, body } => {
                let rule = "move";
                if !self.affine(rule)?.allow_move {
                    return err(
                        ErrorKind::MoveForbidden,
                        rule,
                        "move is not part of this fragment",
                    );
                }
                let iy = ctx.iter().position(|(n, _)| n == y);
                let ix = ctx.iter().position(|(n, _)| n == x);
                let (Some(iy), Some(ix)) = (iy, ix) else {
                    let missing = if iy.is_none() { y } else { x };
                    return err(
                        ErrorKind::UnboundVariable,
                        rule,
                        format!("`{missing}` is not available in {}", names(ctx)),
                    );
                };
                if ix != iy + 1 {
                    return err(
                        ErrorKind::OrderViolation,
                        rule,
                        format!("move ({x}, {y}) needs `{y}` immediately before `{x}`"),
                    );
                }
                let mut c2 = ctx.clone();
                c2.swap(iy, ix);
                let db = self.go(&c2, body, exp)?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: db.ty.clone(),
                    rule: Rule::Move(x.clone(), y.clone()),
                    kids: vec![db],
                })
            }
            Expr::TryIn {
                x,
                bound,
                body,
                exc,
                handler,
            } => {
                let rule = "try";
                let exc_ty = self.affine(rule)?.exc_type.clone();
                let r1 = self.fv.under(body, &[x]);
                let r2 = self.fv.under(handler, &[exc]);
                let rest = union(&r1, &r2);
                let fb = (*self.fv.get(bound)).clone();
                let (gamma, delta) = self.split2(rule, ctx, rest, fb)?;
                let db = self.go(&delta, bound, None)?;
                if db.polarity() != Polarity::Pos {
                    return err(
                        ErrorKind::TryOnNegative,
                        rule,
                        format!("the tried expression has negative type {}", db.ty),
                    );
                }
                let mut c1 = gamma.clone();
                c1.push((x.clone(), db.ty.clone()));
                let du = self.go(&c1, body, exp)?;
                let mut c2 = gamma;
                c2.push((exc.clone(), exc_ty));
                let dh = self.go(&c2, handler, Some(&du.ty))?;
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: du.ty.clone(),
                    rule: Rule::Try(x.clone(), exc.clone()),
                    kids: vec![db, du, dh],
                })
            }
            Expr::Coerce(v) => {
                let rule = "coerce";
                self.affine(rule)?;
                let dv = self.go(ctx, v, exp)?;
                require_value(rule, &dv)?;
                if dv.polarity() != Polarity::Pos {
                    return err(
                        ErrorKind::PolarityMismatch,
                        rule,
                        format!("coerce expects a positive value, found type {}", dv.ty),
                    );
                }
                Ok(Deriv {
                    ctx: ctx.clone(),
                    ty: dv.ty.clone(),
                    rule: Rule::Coerce,
                    kids: vec![dv],
                })
            }
        }
    }

    fn lambda(
        &mut self,
        ctx: &Context,
        x: &Name,
        dom: Type,
        body: &Expr,
        cod: Option<&Type>,
    ) -> R<Deriv> {
        let mut c2 = vec![(x.clone(), dom.clone())];
        c2.extend(ctx.iter().cloned());
        let db = self.go(&c2, body, cod)?;
        Ok(Deriv {
            ctx: ctx.clone(),
            ty: Type::larrow(dom, db.ty.clone()),
            rule: Rule::Lambda(x.clone()),
            kids: vec![db],
        })
    }

    fn first_ok<T>(
        &mut self,
        cands: &[Context],
        mut f: impl FnMut(&mut Self, &Context) -> R<T>,
    ) -> R<T> {
        let mut first_err = None;
        for c in cands {
            match f(self, c) {
                Ok(t) => return Ok(t),
                Err(e) => {
                    if first_err.is_none() {
                        first_err = Some(e)
                    }
                }
            }
        }
        Err(first_err.expect("at least one candidate context"))
    }
}

/// General entry point: checks against `ty`, or synthesizes when `None`.
pub fn check_with(cfg: &CheckConfig, ctx: &Context, e: &Expr, ty: Option<&Type>) -> R<Deriv> {
    let mut c = Checker::new(cfg);
    c.go(ctx, e, ty)
}

/// Source typing in O (`Ordered`) or L (`Linear`).
pub fn check_core(ctx: &Context, e: &Expr, ty: &Type, mode: Mode) -> R<TypedExpr> {
    check_with(&CheckConfig::core(mode), ctx, e, Some(ty))
}

/// Runtime typing `⊢_p`, which also types resource literals.
pub fn check_runtime(ctx: &Context, e: &Expr, ty: &Type, mode: Mode) -> R<TypedExpr> {
    check_with(&CheckConfig::runtime(mode), ctx, e, Some(ty))
}

pub fn synthesize_value(ctx: &Context, v: &Expr, mode: Mode) -> R<(Type, TypedExpr)> {
    let d = check_with(&CheckConfig::runtime(mode), ctx, v, None)?;
    Ok((d.ty.clone(), d))
}

/// Shape of a context split, as used by each rule's conclusion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitShape {
    /// `Γ, Δ` with one part per block, left to right (pair, application
    /// with the argument first, let with the bound term second).
    Concat,
    /// `Γ, Δ, Γ'` where the first part owns Δ and the second owns Γ and Γ'.
    Around,
}

/// Splits `ctx` among `parts` by free variables and checks the arrangement
/// demanded by `shape` in ordered mode.
pub fn split_by_free_vars(
    ctx: &Context,
    parts: &[&Expr],
    shape: SplitShape,
    mode: Mode,
) -> R<Vec<Context>> {
    let cfg = CheckConfig::runtime(mode);
    let mut c = Checker::new(&cfg);
    let fvs: Vec<VarSet> = parts.iter().map(|p| (*c.fv.get(p)).clone()).collect();
    let idx = c.partition("split", ctx, &fvs)?;
    let pick = |is: &[usize]| is.iter().map(|i| ctx[*i].clone()).collect::<Context>();
    if mode == Mode::Ordered {
        match shape {
            SplitShape::Concat => {
                let mut last: Option<usize> = None;
                for part in &idx {
                    for i in part {
                        if let Some(l) = last {
                            if *i < l {
                                return err(
                                    ErrorKind::OrderViolation,
                                    "split",
                                    format!("{} is not split in the required order", names(ctx)),
                                );
                            }
                        }
                        last = Some(*i);
                    }
                }
            }
            SplitShape::Around => {
                let d = &idx[0];
                if let (Some(lo), Some(hi)) = (d.first(), d.last()) {
                    if hi + 1 - lo != d.len() {
                        return err(
                            ErrorKind::OrderViolation,
                            "split",
                            "the middle block is not contiguous",
                        );
                    }
                }
            }
        }
    }
    Ok(idx.iter().map(|p| pick(p)).collect())
}

/// Type of the hole of the top stack frame when it can be read off the
/// frame alone.
fn frame_hole(stack: &[Frame], program_ty: &Type) -> Option<Type> {
    match stack.first() {
        None => Some(program_ty.clone()),
        Some(Frame::Kont { ty, .. }) => ty.clone(),
        _ => None,
    }
}

/// `s : B ⊢ B'` for a single frame: the type after the frame given the type
/// of its hole.
fn check_frame(cfg: &CheckConfig, f: &Frame, b: &Type) -> R<Type> {
    let empty: Context = vec![];
    match f {
        Frame::Arg { value, ann } => {
            let Type::LArrow(a, b2) = b else {
                return err(
                    ErrorKind::TypeMismatch,
                    "stack-arg",
                    format!("argument frame against type {b}"),
                );
            };
            check_with(cfg, &empty, value, Some(a))?;
            check_ann("stack-arg", Some(*ann), polarity(b2))?;
            Ok((**b2).clone())
        }
        Frame::Proj { side, ann } => {
            let Type::With(l, r) = b else {
                return err(
                    ErrorKind::TypeMismatch,
                    "stack-proj",
                    format!("projection frame against type {b}"),
                );
            };
            let t = if *side == Side::L { l } else { r };
            check_ann("stack-proj", Some(*ann), polarity(t))?;
            Ok((**t).clone())
        }
        Frame::Kont {
            x,
            body,
            ann,
            ty: decl,
        } => {
            if let Some(d) = decl {
                if d != b {
                    return mismatch("stack-kont", d, b);
                }
            }
            if polarity(b) != Polarity::Pos {
                return err(
                    ErrorKind::PolarityMismatch,
                    "stack-kont",
                    format!("continuation frame against negative type {b}"),
                );
            }
            let ctx = vec![(x.clone(), b.clone())];
            let d = check_with(cfg, &ctx, body, None)?;
            check_ann("stack-kont", Some(*ann), d.polarity())?;
            Ok(d.ty)
        }
    }
}

/// Frame typing results reusable across the commands of one run.
pub type TypingMemo = FrameMemo<Type, R<Type>>;

/// `c : ty`: the current expression types as `B` with polarity equal to the
/// command's, and the stack types as `s : B ⊢_p ty`.
pub fn check_command_typing(c: &Command, ty: &Type, mode: Mode) -> R<()> {
    check_command_typing_memo(c, ty, mode, &mut TypingMemo::new())
}

/// As `check_command_typing`, reusing frame results from `memo`. The memo
/// must only be shared between checks in the same mode.
pub fn check_command_typing_memo(c: &Command, ty: &Type, mode: Mode, memo: &mut TypingMemo) -> R<()> {
    let cfg = CheckConfig::runtime(mode);
    let empty: Context = vec![];
    let cur = match check_with(&cfg, &empty, &c.expr, None) {
        Ok(d) => d,
        Err(e) if e.kind == ErrorKind::AnnotationRequired => {
            let frames: Vec<Frame> = c.stack.top().into_iter().cloned().collect();
            match frame_hole(&frames, ty) {
                Some(t) => check_with(&cfg, &empty, &c.expr, Some(&t))?,
                None => return Err(e),
            }
        }
        Err(e) => return Err(e),
    };
    if cur.polarity() != c.pol {
        return err(
            ErrorKind::PolarityMismatch,
            "command",
            format!(
                "command polarity {} but the expression has type {}",
                c.pol, cur.ty
            ),
        );
    }
    let mut b = cur.ty;
    for s in c.stack.suffixes() {
        let input = b.clone();
        b = memo.get_or(&s, input, |f| check_frame(&cfg, f, &b))?;
    }
    if b != *ty {
        return mismatch("stack-empty", ty, &b);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{parse_program, parse_type, Dialect};
    use crate::syntax::erase_polarities;

    fn p(s: &str) -> Expr {
        parse_program(s, Dialect::Core).unwrap()
    }
    fn t(s: &str) -> Type {
        parse_type(s).unwrap()
    }
    fn kind(r: R<Deriv>) -> ErrorKind {
        r.expect_err("expected a type error").kind
    }

    #[test]
    fn new_has_its_type() {
        assert!(check_core(&vec![], &p("new"), &t("1 -o (R + 1)"), Mode::Ordered).is_ok());
    }

    #[test]
    fn exchange_is_ordered_only() {
        let ty = t("R -o 1 -o 1 * R");
        let ok = p("fun x -> fun y -> (y, x)");
        assert!(check_core(&vec![], &ok, &ty, Mode::Ordered).is_ok());
        let swapped = p("fun x -> fun y -> (x, y)");
        let ty2 = t("R -o 1 -o R * 1");
        assert_eq!(
            kind(check_core(&vec![], &swapped, &ty2, Mode::Ordered)),
            ErrorKind::OrderViolation
        );
        assert!(check_core(&vec![], &swapped, &ty2, Mode::Linear).is_ok());
    }

    #[test]
    fn two_resource_program_checks() {
        let src = "match new () { inl r -> match new () { inl s -> delete s; delete r | inr i -> i; delete r } | inr i -> i }";
        let e = p(src);
        let d = check_core(&vec![], &e, &Type::Unit, Mode::Ordered).unwrap();
        assert_eq!(d.ty, Type::Unit);
    }

    #[test]
    fn synthesis() {
        let ctx = vec![("x".to_string(), Type::Res)];
        let (ty, _) = synthesize_value(&ctx, &Expr::var("x"), Mode::Ordered).unwrap();
        assert_eq!(ty, Type::Res);
        let e = p("((fun (x : R) -> delete x) : R -o 1) #0");
        let (ty, _) = synthesize_value(&vec![], &e, Mode::Ordered).unwrap();
        assert_eq!(ty, Type::Unit);
        let e = p("fun x -> x");
        assert_eq!(
            synthesize_value(&vec![], &e, Mode::Ordered).unwrap_err().kind,
            ErrorKind::AnnotationRequired
        );
    }

    #[test]
    fn splits() {
        let ctx = vec![("a".to_string(), Type::Res), ("b".to_string(), Type::Unit)];
        let (a, b) = (Expr::var("a"), Expr::var("b"));
        let r = split_by_free_vars(&ctx, &[&a, &b], SplitShape::Concat, Mode::Ordered).unwrap();
        assert_eq!(r, vec![vec![ctx[0].clone()], vec![ctx[1].clone()]]);
        let r = split_by_free_vars(&ctx, &[&b, &a], SplitShape::Concat, Mode::Ordered);
        assert_eq!(r.unwrap_err().kind, ErrorKind::OrderViolation);
        let r = split_by_free_vars(&ctx, &[&b, &a], SplitShape::Concat, Mode::Linear).unwrap();
        assert_eq!(r, vec![vec![ctx[1].clone()], vec![ctx[0].clone()]]);
    }

    #[test]
    fn structural_errors() {
        let ctx = vec![("x".to_string(), Type::Unit)];
        assert_eq!(
            kind(check_core(&ctx, &Expr::UnitVal, &Type::Unit, Mode::Linear)),
            ErrorKind::UnusedVariable
        );
        let e = p("fun x -> (x, x)");
        assert_eq!(
            kind(check_core(&vec![], &e, &t("1 -o 1 * 1"), Mode::Linear)),
            ErrorKind::DuplicateUse
        );
        assert_eq!(
            kind(check_core(&vec![], &Expr::var("y"), &Type::Unit, Mode::Linear)),
            ErrorKind::UnboundVariable
        );
        assert_eq!(
            kind(check_core(&vec![], &Expr::ResLit(0), &Type::Res, Mode::Linear)),
            ErrorKind::ResourceInSource
        );
    }

    #[test]
    fn value_restriction() {
        // a positive application inside a pair component
        let e = Expr::pair(Expr::app(Expr::NewConst, Expr::UnitVal), Expr::UnitVal);
        assert_eq!(
            kind(check_core(&vec![], &e, &t("(R + 1) * 1"), Mode::Linear)),
            ErrorKind::PolarityMismatch
        );
    }

    #[test]
    fn annotations_are_inferred_and_stable() {
        let e = p("let r = new () in match r { inl x -> delete x | inr i -> i }");
        let d = check_core(&vec![], &e, &Type::Unit, Mode::Ordered).unwrap();
        let dec = d.to_expr();
        let again = check_core(&vec![], &erase_polarities(&dec), &Type::Unit, Mode::Ordered)
            .unwrap()
            .to_expr();
        assert_eq!(dec, again);
        let d2 = check_core(&vec![], &dec, &Type::Unit, Mode::Ordered).unwrap();
        assert_eq!(d2.to_expr(), dec);
    }

    #[test]
    fn wrong_annotation_is_rejected() {
        let e = Expr::Proj(
            Side::L,
            Box::new(Expr::lazy(Expr::UnitVal, Expr::UnitVal)),
            Some(Polarity::Neg),
        );
        let e = Expr::ascribe(e, Type::Unit);
        let e2 = Expr::let_("z", None, Expr::ascribe(Expr::lazy(Expr::UnitVal, Expr::UnitVal), t("1 & 1")), Expr::Proj(Side::L, Box::new(Expr::var("z")), Some(Polarity::Neg)));
        assert_eq!(
            kind(check_core(&vec![], &e2, &Type::Unit, Mode::Linear)),
            ErrorKind::PolarityMismatch
        );
        let _ = e;
    }

    #[test]
    fn closed_scrutinee_places_binders_anywhere() {
        // (a, b) ⊢ δ((), ().(a, b)) and friends with closed scrutinees
        let ctx = vec![("a".to_string(), Type::Unit), ("b".to_string(), Type::Res)];
        let e = p("match ((), ()) { (x, y) -> match x { () -> match y { () -> (a, b) } } }");
        assert!(check_core(&ctx, &e, &t("1 * R"), Mode::Ordered).is_ok());
        let e = p("match inl () { inl u -> match u { () -> (a, b) } | inr w -> match w { () -> (a, b) } }");
        let ctx2 = ctx.clone();
        let d = check_with(
            &CheckConfig::core(Mode::Ordered),
            &ctx2,
            &Expr::MatchSum {
                scrut: Box::new(Expr::ascribe(Expr::inj(Side::L, Expr::UnitVal), t("1 + 1"))),
                x1: "u".into(),
                body1: Box::new(p("match u { () -> (a, b) }")),
                x2: "w".into(),
                body2: Box::new(p("match w { () -> (a, b) }")),
                ann: None,
            },
            Some(&t("1 * R")),
        );
        assert!(d.is_ok(), "{d:?}");
        let _ = e;
    }
}
