//! Translation of affine derivations into the linear calculus.

use std::collections::HashMap;

use thiserror::Error;

use crate::affine::{AffineMode, ExceptionConfig};
use crate::machine::{run, Freelist, Outcome, Trace};
use crate::syntax::{fresh_name, freshen, is_central, polarity, Context, Expr, Name, Polarity, Side, Type};
use crate::typecheck::{check_core, Deriv, Mode, Rule, TypeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    Pos,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `Swap^A_W : A ⊗ W ⊸ W ⊗ A`
    Fwd,
    /// `Swap'^A_W : W ⊗ A ⊸ A ⊗ W`
    Inv,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("{0} is not a central type")]
    NotCentral(Type),
    #[error("the translation does not typecheck: {0}")]
    IllTyped(TypeError),
    #[error("cannot translate {0}")]
    Unsupported(String),
}

/// `⇑A = A ⊕ E`
pub fn up(a: Type, exc: &Type) -> Type {
    Type::sum(a, exc.clone())
}

/// `⇓A = A & 1`
pub fn down(a: Type) -> Type {
    Type::with(a, Type::Unit)
}

/// `A⁺` and `A⁻`.
pub fn translate_type(a: &Type, flavor: Flavor, exc: &Type) -> Type {
    let pos = |t: &Type| translate_type(t, Flavor::Pos, exc);
    let neg = |t: &Type| translate_type(t, Flavor::Neg, exc);
    match (flavor, a) {
        (Flavor::Pos, Type::Res) => Type::Res,
        (Flavor::Pos, Type::Unit) => Type::Unit,
        (Flavor::Pos, Type::Tensor(x, y)) => Type::tensor(pos(x), pos(y)),
        (Flavor::Pos, Type::Sum(x, y)) => Type::sum(pos(x), pos(y)),
        (Flavor::Pos, n) => down(neg(n)),
        (Flavor::Neg, Type::LArrow(x, y)) => Type::larrow(pos(x), neg(y)),
        (Flavor::Neg, Type::With(x, y)) => Type::with(neg(x), neg(y)),
        (Flavor::Neg, p) => up(pos(p), exc),
    }
}

pub fn translate_context(g: &Context, exc: &Type) -> Context {
    g.iter()
        .map(|(x, t)| (x.clone(), translate_type(t, Flavor::Pos, exc)))
        .collect()
}

fn asc(e: Expr, t: Type) -> Expr {
    match &e {
        Expr::Var(_) => e,
        Expr::Ascribe(_, u) if *u == t => e,
        _ => Expr::Ascribe(Box::new(e), t),
    }
}

fn var(x: &Name) -> Expr {
    Expr::Var(x.clone())
}

fn gen(base: &str) -> Name {
    fresh_name(&format!("_{base}"))
}

/// `t; u` with the unit type recorded on the binder.
fn seq(t: Expr, u: Expr) -> Expr {
    let n = gen("u");
    Expr::let_(&n, Some(Type::Unit), t, Expr::match_unit(var(&n), u))
}

fn proj(i: Side, v: Expr) -> Expr {
    Expr::Proj(i, Box::new(v), None)
}

/// Builders for the destructor, unwinding and swap families, memoized per
/// type.
pub struct Elaborator {
    pub cfg: ExceptionConfig,
    drops: HashMap<Type, Expr>,
    swaps: HashMap<(Type, Type, Direction), Expr>,
}

impl Elaborator {
    pub fn new(cfg: ExceptionConfig) -> Self {
        Elaborator {
            cfg,
            drops: HashMap::new(),
            swaps: HashMap::new(),
        }
    }

    fn exc(&self) -> &Type {
        &self.cfg.exc_type
    }

    pub fn pos(&self, a: &Type) -> Type {
        translate_type(a, Flavor::Pos, self.exc())
    }

    pub fn neg(&self, a: &Type) -> Type {
        translate_type(a, Flavor::Neg, self.exc())
    }

    /// Type of the translation of an expression of type `a`: `⇓A⁻`.
    pub fn expr_type(&self, a: &Type) -> Type {
        down(self.neg(a))
    }

    /// `Drop_A : A⁺ ⊸ 1`.
    pub fn build_drop(&mut self, a: &Type) -> Expr {
        if let Some(d) = self.drops.get(a) {
            return d.clone();
        }
        let ap = self.pos(a);
        let body = match a {
            Type::Unit => {
                let v = gen("v");
                Expr::lam(&v, Some(ap.clone()), var(&v))
            }
            Type::Res => {
                let r = gen("r");
                Expr::lam(&r, Some(Type::Res), Expr::app(Expr::DeleteConst, var(&r)))
            }
            Type::Tensor(x, y) => {
                let (p, va, vb) = (gen("p"), gen("a"), gen("b"));
                let dx = self.build_drop(x);
                let dy = self.build_drop(y);
                Expr::lam(
                    &p,
                    Some(ap.clone()),
                    Expr::match_pair(
                        var(&p),
                        &va,
                        &vb,
                        seq(Expr::app(dy, var(&vb)), Expr::app(dx, var(&va))),
                    ),
                )
            }
            Type::Sum(x, y) => {
                let (s, va, vb) = (gen("s"), gen("a"), gen("b"));
                let dx = self.build_drop(x);
                let dy = self.build_drop(y);
                Expr::lam(
                    &s,
                    Some(ap.clone()),
                    Expr::match_sum(
                        var(&s),
                        &va,
                        Expr::app(dx, var(&va)),
                        &vb,
                        Expr::app(dy, var(&vb)),
                    ),
                )
            }
            Type::LArrow(..) | Type::With(..) => {
                let v = gen("a");
                Expr::lam(&v, Some(ap.clone()), proj(Side::R, var(&v)))
            }
        };
        let d = asc(body, Type::larrow(ap, Type::Unit));
        self.drops.insert(a.clone(), d.clone());
        d
    }

    /// `Γ⁺ ⊢ DropCtx_Γ : 1`, dropping from right to left.
    pub fn build_drop_ctx(&mut self, g: &[(Name, Type)]) -> Expr {
        match g.split_last() {
            None => Expr::UnitVal,
            Some(((x, a), rest)) => {
                let d = self.build_drop(a);
                let tail = self.build_drop_ctx(rest);
                seq(Expr::app(d, var(x)), tail)
            }
        }
    }

    /// `Swap^A_W` or `Swap'^A_W` for an already translated `A`.
    pub fn build_swap(&mut self, a: &Type, w: &Type, dir: Direction) -> Result<Expr, ElabError> {
        if !is_central(w) {
            return Err(ElabError::NotCentral(w.clone()));
        }
        let key = (a.clone(), w.clone(), dir);
        if let Some(s) = self.swaps.get(&key) {
            return Ok(s.clone());
        }
        let (dom, cod) = match dir {
            Direction::Fwd => (Type::tensor(a.clone(), w.clone()), Type::tensor(w.clone(), a.clone())),
            Direction::Inv => (Type::tensor(w.clone(), a.clone()), Type::tensor(a.clone(), w.clone())),
        };
        let p = gen("p");
        let va = gen("a");
        let vw = gen("w");
        let body = match (dir, w) {
            (Direction::Fwd, Type::Unit) => {
                let i = gen("i");
                Expr::match_pair(
                    var(&p),
                    &va,
                    &i,
                    Expr::match_unit(var(&i), Expr::pair(Expr::UnitVal, var(&va))),
                )
            }
            (Direction::Inv, Type::Unit) => {
                let i = gen("i");
                Expr::match_pair(
                    var(&p),
                    &i,
                    &va,
                    Expr::match_unit(var(&i), Expr::pair(var(&va), Expr::UnitVal)),
                )
            }
            (_, Type::Sum(w1, w2)) => {
                let branch = |me: &mut Self, side: Side, wi: &Type| -> Result<(Name, Expr), ElabError> {
                    let x = gen("w");
                    let pi = gen("p");
                    let (x2, a2) = (gen("w"), gen("a"));
                    let sw = me.build_swap(a, wi, dir)?;
                    let inj = Expr::inj(side, var(&x2));
                    let (arg, pat, out) = match dir {
                        Direction::Fwd => (
                            Expr::pair(var(&va), var(&x)),
                            (x2.clone(), a2.clone()),
                            Expr::pair(inj, var(&a2)),
                        ),
                        Direction::Inv => (
                            Expr::pair(var(&x), var(&va)),
                            (a2.clone(), x2.clone()),
                            Expr::pair(var(&a2), inj),
                        ),
                    };
                    let pty = match dir {
                        Direction::Fwd => Type::tensor(wi.clone(), a.clone()),
                        Direction::Inv => Type::tensor(a.clone(), wi.clone()),
                    };
                    Ok((
                        x,
                        Expr::let_(
                            &pi,
                            Some(pty),
                            Expr::app(sw, arg),
                            Expr::match_pair(var(&pi), &pat.0, &pat.1, out),
                        ),
                    ))
                };
                let (x1, b1) = branch(self, Side::L, w1)?;
                let (x2, b2) = branch(self, Side::R, w2)?;
                let inner = Expr::match_sum(var(&vw), &x1, b1, &x2, b2);
                match dir {
                    Direction::Fwd => Expr::match_pair(var(&p), &va, &vw, inner),
                    Direction::Inv => Expr::match_pair(var(&p), &vw, &va, inner),
                }
            }
            (Direction::Fwd, Type::Tensor(w1, w2)) => {
                // ((a, w1), w2) ↦ (w2, (a, w1)) ↦ ((w2, a), w1) ↦ (w1, (w2, a))
                let (w1n, w2n) = (gen("w"), gen("w"));
                let aw1 = Type::tensor(a.clone(), (**w1).clone());
                let s1 = self.build_swap(&aw1, w2, Direction::Fwd)?;
                let w2a = Type::tensor((**w2).clone(), a.clone());
                let s2 = self.build_swap(&w2a, w1, Direction::Fwd)?;
                let (p1, q1, w2b, ab, w1b) = (gen("p"), gen("q"), gen("w"), gen("a"), gen("w"));
                let (p2, q2, w1c, w2c, ac) = (gen("p"), gen("q"), gen("w"), gen("w"), gen("a"));
                let last = Expr::let_(
                    &p2,
                    Some(Type::tensor((**w1).clone(), w2a.clone())),
                    Expr::app(s2, Expr::pair(Expr::pair(var(&w2b), var(&ab)), var(&w1b))),
                    Expr::match_pair(
                        var(&p2),
                        &w1c,
                        &q2,
                        Expr::match_pair(
                            var(&q2),
                            &w2c,
                            &ac,
                            Expr::pair(Expr::pair(var(&w1c), var(&w2c)), var(&ac)),
                        ),
                    ),
                );
                let first = Expr::let_(
                    &p1,
                    Some(Type::tensor((**w2).clone(), aw1.clone())),
                    Expr::app(s1, Expr::pair(Expr::pair(var(&va), var(&w1n)), var(&w2n))),
                    Expr::match_pair(
                        var(&p1),
                        &w2b,
                        &q1,
                        Expr::match_pair(var(&q1), &ab, &w1b, last),
                    ),
                );
                Expr::match_pair(
                    var(&p),
                    &va,
                    &vw,
                    Expr::match_pair(var(&vw), &w1n, &w2n, first),
                )
            }
            (Direction::Inv, Type::Tensor(w1, w2)) => {
                // (w1, (w2, a)) ↦ ((w2, a), w1) ↦ (w2, (a, w1)) ↦ ((a, w1), w2)
                let (w1n, w2n) = (gen("w"), gen("w"));
                let w2a = Type::tensor((**w2).clone(), a.clone());
                let s1 = self.build_swap(&w2a, w1, Direction::Inv)?;
                let aw1 = Type::tensor(a.clone(), (**w1).clone());
                let s2 = self.build_swap(&aw1, w2, Direction::Inv)?;
                let (p1, q1, w1b, w2b, ab) = (gen("p"), gen("q"), gen("w"), gen("w"), gen("a"));
                let (p2, q2, w2c, ac, w1c) = (gen("p"), gen("q"), gen("w"), gen("a"), gen("w"));
                let last = Expr::let_(
                    &p2,
                    Some(Type::tensor(aw1.clone(), (**w2).clone())),
                    Expr::app(s2, Expr::pair(var(&w2b), Expr::pair(var(&ab), var(&w1b)))),
                    Expr::match_pair(
                        var(&p2),
                        &q2,
                        &w2c,
                        Expr::match_pair(
                            var(&q2),
                            &ac,
                            &w1c,
                            Expr::pair(var(&ac), Expr::pair(var(&w1c), var(&w2c))),
                        ),
                    ),
                );
                let first = Expr::let_(
                    &p1,
                    Some(Type::tensor(w2a.clone(), (**w1).clone())),
                    Expr::app(s1, Expr::pair(var(&w1n), Expr::pair(var(&w2n), var(&va)))),
                    Expr::match_pair(
                        var(&p1),
                        &q1,
                        &w1b,
                        Expr::match_pair(var(&q1), &w2b, &ab, last),
                    ),
                );
                Expr::match_pair(
                    var(&p),
                    &vw,
                    &va,
                    Expr::match_pair(var(&vw), &w1n, &w2n, first),
                )
            }
            _ => unreachable!("central types are 1, sums and tensors"),
        };
        let s = asc(Expr::lam(&p, Some(dom.clone()), body), Type::larrow(dom, cod));
        self.swaps.insert(key, s.clone());
        Ok(s)
    }

    /// `Γ⁺, e:E ⊢ Unwind_Γ(e) : E`.
    pub fn build_unwind(&mut self, g: &[(Name, Type)], e: &Name) -> Expr {
        match g.split_last() {
            None => var(e),
            Some(((x, a), rest)) => {
                let ap = self.pos(a);
                let exc = self.exc().clone();
                let sw = self
                    .build_swap(&ap, &exc, Direction::Fwd)
                    .expect("exception type is central");
                let d = self.build_drop(a);
                let (p, e2, x2) = (gen("p"), gen("e"), gen("x"));
                let tail = self.build_unwind(rest, &e2);
                Expr::let_(
                    &p,
                    Some(Type::tensor(exc, ap)),
                    Expr::app(sw, Expr::pair(var(x), var(e))),
                    Expr::match_pair(var(&p), &e2, &x2, seq(Expr::app(d, var(&x2)), tail)),
                )
            }
        }
    }

    /// `Γ⁺, e:E ⊢ Raise^A_Γ(e) : A⁻`.
    pub fn build_raise(&mut self, a: &Type, g: &[(Name, Type)], e: &Name) -> Expr {
        let an = self.neg(a);
        match a {
            Type::LArrow(b, c) => {
                let x = gen("b");
                let mut g2 = vec![(x.clone(), (**b).clone())];
                g2.extend(g.iter().cloned());
                let body = self.build_raise(c, &g2, e);
                asc(Expr::lam(&x, Some(self.pos(b)), body), an)
            }
            Type::With(b, c) => {
                let l = self.build_raise(b, g, e);
                let r = self.build_raise(c, g, e);
                asc(Expr::lazy(l, r), an)
            }
            _ => {
                let e2 = gen("e");
                let unwind = self.build_unwind(g, e);
                Expr::let_(
                    &e2,
                    Some(self.exc().clone()),
                    unwind,
                    asc(Expr::inj(Side::R, var(&e2)), an),
                )
            }
        }
    }

    /// `⟨λa. Drop_A a; ι1 (), ()⟩`-style value for a destructor constant at
    /// `A ⊸ 1`.
    fn drop_value(&mut self, a: &Type) -> Expr {
        let d = self.build_drop(a);
        let x = gen("a");
        let u = gen("u");
        let one_up = self.neg(&Type::Unit);
        let f = Expr::lam(
            &x,
            Some(self.pos(a)),
            Expr::let_(
                &u,
                Some(Type::Unit),
                Expr::app(d, var(&x)),
                asc(Expr::inj(Side::L, var(&u)), one_up),
            ),
        );
        Expr::lazy(f, Expr::UnitVal)
    }

    fn new_value(&mut self) -> Expr {
        let (u, x, r, i) = (gen("u"), gen("x"), gen("r"), gen("i"));
        let rt = self.neg(&Type::Res);
        let inner = Expr::let_(
            &x,
            Some(Type::sum(Type::Res, Type::Unit)),
            Expr::app(Expr::NewConst, Expr::UnitVal),
            Expr::match_sum(
                var(&x),
                &r,
                asc(Expr::inj(Side::L, var(&r)), rt.clone()),
                &i,
                seq(var(&i), asc(Expr::inj(Side::R, self.cfg.new_fail.clone()), rt)),
            ),
        );
        let f = Expr::lam(&u, Some(Type::Unit), Expr::match_unit(var(&u), inner));
        Expr::lazy(f, Expr::UnitVal)
    }

    fn is_intro(d: &Deriv) -> bool {
        match &d.rule {
            Rule::Ascribe => Self::is_intro(&d.kids[0]),
            r => matches!(
                r,
                Rule::Var(_)
                    | Rule::Res(_)
                    | Rule::Unit
                    | Rule::New
                    | Rule::Delete
                    | Rule::Drop
                    | Rule::Raise
                    | Rule::Pair
                    | Rule::Inj(_)
                    | Rule::Lambda(_)
                    | Rule::LazyPair
            ),
        }
    }

    /// `Γ⁺ ⊢ [[v]] : A⁺` for a value derivation.
    pub fn value(&mut self, d: &Deriv) -> Result<Expr, ElabError> {
        Ok(match &d.rule {
            Rule::Var(x) => var(x),
            Rule::Res(n) => Expr::ResLit(*n),
            Rule::Unit => Expr::UnitVal,
            Rule::Pair => Expr::pair(self.value(&d.kids[0])?, self.value(&d.kids[1])?),
            Rule::Inj(i) => Expr::inj(*i, self.value(&d.kids[0])?),
            Rule::Ascribe => self.value(&d.kids[0])?,
            Rule::Lambda(x) => {
                let body = &d.kids[0];
                let dom = self.pos(&body.ctx[0].1);
                let t = self.expr_in_synth(body)?;
                let drop = self.build_drop_ctx(&d.ctx);
                Expr::lazy(Expr::lam(x, Some(dom), proj(Side::L, t)), drop)
            }
            Rule::LazyPair => {
                let a = self.expr_in_synth(&d.kids[0])?;
                let b = self.expr_in_synth(&d.kids[1])?;
                let drop = self.build_drop_ctx(&d.ctx);
                Expr::lazy(Expr::lazy(proj(Side::L, a), proj(Side::L, b)), drop)
            }
            Rule::Drop => {
                let Type::LArrow(a, _) = &d.ty else {
                    return Err(ElabError::Unsupported(format!("drop at {}", d.ty)));
                };
                self.drop_value(a)
            }
            Rule::Delete => self.drop_value(&Type::Res),
            Rule::Raise => {
                let Type::LArrow(_, a) = &d.ty else {
                    return Err(ElabError::Unsupported(format!("raise at {}", d.ty)));
                };
                let e = gen("e");
                let body = self.build_raise(a, &[], &e);
                let exc = self.exc().clone();
                Expr::lazy(Expr::lam(&e, Some(exc), body), Expr::UnitVal)
            }
            Rule::New => self.new_value(),
            _ if d.polarity() == Polarity::Neg => self.expr(d)?,
            _ => {
                return Err(ElabError::Unsupported(format!(
                    "positive non-value in value position at type {}",
                    d.ty
                )))
            }
        })
    }

    fn value_in_synth(&mut self, d: &Deriv) -> Result<Expr, ElabError> {
        let t = self.pos(&d.ty);
        Ok(asc(self.value(d)?, t))
    }

    fn expr_in_synth(&mut self, d: &Deriv) -> Result<Expr, ElabError> {
        let t = self.expr_type(&d.ty);
        Ok(asc(self.expr(d)?, t))
    }

    /// `Γ⁺ ⊢ [[t]] : ⇓A⁻` for an expression derivation.
    pub fn expr(&mut self, d: &Deriv) -> Result<Expr, ElabError> {
        if let Rule::Ascribe = d.rule {
            return self.expr(&d.kids[0]);
        }
        if Self::is_intro(d) {
            if d.polarity() == Polarity::Neg {
                return self.value(d);
            }
            let v = self.value(d)?;
            let drop = self.build_drop_ctx(&d.ctx);
            let t = self.neg(&d.ty);
            return Ok(Expr::lazy(asc(Expr::inj(Side::L, v), t), drop));
        }
        let k = &d.kids;
        Ok(match &d.rule {
            Rule::Let(x) => {
                let bound = &k[0];
                let body = self.expr(&k[1])?;
                if bound.is_value() {
                    let v = self.value(bound)?;
                    Expr::let_(x, Some(self.pos(&bound.ty)), v, body)
                } else {
                    let gamma: Context = k[1].ctx[..k[1].ctx.len() - 1].to_vec();
                    let s = gen("s");
                    let e = gen("e");
                    let t = self.expr_in_synth(bound)?;
                    let raise = self.build_raise(&d.ty, &gamma, &e);
                    let mut ge = gamma.clone();
                    ge.push((e.clone(), self.exc().clone()));
                    let drop = self.build_drop_ctx(&ge);
                    Expr::let_(
                        &s,
                        Some(self.neg(&bound.ty)),
                        proj(Side::L, t),
                        Expr::match_sum(var(&s), x, body, &e, Expr::lazy(raise, drop)),
                    )
                }
            }
            Rule::MatchPair(x, y) => {
                let v = self.value_in_synth(&k[0])?;
                Expr::match_pair(v, x, y, self.expr(&k[1])?)
            }
            Rule::MatchUnit => {
                let v = self.value_in_synth(&k[0])?;
                Expr::match_unit(v, self.expr(&k[1])?)
            }
            Rule::MatchSum(x1, x2) => {
                let v = self.value_in_synth(&k[0])?;
                let b1 = self.expr(&k[1])?;
                let b2 = self.expr(&k[2])?;
                Expr::match_sum(v, x1, b1, x2, b2)
            }
            Rule::App => {
                let f = self.value_in_synth(&k[0])?;
                let a = self.value(&k[1])?;
                let drop = self.build_drop_ctx(&d.ctx);
                Expr::lazy(Expr::app(proj(Side::L, f), a), drop)
            }
            Rule::Proj(i) => {
                let v = self.value_in_synth(&k[0])?;
                let drop = self.build_drop_ctx(&d.ctx);
                Expr::lazy(proj(*i, proj(Side::L, v)), drop)
            }
            Rule::Move(..) => self.expr(&k[0])?,
            Rule::Try(x, e) => {
                let s = gen("s");
                let t = self.expr_in_synth(&k[0])?;
                let u = self.expr(&k[1])?;
                let h = self.expr(&k[2])?;
                Expr::let_(
                    &s,
                    Some(self.neg(&k[0].ty)),
                    proj(Side::L, t),
                    Expr::match_sum(var(&s), x, u, e, h),
                )
            }
            Rule::Coerce => {
                let v = self.value(&k[0])?;
                let drop = self.build_drop_ctx(&d.ctx);
                let t = self.neg(&d.ty);
                Expr::lazy(asc(Expr::inj(Side::L, v), t), drop)
            }
            r => return Err(ElabError::Unsupported(format!("{r:?}"))),
        })
    }
}

/// `[[t]]` for an affine expression derivation, at `Γ⁺ ⊢ ⇓A⁻`.
pub fn elaborate(d: &Deriv, cfg: &ExceptionConfig) -> Result<Expr, ElabError> {
    let mut el = Elaborator::new(cfg.clone());
    Ok(freshen(&el.expr(d)?))
}

/// `[[v]]` for an affine value derivation, at `Γ⁺ ⊢ A⁺`.
pub fn elaborate_value(d: &Deriv, cfg: &ExceptionConfig) -> Result<Expr, ElabError> {
    let mut el = Elaborator::new(cfg.clone());
    Ok(freshen(&el.value(d)?))
}

/// Structural mode of the target: the move-free fragment lands in O.
pub fn target_mode(mode: AffineMode) -> Mode {
    match mode {
        AffineMode::NoMove => Mode::Ordered,
        AffineMode::WithMove => Mode::Linear,
    }
}

/// The closed program `π1 [[t]]` of type `A⁻`, checked and decorated in
/// the target calculus.
pub fn affine_program(
    d: &Deriv,
    mode: AffineMode,
    cfg: &ExceptionConfig,
) -> Result<(Expr, Type), ElabError> {
    let el = Elaborator::new(cfg.clone());
    let t = elaborate(d, cfg)?;
    let ty = el.neg(&d.ty);
    let prog = proj(Side::L, asc(t, el.expr_type(&d.ty)));
    let ctx = translate_context(&d.ctx, &cfg.exc_type);
    let checked = check_core(&ctx, &prog, &ty, target_mode(mode)).map_err(ElabError::IllTyped)?;
    Ok((checked.to_expr(), ty))
}

/// Runs `π1 [[t]]` from `⟨π1 [[t]] | ⋆ | l⟩`.
pub fn run_affine(
    d: &Deriv,
    mode: AffineMode,
    cfg: &ExceptionConfig,
    l: Freelist,
    fuel: usize,
) -> Result<(Outcome, Trace), ElabError> {
    let (prog, ty) = affine_program(d, mode, cfg)?;
    run(&prog, polarity(&ty), l, fuel, None)
        .map_err(|e| ElabError::Unsupported(e.to_string()))
}
