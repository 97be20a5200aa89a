#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use ordcbpv::syntax::{erase_polarities, polarity, Expr, Polarity, Side, Type};
use ordcbpv::typecheck::{Deriv, Mode};

pub type Ctx = Vec<(String, Type)>;

/// Declarative derivation search: every context split is tried, and in
/// linear mode every subset. Types not fixed by the term are drawn from a
/// finite universe built from the context, the goal and all annotations.
pub struct Oracle {
    mode: Mode,
    universe: Vec<Type>,
    memo: HashMap<(Ctx, usize, Type), bool>,
}

fn sub_types(t: &Type, out: &mut BTreeSet<String>, all: &mut Vec<Type>) {
    if out.insert(t.to_string()) {
        all.push(t.clone());
    }
    match t {
        Type::Tensor(a, b) | Type::Sum(a, b) | Type::LArrow(a, b) | Type::With(a, b) => {
            sub_types(a, out, all);
            sub_types(b, out, all);
        }
        _ => {}
    }
}

fn annotations(e: &Expr, acc: &mut Vec<Type>) {
    match e {
        Expr::Lambda(_, Some(t), _) | Expr::Ascribe(_, t) => acc.push(t.clone()),
        Expr::Let { ty: Some(t), .. } => acc.push(t.clone()),
        _ => {}
    }
    for c in e.children() {
        annotations(c, acc);
    }
}

fn value_form(e: &Expr) -> bool {
    match e {
        Expr::Var(_)
        | Expr::ResLit(_)
        | Expr::UnitVal
        | Expr::NewConst
        | Expr::DeleteConst
        | Expr::Lambda(..)
        | Expr::LazyPair(..) => true,
        Expr::Pair(a, b) => value_form(a) && value_form(b),
        Expr::Inj(_, a) => value_form(a),
        Expr::Ascribe(a, _) => value_form(a),
        _ => false,
    }
}

/// Every way to write `ctx` as `Γ, Δ` (ordered) or as two sub-multisets.
fn splits2(ctx: &Ctx, mode: Mode) -> Vec<(Ctx, Ctx)> {
    match mode {
        Mode::Ordered => (0..=ctx.len())
            .map(|i| (ctx[..i].to_vec(), ctx[i..].to_vec()))
            .collect(),
        Mode::Linear => (0..1u32 << ctx.len())
            .map(|m| {
                let (mut a, mut b) = (vec![], vec![]);
                for (i, x) in ctx.iter().enumerate() {
                    if m & (1 << i) != 0 {
                        b.push(x.clone())
                    } else {
                        a.push(x.clone())
                    }
                }
                (a, b)
            })
            .collect(),
    }
}

/// Every way to write `ctx` as `Γ, Δ, Γ'`: returns `(Γ, Δ, Γ')`.
fn splits3(ctx: &Ctx, mode: Mode) -> Vec<(Ctx, Ctx, Ctx)> {
    match mode {
        Mode::Ordered => {
            let mut out = vec![];
            for i in 0..=ctx.len() {
                for j in i..=ctx.len() {
                    out.push((ctx[..i].to_vec(), ctx[i..j].to_vec(), ctx[j..].to_vec()));
                }
            }
            out
        }
        Mode::Linear => splits2(ctx, mode)
            .into_iter()
            .map(|(a, b)| (a, b, vec![]))
            .collect(),
    }
}

fn canon(mut ctx: Ctx, mode: Mode) -> Ctx {
    if mode == Mode::Linear {
        ctx.sort_by(|a, b| a.0.cmp(&b.0));
    }
    ctx
}

impl Oracle {
    pub fn new(mode: Mode, ctx: &Ctx, e: &Expr, ty: &Type) -> Oracle {
        let mut seeds: Vec<Type> = ctx.iter().map(|(_, t)| t.clone()).collect();
        seeds.push(ty.clone());
        annotations(e, &mut seeds);
        for t in ["1", "R", "R + 1", "1 -o R + 1", "R -o 1"] {
            seeds.push(ordcbpv::surface::parse_type(t).unwrap());
        }
        let (mut seen, mut universe) = (BTreeSet::new(), vec![]);
        for t in &seeds {
            sub_types(t, &mut seen, &mut universe);
        }
        Oracle {
            mode,
            universe,
            memo: HashMap::new(),
        }
    }

    /// `ctx ⊢ e : ty`, with resources `r_n` read as variables `#n : R`.
    pub fn derivable(&mut self, ctx: &Ctx, e: &Expr, ty: &Type) -> bool {
        let ctx = canon(ctx.clone(), self.mode);
        let key = (ctx.clone(), e as *const Expr as usize, ty.clone());
        if let Some(r) = self.memo.get(&key) {
            return *r;
        }
        let r = self.rule(&ctx, e, ty);
        self.memo.insert(key, r);
        r
    }

    fn value(&mut self, ctx: &Ctx, e: &Expr, ty: &Type) -> bool {
        (value_form(e) || polarity(ty) == Polarity::Neg) && self.derivable(ctx, e, ty)
    }

    fn extend(&self, g: &Ctx, mid: &[(String, Type)], g2: &Ctx) -> Ctx {
        let mut c = g.clone();
        c.extend(mid.iter().cloned());
        c.extend(g2.iter().cloned());
        c
    }

    fn rule(&mut self, ctx: &Ctx, e: &Expr, ty: &Type) -> bool {
        let m = self.mode;
        let t = |s: &str| ordcbpv::surface::parse_type(s).unwrap();
        match e {
            Expr::Var(x) => ctx.len() == 1 && ctx[0].0 == *x && ctx[0].1 == *ty,
            Expr::ResLit(n) => ctx.len() == 1 && ctx[0].0 == format!("#{n}") && *ty == Type::Res,
            Expr::UnitVal => ctx.is_empty() && *ty == Type::Unit,
            Expr::NewConst => ctx.is_empty() && *ty == t("1 -o R + 1"),
            Expr::DeleteConst => ctx.is_empty() && *ty == t("R -o 1"),
            Expr::Pair(a, b) => {
                let Type::Tensor(ta, tb) = ty else { return false };
                splits2(ctx, m)
                    .iter()
                    .any(|(g, d)| self.value(g, a, ta) && self.value(d, b, tb))
            }
            Expr::Inj(side, a) => {
                let Type::Sum(l, r) = ty else { return false };
                let want = if *side == Side::L { l } else { r };
                self.value(ctx, a, want)
            }
            Expr::Lambda(x, ann, body) => {
                let Type::LArrow(a, b) = ty else { return false };
                if ann.as_ref().is_some_and(|t| **a != *t) {
                    return false;
                }
                let mut c = vec![(x.clone(), (**a).clone())];
                c.extend(ctx.iter().cloned());
                self.derivable(&c, body, b)
            }
            Expr::LazyPair(a, b) => {
                let Type::With(ta, tb) = ty else { return false };
                self.derivable(ctx, a, ta) && self.derivable(ctx, b, tb)
            }
            Expr::Let {
                x, ty: ann, bound, body, ..
            } => {
                let cands: Vec<Type> = match ann {
                    Some(a) => vec![a.clone()],
                    None => self.universe.clone(),
                };
                cands.iter().any(|a| {
                    splits2(ctx, m).iter().any(|(g, d)| {
                        self.derivable(d, bound, a) && {
                            let c = self.extend(g, &[(x.clone(), a.clone())], &vec![]);
                            self.derivable(&c, body, ty)
                        }
                    })
                })
            }
            Expr::MatchPair {
                scrut, x, y, body, ..
            } => {
                let cands: Vec<Type> = self
                    .universe
                    .iter()
                    .filter(|t| matches!(t, Type::Tensor(..)))
                    .cloned()
                    .collect();
                cands.iter().any(|st| {
                    let Type::Tensor(a, b) = st else { unreachable!() };
                    splits3(ctx, m).iter().any(|(g, d, g2)| {
                        self.value(d, scrut, st) && {
                            let c = self.extend(
                                g,
                                &[(x.clone(), (**a).clone()), (y.clone(), (**b).clone())],
                                g2,
                            );
                            self.derivable(&c, body, ty)
                        }
                    })
                })
            }
            Expr::MatchUnit { scrut, body, .. } => splits3(ctx, m).iter().any(|(g, d, g2)| {
                self.value(d, scrut, &Type::Unit) && {
                    let c = self.extend(g, &[], g2);
                    self.derivable(&c, body, ty)
                }
            }),
            Expr::MatchSum {
                scrut,
                x1,
                body1,
                x2,
                body2,
                ..
            } => {
                let cands: Vec<Type> = self
                    .universe
                    .iter()
                    .filter(|t| matches!(t, Type::Sum(..)))
                    .cloned()
                    .collect();
                cands.iter().any(|st| {
                    let Type::Sum(a, b) = st else { unreachable!() };
                    splits3(ctx, m).iter().any(|(g, d, g2)| {
                        self.value(d, scrut, st) && {
                            let c1 = self.extend(g, &[(x1.clone(), (**a).clone())], g2);
                            let c2 = self.extend(g, &[(x2.clone(), (**b).clone())], g2);
                            self.derivable(&c1, body1, ty) && self.derivable(&c2, body2, ty)
                        }
                    })
                })
            }
            Expr::App { fun, arg, .. } => {
                let cands = self.universe.clone();
                cands.iter().any(|a| {
                    let ft = Type::larrow(a.clone(), ty.clone());
                    splits2(ctx, m)
                        .iter()
                        .any(|(g, d)| self.value(g, arg, a) && self.value(d, fun, &ft))
                })
            }
            Expr::Proj(side, v, _) => {
                let cands = self.universe.clone();
                cands.iter().any(|o| {
                    let wt = match side {
                        Side::L => Type::with(ty.clone(), o.clone()),
                        Side::R => Type::with(o.clone(), ty.clone()),
                    };
                    self.value(ctx, v, &wt)
                })
            }
            Expr::Ascribe(inner, t) => t == ty && self.derivable(ctx, inner, ty),
            _ => false,
        }
    }
}

pub fn oracle_accepts(ctx: &Ctx, e: &Expr, ty: &Type, mode: Mode) -> bool {
    let e = erase_polarities(e);
    Oracle::new(mode, ctx, &e, ty).derivable(ctx, &e, ty)
}

/// All `(Γ, t, A)` judgments of a derivation, outermost first.
pub fn judgments(d: &Deriv) -> Vec<(Ctx, Expr, Type)> {
    let mut out = vec![(d.ctx.clone(), erase_polarities(&d.to_expr()), d.ty.clone())];
    for k in &d.kids {
        out.extend(judgments(k));
    }
    out
}

/// Permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = vec![];
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Orders of the resources of a closed runtime term under which the
/// declarative rules type it at `ty`.
pub fn resource_orders(e: &Expr, ty: &Type, mode: Mode) -> Vec<Vec<u32>> {
    let mut rs = e.resources();
    rs.sort();
    rs.dedup();
    let e = erase_polarities(e);
    let mut out = vec![];
    for p in permutations(rs.len()) {
        let order: Vec<u32> = p.iter().map(|i| rs[*i]).collect();
        let ctx: Ctx = order.iter().map(|n| (format!("#{n}"), Type::Res)).collect();
        if Oracle::new(mode, &ctx, &e, ty).derivable(&ctx, &e, ty) && !out.contains(&order) {
            out.push(order);
        }
    }
    out
}

/// Every closed value of a positive type whose resources are numbered from
/// `next`, up to `limit` values.
pub fn values_of(ty: &Type, next: &mut u32, limit: usize) -> Vec<Expr> {
    match ty {
        Type::Unit => vec![Expr::UnitVal],
        Type::Res => {
            *next += 1;
            vec![Expr::ResLit(*next)]
        }
        Type::Tensor(a, b) => {
            let mut out = vec![];
            for x in values_of(a, next, limit) {
                for y in values_of(b, next, limit) {
                    if out.len() < limit {
                        out.push(Expr::pair(x.clone(), y));
                    }
                }
            }
            out
        }
        Type::Sum(a, b) => {
            let mut out: Vec<Expr> = values_of(a, next, limit)
                .into_iter()
                .map(|v| Expr::inj(Side::L, v))
                .collect();
            out.extend(values_of(b, next, limit).into_iter().map(|v| Expr::inj(Side::R, v)));
            out.truncate(limit);
            out
        }
        _ => vec![],
    }
}

pub const SMALL_TYPES: &[&str] = &["R", "1", "R * R", "R + 1", "R -o 1", "1 & 1"];

pub fn random_type(rng: &mut impl rand::Rng) -> Type {
    ordcbpv::surface::parse_type(SMALL_TYPES[rng.gen_range(0..SMALL_TYPES.len())]).unwrap()
}

/// A random open term over `vars` with at most `size` nodes, mostly ill-typed.
pub fn random_term(rng: &mut impl rand::Rng, vars: &[String], size: usize) -> Expr {
    let binders = ["z", "w", "p", "q"];
    let pick = |rng: &mut dyn rand::RngCore| -> String {
        let n = vars.len() + binders.len();
        let i = rand::Rng::gen_range(rng, 0..n);
        if i < vars.len() {
            vars[i].clone()
        } else {
            binders[i - vars.len()].to_string()
        }
    };
    if size <= 1 {
        return match rng.gen_range(0..4) {
            0 => Expr::UnitVal,
            1 => Expr::DeleteConst,
            _ => Expr::var(&pick(rng)),
        };
    }
    let s = size - 1;
    let half = |rng: &mut dyn rand::RngCore| rand::Rng::gen_range(rng, 1..=s.max(1));
    match rng.gen_range(0..8) {
        0 => {
            let k = half(rng);
            Expr::pair(random_term(rng, vars, k), random_term(rng, vars, s.saturating_sub(k).max(1)))
        }
        1 => Expr::inj(if rng.gen() { Side::L } else { Side::R }, random_term(rng, vars, s)),
        2 => {
            let t = random_type(rng);
            Expr::lam(binders[rng.gen_range(0..4)], Some(t), random_term(rng, vars, s))
        }
        3 => {
            let k = half(rng);
            Expr::app(random_term(rng, vars, k), random_term(rng, vars, s.saturating_sub(k).max(1)))
        }
        4 => {
            let t = random_type(rng);
            let k = half(rng);
            let x = binders[rng.gen_range(0..4)];
            Expr::let_(x, Some(t), random_term(rng, vars, k), random_term(rng, vars, s.saturating_sub(k).max(1)))
        }
        5 => {
            let k = half(rng);
            Expr::match_pair(random_term(rng, vars, k), "p", "q", random_term(rng, vars, s.saturating_sub(k).max(1)))
        }
        6 => {
            let k = half(rng);
            Expr::match_unit(random_term(rng, vars, k), random_term(rng, vars, s.saturating_sub(k).max(1)))
        }
        _ => {
            let k = half(rng);
            Expr::lazy(random_term(rng, vars, k), random_term(rng, vars, s.saturating_sub(k).max(1)))
        }
    }
}
