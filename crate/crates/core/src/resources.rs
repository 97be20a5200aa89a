//! Resource tracking: the ordered judgment `Γ; L; Δ ⊢_o t`, its linear
//! multiset counterpart `M; Γ ⊢_l t`, and their extension to commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::machine::{Command, Frame, FrameMemo};
use crate::syntax::{Expr, Name};
use crate::typecheck::Mode;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ResourceError {
    #[error("contexts {} and {} cannot be composed", .0 .0, .0 .1)]
    NotComposable(Box<(ResourceContext, ResourceContext)>),
    #[error("no ordered resource derivation: {0}")]
    NotDerivable(String),
    #[error("not a linear expression with resources: {0}")]
    LinearityViolation(String),
}

type R<T> = Result<T, ResourceError>;

/// `Θ = Γ; L; Δ`. Variable types play no role and are omitted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResourceContext {
    pub gamma: Vec<Name>,
    pub resources: Vec<u32>,
    pub delta: Vec<Name>,
}

impl ResourceContext {
    pub fn new(gamma: &[&str], resources: &[u32], delta: &[&str]) -> Self {
        ResourceContext {
            gamma: gamma.iter().map(|s| s.to_string()).collect(),
            resources: resources.to_vec(),
            delta: delta.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for ResourceContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r: Vec<String> = self.resources.iter().map(|n| format!("r{n}")).collect();
        write!(
            f,
            "({}; [{}]; {})",
            self.gamma.join(","),
            r.join(","),
            self.delta.join(",")
        )
    }
}

/// `Θ ⋄ Θ'`, trying the three cases in order.
pub fn compose_contexts(a: &ResourceContext, b: &ResourceContext) -> R<ResourceContext> {
    if a.resources.is_empty() {
        let mut gamma = a.gamma.clone();
        gamma.extend(a.delta.iter().cloned());
        gamma.extend(b.gamma.iter().cloned());
        return Ok(ResourceContext {
            gamma,
            resources: b.resources.clone(),
            delta: b.delta.clone(),
        });
    }
    if b.resources.is_empty() {
        let mut delta = a.delta.clone();
        delta.extend(b.gamma.iter().cloned());
        delta.extend(b.delta.iter().cloned());
        return Ok(ResourceContext {
            gamma: a.gamma.clone(),
            resources: a.resources.clone(),
            delta,
        });
    }
    if a.delta.is_empty() && b.gamma.is_empty() {
        let mut resources = a.resources.clone();
        resources.extend(b.resources.iter().copied());
        return Ok(ResourceContext {
            gamma: a.gamma.clone(),
            resources,
            delta: b.delta.clone(),
        });
    }
    Err(ResourceError::NotComposable(Box::new((a.clone(), b.clone()))))
}

/// Derivable contexts of a term. With no resources every split point of
/// the variable sequence is derivable, so such contexts are kept as the
/// bare sequence.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Theta {
    Flex(Vec<Name>),
    Fixed(ResourceContext),
}

impl Theta {
    fn to_context(&self) -> ResourceContext {
        match self {
            Theta::Flex(v) => ResourceContext {
                gamma: v.clone(),
                resources: vec![],
                delta: vec![],
            },
            Theta::Fixed(c) => c.clone(),
        }
    }

    fn names(&self) -> Vec<&Name> {
        match self {
            Theta::Flex(v) => v.iter().collect(),
            Theta::Fixed(c) => c.gamma.iter().chain(c.delta.iter()).collect(),
        }
    }
}

fn compose(a: &Theta, b: &Theta) -> Option<Theta> {
    let an = a.names();
    if b.names().iter().any(|n| an.contains(n)) {
        return None;
    }
    Some(match (a, b) {
        (Theta::Flex(x), Theta::Flex(y)) => Theta::Flex(x.iter().chain(y).cloned().collect()),
        _ => {
            let c = compose_contexts(&a.to_context(), &b.to_context()).ok()?;
            if c.resources.is_empty() {
                Theta::Flex(c.gamma.into_iter().chain(c.delta).collect())
            } else {
                Theta::Fixed(c)
            }
        }
    })
}

type Set = BTreeSet<Theta>;

fn compose_sets(a: &Set, b: &Set) -> Set {
    let mut out = Set::new();
    for x in a {
        for y in b {
            if let Some(z) = compose(x, y) {
                out.insert(z);
            }
        }
    }
    out
}

fn compose3(a: &Set, b: &Set, c: &Set) -> Set {
    let mut out = compose_sets(&compose_sets(a, b), c);
    out.extend(compose_sets(a, &compose_sets(b, c)));
    out
}

/// All `(Θ, Θ'')` with `Θ ⋄ Θ'' = t`.
fn decompose(t: &Theta) -> Vec<(Theta, Theta)> {
    let mut out = vec![];
    match t {
        Theta::Flex(v) => {
            for i in 0..=v.len() {
                out.push((Theta::Flex(v[..i].to_vec()), Theta::Flex(v[i..].to_vec())));
            }
        }
        Theta::Fixed(c) => {
            for i in 0..=c.gamma.len() {
                out.push((
                    Theta::Flex(c.gamma[..i].to_vec()),
                    Theta::Fixed(ResourceContext {
                        gamma: c.gamma[i..].to_vec(),
                        resources: c.resources.clone(),
                        delta: c.delta.clone(),
                    }),
                ));
            }
            for j in 0..=c.delta.len() {
                out.push((
                    Theta::Fixed(ResourceContext {
                        gamma: c.gamma.clone(),
                        resources: c.resources.clone(),
                        delta: c.delta[..j].to_vec(),
                    }),
                    Theta::Flex(c.delta[j..].to_vec()),
                ));
            }
            for k in 1..c.resources.len() {
                out.push((
                    Theta::Fixed(ResourceContext {
                        gamma: c.gamma.clone(),
                        resources: c.resources[..k].to_vec(),
                        delta: vec![],
                    }),
                    Theta::Fixed(ResourceContext {
                        gamma: vec![],
                        resources: c.resources[k..].to_vec(),
                        delta: c.delta.clone(),
                    }),
                ));
            }
        }
    }
    out
}

/// All `(Θ, Θ'')` with `(Θ, xs) ⋄ Θ'' = t`.
fn decompose_around(t: &Theta, xs: &[&Name]) -> Vec<(Theta, Theta)> {
    decompose(t)
        .into_iter()
        .filter_map(|(a, b)| strip_right(&a, xs).map(|a| (a, b)))
        .collect()
}

/// `Θ` from `Θ, xs`.
fn strip_right(t: &Theta, xs: &[&Name]) -> Option<Theta> {
    let ends = |v: &Vec<Name>| {
        v.len() >= xs.len() && v[v.len() - xs.len()..].iter().zip(xs).all(|(a, b)| a == *b)
    };
    match t {
        Theta::Flex(v) if ends(v) => Some(Theta::Flex(v[..v.len() - xs.len()].to_vec())),
        Theta::Fixed(c) if ends(&c.delta) => {
            let mut c = c.clone();
            c.delta.truncate(c.delta.len() - xs.len());
            Some(Theta::Fixed(c))
        }
        _ => None,
    }
}

/// `Θ` from `x, Θ`.
fn strip_left(t: &Theta, x: &Name) -> Option<Theta> {
    match t {
        Theta::Flex(v) if v.first() == Some(x) => Some(Theta::Flex(v[1..].to_vec())),
        Theta::Fixed(c) if c.gamma.first() == Some(x) => {
            let mut c = c.clone();
            c.gamma.remove(0);
            Some(Theta::Fixed(c))
        }
        _ => None,
    }
}

fn derive_set(e: &Expr) -> R<Set> {
    let fail = |what: &str| ResourceError::NotDerivable(what.to_string());
    let nonempty = |s: Set, what: &str| if s.is_empty() { Err(fail(what)) } else { Ok(s) };
    let single = |t: Theta| -> Set { [t].into_iter().collect() };
    match e {
        Expr::Var(x) => Ok(single(Theta::Flex(vec![x.clone()]))),
        Expr::UnitVal | Expr::NewConst | Expr::DeleteConst => Ok(single(Theta::Flex(vec![]))),
        Expr::ResLit(n) => Ok(single(Theta::Fixed(ResourceContext {
            gamma: vec![],
            resources: vec![*n],
            delta: vec![],
        }))),
        Expr::Inj(_, v) | Expr::Proj(_, v, _) | Expr::Ascribe(v, _) => derive_set(v),
        Expr::LazyPair(t, u) => {
            let a = derive_set(t)?;
            let b = derive_set(u)?;
            nonempty(a.intersection(&b).cloned().collect(), "lazy pair components disagree")
        }
        Expr::Lambda(x, _, t) => {
            let s: Set = derive_set(t)?.iter().filter_map(|th| strip_left(th, x)).collect();
            nonempty(s, "lambda binder is not leftmost")
        }
        Expr::Pair(v, w) => nonempty(
            compose_sets(&derive_set(v)?, &derive_set(w)?),
            "pair components do not compose",
        ),
        Expr::App { fun, arg, .. } => nonempty(
            compose_sets(&derive_set(arg)?, &derive_set(fun)?),
            "argument and function do not compose",
        ),
        Expr::Let { x, bound, body, .. } => {
            let u: Set = derive_set(body)?
                .iter()
                .filter_map(|th| strip_right(th, &[x]))
                .collect();
            nonempty(
                compose_sets(&u, &derive_set(bound)?),
                "let binder is not rightmost or contexts do not compose",
            )
        }
        Expr::MatchPair {
            scrut, x, y, body, ..
        } => {
            let v = derive_set(scrut)?;
            let mut out = Set::new();
            for t in derive_set(body)? {
                for (a, c) in decompose_around(&t, &[x, y]) {
                    out.extend(compose3(&single(a), &v, &single(c)));
                }
            }
            nonempty(out, "pair pattern")
        }
        Expr::MatchUnit { scrut, body, .. } => {
            let v = derive_set(scrut)?;
            let mut out = Set::new();
            for t in derive_set(body)? {
                for (a, c) in decompose(&t) {
                    out.extend(compose3(&single(a), &v, &single(c)));
                }
            }
            nonempty(out, "unit pattern")
        }
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ..
        } => {
            let v = derive_set(scrut)?;
            let mut left = BTreeSet::new();
            for t in derive_set(body1)? {
                left.extend(decompose_around(&t, &[x1]));
            }
            let mut right = BTreeSet::new();
            for t in derive_set(body2)? {
                right.extend(decompose_around(&t, &[x2]));
            }
            let mut out = Set::new();
            for (a, c) in left.intersection(&right) {
                out.extend(compose3(&single(a.clone()), &v, &single(c.clone())));
            }
            nonempty(out, "sum pattern branches disagree")
        }
        Expr::DropConst
        | Expr::RaiseConst
        | Expr::MoveIn { .. }
        | Expr::TryIn { .. }
        | Expr::Coerce(_) => Err(fail("affine constructs have no resource judgment")),
    }
}

/// Every context `Θ` with `Θ ⊢_o e`. Resource-free results are reported
/// with all variables in Γ.
pub fn derive_ordered_all(e: &Expr) -> R<Vec<ResourceContext>> {
    Ok(derive_set(e)?.iter().map(|t| t.to_context()).collect())
}

/// The context of `e` in the ordered judgment; `LR(e)` is its resource list.
pub fn derive_ordered(e: &Expr) -> R<ResourceContext> {
    let all = derive_ordered_all(e)?;
    if all.len() > 1 {
        return Err(ResourceError::NotDerivable(format!(
            "ambiguous contexts: {}",
            all.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" | ")
        )));
    }
    Ok(all.into_iter().next().expect("nonempty"))
}

/// `M; Γ`, with M a multiset of resource indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearResourceContext {
    pub resources: BTreeMap<u32, usize>,
    pub vars: BTreeSet<Name>,
}

impl LinearResourceContext {
    pub fn from_list(l: &[u32]) -> Self {
        let mut c = LinearResourceContext::default();
        for n in l {
            *c.resources.entry(*n).or_default() += 1;
        }
        c
    }

    pub fn resource_list(&self) -> Vec<u32> {
        self.resources
            .iter()
            .flat_map(|(n, k)| std::iter::repeat_n(*n, *k))
            .collect()
    }

    fn union(mut self, other: LinearResourceContext) -> R<Self> {
        for (n, k) in other.resources {
            *self.resources.entry(n).or_default() += k;
        }
        for v in other.vars {
            if !self.vars.insert(v.clone()) {
                return Err(ResourceError::LinearityViolation(format!(
                    "`{v}` is used twice"
                )));
            }
        }
        Ok(self)
    }

    fn bind(mut self, x: &Name) -> R<Self> {
        if self.vars.remove(x) {
            Ok(self)
        } else {
            Err(ResourceError::LinearityViolation(format!(
                "`{x}` is never used"
            )))
        }
    }
}

/// `M; Γ ⊢_l e`.
pub fn derive_linear(e: &Expr) -> R<LinearResourceContext> {
    let same = |a: LinearResourceContext, b: LinearResourceContext, what: &str| {
        if a == b {
            Ok(a)
        } else {
            Err(ResourceError::LinearityViolation(format!(
                "{what} use different resources or variables"
            )))
        }
    };
    match e {
        Expr::Var(x) => Ok(LinearResourceContext {
            resources: BTreeMap::new(),
            vars: [x.clone()].into_iter().collect(),
        }),
        Expr::UnitVal | Expr::NewConst | Expr::DeleteConst => Ok(Default::default()),
        Expr::ResLit(n) => Ok(LinearResourceContext::from_list(&[*n])),
        Expr::Inj(_, v) | Expr::Proj(_, v, _) | Expr::Ascribe(v, _) => derive_linear(v),
        Expr::LazyPair(t, u) => same(derive_linear(t)?, derive_linear(u)?, "lazy pair components"),
        Expr::Lambda(x, _, t) => derive_linear(t)?.bind(x),
        Expr::Pair(v, w) => derive_linear(v)?.union(derive_linear(w)?),
        Expr::App { fun, arg, .. } => derive_linear(arg)?.union(derive_linear(fun)?),
        Expr::Let { x, bound, body, .. } => {
            derive_linear(body)?.bind(x)?.union(derive_linear(bound)?)
        }
        Expr::MatchPair {
            scrut, x, y, body, ..
        } => derive_linear(body)?
            .bind(x)?
            .bind(y)?
            .union(derive_linear(scrut)?),
        Expr::MatchUnit { scrut, body, .. } => derive_linear(body)?.union(derive_linear(scrut)?),
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ..
        } => {
            let a = derive_linear(body1)?.bind(x1)?;
            let b = derive_linear(body2)?.bind(x2)?;
            same(a, b, "sum branches")?.union(derive_linear(scrut)?)
        }
        Expr::DropConst
        | Expr::RaiseConst
        | Expr::MoveIn { .. }
        | Expr::TryIn { .. }
        | Expr::Coerce(_) => Err(ResourceError::LinearityViolation(
            "affine constructs have no resource judgment".into(),
        )),
    }
}

/// Resources of a command: an ordered list, or in linear mode the sorted
/// multiset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommandResources {
    Ordered(Vec<u32>),
    Linear(Vec<u32>),
}

impl CommandResources {
    pub fn as_slice(&self) -> &[u32] {
        match self {
            CommandResources::Ordered(v) | CommandResources::Linear(v) => v,
        }
    }
}

fn closed_ordered(e: &Expr, bound: Option<&Name>) -> R<Vec<u32>> {
    for th in derive_set(e)? {
        match (&th, bound) {
            (Theta::Flex(v), None) if v.is_empty() => return Ok(vec![]),
            (Theta::Flex(v), Some(x)) if v.len() == 1 && v[0] == *x => return Ok(vec![]),
            (Theta::Fixed(c), None) if c.gamma.is_empty() && c.delta.is_empty() => {
                return Ok(c.resources.clone())
            }
            (Theta::Fixed(c), Some(x))
                if c.gamma.is_empty() && c.delta.len() == 1 && c.delta[0] == *x =>
            {
                return Ok(c.resources.clone())
            }
            _ => {}
        }
    }
    Err(ResourceError::NotDerivable(format!(
        "no context of the shape required by the stack and command rules for {}",
        crate::surface::pretty_print(e)
    )))
}

fn closed_linear(e: &Expr, bound: Option<&Name>) -> R<Vec<u32>> {
    let mut c = derive_linear(e)?;
    if let Some(x) = bound {
        c = c.bind(x)?;
    }
    if let Some(v) = c.vars.iter().next() {
        return Err(ResourceError::LinearityViolation(format!("`{v}` is free")));
    }
    Ok(c.resource_list())
}

fn frame_resources(f: &Frame, mode: Mode) -> R<Vec<u32>> {
    let get = |e: &Expr, b: Option<&Name>| match mode {
        Mode::Ordered => closed_ordered(e, b),
        Mode::Linear => closed_linear(e, b),
    };
    match f {
        Frame::Arg { value, .. } => get(value, None),
        Frame::Kont { x, body, .. } => get(body, Some(x)),
        Frame::Proj { .. } => Ok(vec![]),
    }
}

/// Frame resource lists reusable across the commands of one run in one mode.
pub type ResourceMemo = FrameMemo<(), R<Vec<u32>>>;

/// `L_s ⧺ L_t ⧺ l` for `⟨t | s | l⟩`, or its multiset in linear mode.
pub fn command_resources(c: &Command, mode: Mode) -> R<CommandResources> {
    command_resources_memo(c, mode, &mut ResourceMemo::new())
}

pub fn command_resources_memo(c: &Command, mode: Mode, memo: &mut ResourceMemo) -> R<CommandResources> {
    let mut per_frame = vec![];
    for s in c.stack.suffixes() {
        per_frame.push(memo.get_or(&s, (), |f| frame_resources(f, mode))?);
    }
    let mut acc: Vec<u32> = vec![];
    for r in per_frame.iter().rev() {
        acc.extend(r);
    }
    match mode {
        Mode::Ordered => acc.extend(closed_ordered(&c.expr, None)?),
        Mode::Linear => acc.extend(closed_linear(&c.expr, None)?),
    }
    acc.extend(c.freelist.iter().copied());
    Ok(match mode {
        Mode::Ordered => CommandResources::Ordered(acc),
        Mode::Linear => {
            acc.sort_unstable();
            CommandResources::Linear(acc)
        }
    })
}

pub fn check_preservation(before: &Command, after: &Command, mode: Mode) -> bool {
    match (command_resources(before, mode), command_resources(after, mode)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::Stack;
    use crate::syntax::Polarity;

    #[test]
    fn composition_cases() {
        let a = ResourceContext::new(&["a"], &[], &["b"]);
        let b = ResourceContext::new(&["c"], &[1], &[]);
        assert_eq!(
            compose_contexts(&a, &b).unwrap(),
            ResourceContext::new(&["a", "b", "c"], &[1], &[])
        );
        let a = ResourceContext::new(&[], &[1], &[]);
        let b = ResourceContext::new(&[], &[2], &[]);
        assert_eq!(
            compose_contexts(&a, &b).unwrap(),
            ResourceContext::new(&[], &[1, 2], &[])
        );
        let a = ResourceContext::new(&[], &[1], &["x"]);
        let b = ResourceContext::new(&["y"], &[2], &[]);
        assert!(matches!(
            compose_contexts(&a, &b),
            Err(ResourceError::NotComposable(..))
        ));
    }

    #[test]
    fn ordered_derivations() {
        assert_eq!(
            derive_ordered(&Expr::ResLit(7)).unwrap(),
            ResourceContext::new(&[], &[7], &[])
        );
        let p = Expr::pair(Expr::ResLit(1), Expr::ResLit(2));
        assert_eq!(derive_ordered(&p).unwrap().resources, vec![1, 2]);
        let p = Expr::pair(Expr::var("x"), Expr::ResLit(2));
        assert_eq!(
            derive_ordered(&p).unwrap(),
            ResourceContext::new(&["x"], &[2], &[])
        );
        // λx.(r, x) needs x leftmost but it sits right of r
        let bad = Expr::lam("x", None, Expr::pair(Expr::ResLit(1), Expr::var("x")));
        assert!(derive_ordered(&bad).is_err());
    }

    #[test]
    fn linear_derivations() {
        let p = Expr::pair(Expr::ResLit(2), Expr::ResLit(1));
        assert_eq!(derive_linear(&p).unwrap().resource_list(), vec![1, 2]);
        let l = Expr::lam("x", None, Expr::app(Expr::DeleteConst, Expr::var("x")));
        let c = derive_linear(&l).unwrap();
        assert!(c.resources.is_empty() && c.vars.is_empty());
        let dup = Expr::pair(Expr::var("x"), Expr::var("x"));
        assert!(derive_linear(&dup).is_err());
    }

    #[test]
    fn delete_step_preserves() {
        let before = Command {
            expr: Expr::DeleteConst,
            stack: Stack::empty().push(Frame::Arg {
                value: Expr::ResLit(7),
                ann: Polarity::Pos,
            }),
            freelist: vec![2],
            pol: Polarity::Neg,
        };
        let after = Command {
            expr: Expr::UnitVal,
            stack: Stack::empty(),
            freelist: vec![7, 2],
            pol: Polarity::Pos,
        };
        assert_eq!(
            command_resources(&before, Mode::Ordered).unwrap(),
            CommandResources::Ordered(vec![7, 2])
        );
        assert!(check_preservation(&before, &after, Mode::Ordered));
        assert!(check_preservation(&before, &after, Mode::Linear));
    }
}
