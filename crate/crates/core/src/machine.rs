//! The abstract machine over commands `⟨t | s | l⟩^ε`.

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::surface::pretty_print;
use crate::syntax::{
    free_vars, is_final_value, is_value, substitute, substitute2, Expr, Name, Polarity, Side,
    Type,
};

pub const DEFAULT_FUEL: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    /// `v^ε·`
    Arg { value: Expr, ann: Polarity },
    /// `π_i^ε·`
    Proj { side: Side, ann: Polarity },
    /// `(x⁺.u)^ε·`, with the bound type when the let carried one.
    Kont {
        x: Name,
        body: Expr,
        ann: Polarity,
        ty: Option<Type>,
    },
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frame::Arg { value, ann } => write!(f, "({})^{ann}", pretty_print(value)),
            Frame::Proj { side, ann } => write!(f, "pi{}^{ann}", side.index()),
            Frame::Kont { x, body, ann, .. } => {
                write!(f, "({x}+. {})^{ann}", pretty_print(body))
            }
        }
    }
}

#[derive(Debug)]
struct Node {
    frame: Frame,
    next: Stack,
}

/// Persistent stack, top first; the empty stack is `⋆`.
#[derive(Clone, Debug, Default)]
pub struct Stack(Option<Rc<Node>>);

impl Stack {
    pub fn empty() -> Stack {
        Stack(None)
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }
    pub fn push(&self, frame: Frame) -> Stack {
        Stack(Some(Rc::new(Node {
            frame,
            next: self.clone(),
        })))
    }
    pub fn top(&self) -> Option<&Frame> {
        self.0.as_ref().map(|n| &n.frame)
    }
    pub fn pop(&self) -> Option<(&Frame, Stack)> {
        self.0.as_ref().map(|n| (&n.frame, n.next.clone()))
    }
    pub fn iter(&self) -> StackIter<'_> {
        StackIter(self.0.as_deref())
    }
    pub fn len(&self) -> usize {
        self.iter().count()
    }
    /// Non-empty suffixes, top first.
    pub fn suffixes(&self) -> impl Iterator<Item = Stack> + '_ {
        let mut cur = self.clone();
        std::iter::from_fn(move || {
            let node = cur.0.clone()?;
            cur = node.next.clone();
            Some(Stack(Some(node)))
        })
    }
    pub fn from_frames(frames: Vec<Frame>) -> Stack {
        frames
            .into_iter()
            .rev()
            .fold(Stack::empty(), |s, f| s.push(f))
    }
}

/// Per-frame results keyed by frame identity and an extra key. The memo
/// holds on to every stack it has seen so addresses are never reused.
pub struct FrameMemo<K, V> {
    map: HashMap<(usize, K), V>,
    alive: Vec<Stack>,
}

impl<K: Eq + std::hash::Hash, V: Clone> FrameMemo<K, V> {
    pub fn new() -> Self {
        FrameMemo {
            map: HashMap::new(),
            alive: vec![],
        }
    }

    /// `f` of the top frame of the non-empty stack `s`.
    pub fn get_or(&mut self, s: &Stack, key: K, f: impl FnOnce(&Frame) -> V) -> V {
        let frame = s.top().expect("non-empty stack");
        let k = (frame as *const Frame as usize, key);
        if let Some(v) = self.map.get(&k) {
            return v.clone();
        }
        let v = f(frame);
        self.map.insert(k, v.clone());
        self.alive.push(s.clone());
        v
    }
}

impl<K: Eq + std::hash::Hash, V: Clone> Default for FrameMemo<K, V> {
    fn default() -> Self {
        Self::new()
    }
}

pub struct StackIter<'a>(Option<&'a Node>);

impl<'a> Iterator for StackIter<'a> {
    type Item = &'a Frame;
    fn next(&mut self) -> Option<&'a Frame> {
        let n = self.0?;
        self.0 = n.next.0.as_deref();
        Some(&n.frame)
    }
}

impl PartialEq for Stack {
    fn eq(&self, other: &Stack) -> bool {
        self.iter().eq(other.iter())
    }
}
impl Eq for Stack {}

/// Resource indices, head first.
pub type Freelist = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Command {
    pub expr: Expr,
    pub stack: Stack,
    pub freelist: Freelist,
    pub pol: Polarity,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} | ", pretty_print(&self.expr))?;
        for fr in self.stack.iter() {
            write!(f, "{fr} . ")?;
        }
        write!(f, "* | {:?}>^{}", self.freelist, self.pol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    LetNeg,
    LetPos,
    Kont,
    App,
    Beta,
    Proj,
    ProjPair,
    MatchPair,
    MatchUnit,
    MatchSum,
    NewPop,
    NewEmpty,
    Delete,
}

impl RuleId {
    pub const ALL: [RuleId; 13] = [
        RuleId::LetNeg,
        RuleId::LetPos,
        RuleId::Kont,
        RuleId::App,
        RuleId::Beta,
        RuleId::Proj,
        RuleId::ProjPair,
        RuleId::MatchPair,
        RuleId::MatchUnit,
        RuleId::MatchSum,
        RuleId::NewPop,
        RuleId::NewEmpty,
        RuleId::Delete,
    ];
    pub fn name(self) -> &'static str {
        match self {
            RuleId::LetNeg => "let-neg",
            RuleId::LetPos => "let-pos",
            RuleId::Kont => "kont",
            RuleId::App => "app",
            RuleId::Beta => "beta",
            RuleId::Proj => "proj",
            RuleId::ProjPair => "proj-pair",
            RuleId::MatchPair => "match-pair",
            RuleId::MatchUnit => "match-unit",
            RuleId::MatchSum => "match-sum",
            RuleId::NewPop => "new-pop",
            RuleId::NewEmpty => "new-empty",
            RuleId::Delete => "delete",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepResult {
    Stepped(Command, RuleId),
    Final(Expr, Freelist),
    Stuck(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("the program has free variables: {0:?}")]
    OpenTerm(Vec<Name>),
}

pub fn load(e: &Expr, pol: Polarity, l: Freelist) -> Result<Command, MachineError> {
    let fv = free_vars(e);
    if !fv.is_empty() {
        return Err(MachineError::OpenTerm(fv.into_iter().collect()));
    }
    Ok(Command {
        expr: e.clone(),
        stack: Stack::empty(),
        freelist: l,
        pol,
    })
}

fn cmd(expr: Expr, stack: Stack, freelist: Freelist, pol: Polarity) -> Command {
    Command {
        expr,
        stack,
        freelist,
        pol,
    }
}

pub fn step(c: &Command) -> StepResult {
    use Polarity::*;
    let e = c.expr.peel();
    let s = &c.stack;
    let l = &c.freelist;
    let here = |ann: &Option<Polarity>| *ann == Some(c.pol);
    match e {
        Expr::Let {
            x,
            bound,
            body,
            bind: Some(Neg),
            ann,
            ..
        } if here(ann) => {
            return StepResult::Stepped(
                cmd(substitute(body, x, bound), s.clone(), l.clone(), c.pol),
                RuleId::LetNeg,
            )
        }
        Expr::Let {
            x,
            ty,
            bound,
            body,
            bind: Some(Pos),
            ann,
        } if here(ann) => {
            let f = Frame::Kont {
                x: x.clone(),
                body: (**body).clone(),
                ann: c.pol,
                ty: ty.clone(),
            };
            return StepResult::Stepped(
                cmd((**bound).clone(), s.push(f), l.clone(), Pos),
                RuleId::LetPos,
            );
        }
        Expr::App { fun, arg, ann } if here(ann) => {
            let f = Frame::Arg {
                value: (**arg).clone(),
                ann: c.pol,
            };
            return StepResult::Stepped(
                cmd((**fun).clone(), s.push(f), l.clone(), Neg),
                RuleId::App,
            );
        }
        Expr::Proj(i, v, ann) if here(ann) => {
            let f = Frame::Proj {
                side: *i,
                ann: c.pol,
            };
            return StepResult::Stepped(
                cmd((**v).clone(), s.push(f), l.clone(), Neg),
                RuleId::Proj,
            );
        }
        Expr::MatchPair {
            scrut,
            x,
            y,
            body,
            ann,
        } if here(ann) => {
            if let Expr::Pair(v, w) = scrut.peel() {
                return StepResult::Stepped(
                    cmd(substitute2(body, x, v, y, w), s.clone(), l.clone(), c.pol),
                    RuleId::MatchPair,
                );
            }
        }
        Expr::MatchUnit { scrut, body, ann } if here(ann) => {
            if let Expr::UnitVal = scrut.peel() {
                return StepResult::Stepped(
                    cmd((**body).clone(), s.clone(), l.clone(), c.pol),
                    RuleId::MatchUnit,
                );
            }
        }
        Expr::MatchSum {
            scrut,
            x1,
            body1,
            x2,
            body2,
            ann,
        } if here(ann) => {
            if let Expr::Inj(i, v) = scrut.peel() {
                let (x, b) = if *i == Side::L { (x1, body1) } else { (x2, body2) };
                return StepResult::Stepped(
                    cmd(substitute(b, x, v), s.clone(), l.clone(), c.pol),
                    RuleId::MatchSum,
                );
            }
        }
        _ => {}
    }
    if let Some((frame, rest)) = s.pop() {
        match (c.pol, e, frame) {
            (Pos, _, Frame::Kont { x, body, ann, .. }) if is_value(&c.expr) => {
                return StepResult::Stepped(
                    cmd(substitute(body, x, &c.expr), rest, l.clone(), *ann),
                    RuleId::Kont,
                )
            }
            (Neg, Expr::Lambda(x, _, t), Frame::Arg { value, ann }) => {
                return StepResult::Stepped(
                    cmd(substitute(t, x, value), rest, l.clone(), *ann),
                    RuleId::Beta,
                )
            }
            (Neg, Expr::LazyPair(t1, t2), Frame::Proj { side, ann }) => {
                let t = if *side == Side::L { t1 } else { t2 };
                return StepResult::Stepped(
                    cmd((**t).clone(), rest, l.clone(), *ann),
                    RuleId::ProjPair,
                );
            }
            (Neg, Expr::NewConst, Frame::Arg { value, .. })
                if matches!(value.peel(), Expr::UnitVal) =>
            {
                return match l.split_first() {
                    Some((r, tail)) => StepResult::Stepped(
                        cmd(
                            Expr::inj(Side::L, Expr::ResLit(*r)),
                            rest,
                            tail.to_vec(),
                            Pos,
                        ),
                        RuleId::NewPop,
                    ),
                    None => StepResult::Stepped(
                        cmd(Expr::inj(Side::R, Expr::UnitVal), rest, vec![], Pos),
                        RuleId::NewEmpty,
                    ),
                };
            }
            (Neg, Expr::DeleteConst, Frame::Arg { value, .. }) => {
                return match value.peel() {
                    Expr::ResLit(n) => {
                        let mut l2 = Vec::with_capacity(l.len() + 1);
                        l2.push(*n);
                        l2.extend_from_slice(l);
                        StepResult::Stepped(cmd(Expr::UnitVal, rest, l2, Pos), RuleId::Delete)
                    }
                    v => StepResult::Stuck(format!(
                        "Delete applied to a non-resource value {}",
                        pretty_print(v)
                    )),
                };
            }
            _ => {}
        }
    } else if is_final_value(&c.expr) {
        return StepResult::Final(c.expr.clone(), l.clone());
    }
    StepResult::Stuck(format!("no rule applies to {c}"))
}

fn matches_rule(rule: RuleId, c: &Command) -> bool {
    use Polarity::*;
    let e = c.expr.peel();
    let top = c.stack.top();
    let at = |ann: &Option<Polarity>| *ann == Some(c.pol);
    match rule {
        RuleId::LetNeg => matches!(e, Expr::Let { bind: Some(Neg), ann, .. } if at(ann)),
        RuleId::LetPos => matches!(e, Expr::Let { bind: Some(Pos), ann, .. } if at(ann)),
        RuleId::Kont => {
            c.pol == Pos && is_value(&c.expr) && matches!(top, Some(Frame::Kont { .. }))
        }
        RuleId::App => matches!(e, Expr::App { ann, .. } if at(ann)),
        RuleId::Beta => {
            c.pol == Neg
                && matches!(e, Expr::Lambda(..))
                && matches!(top, Some(Frame::Arg { .. }))
        }
        RuleId::Proj => matches!(e, Expr::Proj(_, _, ann) if at(ann)),
        RuleId::ProjPair => {
            c.pol == Neg
                && matches!(e, Expr::LazyPair(..))
                && matches!(top, Some(Frame::Proj { .. }))
        }
        RuleId::MatchPair => matches!(
            e,
            Expr::MatchPair { scrut, ann, .. } if at(ann) && matches!(scrut.peel(), Expr::Pair(..))
        ),
        RuleId::MatchUnit => matches!(
            e,
            Expr::MatchUnit { scrut, ann, .. } if at(ann) && matches!(scrut.peel(), Expr::UnitVal)
        ),
        RuleId::MatchSum => matches!(
            e,
            Expr::MatchSum { scrut, ann, .. } if at(ann) && matches!(scrut.peel(), Expr::Inj(..))
        ),
        RuleId::NewPop | RuleId::NewEmpty => {
            let unit_arg = matches!(top, Some(Frame::Arg { value, .. }) if matches!(value.peel(), Expr::UnitVal));
            let nil = c.freelist.is_empty();
            c.pol == Neg
                && matches!(e, Expr::NewConst)
                && unit_arg
                && (if rule == RuleId::NewPop { !nil } else { nil })
        }
        RuleId::Delete => {
            c.pol == Neg
                && matches!(e, Expr::DeleteConst)
                && matches!(top, Some(Frame::Arg { value, .. }) if matches!(value.peel(), Expr::ResLit(_)))
        }
    }
}

/// Every rule whose left-hand side matches `c`, each tested on its own.
pub fn classify(c: &Command) -> Vec<RuleId> {
    RuleId::ALL
        .iter()
        .copied()
        .filter(|r| matches_rule(*r, c))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Final { value: Expr, freelist: Freelist },
    FuelExhausted(Command),
    Stuck { command: Command, reason: String },
}

impl Outcome {
    pub fn is_final(&self) -> bool {
        matches!(self, Outcome::Final { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub command: Command,
    /// Rule fired from this command, `None` for the last one.
    pub rule: Option<RuleId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.entries.iter().filter(|e| e.rule.is_some()).count()
    }

    pub fn commands(&self) -> impl Iterator<Item = &Command> {
        self.entries.iter().map(|e| &e.command)
    }

    pub fn to_json(&self) -> Json {
        Json::Array(
            self.entries
                .iter()
                .enumerate()
                .map(|(i, e)| entry_json(i, &e.command, e.rule))
                .collect(),
        )
    }
}

pub fn entry_json(step: usize, c: &Command, rule: Option<RuleId>) -> Json {
    json!({
        "step": step,
        "polarity": c.pol.to_string(),
        "expr": pretty_print(&c.expr),
        "stack": c.stack.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        "freelist": c.freelist,
        "rule": rule.map(|r| r.name()),
    })
}

/// Observer called with each command and what `step` made of it.
pub type Hook<'a> = &'a mut dyn FnMut(&Command, &StepResult);

pub fn run_command(
    mut c: Command,
    fuel: usize,
    mut hook: Option<Hook<'_>>,
) -> (Outcome, Trace) {
    let mut trace = Trace::default();
    for _ in 0..fuel {
        let r = step(&c);
        if let Some(h) = hook.as_mut() {
            h(&c, &r);
        }
        match r {
            StepResult::Stepped(next, rule) => {
                trace.entries.push(TraceEntry {
                    command: c,
                    rule: Some(rule),
                });
                c = next;
            }
            StepResult::Final(value, freelist) => {
                trace.entries.push(TraceEntry {
                    command: c,
                    rule: None,
                });
                return (Outcome::Final { value, freelist }, trace);
            }
            StepResult::Stuck(reason) => {
                trace.entries.push(TraceEntry {
                    command: c.clone(),
                    rule: None,
                });
                return (Outcome::Stuck { command: c, reason }, trace);
            }
        }
    }
    trace.entries.push(TraceEntry {
        command: c.clone(),
        rule: None,
    });
    (Outcome::FuelExhausted(c), trace)
}

/// Runs a closed, polarity-annotated term from `⟨e | ⋆ | l⟩^ε`.
pub fn run(
    e: &Expr,
    pol: Polarity,
    l: Freelist,
    fuel: usize,
    hook: Option<Hook<'_>>,
) -> Result<(Outcome, Trace), MachineError> {
    Ok(run_command(load(e, pol, l)?, fuel, hook))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Type;
    use crate::typecheck::{check_command_typing, check_core, Mode};
    use crate::surface::{parse_program, Dialect};

    fn unit_arg() -> Frame {
        Frame::Arg {
            value: Expr::UnitVal,
            ann: Polarity::Pos,
        }
    }

    #[test]
    fn new_and_delete_rules() {
        let c = cmd(
            Expr::NewConst,
            Stack::empty().push(unit_arg()),
            vec![0],
            Polarity::Neg,
        );
        assert_eq!(classify(&c), vec![RuleId::NewPop]);
        let StepResult::Stepped(c2, RuleId::NewPop) = step(&c) else {
            panic!()
        };
        assert_eq!(c2.expr, Expr::inj(Side::L, Expr::ResLit(0)));
        assert!(c2.freelist.is_empty());
        assert_eq!(c2.pol, Polarity::Pos);

        let c = cmd(
            Expr::NewConst,
            Stack::empty().push(unit_arg()),
            vec![],
            Polarity::Neg,
        );
        let StepResult::Stepped(c2, RuleId::NewEmpty) = step(&c) else {
            panic!()
        };
        assert_eq!(c2.expr, Expr::inj(Side::R, Expr::UnitVal));

        let c = cmd(
            Expr::DeleteConst,
            Stack::empty().push(Frame::Arg {
                value: Expr::ResLit(4),
                ann: Polarity::Pos,
            }),
            vec![],
            Polarity::Neg,
        );
        let StepResult::Stepped(c2, RuleId::Delete) = step(&c) else {
            panic!()
        };
        assert_eq!(c2.expr, Expr::UnitVal);
        assert_eq!(c2.freelist, vec![4]);
    }

    #[test]
    fn delete_of_non_resource_is_stuck() {
        let c = cmd(
            Expr::DeleteConst,
            Stack::empty().push(unit_arg()),
            vec![],
            Polarity::Neg,
        );
        assert!(matches!(step(&c), StepResult::Stuck(_)));
        assert!(classify(&c).is_empty());
    }

    #[test]
    fn load_rejects_open_terms() {
        assert!(matches!(
            load(&Expr::var("x"), Polarity::Pos, vec![]),
            Err(MachineError::OpenTerm(_))
        ));
        let c = load(&Expr::UnitVal, Polarity::Pos, vec![]).unwrap();
        assert!(classify(&c).is_empty());
        assert_eq!(
            step(&c),
            StepResult::Final(Expr::UnitVal, vec![])
        );
    }

    #[test]
    fn two_resources_trace() {
        let src = "match new () { inl r -> match new () { inl s -> delete s; delete r | inr i -> i; delete r } | inr i -> i }";
        let e = parse_program(src, Dialect::Core).unwrap();
        let d = check_core(&vec![], &e, &Type::Unit, Mode::Ordered).unwrap();
        let prog = d.to_expr();
        let mut checked = 0;
        let mut hook = |c: &Command, _: &StepResult| {
            check_command_typing(c, &Type::Unit, Mode::Ordered).unwrap();
            checked += 1;
        };
        let (out, trace) = run(&prog, Polarity::Pos, vec![0, 1], DEFAULT_FUEL, Some(&mut hook)).unwrap();
        assert_eq!(
            out,
            Outcome::Final {
                value: Expr::UnitVal,
                freelist: vec![0, 1]
            }
        );
        assert!(checked > 5);
        assert!(trace.commands().any(|c| c.expr == Expr::inj(Side::L, Expr::ResLit(1))
            && c.freelist.is_empty()
            && c.stack.len() == 1));
        for e in &trace.entries {
            let cl = classify(&e.command);
            assert!(cl.len() <= 1);
            if let Some(r) = e.rule {
                assert_eq!(cl, vec![r]);
            }
        }
        let j = trace.to_json();
        assert_eq!(j.as_array().unwrap().len(), trace.entries.len());
    }
}
