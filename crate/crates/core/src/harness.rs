//! Corpus, random well-typed programs and the property sweep.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value as Json;
use thiserror::Error;

use crate::affine::{check_affine, AffineMode, ExceptionConfig};
use crate::elaborate::{affine_program, target_mode};
use crate::machine::{classify, run, Freelist, Outcome, StepResult, DEFAULT_FUEL};
use crate::resources::{command_resources_memo, ResourceMemo};
use crate::surface::{parse_program, parse_type, pretty_print, Dialect};
use crate::syntax::{is_central, is_final_value, polarity, Expr, Name, Side, Type};
use crate::typecheck::{check_command_typing_memo, check_core, Mode, TypingMemo};

/// Which checker a program is meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lane {
    Core(Mode),
    Affine(AffineMode),
}

impl Lane {
    pub const ALL: [Lane; 4] = [
        Lane::Core(Mode::Ordered),
        Lane::Core(Mode::Linear),
        Lane::Affine(AffineMode::NoMove),
        Lane::Affine(AffineMode::WithMove),
    ];

    pub fn mode_name(self) -> &'static str {
        match self {
            Lane::Core(Mode::Ordered) => "ordered",
            Lane::Core(Mode::Linear) => "linear",
            Lane::Affine(AffineMode::NoMove) => "nomove",
            Lane::Affine(AffineMode::WithMove) => "withmove",
        }
    }

    pub fn dialect(self) -> Dialect {
        match self {
            Lane::Core(_) => Dialect::Core,
            Lane::Affine(_) => Dialect::Affine,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Program {
    pub name: String,
    pub lane: Lane,
    pub expr: Expr,
    pub ty: Type,
}

pub const BUNDLED: &[(&str, &str)] = &[
    ("two_resources.ord", include_str!("../corpus/two_resources.ord")),
    ("counterexample_p.ord", include_str!("../corpus/counterexample_p.ord")),
    ("three_alloc.afn", include_str!("../corpus/three_alloc.afn")),
    ("move_swap.afn", include_str!("../corpus/move_swap.afn")),
    ("try_unless.afn", include_str!("../corpus/try_unless.afn")),
    ("closure.afn", include_str!("../corpus/closure.afn")),
    ("lazy_pair.afn", include_str!("../corpus/lazy_pair.afn")),
    ("raise_unit.afn", include_str!("../corpus/raise_unit.afn")),
];

#[derive(Clone, Debug, Error)]
pub enum CorpusError {
    #[error("{0}: unknown extension, expected .ord or .afn")]
    Extension(String),
    #[error("{0}: {1}")]
    Parse(String, String),
    #[error("{0}: rejected by every checker: {1}")]
    Rejected(String, String),
    #[error("{0}: {1}")]
    Io(String, String),
}

/// Type from a leading `-- type: T` line, `1` otherwise.
pub fn declared_type(text: &str) -> Result<Type, String> {
    match text.lines().next().and_then(|l| l.trim().strip_prefix("-- type:")) {
        Some(t) => parse_type(t.trim()).map_err(|e| e.to_string()),
        None => Ok(Type::Unit),
    }
}

/// Every lane whose checker accepts the file.
pub fn load_program(name: &str, text: &str, cfg: &ExceptionConfig) -> Result<Vec<Program>, CorpusError> {
    let dialect = Dialect::from_path(name).ok_or_else(|| CorpusError::Extension(name.into()))?;
    let expr = parse_program(text, dialect).map_err(|e| CorpusError::Parse(name.into(), e.to_string()))?;
    let ty = declared_type(text).map_err(|e| CorpusError::Parse(name.into(), e))?;
    let mut out = vec![];
    let mut last = String::new();
    for lane in Lane::ALL.into_iter().filter(|l| l.dialect() == dialect) {
        let r = match lane {
            Lane::Core(m) => check_core(&vec![], &expr, &ty, m).map(|_| ()),
            Lane::Affine(m) => check_affine(&vec![], &expr, &ty, m, cfg).map(|_| ()),
        };
        match r {
            Ok(()) => out.push(Program {
                name: name.into(),
                lane,
                expr: expr.clone(),
                ty: ty.clone(),
            }),
            Err(e) => last = e.to_string(),
        }
    }
    if out.is_empty() {
        return Err(CorpusError::Rejected(name.into(), last));
    }
    Ok(out)
}

pub fn bundled_corpus() -> Vec<Program> {
    let cfg = ExceptionConfig::default();
    BUNDLED
        .iter()
        .flat_map(|(n, t)| load_program(n, t, &cfg).expect("bundled corpus checks"))
        .collect()
}

pub fn load_corpus_dir(dir: &std::path::Path, cfg: &ExceptionConfig) -> Result<Vec<Program>, CorpusError> {
    let io = |e: std::io::Error| CorpusError::Io(dir.display().to_string(), e.to_string());
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("ord" | "afn")))
        .collect();
    paths.sort();
    let mut out = vec![];
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(io)?;
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        out.extend(load_program(&name, &text, cfg)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// generation

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("generation exhausted for seed {seed} at type {ty} with fuel {fuel}")]
    GenerationExhausted { seed: u64, ty: Type, fuel: usize },
}

const ATTEMPTS: u64 = 32;

struct Gen {
    rng: ChaCha8Rng,
    lane: Lane,
    next: usize,
}

type Ctx = Vec<(Name, Type)>;

impl Gen {
    fn name(&mut self, base: &str) -> Name {
        self.next += 1;
        format!("{base}{}", self.next)
    }

    fn linear(&self) -> bool {
        self.lane == Lane::Core(Mode::Linear)
    }

    fn affine(&self) -> bool {
        matches!(self.lane, Lane::Affine(_))
    }

    fn with_move(&self) -> bool {
        self.lane == Lane::Affine(AffineMode::WithMove)
    }

    fn small(&mut self, fuel: usize) -> usize {
        self.rng.gen_range(0..=fuel.min(2))
    }

    /// Closed value of a positive resource-free type.
    fn value(&mut self, ty: &Type) -> Option<Expr> {
        match ty {
            Type::Unit => Some(Expr::UnitVal),
            Type::Tensor(a, b) => Some(Expr::pair(self.value(a)?, self.value(b)?)),
            Type::Sum(a, b) => {
                let first = if self.rng.gen_bool(0.5) { Side::L } else { Side::R };
                let other = if first == Side::L { Side::R } else { Side::L };
                for side in [first, other] {
                    let t = if side == Side::L { a } else { b };
                    if let Some(v) = self.value(t) {
                        return Some(Expr::inj(side, v));
                    }
                }
                None
            }
            _ => None,
        }
    }

    fn release(&mut self, x: &Name, t: &Type, rest: Expr) -> Expr {
        let head = if self.affine() {
            Expr::app(Expr::DropConst, Expr::Var(x.clone()))
        } else {
            match t {
                Type::Res => Expr::app(Expr::DeleteConst, Expr::Var(x.clone())),
                _ => return Expr::match_unit(Expr::Var(x.clone()), rest),
            }
        };
        let u = self.name("u");
        Expr::let_(&u, Some(Type::Unit), head, Expr::match_unit(Expr::var(&u), rest))
    }

    /// Consumes the context, then returns a closed value.
    fn close(&mut self, mut ctx: Ctx, ty: &Type) -> Option<Expr> {
        if ctx.is_empty() {
            return self.value(ty);
        }
        if self.with_move() && ctx.len() >= 2 && self.rng.gen_bool(0.5) {
            let n = ctx.len();
            ctx.swap(n - 2, n - 1);
            let (x, y) = (ctx[n - 2].0.clone(), ctx[n - 1].0.clone());
            let body = self.close(ctx, ty)?;
            return Some(Expr::MoveIn {
                x,
                y,
                body: Box::new(body),
            });
        }
        let i = if self.linear() {
            self.rng.gen_range(0..ctx.len())
        } else {
            ctx.len() - 1
        };
        let (x, t) = ctx.remove(i);
        let rest = self.close(ctx, ty)?;
        Some(self.release(&x, &t, rest))
    }

    fn expr(&mut self, ctx: Ctx, ty: &Type, fuel: usize) -> Option<Expr> {
        if fuel == 0 {
            return self.close(ctx, ty);
        }
        let f = fuel - 1;
        let mut moves: Vec<(u32, u8)> = vec![(5, 0), (2, 1)];
        if !ctx.is_empty() {
            moves.extend([(3, 2), (2, 3), (2, 4), (1, 5)]);
        }
        if ctx.iter().any(|(_, t)| *t == Type::Res) {
            moves.push((3, 6));
        }
        if self.affine() {
            moves.extend([(1, 7), (2, 8)]);
        }
        if self.with_move() && ctx.len() >= 2 {
            moves.push((2, 9));
        }
        let total: u32 = moves.iter().map(|m| m.0).sum();
        let mut pick = self.rng.gen_range(0..total);
        let choice = moves
            .iter()
            .find(|(w, _)| {
                if pick < *w {
                    true
                } else {
                    pick -= w;
                    false
                }
            })
            .unwrap()
            .1;
        match choice {
            0 => self.alloc(ctx, ty, f),
            1 => self.closure(ctx, ty, f),
            2 => {
                let i = if self.linear() {
                    self.rng.gen_range(0..ctx.len())
                } else {
                    ctx.len() - 1
                };
                let mut ctx = ctx;
                let (x, t) = ctx.remove(i);
                let rest = self.expr(ctx, ty, f)?;
                Some(self.release(&x, &t, rest))
            }
            3 => self.pair(ctx, ty, f),
            4 => self.sum(ctx, ty, f),
            5 => self.lazy(ctx, ty, f),
            6 => self.res_closure(ctx, ty, f),
            7 => self.raise(ctx, ty, f),
            8 => self.try_new(ctx, ty, f),
            _ => {
                let mut ctx = ctx;
                let n = ctx.len();
                ctx.swap(n - 2, n - 1);
                let (x, y) = (ctx[n - 2].0.clone(), ctx[n - 1].0.clone());
                let body = self.expr(ctx, ty, f)?;
                Some(Expr::MoveIn {
                    x,
                    y,
                    body: Box::new(body),
                })
            }
        }
    }

    fn alloc(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let r = self.name("r");
        let mut ok = ctx.clone();
        ok.push((r.clone(), Type::Res));
        if self.affine() {
            let body = self.expr(ok, ty, f)?;
            return Some(Expr::let_(
                &r,
                Some(Type::Res),
                Expr::app(Expr::NewConst, Expr::UnitVal),
                body,
            ));
        }
        let (x, i) = (self.name("x"), self.name("i"));
        let body1 = self.expr(ok, ty, f)?;
        let k = self.small(f);
        let body2 = self.expr(ctx, ty, k)?;
        Some(Expr::let_(
            &x,
            Some(Type::sum(Type::Res, Type::Unit)),
            Expr::app(Expr::NewConst, Expr::UnitVal),
            Expr::match_sum(
                Expr::var(&x),
                &r,
                body1,
                &i,
                Expr::match_unit(Expr::var(&i), body2),
            ),
        ))
    }

    /// Splits off the variables a closure captures: a suffix in ordered
    /// lanes, any subset in the linear one.
    fn capture(&mut self, ctx: Ctx) -> (Ctx, Ctx) {
        if self.linear() {
            let (mut keep, mut cap) = (vec![], vec![]);
            for b in ctx {
                if self.rng.gen_bool(0.5) {
                    cap.push(b)
                } else {
                    keep.push(b)
                }
            }
            (keep, cap)
        } else {
            let k = self.rng.gen_range(0..=ctx.len());
            let mut keep = ctx;
            let cap = keep.split_off(k);
            (keep, cap)
        }
    }

    /// `let f = fun y -> t in let v = f a in match v { () -> u }`
    fn apply_closure(&mut self, keep: Ctx, arg: Option<Name>, cap: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let (fname, y, v) = (self.name("f"), self.name("y"), self.name("v"));
        let dom = if arg.is_some() { Type::Res } else { Type::Unit };
        let mut inner = vec![(y.clone(), dom.clone())];
        inner.extend(cap);
        let k = self.small(f);
        let body = self.expr(inner, &Type::Unit, k)?;
        let rest = self.expr(keep, ty, f)?;
        let a = arg.map(Expr::Var).unwrap_or(Expr::UnitVal);
        Some(Expr::let_(
            &fname,
            Some(Type::larrow(dom.clone(), Type::Unit)),
            Expr::lam(&y, Some(dom), body),
            Expr::let_(
                &v,
                Some(Type::Unit),
                Expr::app(Expr::var(&fname), a),
                Expr::match_unit(Expr::var(&v), rest),
            ),
        ))
    }

    fn closure(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let (keep, cap) = self.capture(ctx);
        self.apply_closure(keep, None, cap, ty, f)
    }

    fn res_closure(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let idx: Vec<usize> = (0..ctx.len()).filter(|i| ctx[*i].1 == Type::Res).collect();
        let i = *idx.choose(&mut self.rng)?;
        let mut ctx = ctx;
        let (r, _) = ctx.remove(i);
        let (keep, cap) = if self.linear() {
            self.capture(ctx)
        } else {
            let cap = ctx.split_off(i);
            (ctx, cap)
        };
        self.apply_closure(keep, Some(r), cap, ty, f)
    }

    fn pair(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let mut ctx = ctx;
        let (x, a) = ctx.pop()?;
        let p = self.name("p");
        let (l, r) = (self.name("a"), self.name("b"));
        if let Some((y, b)) = ctx.pop() {
            let mut inner = ctx;
            inner.push((l.clone(), b.clone()));
            inner.push((r.clone(), a.clone()));
            let body = self.expr(inner, ty, f)?;
            return Some(Expr::let_(
                &p,
                Some(Type::tensor(b, a)),
                Expr::pair(Expr::Var(y), Expr::Var(x)),
                Expr::match_pair(Expr::var(&p), &l, &r, body),
            ));
        }
        let mut inner = ctx;
        inner.push((l.clone(), a.clone()));
        inner.push((r.clone(), Type::Unit));
        let body = self.expr(inner, ty, f)?;
        Some(Expr::let_(
            &p,
            Some(Type::tensor(a, Type::Unit)),
            Expr::pair(Expr::Var(x), Expr::UnitVal),
            Expr::match_pair(Expr::var(&p), &l, &r, body),
        ))
    }

    fn sum(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let mut ctx = ctx;
        let (x, a) = ctx.pop()?;
        let (s, l, i) = (self.name("s"), self.name("a"), self.name("i"));
        let mut inner = ctx.clone();
        inner.push((l.clone(), a.clone()));
        let body1 = self.expr(inner, ty, f)?;
        let k = self.small(f);
        let mut dead = ctx;
        dead.push((i.clone(), Type::Unit));
        let body2 = self.expr(dead, ty, k)?;
        Some(Expr::let_(
            &s,
            Some(Type::sum(a, Type::Unit)),
            Expr::inj(Side::L, Expr::Var(x)),
            Expr::match_sum(Expr::var(&s), &l, body1, &i, body2),
        ))
    }

    fn lazy(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let (keep, cap) = self.capture(ctx);
        let (q, v) = (self.name("q"), self.name("v"));
        let k1 = self.small(f);
        let k2 = self.small(f);
        let a = self.expr(cap.clone(), &Type::Unit, k1)?;
        let b = self.expr(cap, &Type::Unit, k2)?;
        let side = if self.rng.gen_bool(0.5) { Side::L } else { Side::R };
        let rest = self.expr(keep, ty, f)?;
        Some(Expr::let_(
            &q,
            Some(Type::with(Type::Unit, Type::Unit)),
            Expr::lazy(a, b),
            Expr::let_(
                &v,
                Some(Type::Unit),
                Expr::proj(side, Expr::var(&q)),
                Expr::match_unit(Expr::var(&v), rest),
            ),
        ))
    }

    fn raise(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let u = self.name("u");
        let k = self.small(f);
        let rest = self.expr(ctx, ty, k)?;
        Some(Expr::let_(
            &u,
            Some(Type::Unit),
            Expr::app(Expr::RaiseConst, Expr::UnitVal),
            Expr::match_unit(Expr::var(&u), rest),
        ))
    }

    fn try_new(&mut self, ctx: Ctx, ty: &Type, f: usize) -> Option<Expr> {
        let (x, e) = (self.name("r"), self.name("e"));
        let mut ok = ctx.clone();
        ok.push((x.clone(), Type::Res));
        let body = self.expr(ok, ty, f)?;
        let mut bad = ctx;
        bad.push((e.clone(), Type::Unit));
        let k = self.small(f);
        let handler = self.expr(bad, ty, k)?;
        Some(Expr::TryIn {
            x,
            bound: Box::new(Expr::app(Expr::NewConst, Expr::UnitVal)),
            body: Box::new(body),
            exc: e,
            handler: Box::new(handler),
        })
    }
}

/// Stack size for threads running the checker and elaborator on generated
/// terms.
pub const DEEP_STACK: usize = 512 << 20;

/// Runs `f` on a thread with `DEEP_STACK` bytes of stack.
pub fn with_deep_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(DEEP_STACK)
            .spawn_scoped(s, f)
            .expect("spawn")
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}

/// Accepted by the lane's checker, and for affine lanes also elaborated.
pub fn validate(lane: Lane, e: &Expr, ty: &Type) -> bool {
    with_deep_stack(|| validate_here(lane, e, ty))
}

fn validate_here(lane: Lane, e: &Expr, ty: &Type) -> bool {
    match lane {
        Lane::Core(m) => check_core(&vec![], e, ty, m).is_ok(),
        Lane::Affine(m) => {
            let cfg = ExceptionConfig::default();
            match check_affine(&vec![], e, ty, m, &cfg) {
                Ok(d) => affine_program(&d, m, &cfg).is_ok(),
                Err(_) => false,
            }
        }
    }
}

/// A closed term accepted at `ty` by the lane's checker. Deterministic per
/// seed.
pub fn generate_well_typed(seed: u64, lane: Lane, ty: &Type, fuel: usize) -> Result<Expr, GenError> {
    generate_capped(seed, lane, ty, fuel, usize::MAX)
}

/// As `generate_well_typed`, discarding candidates with more than `cap`
/// nodes.
pub fn generate_capped(seed: u64, lane: Lane, ty: &Type, fuel: usize, cap: usize) -> Result<Expr, GenError> {
    for attempt in 0..ATTEMPTS {
        let mut g = Gen {
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_mul(ATTEMPTS).wrapping_add(attempt)),
            lane,
            next: 0,
        };
        if let Some(e) = g.expr(vec![], ty, fuel) {
            if e.size() <= cap && validate(lane, &e, ty) {
                return Ok(e);
            }
        }
    }
    Err(GenError::GenerationExhausted {
        seed,
        ty: ty.clone(),
        fuel,
    })
}

/// Central types cycled through by the sweep.
pub fn central_targets() -> Vec<Type> {
    ["1", "1 + 1", "1 * 1", "(1 + 1) * 1", "1 + (1 * 1)"]
        .iter()
        .map(|t| parse_type(t).unwrap())
        .collect()
}

/// The first `count` programs obtainable from seeds `0, 1, …` under the
/// sweep's fuel and size cap, cycling through the central targets.
pub fn generated_programs(lane: Lane, count: usize) -> Vec<Program> {
    let targets = central_targets();
    let mut out = vec![];
    let mut seed = 0u64;
    while out.len() < count && seed < (count as u64) * 8 + 64 {
        let ty = targets[seed as usize % targets.len()].clone();
        if let Ok(expr) = generate_capped(seed, lane, &ty, GEN_FUEL, GEN_SIZE_CAP) {
            out.push(Program {
                name: format!("gen-{}-{seed}", lane.mode_name()),
                lane,
                expr,
                ty,
            });
        }
        seed += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// verification

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Identical,
    Permutation,
    Violation,
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub freelist: Freelist,
    pub steps: usize,
    pub outcome: String,
    pub final_freelist: Option<Freelist>,
    pub determinism_ok: bool,
    pub subject_reduction_ok: bool,
    pub progress_ok: bool,
    pub resource_list_preserved: bool,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Json>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.determinism_ok
            && self.subject_reduction_ok
            && self.progress_ok
            && self.resource_list_preserved
            && self.verdict != Verdict::Violation
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProgramRecord {
    pub name: String,
    pub mode: String,
    pub dialect: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub source: String,
    pub freelists_tried: Vec<Freelist>,
    pub steps: usize,
    pub determinism_ok: bool,
    pub subject_reduction_ok: bool,
    pub progress_ok: bool,
    pub resource_list_preserved: bool,
    pub final_freelist_verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub runs: Vec<RunRecord>,
}

impl ProgramRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.runs.iter().all(RunRecord::ok)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub programs: Vec<ProgramRecord>,
    pub total_runs: usize,
    pub total_steps: usize,
    pub all_pass: bool,
}

fn verdict(lane_mode: Mode, central: bool, before: &[u32], after: &[u32]) -> Verdict {
    if !central {
        return Verdict::NotApplicable;
    }
    if before == after {
        return Verdict::Identical;
    }
    let (mut a, mut b) = (before.to_vec(), after.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    if lane_mode == Mode::Linear && a == b {
        Verdict::Permutation
    } else {
        Verdict::Violation
    }
}

/// A closed target-calculus term with its type and structural mode.
pub fn target_term(p: &Program) -> Result<(Expr, Type, Mode), String> {
    match p.lane {
        Lane::Core(m) => check_core(&vec![], &p.expr, &p.ty, m)
            .map(|d| (d.to_expr(), p.ty.clone(), m))
            .map_err(|e| e.to_string()),
        Lane::Affine(m) => {
            let cfg = ExceptionConfig::default();
            let d = check_affine(&vec![], &p.expr, &p.ty, m, &cfg).map_err(|e| e.to_string())?;
            let (e, ty) = affine_program(&d, m, &cfg).map_err(|e| e.to_string())?;
            Ok((e, ty, target_mode(m)))
        }
    }
}

/// Runs a closed, decorated term with every hook enabled.
pub fn verify_run(e: &Expr, ty: &Type, mode: Mode, l: Freelist, fuel: usize) -> RunRecord {
    let mut det = true;
    let mut sr = true;
    let mut res = true;
    let mut failures = vec![];
    let mut initial: Option<Vec<u32>> = None;
    let mut tmemo = TypingMemo::new();
    let mut rmemo = ResourceMemo::new();
    let mut hook = |c: &crate::machine::Command, r: &StepResult| {
        let fired = classify(c);
        let consistent = match r {
            StepResult::Stepped(_, rule) => fired == [*rule],
            _ => fired.is_empty(),
        };
        if fired.len() > 1 || !consistent {
            det = false;
            failures.push(format!("determinism: {:?} at {c}", fired));
        }
        if let Err(err) = check_command_typing_memo(c, ty, mode, &mut tmemo) {
            if sr {
                failures.push(format!("typing: {err} at {c}"));
            }
            sr = false;
        }
        match command_resources_memo(c, mode, &mut rmemo) {
            Ok(now) => {
                let now = now.as_slice().to_vec();
                match &initial {
                    None => initial = Some(now),
                    Some(i) if *i != now => {
                        if res {
                            failures.push(format!("resources: {i:?} became {now:?} at {c}"));
                        }
                        res = false;
                    }
                    _ => {}
                }
            }
            Err(err) => {
                if res {
                    failures.push(format!("resources: {err} at {c}"));
                }
                res = false;
            }
        }
    };
    let run_result = run(e, polarity(ty), l.clone(), fuel, Some(&mut hook));
    let (outcome, trace) = match run_result {
        Ok(r) => r,
        Err(err) => {
            return RunRecord {
                freelist: l,
                steps: 0,
                outcome: format!("error: {err}"),
                final_freelist: None,
                determinism_ok: false,
                subject_reduction_ok: false,
                progress_ok: false,
                resource_list_preserved: false,
                verdict: Verdict::Violation,
                trace: None,
                failures: vec![err.to_string()],
            }
        }
    };
    let central = is_central(ty);
    let (desc, progress, fin, v) = match &outcome {
        Outcome::Final { value, freelist } => {
            let shape = is_final_value(value);
            if !shape {
                failures.push(format!("final value {} has no final shape", pretty_print(value)));
            }
            let v = verdict(mode, central, &l, freelist);
            (
                format!("final: {}", pretty_print(&crate::syntax::erase_all(value))),
                shape,
                Some(freelist.clone()),
                v,
            )
        }
        Outcome::Stuck { reason, .. } => {
            failures.push(format!("stuck: {reason}"));
            (format!("stuck: {reason}"), false, None, Verdict::Violation)
        }
        Outcome::FuelExhausted(_) => {
            failures.push("fuel exhausted".into());
            ("fuel exhausted".into(), true, None, Verdict::Violation)
        }
    };
    let mut rec = RunRecord {
        freelist: l,
        steps: trace.steps(),
        outcome: desc,
        final_freelist: fin,
        determinism_ok: det,
        subject_reduction_ok: sr,
        progress_ok: progress,
        resource_list_preserved: res,
        verdict: v,
        trace: None,
        failures,
    };
    if !rec.ok() {
        rec.trace = Some(trace.to_json());
    }
    rec
}

pub fn freelists(max_len: usize) -> Vec<Freelist> {
    (0..=max_len as u32).map(|k| (0..k).collect()).collect()
}

pub fn verify_program(p: &Program, lists: &[Freelist], fuel: usize) -> ProgramRecord {
    let mut rec = ProgramRecord {
        name: p.name.clone(),
        mode: p.lane.mode_name().into(),
        dialect: match p.lane.dialect() {
            Dialect::Core => "core".into(),
            Dialect::Affine => "affine".into(),
        },
        ty: p.ty.to_string(),
        source: pretty_print(&p.expr),
        freelists_tried: lists.to_vec(),
        steps: 0,
        determinism_ok: true,
        subject_reduction_ok: true,
        progress_ok: true,
        resource_list_preserved: true,
        final_freelist_verdict: Verdict::NotApplicable,
        error: None,
        runs: vec![],
    };
    let (e, ty, mode) = match target_term(p) {
        Ok(t) => t,
        Err(err) => {
            rec.error = Some(err);
            rec.determinism_ok = false;
            rec.subject_reduction_ok = false;
            rec.progress_ok = false;
            rec.resource_list_preserved = false;
            rec.final_freelist_verdict = Verdict::Violation;
            return rec;
        }
    };
    for l in lists {
        let r = verify_run(&e, &ty, mode, l.clone(), fuel);
        rec.steps += r.steps;
        rec.determinism_ok &= r.determinism_ok;
        rec.subject_reduction_ok &= r.subject_reduction_ok;
        rec.progress_ok &= r.progress_ok;
        rec.resource_list_preserved &= r.resource_list_preserved;
        rec.final_freelist_verdict = worst(rec.final_freelist_verdict, r.verdict);
        rec.runs.push(r);
    }
    rec
}

fn worst(a: Verdict, b: Verdict) -> Verdict {
    let rank = |v: Verdict| match v {
        Verdict::NotApplicable => 0,
        Verdict::Identical => 1,
        Verdict::Permutation => 2,
        Verdict::Violation => 3,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

/// Verifies programs on worker threads; the report keeps input order.
pub fn verify_all(programs: &[Program], max_freelist: usize, fuel: usize) -> VerificationReport {
    let lists = freelists(max_freelist);
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(1);
    let chunk = programs.len().div_ceil(workers).max(1);
    let records: Vec<ProgramRecord> = std::thread::scope(|s| {
        let handles: Vec<_> = programs
            .chunks(chunk)
            .map(|ps| {
                let lists = &lists;
                std::thread::Builder::new()
                    .stack_size(DEEP_STACK)
                    .spawn_scoped(s, move || {
                        ps.iter().map(|p| verify_program(p, lists, fuel)).collect::<Vec<_>>()
                    })
                    .expect("spawn")
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let total_runs = records.iter().map(|r| r.runs.len()).sum();
    let total_steps = records.iter().map(|r| r.steps).sum();
    let all_pass = records.iter().all(ProgramRecord::ok);
    VerificationReport {
        programs: records,
        total_runs,
        total_steps,
        all_pass,
    }
}

/// The corpus plus `per_lane` generated programs for each lane.
pub fn verify_properties(corpus: &[Program], per_lane: usize, max_freelist: usize) -> VerificationReport {
    let mut all = corpus.to_vec();
    for lane in Lane::ALL {
        all.extend(generated_programs(lane, per_lane));
    }
    verify_all(&all, max_freelist, DEFAULT_FUEL)
}

/// Generator fuel used by the sweep.
pub const GEN_FUEL: usize = 4;
/// Node cap on generated source terms in the sweep.
pub const GEN_SIZE_CAP: usize = 48;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_loads_into_expected_lanes() {
        let c = bundled_corpus();
        let lanes = |n: &str| c.iter().filter(|p| p.name == n).map(|p| p.lane).collect::<Vec<_>>();
        assert_eq!(
            lanes("two_resources.ord"),
            vec![Lane::Core(Mode::Ordered), Lane::Core(Mode::Linear)]
        );
        assert_eq!(lanes("counterexample_p.ord"), vec![Lane::Core(Mode::Linear)]);
        assert_eq!(lanes("move_swap.afn"), vec![Lane::Affine(AffineMode::WithMove)]);
    }

    #[test]
    fn zero_fuel_gives_unit() {
        for seed in 0..5 {
            let e = generate_well_typed(seed, Lane::Core(Mode::Ordered), &Type::Unit, 0).unwrap();
            assert_eq!(e, Expr::UnitVal);
        }
    }

    #[test]
    fn resource_target_is_exhausted() {
        let r = generate_well_typed(1, Lane::Core(Mode::Ordered), &Type::Res, 3);
        assert!(matches!(r, Err(GenError::GenerationExhausted { .. })));
    }

    #[test]
    fn generation_is_deterministic_and_checked() {
        for lane in Lane::ALL {
            for seed in 0..10 {
                let a = generate_well_typed(seed, lane, &Type::Unit, 8).unwrap();
                let b = generate_well_typed(seed, lane, &Type::Unit, 8).unwrap();
                assert_eq!(a, b);
                assert!(validate(lane, &a, &Type::Unit));
            }
        }
    }

    #[test]
    fn verdicts() {
        assert_eq!(verdict(Mode::Ordered, true, &[0, 1], &[0, 1]), Verdict::Identical);
        assert_eq!(verdict(Mode::Ordered, true, &[0, 1], &[1, 0]), Verdict::Violation);
        assert_eq!(verdict(Mode::Linear, true, &[0, 1], &[1, 0]), Verdict::Permutation);
        assert_eq!(verdict(Mode::Linear, true, &[0, 1], &[1]), Verdict::Violation);
        assert_eq!(verdict(Mode::Linear, false, &[0, 1], &[1]), Verdict::NotApplicable);
    }

    #[test]
    fn bundled_corpus_passes() {
        let report = verify_all(&bundled_corpus(), 3, DEFAULT_FUEL);
        for p in &report.programs {
            assert!(p.ok(), "{} {}: {:?}", p.name, p.mode, p.runs.iter().flat_map(|r| r.failures.clone()).collect::<Vec<_>>());
        }
    }
}
