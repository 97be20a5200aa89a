mod common;

use common::{oracle_accepts, random_term, random_type, Ctx};
use ordcbpv::affine::{check_affine, AffineMode, ExceptionConfig};
use ordcbpv::harness::{central_targets, generate_capped, with_deep_stack, Lane, GEN_FUEL, GEN_SIZE_CAP};
use ordcbpv::machine::{run, Outcome, DEFAULT_FUEL};
use ordcbpv::surface::{parse_program, pretty_print};
use ordcbpv::syntax::{alpha_eq, erase_polarities, is_value, polarity, substitute, Expr, Type};
use ordcbpv::typecheck::{check_core, Deriv, Mode, Rule};
use proptest::prelude::*;
use rand::SeedableRng;

fn gen(seed: u64, lane: Lane) -> Option<(Expr, Type)> {
    let targets = central_targets();
    let ty = targets[seed as usize % targets.len()].clone();
    with_deep_stack(|| generate_capped(seed, lane, &ty, GEN_FUEL, GEN_SIZE_CAP).ok()).map(|e| (e, ty))
}

fn lets(d: &Deriv, out: &mut Vec<Deriv>) {
    if matches!(d.rule, Rule::Let(_)) {
        out.push(d.clone());
    }
    for k in &d.kids {
        lets(k, out);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pretty_print_round_trips(seed in 0u64..2000, lane in 0usize..4) {
        let lane = Lane::ALL[lane];
        if let Some((e, _)) = gen(seed, lane) {
            let back = parse_program(&pretty_print(&e), lane.dialect()).unwrap();
            prop_assert!(alpha_eq(&e, &back), "{}", pretty_print(&e));
        }
    }

    #[test]
    fn ordered_programs_are_linear(seed in 0u64..2000) {
        if let Some((e, ty)) = gen(seed, Lane::Core(Mode::Ordered)) {
            prop_assert!(check_core(&vec![], &e, &ty, Mode::Linear).is_ok());
        }
    }

    #[test]
    fn ordered_acceptance_implies_linear_on_open_terms(seed in any::<u64>()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ctx: Ctx = (0..3).map(|i| (format!("x{i}"), random_type(&mut rng))).collect();
        let vars: Vec<String> = ctx.iter().map(|(x, _)| x.clone()).collect();
        let e = random_term(&mut rng, &vars, 8);
        let t = random_type(&mut rng);
        if check_core(&ctx, &e, &t, Mode::Ordered).is_ok() {
            prop_assert!(check_core(&ctx, &e, &t, Mode::Linear).is_ok());
            prop_assert!(oracle_accepts(&ctx, &e, &t, Mode::Linear));
        }
    }

    #[test]
    fn decoration_and_erasure_preserve_typing(seed in 0u64..2000, lane in 0usize..2) {
        let Lane::Core(m) = Lane::ALL[lane] else { unreachable!() };
        if let Some((e, ty)) = gen(seed, Lane::ALL[lane]) {
            let d = check_core(&vec![], &e, &ty, m).unwrap();
            let decorated = d.to_expr();
            let again = check_core(&vec![], &decorated, &ty, m).unwrap();
            prop_assert_eq!(again.ty, ty.clone());
            prop_assert!(check_core(&vec![], &erase_polarities(&decorated), &ty, m).is_ok());
        }
    }

    #[test]
    fn substituting_let_bound_values(seed in 0u64..2000, lane in 0usize..2) {
        let Lane::Core(m) = Lane::ALL[lane] else { unreachable!() };
        if let Some((e, ty)) = gen(seed, Lane::ALL[lane]) {
            let d = check_core(&vec![], &e, &ty, m).unwrap();
            let mut found = vec![];
            lets(&d, &mut found);
            for l in found {
                let Rule::Let(x) = &l.rule else { unreachable!() };
                let v = l.kids[0].to_expr();
                if !is_value(&erase_polarities(&v)) {
                    continue;
                }
                let body = l.kids[1].to_expr();
                let s = substitute(&body, x, &v);
                let r = with_deep_stack(|| check_core(&l.ctx, &s, &l.ty, m).map(|_| ()));
                prop_assert!(r.is_ok(), "{:?}", r);
            }
        }
    }

    #[test]
    fn nomove_programs_typecheck_with_move(seed in 0u64..2000) {
        if let Some((e, ty)) = gen(seed, Lane::Affine(AffineMode::NoMove)) {
            let cfg = ExceptionConfig::default();
            prop_assert!(check_affine(&vec![], &e, &ty, AffineMode::WithMove, &cfg).is_ok());
        }
    }

    #[test]
    fn ordered_runs_restore_any_freelist(seed in 0u64..2000, l in proptest::collection::vec(0u32..1000, 0..6)) {
        if let Some((e, ty)) = gen(seed, Lane::Core(Mode::Ordered)) {
            let d = check_core(&vec![], &e, &ty, Mode::Ordered).unwrap();
            let mut fl = l.clone();
            fl.sort_unstable();
            fl.dedup();
            let out = with_deep_stack(|| match run(&d.to_expr(), polarity(&ty), fl.clone(), DEFAULT_FUEL, None) {
                Ok((Outcome::Final { freelist, .. }, _)) => Ok(freelist),
                other => Err(format!("{:?}", other.map(|o| o.0))),
            });
            prop_assert_eq!(out, Ok(fl));
        }
    }
}
