mod common;

use common::{judgments, oracle_accepts, permutations, Ctx};
use ordcbpv::harness::{generated_programs, with_deep_stack, Lane};
use ordcbpv::surface::parse_type;
use ordcbpv::syntax::{erase_all, Expr, Side, Type};
use ordcbpv::typecheck::{check_core, Mode};
use proptest::prelude::*;

fn agree(ctx: &Ctx, e: &Expr, ty: &Type) -> Result<(), String> {
    for m in [Mode::Ordered, Mode::Linear] {
        let alg = check_core(ctx, e, ty, m).is_ok();
        let dec = oracle_accepts(ctx, e, ty, m);
        if alg != dec {
            return Err(format!(
                "{m:?}: algorithmic {alg}, declarative {dec} on {ctx:?} |- {} : {ty}",
                ordcbpv::surface::pretty_print(e)
            ));
        }
    }
    Ok(())
}

#[test]
fn generated_subterms_agree_under_permuted_contexts() {
    with_deep_stack(|| {
        let mut n = 0;
        for lane in [Lane::Core(Mode::Ordered), Lane::Core(Mode::Linear)] {
            for p in generated_programs(lane, 30) {
                let Lane::Core(m) = lane else { unreachable!() };
                let d = check_core(&vec![], &p.expr, &p.ty, m).unwrap();
                for (ctx, e, ty) in judgments(&d) {
                    if erase_all(&e).size() > 12 || ctx.len() > 6 {
                        continue;
                    }
                    for perm in permutations(ctx.len()).into_iter().take(6) {
                        let c: Ctx = perm.iter().map(|i| ctx[*i].clone()).collect();
                        agree(&c, &e, &ty).unwrap();
                        n += 1;
                    }
                }
            }
        }
        assert!(n > 100, "{n}");
    });
}

fn small_ty() -> impl Strategy<Value = Type> {
    prop_oneof![Just("R"), Just("1"), Just("R * R"), Just("R + 1"), Just("R -o 1"), Just("1 & 1")]
        .prop_map(|s| parse_type(s).unwrap())
}

fn small_term(vars: Vec<String>) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        proptest::sample::select(vars).prop_map(|x| Expr::var(&x)),
        Just(Expr::UnitVal),
        Just(Expr::DeleteConst),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::pair(a, b)),
            inner.clone().prop_map(|a| Expr::inj(Side::L, a)),
            (small_ty(), inner.clone()).prop_map(|(t, b)| Expr::lam("z", Some(t), b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::app(a, b)),
            (small_ty(), inner.clone(), inner.clone()).prop_map(|(t, a, b)| Expr::let_("w", Some(t), a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::match_pair(a, "p", "q", b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::match_unit(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::lazy(a, b)),
        ]
    })
}

fn case() -> impl Strategy<Value = (Ctx, Expr, Type)> {
    proptest::collection::vec(small_ty(), 0..=4).prop_flat_map(|tys| {
        let ctx: Ctx = tys.iter().enumerate().map(|(i, t)| (format!("x{i}"), t.clone())).collect();
        let mut vars: Vec<String> = ctx.iter().map(|(x, _)| x.clone()).collect();
        vars.extend(["z", "w", "p", "q"].map(String::from));
        (Just(ctx), small_term(vars), small_ty())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]
    #[test]
    fn random_open_terms_agree((ctx, e, ty) in case()) {
        prop_assume!(e.size() <= 12);
        let r = agree(&ctx, &e, &ty);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}

#[test]
fn resource_order_matches_declarative_search() {
    use common::resource_orders;
    use ordcbpv::harness::{bundled_corpus, target_term};
    use ordcbpv::machine::run;
    use ordcbpv::resources::derive_ordered;
    use ordcbpv::syntax::{is_closed, polarity};
    use ordcbpv::typecheck::{check_with, CheckConfig};
    with_deep_stack(|| {
        let mut programs: Vec<_> = bundled_corpus()
            .into_iter()
            .filter(|p| p.lane == Lane::Core(Mode::Ordered))
            .collect();
        programs.extend(generated_programs(Lane::Core(Mode::Ordered), 20));
        let cfg = CheckConfig::runtime(Mode::Ordered);
        let mut n = 0;
        for p in &programs {
            let (e, ty, _) = target_term(p).unwrap();
            let (_, tr) = run(&e, polarity(&ty), vec![0, 1, 2], 10_000, None).unwrap();
            for c in tr.commands() {
                let x = &c.expr;
                if x.resources().is_empty() || x.resources().len() > 4 || !is_closed(x) || x.size() > 40 {
                    continue;
                }
                let Ok(d) = check_with(&cfg, &vec![], x, None) else { continue };
                let orders = resource_orders(x, &d.ty, Mode::Ordered);
                let got = derive_ordered(x).unwrap().resources;
                assert_eq!(orders, vec![got], "{} : {} {:?}", ordcbpv::surface::pretty_print(x), d.ty, x);
                n += 1;
            }
        }
        assert!(n > 10, "{n}");
    });
}
