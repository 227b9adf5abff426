use std::fmt::Write;

use neurasp::ground::{ground, GroundProgram};
use neurasp::lang::{parse_formula, parse_program};
use neurasp::stable::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn program(src: &str) -> GroundProgram {
    expand_neural(&ground(&parse_program(src).unwrap()).unwrap())
}

fn names(gp: &GroundProgram, models: &[Interpretation]) -> Vec<Vec<String>> {
    models.iter().map(|m| m.names(&gp.atoms)).collect()
}

fn brute_force(gp: &GroundProgram) -> Vec<Interpretation> {
    let n = gp.atoms.len();
    assert!(n <= 20, "{n} atoms");
    sorted(
        (0u32..1 << n)
            .map(|bits| Interpretation::new((0..n as u32).filter(|a| bits >> a & 1 == 1).collect()))
            .filter(|i| check_stable(gp, i))
            .collect(),
    )
}

fn sorted(mut v: Vec<Interpretation>) -> Vec<Interpretation> {
    v.sort();
    v
}

/// A random propositional program over `p(0..n)` with up to two neural groups.
fn random_program(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=7);
    let groups = rng.random_range(0..=2);
    let mut src = String::new();
    let mut lits: Vec<String> = (0..n).map(|i| format!("p({i})")).collect();
    for g in 0..groups {
        writeln!(src, "e({g}).").unwrap();
        let values = ["a", "b", "c"];
        let k = rng.random_range(2..=3);
        writeln!(src, "nn(m(1, {g}), [{}]) :- e({g}).", values[..k].join(", ")).unwrap();
        for v in &values[..k] {
            lits.push(format!("m_1({g})={v}"));
        }
    }
    let body = |rng: &mut ChaCha8Rng, len: usize| -> String {
        (0..len)
            .map(|_| {
                let l = &lits[rng.random_range(0..lits.len())];
                if rng.random_bool(0.4) { format!("not {l}") } else { l.clone() }
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let rules = rng.random_range(1..=8);
    for _ in 0..rules {
        let h = rng.random_range(0..n);
        let len = rng.random_range(0..=3);
        match rng.random_range(0..10) {
            0..=5 => {
                if len == 0 {
                    writeln!(src, "p({h}).").unwrap();
                } else {
                    writeln!(src, "p({h}) :- {}.", body(&mut rng, len)).unwrap();
                }
            }
            6 => writeln!(src, ":- {}.", body(&mut rng, len.max(1))).unwrap(),
            7 => {
                let h2 = (h + 1) % n;
                if len == 0 {
                    writeln!(src, "{{p({h}); p({h2})}} = 1.").unwrap();
                } else {
                    writeln!(src, "{{p({h}); p({h2})}} = 1 :- {}.", body(&mut rng, len)).unwrap();
                }
            }
            8 => {
                let rel = [">=", "=", "<", "!="][rng.random_range(0..4)];
                let b = rng.random_range(0..=3);
                writeln!(src, ":- #count{{K: p(K)}} {rel} {b}.").unwrap();
            }
            _ => {
                let w = rng.random_range(0..=3);
                let t = rng.random_range(0..=2);
                writeln!(src, ":~ {}. [{w}, {t}]", body(&mut rng, len.max(1))).unwrap();
            }
        }
    }
    src
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn enumeration_matches_brute_force(seed in any::<u64>()) {
        let src = random_program(seed);
        let gp = program(&src);
        let found = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
        prop_assert_eq!(sorted(found.clone()), brute_force(&gp), "{}", src);
        // no duplicates
        let mut dedup = sorted(found.clone());
        dedup.dedup();
        prop_assert_eq!(dedup.len(), found.len());
    }

    #[test]
    fn pruned_search_matches_pipeline(seed in any::<u64>()) {
        let src = random_program(seed);
        let gp = program(&src);
        let pipeline = optimal_models(filter_constraints(brute_force(&gp), &gp.aggregate_constraints), &gp.weak);
        let answers = solve(&gp, &SolveOptions::default()).unwrap();
        for a in &answers {
            prop_assert_eq!(a.penalty, penalty(&a.model, &gp.weak));
        }
        let pruned: Vec<Interpretation> = answers.into_iter().map(|a| a.model).collect();
        prop_assert_eq!(sorted(pruned), sorted(pipeline), "{}", src);
    }

    #[test]
    fn observation_and_assumptions_filter_exactly(seed in any::<u64>(), pick in any::<u64>()) {
        let src = random_program(seed);
        let gp = program(&src);
        let all = brute_force(&gp);
        let n = gp.atoms.len() as u32;
        if n == 0 {
            return Ok(());
        }
        let a = (pick % n as u64) as u32;
        let b = ((pick >> 8) % n as u64) as u32;
        let obs = GroundFormula::Or(vec![
            GroundFormula::Atom(a),
            GroundFormula::Not(Box::new(GroundFormula::Atom(b))),
        ]);
        let opts = SolveOptions {
            aggregates: false,
            optimize: Optimize::None,
            observation: Some(obs.clone()),
            assumptions: vec![(b, pick >> 16 & 1 == 1)],
            ..Default::default()
        };
        let got: Vec<Interpretation> = solve(&gp, &opts).unwrap().into_iter().map(|a| a.model).collect();
        let want: Vec<Interpretation> = all
            .into_iter()
            .filter(|m| obs.holds(&|x| m.contains(x)) && m.contains(b) == (pick >> 16 & 1 == 1))
            .collect();
        prop_assert_eq!(sorted(got), want, "{}", src);
    }

    #[test]
    fn neural_groups_are_exclusive(seed in any::<u64>()) {
        let gp = program(&random_program(seed));
        for m in enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap() {
            for g in &gp.groups {
                prop_assert_eq!(g.atoms.iter().filter(|&&a| m.contains(a)).count(), 1);
            }
        }
    }

    #[test]
    fn adding_a_constraint_never_adds_models(seed in any::<u64>(), extra in 0usize..7) {
        let src = random_program(seed);
        let before = program(&src);
        let after = program(&format!("{src}\n:- p({extra}).\n"));
        let b: Vec<Vec<String>> = names(&before, &enumerate_stable_models(&before, DEFAULT_MODEL_LIMIT).unwrap());
        for m in names(&after, &enumerate_stable_models(&after, DEFAULT_MODEL_LIMIT).unwrap()) {
            prop_assert!(b.contains(&m));
        }
    }
}

#[test]
fn enumeration_is_deterministic() {
    for seed in 0..20 {
        let gp = program(&random_program(seed));
        let a = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
        let b = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn transitive_closure_has_unique_model() {
    let gp = program(
        "smaller(cat, person). smaller(person, car). smaller(person, truck).
         smaller(X, Y) :- smaller(X, Z), smaller(Z, Y).",
    );
    let models = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
    assert_eq!(models.len(), 1);
    let n = models[0].names(&gp.atoms);
    assert!(n.contains(&"smaller(cat,car)".to_string()));
    assert!(n.contains(&"smaller(cat,truck)".to_string()));
}

#[test]
fn expand_neural_examples() {
    let g = ground(&parse_program("grid(g). nn(sp(24, G), [true, false]) :- grid(G).").unwrap()).unwrap();
    let e = expand_neural(&g);
    assert_eq!(e.groups.len(), 24);
    assert!(e.neural.is_empty());
    assert_eq!(e.rules.len(), g.rules.len() + 48);
    let models = enumerate_stable_models(&program("grid(g). nn(sp(3, G), [true, false]) :- grid(G)."), 100).unwrap();
    assert_eq!(models.len(), 8);

    let plain = ground(&parse_program("a :- not b. b :- not a.").unwrap()).unwrap();
    assert_eq!(expand_neural(&plain).rules, plain.rules);
}

const PATHS: &str = "
node(0..3).
edge(0, 1). edge(1, 2). edge(2, 3). edge(0, 2).
{sp(X, Y); nsp(X, Y)} = 1 :- edge(X, Y).
sp(X, Y) :- sp(Y, X).
";

#[test]
fn count_constraint_filters_degree_one_nodes() {
    let gp = program(&format!("{PATHS}:- X = 0..3, #count{{Y: sp(X, Y)}} = 1.\n"));
    let all = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
    assert_eq!(all.len(), 16);
    let kept = filter_constraints(all.clone(), &gp.aggregate_constraints);
    // empty selection and the triangle 0-1-2
    assert_eq!(kept.len(), 2);
    assert!(filter_constraints(all.clone(), &[]).len() == all.len());
}

#[test]
fn reachability_constraint_removes_disconnected_segments() {
    let src = format!(
        "{PATHS}
reachable(X, Y) :- sp(X, Y).
reachable(X, Y) :- reachable(X, Z), sp(Z, Y).
:- sp(X, A), sp(Y, B), not reachable(X, Y).
"
    );
    let gp = program(&src);
    let models = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
    let two_segments = models.iter().any(|m| {
        let n = m.names(&gp.atoms);
        n.contains(&"sp(0,1)".to_string()) && n.contains(&"sp(2,3)".to_string()) && !n.contains(&"sp(1,2)".to_string())
            && !n.contains(&"sp(0,2)".to_string())
    });
    assert!(!two_segments);
    // without the constraint that model exists
    let gp = program(PATHS);
    let models = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
    assert!(models.iter().any(|m| {
        let n = m.names(&gp.atoms);
        n.contains(&"sp(0,1)".to_string()) && n.contains(&"sp(2,3)".to_string()) && !n.contains(&"sp(1,2)".to_string())
    }));
}

#[test]
fn weak_constraint_prefers_fewer_edges() {
    let src = "
edge(1..4).
{sp(E, true); sp(E, false)} = 1 :- edge(E).
% two alternative routes: edges 1,2,3 or edges 1,4 plus 2 and 3
route :- sp(1, true), sp(2, true), sp(3, true), not sp(4, true).
route :- sp(1, true), sp(2, true), sp(3, true), sp(4, true).
:- not route.
:~ sp(E, true). [1, E]
";
    let gp = program(src);
    let all = enumerate_stable_models(&gp, DEFAULT_MODEL_LIMIT).unwrap();
    assert_eq!(all.len(), 2);
    let penalties: Vec<i64> = all.iter().map(|m| penalty(m, &gp.weak)).collect();
    assert_eq!(sorted_i64(penalties), vec![3, 4]);
    let best = optimal_models(all.clone(), &gp.weak);
    assert_eq!(best.len(), 1);
    assert_eq!(penalty(&best[0], &gp.weak), 3);
    assert_eq!(optimal_models(all.clone(), &[]), all);

    let tie = program("a :- not b. b :- not a. :~ a. [1] :~ b. [1]");
    let models = enumerate_stable_models(&tie, DEFAULT_MODEL_LIMIT).unwrap();
    assert_eq!(optimal_models(models, &tie.weak).len(), 2);
}

fn sorted_i64(mut v: Vec<i64>) -> Vec<i64> {
    v.sort();
    v
}

#[test]
fn observations_resolve_against_the_program() {
    let gp = program("a :- not b. b :- not a. c(1).");
    let f = ground_formula(&gp, &parse_formula("a, not c(2)").unwrap()).unwrap();
    let opts = SolveOptions { observation: Some(f), ..Default::default() };
    let models = solve(&gp, &opts).unwrap();
    assert_eq!(models.len(), 1);
    assert!(ground_formula(&gp, &parse_formula("zzz").unwrap()).is_err());
}
