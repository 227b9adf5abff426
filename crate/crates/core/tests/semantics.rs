use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use neurasp::ground::{ground, GroundProgram, Value};
use neurasp::lang::{parse_formula, parse_program, CmpOp};
use neurasp::neural::OutputMatrix;
use neurasp::semantics::*;
use neurasp::stable::DEFAULT_MODEL_LIMIT;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIGITS: &str = "
img(d1). img(d2).
nn(digit(1, X), [0,1,2,3,4,5,6,7,8,9]) :- img(X).
addition(A, B, N) :- digit_1(A) = N1, digit_1(B) = N2, N = N1 + N2.
";

fn models(src: &str) -> ModelSet {
    ModelSet::compute(&ground(&parse_program(src).unwrap()).unwrap(), DEFAULT_MODEL_LIMIT).unwrap()
}

fn q(s: &str) -> neurasp::lang::Formula {
    parse_formula(s).unwrap()
}

/// P(d1 + d2 = s) for independent uniform digits, counted directly.
fn pair_count(s: i64) -> usize {
    (0..10).flat_map(|a| (0..10).map(move |b| a + b)).filter(|&x| x == s).count()
}

#[test]
fn digit_addition_under_uniform_outputs() {
    let ms = models(DIGITS);
    let out = Outputs::uniform(&ms.program);
    let annotated = ms.annotate(&out).unwrap();
    assert_eq!(annotated.len(), 100);
    for m in &annotated {
        assert!((m.probability - 0.01).abs() < 1e-12);
        assert_eq!(m.num_agreeing, 1);
    }
    for s in [0, 1, 9, 18, 19] {
        let p = ms.query_probability(&out, &q(&format!("addition(d1,d2,{s})"))).unwrap();
        assert!((p - pair_count(s) as f64 / 100.0).abs() < 1e-12, "sum {s}: {p}");
    }
    assert!((ms.query_probability(&out, &q("addition(d1,d2,1)")).unwrap() - 0.02).abs() < 1e-12);
    assert!((ms.query_probability(&out, &q("true")).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn even_loop_doubles_num() {
    let ms = models(&format!("{DIGITS}\na :- not b. b :- not a.\n"));
    let out = Outputs::uniform(&ms.program);
    let annotated = ms.annotate(&out).unwrap();
    assert_eq!(annotated.len(), 200);
    for m in &annotated {
        assert!((m.probability - 0.005).abs() < 1e-12);
        assert_eq!(m.num_agreeing, 2);
    }
}

#[test]
fn one_hot_single_group() {
    let ms = models("img(d). nn(digit(1, X), [0,1,2,3]) :- img(X).");
    let mut out = Outputs::default();
    out.insert("digit", vec![Value::sym("d")], OutputMatrix::from_rows(&[vec![0.0, 0.0, 1.0, 0.0]]));
    let positive: Vec<_> = ms.annotate(&out).unwrap().into_iter().filter(|m| m.probability > 0.0).collect();
    assert_eq!(positive.len(), 1);
    assert_eq!(positive[0].probability, 1.0);
    let map = ms.map_inference(&out, None).unwrap();
    assert!(map.interpretation.names(&ms.program.atoms).contains(&"digit_1(d)=2".to_string()));
}

#[test]
fn atom_probabilities_are_matrix_entries() {
    let gp = ground(&parse_program("grid(g). nn(sp(24, G), [true, false]) :- grid(G).").unwrap()).unwrap();
    let mut rows = vec![vec![0.5, 0.5]; 24];
    rows[4] = vec![0.7, 0.3];
    let mut out = Outputs::default();
    out.insert("sp", vec![Value::sym("g")], OutputMatrix::from_rows(&rows));
    let lit = |s: &str| match parse_formula(s).unwrap() {
        neurasp::lang::Formula::Atom(l) => gp.resolve_literal(&l).unwrap().unwrap(),
        _ => unreachable!(),
    };
    assert_eq!(atom_probability(&gp, &out, lit("sp_5(g)=true")).unwrap(), 0.7);
    assert_eq!(atom_probability(&gp, &out, lit("sp_5(g)=false")).unwrap(), 0.3);
    assert_eq!(atom_probability(&gp, &out, lit("sp_1(g)=true")).unwrap(), 0.5);
    assert!(matches!(atom_probability(&gp, &out, lit("grid(g)")), Err(SemanticsError::NotNeural(_))));
    assert!(matches!(
        atom_probability(&gp, &Outputs::default(), lit("sp_1(g)=true")),
        Err(SemanticsError::MissingOutput(_))
    ));

    let digits = ground(&parse_program(DIGITS).unwrap()).unwrap();
    let uniform = Outputs::uniform(&digits);
    for g in &digits.groups {
        for &a in &g.atoms {
            assert!((atom_probability(&digits, &uniform, a).unwrap() - 0.1).abs() < 1e-15);
        }
    }
}

#[test]
fn wrong_matrix_shape_is_rejected() {
    let ms = models(DIGITS);
    let mut out = Outputs::uniform(&ms.program);
    out.insert("digit", vec![Value::sym("d1")], OutputMatrix::uniform(1, 9));
    assert!(matches!(ms.annotate(&out), Err(SemanticsError::Shape { .. })));
}

#[test]
fn marginals_under_uniform_outputs() {
    let ms = models(&format!("{DIGITS}\nc :- addition(d1, d2, 20).\nalways.\n"));
    let out = Outputs::uniform(&ms.program);
    let m = ms.marginals(&out).unwrap();
    assert!((m["digit_1(d1)=3"] - 0.1).abs() < 1e-12);
    assert!((m["always"] - ms.total_mass(&out).unwrap()).abs() < 1e-12);
    assert!((m["addition(d1,d2,1)"] - 0.02).abs() < 1e-12);

    let ms = models("a :- not b. b :- not a. c :- a, b.");
    let m = ms.marginals(&Outputs::default()).unwrap();
    assert_eq!(m["c"], 0.0);
}

#[test]
fn lost_mass_is_not_renormalised() {
    let ms = models(&format!("{DIGITS}\n:- digit_1(d1) = 0.\n"));
    let out = Outputs::uniform(&ms.program);
    assert!((ms.total_mass(&out).unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn unknown_query_atoms_are_errors() {
    let ms = models(DIGITS);
    let out = Outputs::uniform(&ms.program);
    assert!(matches!(ms.query_probability(&out, &q("nosuch(1)")), Err(SemanticsError::UnknownAtom(_))));
    assert_eq!(ms.query_probability(&out, &q("addition(d1,d2,19)")).unwrap(), 0.0);
}

#[test]
fn map_with_evidence_and_ties() {
    let ms = models(DIGITS);
    let mut out = Outputs::uniform(&ms.program);
    let mut row = vec![0.05; 10];
    row[7] = 0.55;
    out.insert("digit", vec![Value::sym("d1")], OutputMatrix::from_rows(&[row]));
    let map = ms.map_inference(&out, Some(&q("addition(d1,d2,3)"))).unwrap();
    let names = map.interpretation.names(&ms.program.atoms);
    // d1 = 7 is impossible with sum 3; all remaining choices tie at 0.005 and
    // the lexicographically smallest atom list wins.
    assert!(names.contains(&"digit_1(d1)=0".to_string()), "{names:?}");
    assert!(names.contains(&"digit_1(d2)=3".to_string()));
    assert!(matches!(
        ms.map_inference(&out, Some(&q("addition(d1,d2,19)"))),
        Err(SemanticsError::UnsatisfiableEvidence)
    ));
    let unconditional = ms.map_inference(&out, None).unwrap();
    assert!(unconditional.interpretation.names(&ms.program.atoms).contains(&"digit_1(d1)=7".to_string()));
}

#[test]
fn conditional_probability_plumbing() {
    let ms = models(DIGITS);
    let out = Outputs::uniform(&ms.program);
    let p = ms
        .conditional_probability(&out, &q("digit_1(d1)=0"), &q("addition(d1,d2,1)"))
        .unwrap()
        .unwrap();
    assert!((p - 0.5).abs() < 1e-12);
    assert_eq!(ms.conditional_probability(&out, &q("true"), &q("false")).unwrap(), None);
}

// ---- brute-force oracle ----

fn least_model_of_reduct(gp: &GroundProgram, i: &BTreeSet<u32>) -> BTreeSet<u32> {
    let mut m = BTreeSet::new();
    loop {
        let before = m.len();
        for r in &gp.rules {
            if let Some(h) = r.head {
                if r.neg.iter().all(|a| !i.contains(a)) && r.pos.iter().all(|a| m.contains(a)) {
                    m.insert(h);
                }
            }
        }
        if m.len() == before {
            return m;
        }
    }
}

fn oracle_models(gp: &GroundProgram) -> Vec<BTreeSet<u32>> {
    let n = gp.atoms.len();
    let holds = |i: &BTreeSet<u32>, pos: &[u32], neg: &[u32]| {
        pos.iter().all(|a| i.contains(a)) && neg.iter().all(|a| !i.contains(a))
    };
    let mut out: Vec<(BTreeSet<u32>, i64)> = Vec::new();
    for bits in 0u32..1 << n {
        let i: BTreeSet<u32> = (0..n as u32).filter(|a| bits >> a & 1 == 1).collect();
        if least_model_of_reduct(gp, &i) != i {
            continue;
        }
        if gp.rules.iter().any(|r| r.head.is_none() && holds(&i, &r.pos, &r.neg)) {
            continue;
        }
        let agg_violated = gp.aggregate_constraints.iter().any(|c| {
            holds(&i, &c.pos, &c.neg)
                && c.aggregates.iter().all(|g| {
                    let k = g
                        .elements
                        .iter()
                        .filter(|e| holds(&i, &e.pos, &e.neg))
                        .map(|e| e.tuple.clone())
                        .collect::<BTreeSet<_>>()
                        .len() as i64;
                    match g.relation {
                        CmpOp::Eq => k == g.bound,
                        CmpOp::Ne => k != g.bound,
                        CmpOp::Lt => k < g.bound,
                        CmpOp::Le => k <= g.bound,
                        CmpOp::Gt => k > g.bound,
                        CmpOp::Ge => k >= g.bound,
                    }
                })
        });
        if agg_violated {
            continue;
        }
        let cost: i64 = gp
            .weak
            .iter()
            .filter(|w| holds(&i, &w.pos, &w.neg))
            .map(|w| (w.weight, w.terms.clone()))
            .collect::<BTreeSet<_>>()
            .iter()
            .map(|(w, _)| w)
            .sum();
        out.push((i, cost));
    }
    let best = out.iter().map(|(_, c)| *c).min();
    out.into_iter().filter(|(_, c)| Some(*c) == best).map(|(i, _)| i).collect()
}

fn random_program(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=6);
    let groups = rng.random_range(1..=2);
    let mut src = String::new();
    let mut lits: Vec<String> = (0..n).map(|i| format!("p({i})")).collect();
    for g in 0..groups {
        let k = rng.random_range(2..=3);
        let vals = &["a", "b", "c"][..k];
        writeln!(src, "e({g}). nn(m(1, {g}), [{}]) :- e({g}).", vals.join(", ")).unwrap();
        lits.extend(vals.iter().map(|v| format!("m_1({g})={v}")));
    }
    for _ in 0..rng.random_range(1..=7) {
        let len = rng.random_range(1..=3);
        let body: Vec<String> = (0..len)
            .map(|_| {
                let l = &lits[rng.random_range(0..lits.len())];
                if rng.random_bool(0.35) { format!("not {l}") } else { l.clone() }
            })
            .collect();
        let body = body.join(", ");
        match rng.random_range(0..8) {
            0..=4 => writeln!(src, "p({}) :- {body}.", rng.random_range(0..n)).unwrap(),
            5 => writeln!(src, ":- {body}.").unwrap(),
            6 => writeln!(src, ":- #count{{K: p(K)}} >= {}.", rng.random_range(1..=3)).unwrap(),
            _ => writeln!(src, ":~ {body}. [{}, {}]", rng.random_range(1..=2), rng.random_range(0..2)).unwrap(),
        }
    }
    src
}

fn random_outputs(gp: &GroundProgram, rng: &mut ChaCha8Rng) -> Outputs {
    let mut out = Outputs::default();
    let mut seen = BTreeMap::new();
    for g in &gp.groups {
        seen.entry((g.model.clone(), g.pointer.clone())).or_insert(g.values.len());
    }
    for ((m, p), n) in seen {
        let mut row: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
        out.insert(m, p, OutputMatrix::from_rows(&[row]));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn matches_literal_definitions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = random_program(&mut rng);
        let ms = models(&src);
        let out = random_outputs(&ms.program, &mut rng);
        let gp = &ms.program;

        let oracle = oracle_models(gp);
        let sigma = |i: &BTreeSet<u32>| -> Vec<u32> {
            gp.groups.iter().map(|g| g.atoms.iter().find(|a| i.contains(a)).copied().unwrap()).collect()
        };
        let mut expected: BTreeMap<Vec<u32>, (f64, usize)> = BTreeMap::new();
        for i in &oracle {
            let s = sigma(i);
            let num = oracle.iter().filter(|j| sigma(j) == s).count();
            let p: f64 = s.iter().map(|&a| atom_probability(gp, &out, a).unwrap()).product();
            expected.insert(i.iter().copied().collect(), (p / num as f64, num));
        }
        let annotated = ms.annotate(&out).unwrap();
        prop_assert_eq!(annotated.len(), expected.len(), "{}", src);
        let mut mass = 0.0;
        for m in &annotated {
            let (p, num) = expected[&m.interpretation.atoms().to_vec()];
            prop_assert!((m.probability - p).abs() <= 1e-12);
            prop_assert_eq!(m.num_agreeing, num);
            mass += m.probability;
        }
        prop_assert!(mass <= 1.0 + 1e-9);

        // Query probability of every single atom and of a disjunction.
        for (id, _) in gp.atoms.iter() {
            let name = gp.atoms.name(id);
            let want: f64 = oracle.iter().filter(|i| i.contains(&id)).map(|i| expected[&i.iter().copied().collect::<Vec<_>>()].0).sum();
            let got = ms.query_probability(&out, &q(&name)).unwrap();
            prop_assert!((got - want).abs() <= 1e-12, "{} {} {}", name, got, want);
        }
        // p/1 may not occur at all in a generated program.
        if let (Ok(pa), Ok(pb), Ok(pab)) = (
            ms.query_probability(&out, &q("p(0)")),
            ms.query_probability(&out, &q("p(1)")),
            ms.query_probability(&out, &q("p(0); p(1)")),
        ) {
            prop_assert!(pa <= pab + 1e-12 && pb <= pab + 1e-12 && pab <= pa + pb + 1e-12);
        }

        // Models sharing a sigma share a probability.
        for a in &annotated {
            for b in &annotated {
                if a.sigma == b.sigma {
                    prop_assert_eq!(a.probability, b.probability);
                }
            }
        }
    }

    #[test]
    fn full_mass_iff_every_sigma_has_a_model(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms = models(&random_program(&mut rng));
        let out = random_outputs(&ms.program, &mut rng);
        let sigmas: BTreeSet<_> = ms.sigmas.iter().cloned().collect();
        let total: usize = ms.program.groups.iter().map(|g| g.atoms.len()).product();
        let mass = ms.total_mass(&out).unwrap();
        if sigmas.len() == total {
            prop_assert!((mass - 1.0).abs() <= 1e-9);
        } else {
            prop_assert!(mass < 1.0 - 1e-9);
        }
    }
}

#[test]
fn products_beyond_64_factors_use_log_space() {
    let mut src = String::from("grid(g). nn(sp(70, G), [true, false]) :- grid(G).\n");
    for e in 1..=70 {
        writeln!(src, ":- sp_{e}(g) = false.").unwrap();
    }
    let ms = models(&src);
    let mut out = Outputs::default();
    out.insert("sp", vec![Value::sym("g")], OutputMatrix::from_rows(&vec![vec![0.5, 0.5]; 70]));
    let a = ms.annotate(&out).unwrap();
    assert_eq!(a.len(), 1);
    let want = 0.5f64.powi(70);
    assert!((a[0].probability - want).abs() / want < 1e-12);
}
