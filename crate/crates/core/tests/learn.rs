use std::collections::BTreeMap;
use std::fmt::Write;

use neurasp::ground::{ground, pointer_key, AtomId, GroundProgram};
use neurasp::learn::*;
use neurasp::lang::{parse_formula, parse_program, Formula};
use neurasp::neural::{Activation, Architecture, Model, OutputMatrix, Registry, TensorMap};
use neurasp::semantics::Outputs;
use neurasp::stable::{expand_neural, DEFAULT_MODEL_LIMIT};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIGITS: &str = "
img(d1). img(d2).
nn(digit(1, X), [0,1,2,3,4,5,6,7,8,9]) :- img(X).
addition(A, B, N) :- digit_1(A) = N1, digit_1(B) = N2, N = N1 + N2.
";

fn gp(src: &str) -> GroundProgram {
    ground(&parse_program(src).unwrap()).unwrap()
}

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

fn atom(gp: &GroundProgram, name: &str) -> AtomId {
    gp.atoms
        .iter()
        .find(|&(id, _)| gp.atoms.name(id) == name)
        .map(|(id, _)| id)
        .unwrap_or_else(|| panic!("no atom {name}"))
}

fn digit_registry() -> Registry {
    let mut r = Registry::new();
    r.insert("digit".into(), Model::zeros("digit", 16, 1, 10, Architecture::Linear, 0));
    r
}

fn digit_example(obs: &str) -> TrainingExample {
    let mut t = BTreeMap::new();
    t.insert("d1".to_string(), vec![0.5; 16]);
    t.insert("d2".to_string(), vec![-0.25; 16]);
    TrainingExample::new(t, obs, None).unwrap()
}

#[test]
fn digit_observation_probability_and_loss() {
    let g = gp(DIGITS);
    let out = Outputs::uniform(&g);
    let p = observation_probability(&g, &out, &f("addition(d1,d2,1)"), DEFAULT_MODEL_LIMIT).unwrap();
    assert!((p - 0.02).abs() < 1e-12);
    let t = observation_probability(&g, &out, &f("true"), DEFAULT_MODEL_LIMIT).unwrap();
    assert!((t - 1.0).abs() < 1e-12);
    let z = observation_probability(&g, &out, &f("addition(d1,d2,1), addition(d1,d2,2)"), DEFAULT_MODEL_LIMIT).unwrap();
    assert_eq!(z, 0.0);

    let learner = Learner::new(parse_program(DIGITS).unwrap());
    let r = learner
        .example_loss_and_grads(&digit_registry(), &digit_example("addition(d1,d2,1)"), DEFAULT_EPSILON)
        .unwrap();
    assert!((r.loss - (-(0.02f64).ln())).abs() < 1e-12);
    assert!((r.loss - 3.912).abs() < 1e-3);

    let r = learner
        .example_loss_and_grads(&digit_registry(), &digit_example("true"), DEFAULT_EPSILON)
        .unwrap();
    assert!(r.loss.abs() < 1e-12);
}

#[test]
fn digit_output_gradient() {
    let g = gp(DIGITS);
    let out = Outputs::uniform(&g);
    let grad = output_gradient(&g, &out, &f("addition(d1,d2,1)"), DEFAULT_MODEL_LIMIT).unwrap();
    let e = expand_neural(&g);
    assert!((grad[&atom(&e, "digit_1(d1)=0")] - 0.1).abs() < 1e-12);
    assert!((grad[&atom(&e, "digit_1(d1)=1")] - 0.1).abs() < 1e-12);
    assert_eq!(grad[&atom(&e, "digit_1(d1)=5")], 0.0);
    assert_eq!(grad[&atom(&e, "digit_1(d2)=9")], 0.0);
}

#[test]
fn pinned_choices_give_p_over_atom() {
    let src = "
        e(0). e(1).
        nn(m(1, X), [a, b, c]) :- e(X).
        q :- m_1(0) = b, m_1(1) = c.
    ";
    let g = gp(src);
    let mut out = Outputs::default();
    out.insert("m", vec![neurasp::ground::Value::Int(0)], OutputMatrix::from_rows(&[vec![0.2, 0.5, 0.3]]));
    out.insert("m", vec![neurasp::ground::Value::Int(1)], OutputMatrix::from_rows(&[vec![0.1, 0.3, 0.6]]));
    let o = f("q");
    let p = observation_probability(&g, &out, &o, DEFAULT_MODEL_LIMIT).unwrap();
    assert!((p - 0.3).abs() < 1e-12);
    let grad = output_gradient(&g, &out, &o, DEFAULT_MODEL_LIMIT).unwrap();
    let e = expand_neural(&g);
    assert!((grad[&atom(&e, "m_1(0)=b")] - p / 0.5).abs() < 1e-12);
    assert!((grad[&atom(&e, "m_1(1)=c")] - p / 0.6).abs() < 1e-12);
    assert_eq!(grad[&atom(&e, "m_1(0)=a")], 0.0);
}

#[test]
fn num_divides_the_polynomial() {
    // two stable models per choice of a; only one satisfies r
    let src = "
        e(0).
        nn(m(1, X), [a, b]) :- e(X).
        r :- m_1(0) = a, not s.
        s :- not r.
    ";
    let g = gp(src);
    let mut out = Outputs::default();
    out.insert("m", vec![neurasp::ground::Value::Int(0)], OutputMatrix::from_rows(&[vec![0.8, 0.2]]));
    let p = observation_probability(&g, &out, &f("r"), DEFAULT_MODEL_LIMIT).unwrap();
    assert!((p - 0.4).abs() < 1e-12);
    let grad = output_gradient(&g, &out, &f("r"), DEFAULT_MODEL_LIMIT).unwrap();
    let e = expand_neural(&g);
    assert!((grad[&atom(&e, "m_1(0)=a")] - 0.5).abs() < 1e-12);
}

/// Up to 3 groups with 2..=4 values each and up to 10 extra atoms.
fn toy_program(rng: &mut ChaCha8Rng) -> (String, Vec<(String, usize)>) {
    let n = rng.random_range(1..=10);
    let groups = rng.random_range(1..=3);
    let names = ["a", "b", "c", "d"];
    let mut src = String::new();
    let mut lits: Vec<String> = (0..n).map(|i| format!("p({i})")).collect();
    let mut models = Vec::new();
    for g in 0..groups {
        let k = rng.random_range(2..=4);
        writeln!(src, "e{g}(t{g}). nn(m{g}(1, X), [{}]) :- e{g}(X).", names[..k].join(", ")).unwrap();
        lits.extend(names[..k].iter().map(|v| format!("m{g}_1(t{g})={v}")));
        models.push((format!("m{g}"), k));
    }
    for _ in 0..rng.random_range(2..=8) {
        let len = rng.random_range(1..=3);
        let body: Vec<String> = (0..len)
            .map(|_| {
                let l = &lits[rng.random_range(0..lits.len())];
                if rng.random_bool(0.3) { format!("not {l}") } else { l.clone() }
            })
            .collect();
        let body = body.join(", ");
        match rng.random_range(0..6) {
            0..=4 => writeln!(src, "p({}) :- {body}.", rng.random_range(0..n)).unwrap(),
            _ => writeln!(src, ":- {body}.").unwrap(),
        }
    }
    (src, models)
}

fn toy_registry(models: &[(String, usize)], input: usize, rng: &mut ChaCha8Rng) -> Registry {
    let mut r = Registry::new();
    for (name, k) in models {
        let arch = if rng.random_bool(0.5) {
            Architecture::Linear
        } else {
            Architecture::Mlp { hidden: vec![5], activation: Activation::Tanh }
        };
        r.insert(name.clone(), Model::new(name.clone(), input, 1, *k, arch, rng.random()));
    }
    r
}

fn toy_observation(gp: &GroundProgram, rng: &mut ChaCha8Rng) -> String {
    let names: Vec<String> = gp
        .atoms
        .iter()
        .map(|(id, _)| gp.atoms.name(id))
        .filter(|n| n.starts_with("p("))
        .collect();
    if names.is_empty() {
        return "true".into();
    }
    let pick = |rng: &mut ChaCha8Rng| names[rng.random_range(0..names.len())].clone();
    match rng.random_range(0..3) {
        0 => pick(rng),
        1 => format!("not {}", pick(rng)),
        _ => format!("{} ; not {}", pick(rng), pick(rng)),
    }
}

/// Denominator floor for relative errors, so entries below it are held to an
/// absolute error of 1e-9. Central differences of the loss carry about 2e-11
/// of rounding noise, which would swamp a relative error against an exactly
/// zero analytic entry.
const REL_FLOOR: f64 = 1e-4;

/// Largest relative error between the analytic parameter gradients and
/// central differences of the end-to-end loss.
fn fd_error(learner: &Learner, reg: &Registry, ex: &TrainingExample) -> f64 {
    const H: f64 = 1e-5;
    let analytic = learner.example_loss_and_grads(reg, ex, DEFAULT_EPSILON).unwrap();
    let loss = |r: &Registry| learner.example_loss_and_grads(r, ex, DEFAULT_EPSILON).unwrap().loss;
    let mut worst: f64 = 0.0;
    for (name, g) in &analytic.grads {
        let mut probe = reg.clone();
        for (i, a) in g.iter().enumerate() {
            let w = probe[name].params[i];
            probe.get_mut(name).unwrap().params[i] = w + H;
            let plus = loss(&probe);
            probe.get_mut(name).unwrap().params[i] = w - H;
            let minus = loss(&probe);
            probe.get_mut(name).unwrap().params[i] = w;
            let n = (plus - minus) / (2.0 * H);
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR));
        }
    }
    worst
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 20 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, models) = toy_program(&mut rng);
        let learner = Learner::new(parse_program(&src).unwrap());
        let prepared = learner.prepared(None).unwrap();
        let obs = toy_observation(&prepared.program, &mut rng);
        let input = 4;
        let reg = toy_registry(&models, input, &mut rng);
        let mut tensors = BTreeMap::new();
        for g in &prepared.program.groups {
            let x: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
            tensors.insert(pointer_key(&g.pointer), x);
        }
        let ex = TrainingExample::new(tensors, &obs, None).unwrap();
        let r = learner.example_loss_and_grads(&reg, &ex, DEFAULT_EPSILON).unwrap();
        if r.probability < 1e-6 || r.grads.is_empty() {
            continue;
        }
        let err = fd_error(&learner, &reg, &ex);
        assert!(err < 1e-5, "seed {seed}: {err}\n{src}\nO = {obs}");
        checked += 1;
    }
}

#[test]
fn zero_probability_is_floored_and_skipped() {
    let learner = Learner::new(parse_program(DIGITS).unwrap());
    let ex = digit_example("addition(d1,d2,19)");
    let r = learner.example_loss_and_grads(&digit_registry(), &ex, DEFAULT_EPSILON).unwrap();
    assert_eq!(r.probability, 0.0);
    assert!((r.loss - (-DEFAULT_EPSILON.ln())).abs() < 1e-9);
    assert!(r.grads.is_empty());

    let mut reg = digit_registry();
    let before = reg.clone();
    let config = OptimizerConfig { epochs: 2, ..Default::default() };
    let report = train(&learner, &mut reg, &[ex.clone(), ex], &config, &mut |_, _| BTreeMap::new()).unwrap();
    assert_eq!(report.epochs.len(), 2);
    assert!(report.epochs.iter().all(|e| e.zero_probability == 2));
    assert_eq!(reg, before);
}

#[test]
fn zero_epochs_leave_parameters_unchanged() {
    let learner = Learner::new(parse_program(DIGITS).unwrap());
    let mut reg = Registry::new();
    reg.insert("digit".into(), Model::new("digit", 16, 1, 10, Architecture::Linear, 3));
    let before = reg.clone();
    let config = OptimizerConfig { epochs: 0, ..Default::default() };
    let data = vec![digit_example("addition(d1,d2,3)")];
    let report = train(&learner, &mut reg, &data, &config, &mut |_, _| BTreeMap::new()).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(reg, before);
}

/// Prototype features for digit `d` plus seeded noise.
fn features(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..16)
        .map(|i| if i == d { 1.0 } else { 0.0 } + rng.random_range(-0.3..0.3))
        .collect()
}

fn small_digit_set(seed: u64, n: usize) -> (Vec<TrainingExample>, Vec<(Vec<f64>, usize)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labelled = Vec::new();
    for _ in 0..n {
        let (a, b) = (rng.random_range(0..10), rng.random_range(0..10));
        let (xa, xb) = (features(a, &mut rng), features(b, &mut rng));
        labelled.push((xa.clone(), a));
        let mut t = BTreeMap::new();
        t.insert("d1".to_string(), xa);
        t.insert("d2".to_string(), xb);
        data.push(TrainingExample::new(t, &format!("addition(d1,d2,{})", a + b), None).unwrap());
    }
    (data, labelled)
}

fn accuracy(reg: &Registry, labelled: &[(Vec<f64>, usize)]) -> f64 {
    let m = &reg["digit"];
    let hits = labelled
        .iter()
        .filter(|(x, d)| {
            let out = m.forward(x).unwrap();
            let row = out.row(0);
            let best = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
            best == *d
        })
        .count();
    hits as f64 / labelled.len() as f64
}

#[test]
fn training_is_seed_deterministic_and_reduces_loss() {
    let learner = Learner::new(parse_program(DIGITS).unwrap());
    let (data, labelled) = small_digit_set(5, 300);
    let config = OptimizerConfig {
        epochs: 8,
        learning_rate: 0.01,
        seed: 9,
        workers: 3,
        ..Default::default()
    };
    let run = |workers: usize| {
        let mut reg = Registry::new();
        reg.insert("digit".into(), Model::new("digit", 16, 1, 10, Architecture::Linear, 1));
        let c = OptimizerConfig { workers, ..config.clone() };
        let report = train(&learner, &mut reg, &data, &c, &mut |_, r| {
            BTreeMap::from([("acc".to_string(), accuracy(r, &labelled))])
        })
        .unwrap();
        (report, reg)
    };
    let (r1, m1) = run(3);
    let (r2, m2) = run(1);
    assert_eq!(r1.without_timing(), r2.without_timing());
    assert_eq!(m1, m2);
    let first = r1.epochs.first().unwrap();
    let last = r1.epochs.last().unwrap();
    assert!(last.mean_nll < first.mean_nll, "{:?}", r1);
    assert!(last.metrics["acc"] > first.metrics["acc"] + 0.2, "{:?}", r1);
}

#[test]
fn dataset_lines_and_tensor_references() {
    let mut map = TensorMap::default();
    map.insert("img7", vec![1.0, 2.0]);
    let text = r#"{"tensors": {"d1": "@img7", "d2": [0.5, 0.25]}, "observation": "addition(d1,d2,3)"}

{"tensors": {"d1": [1.0]}, "observation": "not q", "facts": "r(1)."}
"#;
    let ds = parse_dataset(text, Some(&map)).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds[0].tensors["d1"], vec![1.0, 2.0]);
    assert_eq!(ds[0].tensors["d2"], vec![0.5, 0.25]);
    assert_eq!(ds[1].facts.as_deref(), Some("r(1)."));

    let bad_ref = r#"{"tensors": {"d1": "@nope"}, "observation": "q"}"#;
    assert!(matches!(parse_dataset(bad_ref, Some(&map)), Err(LearnError::Dataset { line: 1, .. })));
    let bad_obs = "{\"tensors\": {}, \"observation\": \"q\"}\n{\"tensors\": {}, \"observation\": \"q(,\"}";
    assert!(matches!(parse_dataset(bad_obs, None), Err(LearnError::Dataset { line: 2, .. })));
    assert!(matches!(parse_dataset("{}", None), Err(LearnError::Dataset { line: 1, .. })));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    std::fs::write(&path, text).unwrap();
    assert_eq!(load_dataset(&path, Some(&map)).unwrap(), ds);
}

#[test]
fn facts_extend_the_program_per_example() {
    let src = "
        e(0).
        nn(m(1, X), [a, b]) :- e(X).
        ok :- m_1(0) = a, allow.
    ";
    let learner = Learner::new(parse_program(src).unwrap());
    let mut reg = Registry::new();
    reg.insert("m".into(), Model::zeros("m", 1, 1, 2, Architecture::Linear, 0));
    let t = BTreeMap::from([("0".to_string(), vec![1.0])]);
    let with = TrainingExample::new(t.clone(), "ok", Some("allow.".into())).unwrap();
    let without = TrainingExample::new(t, "ok", None).unwrap();
    assert!((learner.probability(&reg, &with).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(learner.probability(&reg, &without).unwrap(), 0.0);
}

#[test]
fn missing_tensor_and_model_are_errors() {
    let learner = Learner::new(parse_program(DIGITS).unwrap());
    let ex = TrainingExample::new(BTreeMap::from([("d1".to_string(), vec![0.0; 16])]), "true", None).unwrap();
    assert!(matches!(
        learner.example_loss_and_grads(&digit_registry(), &ex, DEFAULT_EPSILON),
        Err(LearnError::Neural(_))
    ));
    assert!(matches!(
        learner.example_loss_and_grads(&Registry::new(), &digit_example("true"), DEFAULT_EPSILON),
        Err(LearnError::UnknownModel(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// dP/dp against central differences of the polynomial itself.
    #[test]
    fn output_gradient_matches_polynomial_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, _) = toy_program(&mut rng);
        let g = gp(&src);
        let e = expand_neural(&g);
        let obs = f(&toy_observation(&e, &mut rng));
        let mut out = Outputs::default();
        for grp in &e.groups {
            let row: Vec<f64> = (0..grp.values.len()).map(|_| rng.random_range(0.05..1.0)).collect();
            out.insert(grp.model.clone(), grp.pointer.clone(), OutputMatrix::from_rows(&[row]));
        }
        let grad = output_gradient(&g, &out, &obs, DEFAULT_MODEL_LIMIT).unwrap();
        for grp in &e.groups {
            for (j, &a) in grp.atoms.iter().enumerate() {
                let h = 1e-6;
                let shifted = |d: f64| {
                    let mut o = out.clone();
                    let mut m = o.get(&grp.model, &grp.pointer).unwrap().clone();
                    m.add(0, j, d);
                    o.insert(grp.model.clone(), grp.pointer.clone(), m);
                    observation_probability(&g, &o, &obs, DEFAULT_MODEL_LIMIT).unwrap()
                };
                let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
                prop_assert!((grad[&a] - numeric).abs() < 1e-7, "{} vs {}", grad[&a], numeric);
            }
        }
    }

    /// 0 <= loss <= -ln eps.
    #[test]
    fn loss_is_bounded(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, models) = toy_program(&mut rng);
        let learner = Learner::new(parse_program(&src).unwrap());
        let prepared = learner.prepared(None).unwrap();
        let obs = toy_observation(&prepared.program, &mut rng);
        let reg = toy_registry(&models, 3, &mut rng);
        let tensors = prepared
            .program
            .groups
            .iter()
            .map(|g| (pointer_key(&g.pointer), (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()))
            .collect();
        let ex = TrainingExample::new(tensors, &obs, None).unwrap();
        let r = learner.example_loss_and_grads(&reg, &ex, DEFAULT_EPSILON).unwrap();
        prop_assert!(r.loss >= -1e-12 && r.loss <= -DEFAULT_EPSILON.ln() + 1e-12);
    }
}

#[test]
fn weak_constraints_keep_only_optimal_models() {
    let src = "
        e(0).
        nn(m(1, X), [a, b]) :- e(X).
        q :- m_1(0) = a.
        :~ q. [1]
    ";
    let g = gp(src);
    let mut out = Outputs::default();
    out.insert("m", vec![neurasp::ground::Value::Int(0)], OutputMatrix::from_rows(&[vec![0.7, 0.3]]));
    assert_eq!(observation_probability(&g, &out, &f("q"), DEFAULT_MODEL_LIMIT).unwrap(), 0.0);
    let p = observation_probability(&g, &out, &f("not q"), DEFAULT_MODEL_LIMIT).unwrap();
    assert!((p - 0.3).abs() < 1e-12);
}

#[test]
fn evaluation_of_argmax_predictions() {
    let learner = Learner::new(parse_program(DIGITS).unwrap());
    let labels = BTreeMap::from([
        ("digit_1(d1)".to_string(), "0".to_string()),
        ("digit_1(d2)".to_string(), "3".to_string()),
    ]);
    let data = vec![
        digit_example("addition(d1,d2,0)").with_labels(labels.clone()),
        digit_example("addition(d1,d2,3)").with_labels(labels),
    ];
    let checks = vec![
        ("free".to_string(), Learner::new(parse_program(DIGITS).unwrap())),
        (
            "no_zero".to_string(),
            Learner::new(parse_program(&format!("{DIGITS}\n:- digit_1(d1) = 0.")).unwrap()),
        ),
    ];
    // zero weights: every row is uniform and argmax picks 0
    let m = evaluate(&learner, &digit_registry(), &data, &checks).unwrap();
    assert_eq!(m["observation"], 0.5);
    assert_eq!(m["label_atoms"], 0.5);
    assert_eq!(m["label_records"], 0.0);
    assert_eq!(m["check_free"], 1.0);
    assert_eq!(m["check_no_zero"], 0.0);
}
