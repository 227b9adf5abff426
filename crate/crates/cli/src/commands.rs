use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use neurasp::ground::{ground, pointer_key, GroundError, GroundProgram};
use neurasp::lang::{parse_formula, parse_program, Formula, ParseError, Program};
use neurasp::learn::{
    evaluate, load_dataset, train, Algorithm, DatasetRecord, LearnError, Learner, OptimizerConfig, TrainingExample,
};
use neurasp::neural::{Activation, Architecture, Model, NeuralError, OutputMatrix, Registry, TensorMap};
use neurasp::semantics::{ModelSet, Outputs, SemanticsError};
use neurasp::stable::SolveError;
use serde::Serialize;

use crate::args::*;
use crate::gen::{digits, gridpath, sudoku};
use crate::programs;

/// A failed command; the variant fixes the exit code.
#[derive(Debug)]
pub enum Failure {
    /// No model, or evidence that no model satisfies (exit 1).
    Empty(String),
    /// Unreadable or invalid input (exit 2).
    Input(String),
    /// Non-finite numbers during learning or inference (exit 3).
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Empty(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Empty(m) | Failure::Input(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

fn input(e: impl fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn io_out(e: std::io::Error) -> Failure {
    Failure::Input(format!("write failed: {e}"))
}

impl From<SemanticsError> for Failure {
    fn from(e: SemanticsError) -> Self {
        match e {
            SemanticsError::UnsatisfiableEvidence => Failure::Empty(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<NeuralError> for Failure {
    fn from(e: NeuralError) -> Self {
        match e {
            NeuralError::NonFinite(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<LearnError> for Failure {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Divergence { .. } => Failure::Numeric(e.to_string()),
            LearnError::Neural(n) => n.into(),
            LearnError::Semantics(s) => s.into(),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<GroundError> for Failure {
    fn from(e: GroundError) -> Self {
        input(e)
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        input(e)
    }
}

fn read(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn located(path: &Path, e: ParseError) -> Failure {
    Failure::Input(format!("{}:{}:{}: {}", path.display(), e.line, e.column, e.message))
}

pub fn read_program(path: &Path) -> CmdResult<Program> {
    parse_program(&read(path)?).map_err(|e| located(path, e))
}

fn read_program_with_facts(path: &Path, facts: Option<&Path>) -> CmdResult<Program> {
    let mut p = read_program(path)?;
    if let Some(f) = facts {
        let extra = parse_program(&read(f)?).map_err(|e| located(f, e))?;
        p.asp_rules.extend(extra.asp_rules);
        p.neural_rules.extend(extra.neural_rules);
    }
    Ok(p)
}

fn formula(text: &str, what: &str) -> CmdResult<Formula> {
    parse_formula(text).map_err(|e| Failure::Input(format!("{what}: {e}")))
}

fn load_tensors(path: Option<&Path>) -> CmdResult<Option<TensorMap>> {
    path.map(|p| TensorMap::load(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))))
        .transpose()
}

fn load_registry(paths: &[impl AsRef<Path>]) -> CmdResult<Registry> {
    let mut reg = Registry::new();
    for p in paths {
        let p = p.as_ref();
        let m = Model::load(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
        reg.insert(m.id.clone(), m);
    }
    Ok(reg)
}

/// Output matrices file: model name to pointer key to rows.
pub type OutputsFile = BTreeMap<String, BTreeMap<String, Vec<Vec<f64>>>>;

pub fn outputs_from_file(gp: &GroundProgram, file: &OutputsFile) -> CmdResult<Outputs> {
    let mut out = Outputs::default();
    for g in &gp.groups {
        let key = pointer_key(&g.pointer);
        let rows = file
            .get(&g.model)
            .and_then(|m| m.get(&key))
            .ok_or_else(|| Failure::Input(format!("outputs file has no matrix for {}({key})", g.model)))?;
        out.insert(g.model.clone(), g.pointer.clone(), OutputMatrix::from_rows(rows));
    }
    Ok(out)
}

/// Network outputs for every declaration of `gp`, from the source flags.
fn resolve_outputs(gp: &GroundProgram, src: &ProgramArgs) -> CmdResult<Outputs> {
    if gp.groups.is_empty() {
        return Ok(Outputs::default());
    }
    if src.uniform {
        return Ok(Outputs::uniform(gp));
    }
    if let Some(path) = &src.outputs {
        let file: OutputsFile = serde_json::from_str(&read(path)?)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        return outputs_from_file(gp, &file);
    }
    if src.checkpoints.is_empty() {
        return Err(Failure::Input(
            "program has neural atoms: give --outputs, --uniform, or --checkpoint-in with --tensors".into(),
        ));
    }
    let reg = load_registry(&src.checkpoints)?;
    let tensors = load_tensors(src.tensors.as_deref())?
        .ok_or_else(|| Failure::Input("--checkpoint-in needs --tensors".into()))?;
    let mut out = Outputs::default();
    for g in &gp.groups {
        if out.get(&g.model, &g.pointer).is_ok() {
            continue;
        }
        let m = reg
            .get(&g.model)
            .ok_or_else(|| Failure::Input(format!("no checkpoint for model `{}`", g.model)))?;
        let x = tensors.get(&pointer_key(&g.pointer))?;
        out.insert(g.model.clone(), g.pointer.clone(), m.forward(x)?);
    }
    Ok(out)
}

fn model_set(src: &ProgramArgs) -> CmdResult<(GroundProgram, ModelSet, Outputs)> {
    let p = read_program_with_facts(&src.program, src.facts.as_deref())?;
    let gp = ground(&p)?;
    let ms = ModelSet::compute(&gp, src.limit_models)?;
    let outputs = resolve_outputs(&ms.program, src)?;
    Ok((gp, ms, outputs))
}

#[derive(Serialize)]
struct ModelRecord {
    atoms: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probability: Option<f64>,
    num_agreeing: usize,
    penalty: i64,
}

fn json_line(out: &mut dyn Write, v: &impl Serialize) -> CmdResult {
    writeln!(out, "{}", serde_json::to_string(v).expect("serializable")).map_err(io_out)
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> CmdResult {
    let (gp, ms, outputs) = model_set(&args.source)?;
    if args.dump_ground {
        write!(out, "{gp}").map_err(io_out)?;
    }
    let neural = !ms.program.groups.is_empty();
    let annotated = ms.annotate(&outputs)?;
    for (i, m) in annotated.iter().enumerate() {
        let rec = ModelRecord {
            atoms: m.interpretation.names(&ms.program.atoms),
            probability: neural.then_some(m.probability),
            num_agreeing: m.num_agreeing,
            penalty: m.penalty,
        };
        match args.source.format {
            Format::Json => json_line(out, &rec)?,
            Format::Text => {
                writeln!(out, "Answer {}: {}", i + 1, rec.atoms.join(" ")).map_err(io_out)?;
                match rec.probability {
                    Some(p) => writeln!(
                        out,
                        "  probability={p}  num_agreeing={}  penalty={}",
                        rec.num_agreeing, rec.penalty
                    ),
                    None if rec.penalty != 0 => writeln!(out, "  penalty={}", rec.penalty),
                    None => Ok(()),
                }
                .map_err(io_out)?;
            }
        }
    }
    if annotated.is_empty() {
        return Err(Failure::Empty("no stable models".into()));
    }
    if args.source.format == Format::Text {
        writeln!(out, "Models: {}", annotated.len()).map_err(io_out)?;
    }
    Ok(())
}

pub fn cmd_infer(args: &InferArgs, out: &mut dyn Write) -> CmdResult {
    let (_, ms, outputs) = model_set(&args.source)?;
    let evidence = args.evidence.as_deref().map(|e| formula(e, "evidence")).transpose()?;
    let json = args.source.format == Format::Json;
    match args.mode {
        Mode::Query => {
            let q = formula(
                args.query.as_deref().ok_or_else(|| Failure::Input("query mode needs --query".into()))?,
                "query",
            )?;
            let p = match &evidence {
                Some(e) => ms
                    .conditional_probability(&outputs, &q, e)?
                    .ok_or_else(|| Failure::Empty("evidence has probability 0".into()))?,
                None => ms.query_probability(&outputs, &q)?,
            };
            if !p.is_finite() {
                return Err(Failure::Numeric(format!("probability is {p}")));
            }
            if json {
                json_line(out, &BTreeMap::from([("probability", p)]))
            } else {
                writeln!(out, "{p}").map_err(io_out)
            }
        }
        Mode::Map => {
            let m = ms.map_inference(&outputs, evidence.as_ref())?;
            let rec = ModelRecord {
                atoms: m.interpretation.names(&ms.program.atoms),
                probability: Some(m.probability),
                num_agreeing: m.num_agreeing,
                penalty: m.penalty,
            };
            if json {
                json_line(out, &rec)
            } else {
                writeln!(out, "{}\n  probability={}", rec.atoms.join(" "), m.probability).map_err(io_out)
            }
        }
        Mode::Marginal => {
            if let Some(e) = &evidence {
                if ms.query_probability(&outputs, e)? == 0.0 {
                    return Err(Failure::Empty("evidence has probability 0".into()));
                }
            }
            let table: BTreeMap<String, f64> = match &args.query {
                // only the named atoms; an atom in no model gets 0
                Some(q) => q
                    .split_whitespace()
                    .map(|a| {
                        let f = formula(a, "query")?;
                        let p = match &evidence {
                            Some(e) => ms.conditional_probability(&outputs, &f, e)?.unwrap_or(0.0),
                            None => ms.query_probability(&outputs, &f)?,
                        };
                        Ok((a.to_string(), p))
                    })
                    .collect::<CmdResult<_>>()?,
                None => match &evidence {
                    None => ms.marginals(&outputs)?,
                    Some(e) => {
                        let mut t = BTreeMap::new();
                        for name in ms.marginals(&outputs)?.into_keys() {
                            let f = formula(&name, "atom")?;
                            t.insert(name, ms.conditional_probability(&outputs, &f, e)?.unwrap_or(0.0));
                        }
                        t
                    }
                },
            };
            if json {
                json_line(out, &table)
            } else {
                for (a, p) in table {
                    writeln!(out, "{a}\t{p}").map_err(io_out)?;
                }
                Ok(())
            }
        }
    }
}

/// Parses an `--arch` value.
pub fn parse_arch(spec: &str) -> CmdResult<(String, Architecture)> {
    let (name, arch) = spec
        .split_once('=')
        .ok_or_else(|| Failure::Input(format!("--arch `{spec}`: expected NAME=SPEC")))?;
    let bad = || Failure::Input(format!("--arch `{spec}`: expected linear or mlp:H1,H2[:relu|:tanh]"));
    let arch = if arch == "linear" {
        Architecture::Linear
    } else if let Some(rest) = arch.strip_prefix("mlp:") {
        let mut parts = rest.split(':');
        let hidden = parts
            .next()
            .unwrap_or("")
            .split(',')
            .map(|h| h.parse::<usize>().ok().filter(|&h| h > 0))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(bad)?;
        let activation = match parts.next() {
            None | Some("relu") => Activation::Relu,
            Some("tanh") => Activation::Tanh,
            Some(_) => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Architecture::Mlp { hidden, activation }
    } else {
        return Err(bad());
    };
    Ok((name.to_string(), arch))
}

fn parse_checks(specs: &[String], limit: usize) -> CmdResult<Vec<(String, Learner)>> {
    specs
        .iter()
        .map(|s| {
            let (name, path) = s
                .split_once('=')
                .ok_or_else(|| Failure::Input(format!("--check `{s}`: expected NAME=PROGRAM")))?;
            let p = read_program(Path::new(path))?;
            Ok((name.to_string(), Learner::with_limits(p, Default::default(), limit)))
        })
        .collect()
}

/// Fresh models for every network the program uses, sized from the first
/// example's tensors.
fn fresh_models(
    learner: &Learner,
    data: &[TrainingExample],
    archs: &BTreeMap<String, Architecture>,
    seed: u64,
) -> CmdResult<Registry> {
    let first = data.first().ok_or_else(|| Failure::Input("dataset is empty".into()))?;
    let prepared = learner.prepared(first.facts.as_deref())?;
    let mut shapes: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for g in &prepared.program.groups {
        let key = pointer_key(&g.pointer);
        let x = first
            .tensors
            .get(&key)
            .ok_or_else(|| Failure::Input(format!("first example binds no tensor to `{key}`")))?;
        let e = shapes.entry(g.model.clone()).or_insert((x.len(), 0, g.values.len()));
        e.1 = e.1.max(g.event);
    }
    for name in archs.keys() {
        if !shapes.contains_key(name) {
            return Err(Failure::Input(format!("--arch names unknown model `{name}`")));
        }
    }
    Ok(shapes
        .into_iter()
        .enumerate()
        .map(|(i, (name, (input, events, values)))| {
            let arch = archs.get(&name).cloned().unwrap_or(Architecture::Linear);
            let seed = seed.wrapping_add(i as u64);
            // a linear layer starts from uniform outputs; hidden layers need random weights
            let m = match arch {
                Architecture::Linear => Model::zeros(name.clone(), input, events, values, arch, seed),
                _ => Model::new(name.clone(), input, events, values, arch, seed),
            };
            (name, m)
        })
        .collect())
}

fn load_examples(path: &Path, tensors: Option<&TensorMap>) -> CmdResult<Vec<TrainingExample>> {
    load_dataset(path, tensors).map_err(|e| match e {
        LearnError::Dataset { line, message } => {
            Failure::Input(format!("{}:{line}: {message}", path.display()))
        }
        e => e.into(),
    })
}

pub fn cmd_learn(args: &LearnArgs, out: &mut dyn Write) -> CmdResult {
    let program = read_program(&args.program)?;
    let learner = Learner::with_limits(program, Default::default(), args.limit_models);
    let tensors = load_tensors(args.tensors.as_deref())?;
    let data = load_examples(&args.dataset, tensors.as_ref())?;
    let eval_data = args
        .eval_dataset
        .as_deref()
        .map(|p| load_examples(p, tensors.as_ref()))
        .transpose()?;
    let checks = parse_checks(&args.checks, args.limit_models)?;
    let archs = args
        .arch
        .iter()
        .map(|s| parse_arch(s))
        .collect::<CmdResult<BTreeMap<_, _>>>()?;
    let mut registry = fresh_models(&learner, &data, &archs, args.seed)?;
    for (name, m) in load_registry(&args.checkpoints)? {
        registry.insert(name, m);
    }
    let config = OptimizerConfig {
        algorithm: match args.algorithm {
            AlgorithmArg::Sgd => Algorithm::Sgd,
            AlgorithmArg::Adam => Algorithm::Adam,
        },
        learning_rate: args.lr,
        batch_size: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        epsilon: args.epsilon,
        workers: args.workers,
    };
    config.validate().map_err(Failure::Input)?;
    fs::create_dir_all(&args.checkpoint_out).map_err(input)?;
    let mut eval_error = None;
    let report = train(&learner, &mut registry, &data, &config, &mut |_, reg| match &eval_data {
        Some(ev) if eval_error.is_none() => evaluate(&learner, reg, ev, &checks).unwrap_or_else(|e| {
            eval_error = Some(e);
            BTreeMap::new()
        }),
        _ => BTreeMap::new(),
    })?;
    if let Some(e) = eval_error {
        return Err(e.into());
    }
    let mut metrics = String::new();
    for e in &report.epochs {
        metrics.push_str(&serde_json::to_string(e).expect("serializable"));
        metrics.push('\n');
    }
    fs::write(args.checkpoint_out.join("metrics.jsonl"), &metrics).map_err(input)?;
    for (name, m) in &registry {
        m.save(&args.checkpoint_out.join(format!("{name}.json")))?;
    }
    match args.format {
        Format::Json => out.write_all(metrics.as_bytes()).map_err(io_out),
        Format::Text => {
            for e in &report.epochs {
                let mut line = format!(
                    "epoch {:>4}  nll {:.6}  zero {}",
                    e.epoch, e.mean_nll, e.zero_probability
                );
                for (k, v) in &e.metrics {
                    line.push_str(&format!("  {k} {v:.4}"));
                }
                writeln!(out, "{line}").map_err(io_out)?;
            }
            Ok(())
        }
    }
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let program = read_program(&args.program)?;
    let learner = Learner::with_limits(program, Default::default(), args.limit_models);
    let tensors = load_tensors(args.tensors.as_deref())?;
    let data = load_examples(&args.dataset, tensors.as_ref())?;
    let checks = parse_checks(&args.checks, args.limit_models)?;
    let registry = load_registry(&args.checkpoints)?;
    let metrics = evaluate(&learner, &registry, &data, &checks)?;
    match args.format {
        Format::Json => json_line(out, &metrics),
        Format::Text => {
            for (k, v) in metrics {
                writeln!(out, "{k}\t{v}").map_err(io_out)?;
            }
            Ok(())
        }
    }
}

fn write_file(dir: &Path, name: &str, text: &str, written: &mut Vec<String>) -> CmdResult {
    fs::write(dir.join(name), text).map_err(|e| Failure::Input(format!("{}: {e}", dir.join(name).display())))?;
    written.push(name.to_string());
    Ok(())
}

fn jsonl<T: Serialize>(records: &[T]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

fn sudoku_outputs(rows: &[Vec<f64>]) -> String {
    let file: OutputsFile = BTreeMap::from([(
        "cell".to_string(),
        BTreeMap::from([("img".to_string(), rows.to_vec())]),
    )]);
    serde_json::to_string(&file).expect("serializable")
}

pub fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> CmdResult {
    let dir = &args.out;
    fs::create_dir_all(dir).map_err(input)?;
    let count = args.count as usize;
    let mut written = Vec::new();
    match args.domain {
        Domain::Digits => {
            let noise = args.noise.unwrap_or(0.5);
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(Failure::Input(format!("noise must be >= 0, got {noise}")));
            }
            let d = digits::gen_digits(&digits::DigitsConfig {
                count,
                test_count: args.test_count,
                noise,
                seed: args.seed,
            });
            write_file(dir, "digits.nasp", programs::DIGITS, &mut written)?;
            write_file(dir, "baseline.nasp", &programs::digits_baseline(), &mut written)?;
            d.tensors.save(&dir.join("tensors.json"))?;
            written.push("tensors.json".into());
            write_file(dir, "train.jsonl", &jsonl(&d.train), &mut written)?;
            write_file(dir, "test.jsonl", &jsonl(&d.test), &mut written)?;
            write_file(dir, "baseline_train.jsonl", &jsonl(&d.baseline_train), &mut written)?;
            write_file(dir, "baseline_test.jsonl", &jsonl(&d.baseline_test), &mut written)?;
        }
        Domain::Sudoku4 => {
            if !(0.25..1.0).contains(&args.mass) {
                return Err(Failure::Input(format!("mass must lie in [0.25, 1), got {}", args.mass)));
            }
            let boards = sudoku::gen_sudoku4(count, args.mass, args.seed);
            write_file(dir, "sudoku4.nasp", &programs::sudoku4(), &mut written)?;
            write_file(dir, "anti_knight.nasp", &programs::sudoku4_anti_knight(), &mut written)?;
            write_file(dir, "boards.jsonl", &jsonl(&boards), &mut written)?;
            for (i, b) in boards.iter().enumerate() {
                write_file(dir, &format!("board_{i}.json"), &sudoku_outputs(&b.rows), &mut written)?;
                write_file(
                    dir,
                    &format!("board_{i}_perturbed.json"),
                    &sudoku_outputs(&b.perturbed_rows),
                    &mut written,
                )?;
            }
            let (rows, _) = sudoku::crafted_anti_knight_board();
            write_file(dir, "crafted.json", &sudoku_outputs(&rows), &mut written)?;
        }
        Domain::Gridpath => {
            let noise = args.noise.unwrap_or(0.0);
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(Failure::Input(format!("noise must be >= 0, got {noise}")));
            }
            let d = gridpath::gen_gridpath(&gridpath::GridConfig {
                count,
                max_removed: args.max_removed,
                noise,
                seed: args.seed,
            });
            use programs::PathRules;
            let progs = [
                ("mlp", PathRules::NONE),
                ("p", PathRules::P),
                ("pro", PathRules::PRO),
                ("pronr", PathRules::PRONR),
            ];
            for (name, rules) in progs {
                write_file(dir, &format!("{name}.nasp"), &programs::gridpath(rules), &mut written)?;
            }
            let checks = [
                ("p", PathRules::P),
                ("r", PathRules { reach: true, ..PathRules::NONE }),
                ("nr", PathRules { no_removed: true, ..PathRules::NONE }),
                ("pr", PathRules { reach: true, ..PathRules::P }),
                ("pronr", PathRules::PRONR),
            ];
            for (name, rules) in checks {
                write_file(dir, &format!("check_{name}.nasp"), &programs::gridpath(rules), &mut written)?;
            }
            d.tensors.save(&dir.join("tensors.json"))?;
            written.push("tensors.json".into());
            write_file(dir, "mlp_train.jsonl", &jsonl(&d.mlp_train), &mut written)?;
            for name in ["p", "pro", "pronr"] {
                write_file(dir, &format!("{name}_train.jsonl"), &jsonl(&d.constrained_train), &mut written)?;
            }
            write_file(dir, "test.jsonl", &jsonl(&d.test), &mut written)?;
            write_file(dir, "instances.jsonl", &jsonl(&d.instances), &mut written)?;
        }
    }
    for w in written {
        writeln!(out, "{}", dir.join(w).display()).map_err(io_out)?;
    }
    Ok(())
}

/// Records of a dataset file, for tools that rewrite datasets.
pub fn read_records(path: &Path) -> CmdResult<Vec<DatasetRecord>> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Failure::Input(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Infer(a) => cmd_infer(a, out),
        Command::Learn(a) => cmd_learn(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gen(a) => cmd_gen(a, out),
    }
}
