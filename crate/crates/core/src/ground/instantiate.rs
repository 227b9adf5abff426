use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::lang::{
    validate, ArithOp, Atom, BodyElem, CmpOp, Literal, NeuralAtom, Program, Rule, Term,
};

use super::program::*;
use super::{GroundConfig, GroundError};

type GResult<T> = Result<T, GroundError>;

#[derive(Clone, Debug)]
enum PTerm {
    Val(Value),
    Var(usize),
    Range(i64, i64),
    Bin(ArithOp, Box<PTerm>, Box<PTerm>),
}

#[derive(Clone, Debug)]
struct PAtom {
    sig: usize,
    predicate: String,
    args: Vec<PTerm>,
    strong: bool,
}

#[derive(Clone, Debug)]
struct PCmp {
    op: CmpOp,
    lhs: PTerm,
    rhs: PTerm,
}

#[derive(Clone, Debug, Default)]
struct PBody {
    pos: Vec<PAtom>,
    neg: Vec<PAtom>,
    cmps: Vec<PCmp>,
}

#[derive(Clone, Debug)]
struct PAggregate {
    tuple: Vec<PTerm>,
    cond: PBody,
    relation: CmpOp,
    bound: PTerm,
}

#[derive(Clone, Debug)]
enum PKind {
    Normal(PAtom),
    Constraint(Vec<PAggregate>),
    Choice(Vec<(PAtom, PBody)>),
    Weak(i64, Vec<PTerm>),
}

#[derive(Clone, Debug)]
struct PRule {
    kind: PKind,
    body: PBody,
    vars: Vec<String>,
}

struct Compiler<'a> {
    models: &'a BTreeMap<String, usize>,
    table: &'a mut AtomTable,
    vars: Vec<String>,
}

impl Compiler<'_> {
    fn var(&mut self, name: &str) -> usize {
        match self.vars.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                self.vars.push(name.to_string());
                self.vars.len() - 1
            }
        }
    }

    fn term(&mut self, t: &Term) -> PTerm {
        match t {
            Term::Sym(s) => PTerm::Val(Value::Sym(s.clone())),
            Term::Int(i) => PTerm::Val(Value::Int(*i)),
            Term::Var(v) => PTerm::Var(self.var(v)),
            Term::Range(lo, hi) => PTerm::Range(*lo, *hi),
            Term::Binary(op, l, r) => PTerm::Bin(*op, Box::new(self.term(l)), Box::new(self.term(r))),
        }
    }

    fn atom(&mut self, atom: &Atom, strong: bool) -> PAtom {
        let (predicate, args) = match atom.neural_parts() {
            Some((model, event)) if self.models.get(model) == Some(&atom.args.len()) => {
                let mut args = vec![PTerm::Val(Value::Int(event as i64))];
                args.extend(atom.args.iter().map(|t| self.term(t)));
                args.push(self.term(atom.eq_value.as_ref().unwrap()));
                (model.to_string(), args)
            }
            _ => (
                atom.predicate.clone(),
                atom.args.iter().map(|t| self.term(t)).collect(),
            ),
        };
        PAtom {
            sig: self.table.signature(&predicate, args.len(), strong),
            predicate,
            args,
            strong,
        }
    }

    fn literal_into(&mut self, l: &Literal, body: &mut PBody) {
        let a = self.atom(&l.atom, l.strong_negated);
        if l.default_negated {
            body.neg.push(a);
        } else {
            body.pos.push(a);
        }
    }

    fn body(&mut self, elems: &[BodyElem]) -> (PBody, Vec<PAggregate>) {
        let mut body = PBody::default();
        let mut aggs = Vec::new();
        for e in elems {
            match e {
                BodyElem::Literal(l) => self.literal_into(l, &mut body),
                BodyElem::Comparison(c) => body.cmps.push(PCmp {
                    op: c.op,
                    lhs: self.term(&c.lhs),
                    rhs: self.term(&c.rhs),
                }),
                BodyElem::Aggregate(a) => {
                    let mut cond = PBody::default();
                    for l in &a.condition {
                        self.literal_into(l, &mut cond);
                    }
                    aggs.push(PAggregate {
                        tuple: a.tuple.iter().map(|t| self.term(t)).collect(),
                        cond,
                        relation: a.relation,
                        bound: self.term(&a.bound),
                    });
                }
            }
        }
        (body, aggs)
    }

    fn rule(&mut self, rule: &Rule) -> PRule {
        self.vars.clear();
        let (body, aggs) = self.body(rule.body());
        let kind = match rule {
            Rule::Normal { head, .. } => PKind::Normal(self.atom(&head.atom, head.strong_negated)),
            Rule::Constraint { .. } => PKind::Constraint(aggs),
            Rule::Choice { elements, .. } => PKind::Choice(
                elements
                    .iter()
                    .map(|el| {
                        let atom = self.atom(&el.atom.atom, el.atom.strong_negated);
                        let mut cond = PBody::default();
                        for l in &el.condition {
                            self.literal_into(l, &mut cond);
                        }
                        (atom, cond)
                    })
                    .collect(),
            ),
            Rule::Weak { weight, terms, .. } => {
                PKind::Weak(*weight, terms.iter().map(|t| self.term(t)).collect())
            }
        };
        PRule {
            kind,
            body,
            vars: std::mem::take(&mut self.vars),
        }
    }

    fn neural(&mut self, n: &NeuralAtom) -> (PBody, Vec<PTerm>, Vec<PTerm>, Vec<String>) {
        self.vars.clear();
        let (body, _) = self.body(&n.body);
        let pointer = n.pointer.iter().map(|t| self.term(t)).collect();
        let values = n.values.iter().map(|t| self.term(t)).collect();
        (body, pointer, values, std::mem::take(&mut self.vars))
    }
}

type Subst = Vec<Option<Value>>;

fn describe(t: &PTerm, names: &[String]) -> String {
    match t {
        PTerm::Val(v) => v.to_string(),
        PTerm::Var(i) => names[*i].clone(),
        PTerm::Range(lo, hi) => format!("{lo}..{hi}"),
        PTerm::Bin(op, l, r) => format!("({}{}{})", describe(l, names), op.symbol(), describe(r, names)),
    }
}

fn eval(t: &PTerm, s: &Subst, names: &[String]) -> GResult<Value> {
    match t {
        PTerm::Val(v) => Ok(v.clone()),
        PTerm::Var(i) => s[*i]
            .clone()
            .ok_or_else(|| GroundError::Unbound(names[*i].clone())),
        PTerm::Range(..) => Err(GroundError::RangeNotAllowed(describe(t, names))),
        PTerm::Bin(op, l, r) => {
            let (a, b) = (eval(l, s, names)?, eval(r, s, names)?);
            let (Value::Int(a), Value::Int(b)) = (&a, &b) else {
                let bad = if a.as_int().is_none() { a } else { b };
                return Err(GroundError::NotInteger(bad.to_string()));
            };
            let v = match op {
                ArithOp::Add => a.checked_add(*b),
                ArithOp::Sub => a.checked_sub(*b),
                ArithOp::Mul => a.checked_mul(*b),
            };
            v.map(Value::Int)
                .ok_or_else(|| GroundError::Overflow(describe(t, names)))
        }
    }
}

fn is_bound(t: &PTerm, s: &Subst) -> bool {
    match t {
        PTerm::Var(i) => s[*i].is_some(),
        PTerm::Bin(_, l, r) => is_bound(l, s) && is_bound(r, s),
        _ => true,
    }
}

/// Evaluates a variable-free term.
pub(crate) fn eval_ground(t: &Term) -> GResult<Value> {
    let mut c = Compiler {
        models: &BTreeMap::new(),
        table: &mut AtomTable::default(),
        vars: Vec::new(),
    };
    let p = c.term(t);
    eval(&p, &vec![None; c.vars.len()], &c.vars)
}

fn ground_atom(a: &PAtom, s: &Subst, names: &[String]) -> GResult<GroundAtom> {
    Ok(GroundAtom {
        predicate: a.predicate.clone(),
        args: a.args.iter().map(|t| eval(t, s, names)).collect::<GResult<_>>()?,
        strong: a.strong,
    })
}

/// Head instantiation, expanding ranges into every combination.
fn expand_head(a: &PAtom, s: &Subst, names: &[String]) -> GResult<Vec<GroundAtom>> {
    let mut out = vec![Vec::new()];
    for t in &a.args {
        let choices: Vec<Value> = match t {
            PTerm::Range(lo, hi) => (*lo..=*hi).map(Value::Int).collect(),
            _ => vec![eval(t, s, names)?],
        };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                choices.iter().map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c.clone());
                    p
                })
            })
            .collect();
    }
    Ok(out
        .into_iter()
        .map(|args| GroundAtom {
            predicate: a.predicate.clone(),
            args,
            strong: a.strong,
        })
        .collect())
}

/// Unifies a pattern with a ground atom, extending `s`. Returns the variables
/// bound by this call, or `None` when the atom does not match.
fn unify(a: &PAtom, g: &GroundAtom, s: &mut Subst, names: &[String]) -> GResult<Option<Vec<usize>>> {
    let mut bound = Vec::new();
    let mut ok = true;
    for (t, v) in a.args.iter().zip(&g.args) {
        match t {
            PTerm::Val(c) => ok = c == v,
            PTerm::Var(i) => match &s[*i] {
                Some(b) => ok = b == v,
                None => {
                    s[*i] = Some(v.clone());
                    bound.push(*i);
                }
            },
            _ => {}
        }
        if !ok {
            break;
        }
    }
    if ok {
        for (t, v) in a.args.iter().zip(&g.args) {
            if matches!(t, PTerm::Bin(..) | PTerm::Range(..)) {
                if !is_bound(t, s) {
                    for &i in &bound {
                        s[i] = None;
                    }
                    return Err(GroundError::Unbound(describe(t, names)));
                }
                if let PTerm::Range(lo, hi) = t {
                    ok = v.as_int().is_some_and(|x| *lo <= x && x <= *hi);
                } else {
                    ok = &eval(t, s, names)? == v;
                }
                if !ok {
                    break;
                }
            }
        }
    }
    if !ok {
        for &i in &bound {
            s[i] = None;
        }
        return Ok(None);
    }
    Ok(Some(bound))
}

/// Positive-literal id window used by semi-naive evaluation.
#[derive(Clone, Copy)]
struct Window {
    lo: u32,
    hi: u32,
}

struct Join<'a> {
    table: &'a AtomTable,
    body: &'a PBody,
    windows: &'a [Window],
    names: &'a [String],
}

impl Join<'_> {
    fn run(
        &self,
        s: &mut Subst,
        pos_done: &mut Vec<bool>,
        cmp_done: &mut Vec<bool>,
        matched: &mut Vec<AtomId>,
        f: &mut dyn FnMut(&Subst, &[AtomId]) -> GResult<()>,
    ) -> GResult<()> {
        // Decide every comparison whose operands are bound.
        let mut decided = Vec::new();
        let mut result = Ok(());
        for (i, c) in self.body.cmps.iter().enumerate() {
            if cmp_done[i] || !is_bound(&c.lhs, s) || !is_bound(&c.rhs, s) {
                continue;
            }
            if matches!(c.lhs, PTerm::Range(..)) || matches!(c.rhs, PTerm::Range(..)) {
                let (r, other) = if let PTerm::Range(lo, hi) = c.rhs { ((lo, hi), &c.lhs) } else {
                    let PTerm::Range(lo, hi) = c.lhs else { unreachable!() };
                    ((lo, hi), &c.rhs)
                };
                if c.op != CmpOp::Eq || matches!(other, PTerm::Range(..)) {
                    result = Err(GroundError::RangeNotAllowed(describe(&c.rhs, self.names)));
                    break;
                }
                let v = eval(other, s, self.names)?;
                if !v.as_int().is_some_and(|x| r.0 <= x && x <= r.1) {
                    for &d in &decided {
                        cmp_done[d] = false;
                    }
                    return Ok(());
                }
            } else {
                let (l, r) = (eval(&c.lhs, s, self.names)?, eval(&c.rhs, s, self.names)?);
                if !c.op.holds(&l, &r) {
                    for &d in &decided {
                        cmp_done[d] = false;
                    }
                    return Ok(());
                }
            }
            cmp_done[i] = true;
            decided.push(i);
        }
        let restore = |cmp_done: &mut Vec<bool>| {
            for &d in &decided {
                cmp_done[d] = false;
            }
        };
        if let Err(e) = result {
            restore(cmp_done);
            return Err(e);
        }

        // Assignments `X = expr` / `X = lo..hi`.
        let assignment = self.body.cmps.iter().enumerate().find_map(|(i, c)| {
            if cmp_done[i] || c.op != CmpOp::Eq {
                return None;
            }
            match (&c.lhs, &c.rhs) {
                (PTerm::Var(v), t) | (t, PTerm::Var(v)) if s[*v].is_none() && is_bound(t, s) => {
                    Some((i, *v, t))
                }
                _ => None,
            }
        });
        if let Some((i, v, t)) = assignment {
            cmp_done[i] = true;
            let values: Vec<Value> = match t {
                PTerm::Range(lo, hi) => (*lo..=*hi).map(Value::Int).collect(),
                _ => vec![eval(t, s, self.names)?],
            };
            let mut out = Ok(());
            for val in values {
                s[v] = Some(val);
                out = self.run(s, pos_done, cmp_done, matched, f);
                if out.is_err() {
                    break;
                }
            }
            s[v] = None;
            cmp_done[i] = false;
            restore(cmp_done);
            return out;
        }

        // Next positive literal.
        if let Some(p) = pos_done.iter().position(|d| !d) {
            let atom = &self.body.pos[p];
            let w = self.windows[p];
            pos_done[p] = true;
            let mut out = Ok(());
            for &id in self.table.atoms_with_signature(atom.sig) {
                if id < w.lo {
                    continue;
                }
                if id >= w.hi {
                    break;
                }
                let bound = match unify(atom, self.table.get(id), s, self.names) {
                    Ok(Some(b)) => b,
                    Ok(None) => continue,
                    Err(e) => {
                        out = Err(e);
                        break;
                    }
                };
                matched[p] = id;
                out = self.run(s, pos_done, cmp_done, matched, f);
                for i in bound {
                    s[i] = None;
                }
                if out.is_err() {
                    break;
                }
            }
            pos_done[p] = false;
            restore(cmp_done);
            return out;
        }

        if let Some(i) = cmp_done.iter().position(|d| !d) {
            let c = &self.body.cmps[i];
            let t = if is_bound(&c.lhs, s) { &c.rhs } else { &c.lhs };
            restore(cmp_done);
            return Err(GroundError::Unbound(describe(t, self.names)));
        }
        let out = f(s, matched);
        restore(cmp_done);
        out
    }
}

fn join(
    table: &AtomTable,
    body: &PBody,
    windows: &[Window],
    names: &[String],
    s: &mut Subst,
    f: &mut dyn FnMut(&Subst, &[AtomId]) -> GResult<()>,
) -> GResult<()> {
    let j = Join {
        table,
        body,
        windows,
        names,
    };
    let mut pos_done = vec![false; body.pos.len()];
    let mut cmp_done = vec![false; body.cmps.len()];
    let mut matched = vec![0; body.pos.len()];
    j.run(s, &mut pos_done, &mut cmp_done, &mut matched, f)
}

fn full(n: usize, hi: u32) -> Vec<Window> {
    vec![Window { lo: 0, hi }; n]
}

/// Resolves negative literals; atoms that cannot be true are dropped.
fn resolve_neg(table: &AtomTable, neg: &[PAtom], s: &Subst, names: &[String], below: u32) -> GResult<Vec<AtomId>> {
    let mut out = Vec::new();
    for a in neg {
        if let Some(id) = table.lookup(&ground_atom(a, s, names)?) {
            if id < below {
                out.push(id);
            }
        }
    }
    Ok(out)
}

/// Grounds `program` with the default configuration.
pub fn ground(program: &Program) -> GResult<GroundProgram> {
    ground_with(program, &GroundConfig::default())
}

pub fn ground_with(program: &Program, config: &GroundConfig) -> GResult<GroundProgram> {
    let diags = validate(program);
    if !diags.is_empty() {
        return Err(GroundError::Invalid(diags));
    }
    let models: BTreeMap<String, usize> = program
        .neural_rules
        .iter()
        .map(|n| (n.node.model.clone(), n.node.pointer.len()))
        .collect();
    let mut table = AtomTable::with_limit(config.atom_limit);
    let mut c = Compiler {
        models: &models,
        table: &mut table,
        vars: Vec::new(),
    };
    let rules: Vec<PRule> = program.asp_rules.iter().map(|r| c.rule(&r.node)).collect();
    let neural: Vec<_> = program.neural_rules.iter().map(|n| c.neural(&n.node)).collect();

    // Phase 1: facts.
    let is_fact_rule = |r: &PRule| {
        matches!(r.kind, PKind::Normal(_)) && r.body.pos.is_empty() && r.body.neg.is_empty()
    };
    for r in rules.iter().filter(|r| is_fact_rule(r)) {
        let PKind::Normal(head) = &r.kind else { unreachable!() };
        let mut heads = Vec::new();
        join(&table, &r.body, &[], &r.vars, &mut vec![None; r.vars.len()], &mut |s, _| {
            heads.extend(expand_head(head, s, &r.vars)?);
            Ok(())
        })?;
        for h in heads {
            table.insert(h)?;
        }
    }
    let fact_count = table.len() as u32;

    // Phase 2: neural declarations over the facts.
    let mut gp = GroundProgram {
        models: models.clone(),
        ..Default::default()
    };
    let mut seen_neural = HashSet::new();
    for (decl, (body, pointer, values, names)) in program.neural_rules.iter().zip(&neural) {
        let mut instances = Vec::new();
        join(
            &table,
            body,
            &full(body.pos.len(), fact_count),
            names,
            &mut vec![None; names.len()],
            &mut |s, _| {
                if !resolve_neg(&table, &body.neg, s, names, fact_count)?.is_empty() {
                    return Ok(());
                }
                let p: Vec<Value> = pointer.iter().map(|t| eval(t, s, names)).collect::<GResult<_>>()?;
                let v: Vec<Value> = values.iter().map(|t| eval(t, s, names)).collect::<GResult<_>>()?;
                instances.push((p, v));
                Ok(())
            },
        )?;
        for (p, v) in instances {
            if !seen_neural.insert((decl.node.model.clone(), p.clone())) {
                continue;
            }
            let mut groups = Vec::new();
            for event in 1..=decl.node.events {
                let g = gp.groups.len();
                let mut atoms = Vec::new();
                for (j, val) in v.iter().enumerate() {
                    let mut args = vec![Value::Int(event as i64)];
                    args.extend(p.iter().cloned());
                    args.push(val.clone());
                    let (id, _) = table.insert(GroundAtom::new(decl.node.model.clone(), args))?;
                    table.set_neural(
                        id,
                        NeuralSlot {
                            group: g as u32,
                            value: j as u32,
                        },
                    );
                    atoms.push(id);
                }
                gp.groups.push(NeuralGroup {
                    model: decl.node.model.clone(),
                    event,
                    pointer: p.clone(),
                    values: v.clone(),
                    atoms,
                });
                groups.push(g);
            }
            gp.neural.push(GroundNeural {
                model: decl.node.model.clone(),
                events: decl.node.events,
                pointer: p,
                values: v,
                groups,
            });
        }
    }

    // Phase 3: possible atoms, semi-naive, negation ignored.
    let mut derivations: Vec<(&PAtom, PBody, &[String])> = Vec::new();
    for r in rules.iter().filter(|r| !is_fact_rule(r)) {
        match &r.kind {
            PKind::Normal(h) => derivations.push((h, r.body.clone(), &r.vars)),
            PKind::Choice(elements) => {
                for (h, cond) in elements {
                    let mut b = r.body.clone();
                    b.pos.extend(cond.pos.iter().cloned());
                    derivations.push((h, b, &r.vars));
                }
            }
            _ => {}
        }
    }
    let mut lo = 0u32;
    let mut hi = table.len() as u32;
    let mut first = true;
    while first || lo < hi {
        let mut new_heads = Vec::new();
        for (head, body, names) in &derivations {
            let n = body.pos.len();
            if n == 0 && !first {
                continue;
            }
            for p in 0..n.max(1) {
                let windows: Vec<Window> = (0..n)
                    .map(|k| match k.cmp(&p) {
                        std::cmp::Ordering::Less => Window { lo: 0, hi: lo },
                        std::cmp::Ordering::Equal => Window { lo, hi },
                        std::cmp::Ordering::Greater => Window { lo: 0, hi },
                    })
                    .collect();
                join(&table, body, &windows, names, &mut vec![None; names.len()], &mut |s, _| {
                    new_heads.extend(expand_head(head, s, names)?);
                    Ok(())
                })?;
            }
        }
        for h in new_heads {
            table.insert(h)?;
        }
        first = false;
        lo = hi;
        hi = table.len() as u32;
    }

    // Phase 4: instantiate every rule over the possible atoms.
    let all = table.len() as u32;
    let mut rule_set = HashSet::new();
    let mut ground_rules = Vec::new();
    let mut push_rule = |r: GroundRule, out: &mut Vec<GroundRule>| {
        if rule_set.insert(r.clone()) {
            out.push(r);
        }
    };
    let mut agg_set = HashSet::new();
    let mut weak_set = HashSet::new();
    for r in &rules {
        let names = &r.vars;
        let mut s = vec![None; names.len()];
        let windows = full(r.body.pos.len(), all);
        match &r.kind {
            PKind::Normal(head) => {
                join(&table, &r.body, &windows, names, &mut s, &mut |s, matched| {
                    let neg = resolve_neg(&table, &r.body.neg, s, names, all)?;
                    for h in expand_head(head, s, names)? {
                        let id = table.lookup(&h).expect("head derived in phase 3");
                        push_rule(
                            GroundRule {
                                head: Some(id),
                                pos: matched.to_vec(),
                                neg: neg.clone(),
                            },
                            &mut ground_rules,
                        );
                    }
                    Ok(())
                })?;
            }
            PKind::Choice(elements) => {
                join(&table, &r.body, &windows, names, &mut s, &mut |s, matched| {
                    let neg = resolve_neg(&table, &r.body.neg, s, names, all)?;
                    let mut atoms: Vec<AtomId> = Vec::new();
                    for (head, cond) in elements {
                        let mut local = s.clone();
                        join(
                            &table,
                            cond,
                            &full(cond.pos.len(), fact_count),
                            names,
                            &mut local,
                            &mut |ls, _| {
                                if !resolve_neg(&table, &cond.neg, ls, names, fact_count)?.is_empty() {
                                    return Ok(());
                                }
                                for h in expand_head(head, ls, names)? {
                                    let id = table.lookup(&h).expect("head derived in phase 3");
                                    if !atoms.contains(&id) {
                                        atoms.push(id);
                                    }
                                }
                                Ok(())
                            },
                        )?;
                    }
                    for (j, &a) in atoms.iter().enumerate() {
                        let mut n = neg.clone();
                        n.extend(atoms.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, &b)| b));
                        push_rule(
                            GroundRule {
                                head: Some(a),
                                pos: matched.to_vec(),
                                neg: n,
                            },
                            &mut ground_rules,
                        );
                    }
                    let mut at_least = neg.clone();
                    at_least.extend(atoms.iter().copied());
                    push_rule(
                        GroundRule {
                            head: None,
                            pos: matched.to_vec(),
                            neg: at_least,
                        },
                        &mut ground_rules,
                    );
                    for j in 0..atoms.len() {
                        for k in j + 1..atoms.len() {
                            let mut pos = matched.to_vec();
                            pos.extend([atoms[j], atoms[k]]);
                            push_rule(
                                GroundRule {
                                    head: None,
                                    pos,
                                    neg: neg.clone(),
                                },
                                &mut ground_rules,
                            );
                        }
                    }
                    Ok(())
                })?;
            }
            PKind::Constraint(aggs) => {
                join(&table, &r.body, &windows, names, &mut s, &mut |s, matched| {
                    let neg = resolve_neg(&table, &r.body.neg, s, names, all)?;
                    let mut ground_aggs = Vec::new();
                    for agg in aggs {
                        let bound = eval(&agg.bound, s, names)?;
                        let bound = bound
                            .as_int()
                            .ok_or_else(|| GroundError::NonIntegerBound(bound.to_string()))?;
                        let mut elements = Vec::new();
                        let mut local = s.clone();
                        join(
                            &table,
                            &agg.cond,
                            &full(agg.cond.pos.len(), all),
                            names,
                            &mut local,
                            &mut |ls, m| {
                                let tuple = agg
                                    .tuple
                                    .iter()
                                    .map(|t| eval(t, ls, names))
                                    .collect::<GResult<Vec<_>>>()?;
                                let e = AggregateElement {
                                    tuple,
                                    pos: m.to_vec(),
                                    neg: resolve_neg(&table, &agg.cond.neg, ls, names, all)?,
                                };
                                if !elements.contains(&e) {
                                    elements.push(e);
                                }
                                Ok(())
                            },
                        )?;
                        let g = GroundAggregate {
                            elements,
                            relation: agg.relation,
                            bound,
                        };
                        if g.elements.iter().all(|e| e.pos.is_empty() && e.neg.is_empty()) {
                            if !g.holds(|_| true) {
                                return Ok(());
                            }
                        } else {
                            ground_aggs.push(g);
                        }
                    }
                    if ground_aggs.is_empty() {
                        push_rule(
                            GroundRule {
                                head: None,
                                pos: matched.to_vec(),
                                neg,
                            },
                            &mut ground_rules,
                        );
                    } else {
                        let c = AggregateConstraint {
                            pos: matched.to_vec(),
                            neg,
                            aggregates: ground_aggs,
                        };
                        if agg_set.insert(c.clone()) {
                            gp.aggregate_constraints.push(c);
                        }
                    }
                    Ok(())
                })?;
            }
            PKind::Weak(weight, terms) => {
                join(&table, &r.body, &windows, names, &mut s, &mut |s, matched| {
                    let w = WeakConstraint {
                        pos: matched.to_vec(),
                        neg: resolve_neg(&table, &r.body.neg, s, names, all)?,
                        weight: *weight,
                        terms: terms.iter().map(|t| eval(t, s, names)).collect::<GResult<_>>()?,
                    };
                    if weak_set.insert(w.clone()) {
                        gp.weak.push(w);
                    }
                    Ok(())
                })?;
            }
        }
    }

    // Phase 5: p and -p exclude each other.
    for (id, atom) in table.iter() {
        if atom.strong {
            let mut positive = atom.clone();
            positive.strong = false;
            if let Some(p) = table.lookup(&positive) {
                push_rule(
                    GroundRule {
                        head: None,
                        pos: vec![p, id],
                        neg: vec![],
                    },
                    &mut ground_rules,
                );
            }
        }
    }

    gp.rules = ground_rules;
    gp.atoms = table;
    Ok(gp)
}

/// Constants and integers occurring in the grounded program: arguments of
/// ordinary atoms plus pointers and values of neural atoms.
pub fn herbrand_domain(program: &Program) -> GResult<BTreeSet<Value>> {
    let gp = ground(program)?;
    let mut out = BTreeSet::new();
    for (id, atom) in gp.atoms.iter() {
        let args = if gp.atoms.is_neural(id) { &atom.args[1..] } else { &atom.args[..] };
        out.extend(args.iter().cloned());
    }
    Ok(out)
}
