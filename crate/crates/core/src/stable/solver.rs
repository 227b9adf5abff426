//! Branch-and-propagate search over the Clark completion.
//!
//! Propagation combines unit propagation on the completion (per-rule counters
//! of true and false body literals, per-atom counts of rules that can still
//! support it) with an unfounded-set check at every fixpoint. Branching takes
//! the lowest unassigned atom id and tries `false` before `true`. Complete
//! assignments are confirmed with [`check_stable`](super::check_stable).
//!
//! Aggregate constraints, the observation formula and the weak-constraint
//! bound only prune: they reject partial assignments under which they are
//! already decided, and are evaluated exactly on complete ones.

use std::collections::BTreeMap;

use crate::ground::{AtomId, GroundProgram, GroundRule, Value};
use crate::lang::CmpOp;

use super::formula::{GroundFormula, Truth};
use super::{check_stable, Interpretation, SolveError, DEFAULT_MODEL_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimize {
    /// Every model; weak constraints only contribute a penalty.
    None,
    /// Only models of minimal penalty.
    Minimize,
    /// Only models whose penalty is at most the given value.
    AtMost(i64),
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub model_limit: usize,
    /// Discard models violating an aggregate constraint.
    pub aggregates: bool,
    pub optimize: Optimize,
    /// Keep only models satisfying this formula.
    pub observation: Option<GroundFormula>,
    /// Atoms fixed before search.
    pub assumptions: Vec<(AtomId, bool)>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            model_limit: DEFAULT_MODEL_LIMIT,
            aggregates: true,
            optimize: Optimize::Minimize,
            observation: None,
            assumptions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub model: Interpretation,
    pub penalty: i64,
}

/// Stable models of `ground` after aggregate filtering, observation filtering
/// and optimization as selected by `options`, in discovery order.
pub fn solve(ground: &GroundProgram, options: &SolveOptions) -> Result<Vec<Answer>, SolveError> {
    if !ground.neural.is_empty() {
        return Err(SolveError::Unexpanded(ground.neural.len()));
    }
    let mut s = Search::new(ground, options);
    for &(a, v) in &options.assumptions {
        if !s.assign(a, if v { Val::True } else { Val::False }) {
            return Ok(Vec::new());
        }
    }
    s.search()?;
    Ok(s.found)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Val {
    Unset,
    True,
    False,
}

#[derive(Clone, Copy)]
struct Occ {
    rule: u32,
    neg: bool,
}

#[derive(Clone, Copy)]
enum Check {
    Rule(u32),
    Atom(AtomId),
}

struct Search<'a> {
    gp: &'a GroundProgram,
    opts: &'a SolveOptions,
    occ: Vec<Vec<Occ>>,
    heads: Vec<Vec<u32>>,
    val: Vec<Val>,
    sat: Vec<u32>,
    fals: Vec<u32>,
    support: Vec<u32>,
    trail: Vec<AtomId>,
    queue: Vec<Check>,
    /// Distinct weak-constraint tuple per weak constraint, and its weight.
    weak_tuple: Vec<usize>,
    tuple_weight: Vec<i64>,
    bound_enabled: bool,
    best: Option<i64>,
    found: Vec<Answer>,
}

impl<'a> Search<'a> {
    fn new(gp: &'a GroundProgram, opts: &'a SolveOptions) -> Self {
        let n = gp.atoms.len();
        let mut occ = vec![Vec::new(); n];
        let mut heads = vec![Vec::new(); n];
        let mut support = vec![0; n];
        for (i, r) in gp.rules.iter().enumerate() {
            for &a in &r.pos {
                occ[a as usize].push(Occ { rule: i as u32, neg: false });
            }
            for &a in &r.neg {
                occ[a as usize].push(Occ { rule: i as u32, neg: true });
            }
            if let Some(h) = r.head {
                heads[h as usize].push(i as u32);
                support[h as usize] += 1;
            }
        }
        let mut tuples: BTreeMap<(i64, &[Value]), usize> = BTreeMap::new();
        let mut tuple_weight = Vec::new();
        let weak_tuple = gp
            .weak
            .iter()
            .map(|w| {
                *tuples.entry((w.weight, &w.terms)).or_insert_with(|| {
                    tuple_weight.push(w.weight);
                    tuple_weight.len() - 1
                })
            })
            .collect();
        let bound_enabled = gp.weak.iter().all(|w| w.weight >= 0);
        let best = match opts.optimize {
            Optimize::AtMost(c) => Some(c),
            _ => None,
        };
        let mut s = Search {
            gp,
            opts,
            occ,
            heads,
            val: vec![Val::Unset; n],
            sat: vec![0; gp.rules.len()],
            fals: vec![0; gp.rules.len()],
            support,
            trail: Vec::new(),
            queue: Vec::new(),
            weak_tuple,
            tuple_weight,
            bound_enabled,
            best,
            found: Vec::new(),
        };
        s.queue.extend((0..gp.rules.len() as u32).map(Check::Rule));
        s.queue.extend((0..n as AtomId).map(Check::Atom));
        s
    }

    fn rule(&self, r: u32) -> &'a GroundRule {
        &self.gp.rules[r as usize]
    }

    /// Sets `a` to `v` and updates counters. Returns false on a clash.
    fn assign(&mut self, a: AtomId, v: Val) -> bool {
        match self.val[a as usize] {
            Val::Unset => {}
            cur => return cur == v,
        }
        self.val[a as usize] = v;
        self.trail.push(a);
        for i in 0..self.occ[a as usize].len() {
            let Occ { rule, neg } = self.occ[a as usize][i];
            if (v == Val::True) != neg {
                self.sat[rule as usize] += 1;
            } else {
                self.fals[rule as usize] += 1;
                if self.fals[rule as usize] == 1 {
                    if let Some(h) = self.rule(rule).head {
                        self.support[h as usize] -= 1;
                        self.queue.push(Check::Atom(h));
                    }
                }
            }
            self.queue.push(Check::Rule(rule));
        }
        self.queue.push(Check::Atom(a));
        for i in 0..self.heads[a as usize].len() {
            let r = self.heads[a as usize][i];
            self.queue.push(Check::Rule(r));
        }
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let a = self.trail.pop().unwrap();
            let v = self.val[a as usize];
            for i in 0..self.occ[a as usize].len() {
                let Occ { rule, neg } = self.occ[a as usize][i];
                if (v == Val::True) != neg {
                    self.sat[rule as usize] -= 1;
                } else {
                    self.fals[rule as usize] -= 1;
                    if self.fals[rule as usize] == 0 {
                        if let Some(h) = self.rule(rule).head {
                            self.support[h as usize] += 1;
                        }
                    }
                }
            }
            self.val[a as usize] = Val::Unset;
        }
    }

    fn lit_len(r: &GroundRule) -> u32 {
        (r.pos.len() + r.neg.len()) as u32
    }

    /// Makes every unassigned body literal of `r` take the value `make_true`.
    fn force_body(&mut self, r: u32, make_true: bool) -> bool {
        let rule = self.rule(r);
        for &a in &rule.pos {
            if self.val[a as usize] == Val::Unset
                && !self.assign(a, if make_true { Val::True } else { Val::False })
            {
                return false;
            }
        }
        for &a in &rule.neg {
            if self.val[a as usize] == Val::Unset
                && !self.assign(a, if make_true { Val::False } else { Val::True })
            {
                return false;
            }
        }
        true
    }

    fn check_rule(&mut self, r: u32) -> bool {
        let i = r as usize;
        if self.fals[i] > 0 {
            return true;
        }
        let rule = self.rule(r);
        let n = Self::lit_len(rule);
        let head = rule.head.map(|h| (h, self.val[h as usize]));
        if self.sat[i] == n {
            return match head {
                None => false,
                Some((h, _)) => self.assign(h, Val::True),
            };
        }
        if self.sat[i] + 1 == n && matches!(head, None | Some((_, Val::False))) {
            return self.force_body(r, false);
        }
        true
    }

    fn check_atom(&mut self, a: AtomId) -> bool {
        let i = a as usize;
        match (self.support[i], self.val[i]) {
            (0, _) => self.assign(a, Val::False),
            (1, Val::True) => {
                let r = self.heads[i]
                    .iter()
                    .copied()
                    .find(|&r| self.fals[r as usize] == 0)
                    .expect("one live supporting rule");
                self.force_body(r, true)
            }
            _ => true,
        }
    }

    fn unit_propagate(&mut self) -> bool {
        while let Some(c) = self.queue.pop() {
            let ok = match c {
                Check::Rule(r) => self.check_rule(r),
                Check::Atom(a) => self.check_atom(a),
            };
            if !ok {
                self.queue.clear();
                return false;
            }
        }
        true
    }

    /// Falsifies every atom that cannot be derived from rules whose bodies are
    /// not yet false. Returns false on a clash with a true atom.
    fn unfounded(&mut self) -> bool {
        let n = self.val.len();
        let mut derived = vec![false; n];
        let mut need: Vec<u32> = self.gp.rules.iter().map(|r| r.pos.len() as u32).collect();
        let mut stack = Vec::new();
        for (i, r) in self.gp.rules.iter().enumerate() {
            if let Some(h) = r.head {
                if self.fals[i] == 0 && need[i] == 0 && !derived[h as usize] {
                    derived[h as usize] = true;
                    stack.push(h);
                }
            }
        }
        while let Some(a) = stack.pop() {
            for o in &self.occ[a as usize] {
                let r = o.rule as usize;
                if o.neg || self.fals[r] > 0 {
                    continue;
                }
                need[r] -= 1;
                if need[r] == 0 {
                    if let Some(h) = self.gp.rules[r].head {
                        if !derived[h as usize] {
                            derived[h as usize] = true;
                            stack.push(h);
                        }
                    }
                }
            }
        }
        for a in 0..n {
            if !derived[a] && self.val[a] != Val::False && !self.assign(a as AtomId, Val::False) {
                self.queue.clear();
                return false;
            }
        }
        true
    }

    fn truth(&self, a: AtomId) -> Truth {
        match self.val[a as usize] {
            Val::True => Truth::True,
            Val::False => Truth::False,
            Val::Unset => Truth::Unknown,
        }
    }

    fn body_certain(&self, pos: &[AtomId], neg: &[AtomId]) -> bool {
        pos.iter().all(|&a| self.val[a as usize] == Val::True)
            && neg.iter().all(|&a| self.val[a as usize] == Val::False)
    }

    fn body_possible(&self, pos: &[AtomId], neg: &[AtomId]) -> bool {
        pos.iter().all(|&a| self.val[a as usize] != Val::False)
            && neg.iter().all(|&a| self.val[a as usize] != Val::True)
    }

    /// True if some aggregate constraint body is already certainly satisfied.
    fn aggregate_violated(&self) -> bool {
        self.gp.aggregate_constraints.iter().any(|c| {
            self.body_certain(&c.pos, &c.neg)
                && c.aggregates.iter().all(|g| {
                    let mut certain: Vec<&Vec<Value>> = Vec::new();
                    let mut possible: Vec<&Vec<Value>> = Vec::new();
                    for e in &g.elements {
                        if self.body_certain(&e.pos, &e.neg) && !certain.contains(&&e.tuple) {
                            certain.push(&e.tuple);
                        }
                        if self.body_possible(&e.pos, &e.neg) && !possible.contains(&&e.tuple) {
                            possible.push(&e.tuple);
                        }
                    }
                    let (lo, hi, b) = (certain.len() as i64, possible.len() as i64, g.bound);
                    match g.relation {
                        CmpOp::Eq => lo == hi && lo == b,
                        CmpOp::Ne => b < lo || b > hi,
                        CmpOp::Lt => hi < b,
                        CmpOp::Le => hi <= b,
                        CmpOp::Gt => lo > b,
                        CmpOp::Ge => lo >= b,
                    }
                })
        })
    }

    fn penalty_lower_bound(&self) -> i64 {
        let mut seen = vec![false; self.tuple_weight.len()];
        for (w, &t) in self.gp.weak.iter().zip(&self.weak_tuple) {
            if !seen[t] && self.body_certain(&w.pos, &w.neg) {
                seen[t] = true;
            }
        }
        seen.iter()
            .zip(&self.tuple_weight)
            .filter(|(s, _)| **s)
            .map(|(_, w)| w)
            .sum()
    }

    fn pruned(&self) -> bool {
        if self.opts.aggregates && self.aggregate_violated() {
            return true;
        }
        if let Some(f) = &self.opts.observation {
            if f.eval3(&|a| self.truth(a)) == Truth::False {
                return true;
            }
        }
        if self.opts.optimize != Optimize::None && self.bound_enabled {
            if let Some(best) = self.best {
                return self.penalty_lower_bound() > best;
            }
        }
        false
    }

    fn propagate(&mut self) -> bool {
        loop {
            if !self.unit_propagate() || !self.unfounded() {
                return false;
            }
            if self.queue.is_empty() {
                return !self.pruned();
            }
        }
    }

    fn leaf(&mut self) -> Result<(), SolveError> {
        let model = Interpretation::new(
            (0..self.val.len() as AtomId)
                .filter(|&a| self.val[a as usize] == Val::True)
                .collect(),
        );
        debug_assert!(check_stable(self.gp, &model), "search produced a non-stable model");
        if self.opts.aggregates && !super::satisfies_constraints(&model, &self.gp.aggregate_constraints) {
            return Ok(());
        }
        if let Some(f) = &self.opts.observation {
            if !f.holds(&|a| model.contains(a)) {
                return Ok(());
            }
        }
        let penalty = super::penalty(&model, &self.gp.weak);
        match self.opts.optimize {
            Optimize::None => {}
            Optimize::AtMost(c) => {
                if penalty > c {
                    return Ok(());
                }
            }
            Optimize::Minimize => match self.best {
                Some(b) if penalty > b => return Ok(()),
                Some(b) if penalty < b => {
                    self.found.clear();
                    self.best = Some(penalty);
                }
                None => self.best = Some(penalty),
                _ => {}
            },
        }
        if self.found.len() >= self.opts.model_limit {
            return Err(SolveError::ModelLimit(self.opts.model_limit));
        }
        self.found.push(Answer { model, penalty });
        Ok(())
    }

    fn search(&mut self) -> Result<(), SolveError> {
        if !self.propagate() {
            return Ok(());
        }
        let Some(a) = self.val.iter().position(|v| *v == Val::Unset) else {
            return self.leaf();
        };
        for v in [Val::False, Val::True] {
            let mark = self.trail.len();
            if self.assign(a as AtomId, v) {
                self.search()?;
            } else {
                self.queue.clear();
            }
            self.undo(mark);
        }
        Ok(())
    }
}
