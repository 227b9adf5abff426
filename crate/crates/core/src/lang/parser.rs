//! Recursive-descent parser for programs and formulas.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    pub(crate) fn new(src: &str) -> PResult<Self> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].loc
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        ParseError::syntax(
            self.loc(),
            format!("expected {what}, found {}", self.peek().describe()),
        )
    }

    pub(crate) fn program(&mut self) -> PResult<Program> {
        let mut program = Program::default();
        while *self.peek() != Tok::Eof {
            let loc = self.loc();
            if matches!(self.peek(), Tok::Ident(s) if s == "nn") && *self.peek_at(1) == Tok::LParen {
                let node = self.neural()?;
                program.neural_rules.push(Located { node, loc });
            } else {
                let node = self.rule()?;
                program.asp_rules.push(Located { node, loc });
            }
        }
        Ok(program)
    }

    fn neural(&mut self) -> PResult<NeuralAtom> {
        self.bump(); // nn
        self.expect(Tok::LParen, "`(`")?;
        let model = match self.bump() {
            Tok::Ident(m) => m,
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("a neural model name"));
            }
        };
        self.expect(Tok::LParen, "`(`")?;
        let events_loc = self.loc();
        let events = match self.bump() {
            Tok::Int(e) if e >= 1 => e as usize,
            Tok::Int(_) => {
                return Err(ParseError::invalid_neural(
                    events_loc,
                    "the number of events must be at least 1",
                ))
            }
            _ => {
                self.pos -= 1;
                return Err(self.unexpected("the number of events"));
            }
        };
        let mut pointer = Vec::new();
        while self.eat(&Tok::Comma) {
            pointer.push(self.term()?);
        }
        if pointer.is_empty() {
            return Err(self.unexpected("`,` followed by the input pointer"));
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Comma, "`,`")?;
        self.expect(Tok::LBracket, "`[`")?;
        let mut values = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            values.push(self.term()?);
        }
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::RParen, "`)`")?;
        let body = if self.eat(&Tok::If) { self.body()? } else { Vec::new() };
        self.expect(Tok::Dot, "`.`")?;
        Ok(NeuralAtom {
            model,
            events,
            pointer,
            values,
            body,
        })
    }

    fn rule(&mut self) -> PResult<Rule> {
        match self.peek() {
            Tok::If => {
                self.bump();
                let body = self.body()?;
                self.expect(Tok::Dot, "`.`")?;
                Ok(Rule::Constraint { body })
            }
            Tok::WeakIf => {
                self.bump();
                let body = self.body()?;
                self.expect(Tok::Dot, "`.`")?;
                self.expect(Tok::LBracket, "`[` opening the weight")?;
                let weight = self.signed_int("an integer weight")?;
                let mut terms = Vec::new();
                while self.eat(&Tok::Comma) {
                    terms.push(self.term()?);
                }
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Rule::Weak {
                    body,
                    weight,
                    terms,
                })
            }
            Tok::LBrace => {
                self.bump();
                let mut elements = vec![self.choice_element()?];
                while self.eat(&Tok::Semi) {
                    elements.push(self.choice_element()?);
                }
                self.expect(Tok::RBrace, "`}`")?;
                let loc = self.loc();
                if !(self.eat(&Tok::Eq) && self.eat(&Tok::Int(1))) {
                    return Err(ParseError::syntax(
                        loc,
                        "only `= 1` bounds are supported on choice rules",
                    ));
                }
                let body = if self.eat(&Tok::If) { self.body()? } else { Vec::new() };
                self.expect(Tok::Dot, "`.`")?;
                Ok(Rule::Choice { elements, body })
            }
            _ => {
                let head = self.head_literal()?;
                let body = if self.eat(&Tok::If) { self.body()? } else { Vec::new() };
                self.expect(Tok::Dot, "`.`")?;
                Ok(Rule::Normal { head, body })
            }
        }
    }

    fn signed_int(&mut self, what: &str) -> PResult<i64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(if neg { -i } else { i })
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn choice_element(&mut self) -> PResult<ChoiceElement> {
        let atom = self.head_literal()?;
        let mut condition = Vec::new();
        if self.eat(&Tok::Colon) {
            condition.push(self.literal()?);
            while self.eat(&Tok::Comma) {
                condition.push(self.literal()?);
            }
        }
        Ok(ChoiceElement { atom, condition })
    }

    fn head_literal(&mut self) -> PResult<Literal> {
        let strong = self.eat(&Tok::Minus);
        let atom = self.atom()?;
        Ok(Literal {
            atom,
            default_negated: false,
            strong_negated: strong,
        })
    }

    fn body(&mut self) -> PResult<Vec<BodyElem>> {
        let mut body = Vec::new();
        if *self.peek() == Tok::Dot {
            return Ok(body);
        }
        body.push(self.body_elem()?);
        while self.eat(&Tok::Comma) {
            body.push(self.body_elem()?);
        }
        Ok(body)
    }

    fn body_elem(&mut self) -> PResult<BodyElem> {
        match self.peek() {
            Tok::Not => Ok(BodyElem::Literal(self.literal()?)),
            Tok::Count => Ok(BodyElem::Aggregate(self.aggregate()?)),
            Tok::Minus if matches!(self.peek_at(1), Tok::Ident(_)) => {
                Ok(BodyElem::Literal(self.literal()?))
            }
            Tok::Ident(_) => {
                let is_cmp = *self.peek_at(1) != Tok::LParen && cmp_op(self.peek_at(1)).is_some();
                if is_cmp {
                    Ok(BodyElem::Comparison(self.comparison()?))
                } else {
                    Ok(BodyElem::Literal(self.literal()?))
                }
            }
            _ => Ok(BodyElem::Comparison(self.comparison()?)),
        }
    }

    fn comparison(&mut self) -> PResult<Comparison> {
        let lhs = self.term()?;
        let op = cmp_op(self.peek()).ok_or_else(|| self.unexpected("a comparison operator"))?;
        self.bump();
        let rhs = self.term()?;
        Ok(Comparison { op, lhs, rhs })
    }

    fn aggregate(&mut self) -> PResult<Aggregate> {
        self.expect(Tok::Count, "`#count`")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut tuple = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            tuple.push(self.term()?);
        }
        self.expect(Tok::Colon, "`:`")?;
        let mut condition = vec![self.literal()?];
        while self.eat(&Tok::Comma) {
            condition.push(self.literal()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        let relation = cmp_op(self.peek()).ok_or_else(|| self.unexpected("a comparison operator"))?;
        self.bump();
        let bound = self.term()?;
        Ok(Aggregate {
            function: AggregateFn::Count,
            tuple,
            condition,
            relation,
            bound,
        })
    }

    pub(crate) fn literal(&mut self) -> PResult<Literal> {
        let default_negated = self.eat(&Tok::Not);
        let strong_negated = self.eat(&Tok::Minus);
        let atom = self.atom()?;
        Ok(Literal {
            atom,
            default_negated,
            strong_negated,
        })
    }

    fn atom(&mut self) -> PResult<Atom> {
        let predicate = match self.peek().clone() {
            Tok::Ident(p) if p != "nn" => {
                self.bump();
                p
            }
            _ => return Err(self.unexpected("an atom")),
        };
        let mut args = Vec::new();
        let mut eq_value = None;
        if self.eat(&Tok::LParen) {
            args.push(self.term()?);
            while self.eat(&Tok::Comma) {
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`)`")?;
            if self.eat(&Tok::Eq) {
                eq_value = Some(self.term()?);
            }
        }
        Ok(Atom {
            predicate,
            args,
            eq_value,
        })
    }

    pub(crate) fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = Term::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> PResult<Term> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Star) {
            let rhs = self.unary()?;
            lhs = Term::Binary(ArithOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Term> {
        if *self.peek() == Tok::Minus {
            if let Tok::Int(i) = *self.peek_at(1) {
                self.bump();
                self.bump();
                return self.maybe_range(-i);
            }
            self.bump();
            let inner = self.unary()?;
            return Ok(Term::Binary(ArithOp::Sub, Box::new(Term::Int(0)), Box::new(inner)));
        }
        self.primary()
    }

    fn maybe_range(&mut self, lo: i64) -> PResult<Term> {
        if !self.eat(&Tok::DotDot) {
            return Ok(Term::Int(lo));
        }
        let loc = self.loc();
        let hi = self.signed_int("an integer upper bound")?;
        if lo > hi {
            return Err(ParseError::syntax(loc, format!("empty range {lo}..{hi}")));
        }
        Ok(Term::Range(lo, hi))
    }

    fn primary(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                self.maybe_range(i)
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Ident(s) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    return Err(ParseError::syntax(
                        self.loc(),
                        format!("function terms such as `{s}(...)` are not supported"),
                    ));
                }
                Ok(Term::Sym(s))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    pub(crate) fn formula_top(&mut self) -> PResult<Formula> {
        let f = self.disjunction()?;
        self.eat(&Tok::Dot);
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of formula"));
        }
        Ok(f)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.conjunction()?];
        while matches!(self.peek(), Tok::Semi | Tok::Pipe) || self.is_word("or") {
            self.bump();
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.formula_unary()?];
        while matches!(self.peek(), Tok::Comma | Tok::Amp) || self.is_word("and") {
            self.bump();
            parts.push(self.formula_unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn formula_unary(&mut self) -> PResult<Formula> {
        match self.peek() {
            Tok::Not => {
                self.bump();
                Ok(Formula::Not(Box::new(self.formula_unary()?)))
            }
            Tok::LParen => {
                self.bump();
                let f = self.disjunction()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            _ if self.is_word("true") && *self.peek_at(1) != Tok::LParen => {
                self.bump();
                Ok(Formula::True)
            }
            _ if self.is_word("false") && *self.peek_at(1) != Tok::LParen => {
                self.bump();
                Ok(Formula::False)
            }
            _ => {
                let strong_negated = self.eat(&Tok::Minus);
                let atom = self.atom()?;
                Ok(Formula::Atom(Literal {
                    atom,
                    default_negated: false,
                    strong_negated,
                }))
            }
        }
    }
}

fn cmp_op(t: &Tok) -> Option<CmpOp> {
    Some(match t {
        Tok::Eq => CmpOp::Eq,
        Tok::Ne => CmpOp::Ne,
        Tok::Lt => CmpOp::Lt,
        Tok::Le => CmpOp::Le,
        Tok::Gt => CmpOp::Gt,
        Tok::Ge => CmpOp::Ge,
        _ => return None,
    })
}
