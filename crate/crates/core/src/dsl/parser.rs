use std::collections::BTreeMap;
use std::sync::Arc;

use super::diag::{Diagnostic, Diagnostics};
use super::lexer::{is_reserved, lex, Tok, Token};
use crate::dynamics::{Effect, Rule, RuleSpec};
use crate::geometry::{Cmp, ConstraintAtom, NumExpr};
use crate::logic::{Atom, Formula, MacroDef, Quantified};
use crate::model::{
    canonical_forces, EntityDecl, ForceFluent, ForceMode, ModelError, RelationSig, Scenario, ScenarioBody,
    ShapeKind, Sort, SortHierarchy, State, Theory, Trace,
};
use crate::rational::Rational;
use crate::span::{Loc, SourceSpan, Term};

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Furthest failure seen while backtracking, reported if nothing parses.
    furthest: Option<(usize, Diagnostic)>,
}

impl Parser {
    fn new(src: &str, file: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src, &Arc::from(file))?,
            pos: 0,
            furthest: None,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(_) => "a number".into(),
            Tok::Dollar(n) => format!("`${n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn err<T>(&self, what: &str) -> PResult<T> {
        Err(Diagnostic::error(
            "syntax",
            format!("expected {what}, found {}", self.describe()),
            self.span(),
        ))
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.at_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.err(&format!("`{kw}`"))
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<SourceSpan> {
        if self.at_sym(s) {
            Ok(self.bump().span)
        } else {
            self.err(&format!("`{s}`"))
        }
    }

    /// A user identifier; reserved words are rejected.
    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) if is_reserved(&s) => Err(Diagnostic::error(
                "reserved-word",
                format!("`{s}` is a reserved word and cannot be used as {what}"),
                self.span(),
            )),
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => self.err(what),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        if let Tok::Dollar(n) = self.peek().clone() {
            let span = self.bump().span;
            return Ok(Term {
                name: format!("${n}"),
                loc: Loc(Some(span)),
            });
        }
        if matches!(self.peek(), Tok::Ident(s) if is_reserved(s)) {
            return self.err("a term");
        }
        let (name, span) = self.ident("a term")?;
        Ok(Term {
            name,
            loc: Loc(Some(span)),
        })
    }

    fn rational(&mut self) -> PResult<Rational> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.err("a number"),
        }
    }

    fn natural(&mut self) -> PResult<usize> {
        let span = self.span();
        let v = self.rational()?;
        if !v.is_integer() || v < Rational::from_integer(0.into()) {
            return Err(Diagnostic::error("syntax", "expected a natural number", span));
        }
        v.to_integer()
            .try_into()
            .map_err(|_| Diagnostic::error("syntax", "number too large", span))
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err("end of input")
        }
    }

    fn note_failure(&mut self, d: Diagnostic, at: usize) {
        if self.furthest.as_ref().is_none_or(|(p, _)| at >= *p) {
            self.furthest = Some((at, d));
        }
    }

    // -----------------------------------------------------------------------
    // Formulas

    fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if self.eat_sym("->") {
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.conjunction()?;
        while self.eat_kw("or") {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.until()?;
        while self.eat_kw("and") {
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> PResult<Formula> {
        let lhs = self.unary()?;
        if self.eat_kw("until") {
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Formula> {
        if self.at_kw("next") && matches!(self.peek_at(1), Tok::Sym("[")) {
            return self.primary();
        }
        type Op = fn(Formula) -> Formula;
        let ops: [(&str, Op); 5] = [
            ("not", Formula::not),
            ("next", Formula::next),
            ("always", Formula::always),
            ("eventually", Formula::eventually),
            ("before", Formula::before),
        ];
        for (kw, op) in ops {
            if self.eat_kw(kw) {
                return Ok(op(self.unary()?));
            }
        }
        if self.at_kw("forall") || self.at_kw("exists") {
            let universal = self.at_kw("forall");
            let loc = Loc(Some(self.bump().span));
            let (var, _) = self.ident("a variable")?;
            self.expect_sym(":")?;
            let (sort, _) = self.ident("a sort")?;
            self.expect_sym(".")?;
            let body = Box::new(self.formula()?);
            let q = Quantified { var, sort, body, loc };
            return Ok(if universal { Formula::Forall(q) } else { Formula::Exists(q) });
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Formula> {
        for (kw, f) in [("true", Formula::True), ("false", Formula::False), ("final", Formula::Final)] {
            if self.eat_kw(kw) {
                return Ok(f);
            }
        }
        let start = self.pos;
        match self.constraint() {
            Ok(c) => return Ok(Formula::Compare(c)),
            Err(d) => {
                let at = self.pos;
                self.note_failure(d, at);
                self.pos = start;
            }
        }
        if self.eat_sym("(") {
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        if matches!(self.peek(), Tok::Ident(_)) && matches!(self.peek_at(1), Tok::Sym("(")) {
            return self.atom();
        }
        let here = self.err::<Formula>("a formula").unwrap_err();
        match self.furthest.take() {
            Some((p, d)) if p > start => Err(d),
            _ => Err(here),
        }
    }

    fn atom(&mut self) -> PResult<Formula> {
        let (name, span) = self.ident("a relation name")?;
        self.expect_sym("(")?;
        let mut args = Vec::new();
        let mut extra = Vec::new();
        if !self.at_sym(")") && !self.at_sym(";") {
            args.push(self.term()?);
            while self.eat_sym(",") {
                args.push(self.term()?);
            }
        }
        if self.eat_sym(";") {
            extra.push(self.num_expr()?);
            while self.eat_sym(",") {
                extra.push(self.num_expr()?);
            }
        }
        self.expect_sym(")")?;
        Ok(Formula::Atom(Atom {
            name,
            args,
            extra,
            loc: Loc(Some(span)),
        }))
    }

    fn constraint(&mut self) -> PResult<ConstraintAtom> {
        let span = self.span();
        let lhs = self.num_expr()?;
        let cmp = match self.peek() {
            Tok::Sym("<") => Cmp::Lt,
            Tok::Sym("<=") => Cmp::Le,
            Tok::Sym("=") | Tok::Sym("==") => Cmp::Eq,
            Tok::Sym("!=") => Cmp::Ne,
            Tok::Sym(">=") => Cmp::Ge,
            Tok::Sym(">") => Cmp::Gt,
            _ => return self.err("a comparison operator"),
        };
        self.bump();
        let rhs = self.num_expr()?;
        Ok(ConstraintAtom {
            lhs,
            cmp,
            rhs,
            loc: Loc(Some(span)),
        })
    }

    fn num_expr(&mut self) -> PResult<NumExpr> {
        let mut lhs = self.product()?;
        loop {
            if self.eat_sym("+") {
                lhs = NumExpr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.eat_sym("-") {
                lhs = NumExpr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> PResult<NumExpr> {
        let mut lhs = self.negation()?;
        while self.eat_sym("*") {
            lhs = NumExpr::Mul(Box::new(lhs), Box::new(self.negation()?));
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> PResult<NumExpr> {
        if self.at_sym("-") {
            if let Tok::Num(v) = self.peek_at(1).clone() {
                self.bump();
                self.bump();
                return Ok(NumExpr::Const(-v));
            }
            self.bump();
            return Ok(NumExpr::Neg(Box::new(self.negation()?)));
        }
        self.num_atom()
    }

    fn num_atom(&mut self) -> PResult<NumExpr> {
        if let Tok::Num(v) = self.peek().clone() {
            self.bump();
            return Ok(NumExpr::Const(v));
        }
        if self.eat_sym("(") {
            let e = self.num_expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.at_kw("delta") || self.at_kw("theta") {
            let is_theta = self.at_kw("theta");
            self.bump();
            self.expect_sym("(")?;
            let a = self.term()?;
            self.expect_sym(",")?;
            let b = self.term()?;
            self.expect_sym(")")?;
            return Ok(if is_theta { NumExpr::Theta(a, b) } else { NumExpr::Delta(a, b) });
        }
        if self.eat_kw("measure") {
            self.expect_sym("(")?;
            let a = self.term()?;
            self.expect_sym(")")?;
            return Ok(NumExpr::Measure(a));
        }
        if self.eat_kw("drop") {
            self.expect_sym("(")?;
            let a = self.term()?;
            self.expect_sym(";")?;
            let step = self.num_expr()?;
            self.expect_sym(")")?;
            return Ok(NumExpr::Drop(a, Box::new(step)));
        }
        if self.at_kw("next") && matches!(self.peek_at(1), Tok::Sym("[")) {
            self.bump();
            self.bump();
            let e = self.num_expr()?;
            self.expect_sym("]")?;
            return Ok(NumExpr::Next(Box::new(e)));
        }
        let entity = match self.peek() {
            Tok::Dollar(_) => self.term()?,
            Tok::Ident(_) => self.term()?,
            _ => return self.err("a numeric expression"),
        };
        if self.eat_sym(".") {
            let (param, _) = self.ident("a parameter name")?;
            return Ok(NumExpr::Param { entity, param });
        }
        if entity.name.starts_with('$') {
            return self.err("`.` after a template argument");
        }
        Ok(NumExpr::Named(entity.name, entity.loc))
    }

    // -----------------------------------------------------------------------
    // Theories

    fn theory(&mut self) -> Result<Theory, Diagnostics> {
        self.expect_kw("theory")?;
        let (name, _) = self.ident("a theory name")?;
        let mut th = Theory {
            name,
            ..Theory::default()
        };
        let mut sort_refs: Vec<(String, SourceSpan)> = Vec::new();
        let mut names: BTreeMap<(&'static str, String), SourceSpan> = BTreeMap::new();
        let mut dup = |kind: &'static str, name: &str, span: &SourceSpan| -> PResult<()> {
            match names.insert((kind, name.to_string()), span.clone()) {
                Some(_) => Err(Diagnostic::error(
                    "duplicate",
                    format!("{kind} `{name}` declared twice"),
                    span.clone(),
                )),
                None => Ok(()),
            }
        };
        while !self.at_kw("end") {
            if self.eat_kw("sort") {
                let (s, span) = self.ident("a sort name")?;
                self.expect_sym("<")?;
                let (p, pspan) = self.ident("a sort name")?;
                dup("sort", &s, &span)?;
                sort_refs.push((p.clone(), pspan));
                th.sorts.push(Sort::new(s, p));
            } else if self.eat_kw("role") {
                let mut rs = vec![self.ident("a role name")?];
                while self.eat_sym(",") {
                    rs.push(self.ident("a role name")?);
                }
                self.expect_sym(":")?;
                let (sort, sspan) = self.ident("a sort")?;
                sort_refs.push((sort.clone(), sspan));
                for (r, span) in rs {
                    dup("role", &r, &span)?;
                    th.roles.push((r, sort.clone()));
                }
            } else if self.eat_kw("relation") {
                let (name, span) = self.ident("a relation name")?;
                dup("relation", &name, &span)?;
                self.expect_sym("(")?;
                let mut arg_sorts = Vec::new();
                if !self.at_sym(")") {
                    loop {
                        let (s, sspan) = self.ident("a sort")?;
                        sort_refs.push((s.clone(), sspan));
                        arg_sorts.push(s);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                let definition = if self.eat_sym(":=") {
                    Some(self.constraint()?)
                } else {
                    None
                };
                th.relations.push(RelationSig {
                    name,
                    arg_sorts,
                    definition,
                });
            } else if self.eat_kw("param") {
                let (name, span) = self.ident("a parameter name")?;
                dup("param", &name, &span)?;
                self.expect_sym("=")?;
                let v = self.rational()?;
                th.params.push((name, v));
            } else if self.eat_kw("alias") {
                let mut rs = vec![self.ident("a role name")?.0];
                while self.eat_sym(",") {
                    rs.push(self.ident("a role name")?.0);
                }
                for i in 0..rs.len() {
                    for j in i + 1..rs.len() {
                        th.aliases.push((rs[i].clone(), rs[j].clone()));
                    }
                }
            } else if self.eat_kw("macro") {
                let (name, span) = self.ident("a macro name")?;
                dup("macro", &name, &span)?;
                self.expect_sym("(")?;
                let mut params = Vec::new();
                let mut num_params = Vec::new();
                if !self.at_sym(")") && !self.at_sym(";") {
                    loop {
                        let (p, _) = self.ident("a parameter")?;
                        self.expect_sym(":")?;
                        let (s, sspan) = self.ident("a sort")?;
                        sort_refs.push((s.clone(), sspan));
                        params.push((p, s));
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                if self.eat_sym(";") {
                    loop {
                        num_params.push(self.ident("a numeric parameter")?.0);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                self.expect_sym(":=")?;
                let body = self.formula()?;
                th.macros.push(MacroDef {
                    name,
                    params,
                    num_params,
                    body,
                    loc: Loc(Some(span)),
                });
            } else if self.eat_kw("axiom") {
                th.axioms.push(self.formula()?);
            } else {
                return Err(self
                    .err::<()>("`sort`, `role`, `relation`, `param`, `alias`, `macro`, `axiom` or `end`")
                    .unwrap_err()
                    .into());
            }
        }
        let end = self.expect_kw("end")?;
        self.expect_eof()?;
        let h = SortHierarchy::with_sorts(&th.sorts).map_err(|e| model_diag(e, end.clone()))?;
        let unknown: Vec<Diagnostic> = sort_refs
            .into_iter()
            .filter(|(s, _)| !h.contains(s))
            .map(|(s, span)| Diagnostic::error("unknown-sort", format!("unknown sort `{s}`"), span))
            .collect();
        if !unknown.is_empty() {
            return Err(Diagnostics(unknown));
        }
        Ok(th)
    }

    // -----------------------------------------------------------------------
    // Scenarios

    fn force_body(&mut self) -> PResult<(String, Term, Rational, Rational, ForceMode)> {
        let (label, _) = self.ident("a force label")?;
        self.expect_kw("on")?;
        let target = self.term()?;
        self.expect_sym("=")?;
        self.expect_sym("(")?;
        let dx = self.rational()?;
        self.expect_sym(",")?;
        let dy = self.rational()?;
        self.expect_sym(")")?;
        let mode = if self.eat_kw("active") {
            ForceMode::Active
        } else if self.eat_kw("passive") {
            ForceMode::Passive
        } else {
            return self.err("`active` or `passive`");
        };
        Ok((label, target, dx, dy, mode))
    }

    fn scenario(&mut self) -> Result<Scenario, Diagnostics> {
        self.expect_kw("scenario")?;
        let (name, name_span) = self.ident("a scenario name")?;
        let mut sorts = Vec::new();
        let mut entities: Vec<EntityDecl> = Vec::new();
        let mut spans: BTreeMap<String, SourceSpan> = BTreeMap::new();
        let mut forces = Vec::new();
        loop {
            if self.eat_kw("sort") {
                let (s, _) = self.ident("a sort name")?;
                self.expect_sym("<")?;
                let (p, _) = self.ident("a sort name")?;
                sorts.push(Sort::new(s, p));
            } else if self.eat_kw("entity") {
                let (id, span) = self.ident("an entity id")?;
                self.expect_sym(":")?;
                let (sort, _) = self.ident("a sort")?;
                self.expect_sym("=")?;
                let shape_span = self.span();
                let shape = match self.peek().clone() {
                    Tok::Ident(s) => ShapeKind::from_keyword(&s),
                    _ => None,
                };
                let Some(shape) = shape else {
                    return Err(self
                        .err::<()>("a shape (`point`, `circle`, `rectangle`, `segment` or `floor`)")
                        .unwrap_err()
                        .into());
                };
                self.bump();
                self.expect_sym("(")?;
                let mut vals = Vec::new();
                if !self.at_sym(")") {
                    vals.push(self.rational()?);
                    while self.eat_sym(",") {
                        vals.push(self.rational()?);
                    }
                }
                self.expect_sym(")")?;
                let mut decl = EntityDecl::new(id.clone(), sort, shape, vals).map_err(|e| model_diag(e, shape_span))?;
                if self.eat_kw("with") {
                    loop {
                        let (attr, _) = self.ident("an attribute")?;
                        self.expect_sym("=")?;
                        decl = decl.with_attribute(attr, self.rational()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                spans.insert(id, span);
                entities.push(decl);
            } else if self.eat_kw("force") {
                let (label, target, dx, dy, mode) = self.force_body()?;
                check_entity(&entities, &target)?;
                forces.push(ForceFluent {
                    target: target.name,
                    label,
                    dx,
                    dy,
                    mode,
                });
            } else {
                break;
            }
        }
        let body = if self.eat_kw("trace") {
            self.expect_kw("length")?;
            let len_span = self.span();
            let len = self.natural()?;
            if len == 0 {
                return Err(Diagnostic::error("syntax", "a trace needs at least one state", len_span).into());
            }
            ScenarioBody::Concrete(self.trace_blocks(&entities, &forces, len)?)
        } else if self.eat_kw("rules") {
            let mut rules = Vec::new();
            while !self.at_kw("horizon") {
                rules.push(self.rule_spec()?);
            }
            self.expect_kw("horizon")?;
            let horizon_span = self.span();
            let horizon = self.natural()?;
            if horizon == 0 {
                return Err(Diagnostic::error("syntax", "horizon must be at least 1", horizon_span).into());
            }
            ScenarioBody::Generative { rules, horizon }
        } else {
            return Err(self
                .err::<()>("`sort`, `entity`, `force`, `trace` or `rules`")
                .unwrap_err()
                .into());
        };
        self.expect_kw("end")?;
        self.expect_eof()?;
        Scenario::declare(name, sorts, entities, forces, body).map_err(|e| {
            let span = match &e {
                ModelError::DuplicateEntity(id)
                | ModelError::BadShapeForSort { entity: id, .. }
                | ModelError::NegativeExtent { entity: id, .. }
                | ModelError::UnknownParameter { entity: id, .. }
                | ModelError::ShapeArity { entity: id, .. } => spans.get(id).cloned(),
                _ => None,
            };
            model_diag(e, span.unwrap_or(name_span)).into()
        })
    }

    fn trace_blocks(&mut self, entities: &[EntityDecl], forces: &[ForceFluent], len: usize) -> PResult<Trace> {
        let mut blocks: BTreeMap<usize, Vec<StateItem>> = BTreeMap::new();
        let mut last: Option<usize> = None;
        while self.at_kw("state") {
            self.bump();
            let span = self.span();
            let i = self.natural()?;
            if i >= len {
                return Err(Diagnostic::error(
                    "state-out-of-range",
                    format!("state {i} is outside a trace of length {len}"),
                    span,
                ));
            }
            if last.is_some_and(|l| i <= l) {
                return Err(Diagnostic::error(
                    "state-order",
                    format!("state {i} must come after state {}", last.unwrap_or(0)),
                    span,
                ));
            }
            last = Some(i);
            self.expect_sym("{")?;
            let mut items = Vec::new();
            while !self.eat_sym("}") {
                if self.eat_kw("force") {
                    let (label, target, dx, dy, mode) = self.force_body()?;
                    check_entity(entities, &target)?;
                    items.push(StateItem::Force(ForceFluent {
                        target: target.name,
                        label,
                        dx,
                        dy,
                        mode,
                    }));
                } else if self.eat_kw("unforce") {
                    let (label, _) = self.ident("a force label")?;
                    self.expect_kw("on")?;
                    let target = self.term()?;
                    check_entity(entities, &target)?;
                    items.push(StateItem::Unforce(target.name, label));
                } else {
                    let target = self.term()?;
                    let e = check_entity(entities, &target)?;
                    self.expect_sym(".")?;
                    let (param, pspan) = self.ident("a parameter name")?;
                    let p = entities[e].param_index(&param).ok_or_else(|| {
                        Diagnostic::error(
                            "unknown-parameter",
                            format!("entity `{}` has no parameter `{param}`", entities[e].id),
                            pspan,
                        )
                    })?;
                    self.expect_sym("=")?;
                    items.push(StateItem::Set(e, p, self.rational()?));
                }
            }
            blocks.insert(i, items);
        }
        let mut cur = State {
            time: 0,
            values: entities.iter().map(EntityDecl::initial_values).collect(),
            forces: forces.to_vec(),
        };
        canonical_forces(&mut cur.forces);
        let mut states = Vec::with_capacity(len);
        for t in 0..len {
            cur.time = t;
            for item in blocks.remove(&t).unwrap_or_default() {
                match item {
                    StateItem::Set(e, p, v) => cur.values[e][p] = v,
                    StateItem::Force(f) => {
                        cur.forces.retain(|g| !(g.target == f.target && g.label == f.label));
                        cur.forces.push(f);
                    }
                    StateItem::Unforce(target, label) => {
                        cur.forces.retain(|g| !(g.target == target && g.label == label))
                    }
                }
            }
            canonical_forces(&mut cur.forces);
            states.push(cur.clone());
        }
        Ok(Trace { states })
    }

    fn rule_spec(&mut self) -> PResult<RuleSpec> {
        if self.eat_kw("gravity") {
            let delta = if matches!(self.peek(), Tok::Num(_)) || self.at_sym("-") {
                Some(self.rational()?)
            } else {
                None
            };
            return Ok(RuleSpec::Gravity { delta });
        }
        if self.eat_kw("umph") {
            let (label, target, dx, dy, mode) = self.force_body()?;
            let until = if self.eat_kw("until") {
                Some(self.formula()?)
            } else {
                None
            };
            return Ok(RuleSpec::Umph {
                label,
                target: target.name,
                dx,
                dy,
                mode,
                until,
            });
        }
        if self.eat_kw("rule") {
            let (name, _) = self.ident("a rule name")?;
            let scope = if self.eat_kw("forall") {
                let (v, _) = self.ident("a variable")?;
                self.expect_sym(":")?;
                let (s, _) = self.ident("a sort")?;
                Some((v, s))
            } else {
                None
            };
            self.expect_kw("when")?;
            let condition = self.formula()?;
            self.expect_kw("do")?;
            let mut effects = vec![self.effect()?];
            while self.eat_sym(",") {
                effects.push(self.effect()?);
            }
            let until = if self.eat_kw("until") {
                Some(self.formula()?)
            } else {
                None
            };
            return Ok(RuleSpec::Custom(Rule {
                name,
                scope,
                condition,
                effects,
                until,
            }));
        }
        self.err("`gravity`, `umph`, `rule` or `horizon`")
    }

    fn effect(&mut self) -> PResult<Effect> {
        if self.eat_kw("addforce") {
            let (label, target, dx, dy, mode) = self.force_body()?;
            return Ok(Effect::AddForce {
                target,
                label,
                dx,
                dy,
                mode,
            });
        }
        if self.eat_kw("removeforce") {
            let (label, _) = self.ident("a force label")?;
            self.expect_kw("on")?;
            let target = self.term()?;
            return Ok(Effect::RemoveForce { target, label });
        }
        let target = self.term()?;
        self.expect_sym(".")?;
        let (param, _) = self.ident("a parameter name")?;
        if self.eat_sym("+=") {
            Ok(Effect::Delta {
                target,
                param,
                value: self.num_expr()?,
            })
        } else if self.eat_sym(":=") {
            Ok(Effect::Set {
                target,
                param,
                value: self.num_expr()?,
            })
        } else {
            self.err("`+=` or `:=`")
        }
    }
}

enum StateItem {
    Set(usize, usize, Rational),
    Force(ForceFluent),
    Unforce(String, String),
}

fn check_entity(entities: &[EntityDecl], t: &Term) -> PResult<usize> {
    entities.iter().position(|e| e.id == t.name).ok_or_else(|| {
        Diagnostic::error(
            "unbound-symbol",
            format!("unknown entity `{}`", t.name),
            t.loc.span().cloned().unwrap_or_else(super::diag::synthetic_span),
        )
    })
}

fn model_diag(e: ModelError, span: SourceSpan) -> Diagnostic {
    let code = match e {
        ModelError::DuplicateEntity(_) => "duplicate",
        ModelError::UnknownSort(_) => "unknown-sort",
        ModelError::SortCycle(_) | ModelError::SortConflict { .. } => "sort-hierarchy",
        ModelError::UnknownEntity(_) => "unbound-symbol",
        ModelError::UnknownParameter { .. } => "unknown-parameter",
        ModelError::ShapeArity { .. } => "arity",
        _ => "model",
    };
    Diagnostic::error(code, e.to_string(), span)
}

pub fn parse_theory(text: &str, file: &str) -> Result<Theory, Diagnostics> {
    Parser::new(text, file)?.theory()
}

pub fn parse_scenario(text: &str, file: &str) -> Result<Scenario, Diagnostics> {
    Parser::new(text, file)?.scenario()
}

/// A single formula, as given on a command line.
pub fn parse_formula(text: &str, file: &str) -> Result<Formula, Diagnostics> {
    let mut p = Parser::new(text, file)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    const FIG1: &str = "scenario fig1
  entity a : Object = point(4, 5)
  entity b : Container = circle(6, 4.5, 1)
  entity c : Container = circle(5, 5, 3)
  trace length 1
end
";

    #[test]
    fn fig1_scenario() {
        let sc = parse_scenario(FIG1, "fig1.scn").unwrap();
        assert_eq!(sc.entities.len(), 3);
        let tr = sc.trace().unwrap();
        assert_eq!(tr.len(), 1);
        assert_eq!(tr.states[0].values[1], vec![rat(6), ratio(9, 2), rat(1)]);
    }

    #[test]
    fn trace_inherits_previous_state() {
        let sc = parse_scenario(
            "scenario s entity o : Object = point(0, 0)
             trace length 4 state 1 { o.x = 2 } state 3 { o.y = -1/2 } end",
            "s",
        )
        .unwrap();
        let xs: Vec<_> = sc.trace().unwrap().states.iter().map(|s| s.values[0].clone()).collect();
        assert_eq!(
            xs,
            vec![
                vec![rat(0), rat(0)],
                vec![rat(2), rat(0)],
                vec![rat(2), rat(0)],
                vec![rat(2), ratio(-1, 2)]
            ]
        );
        let constant = parse_scenario("scenario s entity o : Object = point(1, 1) trace length 3 end", "s").unwrap();
        let st = &constant.trace().unwrap().states;
        assert!(st.iter().all(|s| s.values == st[0].values));
    }

    #[test]
    fn state_out_of_range() {
        let e = parse_scenario(
            "scenario s entity o : Object = point(0, 0)\ntrace length 3\nstate 5 { o.x = 1 }\nend",
            "s.scn",
        )
        .unwrap_err();
        let d = &e.0[0];
        assert_eq!(d.code, "state-out-of-range");
        assert_eq!((d.span.line, d.span.column), (3, 7));
    }

    #[test]
    fn precedence_and_quantifiers() {
        let f = parse_formula("a.x < 3 and not p(a) or q(a) -> r(a) -> s(a)", "f").unwrap();
        let Formula::Implies(lhs, rhs) = f else { panic!() };
        assert!(matches!(*lhs, Formula::Or(..)));
        assert!(matches!(*rhs, Formula::Implies(..)));
        let g = parse_formula("forall x : Object . p(x) and q(x)", "f").unwrap();
        let Formula::Forall(q) = g else { panic!() };
        assert!(matches!(*q.body, Formula::And(..)));
        let u = parse_formula("p(a) until q(a) until r(a)", "f").unwrap();
        let Formula::Until(_, r) = u else { panic!() };
        assert!(matches!(*r, Formula::Until(..)));
    }

    #[test]
    fn parenthesized_comparisons_and_formulas() {
        let f = parse_formula("(a.x + 1) * 2 <= next[a.x] and (delta(a, b) > tau)", "f").unwrap();
        let Formula::And(l, r) = f else { panic!() };
        assert!(matches!(*l, Formula::Compare(_)));
        assert!(matches!(*r, Formula::Compare(_)));
        let g = parse_formula("closeTo(a, b; 1/2) and (inside(a, c) or false)", "f").unwrap();
        assert!(matches!(g, Formula::And(..)));
        let n = parse_formula("next inside(a, c)", "f").unwrap();
        assert!(matches!(n, Formula::Next(_)));
    }

    #[test]
    fn negative_literal_folds() {
        let f = parse_formula("a.x > -3", "f").unwrap();
        let Formula::Compare(c) = f else { panic!() };
        assert_eq!(c.rhs, NumExpr::Const(rat(-3)));
    }

    #[test]
    fn reserved_word_collision() {
        let e = parse_theory("theory T role until : Object end", "t.ist").unwrap_err();
        assert_eq!(e.0[0].code, "reserved-word");
    }

    #[test]
    fn syntax_error_has_span() {
        let e = parse_theory("theory T\n  axiom inside(a, \nend", "t.ist").unwrap_err();
        let d = &e.0[0];
        assert_eq!(d.code, "syntax");
        assert_eq!(d.span.line, 3);
        assert_eq!(&*d.span.file, "t.ist");
    }

    #[test]
    fn theory_items() {
        let th = parse_theory(
            "theory T
               sort Cup < Circle
               role o, p : Object
               role c : Cup
               relation at(Object, Region) := delta($1, $2) <= tau
               param dmax = 10
               alias o, p
               macro NEAR(x : Entity, y : Entity; d) := closeTo(x, y; d)
               axiom eventually inside(o, c)
             end",
            "t",
        )
        .unwrap();
        assert_eq!(th.roles.len(), 3);
        assert_eq!(th.aliases, vec![("o".to_string(), "p".to_string())]);
        assert!(th.relations[0].definition.is_some());
        assert_eq!(th.macros[0].num_params, vec!["d".to_string()]);
        assert_eq!(th.axioms.len(), 1);
        let e = parse_theory("theory T role o : Cup end", "t").unwrap_err();
        assert_eq!(e.0[0].code, "unknown-sort");
    }

    #[test]
    fn generative_scenarios() {
        let sc = parse_scenario(
            "scenario g
               entity o : Object = point(0, 0)
               entity goal : Region = point(3, 0)
               entity f : Floor = floor(0)
               rules
                 gravity 1/2
                 umph push on o = (1, 0) active until closeTo(o, goal; 0)
                 rule slide forall x : Object when not on(x, f) do x.x += 1, removeforce push on x until x.x >= 3
               horizon 6
             end",
            "g",
        )
        .unwrap();
        let ScenarioBody::Generative { rules, horizon } = &sc.body else { panic!() };
        assert_eq!(*horizon, 6);
        assert_eq!(rules.len(), 3);
        assert_eq!(rules[0], RuleSpec::Gravity { delta: Some(ratio(1, 2)) });
    }

    #[test]
    fn model_errors_point_at_entity() {
        let e = parse_scenario("scenario s\n  entity p : Container = point(0, 0)\n  trace length 1\nend", "s").unwrap_err();
        assert_eq!(e.0[0].span.line, 2);
        let e = parse_scenario("scenario s\n  entity c : Container = circle(0, 0)\n  trace length 1\nend", "s").unwrap_err();
        assert_eq!(e.0[0].code, "arity");
    }
}
