use std::collections::BTreeMap;

use super::diag::{synthetic_span, Diagnostic};
use crate::dynamics::{Effect, RuleSpec};
use crate::geometry::{builtin_arity, ConstraintAtom, NumExpr};
use crate::logic::{Atom, Formula, MacroDef};
use crate::model::{
    params_for_sort, Scenario, ScenarioBody, Sort, SortHierarchy, Theory, ATTRIBUTES, ENTITY,
};
use crate::span::{Loc, SourceSpan, Term};

fn span_of(loc: &Loc) -> SourceSpan {
    loc.span().cloned().unwrap_or_else(synthetic_span)
}

/// A relation's argument sorts and number of trailing numeric arguments.
/// `None` for the numeric count means "any" (built-in `closeTo`).
struct Signature {
    sorts: Vec<String>,
    numbers: Option<usize>,
}

struct Checker<'a> {
    hierarchy: SortHierarchy,
    /// Symbols visible everywhere: scenario entities and theory roles.
    globals: BTreeMap<String, String>,
    numbers: Vec<String>,
    relations: BTreeMap<&'a str, Signature>,
    out: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn new(sorts: &[Sort], macros: impl Iterator<Item = &'a MacroDef>, fallback: &Loc) -> Self {
        let mut out = Vec::new();
        let hierarchy = match SortHierarchy::with_sorts(sorts) {
            Ok(h) => h,
            Err(e) => {
                out.push(Diagnostic::error("sort-hierarchy", e.to_string(), span_of(fallback)));
                SortHierarchy::builtin()
            }
        };
        let mut relations = BTreeMap::new();
        for m in macros {
            relations.entry(m.name.as_str()).or_insert(Signature {
                sorts: m.params.iter().map(|(_, s)| s.clone()).collect(),
                numbers: Some(m.num_params.len()),
            });
        }
        Checker {
            hierarchy,
            globals: BTreeMap::new(),
            numbers: vec!["tau".to_string()],
            relations,
            out,
        }
    }

    fn signature(&self, name: &str) -> Option<Signature> {
        if let Some(s) = self.relations.get(name) {
            return Some(Signature {
                sorts: s.sorts.clone(),
                numbers: s.numbers,
            });
        }
        builtin_arity(name).map(|n| Signature {
            sorts: vec![ENTITY.to_string(); n],
            numbers: if name == "closeTo" { None } else { Some(0) },
        })
    }

    fn sort_exists(&mut self, sort: &str, loc: &Loc) -> bool {
        if self.hierarchy.contains(sort) {
            return true;
        }
        self.out.push(Diagnostic::error(
            "unknown-sort",
            format!("unknown sort `{sort}`"),
            span_of(loc),
        ));
        false
    }

    fn term_sort(&mut self, t: &Term, scope: &[(String, String)]) -> Option<String> {
        let found = scope
            .iter()
            .rev()
            .find(|(v, _)| *v == t.name)
            .map(|(_, s)| s.clone())
            .or_else(|| self.globals.get(&t.name).cloned());
        if found.is_none() {
            self.out.push(Diagnostic::error(
                "unbound-symbol",
                format!("`{}` is not a declared role, variable or entity", t.name),
                span_of(&t.loc),
            ));
        }
        found
    }

    fn formula(&mut self, f: &Formula, scope: &mut Vec<(String, String)>, numbers: &[String]) {
        match f {
            Formula::True | Formula::False | Formula::Final => {}
            Formula::Atom(a) => self.atom(a, scope, numbers),
            Formula::Compare(c) => self.constraint(c, scope, numbers),
            Formula::Forall(q) | Formula::Exists(q) => {
                self.sort_exists(&q.sort, &q.loc);
                scope.push((q.var.clone(), q.sort.clone()));
                self.formula(&q.body, scope, numbers);
                scope.pop();
            }
            _ => {
                for c in f.children() {
                    self.formula(c, scope, numbers);
                }
            }
        }
    }

    fn atom(&mut self, a: &Atom, scope: &[(String, String)], numbers: &[String]) {
        let Some(sig) = self.signature(&a.name) else {
            self.out.push(Diagnostic::error(
                "unknown-relation",
                format!("unknown relation `{}`", a.name),
                span_of(&a.loc),
            ));
            return;
        };
        let count_ok = sig.sorts.len() == a.args.len() && sig.numbers.is_none_or(|n| n == a.extra.len());
        if !count_ok {
            self.out.push(Diagnostic::error(
                "arity",
                format!(
                    "`{}` takes {} entity argument(s), got {}",
                    a.name,
                    sig.sorts.len(),
                    a.args.len()
                ),
                span_of(&a.loc),
            ));
        }
        for (i, t) in a.args.iter().enumerate() {
            let Some(actual) = self.term_sort(t, scope) else { continue };
            let Some(expected) = sig.sorts.get(i) else { continue };
            match self.hierarchy.is_subsort(&actual, expected) {
                Ok(true) => {}
                Ok(false) => self.out.push(Diagnostic::error(
                    "sort-mismatch",
                    format!(
                        "argument {} of `{}` must be {expected}, but `{}` is {actual}",
                        i + 1,
                        a.name,
                        t.name
                    ),
                    span_of(&t.loc),
                )),
                Err(e) => self.out.push(Diagnostic::error("unknown-sort", e.to_string(), span_of(&t.loc))),
            }
        }
        for x in &a.extra {
            self.num(x, scope, numbers, &a.loc);
        }
    }

    fn constraint(&mut self, c: &ConstraintAtom, scope: &[(String, String)], numbers: &[String]) {
        self.num(&c.lhs, scope, numbers, &c.loc);
        self.num(&c.rhs, scope, numbers, &c.loc);
    }

    fn num(&mut self, e: &NumExpr, scope: &[(String, String)], numbers: &[String], at: &Loc) {
        match e {
            NumExpr::Const(_) => {}
            NumExpr::Param { entity, param } => {
                if let Some(sort) = self.term_sort(entity, scope) {
                    self.param(entity, &sort, param);
                }
            }
            NumExpr::Named(n, loc) => {
                if !numbers.contains(n) && !self.numbers.contains(n) {
                    let loc = if loc.span().is_some() { loc } else { at };
                    self.out.push(Diagnostic::error(
                        "unbound-symbol",
                        format!("`{n}` is not a declared parameter"),
                        span_of(loc),
                    ));
                }
            }
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) => {
                self.num(a, scope, numbers, at);
                self.num(b, scope, numbers, at);
            }
            NumExpr::Neg(a) | NumExpr::Next(a) => self.num(a, scope, numbers, at),
            NumExpr::Delta(a, b) | NumExpr::Theta(a, b) => {
                self.term_sort(a, scope);
                self.term_sort(b, scope);
            }
            NumExpr::Measure(a) => {
                self.term_sort(a, scope);
            }
            NumExpr::Drop(a, s) => {
                self.term_sort(a, scope);
                self.num(s, scope, numbers, at);
            }
        }
    }

    fn param(&mut self, entity: &Term, sort: &str, param: &str) {
        let known = match params_for_sort(sort, &self.hierarchy) {
            Ok(ps) => ps.contains(param),
            Err(_) => ATTRIBUTES.contains(&param),
        };
        if !known {
            self.out.push(Diagnostic::error(
                "unknown-parameter",
                format!("no shape admissible for sort {sort} has a parameter `{param}`"),
                span_of(&entity.loc),
            ));
        }
    }

    fn macro_body(&mut self, m: &MacroDef) {
        let mut scope: Vec<(String, String)> = Vec::new();
        for (p, s) in &m.params {
            self.sort_exists(s, &m.loc);
            scope.push((p.clone(), s.clone()));
        }
        self.formula(&m.body, &mut scope, &m.num_params);
    }
}

/// Sort-checks a theory, optionally against a scenario whose entity ids may
/// appear in axioms. Returns every problem found.
pub fn sort_check_theory(th: &Theory, scenario: Option<&Scenario>, prelude: &[MacroDef]) -> Vec<Diagnostic> {
    let mut sorts = th.sorts.clone();
    if let Some(sc) = scenario {
        sorts.extend(sc.sorts.iter().cloned());
    }
    let fallback = th.macros.first().map(|m| m.loc.clone()).unwrap_or_else(Loc::none);
    let mut ck = Checker::new(&sorts, th.macros.iter().chain(prelude), &fallback);
    for r in &th.relations {
        ck.relations.insert(
            r.name.as_str(),
            Signature {
                sorts: r.arg_sorts.clone(),
                numbers: Some(0),
            },
        );
    }
    ck.numbers.extend(th.params.iter().map(|(n, _)| n.clone()));
    if let Some(sc) = scenario {
        for e in &sc.entities {
            ck.globals.insert(e.id.clone(), e.sort.clone());
        }
    }
    for (r, s) in &th.roles {
        ck.globals.insert(r.clone(), s.clone());
    }
    for (a, b) in &th.aliases {
        for r in [a, b] {
            if th.role_sort(r).is_none() {
                ck.out.push(Diagnostic::error(
                    "unbound-symbol",
                    format!("alias names undeclared role `{r}`"),
                    synthetic_span(),
                ));
            }
        }
    }
    for r in &th.relations {
        if let Some(def) = &r.definition {
            let scope: Vec<(String, String)> = r
                .arg_sorts
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("${}", i + 1), s.clone()))
                .collect();
            ck.constraint(def, &scope, &[]);
        }
    }
    for m in &th.macros {
        ck.macro_body(m);
    }
    for ax in &th.axioms {
        ck.formula(ax, &mut Vec::new(), &[]);
    }
    ck.out
}

/// Sort-checks the rules of a generative scenario.
pub fn sort_check_scenario(sc: &Scenario, prelude: &[MacroDef]) -> Vec<Diagnostic> {
    let mut ck = Checker::new(&sc.sorts, prelude.iter(), &Loc::none());
    for e in &sc.entities {
        ck.globals.insert(e.id.clone(), e.sort.clone());
    }
    let ScenarioBody::Generative { rules, .. } = &sc.body else {
        return ck.out;
    };
    for r in rules {
        match r {
            RuleSpec::Gravity { .. } => {}
            RuleSpec::Umph { until, .. } => {
                if let Some(u) = until {
                    ck.formula(u, &mut Vec::new(), &[]);
                }
            }
            RuleSpec::Custom(rule) => {
                let mut scope = Vec::new();
                if let Some((v, s)) = &rule.scope {
                    if ck.sort_exists(s, &Loc::none()) {
                        scope.push((v.clone(), s.clone()));
                    }
                }
                ck.formula(&rule.condition, &mut scope, &[]);
                if let Some(u) = &rule.until {
                    ck.formula(u, &mut scope, &[]);
                }
                for eff in &rule.effects {
                    match eff {
                        Effect::Set { target, param, value } | Effect::Delta { target, param, value } => {
                            if let Some(sort) = ck.term_sort(target, &scope) {
                                ck.param(target, &sort, param);
                            }
                            ck.num(value, &scope, &[], &target.loc);
                        }
                        Effect::AddForce { target, .. } | Effect::RemoveForce { target, .. } => {
                            ck.term_sort(target, &scope);
                        }
                    }
                }
            }
        }
    }
    ck.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_scenario, parse_theory};

    fn codes(th: &str) -> Vec<&'static str> {
        let th = parse_theory(th, "t.ist").unwrap();
        sort_check_theory(&th, None, &[]).iter().map(|d| d.code).collect()
    }

    #[test]
    fn undeclared_symbol() {
        assert_eq!(
            codes("theory T role o:Object axiom eventually inside(o, c) end"),
            vec!["unbound-symbol"]
        );
    }

    #[test]
    fn signature_violation_is_spanned() {
        let text = "theory T\n  relation inside(Object, Container)\n  role a : Object\n  role c : Container\n  axiom inside(c, a)\nend";
        let th = parse_theory(text, "t.ist").unwrap();
        let ds = sort_check_theory(&th, None, &[]);
        assert_eq!(ds.len(), 2);
        assert!(ds.iter().all(|d| d.code == "sort-mismatch"));
        assert_eq!((ds[0].span.line, ds[0].span.column), (5, 16));
        assert_eq!((ds[1].span.line, ds[1].span.column), (5, 19));
    }

    #[test]
    fn subsorts_are_accepted() {
        assert!(codes(
            "theory T sort Cup < Circle relation inside(Object, Container) role o : Object role k : Cup
             axiom inside(o, k) and forall x : Circle . inside(o, x) end"
        )
        .is_empty());
    }

    #[test]
    fn parameters_and_numbers() {
        assert_eq!(codes("theory T role o : Object axiom o.r > 0 end"), Vec::<&str>::new());
        assert_eq!(codes("theory T role o : Path axiom o.r > 0 end"), vec!["unknown-parameter"]);
        assert_eq!(codes("theory T role o : Object axiom o.x > dmax end"), vec!["unbound-symbol"]);
        assert!(codes("theory T param dmax = 2 role o : Object axiom o.x > dmax and closeTo(o, o; tau) end").is_empty());
        assert_eq!(codes("theory T role o : Object axiom forall x : Blob . true end"), vec!["unknown-sort"]);
        assert_eq!(codes("theory T role o : Object axiom frob(o) end"), vec!["unknown-relation"]);
        assert_eq!(codes("theory T role o : Object axiom inside(o) end"), vec!["arity"]);
    }

    #[test]
    fn macros_and_templates() {
        assert!(codes(
            "theory T role o, g : Object
             relation near(Object, Object) := delta($1, $2) <= tau
             macro AT(x : Object, y : Object; d) := closeTo(x, y; d) and near(x, y)
             axiom eventually AT(o, g; 1)
             end"
        )
        .is_empty());
        assert_eq!(
            codes("theory T role o : Object macro M(x : Object) := inside(x, y) axiom M(o) end"),
            vec!["unbound-symbol"]
        );
        assert_eq!(
            codes("theory T relation far(Object) := $1.q > 0 role o : Object axiom far(o) end"),
            vec!["unknown-parameter"]
        );
    }

    #[test]
    fn scenario_rules() {
        let sc = parse_scenario(
            "scenario g entity o : Object = point(0, 0)
             rules rule r forall x : Object when not on(x, z) do x.q += 1 horizon 2 end",
            "g",
        )
        .unwrap();
        let codes: Vec<_> = sort_check_scenario(&sc, &[]).iter().map(|d| d.code).collect();
        assert_eq!(codes, vec!["unbound-symbol", "unknown-parameter"]);
    }
}
