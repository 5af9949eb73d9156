//! Sorted first-order temporal formulas over finite traces.
//!
//! Two evaluators share one semantics. [`eval_formula`] plans the formula
//! bottom-up and computes a truth vector over all instants at once;
//! [`reference_eval`] expands the definitions literally and serves as the
//! oracle the fast path is tested against.

use thiserror::Error;

use crate::geometry::{
    builtin_arity, eval_constraint, eval_num_expr, eval_relation, ConstraintAtom, GeometryError,
    NumExpr, Scene, Symbols, Tolerances,
};
use crate::model::{ModelError, RelationSig, Scenario, SortHierarchy, State, Theory};
use crate::rational::Num;
use crate::span::{Loc, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("time {t} out of range for a trace of length {len}")]
    TimeOutOfRange { t: usize, len: usize },
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    MacroArity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("macro `{0}` expands recursively")]
    MacroRecursion(String),
    #[error("role `{0}` is not bound")]
    MissingRole(String),
    #[error("`{0}` is not a role of the theory")]
    UnknownRole(String),
    #[error("role `{role}` needs sort {sort}, but `{entity}` has sort {entity_sort}")]
    SortMismatchInBinding {
        role: String,
        sort: String,
        entity: String,
        entity_sort: String,
    },
    #[error("scenario `{0}` has no trace")]
    NoTrace(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A relation applied to terms. `extra` holds trailing numeric arguments,
/// such as the threshold of `closeTo` or the numeric parameters of a macro.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub name: String,
    pub args: Vec<Term>,
    pub extra: Vec<NumExpr>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantified {
    pub var: String,
    pub sort: String,
    pub body: Box<Formula>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    False,
    Final,
    Atom(Atom),
    Compare(ConstraintAtom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Quantified),
    Exists(Quantified),
    Next(Box<Formula>),
    Always(Box<Formula>),
    Eventually(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Before(Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str, args: &[&str]) -> Formula {
        Formula::Atom(Atom {
            name: name.to_string(),
            args: args.iter().map(|a| Term::new(*a)).collect(),
            extra: Vec::new(),
            loc: Loc::none(),
        })
    }

    pub fn atom_with(name: &str, args: &[&str], extra: Vec<NumExpr>) -> Formula {
        match Formula::atom(name, args) {
            Formula::Atom(mut a) => {
                a.extra = extra;
                Formula::Atom(a)
            }
            _ => unreachable!(),
        }
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(var: &str, sort: &str, body: Formula) -> Formula {
        Formula::Forall(Quantified::new(var, sort, body))
    }

    pub fn exists(var: &str, sort: &str, body: Formula) -> Formula {
        Formula::Exists(Quantified::new(var, sort, body))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn before(f: Formula) -> Formula {
        Formula::Before(Box::new(f))
    }

    /// Conjunction of all formulas, `True` when empty.
    pub fn and_all(fs: impl IntoIterator<Item = Formula>) -> Formula {
        fs.into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Number of nodes, counting numeric comparisons as one.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::True | Formula::False | Formula::Final | Formula::Atom(_) | Formula::Compare(_) => {
                vec![]
            }
            Formula::Not(a)
            | Formula::Next(a)
            | Formula::Always(a)
            | Formula::Eventually(a)
            | Formula::Before(a) => vec![a],
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Until(a, b) => {
                vec![a, b]
            }
            Formula::Forall(q) | Formula::Exists(q) => vec![&q.body],
        }
    }

    /// Every atom in the formula, left to right.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        if let Formula::Atom(a) = self {
            out.push(a);
        }
        for c in self.children() {
            c.collect_atoms(out);
        }
    }

    /// Every numeric comparison in the formula, left to right.
    pub fn comparisons(&self) -> Vec<&ConstraintAtom> {
        let mut out = Vec::new();
        self.collect_comparisons(&mut out);
        out
    }

    fn collect_comparisons<'a>(&'a self, out: &mut Vec<&'a ConstraintAtom>) {
        if let Formula::Compare(c) = self {
            out.push(c);
        }
        for c in self.children() {
            c.collect_comparisons(out);
        }
    }
}

impl Quantified {
    pub fn new(var: &str, sort: &str, body: Formula) -> Self {
        Quantified {
            var: var.to_string(),
            sort: sort.to_string(),
            body: Box::new(body),
            loc: Loc::none(),
        }
    }
}

/// A named, parameterized formula. Entity parameters carry sorts; numeric
/// parameters are bound to numbers at each use.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroDef {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub num_params: Vec<String>,
    pub body: Formula,
    pub loc: Loc,
}

const MAX_MACRO_DEPTH: usize = 64;

/// Variable and role bindings. Later bindings shadow earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Env {
    entities: Vec<(String, usize)>,
    numbers: Vec<(String, Num)>,
    depth: usize,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn bind(&self, name: &str, entity: usize) -> Env {
        let mut e = self.clone();
        e.entities.push((name.to_string(), entity));
        e
    }

    pub fn bind_number(&self, name: &str, value: Num) -> Env {
        let mut e = self.clone();
        e.numbers.push((name.to_string(), value));
        e
    }

    pub fn entity(&self, name: &str) -> Option<usize> {
        self.entities.iter().rev().find(|(n, _)| n == name).map(|(_, e)| *e)
    }

    fn macro_frame(&self) -> Env {
        Env {
            depth: self.depth + 1,
            ..Env::default()
        }
    }
}

/// Everything a formula is evaluated against: states, sorts, macros,
/// relation templates, numeric parameters and tolerances.
pub struct Semantics<'a> {
    pub scene: Scene<'a>,
    hierarchy: SortHierarchy,
    macros: Vec<&'a MacroDef>,
    templates: Vec<&'a RelationSig>,
    numbers: Vec<(String, Num)>,
    pub tol: Tolerances,
}

impl<'a> Semantics<'a> {
    pub fn new(scenario: &'a Scenario, states: &'a [State], tol: Tolerances) -> Self {
        Semantics {
            scene: Scene::new(scenario, states),
            hierarchy: scenario.hierarchy().clone(),
            macros: Vec::new(),
            templates: Vec::new(),
            numbers: vec![("tau".to_string(), Num::Exact(tol.tau.clone()))],
            tol,
        }
    }

    /// Over the scenario's own trace.
    pub fn for_trace(scenario: &'a Scenario, tol: Tolerances) -> Result<Self, EvalError> {
        let trace = scenario
            .trace()
            .ok_or_else(|| EvalError::NoTrace(scenario.name.clone()))?;
        Ok(Semantics::new(scenario, &trace.states, tol))
    }

    /// Adds a theory's sorts, macros, relation templates and parameters.
    /// Theory macros shadow any added later.
    pub fn with_theory(mut self, theory: &'a Theory) -> Result<Self, EvalError> {
        self.hierarchy.extend(&theory.sorts)?;
        self.macros.extend(theory.macros.iter());
        self.templates
            .extend(theory.relations.iter().filter(|r| r.definition.is_some()));
        for (n, v) in &theory.params {
            self.numbers.push((n.clone(), Num::Exact(v.clone())));
        }
        Ok(self)
    }

    pub fn with_macros(mut self, macros: &'a [MacroDef]) -> Self {
        self.macros.extend(macros.iter());
        self
    }

    pub fn with_number(mut self, name: &str, value: Num) -> Self {
        self.numbers.push((name.to_string(), value));
        self
    }

    pub fn len(&self) -> usize {
        self.scene.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scene.is_empty()
    }

    pub fn hierarchy(&self) -> &SortHierarchy {
        &self.hierarchy
    }

    pub fn find_macro(&self, name: &str) -> Option<&'a MacroDef> {
        self.macros.iter().find(|m| m.name == name).copied()
    }

    fn template(&self, name: &str) -> Option<&'a RelationSig> {
        self.templates.iter().find(|r| r.name == name).copied()
    }

    /// Entities whose sort is a subsort of `sort`.
    pub fn domain(&self, sort: &str) -> Result<Vec<usize>, EvalError> {
        if !self.hierarchy.contains(sort) {
            return Err(EvalError::UnknownSort(sort.to_string()));
        }
        let mut out = Vec::new();
        for (i, e) in self.scene.scenario.entities.iter().enumerate() {
            if self.hierarchy.is_subsort(&e.sort, sort)? {
                out.push(i);
            }
        }
        Ok(out)
    }

    fn resolve(&self, term: &Term, env: &Env) -> Result<usize, EvalError> {
        env.entity(&term.name)
            .or_else(|| self.scene.scenario.entity_index(&term.name))
            .ok_or_else(|| EvalError::UnboundSymbol(term.name.clone()))
    }

    pub fn eval_num(&self, e: &NumExpr, env: &Env, t: usize) -> Result<Num, EvalError> {
        Ok(eval_num_expr(e, &self.scene, t, &Syms { sem: self, env })?)
    }

    /// Truth of a template or built-in relation at `t`.
    fn eval_primitive(&self, atom: &Atom, env: &Env, t: usize) -> Result<bool, EvalError> {
        let args = atom
            .args
            .iter()
            .map(|a| self.resolve(a, env))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(sig) = self.template(&atom.name) {
            if args.len() != sig.arg_sorts.len() {
                return Err(GeometryError::Arity {
                    relation: atom.name.clone(),
                    expected: sig.arg_sorts.len(),
                    got: args.len(),
                }
                .into());
            }
            let mut frame = Env::new();
            for (i, e) in args.iter().enumerate() {
                frame = frame.bind(&format!("${}", i + 1), *e);
            }
            let def = sig.definition.as_ref().expect("templates carry definitions");
            return Ok(eval_constraint(def, &self.scene, t, &Syms { sem: self, env: &frame }, &self.tol)?);
        }
        if builtin_arity(&atom.name).is_none() {
            return Err(GeometryError::UnknownRelation(atom.name.clone()).into());
        }
        let extra = atom
            .extra
            .iter()
            .map(|x| self.eval_num(x, env, t))
            .collect::<Result<Vec<_>, _>>();
        let extra = match extra {
            Ok(v) => v,
            Err(EvalError::Geometry(GeometryError::BeyondFinalState)) => return Ok(false),
            Err(e) => return Err(e),
        };
        Ok(eval_relation(&atom.name, &args, &extra, &self.scene, t, &self.tol)?)
    }

    fn compare(&self, c: &ConstraintAtom, env: &Env, t: usize) -> Result<bool, EvalError> {
        Ok(eval_constraint(c, &self.scene, t, &Syms { sem: self, env }, &self.tol)?)
    }

    /// Fresh frame for a macro use: entity parameters bound to the resolved
    /// arguments, numeric parameters to `numbers`.
    fn macro_env(&self, m: &MacroDef, atom: &Atom, env: &Env, numbers: Vec<Num>) -> Result<Env, EvalError> {
        if atom.args.len() != m.params.len() || atom.extra.len() != m.num_params.len() {
            return Err(EvalError::MacroArity {
                name: m.name.clone(),
                expected: m.params.len() + m.num_params.len(),
                got: atom.args.len() + atom.extra.len(),
            });
        }
        if env.depth >= MAX_MACRO_DEPTH {
            return Err(EvalError::MacroRecursion(m.name.clone()));
        }
        let mut frame = env.macro_frame();
        for ((p, _), a) in m.params.iter().zip(&atom.args) {
            frame = frame.bind(p, self.resolve(a, env)?);
        }
        for (p, v) in m.num_params.iter().zip(numbers) {
            frame = frame.bind_number(p, v);
        }
        Ok(frame)
    }

    fn macro_numbers(&self, atom: &Atom, env: &Env, t: usize) -> Result<Vec<Num>, EvalError> {
        atom.extra.iter().map(|x| self.eval_num(x, env, t)).collect()
    }

    fn check_time(&self, t: usize) -> Result<(), EvalError> {
        if t >= self.len() {
            return Err(EvalError::TimeOutOfRange { t, len: self.len() });
        }
        Ok(())
    }
}

struct Syms<'s, 'a> {
    sem: &'s Semantics<'a>,
    env: &'s Env,
}

impl Symbols for Syms<'_, '_> {
    fn entity(&self, name: &str) -> Option<usize> {
        self.env
            .entity(name)
            .or_else(|| self.sem.scene.scenario.entity_index(name))
    }

    fn number(&self, name: &str) -> Option<Num> {
        self.env
            .numbers
            .iter()
            .rev()
            .chain(self.sem.numbers.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
    }
}

// ---------------------------------------------------------------------------
// Reference evaluator

/// Literal recursive expansion of the semantics. Every subformula a
/// definition mentions is evaluated, with no sharing and no early exit.
pub fn reference_eval(f: &Formula, sem: &Semantics, env: &Env, t: usize) -> Result<bool, EvalError> {
    sem.check_time(t)?;
    naive(f, sem, env, t)
}

fn naive(f: &Formula, sem: &Semantics, env: &Env, t: usize) -> Result<bool, EvalError> {
    let len = sem.len();
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Final => Ok(t + 1 == len),
        Formula::Atom(a) => match sem.find_macro(&a.name) {
            Some(m) => {
                let nums = match sem.macro_numbers(a, env, t) {
                    Ok(n) => n,
                    Err(EvalError::Geometry(GeometryError::BeyondFinalState)) => return Ok(false),
                    Err(e) => return Err(e),
                };
                let frame = sem.macro_env(m, a, env, nums)?;
                naive(&m.body, sem, &frame, t)
            }
            None => sem.eval_primitive(a, env, t),
        },
        Formula::Compare(c) => sem.compare(c, env, t),
        Formula::Not(a) => Ok(!naive(a, sem, env, t)?),
        Formula::And(a, b) => {
            let x = naive(a, sem, env, t)?;
            let y = naive(b, sem, env, t)?;
            Ok(x && y)
        }
        Formula::Or(a, b) => {
            let x = naive(a, sem, env, t)?;
            let y = naive(b, sem, env, t)?;
            Ok(x || y)
        }
        Formula::Implies(a, b) => {
            let x = naive(a, sem, env, t)?;
            let y = naive(b, sem, env, t)?;
            Ok(!x || y)
        }
        Formula::Forall(q) => {
            let mut all = true;
            for e in sem.domain(&q.sort)? {
                let v = naive(&q.body, sem, &env.bind(&q.var, e), t)?;
                all = all && v;
            }
            Ok(all)
        }
        Formula::Exists(q) => {
            let mut any = false;
            for e in sem.domain(&q.sort)? {
                let v = naive(&q.body, sem, &env.bind(&q.var, e), t)?;
                any = any || v;
            }
            Ok(any)
        }
        Formula::Next(a) => {
            if t + 1 < len {
                naive(a, sem, env, t + 1)
            } else {
                Ok(false)
            }
        }
        Formula::Always(a) => {
            let mut all = true;
            for u in t..len {
                let v = naive(a, sem, env, u)?;
                all = all && v;
            }
            Ok(all)
        }
        Formula::Eventually(a) => {
            let mut any = false;
            for u in t..len {
                let v = naive(a, sem, env, u)?;
                any = any || v;
            }
            Ok(any)
        }
        Formula::Until(a, b) => {
            let mut any = false;
            for u in t..len {
                let goal = naive(b, sem, env, u)?;
                let mut held = true;
                for w in t..u {
                    let v = naive(a, sem, env, w)?;
                    held = held && v;
                }
                any = any || (goal && held);
            }
            Ok(any)
        }
        Formula::Before(a) => {
            let mut any = false;
            for u in 0..=t {
                let v = naive(a, sem, env, u)?;
                any = any || v;
            }
            Ok(any)
        }
    }
}

// ---------------------------------------------------------------------------
// Fast evaluator

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tri {
    F,
    T,
    /// Index into the evaluator's error table.
    E(u32),
}

impl Tri {
    fn of(b: bool) -> Tri {
        if b {
            Tri::T
        } else {
            Tri::F
        }
    }

    fn not(self) -> Tri {
        match self {
            Tri::T => Tri::F,
            Tri::F => Tri::T,
            e => e,
        }
    }

    fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::E(_), _) => self,
            (_, Tri::E(_)) => o,
            (Tri::T, Tri::T) => Tri::T,
            _ => Tri::F,
        }
    }

    fn or(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::E(_), _) => self,
            (_, Tri::E(_)) => o,
            (Tri::F, Tri::F) => Tri::F,
            _ => Tri::T,
        }
    }
}

struct Planner<'s, 'a> {
    sem: &'s Semantics<'a>,
    errors: Vec<EvalError>,
}

impl Planner<'_, '_> {
    fn fail(&mut self, e: EvalError) -> Tri {
        self.errors.push(e);
        Tri::E(self.errors.len() as u32 - 1)
    }

    fn pointwise(&mut self, f: impl Fn(usize) -> Result<bool, EvalError>) -> Vec<Tri> {
        (0..self.sem.len())
            .map(|t| match f(t) {
                Ok(b) => Tri::of(b),
                Err(e) => self.fail(e),
            })
            .collect()
    }

    /// Truth of `f` at every instant.
    fn vector(&mut self, f: &Formula, env: &Env) -> Vec<Tri> {
        let len = self.sem.len();
        match f {
            Formula::True => vec![Tri::T; len],
            Formula::False => vec![Tri::F; len],
            Formula::Final => (0..len).map(|t| Tri::of(t + 1 == len)).collect(),
            Formula::Atom(a) => match self.sem.find_macro(&a.name) {
                Some(m) => self.macro_vector(m, a, env),
                None => {
                    let sem = self.sem;
                    self.pointwise(|t| sem.eval_primitive(a, env, t))
                }
            },
            Formula::Compare(c) => {
                let sem = self.sem;
                self.pointwise(|t| sem.compare(c, env, t))
            }
            Formula::Not(a) => self.vector(a, env).into_iter().map(Tri::not).collect(),
            Formula::And(a, b) => self.zip(a, b, env, Tri::and),
            Formula::Or(a, b) => self.zip(a, b, env, Tri::or),
            Formula::Implies(a, b) => self.zip(a, b, env, |x, y| x.not().or(y)),
            Formula::Forall(q) | Formula::Exists(q) => {
                let universal = matches!(f, Formula::Forall(_));
                let domain = match self.sem.domain(&q.sort) {
                    Ok(d) => d,
                    Err(e) => {
                        let e = self.fail(e);
                        return vec![e; len];
                    }
                };
                let mut acc = vec![Tri::of(universal); len];
                for e in domain {
                    let v = self.vector(&q.body, &env.bind(&q.var, e));
                    for (a, x) in acc.iter_mut().zip(v) {
                        *a = if universal { a.and(x) } else { a.or(x) };
                    }
                }
                acc
            }
            Formula::Next(a) => {
                let v = self.vector(a, env);
                (0..len)
                    .map(|t| if t + 1 < len { v[t + 1] } else { Tri::F })
                    .collect()
            }
            Formula::Always(a) => suffix(self.vector(a, env), Tri::and),
            Formula::Eventually(a) => suffix(self.vector(a, env), Tri::or),
            Formula::Until(a, b) => {
                let hold = self.vector(a, env);
                let goal = self.vector(b, env);
                let mut out = goal.clone();
                for t in (0..len.saturating_sub(1)).rev() {
                    out[t] = goal[t].or(hold[t].and(out[t + 1]));
                }
                out
            }
            Formula::Before(a) => {
                let mut v = self.vector(a, env);
                for t in 1..len {
                    v[t] = v[t - 1].or(v[t]);
                }
                v
            }
        }
    }

    fn zip(&mut self, a: &Formula, b: &Formula, env: &Env, op: impl Fn(Tri, Tri) -> Tri) -> Vec<Tri> {
        let x = self.vector(a, env);
        let y = self.vector(b, env);
        x.into_iter().zip(y).map(|(p, q)| op(p, q)).collect()
    }

    /// Macro bodies are evaluated once per distinct tuple of numeric
    /// arguments, which is usually once.
    fn macro_vector(&mut self, m: &MacroDef, a: &Atom, env: &Env) -> Vec<Tri> {
        let len = self.sem.len();
        let mut out = vec![Tri::F; len];
        let mut groups: Vec<(Vec<Num>, Vec<usize>)> = Vec::new();
        for t in 0..len {
            match self.sem.macro_numbers(a, env, t) {
                Ok(nums) => match groups.iter_mut().find(|(n, _)| *n == nums) {
                    Some((_, ts)) => ts.push(t),
                    None => groups.push((nums, vec![t])),
                },
                Err(EvalError::Geometry(GeometryError::BeyondFinalState)) => out[t] = Tri::F,
                Err(e) => out[t] = self.fail(e),
            }
        }
        for (nums, ts) in groups {
            let body = match self.sem.macro_env(m, a, env, nums) {
                Ok(frame) => self.vector(&m.body, &frame),
                Err(e) => {
                    let e = self.fail(e);
                    vec![e; len]
                }
            };
            for t in ts {
                out[t] = body[t];
            }
        }
        out
    }
}

fn suffix(mut v: Vec<Tri>, op: impl Fn(Tri, Tri) -> Tri) -> Vec<Tri> {
    for t in (0..v.len().saturating_sub(1)).rev() {
        v[t] = op(v[t], v[t + 1]);
    }
    v
}

/// Truth of `f` at every instant of the trace.
pub fn eval_all(f: &Formula, sem: &Semantics, env: &Env) -> Vec<Result<bool, EvalError>> {
    let mut p = Planner {
        sem,
        errors: Vec::new(),
    };
    let v = p.vector(f, env);
    v.into_iter()
        .map(|x| match x {
            Tri::T => Ok(true),
            Tri::F => Ok(false),
            Tri::E(i) => Err(p.errors[i as usize].clone()),
        })
        .collect()
}

pub fn eval_formula(f: &Formula, sem: &Semantics, env: &Env, t: usize) -> Result<bool, EvalError> {
    sem.check_time(t)?;
    eval_all(f, sem, env).swap_remove(t)
}

// ---------------------------------------------------------------------------
// Theory checking

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPath {
    #[default]
    Fast,
    Reference,
}

impl EvalPath {
    pub fn eval(self, f: &Formula, sem: &Semantics, env: &Env, t: usize) -> Result<bool, EvalError> {
        match self {
            EvalPath::Fast => eval_formula(f, sem, env, t),
            EvalPath::Reference => reference_eval(f, sem, env, t),
        }
    }
}

/// Replaces free occurrences of the mapped names (roles, typically) by
/// their images. Quantified variables shadow the map.
pub fn substitute(f: &Formula, map: &[(String, String)]) -> Formula {
    fn term(t: &Term, map: &[(String, String)], bound: &[String]) -> Term {
        if bound.contains(&t.name) {
            return t.clone();
        }
        match map.iter().find(|(k, _)| *k == t.name) {
            Some((_, v)) => Term {
                name: v.clone(),
                loc: t.loc.clone(),
            },
            None => t.clone(),
        }
    }
    fn num(e: &NumExpr, map: &[(String, String)], bound: &[String]) -> NumExpr {
        let b = |x: &NumExpr| Box::new(num(x, map, bound));
        match e {
            NumExpr::Const(_) | NumExpr::Named(..) => e.clone(),
            NumExpr::Param { entity, param } => NumExpr::Param {
                entity: term(entity, map, bound),
                param: param.clone(),
            },
            NumExpr::Add(x, y) => NumExpr::Add(b(x), b(y)),
            NumExpr::Sub(x, y) => NumExpr::Sub(b(x), b(y)),
            NumExpr::Mul(x, y) => NumExpr::Mul(b(x), b(y)),
            NumExpr::Neg(x) => NumExpr::Neg(b(x)),
            NumExpr::Next(x) => NumExpr::Next(b(x)),
            NumExpr::Delta(x, y) => NumExpr::Delta(term(x, map, bound), term(y, map, bound)),
            NumExpr::Theta(x, y) => NumExpr::Theta(term(x, map, bound), term(y, map, bound)),
            NumExpr::Measure(x) => NumExpr::Measure(term(x, map, bound)),
            NumExpr::Drop(x, s) => NumExpr::Drop(term(x, map, bound), b(s)),
        }
    }
    fn go(f: &Formula, map: &[(String, String)], bound: &mut Vec<String>) -> Formula {
        let sub = |g: &Formula, bound: &mut Vec<String>| Box::new(go(g, map, bound));
        match f {
            Formula::True | Formula::False | Formula::Final => f.clone(),
            Formula::Atom(a) => Formula::Atom(Atom {
                name: a.name.clone(),
                args: a.args.iter().map(|t| term(t, map, bound)).collect(),
                extra: a.extra.iter().map(|x| num(x, map, bound)).collect(),
                loc: a.loc.clone(),
            }),
            Formula::Compare(c) => Formula::Compare(ConstraintAtom {
                lhs: num(&c.lhs, map, bound),
                cmp: c.cmp,
                rhs: num(&c.rhs, map, bound),
                loc: c.loc.clone(),
            }),
            Formula::Not(a) => Formula::Not(sub(a, bound)),
            Formula::Next(a) => Formula::Next(sub(a, bound)),
            Formula::Always(a) => Formula::Always(sub(a, bound)),
            Formula::Eventually(a) => Formula::Eventually(sub(a, bound)),
            Formula::Before(a) => Formula::Before(sub(a, bound)),
            Formula::And(a, b) => Formula::And(sub(a, bound), sub(b, bound)),
            Formula::Or(a, b) => Formula::Or(sub(a, bound), sub(b, bound)),
            Formula::Implies(a, b) => Formula::Implies(sub(a, bound), sub(b, bound)),
            Formula::Until(a, b) => Formula::Until(sub(a, bound), sub(b, bound)),
            Formula::Forall(q) | Formula::Exists(q) => {
                bound.push(q.var.clone());
                let body = sub(&q.body, bound);
                bound.pop();
                let q = Quantified {
                    var: q.var.clone(),
                    sort: q.sort.clone(),
                    body,
                    loc: q.loc.clone(),
                };
                if matches!(f, Formula::Forall(_)) {
                    Formula::Forall(q)
                } else {
                    Formula::Exists(q)
                }
            }
        }
    }
    go(f, map, &mut Vec::new())
}

/// Where an axiom first fails: the instant, the failing subformula and the
/// quantified variables bound on the way down.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub time: usize,
    pub formula: Formula,
    pub bindings: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub index: usize,
    pub formula: Formula,
    pub satisfied: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub theory: String,
    pub binding: Vec<(String, String)>,
    pub axioms: Vec<AxiomReport>,
}

impl CheckReport {
    pub fn satisfied(&self) -> bool {
        self.axioms.iter().all(|a| a.satisfied)
    }

    pub fn first_violation(&self) -> Option<&AxiomReport> {
        self.axioms.iter().find(|a| !a.satisfied)
    }
}

/// Environment binding each role to its entity, after checking that every
/// role is bound to an entity of a compatible sort.
pub fn role_env(theory: &Theory, sem: &Semantics, binding: &[(String, String)]) -> Result<Env, EvalError> {
    for (role, _) in binding {
        if theory.role_sort(role).is_none() {
            return Err(EvalError::UnknownRole(role.clone()));
        }
    }
    let mut env = Env::new();
    for (role, sort) in &theory.roles {
        let (_, id) = binding
            .iter()
            .find(|(r, _)| r == role)
            .ok_or_else(|| EvalError::MissingRole(role.clone()))?;
        let idx = sem
            .scene
            .scenario
            .entity_index(id)
            .ok_or_else(|| EvalError::UnboundSymbol(id.clone()))?;
        let decl = &sem.scene.scenario.entities[idx];
        if !sem.hierarchy().is_subsort(&decl.sort, sort)? {
            return Err(EvalError::SortMismatchInBinding {
                role: role.clone(),
                sort: sort.clone(),
                entity: id.clone(),
                entity_sort: decl.sort.clone(),
            });
        }
        env = env.bind(role, idx);
    }
    Ok(env)
}

/// Evaluates every axiom at instant 0 under `binding` and explains failures.
pub fn check_theory(
    theory: &Theory,
    scenario: &Scenario,
    binding: &[(String, String)],
    prelude: &[MacroDef],
    tol: &Tolerances,
    path: EvalPath,
) -> Result<CheckReport, EvalError> {
    let sem = Semantics::for_trace(scenario, tol.clone())?
        .with_theory(theory)?
        .with_macros(prelude);
    check_with(theory, &sem, binding, path)
}

/// [`check_theory`] against prepared semantics.
pub fn check_with(
    theory: &Theory,
    sem: &Semantics,
    binding: &[(String, String)],
    path: EvalPath,
) -> Result<CheckReport, EvalError> {
    let env = role_env(theory, sem, binding)?;
    let mut axioms = Vec::with_capacity(theory.axioms.len());
    for (index, ax) in theory.axioms.iter().enumerate() {
        let satisfied = path.eval(ax, sem, &env, 0)?;
        let witness = if satisfied {
            None
        } else {
            let mut bindings = Vec::new();
            let (time, formula) = explain(ax, sem, &env, 0, &mut bindings)?;
            Some(Witness {
                time,
                formula,
                bindings,
            })
        };
        axioms.push(AxiomReport {
            index,
            formula: ax.clone(),
            satisfied,
            witness,
        });
    }
    Ok(CheckReport {
        theory: theory.name.clone(),
        binding: binding.to_vec(),
        axioms,
    })
}

/// Descends into a subformula known to be false at `t`, preferring the
/// earliest instant and the leftmost child.
fn explain(
    f: &Formula,
    sem: &Semantics,
    env: &Env,
    t: usize,
    bound: &mut Vec<(String, String)>,
) -> Result<(usize, Formula), EvalError> {
    match f {
        Formula::And(a, b) => {
            if !naive(a, sem, env, t)? {
                explain(a, sem, env, t, bound)
            } else {
                explain(b, sem, env, t, bound)
            }
        }
        Formula::Implies(_, b) => explain(b, sem, env, t, bound),
        Formula::Always(a) => {
            for u in t..sem.len() {
                if !naive(a, sem, env, u)? {
                    return explain(a, sem, env, u, bound);
                }
            }
            Ok((t, f.clone()))
        }
        Formula::Forall(q) => {
            for e in sem.domain(&q.sort)? {
                let inner = env.bind(&q.var, e);
                if !naive(&q.body, sem, &inner, t)? {
                    bound.push((q.var.clone(), sem.scene.id(e).to_string()));
                    return explain(&q.body, sem, &inner, t, bound);
                }
            }
            Ok((t, f.clone()))
        }
        Formula::Next(a) if t + 1 < sem.len() => explain(a, sem, env, t + 1, bound),
        _ => Ok((t, f.clone())),
    }
}
