//! Forward simulation under default persistence.
//!
//! Each step evaluates rule conditions stratum by stratum, collects their
//! effects and applies them together; every parameter no effect writes keeps
//! its value. Forces persist until removed and displace their target every
//! step.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::geometry::{builtin_arity, is_step_relation, NumExpr, Tolerances};
use crate::logic::{eval_formula, EvalError, Env, Formula, MacroDef, Semantics};
use crate::model::{
    canonical_forces, ForceFluent, ForceMode, ModelError, Scenario, ScenarioBody, State, Trace,
};
use crate::rational::{rat, Num, Rational};
use crate::span::Term;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("conflicting effects on `{entity}.{param}`")]
    ConflictingEffects { entity: String, param: String },
    #[error("rule set is not stratifiable: negated dependency cycle through {0:?}")]
    Unstratifiable(Vec<String>),
    #[error("gravity step must be positive")]
    NonPositiveDelta,
    #[error("rule `{0}` reads beyond the current state")]
    TemporalCondition(String),
    #[error("entity `{entity}` has no parameter `{param}`")]
    UnknownParameter { entity: String, param: String },
    #[error("rule effect targets unknown entity `{0}`")]
    UnknownTarget(String),
    #[error("effect on `{entity}.{param}` is not a rational value")]
    InexactValue { entity: String, param: String },
    #[error("scenario `{0}` has no rules")]
    NotGenerative(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    Set { target: Term, param: String, value: NumExpr },
    Delta { target: Term, param: String, value: NumExpr },
    AddForce {
        target: Term,
        label: String,
        dx: Rational,
        dy: Rational,
        mode: ForceMode,
    },
    RemoveForce { target: Term, label: String },
}

impl Effect {
    fn writes(&self) -> Resource {
        match self {
            Effect::Set { param, .. } | Effect::Delta { param, .. } => Resource::Param(param.clone()),
            Effect::AddForce { .. } | Effect::RemoveForce { .. } => Resource::Forces,
        }
    }
}

/// A rule fires for each scope element satisfying `condition` but not `until`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub scope: Option<(String, String)>,
    pub condition: Formula,
    pub effects: Vec<Effect>,
    pub until: Option<Formula>,
}

/// Rules as written in a scenario, before the simulation step size is known.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleSpec {
    Gravity { delta: Option<Rational> },
    Umph {
        label: String,
        target: String,
        dx: Rational,
        dy: Rational,
        mode: ForceMode,
        until: Option<Formula>,
    },
    Custom(Rule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Gravity step used when a scenario does not give one.
    pub delta: Rational,
    pub tol: Tolerances,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            delta: rat(1),
            tol: Tolerances::default(),
        }
    }
}

/// Everything falls by `delta` per step unless it rests on something.
pub fn gravity_rule(delta: &Rational) -> Result<Rule, DynamicsError> {
    if *delta <= Rational::zero() {
        return Err(DynamicsError::NonPositiveDelta);
    }
    Ok(Rule {
        name: "gravity".into(),
        scope: Some(("x".into(), "Entity".into())),
        condition: Formula::and(
            Formula::not(Formula::atom("scenery", &["x"])),
            Formula::not(Formula::exists("y", "Entity", Formula::atom("on", &["x", "y"]))),
        ),
        effects: vec![Effect::Delta {
            target: Term::new("x"),
            param: "y".into(),
            value: NumExpr::Drop(Term::new("x"), Box::new(NumExpr::Const(delta.clone()))),
        }],
        until: None,
    })
}

/// A force applied to `target` until `until` holds, then released.
pub fn umph_rules(
    label: &str,
    target: &str,
    dx: &Rational,
    dy: &Rational,
    mode: ForceMode,
    until: Option<&Formula>,
) -> Vec<Rule> {
    let push = Rule {
        name: format!("umph {label}"),
        scope: None,
        condition: Formula::True,
        effects: vec![Effect::AddForce {
            target: Term::new(target),
            label: label.to_string(),
            dx: dx.clone(),
            dy: dy.clone(),
            mode,
        }],
        until: until.cloned(),
    };
    let mut rules = vec![push];
    if let Some(goal) = until {
        rules.push(Rule {
            name: format!("release {label}"),
            scope: None,
            condition: goal.clone(),
            effects: vec![Effect::RemoveForce {
                target: Term::new(target),
                label: label.to_string(),
            }],
            until: None,
        });
    }
    rules
}

pub fn resolve_rules(specs: &[RuleSpec], cfg: &SimConfig) -> Result<Vec<Rule>, DynamicsError> {
    let mut out = Vec::new();
    for s in specs {
        match s {
            RuleSpec::Gravity { delta } => out.push(gravity_rule(delta.as_ref().unwrap_or(&cfg.delta))?),
            RuleSpec::Umph {
                label,
                target,
                dx,
                dy,
                mode,
                until,
            } => out.extend(umph_rules(label, target, dx, dy, *mode, until.as_ref())),
            RuleSpec::Custom(r) => out.push(r.clone()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Resource {
    Param(String),
    Forces,
}

const GEOMETRY_PARAMS: &[&str] = &["x", "y", "r", "w", "h", "x1", "y1", "x2", "y2"];

fn geometry_reads(negated: bool, out: &mut BTreeSet<(Resource, bool)>) {
    for p in GEOMETRY_PARAMS {
        out.insert((Resource::Param(p.to_string()), negated));
    }
}

fn num_reads(e: &NumExpr, negated: bool, out: &mut BTreeSet<(Resource, bool)>) {
    match e {
        NumExpr::Param { param, .. } => {
            out.insert((Resource::Param(param.clone()), negated));
        }
        NumExpr::Delta(..) | NumExpr::Theta(..) | NumExpr::Measure(_) => geometry_reads(negated, out),
        NumExpr::Drop(_, s) => {
            geometry_reads(negated, out);
            num_reads(s, negated, out);
        }
        NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) => {
            num_reads(a, negated, out);
            num_reads(b, negated, out);
        }
        NumExpr::Neg(a) | NumExpr::Next(a) => num_reads(a, negated, out),
        NumExpr::Const(_) | NumExpr::Named(..) => {}
    }
}

/// What a formula reads, with the polarity of each read. Parameters are
/// tracked by name, not per entity.
fn formula_reads(
    f: &Formula,
    negated: bool,
    macros: &[MacroDef],
    seen: &mut Vec<String>,
    out: &mut BTreeSet<(Resource, bool)>,
) {
    match f {
        Formula::Atom(a) => {
            if let Some(m) = macros.iter().find(|m| m.name == a.name) {
                if !seen.contains(&m.name) {
                    seen.push(m.name.clone());
                    formula_reads(&m.body, negated, macros, seen, out);
                    seen.pop();
                }
            } else if a.name == "forced" {
                out.insert((Resource::Forces, negated));
            } else if a.name != "scenery" {
                geometry_reads(negated, out);
            }
            for x in &a.extra {
                num_reads(x, negated, out);
            }
        }
        Formula::Compare(c) => {
            num_reads(&c.lhs, negated, out);
            num_reads(&c.rhs, negated, out);
        }
        Formula::Not(a) => formula_reads(a, !negated, macros, seen, out),
        Formula::Implies(a, b) => {
            formula_reads(a, !negated, macros, seen, out);
            formula_reads(b, negated, macros, seen, out);
        }
        _ => {
            for c in f.children() {
                formula_reads(c, negated, macros, seen, out);
            }
        }
    }
}

fn is_state_local(f: &Formula, macros: &[MacroDef], seen: &mut Vec<String>) -> bool {
    let num_local = |e: &NumExpr| !e.uses_next();
    match f {
        Formula::Next(_)
        | Formula::Always(_)
        | Formula::Eventually(_)
        | Formula::Until(..)
        | Formula::Before(_)
        | Formula::Final => false,
        Formula::Atom(a) => {
            if !a.extra.iter().all(num_local) {
                return false;
            }
            match macros.iter().find(|m| m.name == a.name) {
                Some(m) if !seen.contains(&m.name) => {
                    seen.push(m.name.clone());
                    let ok = is_state_local(&m.body, macros, seen);
                    seen.pop();
                    ok
                }
                Some(_) => true,
                None => !(builtin_arity(&a.name).is_some() && is_step_relation(&a.name)),
            }
        }
        Formula::Compare(c) => num_local(&c.lhs) && num_local(&c.rhs),
        _ => f.children().into_iter().all(|c| is_state_local(c, macros, seen)),
    }
}

/// Orders rules into strata. A rule reading something another writes comes
/// after it; a cycle through a negated read is rejected. Rules never depend
/// on themselves, because their own effects land in the next state.
pub fn stratify(rules: &[Rule], macros: &[MacroDef]) -> Result<Vec<Vec<usize>>, DynamicsError> {
    let reads: Vec<BTreeSet<(Resource, bool)>> = rules
        .iter()
        .map(|r| {
            let mut out = BTreeSet::new();
            formula_reads(&r.condition, false, macros, &mut Vec::new(), &mut out);
            if let Some(u) = &r.until {
                formula_reads(u, true, macros, &mut Vec::new(), &mut out);
            }
            out
        })
        .collect();
    let writes: Vec<BTreeSet<Resource>> = rules
        .iter()
        .map(|r| r.effects.iter().map(Effect::writes).collect())
        .collect();
    let mut g = DiGraph::<usize, bool>::new();
    let nodes: Vec<_> = (0..rules.len()).map(|i| g.add_node(i)).collect();
    for (i, w) in writes.iter().enumerate() {
        for (j, rd) in reads.iter().enumerate() {
            if i == j {
                continue;
            }
            let hits: Vec<bool> = rd.iter().filter(|(res, _)| w.contains(res)).map(|(_, n)| *n).collect();
            if !hits.is_empty() {
                g.add_edge(nodes[i], nodes[j], hits.contains(&true));
            }
        }
    }
    let mut sccs = tarjan_scc(&g);
    sccs.reverse();
    let mut strata = Vec::new();
    for scc in sccs {
        let members: BTreeSet<usize> = scc.iter().map(|n| g[*n]).collect();
        let negated_cycle = g.edge_indices().any(|e| {
            let (a, b) = g.edge_endpoints(e).expect("edge");
            g[e] && members.contains(&g[a]) && members.contains(&g[b])
        });
        if negated_cycle {
            return Err(DynamicsError::Unstratifiable(
                members.iter().map(|i| rules[*i].name.clone()).collect(),
            ));
        }
        strata.push(members.into_iter().collect());
    }
    Ok(strata)
}

#[derive(Debug, Clone, PartialEq)]
enum Write {
    Set(Rational),
    Delta(Rational),
}

#[derive(Default)]
struct Effects {
    params: BTreeMap<(usize, usize), Write>,
    added: Vec<ForceFluent>,
    removed: Vec<(String, String)>,
}

impl Effects {
    fn write(&mut self, scenario: &Scenario, key: (usize, usize), w: Write) -> Result<(), DynamicsError> {
        let conflict = || DynamicsError::ConflictingEffects {
            entity: scenario.entities[key.0].id.clone(),
            param: scenario.entities[key.0].params[key.1].0.clone(),
        };
        match (self.params.get_mut(&key), w) {
            (None, w) => {
                self.params.insert(key, w);
            }
            (Some(Write::Delta(a)), Write::Delta(b)) => *a += b,
            (Some(Write::Set(a)), Write::Set(b)) if *a == b => {}
            _ => return Err(conflict()),
        }
        Ok(())
    }

    /// `s` with these effects applied; forces are not yet applied as motion.
    fn apply(&self, s: &State) -> State {
        let mut next = s.clone();
        for ((e, p), w) in &self.params {
            match w {
                Write::Set(v) => next.values[*e][*p] = v.clone(),
                Write::Delta(d) => next.values[*e][*p] += d,
            }
        }
        next.forces
            .retain(|f| !self.removed.iter().any(|(t, l)| *t == f.target && *l == f.label));
        next.forces.extend(self.added.iter().cloned());
        canonical_forces(&mut next.forces);
        next
    }
}

/// A validated rule set bound to a scenario.
pub struct Simulator<'a> {
    scenario: &'a Scenario,
    rules: Vec<Rule>,
    strata: Vec<Vec<usize>>,
    macros: &'a [MacroDef],
    cfg: SimConfig,
}

impl<'a> Simulator<'a> {
    pub fn new(
        scenario: &'a Scenario,
        rules: Vec<Rule>,
        macros: &'a [MacroDef],
        cfg: SimConfig,
    ) -> Result<Self, DynamicsError> {
        for r in &rules {
            let local = is_state_local(&r.condition, macros, &mut Vec::new())
                && r.until.as_ref().is_none_or(|u| is_state_local(u, macros, &mut Vec::new()));
            if !local {
                return Err(DynamicsError::TemporalCondition(r.name.clone()));
            }
            for eff in &r.effects {
                if let Effect::Set { value, .. } | Effect::Delta { value, .. } = eff {
                    if value.uses_next() {
                        return Err(DynamicsError::TemporalCondition(r.name.clone()));
                    }
                }
            }
        }
        let strata = stratify(&rules, macros)?;
        Ok(Simulator {
            scenario,
            rules,
            strata,
            macros,
            cfg,
        })
    }

    pub fn strata(&self) -> &[Vec<usize>] {
        &self.strata
    }

    pub fn step(&self, s: &State) -> Result<State, DynamicsError> {
        let mut fx = Effects::default();
        for stratum in &self.strata {
            let view = fx.apply(s);
            let mut collected = Vec::new();
            for &ri in stratum {
                self.fire(&self.rules[ri], &view, &mut collected)?;
            }
            for c in collected {
                match c {
                    Collected::Write(key, w) => fx.write(self.scenario, key, w)?,
                    Collected::Add(f) => fx.added.push(f),
                    Collected::Remove(t, l) => fx.removed.push((t, l)),
                }
            }
        }
        let mut next = fx.apply(s);
        next.time = s.time + 1;
        for f in &next.forces {
            let e = self
                .scenario
                .entity_index(&f.target)
                .ok_or_else(|| DynamicsError::UnknownTarget(f.target.clone()))?;
            for (i, (p, _)) in self.scenario.entities[e].params.iter().enumerate() {
                match p.as_str() {
                    "x" | "x1" | "x2" => next.values[e][i] += &f.dx,
                    "y" | "y1" | "y2" => next.values[e][i] += &f.dy,
                    _ => {}
                }
            }
        }
        Trace {
            states: vec![State {
                time: 0,
                ..next.clone()
            }],
        }
        .validate(&self.scenario.entities)?;
        Ok(next)
    }

    /// Evaluates one rule against `view` and collects its effects, with
    /// values computed in `view` as well.
    fn fire(&self, rule: &Rule, view: &State, out: &mut Vec<Collected>) -> Result<(), DynamicsError> {
        let states = std::slice::from_ref(view);
        let sem = Semantics::new(self.scenario, states, self.cfg.tol.clone()).with_macros(self.macros);
        let envs = match &rule.scope {
            None => vec![Env::new()],
            Some((var, sort)) => sem.domain(sort)?.into_iter().map(|e| Env::new().bind(var, e)).collect(),
        };
        for env in envs {
            if !eval_formula(&rule.condition, &sem, &env, 0)? {
                continue;
            }
            if let Some(u) = &rule.until {
                if eval_formula(u, &sem, &env, 0)? {
                    continue;
                }
            }
            for eff in &rule.effects {
                out.push(self.effect(eff, &sem, &env)?);
            }
        }
        Ok(())
    }

    fn effect(&self, eff: &Effect, sem: &Semantics, env: &Env) -> Result<Collected, DynamicsError> {
        let target = |t: &Term| -> Result<usize, DynamicsError> {
            env.entity(&t.name)
                .or_else(|| self.scenario.entity_index(&t.name))
                .ok_or_else(|| DynamicsError::UnknownTarget(t.name.clone()))
        };
        Ok(match eff {
            Effect::Set { target: t, param, value } | Effect::Delta { target: t, param, value } => {
                let e = target(t)?;
                let decl = &self.scenario.entities[e];
                let p = decl.param_index(param).ok_or_else(|| DynamicsError::UnknownParameter {
                    entity: decl.id.clone(),
                    param: param.clone(),
                })?;
                let v = match sem.eval_num(value, env, 0)? {
                    Num::Exact(v) => v,
                    Num::Approx(_) => {
                        return Err(DynamicsError::InexactValue {
                            entity: decl.id.clone(),
                            param: param.clone(),
                        })
                    }
                };
                let w = if matches!(eff, Effect::Set { .. }) {
                    Write::Set(v)
                } else {
                    Write::Delta(v)
                };
                Collected::Write((e, p), w)
            }
            Effect::AddForce {
                target: t,
                label,
                dx,
                dy,
                mode,
            } => Collected::Add(ForceFluent {
                target: self.scenario.entities[target(t)?].id.clone(),
                label: label.clone(),
                dx: dx.clone(),
                dy: dy.clone(),
                mode: *mode,
            }),
            Effect::RemoveForce { target: t, label } => {
                Collected::Remove(self.scenario.entities[target(t)?].id.clone(), label.clone())
            }
        })
    }

    /// States 0..horizon, starting from the declared initial values.
    pub fn run(&self, horizon: usize) -> Result<Trace, DynamicsError> {
        let mut states = vec![self.scenario.initial_state()];
        while states.len() < horizon {
            let next = self.step(states.last().expect("non-empty"))?;
            states.push(next);
        }
        Ok(Trace { states })
    }
}

enum Collected {
    Write((usize, usize), Write),
    Add(ForceFluent),
    Remove(String, String),
}

/// One step of `rules` from `s`.
pub fn step(
    scenario: &Scenario,
    s: &State,
    rules: Vec<Rule>,
    macros: &[MacroDef],
    cfg: &SimConfig,
) -> Result<State, DynamicsError> {
    Simulator::new(scenario, rules, macros, cfg.clone())?.step(s)
}

/// The trace of a generative scenario over its horizon.
pub fn simulate(scenario: &Scenario, macros: &[MacroDef], cfg: &SimConfig) -> Result<Trace, DynamicsError> {
    let ScenarioBody::Generative { rules, horizon } = &scenario.body else {
        return Err(DynamicsError::NotGenerative(scenario.name.clone()));
    };
    let rules = resolve_rules(rules, cfg)?;
    Simulator::new(scenario, rules, macros, cfg.clone())?.run(*horizon)
}

/// `scenario` turned concrete around its simulated trace.
pub fn simulate_scenario(scenario: &Scenario, macros: &[MacroDef], cfg: &SimConfig) -> Result<Scenario, DynamicsError> {
    let trace = simulate(scenario, macros, cfg)?;
    Ok(scenario.replace_trace(trace)?)
}

/// Positions of `entity` over a trace, for tests and reports.
pub fn param_series(scenario: &Scenario, trace: &Trace, entity: &str, param: &str) -> Option<Vec<Rational>> {
    let e = scenario.entity_index(entity)?;
    let p = scenario.entities[e].param_index(param)?;
    Some(trace.states.iter().map(|s| s.values[e][p].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cmp;
    use crate::logic::eval_all;
    use crate::model::{EntityDecl, ShapeKind};
    use crate::rational::ratio;
    use crate::geometry::ConstraintAtom;

    fn generative(entities: Vec<EntityDecl>, rules: Vec<RuleSpec>, horizon: usize, forces: Vec<ForceFluent>) -> Scenario {
        Scenario::declare("g", vec![], entities, forces, ScenarioBody::Generative { rules, horizon }).unwrap()
    }

    fn point(id: &str, x: i64, y: i64) -> EntityDecl {
        EntityDecl::new(id, "Object", ShapeKind::Point, vec![rat(x), rat(y)]).unwrap()
    }

    fn floor() -> EntityDecl {
        EntityDecl::new("f", "Floor", ShapeKind::Floor, vec![rat(0)]).unwrap()
    }

    fn ys(sc: &Scenario, tr: &Trace, id: &str) -> Vec<Rational> {
        param_series(sc, tr, id, "y").unwrap()
    }

    #[test]
    fn gravity_single_step() {
        let sc = generative(vec![point("o", 2, 5), floor()], vec![RuleSpec::Gravity { delta: None }], 2, vec![]);
        let cfg = SimConfig::default();
        let rules = resolve_rules(&[RuleSpec::Gravity { delta: None }], &cfg).unwrap();
        let next = step(&sc, &sc.initial_state(), rules, &[], &cfg).unwrap();
        assert_eq!(next.values[0], vec![rat(2), rat(4)]);
        assert_eq!(next.time, 1);
    }

    #[test]
    fn gravity_lands_and_rests() {
        let sc = generative(vec![point("o", 2, 5), floor()], vec![RuleSpec::Gravity { delta: None }], 7, vec![]);
        let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
        assert_eq!(ys(&sc, &tr, "o"), [5, 4, 3, 2, 1, 0, 0].map(rat).to_vec());
        assert_eq!(ys(&sc, &tr, "f"), vec![rat(0); 7]);
    }

    #[test]
    fn gravity_clamps_to_contact() {
        let sc = generative(
            vec![EntityDecl::new("o", "Object", ShapeKind::Point, vec![rat(0), ratio(5, 2)]).unwrap(), floor()],
            vec![RuleSpec::Gravity { delta: None }],
            5,
            vec![],
        );
        let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
        assert_eq!(ys(&sc, &tr, "o"), vec![ratio(5, 2), ratio(3, 2), ratio(1, 2), rat(0), rat(0)]);
    }

    #[test]
    fn resting_entity_stays_and_no_floor_falls_forever() {
        let sc = generative(vec![point("o", 2, 0), floor()], vec![RuleSpec::Gravity { delta: None }], 3, vec![]);
        let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
        assert_eq!(ys(&sc, &tr, "o"), vec![rat(0); 3]);
        let sc = generative(vec![point("o", 0, 0)], vec![RuleSpec::Gravity { delta: None }], 4, vec![]);
        let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
        assert_eq!(ys(&sc, &tr, "o"), [0, -1, -2, -3].map(rat).to_vec());
    }

    #[test]
    fn empty_rules_are_pure_inertia() {
        let sc = generative(vec![point("o", 2, 5), floor()], vec![], 3, vec![]);
        let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
        assert_eq!(tr.states[0].values, tr.states[2].values);
        let one = generative(vec![point("o", 2, 5)], vec![RuleSpec::Gravity { delta: None }], 1, vec![]);
        assert_eq!(simulate(&one, &[], &SimConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn non_positive_delta_rejected() {
        assert_eq!(gravity_rule(&rat(0)).unwrap_err(), DynamicsError::NonPositiveDelta);
        assert_eq!(gravity_rule(&rat(-1)).unwrap_err(), DynamicsError::NonPositiveDelta);
    }

    #[test]
    fn force_until_goal() {
        let goal = Formula::atom_with("closeTo", &["o", "goal"], vec![NumExpr::Const(rat(0))]);
        let sc = generative(
            vec![
                point("o", 0, 0),
                EntityDecl::new("goal", "Region", ShapeKind::Point, vec![rat(3), rat(0)]).unwrap(),
            ],
            vec![RuleSpec::Umph {
                label: "push".into(),
                target: "o".into(),
                dx: rat(1),
                dy: rat(0),
                mode: ForceMode::Active,
                until: Some(goal),
            }],
            6,
            vec![],
        );
        let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
        assert_eq!(param_series(&sc, &tr, "o", "x").unwrap(), [0, 1, 2, 3, 3, 3].map(rat).to_vec());
        assert!(tr.states[1].forces.iter().any(|f| f.label == "push"));
        assert!(tr.states[5].forces.is_empty());
    }

    #[test]
    fn opposing_forces_cancel() {
        let force = |label: &str, dx: i64| ForceFluent {
            target: "o".into(),
            label: label.into(),
            dx: rat(dx),
            dy: rat(0),
            mode: ForceMode::Active,
        };
        let sc = generative(vec![point("o", 0, 0)], vec![], 5, vec![force("left", -1), force("right", 1)]);
        let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
        assert!(tr.states.iter().all(|s| s.values[0] == vec![rat(0), rat(0)]));
        let concrete = sc.replace_trace(tr).unwrap();
        let sem = Semantics::for_trace(&concrete, Tolerances::default()).unwrap();
        let motion = Formula::eventually(Formula::atom("moves", &["o"]));
        assert!(eval_all(&motion, &sem, &Env::new()).iter().all(|v| *v == Ok(false)));
    }

    fn set_rule(name: &str, param: &str, v: i64, cond: Formula) -> Rule {
        Rule {
            name: name.into(),
            scope: None,
            condition: cond,
            effects: vec![Effect::Set {
                target: Term::new("o"),
                param: param.into(),
                value: NumExpr::Const(rat(v)),
            }],
            until: None,
        }
    }

    #[test]
    fn conflicting_sets_rejected() {
        let sc = generative(vec![point("o", 0, 0)], vec![], 2, vec![]);
        let rules = vec![set_rule("a", "x", 1, Formula::True), set_rule("b", "x", 2, Formula::True)];
        assert!(matches!(
            step(&sc, &sc.initial_state(), rules, &[], &SimConfig::default()),
            Err(DynamicsError::ConflictingEffects { .. })
        ));
        let agree = vec![set_rule("a", "x", 1, Formula::True), set_rule("b", "x", 1, Formula::True)];
        let s = step(&sc, &sc.initial_state(), agree, &[], &SimConfig::default()).unwrap();
        assert_eq!(s.values[0][0], rat(1));
    }

    fn x_is(v: i64) -> Formula {
        Formula::Compare(ConstraintAtom::new(NumExpr::param("o", "x"), Cmp::Eq, NumExpr::Const(rat(v))))
    }

    #[test]
    fn negated_cycle_is_unstratifiable() {
        let rules = vec![
            set_rule("a", "x", 1, Formula::not(x_is(5))),
            set_rule("b", "y", 1, Formula::not(Formula::Compare(ConstraintAtom::new(
                NumExpr::param("o", "y"),
                Cmp::Eq,
                NumExpr::Const(rat(5)),
            )))),
        ];
        // x and y do not feed each other: two strata, no cycle.
        assert_eq!(stratify(&rules, &[]).unwrap().len(), 2);
        let cyc = vec![
            set_rule("a", "x", 1, Formula::not(Formula::Compare(ConstraintAtom::new(
                NumExpr::param("o", "y"),
                Cmp::Eq,
                NumExpr::Const(rat(5)),
            )))),
            set_rule("b", "y", 1, Formula::not(x_is(5))),
        ];
        assert!(matches!(stratify(&cyc, &[]), Err(DynamicsError::Unstratifiable(_))));
    }

    #[test]
    fn earlier_strata_are_visible() {
        // b fires only if a's write is visible: o.x = 1 in the view.
        let sc = generative(vec![point("o", 0, 0)], vec![], 2, vec![]);
        let rules = vec![set_rule("b", "y", 7, x_is(1)), set_rule("a", "x", 1, Formula::True)];
        let sim = Simulator::new(&sc, rules, &[], SimConfig::default()).unwrap();
        assert_eq!(sim.strata(), &[vec![1], vec![0]]);
        let s = sim.step(&sc.initial_state()).unwrap();
        assert_eq!(s.values[0], vec![rat(1), rat(7)]);
    }

    #[test]
    fn temporal_conditions_rejected() {
        let sc = generative(vec![point("o", 0, 0)], vec![], 2, vec![]);
        let rules = vec![set_rule("a", "x", 1, Formula::eventually(x_is(3)))];
        assert!(matches!(
            Simulator::new(&sc, rules, &[], SimConfig::default()),
            Err(DynamicsError::TemporalCondition(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn scene(h: Vec<(i64, i64)>, with_floor: bool, horizon: usize) -> Scenario {
            let mut es: Vec<EntityDecl> = h.iter().enumerate().map(|(i, (x, y))| point(&format!("o{i}"), i as i64 * 10 + *x, *y)).collect();
            if with_floor {
                es.push(floor());
            }
            generative(es, vec![RuleSpec::Gravity { delta: None }], horizon, vec![])
        }

        proptest! {
            #[test]
            fn gravity_is_deterministic_monotone_and_terminates(
                h in proptest::collection::vec((0i64..5, 0i64..12), 1..4)
            ) {
                let horizon = 14;
                let sc = scene(h.clone(), true, horizon);
                let a = simulate(&sc, &[], &SimConfig::default()).unwrap();
                let b = simulate(&sc, &[], &SimConfig::default()).unwrap();
                prop_assert_eq!(&a, &b);
                for i in 0..h.len() {
                    let y = ys(&sc, &a, &format!("o{i}"));
                    prop_assert!(y.windows(2).all(|w| w[1] <= w[0]));
                    prop_assert_eq!(y.last().unwrap(), &rat(0));
                }
            }

            #[test]
            fn frame_property(xs in proptest::collection::vec((-5i64..5, -5i64..5), 1..4), push in 0usize..3) {
                let mut es: Vec<EntityDecl> = xs.iter().enumerate().map(|(i, (x, y))| point(&format!("o{i}"), *x, *y)).collect();
                es.push(floor());
                let target = format!("o{}", push % xs.len());
                let sc = generative(es, vec![RuleSpec::Umph {
                    label: "p".into(), target: target.clone(), dx: rat(1), dy: rat(0), mode: ForceMode::Passive, until: None,
                }], 5, vec![]);
                let tr = simulate(&sc, &[], &SimConfig::default()).unwrap();
                let ti = sc.entity_index(&target).unwrap();
                for w in tr.states.windows(2) {
                    for (e, (a, b)) in w[0].values.iter().zip(&w[1].values).enumerate() {
                        if e == ti {
                            prop_assert_eq!(&a[1], &b[1]);
                        } else {
                            prop_assert_eq!(a, b);
                        }
                    }
                }
            }
        }
    }
}
