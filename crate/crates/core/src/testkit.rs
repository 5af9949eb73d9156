//! Seeded generators for scenarios, traces and formulas, for tests and
//! benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Cmp, ConstraintAtom, NumExpr, BUILTIN_RELATIONS};
use crate::logic::Formula;
use crate::model::{
    EntityDecl, ForceFluent, ForceMode, Scenario, ScenarioBody, ShapeKind, State, Trace,
};
use crate::rational::{rat, ratio, Rational};
use crate::span::{Loc, Term};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small(rng: &mut TestRng) -> Rational {
    // Halves keep some values off the integer grid.
    ratio(rng.gen_range(-16..=16), 2)
}

fn extent(rng: &mut TestRng) -> Rational {
    ratio(rng.gen_range(1..=8), 2)
}

/// A random entity with id `id`. Mostly points, circles and rectangles;
/// floors and segments now and then.
pub fn random_entity(rng: &mut TestRng, id: &str) -> EntityDecl {
    let (sort, shape) = *[
        ("Object", ShapeKind::Point),
        ("Object", ShapeKind::Circle),
        ("Object", ShapeKind::Rectangle),
        ("Container", ShapeKind::Circle),
        ("Container", ShapeKind::Rectangle),
        ("Region", ShapeKind::Point),
        ("Floor", ShapeKind::Floor),
        ("Path", ShapeKind::Segment),
    ]
    .choose_weighted(rng, |(_, s)| match s {
        ShapeKind::Floor | ShapeKind::Segment => 1,
        _ => 3,
    })
    .expect("weights are positive");
    let values = shape
        .params()
        .iter()
        .map(|p| if shape.extents().contains(p) { extent(rng) } else { small(rng) })
        .collect();
    EntityDecl::new(id, sort, shape, values).expect("arity matches the shape")
}

fn random_values(rng: &mut TestRng, e: &EntityDecl) -> Vec<Rational> {
    e.params
        .iter()
        .map(|(p, v)| {
            if e.shape.extents().contains(&p.as_str()) || p == "open" {
                v.clone()
            } else {
                small(rng)
            }
        })
        .collect()
}

fn random_forces(rng: &mut TestRng, entities: &[EntityDecl]) -> Vec<ForceFluent> {
    let mut fs = Vec::new();
    for e in entities {
        if rng.gen_bool(0.2) {
            fs.push(ForceFluent {
                target: e.id.clone(),
                label: format!("f{}", rng.gen_range(0..3)),
                dx: small(rng),
                dy: small(rng),
                mode: if rng.gen_bool(0.5) { ForceMode::Active } else { ForceMode::Passive },
            });
        }
    }
    crate::model::canonical_forces(&mut fs);
    fs
}

/// Up to `max_entities` entities and a trace of 1..=`max_len` states where
/// each entity either holds still or jumps to a fresh position.
pub fn random_scenario(rng: &mut TestRng, max_entities: usize, max_len: usize) -> Scenario {
    let n = rng.gen_range(1..=max_entities.max(1));
    let entities: Vec<EntityDecl> = (0..n).map(|i| random_entity(rng, &format!("e{i}"))).collect();
    let len = rng.gen_range(1..=max_len.max(1));
    let mut cur: Vec<Vec<Rational>> = entities.iter().map(EntityDecl::initial_values).collect();
    let mut states = Vec::with_capacity(len);
    for t in 0..len {
        if t > 0 {
            for (i, e) in entities.iter().enumerate() {
                if rng.gen_bool(0.4) {
                    cur[i] = random_values(rng, e);
                }
            }
        }
        states.push(State {
            time: t,
            values: cur.clone(),
            forces: random_forces(rng, &entities),
        });
    }
    Scenario::declare(
        "random",
        Vec::new(),
        entities,
        Vec::new(),
        ScenarioBody::Concrete(Trace { states }),
    )
    .expect("generated scenario is valid")
}

/// A generative scenario with no rules and no forces: `n` entities at
/// random initial positions.
pub fn random_inert_scenario(rng: &mut TestRng, n: usize, horizon: usize) -> Scenario {
    let entities: Vec<EntityDecl> = (0..n).map(|i| random_entity(rng, &format!("e{i}"))).collect();
    Scenario::declare(
        "inert",
        Vec::new(),
        entities,
        Vec::new(),
        ScenarioBody::Generative {
            rules: Vec::new(),
            horizon,
        },
    )
    .expect("generated scenario is valid")
}

fn term(rng: &mut TestRng, ids: &[String], vars: &[String]) -> Term {
    if !vars.is_empty() && rng.gen_bool(0.5) {
        Term::new(vars.choose(rng).expect("non-empty").as_str())
    } else {
        Term::new(ids.choose(rng).expect("at least one entity").as_str())
    }
}

fn num_expr(rng: &mut TestRng, ids: &[String], vars: &[String], depth: usize) -> NumExpr {
    let leaf = depth == 0 || rng.gen_bool(0.5);
    if leaf {
        return match rng.gen_range(0..5) {
            0 => NumExpr::Const(small(rng)),
            1 => NumExpr::Param {
                entity: term(rng, ids, vars),
                param: ["x", "y", "r"].choose(rng).expect("non-empty").to_string(),
            },
            2 => NumExpr::Delta(term(rng, ids, vars), term(rng, ids, vars)),
            3 => NumExpr::Measure(term(rng, ids, vars)),
            _ => NumExpr::Named("tau".into(), Loc::none()),
        };
    }
    let a = Box::new(num_expr(rng, ids, vars, depth - 1));
    match rng.gen_range(0..4) {
        0 => NumExpr::Add(a, Box::new(num_expr(rng, ids, vars, depth - 1))),
        1 => NumExpr::Sub(a, Box::new(num_expr(rng, ids, vars, depth - 1))),
        2 => NumExpr::Neg(a),
        _ => NumExpr::Next(a),
    }
}

fn leaf(rng: &mut TestRng, ids: &[String], vars: &[String]) -> Formula {
    match rng.gen_range(0..10) {
        0 => Formula::True,
        1 => Formula::False,
        2 => Formula::Final,
        3 | 4 => Formula::Compare(ConstraintAtom {
            lhs: num_expr(rng, ids, vars, 1),
            cmp: *Cmp::ALL.choose(rng).expect("non-empty"),
            rhs: num_expr(rng, ids, vars, 1),
            loc: Loc::none(),
        }),
        _ => {
            let (name, arity) = *BUILTIN_RELATIONS.choose(rng).expect("non-empty");
            let args: Vec<Term> = (0..arity).map(|_| term(rng, ids, vars)).collect();
            let extra = if name == "closeTo" && rng.gen_bool(0.5) {
                vec![NumExpr::Const(ratio(rng.gen_range(0..=12), 2))]
            } else {
                Vec::new()
            };
            Formula::Atom(crate::logic::Atom {
                name: name.to_string(),
                args,
                extra,
                loc: Loc::none(),
            })
        }
    }
}

/// A closed formula of nesting depth at most `depth` over entity ids `ids`.
pub fn random_formula(rng: &mut TestRng, depth: usize, ids: &[String]) -> Formula {
    fn go(rng: &mut TestRng, depth: usize, ids: &[String], vars: &mut Vec<String>) -> Formula {
        if depth == 0 || rng.gen_bool(0.2) {
            return leaf(rng, ids, vars);
        }
        let d = depth - 1;
        match rng.gen_range(0..12) {
            0 => Formula::not(go(rng, d, ids, vars)),
            1 => Formula::and(go(rng, d, ids, vars), go(rng, d, ids, vars)),
            2 => Formula::or(go(rng, d, ids, vars), go(rng, d, ids, vars)),
            3 => Formula::implies(go(rng, d, ids, vars), go(rng, d, ids, vars)),
            4 => Formula::until(go(rng, d, ids, vars), go(rng, d, ids, vars)),
            5 => Formula::next(go(rng, d, ids, vars)),
            6 => Formula::always(go(rng, d, ids, vars)),
            7 => Formula::eventually(go(rng, d, ids, vars)),
            8 => Formula::before(go(rng, d, ids, vars)),
            k => {
                let var = format!("v{}", vars.len());
                let sort = *["Entity", "Object", "Container"].choose(rng).expect("non-empty");
                vars.push(var.clone());
                let body = go(rng, d, ids, vars);
                vars.pop();
                if k == 9 {
                    Formula::exists(&var, sort, body)
                } else {
                    Formula::forall(&var, sort, body)
                }
            }
        }
    }
    go(rng, depth, ids, &mut Vec::new())
}

/// A scenario with at most 4 entities and 6 states, and a formula of depth
/// at most 4 over it.
pub fn random_case(rng: &mut TestRng) -> (Scenario, Formula) {
    let sc = random_scenario(rng, 4, 6);
    let ids: Vec<String> = sc.entities.iter().map(|e| e.id.clone()).collect();
    let f = random_formula(rng, 4, &ids);
    (sc, f)
}

/// Integer-valued entity positions: a cheap way to get traces where many
/// relations are decided exactly.
pub fn grid_point(rng: &mut TestRng) -> (Rational, Rational) {
    (rat(rng.gen_range(-5..=5)), rat(rng.gen_range(-5..=5)))
}
