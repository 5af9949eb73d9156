//! Shipped primitives, schemas and example scenarios.

mod classify;

use std::sync::OnceLock;

pub use classify::{analogy, classify, find_bindings, BindingSearch, Classification, SchemaBinding};

use crate::dsl::{load_scenario, load_theory, parse_theory};
use crate::logic::{EvalError, MacroDef};
use crate::model::{Scenario, Theory};

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("unknown schema `{0}`")]
    UnknownSchema(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Theory files shipped with the library, as (file name, text).
pub const THEORY_FILES: &[(&str, &str)] = &[
    ("primitives.ist", include_str!("../../library/primitives.ist")),
    ("source_path_goal.ist", include_str!("../../library/source_path_goal.ist")),
    ("object_into_container.ist", include_str!("../../library/object_into_container.ist")),
    ("support.ist", include_str!("../../library/support.ist")),
    ("link.ist", include_str!("../../library/link.ist")),
    ("revolution.ist", include_str!("../../library/revolution.ist")),
    ("motion.ist", include_str!("../../library/motion.ist")),
    ("at_rest.ist", include_str!("../../library/at_rest.ist")),
];

/// Example scenarios and the containment theory used with `fig1`.
pub const EXAMPLE_FILES: &[(&str, &str)] = &[
    ("fig1.scn", include_str!("../../scenarios/fig1.scn")),
    ("containment.ist", include_str!("../../scenarios/containment.ist")),
    ("drop.scn", include_str!("../../scenarios/drop.scn")),
    ("ball_cup.scn", include_str!("../../scenarios/ball_cup.scn")),
    ("stack.scn", include_str!("../../scenarios/stack.scn")),
    ("path.scn", include_str!("../../scenarios/path.scn")),
    ("solar.scn", include_str!("../../scenarios/solar.scn")),
    ("atom.scn", include_str!("../../scenarios/atom.scn")),
];

/// Names accepted by [`schema_theory`], sorted.
pub const SCHEMA_NAMES: &[&str] = &[
    "AT_REST",
    "LINK",
    "MOTION",
    "OBJECT_INTO_CONTAINER",
    "REVOLUTION",
    "SOURCE_PATH_GOAL",
    "SUPPORT",
];

/// The primitive macros every schema and scenario may use.
pub fn prelude() -> &'static [MacroDef] {
    static PRELUDE: OnceLock<Vec<MacroDef>> = OnceLock::new();
    PRELUDE.get_or_init(|| {
        let (file, text) = THEORY_FILES[0];
        parse_theory(text, file)
            .unwrap_or_else(|d| panic!("shipped {file} is malformed:\n{d}"))
            .macros
    })
}

fn schema_file(name: &str) -> Option<(&'static str, &'static str)> {
    let file = match name {
        "SOURCE_PATH_GOAL" => "source_path_goal.ist",
        "OBJECT_INTO_CONTAINER" | "GOING_IN" => "object_into_container.ist",
        "SUPPORT" => "support.ist",
        "LINK" => "link.ist",
        "REVOLUTION" => "revolution.ist",
        "MOTION" => "motion.ist",
        "AT_REST" => "at_rest.ist",
        _ => return None,
    };
    THEORY_FILES.iter().find(|(f, _)| *f == file).copied()
}

pub fn schema_theory(name: &str) -> Result<Theory, LibraryError> {
    let (file, text) = schema_file(name).ok_or_else(|| LibraryError::UnknownSchema(name.to_string()))?;
    Ok(load_theory(text, file, prelude()).unwrap_or_else(|d| panic!("shipped {file} is malformed:\n{d}")))
}

/// Every shipped schema, in name order.
pub fn all_schemas() -> Vec<Theory> {
    SCHEMA_NAMES
        .iter()
        .map(|n| schema_theory(n).expect("listed schemas exist"))
        .collect()
}

/// SOURCE_PATH_GOAL over `n` waypoints (`n >= 2`): start at the first,
/// eventually reach each later one in turn, and never reach a waypoint
/// without having passed the one before it.
pub fn source_path_goal(n: usize) -> Theory {
    assert!(n >= 2, "a path needs at least two waypoints");
    let waypoints: Vec<String> = (1..=n).map(|i| format!("w{i}")).collect();
    let mut reach = format!("at(traveler, w{n})");
    for w in waypoints[1..n - 1].iter().rev() {
        reach = format!("at(traveler, {w}) and eventually {reach}");
    }
    let forward: Vec<String> = (2..=n)
        .map(|i| format!("always (at(traveler, w{i}) -> before at(traveler, w{}))", i - 1))
        .collect();
    let text = format!(
        "theory SOURCE_PATH_GOAL
  role traveler : Object
  role {} : Region
  param tau = 0.5
  macro at(x : Entity, y : Entity) := closeTo(x, y; tau)
  axiom at(traveler, w1) and eventually ({reach})
  axiom {}
end
",
        waypoints.join(", "),
        forward.join(" and ")
    );
    load_theory(&text, "<source_path_goal>", prelude()).expect("generated theory is well formed")
}

pub fn example_scenario(name: &str) -> Result<Scenario, LibraryError> {
    let file = format!("{name}.scn");
    let (_, text) = EXAMPLE_FILES
        .iter()
        .find(|(f, _)| *f == file)
        .ok_or_else(|| LibraryError::UnknownScenario(name.to_string()))?;
    Ok(load_scenario(text, &file, prelude()).unwrap_or_else(|d| panic!("shipped {file} is malformed:\n{d}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveKind {
    Entity,
    Relational,
    Attributive,
    ForceDynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Realization {
    Sort(&'static str),
    Builtin(&'static str),
    Macro(&'static str),
    RuleConstructor(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveDef {
    pub name: &'static str,
    pub kind: PrimitiveKind,
    pub realization: Realization,
    pub doc: &'static str,
}

const fn prim(name: &'static str, kind: PrimitiveKind, realization: Realization, doc: &'static str) -> PrimitiveDef {
    PrimitiveDef {
        name,
        kind,
        realization,
        doc,
    }
}

use PrimitiveKind::*;
use Realization::*;

const CATALOG: &[PrimitiveDef] = &[
    prim("OBJECT", Entity, Sort("Object"), "a body, at its simplest a point"),
    prim("CONTAINER", Entity, Sort("Container"), "any circle or rectangle that can hold things"),
    prim("PATH", Entity, Sort("Path"), "a segment from a start point to an end point"),
    prim("REGION", Entity, Sort("Region"), "an area; closeTo gives the distance-threshold reading"),
    prim("DOWN", Entity, Sort("Floor"), "the floor at the bottom of the scene, where gravity pulls"),
    prim("UP", Entity, Sort("Floor"), "away from the floor, against gravity"),
    prim("LOCATION", Relational, Builtin("closeTo"), "where something is; on and inside give the topological readings"),
    prim("START_PATH", Relational, Macro("START_PATH"), "an object at the first endpoint of a path"),
    prim("END_PATH", Relational, Macro("END_PATH"), "an object at the second endpoint of a path"),
    prim("CONTACT", Relational, Builtin("contact"), "boundaries touch"),
    prim("CONTAINED", Relational, Builtin("inside"), "strictly within a container"),
    prim("SMALLER", Relational, Builtin("smaller"), "smaller measure"),
    prim("LARGER", Relational, Builtin("larger"), "larger measure"),
    prim("PART_OF", Relational, Builtin("partOf"), "within, boundaries allowed to touch"),
    prim("PERMANENCE", Relational, RuleConstructor("inertia"), "unwritten parameters keep their value"),
    prim("OPEN", Attributive, Macro("OPEN"), "container attribute open = 1"),
    prim("CLOSED", Attributive, Macro("CLOSED"), "container attribute open = 0"),
    prim("EMPTY", Attributive, Macro("EMPTY"), "no object inside the container"),
    prim("OCCUPIED", Attributive, Macro("OCCUPIED"), "some object inside the container"),
    prim("FULL", Attributive, Macro("FULL"), "occupied, and no declared object outside still fits"),
    prim("MOTION", Attributive, Macro("MOTION"), "position differs at the next instant"),
    prim("AT_REST", Attributive, Macro("AT_REST"), "no motion"),
    prim("ANIMATE_MOTION", Attributive, Macro("ANIMATE_MOTION"), "motion driven by a force"),
    prim("INANIMATE_MOTION", Attributive, Macro("INANIMATE_MOTION"), "motion without a force, as in falling"),
    prim("LINK", ForceDynamic, Macro("LINK"), "two entities kept within distance tau"),
    prim("active-UMPH", ForceDynamic, RuleConstructor("umph active"), "a force pushing until a goal holds"),
    prim("passive-UMPH", ForceDynamic, RuleConstructor("umph passive"), "a force undergone until a goal holds"),
];

/// Every conceptual primitive and how it is realized.
pub fn primitive_catalog() -> &'static [PrimitiveDef] {
    CATALOG
}

pub fn lookup_primitive(name: &str) -> Option<&'static PrimitiveDef> {
    CATALOG.iter().find(|p| p.name == name)
}

/// The macro realizing a primitive, if it is one.
pub fn primitive_macro(name: &str) -> Option<&'static MacroDef> {
    match lookup_primitive(name)?.realization {
        Macro(m) => prelude().iter().find(|d| d.name == m),
        _ => None,
    }
}
