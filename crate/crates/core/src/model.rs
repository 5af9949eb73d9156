//! Order-sorted entities, parametric shapes, states, traces, scenarios and
//! theories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Signed;
use thiserror::Error;

use crate::dynamics::RuleSpec;
use crate::geometry::ConstraintAtom;
use crate::logic::{Formula, MacroDef};
use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate entity `{0}`")]
    DuplicateEntity(String),
    #[error("entity `{entity}`: shape {shape} is not admissible for sort {sort}")]
    BadShapeForSort {
        entity: String,
        shape: ShapeKind,
        sort: String,
    },
    #[error("entity `{entity}`: extent `{param}` must be positive")]
    NegativeExtent { entity: String, param: String },
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("sort hierarchy has a cycle through `{0}`")]
    SortCycle(String),
    #[error("sort `{sort}` declared with conflicting parents")]
    SortConflict { sort: String },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("entity `{entity}` has no parameter `{param}`")]
    UnknownParameter { entity: String, param: String },
    #[error("entity `{entity}`: shape {shape} takes {expected} parameters, got {got}")]
    ShapeArity {
        entity: String,
        shape: ShapeKind,
        expected: usize,
        got: usize,
    },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub const ENTITY: &str = "Entity";

/// Built-in sorts and their parents.
pub const BUILTIN_SORTS: &[(&str, Option<&str>)] = &[
    ("Entity", None),
    ("Object", Some("Entity")),
    ("Container", Some("Entity")),
    ("Path", Some("Entity")),
    ("Region", Some("Entity")),
    ("Floor", Some("Entity")),
    ("Circle", Some("Container")),
    ("Rectangle", Some("Container")),
];

/// Named attribute parameters an entity may carry besides its shape
/// parameters. `open` realizes OPEN/CLOSED as a 1/0 flag.
pub const ATTRIBUTES: &[&str] = &["open"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sort {
    pub name: String,
    pub parent: Option<String>,
}

impl Sort {
    pub fn new(name: impl Into<String>, parent: impl Into<String>) -> Self {
        Sort {
            name: name.into(),
            parent: Some(parent.into()),
        }
    }
}

/// A forest of sorts rooted at `Entity`, built-ins included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortHierarchy {
    parents: BTreeMap<String, Option<String>>,
}

impl Default for SortHierarchy {
    fn default() -> Self {
        Self::builtin()
    }
}

impl SortHierarchy {
    pub fn builtin() -> Self {
        SortHierarchy {
            parents: BUILTIN_SORTS
                .iter()
                .map(|(n, p)| (n.to_string(), p.map(str::to_string)))
                .collect(),
        }
    }

    pub fn with_sorts(sorts: &[Sort]) -> Result<Self, ModelError> {
        let mut h = Self::builtin();
        h.extend(sorts)?;
        Ok(h)
    }

    /// Adds user sorts. Redeclaring a sort with the same parent is a no-op;
    /// a different parent is a conflict. Sorts without a parent hang off `Entity`.
    pub fn extend(&mut self, sorts: &[Sort]) -> Result<(), ModelError> {
        let mut next = self.parents.clone();
        for s in sorts {
            let parent = Some(s.parent.clone().unwrap_or_else(|| ENTITY.to_string()));
            if s.name == ENTITY {
                return Err(ModelError::SortConflict {
                    sort: s.name.clone(),
                });
            }
            match next.get(&s.name) {
                Some(existing) if *existing != parent => {
                    return Err(ModelError::SortConflict {
                        sort: s.name.clone(),
                    })
                }
                _ => {
                    next.insert(s.name.clone(), parent);
                }
            }
        }
        for (name, parent) in &next {
            if let Some(p) = parent {
                if !next.contains_key(p) {
                    return Err(ModelError::UnknownSort(p.clone()));
                }
            }
            // Walk to the root; a walk longer than the sort count is a cycle.
            let mut cur = parent.clone();
            let mut steps = 0;
            while let Some(c) = cur {
                steps += 1;
                if steps > next.len() || &c == name {
                    return Err(ModelError::SortCycle(name.clone()));
                }
                cur = next.get(&c).cloned().flatten();
            }
        }
        self.parents = next;
        Ok(())
    }

    pub fn contains(&self, sort: &str) -> bool {
        self.parents.contains_key(sort)
    }

    pub fn parent(&self, sort: &str) -> Option<&str> {
        self.parents.get(sort).and_then(|p| p.as_deref())
    }

    pub fn sorts(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    /// Reflexive-transitive subsort test.
    pub fn is_subsort(&self, s: &str, t: &str) -> Result<bool, ModelError> {
        for x in [s, t] {
            if !self.contains(x) {
                return Err(ModelError::UnknownSort(x.to_string()));
            }
        }
        let mut cur = Some(s);
        while let Some(c) = cur {
            if c == t {
                return Ok(true);
            }
            cur = self.parent(c);
        }
        Ok(false)
    }

    /// Nearest built-in ancestor (the sort itself when built-in).
    pub fn builtin_base(&self, sort: &str) -> Result<&str, ModelError> {
        if !self.contains(sort) {
            return Err(ModelError::UnknownSort(sort.to_string()));
        }
        let mut cur = sort;
        loop {
            if let Some((b, _)) = BUILTIN_SORTS.iter().find(|(b, _)| *b == cur) {
                return Ok(b);
            }
            cur = self.parent(cur).unwrap_or(ENTITY);
        }
    }

    pub fn user_sorts(&self) -> Vec<Sort> {
        self.parents
            .iter()
            .filter(|(n, _)| !BUILTIN_SORTS.iter().any(|(b, _)| b == n))
            .map(|(n, p)| Sort {
                name: n.clone(),
                parent: p.clone(),
            })
            .collect()
    }
}

/// `s` ⊑ `t` under the built-ins extended with `hierarchy`.
pub fn subsort_of(s: &str, t: &str, hierarchy: &[Sort]) -> Result<bool, ModelError> {
    SortHierarchy::with_sorts(hierarchy)?.is_subsort(s, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShapeKind {
    Point,
    Circle,
    Rectangle,
    Segment,
    Floor,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Point,
        ShapeKind::Circle,
        ShapeKind::Rectangle,
        ShapeKind::Segment,
        ShapeKind::Floor,
    ];

    pub fn params(self) -> &'static [&'static str] {
        match self {
            ShapeKind::Point => &["x", "y"],
            ShapeKind::Circle => &["x", "y", "r"],
            ShapeKind::Rectangle => &["x", "y", "w", "h"],
            ShapeKind::Segment => &["x1", "y1", "x2", "y2"],
            ShapeKind::Floor => &["y"],
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ShapeKind::Point => "point",
            ShapeKind::Circle => "circle",
            ShapeKind::Rectangle => "rectangle",
            ShapeKind::Segment => "segment",
            ShapeKind::Floor => "floor",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ShapeKind> {
        ShapeKind::ALL.into_iter().find(|k| k.keyword() == s)
    }

    /// Extents that must stay strictly positive.
    pub fn extents(self) -> &'static [&'static str] {
        match self {
            ShapeKind::Circle => &["r"],
            ShapeKind::Rectangle => &["w", "h"],
            _ => &[],
        }
    }

    pub fn has_center(self) -> bool {
        matches!(
            self,
            ShapeKind::Point | ShapeKind::Circle | ShapeKind::Rectangle
        )
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Which shapes a sort may be realized by, decided by its nearest built-in ancestor.
pub fn shape_admissible(
    shape: ShapeKind,
    sort: &str,
    hierarchy: &SortHierarchy,
) -> Result<bool, ModelError> {
    use ShapeKind::*;
    Ok(match hierarchy.builtin_base(sort)? {
        "Object" | "Region" => matches!(shape, Point | Circle | Rectangle),
        "Container" => matches!(shape, Circle | Rectangle),
        "Circle" => shape == Circle,
        "Rectangle" => shape == Rectangle,
        "Path" => shape == Segment,
        "Floor" => shape == Floor,
        _ => true,
    })
}

/// Parameter names a term of `sort` may legally reference.
pub fn params_for_sort(sort: &str, hierarchy: &SortHierarchy) -> Result<BTreeSet<&'static str>, ModelError> {
    let mut out = BTreeSet::new();
    for shape in ShapeKind::ALL {
        if shape_admissible(shape, sort, hierarchy)? {
            out.extend(shape.params().iter().copied());
        }
    }
    out.extend(ATTRIBUTES.iter().copied());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityDecl {
    pub id: String,
    pub sort: String,
    pub shape: ShapeKind,
    /// Shape parameters in the shape's canonical order, then attributes.
    pub params: Vec<(String, Rational)>,
}

impl EntityDecl {
    pub fn new(
        id: impl Into<String>,
        sort: impl Into<String>,
        shape: ShapeKind,
        values: Vec<Rational>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if values.len() != shape.params().len() {
            return Err(ModelError::ShapeArity {
                entity: id,
                shape,
                expected: shape.params().len(),
                got: values.len(),
            });
        }
        Ok(EntityDecl {
            params: shape
                .params()
                .iter()
                .map(|p| p.to_string())
                .zip(values)
                .collect(),
            id,
            sort: sort.into(),
            shape,
        })
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: Rational) -> Self {
        self.params.push((name.into(), value));
        self
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|(p, _)| p == name)
    }

    pub fn attributes(&self) -> &[(String, Rational)] {
        &self.params[self.shape.params().len()..]
    }

    pub fn initial_values(&self) -> Vec<Rational> {
        self.params.iter().map(|(_, v)| v.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ForceMode {
    Active,
    Passive,
}

impl ForceMode {
    pub fn keyword(self) -> &'static str {
        match self {
            ForceMode::Active => "active",
            ForceMode::Passive => "passive",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "active" => Some(ForceMode::Active),
            "passive" => Some(ForceMode::Passive),
            _ => None,
        }
    }
}

/// A persistent per-step displacement acting on an entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ForceFluent {
    pub target: String,
    pub label: String,
    pub dx: Rational,
    pub dy: Rational,
    pub mode: ForceMode,
}

/// Sorts forces by (target, label) and keeps the last of duplicates.
pub fn canonical_forces(forces: &mut Vec<ForceFluent>) {
    forces.reverse();
    forces.sort_by(|a, b| (&a.target, &a.label).cmp(&(&b.target, &b.label)));
    forces.dedup_by(|a, b| a.target == b.target && a.label == b.label);
}

/// One instant: a value for every parameter of every entity, in declaration
/// order, plus the forces acting at that instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    pub time: usize,
    pub values: Vec<Vec<Rational>>,
    pub forces: Vec<ForceFluent>,
}

impl State {
    pub fn value(&self, entity: usize, param: usize) -> &Rational {
        &self.values[entity][param]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<State>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Checks time indices and that every state is total over `entities`.
    pub fn validate(&self, entities: &[EntityDecl]) -> Result<(), ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::InvalidTrace("a trace needs at least one state".into()));
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.time != i {
                return Err(ModelError::InvalidTrace(format!(
                    "state {i} carries time index {}",
                    s.time
                )));
            }
            if s.values.len() != entities.len() {
                return Err(ModelError::InvalidTrace(format!(
                    "state {i} has {} entities, expected {}",
                    s.values.len(),
                    entities.len()
                )));
            }
            for (e, vals) in entities.iter().zip(&s.values) {
                if vals.len() != e.params.len() {
                    return Err(ModelError::InvalidTrace(format!(
                        "state {i} is not total over the parameters of `{}`",
                        e.id
                    )));
                }
                check_extents(e, vals)?;
            }
            for f in &s.forces {
                if !entities.iter().any(|e| e.id == f.target) {
                    return Err(ModelError::UnknownEntity(f.target.clone()));
                }
            }
        }
        Ok(())
    }
}

fn check_extents(e: &EntityDecl, values: &[Rational]) -> Result<(), ModelError> {
    for ext in e.shape.extents() {
        let i = e.param_index(ext).expect("shape parameter");
        if !values[i].is_positive() {
            return Err(ModelError::NegativeExtent {
                entity: e.id.clone(),
                param: ext.to_string(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioBody {
    /// A concrete trace, for checking and classification.
    Concrete(Trace),
    /// Rules and a horizon, for simulation.
    Generative { rules: Vec<RuleSpec>, horizon: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub sorts: Vec<Sort>,
    pub entities: Vec<EntityDecl>,
    /// Forces acting in the initial state of a generative scenario.
    pub forces: Vec<ForceFluent>,
    pub body: ScenarioBody,
    hierarchy: SortHierarchy,
}

impl Scenario {
    /// Validates declarations and builds a scenario.
    pub fn declare(
        name: impl Into<String>,
        sorts: Vec<Sort>,
        entities: Vec<EntityDecl>,
        mut forces: Vec<ForceFluent>,
        body: ScenarioBody,
    ) -> Result<Self, ModelError> {
        let hierarchy = SortHierarchy::with_sorts(&sorts)?;
        let mut seen = BTreeSet::new();
        for e in &entities {
            if !seen.insert(e.id.as_str()) {
                return Err(ModelError::DuplicateEntity(e.id.clone()));
            }
            if !hierarchy.contains(&e.sort) {
                return Err(ModelError::UnknownSort(e.sort.clone()));
            }
            if !shape_admissible(e.shape, &e.sort, &hierarchy)? {
                return Err(ModelError::BadShapeForSort {
                    entity: e.id.clone(),
                    shape: e.shape,
                    sort: e.sort.clone(),
                });
            }
            let nshape = e.shape.params().len();
            if e.params.len() < nshape
                || e.params[..nshape]
                    .iter()
                    .zip(e.shape.params())
                    .any(|((p, _), q)| p != q)
            {
                return Err(ModelError::ShapeArity {
                    entity: e.id.clone(),
                    shape: e.shape,
                    expected: nshape,
                    got: e.params.len(),
                });
            }
            let mut attrs = BTreeSet::new();
            for (a, _) in e.attributes() {
                if !ATTRIBUTES.contains(&a.as_str()) || !attrs.insert(a.as_str()) {
                    return Err(ModelError::UnknownParameter {
                        entity: e.id.clone(),
                        param: a.clone(),
                    });
                }
            }
            check_extents(e, &e.initial_values())?;
        }
        for f in &forces {
            if !seen.contains(f.target.as_str()) {
                return Err(ModelError::UnknownEntity(f.target.clone()));
            }
        }
        canonical_forces(&mut forces);
        match &body {
            ScenarioBody::Concrete(trace) => trace.validate(&entities)?,
            ScenarioBody::Generative { horizon, .. } => {
                if *horizon == 0 {
                    return Err(ModelError::InvalidScenario("horizon must be at least 1".into()));
                }
            }
        }
        Ok(Scenario {
            name: name.into(),
            sorts,
            entities,
            forces,
            body,
            hierarchy,
        })
    }

    /// A concrete scenario over `trace`.
    pub fn with_trace(
        name: impl Into<String>,
        entities: Vec<EntityDecl>,
        trace: Trace,
    ) -> Result<Self, ModelError> {
        Self::declare(name, Vec::new(), entities, Vec::new(), ScenarioBody::Concrete(trace))
    }

    /// Rebuilds the same declarations around a different trace.
    pub fn replace_trace(&self, trace: Trace) -> Result<Self, ModelError> {
        Self::declare(
            self.name.clone(),
            self.sorts.clone(),
            self.entities.clone(),
            Vec::new(),
            ScenarioBody::Concrete(trace),
        )
    }

    pub fn hierarchy(&self) -> &SortHierarchy {
        &self.hierarchy
    }

    pub fn trace(&self) -> Option<&Trace> {
        match &self.body {
            ScenarioBody::Concrete(t) => Some(t),
            ScenarioBody::Generative { .. } => None,
        }
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }

    pub fn entity(&self, id: &str) -> Result<&EntityDecl, ModelError> {
        self.entities
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| ModelError::UnknownEntity(id.to_string()))
    }

    /// The state built from declared initial values (state 0 of a simulation).
    pub fn initial_state(&self) -> State {
        State {
            time: 0,
            values: self.entities.iter().map(EntityDecl::initial_values).collect(),
            forces: self.forces.clone(),
        }
    }

    /// Entities whose sort is a subsort of `sort`, in declaration order.
    pub fn domain(&self, sort: &str, hierarchy: &SortHierarchy) -> Result<Vec<usize>, ModelError> {
        let mut out = Vec::new();
        for (i, e) in self.entities.iter().enumerate() {
            if hierarchy.is_subsort(&e.sort, sort)? {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Every position coordinate shifted by (dx, dy); extents, attributes and
    /// forces are unchanged.
    pub fn translated(&self, dx: &Rational, dy: &Rational) -> Scenario {
        let shift = |e: &EntityDecl, vals: &mut [Rational]| {
            for (i, (p, _)) in e.params.iter().enumerate() {
                match p.as_str() {
                    "x" | "x1" | "x2" => vals[i] += dx,
                    "y" | "y1" | "y2" => vals[i] += dy,
                    _ => {}
                }
            }
        };
        let mut out = self.clone();
        for e in &mut out.entities {
            let mut vals = e.initial_values();
            shift(e, &mut vals);
            for ((_, v), nv) in e.params.iter_mut().zip(vals) {
                *v = nv;
            }
        }
        if let ScenarioBody::Concrete(trace) = &mut out.body {
            for s in &mut trace.states {
                for (e, vals) in self.entities.iter().zip(&mut s.values) {
                    shift(e, vals);
                }
            }
        }
        out
    }
}

/// Signature of a relation; `definition` is `None` for built-ins.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationSig {
    pub name: String,
    pub arg_sorts: Vec<String>,
    pub definition: Option<ConstraintAtom>,
}

/// A small theory: one image schema or one set of scenario constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Theory {
    pub name: String,
    pub sorts: Vec<Sort>,
    pub roles: Vec<(String, String)>,
    pub relations: Vec<RelationSig>,
    pub params: Vec<(String, Rational)>,
    pub macros: Vec<MacroDef>,
    /// Role pairs allowed to bind the same entity.
    pub aliases: Vec<(String, String)>,
    pub axioms: Vec<Formula>,
}

impl Theory {
    pub fn hierarchy(&self) -> Result<SortHierarchy, ModelError> {
        SortHierarchy::with_sorts(&self.sorts)
    }

    pub fn param(&self, name: &str) -> Option<&Rational> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn set_param(&mut self, name: &str, value: Rational) {
        match self.params.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = value,
            None => self.params.push((name.to_string(), value)),
        }
    }

    pub fn role_sort(&self, role: &str) -> Option<&str> {
        self.roles.iter().find(|(r, _)| r == role).map(|(_, s)| s.as_str())
    }

    pub fn relation(&self, name: &str) -> Option<&RelationSig> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn may_alias(&self, a: &str, b: &str) -> bool {
        self.aliases
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

impl fmt::Display for EntityDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {} = {}(", self.id, self.sort, self.shape)?;
        let n = self.shape.params().len();
        for (i, (_, v)) in self.params[..n].iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&format_rational(v))?;
        }
        f.write_str(")")
    }
}
