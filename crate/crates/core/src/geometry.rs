//! Spatial relations as polynomial constraints over object parameters,
//! evaluated exactly on rationals. The distance Δ, the angular position θ and
//! circle areas leave the rationals and are compared approximately.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{Scenario, ShapeKind, State};
use crate::rational::{exact_sqrt, to_f64, Num, Rational};
use crate::span::{Loc, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("entity `{entity}` has no parameter `{param}`")]
    UnknownParameter { entity: String, param: String },
    #[error("unknown numeric parameter `{0}`")]
    UnknownNumber(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` expects {expected} arguments, got {got}")]
    Arity {
        relation: String,
        expected: usize,
        got: usize,
    },
    #[error("relation `{relation}` is not defined between {a} and {b}")]
    UnsupportedShapePair {
        relation: String,
        a: ShapeKind,
        b: ShapeKind,
    },
    #[error("`{0}` has no center")]
    NoCenter(String),
    #[error("angular position undefined: `{0}` and `{1}` share a center")]
    CoincidentCenters(String, String),
    #[error("`{0}` is not measurable")]
    NotMeasurable(String),
    #[error("no state after the final one")]
    BeyondFinalState,
}

/// Tolerance ε for coincidence relations and the default closeTo threshold τ.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub eps: f64,
    pub tau: Rational,
}

pub const DEFAULT_EPS: f64 = 1e-9;

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps: DEFAULT_EPS,
            tau: Rational::new(1.into(), 2.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Cmp {
    pub const ALL: [Cmp; 6] = [Cmp::Lt, Cmp::Le, Cmp::Eq, Cmp::Ne, Cmp::Ge, Cmp::Gt];

    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }

    pub fn holds(self, lhs: &Num, rhs: &Num, eps: f64) -> bool {
        match self {
            Cmp::Eq => lhs.eq_within(rhs, eps),
            Cmp::Ne => !lhs.eq_within(rhs, eps),
            _ => match lhs.partial_cmp_num(rhs) {
                None => false,
                Some(o) => match self {
                    Cmp::Lt => o == Ordering::Less,
                    Cmp::Le => o != Ordering::Greater,
                    Cmp::Ge => o != Ordering::Less,
                    Cmp::Gt => o == Ordering::Greater,
                    Cmp::Eq | Cmp::Ne => unreachable!(),
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumExpr {
    Const(Rational),
    /// `entity.param`
    Param { entity: Term, param: String },
    /// A theory parameter or macro numeric argument.
    Named(String, Loc),
    Add(Box<NumExpr>, Box<NumExpr>),
    Sub(Box<NumExpr>, Box<NumExpr>),
    Mul(Box<NumExpr>, Box<NumExpr>),
    Neg(Box<NumExpr>),
    Delta(Term, Term),
    Theta(Term, Term),
    Measure(Term),
    /// Signed vertical step of a falling body: −min(step, free gap below).
    Drop(Term, Box<NumExpr>),
    /// Value of the inner expression at the next instant.
    Next(Box<NumExpr>),
}

impl NumExpr {
    pub fn constant(v: Rational) -> Self {
        NumExpr::Const(v)
    }

    pub fn param(entity: &str, param: &str) -> Self {
        NumExpr::Param {
            entity: Term::new(entity),
            param: param.to_string(),
        }
    }

    pub fn named(name: &str) -> Self {
        NumExpr::Named(name.to_string(), Loc::none())
    }

    /// Whether evaluation looks past the current state.
    pub fn uses_next(&self) -> bool {
        match self {
            NumExpr::Next(_) => true,
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) => {
                a.uses_next() || b.uses_next()
            }
            NumExpr::Neg(a) | NumExpr::Drop(_, a) => a.uses_next(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintAtom {
    pub lhs: NumExpr,
    pub cmp: Cmp,
    pub rhs: NumExpr,
    pub loc: Loc,
}

impl ConstraintAtom {
    pub fn new(lhs: NumExpr, cmp: Cmp, rhs: NumExpr) -> Self {
        ConstraintAtom {
            lhs,
            cmp,
            rhs,
            loc: Loc::none(),
        }
    }
}

/// Resolution of the symbols a numeric expression may mention.
pub trait Symbols {
    fn entity(&self, name: &str) -> Option<usize>;
    fn number(&self, name: &str) -> Option<Num>;
}

/// A scenario together with the states being evaluated.
#[derive(Clone, Copy)]
pub struct Scene<'a> {
    pub scenario: &'a Scenario,
    pub states: &'a [State],
}

impl<'a> Scene<'a> {
    pub fn new(scenario: &'a Scenario, states: &'a [State]) -> Self {
        Scene { scenario, states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn id(&self, e: usize) -> &str {
        &self.scenario.entities[e].id
    }

    pub fn shape(&self, e: usize) -> ShapeKind {
        self.scenario.entities[e].shape
    }

    pub fn geom(&self, e: usize, t: usize) -> Geom {
        Geom::from_values(self.shape(e), &self.states[t].values[e])
    }

    pub fn lookup(&self, name: &str) -> Result<usize, GeometryError> {
        self.scenario
            .entity_index(name)
            .ok_or_else(|| GeometryError::UnknownEntity(name.to_string()))
    }
}

type R = Rational;

/// Concrete geometry of an entity at one instant.
#[derive(Debug, Clone, PartialEq)]
pub enum Geom {
    Point { x: R, y: R },
    Circle { x: R, y: R, r: R },
    Rect { x: R, y: R, w: R, h: R },
    Segment { x1: R, y1: R, x2: R, y2: R },
    Floor { y: R },
}

fn half(v: &R) -> R {
    v / R::from_integer(2.into())
}

fn sq(v: &R) -> R {
    v * v
}

fn max_r(a: R, b: R) -> R {
    if a >= b {
        a
    } else {
        b
    }
}

fn min_r(a: R, b: R) -> R {
    if a <= b {
        a
    } else {
        b
    }
}

impl Geom {
    pub fn from_values(shape: ShapeKind, v: &[R]) -> Geom {
        let g = |i: usize| v[i].clone();
        match shape {
            ShapeKind::Point => Geom::Point { x: g(0), y: g(1) },
            ShapeKind::Circle => Geom::Circle {
                x: g(0),
                y: g(1),
                r: g(2),
            },
            ShapeKind::Rectangle => Geom::Rect {
                x: g(0),
                y: g(1),
                w: g(2),
                h: g(3),
            },
            ShapeKind::Segment => Geom::Segment {
                x1: g(0),
                y1: g(1),
                x2: g(2),
                y2: g(3),
            },
            ShapeKind::Floor => Geom::Floor { y: g(0) },
        }
    }

    pub fn kind(&self) -> ShapeKind {
        match self {
            Geom::Point { .. } => ShapeKind::Point,
            Geom::Circle { .. } => ShapeKind::Circle,
            Geom::Rect { .. } => ShapeKind::Rectangle,
            Geom::Segment { .. } => ShapeKind::Segment,
            Geom::Floor { .. } => ShapeKind::Floor,
        }
    }

    pub fn center(&self) -> Option<(R, R)> {
        match self {
            Geom::Point { x, y } | Geom::Circle { x, y, .. } | Geom::Rect { x, y, .. } => {
                Some((x.clone(), y.clone()))
            }
            _ => None,
        }
    }

    pub fn bottom(&self) -> R {
        match self {
            Geom::Point { y, .. } | Geom::Floor { y } => y.clone(),
            Geom::Circle { y, r, .. } => y - r,
            Geom::Rect { y, h, .. } => y - half(h),
            Geom::Segment { y1, y2, .. } => min_r(y1.clone(), y2.clone()),
        }
    }

    pub fn top(&self) -> R {
        match self {
            Geom::Point { y, .. } | Geom::Floor { y } => y.clone(),
            Geom::Circle { y, r, .. } => y + r,
            Geom::Rect { y, h, .. } => y + half(h),
            Geom::Segment { y1, y2, .. } => max_r(y1.clone(), y2.clone()),
        }
    }

    /// Horizontal extent; `None` for the unbounded floor.
    pub fn x_interval(&self) -> Option<(R, R)> {
        match self {
            Geom::Point { x, .. } => Some((x.clone(), x.clone())),
            Geom::Circle { x, r, .. } => Some((x - r, x + r)),
            Geom::Rect { x, w, .. } => Some((x - half(w), x + half(w))),
            Geom::Segment { x1, x2, .. } => {
                Some((min_r(x1.clone(), x2.clone()), max_r(x1.clone(), x2.clone())))
            }
            Geom::Floor { .. } => None,
        }
    }

    pub fn area(&self) -> Option<Area> {
        match self {
            Geom::Point { .. } | Geom::Segment { .. } => Some(Area::default()),
            Geom::Circle { r, .. } => Some(Area {
                rational: R::zero(),
                pi: sq(r),
            }),
            Geom::Rect { w, h, .. } => Some(Area {
                rational: w * h,
                pi: R::zero(),
            }),
            Geom::Floor { .. } => None,
        }
    }

    fn is_region(&self) -> bool {
        matches!(self, Geom::Circle { .. } | Geom::Rect { .. })
    }

    fn rank(&self) -> u8 {
        match self {
            Geom::Point { .. } => 0,
            Geom::Circle { .. } => 1,
            Geom::Rect { .. } => 2,
            Geom::Segment { .. } => 3,
            Geom::Floor { .. } => 4,
        }
    }
}

/// An area `rational + pi·π`, kept symbolic so circle/circle and
/// rectangle/rectangle comparisons stay exact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Area {
    pub rational: R,
    pub pi: R,
}

impl Area {
    pub fn add(&self, o: &Area) -> Area {
        Area {
            rational: &self.rational + &o.rational,
            pi: &self.pi + &o.pi,
        }
    }

    pub fn to_num(&self) -> Num {
        if self.pi.is_zero() {
            Num::Exact(self.rational.clone())
        } else {
            Num::Approx(to_f64(&self.rational) + to_f64(&self.pi) * PI)
        }
    }

    pub fn compare(&self, o: &Area) -> Ordering {
        let r = &self.rational - &o.rational;
        let p = &self.pi - &o.pi;
        if p.is_zero() {
            return r.cmp(&R::zero());
        }
        if r.is_zero() || r.signum() == p.signum() {
            return p.cmp(&R::zero());
        }
        (to_f64(&r) + to_f64(&p) * PI)
            .partial_cmp(&0.0)
            .unwrap_or(Ordering::Equal)
    }
}

fn dist2_points(ax: &R, ay: &R, bx: &R, by: &R) -> R {
    sq(&(ax - bx)) + sq(&(ay - by))
}

fn dist2_point_segment(px: &R, py: &R, x1: &R, y1: &R, x2: &R, y2: &R) -> R {
    let dx = x2 - x1;
    let dy = y2 - y1;
    let len2 = sq(&dx) + sq(&dy);
    if len2.is_zero() {
        return dist2_points(px, py, x1, y1);
    }
    let t = ((px - x1) * &dx + (py - y1) * &dy) / &len2;
    let t = max_r(R::zero(), min_r(R::from_integer(1.into()), t));
    let cx = x1 + &t * &dx;
    let cy = y1 + &t * &dy;
    dist2_points(px, py, &cx, &cy)
}

fn dist2_point_box(px: &R, py: &R, x: &R, y: &R, w: &R, h: &R) -> R {
    let ex = max_r(R::zero(), (px - x).abs() - half(w));
    let ey = max_r(R::zero(), (py - y).abs() - half(h));
    sq(&ex) + sq(&ey)
}

fn orient(ax: &R, ay: &R, bx: &R, by: &R, cx: &R, cy: &R) -> i8 {
    let v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    if v.is_zero() {
        0
    } else if v.is_positive() {
        1
    } else {
        -1
    }
}

fn on_segment_bbox(ax: &R, ay: &R, bx: &R, by: &R, px: &R, py: &R) -> bool {
    min_r(ax.clone(), bx.clone()) <= *px
        && *px <= max_r(ax.clone(), bx.clone())
        && min_r(ay.clone(), by.clone()) <= *py
        && *py <= max_r(ay.clone(), by.clone())
}

type Seg<'a> = (&'a R, &'a R, &'a R, &'a R);

fn segments_intersect(s: Seg, t: Seg) -> bool {
    let (ax, ay, bx, by) = s;
    let (cx, cy, dx, dy) = t;
    let o1 = orient(ax, ay, bx, by, cx, cy);
    let o2 = orient(ax, ay, bx, by, dx, dy);
    let o3 = orient(cx, cy, dx, dy, ax, ay);
    let o4 = orient(cx, cy, dx, dy, bx, by);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment_bbox(ax, ay, bx, by, cx, cy))
        || (o2 == 0 && on_segment_bbox(ax, ay, bx, by, dx, dy))
        || (o3 == 0 && on_segment_bbox(cx, cy, dx, dy, ax, ay))
        || (o4 == 0 && on_segment_bbox(cx, cy, dx, dy, bx, by))
}

/// Whether the segment meets the box; `open` asks about the box interior.
fn segment_meets_box(s: Seg, x: &R, y: &R, w: &R, h: &R, open: bool) -> bool {
    let (x1, y1, x2, y2) = s;
    let (xmin, xmax) = (x - half(w), x + half(w));
    let (ymin, ymax) = (y - half(h), y + half(h));
    let dx = x2 - x1;
    let dy = y2 - y1;
    // Constraints a + b·t ≥ 0 (> 0 when open) over t ∈ [0, 1].
    let cons = [
        (x1 - &xmin, dx.clone()),
        (&xmax - x1, -dx.clone()),
        (y1 - &ymin, dy.clone()),
        (&ymax - y1, -dy.clone()),
    ];
    let (mut lo, mut lo_strict) = (R::zero(), false);
    let (mut hi, mut hi_strict) = (R::from_integer(1.into()), false);
    for (a, b) in cons {
        if b.is_zero() {
            if a.is_negative() || (open && a.is_zero()) {
                return false;
            }
            continue;
        }
        let bound = -&a / &b;
        if b.is_positive() {
            if bound > lo || (bound == lo && open) {
                lo_strict = open;
                lo = bound;
            }
        } else if bound < hi || (bound == hi && open) {
            hi_strict = open;
            hi = bound;
        }
    }
    lo < hi || (lo == hi && !lo_strict && !hi_strict)
}

fn dist2_segments(s: Seg, t: Seg) -> R {
    if segments_intersect(s, t) {
        return R::zero();
    }
    let (ax, ay, bx, by) = s;
    let (cx, cy, dx, dy) = t;
    [
        dist2_point_segment(ax, ay, cx, cy, dx, dy),
        dist2_point_segment(bx, by, cx, cy, dx, dy),
        dist2_point_segment(cx, cy, ax, ay, bx, by),
        dist2_point_segment(dx, dy, ax, ay, bx, by),
    ]
    .into_iter()
    .reduce(min_r)
    .expect("four candidates")
}

/// Squared Δ: center to center, or nearest point of a segment/floor to the
/// other's center.
pub fn dist2(a: &Geom, b: &Geom) -> R {
    match (a.center(), b.center()) {
        (Some((ax, ay)), Some((bx, by))) => dist2_points(&ax, &ay, &bx, &by),
        (Some((px, py)), None) => dist2_center_to(&px, &py, b),
        (None, Some((px, py))) => dist2_center_to(&px, &py, a),
        (None, None) => match (a, b) {
            (Geom::Floor { y: f }, Geom::Floor { y: g }) => sq(&(f - g)),
            (Geom::Segment { x1, y1, x2, y2 }, Geom::Segment { .. }) => {
                let Geom::Segment {
                    x1: u1,
                    y1: v1,
                    x2: u2,
                    y2: v2,
                } = b
                else {
                    unreachable!()
                };
                dist2_segments((x1, y1, x2, y2), (u1, v1, u2, v2))
            }
            (Geom::Segment { y1, y2, .. }, Geom::Floor { y })
            | (Geom::Floor { y }, Geom::Segment { y1, y2, .. }) => {
                let lo = min_r(y1.clone(), y2.clone());
                let hi = max_r(y1.clone(), y2.clone());
                if lo <= *y && *y <= hi {
                    R::zero()
                } else {
                    min_r(sq(&(&lo - y)), sq(&(&hi - y)))
                }
            }
            _ => unreachable!("center-less shapes are segments and floors"),
        },
    }
}

fn dist2_center_to(px: &R, py: &R, g: &Geom) -> R {
    match g {
        Geom::Segment { x1, y1, x2, y2 } => dist2_point_segment(px, py, x1, y1, x2, y2),
        Geom::Floor { y } => sq(&(py - y)),
        _ => unreachable!(),
    }
}

fn sqrt_num(d2: &R) -> Num {
    match exact_sqrt(d2) {
        Some(r) => Num::Exact(r),
        None => Num::Approx(to_f64(d2).sqrt()),
    }
}

fn eps_rat(eps: f64) -> R {
    R::from_float(eps.max(0.0)).unwrap_or_else(R::zero)
}

/// |√d2 − target| ≤ eps, decided exactly.
fn near(d2: &R, target: &R, eps: f64) -> bool {
    let e = eps_rat(eps);
    let hi = target + &e;
    if hi.is_negative() || *d2 > sq(&hi) {
        return false;
    }
    let lo = target - &e;
    !(lo.is_positive() && *d2 < sq(&lo))
}

fn abs_le(v: &R, eps: f64) -> bool {
    v.abs() <= eps_rat(eps)
}

fn box_of(g: &Geom) -> Option<(R, R, R, R)> {
    match g {
        Geom::Point { x, y } => Some((x.clone(), y.clone(), R::zero(), R::zero())),
        Geom::Rect { x, y, w, h } => Some((x.clone(), y.clone(), w.clone(), h.clone())),
        _ => None,
    }
}

fn point_in(px: &R, py: &R, region: &Geom, strict: bool) -> bool {
    let lt = |a: &R, b: &R| if strict { a < b } else { a <= b };
    match region {
        Geom::Circle { x, y, r } => lt(&dist2_points(px, py, x, y), &sq(r)),
        Geom::Rect { x, y, w, h } => {
            lt(&(px - x).abs(), &half(w)) && lt(&(py - y).abs(), &half(h))
        }
        _ => false,
    }
}

/// Containment; `strict` = inside, non-strict = partOf.
pub fn contained(a: &Geom, b: &Geom, strict: bool) -> bool {
    if !b.is_region() {
        return false;
    }
    let lt = |p: &R, q: &R| if strict { p < q } else { p <= q };
    match (a, b) {
        (Geom::Point { x, y }, _) => point_in(x, y, b, strict),
        (Geom::Circle { x, y, r }, Geom::Circle { x: cx, y: cy, r: cr }) => {
            lt(r, cr) && dist2_points(x, y, cx, cy) <= sq(&(cr - r))
        }
        (Geom::Circle { x, y, r }, Geom::Rect { x: bx, y: by, w, h }) => {
            let d = r + r;
            lt(&d, w) && lt(&d, h) && (x - bx).abs() <= half(w) - r && (y - by).abs() <= half(h) - r
        }
        (Geom::Rect { x, y, w, h }, Geom::Rect { x: bx, y: by, w: bw, h: bh }) => {
            lt(w, bw)
                && lt(h, bh)
                && (x - bx).abs() <= half(&(bw - w))
                && (y - by).abs() <= half(&(bh - h))
        }
        (Geom::Rect { x, y, w, h }, Geom::Circle { x: cx, y: cy, r }) => {
            let r2 = sq(r);
            let (hw, hh) = (half(w), half(h));
            let corners = [
                (hw.clone(), hh.clone()),
                (hw.clone(), -hh.clone()),
                (-hw.clone(), hh.clone()),
                (-hw, -hh),
            ];
            corners
                .iter()
                .all(|(ox, oy)| dist2_points(&(x + ox), &(y + oy), cx, cy) <= r2)
        }
        (Geom::Segment { x1, y1, x2, y2 }, _) => {
            point_in(x1, y1, b, strict) && point_in(x2, y2, b, strict)
        }
        _ => false,
    }
}

/// Boundary contact within `eps`.
pub fn contact(a: &Geom, b: &Geom, eps: f64) -> bool {
    let (a, b) = if a.rank() <= b.rank() { (a, b) } else { (b, a) };
    match (a, b) {
        (Geom::Floor { y: f }, Geom::Floor { y: g }) => abs_le(&(f - g), eps),
        (_, Geom::Floor { y }) => abs_le(&(a.bottom() - y), eps),
        (Geom::Point { x, y }, Geom::Point { x: u, y: v }) => near(&dist2_points(x, y, u, v), &R::zero(), eps),
        (Geom::Point { x, y }, Geom::Circle { x: u, y: v, r }) => near(&dist2_points(x, y, u, v), r, eps),
        (Geom::Circle { x, y, r }, Geom::Circle { x: u, y: v, r: s }) => {
            near(&dist2_points(x, y, u, v), &(r + s), eps)
        }
        (Geom::Circle { x, y, r }, Geom::Rect { x: bx, y: by, w, h }) => {
            near(&dist2_point_box(x, y, bx, by, w, h), r, eps)
        }
        (Geom::Point { .. } | Geom::Rect { .. }, Geom::Rect { .. }) => {
            let (ax, ay, aw, ah) = box_of(a).expect("box");
            let (bx, by, bw, bh) = box_of(b).expect("box");
            let gx = (&ax - &bx).abs() - half(&(&aw + &bw));
            let gy = (&ay - &by).abs() - half(&(&ah + &bh));
            abs_le(&max_r(gx, gy), eps)
        }
        (Geom::Point { x, y }, Geom::Segment { x1, y1, x2, y2 }) => {
            near(&dist2_point_segment(x, y, x1, y1, x2, y2), &R::zero(), eps)
        }
        (Geom::Circle { x, y, r }, Geom::Segment { x1, y1, x2, y2 }) => {
            near(&dist2_point_segment(x, y, x1, y1, x2, y2), r, eps)
        }
        (Geom::Rect { x, y, w, h }, Geom::Segment { x1, y1, x2, y2 }) => {
            let s = (x1, y1, x2, y2);
            segment_meets_box(s, x, y, w, h, false) && !segment_meets_box(s, x, y, w, h, true)
        }
        (Geom::Segment { x1, y1, x2, y2 }, Geom::Segment { x1: u1, y1: v1, x2: u2, y2: v2 }) => {
            segments_intersect((x1, y1, x2, y2), (u1, v1, u2, v2))
        }
        _ => unreachable!("pairs are ordered by rank"),
    }
}

/// Interiors meet without containment either way.
pub fn overlaps(a: &Geom, b: &Geom) -> bool {
    let (a, b) = if a.rank() <= b.rank() { (a, b) } else { (b, a) };
    let meets = match (a, b) {
        (Geom::Circle { x, y, r }, Geom::Circle { x: u, y: v, r: s }) => {
            dist2_points(x, y, u, v) < sq(&(r + s))
        }
        (Geom::Circle { x, y, r }, Geom::Rect { x: bx, y: by, w, h }) => {
            dist2_point_box(x, y, bx, by, w, h) < sq(r)
        }
        (Geom::Rect { x, y, w, h }, Geom::Rect { x: u, y: v, w: bw, h: bh }) => {
            (x - u).abs() < half(&(w + bw)) && (y - v).abs() < half(&(h + bh))
        }
        (Geom::Circle { x, y, r }, Geom::Segment { x1, y1, x2, y2 }) => {
            dist2_point_segment(x, y, x1, y1, x2, y2) < sq(r)
        }
        (Geom::Rect { x, y, w, h }, Geom::Segment { x1, y1, x2, y2 }) => {
            segment_meets_box((x1, y1, x2, y2), x, y, w, h, true)
        }
        (Geom::Circle { y, r, .. }, Geom::Floor { y: f }) => (y - f).abs() < *r,
        (Geom::Rect { y, h, .. }, Geom::Floor { y: f }) => (y - f).abs() < half(h),
        (Geom::Segment { .. }, Geom::Floor { y }) => a.bottom() < *y && *y < a.top(),
        _ => false,
    };
    meets && !contained(a, b, true) && !contained(b, a, true)
}

fn x_overlap(a: &Geom, b: &Geom) -> bool {
    match (a.x_interval(), b.x_interval()) {
        (Some((a0, a1)), Some((b0, b1))) => a0 <= b1 && b0 <= a1,
        _ => true,
    }
}

/// `a` rests on `b`: contact, `a` above, horizontal overlap.
pub fn on(a: &Geom, b: &Geom, eps: f64) -> bool {
    contact(a, b, eps) && a.bottom() >= b.top() - eps_rat(eps) && x_overlap(a, b)
}

pub fn disjoint(a: &Geom, b: &Geom, eps: f64) -> bool {
    !contained(a, b, true) && !contained(b, a, true) && !contact(a, b, eps) && !overlaps(a, b)
}

/// Euclidean distance Δ between two entities at instant `t`.
pub fn distance(scene: &Scene, t: usize, a: usize, b: usize) -> Num {
    sqrt_num(&dist2(&scene.geom(a, t), &scene.geom(b, t)))
}

/// Angle of the vector from `y`'s center to `x`'s center, in (−π, π].
pub fn angular_position(scene: &Scene, t: usize, x: usize, y: usize) -> Result<f64, GeometryError> {
    let (xc, yc) = centers(scene, t, x, y)?;
    if xc == yc {
        return Err(GeometryError::CoincidentCenters(
            scene.id(x).to_string(),
            scene.id(y).to_string(),
        ));
    }
    let dx = to_f64(&(&xc.0 - &yc.0));
    let dy = to_f64(&(&xc.1 - &yc.1));
    let a = dy.atan2(dx);
    Ok(if a <= -PI { PI } else { a })
}

fn centers(scene: &Scene, t: usize, x: usize, y: usize) -> Result<((R, R), (R, R)), GeometryError> {
    let cx = scene
        .geom(x, t)
        .center()
        .ok_or_else(|| GeometryError::NoCenter(scene.id(x).to_string()))?;
    let cy = scene
        .geom(y, t)
        .center()
        .ok_or_else(|| GeometryError::NoCenter(scene.id(y).to_string()))?;
    Ok((cx, cy))
}

/// Area: 0 for points and segments, πr² for circles, w·h for rectangles.
pub fn measure(scene: &Scene, t: usize, e: usize) -> Result<Num, GeometryError> {
    scene
        .geom(e, t)
        .area()
        .map(|a| a.to_num())
        .ok_or_else(|| GeometryError::NotMeasurable(scene.id(e).to_string()))
}

fn area_of(scene: &Scene, t: usize, e: usize) -> Result<Area, GeometryError> {
    scene
        .geom(e, t)
        .area()
        .ok_or_else(|| GeometryError::NotMeasurable(scene.id(e).to_string()))
}

/// How far a body falls in one step: −min(step, gap to the highest surface
/// directly beneath). Floors and segments do not fall.
pub fn fall_step(scene: &Scene, t: usize, e: usize, step: &R) -> R {
    let g = scene.geom(e, t);
    if matches!(g, Geom::Floor { .. } | Geom::Segment { .. }) {
        return R::zero();
    }
    let bottom = g.bottom();
    let support = (0..scene.scenario.entities.len())
        .filter(|&o| o != e)
        .map(|o| scene.geom(o, t))
        .filter(|o| x_overlap(&g, o) && o.top() <= bottom)
        .map(|o| o.top())
        .reduce(max_r);
    let gap = match support {
        Some(top) => &bottom - top,
        None => step.clone(),
    };
    -min_r(step.clone(), gap)
}

/// Built-in relations: (name, arity). `moves` and `ccwStep` read the next
/// instant as well and are false at the final state.
pub const BUILTIN_RELATIONS: &[(&str, usize)] = &[
    ("inside", 2),
    ("partOf", 2),
    ("contact", 2),
    ("on", 2),
    ("overlaps", 2),
    ("disjoint", 2),
    ("closeTo", 2),
    ("smaller", 2),
    ("larger", 2),
    ("fits", 2),
    ("moves", 1),
    ("ccwStep", 2),
    ("forced", 1),
    ("scenery", 1),
];

pub fn builtin_arity(name: &str) -> Option<usize> {
    BUILTIN_RELATIONS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, a)| *a)
}

/// Whether the relation reads the instant after the current one.
pub fn is_step_relation(name: &str) -> bool {
    matches!(name, "moves" | "ccwStep")
}

/// Truth of a built-in relation over entity indices at instant `t`.
/// `extra` carries trailing numeric arguments (the threshold of `closeTo`).
pub fn eval_relation(
    name: &str,
    args: &[usize],
    extra: &[Num],
    scene: &Scene,
    t: usize,
    tol: &Tolerances,
) -> Result<bool, GeometryError> {
    let arity = builtin_arity(name).ok_or_else(|| GeometryError::UnknownRelation(name.to_string()))?;
    if args.len() != arity {
        return Err(GeometryError::Arity {
            relation: name.to_string(),
            expected: arity,
            got: args.len(),
        });
    }
    let eps = tol.eps;
    let g = |i: usize| scene.geom(args[i], t);
    Ok(match name {
        "inside" => contained(&g(0), &g(1), true),
        "partOf" => contained(&g(0), &g(1), false),
        "contact" => contact(&g(0), &g(1), eps),
        "on" => args[0] != args[1] && on(&g(0), &g(1), eps),
        "overlaps" => overlaps(&g(0), &g(1)),
        "disjoint" => disjoint(&g(0), &g(1), eps),
        "closeTo" => {
            let d2 = dist2(&g(0), &g(1));
            match extra.first().cloned().unwrap_or_else(|| Num::Exact(tol.tau.clone())) {
                Num::Exact(tau) => !tau.is_negative() && d2 <= sq(&tau),
                Num::Approx(tau) => to_f64(&d2).sqrt() <= tau,
            }
        }
        "smaller" => area_of(scene, t, args[0])?.compare(&area_of(scene, t, args[1])?) == Ordering::Less,
        "larger" => area_of(scene, t, args[0])?.compare(&area_of(scene, t, args[1])?) == Ordering::Greater,
        "fits" => fits(scene, t, args[0], args[1])?,
        "moves" => {
            if t + 1 >= scene.len() {
                return Ok(false);
            }
            let n = scene.shape(args[0]).params().len();
            scene.states[t].values[args[0]][..n] != scene.states[t + 1].values[args[0]][..n]
        }
        "ccwStep" => {
            if t + 1 >= scene.len() {
                return Ok(false);
            }
            let (p0, c0) = centers(scene, t, args[0], args[1])?;
            let (p1, c1) = centers(scene, t + 1, args[0], args[1])?;
            let (ux, uy) = (&p0.0 - &c0.0, &p0.1 - &c0.1);
            let (vx, vy) = (&p1.0 - &c1.0, &p1.1 - &c1.1);
            (ux * vy - uy * vx).is_positive()
        }
        "forced" => {
            let id = scene.id(args[0]);
            scene.states[t].forces.iter().any(|f| f.target == id)
        }
        "scenery" => matches!(scene.shape(args[0]), ShapeKind::Floor | ShapeKind::Segment),
        _ => unreachable!(),
    })
}

/// `o` is not inside `c` and its area still fits beside what `c` already holds.
fn fits(scene: &Scene, t: usize, o: usize, c: usize) -> Result<bool, GeometryError> {
    let container = scene.geom(c, t);
    let body = scene.geom(o, t);
    if !container.is_region() || o == c || contained(&body, &container, true) {
        return Ok(false);
    }
    let mut used = area_of(scene, t, o)?;
    for e in 0..scene.scenario.entities.len() {
        if e == o || e == c {
            continue;
        }
        let other = scene.geom(e, t);
        if contained(&other, &container, true) {
            used = used.add(&area_of(scene, t, e)?);
        }
    }
    Ok(used.compare(&area_of(scene, t, c)?) != Ordering::Greater)
}

fn resolve(term: &Term, scene: &Scene, syms: &dyn Symbols) -> Result<usize, GeometryError> {
    syms.entity(&term.name)
        .ok_or_else(|| GeometryError::UnknownEntity(term.name.clone()))
        .or_else(|_| scene.lookup(&term.name))
}

/// Value of `e` at instant `t` by substitution and folding.
pub fn eval_num_expr(
    e: &NumExpr,
    scene: &Scene,
    t: usize,
    syms: &dyn Symbols,
) -> Result<Num, GeometryError> {
    let ev = |x: &NumExpr| eval_num_expr(x, scene, t, syms);
    Ok(match e {
        NumExpr::Const(v) => Num::Exact(v.clone()),
        NumExpr::Param { entity, param } => {
            let idx = resolve(entity, scene, syms)?;
            let decl = &scene.scenario.entities[idx];
            let p = decl.param_index(param).ok_or_else(|| GeometryError::UnknownParameter {
                entity: decl.id.clone(),
                param: param.clone(),
            })?;
            Num::Exact(scene.states[t].values[idx][p].clone())
        }
        NumExpr::Named(name, _) => syms
            .number(name)
            .ok_or_else(|| GeometryError::UnknownNumber(name.clone()))?,
        NumExpr::Add(a, b) => ev(a)?.add(&ev(b)?),
        NumExpr::Sub(a, b) => ev(a)?.sub(&ev(b)?),
        NumExpr::Mul(a, b) => ev(a)?.mul(&ev(b)?),
        NumExpr::Neg(a) => ev(a)?.neg(),
        NumExpr::Delta(a, b) => {
            let (a, b) = (resolve(a, scene, syms)?, resolve(b, scene, syms)?);
            distance(scene, t, a, b)
        }
        NumExpr::Theta(a, b) => {
            let (a, b) = (resolve(a, scene, syms)?, resolve(b, scene, syms)?);
            Num::Approx(angular_position(scene, t, a, b)?)
        }
        NumExpr::Measure(a) => measure(scene, t, resolve(a, scene, syms)?)?,
        NumExpr::Drop(a, step) => {
            let idx = resolve(a, scene, syms)?;
            match ev(step)? {
                Num::Exact(s) => Num::Exact(fall_step(scene, t, idx, &s)),
                Num::Approx(s) => Num::Approx(to_f64(&fall_step(
                    scene,
                    t,
                    idx,
                    &R::from_float(s).unwrap_or_else(R::zero),
                ))),
            }
        }
        NumExpr::Next(inner) => {
            if t + 1 >= scene.len() {
                return Err(GeometryError::BeyondFinalState);
            }
            eval_num_expr(inner, scene, t + 1, syms)?
        }
    })
}

/// Truth of a comparison; a comparison reaching past the final state is false.
pub fn eval_constraint(
    atom: &ConstraintAtom,
    scene: &Scene,
    t: usize,
    syms: &dyn Symbols,
    tol: &Tolerances,
) -> Result<bool, GeometryError> {
    let sides = eval_num_expr(&atom.lhs, scene, t, syms)
        .and_then(|l| Ok((l, eval_num_expr(&atom.rhs, scene, t, syms)?)));
    match sides {
        Ok((l, r)) => Ok(atom.cmp.holds(&l, &r, tol.eps)),
        Err(GeometryError::BeyondFinalState) => Ok(false),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntityDecl, Trace};
    use crate::rational::{rat, ratio};

    struct NoSymbols;
    impl Symbols for NoSymbols {
        fn entity(&self, _: &str) -> Option<usize> {
            None
        }
        fn number(&self, _: &str) -> Option<Num> {
            None
        }
    }

    fn scene_of(entities: Vec<EntityDecl>) -> Scenario {
        let state = crate::model::State {
            time: 0,
            values: entities.iter().map(EntityDecl::initial_values).collect(),
            forces: vec![],
        };
        Scenario::with_trace("t", entities, Trace { states: vec![state] }).unwrap()
    }

    fn fig1() -> Scenario {
        scene_of(vec![
            EntityDecl::new("a", "Object", ShapeKind::Point, vec![rat(4), rat(5)]).unwrap(),
            EntityDecl::new("b", "Container", ShapeKind::Circle, vec![rat(6), ratio(9, 2), rat(1)]).unwrap(),
            EntityDecl::new("c", "Container", ShapeKind::Circle, vec![rat(5), rat(5), rat(3)]).unwrap(),
        ])
    }

    fn point(id: &str, x: i64, y: i64) -> EntityDecl {
        EntityDecl::new(id, "Object", ShapeKind::Point, vec![rat(x), rat(y)]).unwrap()
    }

    fn circle(id: &str, x: i64, y: i64, r: i64) -> EntityDecl {
        EntityDecl::new(id, "Container", ShapeKind::Circle, vec![rat(x), rat(y), rat(r)]).unwrap()
    }

    fn rel(sc: &Scenario, name: &str, args: &[&str]) -> bool {
        let scene = Scene::new(sc, &sc.trace().unwrap().states);
        let idx: Vec<usize> = args.iter().map(|a| sc.entity_index(a).unwrap()).collect();
        eval_relation(name, &idx, &[], &scene, 0, &Tolerances::default()).unwrap()
    }

    #[test]
    fn fig1_squared_distance_is_one() {
        let sc = fig1();
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        let dx = NumExpr::Sub(Box::new(NumExpr::param("a", "x")), Box::new(NumExpr::param("c", "x")));
        let dy = NumExpr::Sub(Box::new(NumExpr::param("a", "y")), Box::new(NumExpr::param("c", "y")));
        let e = NumExpr::Add(
            Box::new(NumExpr::Mul(Box::new(dx.clone()), Box::new(dx))),
            Box::new(NumExpr::Mul(Box::new(dy.clone()), Box::new(dy))),
        );
        assert_eq!(eval_num_expr(&e, &scene, 0, &NoSymbols).unwrap(), Num::Exact(rat(1)));
        assert_eq!(
            eval_num_expr(&NumExpr::Const(rat(0)), &scene, 0, &NoSymbols).unwrap(),
            Num::Exact(rat(0))
        );
        let delta = NumExpr::Delta(Term::new("a"), Term::new("c"));
        assert_eq!(eval_num_expr(&delta, &scene, 0, &NoSymbols).unwrap(), Num::Exact(rat(1)));
        let missing = NumExpr::param("a", "r");
        assert!(matches!(
            eval_num_expr(&missing, &scene, 0, &NoSymbols),
            Err(GeometryError::UnknownParameter { .. })
        ));
    }

    #[test]
    fn fig1_relations() {
        let sc = fig1();
        assert!(rel(&sc, "inside", &["a", "c"]));
        assert!(rel(&sc, "inside", &["b", "c"]));
        assert!(!rel(&sc, "inside", &["c", "b"]));
        assert!(!rel(&sc, "disjoint", &["a", "a"]));
    }

    #[test]
    fn distances() {
        let sc = scene_of(vec![point("p", 0, 0), point("q", 3, 4)]);
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        assert_eq!(distance(&scene, 0, 0, 1), Num::Exact(rat(5)));
        assert_eq!(distance(&scene, 0, 0, 0), Num::Exact(rat(0)));
        let sc = fig1();
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        assert_eq!(distance(&scene, 0, 0, 2), Num::Exact(rat(1)));
    }

    #[test]
    fn angular_positions() {
        let sc = scene_of(vec![
            point("o", 0, 0),
            point("n", 0, 1),
            point("w", -1, 0),
            point("d", 1, 1),
        ]);
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(angular_position(&scene, 0, 1, 0).unwrap(), PI / 2.0));
        assert!(close(angular_position(&scene, 0, 2, 0).unwrap(), PI));
        assert!(close(angular_position(&scene, 0, 3, 0).unwrap(), PI / 4.0));
        assert!(matches!(
            angular_position(&scene, 0, 0, 0),
            Err(GeometryError::CoincidentCenters(..))
        ));
    }

    #[test]
    fn measures() {
        let sc = scene_of(vec![
            circle("c", 5, 5, 3),
            point("p", 0, 0),
            EntityDecl::new("r", "Object", ShapeKind::Rectangle, vec![rat(0), rat(0), rat(2), rat(3)]).unwrap(),
            EntityDecl::new("f", "Floor", ShapeKind::Floor, vec![rat(0)]).unwrap(),
        ]);
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        assert!((measure(&scene, 0, 0).unwrap().to_f64() - 9.0 * PI).abs() < 1e-12);
        assert_eq!(measure(&scene, 0, 1).unwrap(), Num::Exact(rat(0)));
        assert_eq!(measure(&scene, 0, 2).unwrap(), Num::Exact(rat(6)));
        assert!(matches!(measure(&scene, 0, 3), Err(GeometryError::NotMeasurable(_))));
    }

    #[test]
    fn tangent_circles_touch() {
        let sc = scene_of(vec![
            EntityDecl::new("c1", "Container", ShapeKind::Circle, vec![rat(0), rat(0), rat(1)]).unwrap(),
            EntityDecl::new("c2", "Container", ShapeKind::Circle, vec![rat(2), rat(0), rat(1)]).unwrap(),
        ]);
        assert!(rel(&sc, "contact", &["c1", "c2"]));
        assert!(!rel(&sc, "overlaps", &["c1", "c2"]));
        assert!(!rel(&sc, "disjoint", &["c1", "c2"]));
    }

    #[test]
    fn resting_on_floor_and_boxes() {
        let sc = scene_of(vec![
            EntityDecl::new("f", "Floor", ShapeKind::Floor, vec![rat(0)]).unwrap(),
            EntityDecl::new("table", "Object", ShapeKind::Rectangle, vec![rat(0), rat(1), rat(4), rat(2)]).unwrap(),
            EntityDecl::new("cup", "Container", ShapeKind::Circle, vec![rat(1), rat(3), rat(1)]).unwrap(),
            point("p", 9, 0),
        ]);
        assert!(rel(&sc, "on", &["table", "f"]));
        assert!(rel(&sc, "on", &["cup", "table"]));
        assert!(rel(&sc, "on", &["p", "f"]));
        assert!(!rel(&sc, "on", &["cup", "f"]));
        assert!(!rel(&sc, "on", &["f", "f"]));
        assert!(!rel(&sc, "on", &["table", "cup"]));
    }

    #[test]
    fn segments_against_regions() {
        let seg = |id: &str, a: (i64, i64), b: (i64, i64)| {
            EntityDecl::new(id, "Path", ShapeKind::Segment, vec![rat(a.0), rat(a.1), rat(b.0), rat(b.1)]).unwrap()
        };
        let sc = scene_of(vec![
            EntityDecl::new("box", "Container", ShapeKind::Rectangle, vec![rat(0), rat(0), rat(4), rat(4)]).unwrap(),
            seg("edge", (2, -3), (2, 3)),
            seg("cross", (-3, 0), (3, 0)),
            seg("inner", (0, 0), (1, 1)),
            seg("far", (5, 5), (6, 6)),
        ]);
        assert!(rel(&sc, "contact", &["edge", "box"]));
        assert!(rel(&sc, "overlaps", &["cross", "box"]));
        assert!(rel(&sc, "inside", &["inner", "box"]));
        assert!(rel(&sc, "disjoint", &["far", "box"]));
        assert!(rel(&sc, "contact", &["edge", "cross"]));
    }

    #[test]
    fn close_to_is_exact() {
        let sc = scene_of(vec![point("p", 0, 0), point("q", 3, 4)]);
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        let tol = Tolerances::default();
        assert!(eval_relation("closeTo", &[0, 1], &[Num::Exact(rat(5))], &scene, 0, &tol).unwrap());
        assert!(!eval_relation("closeTo", &[0, 1], &[Num::Exact(ratio(49, 10))], &scene, 0, &tol).unwrap());
        assert!(!eval_relation("closeTo", &[0, 1], &[], &scene, 0, &tol).unwrap());
    }

    #[test]
    fn unknown_relation_and_arity() {
        let sc = fig1();
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        let tol = Tolerances::default();
        assert!(matches!(
            eval_relation("hovers", &[0, 1], &[], &scene, 0, &tol),
            Err(GeometryError::UnknownRelation(_))
        ));
        assert!(matches!(
            eval_relation("inside", &[0], &[], &scene, 0, &tol),
            Err(GeometryError::Arity { .. })
        ));
    }

    #[test]
    fn fall_step_clamps_to_support() {
        let sc = scene_of(vec![
            EntityDecl::new("f", "Floor", ShapeKind::Floor, vec![rat(0)]).unwrap(),
            EntityDecl::new("o", "Object", ShapeKind::Point, vec![rat(2), ratio(1, 2)]).unwrap(),
        ]);
        let scene = Scene::new(&sc, &sc.trace().unwrap().states);
        assert_eq!(fall_step(&scene, 0, 1, &rat(1)), ratio(-1, 2));
        assert_eq!(fall_step(&scene, 0, 0, &rat(1)), rat(0));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn circle_geom() -> impl Strategy<Value = Geom> {
            (-40i64..40, -40i64..40, 1i64..20, 1i64..4).prop_map(|(x, y, r, d)| Geom::Circle {
                x: ratio(x, d),
                y: ratio(y, d),
                r: ratio(r, d),
            })
        }

        fn any_geom() -> impl Strategy<Value = Geom> {
            let c = || (-20i64..20, 1i64..4).prop_map(|(v, d)| ratio(v, d));
            let pos = || (1i64..12, 1i64..4).prop_map(|(v, d)| ratio(v, d));
            prop_oneof![
                (c(), c()).prop_map(|(x, y)| Geom::Point { x, y }),
                (c(), c(), pos()).prop_map(|(x, y, r)| Geom::Circle { x, y, r }),
                (c(), c(), pos(), pos()).prop_map(|(x, y, w, h)| Geom::Rect { x, y, w, h }),
                (c(), c(), c(), c()).prop_map(|(x1, y1, x2, y2)| Geom::Segment { x1, y1, x2, y2 }),
                c().prop_map(|y| Geom::Floor { y }),
            ]
        }

        fn moved(g: &Geom, dx: &R, dy: &R) -> Geom {
            match g.clone() {
                Geom::Point { x, y } => Geom::Point { x: x + dx, y: y + dy },
                Geom::Circle { x, y, r } => Geom::Circle { x: x + dx, y: y + dy, r },
                Geom::Rect { x, y, w, h } => Geom::Rect { x: x + dx, y: y + dy, w, h },
                Geom::Segment { x1, y1, x2, y2 } => Geom::Segment {
                    x1: x1 + dx,
                    y1: y1 + dy,
                    x2: x2 + dx,
                    y2: y2 + dy,
                },
                Geom::Floor { y } => Geom::Floor { y: y + dy },
            }
        }

        fn scaled(g: &Geom, k: &R, ox: &R, oy: &R) -> Geom {
            let sx = |v: R| ox + (v - ox) * k;
            let sy = |v: R| oy + (v - oy) * k;
            match g.clone() {
                Geom::Point { x, y } => Geom::Point { x: sx(x), y: sy(y) },
                Geom::Circle { x, y, r } => Geom::Circle { x: sx(x), y: sy(y), r: r * k },
                Geom::Rect { x, y, w, h } => Geom::Rect { x: sx(x), y: sy(y), w: w * k, h: h * k },
                Geom::Segment { x1, y1, x2, y2 } => Geom::Segment {
                    x1: sx(x1),
                    y1: sy(y1),
                    x2: sx(x2),
                    y2: sy(y2),
                },
                Geom::Floor { y } => Geom::Floor { y: sy(y) },
            }
        }

        fn truths(a: &Geom, b: &Geom, eps: f64) -> [bool; 8] {
            [
                contained(a, b, true),
                contained(a, b, false),
                contact(a, b, eps),
                on(a, b, eps),
                overlaps(a, b),
                disjoint(a, b, eps),
                dist2(a, b) <= rat(4),
                a.area().zip(b.area()).map(|(p, q)| p.compare(&q) == Ordering::Less).unwrap_or(false),
            ]
        }

        proptest! {
            #[test]
            fn circle_relations_are_mutually_exclusive(b in circle_geom(), c in circle_geom()) {
                let holds = [
                    contained(&b, &c, true),
                    contained(&c, &b, true),
                    contact(&b, &c, 0.0),
                    overlaps(&b, &c),
                    disjoint(&b, &c, 0.0),
                ];
                prop_assert_eq!(holds.iter().filter(|h| **h).count(), 1);
            }

            #[test]
            fn relations_invariant_under_translation(
                a in any_geom(), b in any_geom(), dx in -50i64..50, dy in -50i64..50
            ) {
                let (dx, dy) = (rat(dx), rat(dy));
                prop_assert_eq!(truths(&a, &b, 1e-9), truths(&moved(&a, &dx, &dy), &moved(&b, &dx, &dy), 1e-9));
            }

            #[test]
            fn relations_invariant_under_uniform_scaling(
                a in any_geom(), b in any_geom(), k in 1i64..6, d in 1i64..4, ox in -5i64..5, oy in -5i64..5
            ) {
                let (k, ox, oy) = (ratio(k, d), rat(ox), rat(oy));
                let (sa, sb) = (scaled(&a, &k, &ox, &oy), scaled(&b, &k, &ox, &oy));
                prop_assert_eq!(contained(&a, &b, true), contained(&sa, &sb, true));
                prop_assert_eq!(overlaps(&a, &b), overlaps(&sa, &sb));
                prop_assert_eq!(disjoint(&a, &b, 0.0), disjoint(&sa, &sb, 0.0));
                prop_assert_eq!(contact(&a, &b, 0.0), contact(&sa, &sb, 0.0));
                if let (Some(p), Some(q)) = (a.area(), b.area()) {
                    let (sp, sq_) = (sa.area().unwrap(), sb.area().unwrap());
                    prop_assert_eq!(p.compare(&q), sp.compare(&sq_));
                }
            }

            #[test]
            fn distance_symmetric_and_triangular(
                a in (-30i64..30, -30i64..30), b in (-30i64..30, -30i64..30), c in (-30i64..30, -30i64..30)
            ) {
                let sc = scene_of(vec![point("a", a.0, a.1), point("b", b.0, b.1), point("c", c.0, c.1)]);
                let scene = Scene::new(&sc, &sc.trace().unwrap().states);
                let d = |i, j| distance(&scene, 0, i, j).to_f64();
                prop_assert_eq!(distance(&scene, 0, 0, 1), distance(&scene, 0, 1, 0));
                prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9);
            }

            #[test]
            fn theta_flips_by_pi(a in (-30i64..30, -30i64..30), b in (-30i64..30, -30i64..30)) {
                prop_assume!(a != b);
                let sc = scene_of(vec![point("a", a.0, a.1), point("b", b.0, b.1)]);
                let scene = Scene::new(&sc, &sc.trace().unwrap().states);
                let ab = angular_position(&scene, 0, 0, 1).unwrap();
                let ba = angular_position(&scene, 0, 1, 0).unwrap();
                let diff = (ab - ba).rem_euclid(2.0 * PI);
                prop_assert!((diff - PI).abs() < 1e-9);
                prop_assert!(ab > -PI && ab <= PI);
            }
        }
    }
}
