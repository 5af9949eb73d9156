//! Bounded model finding: every trace on an integer grid satisfying a theory.

use crate::exec::Execution;
use crate::geometry::Tolerances;
use crate::logic::{reference_eval, role_env, EvalError, MacroDef, Semantics};
use crate::model::{ModelError, Scenario, State, Theory, Trace};
use crate::rational::{format_rational, Rational};

pub const DEFAULT_CAP: u64 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum EnumerateError {
    #[error("search space of {size} assignments exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: String, cap: u64 },
    #[error("grid is empty or its step is not positive")]
    EmptyGrid,
    #[error("unknown free entity `{0}`")]
    UnknownEntity(String),
    #[error("entity `{0}` has no x/y position to vary")]
    NotPositional(String),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Grid points `lo, lo + step, ...` up to `hi` along each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub x: (i64, i64),
    pub y: (i64, i64),
    pub step: Rational,
    pub free: Vec<String>,
    pub horizon: usize,
    pub cap: u64,
}

impl GridSpec {
    pub fn new(x: (i64, i64), y: (i64, i64), free: Vec<String>) -> Self {
        GridSpec {
            x,
            y,
            step: Rational::from_integer(1.into()),
            free,
            horizon: 1,
            cap: DEFAULT_CAP,
        }
    }

    fn axis(&self, (lo, hi): (i64, i64)) -> Vec<Rational> {
        let mut out = Vec::new();
        let hi = Rational::from_integer(hi.into());
        let mut v = Rational::from_integer(lo.into());
        while v <= hi {
            out.push(v.clone());
            v += &self.step;
        }
        out
    }

    /// Grid points in (x, y) lexicographic order.
    pub fn points(&self) -> Vec<(Rational, Rational)> {
        let ys = self.axis(self.y);
        self.axis(self.x)
            .into_iter()
            .flat_map(|x| ys.iter().map(move |y| (x.clone(), y.clone())))
            .collect()
    }
}

/// A checked search: base state, the (entity, x index, y index) cells that
/// vary, and the grid.
struct Search<'a> {
    theory: &'a Theory,
    skeleton: &'a Scenario,
    binding: &'a [(String, String)],
    prelude: &'a [MacroDef],
    tol: &'a Tolerances,
    base: State,
    /// Per free entity: index and positions of its `x` and `y` parameters.
    free: Vec<(usize, usize, usize)>,
    points: Vec<(Rational, Rational)>,
    horizon: usize,
}

impl Search<'_> {
    fn digits(&self) -> usize {
        self.free.len() * self.horizon
    }

    /// Trace for one assignment; digit `k` is entity `k / T` at time `k % T`.
    fn trace(&self, assignment: &[usize]) -> Trace {
        let mut states: Vec<State> = (0..self.horizon)
            .map(|t| State {
                time: t,
                ..self.base.clone()
            })
            .collect();
        for (k, &p) in assignment.iter().enumerate() {
            let (e, px, py) = self.free[k / self.horizon];
            let (x, y) = &self.points[p];
            let s = &mut states[k % self.horizon];
            s.values[e][px] = x.clone();
            s.values[e][py] = y.clone();
        }
        Trace { states }
    }

    fn satisfied(&self, trace: &Trace) -> Result<bool, EnumerateError> {
        let sem = Semantics::new(self.skeleton, &trace.states, self.tol.clone())
            .with_theory(self.theory)?
            .with_macros(self.prelude);
        let env = role_env(self.theory, &sem, self.binding)?;
        for ax in &self.theory.axioms {
            if !reference_eval(ax, &sem, &env, 0)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Satisfying assignments whose first digit is `first`, in order.
    fn run_prefix(&self, first: usize, keep: bool) -> Result<(u64, Vec<Trace>), EnumerateError> {
        let n = self.digits();
        let base = self.points.len();
        let mut digits = vec![0; n];
        digits[0] = first;
        let (mut count, mut out) = (0u64, Vec::new());
        loop {
            let tr = self.trace(&digits);
            if self.satisfied(&tr)? {
                count += 1;
                if keep {
                    out.push(tr);
                }
            }
            // Odometer over digits 1..n, last digit fastest.
            let mut k = n;
            loop {
                if k == 1 {
                    return Ok((count, out));
                }
                k -= 1;
                digits[k] += 1;
                if digits[k] < base {
                    break;
                }
                digits[k] = 0;
            }
        }
    }
}

fn prepare<'a>(
    theory: &'a Theory,
    skeleton: &'a Scenario,
    grid: &GridSpec,
    binding: &'a [(String, String)],
    prelude: &'a [MacroDef],
    tol: &'a Tolerances,
) -> Result<Search<'a>, EnumerateError> {
    if grid.horizon == 0 {
        return Err(EnumerateError::ZeroHorizon);
    }
    let points = if grid.step > Rational::from_integer(0.into()) {
        grid.points()
    } else {
        Vec::new()
    };
    if points.is_empty() {
        return Err(EnumerateError::EmptyGrid);
    }
    let mut free = Vec::new();
    for id in &grid.free {
        let e = skeleton
            .entity_index(id)
            .ok_or_else(|| EnumerateError::UnknownEntity(id.clone()))?;
        let d = &skeleton.entities[e];
        match (d.param_index("x"), d.param_index("y")) {
            (Some(px), Some(py)) => free.push((e, px, py)),
            _ => return Err(EnumerateError::NotPositional(id.clone())),
        }
    }
    let exponent = (free.len() * grid.horizon) as u32;
    let size = num_bigint::BigUint::from(points.len()).pow(exponent);
    if size > num_bigint::BigUint::from(grid.cap) {
        return Err(EnumerateError::SearchSpaceTooLarge {
            size: size.to_string(),
            cap: grid.cap,
        });
    }
    let mut base = match skeleton.trace() {
        Some(tr) => tr.states[0].clone(),
        None => skeleton.initial_state(),
    };
    base.time = 0;
    Ok(Search {
        theory,
        skeleton,
        binding,
        prelude,
        tol,
        base,
        free,
        points,
        horizon: grid.horizon,
    })
}

fn search(
    s: &Search,
    keep: bool,
    exec: Execution,
) -> Result<(u64, Vec<Trace>), EnumerateError> {
    if s.digits() == 0 {
        let tr = s.trace(&[]);
        return Ok(if s.satisfied(&tr)? { (1, if keep { vec![tr] } else { vec![] }) } else { (0, vec![]) });
    }
    let firsts: Vec<usize> = (0..s.points.len()).collect();
    let parts = exec.map(&firsts, |&f| s.run_prefix(f, keep));
    let (mut count, mut out) = (0, Vec::new());
    for p in parts {
        let (c, trs) = p?;
        count += c;
        out.extend(trs);
    }
    Ok((count, out))
}

/// Every trace over the grid whose axioms hold at instant 0, in
/// lexicographic order of (entity, time, x, y) assignments. Entities not
/// listed as free keep their skeleton values at every instant.
pub fn enumerate_models(
    theory: &Theory,
    skeleton: &Scenario,
    grid: &GridSpec,
    binding: &[(String, String)],
    prelude: &[MacroDef],
    tol: &Tolerances,
    exec: Execution,
) -> Result<Vec<Trace>, EnumerateError> {
    let s = prepare(theory, skeleton, grid, binding, prelude, tol)?;
    Ok(search(&s, true, exec)?.1)
}

/// Number of models, without keeping the traces.
pub fn count_models(
    theory: &Theory,
    skeleton: &Scenario,
    grid: &GridSpec,
    binding: &[(String, String)],
    prelude: &[MacroDef],
    tol: &Tolerances,
    exec: Execution,
) -> Result<u64, EnumerateError> {
    let s = prepare(theory, skeleton, grid, binding, prelude, tol)?;
    Ok(search(&s, false, exec)?.0)
}

/// Compact `id@t=(x,y)` description of the free positions in a model.
pub fn describe_model(skeleton: &Scenario, grid: &GridSpec, trace: &Trace) -> String {
    let mut parts = Vec::new();
    for id in &grid.free {
        let Some(e) = skeleton.entity_index(id) else { continue };
        let d = &skeleton.entities[e];
        let (Some(px), Some(py)) = (d.param_index("x"), d.param_index("y")) else { continue };
        for s in &trace.states {
            parts.push(format!(
                "{id}@{}=({}, {})",
                s.time,
                format_rational(&s.values[e][px]),
                format_rational(&s.values[e][py])
            ));
        }
    }
    parts.join(" ")
}
