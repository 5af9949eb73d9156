use super::LibraryError;
use crate::exec::Execution;
use crate::geometry::Tolerances;
use crate::logic::{eval_formula, AxiomReport, CheckReport, Env, EvalError, MacroDef, Semantics};
use crate::model::{Scenario, Theory};

/// Roles of one schema bound to entity ids, in the schema's role order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SchemaBinding {
    pub schema: String,
    pub roles: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub binding: SchemaBinding,
    pub report: CheckReport,
}

/// All sort-compatible role assignments, as entity index tuples in
/// lexicographic order. Roles bind distinct entities unless aliased.
fn candidates(theory: &Theory, sem: &Semantics) -> Result<Vec<Vec<usize>>, LibraryError> {
    let domains = theory
        .roles
        .iter()
        .map(|(_, sort)| sem.domain(sort))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(domains.len());
    fn go(
        theory: &Theory,
        domains: &[Vec<usize>],
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let k = cur.len();
        if k == domains.len() {
            out.push(cur.clone());
            return;
        }
        for &e in &domains[k] {
            let clash = cur
                .iter()
                .enumerate()
                .any(|(j, &f)| f == e && !theory.may_alias(&theory.roles[j].0, &theory.roles[k].0));
            if !clash {
                cur.push(e);
                go(theory, domains, cur, out);
                cur.pop();
            }
        }
    }
    go(theory, &domains, &mut cur, &mut out);
    Ok(out)
}

/// Outcome of a binding search for one theory.
#[derive(Debug, Clone, PartialEq)]
pub struct BindingSearch {
    pub hits: Vec<Classification>,
    /// Number of candidate bindings examined.
    pub searched: usize,
}

/// Satisfying bindings of `theory` that agree with `fixed`, sorted by the
/// bound entity ids.
///
/// Bindings whose evaluation fails (a role bound to a shape without a
/// center where one is needed, say) count as unsatisfied.
pub fn find_bindings(
    scenario: &Scenario,
    theory: &Theory,
    fixed: &[(String, String)],
    prelude: &[MacroDef],
    tol: &Tolerances,
    exec: Execution,
) -> Result<BindingSearch, LibraryError> {
    let sem = Semantics::for_trace(scenario, tol.clone())?
        .with_theory(theory)?
        .with_macros(prelude);
    let mut pinned = Vec::new();
    for (role, id) in fixed {
        let k = theory
            .roles
            .iter()
            .position(|(r, _)| r == role)
            .ok_or_else(|| EvalError::UnknownRole(role.clone()))?;
        let e = scenario
            .entity_index(id)
            .ok_or_else(|| EvalError::UnboundSymbol(id.clone()))?;
        pinned.push((k, e));
    }
    let cands: Vec<Vec<usize>> = candidates(theory, &sem)?
        .into_iter()
        .filter(|tuple| pinned.iter().all(|&(k, e)| tuple[k] == e))
        .collect();
    let mut hits = exec.filter_map(&cands, |tuple| {
        let mut env = Env::new();
        for ((role, _), &e) in theory.roles.iter().zip(tuple) {
            env = env.bind(role, e);
        }
        let ok = theory
            .axioms
            .iter()
            .all(|ax| matches!(eval_formula(ax, &sem, &env, 0), Ok(true)));
        ok.then(|| {
            let roles: Vec<(String, String)> = theory
                .roles
                .iter()
                .zip(tuple)
                .map(|((r, _), &e)| (r.clone(), scenario.entities[e].id.clone()))
                .collect();
            Classification {
                report: CheckReport {
                    theory: theory.name.clone(),
                    binding: roles.clone(),
                    axioms: theory
                        .axioms
                        .iter()
                        .enumerate()
                        .map(|(index, f)| AxiomReport {
                            index,
                            formula: f.clone(),
                            satisfied: true,
                            witness: None,
                        })
                        .collect(),
                },
                binding: SchemaBinding {
                    schema: theory.name.clone(),
                    roles,
                },
            }
        })
    });
    hits.sort_by(|a, b| a.binding.cmp(&b.binding));
    Ok(BindingSearch {
        hits,
        searched: cands.len(),
    })
}

/// Every satisfying binding of every schema over the scenario's trace,
/// sorted by schema name, then by the bound entity ids.
pub fn classify(
    scenario: &Scenario,
    schemas: &[Theory],
    prelude: &[MacroDef],
    tol: &Tolerances,
    exec: Execution,
) -> Result<Vec<Classification>, LibraryError> {
    let mut out = Vec::new();
    for theory in schemas {
        out.extend(find_bindings(scenario, theory, &[], prelude, tol, exec)?.hits);
    }
    out.sort_by(|a, b| a.binding.cmp(&b.binding));
    Ok(out)
}

/// The first pair of bindings, in canonical order, under which `schema`
/// holds in both scenarios.
pub fn analogy(
    a: &Scenario,
    b: &Scenario,
    schema: &Theory,
    prelude: &[MacroDef],
    tol: &Tolerances,
    exec: Execution,
) -> Result<Option<(SchemaBinding, SchemaBinding)>, LibraryError> {
    let first = |sc| -> Result<Option<SchemaBinding>, LibraryError> {
        Ok(classify(sc, std::slice::from_ref(schema), prelude, tol, exec)?
            .into_iter()
            .next()
            .map(|c| c.binding))
    };
    let Some(x) = first(a)? else { return Ok(None) };
    Ok(first(b)?.map(|y| (x, y)))
}
