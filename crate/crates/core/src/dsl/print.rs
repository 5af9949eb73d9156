use std::fmt::{self, Write};

use crate::dynamics::{Effect, RuleSpec};
use crate::geometry::{Cmp, ConstraintAtom, NumExpr};
use crate::logic::{Formula, MacroDef};
use crate::model::{ForceFluent, Scenario, ScenarioBody, Theory, ENTITY};
use crate::rational::{format_rational, Rational};

// Binding levels, loosest first.
const IMPLIES: u8 = 0;
const OR: u8 = 1;
const AND: u8 = 2;
const UNTIL: u8 = 3;
const UNARY: u8 = 4;

fn formula(f: &Formula, ctx: u8, out: &mut String) {
    let wrap = |out: &mut String, own: u8, body: &dyn Fn(&mut String)| {
        if own < ctx {
            out.push('(');
            body(out);
            out.push(')');
        } else {
            body(out);
        }
    };
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Final => out.push_str("final"),
        Formula::Atom(a) => {
            out.push_str(&a.name);
            out.push('(');
            let args: Vec<&str> = a.args.iter().map(|t| t.name.as_str()).collect();
            out.push_str(&args.join(","));
            if !a.extra.is_empty() {
                out.push_str("; ");
                let extra: Vec<String> = a.extra.iter().map(print_num).collect();
                out.push_str(&extra.join(", "));
            }
            out.push(')');
        }
        Formula::Compare(c) => {
            let _ = write!(out, "{c}");
        }
        Formula::Not(g) => unary("not", g, out),
        Formula::Next(g) => unary("next", g, out),
        Formula::Always(g) => unary("always", g, out),
        Formula::Eventually(g) => unary("eventually", g, out),
        Formula::Before(g) => unary("before", g, out),
        Formula::And(a, b) => wrap(out, AND, &|out| binary(a, AND, " and ", b, UNTIL, out)),
        Formula::Or(a, b) => wrap(out, OR, &|out| binary(a, OR, " or ", b, AND, out)),
        Formula::Implies(a, b) => wrap(out, IMPLIES, &|out| binary(a, OR, " -> ", b, IMPLIES, out)),
        Formula::Until(a, b) => wrap(out, UNTIL, &|out| binary(a, UNARY, " until ", b, UNTIL, out)),
        Formula::Forall(q) | Formula::Exists(q) => {
            let kw = if matches!(f, Formula::Forall(_)) { "forall" } else { "exists" };
            // A quantifier body extends as far as possible, so any
            // enclosing operator needs parentheses.
            let nested = ctx > IMPLIES;
            if nested {
                out.push('(');
            }
            let _ = write!(out, "{kw} {} : {} . ", q.var, q.sort);
            formula(&q.body, IMPLIES, out);
            if nested {
                out.push(')');
            }
        }
    }
}

fn unary(kw: &str, g: &Formula, out: &mut String) {
    out.push_str(kw);
    out.push(' ');
    formula(g, UNARY, out);
}

fn binary(a: &Formula, la: u8, op: &str, b: &Formula, lb: u8, out: &mut String) {
    formula(a, la, out);
    out.push_str(op);
    formula(b, lb, out);
}

pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    formula(f, IMPLIES, &mut out);
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_formula(self))
    }
}

// Numeric levels: sum, product, negation, atom.
const SUM: u8 = 0;
const PROD: u8 = 1;
const NEG: u8 = 2;

fn num(e: &NumExpr, ctx: u8, out: &mut String) {
    let own = match e {
        NumExpr::Add(..) | NumExpr::Sub(..) => SUM,
        NumExpr::Mul(..) => PROD,
        NumExpr::Neg(_) => NEG,
        NumExpr::Const(v) if v < &Rational::from_integer(0.into()) => NEG,
        _ => 3,
    };
    let paren = own < ctx;
    if paren {
        out.push('(');
    }
    match e {
        NumExpr::Const(v) => out.push_str(&format_rational(v)),
        NumExpr::Param { entity, param } => {
            let _ = write!(out, "{}.{param}", entity.name);
        }
        NumExpr::Named(n, _) => out.push_str(n),
        NumExpr::Add(a, b) | NumExpr::Sub(a, b) => {
            num(a, SUM, out);
            out.push_str(if matches!(e, NumExpr::Add(..)) { " + " } else { " - " });
            num(b, PROD, out);
        }
        NumExpr::Mul(a, b) => {
            num(a, PROD, out);
            out.push_str(" * ");
            num(b, NEG, out);
        }
        NumExpr::Neg(a) => {
            out.push('-');
            // `-3` would read back as a constant.
            num(a, if matches!(**a, NumExpr::Const(_)) { 4 } else { NEG }, out);
        }
        NumExpr::Delta(a, b) => {
            let _ = write!(out, "delta({}, {})", a.name, b.name);
        }
        NumExpr::Theta(a, b) => {
            let _ = write!(out, "theta({}, {})", a.name, b.name);
        }
        NumExpr::Measure(a) => {
            let _ = write!(out, "measure({})", a.name);
        }
        NumExpr::Drop(a, s) => {
            let _ = write!(out, "drop({}; ", a.name);
            num(s, SUM, out);
            out.push(')');
        }
        NumExpr::Next(a) => {
            out.push_str("next[");
            num(a, SUM, out);
            out.push(']');
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn print_num(e: &NumExpr) -> String {
    let mut out = String::new();
    num(e, SUM, &mut out);
    out
}

impl fmt::Display for NumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_num(self))
    }
}

impl fmt::Display for ConstraintAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.cmp.symbol(), self.rhs)
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

fn print_macro(m: &MacroDef, out: &mut String) {
    let params: Vec<String> = m.params.iter().map(|(p, s)| format!("{p} : {s}")).collect();
    let _ = write!(out, "  macro {}({}", m.name, params.join(", "));
    if !m.num_params.is_empty() {
        let _ = write!(out, "; {}", m.num_params.join(", "));
    }
    let _ = writeln!(out, ") := {}", m.body);
}

pub fn print_theory(th: &Theory) -> String {
    let mut out = format!("theory {}\n", th.name);
    for s in &th.sorts {
        let _ = writeln!(out, "  sort {} < {}", s.name, s.parent.as_deref().unwrap_or(ENTITY));
    }
    for (r, s) in &th.roles {
        let _ = writeln!(out, "  role {r} : {s}");
    }
    for (a, b) in &th.aliases {
        let _ = writeln!(out, "  alias {a}, {b}");
    }
    for r in &th.relations {
        let _ = write!(out, "  relation {}({})", r.name, r.arg_sorts.join(", "));
        if let Some(d) = &r.definition {
            let _ = write!(out, " := {d}");
        }
        out.push('\n');
    }
    for (p, v) in &th.params {
        let _ = writeln!(out, "  param {p} = {}", format_rational(v));
    }
    for m in &th.macros {
        print_macro(m, &mut out);
    }
    for a in &th.axioms {
        let _ = writeln!(out, "  axiom {a}");
    }
    out.push_str("end\n");
    out
}

fn force_text(f: &ForceFluent) -> String {
    format!(
        "{} on {} = ({}, {}) {}",
        f.label,
        f.target,
        format_rational(&f.dx),
        format_rational(&f.dy),
        f.mode.keyword()
    )
}

fn effect_text(e: &Effect) -> String {
    match e {
        Effect::Set { target, param, value } => format!("{}.{param} := {value}", target.name),
        Effect::Delta { target, param, value } => format!("{}.{param} += {value}", target.name),
        Effect::AddForce {
            target,
            label,
            dx,
            dy,
            mode,
        } => format!(
            "addforce {label} on {} = ({}, {}) {}",
            target.name,
            format_rational(dx),
            format_rational(dy),
            mode.keyword()
        ),
        Effect::RemoveForce { target, label } => format!("removeforce {label} on {}", target.name),
    }
}

/// Concrete traces are written as per-state differences.
pub fn print_scenario(sc: &Scenario) -> String {
    let mut out = format!("scenario {}\n", sc.name);
    for s in &sc.sorts {
        let _ = writeln!(out, "  sort {} < {}", s.name, s.parent.as_deref().unwrap_or(ENTITY));
    }
    for e in &sc.entities {
        let _ = write!(out, "  entity {e}");
        let attrs: Vec<String> = e
            .attributes()
            .iter()
            .map(|(a, v)| format!("{a} = {}", format_rational(v)))
            .collect();
        if !attrs.is_empty() {
            let _ = write!(out, " with {}", attrs.join(", "));
        }
        out.push('\n');
    }
    for f in &sc.forces {
        let _ = writeln!(out, "  force {}", force_text(f));
    }
    match &sc.body {
        ScenarioBody::Concrete(tr) => {
            let _ = writeln!(out, "  trace length {}", tr.len());
            let mut prev_values: Vec<Vec<Rational>> = sc.entities.iter().map(|e| e.initial_values()).collect();
            let mut prev_forces = sc.forces.clone();
            for s in &tr.states {
                let mut items = Vec::new();
                for (ei, e) in sc.entities.iter().enumerate() {
                    for (pi, (p, _)) in e.params.iter().enumerate() {
                        if s.values[ei][pi] != prev_values[ei][pi] {
                            items.push(format!("{}.{p} = {}", e.id, format_rational(&s.values[ei][pi])));
                        }
                    }
                }
                for f in &prev_forces {
                    if !s.forces.iter().any(|g| g.target == f.target && g.label == f.label) {
                        items.push(format!("unforce {} on {}", f.label, f.target));
                    }
                }
                for f in &s.forces {
                    if !prev_forces.contains(f) {
                        items.push(format!("force {}", force_text(f)));
                    }
                }
                if !items.is_empty() {
                    let _ = writeln!(out, "  state {} {{ {} }}", s.time, items.join(" "));
                }
                prev_values = s.values.clone();
                prev_forces = s.forces.clone();
            }
        }
        ScenarioBody::Generative { rules, horizon } => {
            out.push_str("  rules\n");
            for r in rules {
                match r {
                    RuleSpec::Gravity { delta } => match delta {
                        Some(d) => {
                            let _ = writeln!(out, "    gravity {}", format_rational(d));
                        }
                        None => out.push_str("    gravity\n"),
                    },
                    RuleSpec::Umph {
                        label,
                        target,
                        dx,
                        dy,
                        mode,
                        until,
                    } => {
                        let f = ForceFluent {
                            target: target.clone(),
                            label: label.clone(),
                            dx: dx.clone(),
                            dy: dy.clone(),
                            mode: *mode,
                        };
                        let _ = write!(out, "    umph {}", force_text(&f));
                        if let Some(u) = until {
                            let _ = write!(out, " until {}", print_formula(u));
                        }
                        out.push('\n');
                    }
                    RuleSpec::Custom(rule) => {
                        let _ = write!(out, "    rule {}", rule.name);
                        if let Some((v, s)) = &rule.scope {
                            let _ = write!(out, " forall {v} : {s}");
                        }
                        let effects: Vec<String> = rule.effects.iter().map(effect_text).collect();
                        let _ = write!(
                            out,
                            " when {} do {}",
                            print_formula(&rule.condition),
                            effects.join(", ")
                        );
                        if let Some(u) = &rule.until {
                            let _ = write!(out, " until {}", print_formula(u));
                        }
                        out.push('\n');
                    }
                }
            }
            let _ = writeln!(out, "  horizon {horizon}");
        }
    }
    out.push_str("end\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_formula, parse_scenario, parse_theory};
    use crate::rational::{rat, ratio};

    fn round(text: &str) {
        let f = parse_formula(text, "f").unwrap();
        let printed = print_formula(&f);
        assert_eq!(parse_formula(&printed, "f").unwrap(), f, "{text} printed as {printed}");
    }

    #[test]
    fn formulas_round_trip() {
        for text in [
            "p(a) -> q(a) -> r(a)",
            "(p(a) -> q(a)) -> r(a)",
            "(p(a) or q(a)) and r(a)",
            "not (p(a) and q(a))",
            "(forall x : Object . p(x)) and q(a)",
            "p(a) until (q(a) until r(a))",
            "(p(a) until q(a)) until r(a)",
            "always (p(a) until q(a))",
            "next next[a.x] > 1",
            "a.x - (b.x - 1) * -2 <= -(3) + -a.y",
            "closeTo(a, b; tau * 2) and delta(a, b) < 1/3",
            "exists y : Entity . on(x, y) -> false",
            "before (measure(a) = theta(a, b))",
            "a.x + drop(a; 1/2) != 0.25",
        ] {
            round(text);
        }
    }

    #[test]
    fn printed_forms() {
        let f = parse_formula("forall x:Object . (eventually inside(x,c))", "f").unwrap();
        assert_eq!(print_formula(&f), "forall x : Object . eventually inside(x,c)");
        assert_eq!(print_num(&NumExpr::Neg(Box::new(NumExpr::Const(rat(3))))), "-(3)");
        assert_eq!(print_num(&NumExpr::Const(ratio(1, 3))), "1/3");
    }

    #[test]
    fn theory_round_trip() {
        let text = "theory T
  sort Cup < Circle
  role o, p : Object
  role c : Cup
  alias o, p
  relation at(Object, Region) := delta($1, $2) <= tau
  param dmax = 10.5
  macro NEAR(x : Entity, y : Entity; d) := closeTo(x, y; d)
  axiom eventually inside(o, c)
  axiom forall z : Object . NEAR(z, c; dmax)
end";
        let th = parse_theory(text, "t").unwrap();
        let again = parse_theory(&print_theory(&th), "t").unwrap();
        assert_eq!(again, th);
    }

    #[test]
    fn scenario_round_trip() {
        for text in [
            "scenario s
               entity o : Object = point(0, 0)
               entity k : Container = rectangle(1, 1, 2, 2) with open = 1
               force push on o = (1, 0) active
               trace length 4
               state 1 { o.x = 1 unforce push on o }
               state 3 { o.y = -1/3 force pull on k = (0, -1) passive }
             end",
            "scenario g
               sort Ball < Object
               entity o : Ball = circle(0, 5, 1)
               entity f : Floor = floor(0)
               rules
                 gravity 1/2
                 umph push on o = (1, 0) active until o.x >= 3
                 rule stop forall x : Object when exists y : Entity . on(x, y) do x.x := 0, removeforce push on x
               horizon 5
             end",
        ] {
            let sc = parse_scenario(text, "s").unwrap();
            let printed = print_scenario(&sc);
            assert_eq!(parse_scenario(&printed, "s").unwrap(), sc, "{printed}");
        }
    }
}
