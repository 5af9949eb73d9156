//! Text formats: `.ist` theories, `.scn` scenarios and JSON traces.

mod check;
mod diag;
mod json;
mod lexer;
mod parser;
mod print;

pub use check::{sort_check_scenario, sort_check_theory};
pub use diag::{Diagnostic, Diagnostics, Severity};
pub use json::{parse_trace_json, serialize_trace, TraceDoc};
pub use lexer::{is_reserved, RESERVED};
pub use parser::{parse_formula, parse_scenario, parse_theory};
pub use print::{print_formula, print_num, print_scenario, print_theory};

use crate::logic::MacroDef;
use crate::model::{Scenario, Theory};

/// Parses and sort-checks a theory.
pub fn load_theory(text: &str, file: &str, prelude: &[MacroDef]) -> Result<Theory, Diagnostics> {
    let th = parse_theory(text, file)?;
    Diagnostics::from_checks(sort_check_theory(&th, None, prelude))?;
    Ok(th)
}

/// Parses and sort-checks a scenario.
pub fn load_scenario(text: &str, file: &str, prelude: &[MacroDef]) -> Result<Scenario, Diagnostics> {
    let sc = parse_scenario(text, file)?;
    Diagnostics::from_checks(sort_check_scenario(&sc, prelude))?;
    Ok(sc)
}
