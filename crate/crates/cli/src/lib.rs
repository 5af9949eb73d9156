//! The `ischema` command line: check, simulate, classify, analogy and
//! enumerate over `.ist` theories and `.scn` scenarios.
//!
//! Exit codes: 0 success, 1 semantic failure (violated theory, no
//! binding, no analogy), 2 usage or input error, 3 simulation conflict,
//! 4 search space too large.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ischema::dsl::{load_scenario, parse_theory, print_formula, serialize_trace, sort_check_theory, Diagnostics};
use ischema::dynamics::{simulate, DynamicsError, SimConfig};
use ischema::enumerate::{count_models, enumerate_models, EnumerateError, GridSpec};
use ischema::library::{analogy, classify, find_bindings, prelude, schema_theory, SchemaBinding, SCHEMA_NAMES};
use ischema::logic::{check_theory, substitute, CheckReport, EvalPath};
use ischema::model::{Scenario, ScenarioBody, Theory, Trace};
use ischema::rational::{format_rational, parse_rational, Rational};
use ischema::{Execution, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_CONFLICT: i32 = 3;
pub const EXIT_TOO_LARGE: i32 = 4;

/// JSON schema every `--json` output validates against.
pub const OUTPUT_SCHEMA: &str = include_str!("../schemas/cli-output.schema.json");

#[derive(Parser, Debug)]
#[command(name = "ischema", version, about = "Image schemas over exact 2D geometry")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Tolerance for contact and on.
    #[arg(long, global = true, value_name = "EPS")]
    epsilon: Option<f64>,
    /// Default closeTo threshold.
    #[arg(long, global = true, value_name = "TAU")]
    tau: Option<String>,
    /// Gravity step for rules that do not give one.
    #[arg(long, global = true, value_name = "DELTA")]
    delta: Option<String>,
    /// Largest enumeration search space.
    #[arg(long, global = true, value_name = "N")]
    cap: Option<u64>,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a theory against a scenario under a role binding.
    Check {
        theory: PathBuf,
        scenario: PathBuf,
        /// role=entity; unbound roles are searched for.
        #[arg(long = "bind", value_name = "ROLE=ENTITY")]
        bind: Vec<String>,
    },
    /// Run a generative scenario's rules.
    Simulate {
        scenario: PathBuf,
        /// Number of states, replacing the scenario's horizon.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_name = "FILE")]
        trace_out: Option<PathBuf>,
    },
    /// List every schema binding that holds in a scenario.
    Classify {
        scenario: PathBuf,
        /// Comma-separated schema names.
        #[arg(long, value_delimiter = ',')]
        schemas: Vec<String>,
    },
    /// Find bindings of one schema holding in two scenarios.
    Analogy {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        schema: String,
    },
    /// Enumerate grid placements satisfying a theory.
    Enumerate {
        theory: PathBuf,
        scenario: PathBuf,
        /// x0:x1,y0:y1[,step]
        #[arg(long)]
        grid: String,
        /// Number of states per model.
        #[arg(long)]
        steps: Option<usize>,
        /// Comma-separated entities to place; defaults to every Object.
        #[arg(long, value_delimiter = ',')]
        free: Vec<String>,
        #[arg(long = "bind", value_name = "ROLE=ENTITY")]
        bind: Vec<String>,
        #[arg(long)]
        count_only: bool,
    },
}

struct Config {
    tol: Tolerances,
    delta: Rational,
    cap: u64,
    color: bool,
}

/// A failure that ends the run with `code`; `message` goes to the error
/// stream and, in JSON mode, into an error document on the output stream.
struct Failure {
    code: i32,
    kind: &'static str,
    message: String,
}

fn fail(code: i32, kind: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        code,
        kind,
        message: message.into(),
    }
}

fn usage(message: impl Into<String>) -> Failure {
    fail(EXIT_ERROR, "usage", message)
}

struct Output {
    text: String,
    json: Option<Value>,
    code: i32,
}

/// Runs the command line and returns the exit code. Output is buffered
/// and written once at the end.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let json = cli.global.json;
    let name = command_name(&cli.command);
    let result = config(&cli.global).and_then(|cfg| dispatch(&cli.command, &cfg));
    match result {
        Ok(o) => {
            let body = match (json, o.json) {
                (true, Some(v)) => pretty(&v),
                _ => o.text,
            };
            let _ = out.write_all(body.as_bytes());
            o.code
        }
        Err(f) => {
            let _ = writeln!(err, "{}", f.message.trim_end());
            if json {
                let doc = json!({
                    "command": name,
                    "error": {"kind": f.kind, "message": f.message.trim_end()},
                });
                let _ = out.write_all(pretty(&doc).as_bytes());
            }
            f.code
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Check { .. } => "check",
        Command::Simulate { .. } => "simulate",
        Command::Classify { .. } => "classify",
        Command::Analogy { .. } => "analogy",
        Command::Enumerate { .. } => "enumerate",
    }
}

fn config(g: &GlobalArgs) -> Result<Config, Failure> {
    let mut tol = Tolerances::default();
    if let Some(eps) = g.epsilon {
        if eps.is_nan() || eps < 0.0 || eps.is_infinite() {
            return Err(usage(format!("--epsilon must be a finite number >= 0, got {eps}")));
        }
        tol.eps = eps;
    }
    if let Some(t) = &g.tau {
        let v = parse_rational(t).ok_or_else(|| usage(format!("--tau: `{t}` is not a number")))?;
        if v < Rational::from_integer(0.into()) {
            return Err(usage("--tau must be >= 0"));
        }
        tol.tau = v;
    }
    let delta = match &g.delta {
        Some(d) => {
            let v = parse_rational(d).ok_or_else(|| usage(format!("--delta: `{d}` is not a number")))?;
            if v <= Rational::from_integer(0.into()) {
                return Err(usage("--delta must be > 0"));
            }
            v
        }
        None => SimConfig::default().delta,
    };
    let cap = g.cap.unwrap_or(ischema::enumerate::DEFAULT_CAP);
    if cap == 0 {
        return Err(usage("--cap must be > 0"));
    }
    Ok(Config {
        tol,
        delta,
        cap,
        color: std::env::var("ISCHEMA_COLOR").is_ok_and(|v| v == "1"),
    })
}

fn dispatch(c: &Command, cfg: &Config) -> Result<Output, Failure> {
    match c {
        Command::Check { theory, scenario, bind } => cmd_check(theory, scenario, bind, cfg),
        Command::Simulate {
            scenario,
            steps,
            trace_out,
        } => cmd_simulate(scenario, *steps, trace_out.as_deref(), cfg),
        Command::Classify { scenario, schemas } => cmd_classify(scenario, schemas, cfg),
        Command::Analogy { a, b, schema } => cmd_analogy(a, b, schema, cfg),
        Command::Enumerate {
            theory,
            scenario,
            grid,
            steps,
            free,
            bind,
            count_only,
        } => cmd_enumerate(theory, scenario, grid, *steps, free, bind, *count_only, cfg),
    }
}

fn read(path: &Path) -> Result<(String, String), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(EXIT_ERROR, "io", format!("{}: {e}", path.display())))?;
    Ok((path.display().to_string(), text))
}

fn diagnostics(d: Diagnostics, text: &str) -> Failure {
    fail(EXIT_ERROR, "parse", d.render(text))
}

/// Parses a theory and sort-checks it in the context of `scenario`, whose
/// entities the axioms may name directly.
fn read_theory(path: &Path, scenario: &Scenario) -> Result<Theory, Failure> {
    let (file, text) = read(path)?;
    let th = parse_theory(&text, &file).map_err(|d| diagnostics(d, &text))?;
    Diagnostics::from_checks(sort_check_theory(&th, Some(scenario), prelude())).map_err(|d| diagnostics(d, &text))?;
    Ok(th)
}

fn read_scenario(path: &Path) -> Result<Scenario, Failure> {
    let (file, text) = read(path)?;
    load_scenario(&text, &file, prelude()).map_err(|d| diagnostics(d, &text))
}

fn sim_config(cfg: &Config) -> SimConfig {
    SimConfig {
        delta: cfg.delta.clone(),
        tol: cfg.tol.clone(),
    }
}

fn dynamics_failure(e: DynamicsError) -> Failure {
    match e {
        DynamicsError::ConflictingEffects { .. } | DynamicsError::Unstratifiable(_) => {
            fail(EXIT_CONFLICT, "conflict", format!("error: {e}"))
        }
        other => fail(EXIT_ERROR, "simulation", format!("error: {other}")),
    }
}

/// The scenario with a concrete trace, simulating it first if needed.
fn concrete(sc: Scenario, cfg: &Config) -> Result<Scenario, Failure> {
    if sc.trace().is_some() {
        return Ok(sc);
    }
    let trace = simulate(&sc, prelude(), &sim_config(cfg)).map_err(dynamics_failure)?;
    sc.replace_trace(trace)
        .map_err(|e| fail(EXIT_ERROR, "model", format!("error: {e}")))
}

fn eval_failure(e: impl std::fmt::Display) -> Failure {
    fail(EXIT_ERROR, "evaluation", format!("error: {e}"))
}

fn parse_bindings(bind: &[String]) -> Result<Vec<(String, String)>, Failure> {
    let mut out: Vec<(String, String)> = Vec::new();
    for b in bind {
        let (role, id) = b
            .split_once('=')
            .filter(|(r, e)| !r.trim().is_empty() && !e.trim().is_empty())
            .ok_or_else(|| usage(format!("--bind expects role=entity, got `{b}`")))?;
        let (role, id) = (role.trim().to_string(), id.trim().to_string());
        if out.iter().any(|(r, _)| *r == role) {
            return Err(usage(format!("role `{role}` bound twice")));
        }
        out.push((role, id));
    }
    Ok(out)
}

struct Paint(bool);

impl Paint {
    fn green(&self, s: &str) -> String {
        self.wrap("32", s)
    }
    fn red(&self, s: &str) -> String {
        self.wrap("31", s)
    }
    fn bold(&self, s: &str) -> String {
        self.wrap("1", s)
    }
    fn wrap(&self, code: &str, s: &str) -> String {
        if self.0 {
            format!("\x1b[{code}m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }
}

fn binding_json(roles: &[(String, String)]) -> Value {
    Value::Array(
        roles
            .iter()
            .map(|(r, e)| json!({"role": r, "entity": e}))
            .collect(),
    )
}

fn binding_text(roles: &[(String, String)]) -> String {
    roles
        .iter()
        .map(|(r, e)| format!("{r}={e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn report_json(r: &CheckReport) -> Value {
    let axioms: Vec<Value> = r
        .axioms
        .iter()
        .map(|a| {
            let witness = a.witness.as_ref().map(|w| {
                json!({
                    "time": w.time,
                    "formula": print_formula(&substitute(&w.formula, &r.binding)),
                    "bindings": binding_json(&w.bindings),
                })
            });
            json!({
                "index": a.index,
                "formula": print_formula(&substitute(&a.formula, &r.binding)),
                "satisfied": a.satisfied,
                "witness": witness,
            })
        })
        .collect();
    json!({
        "theory": r.theory,
        "binding": binding_json(&r.binding),
        "satisfied": r.satisfied(),
        "axioms": axioms,
    })
}

fn report_text(r: &CheckReport, paint: &Paint) -> String {
    let mut s = String::new();
    for a in &r.axioms {
        let f = print_formula(&substitute(&a.formula, &r.binding));
        let verdict = if a.satisfied {
            paint.green("satisfied")
        } else {
            paint.red("violated")
        };
        s.push_str(&format!("{f}: {verdict}\n"));
        if let Some(w) = &a.witness {
            let mut line = format!(
                "  fails at t={}: {}",
                w.time,
                print_formula(&substitute(&w.formula, &r.binding))
            );
            if !w.bindings.is_empty() {
                line.push_str(&format!(" with {}", binding_text(&w.bindings)));
            }
            s.push_str(&line);
            s.push('\n');
        }
    }
    s
}

fn cmd_check(theory: &Path, scenario: &Path, bind: &[String], cfg: &Config) -> Result<Output, Failure> {
    let sc = concrete(read_scenario(scenario)?, cfg)?;
    let th = read_theory(theory, &sc)?;
    let fixed = parse_bindings(bind)?;
    let paint = Paint(cfg.color);
    let complete = th.roles.iter().all(|(r, _)| fixed.iter().any(|(f, _)| f == r));
    let (binding, searched) = if complete {
        (fixed, None)
    } else {
        let search = find_bindings(&sc, &th, &fixed, prelude(), &cfg.tol, Execution::default()).map_err(eval_failure)?;
        match search.hits.into_iter().next() {
            Some(c) => (c.binding.roles, Some(search.searched)),
            None => {
                let text = format!(
                    "{}: no satisfying binding among {} candidates\n",
                    th.name, search.searched
                );
                let doc = json!({
                    "command": "check",
                    "theory": th.name,
                    "scenario": sc.name,
                    "satisfied": false,
                    "searched": search.searched,
                    "report": null,
                });
                return Ok(Output {
                    text,
                    json: Some(doc),
                    code: EXIT_FALSE,
                });
            }
        }
    };
    let report = check_theory(&th, &sc, &binding, prelude(), &cfg.tol, EvalPath::Fast).map_err(eval_failure)?;
    let mut text = String::new();
    if let Some(n) = searched {
        text.push_str(&format!(
            "{} {}: found {} after {n} candidates\n",
            paint.bold("binding"),
            th.name,
            binding_text(&binding)
        ));
    }
    text.push_str(&report_text(&report, &paint));
    let code = if report.satisfied() { EXIT_OK } else { EXIT_FALSE };
    let doc = json!({
        "command": "check",
        "theory": th.name,
        "scenario": sc.name,
        "satisfied": report.satisfied(),
        "searched": searched,
        "report": report_json(&report),
    });
    Ok(Output {
        text,
        json: Some(doc),
        code,
    })
}

fn trace_text(sc: &Scenario, trace: &Trace) -> String {
    let mut s = String::new();
    for st in &trace.states {
        let mut parts = Vec::new();
        for (e, vs) in sc.entities.iter().zip(&st.values) {
            for ((p, _), v) in e.params.iter().zip(vs) {
                parts.push(format!("{}.{p}={}", e.id, format_rational(v)));
            }
        }
        for f in &st.forces {
            parts.push(format!(
                "force {} on {} ({}, {})",
                f.label,
                f.target,
                format_rational(&f.dx),
                format_rational(&f.dy)
            ));
        }
        s.push_str(&format!("t={} {}\n", st.time, parts.join(" ")));
    }
    s
}

fn cmd_simulate(scenario: &Path, steps: Option<usize>, trace_out: Option<&Path>, cfg: &Config) -> Result<Output, Failure> {
    let mut sc = read_scenario(scenario)?;
    if let Some(n) = steps {
        if n == 0 {
            return Err(usage("--steps must be at least 1"));
        }
        match &mut sc.body {
            ScenarioBody::Generative { horizon, .. } => *horizon = n,
            ScenarioBody::Concrete(_) => {
                return Err(fail(
                    EXIT_ERROR,
                    "simulation",
                    format!("error: scenario `{}` has no rules", sc.name),
                ))
            }
        }
    }
    let trace = simulate(&sc, prelude(), &sim_config(cfg)).map_err(dynamics_failure)?;
    let doc = serialize_trace(&sc.entities, &trace);
    if let Some(p) = trace_out {
        std::fs::write(p, &doc).map_err(|e| fail(EXIT_ERROR, "io", format!("{}: {e}", p.display())))?;
    }
    let json: Value = serde_json::from_str(&doc).expect("serialized traces are JSON");
    Ok(Output {
        text: trace_text(&sc, &trace),
        json: Some(json),
        code: EXIT_OK,
    })
}

fn schema_failure(e: impl std::fmt::Display) -> Failure {
    fail(
        EXIT_ERROR,
        "usage",
        format!("error: {e} (known: {})", SCHEMA_NAMES.join(", ")),
    )
}

fn schema_binding_json(b: &SchemaBinding) -> Value {
    json!({"schema": b.schema, "roles": binding_json(&b.roles)})
}

fn cmd_classify(scenario: &Path, names: &[String], cfg: &Config) -> Result<Output, Failure> {
    let sc = concrete(read_scenario(scenario)?, cfg)?;
    let names: Vec<&str> = if names.is_empty() {
        SCHEMA_NAMES.to_vec()
    } else {
        names.iter().map(|s| s.trim()).collect()
    };
    let schemas = names
        .iter()
        .map(|n| schema_theory(n).map_err(schema_failure))
        .collect::<Result<Vec<_>, _>>()?;
    let found = classify(&sc, &schemas, prelude(), &cfg.tol, Execution::default()).map_err(eval_failure)?;
    let mut text = String::new();
    for c in &found {
        text.push_str(&format!("{}({})\n", c.binding.schema, binding_text(&c.binding.roles)));
    }
    if found.is_empty() {
        text.push_str("no schema applies\n");
    }
    let doc = json!({
        "command": "classify",
        "scenario": sc.name,
        "bindings": found.iter().map(|c| schema_binding_json(&c.binding)).collect::<Vec<_>>(),
    });
    Ok(Output {
        text,
        json: Some(doc),
        code: EXIT_OK,
    })
}

fn cmd_analogy(a: &Path, b: &Path, schema: &str, cfg: &Config) -> Result<Output, Failure> {
    let th = schema_theory(schema).map_err(schema_failure)?;
    let sa = concrete(read_scenario(a)?, cfg)?;
    let sb = concrete(read_scenario(b)?, cfg)?;
    let pair = analogy(&sa, &sb, &th, prelude(), &cfg.tol, Execution::default()).map_err(eval_failure)?;
    Ok(match pair {
        Some((x, y)) => Output {
            text: format!(
                "{}: {} ~ {}\n",
                th.name,
                binding_text(&x.roles),
                binding_text(&y.roles)
            ),
            json: Some(json!({
                "command": "analogy",
                "schema": th.name,
                "found": true,
                "a": schema_binding_json(&x),
                "b": schema_binding_json(&y),
            })),
            code: EXIT_OK,
        },
        None => Output {
            text: format!("{}: no analogy between {} and {}\n", th.name, sa.name, sb.name),
            json: Some(json!({
                "command": "analogy",
                "schema": th.name,
                "found": false,
                "a": null,
                "b": null,
            })),
            code: EXIT_FALSE,
        },
    })
}

/// `x0:x1,y0:y1[,step]`.
fn parse_grid(s: &str) -> Result<((i64, i64), (i64, i64), Option<Rational>), Failure> {
    let bad = || usage(format!("--grid expects x0:x1,y0:y1[,step], got `{s}`"));
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let range = |p: &str| -> Option<(i64, i64)> {
        let (a, b) = p.split_once(':')?;
        Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
    };
    let x = range(parts[0]).ok_or_else(bad)?;
    let y = range(parts[1]).ok_or_else(bad)?;
    let step = match parts.get(2) {
        Some(p) => Some(parse_rational(p).ok_or_else(bad)?),
        None => None,
    };
    Ok((x, y, step))
}

fn enumerate_failure(e: EnumerateError) -> Failure {
    match e {
        EnumerateError::SearchSpaceTooLarge { .. } => fail(EXIT_TOO_LARGE, "too-large", format!("error: {e}")),
        other => fail(EXIT_ERROR, "enumeration", format!("error: {other}")),
    }
}

fn model_json(sc: &Scenario, grid: &GridSpec, trace: &Trace) -> Value {
    let mut places = Vec::new();
    for id in &grid.free {
        let Some(e) = sc.entity_index(id) else { continue };
        let d = &sc.entities[e];
        let (Some(px), Some(py)) = (d.param_index("x"), d.param_index("y")) else { continue };
        for st in &trace.states {
            places.push(json!({
                "entity": id,
                "t": st.time,
                "x": format_rational(&st.values[e][px]),
                "y": format_rational(&st.values[e][py]),
            }));
        }
    }
    Value::Array(places)
}

#[allow(clippy::too_many_arguments)]
fn cmd_enumerate(
    theory: &Path,
    scenario: &Path,
    grid: &str,
    steps: Option<usize>,
    free: &[String],
    bind: &[String],
    count_only: bool,
    cfg: &Config,
) -> Result<Output, Failure> {
    let sc = read_scenario(scenario)?;
    let th = read_theory(theory, &sc)?;
    let binding = parse_bindings(bind)?;
    let (x, y, step) = parse_grid(grid)?;
    let free: Vec<String> = if free.is_empty() {
        sc.entities
            .iter()
            .filter(|e| sc.hierarchy().is_subsort(&e.sort, "Object").unwrap_or(false))
            .map(|e| e.id.clone())
            .collect()
    } else {
        free.iter().map(|s| s.trim().to_string()).collect()
    };
    let mut spec = GridSpec::new(x, y, free);
    if let Some(s) = step {
        spec.step = s;
    }
    if let Some(t) = steps {
        spec.horizon = t;
    }
    spec.cap = cfg.cap;
    let exec = Execution::default();
    let (count, models) = if count_only {
        let n = count_models(&th, &sc, &spec, &binding, prelude(), &cfg.tol, exec).map_err(enumerate_failure)?;
        (n, None)
    } else {
        let ms = enumerate_models(&th, &sc, &spec, &binding, prelude(), &cfg.tol, exec).map_err(enumerate_failure)?;
        (ms.len() as u64, Some(ms))
    };
    let mut text = format!("{count} model{}\n", if count == 1 { "" } else { "s" });
    if let Some(ms) = &models {
        for m in ms {
            text.push_str(&ischema::enumerate::describe_model(&sc, &spec, m));
            text.push('\n');
        }
    }
    let doc = json!({
        "command": "enumerate",
        "theory": th.name,
        "scenario": sc.name,
        "count": count,
        "models": models.as_ref().map(|ms| ms.iter().map(|m| model_json(&sc, &spec, m)).collect::<Vec<_>>()),
    });
    Ok(Output {
        text,
        json: Some(doc),
        code: EXIT_OK,
    })
}
