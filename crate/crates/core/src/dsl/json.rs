use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::diag::{Diagnostic, Diagnostics};
use crate::model::{EntityDecl, ForceFluent, ForceMode, ShapeKind, State, Trace};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::span::SourceSpan;

/// Entity declarations together with a trace over them.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDoc {
    pub entities: Vec<EntityDecl>,
    pub trace: Trace,
}

/// Canonical JSON: sorted keys, rationals as strings, two-space indent.
pub fn serialize_trace(entities: &[EntityDecl], trace: &Trace) -> String {
    let decls: Vec<Value> = entities
        .iter()
        .map(|e| {
            json!({
                "id": e.id,
                "sort": e.sort,
                "shape": e.shape.keyword(),
                "params": e.params.iter().map(|(p, _)| p.as_str()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let states: Vec<Value> = trace
        .states
        .iter()
        .map(|s| {
            let mut values = Map::new();
            for (e, vs) in entities.iter().zip(&s.values) {
                for ((p, _), v) in e.params.iter().zip(vs) {
                    values.insert(format!("{}.{p}", e.id), Value::String(format_rational(v)));
                }
            }
            let forces: Vec<Value> = s
                .forces
                .iter()
                .map(|f| {
                    json!({
                        "target": f.target,
                        "label": f.label,
                        "dx": format_rational(&f.dx),
                        "dy": format_rational(&f.dy),
                        "mode": f.mode.keyword(),
                    })
                })
                .collect();
            json!({"t": s.time, "values": values, "forces": forces})
        })
        .collect();
    let doc = json!({"length": trace.len(), "entities": decls, "states": states});
    let mut out = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
    out.push('\n');
    out
}

fn whole(file: &Arc<str>) -> SourceSpan {
    SourceSpan {
        file: file.clone(),
        line: 1,
        column: 1,
        length: 0,
    }
}

struct Reader {
    file: Arc<str>,
}

impl Reader {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, Diagnostic> {
        Err(Diagnostic::error("trace-format", msg, whole(&self.file)))
    }

    fn field<'v>(&self, obj: &'v Value, key: &str, ctx: &str) -> Result<&'v Value, Diagnostic> {
        match obj.get(key) {
            Some(v) => Ok(v),
            None => self.fail(format!("{ctx}: missing field `{key}`")),
        }
    }

    fn str<'v>(&self, obj: &'v Value, key: &str, ctx: &str) -> Result<&'v str, Diagnostic> {
        match self.field(obj, key, ctx)?.as_str() {
            Some(s) => Ok(s),
            None => self.fail(format!("{ctx}: `{key}` must be a string")),
        }
    }

    fn array<'v>(&self, obj: &'v Value, key: &str, ctx: &str) -> Result<&'v Vec<Value>, Diagnostic> {
        match self.field(obj, key, ctx)?.as_array() {
            Some(a) => Ok(a),
            None => self.fail(format!("{ctx}: `{key}` must be an array")),
        }
    }

    fn rational(&self, obj: &Value, key: &str, ctx: &str) -> Result<Rational, Diagnostic> {
        let s = self.str(obj, key, ctx)?;
        match parse_rational(s) {
            Some(v) => Ok(v),
            None => self.fail(format!("{ctx}: `{s}` is not a rational")),
        }
    }
}

/// Reads a trace document. Entity declarations take their values from the
/// first state.
pub fn parse_trace_json(text: &str, file: &str) -> Result<TraceDoc, Diagnostics> {
    let file: Arc<str> = Arc::from(file);
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        Diagnostic::error(
            "syntax",
            e.to_string(),
            SourceSpan {
                file: file.clone(),
                line: e.line().max(1),
                column: e.column().max(1),
                length: 1,
            },
        )
    })?;
    let rd = Reader { file };
    let length = match rd.field(&doc, "length", "trace")?.as_u64() {
        Some(n) if n >= 1 => n as usize,
        _ => return Err(rd.fail::<()>("trace: `length` must be a positive integer").unwrap_err().into()),
    };
    let mut layout: Vec<(String, String, ShapeKind, Vec<String>)> = Vec::new();
    for (i, e) in rd.array(&doc, "entities", "trace")?.iter().enumerate() {
        let ctx = format!("entity {i}");
        let id = rd.str(e, "id", &ctx)?.to_string();
        let sort = rd.str(e, "sort", &ctx)?.to_string();
        let kw = rd.str(e, "shape", &ctx)?;
        let Some(shape) = ShapeKind::from_keyword(kw) else {
            return Err(rd.fail::<()>(format!("{ctx}: unknown shape `{kw}`")).unwrap_err().into());
        };
        let mut params = Vec::new();
        for p in rd.array(e, "params", &ctx)? {
            match p.as_str() {
                Some(p) => params.push(p.to_string()),
                None => return Err(rd.fail::<()>(format!("{ctx}: parameter names must be strings")).unwrap_err().into()),
            }
        }
        let n = shape.params().len();
        if params.len() < n || params[..n].iter().zip(shape.params()).any(|(a, b)| a != b) {
            return Err(rd
                .fail::<()>(format!("{ctx}: parameters must start with those of {kw}"))
                .unwrap_err()
                .into());
        }
        layout.push((id, sort, shape, params));
    }
    let raw_states = rd.array(&doc, "states", "trace")?;
    if raw_states.len() != length {
        return Err(rd
            .fail::<()>(format!("trace: `length` is {length} but {} states are given", raw_states.len()))
            .unwrap_err()
            .into());
    }
    let mut states = Vec::with_capacity(length);
    for (i, s) in raw_states.iter().enumerate() {
        let ctx = format!("state {i}");
        if rd.field(s, "t", &ctx)?.as_u64() != Some(i as u64) {
            return Err(rd.fail::<()>(format!("{ctx}: `t` must be {i}")).unwrap_err().into());
        }
        let Some(values) = rd.field(s, "values", &ctx)?.as_object() else {
            return Err(rd.fail::<()>(format!("{ctx}: `values` must be an object")).unwrap_err().into());
        };
        let mut expected = 0;
        let mut rows = Vec::with_capacity(layout.len());
        for (id, _, _, params) in &layout {
            let mut row = Vec::with_capacity(params.len());
            for p in params {
                let key = format!("{id}.{p}");
                let v = values.get(&key).and_then(Value::as_str).and_then(parse_rational);
                match v {
                    Some(v) => row.push(v),
                    None => return Err(rd.fail::<()>(format!("{ctx}: `{key}` missing or not a rational")).unwrap_err().into()),
                }
                expected += 1;
            }
            rows.push(row);
        }
        if values.len() != expected {
            return Err(rd.fail::<()>(format!("{ctx}: unexpected keys in `values`")).unwrap_err().into());
        }
        let mut forces = Vec::new();
        for f in rd.array(s, "forces", &ctx)? {
            let mode = rd.str(f, "mode", &ctx)?;
            let Some(mode) = ForceMode::from_keyword(mode) else {
                return Err(rd.fail::<()>(format!("{ctx}: unknown force mode `{mode}`")).unwrap_err().into());
            };
            forces.push(ForceFluent {
                target: rd.str(f, "target", &ctx)?.to_string(),
                label: rd.str(f, "label", &ctx)?.to_string(),
                dx: rd.rational(f, "dx", &ctx)?,
                dy: rd.rational(f, "dy", &ctx)?,
                mode,
            });
        }
        states.push(State {
            time: i,
            values: rows,
            forces,
        });
    }
    let mut entities = Vec::with_capacity(layout.len());
    for (k, (id, sort, shape, params)) in layout.into_iter().enumerate() {
        let vals = &states[0].values[k];
        let n = shape.params().len();
        let mut decl = EntityDecl::new(id, sort, shape, vals[..n].to_vec())
            .map_err(|e| rd.fail::<()>(e.to_string()).unwrap_err())?;
        for (p, v) in params[n..].iter().zip(&vals[n..]) {
            decl = decl.with_attribute(p.clone(), v.clone());
        }
        entities.push(decl);
    }
    let trace = Trace { states };
    trace
        .validate(&entities)
        .map_err(|e| rd.fail::<()>(e.to_string()).unwrap_err())?;
    Ok(TraceDoc { entities, trace })
}
