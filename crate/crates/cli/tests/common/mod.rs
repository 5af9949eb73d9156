#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub out: String,
    pub err: String,
}

pub fn ischema(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ischema").chain(args.iter().copied());
    let code = ischema_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

pub fn shipped(file: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(file);
    p.to_str().unwrap().to_string()
}

pub fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(ischema_cli::OUTPUT_SCHEMA).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

/// Parses `text` as JSON and panics with every schema violation if it does
/// not validate.
pub fn valid_json(v: &jsonschema::Validator, text: &str) -> Value {
    let doc: Value = serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}):\n{text}"));
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{text}");
    doc
}
