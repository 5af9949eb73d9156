use std::fmt;
use std::sync::Arc;

use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(code: &'static str, message: impl Into<String>, span: SourceSpan) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span,
        }
    }

    /// The diagnostic with the offending source line and a caret underline.
    pub fn render(&self, source: &str) -> String {
        let mut out = self.to_string();
        if let Some(line) = source.lines().nth(self.span.line.saturating_sub(1)) {
            let pad = " ".repeat(self.span.column.saturating_sub(1));
            let marks = "^".repeat(self.span.length.max(1));
            out.push_str(&format!("\n  | {line}\n  | {pad}{marks}"));
        }
        out
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}[{}]: {}", self.span, self.code, self.message)
    }
}

/// A non-empty list of diagnostics, at least one of them an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn from_checks(ds: Vec<Diagnostic>) -> Result<(), Diagnostics> {
        if ds.iter().any(|d| d.severity == Severity::Error) {
            Err(Diagnostics(ds))
        } else {
            Ok(())
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }

    pub fn render(&self, source: &str) -> String {
        self.0
            .iter()
            .map(|d| d.render(source))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

/// Span used for nodes built in code rather than parsed.
pub(crate) fn synthetic_span() -> SourceSpan {
    SourceSpan {
        file: Arc::from("<input>"),
        line: 1,
        column: 1,
        length: 0,
    }
}
