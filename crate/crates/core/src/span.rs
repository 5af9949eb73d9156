use std::fmt;
use std::sync::Arc;

/// A location in a source file; line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// Optional source location attached to AST nodes. Locations never take part
/// in equality, so parsed and constructed trees compare by structure alone.
#[derive(Debug, Clone, Default)]
pub struct Loc(pub Option<SourceSpan>);

impl PartialEq for Loc {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Loc {}

impl Loc {
    pub fn none() -> Self {
        Loc(None)
    }

    pub fn span(&self) -> Option<&SourceSpan> {
        self.0.as_ref()
    }
}

/// A symbol occurrence: role, bound variable or entity id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub name: String,
    pub loc: Loc,
}

impl Term {
    pub fn new(name: impl Into<String>) -> Self {
        Term {
            name: name.into(),
            loc: Loc::none(),
        }
    }
}

impl From<&str> for Term {
    fn from(s: &str) -> Self {
        Term::new(s)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}
