//! Exit-code classification of failures.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Io,
    Invariant,
    Numerical,
    Verification,
}

impl Kind {
    pub fn code(self) -> i32 {
        match self {
            Kind::Usage => 1,
            Kind::Io => 2,
            Kind::Invariant => 3,
            Kind::Numerical => 4,
            Kind::Verification => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Io => "io",
            Kind::Invariant => "invariant",
            Kind::Numerical => "numerical",
            Kind::Verification => "verification",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub kind: Kind,
    pub msg: String,
}

impl Failure {
    pub fn new(kind: Kind, msg: impl Into<String>) -> Self {
        Self { kind, msg: msg.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Failure {}

fn core_kind(e: &maqp_core::Error) -> Kind {
    use maqp_core::Error as E;
    match e {
        E::Io { .. } | E::EmptyDataset(_) | E::Image { .. } => Kind::Io,
        E::NonFinite(_) => Kind::Numerical,
        _ => Kind::Invariant,
    }
}

/// Finds the most specific classification in an error chain.
pub fn classify(err: &anyhow::Error) -> Kind {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.kind;
        }
        if let Some(e) = cause.downcast_ref::<maqp_core::Error>() {
            return core_kind(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return Kind::Io;
        }
    }
    Kind::Invariant
}

/// One machine-parsable line.
pub fn render(err: &anyhow::Error) -> String {
    let kind = classify(err);
    let mut msg = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if msg.ends_with(&part) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&part);
    }
    let msg = msg.replace('\n', " ");
    format!("maqp: error code={} kind={}: {msg}", kind.code(), kind.name())
}
