//! Concrete syntax: `.mpst` protocol files, pretty printing, JSON and DOT
//! output.
//!
//! ```text
//! protocol purchase_response
//! private s : server, api
//! private t : server, client
//! api -> server : s {
//!   OrderPurchased(Id) . server -> client : t { OrderComplete(Infos) . end, ERR . end },
//!   ERR . server -> client : t { UnexpectedError() . end, ERR . end }
//! }
//! ```

pub mod dot;
pub mod json;
mod lexer;
mod parser;
mod printer;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::coherence::{check_coherence, infer_environment, Binding, CoherenceReport, Delta, EndMode, Gamma};
use crate::kernel::{Endpoint, GlobalType, PublicDecl, TermPath};

pub use parser::{parse, parse_global_type, parse_spanned, parse_syntax};
pub use printer::{garbage_collect, pretty_print, pretty_print_term, pretty_print_with, PrintOptions};
pub use validate::{validate, WellFormednessKind};

/// 1-based position of a piece of source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Source positions of the parsed nodes, keyed by their term path.
pub type SpanTable = BTreeMap<TermPath, SourceSpan>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateDecl {
    pub channel: String,
    pub left: Endpoint,
    pub right: Endpoint,
}

/// A protocol file: a name, the channel environment it starts in, and the
/// global type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolSpec {
    pub name: String,
    pub publics: Vec<PublicDecl>,
    pub privates: Vec<PrivateDecl>,
    pub body: GlobalType,
}

impl ProtocolSpec {
    pub fn new(name: impl Into<String>, body: GlobalType) -> Self {
        ProtocolSpec {
            name: name.into(),
            publics: Vec::new(),
            privates: Vec::new(),
            body,
        }
    }

    /// The environment declared by the header.
    pub fn initial_gamma(&self) -> Gamma {
        let mut gamma = Gamma::new();
        for d in &self.publics {
            gamma.insert(d.channel.clone(), Binding::Public(d.server.clone()));
        }
        for d in &self.privates {
            gamma.insert(
                d.channel.clone(),
                Binding::session(d.left.participant.clone(), d.right.participant.clone()),
            );
        }
        gamma
    }

    /// Coherence of the body under the declared environment.
    pub fn check(&self, mode: EndMode) -> CoherenceReport {
        check_coherence(&self.body, &Delta::new(), &self.initial_gamma(), mode)
    }

    /// The same protocol at a later state: publics are kept, private
    /// declarations are rebuilt from the channels still in use.
    pub fn with_body(&self, body: GlobalType) -> ProtocolSpec {
        let privates = infer_environment(&body, &self.publics)
            .iter()
            .filter_map(|(c, b)| match b {
                Binding::Session(ps) => {
                    let mut it = ps.iter().cloned();
                    let left = it.next()?;
                    let right = it.next().unwrap_or_else(|| left.clone());
                    Some(PrivateDecl {
                        channel: c.clone(),
                        left: Endpoint::live(left),
                        right: Endpoint::live(right),
                    })
                }
                Binding::Public(_) => None,
            })
            .collect();
        ProtocolSpec {
            name: self.name.clone(),
            publics: self.publics.clone(),
            privates,
            body,
        }
    }

    pub fn declared_channels(&self) -> impl Iterator<Item = &str> {
        self.publics
            .iter()
            .map(|d| d.channel.as_str())
            .chain(self.privates.iter().map(|d| d.channel.as_str()))
    }
}

impl fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}

/// A parsed spec with the source position of each node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub spec: ProtocolSpec,
    pub spans: SpanTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{span}: unexpected character '{found}'")]
    Lex { span: SourceSpan, found: char },
    #[error("{span}: expected {}, found {found}", expected.join(" or "))]
    Parse {
        span: SourceSpan,
        expected: Vec<String>,
        found: String,
    },
    #[error("{span}: {kind}: {message}")]
    WellFormedness {
        span: SourceSpan,
        kind: WellFormednessKind,
        message: String,
    },
}

impl FrontendError {
    pub fn span(&self) -> SourceSpan {
        match self {
            FrontendError::Lex { span, .. }
            | FrontendError::Parse { span, .. }
            | FrontendError::WellFormedness { span, .. } => *span,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successor_header_is_rebuilt() {
        let spec = parse(
            "protocol p
             private s : a, b
             private u : a, c
             a -> b : s { L() . end, ERR . end }",
        )
        .unwrap();
        let next = spec.with_body(GlobalType::End);
        assert!(next.privates.is_empty());
        let same = spec.with_body(spec.body.clone());
        assert_eq!(same.privates.len(), 1);
        assert_eq!(same.privates[0].channel, "s");
    }
}
