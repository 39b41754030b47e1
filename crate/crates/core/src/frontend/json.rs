//! JSON documents for coherence reports, state graphs and traces. Field
//! order is fixed by the struct layouts below.

use serde::Serialize;

use super::{SourceSpan, SpanTable};
use crate::analysis::TransitionLabel;
use crate::coherence::{CoherenceReport, Verdict};
use crate::explorer::{Budgets, PropertyStatus, PropertyVerdict, StateGraph, Violation};
use crate::semantics::{RuleName, Transition};

#[derive(Serialize)]
struct ReportJson<'a> {
    protocol: &'a str,
    mode: String,
    verdict: &'static str,
    failures: Vec<FailureJson>,
}

#[derive(Serialize)]
struct FailureJson {
    rule: &'static str,
    path: String,
    message: String,
    span: Option<SourceSpan>,
}

#[derive(Serialize)]
pub struct LabelJson {
    pub kind: &'static str,
    pub subjects: Vec<String>,
    pub channel: Option<String>,
    pub message: Option<String>,
}

impl From<&TransitionLabel> for LabelJson {
    fn from(l: &TransitionLabel) -> Self {
        LabelJson {
            kind: l.kind(),
            subjects: match l {
                TransitionLabel::Comm { sender, receiver, .. } => vec![sender.to_string(), receiver.to_string()],
                TransitionLabel::Fail { subject, .. } | TransitionLabel::Crash { subject } => vec![subject.to_string()],
            },
            channel: l.channel().map(|c| c.to_string()),
            message: l.message().map(|m| m.to_string()),
        }
    }
}

#[derive(Serialize)]
struct EdgeJson {
    src: usize,
    label: LabelJson,
    rule: &'static str,
    dst: usize,
}

#[derive(Serialize)]
struct StateJson {
    id: usize,
    term: String,
}

#[derive(Serialize)]
struct PropertyJson<'a> {
    name: &'static str,
    status: PropertyStatus,
    checked: usize,
    violations: &'a [Violation],
}

#[derive(Serialize)]
struct GraphJson<'a> {
    budgets: Budgets,
    truncated: bool,
    states: Vec<StateJson>,
    edges: Vec<EdgeJson>,
    properties: Vec<PropertyJson<'a>>,
}

#[derive(Serialize)]
struct TraceJson {
    seed: u64,
    steps: Vec<EdgeJson>,
}

fn edge(src: usize, label: &TransitionLabel, rule: RuleName, dst: usize) -> EdgeJson {
    EdgeJson {
        src,
        label: label.into(),
        rule: rule.name(),
        dst,
    }
}

fn render<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("plain data always serializes");
    s.push('\n');
    s
}

pub fn coherence_report_json(protocol: &str, report: &CoherenceReport, spans: &SpanTable) -> String {
    render(&ReportJson {
        protocol,
        mode: report.mode.to_string(),
        verdict: match report.verdict {
            Verdict::Coherent => "coherent",
            Verdict::Incoherent => "incoherent",
        },
        failures: report
            .failures
            .iter()
            .map(|f| FailureJson {
                rule: f.rule.name(),
                path: f.path.to_string(),
                message: f.message.clone(),
                span: spans.get(&f.path).copied(),
            })
            .collect(),
    })
}

pub fn state_graph_json(graph: &StateGraph, verdicts: &[PropertyVerdict]) -> String {
    render(&GraphJson {
        budgets: graph.budgets,
        truncated: graph.truncated,
        states: graph
            .states
            .iter()
            .enumerate()
            .map(|(id, g)| StateJson { id, term: g.to_string() })
            .collect(),
        edges: graph.edges.iter().map(|e| edge(e.src, &e.label, e.rule, e.dst)).collect(),
        properties: verdicts
            .iter()
            .map(|v| PropertyJson {
                name: v.property.name(),
                status: v.status,
                checked: v.checked,
                violations: &v.violations,
            })
            .collect(),
    })
}

/// A trace as a path: step `i` goes from position `i` to `i + 1`.
pub fn trace_json(seed: u64, steps: &[Transition]) -> String {
    render(&TraceJson {
        seed,
        steps: steps
            .iter()
            .enumerate()
            .map(|(i, t)| edge(i, &t.label, t.rule, i + 1))
            .collect(),
    })
}
