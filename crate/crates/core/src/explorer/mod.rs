//! Bounded breadth-first exploration of the transition system, property
//! checks over the explored states, random walks and random coherent
//! protocols.

mod generate;
mod properties;
mod trace;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::analysis::TransitionLabel;
use crate::kernel::{canonical_key, normalize, GlobalType, Participant, TermPath};
use crate::semantics::{enabled_transitions, RuleName, SemanticsOptions, DEFAULT_MAX_UNFOLD};

pub use generate::{generate_coherent, GenerationError};
pub use properties::{check_all, check_property, Property, PropertyStatus, PropertyVerdict, Violation};
pub use trace::sample_trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budgets {
    pub max_states: usize,
    pub max_depth: usize,
    pub max_unfold_per_binder: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_states: 10_000,
            max_depth: 64,
            max_unfold_per_binder: DEFAULT_MAX_UNFOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExploreOptions {
    pub budgets: Budgets,
    /// Only these participants may crash; `None` lets everyone crash.
    pub crash_only: Option<BTreeSet<Participant>>,
    /// Test-only semantics mutation, see [`SemanticsOptions`].
    pub fire_err_branches: bool,
}

impl ExploreOptions {
    pub fn semantics(&self) -> SemanticsOptions {
        SemanticsOptions {
            max_unfold: self.budgets.max_unfold_per_binder,
            fire_err_branches: self.fire_err_branches,
        }
    }

    fn allows(&self, label: &TransitionLabel) -> bool {
        match (label, &self.crash_only) {
            (TransitionLabel::Crash { subject }, Some(set)) => set.contains(subject),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub label: TransitionLabel,
    pub rule: RuleName,
    pub dst: usize,
    pub path: TermPath,
}

/// Explored states, numbered in discovery order; state 0 is the initial one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateGraph {
    pub budgets: Budgets,
    /// Some budget stopped the exploration early.
    pub truncated: bool,
    pub states: Vec<GlobalType>,
    pub edges: Vec<Edge>,
    index: BTreeMap<String, usize>,
    semantics: SemanticsOptions,
}

impl StateGraph {
    pub fn initial(&self) -> &GlobalType {
        &self.states[0]
    }

    /// Id of the state congruent to `g`, if explored.
    pub fn state_id(&self, g: &GlobalType) -> Option<usize> {
        self.index.get(&canonical_key(&normalize(g))).copied()
    }

    pub fn outgoing(&self, id: usize) -> impl Iterator<Item = &Edge> {
        // edges are recorded in source order
        let start = self.edges.partition_point(|e| e.src < id);
        self.edges[start..].iter().take_while(move |e| e.src == id)
    }

    pub fn semantics(&self) -> SemanticsOptions {
        self.semantics
    }

    /// States without outgoing edges.
    pub fn terminal_states(&self) -> Vec<usize> {
        let with_out: BTreeSet<usize> = self.edges.iter().map(|e| e.src).collect();
        (0..self.states.len()).filter(|i| !with_out.contains(i)).collect()
    }
}

pub fn explore(g0: &GlobalType, opts: &ExploreOptions) -> StateGraph {
    let start = normalize(g0);
    let mut graph = StateGraph {
        budgets: opts.budgets,
        truncated: false,
        states: vec![start.clone()],
        edges: Vec::new(),
        index: BTreeMap::from([(canonical_key(&start), 0)]),
        semantics: opts.semantics(),
    };
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((id, depth)) = queue.pop_front() {
        let en = enabled_transitions(&graph.states[id], graph.semantics);
        graph.truncated |= en.budget_hit;
        let transitions: Vec<_> = en.transitions.into_iter().filter(|t| opts.allows(&t.label)).collect();
        if depth >= opts.budgets.max_depth {
            graph.truncated |= !transitions.is_empty();
            continue;
        }
        for t in transitions {
            let key = canonical_key(&t.successor);
            let dst = match graph.index.get(&key) {
                Some(&d) => d,
                None if graph.states.len() >= opts.budgets.max_states => {
                    graph.truncated = true;
                    continue;
                }
                None => {
                    let d = graph.states.len();
                    graph.index.insert(key, d);
                    graph.states.push(t.successor);
                    queue.push_back((d, depth + 1));
                    d
                }
            };
            graph.edges.push(Edge {
                src: id,
                label: t.label,
                rule: t.rule,
                dst,
                path: t.path,
            });
        }
    }
    graph
}
