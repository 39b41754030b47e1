//! Metatheory instances checked state by state: no orphan participants,
//! preservation of coherence, preservation under crash, and weakening.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::StateGraph;
use crate::analysis::{crash, participants};
use crate::coherence::{check_coherence, check_state, infer_environment, weaken_delta, Delta, EndMode, Gamma};
use crate::kernel::{free_vars, GlobalType, PublicDecl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    NoOrphans,
    PreservationOfCoherence,
    CrashPreservation,
    Weakening,
}

impl Property {
    pub fn all() -> [Property; 4] {
        [
            Property::NoOrphans,
            Property::PreservationOfCoherence,
            Property::CrashPreservation,
            Property::Weakening,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Property::NoOrphans => "no-orphans",
            Property::PreservationOfCoherence => "preservation-of-coherence",
            Property::CrashPreservation => "crash-preservation",
            Property::Weakening => "weakening",
        }
    }

    pub fn from_name(s: &str) -> Option<Property> {
        Property::all().into_iter().find(|p| p.name() == s)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropertyStatus {
    Holds,
    Violated,
    /// The initial state is not coherent, so the property says nothing.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub state: usize,
    pub label: Option<String>,
    pub diagnosis: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyVerdict {
    pub property: Property,
    pub status: PropertyStatus,
    /// Number of coherent states the property was checked on.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl fmt::Display for PropertyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            PropertyStatus::Holds => "holds",
            PropertyStatus::Violated => "VIOLATED",
            PropertyStatus::NotApplicable => "not applicable",
        };
        write!(
            f,
            "{}: {status} ({} states checked, {} violations)",
            self.property,
            self.checked,
            self.violations.len()
        )?;
        for v in self.violations.iter().take(5) {
            write!(f, "\n  state {}", v.state)?;
            if let Some(l) = &v.label {
                write!(f, " via {l}")?;
            }
            write!(f, ": {}", v.diagnosis)?;
        }
        Ok(())
    }
}

pub fn check_property(graph: &StateGraph, property: Property, publics: &[PublicDecl], mode: EndMode) -> PropertyVerdict {
    let coherent = coherence_of_states(graph, publics, mode);
    verdict(graph, property, publics, mode, &coherent)
}

/// All four properties, sharing one coherence pass over the states.
pub fn check_all(graph: &StateGraph, publics: &[PublicDecl], mode: EndMode) -> Vec<PropertyVerdict> {
    let coherent = coherence_of_states(graph, publics, mode);
    Property::all()
        .into_iter()
        .map(|p| verdict(graph, p, publics, mode, &coherent))
        .collect()
}

fn coherence_of_states(graph: &StateGraph, publics: &[PublicDecl], mode: EndMode) -> Vec<Result<(), String>> {
    graph
        .states
        .iter()
        .map(|g| {
            let r = check_state(g, publics, mode);
            match r.failures.first() {
                None => Ok(()),
                Some(f) => Err(f.to_string()),
            }
        })
        .collect()
}

fn verdict(
    graph: &StateGraph,
    property: Property,
    publics: &[PublicDecl],
    mode: EndMode,
    coherent: &[Result<(), String>],
) -> PropertyVerdict {
    if coherent[0].is_err() {
        return PropertyVerdict {
            property,
            status: PropertyStatus::NotApplicable,
            checked: 0,
            violations: Vec::new(),
        };
    }
    let mut violations = Vec::new();
    let mut checked = 0;
    for (id, g) in graph.states.iter().enumerate() {
        if coherent[id].is_err() {
            continue;
        }
        checked += 1;
        match property {
            Property::NoOrphans => {
                let pt = participants(g);
                for e in graph.outgoing(id) {
                    let orphans: Vec<String> = e.label.subjects().difference(&pt).map(|p| p.to_string()).collect();
                    if !orphans.is_empty() {
                        violations.push(Violation {
                            state: id,
                            label: Some(e.label.to_string()),
                            diagnosis: format!("subjects not among the participants: {}", orphans.join(", ")),
                        });
                    }
                }
            }
            Property::PreservationOfCoherence => {
                for e in graph.outgoing(id) {
                    if let Err(why) = &coherent[e.dst] {
                        violations.push(Violation {
                            state: id,
                            label: Some(e.label.to_string()),
                            diagnosis: format!("successor {} is incoherent: {why}", e.dst),
                        });
                    }
                }
            }
            Property::CrashPreservation => {
                for p in participants(g) {
                    let diagnosis = match crash(g, &p) {
                        Err(e) => Some(e.to_string()),
                        Ok(c) => match graph.state_id(&c) {
                            Some(dst) => coherent[dst].clone().err(),
                            None => check_state(&c, publics, mode).failures.first().map(|f| f.to_string()),
                        },
                    };
                    if let Some(d) = diagnosis {
                        violations.push(Violation {
                            state: id,
                            label: Some(format!("{p} !crash")),
                            diagnosis: d,
                        });
                    }
                }
            }
            Property::Weakening => {
                let gamma = infer_environment(g, publics);
                let y = unused_variable(g);
                for snapshot in [Gamma::new(), gamma.clone()] {
                    let delta = weaken_delta(&Delta::new(), &y, snapshot).expect("fresh variable");
                    if let Some(f) = check_coherence(g, &delta, &gamma, mode).failures.first() {
                        violations.push(Violation {
                            state: id,
                            label: None,
                            diagnosis: format!("not coherent after adding {y}: {f}"),
                        });
                    }
                }
            }
        }
    }
    PropertyVerdict {
        property,
        status: if violations.is_empty() {
            PropertyStatus::Holds
        } else {
            PropertyStatus::Violated
        },
        checked,
        violations,
    }
}

fn unused_variable(g: &GlobalType) -> String {
    let mut used = free_vars(g);
    collect_binders(g, &mut used);
    (0..)
        .map(|i| format!("Y{i}"))
        .find(|y| !used.contains(y))
        .expect("unbounded supply")
}

fn collect_binders(g: &GlobalType, out: &mut BTreeSet<String>) {
    match g {
        GlobalType::End | GlobalType::Var(_) => {}
        GlobalType::Rec { var, body, .. } => {
            out.insert(var.clone());
            collect_binders(body, out);
        }
        GlobalType::Par(l, r) => {
            collect_binders(l, out);
            collect_binders(r, out);
        }
        GlobalType::Choice(gs) => gs.iter().for_each(|g| collect_binders(g, out)),
        GlobalType::Action(a) => a.branches.iter().for_each(|b| collect_binders(&b.cont, out)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{explore, ExploreOptions};
    use super::*;
    use crate::frontend::{parse, parse_syntax};

    #[test]
    fn small_protocol_satisfies_everything() {
        let spec = parse("protocol p\nprivate s : a, b\na -> b : s { L() . end, ERR . end }").unwrap();
        let g = explore(&spec.body, &ExploreOptions::default());
        for v in check_all(&g, &spec.publics, EndMode::RelaxedEnd) {
            assert_eq!(v.status, PropertyStatus::Holds, "{v}");
            assert_eq!(v.checked, 5);
        }
    }

    #[test]
    fn incoherent_start_is_not_applicable() {
        let spec = parse_syntax("protocol p\nprivate s : a, b\na -> b : s { L() . end, L() . end, ERR . end }")
            .unwrap()
            .spec;
        let g = explore(&spec.body, &ExploreOptions::default());
        let v = check_property(&g, Property::PreservationOfCoherence, &spec.publics, EndMode::RelaxedEnd);
        assert_eq!(v.status, PropertyStatus::NotApplicable);
    }

    #[test]
    fn names_round_trip() {
        for p in Property::all() {
            assert_eq!(Property::from_name(p.name()), Some(p));
        }
        assert_eq!(Property::from_name("nope"), None);
    }
}
