//! Labelled transition semantics of global types.
//!
//! Enumeration derives every transition through every context, so a label
//! may be reachable by several derivations. Results are deduplicated on
//! (label, successor up to congruence); the reported rule is the one at the
//! root of the derivation, the smallest in rule order when several agree.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::analysis::{crash, initiator, live_set, participants, spawn_set, TransitionLabel};
use crate::kernel::{
    alpha_rename_bound_channels, canonical_key, normalize, substitute, Action, FreshNames,
    GlobalType, Message, Participant, PathStep, TermPath,
};

pub const DEFAULT_MAX_UNFOLD: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleName {
    Com,
    ComSndFail,
    ComRcvFail,
    Concur,
    Crash,
    Par,
    Rec,
    Choice,
    ChoiceBr,
}

impl RuleName {
    pub fn name(self) -> &'static str {
        match self {
            RuleName::Com => "com",
            RuleName::ComSndFail => "com-snd-fail",
            RuleName::ComRcvFail => "com-rcv-fail",
            RuleName::Concur => "concur",
            RuleName::Crash => "crash",
            RuleName::Par => "par",
            RuleName::Rec => "rec",
            RuleName::Choice => "choice",
            RuleName::ChoiceBr => "choice-br",
        }
    }

    pub fn all() -> [RuleName; 9] {
        use RuleName::*;
        [Com, ComSndFail, ComRcvFail, Concur, Crash, Par, Rec, Choice, ChoiceBr]
    }
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub label: TransitionLabel,
    /// Normalized successor.
    pub successor: GlobalType,
    pub rule: RuleName,
    /// Position of the redex that fired.
    pub path: TermPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemanticsOptions {
    /// Each recursion binder is unfolded at most this many times along a
    /// run; unfolding records its generation on the copies it creates.
    pub max_unfold: u32,
    /// Test-only mutation: lets [com] fire error branches. Used to check
    /// that the harness notices a broken semantics.
    pub fire_err_branches: bool,
}

impl Default for SemanticsOptions {
    fn default() -> Self {
        SemanticsOptions {
            max_unfold: DEFAULT_MAX_UNFOLD,
            fire_err_branches: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    /// Canonically ordered by (label, successor, rule).
    pub transitions: Vec<Transition>,
    /// Some recursion binder could not be unfolded for lack of budget.
    pub budget_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("label {0} is not enabled")]
    NotEnabled(Box<TransitionLabel>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Applied {
    Unique(GlobalType),
    /// Several successors, distinguishable by the redex path.
    Ambiguous(Vec<Transition>),
}

/// All transitions of `g`.
pub fn enabled_transitions(g: &GlobalType, opts: SemanticsOptions) -> Enumeration {
    let deriver = Deriver {
        opts,
        fresh: FreshNames::for_term(g),
        budget_hit: std::cell::Cell::new(false),
    };
    let raws = deriver.derive(g, &TermPath::root(), &BTreeSet::new());
    let mut best: BTreeMap<(TransitionLabel, String), Transition> = BTreeMap::new();
    for r in raws {
        let successor = normalize(&r.succ);
        let key = (r.label.clone(), canonical_key(&successor));
        let t = Transition {
            label: r.label,
            successor,
            rule: r.rule,
            path: r.path,
        };
        match best.get_mut(&key) {
            Some(old) if (t.rule, &t.path) < (old.rule, &old.path) => *old = t,
            Some(_) => {}
            None => {
                best.insert(key, t);
            }
        }
    }
    Enumeration {
        transitions: best.into_values().collect(),
        budget_hit: deriver.budget_hit.get(),
    }
}

/// Successor of `g` under `label`.
pub fn apply_transition(
    g: &GlobalType,
    label: &TransitionLabel,
    opts: SemanticsOptions,
) -> Result<Applied, SemanticsError> {
    let matching: Vec<Transition> = enabled_transitions(g, opts)
        .transitions
        .into_iter()
        .filter(|t| &t.label == label)
        .collect();
    match matching.len() {
        0 => Err(SemanticsError::NotEnabled(Box::new(label.clone()))),
        1 => Ok(Applied::Unique(matching.into_iter().next().unwrap().successor)),
        _ => Ok(Applied::Ambiguous(matching)),
    }
}

struct Raw {
    label: TransitionLabel,
    succ: GlobalType,
    rule: RuleName,
    path: TermPath,
}

struct Deriver {
    opts: SemanticsOptions,
    /// Names of the root term; every unfolding renames against this set, so
    /// the same binder gets the same fresh name in every derivation.
    fresh: FreshNames,
    budget_hit: std::cell::Cell<bool>,
}

impl Deriver {
    /// Derivations at `g`. Labels with a subject in `blocked` could never be
    /// lifted past an enclosing [concur], so they are not derived.
    fn derive(&self, g: &GlobalType, path: &TermPath, blocked: &BTreeSet<Participant>) -> Vec<Raw> {
        let mut out = Vec::new();
        for p in participants(g).difference(blocked) {
            if let Ok(succ) = crash(g, p) {
                out.push(Raw {
                    label: TransitionLabel::Crash { subject: p.clone() },
                    succ,
                    rule: RuleName::Crash,
                    path: path.clone(),
                });
            }
        }
        match g {
            GlobalType::End | GlobalType::Var(_) => {}
            GlobalType::Action(a) => self.derive_action(a, path, blocked, &mut out),
            GlobalType::Par(l, r) => {
                for t in self.derive(l, &path.child(PathStep::Left), blocked) {
                    out.push(Raw {
                        succ: GlobalType::par(t.succ, (**r).clone()),
                        rule: RuleName::Par,
                        ..t
                    });
                }
                for t in self.derive(r, &path.child(PathStep::Right), blocked) {
                    out.push(Raw {
                        succ: GlobalType::par((**l).clone(), t.succ),
                        rule: RuleName::Par,
                        ..t
                    });
                }
            }
            GlobalType::Rec {
                var,
                generation,
                body,
            } => {
                if *generation >= self.opts.max_unfold {
                    self.budget_hit.set(true);
                } else {
                    let mut fresh = self.fresh.clone();
                    let renamed = alpha_rename_bound_channels(body, &mut fresh);
                    let copy = GlobalType::Rec {
                        var: var.clone(),
                        generation: generation + 1,
                        body: body.clone(),
                    };
                    let unfolded = substitute(&renamed, var, &copy);
                    for t in self.derive(&unfolded, &path.child(PathStep::Body), blocked) {
                        out.push(Raw {
                            rule: RuleName::Rec,
                            ..t
                        });
                    }
                }
            }
            GlobalType::Choice(gs) => {
                let per_alt: Vec<Vec<Raw>> = gs
                    .iter()
                    .enumerate()
                    .map(|(i, alt)| dedup(self.derive(alt, &path.child(PathStep::Alt(i)), blocked)))
                    .collect();
                if let Some(init) = initiator(g) {
                    for raws in &per_alt {
                        for t in raws.iter().filter(|t| t.label.subjects().contains(&init)) {
                            out.push(Raw {
                                label: t.label.clone(),
                                succ: t.succ.clone(),
                                rule: RuleName::Choice,
                                path: t.path.clone(),
                            });
                        }
                    }
                }
                for (label, path, succs) in common_labels(&per_alt) {
                    for combo in product(&succs) {
                        out.push(Raw {
                            label: label.clone(),
                            succ: GlobalType::Choice(combo),
                            rule: RuleName::ChoiceBr,
                            path: path.clone(),
                        });
                    }
                }
            }
        }
        dedup(out)
    }

    fn derive_action(&self, a: &Action, path: &TermPath, blocked: &BTreeSet<Participant>, out: &mut Vec<Raw>) {
        let (p, q) = (&a.sender.participant, &a.receiver.participant);
        let both_live =
            a.sender.is_live() && a.receiver.is_live() && !blocked.contains(p) && !blocked.contains(q);
        for b in &a.branches {
            if both_live && (!b.message.is_err() || self.opts.fire_err_branches) {
                out.push(Raw {
                    label: TransitionLabel::Comm {
                        sender: p.clone(),
                        receiver: q.clone(),
                        channel: a.channel.clone(),
                        message: b.message.clone(),
                    },
                    succ: b.cont.clone(),
                    rule: RuleName::Com,
                    path: path.clone(),
                });
            }
        }
        if let Some(err) = a.err_branch() {
            let residual = |crash_sender: bool| {
                let mut r = a.clone();
                r.branches = vec![err.clone()];
                if crash_sender {
                    r.sender.mark_crashed();
                } else {
                    r.receiver.mark_crashed();
                }
                GlobalType::Action(r)
            };
            if p != q && a.sender.is_live() && !blocked.contains(p) {
                out.push(Raw {
                    label: TransitionLabel::Fail {
                        subject: p.clone(),
                        channel: a.channel.clone(),
                    },
                    succ: residual(true),
                    rule: RuleName::ComSndFail,
                    path: path.clone(),
                });
            }
            let all_labels = a
                .branches
                .iter()
                .all(|b| matches!(b.message, Message::Label { .. } | Message::Err));
            if p != q && a.receiver.is_live() && !blocked.contains(q) && all_labels {
                out.push(Raw {
                    label: TransitionLabel::Fail {
                        subject: q.clone(),
                        channel: a.channel.clone(),
                    },
                    succ: residual(false),
                    rule: RuleName::ComRcvFail,
                    path: path.clone(),
                });
            }
        }
        // [concur]: a label enabled in every continuation, not involving
        // the live endpoints of the prefix or the thread a branch spawns.
        // One inert continuation rules it out.
        if a.branches.iter().any(|b| matches!(b.cont, GlobalType::End | GlobalType::Var(_))) {
            return;
        }
        let live = live_set([&a.sender, &a.receiver]);
        let mut per_branch: Vec<Vec<Raw>> = Vec::with_capacity(a.branches.len());
        for (i, b) in a.branches.iter().enumerate() {
            let mut inner = blocked.clone();
            inner.extend(live.iter().cloned());
            inner.extend(spawn_set(q, &b.message));
            let raws = self.derive(&b.cont, &path.child(PathStep::Branch(i)), &inner);
            if raws.is_empty() {
                return;
            }
            per_branch.push(raws);
        }
        for (label, path, succs) in common_labels(&per_branch) {
            for combo in product(&succs) {
                let mut r = a.clone();
                for (b, g) in r.branches.iter_mut().zip(combo) {
                    b.cont = g;
                }
                out.push(Raw {
                    label: label.clone(),
                    succ: GlobalType::Action(r),
                    rule: RuleName::Concur,
                    path: path.clone(),
                });
            }
        }
    }
}

/// Keeps one derivation per (label, successor), with the smallest rule.
/// Successors are compared syntactically here; congruent duplicates are
/// merged once, at the root.
fn dedup(raws: Vec<Raw>) -> Vec<Raw> {
    let mut by_label: BTreeMap<TransitionLabel, Vec<Raw>> = BTreeMap::new();
    for r in raws {
        let group = by_label.entry(r.label.clone()).or_default();
        match group.iter_mut().find(|old| old.succ == r.succ) {
            Some(old) if (old.rule, &old.path) <= (r.rule, &r.path) => {}
            Some(old) => *old = r,
            None => group.push(r),
        }
    }
    by_label.into_values().flatten().collect()
}

/// Labels present in every group, with each group's successors for it and
/// the redex path of the first group.
fn common_labels(groups: &[Vec<Raw>]) -> Vec<(TransitionLabel, TermPath, Vec<Vec<GlobalType>>)> {
    let Some((first, rest)) = groups.split_first() else {
        return Vec::new();
    };
    let mut by_label: BTreeMap<&TransitionLabel, (TermPath, Vec<Vec<GlobalType>>)> = BTreeMap::new();
    for t in first {
        let entry = by_label
            .entry(&t.label)
            .or_insert_with(|| (t.path.clone(), vec![Vec::new(); groups.len()]));
        entry.1[0].push(t.succ.clone());
    }
    for (i, group) in rest.iter().enumerate() {
        for t in group {
            if let Some(entry) = by_label.get_mut(&t.label) {
                entry.1[i + 1].push(t.succ.clone());
            }
        }
    }
    by_label
        .into_iter()
        .filter(|(_, (_, succs))| succs.iter().all(|s| !s.is_empty()))
        .map(|(l, (p, s))| (l.clone(), p, s))
        .collect()
}

fn product(choices: &[Vec<GlobalType>]) -> Vec<Vec<GlobalType>> {
    let mut acc: Vec<Vec<GlobalType>> = vec![Vec::new()];
    for options in choices {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |g| {
                    let mut v = prefix.clone();
                    v.push(g.clone());
                    v
                })
            })
            .collect();
    }
    acc
}

/// Searches, breadth first over at most `max_states` states, for a
/// timeout split across the two endpoints of a channel: `Fail(x, s)` then
/// `Fail(y, s)` with `x != y`, followed by a step of `y` that the second
/// failure unblocked (enabled after it, not before). Returns the three
/// transitions.
pub fn two_step_timeout_witness(
    g: &GlobalType,
    opts: SemanticsOptions,
    max_states: usize,
) -> Option<Vec<Transition>> {
    let start = normalize(g);
    let mut seen = BTreeSet::from([canonical_key(&start)]);
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        for t1 in enabled_transitions(&a, opts).transitions {
            if let TransitionLabel::Fail { subject: x, channel: s } = &t1.label {
                let after_first = enabled_transitions(&t1.successor, opts).transitions;
                for t2 in &after_first {
                    let TransitionLabel::Fail { subject: y, channel: s2 } = &t2.label else {
                        continue;
                    };
                    if s2 != s || y == x {
                        continue;
                    }
                    let before: BTreeSet<&TransitionLabel> = after_first.iter().map(|t| &t.label).collect();
                    let unblocked = enabled_transitions(&t2.successor, opts)
                        .transitions
                        .into_iter()
                        .find(|b| {
                            b.label.subjects().contains(y)
                                && !matches!(&b.label, TransitionLabel::Crash { .. })
                                && !matches!(&b.label, TransitionLabel::Fail { channel, .. } if channel == s)
                                && !before.contains(&b.label)
                        });
                    if let Some(t3) = unblocked {
                        return Some(vec![t1.clone(), t2.clone(), t3]);
                    }
                }
            }
            if seen.len() < max_states && seen.insert(canonical_key(&t1.successor)) {
                queue.push_back(t1.successor);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Branch, Channel, Endpoint, Participant};

    fn p(s: &str) -> Participant {
        Participant::parse(s).unwrap()
    }

    fn msg(a: &str, b: &str, s: &str, l: &str, cont: GlobalType, err: GlobalType) -> GlobalType {
        GlobalType::action(
            Endpoint::live(p(a)),
            Endpoint::live(p(b)),
            Channel::named(s),
            vec![Branch::new(Message::bare(l), cont), Branch::new(Message::Err, err)],
        )
    }

    fn labels(g: &GlobalType) -> Vec<String> {
        enabled_transitions(g, SemanticsOptions::default())
            .transitions
            .iter()
            .map(|t| format!("{}: {}", t.rule, t.label))
            .collect()
    }

    #[test]
    fn end_is_stuck() {
        assert!(labels(&GlobalType::End).is_empty());
        let crash = TransitionLabel::Crash { subject: p("a") };
        assert_eq!(
            apply_transition(&GlobalType::End, &crash, SemanticsOptions::default()),
            Err(SemanticsError::NotEnabled(Box::new(crash)))
        );
    }

    #[test]
    fn single_action() {
        let g = msg("a", "b", "s", "L", GlobalType::End, GlobalType::End);
        assert_eq!(
            labels(&g),
            vec![
                "com: a -> b : s L()",
                "com-snd-fail: a !fail s",
                "com-rcv-fail: b !fail s",
                "crash: a !crash",
                "crash: b !crash",
            ]
        );
    }

    #[test]
    fn err_branch_never_fires() {
        let g = msg("a", "b", "s", "L", GlobalType::End, GlobalType::End);
        let err = TransitionLabel::Comm {
            sender: p("a"),
            receiver: p("b"),
            channel: Channel::named("s"),
            message: Message::Err,
        };
        assert!(apply_transition(&g, &err, SemanticsOptions::default()).is_err());
        let mutated = SemanticsOptions {
            fire_err_branches: true,
            ..Default::default()
        };
        assert!(apply_transition(&g, &err, mutated).is_ok());
    }

    #[test]
    fn concur_respects_live_endpoints() {
        // b -> c waits for a -> b, but c -> d does not
        let inner = |x: &str, y: &str| msg(x, y, "u", "M", GlobalType::End, GlobalType::End);
        let blocked = msg("a", "b", "s", "L", inner("b", "c"), inner("b", "c"));
        assert!(!labels(&blocked).iter().any(|l| l.contains("b -> c")));
        let free = msg("a", "b", "s", "L", inner("c", "d"), inner("c", "d"));
        assert!(labels(&free).contains(&"concur: c -> d : u M()".to_string()));
    }

    #[test]
    fn doubly_crashed_prefix_is_transparent() {
        let cont = msg("a", "b", "u", "M", GlobalType::End, GlobalType::End);
        let dead = GlobalType::action(
            Endpoint::crashed(p("a")),
            Endpoint::crashed(p("b")),
            Channel::named("s"),
            vec![Branch::new(Message::Err, cont)],
        );
        let ls = labels(&dead);
        assert!(ls.contains(&"concur: a -> b : u M()".to_string()), "{ls:?}");
        assert!(!ls.iter().any(|l| l.contains("!fail s")));
    }

    #[test]
    fn choice_commits_or_advances_all() {
        let g = GlobalType::Choice(vec![
            msg("a", "b", "s", "L", GlobalType::End, GlobalType::End),
            msg("a", "b", "s", "M", GlobalType::End, GlobalType::End),
        ]);
        let ls = labels(&g);
        assert!(ls.contains(&"choice: a -> b : s L()".to_string()));
        assert!(ls.contains(&"choice: a -> b : s M()".to_string()));
        // b's timeout is available in both alternatives
        assert!(ls.contains(&"choice-br: b !fail s".to_string()), "{ls:?}");
    }

    #[test]
    fn unfolding_is_budgeted() {
        let g = GlobalType::rec("X", msg("a", "b", "s", "L", GlobalType::var("X"), GlobalType::End));
        // the ERR branch ends, so [concur] never needs the copy inside the
        // unfolded continuation
        let e = enabled_transitions(&g, SemanticsOptions::default());
        assert!(!e.budget_hit);
        assert!(e.transitions.iter().any(|t| t.rule == RuleName::Rec));
        let GlobalType::Rec { var, body, .. } = g.clone() else {
            unreachable!()
        };
        let spent = GlobalType::Rec {
            var,
            generation: DEFAULT_MAX_UNFOLD,
            body,
        };
        let e = enabled_transitions(&spent, SemanticsOptions::default());
        assert!(e.budget_hit);
        assert!(e.transitions.iter().all(|t| t.rule == RuleName::Crash));
        let none = enabled_transitions(
            &g,
            SemanticsOptions {
                max_unfold: 0,
                ..Default::default()
            },
        );
        assert!(none.budget_hit);
        assert!(none.transitions.iter().all(|t| t.rule == RuleName::Crash));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let g = GlobalType::par(
            msg("a", "b", "s", "L", GlobalType::End, GlobalType::End),
            msg("c", "d", "u", "M", GlobalType::End, GlobalType::End),
        );
        let o = SemanticsOptions::default();
        assert_eq!(enabled_transitions(&g, o), enabled_transitions(&g, o));
        assert_eq!(enabled_transitions(&g, o).transitions.len(), 10);
    }

    #[test]
    fn no_witness_from_end() {
        assert!(two_step_timeout_witness(&GlobalType::End, SemanticsOptions::default(), 100).is_none());
    }
}
