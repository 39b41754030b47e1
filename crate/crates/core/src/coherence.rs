//! The coherence judgement `Delta; Gamma |- G`.
//!
//! The checker is syntax directed: each node shape selects exactly one rule.
//! Incoherence is a verdict, reported as a list of rule-level failures with
//! the path of the offending subterm.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::analysis::initiator;
use crate::kernel::{
    bound_channels, free_channels, free_vars, Action, Channel, GlobalType, Message, Participant,
    PathStep, PublicDecl, TermPath,
};

/// What a channel name is bound to in `Gamma`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Binding {
    /// A public channel and its server.
    Public(Participant),
    /// A private session channel between two threads.
    Session(BTreeSet<Participant>),
}

impl Binding {
    pub fn session(p: Participant, q: Participant) -> Self {
        Binding::Session(BTreeSet::from([p, q]))
    }

    /// `q in Gamma(s)`: a public binding counts as the singleton of its server.
    pub fn contains(&self, p: &Participant) -> bool {
        match self {
            Binding::Public(q) => q == p,
            Binding::Session(ps) => ps.contains(p),
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Public(q) => write!(f, "{q}"),
            Binding::Session(ps) => {
                f.write_str("{")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Channel environment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gamma {
    bindings: BTreeMap<String, Binding>,
}

impl Gamma {
    pub fn new() -> Self {
        Gamma::default()
    }

    pub fn get(&self, channel: &str) -> Option<&Binding> {
        self.bindings.get(channel)
    }

    pub fn contains(&self, channel: &str) -> bool {
        self.bindings.contains_key(channel)
    }

    pub fn insert(&mut self, channel: impl Into<String>, binding: Binding) -> Option<Binding> {
        self.bindings.insert(channel.into(), binding)
    }

    pub fn remove(&mut self, channel: &str) -> Option<Binding> {
        self.bindings.remove(channel)
    }

    pub fn with(&self, channel: impl Into<String>, binding: Binding) -> Gamma {
        let mut g = self.clone();
        g.insert(channel, binding);
        g
    }

    pub fn without(&self, channel: &str) -> Gamma {
        let mut g = self.clone();
        g.remove(channel);
        g
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Binding)> {
        self.bindings.iter()
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (c, b)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}: {b}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(String, Binding)> for Gamma {
    fn from_iter<I: IntoIterator<Item = (String, Binding)>>(iter: I) -> Self {
        Gamma {
            bindings: iter.into_iter().collect(),
        }
    }
}

/// Recursion-variable environment: the channel environment snapshotted at
/// each binder in scope.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delta {
    snapshots: BTreeMap<String, Gamma>,
}

impl Delta {
    pub fn new() -> Self {
        Delta::default()
    }

    pub fn get(&self, var: &str) -> Option<&Gamma> {
        self.snapshots.get(var)
    }

    pub fn contains(&self, var: &str) -> bool {
        self.snapshots.contains_key(var)
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.snapshots.keys()
    }

    fn with(&self, var: &str, snapshot: Gamma) -> Delta {
        let mut d = self.clone();
        d.snapshots.insert(var.to_string(), snapshot);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoherenceError {
    #[error("recursion variable {0} is already bound")]
    DuplicateVariable(String),
}

/// Extends `delta` with a binding for a variable it does not mention.
pub fn weaken_delta(delta: &Delta, var: &str, snapshot: Gamma) -> Result<Delta, CoherenceError> {
    if delta.contains(var) {
        return Err(CoherenceError::DuplicateVariable(var.to_string()));
    }
    Ok(delta.with(var, snapshot))
}

/// How the `end` rule treats channels still open at termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EndMode {
    /// `end` requires an empty environment.
    Strict,
    /// `end` accepts any environment.
    #[default]
    RelaxedEnd,
}

impl fmt::Display for EndMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EndMode::Strict => "strict-end",
            EndMode::RelaxedEnd => "relaxed-end",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Send,
    Req,
    Spawn,
    Fail,
    Par,
    Sum,
    Rec,
    VarRec,
    End,
    /// An action whose branches match no rule's pattern.
    MalformedAction,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Send => "send",
            Rule::Req => "req",
            Rule::Spawn => "spawn",
            Rule::Fail => "fail",
            Rule::Par => "par",
            Rule::Sum => "sum",
            Rule::Rec => "rec",
            Rule::VarRec => "var-rec",
            Rule::End => "end",
            Rule::MalformedAction => "malformed-action",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceFailure {
    pub rule: Rule,
    pub path: TermPath,
    pub message: String,
}

impl fmt::Display for CoherenceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] at {}: {}", self.rule, self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Coherent,
    Incoherent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceReport {
    pub verdict: Verdict,
    pub failures: Vec<CoherenceFailure>,
    pub mode: EndMode,
}

impl CoherenceReport {
    pub fn is_coherent(&self) -> bool {
        self.verdict == Verdict::Coherent
    }

    /// The rule of the first failure, if any.
    pub fn first_rule(&self) -> Option<Rule> {
        self.failures.first().map(|f| f.rule)
    }
}

impl fmt::Display for CoherenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.verdict {
            Verdict::Coherent => "Coherent",
            Verdict::Incoherent => "Incoherent",
        };
        write!(f, "{v} ({})", self.mode)?;
        for fail in &self.failures {
            write!(f, "\n  {fail}")?;
        }
        Ok(())
    }
}

/// Decides `delta; gamma |- g`.
pub fn check_coherence(g: &GlobalType, delta: &Delta, gamma: &Gamma, mode: EndMode) -> CoherenceReport {
    let mut failures = Vec::new();
    Checker { mode }.check(g, delta, gamma, &TermPath::root(), &mut failures);
    let verdict = if failures.is_empty() {
        Verdict::Coherent
    } else {
        Verdict::Incoherent
    };
    CoherenceReport {
        verdict,
        failures,
        mode,
    }
}

/// Builds the environment of a (runtime) global type: the declared public
/// channels plus one session binding per free private channel, taken from
/// the endpoints of its first occurrence.
pub fn infer_environment(g: &GlobalType, publics: &[PublicDecl]) -> Gamma {
    let mut gamma: Gamma = publics
        .iter()
        .map(|d| (d.channel.clone(), Binding::Public(d.server.clone())))
        .collect();
    infer_sessions(g, &mut Vec::new(), &mut gamma);
    gamma
}

fn infer_sessions(g: &GlobalType, bound: &mut Vec<String>, gamma: &mut Gamma) {
    match g {
        GlobalType::End | GlobalType::Var(_) => {}
        GlobalType::Rec { body, .. } => infer_sessions(body, bound, gamma),
        GlobalType::Par(l, r) => {
            infer_sessions(l, bound, gamma);
            infer_sessions(r, bound, gamma);
        }
        GlobalType::Choice(gs) => gs.iter().for_each(|g| infer_sessions(g, bound, gamma)),
        GlobalType::Action(a) => {
            if let Channel::Named(s) = &a.channel {
                if !bound.contains(s) && !gamma.contains(s) {
                    gamma.insert(
                        s.clone(),
                        Binding::session(a.sender.participant.clone(), a.receiver.participant.clone()),
                    );
                }
            }
            for b in &a.branches {
                if let Message::New(t) = &b.message {
                    bound.push(t.clone());
                    infer_sessions(&b.cont, bound, gamma);
                    bound.pop();
                } else {
                    infer_sessions(&b.cont, bound, gamma);
                }
            }
        }
    }
}

/// Coherence of a runtime state under its inferred environment.
pub fn check_state(g: &GlobalType, publics: &[PublicDecl], mode: EndMode) -> CoherenceReport {
    check_coherence(g, &Delta::new(), &infer_environment(g, publics), mode)
}

/// `end`, possibly composed in parallel with itself.
fn is_inert(g: &GlobalType) -> bool {
    match g {
        GlobalType::End => true,
        GlobalType::Par(l, r) => is_inert(l) && is_inert(r),
        _ => false,
    }
}

struct Checker {
    mode: EndMode,
}

enum Shape<'a> {
    Send,
    Request(&'a str),
    Fail,
    Malformed(String),
}

fn classify(a: &Action) -> Shape<'_> {
    let errs = a.branches.iter().filter(|b| b.message.is_err()).count();
    let news: Vec<&str> = a
        .branches
        .iter()
        .filter_map(|b| match &b.message {
            Message::New(t) => Some(t.as_str()),
            _ => None,
        })
        .collect();
    let labels = a.branches.len() - errs - news.len();
    match (errs, news.len(), labels) {
        (1, 0, 0) => Shape::Fail,
        (1, 0, _) => Shape::Send,
        (1, 1, 0) => Shape::Request(news[0]),
        (0, _, _) => Shape::Malformed("action has no ERR branch".into()),
        (e, _, _) if e > 1 => Shape::Malformed("action has more than one ERR branch".into()),
        (_, n, 0) if n > 1 => Shape::Malformed("action has more than one new branch".into()),
        _ => Shape::Malformed("action mixes labelled and new branches".into()),
    }
}

impl Checker {
    fn check(&self, g: &GlobalType, delta: &Delta, gamma: &Gamma, path: &TermPath, out: &mut Vec<CoherenceFailure>) {
        let fail = |out: &mut Vec<CoherenceFailure>, rule: Rule, message: String| {
            out.push(CoherenceFailure {
                rule,
                path: path.clone(),
                message,
            })
        };
        match g {
            GlobalType::End => {
                if self.mode == EndMode::Strict && !gamma.is_empty() {
                    fail(out, Rule::End, format!("channels still open at end: {gamma}"));
                }
            }
            GlobalType::Var(x) => match delta.get(x) {
                None => fail(out, Rule::VarRec, format!("unbound recursion variable {x}")),
                Some(snap) if snap != gamma => fail(
                    out,
                    Rule::VarRec,
                    format!("environment {gamma} differs from {snap} recorded at rec {x}"),
                ),
                Some(_) => {}
            },
            GlobalType::Rec { var, body, .. } => {
                let delta = delta.with(var, gamma.clone());
                self.check(body, &delta, gamma, &path.child(PathStep::Body), out);
            }
            GlobalType::Choice(gs) => {
                if initiator(g).is_none() {
                    fail(out, Rule::Sum, "choice has no common initiator".into());
                }
                for (i, alt) in gs.iter().enumerate() {
                    self.check(alt, delta, gamma, &path.child(PathStep::Alt(i)), out);
                }
            }
            // an operand congruent to end takes no channels, so the verdict
            // agrees with the normal form, where the unit is gone
            GlobalType::Par(l, r) if is_inert(l) => self.check(r, delta, gamma, &path.child(PathStep::Right), out),
            GlobalType::Par(l, r) if is_inert(r) => self.check(l, delta, gamma, &path.child(PathStep::Left), out),
            GlobalType::Par(l, r) => self.check_par(l, r, delta, gamma, path, out),
            GlobalType::Action(a) => match classify(a) {
                Shape::Malformed(msg) => {
                    fail(out, Rule::MalformedAction, msg);
                    for (i, b) in a.branches.iter().enumerate() {
                        self.check(&b.cont, delta, gamma, &path.child(PathStep::Branch(i)), out);
                    }
                }
                Shape::Send => self.check_send(a, delta, gamma, path, out),
                Shape::Request(t) => self.check_request(a, t, delta, gamma, path, out),
                Shape::Fail => self.check_fail(a, delta, gamma, path, out),
            },
        }
    }

    fn require_live(&self, a: &Action, rule: Rule, path: &TermPath, out: &mut Vec<CoherenceFailure>) {
        for ep in [&a.sender, &a.receiver] {
            if !ep.is_live() {
                out.push(CoherenceFailure {
                    rule,
                    path: path.clone(),
                    message: format!("crashed endpoint {ep} in an action with live branches"),
                });
            }
        }
    }

    fn check_send(&self, a: &Action, delta: &Delta, gamma: &Gamma, path: &TermPath, out: &mut Vec<CoherenceFailure>) {
        let fail = |out: &mut Vec<CoherenceFailure>, message: String| {
            out.push(CoherenceFailure {
                rule: Rule::Send,
                path: path.clone(),
                message,
            })
        };
        self.require_live(a, Rule::Send, path, out);
        let (p, q) = (&a.sender.participant, &a.receiver.participant);
        let err_gamma = match &a.channel {
            Channel::Tau => {
                fail(out, "the local channel tau cannot carry messages".into());
                gamma.clone()
            }
            Channel::Named(s) => {
                let expected = Binding::session(p.clone(), q.clone());
                match gamma.get(s) {
                    Some(b) if *b == expected => {}
                    Some(b) => fail(out, format!("channel {s} is bound to {b}, not {expected}")),
                    None => fail(out, format!("channel {s} is not open")),
                }
                gamma.without(s)
            }
        };
        let mut seen = BTreeSet::new();
        for b in &a.branches {
            if let Message::Label { label, .. } = &b.message {
                if !seen.insert(label.as_str()) {
                    fail(out, format!("duplicate label {label}"));
                }
            }
        }
        for (i, b) in a.branches.iter().enumerate() {
            let env = if b.message.is_err() { &err_gamma } else { gamma };
            self.check(&b.cont, delta, env, &path.child(PathStep::Branch(i)), out);
        }
    }

    fn check_request(
        &self,
        a: &Action,
        t: &str,
        delta: &Delta,
        gamma: &Gamma,
        path: &TermPath,
        out: &mut Vec<CoherenceFailure>,
    ) {
        let (p, q) = (&a.sender.participant, &a.receiver.participant);
        let rule = if a.channel == Channel::Tau {
            Rule::Spawn
        } else {
            Rule::Req
        };
        let fail = |out: &mut Vec<CoherenceFailure>, message: String| {
            out.push(CoherenceFailure {
                rule,
                path: path.clone(),
                message,
            })
        };
        self.require_live(a, rule, path, out);
        match &a.channel {
            Channel::Tau => {
                if p != q {
                    fail(out, format!("spawn on tau must be local, found {p} -> {q}"));
                }
            }
            Channel::Named(s) => {
                if p == q {
                    fail(out, format!("request from {p} to itself"));
                }
                match gamma.get(s) {
                    Some(Binding::Public(server)) if server == q => {}
                    Some(b) => fail(out, format!("channel {s} is bound to {b}, not public server {q}")),
                    None => fail(out, format!("channel {s} is not a declared public channel")),
                }
            }
        }
        if gamma.contains(t) {
            fail(out, format!("channel {t} is not fresh"));
        }
        let spawned = q.with_index(t);
        for (i, b) in a.branches.iter().enumerate() {
            let child = path.child(PathStep::Branch(i));
            if b.message.is_err() {
                self.check(&b.cont, delta, gamma, &child, out);
            } else {
                let env = gamma.with(t, Binding::session(p.clone(), spawned.clone()));
                self.check(&b.cont, delta, &env, &child, out);
            }
        }
    }

    /// The conclusion environment is either the premise environment (when
    /// the receiver is already bound on the channel, or the action is local)
    /// or the premise environment extended with the session itself. Both
    /// readings are tried, removal first.
    fn check_fail(&self, a: &Action, delta: &Delta, gamma: &Gamma, path: &TermPath, out: &mut Vec<CoherenceFailure>) {
        let (p, q) = (&a.sender.participant, &a.receiver.participant);
        let cont = &a.branches[0].cont;
        let child = path.child(PathStep::Branch(0));
        let name = a.channel.name();
        let keep = p == q || name.and_then(|s| gamma.get(s)).is_some_and(|b| b.contains(q));
        let close = p != q
            && name
                .and_then(|s| gamma.get(s))
                .is_some_and(|b| *b == Binding::session(p.clone(), q.clone()));

        let mut candidates: Vec<Gamma> = Vec::with_capacity(2);
        if close {
            candidates.push(gamma.without(name.unwrap_or_default()));
        }
        if keep && !(close && self.closing_is_irrelevant(cont, name.unwrap_or_default(), delta)) {
            candidates.push(gamma.clone());
        }
        if candidates.is_empty() {
            out.push(CoherenceFailure {
                rule: Rule::Fail,
                path: path.clone(),
                message: format!("channel {} is not open for {p} and {q}", a.channel),
            });
            self.check(cont, delta, gamma, &child, out);
            return;
        }
        let mut first_failures = None;
        for env in &candidates {
            let mut attempt = Vec::new();
            self.check(cont, delta, env, &child, &mut attempt);
            if attempt.is_empty() {
                return;
            }
            first_failures.get_or_insert(attempt);
        }
        out.extend(first_failures.unwrap_or_default());
    }

    /// Whether keeping an unused channel `s` can change the outcome for
    /// `cont`: only exact snapshot comparisons, `new` bindings of the same
    /// name and the strict end rule can observe it.
    fn closing_is_irrelevant(&self, cont: &GlobalType, s: &str, delta: &Delta) -> bool {
        self.mode == EndMode::RelaxedEnd
            && !free_channels(cont).contains(s)
            && !bound_channels(cont).iter().any(|t| t == s)
            && free_vars(cont).iter().all(|x| !delta.contains(x))
    }

    /// The environment splits between the two sides. Used private channels
    /// go where they are used; channels used by neither side may go to
    /// either, so placements are tried until one works, starting with the
    /// side that has no recursion variables to match and no binder of the
    /// same name.
    fn check_par(
        &self,
        l: &GlobalType,
        r: &GlobalType,
        delta: &Delta,
        gamma: &Gamma,
        path: &TermPath,
        out: &mut Vec<CoherenceFailure>,
    ) {
        let par_failure = |message: String| CoherenceFailure {
            rule: Rule::Par,
            path: path.clone(),
            message,
        };
        let (vl, vr) = (free_vars(l), free_vars(r));
        let mut d1 = Delta::new();
        let mut d2 = Delta::new();
        for (x, snap) in &delta.snapshots {
            if vl.contains(x) && vr.contains(x) {
                out.push(par_failure(format!("recursion variable {x} is used on both sides")));
            }
            if vr.contains(x) && !vl.contains(x) {
                d2.snapshots.insert(x.clone(), snap.clone());
            } else {
                d1.snapshots.insert(x.clone(), snap.clone());
            }
        }

        let (fl, fr) = (free_channels(l), free_channels(r));
        let bound_left: BTreeSet<String> = bound_channels(l).into_iter().collect();
        let left_has_vars = d1.snapshots.keys().any(|x| vl.contains(x));
        let right_has_vars = d2.snapshots.keys().any(|x| vr.contains(x));
        let mut g1 = Gamma::new();
        let mut g2 = Gamma::new();
        // unused channels, with whether the first placement tried is the right side
        let mut unused: Vec<(&String, &Binding, bool)> = Vec::new();
        for (c, b) in gamma.iter() {
            match b {
                Binding::Public(_) => {
                    g1.insert(c.clone(), b.clone());
                    g2.insert(c.clone(), b.clone());
                }
                Binding::Session(_) => match (fl.contains(c), fr.contains(c)) {
                    (true, true) => {
                        out.push(par_failure(format!("private channel {c} is used on both sides")));
                        g1.insert(c.clone(), b.clone());
                    }
                    (true, false) => {
                        g1.insert(c.clone(), b.clone());
                    }
                    (false, true) => {
                        g2.insert(c.clone(), b.clone());
                    }
                    (false, false) => {
                        let go_right = bound_left.contains(c) || (left_has_vars && !right_has_vars);
                        unused.push((c, b, go_right));
                    }
                },
            }
        }

        // placements as bit masks over `unused`, flipping the preferred side;
        // beyond a handful of channels only the preferred placement is tried
        let tries: u64 = if unused.len() <= 6 { 1 << unused.len() } else { 1 };
        let mut first_failures = None;
        for flips in 0..tries {
            let (mut e1, mut e2) = (g1.clone(), g2.clone());
            for (i, (c, b, go_right)) in unused.iter().enumerate() {
                let right = *go_right != (flips >> i & 1 == 1);
                let side = if right { &mut e2 } else { &mut e1 };
                side.insert((*c).clone(), (*b).clone());
            }
            let mut attempt = Vec::new();
            self.check(l, &d1, &e1, &path.child(PathStep::Left), &mut attempt);
            self.check(r, &d2, &e2, &path.child(PathStep::Right), &mut attempt);
            if attempt.is_empty() {
                return;
            }
            first_failures.get_or_insert(attempt);
        }
        out.extend(first_failures.unwrap_or_default());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Branch, Endpoint};

    fn p(s: &str) -> Participant {
        Participant::parse(s).unwrap()
    }

    fn send(a: &str, b: &str, s: &str, labels: &[(&str, GlobalType)], err: GlobalType) -> GlobalType {
        let mut branches: Vec<Branch> = labels
            .iter()
            .map(|(l, g)| Branch::new(Message::label(*l, "T"), g.clone()))
            .collect();
        branches.push(Branch::new(Message::Err, err));
        GlobalType::action(Endpoint::live(p(a)), Endpoint::live(p(b)), Channel::named(s), branches)
    }

    fn session(s: &str, a: &str, b: &str) -> Gamma {
        Gamma::new().with(s, Binding::session(p(a), p(b)))
    }

    #[test]
    fn send_requires_open_channel() {
        let g = send("a", "b", "s", &[("L", GlobalType::End)], GlobalType::End);
        let ok = check_coherence(&g, &Delta::new(), &session("s", "a", "b"), EndMode::RelaxedEnd);
        assert!(ok.is_coherent());
        let bad = check_coherence(&g, &Delta::new(), &Gamma::new(), EndMode::RelaxedEnd);
        assert_eq!(bad.first_rule(), Some(Rule::Send));
    }

    #[test]
    fn strict_end_rejects_open_channels() {
        let g = send("a", "b", "s", &[("L", GlobalType::End)], GlobalType::End);
        let r = check_coherence(&g, &Delta::new(), &session("s", "a", "b"), EndMode::Strict);
        assert_eq!(r.first_rule(), Some(Rule::End));
        assert_eq!(r.failures.len(), 1, "only the labelled leaf keeps s open");
    }

    #[test]
    fn duplicate_labels() {
        let g = send("a", "b", "s", &[("L", GlobalType::End), ("L", GlobalType::End)], GlobalType::End);
        let r = check_coherence(&g, &Delta::new(), &session("s", "a", "b"), EndMode::RelaxedEnd);
        assert_eq!(r.first_rule(), Some(Rule::Send));
        assert!(r.failures[0].message.contains("duplicate label"));
    }

    #[test]
    fn missing_err_branch_is_malformed() {
        let g = GlobalType::action(
            Endpoint::live(p("a")),
            Endpoint::live(p("b")),
            Channel::named("s"),
            vec![Branch::new(Message::bare("L"), GlobalType::End)],
        );
        let r = check_coherence(&g, &Delta::new(), &session("s", "a", "b"), EndMode::RelaxedEnd);
        assert_eq!(r.first_rule(), Some(Rule::MalformedAction));
    }

    #[test]
    fn recursion_must_close_opened_channels() {
        // rec X . a -> b : s { L . X, ERR . X }: the labelled X keeps s, the ERR one closed it
        let body = send("a", "b", "s", &[("L", GlobalType::var("X"))], GlobalType::var("X"));
        let g = GlobalType::rec("X", body);
        let r = check_coherence(&g, &Delta::new(), &session("s", "a", "b"), EndMode::RelaxedEnd);
        assert_eq!(r.first_rule(), Some(Rule::VarRec));
        assert_eq!(r.failures.len(), 1);
    }

    #[test]
    fn fail_rule_closes_or_keeps() {
        let sole = |err: GlobalType| {
            GlobalType::action(
                Endpoint::live(p("a")),
                Endpoint::crashed(p("b")),
                Channel::named("s"),
                vec![Branch::new(Message::Err, err)],
            )
        };
        let gamma = session("s", "a", "b");
        // continuation needs s closed (X was recorded without s)
        let delta = Delta::new().with("X", Gamma::new());
        assert!(check_coherence(&sole(GlobalType::var("X")), &delta, &gamma, EndMode::RelaxedEnd).is_coherent());
        // continuation needs s open
        let delta = Delta::new().with("X", gamma.clone());
        assert!(check_coherence(&sole(GlobalType::var("X")), &delta, &gamma, EndMode::RelaxedEnd).is_coherent());
        // channel unknown
        let r = check_coherence(&sole(GlobalType::End), &Delta::new(), &Gamma::new(), EndMode::RelaxedEnd);
        assert_eq!(r.first_rule(), Some(Rule::Fail));
    }

    #[test]
    fn par_rejects_shared_private_channel() {
        let a = send("a", "b", "s", &[("L", GlobalType::End)], GlobalType::End);
        let b = send("a", "b", "s", &[("M", GlobalType::End)], GlobalType::End);
        let r = check_coherence(&GlobalType::par(a, b), &Delta::new(), &session("s", "a", "b"), EndMode::RelaxedEnd);
        assert_eq!(r.first_rule(), Some(Rule::Par));
    }

    #[test]
    fn end_operand_cannot_absorb_channels() {
        // u is open at X but was not when X was bound; parking it on an
        // `end` operand would make the verdict depend on the unit law
        let body = send("a", "b", "u", &[("L", GlobalType::End)], GlobalType::var("X"));
        let g = GlobalType::rec("X", GlobalType::par(body.clone(), GlobalType::End));
        let unit_free = GlobalType::rec("X", body);
        let gamma = session("u", "a", "b");
        let with_unit = check_coherence(&g, &Delta::new(), &gamma, EndMode::RelaxedEnd);
        let without = check_coherence(&unit_free, &Delta::new(), &gamma, EndMode::RelaxedEnd);
        assert_eq!(with_unit.is_coherent(), without.is_coherent());
        assert_eq!(with_unit.first_rule(), without.first_rule());
    }

    #[test]
    fn unused_channels_may_go_to_either_side() {
        // X must see exactly {} on the left; s is used by neither side
        let g = GlobalType::rec(
            "X",
            send(
                "a",
                "b",
                "u",
                &[("L", GlobalType::par(GlobalType::var("X"), GlobalType::End))],
                GlobalType::End,
            ),
        );
        let gamma = session("u", "a", "b");
        assert!(check_coherence(&g, &Delta::new(), &gamma, EndMode::RelaxedEnd).is_coherent());
        let spawn = GlobalType::action(
            Endpoint::live(p("c")),
            Endpoint::live(p("c")),
            Channel::Tau,
            vec![Branch::new(Message::New("t".into()), GlobalType::End), Branch::new(Message::Err, GlobalType::End)],
        );
        let inner = GlobalType::par(GlobalType::var("X"), spawn);
        let delta = Delta::new().with("X", Gamma::new());
        let r = check_coherence(&inner, &delta, &session("s", "a", "b"), EndMode::RelaxedEnd);
        assert!(r.is_coherent(), "{r}");
    }

    #[test]
    fn choice_needs_common_initiator() {
        let gamma = session("s", "a", "b").with("u", Binding::session(p("b"), p("a")));
        let g = GlobalType::Choice(vec![
            send("a", "b", "s", &[("L", GlobalType::End)], GlobalType::End),
            send("b", "a", "u", &[("M", GlobalType::End)], GlobalType::End),
        ]);
        let r = check_coherence(&g, &Delta::new(), &gamma, EndMode::RelaxedEnd);
        assert_eq!(r.first_rule(), Some(Rule::Sum));
    }

    #[test]
    fn weaken_delta_cases() {
        let g0 = session("s", "a", "b");
        let d = weaken_delta(&Delta::new(), "X", g0.clone()).unwrap();
        assert_eq!(d.get("X"), Some(&g0));
        assert_eq!(
            weaken_delta(&d, "X", Gamma::new()),
            Err(CoherenceError::DuplicateVariable("X".into()))
        );
    }

    #[test]
    fn inferred_environment() {
        let g = send("a", "b", "s", &[("L", GlobalType::End)], GlobalType::End);
        let publics = [PublicDecl {
            channel: "k".into(),
            server: p("srv"),
        }];
        let env = infer_environment(&g, &publics);
        assert_eq!(env.to_string(), "{k: srv, s: {a, b}}");
    }
}
