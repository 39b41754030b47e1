use std::collections::BTreeSet;
use std::fmt;

use super::{FrontendError, ProtocolSpec, SourceSpan, SpanTable};
use crate::kernel::{bound_channels, free_channels, free_vars, Channel, GlobalType, Message, PathStep, TermPath, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WellFormednessKind {
    DuplicateErrBranch,
    DuplicateLabel,
    UnguardedRecursion,
    UnboundVariable,
    BranchShape,
    TauMisuse,
    DuplicateDeclaration,
    UndeclaredChannel,
    BoundChannelDeclared,
    DuplicateBoundChannel,
    PublicChannelMisuse,
    ReservedName,
}

impl fmt::Display for WellFormednessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use WellFormednessKind::*;
        f.write_str(match self {
            DuplicateErrBranch => "duplicate ERR branch",
            DuplicateLabel => "duplicate label",
            UnguardedRecursion => "unguarded recursion",
            UnboundVariable => "unbound recursion variable",
            BranchShape => "malformed branches",
            TauMisuse => "misuse of tau",
            DuplicateDeclaration => "duplicate declaration",
            UndeclaredChannel => "undeclared channel",
            BoundChannelDeclared => "bound channel declared",
            DuplicateBoundChannel => "duplicate bound channel",
            PublicChannelMisuse => "public channel misuse",
            ReservedName => "reserved name",
        })
    }
}

/// Checks the syntactic invariants of a parsed spec; reports the first
/// violation, located at the innermost recorded span.
pub fn validate(spec: &ProtocolSpec, spans: &SpanTable) -> Result<(), FrontendError> {
    let locate = |path: &TermPath| -> SourceSpan {
        let mut steps = path.steps().to_vec();
        loop {
            let p = steps.iter().fold(TermPath::root(), |acc, s| acc.child(*s));
            if let Some(s) = spans.get(&p) {
                return *s;
            }
            if steps.pop().is_none() {
                return SourceSpan {
                    line: 1,
                    column: 1,
                    length: 1,
                };
            }
        }
    };
    let fail = |path: &TermPath, kind, message: String| {
        Err(FrontendError::WellFormedness {
            span: locate(path),
            kind,
            message,
        })
    };
    let root = TermPath::root();

    let mut declared = BTreeSet::new();
    for c in spec.declared_channels() {
        if c == TAU {
            return fail(&root, WellFormednessKind::ReservedName, format!("{TAU} cannot be declared"));
        }
        if !declared.insert(c.to_string()) {
            return fail(&root, WellFormednessKind::DuplicateDeclaration, format!("channel {c} declared twice"));
        }
    }
    for c in free_channels(&spec.body) {
        if !declared.contains(&c) {
            return fail(&root, WellFormednessKind::UndeclaredChannel, format!("channel {c} is not declared"));
        }
    }
    let mut bound = BTreeSet::new();
    for t in bound_channels(&spec.body) {
        if t == TAU {
            return fail(&root, WellFormednessKind::ReservedName, format!("{TAU} cannot be bound"));
        }
        if declared.contains(&t) {
            return fail(
                &root,
                WellFormednessKind::BoundChannelDeclared,
                format!("channel {t} is both declared and bound"),
            );
        }
        if !bound.insert(t.clone()) {
            return fail(&root, WellFormednessKind::DuplicateBoundChannel, format!("channel {t} is bound twice"));
        }
    }
    if let Some(x) = free_vars(&spec.body).into_iter().next() {
        return fail(&root, WellFormednessKind::UnboundVariable, format!("{x} is not bound by rec"));
    }
    walk(spec, &spec.body, &root).map_err(|(path, kind, message)| FrontendError::WellFormedness {
        span: locate(&path),
        kind,
        message,
    })
}

type Violation = (TermPath, WellFormednessKind, String);

fn walk(spec: &ProtocolSpec, g: &GlobalType, path: &TermPath) -> Result<(), Violation> {
    match g {
        GlobalType::End | GlobalType::Var(_) => Ok(()),
        GlobalType::Rec { var, body, .. } => {
            if unguarded_vars(body).contains(var.as_str()) {
                return Err((path.clone(), WellFormednessKind::UnguardedRecursion, format!("{var} occurs unguarded")));
            }
            walk(spec, body, &path.child(PathStep::Body))
        }
        GlobalType::Par(l, r) => {
            walk(spec, l, &path.child(PathStep::Left))?;
            walk(spec, r, &path.child(PathStep::Right))
        }
        GlobalType::Choice(gs) => gs
            .iter()
            .enumerate()
            .try_for_each(|(i, g)| walk(spec, g, &path.child(PathStep::Alt(i)))),
        GlobalType::Action(a) => {
            let err = |kind, msg: String| Err((path.clone(), kind, msg));
            let errs = a.branches.iter().filter(|b| b.message.is_err()).count();
            if errs > 1 {
                return err(WellFormednessKind::DuplicateErrBranch, "more than one ERR branch".into());
            }
            let mut labels = BTreeSet::new();
            let mut news = 0;
            for b in &a.branches {
                match &b.message {
                    Message::Label { label, .. } => {
                        if !labels.insert(label.as_str()) {
                            return err(WellFormednessKind::DuplicateLabel, format!("label {label} used twice"));
                        }
                    }
                    Message::New(_) => news += 1,
                    Message::Err => {}
                }
            }
            if news > 1 || (news == 1 && !labels.is_empty()) {
                return err(
                    WellFormednessKind::BranchShape,
                    "a new branch can only be paired with an ERR branch".into(),
                );
            }
            if a.channel == Channel::Tau && !labels.is_empty() {
                return err(WellFormednessKind::TauMisuse, "tau only carries spawns".into());
            }
            if let Some(decl) = a.channel.name().and_then(|s| spec.publics.iter().find(|d| d.channel == s)) {
                if a.receiver.participant != decl.server || !labels.is_empty() {
                    return err(
                        WellFormednessKind::PublicChannelMisuse,
                        format!("public channel {} only carries requests to {}", decl.channel, decl.server),
                    );
                }
            }
            a.branches
                .iter()
                .enumerate()
                .try_for_each(|(i, b)| walk(spec, &b.cont, &path.child(PathStep::Branch(i))))
        }
    }
}

/// Recursion variables reachable without passing an action prefix.
fn unguarded_vars(g: &GlobalType) -> BTreeSet<&str> {
    match g {
        GlobalType::End | GlobalType::Action(_) => BTreeSet::new(),
        GlobalType::Var(x) => BTreeSet::from([x.as_str()]),
        GlobalType::Rec { var, body, .. } => {
            let mut s = unguarded_vars(body);
            s.remove(var.as_str());
            s
        }
        GlobalType::Par(l, r) => {
            let mut s = unguarded_vars(l);
            s.extend(unguarded_vars(r));
            s
        }
        GlobalType::Choice(gs) => gs.iter().flat_map(unguarded_vars).collect(),
    }
}
