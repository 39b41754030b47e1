//! Global-type term language.
//!
//! A global type describes a whole protocol from a bird's-eye view. Actions
//! carry explicit error branches (timeouts for messages, connection errors
//! for requests), endpoints carry a runtime aliveness flag, and request or
//! spawn branches bind a fresh session channel whose name doubles as the
//! thread index of the newly created participant.

mod congruence;
mod path;
mod subst;

use std::fmt;

pub use congruence::{canonical_key, normalize, structurally_equal};
pub use path::{PathStep, TermPath};
pub use subst::{
    all_channel_names, alpha_rename_bound_channels, bound_channels, free_channels, free_vars,
    substitute, FreshNames,
};

/// Thread index used for participants written without an explicit index.
pub const DEFAULT_INDEX: &str = "0";

/// Reserved spelling of the local channel.
pub const TAU: &str = "tau";

/// Returns true if `s` is a role or channel identifier: a letter followed by
/// letters, digits or underscores.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Returns true if `s` is a channel name or thread index, which may carry a
/// `#n` freshness suffix produced by unfolding.
pub fn is_fresh_identifier(s: &str) -> bool {
    match s.split_once('#') {
        None => !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'),
        Some((base, n)) => {
            !base.is_empty()
                && base.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !n.is_empty()
                && n.chars().all(|c| c.is_ascii_digit())
        }
    }
}

/// A thread: a role name plus a thread index. Identity of a participant
/// ignores aliveness.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Participant {
    pub role: String,
    pub index: String,
}

impl Participant {
    pub fn new(role: impl Into<String>, index: impl Into<String>) -> Self {
        Participant {
            role: role.into(),
            index: index.into(),
        }
    }

    /// The participant `role.0`.
    pub fn root(role: impl Into<String>) -> Self {
        Participant::new(role, DEFAULT_INDEX)
    }

    /// `role(self)[index]`: same role, another thread.
    pub fn with_index(&self, index: impl Into<String>) -> Self {
        Participant::new(self.role.clone(), index)
    }

    /// Parses `role` or `role.index`.
    pub fn parse(s: &str) -> Option<Self> {
        let (role, index) = match s.split_once('.') {
            Some((r, i)) => (r, i),
            None => (s, DEFAULT_INDEX),
        };
        (is_identifier(role) && is_fresh_identifier(index)).then(|| Participant::new(role, index))
    }
}

impl fmt::Display for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == DEFAULT_INDEX {
            write!(f, "{}", self.role)
        } else {
            write!(f, "{}.{}", self.role, self.index)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Liveness {
    Live,
    Crashed,
}

/// A participant occurrence inside an action, annotated with aliveness.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub participant: Participant,
    pub liveness: Liveness,
}

impl Endpoint {
    pub fn live(participant: Participant) -> Self {
        Endpoint {
            participant,
            liveness: Liveness::Live,
        }
    }

    pub fn crashed(participant: Participant) -> Self {
        Endpoint {
            participant,
            liveness: Liveness::Crashed,
        }
    }

    pub fn is_live(&self) -> bool {
        self.liveness == Liveness::Live
    }

    pub fn mark_crashed(&mut self) {
        self.liveness = Liveness::Crashed;
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.participant)?;
        if self.liveness == Liveness::Crashed {
            f.write_str("~")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Named(String),
    Tau,
}

impl Channel {
    pub fn named(name: impl Into<String>) -> Self {
        Channel::Named(name.into())
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Channel::Named(n) => Some(n),
            Channel::Tau => None,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Named(n) => f.write_str(n),
            Channel::Tau => f.write_str(TAU),
        }
    }
}

/// The message of one branch. `New` binds a session channel (never tau).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Message {
    Label {
        label: String,
        payload: Option<String>,
    },
    New(String),
    Err,
}

impl Message {
    pub fn label(label: impl Into<String>, payload: impl Into<String>) -> Self {
        Message::Label {
            label: label.into(),
            payload: Some(payload.into()),
        }
    }

    pub fn bare(label: impl Into<String>) -> Self {
        Message::Label {
            label: label.into(),
            payload: None,
        }
    }

    pub fn is_err(&self) -> bool {
        matches!(self, Message::Err)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Label { label, payload } => {
                write!(f, "{}({})", label, payload.as_deref().unwrap_or(""))
            }
            Message::New(t) => write!(f, "new {t}"),
            Message::Err => f.write_str("ERR"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Branch {
    pub message: Message,
    pub cont: GlobalType,
}

impl Branch {
    pub fn new(message: Message, cont: GlobalType) -> Self {
        Branch { message, cont }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub sender: Endpoint,
    pub receiver: Endpoint,
    pub channel: Channel,
    pub branches: Vec<Branch>,
}

impl Action {
    pub fn err_branch(&self) -> Option<&Branch> {
        self.branches.iter().find(|b| b.message.is_err())
    }

    pub fn is_sole_err(&self) -> bool {
        self.branches.len() == 1 && self.branches[0].message.is_err()
    }

    /// True if `p` is the sender or receiver (by identity).
    pub fn involves(&self, p: &Participant) -> bool {
        &self.sender.participant == p || &self.receiver.participant == p
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GlobalType {
    Action(Action),
    /// Sender-driven choice with at least two alternatives.
    Choice(Vec<GlobalType>),
    Par(Box<GlobalType>, Box<GlobalType>),
    /// `generation` counts how many unfoldings produced this binder; it is a
    /// runtime annotation used to bound exploration and is 0 in source text.
    Rec {
        var: String,
        generation: u32,
        body: Box<GlobalType>,
    },
    Var(String),
    End,
}

impl GlobalType {
    pub fn action(
        sender: Endpoint,
        receiver: Endpoint,
        channel: Channel,
        branches: Vec<Branch>,
    ) -> Self {
        GlobalType::Action(Action {
            sender,
            receiver,
            channel,
            branches,
        })
    }

    pub fn par(left: GlobalType, right: GlobalType) -> Self {
        GlobalType::Par(Box::new(left), Box::new(right))
    }

    pub fn rec(var: impl Into<String>, body: GlobalType) -> Self {
        GlobalType::Rec {
            var: var.into(),
            generation: 0,
            body: Box::new(body),
        }
    }

    pub fn var(var: impl Into<String>) -> Self {
        GlobalType::Var(var.into())
    }

    pub fn is_end(&self) -> bool {
        matches!(self, GlobalType::End)
    }

    /// Number of action nodes.
    pub fn action_count(&self) -> usize {
        match self {
            GlobalType::Action(a) => 1 + a.branches.iter().map(|b| b.cont.action_count()).sum::<usize>(),
            GlobalType::Choice(gs) => gs.iter().map(GlobalType::action_count).sum(),
            GlobalType::Par(l, r) => l.action_count() + r.action_count(),
            GlobalType::Rec { body, .. } => body.action_count(),
            GlobalType::Var(_) | GlobalType::End => 0,
        }
    }
}

/// Compact single-line rendering in the concrete syntax.
impl fmt::Display for GlobalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GlobalType::End => f.write_str("end"),
            GlobalType::Var(x) => f.write_str(x),
            GlobalType::Rec {
                var,
                generation,
                body,
            } => {
                if *generation > 0 {
                    write!(f, "rec {var}@{generation} . {body}")
                } else {
                    write!(f, "rec {var} . {body}")
                }
            }
            GlobalType::Par(l, r) => write!(f, "({l} || {r})"),
            GlobalType::Choice(gs) => {
                f.write_str("choice { ")?;
                for (i, g) in gs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "{g}")?;
                }
                f.write_str(" }")
            }
            GlobalType::Action(a) => {
                write!(f, "{} -> {} : {} {{ ", a.sender, a.receiver, a.channel)?;
                for (i, b) in a.branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{} . {}", b.message, b.cont)?;
                }
                f.write_str(" }")
            }
        }
    }
}

/// A public channel and the server listening on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicDecl {
    pub channel: String,
    pub server: Participant,
}
