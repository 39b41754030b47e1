//! Static functions over global types: live sets, participants, spawn sets,
//! initiators, transition subjects and the crash operator.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::kernel::{Channel, Endpoint, GlobalType, Message, Participant, PathStep, PublicDecl, TermPath};

/// Participant identities; aliveness flags are not part of membership.
pub type ParticipantSet = BTreeSet<Participant>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrashError {
    #[error("action at {path} involves {victim} but has no ERR branch")]
    MissingErrBranch { victim: Participant, path: TermPath },
}

/// Identities of the endpoints still alive.
pub fn live_set<'a>(endpoints: impl IntoIterator<Item = &'a Endpoint>) -> ParticipantSet {
    endpoints
        .into_iter()
        .filter(|e| e.is_live())
        .map(|e| e.participant.clone())
        .collect()
}

/// The participant created by a branch: `role(receiver)[t]` for `new t`,
/// nothing otherwise.
pub fn spawn_set(receiver: &Participant, message: &Message) -> ParticipantSet {
    match message {
        Message::New(t) => ParticipantSet::from([receiver.with_index(t.as_str())]),
        _ => ParticipantSet::new(),
    }
}

/// Threads appearing as live endpoints, minus threads still waiting to be
/// spawned. Computed branchwise, error continuations included.
pub fn participants(g: &GlobalType) -> ParticipantSet {
    let mut out = ParticipantSet::new();
    collect_participants(g, &mut out);
    out
}

fn collect_participants(g: &GlobalType, out: &mut ParticipantSet) {
    match g {
        GlobalType::End | GlobalType::Var(_) => {}
        GlobalType::Rec { body, .. } => collect_participants(body, out),
        GlobalType::Par(l, r) => {
            collect_participants(l, out);
            collect_participants(r, out);
        }
        GlobalType::Choice(gs) => gs.iter().for_each(|g| collect_participants(g, out)),
        GlobalType::Action(a) => {
            let live = live_set([&a.sender, &a.receiver]);
            for b in &a.branches {
                out.extend(live.iter().cloned());
                let spawned = spawn_set(&a.receiver.participant, &b.message);
                out.extend(participants(&b.cont).into_iter().filter(|p| !spawned.contains(p)));
            }
        }
    }
}

/// Sender of an action; the common initiator of a choice; undefined
/// otherwise.
pub fn initiator(g: &GlobalType) -> Option<Participant> {
    match g {
        GlobalType::Action(a) => Some(a.sender.participant.clone()),
        GlobalType::Choice(gs) => {
            let mut inits = gs.iter().map(initiator);
            let first = inits.next()??;
            inits.all(|i| i.as_ref() == Some(&first)).then_some(first)
        }
        _ => None,
    }
}

pub fn public_participants(decls: &[PublicDecl]) -> ParticipantSet {
    decls.iter().map(|d| d.server.clone()).collect()
}

/// Crashes `victim` over `g`: every action involving it keeps only its
/// error branch and marks the victim's endpoint(s) crashed.
pub fn crash(g: &GlobalType, victim: &Participant) -> Result<GlobalType, CrashError> {
    crash_at(g, victim, &TermPath::root())
}

fn crash_at(g: &GlobalType, victim: &Participant, path: &TermPath) -> Result<GlobalType, CrashError> {
    Ok(match g {
        GlobalType::End | GlobalType::Var(_) => g.clone(),
        GlobalType::Rec {
            var,
            generation,
            body,
        } => GlobalType::Rec {
            var: var.clone(),
            generation: *generation,
            body: Box::new(crash_at(body, victim, &path.child(PathStep::Body))?),
        },
        GlobalType::Par(l, r) => GlobalType::par(
            crash_at(l, victim, &path.child(PathStep::Left))?,
            crash_at(r, victim, &path.child(PathStep::Right))?,
        ),
        GlobalType::Choice(gs) => GlobalType::Choice(
            gs.iter()
                .enumerate()
                .map(|(i, g)| crash_at(g, victim, &path.child(PathStep::Alt(i))))
                .collect::<Result<_, _>>()?,
        ),
        GlobalType::Action(a) => {
            let mut out = a.clone();
            if !a.involves(victim) {
                for (i, b) in out.branches.iter_mut().enumerate() {
                    b.cont = crash_at(&b.cont, victim, &path.child(PathStep::Branch(i)))?;
                }
            } else {
                let (i, err) = a
                    .branches
                    .iter()
                    .enumerate()
                    .find(|(_, b)| b.message.is_err())
                    .ok_or_else(|| CrashError::MissingErrBranch {
                        victim: victim.clone(),
                        path: path.clone(),
                    })?;
                let mut err = err.clone();
                err.cont = crash_at(&err.cont, victim, &path.child(PathStep::Branch(i)))?;
                out.branches = vec![err];
                if &out.sender.participant == victim {
                    out.sender.mark_crashed();
                }
                if &out.receiver.participant == victim {
                    out.receiver.mark_crashed();
                }
            }
            GlobalType::Action(out)
        }
    })
}

/// Transition labels: a communication (never an error message), a
/// failure of one endpoint on a channel, or a crash.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionLabel {
    Comm {
        sender: Participant,
        receiver: Participant,
        channel: Channel,
        message: Message,
    },
    Fail {
        subject: Participant,
        channel: Channel,
    },
    Crash {
        subject: Participant,
    },
}

impl TransitionLabel {
    pub fn subjects(&self) -> ParticipantSet {
        match self {
            TransitionLabel::Comm {
                sender, receiver, ..
            } => ParticipantSet::from([sender.clone(), receiver.clone()]),
            TransitionLabel::Fail { subject, .. } | TransitionLabel::Crash { subject } => {
                ParticipantSet::from([subject.clone()])
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TransitionLabel::Comm { .. } => "comm",
            TransitionLabel::Fail { .. } => "fail",
            TransitionLabel::Crash { .. } => "crash",
        }
    }

    pub fn channel(&self) -> Option<&Channel> {
        match self {
            TransitionLabel::Comm { channel, .. } | TransitionLabel::Fail { channel, .. } => Some(channel),
            TransitionLabel::Crash { .. } => None,
        }
    }

    pub fn message(&self) -> Option<&Message> {
        match self {
            TransitionLabel::Comm { message, .. } => Some(message),
            _ => None,
        }
    }
}

/// Subjects of a label.
pub fn subjects(label: &TransitionLabel) -> ParticipantSet {
    label.subjects()
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionLabel::Comm {
                sender,
                receiver,
                channel,
                message,
            } => write!(f, "{sender} -> {receiver} : {channel} {message}"),
            TransitionLabel::Fail { subject, channel } => write!(f, "{subject} !fail {channel}"),
            TransitionLabel::Crash { subject } => write!(f, "{subject} !crash"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Branch;

    fn p(s: &str) -> Participant {
        Participant::parse(s).unwrap()
    }

    fn act(sender: Endpoint, receiver: Endpoint, ch: &str, branches: Vec<Branch>) -> GlobalType {
        GlobalType::action(sender, receiver, Channel::named(ch), branches)
    }

    #[test]
    fn live_set_drops_crashed() {
        let eps = [Endpoint::live(p("server")), Endpoint::crashed(p("api"))];
        assert_eq!(live_set(&eps), ParticipantSet::from([p("server")]));
        assert!(live_set(&[]).is_empty());
        let dead = [Endpoint::crashed(p("a")), Endpoint::crashed(p("b"))];
        assert!(live_set(&dead).is_empty());
    }

    #[test]
    fn spawn_set_cases() {
        assert_eq!(
            spawn_set(&p("server"), &Message::New("t".into())),
            ParticipantSet::from([p("server.t")])
        );
        assert!(spawn_set(&p("server"), &Message::label("Purchase", "Order")).is_empty());
        assert!(spawn_set(&p("client"), &Message::Err).is_empty());
    }

    #[test]
    fn spawned_thread_is_not_a_participant_before_the_request() {
        let g = act(
            Endpoint::live(p("client")),
            Endpoint::live(p("server")),
            "k",
            vec![
                Branch::new(
                    Message::New("t".into()),
                    act(
                        Endpoint::live(p("server.t")),
                        Endpoint::live(p("client")),
                        "t",
                        vec![
                            Branch::new(Message::bare("Ok"), GlobalType::End),
                            Branch::new(Message::Err, GlobalType::End),
                        ],
                    ),
                ),
                Branch::new(Message::Err, GlobalType::End),
            ],
        );
        assert_eq!(participants(&g), ParticipantSet::from([p("client"), p("server")]));
        assert!(participants(&GlobalType::End).is_empty());
    }

    #[test]
    fn initiator_cases() {
        let a = |s: &str| {
            act(
                Endpoint::live(p(s)),
                Endpoint::live(p("z")),
                "s",
                vec![Branch::new(Message::Err, GlobalType::End)],
            )
        };
        assert_eq!(initiator(&a("p")), Some(p("p")));
        assert_eq!(initiator(&GlobalType::Choice(vec![a("p"), a("p")])), Some(p("p")));
        assert_eq!(initiator(&GlobalType::Choice(vec![a("p"), a("q")])), None);
        assert_eq!(initiator(&GlobalType::End), None);
    }

    #[test]
    fn public_participants_cases() {
        let decls = [PublicDecl {
            channel: "k_server".into(),
            server: p("server"),
        }];
        assert_eq!(public_participants(&decls), ParticipantSet::from([p("server")]));
        assert!(public_participants(&[]).is_empty());
    }

    #[test]
    fn crash_without_err_branch_is_reported() {
        let g = act(
            Endpoint::live(p("a")),
            Endpoint::live(p("b")),
            "s",
            vec![Branch::new(Message::bare("L"), GlobalType::End)],
        );
        assert!(matches!(crash(&g, &p("a")), Err(CrashError::MissingErrBranch { .. })));
        // an uninvolved victim only recurses
        assert_eq!(crash(&g, &p("c")).unwrap(), g);
        assert_eq!(crash(&GlobalType::End, &p("a")).unwrap(), GlobalType::End);
    }

    #[test]
    fn self_action_marks_both_endpoints() {
        let g = GlobalType::action(
            Endpoint::live(p("a")),
            Endpoint::live(p("a")),
            Channel::Tau,
            vec![
                Branch::new(Message::New("t".into()), GlobalType::End),
                Branch::new(Message::Err, GlobalType::End),
            ],
        );
        let c = crash(&g, &p("a")).unwrap();
        assert_eq!(c.to_string(), "a~ -> a~ : tau { ERR . end }");
    }

    #[test]
    fn subjects_table() {
        let comm = TransitionLabel::Comm {
            sender: p("server"),
            receiver: p("api"),
            channel: Channel::named("s"),
            message: Message::label("Purchase", "Order"),
        };
        assert_eq!(comm.subjects(), ParticipantSet::from([p("server"), p("api")]));
        let fail = TransitionLabel::Fail {
            subject: p("server"),
            channel: Channel::named("s"),
        };
        assert_eq!(fail.subjects(), ParticipantSet::from([p("server")]));
        assert_eq!(fail.to_string(), "server !fail s");
        let c = TransitionLabel::Crash { subject: p("api") };
        assert_eq!(subjects(&c), ParticipantSet::from([p("api")]));
    }
}
