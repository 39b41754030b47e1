//! Substitution of recursion variables and renaming of bound channels.

use std::collections::BTreeSet;

use super::{Action, Channel, GlobalType, Message, Participant};

/// Capture-avoiding substitution of `Var(var)` by `replacement`.
pub fn substitute(g: &GlobalType, var: &str, replacement: &GlobalType) -> GlobalType {
    let repl_free = free_vars(replacement);
    subst(g, var, replacement, &repl_free)
}

fn subst(g: &GlobalType, var: &str, repl: &GlobalType, repl_free: &BTreeSet<String>) -> GlobalType {
    match g {
        GlobalType::End => GlobalType::End,
        GlobalType::Var(x) if x == var => repl.clone(),
        GlobalType::Var(_) => g.clone(),
        GlobalType::Rec { var: y, .. } if y == var => g.clone(),
        GlobalType::Rec {
            var: y,
            generation,
            body,
        } => {
            if repl_free.contains(y) && free_vars(body).contains(var) {
                // the binder would capture a free variable of the replacement
                let mut avoid = repl_free.clone();
                avoid.extend(free_vars(body));
                avoid.insert(var.to_string());
                let mut k = 1;
                let fresh = loop {
                    let cand = format!("{y}{k}");
                    if !avoid.contains(&cand) {
                        break cand;
                    }
                    k += 1;
                };
                let renamed = substitute(body, y, &GlobalType::Var(fresh.clone()));
                GlobalType::Rec {
                    var: fresh,
                    generation: *generation,
                    body: Box::new(subst(&renamed, var, repl, repl_free)),
                }
            } else {
                GlobalType::Rec {
                    var: y.clone(),
                    generation: *generation,
                    body: Box::new(subst(body, var, repl, repl_free)),
                }
            }
        }
        GlobalType::Par(l, r) => GlobalType::par(
            subst(l, var, repl, repl_free),
            subst(r, var, repl, repl_free),
        ),
        GlobalType::Choice(gs) => {
            GlobalType::Choice(gs.iter().map(|g| subst(g, var, repl, repl_free)).collect())
        }
        GlobalType::Action(a) => {
            let mut a = a.clone();
            for b in &mut a.branches {
                b.cont = subst(&b.cont, var, repl, repl_free);
            }
            GlobalType::Action(a)
        }
    }
}

/// Free recursion variables.
pub fn free_vars(g: &GlobalType) -> BTreeSet<String> {
    fn go(g: &GlobalType, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match g {
            GlobalType::End => {}
            GlobalType::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            GlobalType::Rec { var, body, .. } => {
                bound.push(var.clone());
                go(body, bound, out);
                bound.pop();
            }
            GlobalType::Par(l, r) => {
                go(l, bound, out);
                go(r, bound, out);
            }
            GlobalType::Choice(gs) => gs.iter().for_each(|g| go(g, bound, out)),
            GlobalType::Action(a) => a.branches.iter().for_each(|b| go(&b.cont, bound, out)),
        }
    }
    let mut out = BTreeSet::new();
    go(g, &mut Vec::new(), &mut out);
    out
}

/// Named channels occurring outside the scope of a `new` binding them.
pub fn free_channels(g: &GlobalType) -> BTreeSet<String> {
    fn go(g: &GlobalType, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match g {
            GlobalType::End | GlobalType::Var(_) => {}
            GlobalType::Rec { body, .. } => go(body, bound, out),
            GlobalType::Par(l, r) => {
                go(l, bound, out);
                go(r, bound, out);
            }
            GlobalType::Choice(gs) => gs.iter().for_each(|g| go(g, bound, out)),
            GlobalType::Action(a) => {
                if let Channel::Named(s) = &a.channel {
                    if !bound.contains(s) {
                        out.insert(s.clone());
                    }
                }
                for b in &a.branches {
                    if let Message::New(t) = &b.message {
                        bound.push(t.clone());
                        go(&b.cont, bound, out);
                        bound.pop();
                    } else {
                        go(&b.cont, bound, out);
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(g, &mut Vec::new(), &mut out);
    out
}

/// Every channel bound by a `new` branch, in traversal order (with repeats).
pub fn bound_channels(g: &GlobalType) -> Vec<String> {
    fn go(g: &GlobalType, out: &mut Vec<String>) {
        match g {
            GlobalType::End | GlobalType::Var(_) => {}
            GlobalType::Rec { body, .. } => go(body, out),
            GlobalType::Par(l, r) => {
                go(l, out);
                go(r, out);
            }
            GlobalType::Choice(gs) => gs.iter().for_each(|g| go(g, out)),
            GlobalType::Action(a) => {
                for b in &a.branches {
                    if let Message::New(t) = &b.message {
                        out.push(t.clone());
                    }
                    go(&b.cont, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    go(g, &mut out);
    out
}

/// Every channel name and thread index mentioned anywhere in `g`.
pub fn all_channel_names(g: &GlobalType) -> BTreeSet<String> {
    fn go(g: &GlobalType, out: &mut BTreeSet<String>) {
        match g {
            GlobalType::End | GlobalType::Var(_) => {}
            GlobalType::Rec { body, .. } => go(body, out),
            GlobalType::Par(l, r) => {
                go(l, out);
                go(r, out);
            }
            GlobalType::Choice(gs) => gs.iter().for_each(|g| go(g, out)),
            GlobalType::Action(a) => {
                if let Channel::Named(s) = &a.channel {
                    out.insert(s.clone());
                }
                out.insert(a.sender.participant.index.clone());
                out.insert(a.receiver.participant.index.clone());
                for b in &a.branches {
                    if let Message::New(t) = &b.message {
                        out.insert(t.clone());
                    }
                    go(&b.cont, out);
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(g, &mut out);
    out
}

/// Source of fresh channel names of the form `base#n`.
///
/// A name is fresh if it was never handed out and does not occur in the
/// avoid set; `n` is the smallest positive integer satisfying this, which
/// makes renaming a deterministic function of the avoided names.
#[derive(Debug, Clone, Default)]
pub struct FreshNames {
    used: BTreeSet<String>,
}

impl FreshNames {
    pub fn avoiding(used: BTreeSet<String>) -> Self {
        FreshNames { used }
    }

    pub fn for_term(g: &GlobalType) -> Self {
        FreshNames::avoiding(all_channel_names(g))
    }

    pub fn fresh(&mut self, name: &str) -> String {
        let base = name.split('#').next().unwrap_or(name);
        let mut k = 1u64;
        loop {
            let cand = format!("{base}#{k}");
            if self.used.insert(cand.clone()) {
                return cand;
            }
            k += 1;
        }
    }
}

/// Renames every channel bound by a `new` branch in `g` to a fresh name.
/// The spawned participant `role(q)[t]` is renamed in lockstep; free
/// channels are untouched.
pub fn alpha_rename_bound_channels(g: &GlobalType, fresh: &mut FreshNames) -> GlobalType {
    match g {
        GlobalType::End | GlobalType::Var(_) => g.clone(),
        GlobalType::Rec {
            var,
            generation,
            body,
        } => GlobalType::Rec {
            var: var.clone(),
            generation: *generation,
            body: Box::new(alpha_rename_bound_channels(body, fresh)),
        },
        GlobalType::Par(l, r) => GlobalType::par(
            alpha_rename_bound_channels(l, fresh),
            alpha_rename_bound_channels(r, fresh),
        ),
        GlobalType::Choice(gs) => {
            GlobalType::Choice(gs.iter().map(|g| alpha_rename_bound_channels(g, fresh)).collect())
        }
        GlobalType::Action(a) => {
            let mut out = a.clone();
            for b in &mut out.branches {
                if let Message::New(t) = &b.message {
                    let t = t.clone();
                    let t_new = fresh.fresh(&t);
                    let spawned = a.receiver.participant.with_index(t.as_str());
                    let spawned_new = a.receiver.participant.with_index(t_new.as_str());
                    let renamed = rename_channel(&b.cont, &t, &t_new, &spawned, &spawned_new);
                    b.message = Message::New(t_new);
                    b.cont = alpha_rename_bound_channels(&renamed, fresh);
                } else {
                    b.cont = alpha_rename_bound_channels(&b.cont, fresh);
                }
            }
            GlobalType::Action(out)
        }
    }
}

fn rename_channel(
    g: &GlobalType,
    old: &str,
    new: &str,
    spawned: &Participant,
    spawned_new: &Participant,
) -> GlobalType {
    let rn = |g: &GlobalType| rename_channel(g, old, new, spawned, spawned_new);
    match g {
        GlobalType::End | GlobalType::Var(_) => g.clone(),
        GlobalType::Rec {
            var,
            generation,
            body,
        } => GlobalType::Rec {
            var: var.clone(),
            generation: *generation,
            body: Box::new(rn(body)),
        },
        GlobalType::Par(l, r) => GlobalType::par(rn(l), rn(r)),
        GlobalType::Choice(gs) => GlobalType::Choice(gs.iter().map(rn).collect()),
        GlobalType::Action(a) => {
            let mut out: Action = a.clone();
            if out.channel.name() == Some(old) {
                out.channel = Channel::named(new);
            }
            for ep in [&mut out.sender, &mut out.receiver] {
                if &ep.participant == spawned {
                    ep.participant = spawned_new.clone();
                }
            }
            for b in &mut out.branches {
                // a nested binder of the same name shadows the outer one
                if matches!(&b.message, Message::New(t) if t == old) {
                    continue;
                }
                b.cont = rn(&b.cont);
            }
            GlobalType::Action(out)
        }
    }
}
