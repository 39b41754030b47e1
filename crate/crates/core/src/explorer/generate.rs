//! Random protocols that are coherent by construction: every node is built
//! in the shape of the judgement rule that will check it, against the
//! environments that rule will see.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coherence::{Binding, EndMode, Gamma};
use crate::frontend::{validate, PrivateDecl, ProtocolSpec, SpanTable};
use crate::kernel::{Branch, Channel, Endpoint, GlobalType, Message, Participant, PublicDecl};

const ROLES: [&str; 3] = ["a", "b", "c"];
const RETRIES: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerationError {
    #[error("no coherent protocol generated for seed {seed} (size {size}) after {RETRIES} attempts")]
    GenerationExhausted { seed: u64, size: usize },
}

/// A well-formed protocol, coherent in relaxed-end mode, with at most
/// `size` actions and at most two nested recursion binders. Deterministic
/// in `seed`.
pub fn generate_coherent(seed: u64, size: usize) -> Result<ProtocolSpec, GenerationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RETRIES {
        let spec = Gen::new(&mut rng, size).spec(seed);
        if validate(&spec, &SpanTable::new()).is_ok() && spec.check(EndMode::RelaxedEnd).is_coherent() {
            return Ok(spec);
        }
    }
    Err(GenerationError::GenerationExhausted { seed, size })
}

#[derive(Clone)]
struct Env {
    gamma: Gamma,
    delta: BTreeMap<String, Gamma>,
    /// Binders not yet separated from their body by an action.
    unguarded: BTreeSet<String>,
    rec_depth: usize,
}

impl Env {
    fn guarded(&self) -> Env {
        Env {
            unguarded: BTreeSet::new(),
            ..self.clone()
        }
    }

    fn sessions(&self) -> Vec<(String, Participant, Participant)> {
        self.gamma
            .iter()
            .filter_map(|(c, b)| match b {
                Binding::Session(ps) if ps.len() == 2 => {
                    let mut it = ps.iter().cloned();
                    Some((c.clone(), it.next()?, it.next()?))
                }
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Copy)]
enum Node {
    End,
    Var,
    Send,
    Request,
    Spawn,
    Choice,
    Par,
    Rec,
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    budget: usize,
    labels: usize,
    channels: usize,
    vars: usize,
    publics: Vec<PublicDecl>,
}

impl<'r> Gen<'r> {
    fn new(rng: &'r mut ChaCha8Rng, size: usize) -> Self {
        Gen {
            rng,
            budget: size,
            labels: 0,
            channels: 0,
            vars: 0,
            publics: Vec::new(),
        }
    }

    fn spec(mut self, seed: u64) -> ProtocolSpec {
        let n_pub = self.rng.gen_range(0..=2);
        self.publics = (0..n_pub)
            .map(|i| PublicDecl {
                channel: format!("k{i}"),
                server: Participant::root(format!("srv{i}")),
            })
            .collect();
        let n_priv = self.rng.gen_range(0..=2);
        let privates: Vec<PrivateDecl> = (0..n_priv)
            .map(|i| {
                let pair: Vec<&&str> = ROLES.choose_multiple(self.rng, 2).collect();
                PrivateDecl {
                    channel: format!("s{i}"),
                    left: Endpoint::live(Participant::root(*pair[0])),
                    right: Endpoint::live(Participant::root(*pair[1])),
                }
            })
            .collect();
        let mut spec = ProtocolSpec {
            name: format!("generated_{seed}"),
            publics: self.publics.clone(),
            privates,
            body: GlobalType::End,
        };
        let env = Env {
            gamma: spec.initial_gamma(),
            delta: BTreeMap::new(),
            unguarded: BTreeSet::new(),
            rec_depth: 0,
        };
        spec.body = self.gen(&env);
        spec
    }

    fn actors(&self, env: &Env) -> Vec<Participant> {
        let mut out: BTreeSet<Participant> = ROLES.iter().map(|r| Participant::root(*r)).collect();
        for (_, p, q) in env.sessions() {
            out.insert(p);
            out.insert(q);
        }
        out.into_iter().collect()
    }

    fn usable_var(&self, env: &Env) -> Option<String> {
        env.delta
            .iter()
            .find(|(x, snap)| !env.unguarded.contains(*x) && **snap == env.gamma)
            .map(|(x, _)| x.clone())
    }

    fn gen(&mut self, env: &Env) -> GlobalType {
        let mut options: Vec<(Node, u32)> = vec![(Node::End, if self.budget == 0 { 3 } else { 1 })];
        if self.usable_var(env).is_some() {
            options.push((Node::Var, 3));
        }
        if self.budget > 0 {
            if !env.sessions().is_empty() {
                options.push((Node::Send, 5));
            }
            if !self.publics.is_empty() {
                options.push((Node::Request, 2));
            }
            options.push((Node::Spawn, 1));
            if self.budget >= 2 {
                options.push((Node::Choice, 2));
                options.push((Node::Par, 1));
            }
            if env.rec_depth < 2 {
                options.push((Node::Rec, 2));
            }
        }
        let node = options
            .choose_weighted(self.rng, |o| o.1)
            .map(|o| o.0)
            .unwrap_or(Node::End);
        match node {
            Node::End => GlobalType::End,
            Node::Var => GlobalType::Var(self.usable_var(env).expect("checked above")),
            Node::Rec => {
                self.vars += 1;
                let x = format!("X{}", self.vars);
                let mut inner = env.clone();
                inner.delta.insert(x.clone(), env.gamma.clone());
                inner.unguarded.insert(x.clone());
                inner.rec_depth += 1;
                GlobalType::rec(x, self.gen(&inner))
            }
            Node::Par => {
                let mut left = env.clone();
                let mut right = Env {
                    gamma: env.gamma.clone(),
                    delta: BTreeMap::new(),
                    unguarded: BTreeSet::new(),
                    rec_depth: env.rec_depth,
                };
                for (c, _, _) in env.sessions() {
                    if self.rng.gen_bool(0.5) {
                        left.gamma.remove(&c);
                    } else {
                        right.gamma.remove(&c);
                    }
                }
                let l = self.gen(&left);
                let r = self.gen(&right);
                GlobalType::par(l, r)
            }
            Node::Choice => {
                let actors = self.actors(env);
                let sender = actors.choose(self.rng).expect("roles are never empty").clone();
                let alts: Vec<GlobalType> = (0..2).filter_map(|_| self.action_from(env, &sender)).collect();
                match alts.len() {
                    0 => GlobalType::End,
                    1 => alts.into_iter().next().expect("one alternative"),
                    _ => GlobalType::Choice(alts),
                }
            }
            Node::Send => {
                let sessions = env.sessions();
                let (s, p, q) = sessions.choose(self.rng).expect("checked above").clone();
                let (p, q) = if self.rng.gen_bool(0.5) { (p, q) } else { (q, p) };
                self.send(env, &s, p, q)
            }
            Node::Request => {
                let decl = self.publics.choose(self.rng).expect("checked above").clone();
                let actors: Vec<Participant> = self.actors(env).into_iter().filter(|p| *p != decl.server).collect();
                let p = actors.choose(self.rng).expect("base roles are not servers").clone();
                self.request(env, p, &decl)
            }
            Node::Spawn => {
                let actors = self.actors(env);
                let p = actors.choose(self.rng).expect("roles are never empty").clone();
                self.spawn(env, p)
            }
        }
    }

    /// One action initiated by `sender`, if it has anything to do.
    fn action_from(&mut self, env: &Env, sender: &Participant) -> Option<GlobalType> {
        if self.budget == 0 {
            return None;
        }
        let sessions: Vec<_> = env
            .sessions()
            .into_iter()
            .filter_map(|(s, p, q)| {
                if &p == sender {
                    Some((s, p, q))
                } else if &q == sender {
                    Some((s, q, p))
                } else {
                    None
                }
            })
            .collect();
        let publics: Vec<PublicDecl> = self.publics.iter().filter(|d| &d.server != sender).cloned().collect();
        let pick = self.rng.gen_range(0..3);
        if pick == 0 && !sessions.is_empty() || pick > 0 && publics.is_empty() && !sessions.is_empty() {
            let (s, p, q) = sessions.choose(self.rng).expect("nonempty").clone();
            Some(self.send(env, &s, p, q))
        } else if pick == 1 && !publics.is_empty() {
            let decl = publics.choose(self.rng).expect("nonempty").clone();
            Some(self.request(env, sender.clone(), &decl))
        } else {
            Some(self.spawn(env, sender.clone()))
        }
    }

    fn send(&mut self, env: &Env, s: &str, p: Participant, q: Participant) -> GlobalType {
        self.budget = self.budget.saturating_sub(1);
        let inner = env.guarded();
        let n = self.rng.gen_range(1..=2);
        let mut branches = Vec::new();
        for _ in 0..n {
            self.labels += 1;
            let message = Message::label(format!("L{}", self.labels), "T");
            branches.push(Branch::new(message, self.gen(&inner)));
        }
        let mut closed = inner.clone();
        closed.gamma.remove(s);
        branches.push(Branch::new(Message::Err, self.gen(&closed)));
        GlobalType::action(Endpoint::live(p), Endpoint::live(q), Channel::named(s), branches)
    }

    fn fresh_channel(&mut self) -> String {
        self.channels += 1;
        format!("t{}", self.channels)
    }

    fn request(&mut self, env: &Env, p: Participant, decl: &PublicDecl) -> GlobalType {
        self.budget = self.budget.saturating_sub(1);
        let t = self.fresh_channel();
        let inner = env.guarded();
        let mut opened = inner.clone();
        opened
            .gamma
            .insert(t.clone(), Binding::session(p.clone(), decl.server.with_index(t.as_str())));
        let cont = self.gen(&opened);
        let err = self.gen(&inner);
        GlobalType::action(
            Endpoint::live(p),
            Endpoint::live(decl.server.clone()),
            Channel::named(decl.channel.clone()),
            vec![Branch::new(Message::New(t), cont), Branch::new(Message::Err, err)],
        )
    }

    fn spawn(&mut self, env: &Env, p: Participant) -> GlobalType {
        self.budget = self.budget.saturating_sub(1);
        let t = self.fresh_channel();
        let inner = env.guarded();
        let mut opened = inner.clone();
        opened
            .gamma
            .insert(t.clone(), Binding::session(p.clone(), p.with_index(t.as_str())));
        let cont = self.gen(&opened);
        let err = self.gen(&inner);
        GlobalType::action(
            Endpoint::live(p.clone()),
            Endpoint::live(p),
            Channel::Tau,
            vec![Branch::new(Message::New(t), cont), Branch::new(Message::Err, err)],
        )
    }
}
