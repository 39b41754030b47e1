//! Structural congruence: `G1 || G2 == G2 || G1` and `G || end == G`.
//!
//! Associativity of `||` is not part of the congruence, so normal forms keep
//! parallel composition binary.

use std::fmt::Write;

use super::GlobalType;

/// Canonical representative of the congruence class of `g`.
///
/// `end` units are dropped from parallel compositions and the two operands
/// of every `||` are ordered by their canonical key.
pub fn normalize(g: &GlobalType) -> GlobalType {
    match g {
        GlobalType::End | GlobalType::Var(_) => g.clone(),
        GlobalType::Rec {
            var,
            generation,
            body,
        } => GlobalType::Rec {
            var: var.clone(),
            generation: *generation,
            body: Box::new(normalize(body)),
        },
        GlobalType::Choice(gs) => GlobalType::Choice(gs.iter().map(normalize).collect()),
        GlobalType::Action(a) => {
            let mut a = a.clone();
            for b in &mut a.branches {
                b.cont = normalize(&b.cont);
            }
            GlobalType::Action(a)
        }
        GlobalType::Par(l, r) => {
            let l = normalize(l);
            let r = normalize(r);
            match (l.is_end(), r.is_end()) {
                (true, _) => r,
                (_, true) => l,
                _ => {
                    if canonical_key(&l) <= canonical_key(&r) {
                        GlobalType::par(l, r)
                    } else {
                        GlobalType::par(r, l)
                    }
                }
            }
        }
    }
}

/// Serialization of `g` with bound recursion variables replaced by
/// de Bruijn indices, so alpha-equivalent terms share a key. Rec binders
/// include their generation annotation.
pub fn canonical_key(g: &GlobalType) -> String {
    let mut out = String::new();
    let mut bound = Vec::new();
    write_key(g, &mut bound, &mut out);
    out
}

fn write_key<'a>(g: &'a GlobalType, bound: &mut Vec<&'a str>, out: &mut String) {
    match g {
        GlobalType::End => out.push_str("end"),
        GlobalType::Var(x) => match bound.iter().rposition(|b| *b == x) {
            Some(pos) => {
                let _ = write!(out, "^{}", bound.len() - 1 - pos);
            }
            None => out.push_str(x),
        },
        GlobalType::Rec {
            var,
            generation,
            body,
        } => {
            let _ = write!(out, "rec@{generation} . ");
            bound.push(var);
            write_key(body, bound, out);
            bound.pop();
        }
        GlobalType::Par(l, r) => {
            out.push('(');
            write_key(l, bound, out);
            out.push_str(" || ");
            write_key(r, bound, out);
            out.push(')');
        }
        GlobalType::Choice(gs) => {
            out.push_str("choice { ");
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                write_key(g, bound, out);
            }
            out.push_str(" }");
        }
        GlobalType::Action(a) => {
            let _ = write!(out, "{} -> {} : {} {{ ", a.sender, a.receiver, a.channel);
            for (i, b) in a.branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{} . ", b.message);
                write_key(&b.cont, bound, out);
            }
            out.push_str(" }");
        }
    }
}

/// Decides congruence: equal normal forms up to renaming of bound
/// recursion variables.
pub fn structurally_equal(g1: &GlobalType, g2: &GlobalType) -> bool {
    canonical_key(&normalize(g1)) == canonical_key(&normalize(g2))
}
