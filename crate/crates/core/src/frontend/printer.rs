use std::fmt::Write;

use super::ProtocolSpec;
use crate::kernel::{normalize, GlobalType};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrintOptions {
    /// Drop finished dead prefixes (sole-ERR actions with both endpoints
    /// crashed and nothing left to do). Display only.
    pub collect_garbage: bool,
}

pub fn pretty_print(spec: &ProtocolSpec) -> String {
    pretty_print_with(spec, PrintOptions::default())
}

pub fn pretty_print_with(spec: &ProtocolSpec, opts: PrintOptions) -> String {
    let mut out = format!("protocol {}\n", spec.name);
    for d in &spec.publics {
        let _ = writeln!(out, "public {} : {}", d.channel, d.server);
    }
    for d in &spec.privates {
        let _ = writeln!(out, "private {} : {}, {}", d.channel, d.left.participant, d.right.participant);
    }
    out.push('\n');
    out.push_str(&pretty_print_term(&spec.body, opts));
    out.push('\n');
    out
}

/// Multi-line rendering of a global type in the concrete syntax.
pub fn pretty_print_term(g: &GlobalType, opts: PrintOptions) -> String {
    let mut out = String::new();
    if opts.collect_garbage {
        write_term(&garbage_collect(g), 0, &mut out);
    } else {
        write_term(g, 0, &mut out);
    }
    out
}

/// Replaces every sole-ERR action whose endpoints are both crashed and whose
/// continuation has become `end` by `end`, then renormalizes.
pub fn garbage_collect(g: &GlobalType) -> GlobalType {
    normalize(&collect(g))
}

fn collect(g: &GlobalType) -> GlobalType {
    match g {
        GlobalType::End | GlobalType::Var(_) => g.clone(),
        GlobalType::Rec {
            var,
            generation,
            body,
        } => GlobalType::Rec {
            var: var.clone(),
            generation: *generation,
            body: Box::new(collect(body)),
        },
        GlobalType::Par(l, r) => GlobalType::par(collect(l), collect(r)),
        GlobalType::Choice(gs) => GlobalType::Choice(gs.iter().map(collect).collect()),
        GlobalType::Action(a) => {
            let mut a = a.clone();
            for b in &mut a.branches {
                b.cont = collect(&b.cont);
            }
            let dead = a.is_sole_err() && !a.sender.is_live() && !a.receiver.is_live();
            if dead && a.branches[0].cont.is_end() {
                GlobalType::End
            } else {
                GlobalType::Action(a)
            }
        }
    }
}

fn is_leaf(g: &GlobalType) -> bool {
    matches!(g, GlobalType::End | GlobalType::Var(_))
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_term(g: &GlobalType, level: usize, out: &mut String) {
    match g {
        GlobalType::End | GlobalType::Var(_) => {
            let _ = write!(out, "{g}");
        }
        GlobalType::Rec {
            var,
            generation,
            body,
        } => {
            out.push_str("rec ");
            out.push_str(var);
            if *generation > 0 {
                let _ = write!(out, "@{generation}");
            }
            out.push_str(" . ");
            write_term(body, level, out);
        }
        GlobalType::Par(l, r) => {
            out.push('(');
            write_term(l, level, out);
            out.push_str(")\n");
            indent(out, level);
            out.push_str("|| (");
            write_term(r, level, out);
            out.push(')');
        }
        GlobalType::Choice(gs) => {
            out.push_str("choice {\n");
            for (i, alt) in gs.iter().enumerate() {
                indent(out, level);
                out.push_str(if i == 0 { "  " } else { "| " });
                write_term(alt, level + 1, out);
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
        GlobalType::Action(a) => {
            if a.branches.iter().all(|b| is_leaf(&b.cont)) {
                let _ = write!(out, "{g}");
                return;
            }
            let _ = writeln!(out, "{} -> {} : {} {{", a.sender, a.receiver, a.channel);
            for (i, b) in a.branches.iter().enumerate() {
                indent(out, level + 1);
                let _ = write!(out, "{} . ", b.message);
                write_term(&b.cont, level + 1, out);
                if i + 1 < a.branches.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_global_type;
    use super::*;
    use crate::kernel::structurally_equal;

    #[test]
    fn layout() {
        let g = parse_global_type("a -> b : s { L() . c -> d : u { M(T) . end, ERR . end }, ERR . end }").unwrap();
        assert_eq!(
            pretty_print_term(&g, PrintOptions::default()),
            "a -> b : s {\n  L() . c -> d : u { M(T) . end, ERR . end },\n  ERR . end\n}"
        );
        assert_eq!(pretty_print_term(&GlobalType::End, PrintOptions::default()), "end");
    }

    #[test]
    fn printed_terms_reparse() {
        for src in [
            "rec X@1 . choice { a -> b : s { L() . X, ERR . end } | a -> c : u { M() . end, ERR . X } }",
            "(a -> b : s { L() . end, ERR . end } || c~ -> d : u { ERR . end }) || X",
            "a -> a : tau { new t . a.t -> b : t { K(V) . end, ERR . end }, ERR . end }",
        ] {
            let g = parse_global_type(src).unwrap();
            let printed = pretty_print_term(&g, PrintOptions::default());
            let back = parse_global_type(&printed).unwrap();
            assert!(structurally_equal(&g, &back), "{printed}");
        }
    }

    #[test]
    fn garbage_collection_is_display_only() {
        let g = parse_global_type("(a~ -> b~ : s { ERR . end } || c -> d : u { L() . end, ERR . end })").unwrap();
        let opts = PrintOptions { collect_garbage: true };
        assert_eq!(pretty_print_term(&g, opts), "c -> d : u { L() . end, ERR . end }");
        // a live endpoint keeps the prefix
        let h = parse_global_type("a -> b~ : s { ERR . end }").unwrap();
        assert_eq!(garbage_collect(&h), h);
    }
}
