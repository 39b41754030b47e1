//! Graphviz rendering of explored state graphs.

use std::fmt::Write;

use crate::explorer::StateGraph;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Nodes are labelled with state ids and carry the full term as tooltip;
/// edges read `rule: label`, crash edges are dashed.
pub fn state_graph_dot(graph: &StateGraph) -> String {
    let mut out = String::from("digraph states {\n  node [shape=circle];\n");
    for (id, g) in graph.states.iter().enumerate() {
        let _ = writeln!(out, "  s{id} [label=\"{id}\", tooltip=\"{}\"];", escape(&g.to_string()));
    }
    for e in &graph.edges {
        let style = if e.label.kind() == "crash" { ", style=dashed" } else { "" };
        let _ = writeln!(
            out,
            "  s{} -> s{} [label=\"{}\"{style}];",
            e.src,
            e.dst,
            escape(&format!("{}: {}", e.rule, e.label))
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::{explore, ExploreOptions};
    use crate::frontend::parse;

    #[test]
    fn dashed_crashes() {
        let p = parse("protocol p\nprivate s : a, b\na -> b : s { L() . end, ERR . end }").unwrap();
        let dot = state_graph_dot(&explore(&p.body, &ExploreOptions::default()));
        assert!(dot.starts_with("digraph states {"));
        assert!(dot.contains("[label=\"com: a -> b : s L()\"]"));
        assert!(dot.contains("[label=\"crash: a !crash\", style=dashed]"));
        assert!(dot.contains("tooltip=\"a -> b : s { L() . end, ERR . end }\""));
    }
}
