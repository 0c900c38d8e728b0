//! Graphviz DOT rendering of a concept tree.

use super::{AttrKind, CobwebTree};
use std::fmt::Write;

fn escape(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    for ch in label.chars() {
        if matches!(ch, '{' | '}' | '|' | '<' | '>' | '"' | '\\') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

impl CobwebTree {
    /// One record node per concept showing id, count, and the three
    /// most probable attribute-value pairs.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cobweb {\n  node [shape=record];\n");
        for id in self.ids_preorder() {
            let node = self.node(id);
            let mut label = format!("id {id}|count {}", node.count);
            if node.count > 0 {
                let mut pairs: Vec<(f64, String)> = Vec::new();
                for &(attr, ref table) in &node.nominal {
                    for (&v, &c) in &table.counts {
                        let value = match self.attr_kind(attr) {
                            AttrKind::Nominal => self.value_symbol(attr, v).to_string(),
                            AttrKind::NominalRef => v.to_string(),
                            AttrKind::Continuous => unreachable!(),
                        };
                        let p = c as f64 / node.count as f64;
                        pairs.push((p, format!("{}={}", self.attr_name(attr), value)));
                    }
                }
                pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
                for (p, name) in pairs.into_iter().take(3) {
                    write!(label, "|{name} {p:.3}").unwrap();
                }
            }
            writeln!(out, "  n{id} [label=\"{{{}}}\"];", escape(&label)).unwrap();
        }
        for id in self.ids_preorder() {
            for &ch in &self.node(id).children {
                writeln!(out, "  n{id} -> n{ch};").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}
