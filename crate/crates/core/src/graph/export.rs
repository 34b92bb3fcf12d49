//! GraphML, DOT and CSV writers.

use std::io::{self, Write};

use super::{Partition, WeightedGraph};

/// Extra per-node column, one value per node in index order.
#[derive(Debug, Clone)]
pub struct NodeAttribute {
    pub name: String,
    pub values: Vec<String>,
}

impl NodeAttribute {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Self {
        NodeAttribute { name: name.into(), values }
    }

    pub fn community(p: &Partition) -> Self {
        Self::new("community", p.assignment().iter().map(usize::to_string).collect())
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

pub fn write_graphml<W: Write>(g: &WeightedGraph, attrs: &[NodeAttribute], mut out: W) -> io::Result<()> {
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(out, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    writeln!(out, r#"  <key id="label" for="node" attr.name="label" attr.type="string"/>"#)?;
    for (i, a) in attrs.iter().enumerate() {
        writeln!(
            out,
            r#"  <key id="a{i}" for="node" attr.name="{}" attr.type="string"/>"#,
            xml_escape(&a.name)
        )?;
    }
    writeln!(out, r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#)?;
    let kind = if g.is_directed() { "directed" } else { "undirected" };
    writeln!(out, r#"  <graph id="G" edgedefault="{kind}">"#)?;
    for (i, label) in g.labels().iter().enumerate() {
        write!(out, r#"    <node id="n{i}"><data key="label">{}</data>"#, xml_escape(label))?;
        for (k, a) in attrs.iter().enumerate() {
            if let Some(v) = a.values.get(i) {
                write!(out, r#"<data key="a{k}">{}</data>"#, xml_escape(v))?;
            }
        }
        writeln!(out, "</node>")?;
    }
    for (u, v, w) in g.edges() {
        writeln!(
            out,
            r#"    <edge source="n{u}" target="n{v}"><data key="weight">{w}</data></edge>"#
        )?;
    }
    writeln!(out, "  </graph>")?;
    writeln!(out, "</graphml>")
}

pub fn write_dot<W: Write>(g: &WeightedGraph, attrs: &[NodeAttribute], mut out: W) -> io::Result<()> {
    let (kw, arrow) = if g.is_directed() { ("digraph", "->") } else { ("graph", "--") };
    writeln!(out, "{kw} G {{")?;
    for (i, label) in g.labels().iter().enumerate() {
        let extra: Vec<String> = attrs
            .iter()
            .filter_map(|a| a.values.get(i).map(|v| format!("{}={}", dot_quote(&a.name), dot_quote(v))))
            .collect();
        if extra.is_empty() {
            writeln!(out, "  {};", dot_quote(label))?;
        } else {
            writeln!(out, "  {} [{}];", dot_quote(label), extra.join(", "))?;
        }
    }
    for (u, v, w) in g.edges() {
        writeln!(
            out,
            "  {} {arrow} {} [weight={w}];",
            dot_quote(g.label(u)),
            dot_quote(g.label(v))
        )?;
    }
    writeln!(out, "}}")
}

/// CSV `node,community`.
pub fn write_partition_csv<W: Write>(g: &WeightedGraph, p: &Partition, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "community"])?;
    for (i, label) in g.labels().iter().enumerate() {
        w.write_record([label.as_str(), &p.community_of(i).to_string()])?;
    }
    w.flush()?;
    Ok(())
}
