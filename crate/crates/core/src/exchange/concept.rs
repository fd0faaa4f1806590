use std::fmt::Write as _;

use crate::notation::ParsedNotation;
use crate::record::{ClassRecord, NotationKind};
use crate::scheme::Scheme;

/// Namespace of the non-standard syntagmatic extension.
pub const EXTENSION_NS: &str = "urn:facet:composite:1";

/// Schema for the exported document; the extension elements live in
/// [`EXTENSION_SCHEMA`].
pub const CONCEPT_SCHEMA: &str = include_str!("../../schema/concept-scheme.xsd");
pub const EXTENSION_SCHEMA: &str = include_str!("../../schema/composite-extension.xsd");

fn esc(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

fn write_composite(out: &mut String, parsed: &ParsedNotation, scheme: &Scheme) {
    let grammar = scheme.grammar();
    let _ = writeln!(
        out,
        "    <fx:composite standard=\"false\" structure=\"{}\">",
        parsed.kind().as_str()
    );
    for (i, chain) in parsed.operands.iter().enumerate() {
        if i > 0 {
            let symbol = &parsed.relators[i - 1];
            let label = grammar.relator(symbol).map_or("", |r| r.label.as_str());
            let _ = writeln!(
                out,
                "      <fx:relator symbol=\"{}\" label=\"{}\"/>",
                esc(symbol),
                esc(label)
            );
        }
        let _ = writeln!(
            out,
            "      <fx:operand notation=\"{}\">",
            esc(&crate::notation::render_chain(chain, grammar))
        );
        for c in chain {
            let _ = writeln!(
                out,
                "        <fx:component table=\"{}\" facet=\"{}\" term=\"{}\"/>",
                esc(&c.table_id),
                esc(&c.facet_category),
                esc(&c.term)
            );
        }
        out.push_str("      </fx:operand>\n");
    }
    out.push_str("    </fx:composite>\n");
}

fn write_concept(out: &mut String, record: &ClassRecord, scheme: &Scheme) {
    let _ = writeln!(
        out,
        "  <concept id=\"{}\" notation=\"{}\">",
        esc(record.class_id.as_str()),
        esc(&record.notation)
    );
    let _ = writeln!(out, "    <prefLabel>{}</prefLabel>", esc(&record.caption));
    for term in &record.index_terms {
        let _ = writeln!(out, "    <altLabel>{}</altLabel>", esc(term));
    }
    if let Some(b) = scheme.link(&record.class_id).and_then(|l| l.broader.as_ref()) {
        let _ = writeln!(out, "    <broader ref=\"{}\"/>", esc(b.as_str()));
    }
    for target in &record.references {
        if let Some(r) = scheme.lookup(target) {
            let _ = writeln!(out, "    <related ref=\"{}\"/>", esc(r.class_id.as_str()));
        }
    }
    if record.notation_kind == NotationKind::Composite {
        if let Ok(parsed) = scheme.parse(&record.notation) {
            write_composite(out, &parsed, scheme);
        }
    }
    out.push_str("  </concept>\n");
}

/// XML concept scheme. Broader and related links carry the standard
/// paradigmatic relations; the syntagmatic structure of composite
/// classmarks has no standard element and goes into the `fx` extension.
pub fn export_concept_scheme(scheme: &Scheme) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<conceptScheme xmlns:fx=\"{EXTENSION_NS}\">");
    for record in scheme.records() {
        write_concept(&mut out, record, scheme);
    }
    out.push_str("</conceptScheme>\n");
    out
}
