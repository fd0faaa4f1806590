//! Checks a document against the element declarations of the bundled
//! schemas: content models, required and undeclared attributes, fixed
//! values and enumerations. Covers the subset of XML Schema the two
//! schema files use.

use std::collections::BTreeMap;

use regex::Regex;
use roxmltree::{Document, Node};

const XS: &str = "http://www.w3.org/2001/XMLSchema";

struct Attribute {
    required: bool,
    fixed: Option<String>,
    allowed: Vec<String>,
}

struct ElementRule {
    /// None for text-only elements.
    content: Option<Regex>,
    attributes: BTreeMap<String, Attribute>,
}

pub struct Validator {
    rules: BTreeMap<String, ElementRule>,
}

fn xs<'a>(node: Node<'a, 'a>, name: &str) -> impl Iterator<Item = Node<'a, 'a>> + 'a {
    let name = name.to_string();
    node.children()
        .filter(move |c| c.is_element() && c.tag_name().namespace() == Some(XS) && c.tag_name().name() == name)
}

fn occurs(node: Node) -> String {
    let min = node.attribute("minOccurs").unwrap_or("1");
    match node.attribute("maxOccurs").unwrap_or("1") {
        "unbounded" => format!("{{{min},}}"),
        max => format!("{{{min},{max}}}"),
    }
}

/// Content model particle as a regex over `name;` tokens. References keep
/// their `fx:` prefix, which matches how [`Validator::name_of`] names
/// extension elements.
fn particle(node: Node) -> String {
    match node.tag_name().name() {
        "element" => {
            let name = node.attribute("ref").expect("element refs only");
            format!("(?:{};){}", regex::escape(name), occurs(node))
        }
        "sequence" => {
            let inner: String = node.children().filter(|c| c.is_element()).map(particle).collect();
            format!("(?:{inner}){}", occurs(node))
        }
        other => panic!("unsupported particle {other}"),
    }
}

impl Validator {
    pub fn new(schemas: &[(&str, &str)]) -> Validator {
        let mut rules = BTreeMap::new();
        for (prefix, text) in schemas {
            let doc = Document::parse(text).expect("schema parses");
            for decl in xs(doc.root_element(), "element") {
                let name = format!("{prefix}{}", decl.attribute("name").unwrap());
                let mut rule = ElementRule {
                    content: None,
                    attributes: BTreeMap::new(),
                };
                if let Some(ty) = xs(decl, "complexType").next() {
                    let body: String = xs(ty, "sequence").map(particle).collect();
                    rule.content = Some(Regex::new(&format!("^{body}$")).unwrap());
                    for a in xs(ty, "attribute") {
                        let allowed = a
                            .descendants()
                            .filter(|e| e.tag_name().name() == "enumeration")
                            .map(|e| e.attribute("value").unwrap().to_string())
                            .collect();
                        rule.attributes.insert(
                            a.attribute("name").unwrap().to_string(),
                            Attribute {
                                required: a.attribute("use") == Some("required"),
                                fixed: a.attribute("fixed").map(str::to_string),
                                allowed,
                            },
                        );
                    }
                }
                rules.insert(name, rule);
            }
        }
        Validator { rules }
    }

    /// The bundled concept-scheme schema with its extension.
    pub fn bundled() -> Validator {
        Validator::new(&[
            ("", facet_core::exchange::CONCEPT_SCHEMA),
            ("fx:", facet_core::exchange::EXTENSION_SCHEMA),
        ])
    }

    pub fn validate(&self, xml: &str) -> Result<(), String> {
        let doc = Document::parse(xml).map_err(|e| format!("not well-formed: {e}"))?;
        let root = doc.root_element();
        if root.tag_name().name() != "conceptScheme" {
            return Err(format!("root is {}", root.tag_name().name()));
        }
        self.check(root)
    }

    fn name_of(node: Node) -> String {
        match node.tag_name().namespace() {
            Some(facet_core::exchange::EXTENSION_NS) => format!("fx:{}", node.tag_name().name()),
            Some(other) => format!("{{{other}}}{}", node.tag_name().name()),
            None => node.tag_name().name().to_string(),
        }
    }

    fn check(&self, node: Node) -> Result<(), String> {
        let name = Self::name_of(node);
        let rule = self
            .rules
            .get(&name)
            .ok_or_else(|| format!("undeclared element {name}"))?;
        let children: Vec<Node> = node.children().filter(|c| c.is_element()).collect();
        match &rule.content {
            None => {
                if !children.is_empty() {
                    return Err(format!("{name} must hold text only"));
                }
            }
            Some(model) => {
                let seq: String = children.iter().map(|c| format!("{};", Self::name_of(*c))).collect();
                if !model.is_match(&seq) {
                    return Err(format!("{name}: children `{seq}` do not match the content model"));
                }
                if node
                    .children()
                    .any(|c| c.is_text() && !c.text().unwrap_or("").trim().is_empty())
                {
                    return Err(format!("{name} has stray text"));
                }
            }
        }
        for attr in node.attributes() {
            let decl = rule
                .attributes
                .get(attr.name())
                .filter(|_| attr.namespace().is_none())
                .ok_or_else(|| format!("{name}: undeclared attribute {}", attr.name()))?;
            if decl.fixed.as_deref().is_some_and(|f| f != attr.value()) {
                return Err(format!("{name}@{}: must be fixed", attr.name()));
            }
            if !decl.allowed.is_empty() && !decl.allowed.iter().any(|v| v == attr.value()) {
                return Err(format!("{name}@{}: `{}` not enumerated", attr.name(), attr.value()));
            }
        }
        for (attr, decl) in &rule.attributes {
            if decl.required && node.attribute(attr.as_str()).is_none() {
                return Err(format!("{name}: missing required attribute {attr}"));
            }
        }
        children.into_iter().try_for_each(|c| self.check(c))
    }
}
