//! Facet-wise comparison of two method declarations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::parser::{compact, MethodModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeclarationFacet {
    Modifiers,
    ReturnType,
    Annotations,
    Parameters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub facet: DeclarationFacet,
    /// Items present in the original but not in the patched declaration.
    pub removed: Vec<String>,
    /// Items present in the patched declaration but not in the original.
    pub added: Vec<String>,
}

impl Discrepancy {
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.removed.is_empty() {
            parts.push(format!("{{{}}} removed", self.removed.join(", ")));
        }
        if !self.added.is_empty() {
            parts.push(format!("{{{}}} added", self.added.join(", ")));
        }
        format!("{:?}: {}", self.facet, parts.join("; "))
    }
}

/// Drops whitespace outside string literals.
fn normalize_annotation(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut in_str = false;
    let mut escaped = false;
    for c in raw.chars() {
        if in_str {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
        } else if c == '"' {
            in_str = true;
            out.push(c);
        } else if !c.is_whitespace() {
            out.push(c);
        }
    }
    out
}

fn set_diff(facet: DeclarationFacet, a: &[String], b: &[String]) -> Option<Discrepancy> {
    let a: BTreeSet<&String> = a.iter().collect();
    let b: BTreeSet<&String> = b.iter().collect();
    if a == b {
        return None;
    }
    Some(Discrepancy {
        facet,
        removed: a.difference(&b).map(|s| s.to_string()).collect(),
        added: b.difference(&a).map(|s| s.to_string()).collect(),
    })
}

fn ordered_diff(facet: DeclarationFacet, a: Vec<String>, b: Vec<String>) -> Option<Discrepancy> {
    (a != b).then_some(Discrepancy {
        facet,
        removed: a,
        added: b,
    })
}

/// One record per differing facet; empty iff the declarations match.
pub fn declaration_diff(original: &MethodModel, patched: &MethodModel) -> Vec<Discrepancy> {
    let anns = |m: &MethodModel| -> Vec<String> {
        m.annotations.iter().map(|a| normalize_annotation(a)).collect()
    };
    let params = |m: &MethodModel| -> Vec<String> {
        m.parameters
            .iter()
            .map(|p| format!("{} {}", compact(&p.type_text), p.name))
            .collect()
    };
    [
        set_diff(DeclarationFacet::Modifiers, &original.modifiers, &patched.modifiers),
        ordered_diff(
            DeclarationFacet::ReturnType,
            vec![compact(&original.return_type)],
            vec![compact(&patched.return_type)],
        ),
        set_diff(DeclarationFacet::Annotations, &anns(original), &anns(patched)),
        ordered_diff(DeclarationFacet::Parameters, params(original), params(patched)),
    ]
    .into_iter()
    .flatten()
    .collect()
}
