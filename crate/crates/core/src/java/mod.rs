//! Analysis of Java test sources: structural parsing, statement
//! localization, unordered-collection slicing, related-code extraction,
//! declaration comparison, patch application, and Maven manifest edits.

pub mod dataflow;
pub mod decl;
pub mod lexer;
pub mod parser;
pub mod patch;
pub mod pom;
pub mod related;
pub mod statements;

use std::fmt;

pub use dataflow::{find_unordered_suspects, SuspectReason, SuspectStatement, UnorderedCatalog};
pub use decl::{declaration_diff, DeclarationFacet, Discrepancy};
pub use parser::{
    parse_method_snippet, parse_test_class, ClassModel, FieldDecl, ImportDecl, MethodModel,
    Parameter, Span,
};
pub use patch::{apply_patch, BuildDependency, MethodEdit, PatchCandidate, PatchError};
pub use pom::{declared_dependencies, edit_build_dependency, ManifestError};
pub use related::{extract_related_code, RelatedCode, RelatedError, RelatedKind, RelatedMember};
pub use statements::{locate_statement, LocateError, LocatedStatement};

/// Parse failure with the first offending line.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: u32, message: &str) -> Self {
        ParseError {
            line: line.max(1),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}
