//! Intra-method backward def-use slicing from an assertion to statements that
//! introduce iteration-order nondeterminism.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lexer::{Token, TokenKind};
use super::parser::{ClassModel, MethodModel};
use super::statements::{join_lines, statement_spans, StatementSpan};

const BUILTIN_CATALOG: &str = include_str!("../../data/unordered-apis");

pub(crate) const KEYWORDS: [&str; 53] = [
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "var", "yield", "null",
];

const MUTATORS: [&str; 24] = [
    "put", "putAll", "putIfAbsent", "add", "addAll", "remove", "removeAll", "retainAll", "clear",
    "set", "setProperty", "offer", "push", "addFirst", "addLast", "compute", "computeIfAbsent",
    "merge", "replace", "replaceAll", "sort", "append", "insert", "addProperty",
];

/// Unordered collection types and order-unstable APIs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnorderedCatalog {
    /// Simple names of unordered collection types.
    pub types: BTreeSet<String>,
    /// Methods that are order-unstable on any receiver.
    pub apis: BTreeSet<String>,
    /// Methods that are order-unstable on receivers of an unordered type.
    pub iteration_sinks: BTreeSet<String>,
}

impl UnorderedCatalog {
    /// Parses the `unordered-apis` format: one qualified name per line, `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Self {
        let names: Vec<&str> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .collect();
        let mut catalog = UnorderedCatalog::default();
        let is_type = |n: &str| {
            n.rsplit('.')
                .next()
                .and_then(|s| s.chars().next())
                .is_some_and(char::is_uppercase)
        };
        for n in names.iter().filter(|n| is_type(n)) {
            catalog.types.insert(simple(n).to_string());
        }
        for n in names.iter().filter(|n| !is_type(n)) {
            let (owner, method) = n.rsplit_once('.').unwrap_or(("", n));
            if catalog.types.contains(simple(owner)) {
                catalog.iteration_sinks.insert(method.to_string());
            } else {
                catalog.apis.insert(method.to_string());
            }
        }
        catalog
    }

    pub fn builtin() -> Self {
        UnorderedCatalog::parse(BUILTIN_CATALOG)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(UnorderedCatalog::parse(&std::fs::read_to_string(path)?))
    }

    /// Whether a declared type text (`Map<K, V>`, `java.util.HashSet<T>`)
    /// names an unordered type.
    pub fn is_unordered_type(&self, type_text: &str) -> bool {
        let base = type_text.split('<').next().unwrap_or(type_text).trim();
        self.types.contains(simple(base))
    }
}

fn simple(name: &str) -> &str {
    name.rsplit('.').next().unwrap_or(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SuspectReason {
    UnorderedCollectionCtor,
    UnorderedApiCall,
    StringifiedUnorderedValue,
}

impl SuspectReason {
    pub fn describe(self) -> &'static str {
        match self {
            SuspectReason::UnorderedCollectionCtor => "initializes an unordered collection",
            SuspectReason::UnorderedApiCall => "calls an API with unspecified ordering",
            SuspectReason::StringifiedUnorderedValue => "converts an unordered value to a string",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspectStatement {
    pub line: u32,
    pub end_line: u32,
    pub source: String,
    pub reason: SuspectReason,
}

/// Def/use summary of one statement.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub(crate) struct Facts {
    /// Locals introduced by a declaration (kills).
    pub declared: BTreeSet<String>,
    /// Plain assignments.
    pub assigned: BTreeSet<String>,
    /// Compound assignments, increments, and mutator calls.
    pub mutated: BTreeSet<String>,
    pub uses: BTreeSet<String>,
}

impl Facts {
    pub fn defs(&self) -> impl Iterator<Item = &String> {
        self.declared
            .iter()
            .chain(&self.assigned)
            .chain(&self.mutated)
    }
}

fn is_word(t: &Token, src: &str) -> bool {
    t.kind == TokenKind::Ident && !KEYWORDS.contains(&t.text(src))
}

/// Whether the `>` at `idx` closes a type argument list (`Map<K, V>`).
fn closes_generic(toks: &[Token], idx: usize, src: &str) -> bool {
    let mut depth = 0i32;
    let mut i = idx as isize;
    while i >= 0 {
        let t = &toks[i as usize];
        match t.text(src) {
            ">" => depth += 1,
            "<" => {
                depth -= 1;
                if depth == 0 {
                    return i > 0 && toks[i as usize - 1].kind == TokenKind::Ident;
                }
            }
            "," | "." | "?" | "[" | "]" | "&" | "extends" | "super" => {}
            _ if t.kind == TokenKind::Ident => {}
            _ => return false,
        }
        i -= 1;
    }
    false
}

/// Type names and constants by naming convention.
fn starts_uppercase(name: &str) -> bool {
    name.chars().next().is_some_and(char::is_uppercase)
}

pub(crate) fn statement_facts(toks: &[Token], src: &str) -> Facts {
    let mut facts = Facts::default();
    let text = |i: usize| toks.get(i).map(|t| t.text(src)).unwrap_or("");
    for (i, t) in toks.iter().enumerate() {
        if !is_word(t, src) {
            continue;
        }
        let name = t.text(src).to_string();
        let prev = if i > 0 { text(i - 1) } else { "" };
        let next = text(i + 1);
        let after_dot = prev == "." && !(i >= 2 && text(i - 2) == "this");

        let declaration = matches!(next, "=" | ";" | ":" | "," | ")")
            && i > 0
            && (is_word(&toks[i - 1], src)
                || (prev == ">" && closes_generic(toks, i - 1, src))
                || (prev == "]" && i >= 2 && text(i - 2) == "["));
        if declaration && !after_dot {
            facts.declared.insert(name);
            continue;
        }
        if after_dot {
            continue;
        }
        match next {
            "=" => {
                facts.assigned.insert(name);
                continue;
            }
            "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | "++" | "--" => {
                facts.mutated.insert(name.clone());
            }
            "." if MUTATORS.contains(&text(i + 2)) && text(i + 3) == "(" => {
                facts.mutated.insert(name.clone());
            }
            "(" => continue,
            _ => {}
        }
        if matches!(prev, "++" | "--") {
            facts.mutated.insert(name.clone());
        }
        if !starts_uppercase(&name) {
            facts.uses.insert(name);
        }
    }
    facts
}

/// Returns unordered-collection suspects on the backward def-use slice from
/// the statement at `sink_line`, in source order. Best effort: an empty list
/// means nothing was found, not that the test is deterministic.
pub fn find_unordered_suspects(
    model: &ClassModel,
    method: &MethodModel,
    sink_line: u32,
    catalog: &UnorderedCatalog,
) -> Vec<SuspectStatement> {
    let src = model.source_text.as_str();
    let stmts = statement_spans(model, method);
    let Some(sink_idx) = stmts
        .iter()
        .enumerate()
        .filter(|(_, s)| s.covers_line(sink_line))
        .min_by_key(|(_, s)| (s.is_header, s.end_line - s.start_line, s.start))
        .map(|(i, _)| i)
    else {
        return Vec::new();
    };
    let facts: Vec<Facts> = stmts
        .iter()
        .map(|s| statement_facts(s.tokens(model), src))
        .collect();

    let mut live: BTreeSet<String> = facts[sink_idx].uses.clone();
    live.extend(facts[sink_idx].mutated.iter().cloned());
    let mut slice = vec![sink_idx];
    for idx in (0..sink_idx).rev() {
        let f = &facts[idx];
        if !f.defs().any(|d| live.contains(d)) {
            continue;
        }
        slice.push(idx);
        for d in &f.declared {
            live.remove(d);
        }
        if stmts[idx].depth == 1 {
            for d in &f.assigned {
                live.remove(d);
            }
        }
        live.extend(f.uses.iter().cloned());
        live.extend(f.mutated.iter().cloned());
    }
    slice.sort_unstable();

    let unordered_vars = unordered_variables(model, &stmts, &facts, catalog);
    slice
        .into_iter()
        .filter_map(|idx| {
            let s = &stmts[idx];
            classify(s.tokens(model), src, catalog, &unordered_vars).map(|reason| SuspectStatement {
                line: s.start_line,
                end_line: s.end_line,
                source: join_lines(s.raw(model)),
                reason,
            })
        })
        .collect()
}

/// Variables (locals and fields) holding unordered collections or values
/// derived from iterating one.
fn unordered_variables(
    model: &ClassModel,
    stmts: &[StatementSpan],
    facts: &[Facts],
    catalog: &UnorderedCatalog,
) -> BTreeSet<String> {
    let src = model.source_text.as_str();
    let mut vars: BTreeSet<String> = BTreeSet::new();
    for f in &model.fields {
        let init_unordered = f.initializer.as_deref().is_some_and(|init| {
            super::lexer::tokenize(init)
                .map(|toks| has_unordered_ctor(&toks, init, catalog))
                .unwrap_or(false)
        });
        if catalog.is_unordered_type(&f.type_text) || init_unordered {
            vars.insert(f.name.clone());
        }
    }
    for (s, f) in stmts.iter().zip(facts) {
        let toks = s.tokens(model);
        let targets: Vec<&String> = f.declared.iter().chain(&f.assigned).collect();
        if targets.is_empty() && f.mutated.is_empty() {
            continue;
        }
        let declared_type_unordered = f.declared.iter().any(|d| {
            toks.iter()
                .position(|t| t.text(src) == d)
                .is_some_and(|pos| pos > 0 && catalog.types.contains(base_type_before(toks, pos, src)))
        });
        let source_unordered = has_unordered_ctor(toks, src, catalog)
            || has_unordered_api(toks, src, catalog, &vars)
            || f.uses.iter().any(|u| vars.contains(u));
        if declared_type_unordered || source_unordered {
            vars.extend(targets.into_iter().cloned());
        }
        if f.uses.iter().any(|u| vars.contains(u) && !f.mutated.contains(u)) {
            vars.extend(f.mutated.iter().cloned());
        }
    }
    vars
}

/// Simple name of the declared type preceding the identifier at `pos`.
fn base_type_before<'a>(toks: &[Token], pos: usize, src: &'a str) -> &'a str {
    let mut i = pos - 1;
    if toks[i].text(src) == ">" {
        let mut depth = 0;
        loop {
            match toks[i].text(src) {
                ">" => depth += 1,
                "<" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
            if i == 0 {
                return "";
            }
            i -= 1;
        }
        if i == 0 {
            return "";
        }
        i -= 1;
    }
    toks[i].text(src)
}

fn has_unordered_ctor(toks: &[Token], src: &str, catalog: &UnorderedCatalog) -> bool {
    toks.iter().enumerate().any(|(i, t)| {
        if t.text(src) != "new" {
            return false;
        }
        let mut j = i + 1;
        let mut last = "";
        while let Some(n) = toks.get(j) {
            if n.kind == TokenKind::Ident {
                last = n.text(src);
                j += 1;
                if toks.get(j).map(|x| x.text(src)) == Some(".") {
                    j += 1;
                    continue;
                }
            }
            break;
        }
        catalog.types.contains(last)
    })
}

fn has_unordered_api(
    toks: &[Token],
    src: &str,
    catalog: &UnorderedCatalog,
    vars: &BTreeSet<String>,
) -> bool {
    toks.windows(3).enumerate().any(|(i, w)| {
        if w[0].text(src) != "." || w[2].text(src) != "(" {
            return false;
        }
        let method = w[1].text(src);
        if catalog.apis.contains(method) {
            return true;
        }
        catalog.iteration_sinks.contains(method)
            && i > 0
            && vars.contains(toks[i - 1].text(src))
            && !(i > 1 && toks[i - 2].text(src) == "." && toks.get(i.wrapping_sub(3)).map(|t| t.text(src)) != Some("this"))
    })
}

fn is_stringified(toks: &[Token], src: &str, vars: &BTreeSet<String>) -> bool {
    let text = |i: usize| toks.get(i).map(|t| t.text(src)).unwrap_or("");
    for (i, t) in toks.iter().enumerate() {
        if !vars.contains(t.text(src)) || (i > 0 && text(i - 1) == "." && text(i.wrapping_sub(2)) != "this") {
            continue;
        }
        if text(i + 1) == "." && text(i + 2) == "toString" && text(i + 3) == "(" {
            return true;
        }
        // String.valueOf(x), Objects.toString(x), Arrays.toString(x), String.join(d, x)
        if i >= 4 && matches!(text(i - 1), "(" | ",") {
            let mut j = i - 1;
            let mut depth = 0;
            while j > 0 {
                match text(j) {
                    ")" => depth += 1,
                    "(" if depth == 0 => break,
                    "(" => depth -= 1,
                    _ => {}
                }
                j -= 1;
            }
            if j >= 3
                && text(j) == "("
                && matches!(
                    (text(j - 3), text(j - 1)),
                    ("String", "valueOf") | ("Objects", "toString") | ("Arrays", "toString") | ("String", "join")
                )
            {
                return true;
            }
        }
        let concat_left = text(i.wrapping_sub(1)) == "+" && i >= 2 && toks[i - 2].kind == TokenKind::Str;
        let concat_right = text(i + 1) == "+" && toks.get(i + 2).is_some_and(|n| n.kind == TokenKind::Str);
        if concat_left || concat_right {
            return true;
        }
    }
    false
}

fn classify(
    toks: &[Token],
    src: &str,
    catalog: &UnorderedCatalog,
    vars: &BTreeSet<String>,
) -> Option<SuspectReason> {
    if has_unordered_ctor(toks, src, catalog) {
        Some(SuspectReason::UnorderedCollectionCtor)
    } else if has_unordered_api(toks, src, catalog, vars) {
        Some(SuspectReason::UnorderedApiCall)
    } else if is_stringified(toks, src, vars) {
        Some(SuspectReason::StringifiedUnorderedValue)
    } else {
        None
    }
}

/// Forward closure: every local whose value flows from one of `seeds` within
/// `method`.
pub fn derived_variables(
    model: &ClassModel,
    method: &MethodModel,
    seeds: &BTreeSet<String>,
) -> BTreeSet<String> {
    let src = model.source_text.as_str();
    let stmts = statement_spans(model, method);
    let facts: Vec<Facts> = stmts
        .iter()
        .map(|s| statement_facts(s.tokens(model), src))
        .collect();
    let mut set = seeds.clone();
    loop {
        let before = set.len();
        for f in &facts {
            if f.uses.iter().any(|u| set.contains(u)) {
                set.extend(f.defs().cloned());
            }
        }
        if set.len() == before {
            return set;
        }
    }
}

/// Identifiers referenced as variables (not members, not callees) in a token run.
pub(crate) fn referenced_names(toks: &[Token], src: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (i, t) in toks.iter().enumerate() {
        if !is_word(t, src) {
            continue;
        }
        let prev = if i > 0 { toks[i - 1].text(src) } else { "" };
        let after_dot = prev == "." && !(i >= 2 && toks[i - 2].text(src) == "this");
        let is_call = toks.get(i + 1).map(|n| n.text(src)) == Some("(");
        if !after_dot && !is_call && !starts_uppercase(t.text(src)) {
            out.insert(t.text(src).to_string());
        }
    }
    out
}
