//! Declaration-level parser: package, imports, one top-level type, and its
//! members. Method bodies, initializers and nested types are kept as opaque
//! token runs addressed by byte span.

use serde::{Deserialize, Serialize};

use super::lexer::{tokenize, LineIndex, Token, TokenKind};
use super::ParseError;

const MODIFIERS: [&str; 13] = [
    "public",
    "protected",
    "private",
    "static",
    "final",
    "abstract",
    "synchronized",
    "native",
    "transient",
    "volatile",
    "strictfp",
    "default",
    "sealed",
];

const TYPE_KEYWORDS: [&str; 4] = ["class", "interface", "enum", "record"];

/// Byte range plus the 1-based lines it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub start_line: u32,
    pub end_line: u32,
}

impl Span {
    pub fn contains_line(&self, line: u32) -> bool {
        self.start_line <= line && line <= self.end_line
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImportDecl {
    pub raw: String,
    pub is_static: bool,
    pub qualified_name: String,
    /// Last segment, the member name for static imports, or `*` for wildcards.
    pub simple_name: String,
}

impl ImportDecl {
    pub fn new(qualified_name: &str, is_static: bool) -> Self {
        let qualified_name = qualified_name.trim().to_string();
        let simple_name = qualified_name
            .rsplit('.')
            .next()
            .unwrap_or(&qualified_name)
            .to_string();
        let raw = format!(
            "import {}{};",
            if is_static { "static " } else { "" },
            qualified_name
        );
        ImportDecl {
            raw,
            is_static,
            qualified_name,
            simple_name,
        }
    }

    /// Parses `import [static] a.b.C;` (the trailing semicolon is optional) or
    /// a bare qualified name.
    pub fn parse(text: &str) -> Option<Self> {
        let mut t = text.trim();
        t = t.strip_suffix(';').unwrap_or(t).trim();
        if let Some(rest) = t.strip_prefix("import") {
            if !rest.starts_with(char::is_whitespace) {
                return None;
            }
            t = rest.trim();
        }
        let (is_static, name) = match t.strip_prefix("static") {
            Some(rest) if rest.starts_with(char::is_whitespace) => (true, rest.trim()),
            _ => (false, t),
        };
        let pieces: Vec<&str> = name.split_whitespace().collect();
        if pieces
            .windows(2)
            .any(|w| !w[0].ends_with('.') && !w[1].starts_with('.'))
        {
            return None;
        }
        let name: String = pieces.concat();
        let valid = !name.is_empty()
            && name.split('.').enumerate().all(|(i, seg)| {
                crate::model::is_java_identifier(seg)
                    || (seg == "*" && i > 0 && name.ends_with(".*"))
            });
        valid.then(|| ImportDecl::new(&name, is_static))
    }

    pub fn is_wildcard(&self) -> bool {
        self.simple_name == "*"
    }

    /// `[static ]qualified.Name`, the form used in stitch action details.
    pub fn key(&self) -> String {
        if self.is_static {
            format!("static {}", self.qualified_name)
        } else {
            self.qualified_name.clone()
        }
    }

    pub fn from_key(key: &str) -> Self {
        match key.strip_prefix("static ") {
            Some(q) => ImportDecl::new(q, true),
            None => ImportDecl::new(key, false),
        }
    }

    /// Package part of a type import (`java.util` for `java.util.Map`).
    pub fn package(&self) -> &str {
        self.qualified_name
            .rsplit_once('.')
            .map(|(p, _)| p)
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub type_text: String,
    pub modifiers: Vec<String>,
    pub annotations: Vec<String>,
    pub is_static: bool,
    pub initializer: Option<String>,
    /// Whole declaration statement; shared by `int a, b;` declarators.
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub type_text: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodModel {
    pub name: String,
    pub annotations: Vec<String>,
    pub modifiers: Vec<String>,
    pub type_parameters: Option<String>,
    /// Empty for constructors.
    pub return_type: String,
    pub parameters: Vec<Parameter>,
    pub throws: Vec<String>,
    /// Exact source slice of the body including braces; empty for abstract
    /// declarations.
    pub body_text: String,
    /// Annotations through closing brace.
    pub span: Span,
    /// Offset just past the parameter list's closing parenthesis.
    pub header_end: usize,
    pub body_start: Option<usize>,
    pub is_constructor: bool,
    /// Full declaration text (`span` sliced out of the owning source).
    pub source: String,
}

impl MethodModel {
    pub fn is_test(&self) -> bool {
        self.annotations.iter().any(|a| {
            let name = annotation_name(a);
            name == "Test" || name == "ParameterizedTest" || name == "RepeatedTest"
        })
    }

    pub fn has_annotation(&self, simple: &str) -> bool {
        self.annotations.iter().any(|a| annotation_name(a) == simple)
    }

    /// Setup/teardown lifecycle methods of JUnit 3, 4 and 5.
    pub fn is_lifecycle(&self) -> bool {
        const LIFECYCLE: [&str; 8] = [
            "Before",
            "After",
            "BeforeClass",
            "AfterClass",
            "BeforeEach",
            "AfterEach",
            "BeforeAll",
            "AfterAll",
        ];
        self.annotations
            .iter()
            .any(|a| LIFECYCLE.contains(&annotation_name(a)))
            || (self.annotations.is_empty() && matches!(self.name.as_str(), "setUp" | "tearDown"))
    }

    /// Header text from the first annotation to the end of the parameter list.
    pub fn header_text(&self) -> &str {
        &self.source[..self.header_end - self.span.start]
    }

    /// Text after the parameter list: throws clause and body.
    pub fn tail_text(&self) -> &str {
        &self.source[self.header_end - self.span.start..]
    }
}

/// Simple name of an annotation given its raw text (`@org.junit.Test(x)` -> `Test`).
pub fn annotation_name(raw: &str) -> &str {
    let t = raw.trim_start_matches('@');
    let t = t.split('(').next().unwrap_or(t).trim();
    t.rsplit('.').next().unwrap_or(t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerType {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Text,
    Package,
    Import,
    Field,
    Method,
    Opaque,
}

/// Structural model of one compilation unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassModel {
    pub package: String,
    pub package_span: Option<Span>,
    pub imports: Vec<ImportDecl>,
    pub import_spans: Vec<Span>,
    pub class_name: String,
    pub class_kind: String,
    /// `extends` clause target, if any.
    pub superclass: Option<String>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodModel>,
    pub inner_types: Vec<InnerType>,
    /// Initializer blocks and secondary top-level types.
    pub opaque_spans: Vec<Span>,
    pub body_open: usize,
    pub body_close: usize,
    pub source_text: String,
    pub line_index: LineIndex,
    pub(crate) tokens: Vec<Token>,
}

impl ClassModel {
    pub fn qualified_name(&self) -> String {
        if self.package.is_empty() {
            self.class_name.clone()
        } else {
            format!("{}.{}", self.package, self.class_name)
        }
    }

    pub fn method(&self, name: &str) -> Option<&MethodModel> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Innermost method whose span covers `line`.
    pub fn method_at_line(&self, line: u32) -> Option<&MethodModel> {
        self.methods
            .iter()
            .filter(|m| m.span.contains_line(line))
            .min_by_key(|m| m.span.end_line - m.span.start_line)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Tokens lying inside a byte range.
    pub fn tokens_in(&self, start: usize, end: usize) -> &[Token] {
        let lo = self.tokens.partition_point(|t| t.start < start);
        let hi = self.tokens.partition_point(|t| t.start < end);
        &self.tokens[lo..hi]
    }

    pub fn line_text(&self, line: u32) -> Option<&str> {
        self.line_index
            .span(line)
            .map(|(s, e)| &self.source_text[s..e])
    }

    /// Ordered, gap-filled partition of the source into declaration spans.
    pub fn segments(&self) -> Vec<(SegmentKind, usize, usize)> {
        let mut spans: Vec<(SegmentKind, usize, usize)> = Vec::new();
        if let Some(p) = self.package_span {
            spans.push((SegmentKind::Package, p.start, p.end));
        }
        spans.extend(self.import_spans.iter().map(|s| (SegmentKind::Import, s.start, s.end)));
        let mut last_field = None;
        for f in &self.fields {
            if last_field != Some(f.span) {
                spans.push((SegmentKind::Field, f.span.start, f.span.end));
                last_field = Some(f.span);
            }
        }
        spans.extend(self.methods.iter().map(|m| (SegmentKind::Method, m.span.start, m.span.end)));
        spans.extend(
            self.inner_types
                .iter()
                .map(|t| t.span)
                .chain(self.opaque_spans.iter().copied())
                .map(|s| (SegmentKind::Opaque, s.start, s.end)),
        );
        spans.sort_by_key(|s| s.1);
        let mut out = Vec::with_capacity(spans.len() * 2 + 1);
        let mut cursor = 0;
        for (kind, start, end) in spans {
            if start > cursor {
                out.push((SegmentKind::Text, cursor, start));
            }
            out.push((kind, start, end));
            cursor = end;
        }
        if cursor < self.source_text.len() {
            out.push((SegmentKind::Text, cursor, self.source_text.len()));
        }
        out
    }

    /// Concatenation of all segments; equals `source_text` byte for byte.
    pub fn reconstruct(&self) -> String {
        self.segments()
            .iter()
            .map(|&(_, s, e)| &self.source_text[s..e])
            .collect()
    }
}

/// Parses one Java compilation unit. Either the full model is returned or an
/// error naming the first offending line.
pub fn parse_test_class(source_text: &str) -> Result<ClassModel, ParseError> {
    let tokens = tokenize(source_text)?;
    let mut parser = Parser {
        src: source_text,
        toks: &tokens,
        pos: 0,
        lines: LineIndex::new(source_text),
    };
    let mut model = parser.compilation_unit()?;
    model.tokens = tokens;
    Ok(model)
}

/// Parses a standalone method declaration (as returned by a model) by
/// wrapping it in a synthetic class.
pub fn parse_method_snippet(text: &str) -> Result<Vec<MethodModel>, ParseError> {
    const PREFIX: &str = "class __Snippet {\n";
    let wrapped = format!("{PREFIX}{text}\n}}\n");
    let model = parse_test_class(&wrapped).map_err(|e| ParseError::new(e.line.saturating_sub(1).max(1), &e.message))?;
    Ok(model
        .methods
        .into_iter()
        .map(|mut m| {
            let shift = PREFIX.len();
            m.span.start -= shift;
            m.span.end -= shift;
            m.span.start_line -= 1;
            m.span.end_line -= 1;
            m.header_end -= shift;
            m.body_start = m.body_start.map(|b| b - shift);
            m
        })
        .collect())
}

struct Parser<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
    lines: LineIndex,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.text(self.src))
    }

    fn peek_at(&self, k: usize) -> Option<&'a str> {
        self.toks.get(self.pos + k).map(|t| t.text(self.src))
    }

    fn tok(&self) -> Option<Token> {
        self.toks.get(self.pos).copied()
    }

    fn error(&self, msg: &str) -> ParseError {
        let line = self
            .tok()
            .map(|t| t.line)
            .unwrap_or_else(|| self.lines.line_count());
        ParseError::new(line, msg)
    }

    fn expect(&mut self, text: &str) -> Result<Token, ParseError> {
        match self.tok() {
            Some(t) if t.text(self.src) == text => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.error(&format!(
                "expected `{text}`, found `{}`",
                t.text(self.src)
            ))),
            None => Err(self.error(&format!("expected `{text}`, found end of input"))),
        }
    }

    fn ident(&mut self) -> Result<Token, ParseError> {
        match self.tok() {
            Some(t) if t.kind == TokenKind::Ident => {
                self.pos += 1;
                Ok(t)
            }
            Some(t) => Err(self.error(&format!("expected identifier, found `{}`", t.text(self.src)))),
            None => Err(self.error("expected identifier, found end of input")),
        }
    }

    fn span(&self, first: usize, last: usize) -> Span {
        let a = self.toks[first];
        let b = self.toks[last];
        Span {
            start: a.start,
            end: b.end,
            start_line: a.line,
            end_line: self.lines.line_of(b.end.saturating_sub(1).max(b.start)),
        }
    }

    /// Skips a balanced group starting at the current opening token; returns
    /// the index of the closing token.
    fn skip_balanced(&mut self) -> Result<usize, ParseError> {
        let open_pos = self.pos;
        let mut stack: Vec<&str> = Vec::new();
        while let Some(t) = self.peek() {
            match t {
                "{" => stack.push("}"),
                "(" => stack.push(")"),
                "[" => stack.push("]"),
                "}" | ")" | "]" => match stack.pop() {
                    Some(expected) if expected == t => {}
                    _ => return Err(self.error(&format!("unbalanced `{t}`"))),
                },
                _ => {}
            }
            self.pos += 1;
            if stack.is_empty() {
                return Ok(self.pos - 1);
            }
        }
        self.pos = open_pos;
        Err(self.error("unclosed bracket"))
    }

    /// Skips `<...>` honoring nesting; the current token must be `<`.
    fn skip_angles(&mut self) -> Result<usize, ParseError> {
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            match t {
                "<" => depth += 1,
                ">" => depth -= 1,
                "(" | "[" | "{" => {
                    self.skip_balanced()?;
                    continue;
                }
                ";" => return Err(self.error("unterminated type arguments")),
                _ => {}
            }
            self.pos += 1;
            if depth == 0 {
                return Ok(self.pos - 1);
            }
        }
        Err(self.error("unterminated type arguments"))
    }

    fn qualified_name(&mut self) -> Result<String, ParseError> {
        let mut name = self.ident()?.text(self.src).to_string();
        while self.peek() == Some(".") && self.peek_at(1).is_some_and(|t| t != "*") {
            self.pos += 1;
            name.push('.');
            name.push_str(self.ident()?.text(self.src));
        }
        Ok(name)
    }

    fn annotation(&mut self) -> Result<String, ParseError> {
        let first = self.pos;
        self.expect("@")?;
        self.qualified_name()?;
        if self.peek() == Some("(") {
            self.skip_balanced()?;
        }
        let s = self.span(first, self.pos - 1);
        Ok(self.src[s.start..s.end].to_string())
    }

    fn is_annotation_start(&self) -> bool {
        self.peek() == Some("@") && self.peek_at(1) != Some("interface")
    }

    fn compilation_unit(&mut self) -> Result<ClassModel, ParseError> {
        let mut package = String::new();
        let mut package_span = None;
        let save = self.pos;
        while self.is_annotation_start() {
            self.annotation()?;
        }
        if self.peek() == Some("package") {
            let first = save;
            self.pos += 1;
            package = self.qualified_name()?;
            self.expect(";")?;
            package_span = Some(self.span(first, self.pos - 1));
        } else {
            self.pos = save;
        }

        let mut imports = Vec::new();
        let mut import_spans = Vec::new();
        loop {
            match self.peek() {
                Some("import") => {
                    let first = self.pos;
                    self.pos += 1;
                    let is_static = self.peek() == Some("static");
                    if is_static {
                        self.pos += 1;
                    }
                    let mut name = self.qualified_name()?;
                    if self.peek() == Some(".") && self.peek_at(1) == Some("*") {
                        self.pos += 2;
                        name.push_str(".*");
                    }
                    self.expect(";")?;
                    let span = self.span(first, self.pos - 1);
                    let mut decl = ImportDecl::new(&name, is_static);
                    decl.raw = self.src[span.start..span.end].to_string();
                    imports.push(decl);
                    import_spans.push(span);
                }
                Some(";") => self.pos += 1,
                _ => break,
            }
        }

        let mut main: Option<ClassModel> = None;
        let mut extra_types = Vec::new();
        while self.pos < self.toks.len() {
            if self.peek() == Some(";") {
                self.pos += 1;
                continue;
            }
            let first = self.pos;
            while self.is_annotation_start() {
                self.annotation()?;
            }
            while self.peek().is_some_and(|t| MODIFIERS.contains(&t) || t == "non") {
                self.skip_modifier();
            }
            let kind = self.type_keyword().ok_or_else(|| self.error("expected a type declaration"))?;
            if main.is_none() {
                main = Some(self.type_declaration(kind, package.clone(), package_span, &imports, &import_spans)?);
            } else {
                let name = self.ident()?.text(self.src).to_string();
                self.skip_to_body()?;
                let close = self.skip_balanced()?;
                extra_types.push(InnerType {
                    name,
                    span: self.span(first, close),
                });
            }
        }
        let mut model = main.ok_or_else(|| self.error("no type declaration found"))?;
        model.opaque_spans.extend(extra_types.into_iter().map(|t| t.span));
        Ok(model)
    }

    fn skip_modifier(&mut self) {
        // `non-sealed` lexes as three tokens
        if self.peek() == Some("non") && self.peek_at(1) == Some("-") && self.peek_at(2) == Some("sealed") {
            self.pos += 3;
        } else {
            self.pos += 1;
        }
    }

    fn type_keyword(&mut self) -> Option<String> {
        match self.peek()? {
            "@" if self.peek_at(1) == Some("interface") => {
                self.pos += 2;
                Some("@interface".into())
            }
            // `record` is contextual: only a type when followed by a name
            "record" if self.toks.get(self.pos + 1).is_some_and(|t| t.kind == TokenKind::Ident) => {
                self.pos += 1;
                Some("record".into())
            }
            t if TYPE_KEYWORDS.contains(&t) && t != "record" => {
                self.pos += 1;
                Some(t.to_string())
            }
            _ => None,
        }
    }

    /// Advances to the `{` that opens a type body, recording nothing.
    fn skip_to_body(&mut self) -> Result<(), ParseError> {
        while let Some(t) = self.peek() {
            match t {
                "{" => return Ok(()),
                "(" => {
                    self.skip_balanced()?;
                }
                "<" => {
                    self.skip_angles()?;
                }
                ";" | "}" => return Err(self.error("expected type body")),
                _ => self.pos += 1,
            }
        }
        Err(self.error("expected type body, found end of input"))
    }

    fn type_declaration(
        &mut self,
        kind: String,
        package: String,
        package_span: Option<Span>,
        imports: &[ImportDecl],
        import_spans: &[Span],
    ) -> Result<ClassModel, ParseError> {
        let class_name = self.ident()?.text(self.src).to_string();
        let mut superclass = None;
        while let Some(t) = self.peek() {
            match t {
                "{" => break,
                "(" => {
                    self.skip_balanced()?;
                }
                "<" => {
                    self.skip_angles()?;
                }
                "extends" if kind == "class" => {
                    self.pos += 1;
                    let start = self.pos;
                    self.type_ref()?;
                    let span = self.span(start, self.pos - 1);
                    superclass = Some(compact(&self.src[span.start..span.end]));
                }
                ";" | "}" => return Err(self.error("expected class body")),
                _ => self.pos += 1,
            }
        }
        let open = self.expect("{")?;
        let mut model = ClassModel {
            package,
            package_span,
            imports: imports.to_vec(),
            import_spans: import_spans.to_vec(),
            class_name,
            class_kind: kind.clone(),
            superclass,
            fields: Vec::new(),
            methods: Vec::new(),
            inner_types: Vec::new(),
            opaque_spans: Vec::new(),
            body_open: open.start,
            body_close: 0,
            source_text: self.src.to_string(),
            line_index: self.lines.clone(),
            tokens: Vec::new(),
        };
        if kind == "enum" {
            self.enum_constants(&mut model)?;
        }
        loop {
            match self.peek() {
                None => return Err(self.error("unclosed class body")),
                Some("}") => {
                    model.body_close = self.tok().map(|t| t.start).unwrap_or(0);
                    self.pos += 1;
                    break;
                }
                Some(_) => self.member(&mut model)?,
            }
        }
        Ok(model)
    }

    fn enum_constants(&mut self, model: &mut ClassModel) -> Result<(), ParseError> {
        let first = self.pos;
        while let Some(t) = self.peek() {
            match t {
                ";" => {
                    self.pos += 1;
                    break;
                }
                "}" => break,
                "(" | "{" => {
                    self.skip_balanced()?;
                }
                _ => self.pos += 1,
            }
        }
        if self.pos > first {
            model.opaque_spans.push(self.span(first, self.pos - 1));
        }
        Ok(())
    }

    fn member(&mut self, model: &mut ClassModel) -> Result<(), ParseError> {
        if self.peek() == Some(";") {
            self.pos += 1;
            return Ok(());
        }
        let first = self.pos;
        if self.peek() == Some("{") || (self.peek() == Some("static") && self.peek_at(1) == Some("{")) {
            if self.peek() == Some("static") {
                self.pos += 1;
            }
            let close = self.skip_balanced()?;
            model.opaque_spans.push(self.span(first, close));
            return Ok(());
        }
        let mut annotations = Vec::new();
        let mut modifiers = Vec::new();
        loop {
            if self.is_annotation_start() {
                annotations.push(self.annotation()?);
            } else if self.peek().is_some_and(|t| MODIFIERS.contains(&t))
                && !(self.peek() == Some("default") && self.peek_at(1) == Some(":"))
            {
                modifiers.push(self.peek().unwrap_or_default().to_string());
                self.pos += 1;
            } else if self.peek() == Some("non") && self.peek_at(1) == Some("-") {
                self.skip_modifier();
                modifiers.push("non-sealed".into());
            } else {
                break;
            }
        }
        if self.type_keyword().is_some() {
            let name = self.ident()?.text(self.src).to_string();
            self.skip_to_body()?;
            let close = self.skip_balanced()?;
            model.inner_types.push(InnerType {
                name,
                span: self.span(first, close),
            });
            return Ok(());
        }
        let mut type_parameters = None;
        if self.peek() == Some("<") {
            let s = self.pos;
            let e = self.skip_angles()?;
            let sp = self.span(s, e);
            type_parameters = Some(self.src[sp.start..sp.end].to_string());
        }
        let type_start = self.pos;
        // compact record constructor: `Name {`
        if model.class_kind == "record" && self.peek() == Some(model.class_name.as_str()) && self.peek_at(1) == Some("{") {
            self.pos += 1;
            let close = self.skip_balanced()?;
            model.opaque_spans.push(self.span(first, close));
            return Ok(());
        }
        self.type_ref()?;
        let type_span = self.span(type_start, self.pos - 1);
        let type_text = compact(&self.src[type_span.start..type_span.end]);

        if self.peek() == Some("(") {
            if !is_simple_ident(&type_text) {
                return Err(self.error("expected member name"));
            }
            let m = self.method_rest(first, annotations, modifiers, type_parameters, String::new(), type_text, true)?;
            model.methods.push(m);
            return Ok(());
        }
        let name = self.ident()?.text(self.src).to_string();
        if self.peek() == Some("(") {
            let m = self.method_rest(first, annotations, modifiers, type_parameters, type_text, name, false)?;
            model.methods.push(m);
            return Ok(());
        }
        self.field_rest(model, first, annotations, modifiers, type_text, name)
    }

    /// Parses a type reference: qualified name with type arguments and array
    /// dimensions, or a primitive.
    fn type_ref(&mut self) -> Result<(), ParseError> {
        while self.is_annotation_start() {
            self.annotation()?;
        }
        self.ident()?;
        loop {
            if self.peek() == Some("<") {
                self.skip_angles()?;
            }
            if self.peek() == Some(".") && self.toks.get(self.pos + 1).is_some_and(|t| t.kind == TokenKind::Ident) {
                self.pos += 2;
                continue;
            }
            break;
        }
        while self.peek() == Some("[") && self.peek_at(1) == Some("]") {
            self.pos += 2;
        }
        if self.peek() == Some("...") {
            self.pos += 1;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn method_rest(
        &mut self,
        first: usize,
        annotations: Vec<String>,
        modifiers: Vec<String>,
        type_parameters: Option<String>,
        return_type: String,
        name: String,
        is_constructor: bool,
    ) -> Result<MethodModel, ParseError> {
        let params_open = self.pos;
        let params_close = self.skip_balanced()?;
        let parameters = self.parameters(params_open + 1, params_close)?;
        let header_end = self.toks[params_close].end;
        let mut return_type = return_type;
        while self.peek() == Some("[") && self.peek_at(1) == Some("]") {
            self.pos += 2;
            return_type.push_str("[]");
        }
        let mut throws = Vec::new();
        if self.peek() == Some("throws") {
            self.pos += 1;
            loop {
                let s = self.pos;
                self.type_ref()?;
                let sp = self.span(s, self.pos - 1);
                throws.push(compact(&self.src[sp.start..sp.end]));
                if self.peek() == Some(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        let (last, body_start, body_text) = match self.peek() {
            Some("{") => {
                let open = self.tok().map(|t| t.start);
                let close = self.skip_balanced()?;
                let end = self.toks[close].end;
                let start = open.unwrap_or(end);
                (close, Some(start), self.src[start..end].to_string())
            }
            Some(";") => {
                self.pos += 1;
                (self.pos - 1, None, String::new())
            }
            Some("default") => {
                while self.peek().is_some_and(|t| t != ";") {
                    if matches!(self.peek(), Some("(" | "{")) {
                        self.skip_balanced()?;
                    } else {
                        self.pos += 1;
                    }
                }
                self.expect(";")?;
                (self.pos - 1, None, String::new())
            }
            _ => return Err(self.error("expected method body")),
        };
        let span = self.span(first, last);
        Ok(MethodModel {
            name,
            annotations,
            modifiers,
            type_parameters,
            return_type,
            parameters,
            throws,
            body_text,
            span,
            header_end,
            body_start,
            is_constructor,
            source: self.src[span.start..span.end].to_string(),
        })
    }

    fn parameters(&self, from: usize, to: usize) -> Result<Vec<Parameter>, ParseError> {
        let mut params = Vec::new();
        let mut depth = 0i32;
        let mut start = from;
        for i in from..=to {
            let t = self.toks[i].text(self.src);
            let at_end = i == to;
            match t {
                "<" | "(" | "[" => depth += 1,
                ">" | "]" => depth -= 1,
                ")" if !at_end => depth -= 1,
                _ => {}
            }
            if (t == "," && depth == 0) || at_end {
                if i > start {
                    params.push(self.parameter(start, i)?);
                }
                start = i + 1;
            }
        }
        Ok(params)
    }

    fn parameter(&self, from: usize, to: usize) -> Result<Parameter, ParseError> {
        let toks = &self.toks[from..to];
        let mut i = 0;
        while i < toks.len() {
            let t = toks[i].text(self.src);
            if t == "final" {
                i += 1;
            } else if t == "@" {
                // annotation: name then optional argument list
                i += 2;
                while i + 1 < toks.len() && toks[i].text(self.src) == "." {
                    i += 2;
                }
                if i < toks.len() && toks[i].text(self.src) == "(" {
                    let mut d = 0;
                    while i < toks.len() {
                        match toks[i].text(self.src) {
                            "(" => d += 1,
                            ")" => d -= 1,
                            _ => {}
                        }
                        i += 1;
                        if d == 0 {
                            break;
                        }
                    }
                }
            } else {
                break;
            }
        }
        let rest = &toks[i.min(toks.len())..];
        let mut dims = String::new();
        let mut end = rest.len();
        while end >= 2 && rest[end - 1].text(self.src) == "]" && rest[end - 2].text(self.src) == "[" {
            dims.push_str("[]");
            end -= 2;
        }
        if end < 2 || rest[end - 1].kind != TokenKind::Ident {
            let line = toks.first().map(|t| t.line).unwrap_or(1);
            return Err(ParseError::new(line, "malformed parameter"));
        }
        let name = rest[end - 1].text(self.src).to_string();
        let ty = &self.src[rest[0].start..rest[end - 2].end];
        Ok(Parameter {
            type_text: compact(ty) + &dims,
            name,
        })
    }

    fn field_rest(
        &mut self,
        model: &mut ClassModel,
        first: usize,
        annotations: Vec<String>,
        modifiers: Vec<String>,
        type_text: String,
        first_name: String,
    ) -> Result<(), ParseError> {
        let mut declarators = Vec::new();
        let mut name = first_name;
        loop {
            let mut ty = type_text.clone();
            while self.peek() == Some("[") && self.peek_at(1) == Some("]") {
                self.pos += 2;
                ty.push_str("[]");
            }
            let mut initializer = None;
            if self.peek() == Some("=") {
                self.pos += 1;
                let s = self.pos;
                while let Some(t) = self.peek() {
                    match t {
                        "," | ";" => break,
                        "(" | "[" | "{" => {
                            self.skip_balanced()?;
                        }
                        "}" | ")" | "]" => return Err(self.error(&format!("unbalanced `{t}`"))),
                        _ => self.pos += 1,
                    }
                }
                if self.pos == s {
                    return Err(self.error("expected initializer"));
                }
                let sp = self.span(s, self.pos - 1);
                initializer = Some(self.src[sp.start..sp.end].to_string());
            }
            declarators.push((name, ty, initializer));
            match self.peek() {
                Some(",") => {
                    self.pos += 1;
                    name = self.ident()?.text(self.src).to_string();
                }
                Some(";") => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.error("expected `;` after field declaration")),
            }
        }
        let span = self.span(first, self.pos - 1);
        let is_static = modifiers.iter().any(|m| m == "static");
        for (name, ty, initializer) in declarators {
            model.fields.push(FieldDecl {
                name,
                type_text: ty,
                modifiers: modifiers.clone(),
                annotations: annotations.clone(),
                is_static,
                initializer,
                span,
            });
        }
        Ok(())
    }
}

fn is_simple_ident(s: &str) -> bool {
    crate::model::is_java_identifier(s)
}

/// Collapses whitespace runs; drops spaces adjacent to punctuation that never
/// needs them (`Map < K , V >` -> `Map<K, V>`).
pub(crate) fn compact(text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let joined = words.join(" ");
    let mut out = String::with_capacity(joined.len());
    let chars: Vec<char> = joined.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c == ' ' {
            let prev = if i > 0 { chars[i - 1] } else { ' ' };
            let next = chars.get(i + 1).copied().unwrap_or(' ');
            if matches!(prev, '<' | '(' | '[' | '.' | '@')
                || matches!(next, '<' | '>' | ')' | '[' | ']' | ',' | '.' | '(')
            {
                continue;
            }
        }
        out.push(c);
        if c == ',' && chars.get(i + 1).is_some_and(|n| *n != ' ') {
            out.push(' ');
        }
    }
    out
}
