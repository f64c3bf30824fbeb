//! Subject programs: parsing, mutable-site discovery and stdin rewriting.

use std::cell::RefCell;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::{Node, Parser, Tree};

use crate::mutation::MutationOperator;
use crate::pyrepr;

/// Upper bound on physical lines; the codec has exactly this many line tokens.
pub const MAX_PROGRAM_LINES: usize = 200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("source is empty")]
    Empty,
    #[error("syntax error near line {line}")]
    Syntax { line: usize },
    #[error("program has {lines} lines, the limit is {MAX_PROGRAM_LINES}")]
    TooManyLines { lines: usize },
    #[error("program reads input {reads} times but only {provided} input lines were given")]
    InsufficientInput { reads: usize, provided: usize },
}

/// Where a program came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Seed,
    Mutant,
    Singleline,
    Tutorial,
}

/// Half-open byte range into a program's source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    fn of(node: &Node) -> Self {
        Span::new(node.start_byte(), node.end_byte())
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// A parsed subject program.
#[derive(Clone)]
pub struct Program {
    source: String,
    id: String,
    problem_id: String,
    line_count: usize,
    origin: Origin,
    tree: Tree,
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Program")
            .field("id", &self.id)
            .field("problem_id", &self.problem_id)
            .field("origin", &self.origin)
            .field("line_count", &self.line_count)
            .field("source", &self.source)
            .finish()
    }
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
            && self.id == other.id
            && self.problem_id == other.problem_id
            && self.origin == other.origin
    }
}

thread_local! {
    static PARSER: RefCell<Parser> = RefCell::new({
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("bundled python grammar is ABI compatible");
        parser
    });
}

fn parse_tree(source: &str) -> Tree {
    PARSER.with(|p| p.borrow_mut().parse(source, None)).expect("parser has a language and no timeout")
}

/// Number of physical lines; a trailing newline does not open a new line.
pub fn physical_line_count(source: &str) -> usize {
    if source.is_empty() {
        return 0;
    }
    let newlines = source.bytes().filter(|&b| b == b'\n').count();
    if source.ends_with('\n') {
        newlines
    } else {
        newlines + 1
    }
}

fn first_error_line(node: Node) -> Option<usize> {
    if node.is_error() || node.is_missing() {
        return Some(node.start_position().row + 1);
    }
    if !node.has_error() {
        return None;
    }
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    children.into_iter().find_map(first_error_line).or(Some(node.start_position().row + 1))
}

impl Program {
    /// Parse `source` as a seed program with empty identity.
    pub fn parse(source: impl Into<String>) -> Result<Program, ProgramError> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(ProgramError::Empty);
        }
        let line_count = physical_line_count(&source);
        if line_count > MAX_PROGRAM_LINES {
            return Err(ProgramError::TooManyLines { lines: line_count });
        }
        let tree = parse_tree(&source);
        if let Some(line) = first_error_line(tree.root_node()) {
            return Err(ProgramError::Syntax { line });
        }
        Ok(Program { source, id: String::new(), problem_id: String::new(), line_count, origin: Origin::Seed, tree })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_problem_id(mut self, problem_id: impl Into<String>) -> Self {
        self.problem_id = problem_id.into();
        self
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    /// Parse new source text that keeps this program's identity.
    pub fn reparse(&self, source: impl Into<String>) -> Result<Program, ProgramError> {
        Ok(Program::parse(source)?
            .with_id(self.id.clone())
            .with_problem_id(self.problem_id.clone())
            .with_origin(self.origin))
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn problem_id(&self) -> &str {
        &self.problem_id
    }

    pub fn line_count(&self) -> usize {
        self.line_count
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.source[span.start..span.end]
    }

    /// All mutable sites, ordered by span start then end.
    pub fn find_candidates(&self) -> Vec<CandidateSite> {
        let mut sites = Vec::new();
        collect_sites(self.tree.root_node(), &self.source, &mut sites);
        sites.sort_by_key(|s| (s.span.start, s.span.end, s.kind));
        sites
    }

    /// Replace every stdin read, in textual order, with a string literal
    /// holding the matching input line.
    pub fn rewrite_stdin(&self, input: &TestInput) -> Result<Program, ProgramError> {
        let reads = self.stdin_reads();
        if reads.len() > input.lines.len() {
            return Err(ProgramError::InsufficientInput { reads: reads.len(), provided: input.lines.len() });
        }
        if reads.is_empty() {
            return Ok(self.clone());
        }
        let mut out = String::with_capacity(self.source.len());
        let mut cursor = 0;
        for (read, line) in reads.iter().zip(&input.lines) {
            out.push_str(&self.source[cursor..read.span.start]);
            let value = match read.kind {
                ReadKind::Input => line.clone(),
                ReadKind::ReadLine => format!("{line}\n"),
            };
            out.push_str(&pyrepr::str_literal(&value));
            cursor = read.span.end;
        }
        out.push_str(&self.source[cursor..]);
        self.reparse(out)
    }

    /// Number of stdin read expressions.
    pub fn count_stdin_reads(&self) -> usize {
        self.stdin_reads().len()
    }

    fn stdin_reads(&self) -> Vec<StdinRead> {
        let mut reads = Vec::new();
        collect_reads(self.tree.root_node(), &self.source, &mut reads);
        reads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReadKind {
    /// `input()`; the newline is stripped.
    Input,
    /// `sys.stdin.readline()`; the newline is kept.
    ReadLine,
}

struct StdinRead {
    span: Span,
    kind: ReadKind,
}

fn collect_reads(node: Node, src: &str, out: &mut Vec<StdinRead>) {
    if node.kind() == "call" {
        if let Some(func) = node.child_by_field_name("function") {
            let text: String = src[func.start_byte()..func.end_byte()].chars().filter(|c| !c.is_whitespace()).collect();
            let kind = match text.as_str() {
                "input" => Some(ReadKind::Input),
                "sys.stdin.readline" | "stdin.readline" => Some(ReadKind::ReadLine),
                _ => None,
            };
            if let Some(kind) = kind {
                // the whole call is replaced, so reads nested in its arguments vanish with it
                out.push(StdinRead { span: Span::of(&node), kind });
                return;
            }
        }
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_reads(child, src, out);
    }
}

/// Stdin lines fed to a program.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestInput {
    pub lines: Vec<String>,
}

impl TestInput {
    pub fn new<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TestInput { lines: lines.into_iter().map(Into::into).collect() }
    }

    /// One stdin line per text line.
    pub fn from_text(text: &str) -> Self {
        TestInput::new(text.lines())
    }

    pub fn to_stdin(&self) -> String {
        let mut s = self.lines.join("\n");
        if !self.lines.is_empty() {
            s.push('\n');
        }
        s
    }
}

/// Categories of syntax nodes that admit a mutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    NumericLiteral,
    StringLiteral,
    UnaryArithmetic,
    BinaryArithmetic,
    AugmentedAssignment,
    BreakContinue,
    Negation,
    LogicalConnector,
    Relational,
    Slice,
    Loop,
}

/// One mutable node.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSite {
    pub kind: NodeKind,
    pub span: Span,
    pub ops: Vec<MutationOperator>,
    pub(crate) detail: SiteDetail,
}

impl CandidateSite {
    pub fn admits(&self, op: MutationOperator) -> bool {
        self.ops.contains(&op)
    }

    /// Loop sites enclose other sites; slices enclose their arguments.
    pub fn is_enclosing(&self) -> bool {
        matches!(self.kind, NodeKind::Loop | NodeKind::Slice)
    }
}

/// Extra positions an operator needs beyond the site span.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SiteDetail {
    Token,
    Number {
        value: NumericValue,
    },
    Str {
        content: Span,
        trailing_escape: Option<Span>,
    },
    /// Deletion extends to the operand so `not x` becomes `x`.
    Negation {
        delete: Span,
    },
    Slice {
        parts: Vec<SlicePart>,
    },
    Loop(LoopShape),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NumericValue {
    Int(i64),
    Float(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceArg {
    Start,
    Stop,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SlicePart {
    pub arg: SliceArg,
    /// Bytes removed when this argument is deleted.
    pub delete: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LoopShape {
    pub is_for: bool,
    /// Start of the first and end of the last statement in the body.
    pub body: Span,
    /// Body sits on the header line (`for x in y: a()`).
    pub inline: bool,
    pub indent: String,
    pub iterable: Option<Span>,
    /// Bare tuple iterable (`for x in 1, 2:`) that needs its own parentheses.
    pub iterable_is_tuple: bool,
}

const AOR_POOL: [&str; 7] = ["+", "-", "*", "/", "//", "%", "**"];
const ASR_POOL: [&str; 7] = ["+=", "-=", "*=", "/=", "//=", "%=", "**="];
const ROR_POOL: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];

pub(crate) fn aor_pool() -> &'static [&'static str] {
    &AOR_POOL
}

pub(crate) fn asr_pool() -> &'static [&'static str] {
    &ASR_POOL
}

pub(crate) fn ror_pool() -> &'static [&'static str] {
    &ROR_POOL
}

fn parse_numeric(text: &str) -> Option<NumericValue> {
    let lower = text.to_ascii_lowercase();
    if lower.ends_with('j') || lower.starts_with("0x") || lower.starts_with("0o") || lower.starts_with("0b") {
        return None;
    }
    let cleaned: String = text.chars().filter(|&c| c != '_').collect();
    if cleaned.bytes().all(|b| b.is_ascii_digit()) {
        return cleaned.parse::<i64>().ok().map(NumericValue::Int);
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite()).map(NumericValue::Float)
}

fn token_site(kind: NodeKind, node: &Node, op: MutationOperator) -> CandidateSite {
    CandidateSite { kind, span: Span::of(node), ops: vec![op], detail: SiteDetail::Token }
}

fn in_loop_body(node: Node) -> bool {
    let mut child = node;
    while let Some(parent) = child.parent() {
        match parent.kind() {
            "for_statement" | "while_statement" => {
                return parent.child_by_field_name("body").map(|b| b.id() == child.id()).unwrap_or(false)
                    || in_loop_body(parent);
            }
            "function_definition" | "class_definition" | "lambda" => return false,
            _ => {}
        }
        child = parent;
    }
    false
}

fn string_site(node: &Node, src: &str) -> Option<CandidateSite> {
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    let start = children.iter().find(|c| c.kind() == "string_start")?;
    let end = children.iter().find(|c| c.kind() == "string_end")?;
    let prefix = &src[start.start_byte()..start.end_byte()];
    if prefix.to_ascii_lowercase().contains('f') || children.iter().any(|c| c.kind() == "interpolation") {
        return None;
    }
    let content = Span::new(start.end_byte(), end.start_byte());
    let trailing_escape = children
        .iter()
        .filter(|c| c.kind() == "string_content")
        .flat_map(|c| {
            let mut cc = c.walk();
            c.children(&mut cc).collect::<Vec<_>>()
        })
        .chain(children.iter().copied())
        .filter(|c| c.kind() == "escape_sequence" && c.end_byte() == content.end)
        .map(|c| Span::of(&c))
        .next();
    Some(CandidateSite {
        kind: NodeKind::StringLiteral,
        span: Span::of(node),
        ops: vec![MutationOperator::Crp],
        detail: SiteDetail::Str { content, trailing_escape },
    })
}

fn slice_site(node: &Node) -> Option<CandidateSite> {
    let mut cursor = node.walk();
    let children: Vec<Node> = node.children(&mut cursor).collect();
    let colons: Vec<&Node> = children.iter().filter(|c| c.kind() == ":").collect();
    let mut parts = Vec::new();
    for child in children.iter().filter(|c| c.is_named() && c.kind() != "comment") {
        let before = colons.iter().filter(|c| c.end_byte() <= child.start_byte()).count();
        let arg = match before {
            0 => SliceArg::Start,
            1 => SliceArg::Stop,
            _ => SliceArg::Step,
        };
        let delete = if arg == SliceArg::Step {
            // drop the step's colon too: `a[1:5:2]` -> `a[1:5]`
            Span::new(colons[1].start_byte(), child.end_byte())
        } else {
            Span::of(child)
        };
        parts.push(SlicePart { arg, delete });
    }
    if parts.is_empty() {
        return None;
    }
    Some(CandidateSite {
        kind: NodeKind::Slice,
        span: Span::of(node),
        ops: vec![MutationOperator::Sir],
        detail: SiteDetail::Slice { parts },
    })
}

fn loop_site(node: &Node, src: &str) -> Option<CandidateSite> {
    let is_for = node.kind() == "for_statement";
    let body = node.child_by_field_name("body")?;
    let mut cursor = body.walk();
    let stmts: Vec<Node> = body.named_children(&mut cursor).filter(|c| c.kind() != "comment").collect();
    let first = stmts.first()?;
    let last = stmts.last()?;
    let inline = first.start_position().row == node.start_position().row;
    let line_start = src[..first.start_byte()].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let indent = src[line_start..first.start_byte()].to_string();
    let right = if is_for { node.child_by_field_name("right") } else { None };
    let iterable = right.map(|r| Span::of(&r));
    let iterable_is_tuple = right.map(|r| r.kind() == "expression_list").unwrap_or(false);
    let ops = if is_for {
        vec![MutationOperator::Oil, MutationOperator::Ril, MutationOperator::Zil]
    } else {
        vec![MutationOperator::Oil, MutationOperator::Zil]
    };
    Some(CandidateSite {
        kind: NodeKind::Loop,
        span: Span::of(node),
        ops,
        detail: SiteDetail::Loop(LoopShape {
            is_for,
            body: Span::new(first.start_byte(), last.end_byte()),
            inline,
            indent: if inline { String::new() } else { indent },
            iterable,
            iterable_is_tuple,
        }),
    })
}

fn collect_sites(node: Node, src: &str, out: &mut Vec<CandidateSite>) {
    use MutationOperator as Op;
    match node.kind() {
        "integer" | "float" => {
            if let Some(value) = parse_numeric(&src[node.start_byte()..node.end_byte()]) {
                out.push(CandidateSite {
                    kind: NodeKind::NumericLiteral,
                    span: Span::of(&node),
                    ops: vec![Op::Crp],
                    detail: SiteDetail::Number { value },
                });
            }
        }
        "string" => {
            if let Some(site) = string_site(&node, src) {
                out.push(site);
            }
        }
        "unary_operator" => {
            if let Some(op) = node.child_by_field_name("operator") {
                if matches!(op.kind(), "+" | "-") {
                    out.push(token_site(NodeKind::UnaryArithmetic, &op, Op::Aod));
                }
            }
        }
        "binary_operator" => {
            if let Some(op) = node.child_by_field_name("operator") {
                if AOR_POOL.contains(&op.kind()) {
                    out.push(token_site(NodeKind::BinaryArithmetic, &op, Op::Aor));
                }
            }
        }
        "augmented_assignment" => {
            if let Some(op) = node.child_by_field_name("operator") {
                if ASR_POOL.contains(&op.kind()) {
                    out.push(token_site(NodeKind::AugmentedAssignment, &op, Op::Asr));
                }
            }
        }
        "break_statement" | "continue_statement" => {
            if in_loop_body(node) {
                out.push(token_site(NodeKind::BreakContinue, &node, Op::Bcr));
            }
        }
        "not_operator" => {
            let mut cursor = node.walk();
            let kw = node.children(&mut cursor).find(|c| c.kind() == "not");
            if let (Some(kw), Some(arg)) = (kw, node.child_by_field_name("argument")) {
                out.push(CandidateSite {
                    kind: NodeKind::Negation,
                    span: Span::of(&kw),
                    ops: vec![Op::Cod],
                    detail: SiteDetail::Negation { delete: Span::new(kw.start_byte(), arg.start_byte()) },
                });
            }
        }
        "comparison_operator" => {
            let mut cursor = node.walk();
            for child in node.children(&mut cursor) {
                if ROR_POOL.contains(&child.kind()) {
                    out.push(token_site(NodeKind::Relational, &child, Op::Ror));
                } else if child.kind() == "not in" {
                    out.push(token_site(NodeKind::Negation, &child, Op::Cod));
                }
            }
        }
        "boolean_operator" => {
            if let Some(op) = node.child_by_field_name("operator") {
                if matches!(op.kind(), "and" | "or") {
                    out.push(token_site(NodeKind::LogicalConnector, &op, Op::Lcr));
                }
            }
        }
        "slice" => {
            if let Some(site) = slice_site(&node) {
                out.push(site);
            }
        }
        "for_statement" | "while_statement" => {
            if let Some(site) = loop_site(&node, src) {
                out.push(site);
            }
        }
        _ => {}
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_sites(child, src, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use MutationOperator as Op;

    fn kinds(src: &str) -> Vec<(NodeKind, String, Vec<Op>)> {
        let p = Program::parse(src).unwrap();
        p.find_candidates().into_iter().map(|s| (s.kind, p.slice(s.span).to_string(), s.ops)).collect()
    }

    #[test]
    fn parses_single_line() {
        let p = Program::parse("x = 1\n").unwrap();
        assert_eq!(p.line_count(), 1);
        assert_eq!(p.source(), "x = 1\n");
    }

    #[test]
    fn rejects_malformed_assignment() {
        assert!(matches!(Program::parse("x = \n"), Err(ProgramError::Syntax { line: 1 })));
    }

    #[test]
    fn rejects_empty_source() {
        assert_eq!(Program::parse("").unwrap_err(), ProgramError::Empty);
    }

    #[test]
    fn enforces_line_budget() {
        let ok: String = (0..200).map(|i| format!("x{i} = {i}\n")).collect();
        assert_eq!(Program::parse(ok).unwrap().line_count(), 200);
        let long: String = (0..201).map(|i| format!("x{i} = {i}\n")).collect();
        assert_eq!(Program::parse(long).unwrap_err(), ProgramError::TooManyLines { lines: 201 });
    }

    #[test]
    fn counts_physical_lines() {
        assert_eq!(physical_line_count("a\nb"), 2);
        assert_eq!(physical_line_count("a\nb\n"), 2);
        assert_eq!(physical_line_count("a\n\n"), 2);
    }

    #[test]
    fn candidates_for_binary_expression() {
        let got = kinds("x = 1 + 2");
        assert_eq!(
            got,
            vec![
                (NodeKind::NumericLiteral, "1".into(), vec![Op::Crp]),
                (NodeKind::BinaryArithmetic, "+".into(), vec![Op::Aor]),
                (NodeKind::NumericLiteral, "2".into(), vec![Op::Crp]),
            ]
        );
    }

    #[test]
    fn no_candidates_in_pass() {
        assert!(kinds("pass").is_empty());
    }

    #[test]
    fn candidates_for_condition() {
        let got = kinds("if a <= b and not c:\n    pass");
        assert_eq!(
            got,
            vec![
                (NodeKind::Relational, "<=".into(), vec![Op::Ror]),
                (NodeKind::LogicalConnector, "and".into(), vec![Op::Lcr]),
                (NodeKind::Negation, "not".into(), vec![Op::Cod]),
            ]
        );
    }

    #[test]
    fn membership_negation_and_identity() {
        let got = kinds("a not in b\nc in d\nx is not None");
        assert_eq!(got, vec![(NodeKind::Negation, "not in".into(), vec![Op::Cod])]);
    }

    #[test]
    fn break_outside_loop_is_not_a_site() {
        let got = kinds("for i in a:\n    def f():\n        return 1\n    break\nelse:\n    pass");
        let bcr: Vec<_> = got.iter().filter(|k| k.0 == NodeKind::BreakContinue).collect();
        assert_eq!(bcr.len(), 1);
        let got = kinds("while x:\n    pass\nelse:\n    y = 1");
        assert!(got.iter().all(|k| k.0 != NodeKind::BreakContinue));
    }

    #[test]
    fn loop_sites_enclose_inner_sites() {
        let p = Program::parse("for i in range(3):\n    s += i\nwhile s > 0:\n    s -= 1\n").unwrap();
        let sites = p.find_candidates();
        let loops: Vec<_> = sites.iter().filter(|s| s.kind == NodeKind::Loop).collect();
        assert_eq!(loops.len(), 2);
        assert_eq!(loops[0].ops, vec![Op::Oil, Op::Ril, Op::Zil]);
        assert_eq!(loops[1].ops, vec![Op::Oil, Op::Zil]);
        for (i, a) in sites.iter().enumerate() {
            for b in &sites[i + 1..] {
                if a.span.overlaps(&b.span) {
                    assert!(a.is_enclosing() || b.is_enclosing(), "{a:?} / {b:?}");
                }
            }
        }
    }

    #[test]
    fn skips_fstrings_and_exotic_numbers() {
        let got = kinds("s = f'{x}'\nn = 0x1f\nz = 2j\nt = 'ab'\nu = 1_000");
        assert_eq!(
            got,
            vec![
                (NodeKind::StringLiteral, "'ab'".into(), vec![Op::Crp]),
                (NodeKind::NumericLiteral, "1_000".into(), vec![Op::Crp]),
            ]
        );
    }

    #[test]
    fn slice_arguments() {
        let p = Program::parse("a[1:5:2]").unwrap();
        let site = p.find_candidates().into_iter().find(|s| s.kind == NodeKind::Slice).unwrap();
        let SiteDetail::Slice { parts } = &site.detail else { panic!() };
        let got: Vec<_> = parts.iter().map(|pt| (pt.arg, p.slice(pt.delete).to_string())).collect();
        assert_eq!(
            got,
            vec![(SliceArg::Start, "1".into()), (SliceArg::Stop, "5".into()), (SliceArg::Step, ":2".into())]
        );
        let p = Program::parse("a[::]").unwrap();
        assert!(p.find_candidates().iter().all(|s| s.kind != NodeKind::Slice));
    }

    #[test]
    fn candidates_are_deterministic() {
        let p = Program::parse("for i in xs:\n    if i % 2 == 0 or not i:\n        t += -i\n").unwrap();
        assert_eq!(p.find_candidates(), p.find_candidates());
    }

    #[test]
    fn rewrites_input_inside_conversion() {
        let p = Program::parse("n = int(input())").unwrap();
        assert_eq!(p.rewrite_stdin(&TestInput::new(["5"])).unwrap().source(), "n = int('5')");
    }

    #[test]
    fn rewrites_in_order() {
        let p = Program::parse("a = input()\nb = input()").unwrap();
        let out = p.rewrite_stdin(&TestInput::new(["x", "y"])).unwrap();
        assert_eq!(out.source(), "a = 'x'\nb = 'y'");
        assert_eq!(out.count_stdin_reads(), 0);
    }

    #[test]
    fn rewrite_needs_enough_lines() {
        let p = Program::parse("a = input()").unwrap();
        assert_eq!(
            p.rewrite_stdin(&TestInput::default()).unwrap_err(),
            ProgramError::InsufficientInput { reads: 1, provided: 0 }
        );
    }

    #[test]
    fn readline_keeps_newline() {
        let p = Program::parse("import sys\nn = int(sys.stdin.readline())\ns = input().split()").unwrap();
        let out = p.rewrite_stdin(&TestInput::new(["3", "a \"b\" 'c'"])).unwrap();
        assert_eq!(out.source(), "import sys\nn = int('3\\n')\ns = 'a \"b\" \\'c\\''.split()");
    }

    #[test]
    fn reparse_is_idempotent() {
        let p = Program::parse("x = 1\ny = x + 2\n").unwrap().with_problem_id("p1").with_id("s1");
        let q = p.reparse(p.source().to_string()).unwrap();
        assert_eq!(p, q);
    }
}
