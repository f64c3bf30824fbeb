//! Token text for code and traces.
//!
//! Code: `PREFIX [1] line [2] [INDENT] line ...`.
//! Trace: `[LINE] [i] [STATE] v1 : s1 [DICTSEP] v2 : s2 [STATEEND]` per line,
//! groups separated by single spaces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{physical_line_count, Program, MAX_PROGRAM_LINES};
use crate::trace::{StateMap, Trace, TraceLine};

pub const LINE: &str = "[LINE]";
pub const STATE: &str = "[STATE]";
pub const DICTSEP: &str = "[DICTSEP]";
pub const STATEEND: &str = "[STATEEND]";
pub const INDENT: &str = "[INDENT]";
pub const DEDENT: &str = "[DEDENT]";
pub const E2D: &str = "[E2D]";

pub const STRUCTURE_TOKENS: [&str; 7] = [LINE, STATE, DICTSEP, STATEEND, INDENT, DEDENT, E2D];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("program has {lines} lines, the limit is {MAX_PROGRAM_LINES}")]
    TooManyLines { lines: usize },
    #[error("line number {line_no} is outside 1..={MAX_PROGRAM_LINES}")]
    LineNumberOutOfRange { line_no: u32 },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("`{0}` is not an identifier")]
    InvalidIdentifier(String),
    #[error("value `{0}` cannot be encoded unambiguously")]
    InvalidValue(String),
    #[error("unknown tier prefix `{0}`")]
    UnknownPrefix(String),
}

/// Dataset kind marker placed in front of encoded code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TierPrefix {
    #[serde(rename = "SINGLELINE")]
    SingleLine,
    #[serde(rename = "TUTORIAL")]
    Tutorial,
    #[serde(rename = "CODENETMUT")]
    CodeNetMut,
}

impl TierPrefix {
    pub const ALL: [TierPrefix; 3] = [Self::SingleLine, Self::Tutorial, Self::CodeNetMut];

    pub fn token(self) -> &'static str {
        match self {
            Self::SingleLine => "[SINGLELINE]",
            Self::Tutorial => "[TUTORIAL]",
            Self::CodeNetMut => "[CODENETMUT]",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SingleLine => "SingleLine",
            Self::Tutorial => "Tutorial",
            Self::CodeNetMut => "CodeNetMut",
        }
    }
}

impl fmt::Display for TierPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for TierPrefix {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bare = s.trim().trim_start_matches('[').trim_end_matches(']');
        Self::ALL
            .into_iter()
            .find(|p| p.token()[1..p.token().len() - 1].eq_ignore_ascii_case(bare))
            .ok_or_else(|| CodecError::UnknownPrefix(s.to_string()))
    }
}

pub fn line_token(i: usize) -> String {
    format!("[{i}]")
}

/// Every special token: line numbers, tier prefixes, structure tokens.
pub fn vocabulary() -> Vec<String> {
    (1..=MAX_PROGRAM_LINES)
        .map(line_token)
        .chain(TierPrefix::ALL.iter().map(|p| p.token().to_string()))
        .chain(STRUCTURE_TOKENS.iter().map(|t| t.to_string()))
        .collect()
}

#[derive(Debug, Default)]
struct LexState {
    depth: usize,
    string: Option<(char, bool)>,
    backslash: bool,
}

impl LexState {
    fn in_logical_line(&self) -> bool {
        self.depth > 0 || self.string.is_some() || self.backslash
    }

    fn scan(&mut self, line: &str) {
        self.backslash = false;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if let Some((q, triple)) = self.string {
                if c == '\\' {
                    i += 2;
                    if i > chars.len() {
                        // escaped newline keeps a single-quoted string open
                        self.backslash = true;
                    }
                    continue;
                }
                if c == q {
                    if !triple {
                        self.string = None;
                    } else if chars.get(i + 1) == Some(&q) && chars.get(i + 2) == Some(&q) {
                        self.string = None;
                        i += 2;
                    }
                }
                i += 1;
                continue;
            }
            match c {
                '#' => break,
                '\'' | '"' => {
                    let triple = chars.get(i + 1) == Some(&c) && chars.get(i + 2) == Some(&c);
                    self.string = Some((c, triple));
                    if triple {
                        i += 2;
                    }
                }
                '(' | '[' | '{' => self.depth += 1,
                ')' | ']' | '}' => self.depth = self.depth.saturating_sub(1),
                '\\' if i + 1 == chars.len() => self.backslash = true,
                _ => {}
            }
            i += 1;
        }
        if let Some((_, false)) = self.string {
            if !self.backslash {
                // unterminated single-quoted string; the tokenizer would reject it
                self.string = None;
            }
        }
    }
}

fn indent_width(line: &str) -> usize {
    let mut w = 0;
    for c in line.chars() {
        match c {
            ' ' => w += 1,
            '\t' => w = (w / 8 + 1) * 8,
            '\x0c' => w = 0,
            _ => break,
        }
    }
    w
}

/// Encode raw source text; see [`encode_code`].
pub fn encode_source(source: &str, prefix: TierPrefix) -> Result<String, CodecError> {
    let lines = physical_line_count(source);
    if lines > MAX_PROGRAM_LINES {
        return Err(CodecError::TooManyLines { lines });
    }
    let mut out = String::from(prefix.token());
    let mut stack = vec![0usize];
    let mut lex = LexState::default();
    for (i, raw) in source.lines().enumerate() {
        out.push(' ');
        out.push_str(&line_token(i + 1));
        let text = raw.trim();
        let continuation = lex.in_logical_line();
        let structural = !continuation && !text.is_empty() && !text.starts_with('#');
        if structural {
            let width = indent_width(raw);
            if width > *stack.last().unwrap() {
                stack.push(width);
                out.push(' ');
                out.push_str(INDENT);
            } else {
                while width < *stack.last().unwrap() {
                    stack.pop();
                    out.push(' ');
                    out.push_str(DEDENT);
                }
            }
        }
        if !text.is_empty() {
            out.push(' ');
            out.push_str(text);
        }
        lex.scan(raw);
    }
    Ok(out)
}

/// Prefix token, then per physical line its `[i]` token, indentation
/// change tokens and the stripped line text.
pub fn encode_code(p: &Program, prefix: TierPrefix) -> Result<String, CodecError> {
    encode_source(p.source(), prefix)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => chars.all(|c| c == '_' || c.is_alphanumeric()),
        _ => false,
    }
}

/// Length in bytes of the value starting at `text[0]`, ending right before a
/// ` [DICTSEP]` or ` [STATEEND]` that lies outside any quoted string.
fn scan_value(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut quote: Option<u8> = None;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) => {
                if b == b'\\' {
                    i += 2;
                    continue;
                }
                if b == q {
                    quote = None;
                }
            }
            None => {
                if b == b'\'' || b == b'"' {
                    quote = Some(b);
                } else if b == b' ' {
                    let rest = &text[i + 1..];
                    for sep in [DICTSEP, STATEEND] {
                        if let Some(after) = rest.strip_prefix(sep) {
                            if after.is_empty() || after.starts_with(' ') {
                                return (i > 0).then_some(i);
                            }
                        }
                    }
                }
            }
        }
        i += 1;
    }
    None
}

fn value_is_encodable(v: &str) -> bool {
    !v.is_empty()
        && v.trim() == v
        && !v.contains(['\n', '\r'])
        && scan_value(&format!("{v} {STATEEND}")) == Some(v.len())
}

fn encode_state(out: &mut String, state: &StateMap) -> Result<(), CodecError> {
    out.push_str(STATE);
    for (i, (k, v)) in state.iter().enumerate() {
        if !is_identifier(k) {
            return Err(CodecError::InvalidIdentifier(k.clone()));
        }
        if !value_is_encodable(v) {
            return Err(CodecError::InvalidValue(v.clone()));
        }
        if i > 0 {
            out.push(' ');
            out.push_str(DICTSEP);
        }
        out.push(' ');
        out.push_str(k);
        out.push_str(" : ");
        out.push_str(v);
    }
    out.push(' ');
    out.push_str(STATEEND);
    Ok(())
}

pub fn encode_line(line: &TraceLine) -> Result<String, CodecError> {
    if !line.in_line_range() {
        return Err(CodecError::LineNumberOutOfRange { line_no: line.line_no });
    }
    let mut out = format!("{LINE} [{}] ", line.line_no);
    encode_state(&mut out, &line.state)?;
    Ok(out)
}

/// Concatenated `[LINE]` groups; empty text for an empty trace.
pub fn encode_trace(t: &Trace) -> Result<String, CodecError> {
    encode_lines(&t.lines)
}

pub fn encode_lines(lines: &[TraceLine]) -> Result<String, CodecError> {
    let groups = lines.iter().map(encode_line).collect::<Result<Vec<_>, _>>()?;
    Ok(groups.join(" "))
}

/// Only the final line group: the target shape for single-line data.
pub fn encode_singleline_target(t: &Trace) -> Result<String, CodecError> {
    let last = t.lines.last().ok_or(CodecError::EmptyTrace)?;
    encode_line(last)
}

/// Output of the tolerant trace parser.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodedTrace {
    /// Longest well-formed prefix; stdout and status are not part of the
    /// token stream and stay at their defaults.
    pub trace: Trace,
    pub malformed: bool,
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_spaces(&mut self) {
        while self.text[self.pos..].starts_with(' ') {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    /// Next space-delimited word.
    fn word(&mut self) -> Option<&'a str> {
        self.skip_spaces();
        let rest = self.rest();
        if rest.is_empty() {
            return None;
        }
        let len = rest.find(' ').unwrap_or(rest.len());
        self.pos += len;
        Some(&rest[..len])
    }

    fn expect(&mut self, token: &str) -> Option<()> {
        (self.word()? == token).then_some(())
    }

    fn peek_word(&self) -> Option<&'a str> {
        let rest = self.rest().trim_start_matches(' ');
        if rest.is_empty() {
            return None;
        }
        Some(&rest[..rest.find(' ').unwrap_or(rest.len())])
    }
}

fn parse_group(c: &mut Cursor) -> Option<TraceLine> {
    c.expect(LINE)?;
    let num = c.word()?;
    let line_no: u32 = num.strip_prefix('[')?.strip_suffix(']')?.parse().ok()?;
    if !(1..=MAX_PROGRAM_LINES as u32).contains(&line_no) {
        return None;
    }
    c.expect(STATE)?;
    let mut state = StateMap::new();
    if c.peek_word()? == STATEEND {
        c.word();
        return Some(TraceLine { line_no, state });
    }
    loop {
        let name = c.word()?;
        if !is_identifier(name) || state.contains_key(name) {
            return None;
        }
        c.expect(":")?;
        c.skip_spaces();
        let len = scan_value(c.rest())?;
        let value = &c.rest()[..len];
        c.pos += len;
        state.insert(name.to_string(), value.to_string());
        match c.word()? {
            w if w == DICTSEP => continue,
            w if w == STATEEND => return Some(TraceLine { line_no, state }),
            _ => return None,
        }
    }
}

/// Parse trace token text. Stops at the first malformed group and reports
/// it through [`DecodedTrace::malformed`].
pub fn decode_trace(text: &str) -> DecodedTrace {
    let mut cursor = Cursor { text: text.trim_end(), pos: 0 };
    let mut lines = Vec::new();
    loop {
        cursor.skip_spaces();
        if cursor.at_end() {
            return DecodedTrace { trace: Trace::new(lines), malformed: false };
        }
        match parse_group(&mut cursor) {
            Some(line) => lines.push(line),
            None => return DecodedTrace { trace: Trace::new(lines), malformed: true },
        }
    }
}
