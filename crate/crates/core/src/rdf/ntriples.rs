//! Line-oriented N-Triples reader and canonical writer.
//!
//! Supports IRIs, blank nodes and plain/typed/language-tagged literals.
//! Comments and blank lines are tolerated. Blank-node labels are scoped to the
//! parsed document and, by default, rewritten to skolem IRIs of the form
//! `urn:skolem:<doc-id>:<label>` so that graphs have ground set semantics.

use std::fmt;
use std::io::Read;

use sha2::{Digest, Sha256};

use super::{Graph, Literal, Term, Triple};

pub const SKOLEM_PREFIX: &str = "urn:skolem:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and report them in [`ParseOutcome::errors`].
    Lenient,
}

#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub mode: ParseMode,
    /// Scope used when skolemizing blank nodes. Defaults to a content hash.
    pub doc_id: Option<String>,
    pub skolemize: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { mode: ParseMode::Strict, doc_id: None, skolemize: true }
    }
}

impl ParseOptions {
    pub fn strict() -> Self {
        Self::default()
    }

    pub fn lenient() -> Self {
        ParseOptions { mode: ParseMode::Lenient, ..Self::default() }
    }

    /// Strict, no skolemization. Used for files this crate wrote itself.
    pub fn verbatim() -> Self {
        ParseOptions { skolemize: false, ..Self::default() }
    }

    pub fn with_doc_id(mut self, doc_id: impl Into<String>) -> Self {
        self.doc_id = Some(doc_id.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, thiserror::Error)]
pub enum NtError {
    #[error("N-Triples syntax error at {0}")]
    Syntax(SyntaxError),
    #[error("I/O error while reading N-Triples: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Default)]
pub struct ParseOutcome {
    pub graph: Graph,
    /// Lines skipped in lenient mode.
    pub errors: Vec<SyntaxError>,
}

pub fn parse_ntriples_reader(mut input: impl Read, opts: &ParseOptions) -> Result<ParseOutcome, NtError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    parse_ntriples(&buf, opts)
}

pub fn parse_ntriples_str(input: &str) -> Result<Graph, NtError> {
    parse_ntriples(input.as_bytes(), &ParseOptions::strict()).map(|o| o.graph)
}

pub fn parse_ntriples(input: &[u8], opts: &ParseOptions) -> Result<ParseOutcome, NtError> {
    let mut doc_id = opts.doc_id.clone();
    let mut out = ParseOutcome::default();
    for (idx, raw) in input.split(|&b| b == b'\n').enumerate() {
        let line_no = idx + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let res = match std::str::from_utf8(raw) {
            Ok(line) => {
                let doc = if opts.skolemize {
                    Some(doc_id.get_or_insert_with(|| content_hash(input)).as_str())
                } else {
                    None
                };
                LineParser { s: line, pos: 0, doc }.parse_line()
            }
            Err(e) => Err((e.valid_up_to(), "invalid UTF-8".to_string())),
        };
        match res {
            Ok(Some(t)) => {
                out.graph.insert(t);
            }
            Ok(None) => {}
            Err((byte_pos, message)) => {
                let column = std::str::from_utf8(&raw[..byte_pos.min(raw.len())])
                    .map(|s| s.chars().count())
                    .unwrap_or(byte_pos)
                    + 1;
                let err = SyntaxError { line: line_no, column, message };
                match opts.mode {
                    ParseMode::Strict => return Err(NtError::Syntax(err)),
                    ParseMode::Lenient => out.errors.push(err),
                }
            }
        }
    }
    Ok(out)
}

fn content_hash(input: &[u8]) -> String {
    let digest = Sha256::digest(input);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One canonical line per triple, sorted lexicographically.
pub fn serialize_ntriples(g: &Graph) -> String {
    let mut lines: Vec<String> = g.iter().map(Triple::to_ntriples).collect();
    lines.sort_unstable();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

type LineResult<T> = Result<T, (usize, String)>;

struct LineParser<'a> {
    s: &'a str,
    pos: usize,
    doc: Option<&'a str>,
}

impl<'a> LineParser<'a> {
    fn parse_line(&mut self) -> LineResult<Option<Triple>> {
        self.skip_ws();
        if self.at_end() || self.peek() == Some('#') {
            return Ok(None);
        }
        let subject = match self.peek() {
            Some('<') => Term::iri(self.iri()?),
            Some('_') => self.blank()?,
            _ => return self.fail("expected IRI or blank node as subject"),
        };
        self.skip_ws();
        let predicate = match self.peek() {
            Some('<') => Term::iri(self.iri()?),
            _ => return self.fail("expected IRI as predicate"),
        };
        self.skip_ws();
        let object = match self.peek() {
            Some('<') => Term::iri(self.iri()?),
            Some('_') => self.blank()?,
            Some('"') => Term::Literal(self.literal()?),
            _ => return self.fail("expected IRI, blank node or literal as object"),
        };
        self.skip_ws();
        if self.peek() != Some('.') {
            return self.fail("expected '.'");
        }
        self.pos += 1;
        self.skip_ws();
        if !self.at_end() && self.peek() != Some('#') {
            return self.fail("unexpected content after '.'");
        }
        Triple::new(subject, predicate, object)
            .map(Some)
            .map_err(|e| (0, e.to_string()))
    }

    fn fail<T>(&self, msg: &str) -> LineResult<T> {
        Err((self.pos, msg.to_string()))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.s.len()
    }

    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ') | Some('\t')) {
            self.pos += 1;
        }
    }

    fn iri(&mut self) -> LineResult<String> {
        self.pos += 1; // '<'
        let mut out = String::new();
        loop {
            let start = self.pos;
            match self.bump() {
                None => return self.fail("unterminated IRI"),
                Some('>') => break,
                Some('\\') => out.push(self.unicode_escape()?),
                Some(c) if c <= ' ' || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => {
                    return Err((start, format!("character {c:?} not allowed in IRI")));
                }
                Some(c) => out.push(c),
            }
        }
        if out.is_empty() {
            return self.fail("empty IRI");
        }
        Ok(out)
    }

    fn unicode_escape(&mut self) -> LineResult<char> {
        let len = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return self.fail("invalid escape in IRI"),
        };
        self.hex_char(len)
    }

    fn hex_char(&mut self, len: usize) -> LineResult<char> {
        let end = self.pos + len;
        let hex = self.s.get(self.pos..end).ok_or((self.pos, "truncated escape".to_string()))?;
        let code = u32::from_str_radix(hex, 16).map_err(|_| (self.pos, "invalid hex escape".to_string()))?;
        self.pos = end;
        char::from_u32(code).ok_or((self.pos, "invalid code point".to_string()))
    }

    fn blank(&mut self) -> LineResult<Term> {
        if !self.s[self.pos..].starts_with("_:") {
            return self.fail("expected '_:'");
        }
        self.pos += 2;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        // A trailing '.' terminates the statement rather than belonging to the label.
        while self.pos > start && self.s[..self.pos].ends_with('.') {
            self.pos -= 1;
        }
        if self.pos == start {
            return self.fail("empty blank node label");
        }
        let label = &self.s[start..self.pos];
        Ok(match self.doc {
            Some(doc) => Term::iri(format!("{SKOLEM_PREFIX}{doc}:{label}")),
            None => Term::blank(label),
        })
    }

    fn literal(&mut self) -> LineResult<Literal> {
        self.pos += 1; // '"'
        let mut lex = String::new();
        loop {
            match self.bump() {
                None => return self.fail("unterminated literal"),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.bump() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex_char(4)?,
                        Some('U') => self.hex_char(8)?,
                        _ => return self.fail("invalid escape in literal"),
                    };
                    lex.push(c);
                }
                Some(c) => lex.push(c),
            }
        }
        match self.peek() {
            Some('@') => {
                self.pos += 1;
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let tag = &self.s[start..self.pos];
                if tag.is_empty() || !tag.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    return self.fail("invalid language tag");
                }
                Ok(Literal::lang(lex, tag))
            }
            Some('^') => {
                if !self.s[self.pos..].starts_with("^^<") {
                    return self.fail("expected '^^<' before datatype IRI");
                }
                self.pos += 2;
                let dt = self.iri()?;
                Ok(Literal::typed(lex, dt))
            }
            _ => Ok(Literal::plain(lex)),
        }
    }
}
