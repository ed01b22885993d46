//! Parser for interest files: a SPARQL-shaped subset.
//!
//! ```text
//! [ID name] [SOURCE <iri>] [TARGET <iri> | "path"]
//! PREFIX p: <iri> ...
//! [SELECT * | CONSTRUCT] [WHERE] {
//!     triple patterns (with `;` and `,` abbreviations)
//!     FILTER (...)
//!     OPTIONAL { triple patterns  FILTER (...) }
//! }
//! ```

use std::collections::HashMap;
use std::fmt;

use super::{Bgp, CompareOp, FilterExpr, InterestExpression, Operand, PatternTerm, TriplePattern, Variable, DEFAULT_SOURCE};
use crate::rdf::{Literal, Term, RDF_TYPE, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("the basic graph pattern is disjoint; disconnected components: {}", .0.join(", "))]
    Disjoint(Vec<String>),
    #[error("the OPTIONAL block shares no variable with the basic graph pattern")]
    OptionalDisconnected,
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("invalid interest expression: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Iri(String),
    PName(String, String),
    Var(String),
    Blank(String),
    Str(String),
    Number(String),
    Word(String),
    LangTag(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    _src: &'a str,
}

const PUNCT: &[&str] = &["&&", "||", "!=", "<=", ">=", "^^", "{", "}", "(", ")", ".", ";", ",", "*", "=", "<", ">", "!", "/", "|", "^", "+", "?"];

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.chars().collect(), pos: 0, line: 1, column: 1, _src: src }
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err<T>(&self, line: usize, column: usize, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { line, column, message: msg.into() })
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            // whitespace and comments
            loop {
                match self.peek_at(0) {
                    Some(c) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some('#') => {
                        while !matches!(self.peek_at(0), None | Some('\n')) {
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek_at(0) else {
                out.push(Token { tok: Tok::Eof, line, column });
                return Ok(out);
            };
            let prev_is_string = matches!(out.last(), Some(Token { tok: Tok::Str(_), .. }));
            let tok = if c == '<' && self.looks_like_iri() {
                self.bump();
                let mut s = String::new();
                while let Some(c) = self.bump() {
                    if c == '>' {
                        break;
                    }
                    s.push(c);
                }
                Tok::Iri(s)
            } else if c == '@' && prev_is_string {
                self.bump();
                let mut s = String::new();
                while matches!(self.peek_at(0), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                    s.push(self.bump().unwrap());
                }
                if s.is_empty() {
                    return self.err(line, column, "empty language tag");
                }
                Tok::LangTag(s)
            } else if (c == '?' || c == '$') && matches!(self.peek_at(1), Some(n) if n.is_alphanumeric() || n == '_') {
                self.bump();
                Tok::Var(self.word_chars(false))
            } else if c == '_' && self.peek_at(1) == Some(':') {
                self.bump();
                self.bump();
                Tok::Blank(self.word_chars(false))
            } else if c == '"' || c == '\'' {
                Tok::Str(self.string(c, line, column)?)
            } else if c.is_ascii_digit() || (c == '-' && matches!(self.peek_at(1), Some(d) if d.is_ascii_digit())) {
                let mut s = String::new();
                s.push(self.bump().unwrap());
                while let Some(d) = self.peek_at(0) {
                    let exp_sign = matches!(d, '+' | '-') && matches!(s.chars().last(), Some('e' | 'E'));
                    let dot = d == '.' && matches!(self.peek_at(1), Some(n) if n.is_ascii_digit());
                    if d.is_ascii_digit() || dot || matches!(d, 'e' | 'E') || exp_sign {
                        s.push(self.bump().unwrap());
                    } else {
                        break;
                    }
                }
                Tok::Number(s)
            } else if c.is_alphabetic() || c == ':' || c == '_' {
                let w = self.word_chars(true);
                match w.split_once(':') {
                    Some((p, l)) => Tok::PName(p.to_string(), l.to_string()),
                    None => Tok::Word(w),
                }
            } else if let Some(p) = PUNCT.iter().find(|p| p.chars().enumerate().all(|(i, pc)| self.peek_at(i) == Some(pc))) {
                for _ in 0..p.len() {
                    self.bump();
                }
                Tok::Punct(p)
            } else {
                return self.err(line, column, format!("unexpected character {c:?}"));
            };
            out.push(Token { tok, line, column });
        }
    }

    /// `<` starts an IRI when a `>` closes it before any whitespace.
    fn looks_like_iri(&self) -> bool {
        let mut i = 1;
        while let Some(c) = self.peek_at(i) {
            match c {
                '>' => return true,
                c if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '=') => return false,
                _ => i += 1,
            }
        }
        false
    }

    fn word_chars(&mut self, allow_colon: bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek_at(0) {
            let ok = c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '%') || (allow_colon && c == ':');
            if !ok {
                break;
            }
            // a trailing dot ends the triple rather than the name
            if c == '.' && !matches!(self.peek_at(1), Some(n) if n.is_alphanumeric() || n == '_' || n == '-') {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }

    fn string(&mut self, quote: char, line: usize, column: usize) -> Result<String, ParseError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return self.err(line, column, "unterminated string"),
                Some(c) if c == quote => return Ok(s),
                Some('\\') => {
                    let c = match self.bump() {
                        Some('t') => '\t',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('b') => '\u{8}',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some(u @ ('u' | 'U')) => {
                            let len = if u == 'u' { 4 } else { 8 };
                            let hex: String = (0..len).filter_map(|_| self.bump()).collect();
                            match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                                Some(c) => c,
                                None => return self.err(self.line, self.column, "invalid unicode escape"),
                            }
                        }
                        _ => return self.err(self.line, self.column, "invalid escape"),
                    };
                    s.push(c);
                }
                Some(c) => s.push(c),
            }
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    prefixes: HashMap<String, String>,
}

/// Parses and validates an interest file.
pub fn parse_interest(source: &str) -> Result<InterestExpression, ParseError> {
    let toks = Lexer::new(source).tokens()?;
    let mut p = Parser { toks, pos: 0, prefixes: HashMap::new() };
    let expr = p.document()?;
    expr.validate()?;
    Ok(expr)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.toks[self.pos];
        Err(ParseError::Syntax { line: t.line, column: t.column, message: msg.into() })
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(x) if x.eq_ignore_ascii_case(w))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(x) if *x == p)
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.is_punct(p) {
            self.next();
            Ok(())
        } else {
            self.fail(format!("expected '{p}'"))
        }
    }

    fn document(&mut self) -> Result<InterestExpression, ParseError> {
        let mut id = String::from(super::DEFAULT_ID);
        let mut source = DEFAULT_SOURCE.to_string();
        let mut target = String::new();
        loop {
            if self.is_word("ID") {
                self.next();
                id = match self.next().tok {
                    Tok::Word(w) | Tok::Str(w) | Tok::Number(w) => w,
                    Tok::PName(p, l) => format!("{p}:{l}"),
                    _ => return self.fail("expected an identifier after ID"),
                };
            } else if self.is_word("SOURCE") {
                self.next();
                source = match self.next().tok {
                    Tok::Iri(i) => i,
                    _ => return self.fail("expected <iri> after SOURCE"),
                };
            } else if self.is_word("TARGET") {
                self.next();
                target = match self.next().tok {
                    Tok::Iri(i) | Tok::Str(i) => i,
                    _ => return self.fail("expected <iri> or \"path\" after TARGET"),
                };
            } else if self.is_word("PREFIX") {
                self.next();
                let prefix = match self.next().tok {
                    Tok::PName(p, l) if l.is_empty() => p,
                    _ => return self.fail("expected 'prefix:' after PREFIX"),
                };
                let iri = match self.next().tok {
                    Tok::Iri(i) => i,
                    _ => return self.fail("expected <iri> in PREFIX declaration"),
                };
                self.prefixes.insert(prefix, iri);
            } else if self.is_word("BASE") {
                return Err(ParseError::Unsupported("BASE".into()));
            } else {
                break;
            }
        }
        if self.is_word("SELECT") {
            self.next();
            if self.is_punct("*") {
                self.next();
            } else {
                while matches!(self.peek(), Tok::Var(_)) {
                    self.next();
                }
            }
        } else if self.is_word("CONSTRUCT") {
            self.next();
        } else if self.is_word("ASK") || self.is_word("DESCRIBE") {
            self.next();
        }
        if self.is_word("WHERE") {
            self.next();
        }
        self.expect_punct("{")?;
        let mut bgp = Bgp::default();
        let mut ogp: Option<Bgp> = None;
        loop {
            if self.is_punct("}") {
                self.next();
                break;
            }
            if self.is_word("OPTIONAL") {
                if ogp.is_some() {
                    return Err(ParseError::Unsupported("more than one OPTIONAL block".into()));
                }
                self.next();
                self.expect_punct("{")?;
                let mut group = Bgp::default();
                loop {
                    if self.is_punct("}") {
                        self.next();
                        break;
                    }
                    if self.is_word("OPTIONAL") {
                        return Err(ParseError::Unsupported("nested OPTIONAL".into()));
                    }
                    self.group_element(&mut group)?;
                }
                if group.patterns.is_empty() {
                    return self.fail("empty OPTIONAL block");
                }
                ogp = Some(group);
                if self.is_punct(".") {
                    self.next();
                }
                continue;
            }
            self.group_element(&mut bgp)?;
        }
        if !matches!(self.peek(), Tok::Eof) {
            return self.fail("unexpected content after the closing '}'");
        }
        Ok(InterestExpression { id, source, target, bgp, ogp: ogp.unwrap_or_default() })
    }

    fn group_element(&mut self, group: &mut Bgp) -> Result<(), ParseError> {
        for kw in ["UNION", "GRAPH", "MINUS", "BIND", "VALUES", "SERVICE"] {
            if self.is_word(kw) {
                return Err(ParseError::Unsupported(kw.to_string()));
            }
        }
        if self.is_punct("{") {
            return Err(ParseError::Unsupported("nested group patterns".into()));
        }
        if self.is_word("FILTER") {
            self.next();
            let f = if self.is_punct("(") {
                self.next();
                let e = self.expr()?;
                self.expect_punct(")")?;
                e
            } else {
                self.primary()?
            };
            group.filters.push(f);
            if self.is_punct(".") {
                self.next();
            }
            return Ok(());
        }
        let subject = self.pattern_term()?;
        loop {
            let predicate = self.verb()?;
            loop {
                let object = self.pattern_term()?;
                let pat = TriplePattern::new(subject.clone(), predicate.clone(), object).map_err(|e| match e {
                    ParseError::Invalid(m) => {
                        let t = &self.toks[self.pos];
                        ParseError::Syntax { line: t.line, column: t.column, message: m }
                    }
                    other => other,
                })?;
                group.patterns.push(pat);
                if self.is_punct(",") {
                    self.next();
                } else {
                    break;
                }
            }
            if self.is_punct(";") {
                self.next();
                if self.is_punct(".") || self.is_punct("}") {
                    break;
                }
            } else {
                break;
            }
        }
        if self.is_punct(".") {
            self.next();
        } else if !self.is_punct("}") && !self.is_word("FILTER") && !self.is_word("OPTIONAL") {
            return self.fail("expected '.' after triple pattern");
        }
        Ok(())
    }

    fn verb(&mut self) -> Result<PatternTerm, ParseError> {
        if self.is_punct("^") {
            return Err(ParseError::Unsupported("property paths".into()));
        }
        let v = if self.is_word("a") {
            self.next();
            PatternTerm::Term(Term::iri(RDF_TYPE))
        } else {
            let t = self.pattern_term()?;
            match &t {
                PatternTerm::Var(_) | PatternTerm::Term(Term::Iri(_)) => t,
                _ => return self.fail("predicate must be an IRI or a variable"),
            }
        };
        if ["/", "|", "*", "+", "?"].iter().any(|p| self.is_punct(p)) {
            return Err(ParseError::Unsupported("property paths".into()));
        }
        Ok(v)
    }

    fn pattern_term(&mut self) -> Result<PatternTerm, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.next();
                Ok(PatternTerm::var(&v))
            }
            Tok::Blank(b) => {
                self.next();
                Ok(PatternTerm::var(&format!("_{b}")))
            }
            Tok::Punct("[") => Err(ParseError::Unsupported("anonymous blank nodes".into())),
            _ => Ok(PatternTerm::Term(self.constant()?)),
        }
    }

    fn constant(&mut self) -> Result<Term, ParseError> {
        let tok = self.next();
        match tok.tok {
            Tok::Iri(i) => Ok(Term::iri(i)),
            Tok::PName(p, l) => match self.prefixes.get(&p) {
                Some(ns) => Ok(Term::iri(format!("{ns}{l}"))),
                None => Err(ParseError::Syntax {
                    line: tok.line,
                    column: tok.column,
                    message: format!("undeclared prefix '{p}:'"),
                }),
            },
            Tok::Str(s) => match self.peek().clone() {
                Tok::LangTag(tag) => {
                    self.next();
                    Ok(Term::literal(Literal::lang(s, &tag)))
                }
                Tok::Punct("^^") => {
                    self.next();
                    match self.constant()? {
                        Term::Iri(dt) => Ok(Term::literal(Literal::typed(s, dt))),
                        _ => self.fail("datatype must be an IRI"),
                    }
                }
                _ => Ok(Term::literal(Literal::plain(s))),
            },
            Tok::Number(n) => {
                let dt = if n.contains(['e', 'E']) {
                    XSD_DOUBLE
                } else if n.contains('.') {
                    XSD_DECIMAL
                } else {
                    XSD_INTEGER
                };
                Ok(Term::literal(Literal::typed(n, dt)))
            }
            Tok::Word(w) if w == "true" || w == "false" => Ok(Term::literal(Literal::typed(w, XSD_BOOLEAN))),
            _ => Err(ParseError::Syntax {
                line: tok.line,
                column: tok.column,
                message: "expected a term".into(),
            }),
        }
    }

    fn expr(&mut self) -> Result<FilterExpr, ParseError> {
        let mut lhs = self.and_expr()?;
        while self.is_punct("||") || self.is_word("OR") {
            self.next();
            let rhs = self.and_expr()?;
            lhs = FilterExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<FilterExpr, ParseError> {
        let mut lhs = self.unary()?;
        while self.is_punct("&&") || self.is_word("AND") {
            self.next();
            let rhs = self.unary()?;
            lhs = FilterExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<FilterExpr, ParseError> {
        if self.is_punct("!") || self.is_word("NOT") {
            self.next();
            return Ok(FilterExpr::Not(Box::new(self.unary()?)));
        }
        self.relational()
    }

    fn relational(&mut self) -> Result<FilterExpr, ParseError> {
        if self.is_punct("(") || self.is_word("STRSTARTS") || self.is_word("CONTAINS") {
            return self.primary();
        }
        let lhs = self.operand()?;
        let op = match self.peek() {
            Tok::Punct("=") => CompareOp::Eq,
            Tok::Punct("!=") => CompareOp::Ne,
            Tok::Punct("<") => CompareOp::Lt,
            Tok::Punct("<=") => CompareOp::Le,
            Tok::Punct(">") => CompareOp::Gt,
            Tok::Punct(">=") => CompareOp::Ge,
            _ => return self.fail("expected a comparison operator"),
        };
        self.next();
        let rhs = self.operand()?;
        Ok(FilterExpr::Compare(op, lhs, rhs))
    }

    fn primary(&mut self) -> Result<FilterExpr, ParseError> {
        if self.is_punct("(") {
            self.next();
            let e = self.expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        let strstarts = self.is_word("STRSTARTS");
        if strstarts || self.is_word("CONTAINS") {
            self.next();
            self.expect_punct("(")?;
            let a = self.operand()?;
            self.expect_punct(",")?;
            let b = self.operand()?;
            self.expect_punct(")")?;
            return Ok(if strstarts { FilterExpr::StrStarts(a, b) } else { FilterExpr::Contains(a, b) });
        }
        if let Tok::Word(w) = self.peek() {
            return Err(ParseError::Unsupported(format!("filter function {w}")));
        }
        self.fail("expected a filter expression")
    }

    fn operand(&mut self) -> Result<Operand, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.next();
                Ok(Operand::Var(Variable::new(v)))
            }
            Tok::Word(w) if w != "true" && w != "false" => Err(ParseError::Unsupported(format!("filter function {w}"))),
            _ => Ok(Operand::Const(self.constant()?)),
        }
    }
}

fn write_group(f: &mut fmt::Formatter<'_>, g: &Bgp, indent: &str) -> fmt::Result {
    for p in &g.patterns {
        writeln!(f, "{indent}{p}")?;
    }
    for e in &g.filters {
        writeln!(f, "{indent}FILTER ({e})")?;
    }
    Ok(())
}

/// Canonical rendering; parses back to an equal expression.
impl fmt::Display for InterestExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ID \"{}\"", self.id.replace('\\', "\\\\").replace('"', "\\\""))?;
        writeln!(f, "SOURCE <{}>", self.source)?;
        if !self.target.is_empty() {
            writeln!(f, "TARGET \"{}\"", self.target.replace('\\', "\\\\").replace('"', "\\\""))?;
        }
        writeln!(f, "SELECT * WHERE {{")?;
        write_group(f, &self.bgp, "  ")?;
        if !self.ogp.patterns.is_empty() {
            writeln!(f, "  OPTIONAL {{")?;
            write_group(f, &self.ogp, "    ")?;
            writeln!(f, "  }}")?;
        }
        writeln!(f, "}}")
    }
}
