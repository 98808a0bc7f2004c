//! A Turtle subset: `@prefix`, `#` comments, `;` and `,` abbreviations, the
//! `a` keyword, plain strings, integers, decimals/doubles and booleans.
//! Blank nodes, collections, language tags and `^^` datatypes are rejected.

use std::fmt::Write as _;

use thiserror::Error;

use super::{vocab, Graph, GraphError, Iri, RdfTerm, Triple};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TurtleError {
    #[error("syntax error at {line}:{column}: expected {expected}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
    },
    #[error("unknown prefix `{name}` on line {line}")]
    UnknownPrefix { name: String, line: usize },
    #[error("line {line}: {source}")]
    Graph {
        line: usize,
        #[source]
        source: GraphError,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    PrefixKw,
    IriRef(String),
    PName(String, String),
    Word(String),
    Str(String),
    Number(String),
    Dot,
    Semicolon,
    Comma,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, expected: impl Into<String>) -> TurtleError {
    TurtleError::Syntax {
        line,
        column,
        expected: expected.into(),
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, TurtleError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '#' {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else {
                    break;
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek() else {
                return Ok(out);
            };
            let tok = match c {
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                ';' => {
                    self.bump();
                    Tok::Semicolon
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '[' => return Err(syntax(line, column, "a term (blank nodes are not supported)")),
                '(' => return Err(syntax(line, column, "a term (collections are not supported)")),
                '^' => return Err(syntax(line, column, "end of literal (typed literals `^^` are not supported)")),
                '@' => {
                    self.bump();
                    let mut word = String::new();
                    while let Some(c) = self.peek().filter(|c| c.is_ascii_alphabetic()) {
                        word.push(c);
                        self.bump();
                    }
                    if word == "prefix" {
                        Tok::PrefixKw
                    } else if word == "base" {
                        return Err(syntax(line, column, "@prefix (@base is not supported)"));
                    } else {
                        return Err(syntax(line, column, "@prefix (language tags are not supported)"));
                    }
                }
                '<' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('>') => break,
                            Some(c) if c.is_whitespace() => {
                                return Err(syntax(self.line, self.column, "`>` closing the IRI"))
                            }
                            Some(c) => s.push(c),
                            None => return Err(syntax(self.line, self.column, "`>` closing the IRI")),
                        }
                    }
                    Tok::IriRef(s)
                }
                '"' => {
                    self.bump();
                    if self.peek() == Some('"') {
                        self.bump();
                        if self.peek() == Some('"') {
                            return Err(syntax(line, column, "a short string (long strings are not supported)"));
                        }
                        Tok::Str(String::new())
                    } else {
                        let mut s = String::new();
                        loop {
                            match self.bump() {
                                Some('"') => break,
                                Some('\\') => match self.bump() {
                                    Some('"') => s.push('"'),
                                    Some('\\') => s.push('\\'),
                                    Some('n') => s.push('\n'),
                                    Some('r') => s.push('\r'),
                                    Some('t') => s.push('\t'),
                                    _ => return Err(syntax(self.line, self.column, "a valid escape sequence")),
                                },
                                Some('\n') | None => {
                                    return Err(syntax(self.line, self.column, "`\"` closing the string"))
                                }
                                Some(c) => s.push(c),
                            }
                        }
                        match self.peek() {
                            Some('@') => {
                                return Err(syntax(self.line, self.column, "end of literal (language tags are not supported)"))
                            }
                            Some('^') => {
                                return Err(syntax(self.line, self.column, "end of literal (typed literals `^^` are not supported)"))
                            }
                            _ => {}
                        }
                        Tok::Str(s)
                    }
                }
                c if c.is_ascii_digit() || c == '+' || c == '-' => {
                    let mut s = String::new();
                    s.push(c);
                    self.bump();
                    loop {
                        match self.peek() {
                            Some(d) if d.is_ascii_digit() => {
                                s.push(d);
                                self.bump();
                            }
                            Some(e @ ('e' | 'E')) => {
                                s.push(e);
                                self.bump();
                                if let Some(sign @ ('+' | '-')) = self.peek() {
                                    s.push(sign);
                                    self.bump();
                                }
                            }
                            Some('.') => {
                                // A dot only belongs to the number when a digit follows;
                                // otherwise it terminates the statement.
                                let mut look = self.chars.clone();
                                look.next();
                                if look.next().is_some_and(|d| d.is_ascii_digit()) {
                                    s.push('.');
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                            _ => break,
                        }
                    }
                    Tok::Number(s)
                }
                c if is_name_char(c) => {
                    let mut first = String::new();
                    while let Some(c) = self.peek().filter(|c| is_name_char(*c)) {
                        first.push(c);
                        self.bump();
                    }
                    if self.peek() == Some(':') {
                        self.bump();
                        let mut local = String::new();
                        while let Some(c) = self.peek().filter(|c| is_name_char(*c)) {
                            local.push(c);
                            self.bump();
                        }
                        if first == "_" {
                            return Err(syntax(line, column, "a term (blank nodes are not supported)"));
                        }
                        Tok::PName(first, local)
                    } else {
                        Tok::Word(first)
                    }
                }
                ':' => return Err(syntax(line, column, "a prefixed name with a non-empty prefix")),
                _ => return Err(syntax(line, column, "a term, `.`, `;` or `,`")),
            };
            out.push(Spanned { tok, line, column });
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    graph: Graph,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self, expected: &str) -> Result<Spanned, TurtleError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(syntax(self.end.0, self.end.1, expected)),
        }
    }

    fn expect_dot(&mut self) -> Result<(), TurtleError> {
        let t = self.next("`.`")?;
        if t.tok == Tok::Dot {
            Ok(())
        } else {
            Err(syntax(t.line, t.column, "`.`"))
        }
    }

    fn pname(&self, prefix: &str, local: &str, at: &Spanned) -> Result<Iri, TurtleError> {
        if !self.graph.prefixes().contains_key(prefix) {
            return Err(TurtleError::UnknownPrefix {
                name: prefix.to_string(),
                line: at.line,
            });
        }
        Iri::new(prefix, local).map_err(|e| syntax(at.line, at.column, format!("a valid prefixed name ({e})")))
    }

    fn iri_term(&self, t: &Spanned, what: &str) -> Result<Iri, TurtleError> {
        match &t.tok {
            Tok::PName(p, l) => self.pname(p, l, t),
            Tok::IriRef(abs) => self
                .graph
                .compact(abs)
                .ok_or_else(|| syntax(t.line, t.column, format!("{what} under a declared prefix"))),
            _ => Err(syntax(t.line, t.column, what)),
        }
    }

    fn object(&self, t: &Spanned) -> Result<RdfTerm, TurtleError> {
        match &t.tok {
            Tok::PName(..) | Tok::IriRef(_) => self.iri_term(t, "an object").map(RdfTerm::Iri),
            Tok::Str(s) => Ok(RdfTerm::Str(s.clone())),
            Tok::Word(w) if w == "true" => Ok(RdfTerm::Bool(true)),
            Tok::Word(w) if w == "false" => Ok(RdfTerm::Bool(false)),
            Tok::Number(n) => {
                if n.contains(['.', 'e', 'E']) {
                    n.parse::<f64>()
                        .ok()
                        .and_then(RdfTerm::float)
                        .ok_or_else(|| syntax(t.line, t.column, "a finite number"))
                } else {
                    n.parse::<i64>()
                        .map(RdfTerm::Int)
                        .map_err(|_| syntax(t.line, t.column, "an integer in 64-bit range"))
                }
            }
            _ => Err(syntax(t.line, t.column, "an object")),
        }
    }

    fn insert(&mut self, t: Triple, line: usize) -> Result<(), TurtleError> {
        self.graph
            .insert(t)
            .map(|_| ())
            .map_err(|source| TurtleError::Graph { line, source })
    }

    fn run(mut self) -> Result<Graph, TurtleError> {
        while let Some(t) = self.peek().cloned() {
            if t.tok == Tok::PrefixKw {
                self.pos += 1;
                let name = self.next("a prefix name")?;
                let Tok::PName(prefix, local) = &name.tok else {
                    return Err(syntax(name.line, name.column, "a prefix name ending in `:`"));
                };
                if !local.is_empty() {
                    return Err(syntax(name.line, name.column, "a prefix name ending in `:`"));
                }
                let base = self.next("an IRI in angle brackets")?;
                let Tok::IriRef(base_iri) = &base.tok else {
                    return Err(syntax(base.line, base.column, "an IRI in angle brackets"));
                };
                self.graph
                    .add_prefix(prefix, base_iri)
                    .map_err(|source| TurtleError::Graph { line: name.line, source })?;
                self.expect_dot()?;
                continue;
            }
            self.pos += 1;
            let subject = self.iri_term(&t, "a subject")?;
            loop {
                let v = self.next("a predicate")?;
                let predicate = match &v.tok {
                    Tok::Word(w) if w == "a" => {
                        if !self.graph.prefixes().contains_key("rdf") {
                            self.graph
                                .add_prefix("rdf", vocab::RDF)
                                .map_err(|source| TurtleError::Graph { line: v.line, source })?;
                        }
                        vocab::rdf_type()
                    }
                    _ => self.iri_term(&v, "a predicate")?,
                };
                loop {
                    let o = self.next("an object")?;
                    let object = self.object(&o)?;
                    self.insert(Triple::new(subject.clone(), predicate.clone(), object), o.line)?;
                    match self.peek().map(|s| &s.tok) {
                        Some(Tok::Comma) => {
                            self.pos += 1;
                        }
                        _ => break,
                    }
                }
                match self.peek().map(|s| s.tok.clone()) {
                    Some(Tok::Semicolon) => {
                        self.pos += 1;
                        // trailing `;` before `.` is allowed
                        while matches!(self.peek().map(|s| &s.tok), Some(Tok::Semicolon)) {
                            self.pos += 1;
                        }
                        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Dot)) {
                            break;
                        }
                    }
                    _ => break,
                }
            }
            self.expect_dot()?;
        }
        Ok(self.graph)
    }
}

/// Parses a document into a fresh graph.
pub fn parse_turtle(text: &str) -> Result<Graph, TurtleError> {
    parse_turtle_into(text, Graph::new())
}

/// Parses a document on top of an existing graph (its prefixes are visible
/// to the document).
pub fn parse_turtle_into(text: &str, graph: Graph) -> Result<Graph, TurtleError> {
    let toks = Lexer::new(text).tokens()?;
    let end = text.lines().enumerate().last().map(|(i, l)| (i + 1, l.len() + 1)).unwrap_or((1, 1));
    Parser { toks, pos: 0, end, graph }.run()
}

/// Canonical document: prefixes sorted by name, then one triple per line
/// sorted by absolute subject, predicate and object.
pub fn serialize_turtle(g: &Graph) -> String {
    let mut out = String::new();
    for (name, base) in g.prefixes() {
        let _ = writeln!(out, "@prefix {name}: <{base}> .");
    }
    if !g.is_empty() && !g.prefixes().is_empty() {
        out.push('\n');
    }
    for t in g.canonical_triples() {
        let _ = writeln!(out, "{} {} {} .", t.subject, t.predicate, t.object.to_turtle());
    }
    out
}
