//! Tokenizer with significant indentation.
//!
//! Produces `Newline`, `Indent` and `Dedent` tokens the way the subject
//! language does: no layout tokens inside brackets, blank and comment-only
//! lines are ignored, and a backslash at end of line joins lines.

use num_bigint::BigInt;
use num_traits::Num;

use super::ast::SourceSpan;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Keyword(&'static str),
    Int(BigInt),
    Float(f64),
    /// String literal; `prefix` holds any letter prefix (`r`, `b`, `f`, ...).
    Str {
        value: String,
        prefix: String,
    },
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

// Longest first so that maximal munch works by linear scan.
const OPERATORS: &[&str] = &[
    "**=", "//=", "...", "->", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", ":=", "+", "-", "*",
    "/", "%", "<", ">", "=", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";", "@",
];

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
    line: u32,
    line_start: usize,
    depth: usize,
    indents: Vec<usize>,
    tokens: Vec<Token>,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut lx = Lexer {
        text,
        pos: 0,
        line: 1,
        line_start: 0,
        depth: 0,
        indents: vec![0],
        tokens: Vec::new(),
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(n)
    }

    fn column_of(&self, offset: usize) -> u32 {
        self.text[self.line_start..offset].chars().count() as u32 + 1
    }

    fn span(&self, start: usize) -> SourceSpan {
        SourceSpan::new(start, self.pos - start, self.line, self.column_of(start))
    }

    fn error(&self, start: usize, message: impl Into<String>) -> SyntaxError {
        let len = self.peek().map(|c| c.len_utf8()).unwrap_or(0).max(1);
        let len = len.min(self.text.len().saturating_sub(start));
        SyntaxError::Lex {
            span: SourceSpan::new(start, len, self.line, self.column_of(start)),
            message: message.into(),
        }
    }

    fn push(&mut self, tok: Tok, start: usize) {
        let span = self.span(start);
        self.tokens.push(Token { tok, span });
    }

    fn newline(&mut self) {
        self.pos += 1;
        self.line += 1;
        self.line_start = self.pos;
    }

    fn last_is_layout(&self) -> bool {
        matches!(
            self.tokens.last().map(|t| &t.tok),
            None | Some(Tok::Newline) | Some(Tok::Indent) | Some(Tok::Dedent)
        )
    }

    fn run(&mut self) -> Result<(), SyntaxError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                if !self.indentation()? {
                    break;
                }
                at_line_start = false;
                continue;
            }
            let Some(c) = self.peek() else { break };
            let start = self.pos;
            match c {
                '\n' => {
                    if self.depth == 0 && !self.last_is_layout() {
                        self.push(Tok::Newline, start);
                    }
                    self.newline();
                    at_line_start = true;
                }
                ' ' | '\t' | '\r' | '\x0c' => self.pos += 1,
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.pos += c.len_utf8();
                    }
                }
                '\\' if self.peek_at(1) == Some('\n') => {
                    self.pos += 1;
                    self.newline();
                }
                '\\' if self.peek_at(1) == Some('\r') && self.peek_at(2) == Some('\n') => {
                    self.pos += 2;
                    self.newline();
                }
                '"' | '\'' => self.string(start, String::new())?,
                c if c.is_ascii_digit() => self.number(start)?,
                '.' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => self.number(start)?,
                c if c == '_' || c.is_alphabetic() => {
                    while let Some(c) = self.peek() {
                        if c == '_' || c.is_alphanumeric() {
                            self.pos += c.len_utf8();
                        } else {
                            break;
                        }
                    }
                    let word = &self.text[start..self.pos];
                    if matches!(self.peek(), Some('"') | Some('\''))
                        && word.len() <= 2
                        && word.chars().all(|c| "rRbBfFuU".contains(c))
                    {
                        self.string(start, word.to_string())?;
                    } else if let Some(kw) = KEYWORDS.iter().find(|k| **k == word) {
                        self.push(Tok::Keyword(kw), start);
                    } else {
                        self.push(Tok::Name(word.to_string()), start);
                    }
                }
                _ => {
                    let rest = &self.text[self.pos..];
                    let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) else {
                        return Err(self.error(start, format!("unexpected character {c:?}")));
                    };
                    self.pos += op.len();
                    match *op {
                        "(" | "[" | "{" => self.depth += 1,
                        ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                        _ => {}
                    }
                    self.push(Tok::Op(op), start);
                }
            }
        }
        let end = self.pos;
        if !self.last_is_layout() {
            self.push(Tok::Newline, end);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, end);
        }
        self.push(Tok::Eof, end);
        Ok(())
    }

    /// Measures indentation at the start of a logical line and emits
    /// indent/dedent tokens. Returns false at end of input.
    fn indentation(&mut self) -> Result<bool, SyntaxError> {
        loop {
            let start = self.pos;
            let mut width = 0;
            while let Some(c) = self.peek() {
                match c {
                    ' ' => {
                        width += 1;
                        self.pos += 1;
                    }
                    '\t' => return Err(self.error(self.pos, "tab in indentation")),
                    '\r' | '\x0c' => self.pos += 1,
                    _ => break,
                }
            }
            match self.peek() {
                None => return Ok(false),
                Some('\n') => {
                    self.newline();
                    continue;
                }
                Some('#') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.pos += c.len_utf8();
                    }
                    continue;
                }
                _ => {}
            }
            let current = *self.indents.last().unwrap();
            if width > current {
                self.indents.push(width);
                self.push(Tok::Indent, start);
            } else {
                while width < *self.indents.last().unwrap() {
                    self.indents.pop();
                    self.push(Tok::Dedent, self.pos);
                }
                if width != *self.indents.last().unwrap() {
                    return Err(self.error(self.pos, "unindent does not match any outer level"));
                }
            }
            return Ok(true);
        }
    }

    fn number(&mut self, start: usize) -> Result<(), SyntaxError> {
        let rest = &self.text[self.pos..];
        let radix = match rest.get(..2).map(|p| p.to_ascii_lowercase()) {
            Some(p) if p == "0x" => Some(16),
            Some(p) if p == "0o" => Some(8),
            Some(p) if p == "0b" => Some(2),
            _ => None,
        };
        if let Some(radix) = radix {
            self.pos += 2;
            let digits_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            let digits: String = self.text[digits_start..self.pos].replace('_', "");
            let value =
                BigInt::from_str_radix(&digits, radix).map_err(|_| self.error(start, "malformed integer literal"))?;
            self.push(Tok::Int(value), start);
            return Ok(());
        }
        let mut is_float = false;
        let digits = |lx: &mut Lexer| {
            while lx.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some('.') {
            is_float = true;
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                is_float = true;
                digits(self);
            } else {
                self.pos = save;
            }
        }
        if self
            .peek()
            .is_some_and(|c| c == 'j' || c == 'J' || c.is_alphabetic() || c == '_')
        {
            return Err(self.error(self.pos, "malformed number literal"));
        }
        let text = self.text[start..self.pos].replace('_', "");
        if is_float {
            let v: f64 = text.parse().map_err(|_| self.error(start, "malformed float literal"))?;
            self.push(Tok::Float(v), start);
        } else {
            if text.len() > 1 && text.starts_with('0') && text.bytes().any(|b| b != b'0') {
                return Err(self.error(start, "leading zeros in decimal integer literal"));
            }
            let v = text
                .parse::<BigInt>()
                .map_err(|_| self.error(start, "malformed integer literal"))?;
            self.push(Tok::Int(v), start);
        }
        Ok(())
    }

    fn string(&mut self, start: usize, prefix: String) -> Result<(), SyntaxError> {
        let quote = self.peek().unwrap();
        let triple = self.text[self.pos..].starts_with(&format!("{quote}{quote}{quote}"));
        let raw = prefix.contains(['r', 'R']);
        self.pos += if triple { 3 } else { 1 };
        let mut value = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error(start, "unterminated string literal"));
            };
            if c == quote {
                if !triple {
                    self.pos += 1;
                    break;
                }
                if self.text[self.pos..].starts_with(&format!("{quote}{quote}{quote}")) {
                    self.pos += 3;
                    break;
                }
            }
            if c == '\n' {
                if !triple {
                    return Err(self.error(start, "unterminated string literal"));
                }
                value.push('\n');
                self.newline();
                continue;
            }
            if c == '\\' {
                let esc_start = self.pos;
                self.pos += 1;
                let Some(e) = self.peek() else {
                    return Err(self.error(start, "unterminated string literal"));
                };
                if raw {
                    value.push('\\');
                    if e == '\n' {
                        value.push('\n');
                        self.newline();
                    } else {
                        value.push(e);
                        self.pos += e.len_utf8();
                    }
                    continue;
                }
                self.pos += e.len_utf8();
                match e {
                    'n' => value.push('\n'),
                    't' => value.push('\t'),
                    'r' => value.push('\r'),
                    '0' => value.push('\0'),
                    'a' => value.push('\x07'),
                    'b' => value.push('\x08'),
                    'f' => value.push('\x0c'),
                    'v' => value.push('\x0b'),
                    '\\' => value.push('\\'),
                    '\'' => value.push('\''),
                    '"' => value.push('"'),
                    '\n' => {
                        self.pos -= 1;
                        self.newline();
                    }
                    'x' | 'u' | 'U' => {
                        let n = match e {
                            'x' => 2,
                            'u' => 4,
                            _ => 8,
                        };
                        let hex = self.text.get(self.pos..self.pos + n).unwrap_or("");
                        let code = u32::from_str_radix(hex, 16)
                            .ok()
                            .filter(|_| hex.len() == n)
                            .and_then(char::from_u32)
                            .ok_or_else(|| self.error(esc_start, "malformed escape sequence"))?;
                        self.pos += n;
                        value.push(code);
                    }
                    other => {
                        value.push('\\');
                        value.push(other);
                    }
                }
                continue;
            }
            value.push(c);
            self.pos += c.len_utf8();
        }
        // The span of a multi-line string starts on an earlier line; recompute
        // line/column from the start offset.
        let line = self.text[..start].matches('\n').count() as u32 + 1;
        let line_start = self.text[..start].rfind('\n').map(|i| i + 1).unwrap_or(0);
        let column = self.text[line_start..start].chars().count() as u32 + 1;
        self.tokens.push(Token {
            tok: Tok::Str { value, prefix },
            span: SourceSpan::new(start, self.pos - start, line, column),
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn layout_tokens() {
        let toks = kinds("def f(x):\n    return x\n");
        assert_eq!(
            toks,
            vec![
                Tok::Keyword("def"),
                Tok::Name("f".into()),
                Tok::Op("("),
                Tok::Name("x".into()),
                Tok::Op(")"),
                Tok::Op(":"),
                Tok::Newline,
                Tok::Indent,
                Tok::Keyword("return"),
                Tok::Name("x".into()),
                Tok::Newline,
                Tok::Dedent,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn no_layout_inside_brackets() {
        let toks = kinds("x = [1,\n      2]\n");
        assert!(!toks[..toks.len() - 2].contains(&Tok::Indent));
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn tab_indent_is_an_error() {
        let err = tokenize("if x:\n\ty = 1\n").unwrap_err();
        match err {
            SyntaxError::Lex { span, .. } => assert_eq!((span.line, span.column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_character() {
        assert!(matches!(tokenize("x = $"), Err(SyntaxError::Lex { .. })));
    }

    #[test]
    fn string_escapes() {
        let toks = kinds(r#"s = "a\n\"b\x41""#);
        assert_eq!(
            toks[2],
            Tok::Str {
                value: "a\n\"bA".into(),
                prefix: String::new()
            }
        );
    }

    #[test]
    fn numbers() {
        let toks = kinds("1 2.5 1e3 .5 0x10 1_000");
        assert_eq!(toks[0], Tok::Int(1.into()));
        assert_eq!(toks[1], Tok::Float(2.5));
        assert_eq!(toks[2], Tok::Float(1000.0));
        assert_eq!(toks[3], Tok::Float(0.5));
        assert_eq!(toks[4], Tok::Int(16.into()));
        assert_eq!(toks[5], Tok::Int(1000.into()));
    }

    #[test]
    fn comments_and_blank_lines() {
        let toks = kinds("# header\n\nx = 1  # trailing\n\n   # indented comment\ny = 2\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Indent).count(), 0);
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 2);
    }
}
