//! Recursive-descent parser over the token stream.
//!
//! Constructs outside the subset that are still valid in the full language
//! (lambdas, keyword arguments, decorators, comprehensions, `try`, ...) are
//! recognised and kept as [`Unsupported`] nodes carrying their original text,
//! so that the subset checker can report them with a precise span.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

pub fn parse(text: &str) -> Result<Module, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        text,
        tokens,
        pos: 0,
        depth: 0,
    };
    let mut body = Vec::new();
    while !p.at(&Tok::Eof) {
        if p.eat(&Tok::Newline) {
            continue;
        }
        body.extend(p.statement()?);
    }
    Ok(Module { body })
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    /// Block nesting; 0 is module level.
    depth: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_n(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> SourceSpan {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Keyword(k) if *k == kw)
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::Parse {
            span: self.span(),
            message: message.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        let found = match self.peek() {
            Tok::Name(n) => format!("name '{n}'"),
            Tok::Keyword(k) => format!("keyword '{k}'"),
            Tok::Int(_) | Tok::Float(_) => "number".to_string(),
            Tok::Str { .. } => "string".to_string(),
            Tok::Op(o) => format!("'{o}'"),
            Tok::Newline => "end of line".to_string(),
            Tok::Indent => "indent".to_string(),
            Tok::Dedent => "dedent".to_string(),
            Tok::Eof => "end of input".to_string(),
        };
        self.error(format!("expected {wanted}, found {found}"))
    }

    fn expect_op(&mut self, op: &str) -> PResult<SourceSpan> {
        if self.at_op(op) {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("'{op}'")))
        }
    }

    fn expect_name(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Name(n) => {
                let span = self.advance().span;
                Ok((n, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        if self.eat(&Tok::Newline) || self.at(&Tok::Eof) {
            Ok(())
        } else {
            Err(self.unexpected("end of line"))
        }
    }

    // ----- raw capture of unsupported constructs -----

    /// Skips tokens until the bracket opened just before the current position
    /// is closed. The closing bracket is consumed.
    fn skip_balanced(&mut self) -> PResult<()> {
        let mut depth = 1usize;
        loop {
            match self.peek() {
                Tok::Op("(") | Tok::Op("[") | Tok::Op("{") => depth += 1,
                Tok::Op(")") | Tok::Op("]") | Tok::Op("}") => {
                    depth -= 1;
                    if depth == 0 {
                        self.advance();
                        return Ok(());
                    }
                }
                Tok::Eof => return Err(self.error("unclosed bracket")),
                _ => {}
            }
            self.advance();
        }
    }

    /// Skips the rest of the logical line and, if an indented block follows,
    /// the whole block. Returns the end offset of the last token consumed.
    fn skip_line_and_block(&mut self) -> PResult<usize> {
        let mut end = self.prev_span().end();
        while !matches!(self.peek(), Tok::Newline | Tok::Eof) {
            end = self.advance().span.end();
        }
        self.eat(&Tok::Newline);
        if self.at(&Tok::Indent) {
            let mut depth = 0usize;
            loop {
                match self.peek() {
                    Tok::Indent => depth += 1,
                    Tok::Dedent => {
                        depth -= 1;
                        if depth == 0 {
                            self.advance();
                            break;
                        }
                    }
                    Tok::Eof => break,
                    Tok::Newline => {}
                    _ => end = self.span().end(),
                }
                self.advance();
            }
        }
        Ok(end)
    }

    /// Raw source text between `start` and `end`, with continuation lines
    /// dedented by the indentation of the first line.
    fn raw(&self, start: SourceSpan, end: usize) -> String {
        let text = &self.text[start.offset..end];
        let indent = (start.column - 1) as usize;
        let mut out = String::new();
        for (i, line) in text.split('\n').enumerate() {
            if i > 0 {
                out.push('\n');
                let strip = line
                    .char_indices()
                    .take_while(|(j, c)| *c == ' ' && *j < indent)
                    .count();
                out.push_str(&line[strip..]);
            } else {
                out.push_str(line);
            }
        }
        out.trim_end().to_string()
    }

    fn unsupported_stmt(&self, construct: &str, start: SourceSpan, end: usize) -> Stmt {
        Stmt {
            span: SourceSpan::new(start.offset, end - start.offset, start.line, start.column),
            kind: StmtKind::Unsupported(Unsupported {
                construct: construct.to_string(),
                text: self.raw(start, end),
            }),
        }
    }

    fn unsupported_expr(&self, construct: &str, start: SourceSpan) -> Expr {
        let end = self.prev_span().end();
        Expr {
            span: SourceSpan::new(start.offset, end - start.offset, start.line, start.column),
            kind: ExprKind::Unsupported(Unsupported {
                construct: construct.to_string(),
                text: self.raw(start, end),
            }),
        }
    }

    // ----- statements -----

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let start = self.span();
        match self.peek() {
            Tok::Keyword("def") => Ok(vec![self.function_def()?]),
            Tok::Keyword("class") => Ok(vec![self.class_def()?]),
            Tok::Keyword("if") => Ok(vec![self.if_stmt()?]),
            Tok::Keyword("while") => Ok(vec![self.while_stmt()?]),
            Tok::Keyword("for") => Ok(vec![self.for_stmt()?]),
            Tok::Keyword("try") => {
                let mut end = self.skip_line_and_block()?;
                while self.at_kw("except") || self.at_kw("else") || self.at_kw("finally") {
                    end = self.skip_line_and_block()?;
                }
                Ok(vec![self.unsupported_stmt("exception handling", start, end)])
            }
            Tok::Keyword("with") => {
                let end = self.skip_line_and_block()?;
                Ok(vec![self.unsupported_stmt("with statement", start, end)])
            }
            Tok::Keyword("async") => {
                let end = self.skip_line_and_block()?;
                Ok(vec![self.unsupported_stmt("async", start, end)])
            }
            Tok::Op("@") => {
                while self.at_op("@") {
                    while !matches!(self.peek(), Tok::Newline | Tok::Eof) {
                        self.advance();
                    }
                    self.eat(&Tok::Newline);
                }
                if !(self.at_kw("def") || self.at_kw("class")) {
                    return Err(self.unexpected("'def' or 'class' after decorator"));
                }
                let end = self.skip_line_and_block()?;
                Ok(vec![self.unsupported_stmt("decorator", start, end)])
            }
            Tok::Indent => Err(self.error("unexpected indent")),
            _ => self.simple_statements(),
        }
    }

    fn simple_statements(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.simple_statement()?];
        while self.eat_op(";") {
            if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                break;
            }
            out.push(self.simple_statement()?);
        }
        self.expect_newline()?;
        Ok(out)
    }

    fn simple_statement(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let raw_line = |p: &mut Parser, construct: &str| -> PResult<Stmt> {
            let mut end = p.span().end();
            while !matches!(p.peek(), Tok::Newline | Tok::Eof | Tok::Op(";")) {
                end = p.advance().span.end();
            }
            Ok(p.unsupported_stmt(construct, start, end))
        };
        match self.peek() {
            Tok::Keyword("pass") => {
                self.advance();
                Ok(Stmt {
                    kind: StmtKind::Pass,
                    span: start,
                })
            }
            Tok::Keyword("return") => {
                self.advance();
                let value = if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Op(";")) {
                    None
                } else {
                    Some(self.testlist()?)
                };
                Ok(Stmt {
                    kind: StmtKind::Return(value),
                    span: start.to(self.prev_span()),
                })
            }
            Tok::Keyword("global") => {
                self.advance();
                let mut names = vec![self.expect_name()?.0];
                while self.eat_op(",") {
                    names.push(self.expect_name()?.0);
                }
                Ok(Stmt {
                    kind: StmtKind::Global(names),
                    span: start.to(self.prev_span()),
                })
            }
            Tok::Keyword("import") => {
                self.advance();
                let mut names = Vec::new();
                loop {
                    let (name, _) = self.expect_name()?;
                    if self.at_op(".") {
                        return raw_line(self, "dotted import");
                    }
                    if self.at_kw("as") {
                        return raw_line(self, "import alias");
                    }
                    names.push(name);
                    if !self.eat_op(",") {
                        break;
                    }
                }
                Ok(Stmt {
                    kind: StmtKind::Import(names),
                    span: start.to(self.prev_span()),
                })
            }
            Tok::Keyword("from") => raw_line(self, "from import"),
            Tok::Keyword("break") => raw_line(self, "break statement"),
            Tok::Keyword("continue") => raw_line(self, "continue statement"),
            Tok::Keyword("del") => raw_line(self, "del statement"),
            Tok::Keyword("raise") => raw_line(self, "exception handling"),
            Tok::Keyword("assert") => raw_line(self, "assert statement"),
            Tok::Keyword("nonlocal") => raw_line(self, "nonlocal declaration"),
            Tok::Keyword("yield") => raw_line(self, "generator"),
            _ => self.expr_statement(),
        }
    }

    fn expr_statement(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let first = self.testlist()?;
        if self.at_op(":") {
            let mut end = self.span().end();
            while !matches!(self.peek(), Tok::Newline | Tok::Eof) {
                end = self.advance().span.end();
            }
            return Ok(self.unsupported_stmt("annotation", start, end));
        }
        if self.at_op("=") {
            self.advance();
            let value = self.testlist()?;
            if self.at_op("=") {
                let mut end = self.prev_span().end();
                while !matches!(self.peek(), Tok::Newline | Tok::Eof) {
                    end = self.advance().span.end();
                }
                return Ok(self.unsupported_stmt("chained assignment", start, end));
            }
            if matches!(first.kind, ExprKind::Tuple(_) | ExprKind::List(_)) {
                let end = self.prev_span().end();
                return Ok(self.unsupported_stmt("tuple unpacking", start, end));
            }
            Self::check_target(&first)?;
            return Ok(Stmt {
                kind: StmtKind::Assign { target: first, value },
                span: start.to(self.prev_span()),
            });
        }
        let aug = match self.peek() {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("/=") => Some(BinOp::Div),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            _ => None,
        };
        if let Some(op) = aug {
            self.advance();
            Self::check_target(&first)?;
            let value = self.testlist()?;
            return Ok(Stmt {
                kind: StmtKind::AugAssign {
                    target: first,
                    op,
                    value,
                },
                span: start.to(self.prev_span()),
            });
        }
        Ok(Stmt {
            kind: StmtKind::Expr(first),
            span: start.to(self.prev_span()),
        })
    }

    fn check_target(target: &Expr) -> PResult<()> {
        match target.kind {
            ExprKind::Name(_) | ExprKind::Attribute(..) | ExprKind::Subscript(..) => Ok(()),
            ExprKind::Unsupported(_) => Ok(()),
            _ => Err(SyntaxError::Parse {
                span: target.span,
                message: "cannot assign to expression".to_string(),
            }),
        }
    }

    /// `:` followed by an indented block or simple statements on one line.
    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_op(":")?;
        if !self.eat(&Tok::Newline) {
            return self.simple_statements();
        }
        if !self.eat(&Tok::Indent) {
            return Err(self.unexpected("an indented block"));
        }
        self.depth += 1;
        let mut body = Vec::new();
        while !self.at(&Tok::Dedent) && !self.at(&Tok::Eof) {
            if self.eat(&Tok::Newline) {
                continue;
            }
            body.extend(self.statement()?);
        }
        self.eat(&Tok::Dedent);
        self.depth -= 1;
        Ok(body)
    }

    fn function_def(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let header = self.pos;
        self.advance();
        let (name, _) = self.expect_name()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        let mut unsupported = None;
        while !self.at_op(")") {
            match self.peek().clone() {
                Tok::Name(n) => {
                    self.advance();
                    params.push(n);
                }
                Tok::Op("*") | Tok::Op("**") => {
                    unsupported.get_or_insert("star argument");
                    self.advance();
                    continue;
                }
                Tok::Op("/") => {
                    unsupported.get_or_insert("positional-only marker");
                    self.advance();
                }
                _ => return Err(self.unexpected("parameter name")),
            }
            if self.at_op("=") {
                unsupported.get_or_insert("default argument");
                self.skip_argument_tail();
            } else if self.at_op(":") {
                unsupported.get_or_insert("annotation");
                self.skip_argument_tail();
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        if self.at_op("->") {
            unsupported.get_or_insert("annotation");
        }
        if let Some(construct) = unsupported {
            self.pos = header;
            let end = self.skip_line_and_block()?;
            return Ok(self.unsupported_stmt(construct, start, end));
        }
        let body = self.block()?;
        let span = start.to(self.prev_span());
        Ok(Stmt {
            kind: StmtKind::FunctionDef(FunctionDef {
                name,
                params,
                body,
                span,
            }),
            span,
        })
    }

    /// Skips a default value or annotation inside a parameter list, stopping
    /// before the next top-level `,` or the closing `)`.
    fn skip_argument_tail(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Op("(") | Tok::Op("[") | Tok::Op("{") => depth += 1,
                Tok::Op(")") | Tok::Op("]") | Tok::Op("}") => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                }
                Tok::Op(",") if depth == 0 => return,
                Tok::Eof => return,
                _ => {}
            }
            self.advance();
        }
    }

    fn class_def(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let header = self.pos;
        self.advance();
        let (name, _) = self.expect_name()?;
        if self.eat_op("(") && !self.eat_op(")") {
            self.pos = header;
            let end = self.skip_line_and_block()?;
            return Ok(self.unsupported_stmt("class inheritance", start, end));
        }
        let body = self.block()?;
        let span = start.to(self.prev_span());
        Ok(Stmt {
            kind: StmtKind::ClassDef(ClassDef { name, body, span }),
            span,
        })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        self.advance();
        let test = self.test()?;
        let body = self.block()?;
        let mut branches = vec![(test, body)];
        let mut orelse = None;
        loop {
            if self.eat_kw("elif") {
                let test = self.test()?;
                let body = self.block()?;
                branches.push((test, body));
            } else if self.eat_kw("else") {
                orelse = Some(self.block()?);
                break;
            } else {
                break;
            }
        }
        let span = start.to(self.prev_span());
        if self.depth == 0 && branches.len() == 1 && orelse.is_none() && is_main_test(&branches[0].0) {
            let (_, body) = branches.pop().unwrap();
            return Ok(Stmt {
                kind: StmtKind::MainGuard(body),
                span,
            });
        }
        Ok(Stmt {
            kind: StmtKind::If { branches, orelse },
            span,
        })
    }

    fn while_stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        self.advance();
        let test = self.test()?;
        let body = self.block()?;
        if self.at_kw("else") {
            let end = self.skip_line_and_block()?;
            return Ok(self.unsupported_stmt("loop else clause", start, end));
        }
        Ok(Stmt {
            kind: StmtKind::While { test, body },
            span: start.to(self.prev_span()),
        })
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let header = self.pos;
        self.advance();
        let simple = matches!(self.peek(), Tok::Name(_))
            && matches!(self.peek_n(1), Tok::Keyword("in"))
            && matches!(self.peek_n(2), Tok::Name(n) if n == "range")
            && matches!(self.peek_n(3), Tok::Op("("));
        if !simple {
            self.pos = header;
            let end = self.skip_line_and_block()?;
            return Ok(self.unsupported_stmt("non-range loop", start, end));
        }
        let (var, _) = self.expect_name()?;
        self.advance(); // in
        self.advance(); // range
        self.advance(); // (
        let mut args = Vec::new();
        while !self.at_op(")") {
            args.push(self.call_argument()?);
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        if !self.at_op(":") {
            self.pos = header;
            let end = self.skip_line_and_block()?;
            return Ok(self.unsupported_stmt("non-range loop", start, end));
        }
        let body = self.block()?;
        if self.at_kw("else") {
            let end = self.skip_line_and_block()?;
            return Ok(self.unsupported_stmt("loop else clause", start, end));
        }
        Ok(Stmt {
            kind: StmtKind::ForRange { var, args, body },
            span: start.to(self.prev_span()),
        })
    }

    // ----- expressions -----

    fn testlist(&mut self) -> PResult<Expr> {
        let start = self.span();
        let first = self.test()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_testlist_end() {
                break;
            }
            items.push(self.test()?);
        }
        Ok(Expr {
            kind: ExprKind::Tuple(items),
            span: start.to(self.prev_span()),
        })
    }

    fn at_testlist_end(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Newline | Tok::Eof | Tok::Op("=") | Tok::Op(")") | Tok::Op(";") | Tok::Op(":")
        ) || matches!(self.peek(), Tok::Op(o) if o.ends_with('=') && o.len() >= 2 && *o != "==" && *o != "!=" && *o != "<=" && *o != ">=")
    }

    pub(crate) fn test(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.at_kw("lambda") {
            while !self.at_op(":") {
                if self.at(&Tok::Eof) || self.at(&Tok::Newline) {
                    return Err(self.unexpected("':' in lambda"));
                }
                self.advance();
            }
            self.advance();
            self.test()?;
            return Ok(self.unsupported_expr("anonymous function", start));
        }
        let expr = self.or_test()?;
        if self.at_kw("if") {
            self.advance();
            self.or_test()?;
            if !self.eat_kw("else") {
                return Err(self.unexpected("'else' in conditional expression"));
            }
            self.test()?;
            return Ok(self.unsupported_expr("conditional expression", start));
        }
        Ok(expr)
    }

    fn or_test(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut left = self.and_test()?;
        while self.eat_kw("or") {
            let right = self.and_test()?;
            left = Expr {
                kind: ExprKind::BoolOp(BoolOp::Or, Box::new(left), Box::new(right)),
                span: start.to(self.prev_span()),
            };
        }
        Ok(left)
    }

    fn and_test(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut left = self.not_test()?;
        while self.eat_kw("and") {
            let right = self.not_test()?;
            left = Expr {
                kind: ExprKind::BoolOp(BoolOp::And, Box::new(left), Box::new(right)),
                span: start.to(self.prev_span()),
            };
        }
        Ok(left)
    }

    fn not_test(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.eat_kw("not") {
            let operand = self.not_test()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Not, Box::new(operand)),
                span: start.to(self.prev_span()),
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let start = self.span();
        let left = self.arith()?;
        let mut rest = Vec::new();
        let mut identity = false;
        loop {
            let op = match self.peek() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::NotEq,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::LtE,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::GtE,
                Tok::Keyword("in") => CmpOp::In,
                Tok::Keyword("not") if matches!(self.peek_n(1), Tok::Keyword("in")) => {
                    self.advance();
                    CmpOp::NotIn
                }
                Tok::Keyword("is") => {
                    identity = true;
                    self.advance();
                    self.eat_kw("not");
                    self.arith()?;
                    continue;
                }
                _ => break,
            };
            self.advance();
            rest.push((op, self.arith()?));
        }
        if identity {
            return Ok(self.unsupported_expr("identity comparison", start));
        }
        if rest.is_empty() {
            return Ok(left);
        }
        Ok(Expr {
            kind: ExprKind::Compare(Box::new(left), rest),
            span: start.to(self.prev_span()),
        })
    }

    fn arith(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let right = self.term()?;
            left = Expr {
                kind: ExprKind::BinOp(op, Box::new(left), Box::new(right)),
                span: start.to(self.prev_span()),
            };
        }
        Ok(left)
    }

    fn term(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut left = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let right = self.factor()?;
            left = Expr {
                kind: ExprKind::BinOp(op, Box::new(left), Box::new(right)),
                span: start.to(self.prev_span()),
            };
        }
        Ok(left)
    }

    fn factor(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.eat_op("-") {
            let operand = self.factor()?;
            return Ok(Expr {
                kind: ExprKind::Unary(UnaryOp::Neg, Box::new(operand)),
                span: start.to(self.prev_span()),
            });
        }
        if self.eat_op("+") {
            self.factor()?;
            return Ok(self.unsupported_expr("unary plus", start));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let start = self.span();
        let base = self.primary()?;
        if self.eat_op("**") {
            let exponent = self.factor()?;
            return Ok(Expr {
                kind: ExprKind::BinOp(BinOp::Pow, Box::new(base), Box::new(exponent)),
                span: start.to(self.prev_span()),
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let mut expr = self.atom()?;
        loop {
            if self.eat_op("(") {
                let mut args = Vec::new();
                while !self.at_op(")") {
                    args.push(self.call_argument()?);
                    if self.at_kw("for") {
                        self.skip_balanced()?;
                        return Ok(self.unsupported_expr("comprehension", start));
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op(")")?;
                expr = Expr {
                    kind: ExprKind::Call(Box::new(expr), args),
                    span: start.to(self.prev_span()),
                };
            } else if self.eat_op("[") {
                if self.at_op(":") {
                    self.skip_balanced()?;
                    return Ok(self.unsupported_expr("slice", start));
                }
                let index = self.testlist()?;
                if self.at_op(":") {
                    self.skip_balanced()?;
                    return Ok(self.unsupported_expr("slice", start));
                }
                self.expect_op("]")?;
                expr = Expr {
                    kind: ExprKind::Subscript(Box::new(expr), Box::new(index)),
                    span: start.to(self.prev_span()),
                };
            } else if self.eat_op(".") {
                let (name, _) = self.expect_name()?;
                expr = Expr {
                    kind: ExprKind::Attribute(Box::new(expr), name),
                    span: start.to(self.prev_span()),
                };
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn call_argument(&mut self) -> PResult<Expr> {
        let start = self.span();
        if self.at_op("*") || self.at_op("**") {
            self.advance();
            self.test()?;
            return Ok(self.unsupported_expr("star argument", start));
        }
        if matches!(self.peek(), Tok::Name(_)) && matches!(self.peek_n(1), Tok::Op("=")) {
            self.advance();
            self.advance();
            self.test()?;
            return Ok(self.unsupported_expr("keyword argument", start));
        }
        self.test()
    }

    fn atom(&mut self) -> PResult<Expr> {
        let start = self.span();
        let simple = |kind: ExprKind| Expr { kind, span: start };
        match self.peek().clone() {
            Tok::Name(n) => {
                self.advance();
                Ok(simple(ExprKind::Name(n)))
            }
            Tok::Int(v) => {
                self.advance();
                Ok(simple(ExprKind::Int(v)))
            }
            Tok::Float(v) => {
                self.advance();
                Ok(simple(ExprKind::Float(v)))
            }
            Tok::Str { .. } => {
                let mut value = String::new();
                let mut prefixed = false;
                while let Tok::Str { value: v, prefix } = self.peek().clone() {
                    prefixed |= !prefix.is_empty();
                    value.push_str(&v);
                    self.advance();
                }
                if prefixed {
                    return Ok(self.unsupported_expr("string prefix", start));
                }
                Ok(Expr {
                    kind: ExprKind::Str(value),
                    span: start.to(self.prev_span()),
                })
            }
            Tok::Keyword("True") => {
                self.advance();
                Ok(simple(ExprKind::Bool(true)))
            }
            Tok::Keyword("False") => {
                self.advance();
                Ok(simple(ExprKind::Bool(false)))
            }
            Tok::Keyword("None") => {
                self.advance();
                Ok(simple(ExprKind::None))
            }
            Tok::Keyword("await") => {
                self.advance();
                self.primary()?;
                Ok(self.unsupported_expr("async", start))
            }
            Tok::Keyword("yield") => Err(self.error("'yield' outside parentheses")),
            Tok::Op("...") => {
                self.advance();
                Ok(self.unsupported_expr("ellipsis", start))
            }
            Tok::Op("(") => {
                self.advance();
                if self.eat_op(")") {
                    return Ok(Expr {
                        kind: ExprKind::Tuple(Vec::new()),
                        span: start.to(self.prev_span()),
                    });
                }
                if self.at_kw("yield") {
                    self.skip_balanced()?;
                    return Ok(self.unsupported_expr("generator", start));
                }
                let first = self.test()?;
                if self.at_kw("for") {
                    self.skip_balanced()?;
                    return Ok(self.unsupported_expr("comprehension", start));
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op(")") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op(")")?;
                Ok(Expr {
                    kind: ExprKind::Tuple(items),
                    span: start.to(self.prev_span()),
                })
            }
            Tok::Op("[") => {
                self.advance();
                let mut items = Vec::new();
                while !self.at_op("]") {
                    items.push(self.test()?);
                    if self.at_kw("for") {
                        self.skip_balanced()?;
                        return Ok(self.unsupported_expr("comprehension", start));
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op("]")?;
                Ok(Expr {
                    kind: ExprKind::List(items),
                    span: start.to(self.prev_span()),
                })
            }
            Tok::Op("{") => {
                self.advance();
                let mut items = Vec::new();
                while !self.at_op("}") {
                    if self.at_op("**") {
                        self.skip_balanced()?;
                        return Ok(self.unsupported_expr("star argument", start));
                    }
                    let key = self.test()?;
                    if !self.at_op(":") {
                        self.skip_balanced()?;
                        return Ok(self.unsupported_expr("set literal", start));
                    }
                    self.advance();
                    let value = self.test()?;
                    if self.at_kw("for") {
                        self.skip_balanced()?;
                        return Ok(self.unsupported_expr("comprehension", start));
                    }
                    match key.kind {
                        ExprKind::Str(k) => items.push((k, value)),
                        _ => {
                            if !self.at_op("}") {
                                self.skip_balanced()?;
                            } else {
                                self.advance();
                            }
                            return Ok(self.unsupported_expr("non-string map key", start));
                        }
                    }
                    if !self.eat_op(",") {
                        break;
                    }
                }
                self.expect_op("}")?;
                Ok(Expr {
                    kind: ExprKind::Map(items),
                    span: start.to(self.prev_span()),
                })
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// `__name__ == "__main__"`
fn is_main_test(test: &Expr) -> bool {
    match &test.kind {
        ExprKind::Compare(left, rest) if rest.len() == 1 => {
            left.as_name() == Some("__name__")
                && rest[0].0 == CmpOp::Eq
                && matches!(&rest[0].1.kind, ExprKind::Str(s) if s == "__main__")
        }
        _ => false,
    }
}

/// Parses a single expression (used for benchmark labels such as `fib(10)`).
pub fn parse_expression(text: &str) -> Result<Expr, SyntaxError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        text,
        tokens,
        pos: 0,
        depth: 0,
    };
    let expr = p.testlist()?;
    p.eat(&Tok::Newline);
    if !p.at(&Tok::Eof) {
        return Err(p.unexpected("end of expression"));
    }
    Ok(expr)
}
