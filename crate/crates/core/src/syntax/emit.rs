//! Deterministic source emission.
//!
//! Four-space indentation, double-quoted strings, minimal parentheses.
//! Top-level definitions are separated from their neighbours by exactly one
//! blank line, as are methods inside a class body.

use super::ast::*;

pub fn emit(module: &Module) -> String {
    let mut out = String::new();
    emit_block(&module.body, 0, true, &mut out);
    out
}

/// Emits a single statement at the given indentation level.
pub fn emit_stmt(stmt: &Stmt, level: usize) -> String {
    let mut out = String::new();
    stmt_into(stmt, level, &mut out);
    out
}

pub fn emit_expr(expr: &Expr) -> String {
    let mut out = String::new();
    expr_into(expr, 0, &mut out);
    out
}

fn is_definition(stmt: &Stmt) -> bool {
    match &stmt.kind {
        StmtKind::FunctionDef(_) | StmtKind::ClassDef(_) | StmtKind::MainGuard(_) => true,
        StmtKind::Unsupported(u) => u.text.contains('\n'),
        _ => false,
    }
}

fn emit_block(body: &[Stmt], level: usize, spaced: bool, out: &mut String) {
    if body.is_empty() {
        indent(level, out);
        out.push_str("pass\n");
        return;
    }
    for (i, stmt) in body.iter().enumerate() {
        if spaced && i > 0 && (is_definition(stmt) || is_definition(&body[i - 1])) {
            out.push('\n');
        }
        stmt_into(stmt, level, out);
    }
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn stmt_into(stmt: &Stmt, level: usize, out: &mut String) {
    match &stmt.kind {
        StmtKind::FunctionDef(def) => {
            indent(level, out);
            out.push_str("def ");
            out.push_str(&def.name);
            out.push('(');
            out.push_str(&def.params.join(", "));
            out.push_str("):\n");
            emit_block(&def.body, level + 1, false, out);
        }
        StmtKind::ClassDef(cls) => {
            indent(level, out);
            out.push_str("class ");
            out.push_str(&cls.name);
            out.push_str(":\n");
            emit_block(&cls.body, level + 1, true, out);
        }
        StmtKind::MainGuard(body) => {
            indent(level, out);
            out.push_str("if __name__ == \"__main__\":\n");
            emit_block(body, level + 1, false, out);
        }
        StmtKind::If { branches, orelse } => {
            for (i, (test, body)) in branches.iter().enumerate() {
                indent(level, out);
                out.push_str(if i == 0 { "if " } else { "elif " });
                expr_into(test, 0, out);
                out.push_str(":\n");
                emit_block(body, level + 1, false, out);
            }
            if let Some(body) = orelse {
                indent(level, out);
                out.push_str("else:\n");
                emit_block(body, level + 1, false, out);
            }
        }
        StmtKind::While { test, body } => {
            indent(level, out);
            out.push_str("while ");
            expr_into(test, 0, out);
            out.push_str(":\n");
            emit_block(body, level + 1, false, out);
        }
        StmtKind::ForRange { var, args, body } => {
            indent(level, out);
            out.push_str("for ");
            out.push_str(var);
            out.push_str(" in range(");
            comma_list(args, out);
            out.push_str("):\n");
            emit_block(body, level + 1, false, out);
        }
        StmtKind::Unsupported(u) => {
            for line in u.text.split('\n') {
                if !line.is_empty() {
                    indent(level, out);
                }
                out.push_str(line);
                out.push('\n');
            }
        }
        simple => {
            indent(level, out);
            match simple {
                StmtKind::Import(names) => {
                    out.push_str("import ");
                    out.push_str(&names.join(", "));
                }
                StmtKind::Assign { target, value } => {
                    expr_into(target, 0, out);
                    out.push_str(" = ");
                    expr_into(value, 0, out);
                }
                StmtKind::AugAssign { target, op, value } => {
                    expr_into(target, 0, out);
                    out.push(' ');
                    out.push_str(op.symbol());
                    out.push_str("= ");
                    expr_into(value, 0, out);
                }
                StmtKind::Return(None) => out.push_str("return"),
                StmtKind::Return(Some(e)) => {
                    out.push_str("return ");
                    expr_into(e, 0, out);
                }
                StmtKind::Global(names) => {
                    out.push_str("global ");
                    out.push_str(&names.join(", "));
                }
                StmtKind::Expr(e) => expr_into(e, 0, out),
                StmtKind::Pass => out.push_str("pass"),
                _ => unreachable!("compound statements handled above"),
            }
            out.push('\n');
        }
    }
}

// Binding strength, loosest first.
const P_OR: u8 = 1;
const P_AND: u8 = 2;
const P_NOT: u8 = 3;
const P_CMP: u8 = 4;
const P_ADD: u8 = 5;
const P_MUL: u8 = 6;
const P_UNARY: u8 = 7;
const P_POW: u8 = 8;
const P_ATOM: u8 = 9;

fn precedence(expr: &Expr) -> u8 {
    match &expr.kind {
        ExprKind::BoolOp(BoolOp::Or, ..) => P_OR,
        ExprKind::BoolOp(BoolOp::And, ..) => P_AND,
        ExprKind::Unary(UnaryOp::Not, _) => P_NOT,
        ExprKind::Compare(..) => P_CMP,
        ExprKind::BinOp(BinOp::Add | BinOp::Sub, ..) => P_ADD,
        ExprKind::BinOp(BinOp::Pow, ..) => P_POW,
        ExprKind::BinOp(..) => P_MUL,
        ExprKind::Unary(UnaryOp::Neg, _) => P_UNARY,
        // Raw text of an unsupported expression could be anything.
        ExprKind::Unsupported(_) => 0,
        _ => P_ATOM,
    }
}

fn comma_list(items: &[Expr], out: &mut String) {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr_into(e, 0, out);
    }
}

fn expr_into(expr: &Expr, min: u8, out: &mut String) {
    let prec = precedence(expr);
    let wrap = prec < min;
    if wrap {
        out.push('(');
    }
    match &expr.kind {
        ExprKind::Int(v) => {
            if v.sign() == num_bigint::Sign::Minus {
                out.push('(');
                out.push_str(&v.to_string());
                out.push(')');
            } else {
                out.push_str(&v.to_string());
            }
        }
        ExprKind::Float(v) => out.push_str(&float_repr(*v)),
        ExprKind::Str(s) => out.push_str(&quote(s)),
        ExprKind::Bool(true) => out.push_str("True"),
        ExprKind::Bool(false) => out.push_str("False"),
        ExprKind::None => out.push_str("None"),
        ExprKind::List(items) => {
            out.push('[');
            comma_list(items, out);
            out.push(']');
        }
        ExprKind::Tuple(items) => {
            out.push('(');
            comma_list(items, out);
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        ExprKind::Map(items) => {
            out.push('{');
            for (i, (k, v)) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&quote(k));
                out.push_str(": ");
                expr_into(v, 0, out);
            }
            out.push('}');
        }
        ExprKind::Name(n) => out.push_str(n),
        ExprKind::Attribute(base, name) => {
            if matches!(base.kind, ExprKind::Int(_)) {
                out.push('(');
                expr_into(base, 0, out);
                out.push(')');
            } else {
                expr_into(base, P_ATOM, out);
            }
            out.push('.');
            out.push_str(name);
        }
        ExprKind::Subscript(base, index) => {
            expr_into(base, P_ATOM, out);
            out.push('[');
            expr_into(index, 0, out);
            out.push(']');
        }
        ExprKind::Call(callee, args) => {
            expr_into(callee, P_ATOM, out);
            out.push('(');
            comma_list(args, out);
            out.push(')');
        }
        ExprKind::BinOp(op, left, right) => {
            let (lmin, rmin) = if *op == BinOp::Pow {
                (P_ATOM, P_UNARY)
            } else {
                (prec, prec + 1)
            };
            expr_into(left, lmin, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            expr_into(right, rmin, out);
        }
        ExprKind::Unary(UnaryOp::Neg, operand) => {
            out.push('-');
            expr_into(operand, P_UNARY, out);
        }
        ExprKind::Unary(UnaryOp::Not, operand) => {
            out.push_str("not ");
            expr_into(operand, P_NOT, out);
        }
        ExprKind::Compare(left, rest) => {
            expr_into(left, P_CMP + 1, out);
            for (op, e) in rest {
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                expr_into(e, P_CMP + 1, out);
            }
        }
        ExprKind::BoolOp(op, left, right) => {
            expr_into(left, prec, out);
            out.push_str(match op {
                BoolOp::And => " and ",
                BoolOp::Or => " or ",
            });
            expr_into(right, prec + 1, out);
        }
        ExprKind::Unsupported(u) => out.push_str(&u.text),
    }
    if wrap {
        out.push(')');
    }
}

/// Double-quoted string literal that the lexer reads back to `s`.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                out.push_str(&format!("\\x{:02x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Shortest round-trip representation in the subject language's style:
/// `1.0`, `0.1`, `1e+16`, `1.5e-05`, `inf`, `nan`.
pub fn float_repr(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{v:e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if (-4..16).contains(&exp) {
        if exp < 0 {
            out.push_str("0.");
            for _ in 0..(-exp - 1) {
                out.push('0');
            }
            out.push_str(&digits);
        } else {
            let point = exp as usize + 1;
            if digits.len() <= point {
                out.push_str(&digits);
                for _ in digits.len()..point {
                    out.push('0');
                }
                out.push_str(".0");
            } else {
                out.push_str(&digits[..point]);
                out.push('.');
                out.push_str(&digits[point..]);
            }
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push('e');
        out.push(if exp < 0 { '-' } else { '+' });
        out.push_str(&format!("{:02}", exp.abs()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_repr_matches_reference_style() {
        let cases = [
            (1.0, "1.0"),
            (0.1, "0.1"),
            (-2.5, "-2.5"),
            (100000.0, "100000.0"),
            (1e16, "1e+16"),
            (1.5e-5, "1.5e-05"),
            (0.0001, "0.0001"),
            (123456789.125, "123456789.125"),
            (1e22, "1e+22"),
            (-0.0, "-0.0"),
            (0.8414709848078965, "0.8414709848078965"),
            (f64::INFINITY, "inf"),
        ];
        for (v, want) in cases {
            assert_eq!(float_repr(v), want, "{v:e}");
        }
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a\"b\n"), r#""a\"b\n""#);
        assert_eq!(quote("\x01"), r#""\x01""#);
    }
}
