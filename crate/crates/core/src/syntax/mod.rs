//! Tokenizing, parsing, validating and re-emitting the supported language
//! subset.

pub mod ast;
mod emit;
mod lexer;
mod parser;
mod subset;

use std::path::Path;

use thiserror::Error;

pub use ast::{walk_expr, walk_expr_mut, walk_exprs, walk_exprs_mut, walk_stmt_exprs, walk_stmt_exprs_mut};
pub use ast::{
    BinOp, BoolOp, ClassDef, CmpOp, Expr, ExprKind, FunctionDef, Module, SourceSpan, Stmt, StmtKind, UnaryOp,
    Unsupported,
};
pub use emit::{emit, emit_expr, emit_stmt, float_repr, quote};
pub use parser::{parse, parse_expression};
pub use subset::{check_subset, is_constant_expr, SubsetViolation};

/// The syntax tree of the supported subset. A module is the root node.
pub type SyntaxTree = Module;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SyntaxError {
    #[error("{span}: lex error: {message}")]
    Lex { span: SourceSpan, message: String },
    #[error("{span}: parse error: {message}")]
    Parse { span: SourceSpan, message: String },
    #[error("invalid module name {0:?}")]
    InvalidModuleName(String),
}

impl SyntaxError {
    pub fn span(&self) -> Option<SourceSpan> {
        match self {
            SyntaxError::Lex { span, .. } | SyntaxError::Parse { span, .. } => Some(*span),
            SyntaxError::InvalidModuleName(_) => None,
        }
    }
}

/// A parsed source file.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModule {
    pub name: String,
    pub text: String,
    pub tree: Module,
}

impl SourceModule {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Result<Self, SyntaxError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(SyntaxError::InvalidModuleName(name));
        }
        let text = text.into();
        let tree = parse(&text)?;
        Ok(SourceModule { name, text, tree })
    }

    /// Module name for a file path: the file stem, with `.py` dropped.
    pub fn name_for_path(path: &Path) -> Option<String> {
        let file = path.file_name()?.to_str()?;
        Some(file.strip_suffix(".py").unwrap_or(file).to_string())
    }
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    const FIB: &str = "def fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n";

    fn strip(e: Expr) -> ExprKind {
        e.kind
    }

    #[test]
    fn parses_fibonacci_listing() {
        let tree = parse(FIB).unwrap();
        assert_eq!(tree.body.len(), 1);
        let StmtKind::FunctionDef(def) = &tree.body[0].kind else {
            panic!("expected a function definition")
        };
        assert_eq!(def.name, "fib");
        assert_eq!(def.params, vec!["x".to_string()]);
        assert!(matches!(def.body[0].kind, StmtKind::If { .. }));
        assert!(matches!(def.body[1].kind, StmtKind::Return(Some(_))));
    }

    #[test]
    fn empty_text_is_empty_module() {
        assert_eq!(parse("").unwrap().body.len(), 0);
    }

    #[test]
    fn assignment_then_print_matches_hand_built_tree() {
        let tree = parse("x = fib(10)\nprint(x)").unwrap();
        let expected = Module {
            body: vec![
                Stmt::new(StmtKind::Assign {
                    target: Expr::name("x"),
                    value: Expr::call(Expr::name("fib"), vec![Expr::new(ExprKind::Int(BigInt::from(10)))]),
                }),
                Stmt::new(StmtKind::Expr(Expr::call(Expr::name("print"), vec![Expr::name("x")]))),
            ],
        };
        assert_eq!(tree, expected);
    }

    #[test]
    fn main_guard_is_recognised_and_emitted() {
        let tree = parse("if __name__ == '__main__':\n    print(\"hi\")\n").unwrap();
        assert!(matches!(tree.body[0].kind, StmtKind::MainGuard(_)));
        let text = emit(&tree);
        assert!(text.contains("if __name__ == \"__main__\":\n"));
    }

    #[test]
    fn two_functions_are_separated_by_one_blank_line() {
        let tree = parse("def a():\n  return 1\ndef b():\n  return 2\n").unwrap();
        assert_eq!(emit(&tree), "def a():\n    return 1\n\ndef b():\n    return 2\n");
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("-2 ** 2").unwrap();
        assert!(matches!(strip(e), ExprKind::Unary(UnaryOp::Neg, _)));
        let e = parse_expression("2 ** 3 ** 2").unwrap();
        let ExprKind::BinOp(BinOp::Pow, _, right) = strip(e) else {
            panic!()
        };
        assert!(matches!(right.kind, ExprKind::BinOp(BinOp::Pow, ..)));
        let e = parse_expression("a - b - c").unwrap();
        let ExprKind::BinOp(BinOp::Sub, left, _) = strip(e) else {
            panic!()
        };
        assert!(matches!(left.kind, ExprKind::BinOp(BinOp::Sub, ..)));
    }

    #[test]
    fn emission_keeps_needed_parentheses() {
        for src in [
            "(a + b) * c",
            "a - (b - c)",
            "(-2) ** 2",
            "2 ** -1",
            "not (a and b)",
            "(a or b) and c",
            "(1, 2)",
            "(1,)",
            "f(x)[0].y",
            "a < b < c",
            "x not in (1, 2)",
        ] {
            let e = parse_expression(src).unwrap();
            let text = emit_expr(&e);
            assert_eq!(text, src);
            assert_eq!(parse_expression(&text).unwrap(), e);
        }
    }

    #[test]
    fn parse_errors_carry_spans() {
        let err = parse("def f(:\n    pass\n").unwrap_err();
        let span = err.span().unwrap();
        assert_eq!((span.line, span.column), (1, 7));
        assert!(parse("x = (1,\n").is_err());
        assert!(parse("  x = 1\n").is_err());
    }

    #[test]
    fn unsupported_constructs_round_trip() {
        let src = "f = lambda x: x + 1\ny = g(1, key=2)\n@dec\ndef h(a):\n    return a\n\ntry:\n    pass\nexcept E:\n    pass\n";
        let tree = parse(src).unwrap();
        let again = parse(&emit(&tree)).unwrap();
        assert_eq!(tree, again);
    }

    #[test]
    fn module_names() {
        assert!(SourceModule::new("fib", "").is_ok());
        assert!(matches!(
            SourceModule::new("1fib", ""),
            Err(SyntaxError::InvalidModuleName(_))
        ));
        assert_eq!(
            SourceModule::name_for_path(Path::new("examples/fib.py")).as_deref(),
            Some("fib")
        );
    }
}
