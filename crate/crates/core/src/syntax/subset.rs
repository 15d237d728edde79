//! Static feasibility checks: which parsed constructs fall outside the subset
//! that can be turned into hosted functions.

use std::fmt;

use super::ast::*;

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetViolation {
    pub span: SourceSpan,
    pub construct: String,
    pub message: String,
}

impl fmt::Display for SubsetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.construct, self.message)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Scope {
    Module,
    /// Control-flow blocks at module level, including the main guard.
    TopBlock,
    Function,
}

struct Checker {
    out: Vec<SubsetViolation>,
}

pub fn check_subset(tree: &Module) -> Vec<SubsetViolation> {
    let mut c = Checker { out: Vec::new() };
    c.block(&tree.body, Scope::Module);
    c.out.sort_by_key(|v| (v.span.offset, v.span.len));
    c.out
}

/// Literals and arithmetic over literals; the only initializers a replicated
/// global may have.
pub fn is_constant_expr(expr: &Expr) -> bool {
    match &expr.kind {
        ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::None => true,
        ExprKind::List(items) | ExprKind::Tuple(items) => items.iter().all(is_constant_expr),
        ExprKind::Map(items) => items.iter().all(|(_, v)| is_constant_expr(v)),
        ExprKind::BinOp(_, l, r) => is_constant_expr(l) && is_constant_expr(r),
        ExprKind::Unary(_, e) => is_constant_expr(e),
        _ => false,
    }
}

fn describe(construct: &str) -> &'static str {
    match construct {
        "anonymous function" => "inline anonymous functions cannot become hosted functions",
        "keyword argument" => "calls take positional arguments only",
        "star argument" => "argument unpacking is not supported",
        "default argument" => "parameters cannot have default values",
        "decorator" => "decorated definitions are not supported",
        "generator" => "generators are not supported",
        "comprehension" => "comprehensions are not supported",
        "exception handling" => "exceptions are not supported",
        "class inheritance" => "classes cannot have base classes",
        "nested definition" => "functions and classes must be defined at module or class level",
        "nested import" => "imports must appear at module level",
        "computed global" => "module-level assignments must have constant initializers",
        "class attribute" => "class bodies may only contain method definitions",
        "method without self" => "methods must take `self` as their first parameter",
        "return outside function" => "`return` is only valid inside a function",
        "computed callee" => "only named functions and methods can be called",
        "print as value" => "`print` may only be used as a statement",
        "input prompt" => "`input` takes no arguments",
        "global outside function" => "`global` is only valid inside a function",
        _ => "construct is outside the supported subset",
    }
}

impl Checker {
    fn flag(&mut self, span: SourceSpan, construct: &str) {
        self.out.push(SubsetViolation {
            span,
            construct: construct.to_string(),
            message: describe(construct).to_string(),
        });
    }

    fn block(&mut self, body: &[Stmt], scope: Scope) {
        for stmt in body {
            self.stmt(stmt, scope);
        }
    }

    fn function(&mut self, def: &FunctionDef) {
        self.block(&def.body, Scope::Function);
    }

    fn class(&mut self, cls: &ClassDef) {
        for stmt in &cls.body {
            match &stmt.kind {
                StmtKind::FunctionDef(def) => {
                    if def.params.first().map(String::as_str) != Some("self") {
                        self.flag(def.span, "method without self");
                    }
                    self.function(def);
                }
                StmtKind::Pass => {}
                StmtKind::Expr(Expr {
                    kind: ExprKind::Str(_), ..
                }) => {}
                StmtKind::Unsupported(u) => self.flag(stmt.span, &u.construct),
                _ => self.flag(stmt.span, "class attribute"),
            }
        }
    }

    fn stmt(&mut self, stmt: &Stmt, scope: Scope) {
        let nested = if scope == Scope::Function {
            Scope::Function
        } else {
            Scope::TopBlock
        };
        match &stmt.kind {
            StmtKind::FunctionDef(def) => {
                if scope != Scope::Module {
                    self.flag(stmt.span, "nested definition");
                }
                self.function(def);
            }
            StmtKind::ClassDef(cls) => {
                if scope != Scope::Module {
                    self.flag(stmt.span, "nested definition");
                }
                self.class(cls);
            }
            StmtKind::Import(_) => {
                if scope == Scope::Function {
                    self.flag(stmt.span, "nested import");
                }
            }
            StmtKind::Assign { target, value } => {
                if scope == Scope::Module && (target.as_name().is_none() || !is_constant_expr(value)) {
                    self.flag(stmt.span, "computed global");
                }
                self.expr(target);
                self.expr(value);
            }
            StmtKind::AugAssign { target, value, .. } => {
                self.expr(target);
                self.expr(value);
            }
            StmtKind::Return(value) => {
                if scope != Scope::Function {
                    self.flag(stmt.span, "return outside function");
                }
                if let Some(e) = value {
                    self.expr(e);
                }
            }
            StmtKind::If { branches, orelse } => {
                for (test, body) in branches {
                    self.expr(test);
                    self.block(body, nested);
                }
                if let Some(body) = orelse {
                    self.block(body, nested);
                }
            }
            StmtKind::While { test, body } => {
                self.expr(test);
                self.block(body, nested);
            }
            StmtKind::ForRange { args, body, .. } => {
                for a in args {
                    self.expr(a);
                }
                self.block(body, nested);
            }
            StmtKind::Global(_) => {
                if scope != Scope::Function {
                    self.flag(stmt.span, "global outside function");
                }
            }
            StmtKind::Expr(e) => match &e.kind {
                ExprKind::Call(callee, args) if callee.as_name() == Some("print") => {
                    for a in args {
                        self.expr(a);
                    }
                }
                _ => self.expr(e),
            },
            StmtKind::MainGuard(body) => self.block(body, Scope::TopBlock),
            StmtKind::Pass => {}
            StmtKind::Unsupported(u) => self.flag(stmt.span, &u.construct),
        }
    }

    fn expr(&mut self, expr: &Expr) {
        let mut found = Vec::new();
        walk_expr(expr, &mut |e| match &e.kind {
            ExprKind::Unsupported(u) => found.push((e.span, u.construct.clone())),
            ExprKind::Call(callee, args) => match &callee.kind {
                ExprKind::Name(n) if n == "print" => found.push((e.span, "print as value".to_string())),
                ExprKind::Name(n) if n == "input" && !args.is_empty() => {
                    found.push((e.span, "input prompt".to_string()))
                }
                ExprKind::Name(_) | ExprKind::Attribute(..) => {}
                ExprKind::Unsupported(_) => {}
                _ => found.push((e.span, "computed callee".to_string())),
            },
            _ => {}
        });
        for (span, construct) in found {
            self.flag(span, &construct);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn constructs(src: &str) -> Vec<String> {
        check_subset(&parse(src).unwrap())
            .into_iter()
            .map(|v| v.construct)
            .collect()
    }

    #[test]
    fn fibonacci_is_clean() {
        let src = "def fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n";
        assert!(constructs(src).is_empty());
    }

    #[test]
    fn anonymous_function() {
        assert_eq!(
            constructs("def f(x):\n    g = lambda y: y\n    return g\n"),
            vec!["anonymous function"]
        );
    }

    #[test]
    fn keyword_argument() {
        assert_eq!(
            constructs("def f(x):\n    return g(x, k=1)\n"),
            vec!["keyword argument"]
        );
    }

    #[test]
    fn assorted_violations_sorted_by_span() {
        let src = "import math\nx = math.sin(1)\ndef f(a=1):\n    return a\nclass C:\n    n = 1\n    def m(self):\n        def inner():\n            pass\n        return [i for i in range(3)]\n";
        assert_eq!(
            constructs(src),
            vec![
                "computed global",
                "default argument",
                "class attribute",
                "nested definition",
                "comprehension"
            ]
        );
    }

    #[test]
    fn print_rules() {
        assert!(constructs("print(1, 2)\n").is_empty());
        assert_eq!(constructs("def f():\n    x = print(1)\n"), vec!["print as value"]);
        assert_eq!(constructs("def f():\n    return input(\"? \")\n"), vec!["input prompt"]);
    }

    #[test]
    fn constant_globals_are_allowed() {
        assert!(constructs("a = 1\nb = [1, 2.5, \"x\"]\nc = -3 * 2\nd = {\"k\": None}\n").is_empty());
        assert_eq!(constructs("a = 1\nb = a\n"), vec!["computed global"]);
    }

    #[test]
    fn spans_index_into_text() {
        let src = "def f(x):\n    return g(x, key=1)\n";
        let v = &check_subset(&parse(src).unwrap())[0];
        assert_eq!(v.span.slice(src), Some("key=1"));
    }
}
