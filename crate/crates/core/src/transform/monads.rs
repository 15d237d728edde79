//! Print and input monads: inside a unit, output accumulates in a string
//! global and input lines come from a list global, both carried in the
//! event and the response.

use crate::interp::RUNTIME_MODULE;
use crate::syntax::{emit, walk_exprs, walk_exprs_mut, BinOp, Expr, ExprKind, Stmt, StmtKind};

use super::FunctionUnit;

pub const STDOUT: &str = "_faas_stdout";
pub const STDIN: &str = "_faas_stdin";

fn is_call_to(e: &Expr, name: &str) -> bool {
    matches!(&e.kind, ExprKind::Call(callee, _) if callee.as_name() == Some(name))
}

fn uses_builtin_io(body: &[Stmt]) -> bool {
    let mut found = false;
    walk_exprs(body, &mut |e| found |= is_call_to(e, "print") || is_call_to(e, "input"));
    found
}

/// `print(a, b)` as the string it writes.
fn print_text(args: Vec<Expr>) -> Expr {
    let mut parts = args.into_iter().map(|a| Expr::call(Expr::name("str"), vec![a]));
    let Some(first) = parts.next() else {
        return Expr::str("\n");
    };
    let joined = parts.fold(first, |acc, p| {
        Expr::binop(BinOp::Add, Expr::binop(BinOp::Add, acc, Expr::str(" ")), p)
    });
    Expr::binop(BinOp::Add, joined, Expr::str("\n"))
}

/// Rewrites print statements in `body`, nested blocks included. Returns
/// whether any were found.
fn rewrite_prints(body: &mut [Stmt]) -> bool {
    let mut found = false;
    for stmt in body.iter_mut() {
        match &mut stmt.kind {
            StmtKind::Expr(e) if is_call_to(e, "print") => {
                let ExprKind::Call(_, args) = std::mem::replace(&mut e.kind, ExprKind::None) else {
                    unreachable!()
                };
                stmt.kind = StmtKind::AugAssign {
                    target: Expr::name(STDOUT),
                    op: BinOp::Add,
                    value: print_text(args),
                };
                found = true;
            }
            StmtKind::If { branches, orelse } => {
                for (_, b) in branches {
                    found |= rewrite_prints(b);
                }
                if let Some(b) = orelse {
                    found |= rewrite_prints(b);
                }
            }
            StmtKind::While { body, .. } | StmtKind::ForRange { body, .. } | StmtKind::MainGuard(body) => {
                found |= rewrite_prints(body)
            }
            _ => {}
        }
    }
    found
}

fn declares(body: &[Stmt], name: &str) -> bool {
    body.iter()
        .any(|s| matches!(&s.kind, StmtKind::Global(names) if names.iter().any(|n| n == name)))
}

fn rewrite_function(def: &mut crate::syntax::FunctionDef) {
    let printed = rewrite_prints(&mut def.body);
    walk_exprs_mut(&mut def.body, &mut |e| {
        if is_call_to(e, "input") {
            *e = Expr {
                span: e.span,
                ..Expr::call(
                    Expr::attr(Expr::name(RUNTIME_MODULE), "read_line"),
                    vec![Expr::name(STDIN)],
                )
            };
        }
    });
    let uses_stdout = printed || {
        let mut f = false;
        walk_exprs(&def.body, &mut |e| f |= e.as_name() == Some(STDOUT));
        f
    };
    let assigns_stdout = printed
        || def
            .body
            .iter()
            .any(|s| matches!(&s.kind, StmtKind::AugAssign { target, .. } if target.as_name() == Some(STDOUT)));
    if uses_stdout && assigns_stdout && !declares(&def.body, STDOUT) {
        def.body
            .insert(0, Stmt::new(StmtKind::Global(vec![STDOUT.to_string()])));
    }
}

fn initializes(body: &[Stmt], name: &str) -> bool {
    body.iter()
        .any(|s| matches!(&s.kind, StmtKind::Assign { target, .. } if target.as_name() == Some(name)))
}

/// Adds the monad globals to a unit and routes its print statements and
/// `input()` calls through them. Applying it twice changes nothing.
pub fn inject_io_monads(mut unit: FunctionUnit) -> FunctionUnit {
    let needed = unit.io_flags.uses_print || unit.io_flags.uses_input || uses_builtin_io(&unit.tree.body);
    if !needed {
        return unit;
    }
    let body = &mut unit.tree.body;
    for stmt in body.iter_mut() {
        match &mut stmt.kind {
            StmtKind::FunctionDef(def) => rewrite_function(def),
            StmtKind::ClassDef(cls) => {
                for s in cls.body.iter_mut() {
                    if let StmtKind::FunctionDef(def) = &mut s.kind {
                        rewrite_function(def);
                    }
                }
            }
            _ => {}
        }
    }
    if !initializes(body, STDOUT) {
        let at = body
            .iter()
            .position(|s| !matches!(s.kind, StmtKind::Import(_) | StmtKind::Assign { .. }))
            .unwrap_or(body.len());
        body.insert(
            at,
            Stmt::new(StmtKind::Assign {
                target: Expr::name(STDIN),
                value: Expr::new(ExprKind::List(vec![])),
            }),
        );
        body.insert(
            at,
            Stmt::new(StmtKind::Assign {
                target: Expr::name(STDOUT),
                value: Expr::str(""),
            }),
        );
    }
    unit.source = emit(&unit.tree);
    unit
}
