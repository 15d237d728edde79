//! Typed syntax tree for the supported language subset.
//!
//! Spans never take part in equality: two trees compare equal when their
//! structure and literal contents agree, regardless of where in the text they
//! came from. This is what makes `parse(emit(t)) == t` a meaningful check.

use std::fmt;

use num_bigint::BigInt;

/// Location of a node in the text it was parsed from.
///
/// `offset` and `len` are byte offsets into the original text, `line` and
/// `column` are 1-based (column counts characters).
#[derive(Clone, Copy, Default)]
pub struct SourceSpan {
    pub offset: usize,
    pub len: usize,
    pub line: u32,
    pub column: u32,
}

impl SourceSpan {
    pub fn new(offset: usize, len: usize, line: u32, column: u32) -> Self {
        SourceSpan {
            offset,
            len,
            line,
            column,
        }
    }

    /// Span covering `self` through the end of `other`.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        let end = (other.offset + other.len).max(self.offset + self.len);
        SourceSpan {
            len: end - self.offset,
            ..self
        }
    }

    pub fn end(&self) -> usize {
        self.offset + self.len
    }

    /// The slice of `text` this span covers, if it lies inside `text`.
    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        text.get(self.offset..self.end())
    }
}

impl PartialEq for SourceSpan {
    fn eq(&self, _other: &SourceSpan) -> bool {
        true
    }
}

impl fmt::Debug for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}+{}", self.line, self.column, self.len)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Module {
    pub body: Vec<Stmt>,
}

impl Module {
    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.body.iter().filter_map(|s| match &s.kind {
            StmtKind::FunctionDef(f) => Some(f),
            _ => None,
        })
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.body.iter().filter_map(|s| match &s.kind {
            StmtKind::ClassDef(c) => Some(c),
            _ => None,
        })
    }

    pub fn main_guard(&self) -> Option<&Stmt> {
        self.body.iter().find(|s| matches!(s.kind, StmtKind::MainGuard(_)))
    }

    /// Module names introduced by top-level `import` statements, in order,
    /// including imports nested in top-level control flow.
    pub fn imports(&self) -> Vec<String> {
        fn walk(body: &[Stmt], out: &mut Vec<String>) {
            for stmt in body {
                match &stmt.kind {
                    StmtKind::Import(names) => {
                        for n in names {
                            if !out.contains(n) {
                                out.push(n.clone());
                            }
                        }
                    }
                    StmtKind::If { branches, orelse } => {
                        for (_, b) in branches {
                            walk(b, out);
                        }
                        if let Some(b) = orelse {
                            walk(b, out);
                        }
                    }
                    StmtKind::While { body, .. } | StmtKind::ForRange { body, .. } | StmtKind::MainGuard(body) => {
                        walk(body, out)
                    }
                    _ => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            span: SourceSpan::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Import(Vec<String>),
    FunctionDef(FunctionDef),
    ClassDef(ClassDef),
    Assign {
        target: Expr,
        value: Expr,
    },
    AugAssign {
        target: Expr,
        op: BinOp,
        value: Expr,
    },
    Return(Option<Expr>),
    /// `if`/`elif` branches in order, then the optional `else` block.
    If {
        branches: Vec<(Expr, Vec<Stmt>)>,
        orelse: Option<Vec<Stmt>>,
    },
    While {
        test: Expr,
        body: Vec<Stmt>,
    },
    /// `for var in range(args...)`
    ForRange {
        var: String,
        args: Vec<Expr>,
        body: Vec<Stmt>,
    },
    Global(Vec<String>),
    Expr(Expr),
    /// The `if __name__ == "__main__":` block.
    MainGuard(Vec<Stmt>),
    Pass,
    Unsupported(Unsupported),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub name: String,
    pub body: Vec<Stmt>,
    pub span: SourceSpan,
}

impl ClassDef {
    pub fn methods(&self) -> impl Iterator<Item = &FunctionDef> {
        self.body.iter().filter_map(|s| match &s.kind {
            StmtKind::FunctionDef(f) => Some(f),
            _ => None,
        })
    }

    pub fn method(&self, name: &str) -> Option<&FunctionDef> {
        self.methods().find(|m| m.name == name)
    }
}

/// A construct outside the subset. The original text is kept so the tree
/// still emits and re-parses to the same node.
#[derive(Debug, Clone, PartialEq)]
pub struct Unsupported {
    pub construct: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Expr {
        Expr {
            kind,
            span: SourceSpan::default(),
        }
    }

    pub fn name(n: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Name(n.into()))
    }

    pub fn str(s: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Str(s.into()))
    }

    pub fn int(v: i64) -> Expr {
        Expr::new(ExprKind::Int(BigInt::from(v)))
    }

    pub fn attr(base: Expr, attr: impl Into<String>) -> Expr {
        Expr::new(ExprKind::Attribute(Box::new(base), attr.into()))
    }

    pub fn call(callee: Expr, args: Vec<Expr>) -> Expr {
        Expr::new(ExprKind::Call(Box::new(callee), args))
    }

    pub fn subscript(base: Expr, index: Expr) -> Expr {
        Expr::new(ExprKind::Subscript(Box::new(base), Box::new(index)))
    }

    pub fn binop(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::new(ExprKind::BinOp(op, Box::new(left), Box::new(right)))
    }

    pub fn as_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Name(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(BigInt),
    Float(f64),
    Str(String),
    Bool(bool),
    None,
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    /// Dictionary display; keys are string literals.
    Map(Vec<(String, Expr)>),
    Name(String),
    Attribute(Box<Expr>, String),
    Subscript(Box<Expr>, Box<Expr>),
    Call(Box<Expr>, Vec<Expr>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnaryOp, Box<Expr>),
    /// Chained comparison: `left op0 e0 op1 e1 ...`
    Compare(Box<Expr>, Vec<(CmpOp, Expr)>),
    BoolOp(BoolOp, Box<Expr>, Box<Expr>),
    Unsupported(Unsupported),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    In,
    NotIn,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
}

/// Depth-first visit of every expression under `stmts`, including nested
/// blocks and function/class bodies.
pub fn walk_exprs<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Expr)) {
    for stmt in stmts {
        walk_stmt_exprs(stmt, f);
    }
}

pub fn walk_stmt_exprs<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(&'a Expr)) {
    match &stmt.kind {
        StmtKind::FunctionDef(def) => walk_exprs(&def.body, f),
        StmtKind::ClassDef(cls) => walk_exprs(&cls.body, f),
        StmtKind::Assign { target, value } | StmtKind::AugAssign { target, value, .. } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) => walk_expr(e, f),
        StmtKind::If { branches, orelse } => {
            for (test, body) in branches {
                walk_expr(test, f);
                walk_exprs(body, f);
            }
            if let Some(body) = orelse {
                walk_exprs(body, f);
            }
        }
        StmtKind::While { test, body } => {
            walk_expr(test, f);
            walk_exprs(body, f);
        }
        StmtKind::ForRange { args, body, .. } => {
            for a in args {
                walk_expr(a, f);
            }
            walk_exprs(body, f);
        }
        StmtKind::MainGuard(body) => walk_exprs(body, f),
        StmtKind::Return(None)
        | StmtKind::Import(_)
        | StmtKind::Global(_)
        | StmtKind::Pass
        | StmtKind::Unsupported(_) => {}
    }
}

pub fn walk_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(expr);
    match &expr.kind {
        ExprKind::List(items) | ExprKind::Tuple(items) => {
            for e in items {
                walk_expr(e, f);
            }
        }
        ExprKind::Map(items) => {
            for (_, e) in items {
                walk_expr(e, f);
            }
        }
        ExprKind::Attribute(base, _) => walk_expr(base, f),
        ExprKind::Subscript(base, index) => {
            walk_expr(base, f);
            walk_expr(index, f);
        }
        ExprKind::Call(callee, args) => {
            walk_expr(callee, f);
            for a in args {
                walk_expr(a, f);
            }
        }
        ExprKind::BinOp(_, l, r) | ExprKind::BoolOp(_, l, r) => {
            walk_expr(l, f);
            walk_expr(r, f);
        }
        ExprKind::Unary(_, e) => walk_expr(e, f),
        ExprKind::Compare(left, rest) => {
            walk_expr(left, f);
            for (_, e) in rest {
                walk_expr(e, f);
            }
        }
        ExprKind::Int(_)
        | ExprKind::Float(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::None
        | ExprKind::Name(_)
        | ExprKind::Unsupported(_) => {}
    }
}

/// Mutable counterpart of [`walk_exprs`]; the callback runs after children
/// have been visited (post-order), so it may replace the node it is given.
pub fn walk_exprs_mut(stmts: &mut [Stmt], f: &mut dyn FnMut(&mut Expr)) {
    for stmt in stmts {
        walk_stmt_exprs_mut(stmt, f);
    }
}

pub fn walk_stmt_exprs_mut(stmt: &mut Stmt, f: &mut dyn FnMut(&mut Expr)) {
    match &mut stmt.kind {
        StmtKind::FunctionDef(def) => walk_exprs_mut(&mut def.body, f),
        StmtKind::ClassDef(cls) => walk_exprs_mut(&mut cls.body, f),
        StmtKind::Assign { target, value } | StmtKind::AugAssign { target, value, .. } => {
            walk_expr_mut(target, f);
            walk_expr_mut(value, f);
        }
        StmtKind::Return(Some(e)) | StmtKind::Expr(e) => walk_expr_mut(e, f),
        StmtKind::If { branches, orelse } => {
            for (test, body) in branches {
                walk_expr_mut(test, f);
                walk_exprs_mut(body, f);
            }
            if let Some(body) = orelse {
                walk_exprs_mut(body, f);
            }
        }
        StmtKind::While { test, body } => {
            walk_expr_mut(test, f);
            walk_exprs_mut(body, f);
        }
        StmtKind::ForRange { args, body, .. } => {
            for a in args {
                walk_expr_mut(a, f);
            }
            walk_exprs_mut(body, f);
        }
        StmtKind::MainGuard(body) => walk_exprs_mut(body, f),
        StmtKind::Return(None)
        | StmtKind::Import(_)
        | StmtKind::Global(_)
        | StmtKind::Pass
        | StmtKind::Unsupported(_) => {}
    }
}

pub fn walk_expr_mut(expr: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
    match &mut expr.kind {
        ExprKind::List(items) | ExprKind::Tuple(items) => {
            for e in items {
                walk_expr_mut(e, f);
            }
        }
        ExprKind::Map(items) => {
            for (_, e) in items {
                walk_expr_mut(e, f);
            }
        }
        ExprKind::Attribute(base, _) => walk_expr_mut(base, f),
        ExprKind::Subscript(base, index) => {
            walk_expr_mut(base, f);
            walk_expr_mut(index, f);
        }
        ExprKind::Call(callee, args) => {
            walk_expr_mut(callee, f);
            for a in args {
                walk_expr_mut(a, f);
            }
        }
        ExprKind::BinOp(_, l, r) | ExprKind::BoolOp(_, l, r) => {
            walk_expr_mut(l, f);
            walk_expr_mut(r, f);
        }
        ExprKind::Unary(_, e) => walk_expr_mut(e, f),
        ExprKind::Compare(left, rest) => {
            walk_expr_mut(left, f);
            for (_, e) in rest {
                walk_expr_mut(e, f);
            }
        }
        ExprKind::Int(_)
        | ExprKind::Float(_)
        | ExprKind::Str(_)
        | ExprKind::Bool(_)
        | ExprKind::None
        | ExprKind::Name(_)
        | ExprKind::Unsupported(_) => {}
    }
    f(expr);
}
