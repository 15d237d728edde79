//! Tree-walking evaluator for the subset.
//!
//! One [`Interpreter`] is a single-threaded environment: its module globals,
//! stdout buffer and stdin queue. All methods take `&self` so a handler can
//! re-enter the environment it is running in, which is what happens when a
//! local-mode unit calls itself recursively through its own stub.

mod json;
mod local;
mod shim;
mod value;

use std::cell::{Cell, RefCell};
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::rc::Rc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use thiserror::Error;

use crate::syntax::{
    BinOp, BoolOp, ClassDef, CmpOp, Expr, ExprKind, FunctionDef, Module, SourceModule, SourceSpan, Stmt, StmtKind,
    UnaryOp,
};

pub use json::{from_json, from_json_text, to_json, to_json_lossy, to_json_text, JsonError};
pub use local::LocalRuntime;
pub use shim::{DispatchError, Dispatcher};
pub use value::{str_repr, Builtin, Class, Function, Int, ModuleId, Object, Value};

/// Deepest chain of active user-function calls on one thread.
pub const RECURSION_LIMIT: usize = 1000;
/// The wall clock is consulted once per this many evaluation steps.
const CLOCK_EVERY: u64 = 1024;
/// Stack reserved for threads that run interpreted code.
pub const STACK_SIZE: usize = 256 << 20;

pub const SYSTEM_MODULES: &[&str] = &["math"];
pub const RUNTIME_MODULE: &str = "faas_runtime";

/// Every `faas_runtime.invoke` made in this process, by any interpreter.
pub static INVOCATIONS: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Type,
    Name,
    Attribute,
    Index,
    Key,
    Value,
    ZeroDivision,
    Overflow,
    StdinExhausted,
    Recursion,
    Import,
    Unsupported,
    Timeout,
    StepLimit,
    /// A failure reported by another unit.
    Remote,
}

impl ErrorKind {
    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Type => "TypeError",
            ErrorKind::Name => "NameError",
            ErrorKind::Attribute => "AttributeError",
            ErrorKind::Index => "IndexError",
            ErrorKind::Key => "KeyError",
            ErrorKind::Value => "ValueError",
            ErrorKind::ZeroDivision => "ZeroDivisionError",
            ErrorKind::Overflow => "OverflowError",
            ErrorKind::StdinExhausted => "EOFError",
            ErrorKind::Recursion => "RecursionError",
            ErrorKind::Import => "ImportError",
            ErrorKind::Unsupported => "SyntaxError",
            ErrorKind::Timeout => "Timeout",
            ErrorKind::StepLimit => "StepLimitExceeded",
            ErrorKind::Remote => "RemoteError",
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{}{}: {message}", span.map(|s| format!("{s}: ")).unwrap_or_default(), kind.label())]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub message: String,
    pub span: Option<SourceSpan>,
}

impl RuntimeError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        RuntimeError {
            kind,
            message: message.into(),
            span: None,
        }
    }

    fn at(mut self, span: SourceSpan) -> Self {
        if self.span.is_none() {
            self.span = Some(span);
        }
        self
    }

    /// Whether this error means a budget ran out rather than the program
    /// failing.
    pub fn is_budget(&self) -> bool {
        matches!(self.kind, ErrorKind::Timeout | ErrorKind::StepLimit)
    }
}

type Res<T> = Result<T, RuntimeError>;

fn err<T>(kind: ErrorKind, message: impl Into<String>) -> Res<T> {
    Err(RuntimeError::new(kind, message))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Limits {
    pub max_steps: Option<u64>,
    pub timeout: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecResult {
    /// JSON view of the returned value; `null` for a whole-module run.
    pub return_value: serde_json::Value,
    pub stdout: String,
    pub call_count: u64,
    pub step_count: u64,
    /// Qualified names of every user function entered; empty unless tracing
    /// was requested.
    pub called: BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub stdin: Vec<String>,
    pub limits: Limits,
    /// Evaluate this expression in the entry module instead of running it as
    /// the main module.
    pub call: Option<Expr>,
    pub trace_calls: bool,
}

/// Runs `module` as the main program.
pub fn run_module(module: &SourceModule, stdin: Vec<String>, limits: Limits) -> Res<ExecResult> {
    run_program(
        std::slice::from_ref(module),
        &module.name,
        RunOptions {
            stdin,
            limits,
            ..RunOptions::default()
        },
    )
}

/// Runs the module named `entry` with the other modules importable, on a
/// thread with a deep stack.
pub fn run_program(modules: &[SourceModule], entry: &str, options: RunOptions) -> Res<ExecResult> {
    let modules = modules.to_vec();
    let entry = entry.to_string();
    on_big_stack(move || {
        let interp = Interpreter::new();
        for m in &modules {
            interp.add_source(&m.name, m.tree.clone());
        }
        interp.set_stdin(options.stdin);
        interp.set_limits(options.limits);
        interp.set_tracing(options.trace_calls);
        let value = match &options.call {
            None => {
                interp.run_main(&entry)?;
                Value::None
            }
            Some(expr) => {
                let id = interp.import(&entry)?;
                interp.eval_in(id, expr)?
            }
        };
        Ok(ExecResult {
            return_value: to_json_lossy(&value),
            stdout: interp.take_stdout(),
            call_count: interp.call_count(),
            step_count: interp.step_count(),
            called: interp.called(),
        })
    })
}

/// Runs `f` on a fresh thread with [`STACK_SIZE`] of stack and waits for it.
pub fn on_big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new()
        .name("interp".into())
        .stack_size(STACK_SIZE)
        .spawn(f)
        .expect("spawn interpreter thread")
        .join()
        .unwrap_or_else(|e| std::panic::resume_unwind(e))
}

thread_local! {
    static DEPTH: Cell<usize> = const { Cell::new(0) };
}

struct DepthGuard;

impl DepthGuard {
    fn enter() -> Res<DepthGuard> {
        DEPTH.with(|d| {
            if d.get() >= RECURSION_LIMIT {
                return err(ErrorKind::Recursion, "maximum recursion depth exceeded");
            }
            d.set(d.get() + 1);
            Ok(DepthGuard)
        })
    }
}

impl Drop for DepthGuard {
    fn drop(&mut self) {
        DEPTH.with(|d| d.set(d.get() - 1));
    }
}

pub struct ModuleEnv {
    pub name: String,
    globals: RefCell<HashMap<String, Value>>,
}

impl ModuleEnv {
    pub fn get(&self, name: &str) -> Option<Value> {
        self.globals.borrow().get(name).cloned()
    }

    pub fn set(&self, name: &str, value: Value) {
        self.globals.borrow_mut().insert(name.to_string(), value);
    }
}

enum Flow {
    Normal,
    Return(Value),
}

struct Frame<'a> {
    module: ModuleId,
    /// `None` at module level, where every name is global.
    locals: Option<HashMap<String, Value>>,
    declared_global: Option<&'a HashSet<String>>,
}

#[derive(Default)]
pub struct Interpreter {
    sources: RefCell<HashMap<String, Rc<Module>>>,
    modules: RefCell<Vec<Rc<ModuleEnv>>>,
    by_name: RefCell<HashMap<String, ModuleId>>,
    stdout: RefCell<String>,
    stdin: RefCell<VecDeque<String>>,
    calls: Cell<u64>,
    steps: Cell<u64>,
    max_steps: Cell<Option<u64>>,
    deadline: Cell<Option<Instant>>,
    dispatcher: RefCell<Option<Rc<dyn Dispatcher>>>,
    trace: RefCell<Option<BTreeSet<String>>>,
}

impl Interpreter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes `tree` importable as `name`. Replaces an earlier source of the
    /// same name that has not been imported yet.
    pub fn add_source(&self, name: &str, tree: Module) {
        self.sources.borrow_mut().insert(name.to_string(), Rc::new(tree));
    }

    pub fn set_dispatcher(&self, dispatcher: Rc<dyn Dispatcher>) {
        *self.dispatcher.borrow_mut() = Some(dispatcher);
    }

    pub fn set_stdin(&self, lines: Vec<String>) {
        *self.stdin.borrow_mut() = lines.into();
    }

    pub fn set_limits(&self, limits: Limits) {
        self.max_steps.set(limits.max_steps);
        self.deadline.set(limits.timeout.map(|t| Instant::now() + t));
    }

    pub fn set_tracing(&self, on: bool) {
        *self.trace.borrow_mut() = on.then(BTreeSet::new);
    }

    pub fn take_stdout(&self) -> String {
        std::mem::take(&mut *self.stdout.borrow_mut())
    }

    pub fn call_count(&self) -> u64 {
        self.calls.get()
    }

    pub fn step_count(&self) -> u64 {
        self.steps.get()
    }

    pub fn called(&self) -> BTreeSet<String> {
        self.trace.borrow().clone().unwrap_or_default()
    }

    pub fn module(&self, id: ModuleId) -> Rc<ModuleEnv> {
        self.modules.borrow()[id.0].clone()
    }

    /// Runs `f` with the wall-clock deadline tightened to `timeout` from now.
    pub fn with_timeout<T>(&self, timeout: Option<Duration>, f: impl FnOnce() -> T) -> T {
        let outer = self.deadline.get();
        if let Some(t) = timeout {
            let mine = Instant::now() + t;
            self.deadline.set(Some(outer.map_or(mine, |o| o.min(mine))));
        }
        let out = f();
        self.deadline.set(outer);
        out
    }

    /// Executes the module's top level with `__name__` set to `"__main__"`.
    pub fn run_main(&self, name: &str) -> Res<ModuleId> {
        self.load(name, "__main__")
    }

    /// Imports a module, executing its top level on first use.
    pub fn import(&self, name: &str) -> Res<ModuleId> {
        if let Some(id) = self.by_name.borrow().get(name) {
            return Ok(*id);
        }
        self.load(name, name)
    }

    fn load(&self, name: &str, dunder_name: &str) -> Res<ModuleId> {
        let env = Rc::new(ModuleEnv {
            name: name.to_string(),
            globals: RefCell::new(HashMap::new()),
        });
        env.set("__name__", Value::str(dunder_name));
        let native = match name {
            "math" => Some(vec![Builtin::MathSin]),
            RUNTIME_MODULE => Some(vec![
                Builtin::Invoke,
                Builtin::Emit,
                Builtin::Stdin,
                Builtin::SetStdin,
                Builtin::State,
                Builtin::LoadState,
                Builtin::Without,
                Builtin::Restore,
                Builtin::CallMethod,
                Builtin::ReadLine,
            ]),
            _ => None,
        };
        let tree = match native {
            Some(members) => {
                for b in members {
                    env.set(b.name(), Value::Builtin(b));
                }
                None
            }
            None => match self.sources.borrow().get(name) {
                Some(tree) => Some(tree.clone()),
                None => return err(ErrorKind::Import, format!("No module named '{name}'")),
            },
        };
        let id = {
            let mut modules = self.modules.borrow_mut();
            modules.push(env);
            ModuleId(modules.len() - 1)
        };
        self.by_name.borrow_mut().insert(name.to_string(), id);
        if let Some(tree) = tree {
            let mut frame = Frame {
                module: id,
                locals: None,
                declared_global: None,
            };
            self.exec_block(&tree.body, &mut frame)?;
        }
        Ok(id)
    }

    /// Evaluates an expression against a module's globals.
    pub fn eval_in(&self, module: ModuleId, expr: &Expr) -> Res<Value> {
        let mut frame = Frame {
            module,
            locals: None,
            declared_global: None,
        };
        self.eval(expr, &mut frame)
    }

    /// Calls the module-level function `name` with positional arguments.
    pub fn call_global(&self, module: ModuleId, name: &str, args: Vec<Value>) -> Res<Value> {
        let env = self.module(module);
        match env.get(name) {
            Some(f) => self.call_value(f, args),
            None => err(
                ErrorKind::Name,
                format!("name '{name}' is not defined in module '{}'", env.name),
            ),
        }
    }

    /// Runs `handler(event, {})` from the already-imported unit module and
    /// returns the serialized response, or an error payload.
    pub fn handle_event(&self, unit: &str, handler: &str, event: &str) -> String {
        let run = || -> Res<String> {
            let event = from_json_text(event).map_err(|e| RuntimeError::new(ErrorKind::Value, e.to_string()))?;
            let id = self.import(unit)?;
            let response = self.call_global(id, handler, vec![event, Value::map(IndexMap::new())])?;
            to_json_text(&response).map_err(|e| RuntimeError::new(ErrorKind::Type, e.to_string()))
        };
        run().unwrap_or_else(|e| error_payload(&e))
    }

    fn tick(&self) -> Res<()> {
        let n = self.steps.get() + 1;
        self.steps.set(n);
        if let Some(max) = self.max_steps.get() {
            if n > max {
                return err(ErrorKind::StepLimit, format!("step budget of {max} exhausted"));
            }
        }
        if n.is_multiple_of(CLOCK_EVERY) {
            if let Some(deadline) = self.deadline.get() {
                if Instant::now() >= deadline {
                    return err(ErrorKind::Timeout, "time budget exhausted");
                }
            }
        }
        Ok(())
    }

    fn exec_block(&self, body: &[Stmt], frame: &mut Frame) -> Res<Flow> {
        for stmt in body {
            if let Flow::Return(v) = self.exec(stmt, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&self, stmt: &Stmt, frame: &mut Frame) -> Res<Flow> {
        self.tick().map_err(|e| e.at(stmt.span))?;
        match &stmt.kind {
            StmtKind::Import(names) => {
                for name in names {
                    let id = self.import(name).map_err(|e| e.at(stmt.span))?;
                    self.assign_name(name, Value::Module(id, Rc::from(name.as_str())), frame);
                }
            }
            StmtKind::FunctionDef(def) => {
                let module = self.module(frame.module);
                let f = make_function(def, frame.module, &module.name, None);
                self.assign_name(&def.name, Value::Function(f), frame);
            }
            StmtKind::ClassDef(cls) => {
                let module = self.module(frame.module);
                let c = make_class(cls, frame.module, &module.name).map_err(|e| e.at(stmt.span))?;
                self.assign_name(&cls.name, Value::Class(c), frame);
            }
            StmtKind::Assign { target, value } => {
                let v = self.eval(value, frame)?;
                self.assign(target, v, frame)?;
            }
            StmtKind::AugAssign { target, op, value } => self.aug_assign(target, *op, value, frame)?,
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, frame)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::If { branches, orelse } => {
                for (test, body) in branches {
                    if self.eval(test, frame)?.truthy() {
                        return self.exec_block(body, frame);
                    }
                }
                if let Some(body) = orelse {
                    return self.exec_block(body, frame);
                }
            }
            StmtKind::While { test, body } => {
                while self.eval(test, frame)?.truthy() {
                    if let Flow::Return(v) = self.exec_block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::ForRange { var, args, body } => {
                let mut bounds = Vec::with_capacity(args.len());
                for a in args {
                    let v = self.eval(a, frame)?;
                    let i = match &v {
                        Value::Int(_) | Value::Bool(_) => v.as_int().and_then(|i| i.to_i64()),
                        _ => {
                            return Err(RuntimeError::new(
                                ErrorKind::Type,
                                format!("'{}' object cannot be interpreted as an integer", v.type_name()),
                            )
                            .at(a.span))
                        }
                    };
                    bounds.push(
                        i.ok_or_else(|| RuntimeError::new(ErrorKind::Overflow, "range bound too large").at(a.span))?,
                    );
                }
                let (start, stop, step) = match bounds[..] {
                    [stop] => (0, stop, 1),
                    [start, stop] => (start, stop, 1),
                    [start, stop, step] => (start, stop, step),
                    _ => {
                        return Err(RuntimeError::new(
                            ErrorKind::Type,
                            format!("range expected 1 to 3 arguments, got {}", bounds.len()),
                        )
                        .at(stmt.span))
                    }
                };
                if step == 0 {
                    return Err(RuntimeError::new(ErrorKind::Value, "range() arg 3 must not be zero").at(stmt.span));
                }
                let mut i = start;
                while (step > 0 && i < stop) || (step < 0 && i > stop) {
                    self.assign_name(var, Value::int(i), frame);
                    if let Flow::Return(v) = self.exec_block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                    i = match i.checked_add(step) {
                        Some(n) => n,
                        None => break,
                    };
                }
            }
            StmtKind::Global(_) | StmtKind::Pass => {}
            StmtKind::Expr(e) => {
                self.eval(e, frame)?;
            }
            StmtKind::MainGuard(body) => {
                let is_main = matches!(
                    self.module(frame.module).get("__name__"),
                    Some(Value::Str(s)) if &*s == "__main__"
                );
                if is_main {
                    return self.exec_block(body, frame);
                }
            }
            StmtKind::Unsupported(u) => {
                return Err(
                    RuntimeError::new(ErrorKind::Unsupported, format!("{} is not supported", u.construct))
                        .at(stmt.span),
                )
            }
        }
        Ok(Flow::Normal)
    }

    fn assign_name(&self, name: &str, value: Value, frame: &mut Frame) {
        let global = frame.declared_global.is_some_and(|g| g.contains(name));
        match &mut frame.locals {
            Some(locals) if !global => {
                locals.insert(name.to_string(), value);
            }
            _ => self.module(frame.module).set(name, value),
        }
    }

    fn lookup(&self, name: &str, frame: &Frame) -> Res<Value> {
        if let Some(locals) = &frame.locals {
            if let Some(v) = locals.get(name) {
                return Ok(v.clone());
            }
        }
        if let Some(v) = self.module(frame.module).get(name) {
            return Ok(v);
        }
        match Builtin::global(name) {
            Some(b) => Ok(Value::Builtin(b)),
            None => err(ErrorKind::Name, format!("name '{name}' is not defined")),
        }
    }

    fn assign(&self, target: &Expr, value: Value, frame: &mut Frame) -> Res<()> {
        match &target.kind {
            ExprKind::Name(n) => {
                self.assign_name(n, value, frame);
                Ok(())
            }
            ExprKind::Attribute(base, attr) => {
                let obj = self.eval(base, frame)?;
                set_attr(&obj, attr, value).map_err(|e| e.at(target.span))
            }
            ExprKind::Subscript(base, index) => {
                let container = self.eval(base, frame)?;
                let index = self.eval(index, frame)?;
                set_item(&container, &index, value).map_err(|e| e.at(target.span))
            }
            _ => err(ErrorKind::Unsupported, "cannot assign to expression").map_err(|e| e.at(target.span)),
        }
    }

    fn aug_assign(&self, target: &Expr, op: BinOp, value: &Expr, frame: &mut Frame) -> Res<()> {
        match &target.kind {
            ExprKind::Name(n) => {
                let old = self.lookup(n, frame).map_err(|e| e.at(target.span))?;
                let rhs = self.eval(value, frame)?;
                let new = binary(op, &old, &rhs).map_err(|e| e.at(target.span))?;
                self.assign_name(n, new, frame);
                Ok(())
            }
            ExprKind::Attribute(base, attr) => {
                let obj = self.eval(base, frame)?;
                let old = get_attr(&obj, attr, self).map_err(|e| e.at(target.span))?;
                let rhs = self.eval(value, frame)?;
                let new = binary(op, &old, &rhs).map_err(|e| e.at(target.span))?;
                set_attr(&obj, attr, new).map_err(|e| e.at(target.span))
            }
            ExprKind::Subscript(base, index) => {
                let container = self.eval(base, frame)?;
                let index = self.eval(index, frame)?;
                let old = get_item(&container, &index).map_err(|e| e.at(target.span))?;
                let rhs = self.eval(value, frame)?;
                let new = binary(op, &old, &rhs).map_err(|e| e.at(target.span))?;
                set_item(&container, &index, new).map_err(|e| e.at(target.span))
            }
            _ => err(ErrorKind::Unsupported, "cannot assign to expression").map_err(|e| e.at(target.span)),
        }
    }

    fn eval(&self, expr: &Expr, frame: &mut Frame) -> Res<Value> {
        self.tick().map_err(|e| e.at(expr.span))?;
        let at = |e: RuntimeError| e.at(expr.span);
        Ok(match &expr.kind {
            ExprKind::Int(v) => Value::Int(Int::from(v)),
            ExprKind::Float(v) => Value::Float(*v),
            ExprKind::Str(s) => Value::str(s),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::None => Value::None,
            ExprKind::List(items) => Value::list(self.eval_all(items, frame)?),
            ExprKind::Tuple(items) => Value::Tuple(Rc::from(self.eval_all(items, frame)?)),
            ExprKind::Map(items) => {
                let mut map = IndexMap::with_capacity(items.len());
                for (k, v) in items {
                    let v = self.eval(v, frame)?;
                    map.insert(k.clone(), v);
                }
                Value::map(map)
            }
            ExprKind::Name(n) => self.lookup(n, frame).map_err(at)?,
            ExprKind::Attribute(base, attr) => {
                let obj = self.eval(base, frame)?;
                get_attr(&obj, attr, self).map_err(at)?
            }
            ExprKind::Subscript(base, index) => {
                let container = self.eval(base, frame)?;
                let index = self.eval(index, frame)?;
                get_item(&container, &index).map_err(at)?
            }
            ExprKind::Call(callee, args) => {
                if let ExprKind::Attribute(base, name) = &callee.kind {
                    let receiver = self.eval(base, frame)?;
                    let args = self.eval_all(args, frame)?;
                    return self.call_method_on(&receiver, name, args).map_err(at);
                }
                let f = self.eval(callee, frame)?;
                let args = self.eval_all(args, frame)?;
                self.call_value(f, args).map_err(at)?
            }
            ExprKind::BinOp(op, l, r) => {
                let l = self.eval(l, frame)?;
                let r = self.eval(r, frame)?;
                binary(*op, &l, &r).map_err(at)?
            }
            ExprKind::Unary(UnaryOp::Not, e) => Value::Bool(!self.eval(e, frame)?.truthy()),
            ExprKind::Unary(UnaryOp::Neg, e) => {
                let v = self.eval(e, frame)?;
                match v {
                    Value::Float(f) => Value::Float(-f),
                    Value::Int(_) | Value::Bool(_) => Value::Int(v.as_int().expect("integral").neg()),
                    other => {
                        return Err(at(RuntimeError::new(
                            ErrorKind::Type,
                            format!("bad operand type for unary -: '{}'", other.type_name()),
                        )))
                    }
                }
            }
            ExprKind::Compare(first, rest) => {
                let mut left = self.eval(first, frame)?;
                for (op, e) in rest {
                    let right = self.eval(e, frame)?;
                    if !compare(*op, &left, &right).map_err(at)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            ExprKind::BoolOp(op, l, r) => {
                let l = self.eval(l, frame)?;
                match (op, l.truthy()) {
                    (BoolOp::And, false) | (BoolOp::Or, true) => l,
                    _ => self.eval(r, frame)?,
                }
            }
            ExprKind::Unsupported(u) => {
                return Err(at(RuntimeError::new(
                    ErrorKind::Unsupported,
                    format!("{} is not supported", u.construct),
                )))
            }
        })
    }

    fn eval_all(&self, items: &[Expr], frame: &mut Frame) -> Res<Vec<Value>> {
        let mut out = Vec::with_capacity(items.len());
        for e in items {
            out.push(self.eval(e, frame)?);
        }
        Ok(out)
    }

    fn call_method_on(&self, receiver: &Value, name: &str, args: Vec<Value>) -> Res<Value> {
        match receiver {
            Value::Object(obj) => {
                if let Some(v) = obj.attrs.borrow().get(name).cloned() {
                    drop(obj.attrs.borrow());
                    return self.call_value(v, args);
                }
                match obj.class.methods.get(name) {
                    Some(m) => {
                        let mut full = Vec::with_capacity(args.len() + 1);
                        full.push(receiver.clone());
                        full.extend(args);
                        self.call_function(m, full)
                    }
                    None => err(
                        ErrorKind::Attribute,
                        format!("'{}' object has no attribute '{name}'", obj.class.name),
                    ),
                }
            }
            Value::Class(cls) => match cls.methods.get(name) {
                Some(m) => self.call_function(m, args),
                None => err(
                    ErrorKind::Attribute,
                    format!("type object '{}' has no attribute '{name}'", cls.name),
                ),
            },
            other => {
                let f = get_attr(other, name, self)?;
                self.call_value(f, args)
            }
        }
    }

    pub fn call_value(&self, f: Value, args: Vec<Value>) -> Res<Value> {
        match f {
            Value::Function(f) => self.call_function(&f, args),
            Value::Class(c) => self.construct(&c, args),
            Value::Builtin(b) => self.call_builtin(b, args),
            other => err(
                ErrorKind::Type,
                format!("'{}' object is not callable", other.type_name()),
            ),
        }
    }

    fn call_function(&self, f: &Rc<Function>, args: Vec<Value>) -> Res<Value> {
        let params = &f.def.params;
        if params.len() != args.len() {
            return err(
                ErrorKind::Type,
                format!(
                    "{}() takes {} positional argument{} but {} {} given",
                    f.name,
                    params.len(),
                    if params.len() == 1 { "" } else { "s" },
                    args.len(),
                    if args.len() == 1 { "was" } else { "were" }
                ),
            );
        }
        let _depth = DepthGuard::enter()?;
        self.calls.set(self.calls.get() + 1);
        if let Some(trace) = self.trace.borrow_mut().as_mut() {
            if !trace.contains(&f.qualname) {
                trace.insert(f.qualname.clone());
            }
        }
        let locals: HashMap<String, Value> = params.iter().cloned().zip(args).collect();
        let mut frame = Frame {
            module: f.module,
            locals: Some(locals),
            declared_global: Some(&f.globals),
        };
        match self.exec_block(&f.def.body, &mut frame)? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::None),
        }
    }

    fn construct(&self, cls: &Rc<Class>, args: Vec<Value>) -> Res<Value> {
        let obj = Value::Object(Rc::new(Object {
            class: cls.clone(),
            attrs: RefCell::new(IndexMap::new()),
        }));
        match cls.methods.get("__init__") {
            Some(init) => {
                let mut full = Vec::with_capacity(args.len() + 1);
                full.push(obj.clone());
                full.extend(args);
                self.call_function(init, full)?;
            }
            None if !args.is_empty() => return err(ErrorKind::Type, format!("{}() takes no arguments", cls.name)),
            None => {}
        }
        Ok(obj)
    }

    fn call_builtin(&self, b: Builtin, args: Vec<Value>) -> Res<Value> {
        let arity = |n: usize| -> Res<()> {
            if args.len() == n {
                Ok(())
            } else {
                err(
                    ErrorKind::Type,
                    format!(
                        "{}() takes exactly {n} argument{} ({} given)",
                        b.name(),
                        if n == 1 { "" } else { "s" },
                        args.len()
                    ),
                )
            }
        };
        match b {
            Builtin::Print => {
                let line: Vec<String> = args.iter().map(Value::to_str).collect();
                let mut out = self.stdout.borrow_mut();
                out.push_str(&line.join(" "));
                out.push('\n');
                Ok(Value::None)
            }
            Builtin::Input => {
                arity(0)?;
                match self.stdin.borrow_mut().pop_front() {
                    Some(line) => Ok(Value::str(&line)),
                    None => err(ErrorKind::StdinExhausted, "EOF when reading a line"),
                }
            }
            Builtin::Len => {
                arity(1)?;
                let n = match &args[0] {
                    Value::Str(s) => s.chars().count(),
                    Value::List(l) => l.borrow().len(),
                    Value::Tuple(t) => t.len(),
                    Value::Map(m) => m.borrow().len(),
                    other => {
                        return err(
                            ErrorKind::Type,
                            format!("object of type '{}' has no len()", other.type_name()),
                        )
                    }
                };
                Ok(Value::int(n as i64))
            }
            Builtin::Range => err(
                ErrorKind::Unsupported,
                "range() is only supported as the iterable of a for loop",
            ),
            Builtin::Str => match args.len() {
                0 => Ok(Value::str("")),
                1 => Ok(Value::str(&args[0].to_str())),
                _ => arity(1).map(|_| Value::None),
            },
            Builtin::Int => match args.as_slice() {
                [] => Ok(Value::int(0)),
                [v] => to_int(v),
                _ => arity(1).map(|_| Value::None),
            },
            Builtin::Float => match args.as_slice() {
                [] => Ok(Value::Float(0.0)),
                [v] => to_float(v),
                _ => arity(1).map(|_| Value::None),
            },
            Builtin::MathSin => {
                arity(1)?;
                match (&args[0], args[0].as_f64()) {
                    (Value::Int(i), _) if i.to_f64().is_infinite() => {
                        err(ErrorKind::Overflow, "int too large to convert to float")
                    }
                    (_, Some(x)) if x.is_infinite() => err(ErrorKind::Value, "math domain error"),
                    (_, Some(x)) => Ok(Value::Float(x.sin())),
                    (v, None) => err(ErrorKind::Type, format!("must be real number, not {}", v.type_name())),
                }
            }
            Builtin::Invoke => {
                arity(2)?;
                let unit = expect_str(&args[0])?;
                self.invoke(&unit, &args[1])
            }
            Builtin::Emit => {
                arity(1)?;
                self.stdout.borrow_mut().push_str(&expect_str(&args[0])?);
                Ok(Value::None)
            }
            Builtin::Stdin => {
                arity(0)?;
                let lines = self.stdin.borrow().iter().map(|s| Value::str(s)).collect();
                Ok(Value::list(lines))
            }
            Builtin::SetStdin => {
                arity(1)?;
                let Value::List(l) = &args[0] else {
                    return err(ErrorKind::Type, "set_stdin() expects a list");
                };
                let lines = l.borrow().iter().map(expect_str).collect::<Res<VecDeque<_>>>()?;
                *self.stdin.borrow_mut() = lines;
                Ok(Value::None)
            }
            Builtin::State => {
                arity(1)?;
                let Value::Object(obj) = &args[0] else {
                    return err(ErrorKind::Type, "state() expects an object");
                };
                Ok(Value::map(obj.attrs.borrow().clone()))
            }
            Builtin::LoadState => {
                arity(2)?;
                let (Value::Object(obj), Value::Map(m)) = (&args[0], &args[1]) else {
                    return err(ErrorKind::Type, "load_state() expects an object and a map");
                };
                let fresh = m.borrow().clone();
                *obj.attrs.borrow_mut() = fresh;
                Ok(Value::None)
            }
            Builtin::Without => {
                arity(2)?;
                let Value::Map(m) = &args[0] else {
                    return err(ErrorKind::Type, "without() expects a map");
                };
                let key = expect_str(&args[1])?;
                let mut copy = m.borrow().clone();
                copy.shift_remove(key.as_str());
                Ok(Value::map(copy))
            }
            Builtin::Restore => {
                arity(2)?;
                let (Value::Class(cls), Value::Map(m)) = (&args[0], &args[1]) else {
                    return err(ErrorKind::Type, "restore() expects a class and a map");
                };
                Ok(Value::Object(Rc::new(Object {
                    class: cls.clone(),
                    attrs: RefCell::new(m.borrow().clone()),
                })))
            }
            Builtin::CallMethod => {
                arity(3)?;
                let name = expect_str(&args[1])?;
                let call_args = match &args[2] {
                    Value::List(l) => l.borrow().clone(),
                    Value::Tuple(t) => t.to_vec(),
                    _ => return err(ErrorKind::Type, "call_method() expects an argument list"),
                };
                self.call_method_on(&args[0], &name, call_args)
            }
            Builtin::ReadLine => {
                arity(1)?;
                let Value::List(l) = &args[0] else {
                    return err(ErrorKind::Type, "read_line() expects a list");
                };
                let mut l = l.borrow_mut();
                if l.is_empty() {
                    return err(ErrorKind::StdinExhausted, "EOF when reading a line");
                }
                Ok(l.remove(0))
            }
        }
    }

    fn invoke(&self, unit: &str, event: &Value) -> Res<Value> {
        INVOCATIONS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let dispatcher = self.dispatcher.borrow().clone();
        let Some(dispatcher) = dispatcher else {
            return err(ErrorKind::Remote, format!("no dispatcher to invoke {unit:?}"));
        };
        let text = to_json_text(event).map_err(|e| RuntimeError::new(ErrorKind::Type, e.to_string()))?;
        let reply = dispatcher
            .dispatch(unit, &text)
            .map_err(|e| RuntimeError::new(ErrorKind::Remote, e.to_string()))?;
        let response = from_json_text(&reply)
            .map_err(|e| RuntimeError::new(ErrorKind::Remote, format!("bad response from {unit:?}: {e}")))?;
        if let Value::Map(m) = &response {
            if let Some(Value::Map(e)) = m.borrow().get("error") {
                let e = e.borrow();
                let kind = e.get("type").map(Value::to_str).unwrap_or_default();
                let message = e.get("message").map(Value::to_str).unwrap_or_default();
                let k = if kind == "Timeout" {
                    ErrorKind::Timeout
                } else {
                    ErrorKind::Remote
                };
                return err(k, format!("{unit}: {message}"));
            }
        }
        Ok(response)
    }
}

/// The `{"error": ...}` response for a failed invocation.
pub fn error_payload(e: &RuntimeError) -> String {
    let kind = if e.kind == ErrorKind::Timeout {
        "Timeout"
    } else {
        "Runtime"
    };
    serde_json::json!({"error": {"type": kind, "message": e.to_string()}}).to_string()
}

fn make_function(def: &FunctionDef, module: ModuleId, module_name: &str, class: Option<&str>) -> Rc<Function> {
    let mut globals = HashSet::new();
    collect_global_decls(&def.body, &mut globals);
    let qualname = match class {
        Some(c) => format!("{module_name}.{c}.{}", def.name),
        None => format!("{module_name}.{}", def.name),
    };
    Rc::new(Function {
        name: def.name.clone(),
        qualname,
        def: Rc::new(def.clone()),
        module,
        globals,
    })
}

fn collect_global_decls(body: &[Stmt], out: &mut HashSet<String>) {
    for stmt in body {
        match &stmt.kind {
            StmtKind::Global(names) => out.extend(names.iter().cloned()),
            StmtKind::If { branches, orelse } => {
                for (_, b) in branches {
                    collect_global_decls(b, out);
                }
                if let Some(b) = orelse {
                    collect_global_decls(b, out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::ForRange { body, .. } => collect_global_decls(body, out),
            _ => {}
        }
    }
}

fn make_class(cls: &ClassDef, module: ModuleId, module_name: &str) -> Res<Rc<Class>> {
    let mut methods = IndexMap::new();
    for stmt in &cls.body {
        match &stmt.kind {
            StmtKind::FunctionDef(def) => {
                methods.insert(
                    def.name.clone(),
                    make_function(def, module, module_name, Some(&cls.name)),
                );
            }
            StmtKind::Pass => {}
            StmtKind::Expr(Expr {
                kind: ExprKind::Str(_), ..
            }) => {}
            _ => return err(ErrorKind::Unsupported, "class bodies may only contain methods"),
        }
    }
    Ok(Rc::new(Class {
        name: cls.name.clone(),
        qualname: format!("{module_name}.{}", cls.name),
        module,
        methods,
    }))
}

fn expect_str(v: &Value) -> Res<String> {
    match v {
        Value::Str(s) => Ok(s.to_string()),
        other => err(ErrorKind::Type, format!("expected str, got {}", other.type_name())),
    }
}

fn get_attr(obj: &Value, attr: &str, interp: &Interpreter) -> Res<Value> {
    match obj {
        Value::Object(o) => match o.attrs.borrow().get(attr) {
            Some(v) => Ok(v.clone()),
            None if o.class.methods.contains_key(attr) => err(
                ErrorKind::Unsupported,
                format!("method '{attr}' can only be called, not read"),
            ),
            None => err(
                ErrorKind::Attribute,
                format!("'{}' object has no attribute '{attr}'", o.class.name),
            ),
        },
        Value::Module(id, name) => interp.module(*id).get(attr).ok_or_else(|| {
            RuntimeError::new(
                ErrorKind::Attribute,
                format!("module '{name}' has no attribute '{attr}'"),
            )
        }),
        Value::Class(c) => match c.methods.get(attr) {
            Some(m) => Ok(Value::Function(m.clone())),
            None => err(
                ErrorKind::Attribute,
                format!("type object '{}' has no attribute '{attr}'", c.name),
            ),
        },
        other => err(
            ErrorKind::Attribute,
            format!("'{}' object has no attribute '{attr}'", other.type_name()),
        ),
    }
}

fn set_attr(obj: &Value, attr: &str, value: Value) -> Res<()> {
    match obj {
        Value::Object(o) => {
            o.attrs.borrow_mut().insert(attr.to_string(), value);
            Ok(())
        }
        other => err(
            ErrorKind::Attribute,
            format!("'{}' object attribute '{attr}' is read-only", other.type_name()),
        ),
    }
}

fn seq_index(len: usize, index: &Value, what: &str) -> Res<usize> {
    let Some(i) = index.as_int() else {
        return err(
            ErrorKind::Type,
            format!("{what} indices must be integers, not {}", index.type_name()),
        );
    };
    let i = i.to_i64().unwrap_or(i64::MAX);
    let real = if i < 0 { i + len as i64 } else { i };
    if real < 0 || real >= len as i64 {
        return err(ErrorKind::Index, format!("{what} index out of range"));
    }
    Ok(real as usize)
}

fn get_item(container: &Value, index: &Value) -> Res<Value> {
    match container {
        Value::List(l) => {
            let l = l.borrow();
            Ok(l[seq_index(l.len(), index, "list")?].clone())
        }
        Value::Tuple(t) => Ok(t[seq_index(t.len(), index, "tuple")?].clone()),
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let c = chars[seq_index(chars.len(), index, "string")?];
            Ok(Value::str(&c.to_string()))
        }
        Value::Map(m) => {
            let key = match index {
                Value::Str(k) => k,
                other => return err(ErrorKind::Key, other.repr()),
            };
            m.borrow()
                .get(&**key)
                .cloned()
                .ok_or_else(|| RuntimeError::new(ErrorKind::Key, index.repr()))
        }
        other => err(
            ErrorKind::Type,
            format!("'{}' object is not subscriptable", other.type_name()),
        ),
    }
}

fn set_item(container: &Value, index: &Value, value: Value) -> Res<()> {
    match container {
        Value::List(l) => {
            let mut l = l.borrow_mut();
            let i = seq_index(l.len(), index, "list assignment")?;
            l[i] = value;
            Ok(())
        }
        Value::Map(m) => match index {
            Value::Str(k) => {
                m.borrow_mut().insert(k.to_string(), value);
                Ok(())
            }
            other => err(
                ErrorKind::Type,
                format!("map keys must be str, not {}", other.type_name()),
            ),
        },
        other => err(
            ErrorKind::Type,
            format!("'{}' object does not support item assignment", other.type_name()),
        ),
    }
}

fn is_integral(v: &Value) -> bool {
    matches!(v, Value::Int(_) | Value::Bool(_))
}

fn is_numeric(v: &Value) -> bool {
    matches!(v, Value::Int(_) | Value::Bool(_) | Value::Float(_))
}

fn floats(l: &Value, r: &Value) -> Res<(f64, f64)> {
    let conv = |v: &Value| match v {
        Value::Int(i) => {
            let f = i.to_f64();
            if f.is_infinite() {
                err(ErrorKind::Overflow, "int too large to convert to float")
            } else {
                Ok(f)
            }
        }
        other => Ok(other.as_f64().expect("numeric")),
    };
    Ok((conv(l)?, conv(r)?))
}

fn repeat(items: &[Value], n: &Value) -> Vec<Value> {
    let n = n.as_int().and_then(|i| i.to_i64()).unwrap_or(0).max(0) as usize;
    let mut out = Vec::with_capacity(items.len() * n);
    for _ in 0..n {
        out.extend(items.iter().cloned());
    }
    out
}

fn binary(op: BinOp, l: &Value, r: &Value) -> Res<Value> {
    use BinOp::*;
    if is_integral(l) && is_integral(r) {
        let (a, b) = (l.as_int().expect("int"), r.as_int().expect("int"));
        return Ok(match op {
            Add => Value::Int(a.add(&b)),
            Sub => Value::Int(a.sub(&b)),
            Mul => Value::Int(a.mul(&b)),
            Div => {
                if b.is_zero() {
                    return err(ErrorKind::ZeroDivision, "division by zero");
                }
                let (x, y) = floats(l, r)?;
                Value::Float(x / y)
            }
            FloorDiv => match a.floor_div(&b) {
                Some(v) => Value::Int(v),
                None => return err(ErrorKind::ZeroDivision, "integer division or modulo by zero"),
            },
            Mod => match a.modulo(&b) {
                Some(v) => Value::Int(v),
                None => return err(ErrorKind::ZeroDivision, "integer modulo by zero"),
            },
            Pow => {
                if b.is_negative() {
                    if a.is_zero() {
                        return err(ErrorKind::ZeroDivision, "0.0 cannot be raised to a negative power");
                    }
                    let (x, y) = floats(l, r)?;
                    Value::Float(x.powf(y))
                } else {
                    match b.to_i64().and_then(|e| u32::try_from(e).ok()) {
                        Some(e) => Value::Int(a.pow(e)),
                        None => return err(ErrorKind::Overflow, "exponent too large"),
                    }
                }
            }
        });
    }
    if is_numeric(l) && is_numeric(r) {
        let (x, y) = floats(l, r)?;
        return Ok(Value::Float(match op {
            Add => x + y,
            Sub => x - y,
            Mul => x * y,
            Div => {
                if y == 0.0 {
                    return err(ErrorKind::ZeroDivision, "float division by zero");
                }
                x / y
            }
            FloorDiv => {
                if y == 0.0 {
                    return err(ErrorKind::ZeroDivision, "float floor division by zero");
                }
                (x / y).floor()
            }
            Mod => {
                if y == 0.0 {
                    return err(ErrorKind::ZeroDivision, "float modulo");
                }
                let m = x % y;
                if m != 0.0 && ((m < 0.0) != (y < 0.0)) {
                    m + y
                } else {
                    m
                }
            }
            Pow => {
                if x == 0.0 && y < 0.0 {
                    return err(ErrorKind::ZeroDivision, "0.0 cannot be raised to a negative power");
                }
                let p = x.powf(y);
                if p.is_nan() && !x.is_nan() && !y.is_nan() {
                    return err(ErrorKind::Value, "math domain error");
                }
                p
            }
        }));
    }
    match (op, l, r) {
        (Add, Value::Str(a), Value::Str(b)) => {
            let mut s = String::with_capacity(a.len() + b.len());
            s.push_str(a);
            s.push_str(b);
            Ok(Value::Str(Rc::from(s)))
        }
        (Add, Value::List(a), Value::List(b)) => {
            let mut items = a.borrow().clone();
            items.extend(b.borrow().iter().cloned());
            Ok(Value::list(items))
        }
        (Add, Value::Tuple(a), Value::Tuple(b)) => Ok(Value::Tuple(a.iter().chain(b.iter()).cloned().collect())),
        (Mul, Value::Str(s), n) | (Mul, n, Value::Str(s)) if is_integral(n) => {
            let k = n.as_int().and_then(|i| i.to_i64()).unwrap_or(0).max(0) as usize;
            Ok(Value::str(&s.repeat(k)))
        }
        (Mul, Value::List(items), n) | (Mul, n, Value::List(items)) if is_integral(n) => {
            Ok(Value::list(repeat(&items.borrow(), n)))
        }
        (Mul, Value::Tuple(items), n) | (Mul, n, Value::Tuple(items)) if is_integral(n) => {
            Ok(Value::Tuple(Rc::from(repeat(items, n))))
        }
        _ => err(
            ErrorKind::Type,
            format!(
                "unsupported operand type(s) for {}: '{}' and '{}'",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ),
        ),
    }
}

fn compare(op: CmpOp, l: &Value, r: &Value) -> Res<bool> {
    use std::cmp::Ordering::*;
    let ordered = |ok: &dyn Fn(std::cmp::Ordering) -> bool| match l.py_cmp(r) {
        Some(o) => Ok(ok(o)),
        None => err(
            ErrorKind::Type,
            format!(
                "'{}' not supported between instances of '{}' and '{}'",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ),
        ),
    };
    match op {
        CmpOp::Eq => Ok(l.py_eq(r)),
        CmpOp::NotEq => Ok(!l.py_eq(r)),
        CmpOp::Lt => ordered(&|o| o == Less),
        CmpOp::LtE => ordered(&|o| o != Greater),
        CmpOp::Gt => ordered(&|o| o == Greater),
        CmpOp::GtE => ordered(&|o| o != Less),
        CmpOp::In => contains(r, l),
        CmpOp::NotIn => contains(r, l).map(|b| !b),
    }
}

fn contains(container: &Value, item: &Value) -> Res<bool> {
    match container {
        Value::List(l) => Ok(l.borrow().iter().any(|v| v.py_eq(item))),
        Value::Tuple(t) => Ok(t.iter().any(|v| v.py_eq(item))),
        Value::Map(m) => Ok(match item {
            Value::Str(k) => m.borrow().contains_key(&**k),
            _ => false,
        }),
        Value::Str(s) => match item {
            Value::Str(sub) => Ok(s.contains(&**sub)),
            other => err(
                ErrorKind::Type,
                format!(
                    "'in <string>' requires string as left operand, not {}",
                    other.type_name()
                ),
            ),
        },
        other => err(
            ErrorKind::Type,
            format!("argument of type '{}' is not iterable", other.type_name()),
        ),
    }
}

fn to_int(v: &Value) -> Res<Value> {
    match v {
        Value::Int(_) | Value::Bool(_) => Ok(Value::Int(v.as_int().expect("int"))),
        Value::Float(f) => {
            if !f.is_finite() {
                return err(
                    ErrorKind::Value,
                    format!("cannot convert float {} to integer", crate::syntax::float_repr(*f)),
                );
            }
            let t = f.trunc();
            Ok(Value::Int(
                match <num_bigint::BigInt as num_traits::FromPrimitive>::from_f64(t) {
                    Some(b) => Int::from_big(b),
                    None => Int::Small(t as i64),
                },
            ))
        }
        Value::Str(s) => {
            let t = s.trim();
            let digits = t.strip_prefix(['+', '-']).unwrap_or(t);
            if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
                return err(
                    ErrorKind::Value,
                    format!("invalid literal for int() with base 10: {}", v.repr()),
                );
            }
            let big: num_bigint::BigInt = t.parse().expect("validated digits");
            Ok(Value::Int(Int::from_big(big)))
        }
        other => err(
            ErrorKind::Type,
            format!(
                "int() argument must be a string or a number, not '{}'",
                other.type_name()
            ),
        ),
    }
}

fn to_float(v: &Value) -> Res<Value> {
    match v {
        Value::Float(f) => Ok(Value::Float(*f)),
        Value::Int(_) | Value::Bool(_) => {
            let (f, _) = floats(v, &Value::Float(0.0))?;
            Ok(Value::Float(f))
        }
        Value::Str(s) => {
            let t = s.trim();
            let ok = !t.is_empty()
                && t.chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '+' | '-'));
            match t.parse::<f64>() {
                Ok(f) if ok => Ok(Value::Float(f)),
                _ => err(
                    ErrorKind::Value,
                    format!("could not convert string to float: {}", v.repr()),
                ),
            }
        }
        other => err(
            ErrorKind::Type,
            format!(
                "float() argument must be a string or a number, not '{}'",
                other.type_name()
            ),
        ),
    }
}

#[cfg(test)]
mod tests;
