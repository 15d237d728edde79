//! Rewrites a program into a client side (stubs and proxy classes) and a set
//! of hosted function units.
//!
//! Every function becomes a stub with the original signature that invokes
//! its unit through `faas_runtime.invoke`. Every class becomes a proxy that
//! ships its attribute map with each method call and reloads it from the
//! response. Units carry the original body, the globals it references, and
//! stubs for whatever it calls, so recursion goes back through the runtime.

mod monads;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::rc::Rc;
use std::time::Instant;

use thiserror::Error;

use crate::analyzer::{
    build_dependency_map_with, collect_globals, AnalyzeError, DependencyMap, FeatureFlags, ModuleLoader, Scope,
};
use crate::interp::{
    on_big_stack, to_json_lossy, Dispatcher, ExecResult, Interpreter, Limits, LocalRuntime, RuntimeError, Value,
    RUNTIME_MODULE,
};
use crate::package::UnitConfig;
use crate::syntax::{
    check_subset, emit, emit_expr, emit_stmt, parse, walk_exprs, walk_exprs_mut, ClassDef, Expr, ExprKind, FunctionDef,
    Module, SourceModule, SourceSpan, Stmt, StmtKind,
};

pub use monads::inject_io_monads;

pub const HANDLER: &str = "lambda_handler";
/// Prefix of every name the generator introduces.
pub const RESERVED_PREFIX: &str = "_faas_";
pub const REMOTE_INIT: &str = "__remote__init__";
/// Hidden attribute naming a proxy's class; never sent to a unit.
pub const CLASSNAME_KEY: &str = "__classname__";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error("{module}: {span}: {callee} takes {expected} argument(s) but {got} given")]
    Arity {
        module: String,
        span: SourceSpan,
        callee: String,
        expected: usize,
        got: usize,
    },
    #[error("{module}: {span}: {name:?} is reserved for generated code")]
    Reserved {
        module: String,
        span: SourceSpan,
        name: String,
    },
    #[error("{module}: {span}: class {class} already defines {REMOTE_INIT}")]
    MethodCollision {
        module: String,
        span: SourceSpan,
        class: String,
    },
    #[error("no {what} named {name:?}")]
    NotFound { what: &'static str, name: String },
    #[error("production mode needs an endpoint")]
    MissingEndpoint,
    #[error("generated unit {unit} is invalid: {message}")]
    Generated { unit: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Debug,
    #[default]
    Local,
    Production,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOptions {
    pub mode: Mode,
    pub endpoint: Option<String>,
    pub memory_mb: u32,
    pub timeout_s: u32,
    /// Call expressions the client will evaluate in the entry module besides
    /// its own top level; what they reach gets units too.
    pub invocations: Vec<Expr>,
}

impl Default for TransformOptions {
    fn default() -> Self {
        let c = UnitConfig::new("");
        TransformOptions {
            mode: Mode::Local,
            endpoint: None,
            memory_mb: c.memory_mb,
            timeout_s: c.timeout_s,
            invocations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionUnit {
    pub unit_name: String,
    pub handler_name: String,
    /// The dependency-map node this unit hosts.
    pub node: String,
    pub source: String,
    pub tree: Module,
    pub config: UnitConfig,
    pub replicated_globals: Vec<(String, Expr)>,
    pub io_flags: FeatureFlags,
    /// Units this one invokes.
    pub dependencies: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewrittenModule {
    pub name: String,
    pub source: String,
    pub tree: Module,
}

impl RewrittenModule {
    fn from_tree(name: &str, tree: Module) -> Self {
        let source = emit(&tree);
        RewrittenModule {
            name: name.to_string(),
            source,
            tree,
        }
    }

    pub fn as_source_module(&self) -> SourceModule {
        SourceModule {
            name: self.name.clone(),
            text: self.source.clone(),
            tree: self.tree.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProxySpec {
    pub class_name: String,
    /// Forwarded methods, `__remote__init__` first when the class has a
    /// constructor.
    pub method_names: Vec<String>,
    /// State key stripped before transport.
    pub classname_key: String,
}

/// Output of [`transform_program`].
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub entry: String,
    /// Rewritten application modules, entry first.
    pub modules: Vec<RewrittenModule>,
    pub units: Vec<FunctionUnit>,
    pub proxies: Vec<ProxySpec>,
    pub mode: Mode,
    pub endpoint: Option<String>,
    /// Wall-clock transformation time in milliseconds.
    pub transform_ms: f64,
}

/// Which side of the boundary a stub lives on.
#[derive(Clone, Copy, PartialEq)]
enum Side {
    /// The rewritten application: output goes to the real stdout.
    Client,
    /// Inside a unit: output goes to the print monad.
    Unit,
}

enum StubKind<'a> {
    Function,
    Init { class: &'a str },
    Method { class: &'a str, method: &'a str },
}

/// Transformation state shared by every rule: the dependency map and the
/// unit name of every definition.
pub struct Transformer {
    pub deps: DependencyMap,
    pub options: TransformOptions,
    names: BTreeMap<String, String>,
}

/// Qualified identifier of a definition; constructors map to the
/// `__init__` node.
fn qual(module: &str, class: Option<&str>, name: &str) -> String {
    match class {
        Some(c) => format!("{module}.{c}.{name}"),
        None => format!("{module}.{name}"),
    }
}

fn base_unit_name(node: &str) -> String {
    let node = node
        .strip_suffix(".__init__")
        .map(|n| format!("{n}.{REMOTE_INIT}"))
        .unwrap_or_else(|| node.to_string());
    node.replace('.', "_")
}

/// Name a cross-module stub or proxy gets inside a unit.
fn mangle(module: &str, name: &str) -> String {
    format!("{RESERVED_PREFIX}{module}__{name}")
}

fn check_reserved(module: &SourceModule) -> Result<(), TransformError> {
    let reserved = |name: &str, span: SourceSpan| -> Result<(), TransformError> {
        if name.starts_with(RESERVED_PREFIX) || name == RUNTIME_MODULE || name == CLASSNAME_KEY {
            return Err(TransformError::Reserved {
                module: module.name.clone(),
                span,
                name: name.to_string(),
            });
        }
        Ok(())
    };
    if module.name == RUNTIME_MODULE || module.name.starts_with(RESERVED_PREFIX) {
        reserved(&module.name, SourceSpan::default())?;
    }
    fn stmts(
        body: &[Stmt],
        f: &mut dyn FnMut(&str, SourceSpan) -> Result<(), TransformError>,
    ) -> Result<(), TransformError> {
        for s in body {
            match &s.kind {
                StmtKind::Import(names) | StmtKind::Global(names) => {
                    for n in names {
                        f(n, s.span)?;
                    }
                }
                StmtKind::FunctionDef(def) => {
                    f(&def.name, def.span)?;
                    for p in &def.params {
                        f(p, def.span)?;
                    }
                    stmts(&def.body, f)?;
                }
                StmtKind::ClassDef(cls) => {
                    f(&cls.name, cls.span)?;
                    stmts(&cls.body, f)?;
                }
                StmtKind::ForRange { var, body, .. } => {
                    f(var, s.span)?;
                    stmts(body, f)?;
                }
                StmtKind::If { branches, orelse } => {
                    for (_, b) in branches {
                        stmts(b, f)?;
                    }
                    if let Some(b) = orelse {
                        stmts(b, f)?;
                    }
                }
                StmtKind::While { body, .. } | StmtKind::MainGuard(body) => stmts(body, f)?,
                _ => {}
            }
        }
        Ok(())
    }
    stmts(&module.tree.body, &mut |n, span| reserved(n, span))?;
    let mut found = None;
    walk_exprs(&module.tree.body, &mut |e| {
        if found.is_some() {
            return;
        }
        let name = match &e.kind {
            ExprKind::Name(n) | ExprKind::Attribute(_, n) => n,
            _ => return,
        };
        if name.starts_with(RESERVED_PREFIX) || name == RUNTIME_MODULE || name == CLASSNAME_KEY {
            found = Some((name.clone(), e.span));
        }
    });
    match found {
        Some((name, span)) => reserved(&name, span),
        None => Ok(()),
    }
}

fn args_list(params: &[String]) -> String {
    format!("[{}]", params.join(", "))
}

fn indent(text: &str, levels: usize) -> String {
    let pad = "    ".repeat(levels);
    text.lines()
        .map(|l| {
            if l.is_empty() {
                String::new()
            } else {
                format!("{pad}{l}\n")
            }
        })
        .collect()
}

impl Transformer {
    pub fn new(deps: DependencyMap, options: TransformOptions) -> Result<Self, TransformError> {
        for m in &deps.modules {
            check_reserved(m)?;
            for cls in m.tree.classes() {
                if let Some(def) = cls.method(REMOTE_INIT) {
                    return Err(TransformError::MethodCollision {
                        module: m.name.clone(),
                        span: def.span,
                        class: cls.name.clone(),
                    });
                }
            }
        }
        let mut all = Vec::new();
        for m in &deps.modules {
            for f in m.tree.functions() {
                all.push(qual(&m.name, None, &f.name));
            }
            for c in m.tree.classes() {
                all.push(qual(&m.name, Some(&c.name), "__init__"));
                for meth in c.methods() {
                    if meth.name != "__init__" {
                        all.push(qual(&m.name, Some(&c.name), &meth.name));
                    }
                }
            }
        }
        all.sort();
        let mut names = BTreeMap::new();
        let mut used = HashSet::new();
        for node in all {
            let base = base_unit_name(&node);
            let mut name = base.clone();
            let mut k = 2;
            while !used.insert(name.clone()) {
                name = format!("{base}_{k}");
                k += 1;
            }
            names.insert(node, name);
        }
        let t = Transformer { deps, options, names };
        t.check_arity()?;
        Ok(t)
    }

    /// Unit name of a definition node.
    pub fn unit_name(&self, node: &str) -> Option<&str> {
        self.names.get(node).map(String::as_str)
    }

    fn config(&self, unit: &str) -> UnitConfig {
        UnitConfig {
            memory_mb: self.options.memory_mb,
            timeout_s: self.options.timeout_s,
            ..UnitConfig::new(unit)
        }
    }

    fn module(&self, name: &str) -> Result<&SourceModule, TransformError> {
        self.deps.module(name).ok_or_else(|| TransformError::NotFound {
            what: "module",
            name: name.to_string(),
        })
    }

    fn class(&self, module: &str, class: &str) -> Result<&ClassDef, TransformError> {
        self.module(module)?
            .tree
            .classes()
            .find(|c| c.name == class)
            .ok_or_else(|| TransformError::NotFound {
                what: "class",
                name: format!("{module}.{class}"),
            })
    }

    fn check_arity(&self) -> Result<(), TransformError> {
        for e in &self.deps.edges {
            if !self.deps.nodes.contains(&e.callee) {
                continue;
            }
            let expected = match self.deps.definition(&e.callee) {
                Some(def) => def.params.len(),
                None => 1,
            };
            if expected != e.argc {
                let module = e.caller.split('.').next().unwrap_or_default().to_string();
                let shown = e.callee.strip_suffix(".__init__").unwrap_or(&e.callee);
                let self_arg = usize::from(e.callee.matches('.').count() == 2);
                return Err(TransformError::Arity {
                    module,
                    span: e.span,
                    callee: shown.to_string(),
                    expected: expected - self_arg,
                    got: e.argc - self_arg,
                });
            }
        }
        Ok(())
    }

    fn io(&self, node: &str) -> (bool, bool) {
        self.deps.transitive_io(node)
    }

    /// Stub or proxy-method source. `params` excludes `self`.
    fn stub(&self, side: Side, name: &str, params: &[String], node: &str, kind: StubKind) -> String {
        let unit = self.unit_name(node).unwrap_or(node);
        let (print, input) = self.io(node);
        let mut body = String::new();
        if side == Side::Unit && (print || input) {
            body += &format!("global {RESERVED_PREFIX}stdout, {RESERVED_PREFIX}stdin\n");
        }
        let args = args_list(params);
        body += &match &kind {
            StubKind::Function => format!("_faas_event = {{\"args\": {args}}}\n"),
            StubKind::Init { class } => format!(
                "_faas_event = {{\"args\": {args}, \"state\": {{}}, \"classname\": \"{class}\", \"method\": \"{REMOTE_INIT}\"}}\n"
            ),
            StubKind::Method { class, method } => format!(
                "_faas_event = {{\"args\": {args}, \"state\": faas_runtime.without(faas_runtime.state(self), \"{CLASSNAME_KEY}\"), \"classname\": \"{class}\", \"method\": \"{method}\"}}\n"
            ),
        };
        if input {
            body += match side {
                Side::Client => "_faas_event[\"stdin\"] = faas_runtime.stdin()\n",
                Side::Unit => "_faas_event[\"stdin\"] = _faas_stdin\n",
            };
        }
        body += &format!("_faas_response = faas_runtime.invoke(\"{unit}\", _faas_event)\n");
        if print {
            body += match side {
                Side::Client => "faas_runtime.emit(_faas_response[\"stdout\"])\n",
                Side::Unit => "_faas_stdout += _faas_response[\"stdout\"]\n",
            };
        }
        if input {
            body += match side {
                Side::Client => "faas_runtime.set_stdin(_faas_response[\"stdin\"])\n",
                Side::Unit => "_faas_stdin = _faas_response[\"stdin\"]\n",
            };
        }
        match &kind {
            StubKind::Function => body += "return _faas_response[\"return\"]\n",
            StubKind::Init { class } => {
                body += &format!(
                    "faas_runtime.load_state(self, _faas_response[\"state\"])\nself.{CLASSNAME_KEY} = \"{class}\"\n"
                );
            }
            StubKind::Method { class, .. } => {
                body += &format!("faas_runtime.load_state(self, _faas_response[\"state\"])\nself.{CLASSNAME_KEY} = \"{class}\"\nreturn _faas_response[\"return\"]\n");
            }
        }
        let mut all_params = Vec::new();
        if !matches!(kind, StubKind::Function) {
            all_params.push("self".to_string());
        }
        all_params.extend(params.iter().cloned());
        format!("def {name}({}):\n{}", all_params.join(", "), indent(&body, 1))
    }

    fn function_stub(&self, side: Side, module: &str, def: &FunctionDef, name: &str) -> String {
        self.stub(
            side,
            name,
            &def.params,
            &qual(module, None, &def.name),
            StubKind::Function,
        )
    }

    fn proxy(&self, side: Side, module: &str, cls: &ClassDef, name: &str) -> String {
        let mut out = format!("class {name}:\n");
        let init_params: Vec<String> = cls
            .method("__init__")
            .map(|d| d.params[1..].to_vec())
            .unwrap_or_default();
        let init = if cls.method("__init__").is_some() {
            self.stub(
                side,
                "__init__",
                &init_params,
                &qual(module, Some(&cls.name), "__init__"),
                StubKind::Init { class: &cls.name },
            )
        } else {
            // Nothing to run remotely; the state starts empty.
            format!("def __init__(self):\n    self.{CLASSNAME_KEY} = \"{}\"\n", cls.name)
        };
        out += &indent(&init, 1);
        for m in cls.methods().filter(|m| m.name != "__init__") {
            out += "\n";
            out += &indent(
                &self.stub(
                    side,
                    &m.name,
                    &m.params[1..],
                    &qual(module, Some(&cls.name), &m.name),
                    StubKind::Method {
                        class: &cls.name,
                        method: &m.name,
                    },
                ),
                1,
            );
        }
        out
    }

    pub fn proxy_spec(&self, cls: &ClassDef) -> ProxySpec {
        let mut method_names = Vec::new();
        if cls.method("__init__").is_some() {
            method_names.push(REMOTE_INIT.to_string());
        }
        method_names.extend(cls.methods().filter(|m| m.name != "__init__").map(|m| m.name.clone()));
        ProxySpec {
            class_name: cls.name.clone(),
            method_names,
            classname_key: CLASSNAME_KEY.to_string(),
        }
    }

    /// Application callees of `callers`, outside the given class.
    fn dependency_nodes(&self, callers: &[String], own_class: Option<&str>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in &self.deps.edges {
            if !callers.contains(&e.caller) || !self.deps.nodes.contains(&e.callee) {
                continue;
            }
            if let Some(prefix) = own_class {
                if e.callee.starts_with(&format!("{prefix}.")) {
                    continue;
                }
            }
            out.insert(e.callee.clone());
        }
        out
    }

    /// Stub definitions for `deps` as seen from code in `module`, plus the
    /// unit names they invoke.
    fn dependency_code(
        &self,
        module: &str,
        deps: &BTreeSet<String>,
    ) -> Result<(String, BTreeSet<String>), TransformError> {
        let mut code = String::new();
        let mut invoked = BTreeSet::new();
        let mut classes_done = BTreeSet::new();
        for node in deps {
            let parts: Vec<&str> = node.split('.').collect();
            match parts.as_slice() {
                [m, f] => {
                    let def = self.deps.definition(node).expect("function node has a definition");
                    let name = if *m == module { f.to_string() } else { mangle(m, f) };
                    code += &self.function_stub(Side::Unit, m, def, &name);
                    code += "\n";
                    invoked.insert(self.unit_name(node).expect("named").to_string());
                }
                [m, c, _] => {
                    if self.deps.definition(node).is_some() {
                        invoked.insert(self.unit_name(node).expect("named").to_string());
                    }
                    if !classes_done.insert((m.to_string(), c.to_string())) {
                        continue;
                    }
                    let cls = self.class(m, c)?;
                    let name = if *m == module { c.to_string() } else { mangle(m, c) };
                    code += &self.proxy(Side::Unit, m, cls, &name);
                    code += "\n";
                }
                _ => unreachable!("node identifiers have two or three parts"),
            }
        }
        Ok((code, invoked))
    }

    /// Header shared by every unit of `module`: runtime and system imports
    /// and the replicated globals the unit's code references.
    fn unit_header(&self, module: &SourceModule, referenced: &[&FeatureFlags]) -> (String, Vec<(String, Expr)>) {
        let mut out = format!("import {RUNTIME_MODULE}\n");
        for name in module.tree.imports() {
            if self.deps.scope_of(&name) == Some(Scope::System) {
                out += &format!("import {name}\n");
            }
        }
        let all = collect_globals(module);
        let mut wanted: BTreeSet<String> = referenced
            .iter()
            .flat_map(|f| f.global_reads.iter().chain(&f.global_writes))
            .cloned()
            .collect();
        // Initializers may read other globals.
        loop {
            let mut more = Vec::new();
            for (n, e) in &all {
                if wanted.contains(n) {
                    crate::syntax::walk_expr(e, &mut |x| {
                        if let Some(r) = x.as_name() {
                            if !wanted.contains(r) && all.iter().any(|(g, _)| g == r) {
                                more.push(r.to_string());
                            }
                        }
                    });
                }
            }
            if more.is_empty() {
                break;
            }
            wanted.extend(more);
        }
        let globals: Vec<(String, Expr)> = all.into_iter().filter(|(n, _)| wanted.contains(n)).collect();
        for (n, e) in &globals {
            out += &format!("{n} = {}\n", emit_expr(e));
        }
        (out, globals)
    }

    /// Rewrites `m.f(...)` calls to application modules into calls of the
    /// mangled stub names a unit defines.
    fn rename_cross_module(&self, module: &SourceModule, def: &mut FunctionDef) {
        let imported: HashSet<String> = module
            .tree
            .imports()
            .into_iter()
            .filter(|m| self.deps.scope_of(m) == Some(Scope::Application))
            .collect();
        let mut shadowed: HashSet<String> = def.params.iter().cloned().collect();
        collect_assigned(&def.body, &mut shadowed);
        walk_exprs_mut(&mut def.body, &mut |e| {
            if let ExprKind::Call(callee, _) = &mut e.kind {
                if let ExprKind::Attribute(base, attr) = &callee.kind {
                    if let Some(m) = base.as_name() {
                        if imported.contains(m) && !shadowed.contains(m) {
                            let span = callee.span;
                            **callee = Expr {
                                kind: ExprKind::Name(mangle(m, attr)),
                                span,
                            };
                        }
                    }
                }
            }
        });
    }

    fn finish_unit(
        &self,
        node: &str,
        text: String,
        replicated_globals: Vec<(String, Expr)>,
        io_flags: FeatureFlags,
        dependencies: BTreeSet<String>,
    ) -> Result<FunctionUnit, TransformError> {
        let unit_name = self.unit_name(node).expect("named").to_string();
        let tree = parse(&text).map_err(|e| TransformError::Generated {
            unit: unit_name.clone(),
            message: format!("{e}\n{text}"),
        })?;
        let unit = FunctionUnit {
            config: self.config(&unit_name),
            unit_name,
            handler_name: HANDLER.to_string(),
            node: node.to_string(),
            source: emit(&tree),
            tree,
            replicated_globals,
            io_flags,
            dependencies,
        };
        let unit = inject_io_monads(unit);
        let violations = check_subset(&unit.tree);
        if !violations.is_empty() {
            return Err(TransformError::Generated {
                unit: unit.unit_name,
                message: violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
            });
        }
        Ok(unit)
    }

    /// Handler prologue and epilogue that save, reset and restore the
    /// monads so a re-entered environment keeps the outer call's output.
    fn handler(&self, print: bool, input: bool, call: &str, result: &str) -> String {
        let mut body = String::new();
        if print || input {
            body += "global _faas_stdout, _faas_stdin\n";
            body += "_faas_saved_stdout = _faas_stdout\n_faas_saved_stdin = _faas_stdin\n";
            body += "_faas_stdout = \"\"\n_faas_stdin = []\n";
            body += "if \"stdin\" in event:\n    _faas_stdin = event[\"stdin\"]\n";
        }
        body += &format!("_faas_return = {call}\n");
        let stdout = if print || input { "_faas_stdout" } else { "\"\"" };
        body += &format!("_faas_result = {{{result}\"return\": _faas_return, \"stdout\": {stdout}}}\n");
        if input {
            body += "_faas_result[\"stdin\"] = _faas_stdin\n";
        }
        if print || input {
            body += "_faas_stdout = _faas_saved_stdout\n_faas_stdin = _faas_saved_stdin\n";
        }
        body += "return _faas_result\n";
        format!("def {HANDLER}(event, context):\n{}", indent(&body, 1))
    }

    /// Stub for `fn_name` plus its unit.
    pub fn transform_function(
        &self,
        module: &str,
        fn_name: &str,
    ) -> Result<(FunctionDef, FunctionUnit), TransformError> {
        let src = self.module(module)?;
        let def = src
            .tree
            .functions()
            .find(|f| f.name == fn_name)
            .ok_or_else(|| TransformError::NotFound {
                what: "function",
                name: format!("{module}.{fn_name}"),
            })?;
        let node = qual(module, None, fn_name);
        let stub = parse_def(&self.function_stub(Side::Client, module, def, fn_name));

        let own = self
            .deps
            .features
            .get(&node)
            .cloned()
            .unwrap_or_else(|| crate::analyzer::detect_features(def));
        let (print, input) = self.io(&node);
        let (header, globals) = self.unit_header(src, &[&own]);
        let dep_nodes = self.dependency_nodes(std::slice::from_ref(&node), None);
        let (dep_code, invoked) = self.dependency_code(module, &dep_nodes)?;

        let mut imp = def.clone();
        imp.name = format!("{RESERVED_PREFIX}impl_{fn_name}");
        self.rename_cross_module(src, &mut imp);
        let call_args: Vec<String> = (0..def.params.len()).map(|i| format!("_faas_args[{i}]")).collect();
        let call = format!("{}({})", imp.name, call_args.join(", "));

        let mut text = header;
        text += "\n";
        text += &dep_code;
        text += &emit_stmt(&Stmt::new(StmtKind::FunctionDef(imp)), 0);
        text += "\n";
        let handler = self.handler(print, input, "_faas_call", "");
        text += &handler.replacen(
            "_faas_return = _faas_call\n",
            &format!("_faas_args = event[\"args\"]\n    _faas_return = {call}\n"),
            1,
        );

        let io_flags = FeatureFlags {
            uses_print: print,
            uses_input: input,
            ..own
        };
        let unit = self.finish_unit(&node, text, globals, io_flags, invoked)?;
        Ok((stub, unit))
    }

    /// Proxy class for `class_name` plus one unit per reachable method and
    /// one for the constructor body.
    pub fn transform_class(
        &self,
        module: &str,
        class_name: &str,
    ) -> Result<(ClassDef, Vec<FunctionUnit>), TransformError> {
        let src = self.module(module)?;
        let cls = self.class(module, class_name)?;
        let proxy = match parse(&self.proxy(Side::Client, module, cls, class_name))
            .expect("proxy parses")
            .body
            .remove(0)
            .kind
        {
            StmtKind::ClassDef(c) => c,
            _ => unreachable!(),
        };

        let prefix = format!("{module}.{class_name}");
        let mut method_nodes: Vec<String> = vec![qual(module, Some(class_name), "__init__")];
        method_nodes.extend(
            cls.methods()
                .filter(|m| m.name != "__init__")
                .map(|m| qual(module, Some(class_name), &m.name)),
        );
        let reachable: Vec<String> = method_nodes
            .iter()
            .filter(|n| self.deps.nodes.contains(*n) && self.deps.definition(n).is_some())
            .cloned()
            .collect();

        let mut print = false;
        let mut input = false;
        for n in &method_nodes {
            let (p, i) = self.io(n);
            print |= p;
            input |= i;
        }
        let features: Vec<FeatureFlags> = cls.methods().map(crate::analyzer::detect_features).collect();
        let (header, globals) = self.unit_header(src, &features.iter().collect::<Vec<_>>());
        let dep_nodes = self.dependency_nodes(&method_nodes, Some(&prefix));
        let (dep_code, invoked) = self.dependency_code(module, &dep_nodes)?;

        // The full class, with the constructor body moved to __remote__init__.
        let mut body = Vec::new();
        let init = cls.method("__init__");
        let init_params: Vec<String> = init.map(|d| d.params.clone()).unwrap_or_else(|| vec!["self".into()]);
        body.push(parse_def(&format!(
            "def __init__({}):\n    self.{REMOTE_INIT}({})\n",
            init_params.join(", "),
            init_params[1..].join(", ")
        )));
        let mut remote = match init {
            Some(d) => d.clone(),
            None => parse_def("def __init__(self):\n    pass\n"),
        };
        remote.name = REMOTE_INIT.to_string();
        self.rename_cross_module(src, &mut remote);
        body.push(remote);
        for m in cls.methods().filter(|m| m.name != "__init__") {
            let mut m = m.clone();
            self.rename_cross_module(src, &mut m);
            body.push(m);
        }
        let full = ClassDef {
            name: cls.name.clone(),
            body: body.into_iter().map(|d| Stmt::new(StmtKind::FunctionDef(d))).collect(),
            span: cls.span,
        };
        let class_text = emit_stmt(&Stmt::new(StmtKind::ClassDef(full)), 0);

        let io_flags = FeatureFlags {
            uses_print: print,
            uses_input: input,
            global_reads: features
                .iter()
                .flat_map(|f| f.global_reads.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            global_writes: features
                .iter()
                .flat_map(|f| f.global_writes.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let call = "faas_runtime.call_method(_faas_obj, event[\"method\"], event[\"args\"])".to_string();
        let handler = self.handler(print, input, "_faas_call", "\"state\": faas_runtime.state(_faas_obj), ");
        let handler = handler.replacen(
            "_faas_return = _faas_call\n",
            &format!("_faas_obj = faas_runtime.restore({class_name}, event[\"state\"])\n    _faas_return = {call}\n"),
            1,
        );

        let mut units = Vec::new();
        for node in &reachable {
            let mut text = header.clone();
            text += "\n";
            text += &dep_code;
            text += &class_text;
            text += "\n";
            text += &handler;
            units.push(self.finish_unit(node, text, globals.clone(), io_flags.clone(), invoked.clone())?);
        }
        Ok((proxy, units))
    }

    /// The client side of `module`: runtime import first, then the original
    /// statements in order with definitions replaced by stubs and proxies.
    pub fn rewrite_globals_and_main(&self, module: &str) -> Result<RewrittenModule, TransformError> {
        let src = self.module(module)?;
        let mut body = vec![Stmt::new(StmtKind::Import(vec![RUNTIME_MODULE.to_string()]))];
        for stmt in &src.tree.body {
            body.push(match &stmt.kind {
                StmtKind::FunctionDef(def) => {
                    let stub = parse_def(&self.function_stub(Side::Client, module, def, &def.name));
                    Stmt {
                        kind: StmtKind::FunctionDef(stub),
                        span: stmt.span,
                    }
                }
                StmtKind::ClassDef(cls) => {
                    let text = self.proxy(Side::Client, module, cls, &cls.name);
                    let mut tree = parse(&text).expect("proxy parses");
                    Stmt {
                        kind: tree.body.remove(0).kind,
                        span: stmt.span,
                    }
                }
                _ => stmt.clone(),
            });
        }
        Ok(RewrittenModule::from_tree(module, Module { body }))
    }
}

fn parse_def(text: &str) -> FunctionDef {
    match parse(text).expect("generated definition parses").body.remove(0).kind {
        StmtKind::FunctionDef(d) => d,
        _ => unreachable!("generated text is a single definition"),
    }
}

fn collect_assigned(body: &[Stmt], out: &mut HashSet<String>) {
    for stmt in body {
        match &stmt.kind {
            StmtKind::Assign { target, .. } | StmtKind::AugAssign { target, .. } => {
                if let Some(n) = target.as_name() {
                    out.insert(n.to_string());
                }
            }
            StmtKind::ForRange { var, body, .. } => {
                out.insert(var.clone());
                collect_assigned(body, out);
            }
            StmtKind::If { branches, orelse } => {
                for (_, b) in branches {
                    collect_assigned(b, out);
                }
                if let Some(b) = orelse {
                    collect_assigned(b, out);
                }
            }
            StmtKind::While { body, .. } => collect_assigned(body, out),
            _ => {}
        }
    }
}

/// Analyzes `entry` and everything it imports, then transforms every
/// application module. Units are produced for reachable definitions only.
pub fn transform_program(
    entry: &SourceModule,
    loader: &dyn ModuleLoader,
    options: TransformOptions,
) -> Result<Program, TransformError> {
    if options.mode == Mode::Production && options.endpoint.is_none() {
        return Err(TransformError::MissingEndpoint);
    }
    let start = Instant::now();
    let deps = build_dependency_map_with(entry, loader, &options.invocations)?;
    let t = Transformer::new(deps, options)?;
    let mut modules = Vec::new();
    let mut units = Vec::new();
    let mut proxies = Vec::new();
    for m in &t.deps.modules {
        modules.push(t.rewrite_globals_and_main(&m.name)?);
        for f in m.tree.functions() {
            if t.deps.nodes.contains(&qual(&m.name, None, &f.name)) {
                units.push(t.transform_function(&m.name, &f.name)?.1);
            }
        }
        for c in m.tree.classes() {
            proxies.push(t.proxy_spec(c));
            units.extend(t.transform_class(&m.name, &c.name)?.1);
        }
    }
    Ok(Program {
        entry: entry.name.clone(),
        modules,
        units,
        proxies,
        mode: t.options.mode,
        endpoint: t.options.endpoint.clone(),
        transform_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

/// What to run on the client side of a transformed program.
#[derive(Debug, Clone, Default)]
pub struct ClientRun {
    pub stdin: Vec<String>,
    pub limits: Limits,
    /// Evaluate this expression in the entry module instead of running its
    /// main guard.
    pub call: Option<Expr>,
}

impl Program {
    pub fn unit(&self, name: &str) -> Option<&FunctionUnit> {
        self.units.iter().find(|u| u.unit_name == name)
    }

    pub fn unit_sources(&self) -> Vec<(String, String)> {
        self.units
            .iter()
            .map(|u| (u.unit_name.clone(), u.source.clone()))
            .collect()
    }

    /// Runs the client side with every unit executing in-process behind the
    /// JSON boundary. `call_count` is the number of handler invocations.
    pub fn run_local(&self, run: ClientRun) -> Result<ExecResult, RuntimeError> {
        let units = self.unit_sources();
        let timeout = self.units.iter().map(|u| u.config.timeout_s).max();
        let (result, count) = self.run_client(run, move || {
            let rt = LocalRuntime::with_timeout(units, timeout.map(|s| std::time::Duration::from_secs(s as u64)));
            let counter = rt.clone();
            (
                rt.dispatcher(),
                Box::new(move || counter.dispatch_count()) as Box<dyn Fn() -> u64>,
            )
        })?;
        Ok(ExecResult {
            call_count: count,
            ..result
        })
    }

    /// Runs the client side against the dispatcher `make` builds on the
    /// interpreter thread. Returns the result and the final value of the
    /// returned counter.
    pub fn run_client<F>(&self, run: ClientRun, make: F) -> Result<(ExecResult, u64), RuntimeError>
    where
        F: FnOnce() -> (Rc<dyn Dispatcher>, Box<dyn Fn() -> u64>) + Send + 'static,
    {
        let modules: Vec<(String, Module)> = self.modules.iter().map(|m| (m.name.clone(), m.tree.clone())).collect();
        let entry = self.entry.clone();
        on_big_stack(move || {
            let (dispatcher, count) = make();
            let interp = Interpreter::new();
            for (name, tree) in modules {
                interp.add_source(&name, tree);
            }
            interp.set_dispatcher(dispatcher);
            interp.set_stdin(run.stdin);
            interp.set_limits(run.limits);
            let value = match &run.call {
                None => {
                    interp.run_main(&entry)?;
                    Value::None
                }
                Some(expr) => {
                    let id = interp.import(&entry)?;
                    interp.eval_in(id, expr)?
                }
            };
            let result = ExecResult {
                return_value: to_json_lossy(&value),
                stdout: interp.take_stdout(),
                call_count: 0,
                step_count: interp.step_count(),
                called: Default::default(),
            };
            Ok((result, count()))
        })
    }
}

/// Runs one unit's handler for `event` in a fresh local environment, with
/// JSON on both legs.
pub fn call_with_json_roundtrip(
    program: &Program,
    unit: &str,
    event: &serde_json::Value,
) -> Result<serde_json::Value, crate::interp::DispatchError> {
    let units = program.unit_sources();
    let unit = unit.to_string();
    let event = event.clone();
    on_big_stack(move || LocalRuntime::new(units).call_with_json_roundtrip(&unit, &event))
}

#[cfg(test)]
mod tests;
