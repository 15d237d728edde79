//! Static call graph over application modules, module scope classification
//! and per-function feature detection.
//!
//! Calls resolve by name: `f(...)` to a function or class of the current
//! module, `m.f(...)` to a member of an imported module, `self.m(...)` to a
//! method of the enclosing class and `v.m(...)` to a method of the class `v`
//! was constructed from. Anything else cannot be resolved statically and is
//! rejected.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use thiserror::Error;

use crate::interp::{RUNTIME_MODULE, SYSTEM_MODULES};
use crate::syntax::{
    check_subset, walk_expr, walk_stmt_exprs, ClassDef, Expr, ExprKind, FunctionDef, SourceModule, SourceSpan, Stmt,
    StmtKind, SubsetViolation, SyntaxError,
};

/// Built-in callables; calls to them never produce edges.
pub const BUILTINS: &[&str] = &["print", "input", "len", "range", "str", "int", "float"];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalyzeError {
    #[error("{module}: {span}: cannot resolve import of {name:?}")]
    UnresolvedImport {
        module: String,
        name: String,
        span: SourceSpan,
    },
    #[error("{module}: {}", violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Violations {
        module: String,
        violations: Vec<SubsetViolation>,
    },
    #[error("{module}: {error}")]
    Syntax { module: String, error: SyntaxError },
    #[error("{module}: {span}: {message}")]
    UnresolvedCall {
        module: String,
        span: SourceSpan,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

/// Resolves module names to parsed application modules. `Ok(None)` means
/// the name is not part of the application.
pub trait ModuleLoader {
    fn load(&self, name: &str) -> Result<Option<SourceModule>, AnalyzeError>;
}

/// Looks for `<path>/<name>.py` in each search path, in order.
#[derive(Debug, Clone, Default)]
pub struct SearchPathLoader {
    pub paths: Vec<PathBuf>,
}

impl SearchPathLoader {
    pub fn new(paths: impl IntoIterator<Item = PathBuf>) -> Self {
        SearchPathLoader {
            paths: paths.into_iter().collect(),
        }
    }
}

impl ModuleLoader for SearchPathLoader {
    fn load(&self, name: &str) -> Result<Option<SourceModule>, AnalyzeError> {
        for dir in &self.paths {
            let path = dir.join(format!("{name}.py"));
            if path.is_file() {
                return load_file(&path).map(Some);
            }
        }
        Ok(None)
    }
}

/// Reads and parses one source file, naming the module after its stem.
pub fn load_file(path: &Path) -> Result<SourceModule, AnalyzeError> {
    let io = |message: String| AnalyzeError::Io {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
    let name = SourceModule::name_for_path(path).ok_or_else(|| io("no file name".into()))?;
    SourceModule::new(name.clone(), text).map_err(|error| AnalyzeError::Syntax { module: name, error })
}

/// Serves modules held in memory.
#[derive(Debug, Clone, Default)]
pub struct MemoryLoader {
    modules: HashMap<String, SourceModule>,
}

impl MemoryLoader {
    pub fn new(modules: impl IntoIterator<Item = SourceModule>) -> Self {
        MemoryLoader {
            modules: modules.into_iter().map(|m| (m.name.clone(), m)).collect(),
        }
    }
}

impl ModuleLoader for MemoryLoader {
    fn load(&self, name: &str) -> Result<Option<SourceModule>, AnalyzeError> {
        Ok(self.modules.get(name).cloned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Application,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleScope {
    pub name: String,
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallSite {
    pub caller: String,
    pub callee: String,
    pub span: SourceSpan,
    /// Arguments passed, counting the receiver of a method call.
    pub argc: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureFlags {
    pub uses_print: bool,
    pub uses_input: bool,
    pub global_reads: Vec<String>,
    pub global_writes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyMap {
    /// `module.function` and `module.Class.method` identifiers.
    pub nodes: BTreeSet<String>,
    pub edges: Vec<CallSite>,
    /// Pseudo-caller standing for the entry module's top-level code.
    pub entry: String,
    pub scopes: Vec<ModuleScope>,
    /// Application modules in discovery order, entry first.
    pub modules: Vec<SourceModule>,
    pub features: BTreeMap<String, FeatureFlags>,
}

/// Name of the pseudo-caller for a module's top-level code.
pub fn main_node(module: &str) -> String {
    format!("{module}.__main__")
}

impl DependencyMap {
    pub fn module(&self, name: &str) -> Option<&SourceModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn scope_of(&self, name: &str) -> Option<Scope> {
        self.scopes.iter().find(|s| s.name == name).map(|s| s.scope)
    }

    pub fn has_edge(&self, caller: &str, callee: &str) -> bool {
        self.edges.iter().any(|e| e.caller == caller && e.callee == callee)
    }

    /// Distinct callees of `caller`, application and system alike.
    pub fn callees(&self, caller: &str) -> BTreeSet<&str> {
        self.edges
            .iter()
            .filter(|e| e.caller == caller)
            .map(|e| e.callee.as_str())
            .collect()
    }

    /// The definition behind a node, if it has one. A class without a
    /// constructor still has an `__init__` node but no definition.
    pub fn definition(&self, node: &str) -> Option<&FunctionDef> {
        let (module, rest) = node.split_once('.')?;
        let tree = &self.module(module)?.tree;
        match rest.split_once('.') {
            None => tree.functions().find(|f| f.name == rest),
            Some((class, method)) => tree.classes().find(|c| c.name == class)?.method(method),
        }
    }

    /// Print/input usage of `node` or anything it reaches.
    pub fn transitive_io(&self, node: &str) -> (bool, bool) {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([node]);
        let (mut print, mut input) = (false, false);
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n) {
                continue;
            }
            if let Some(f) = self.features.get(n) {
                print |= f.uses_print;
                input |= f.uses_input;
            }
            for e in &self.edges {
                if e.caller == n && self.nodes.contains(&e.callee) {
                    queue.push_back(&e.callee);
                }
            }
        }
        (print, input)
    }
}

/// Discovers the application modules reachable from `entry` through
/// imports, walking both arms of conditional imports.
fn discover(
    entry: &SourceModule,
    loader: &dyn ModuleLoader,
) -> Result<(Vec<SourceModule>, Vec<ModuleScope>), AnalyzeError> {
    let mut modules = vec![entry.clone()];
    let mut scopes = vec![ModuleScope {
        name: entry.name.clone(),
        scope: Scope::Application,
    }];
    let mut i = 0;
    while i < modules.len() {
        let current = modules[i].clone();
        for (name, span) in import_sites(&current.tree.body) {
            if scopes.iter().any(|s| s.name == name) {
                continue;
            }
            if SYSTEM_MODULES.contains(&name.as_str()) {
                scopes.push(ModuleScope {
                    name,
                    scope: Scope::System,
                });
                continue;
            }
            let found = if name == RUNTIME_MODULE {
                None
            } else {
                loader.load(&name)?
            };
            match found {
                Some(m) => {
                    scopes.push(ModuleScope {
                        name: name.clone(),
                        scope: Scope::Application,
                    });
                    modules.push(m);
                }
                None => {
                    return Err(AnalyzeError::UnresolvedImport {
                        module: current.name.clone(),
                        name,
                        span,
                    })
                }
            }
        }
        i += 1;
    }
    Ok((modules, scopes))
}

fn import_sites(body: &[Stmt]) -> Vec<(String, SourceSpan)> {
    fn walk(body: &[Stmt], out: &mut Vec<(String, SourceSpan)>) {
        for stmt in body {
            match &stmt.kind {
                StmtKind::Import(names) => out.extend(names.iter().map(|n| (n.clone(), stmt.span))),
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
    walk(body, &mut out);
    out
}

enum Target {
    Node(String),
    System(String),
    Builtin,
}

struct Resolver<'a> {
    modules: &'a [SourceModule],
    scopes: &'a [ModuleScope],
}

/// Where a call is being resolved from.
struct Context<'a> {
    module: &'a SourceModule,
    class: Option<&'a ClassDef>,
    /// Parameters and assigned names; these shadow module-level names.
    locals: HashSet<String>,
    /// Locals whose every assignment constructs the same class.
    instances: HashMap<String, String>,
}

impl<'a> Resolver<'a> {
    fn module(&self, name: &str) -> Option<&'a SourceModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    fn imported(&self, ctx: &Context, name: &str) -> Option<Scope> {
        if ctx.locals.contains(name) || !ctx.module.tree.imports().iter().any(|i| i == name) {
            return None;
        }
        self.scopes.iter().find(|s| s.name == name).map(|s| s.scope)
    }

    /// `name` looked up among one module's top-level definitions.
    fn member(&self, module: &SourceModule, name: &str) -> Option<String> {
        if module.tree.functions().any(|f| f.name == name) {
            return Some(format!("{}.{name}", module.name));
        }
        if module.tree.classes().any(|c| c.name == name) {
            return Some(format!("{}.{name}.__init__", module.name));
        }
        None
    }

    /// The class a constructor call builds, as `module.Class`.
    fn constructed_class(&self, ctx: &Context, value: &Expr) -> Option<String> {
        let ExprKind::Call(callee, _) = &value.kind else {
            return None;
        };
        let (module, name) = match &callee.kind {
            ExprKind::Name(n) if !ctx.locals.contains(n) => (ctx.module, n.as_str()),
            ExprKind::Attribute(base, n) => {
                let m = base.as_name()?;
                if self.imported(ctx, m) != Some(Scope::Application) {
                    return None;
                }
                (self.module(m)?, n.as_str())
            }
            _ => return None,
        };
        module
            .tree
            .classes()
            .any(|c| c.name == name)
            .then(|| format!("{}.{name}", module.name))
    }

    fn method_of(&self, class_path: &str, method: &str) -> Option<String> {
        let (module, class) = class_path.split_once('.')?;
        let cls = self.module(module)?.tree.classes().find(|c| c.name == class)?;
        cls.method(method).map(|_| format!("{class_path}.{method}"))
    }

    fn resolve(&self, ctx: &Context, callee: &Expr) -> Result<Target, String> {
        match &callee.kind {
            ExprKind::Name(n) => {
                if ctx.locals.contains(n) {
                    return Err(format!("call through variable {n:?} cannot be resolved statically"));
                }
                if let Some(node) = self.member(ctx.module, n) {
                    return Ok(Target::Node(node));
                }
                if BUILTINS.contains(&n.as_str()) {
                    return Ok(Target::Builtin);
                }
                Err(format!("call to undefined name {n:?}"))
            }
            ExprKind::Attribute(base, attr) => {
                let Some(b) = base.as_name() else {
                    return Err("method call on a computed receiver cannot be resolved statically".into());
                };
                if b == "self" {
                    if let Some(cls) = ctx.class {
                        let path = format!("{}.{}", ctx.module.name, cls.name);
                        return self
                            .method_of(&path, attr)
                            .map(Target::Node)
                            .ok_or_else(|| format!("class {} has no method {attr:?}", cls.name));
                    }
                }
                if let Some(class) = ctx.instances.get(b) {
                    return self
                        .method_of(class, attr)
                        .map(Target::Node)
                        .ok_or_else(|| format!("class {class} has no method {attr:?}"));
                }
                match self.imported(ctx, b) {
                    Some(Scope::System) => Ok(Target::System(format!("{b}.{attr}"))),
                    Some(Scope::Application) => self
                        .module(b)
                        .and_then(|m| self.member(m, attr))
                        .map(Target::Node)
                        .ok_or_else(|| format!("module {b:?} has no function or class {attr:?}")),
                    None => Err(format!(
                        "receiver {b:?} is neither self, an imported module, nor a local built by a constructor"
                    )),
                }
            }
            _ => Err("only named functions and methods can be called".into()),
        }
    }

    fn context(
        &self,
        module: &'a SourceModule,
        class: Option<&'a ClassDef>,
        params: &[String],
        body: &[Stmt],
    ) -> Context<'a> {
        let mut ctx = Context {
            module,
            class,
            locals: params.iter().cloned().collect(),
            instances: HashMap::new(),
        };
        let globals = declared_globals(body);
        let mut assigns: IndexMap<String, Vec<&Expr>> = IndexMap::new();
        collect_assigns(body, &mut assigns);
        for name in assigns.keys() {
            if !globals.contains(name) {
                ctx.locals.insert(name.clone());
            }
        }
        for name in for_vars(body) {
            if !globals.contains(&name) {
                ctx.locals.insert(name);
            }
        }
        for (name, values) in assigns {
            let classes: BTreeSet<Option<String>> = values.iter().map(|v| self.constructed_class(&ctx, v)).collect();
            if let Some(Some(class)) = (classes.len() == 1).then(|| classes.into_iter().next().unwrap()) {
                ctx.instances.insert(name, class);
            }
        }
        ctx
    }
}

fn collect_assigns<'e>(body: &'e [Stmt], out: &mut IndexMap<String, Vec<&'e Expr>>) {
    for stmt in body {
        match &stmt.kind {
            StmtKind::Assign { target, value } => {
                if let Some(n) = target.as_name() {
                    out.entry(n.to_string()).or_default().push(value);
                }
            }
            StmtKind::AugAssign { target, value, .. } => {
                if let Some(n) = target.as_name() {
                    out.entry(n.to_string()).or_default().push(value);
                }
            }
            StmtKind::If { branches, orelse } => {
                for (_, b) in branches {
                    collect_assigns(b, out);
                }
                if let Some(b) = orelse {
                    collect_assigns(b, out);
                }
            }
            StmtKind::While { body, .. } | StmtKind::ForRange { body, .. } | StmtKind::MainGuard(body) => {
                collect_assigns(body, out)
            }
            _ => {}
        }
    }
}

fn for_vars(body: &[Stmt]) -> Vec<String> {
    let mut out = Vec::new();
    visit_blocks(body, &mut |s| {
        if let StmtKind::ForRange { var, .. } = &s.kind {
            out.push(var.clone());
        }
    });
    out
}

fn declared_globals(body: &[Stmt]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    visit_blocks(body, &mut |s| {
        if let StmtKind::Global(names) = &s.kind {
            for n in names {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        }
    });
    out
}

/// Visits statements of nested control-flow blocks, not nested definitions.
fn visit_blocks<'s>(body: &'s [Stmt], f: &mut dyn FnMut(&'s Stmt)) {
    for stmt in body {
        f(stmt);
        match &stmt.kind {
            StmtKind::If { branches, orelse } => {
                for (_, b) in branches {
                    visit_blocks(b, f);
                }
                if let Some(b) = orelse {
                    visit_blocks(b, f);
                }
            }
            StmtKind::While { body, .. } | StmtKind::ForRange { body, .. } | StmtKind::MainGuard(body) => {
                visit_blocks(body, f)
            }
            _ => {}
        }
    }
}

/// Call expressions in `body`, definitions excluded.
fn calls(body: &[Stmt]) -> Vec<&Expr> {
    let mut out = Vec::new();
    visit_blocks(body, &mut |s| {
        if matches!(s.kind, StmtKind::FunctionDef(_) | StmtKind::ClassDef(_)) {
            return;
        }
        walk_stmt_exprs(s, &mut |e| {
            if matches!(e.kind, ExprKind::Call(..)) {
                out.push(e);
            }
        });
    });
    out
}

/// Top-level statements that execute when the module runs, minus
/// definitions. The main guard only runs for the entry module.
fn top_level(module: &SourceModule, is_entry: bool) -> Vec<Stmt> {
    module
        .tree
        .body
        .iter()
        .filter(|s| match &s.kind {
            StmtKind::FunctionDef(_) | StmtKind::ClassDef(_) => false,
            StmtKind::MainGuard(_) => is_entry,
            _ => true,
        })
        .cloned()
        .collect()
}

/// Builds the call graph of everything reachable from `entry`'s top-level
/// code and the top-level code of the modules it imports.
pub fn build_dependency_map(entry: &SourceModule, loader: &dyn ModuleLoader) -> Result<DependencyMap, AnalyzeError> {
    build_dependency_map_with(entry, loader, &[])
}

/// Like [`build_dependency_map`], with `invocations` treated as extra
/// expression statements at the end of the entry module's top level.
pub fn build_dependency_map_with(
    entry: &SourceModule,
    loader: &dyn ModuleLoader,
    invocations: &[Expr],
) -> Result<DependencyMap, AnalyzeError> {
    let (modules, scopes) = discover(entry, loader)?;
    for m in &modules {
        let violations = check_subset(&m.tree);
        if !violations.is_empty() {
            return Err(AnalyzeError::Violations {
                module: m.name.clone(),
                violations,
            });
        }
    }
    let resolver = Resolver {
        modules: &modules,
        scopes: &scopes,
    };
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    let mut features = BTreeMap::new();
    let mut queue: VecDeque<String> = VecDeque::new();

    let expand = |caller: String,
                  ctx: &Context,
                  body: &[Stmt],
                  queue: &mut VecDeque<String>,
                  edges: &mut Vec<CallSite>|
     -> Result<(), AnalyzeError> {
        for call in calls(body) {
            let ExprKind::Call(callee, args) = &call.kind else {
                unreachable!()
            };
            let target = resolver
                .resolve(ctx, callee)
                .map_err(|message| AnalyzeError::UnresolvedCall {
                    module: ctx.module.name.clone(),
                    span: call.span,
                    message,
                })?;
            let receiver = matches!(&callee.kind, ExprKind::Attribute(base, _)
                if base.as_name().is_some_and(|b| b == "self" || ctx.instances.contains_key(b)));
            let constructor = matches!(&target, Target::Node(n) if n.ends_with(".__init__"));
            let argc = args.len() + usize::from(receiver || constructor);
            match target {
                Target::Builtin => {}
                Target::System(name) => edges.push(CallSite {
                    caller: caller.clone(),
                    callee: name,
                    span: call.span,
                    argc,
                }),
                Target::Node(name) => {
                    edges.push(CallSite {
                        caller: caller.clone(),
                        callee: name.clone(),
                        span: call.span,
                        argc,
                    });
                    queue.push_back(name);
                }
            }
        }
        Ok(())
    };

    for (i, m) in modules.iter().enumerate() {
        let mut body = top_level(m, i == 0);
        if i == 0 {
            body.extend(invocations.iter().map(|e| Stmt::new(StmtKind::Expr(e.clone()))));
        }
        let ctx = resolver.context(m, None, &[], &body);
        // At module level every assigned name is a global, but locals still
        // decide receiver types and shadowing of definitions.
        expand(main_node(&m.name), &ctx, &body, &mut queue, &mut edges)?;
    }

    while let Some(node) = queue.pop_front() {
        if !nodes.insert(node.clone()) {
            continue;
        }
        let mut parts = node.splitn(3, '.');
        let module = resolver
            .module(parts.next().expect("module part"))
            .expect("known module");
        let first = parts.next().expect("name part");
        let (class, def) = match parts.next() {
            None => (None, module.tree.functions().find(|f| f.name == first)),
            Some(method) => {
                let cls = module.tree.classes().find(|c| c.name == first).expect("known class");
                (Some(cls), cls.method(method))
            }
        };
        let Some(def) = def else {
            // Implicit constructor: nothing to expand.
            features.insert(node, FeatureFlags::default());
            continue;
        };
        features.insert(node.clone(), detect_features(def));
        let ctx = resolver.context(module, class, &def.params, &def.body);
        expand(node, &ctx, &def.body, &mut queue, &mut edges)?;
    }

    Ok(DependencyMap {
        nodes,
        edges,
        entry: main_node(&entry.name),
        scopes,
        modules,
        features,
    })
}

/// Print/input usage and global accesses of one function body.
pub fn detect_features(def: &FunctionDef) -> FeatureFlags {
    let mut flags = FeatureFlags {
        global_writes: declared_globals(&def.body),
        ..FeatureFlags::default()
    };
    let mut locals: HashSet<String> = def.params.iter().cloned().collect();
    let mut assigns = IndexMap::new();
    collect_assigns(&def.body, &mut assigns);
    locals.extend(assigns.into_keys());
    locals.extend(for_vars(&def.body));
    for g in &flags.global_writes {
        locals.remove(g);
    }
    let mut callee_names: HashSet<*const Expr> = HashSet::new();
    let mut reads = Vec::new();
    visit_blocks(&def.body, &mut |s| {
        walk_stmt_exprs(s, &mut |e| match &e.kind {
            ExprKind::Call(callee, _) => {
                match callee.as_name() {
                    Some("print") => flags.uses_print = true,
                    Some("input") => flags.uses_input = true,
                    _ => {}
                }
                walk_expr(callee, &mut |c| {
                    callee_names.insert(c as *const Expr);
                });
            }
            ExprKind::Name(n) => reads.push((e as *const Expr, n.clone())),
            _ => {}
        });
    });
    for (ptr, name) in reads {
        if callee_names.contains(&ptr) || locals.contains(&name) {
            continue;
        }
        if !flags.global_reads.contains(&name) {
            flags.global_reads.push(name);
        }
    }
    flags
}

/// Top-level assignments to plain names, in first-assignment order, each
/// with its last initializer.
pub fn collect_globals(module: &SourceModule) -> Vec<(String, Expr)> {
    let mut out: IndexMap<String, Expr> = IndexMap::new();
    for stmt in &module.tree.body {
        if let StmtKind::Assign { target, value } = &stmt.kind {
            if let Some(n) = target.as_name() {
                out.insert(n.to_string(), value.clone());
            }
        }
    }
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_expression;

    const FIB: &str = "def fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n";

    fn m(name: &str, text: &str) -> SourceModule {
        SourceModule::new(name, text).unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn edge_pairs(map: &DependencyMap) -> BTreeSet<(String, String)> {
        map.edges.iter().map(|e| (e.caller.clone(), e.callee.clone())).collect()
    }

    #[test]
    fn fibonacci_map() {
        let fib = m(
            "fib",
            &format!("{FIB}\nif __name__ == \"__main__\":\n    print(fib(20))\n"),
        );
        let map = build_dependency_map(&fib, &MemoryLoader::default()).unwrap();
        assert_eq!(map.nodes, set(&["fib.fib"]));
        assert_eq!(
            edge_pairs(&map),
            [("fib.__main__", "fib.fib"), ("fib.fib", "fib.fib")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect()
        );
        assert_eq!(map.entry, "fib.__main__");
    }

    #[test]
    fn system_callee_is_a_leaf() {
        let src = "import math\ndef f(x):\n    return math.sin(x)\nif __name__ == \"__main__\":\n    print(f(1))\n";
        let map = build_dependency_map(&m("s", src), &MemoryLoader::default()).unwrap();
        assert_eq!(map.nodes, set(&["s.f"]));
        assert!(map.has_edge("s.f", "math.sin"));
        assert_eq!(map.scope_of("math"), Some(Scope::System));
        assert_eq!(map.modules.len(), 1);
    }

    #[test]
    fn empty_main_guard() {
        let src = "def unused():\n    return 1\nif __name__ == \"__main__\":\n    pass\n";
        let map = build_dependency_map(&m("e", src), &MemoryLoader::default()).unwrap();
        assert!(map.nodes.is_empty());
        assert!(map.edges.is_empty());
    }

    #[test]
    fn cross_module_and_classes() {
        let shapes = m(
            "shapes",
            "class Box:\n    def __init__(self, w):\n        self.w = w\n    def area(self):\n        return self.w * self.side()\n    def side(self):\n        return self.w\n",
        );
        let main = m(
            "main",
            "import shapes\nif __name__ == \"__main__\":\n    b = shapes.Box(3)\n    print(b.area())\n",
        );
        let map = build_dependency_map(&main, &MemoryLoader::new([shapes])).unwrap();
        assert_eq!(
            map.nodes,
            set(&["shapes.Box.__init__", "shapes.Box.area", "shapes.Box.side"])
        );
        let init = map.edges.iter().find(|e| e.callee == "shapes.Box.__init__").unwrap();
        assert_eq!(init.argc, 2);
        assert!(map.has_edge("shapes.Box.area", "shapes.Box.side"));
    }

    #[test]
    fn conditional_imports_walk_both_arms() {
        let a = m("a", "def f():\n    return 1\n");
        let b = m("b", "def f():\n    return 2\n");
        let main = m("main", "x = 1\nif x == 1:\n    import a\nelse:\n    import b\n");
        let map = build_dependency_map(&main, &MemoryLoader::new([a, b])).unwrap();
        assert_eq!(map.modules.len(), 3);
    }

    #[test]
    fn resolution_failures() {
        let err = build_dependency_map(&m("x", "import nowhere\n"), &MemoryLoader::default()).unwrap_err();
        assert!(matches!(err, AnalyzeError::UnresolvedImport { ref name, .. } if name == "nowhere"));
        let src = "def f(g):\n    return g(1)\nif __name__ == \"__main__\":\n    f(1)\n";
        let err = build_dependency_map(&m("x", src), &MemoryLoader::default()).unwrap_err();
        assert!(matches!(err, AnalyzeError::UnresolvedCall { .. }));
        let err = build_dependency_map(&m("x", "f = lambda: 1\n"), &MemoryLoader::default()).unwrap_err();
        assert!(matches!(err, AnalyzeError::Violations { .. }));
        let dep = m("dep", "def f(a=1):\n    return a\n");
        let err = build_dependency_map(&m("x", "import dep\n"), &MemoryLoader::new([dep])).unwrap_err();
        assert!(matches!(err, AnalyzeError::Violations { ref module, .. } if module == "dep"));
    }

    #[test]
    fn features() {
        let tree = crate::syntax::parse(FIB).unwrap();
        let fib = tree.functions().next().unwrap();
        assert_eq!(detect_features(fib), FeatureFlags::default());

        let src = "import math\ninvocations = 0\ndef fibs(x):\n    global invocations\n    invocations += 1\n    s = 0.0\n    for i in range(invocations):\n        s += math.sin(i)\n    if x in (1, 2):\n        return 1\n    return fibs(x - 1) + fibs(x - 2)\n";
        let tree = crate::syntax::parse(src).unwrap();
        let f = detect_features(tree.functions().next().unwrap());
        assert_eq!(f.global_reads, vec!["invocations"]);
        assert_eq!(f.global_writes, vec!["invocations"]);
        assert!(!f.uses_print);

        let tree = crate::syntax::parse("def p():\n    print(\"x\")\n").unwrap();
        let f = detect_features(tree.functions().next().unwrap());
        assert!(f.uses_print && !f.uses_input);
        assert_eq!(detect_features(tree.functions().next().unwrap()), f);
    }

    #[test]
    fn globals() {
        let g = collect_globals(&m("g", "invocations = 0\n"));
        assert_eq!(g, vec![("invocations".to_string(), parse_expression("0").unwrap())]);
        assert!(collect_globals(&m("g", "def f():\n    return 1\n")).is_empty());
        let g = collect_globals(&m("g", "a = 1\nb = 3\na = 2\n"));
        assert_eq!(g[0], ("a".to_string(), parse_expression("2").unwrap()));
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn search_path_loader_reads_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("lib.py"), "def f():\n    return 1\n").unwrap();
        let main = m("main", "import lib\nprint(lib.f())\n");
        assert!(build_dependency_map(&main, &SearchPathLoader::default()).is_err());
        let map = build_dependency_map(&main, &SearchPathLoader::new([dir.path().to_path_buf()])).unwrap();
        assert_eq!(map.nodes, set(&["lib.f"]));
    }
}
