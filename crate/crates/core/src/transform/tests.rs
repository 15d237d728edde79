use super::*;
use crate::analyzer::MemoryLoader;
use crate::interp::{run_program, RunOptions};
use crate::syntax::parse_expression;

const FIB: &str = "def fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n\nif __name__ == \"__main__\":\n    print(fib(20))\n";

fn module(name: &str, text: &str) -> SourceModule {
    SourceModule::new(name, text).unwrap()
}

fn program(entry: &str, others: &[(&str, &str)]) -> Program {
    try_program(entry, others).unwrap()
}

fn try_program(entry: &str, others: &[(&str, &str)]) -> Result<Program, TransformError> {
    let loader = MemoryLoader::new(others.iter().map(|(n, t)| module(n, t)));
    transform_program(&module("main", entry), &loader, TransformOptions::default())
}

/// The original program run directly, as the oracle for local mode.
fn direct(entry: &str, others: &[(&str, &str)], stdin: &[&str]) -> ExecResult {
    let mut modules = vec![module("main", entry)];
    modules.extend(others.iter().map(|(n, t)| module(n, t)));
    run_program(
        &modules,
        "main",
        RunOptions {
            stdin: stdin.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        },
    )
    .unwrap()
}

fn local(p: &Program, stdin: &[&str]) -> ExecResult {
    p.run_local(ClientRun {
        stdin: stdin.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    })
    .unwrap()
}

fn assert_same_behaviour(entry: &str, others: &[(&str, &str)], stdin: &[&str]) -> (ExecResult, ExecResult) {
    let d = direct(entry, others, stdin);
    let l = local(&program(entry, others), stdin);
    assert_eq!(d.stdout, l.stdout);
    (d, l)
}

#[test]
fn fib_local_matches_direct_with_one_invocation_per_call() {
    let (d, l) = assert_same_behaviour(FIB, &[], &[]);
    assert_eq!(l.stdout, "6765\n");
    assert_eq!(d.call_count, 13529);
    assert_eq!(l.call_count, 13529);
}

#[test]
fn fib_unit_shape() {
    let p = program(FIB, &[]);
    assert_eq!(p.units.len(), 1);
    let u = &p.units[0];
    assert_eq!(u.unit_name, "main_fib");
    assert_eq!(u.handler_name, HANDLER);
    assert!(u.source.starts_with("import faas_runtime\n"));
    assert!(u.source.contains("def _faas_impl_fib(x):"));
    assert!(u.source.contains("faas_runtime.invoke(\"main_fib\""));
    assert!(!u.source.contains("_faas_stdout"));
    assert_eq!(u.dependencies, BTreeSet::from(["main_fib".to_string()]));
    let client = &p.modules[0].source;
    assert!(client.starts_with("import faas_runtime\n"));
    assert!(client.contains("if __name__ == \"__main__\":\n    print(fib(20))"));
    assert!(!client.contains("x - 1"));
    assert!(check_subset(&u.tree).is_empty());
}

#[test]
fn handler_round_trip() {
    let p = program(FIB, &[]);
    let r = call_with_json_roundtrip(&p, "main_fib", &serde_json::json!({"args": [10]})).unwrap();
    assert_eq!(r, serde_json::json!({"return": 55, "stdout": ""}));
}

#[test]
fn call_expression_in_local_mode() {
    let p = program(FIB, &[]);
    let r = p
        .run_local(ClientRun {
            call: Some(parse_expression("fib(12)").unwrap()),
            ..Default::default()
        })
        .unwrap();
    assert_eq!(r.return_value, serde_json::json!(144));
    assert_eq!(r.call_count, 2 * 144 - 1);
    assert_eq!(r.stdout, "");
}

const FIBS: &str = "import math\ncalls = 0\nfactor = 2 * 3\n\ndef fibs(x):\n    global calls\n    calls += 1\n    if x in (1, 2):\n        return math.sin(1) * factor\n    return fibs(x - 1) + fibs(x - 2)\n\nif __name__ == \"__main__\":\n    print(fibs(8) > 0, calls)\n";

#[test]
fn globals_are_replicated_per_unit() {
    let p = program(FIBS, &[]);
    let u = &p.units[0];
    let names: Vec<&str> = u.replicated_globals.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, vec!["calls", "factor"]);
    assert!(u.source.contains("import math\n"));
    // The client's counter stays at zero: the increments happen in the unit.
    let l = local(&p, &[]);
    assert_eq!(l.stdout, "True 0\n");
    assert_eq!(direct(FIBS, &[], &[]).stdout, "True 41\n");
}

const IO: &str = "def greet(prefix):\n    name = input()\n    print(prefix, name)\n    shout(name)\n    return len(name)\n\ndef shout(s):\n    print(s + \"!\")\n\ndef quiet(a, b):\n    return a * b\n\nif __name__ == \"__main__\":\n    n = greet(\"hi\")\n    print(n, quiet(2, 3))\n    print()\n    print(input())\n";

#[test]
fn print_and_input_cross_the_boundary() {
    let (_, l) = assert_same_behaviour(IO, &[], &["bob", "last"]);
    assert_eq!(l.stdout, "hi bob\nbob!\n3 6\n\nlast\n");
    let p = program(IO, &[]);
    let greet = p.unit("main_greet").unwrap();
    assert!(greet.io_flags.uses_print && greet.io_flags.uses_input);
    assert!(greet.source.contains("faas_runtime.read_line(_faas_stdin)"));
    assert!(!greet.source.contains("print("));
    let quiet = p.unit("main_quiet").unwrap();
    assert!(!quiet.source.contains("_faas_stdout"));
}

#[test]
fn monads_are_idempotent() {
    let p = program(IO, &[]);
    for u in &p.units {
        let again = inject_io_monads(u.clone());
        assert_eq!(again.source, u.source, "{}", u.unit_name);
    }
}

const COUNTER: &str = "class Counter:\n    def __init__(self, start):\n        self.count = start\n    def increment(self):\n        self.count += 1\n        return self.count\n    def unused(self):\n        return 0\n\nif __name__ == \"__main__\":\n    c = Counter(5)\n    c.increment()\n    print(c.increment(), c.count)\n";

#[test]
fn classes_become_proxies() {
    let (d, l) = assert_same_behaviour(COUNTER, &[], &[]);
    assert_eq!(l.stdout, "7 7\n");
    assert_eq!(d.call_count, l.call_count);
    let p = program(COUNTER, &[]);
    let names: Vec<&str> = p.units.iter().map(|u| u.unit_name.as_str()).collect();
    assert_eq!(names, vec!["main_Counter___remote__init__", "main_Counter_increment"]);
    assert_eq!(
        p.proxies,
        vec![ProxySpec {
            class_name: "Counter".into(),
            method_names: vec![REMOTE_INIT.into(), "increment".into(), "unused".into()],
            classname_key: CLASSNAME_KEY.into(),
        }]
    );
    let client = &p.modules[0].source;
    assert!(client.contains("def increment(self):"));
    assert!(client.contains("def unused(self):"));
    assert!(!client.contains("self.count += 1"));
}

#[test]
fn class_without_constructor() {
    let src = "class Box:\n    def put(self, v):\n        self.v = v\n    def get(self):\n        return self.v\n\nif __name__ == \"__main__\":\n    b = Box()\n    b.put([1, 2])\n    print(b.get())\n";
    let (_, l) = assert_same_behaviour(src, &[], &[]);
    assert_eq!(l.stdout, "[1, 2]\n");
}

#[test]
fn methods_calling_functions_and_other_classes() {
    let src = "def double(x):\n    return 2 * x\n\nclass Acc:\n    def __init__(self):\n        self.total = 0\n    def add(self, x):\n        self.total += double(x)\n        print(\"added\", x)\n        return self.total\n\nclass User:\n    def run(self, n):\n        a = Acc()\n        for i in range(n):\n            a.add(i)\n        return a.total\n\nif __name__ == \"__main__\":\n    u = User()\n    print(u.run(4))\n";
    let (d, l) = assert_same_behaviour(src, &[], &[]);
    assert_eq!(l.stdout, "added 0\nadded 1\nadded 2\nadded 3\n12\n");
    assert_eq!(d.call_count, l.call_count);
}

#[test]
fn multi_module_programs() {
    let helper = "import math\nbase = 10\n\ndef scaled(x):\n    return base * x + math.sin(0)\n\ndef twice(x):\n    return scaled(x) * 2\n\nif __name__ == \"__main__\":\n    print(\"helper main\")\n";
    let entry = "import helper\n\ndef go(n):\n    return helper.twice(n) + 1\n\nprint(go(3), helper.scaled(1))\n";
    let (_, l) = assert_same_behaviour(entry, &[("helper", helper)], &[]);
    assert_eq!(l.stdout, "61.0 10.0\n");
    let p = program(entry, &[("helper", helper)]);
    assert_eq!(
        p.modules.iter().map(|m| m.name.as_str()).collect::<Vec<_>>(),
        vec!["main", "helper"]
    );
    let go = p.unit("main_go").unwrap();
    assert!(go.source.contains("_faas_helper__twice(n)"));
    assert_eq!(go.dependencies, BTreeSet::from(["helper_twice".to_string()]));
}

#[test]
fn unreachable_functions_get_stubs_but_no_unit() {
    let src = "def used():\n    return 1\n\ndef unused():\n    return 2\n\nprint(used())\n";
    let p = program(src, &[]);
    assert_eq!(p.units.len(), 1);
    assert!(p.modules[0].source.contains("def unused():"));
}

#[test]
fn empty_main_guard_program() {
    let src = "def f():\n    return 1\n\nif __name__ == \"__main__\":\n    pass\n";
    let p = program(src, &[]);
    assert!(p.units.is_empty());
    assert_eq!(local(&p, &[]).stdout, "");
}

#[test]
fn unit_names_are_unique() {
    let src = "def a_b():\n    return 1\n\nclass a:\n    def b(self):\n        return 2\n\nif __name__ == \"__main__\":\n    o = a()\n    print(a_b(), o.b())\n";
    let p = program(src, &[]);
    let mut names: Vec<&str> = p.units.iter().map(|u| u.unit_name.as_str()).collect();
    let n = names.len();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), n);
    assert_eq!(local(&p, &[]).stdout, "1 2\n");
}

#[test]
fn arity_mismatch_is_reported() {
    let e = try_program("def f(a, b):\n    return a\n\nprint(f(1))\n", &[]).unwrap_err();
    assert!(
        matches!(
            e,
            TransformError::Arity {
                expected: 2,
                got: 1,
                ..
            }
        ),
        "{e}"
    );
    let e = try_program(
        "class C:\n    def m(self, x):\n        return x\n\nc = 0\nif c:\n    o = C()\n    o.m()\n",
        &[],
    )
    .unwrap_err();
    assert!(
        matches!(
            e,
            TransformError::Arity {
                expected: 1,
                got: 0,
                ..
            }
        ),
        "{e}"
    );
}

#[test]
fn reserved_names_are_rejected() {
    for src in [
        "_faas_x = 1\n",
        "def f(_faas_a):\n    return 1\n",
        "import faas_runtime\n",
        "class C:\n    def __remote__init__(self):\n        pass\n",
        "x = 1\nprint(x.__classname__)\n",
    ] {
        let e = try_program(src, &[]).unwrap_err();
        assert!(
            matches!(
                e,
                TransformError::Reserved { .. } | TransformError::MethodCollision { .. } | TransformError::Analyze(_)
            ),
            "{src}: {e}"
        );
    }
}

#[test]
fn production_requires_endpoint() {
    let loader = MemoryLoader::new([]);
    let options = TransformOptions {
        mode: Mode::Production,
        ..Default::default()
    };
    assert_eq!(
        transform_program(&module("main", FIB), &loader, options).unwrap_err(),
        TransformError::MissingEndpoint
    );
}

#[test]
fn runtime_errors_in_units_surface_on_the_client() {
    let src = "def f(x):\n    return 1 / x\n\nprint(f(0))\n";
    let p = program(src, &[]);
    let e = p.run_local(ClientRun::default()).unwrap_err();
    assert_eq!(e.kind, crate::interp::ErrorKind::Remote);
    assert!(e.message.contains("division"), "{}", e.message);
}

#[test]
fn transformation_is_deterministic() {
    let a = program(IO, &[]);
    let b = program(IO, &[]);
    assert_eq!(a.units, b.units);
    assert_eq!(a.modules, b.modules);
}
