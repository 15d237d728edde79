use super::*;

const FIB: &str = "def fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n";

fn module(name: &str, text: &str) -> SourceModule {
    SourceModule::new(name, text).unwrap()
}

fn run(text: &str) -> ExecResult {
    run_module(&module("m", text), vec![], Limits::default()).unwrap()
}

fn run_err(text: &str) -> RuntimeError {
    run_module(&module("m", text), vec![], Limits::default()).unwrap_err()
}

/// Iterative oracle, independent of the interpreter.
fn fib_oracle(n: u64) -> u64 {
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 2..n {
        (a, b) = (b, a + b);
    }
    if n <= 2 {
        1
    } else {
        b
    }
}

#[test]
fn fib_twenty_prints_and_counts() {
    let r = run(&format!("{FIB}\nif __name__ == \"__main__\":\n    print(fib(20))\n"));
    assert_eq!(r.stdout, "6765\n");
    assert_eq!(r.call_count, 13529);
    assert!(r.step_count > 13529);
}

#[test]
fn no_user_calls() {
    let r = run("print(1+1)\n");
    assert_eq!(r.stdout, "2\n");
    assert_eq!(r.call_count, 0);
}

#[test]
fn call_count_law() {
    let m = module("fib", FIB);
    for x in 1..=20u64 {
        let r = run_program(
            std::slice::from_ref(&m),
            "fib",
            RunOptions {
                call: Some(crate::syntax::parse_expression(&format!("fib({x})")).unwrap()),
                ..RunOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.return_value, serde_json::json!(fib_oracle(x)));
        assert_eq!(r.call_count, 2 * fib_oracle(x) - 1, "x = {x}");
    }
}

#[test]
fn arithmetic_semantics() {
    let r = run("print(7 // 2, -7 // 2, 7 % -2, 7 / 2, 2 ** 100, 2 ** -1, 1e16, 0.1 + 0.2)\n");
    assert_eq!(
        r.stdout,
        "3 -4 -1 3.5 1267650600228229401496703205376 0.5 1e+16 0.30000000000000004\n"
    );
    let r = run("print(\"ab\" * 2, [1] + [2], (1,), True + 1, not 0, 1 < 2 < 3, 3 > 2 > 2)\n");
    assert_eq!(r.stdout, "abab [1, 2] (1,) 2 True True False\n");
    assert_eq!(run("print(1 or 2, 0 and 1, None or \"x\")\n").stdout, "1 0 x\n");
}

#[test]
fn containers_and_builtins() {
    let src = "m = {\"a\": 1}\nm[\"b\"] = [1, 2]\nm[\"b\"][0] += 5\nprint(m, len(m), \"a\" in m, 2 in m[\"b\"])\nprint(str(3) + \"x\", int(\"-12\"), int(2.9), float(\"1.5\"), len(\"héllo\"))\n";
    let r = run(src);
    assert_eq!(r.stdout, "{'a': 1, 'b': [6, 2]} 2 True True\n3x -12 2 1.5 5\n");
}

#[test]
fn loops_and_globals() {
    let src = "n = 0\ndef bump(k):\n    global n\n    for i in range(k):\n        n += i\n    return n\nbump(4)\nx = 10\nwhile x > 7:\n    x -= 1\nprint(bump(3), x)\n";
    assert_eq!(run(src).stdout, "9 7\n");
}

#[test]
fn locals_do_not_leak() {
    let src = "x = 1\ndef f():\n    x = 2\n    return x\nprint(f(), x)\n";
    assert_eq!(run(src).stdout, "2 1\n");
}

#[test]
fn classes() {
    let src = "class Counter:\n    def __init__(self):\n        self.count = 0\n    def increment(self):\n        self.count += 1\n        return self.count\nc = Counter()\nc.increment()\nprint(c.increment(), c.count)\n";
    let r = run(src);
    assert_eq!(r.stdout, "2 2\n");
    assert_eq!(r.call_count, 3);
}

#[test]
fn input_reads_stdin_queue() {
    let m = module("m", "a = input()\nb = input()\nprint(int(a) + int(b))\n");
    let r = run_module(&m, vec!["2".into(), "40".into()], Limits::default()).unwrap();
    assert_eq!(r.stdout, "42\n");
    let e = run_module(&m, vec!["2".into()], Limits::default()).unwrap_err();
    assert_eq!(e.kind, ErrorKind::StdinExhausted);
}

#[test]
fn math_and_imports() {
    let helper = module("helper", "def twice(x):\n    return 2 * x\n");
    let main = module(
        "main",
        "import math\nimport helper\nprint(helper.twice(3), math.sin(0))\n",
    );
    let r = run_program(
        &[main, helper],
        "main",
        RunOptions {
            trace_calls: true,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(r.stdout, "6 0.0\n");
    assert_eq!(r.called.into_iter().collect::<Vec<_>>(), vec!["helper.twice"]);
    assert_eq!(run_err("import nowhere\n").kind, ErrorKind::Import);
}

#[test]
fn main_guard_only_runs_for_main() {
    let lib = module(
        "lib",
        "def f():\n    return 1\nif __name__ == \"__main__\":\n    print(\"lib main\")\n",
    );
    let main = module("main", "import lib\nprint(lib.f())\n");
    let r = run_program(&[main, lib], "main", RunOptions::default()).unwrap();
    assert_eq!(r.stdout, "1\n");
}

#[test]
fn errors_carry_kind_and_span() {
    let e = run_err("x = 1\nprint(y)\n");
    assert_eq!(e.kind, ErrorKind::Name);
    assert_eq!(e.span.unwrap().line, 2);
    assert_eq!(run_err("print(1 / 0)\n").kind, ErrorKind::ZeroDivision);
    assert_eq!(run_err("print([1][3])\n").kind, ErrorKind::Index);
    assert_eq!(run_err("print({\"a\": 1}[\"b\"])\n").kind, ErrorKind::Key);
    assert_eq!(run_err("print(1 + \"a\")\n").kind, ErrorKind::Type);
    assert_eq!(run_err("def f(a):\n    return a\nf()\n").kind, ErrorKind::Type);
    assert_eq!(run_err("def f():\n    return f()\nf()\n").kind, ErrorKind::Recursion);
}

#[test]
fn budgets() {
    let looping = module("m", "while True:\n    pass\n");
    let e = run_module(
        &looping,
        vec![],
        Limits {
            max_steps: Some(10_000),
            timeout: None,
        },
    )
    .unwrap_err();
    assert_eq!(e.kind, ErrorKind::StepLimit);
    let start = Instant::now();
    let e = run_module(
        &looping,
        vec![],
        Limits {
            max_steps: None,
            timeout: Some(Duration::from_millis(100)),
        },
    )
    .unwrap_err();
    assert_eq!(e.kind, ErrorKind::Timeout);
    assert!(start.elapsed() < Duration::from_secs(1));
}

#[test]
fn deterministic_results() {
    let src = format!("{FIB}\nprint(fib(12))\n");
    assert_eq!(run(&src), run(&src));
}

// A unit written by hand in the shape the transformer produces: recursion
// goes back through the runtime, into the same warm environment.
const FIB_UNIT: &str = "import faas_runtime\n\ndef fib(x):\n    response = faas_runtime.invoke(\"fib_fib\", {\"args\": [x]})\n    return response[\"return\"]\n\ndef _faas_impl_fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n\ndef lambda_handler(event, context):\n    args = event[\"args\"]\n    r = _faas_impl_fib(args[0])\n    return {\"return\": r, \"stdout\": \"\"}\n";

#[test]
fn local_runtime_reenters_units() {
    let out = on_big_stack(|| {
        let rt = LocalRuntime::new([("fib_fib".to_string(), FIB_UNIT.to_string())]);
        let r = rt
            .call_with_json_roundtrip("fib_fib", &serde_json::json!({"args": [10]}))
            .unwrap();
        (r, rt.dispatch_count())
    });
    assert_eq!(out.0, serde_json::json!({"return": 55, "stdout": ""}));
    assert_eq!(out.1, 109);
}

#[test]
fn local_runtime_errors_become_payloads() {
    let unit = "def lambda_handler(event, context):\n    return event[\"args\"][0] / 0\n";
    let rt = LocalRuntime::new([("u".to_string(), unit.to_string())]);
    let r = rt
        .call_with_json_roundtrip("u", &serde_json::json!({"args": [1]}))
        .unwrap();
    assert_eq!(r["error"]["type"], "Runtime");
    let echo = "def lambda_handler(event, context):\n    return {\"return\": event[\"args\"][0]}\n";
    let rt = LocalRuntime::new([("e".to_string(), echo.to_string())]);
    let r = rt
        .call_with_json_roundtrip("e", &serde_json::json!({"args": [[1, 2]]}))
        .unwrap();
    assert_eq!(r, serde_json::json!({"return": [1, 2]}));
    assert!(matches!(
        rt.call_with_json_roundtrip("nope", &serde_json::json!({})),
        Err(DispatchError::UnknownFunction(_))
    ));
}

#[test]
fn proxy_natives() {
    let src = "import faas_runtime\nclass P:\n    def get(self):\n        return self.v\nobj = faas_runtime.restore(P, {\"v\": 3, \"__classname__\": \"P\"})\ns = faas_runtime.without(faas_runtime.state(obj), \"__classname__\")\nprint(faas_runtime.call_method(obj, \"get\", []), s)\nfaas_runtime.load_state(obj, {\"v\": 9})\nfaas_runtime.emit(\"raw\\n\")\nq = [\"a\"]\nprint(obj.get(), faas_runtime.read_line(q), q)\n";
    assert_eq!(run(src).stdout, "3 {'v': 3}\nraw\n9 a []\n");
}
