mod common;

use common::*;
use faasforge::cli::{run_cli, EXIT_FAILED, EXIT_OK, EXIT_REJECTED};

fn run(args: &[&str], input: &str) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("faasforge")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut stdin = input.as_bytes();
    let code = run_cli(&argv, &mut out, &mut err, &mut stdin);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn corpus(name: &str) -> String {
    corpus_dir().join(format!("{name}.py")).display().to_string()
}

#[test]
fn local_mode_prints_the_program_output() {
    assert_eq!(
        run(&["--local", &corpus("fib")], ""),
        (EXIT_OK, "55\n".into(), String::new())
    );
    let (code, out, _) = run(&["--local", &corpus("greet")], "Ada\nBob\n");
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "Hello, Ada\nGoodbye, Bob\nletters: 6\n");
}

#[test]
fn files_run_in_order() {
    let (code, out, _) = run(&["--local", &corpus("fib"), &corpus("counter")], "");
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "55\n2\n");
}

#[test]
fn production_mode_deploys_to_the_endpoint() {
    let (emu, gw) = gateway();
    let (code, out, err) = run(&[&corpus("fib"), "--endpoint", &gw.url()], "");
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out, "55\n");
    assert_eq!(emu.list(), vec!["fib_fib"]);
}

#[test]
fn debug_mode_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().display().to_string();
    let (code, out, _) = run(&["--debug", "--local", "--outdir", &outdir, &corpus("geometry")], "");
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "");
    let base = dir.path().join("geometry");
    assert!(base.join("geometry_rewritten.py").is_file());
    assert!(base.join("shapes_rewritten.py").is_file());
    assert!(base.join("units").join("geometry_total_area.py").is_file());
}

#[test]
fn search_paths() {
    let dir = tempfile::tempdir().unwrap();
    let lib = dir.path().join("lib");
    std::fs::create_dir(&lib).unwrap();
    std::fs::write(lib.join("helper.py"), "def twice(x):\n    return 2 * x\n").unwrap();
    let main = dir.path().join("main.py");
    std::fs::write(
        &main,
        "import helper\n\nif __name__ == \"__main__\":\n    print(helper.twice(21))\n",
    )
    .unwrap();
    let main = main.display().to_string();
    let (code, _, err) = run(&["--local", &main], "");
    assert_eq!(code, EXIT_REJECTED, "{err}");
    assert!(err.contains("helper"));
    let (code, out, _) = run(&["--local", "--path", &lib.display().to_string(), &main], "");
    assert_eq!((code, out.as_str()), (EXIT_OK, "42\n"));
}

#[test]
fn rejected_programs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.py");
    std::fs::write(
        &bad,
        "def f(xs):\n    return [x for x in xs]\n\nsquare = lambda v: v * v\n",
    )
    .unwrap();
    let (code, _, err) = run(&["--local", &bad.display().to_string()], "");
    assert_eq!(code, EXIT_REJECTED);
    assert_eq!(err.lines().count(), 3, "{err}");
    assert!(err.contains("2:12"), "{err}");
    assert!(err.contains("comprehension"));
    assert!(err.contains("4:10: anonymous function"));

    std::fs::write(
        &bad,
        "def f(a):\n    return a\n\nif __name__ == \"__main__\":\n    print(f(1, 2))\n",
    )
    .unwrap();
    let (code, _, err) = run(&["--local", &bad.display().to_string()], "");
    assert_eq!(code, EXIT_REJECTED);
    assert!(err.contains("takes 1 argument"), "{err}");

    std::fs::write(&bad, "def f(:\n").unwrap();
    assert_eq!(run(&["--local", &bad.display().to_string()], "").0, EXIT_REJECTED);
}

#[test]
fn failures_exit_with_two() {
    assert_eq!(run(&["--local", "/no/such/file.py"], "").0, EXIT_FAILED);
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("div.py");
    std::fs::write(
        &f,
        "def div(a, b):\n    return a // b\n\nif __name__ == \"__main__\":\n    print(div(1, 0))\n",
    )
    .unwrap();
    let (code, _, err) = run(&["--local", &f.display().to_string()], "");
    assert_eq!(code, EXIT_FAILED);
    assert!(err.contains("ZeroDivision") || err.contains("division"), "{err}");
    // Nothing listens on port 9 of the loopback address.
    let (code, _, err) = run(&[&corpus("fib"), "--endpoint", "127.0.0.1:9"], "");
    assert_eq!(code, EXIT_FAILED, "{err}");
}

#[test]
fn bench_prints_a_report() {
    let (code, out, err) = run(&["--local", "--bench", "fib(8)", &corpus("fib")], "");
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("fib(8)"), "{out}");
    assert!(out.contains(&(2 * 21 - 1).to_string()), "{out}");
}
