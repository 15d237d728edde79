#![allow(dead_code)]

use std::path::{Path, PathBuf};

use faasforge::analyzer::{build_dependency_map, load_file, SearchPathLoader};
use faasforge::emulator::{Emulator, Gateway, RemoteClient};
use faasforge::interp::{run_program, ExecResult, RunOptions};
use faasforge::syntax::{parse_expression, SourceModule};
use faasforge::transform::{transform_program, ClientRun, Mode, Program, TransformOptions};
use proptest::prelude::*;
use serde_json::{Map, Number, Value as Json};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Entry programs of the corpus with the stdin each one reads and an
/// expression to evaluate for a return value.
pub const ENTRIES: &[(&str, &[&str], &str)] = &[
    ("bank", &[], "fee(500)"),
    ("collatz", &[], "longest(20)"),
    ("counter", &[], "1"),
    ("fib", &[], "fib(12)"),
    ("fibs", &[], "fibs(8)"),
    ("gcd", &[], "lcm(21, 6)"),
    ("geometry", &[], "total_area(3)"),
    ("greet", &["Ada", "Bob"], "greet(\"Hi\")"),
    ("guarded", &[], "unused(41)"),
    ("matrix", &[], "power([[1, 1], [1, 0]], 10)"),
    ("power", &[], "power(3, 40)"),
    ("primes", &[], "count_primes(50)"),
    ("stack", &[], "balanced(\"(())\")"),
    ("textstats", &[], "report(\"a b c\")"),
];

pub fn loader() -> SearchPathLoader {
    SearchPathLoader::new([corpus_dir()])
}

pub fn entry(name: &str) -> SourceModule {
    load_file(&corpus_dir().join(format!("{name}.py"))).unwrap()
}

pub fn stdin(lines: &[&str]) -> Vec<String> {
    lines.iter().map(|s| s.to_string()).collect()
}

pub fn direct(name: &str, lines: &[&str], call: Option<&str>) -> ExecResult {
    let e = entry(name);
    let modules = build_dependency_map(&e, &loader()).unwrap().modules;
    run_program(
        &modules,
        name,
        RunOptions {
            stdin: stdin(lines),
            call: call.map(|c| parse_expression(c).unwrap()),
            ..RunOptions::default()
        },
    )
    .unwrap()
}

pub fn program(name: &str, mode: Mode, endpoint: Option<String>, call: Option<&str>) -> Program {
    let options = TransformOptions {
        mode,
        endpoint,
        invocations: call.map(|c| parse_expression(c).unwrap()).into_iter().collect(),
        ..TransformOptions::default()
    };
    transform_program(&entry(name), &loader(), options).unwrap()
}

pub fn client_run(lines: &[&str], call: Option<&str>) -> ClientRun {
    ClientRun {
        stdin: stdin(lines),
        call: call.map(|c| parse_expression(c).unwrap()),
        ..ClientRun::default()
    }
}

pub fn local(name: &str, lines: &[&str], call: Option<&str>) -> ExecResult {
    program(name, Mode::Local, None, call)
        .run_local(client_run(lines, call))
        .unwrap()
}

pub fn emulated(gateway: &Gateway, name: &str, lines: &[&str], call: Option<&str>) -> ExecResult {
    program(name, Mode::Production, Some(gateway.url()), call)
        .run_remote(RemoteClient::new(&gateway.url()), client_run(lines, call))
        .unwrap()
        .result
}

pub fn gateway() -> (Emulator, Gateway) {
    let emu = Emulator::default();
    let gw = Gateway::start(emu.clone(), "127.0.0.1:0").unwrap();
    (emu, gw)
}

fn json_leaf(floats: bool) -> BoxedStrategy<Json> {
    let mut leaves = vec![
        Just(Json::Null).boxed(),
        any::<bool>().prop_map(Json::Bool).boxed(),
        any::<i64>().prop_map(|i| Json::Number(i.into())).boxed(),
        // Past the i64 range.
        "[1-9][0-9]{19,30}"
            .prop_map(|s| serde_json::from_str(&s).unwrap())
            .boxed(),
        "[ -~é\u{2603}\n\t\"\\\\]{0,12}".prop_map(Json::String).boxed(),
    ];
    if floats {
        leaves.push(
            (-1e12f64..1e12)
                .prop_map(|f| Json::Number(Number::from_f64(f).unwrap()))
                .boxed(),
        );
    }
    proptest::strategy::Union::new(leaves).boxed()
}

/// Arbitrary JSON documents; integers include values past the i64 range.
pub fn json(floats: bool) -> impl Strategy<Value = Json> {
    json_leaf(floats).prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(Json::Array),
            prop::collection::btree_map("[a-z_]{1,6}", inner, 0..6)
                .prop_map(|m| Json::Object(m.into_iter().collect::<Map<_, _>>())),
        ]
    })
}
