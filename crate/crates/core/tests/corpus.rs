mod common;

use common::*;
use faasforge::syntax::{emit, parse};
use faasforge::transform::Mode;

#[test]
fn every_entry_behaves_the_same_in_all_modes() {
    let (_emu, gw) = gateway();
    for (name, lines, _) in ENTRIES {
        let d = direct(name, lines, None);
        let l = local(name, lines, None);
        let e = emulated(&gw, name, lines, None);
        assert_eq!(d.stdout, l.stdout, "{name}: local");
        assert_eq!(d.stdout, e.stdout, "{name}: emulated");
    }
}

#[test]
fn return_values_agree() {
    let (_emu, gw) = gateway();
    for (name, lines, call) in ENTRIES {
        let d = direct(name, lines, Some(call));
        let l = local(name, lines, Some(call));
        let e = emulated(&gw, name, lines, Some(call));
        assert_eq!(d.return_value, l.return_value, "{name}: local");
        assert_eq!(d.return_value, e.return_value, "{name}: emulated");
        assert_eq!(d.stdout, l.stdout, "{name}: local stdout");
        assert_eq!(d.stdout, e.stdout, "{name}: emulated stdout");
    }
}

#[test]
fn known_outputs() {
    assert_eq!(local("fib", &[], None).stdout, "55\n");
    assert_eq!(
        local("greet", &["Ada", "Bob"], None).stdout,
        "Hello, Ada\nGoodbye, Bob\nletters: 6\n"
    );
    assert_eq!(local("guarded", &[], None).stdout, "");
    // F(30) by the closed recurrence, computed independently.
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..30 {
        (a, b) = (b, a + b);
    }
    assert_eq!(local("matrix", &[], None).stdout, format!("{a}\n"));
    assert_eq!(
        local("power", &[], None).stdout.lines().next().unwrap(),
        (1u128 << 100).to_string()
    );
}

#[test]
fn local_call_counts_match_direct() {
    for (name, lines, _) in ENTRIES {
        let d = direct(name, lines, None);
        let l = local(name, lines, None);
        assert_eq!(d.call_count, l.call_count, "{name}");
    }
}

#[test]
fn corpus_round_trips_through_the_printer() {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "py"))
        .collect();
    files.sort();
    assert!(files.len() >= 10);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        let tree = parse(&text).unwrap();
        let printed = emit(&tree);
        assert_eq!(parse(&printed).unwrap(), tree, "{}", f.display());
        assert_eq!(emit(&parse(&printed).unwrap()), printed, "{}", f.display());
    }
}

#[test]
fn generated_sources_round_trip_too() {
    for (name, _, _) in ENTRIES {
        let p = program(name, Mode::Local, None, None);
        for m in &p.modules {
            assert_eq!(emit(&parse(&m.source).unwrap()), m.source, "{}", m.name);
        }
        for u in &p.units {
            assert_eq!(emit(&parse(&u.source).unwrap()), u.source, "{}", u.unit_name);
        }
    }
}
