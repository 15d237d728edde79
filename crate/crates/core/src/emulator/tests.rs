use super::*;
use crate::analyzer::MemoryLoader;
use crate::package::pack;
use crate::syntax::SourceModule;
use crate::transform::{transform_program, ClientRun, Program, TransformOptions};
use serde_json::{json, Value as Json};

const FIB: &str = "def fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n\nif __name__ == \"__main__\":\n    print(fib(10))\n";

const COUNTER_UNIT: &str = "n = 0\n\ndef lambda_handler(event, context):\n    global n\n    n += 1\n    return {\"return\": n, \"stdout\": \"\"}\n";

const LOOP_UNIT: &str = "def lambda_handler(event, context):\n    while True:\n        pass\n";

fn archive(name: &str, source: &str, timeout_s: u32) -> UnitArchive {
    let config = UnitConfig {
        timeout_s,
        ..UnitConfig::new(name)
    };
    pack(name, source, &config).unwrap()
}

fn fib_program() -> Program {
    let loader = MemoryLoader::new([]);
    transform_program(
        &SourceModule::new("fib", FIB).unwrap(),
        &loader,
        TransformOptions::default(),
    )
    .unwrap()
}

fn deploy_fib(emu: &Emulator) {
    for u in &fib_program().units {
        emu.create(&u.unit_name, crate::package::package_unit(u, &u.config).unwrap())
            .unwrap();
    }
}

fn parse(text: &str) -> Json {
    serde_json::from_str(text).unwrap()
}

/// Memoized oracle, independent of the interpreter.
fn fib_oracle(n: usize) -> u64 {
    let mut memo = vec![1u64; n.max(2) + 1];
    for i in 3..=n {
        memo[i] = memo[i - 1] + memo[i - 2];
    }
    memo[n]
}

#[test]
fn deploy_list_invoke() {
    let emu = Emulator::default();
    deploy_fib(&emu);
    assert_eq!(emu.list(), vec!["fib_fib"]);
    let r = emu.invoke("fib_fib", "{\"args\": [10]}").unwrap();
    assert_eq!(parse(&r), json!({"return": fib_oracle(10), "stdout": ""}));
    // One top-level call plus 108 nested ones.
    assert_eq!(emu.stats("fib_fib").unwrap().invocations, 109);
}

#[test]
fn unknown_function() {
    let emu = Emulator::default();
    assert_eq!(
        emu.invoke("nope", "{}"),
        Err(EmulatorError::UnknownFunction("nope".into()))
    );
}

#[test]
fn warm_instances_keep_globals() {
    let emu = Emulator::default();
    emu.create("c", archive("c", COUNTER_UNIT, 5)).unwrap();
    let a = emu.invoke_detailed("c", "{}").unwrap();
    let b = emu.invoke_detailed("c", "{}").unwrap();
    assert_eq!(parse(&a.response)["return"], json!(1));
    assert_eq!(parse(&b.response)["return"], json!(2));
    assert!(a.cold && !b.cold);
    assert_eq!(a.instance, b.instance);
    let fresh = emu.invoke_cold("c", "{}").unwrap();
    assert_eq!(parse(&fresh.response)["return"], json!(1));
    assert_ne!(fresh.instance, a.instance);
    assert_eq!(emu.stats("c").unwrap().cold_starts, 2);
}

#[test]
fn redeploy_replaces_behaviour_and_state() {
    let emu = Emulator::default();
    emu.create("c", archive("c", COUNTER_UNIT, 5)).unwrap();
    emu.invoke("c", "{}").unwrap();
    emu.invoke("c", "{}").unwrap();
    // Same bytes: warm state survives.
    emu.create("c", archive("c", COUNTER_UNIT, 5)).unwrap();
    assert_eq!(parse(&emu.invoke("c", "{}").unwrap())["return"], json!(3));
    let changed = COUNTER_UNIT.replace("n += 1", "n += 10");
    emu.create("c", archive("c", &changed, 5)).unwrap();
    assert_eq!(parse(&emu.invoke("c", "{}").unwrap())["return"], json!(10));
}

#[test]
fn create_rejects_bad_archives() {
    let emu = Emulator::default();
    let bad = archive(
        "b",
        "def lambda_handler(event, context):\n    return [x for x in event]\n",
        5,
    );
    assert!(matches!(emu.create("b", bad), Err(EmulatorError::Invalid { .. })));
    let no_handler = archive("h", "x = 1\n", 5);
    assert!(matches!(
        emu.create("h", no_handler),
        Err(EmulatorError::Invalid { .. })
    ));
    let wrong = archive("w", COUNTER_UNIT, 5);
    assert!(matches!(
        emu.create("other", wrong),
        Err(EmulatorError::Package(PackageError::NameMismatch { .. }))
    ));
    let garbage = UnitArchive {
        bytes: b"not a zip".to_vec(),
    };
    assert!(matches!(
        emu.create("g", garbage),
        Err(EmulatorError::Package(PackageError::Malformed(_)))
    ));
    assert!(emu.list().is_empty());
}

#[test]
fn timeouts_are_enforced() {
    let emu = Emulator::default();
    emu.create("l", archive("l", LOOP_UNIT, 1)).unwrap();
    let start = Instant::now();
    let r = parse(&emu.invoke("l", "{}").unwrap());
    let took = start.elapsed();
    assert_eq!(r["error"]["type"], json!("Timeout"));
    assert!(took < Duration::from_millis(1050), "{took:?}");
}

#[test]
fn runtime_faults_become_payloads() {
    let emu = Emulator::default();
    let src = "def lambda_handler(event, context):\n    return {\"return\": event[\"args\"][0] // 0}\n";
    emu.create("z", archive("z", src, 5)).unwrap();
    let r = parse(&emu.invoke("z", "{\"args\": [1]}").unwrap());
    assert_eq!(r["error"]["type"], json!("Runtime"));
    let src = "def lambda_handler(event, context):\n    return {\"return\": input()}\n";
    emu.create("i", archive("i", src, 5)).unwrap();
    let r = parse(&emu.invoke("i", "{}").unwrap());
    assert_eq!(r["error"]["type"], json!("Runtime"));
}

#[test]
fn units_are_isolated() {
    let emu = Emulator::default();
    emu.create("a", archive("a", COUNTER_UNIT, 5)).unwrap();
    emu.create("b", archive("b", COUNTER_UNIT, 5)).unwrap();
    emu.invoke("a", "{}").unwrap();
    emu.invoke("a", "{}").unwrap();
    assert_eq!(parse(&emu.invoke("b", "{}").unwrap())["return"], json!(1));
}

#[test]
fn pool_cap_queues_requests() {
    let emu = Emulator::new(EmulatorConfig {
        pool_size: 2,
        ..Default::default()
    });
    let slow = "def lambda_handler(event, context):\n    i = 0\n    while i < 20000:\n        i += 1\n    return {\"return\": i}\n";
    emu.create("s", archive("s", slow, 30)).unwrap();
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let emu = emu.clone();
            std::thread::spawn(move || emu.invoke_detailed("s", "{}").unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(parse(&h.join().unwrap().response)["return"], json!(20000));
    }
    let stats = emu.stats("s").unwrap();
    assert_eq!(stats.invocations, 6);
    assert!(stats.instances <= 2, "{stats:?}");
}

#[test]
fn gateway_routes() {
    let emu = Emulator::default();
    let gw = Gateway::start(emu.clone(), "127.0.0.1:0").unwrap();
    let client = RemoteClient::new(&gw.url());
    let p = fib_program();
    let report = client
        .create(&crate::package::package_unit(&p.units[0], &p.units[0].config).unwrap())
        .unwrap();
    assert_eq!(report.name, "fib_fib");
    client.create(&archive("c", COUNTER_UNIT, 5)).unwrap();
    assert_eq!(client.list().unwrap(), vec!["c", "fib_fib"]);
    let over_http = client.invoke("fib_fib", "{\"args\": [1]}").unwrap();
    assert_eq!(parse(&over_http), json!({"return": 1, "stdout": ""}));
    assert_eq!(over_http, emu.invoke("fib_fib", "{\"args\": [1]}").unwrap());
    assert_eq!(
        client.invoke("nope", "{}"),
        Err(RemoteError::UnknownFunction("nope".into()))
    );
    assert!(matches!(
        client.invoke("fib_fib", "not json"),
        Err(RemoteError::Status { status: 400, .. })
    ));
    assert!(matches!(
        client.create(&UnitArchive { bytes: vec![1, 2, 3] }),
        Err(RemoteError::Status { status: 400, .. })
    ));
    client.delete("c").unwrap();
    assert_eq!(client.delete("c"), Err(RemoteError::UnknownFunction("c".into())));
    assert_eq!(client.list().unwrap(), vec!["fib_fib"]);
}

#[test]
fn production_run_deploys_lazily() {
    let emu = Emulator::default();
    let gw = Gateway::start(emu.clone(), "127.0.0.1:0").unwrap();
    let run = fib_program()
        .run_remote(RemoteClient::new(&gw.url()), ClientRun::default())
        .unwrap();
    assert_eq!(run.result.stdout, "55\n");
    assert_eq!(run.deployments, 1);
    assert_eq!(run.invocations, 1);
    assert_eq!(emu.list(), vec!["fib_fib"]);
    assert_eq!(emu.stats("fib_fib").unwrap().invocations, 109);
}
