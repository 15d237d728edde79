//! Overhead model and measurement harness.
//!
//! The overhead of running a call on hosted functions instead of in one
//! process is
//!
//! ```text
//! overhead = (t_target + fixed_cost / calls) / t_orig - 1
//! ```
//!
//! where `fixed_cost` is the one-off transformation time L (plus the
//! deployment time D when units are deployed) and `calls` the number of
//! function invocations the run makes, `2 * fib(x) - 1` for the recursive
//! Fibonacci program.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::analyzer::{build_dependency_map, ModuleLoader};
use crate::emulator::{Emulator, Gateway, RemoteClient, RemoteError};
use crate::interp::{run_program, RunOptions, RuntimeError};
use crate::syntax::{parse_expression, SourceModule, SyntaxError};
use crate::transform::{transform_program, ClientRun, Program, TransformError, TransformOptions};

/// Transformation time reported for the reference setup, in milliseconds.
pub const REFERENCE_L_MS: f64 = 67.0;
/// Deployment time reported for the reference setup, in milliseconds.
pub const REFERENCE_D_MS: f64 = 4200.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BenchError {
    #[error("invalid overhead inputs: {0}")]
    Inputs(&'static str),
    #[error("cannot parse invocation {label:?}: {error}")]
    Label { label: String, error: SyntaxError },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{label}: {mode} returned {got}, direct run returned {expected}")]
    Mismatch {
        label: String,
        mode: &'static str,
        expected: String,
        got: String,
    },
    #[error("cannot start an emulator: {0}")]
    Emulator(String),
    #[error("a table needs at least one row")]
    EmptyReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadInputs {
    /// Original execution time, ms.
    pub t_orig: f64,
    /// Transformed execution time, ms.
    pub t_target: f64,
    /// L, or L + D, in ms.
    pub fixed_cost: f64,
    pub calls: u64,
}

impl OverheadInputs {
    pub fn new(t_orig: f64, t_target: f64, fixed_cost: f64, calls: u64) -> Result<Self, BenchError> {
        if t_orig.is_nan() || t_orig <= 0.0 {
            return Err(BenchError::Inputs("t_orig must be positive"));
        }
        if calls == 0 {
            return Err(BenchError::Inputs("calls must be at least 1"));
        }
        if fixed_cost.is_nan() || fixed_cost < 0.0 {
            return Err(BenchError::Inputs("fixed_cost must not be negative"));
        }
        if !t_target.is_finite() {
            return Err(BenchError::Inputs("t_target must be finite"));
        }
        Ok(OverheadInputs {
            t_orig,
            t_target,
            fixed_cost,
            calls,
        })
    }
}

pub fn overhead(i: &OverheadInputs) -> f64 {
    (i.t_target + i.fixed_cost / i.calls as f64) / i.t_orig - 1.0
}

/// Invocations the recursive Fibonacci program makes for `fib(x)`.
///
/// # Panics
///
/// If `x` is outside `1..=60`.
pub fn expected_calls(x: u32) -> u64 {
    assert!((1..=60).contains(&x), "expected_calls({x}) is defined for 1..=60");
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 2..x {
        (a, b) = (b, a + b);
    }
    2 * b - 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub calls: u64,
    pub t_orig: f64,
    pub t_target: f64,
    pub fixed_cost: f64,
    pub overhead: f64,
    /// Why the target run failed, if it did.
    pub failed: Option<String>,
}

impl ReportRow {
    pub fn new(label: &str, inputs: OverheadInputs) -> Self {
        ReportRow {
            label: label.to_string(),
            calls: inputs.calls,
            t_orig: inputs.t_orig,
            t_target: inputs.t_target,
            fixed_cost: inputs.fixed_cost,
            overhead: overhead(&inputs),
            failed: None,
        }
    }

    pub fn inputs(&self) -> OverheadInputs {
        OverheadInputs {
            t_orig: self.t_orig,
            t_target: self.t_target,
            fixed_cost: self.fixed_cost,
            calls: self.calls,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Direct,
    #[default]
    Local,
    Emulated,
}

impl ExecMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecMode::Direct => "direct",
            ExecMode::Local => "local",
            ExecMode::Emulated => "emulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

impl Aggregate {
    pub fn apply(self, samples: &[f64]) -> f64 {
        match self {
            Aggregate::Mean => samples.iter().sum::<f64>() / samples.len() as f64,
            Aggregate::Median => {
                let mut s = samples.to_vec();
                s.sort_by(f64::total_cmp);
                let n = s.len();
                if n % 2 == 1 {
                    s[n / 2]
                } else {
                    (s[n / 2 - 1] + s[n / 2]) / 2.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub mode: ExecMode,
    pub repetitions: usize,
    pub aggregate: Aggregate,
    /// Gateway for emulated mode; a private in-process one when unset.
    pub endpoint: Option<String>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            mode: ExecMode::Local,
            repetitions: 5,
            aggregate: Aggregate::Mean,
            endpoint: None,
        }
    }
}

fn time<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let start = Instant::now();
    let out = f();
    (start.elapsed().as_secs_f64() * 1000.0, out)
}

/// Times `label` (a call expression such as `fib(20)`) evaluated in
/// `program` directly and in the requested mode, and returns the row.
///
/// The direct run provides `t_orig` and `calls`. Transformation time is
/// measured on every run and used as L; emulated mode adds the time it took
/// to deploy every unit as D.
pub fn run_experiment(
    program: &SourceModule,
    loader: &dyn ModuleLoader,
    label: &str,
    options: &ExperimentOptions,
) -> Result<ReportRow, BenchError> {
    let call = parse_expression(label).map_err(|error| BenchError::Label {
        label: label.to_string(),
        error,
    })?;
    let reps = options.repetitions.max(1);
    let modules = build_dependency_map(program, loader)
        .map_err(TransformError::from)?
        .modules;

    let mut samples = Vec::with_capacity(reps);
    let mut direct = None;
    for _ in 0..reps {
        let run = RunOptions {
            call: Some(call.clone()),
            ..RunOptions::default()
        };
        let (ms, result) = time(|| run_program(&modules, &program.name, run));
        samples.push(ms);
        direct = Some(result?);
    }
    let direct = direct.expect("at least one repetition");
    let t_orig = options.aggregate.apply(&samples).max(f64::MIN_POSITIVE);
    let calls = direct.call_count.max(1);

    let target = |mode: ExecMode| -> Result<(f64, f64), BenchError> {
        let topts = TransformOptions {
            invocations: vec![call.clone()],
            ..TransformOptions::default()
        };
        let transformed: Program = transform_program(program, loader, topts)?;
        let l = transformed.transform_ms;
        let run = || ClientRun {
            call: Some(call.clone()),
            ..ClientRun::default()
        };
        let check = |value: &serde_json::Value| {
            if *value != direct.return_value {
                return Err(BenchError::Mismatch {
                    label: label.to_string(),
                    mode: mode.name(),
                    expected: direct.return_value.to_string(),
                    got: value.to_string(),
                });
            }
            Ok(())
        };
        let mut samples = Vec::with_capacity(reps);
        match mode {
            ExecMode::Direct => unreachable!(),
            ExecMode::Local => {
                for _ in 0..reps {
                    let (ms, result) = time(|| transformed.run_local(run()));
                    check(&result?.return_value)?;
                    samples.push(ms);
                }
                Ok((options.aggregate.apply(&samples), l))
            }
            ExecMode::Emulated => {
                let (_gateway, client) = match &options.endpoint {
                    Some(e) => (None, RemoteClient::new(e)),
                    None => {
                        let gw = Gateway::start(Emulator::default(), "127.0.0.1:0")
                            .map_err(|e| BenchError::Emulator(e.to_string()))?;
                        let client = RemoteClient::new(&gw.url());
                        (Some(gw), client)
                    }
                };
                let d = transformed.deploy(&client)?;
                for _ in 0..reps {
                    let (ms, result) = time(|| transformed.run_deployed(client.clone(), run()));
                    check(&result?.result.return_value)?;
                    samples.push(ms);
                }
                Ok((options.aggregate.apply(&samples), l + d))
            }
        }
    };

    let (t_target, fixed_cost) = match options.mode {
        ExecMode::Direct => (t_orig, 0.0),
        mode => match target(mode) {
            Ok(v) => v,
            Err(BenchError::Runtime(e)) if e.is_budget() || e.kind == crate::interp::ErrorKind::Timeout => {
                return Ok(ReportRow {
                    label: label.to_string(),
                    calls,
                    t_orig,
                    t_target: f64::NAN,
                    fixed_cost: 0.0,
                    overhead: f64::NAN,
                    failed: Some(e.to_string()),
                })
            }
            Err(e) => return Err(e),
        },
    };
    Ok(ReportRow::new(
        label,
        OverheadInputs::new(t_orig, t_target, fixed_cost, calls)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

pub const CSV_HEADER: &str = "label,calls,t_orig_ms,t_target_ms,overhead";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, BenchError> {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in rows {
                let overhead = match &r.failed {
                    Some(_) => "failed".to_string(),
                    None => r.overhead.to_string(),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    csv_field(&r.label),
                    r.calls,
                    r.t_orig,
                    r.t_target,
                    overhead
                );
            }
        }
        ReportFormat::Table => {
            if rows.is_empty() {
                return Err(BenchError::EmptyReport);
            }
            let _ = writeln!(
                out,
                "{:<14}{:>12}{:>16}{:>18}{:>14}",
                "invocation", "calls", "t_orig", "t_target", "overhead"
            );
            for r in rows {
                let overhead = match &r.failed {
                    Some(_) => "failed".to_string(),
                    None => format!("{:.2}", r.overhead),
                };
                let _ = writeln!(
                    out,
                    "{:<14}{:>12}{:>16}{:>18}{:>14}",
                    r.label,
                    r.calls,
                    format!("{:.4} ms", r.t_orig),
                    format!("{:.4} ms", r.t_target),
                    overhead
                );
            }
        }
    }
    Ok(out)
}

/// A published measurement, replayable through [`overhead`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub label: &'static str,
    pub calls: u64,
    pub t_orig: f64,
    pub t_target: f64,
    pub fixed_cost: f64,
    /// Overhead as published.
    pub published: f64,
    /// False where the published overhead does not follow from the row's
    /// own times.
    pub consistent: bool,
}

impl ReferenceRow {
    pub fn replay(&self) -> ReportRow {
        ReportRow::new(
            self.label,
            OverheadInputs {
                t_orig: self.t_orig,
                t_target: self.t_target,
                fixed_cost: self.fixed_cost,
                calls: self.calls,
            },
        )
    }
}

const fn reference(
    label: &'static str,
    calls: u64,
    t_orig: f64,
    t_target: f64,
    fixed_cost: f64,
    published: f64,
    consistent: bool,
) -> ReferenceRow {
    ReferenceRow {
        label,
        calls,
        t_orig,
        t_target,
        fixed_cost,
        published,
        consistent,
    }
}

/// Single-process runs of the recursive Fibonacci program against the same
/// program in local mode, fixed cost L.
pub fn reference_local() -> Vec<ReferenceRow> {
    let l = REFERENCE_L_MS;
    vec![
        reference("fib(1)", 1, 0.0003, 0.0210, l, 223402.33, true),
        // (1.32 + 67 / 109) / 0.0202 - 1 is about 94.78, not 396.03.
        reference("fib(10)", 109, 0.0202, 1.3200, l, 396.03, false),
        reference("fib(20)", 13529, 1.57, 156.47, l, 98.67, true),
        reference("fib(30)", 1664079, 191.81, 19639.70, l, 101.39, true),
        reference("fib(40)", 204668309, 24989.58, 2382736.84, l, 94.34, true),
    ]
}

/// The sine-weighted variant run on deployed units, fixed cost L + D.
pub fn reference_deployed() -> Vec<ReferenceRow> {
    let ld = REFERENCE_L_MS + REFERENCE_D_MS;
    vec![
        reference("fibs(1)", 1, 0.04, 18.94, ld, 107147.49, true),
        reference("fibs(10)", 109, 1.33, 1157.77, ld, 898.94, true),
        reference("fibs(12)", 287, 6.54, 7041.89, ld, 1078.01, true),
        reference("fibs(15)", 1219, 117.31, 14857.44, ld, 125.68, true),
        reference("fibs(18)", 5167, 2235.03, 63893.69, ld, 27.59, true),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::MemoryLoader;

    const FIB: &str = "def fib(x):\n    if x in (1, 2):\n        return 1\n    return fib(x - 1) + fib(x - 2)\n";

    #[test]
    fn published_rows() {
        let cases = [
            (0.0003, 0.0210, 67.0, 1, 223402.33),
            (1.57, 156.47, 67.0, 13529, 98.67),
            (1.33, 1157.77, 4267.0, 109, 898.94),
        ];
        for (t_orig, t_target, fixed, calls, want) in cases {
            let got = overhead(&OverheadInputs::new(t_orig, t_target, fixed, calls).unwrap());
            assert!((got - want).abs() <= 0.01, "{got} vs {want}");
        }
    }

    #[test]
    fn identity_is_zero() {
        for (x, n) in [(0.5, 1), (3.0, 7), (1e6, 1000)] {
            assert_eq!(overhead(&OverheadInputs::new(x, x, 0.0, n).unwrap()), 0.0);
        }
    }

    #[test]
    fn inputs_are_checked() {
        assert!(OverheadInputs::new(0.0, 1.0, 0.0, 1).is_err());
        assert!(OverheadInputs::new(1.0, 1.0, 0.0, 0).is_err());
        assert!(OverheadInputs::new(1.0, 1.0, -1.0, 1).is_err());
    }

    #[test]
    fn call_model() {
        assert_eq!(expected_calls(20), 13529);
        assert_eq!(expected_calls(1), 1);
        assert_eq!(expected_calls(15), 1219);
        assert_eq!(expected_calls(60), 2 * 1548008755920 - 1);
    }

    #[test]
    fn reference_presets_replay() {
        for row in reference_local().iter().chain(&reference_deployed()) {
            let replayed = row.replay().overhead;
            let matches = (replayed - row.published).abs() <= 0.01;
            assert_eq!(matches, row.consistent, "{}: {replayed}", row.label);
            assert_eq!(
                row.calls,
                expected_calls(
                    row.label[row.label.find('(').unwrap() + 1..row.label.len() - 1]
                        .parse()
                        .unwrap()
                )
            );
        }
    }

    #[test]
    fn aggregates() {
        assert_eq!(Aggregate::Mean.apply(&[1.0, 2.0, 6.0]), 3.0);
        assert_eq!(Aggregate::Median.apply(&[1.0, 2.0, 6.0]), 2.0);
        assert_eq!(Aggregate::Median.apply(&[4.0, 1.0, 2.0, 6.0]), 3.0);
    }

    #[test]
    fn reports() {
        let row = ReportRow::new("fib(2)", OverheadInputs::new(1.0, 2.0, 0.0, 1).unwrap());
        let table = render_report(std::slice::from_ref(&row), ReportFormat::Table).unwrap();
        assert_eq!(table.lines().count(), 2);
        assert!(table.lines().nth(1).unwrap().ends_with("1.00"));
        let csv = render_report(&[row.clone(), row], ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().nth(1).unwrap(), "fib(2),1,1,2,1");
        assert_eq!(render_report(&[], ReportFormat::Table), Err(BenchError::EmptyReport));
        let rows: Vec<ReportRow> = reference_local().iter().map(ReferenceRow::replay).collect();
        let table = render_report(&rows, ReportFormat::Table).unwrap();
        for (line, row) in table.lines().skip(1).zip(reference_local()) {
            let shown: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
            if row.consistent {
                assert!((shown - row.published).abs() <= 0.01, "{line}");
            }
        }
    }

    #[test]
    fn experiments() {
        let m = SourceModule::new("fib", FIB).unwrap();
        let loader = MemoryLoader::new([]);
        let fast = |mode| ExperimentOptions {
            mode,
            repetitions: 2,
            ..Default::default()
        };
        let d = run_experiment(&m, &loader, "fib(10)", &fast(ExecMode::Direct)).unwrap();
        assert_eq!(d.calls, 109);
        assert!(d.t_orig > 0.0);
        let l = run_experiment(&m, &loader, "fib(10)", &fast(ExecMode::Local)).unwrap();
        assert_eq!(l.calls, 109);
        assert!(l.overhead > 0.0);
        let one = run_experiment(&m, &loader, "fib(1)", &fast(ExecMode::Local)).unwrap();
        assert!(one.fixed_cost / one.calls as f64 > one.t_target);
        let e = run_experiment(&m, &loader, "fib(6)", &fast(ExecMode::Emulated)).unwrap();
        assert_eq!(e.calls, 15);
        assert!(e.overhead > 0.0 && e.failed.is_none());
        assert!(matches!(
            run_experiment(&m, &loader, "fib(", &fast(ExecMode::Direct)),
            Err(BenchError::Label { .. })
        ));
    }
}
