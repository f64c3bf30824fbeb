//! Run programs in a fresh interpreter subprocess with a line-trace hook,
//! enforce time and trace-length limits, and classify the outcome.
//!
//! The hook is an external script invoked as
//! `PYTHON HOOK PROGRAM RECORDS MAX_TRACE_LINES` with `PYTHONHASHSEED=0` and
//! a private temporary working directory. It appends JSON lines to
//! `RECORDS`: one `{"line_no", "state"}` object per executed line, then a
//! final `{"stdout", "status"}` summary.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::downstream::{ProgramOutput, SearchProgram};
use crate::mutation::Mutant;
use crate::program::{Program, ProgramError, TestInput};
use crate::trace::{ExecutionStatus, StateMap, Trace, TraceLine, MAX_TRACE_LINES};

/// Wall-clock allowance on top of the time limit for spawning, killing and
/// reaping the subprocess.
pub const SUPERVISION_MARGIN: Duration = Duration::from_secs(2);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("trace hook not found at {0}")]
    HookMissing(PathBuf),
    #[error("failed to start interpreter `{python}`: {source}")]
    Spawn { python: String, source: std::io::Error },
    #[error("unreadable hook interchange: {0}")]
    Interchange(String),
    #[error("program `{id}`: {source}")]
    Program { id: String, source: ProgramError },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub time_s: f64,
    pub max_trace_lines: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { time_s: 1.0, max_trace_lines: MAX_TRACE_LINES }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub python: String,
    pub hook: PathBuf,
    pub limits: Limits,
}

impl HarnessConfig {
    pub fn new(hook: impl Into<PathBuf>) -> Self {
        HarnessConfig { python: "python3".into(), hook: hook.into(), limits: Limits::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecutionStatus,
    /// Possibly truncated; carries the same stdout and status.
    pub trace: Trace,
    pub stdout: String,
    pub wall_time: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum HookRecord {
    Line { line_no: u32, state: StateMap },
    Summary { stdout: String, status: ExecutionStatus },
}

struct Interchange {
    lines: Vec<TraceLine>,
    summary: Option<(String, ExecutionStatus)>,
}

fn read_interchange(path: &Path, killed: bool) -> Result<Interchange, HarnessError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && killed => String::new(),
        Err(e) => return Err(HarnessError::Interchange(format!("{}: {e}", path.display()))),
    };
    let mut lines = Vec::new();
    let mut summary = None;
    let raw: Vec<&str> = text.lines().collect();
    for (i, line) in raw.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(HarnessError::Interchange("record after the final summary".into()));
        }
        match serde_json::from_str::<HookRecord>(line) {
            Ok(HookRecord::Line { line_no, state }) => lines.push(TraceLine { line_no, state }),
            Ok(HookRecord::Summary { stdout, status }) => summary = Some((stdout, status)),
            // a kill can cut the last record short
            Err(_) if killed && i + 1 == raw.len() => break,
            Err(e) => return Err(HarnessError::Interchange(format!("record {}: {e}", i + 1))),
        }
    }
    Ok(Interchange { lines, summary })
}

fn drain<R: Read + Send + 'static>(mut r: R) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

#[derive(Debug, Clone)]
pub struct Harness {
    config: HarnessConfig,
}

impl Harness {
    pub fn new(config: HarnessConfig) -> Self {
        Harness { config }
    }

    pub fn config(&self) -> &HarnessConfig {
        &self.config
    }

    /// Execute `p` with the hook attached. `p` should already have its stdin
    /// reads rewritten; `input` is still piped to stdin.
    pub fn execute(&self, p: &Program, input: &TestInput) -> Result<ExecutionResult, HarnessError> {
        let hook = &self.config.hook;
        if !hook.is_file() {
            return Err(HarnessError::HookMissing(hook.clone()));
        }
        let hook = fs::canonicalize(hook)?;
        let limits = self.config.limits;
        let dir = tempfile::tempdir()?;
        let program_path = dir.path().join("program.py");
        let records_path = dir.path().join("records.jsonl");
        fs::write(&program_path, p.source())?;

        let start = Instant::now();
        let mut child = Command::new(&self.config.python)
            .arg(&hook)
            .arg(&program_path)
            .arg(&records_path)
            .arg(limits.max_trace_lines.to_string())
            .current_dir(dir.path())
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONIOENCODING", "utf-8")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| HarnessError::Spawn { python: self.config.python.clone(), source })?;

        let stdin_text = input.to_stdin();
        let mut stdin = child.stdin.take().expect("stdin is piped");
        let feeder = thread::spawn(move || {
            let _ = stdin.write_all(stdin_text.as_bytes());
        });
        let stdout_reader = drain(child.stdout.take().expect("stdout is piped"));

        let budget = Duration::from_secs_f64(limits.time_s.max(0.0));
        let killed = match child.wait_timeout(budget)? {
            Some(_) => false,
            None => {
                let _ = child.kill();
                child.wait()?;
                true
            }
        };
        let wall_time = start.elapsed().as_secs_f64();
        let _ = feeder.join();
        let process_stdout = String::from_utf8_lossy(&stdout_reader.join().unwrap_or_default()).into_owned();

        let Interchange { mut lines, summary } = read_interchange(&records_path, killed)?;
        let limit_hit = lines.len() > limits.max_trace_lines;
        lines.truncate(limits.max_trace_lines);
        let (stdout, status) = match summary {
            Some((stdout, status)) if !limit_hit => (stdout, status),
            Some((stdout, _)) => (stdout, ExecutionStatus::TraceLimitExceeded),
            None if limit_hit || (killed && lines.len() == limits.max_trace_lines) => {
                (process_stdout, ExecutionStatus::TraceLimitExceeded)
            }
            None if killed => (process_stdout, ExecutionStatus::Timeout),
            None => return Err(HarnessError::Interchange("hook exited without a summary record".into())),
        };
        let trace = Trace { lines, stdout: stdout.clone(), status };
        Ok(ExecutionResult { status, trace, stdout, wall_time })
    }

    /// Execute many programs on a pool of `workers` threads; results keep
    /// the input order.
    pub fn execute_many(
        &self,
        jobs: &[(Program, TestInput)],
        workers: usize,
    ) -> Vec<Result<ExecutionResult, HarnessError>> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool");
        pool.install(|| jobs.par_iter().map(|(p, input)| self.execute(p, input)).collect())
    }

    /// Ground-truth stdout of every search-corpus program. Runs that fail
    /// still contribute whatever they printed.
    pub fn oracle_outputs(
        &self,
        programs: &[SearchProgram],
        workers: usize,
    ) -> Result<Vec<ProgramOutput>, HarnessError> {
        let mut jobs = Vec::with_capacity(programs.len());
        for sp in programs {
            let input = TestInput::from_text(&sp.test_input);
            let p = Program::parse(sp.source.clone())
                .map_err(|e| HarnessError::Program { id: sp.function_id.clone(), source: e })?;
            let p = p.rewrite_stdin(&input).unwrap_or(p);
            jobs.push((p, input));
        }
        self.execute_many(&jobs, workers)
            .into_iter()
            .zip(programs)
            .map(|(r, sp)| Ok(ProgramOutput { function_id: sp.function_id.clone(), output: r?.stdout }))
            .collect()
    }

    /// Keep the mutants that run to completion, paired with their traces.
    /// Mutants that read more input than `input` provides are dropped.
    pub fn filter_executable(
        &self,
        mutants: &[Mutant],
        input: &TestInput,
        workers: usize,
    ) -> Result<Vec<(Mutant, Trace)>, HarnessError> {
        let prepared: Vec<(usize, Program)> = mutants
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.program.rewrite_stdin(input).ok().map(|p| (i, p)))
            .collect();
        let jobs: Vec<(Program, TestInput)> = prepared.iter().map(|(_, p)| (p.clone(), input.clone())).collect();
        let results = self.execute_many(&jobs, workers);
        let mut kept = Vec::new();
        for ((i, _), result) in prepared.into_iter().zip(results) {
            let result = result?;
            if result.status == ExecutionStatus::Ok {
                kept.push((mutants[i].clone(), result.trace));
            }
        }
        Ok(kept)
    }
}

/// Run a program without the hook and return its raw stdout.
pub fn run_plain(python: &str, p: &Program, input: &TestInput, limits: Limits) -> Result<Option<String>, HarnessError> {
    let dir = tempfile::tempdir()?;
    let program_path = dir.path().join("program.py");
    fs::write(&program_path, p.source())?;
    let mut child = Command::new(python)
        .arg(&program_path)
        .current_dir(dir.path())
        .env("PYTHONHASHSEED", "0")
        .env("PYTHONIOENCODING", "utf-8")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| HarnessError::Spawn { python: python.to_string(), source })?;
    let stdin_text = input.to_stdin();
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let feeder = thread::spawn(move || {
        let _ = stdin.write_all(stdin_text.as_bytes());
    });
    let reader = drain(child.stdout.take().expect("stdout is piped"));
    let done = child.wait_timeout(Duration::from_secs_f64(limits.time_s))?;
    if done.is_none() {
        let _ = child.kill();
        child.wait()?;
    }
    let _ = feeder.join();
    let out = String::from_utf8_lossy(&reader.join().unwrap_or_default()).into_owned();
    Ok(done.filter(|s| s.success()).map(|_| out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_hook() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/line_tracer.py")
    }

    fn harness() -> Harness {
        Harness::new(HarnessConfig::new(fixture_hook()))
    }

    fn run(src: &str) -> ExecutionResult {
        harness().execute(&Program::parse(src).unwrap(), &TestInput::default()).unwrap()
    }

    #[test]
    fn simple_assignment() {
        let r = run("x = 1");
        assert_eq!(r.status, ExecutionStatus::Ok);
        assert_eq!(r.trace.lines, vec![TraceLine::new(1, [("x", "1")])]);
        assert_eq!(r.stdout, "");
    }

    #[test]
    fn division_by_zero_is_runtime_error() {
        assert_eq!(run("x = 1/0").status, ExecutionStatus::RuntimeError);
    }

    #[test]
    fn nonterminating_loop_hits_a_limit() {
        let r = run("while True:\n    pass");
        assert!(matches!(r.status, ExecutionStatus::Timeout | ExecutionStatus::TraceLimitExceeded));
        assert!(r.trace.len() <= MAX_TRACE_LINES);
    }

    #[test]
    fn sleeping_program_times_out() {
        let mut config = HarnessConfig::new(fixture_hook());
        config.limits.time_s = 0.3;
        let p = Program::parse("import time\ntime.sleep(5)").unwrap();
        let r = Harness::new(config).execute(&p, &TestInput::default()).unwrap();
        assert_eq!(r.status, ExecutionStatus::Timeout);
        assert!(r.wall_time < 0.3 + SUPERVISION_MARGIN.as_secs_f64());
    }

    #[test]
    fn missing_hook_is_a_harness_failure() {
        let h = Harness::new(HarnessConfig::new("/nonexistent/hook.py"));
        let err = h.execute(&Program::parse("x = 1").unwrap(), &TestInput::default()).unwrap_err();
        assert!(matches!(err, HarnessError::HookMissing(_)));
    }

    #[test]
    fn hook_without_summary_is_a_harness_failure() {
        let dir = tempfile::tempdir().unwrap();
        let hook = dir.path().join("broken.py");
        fs::write(&hook, "import sys\nopen(sys.argv[2], 'w').write('{\"line_no\": 1, \"state\": {}}\\n')\n").unwrap();
        let h = Harness::new(HarnessConfig::new(&hook));
        let err = h.execute(&Program::parse("x = 1").unwrap(), &TestInput::default()).unwrap_err();
        assert!(matches!(err, HarnessError::Interchange(_)));
    }

    #[test]
    fn garbage_interchange_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let hook = dir.path().join("garbage.py");
        fs::write(
            &hook,
            "import sys\nopen(sys.argv[2], 'w').write('not json\\n{\"stdout\": \"\", \"status\": \"ok\"}\\n')\n",
        )
        .unwrap();
        let h = Harness::new(HarnessConfig::new(&hook));
        assert!(matches!(
            h.execute(&Program::parse("x = 1").unwrap(), &TestInput::default()),
            Err(HarnessError::Interchange(_))
        ));
    }

    #[test]
    fn stdout_matches_plain_run() {
        let p = Program::parse("for i in range(3):\n    print(i, i * i)\nprint({'b': 1, 'a': 2})\n").unwrap();
        let traced = harness().execute(&p, &TestInput::default()).unwrap();
        let plain = run_plain("python3", &p, &TestInput::default(), Limits::default()).unwrap().unwrap();
        assert_eq!(traced.stdout, plain);
        assert_eq!(traced.stdout, "0 0\n1 1\n2 4\n{'b': 1, 'a': 2}\n");
    }

    #[test]
    fn executions_are_deterministic() {
        let src = "s = {'apple', 'pear', 'fig', 'kiwi'}\nt = list(s)\nprint(t)\n";
        let a = run(src);
        let b = run(src);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.stdout, b.stdout);
    }
}
