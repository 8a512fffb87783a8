//! Adapter for an external energy evaluator.
//!
//! The command template runs under `sh -c`. It receives the sequence and the
//! dot-bracket structure as two lines on standard input and must print a
//! single decimal number (kcal/mol) on standard output.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::structure::{PrimarySequence, SecondaryStructure};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Environment variable the CLI reads the command template from.
pub const COMMAND_ENV: &str = "RNAFOLD_EXTERNAL_CMD";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExternalError {
    #[error("external evaluator not found: {command}: {stderr}")]
    CommandNotFound { command: String, stderr: String },
    #[error("external evaluator failed with status {code:?}: {stderr}")]
    Failed { code: Option<i32>, stdout: String, stderr: String },
    #[error("external evaluator printed an unparsable value: {output:?}")]
    Unparsable { output: String },
    #[error("external evaluator timed out after {0:?}")]
    Timeout(Duration),
    #[error("external evaluator I/O error: {0}")]
    Io(String),
    #[error("structure belongs to a different sequence")]
    SequenceMismatch,
}

#[derive(Debug)]
pub struct ExternalEvaluator {
    template: String,
    timeout: Duration,
    concurrent_safe: bool,
    cache: Mutex<HashMap<(String, String), f64>>,
    gate: Mutex<()>,
    invocations: AtomicUsize,
}

impl ExternalEvaluator {
    pub fn new(template: impl Into<String>) -> Self {
        ExternalEvaluator {
            template: template.into(),
            timeout: DEFAULT_TIMEOUT,
            concurrent_safe: false,
            cache: Mutex::new(HashMap::new()),
            gate: Mutex::new(()),
            invocations: AtomicUsize::new(0),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Allows overlapping invocations; calls are serialized otherwise.
    pub fn concurrent_safe(mut self, yes: bool) -> Self {
        self.concurrent_safe = yes;
        self
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Number of processes actually spawned (cache misses).
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn evaluate(&self, s: &SecondaryStructure) -> Result<f64, ExternalError> {
        let key = (s.sequence().to_string(), s.dot_bracket());
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let value = if self.concurrent_safe {
            self.spawn(&key.0, &key.1)?
        } else {
            let _serial = self.gate.lock().unwrap();
            // Another caller may have filled the entry while we waited.
            if let Some(&v) = self.cache.lock().unwrap().get(&key) {
                return Ok(v);
            }
            self.spawn(&key.0, &key.1)?
        };
        self.cache.lock().unwrap().insert(key, value);
        Ok(value)
    }

    fn spawn(&self, seq: &str, db: &str) -> Result<f64, ExternalError> {
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let not_found = |stderr: String| ExternalError::CommandNotFound { command: self.template.clone(), stderr };
        if self.template.trim().is_empty() {
            return Err(not_found("empty command template".into()));
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.template)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => not_found(e.to_string()),
                _ => ExternalError::Io(e.to_string()),
            })?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = format!("{seq}\n{db}\n");
        // A command that never reads its input closes the pipe early.
        let _ = stdin.write_all(input.as_bytes());
        drop(stdin);

        let drain = |mut r: Box<dyn Read + Send>| {
            thread::spawn(move || {
                let mut buf = String::new();
                let _ = r.read_to_string(&mut buf);
                buf
            })
        };
        let out = drain(Box::new(child.stdout.take().expect("piped stdout")));
        let err = drain(Box::new(child.stderr.take().expect("piped stderr")));

        let started = Instant::now();
        let status = loop {
            match child.try_wait().map_err(|e| ExternalError::Io(e.to_string()))? {
                Some(status) => break status,
                None if started.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(ExternalError::Timeout(self.timeout));
                }
                None => thread::sleep(Duration::from_millis(2)),
            }
        };
        let stdout = out.join().unwrap_or_default();
        let stderr = err.join().unwrap_or_default();

        match status.code() {
            Some(0) => parse_value(&stdout),
            Some(127) => Err(not_found(stderr)),
            code => Err(ExternalError::Failed { code, stdout, stderr }),
        }
    }
}

fn parse_value(stdout: &str) -> Result<f64, ExternalError> {
    let text = stdout.trim().replace('\u{2212}', "-");
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ExternalError::Unparsable { output: stdout.to_string() })
}

/// Evaluates `s` with `adapter`, checking it belongs to `seq`.
pub fn external_evaluate(
    adapter: &ExternalEvaluator,
    seq: &PrimarySequence,
    s: &SecondaryStructure,
) -> Result<f64, ExternalError> {
    if s.sequence().as_ref() != seq {
        return Err(ExternalError::SequenceMismatch);
    }
    adapter.evaluate(s)
}
