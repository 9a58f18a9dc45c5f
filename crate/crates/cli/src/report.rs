use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Bumped whenever a field of [`RunReport`] changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// Informational checks are reported but do not affect the exit code.
    pub asserted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub total_s: f64,
    pub phases: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub command: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// Collects checks, input digests and phase timings for one command.
pub struct Recorder {
    command: Vec<String>,
    inputs: Vec<InputDigest>,
    checks: Vec<Check>,
    phases: Vec<(String, f64)>,
    start: Instant,
    phase_start: Instant,
}

impl Recorder {
    pub fn new(command: Vec<String>) -> Self {
        let now = Instant::now();
        Self {
            command,
            inputs: Vec::new(),
            checks: Vec::new(),
            phases: Vec::new(),
            start: now,
            phase_start: now,
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
    }

    pub fn check(&mut self, name: &str, pass: bool, residual: Option<f64>) {
        self.push(name, pass, residual, true);
    }

    pub fn info(&mut self, name: &str, pass: bool, residual: Option<f64>) {
        self.push(name, pass, residual, false);
    }

    /// `residual ≤ tol`.
    pub fn within(&mut self, name: &str, residual: f64, tol: f64) {
        self.check(name, residual <= tol, Some(residual));
    }

    fn push(&mut self, name: &str, pass: bool, residual: Option<f64>, asserted: bool) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            residual: residual.map(clean),
            asserted,
        });
    }

    pub fn phase(&mut self, name: &str) {
        let now = Instant::now();
        self.phases
            .push((name.into(), (now - self.phase_start).as_secs_f64()));
        self.phase_start = now;
    }

    pub fn finish(self, result: Value, timings: bool) -> RunReport {
        let pass = self.checks.iter().all(|c| c.pass || !c.asserted);
        RunReport {
            schema: SCHEMA_VERSION,
            command: self.command,
            inputs: self.inputs,
            checks: self.checks,
            pass,
            result,
            timings: timings.then(|| Timings {
                total_s: self.start.elapsed().as_secs_f64(),
                phases: self.phases,
            }),
        }
    }
}

/// `-0.0` prints differently from `0.0`; residuals are magnitudes anyway.
fn clean(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

impl RunReport {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| c.asserted && !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.command.join(" ")).unwrap();
        for input in &self.inputs {
            writeln!(out, "  input {} sha256:{}", input.path, input.sha256).unwrap();
        }
        for c in &self.checks {
            let tag = match (c.pass, c.asserted) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "NOTE",
            };
            match c.residual {
                Some(r) => writeln!(out, "{tag} {} ({r:.3e})", c.name).unwrap(),
                None => writeln!(out, "{tag} {}", c.name).unwrap(),
            }
        }
        if let Value::Object(map) = &self.result {
            for (k, v) in map {
                if matches!(v, Value::Number(_) | Value::String(_) | Value::Bool(_)) {
                    writeln!(out, "  {k}: {v}").unwrap();
                }
            }
        }
        if let Some(t) = &self.timings {
            writeln!(out, "  time: {:.3}s", t.total_s).unwrap();
        }
        writeln!(out, "{}", if self.pass { "pass" } else { "fail" }).unwrap();
        out
    }
}
