//! Pass/fail records shared by every check.

use serde::{Deserialize, Serialize};

use crate::analysis::stats::Estimate;

/// Default two-sided z threshold.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub n_samples: usize,
    pub pass: bool,
}

impl TestResult {
    /// Passes iff `statistic < threshold`.
    pub fn below(name: impl Into<String>, statistic: f64, threshold: f64, n_samples: usize) -> Self {
        TestResult { test_name: name.into(), statistic, threshold, n_samples, pass: statistic < threshold }
    }

    /// `|z|` of `est` against `expected`, passing below [`Z_THRESHOLD`].
    pub fn z(name: impl Into<String>, est: &Estimate, expected: f64) -> Self {
        Self::below(name, est.z(expected).abs(), Z_THRESHOLD, est.n)
    }

    /// Relative error `|est/expected - 1|`.
    pub fn relative(name: impl Into<String>, est: f64, expected: f64, threshold: f64, n_samples: usize) -> Self {
        Self::below(name, (est / expected - 1.0).abs(), threshold, n_samples)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub tests: Vec<TestResult>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: TestResult) {
        self.tests.push(t);
    }

    pub fn extend(&mut self, other: Report) {
        self.tests.extend(other.tests);
    }

    pub fn all_pass(&self) -> bool {
        self.tests.iter().all(|t| t.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestResult> {
        self.tests.iter().filter(|t| !t.pass)
    }

    pub fn get(&self, name: &str) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.test_name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.tests).expect("report serializes");
        s.push('\n');
        s
    }
}
