//! Verification report: one record per check, sorted by id, serialized as JSON.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Acceptance rule applied to a record's measured value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    AtMost(f64),
    AtLeast(f64),
    Between(f64, f64),
}

impl Criterion {
    pub fn accepts(&self, measured: f64) -> bool {
        match *self {
            Criterion::AtMost(limit) => measured <= limit,
            Criterion::AtLeast(limit) => measured >= limit,
            Criterion::Between(lo, hi) => (lo..=hi).contains(&measured),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    /// What the check certifies.
    pub reference: String,
    /// The compared quantity; `None` when it was not finite or not computed.
    pub measured: Option<f64>,
    pub criterion: Criterion,
    /// Underlying computed value, when `measured` is derived from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// What `value` is compared with: a closed form, or the coarse-grid
    /// value in a refinement study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub seed: u64,
    pub dimensions: Vec<usize>,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn new(seed: u64, dimensions: Vec<usize>, mut records: Vec<CheckRecord>) -> Self {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let passed = records.iter().filter(|r| r.pass).count();
        let summary = Summary {
            total: records.len(),
            passed,
            failed: records.len() - passed,
            pass: passed == records.len(),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            dimensions,
            records,
            summary,
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.pass
    }

    pub fn record(&self, id: &str) -> Option<&CheckRecord> {
        self.records
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// One line per record, then the summary.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let measured = r.measured.map_or("n/a".to_string(), |m| format!("{m:.3e}"));
            out.push_str(&format!(
                "{} {:<44} {measured:>11}  {}\n",
                if r.pass { "PASS" } else { "FAIL" },
                r.id,
                r.error.as_deref().unwrap_or(&r.reference)
            ));
        }
        out.push_str(&format!(
            "{} of {} checks passed\n",
            self.summary.passed, self.summary.total
        ));
        out
    }
}
