use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Le,
    Lt,
    Gt,
}

/// One invariant: passes iff `value <relation> threshold` and `value` is finite.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let holds = match relation {
            Relation::Le => value <= threshold,
            Relation::Lt => value < threshold,
            Relation::Gt => value > threshold,
        };
        Self {
            name: name.into(),
            // Non-finite values would serialise as null.
            value: if value.is_finite() { value } else { f64::MAX },
            relation,
            threshold,
            pass: value.is_finite() && holds,
        }
    }

    pub fn count(name: impl Into<String>, failures: usize) -> Self {
        Self::new(name, failures as f64, Relation::Le, 0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs_digest: String,
    pub outputs: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl RunReport {
    pub fn new(command: &str, inputs: &Inputs, outputs: Value, checks: Vec<Check>) -> Self {
        Self {
            command: command.to_string(),
            inputs_digest: inputs.digest(),
            pass: checks.iter().all(|c| c.pass),
            outputs,
            checks,
        }
    }
}

/// Accumulates everything a run depends on, for the report digest.
#[derive(Default)]
pub struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    pub fn add(&mut self, name: &str, bytes: &[u8]) {
        self.hasher.update((name.len() as u64).to_le_bytes());
        self.hasher.update(name.as_bytes());
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn param(&mut self, name: &str, value: impl ToString) {
        self.add(name, value.to_string().as_bytes());
    }

    fn digest(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}
