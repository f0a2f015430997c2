//! Machine-readable run reports: JSON as the source of truth, CSV as a
//! lossy convenience projection.

use serde::Serialize;
use std::io::Write;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// stable identifier of the verified property
    pub id: String,
    /// measured value (residual, max, ...)
    pub value: f64,
    /// acceptance threshold the value is compared against
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    pub fn residual(id: &str, value: f64, tolerance: f64) -> Check {
        Check {
            id: id.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: String) -> Check {
        self.detail = Some(detail);
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: serde_json::Value,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// extra values (grids, transforms) when a command produces data
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub values: serde_json::Value,
    pub pass: bool,
    /// present only when requested, so that default reports are
    /// bit-identical for identical config and seed
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u128>,
}

impl Report {
    pub fn new(command: &str, inputs: serde_json::Value, seed: u64) -> Report {
        Report {
            command: command.to_string(),
            inputs,
            seed,
            checks: Vec::new(),
            values: serde_json::Value::Null,
            pass: true,
            timing_ms: None,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,value,tolerance,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{:.12e},{:.3e},{}\n",
                c.id, c.value, c.tolerance, c.pass
            ));
        }
        out
    }

    pub fn write(&self, path: Option<&std::path::Path>, format: &str) -> std::io::Result<()> {
        let body = match format {
            "csv" => self.to_csv(),
            _ => self.to_json(),
        };
        match path {
            Some(p) => std::fs::write(p, body)?,
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                lock.write_all(body.as_bytes())?;
                lock.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}
