//! CSV and JSON writers. Every file starts with the resolved configuration:
//! `#` comment lines in CSV, a `header` object in JSON.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{OutputFormat, RunConfig};
use crate::Failure;

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Document {
    pub command: &'static str,
    pub header: Value,
    pub summary: Vec<(String, Value)>,
    pub table: Table,
    pub data: Value,
}

impl Document {
    pub fn new<P: Serialize>(command: &'static str, config: &RunConfig, parameters: &P) -> Result<Self, Failure> {
        let header = json!({
            "command": command,
            "config": to_value(config)?,
            "parameters": to_value(parameters)?,
        });
        Ok(Self { command, header, summary: Vec::new(), table: Table::new(&[]), data: Value::Null })
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary.push((key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null)));
    }

    fn render_csv(&self) -> Result<Vec<u8>, Failure> {
        let mut out = Vec::new();
        let mut lines = vec![format!("sfwm {}", self.command)];
        flatten("", &self.header, &mut lines);
        for (k, v) in &self.summary {
            lines.push(format!("summary.{k} = {v}"));
        }
        for line in lines {
            writeln!(out, "# {line}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.table.columns).map_err(|e| Failure::Compute(e.to_string()))?;
        for row in &self.table.rows {
            w.write_record(row).map_err(|e| Failure::Compute(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Failure::Compute(e.to_string()))
    }

    fn render_json(&self) -> Result<Vec<u8>, Failure> {
        let summary: Map<String, Value> = self.summary.iter().cloned().collect();
        let doc = json!({ "header": self.header, "summary": summary, "data": self.data });
        let mut text = serde_json::to_vec_pretty(&doc).map_err(|e| Failure::Compute(e.to_string()))?;
        text.push(b'\n');
        Ok(text)
    }

    /// Renders completely, then writes once.
    pub fn emit(&self, config: &RunConfig) -> Result<(), Failure> {
        let bytes = match config.output_format {
            OutputFormat::Csv => self.render_csv()?,
            OutputFormat::Json => self.render_json()?,
        };
        match &config.output_path {
            Some(path) => std::fs::write(path, bytes)
                .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display()))),
            None => std::io::stdout().write_all(&bytes).map_err(io),
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Compute(e.to_string())
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Compute(e.to_string()))
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Null => {}
        other => out.push(format!("{prefix} = {other}")),
    }
}
