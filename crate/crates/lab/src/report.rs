//! Run reports and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anosov_core::rigidity::Diagnostic;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ReportFormat;
use crate::error::LabError;

/// Final outcome of a run, mapped onto the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Smooth,
    Obstructed,
    Inconclusive,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Complete | RunStatus::Smooth => 0,
            RunStatus::Obstructed => 2,
            RunStatus::Inconclusive => 3,
        }
    }
}

/// A flat table: one column per leaf field of the serialized rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

fn flatten_into(prefix: &str, value: Value, out: &mut Vec<(String, Value)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten_into(&key(&k), v, out);
            }
        }
        Value::Array(items) if items.iter().all(|v| !v.is_object()) && items.len() <= 4 => {
            for (i, v) in items.into_iter().enumerate() {
                flatten_into(&key(&i.to_string()), v, out);
            }
        }
        Value::Array(items) => out.push((prefix.to_string(), Value::String(Value::Array(items).to_string()))),
        v => out.push((prefix.to_string(), v)),
    }
}

impl Table {
    /// Flattens each row's nested fields into dotted column names. Short
    /// scalar arrays become `name.0`, `name.1`, ...; longer ones are stored
    /// as JSON text.
    pub fn from_rows<T: Serialize>(name: &str, rows: &[T]) -> Table {
        let flat: Vec<Vec<(String, Value)>> = rows
            .iter()
            .map(|r| {
                let mut out = Vec::new();
                let v = serde_json::to_value(r).expect("row serializes");
                match v {
                    Value::Object(_) => flatten_into("", v, &mut out),
                    other => flatten_into("value", other, &mut out),
                }
                out
            })
            .collect();
        let mut columns: Vec<String> = Vec::new();
        for row in &flat {
            for (k, _) in row {
                if !columns.contains(k) {
                    columns.push(k.clone());
                }
            }
        }
        let rows = flat
            .into_iter()
            .map(|row| {
                let map: BTreeMap<String, Value> = row.into_iter().collect();
                columns.iter().map(|c| map.get(c).cloned().unwrap_or(Value::Null)).collect()
            })
            .collect();
        Table {
            name: name.into(),
            columns,
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::Null => String::new(),
                    Value::String(s) => csv_field(s),
                    other => csv_field(&other.to_string()),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub config: Value,
    pub summary: Map<String, Value>,
    pub diagnostics: Vec<Diagnostic>,
    pub tables: Vec<Table>,
    pub manifest: Vec<String>,
    /// Large plot-ready files, `(file name, contents)`.
    #[serde(skip)]
    pub artifacts: Vec<(String, String)>,
    /// Wall-clock seconds per stage; written to `timings.json` only.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl RunReport {
    pub fn new(subcommand: &str, config: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.into(),
            status: RunStatus::Complete,
            exit_code: 0,
            config,
            summary: Map::new(),
            diagnostics: Vec::new(),
            tables: Vec::new(),
            manifest: Vec::new(),
            artifacts: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn set_status(&mut self, status: RunStatus) {
        self.status = status;
        self.exit_code = status.exit_code();
    }

    pub fn summarize<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary
            .insert(key.into(), serde_json::to_value(value).expect("summary value serializes"));
    }

    pub fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) {
        self.tables.push(Table::from_rows(name, rows));
    }

    pub fn artifact(&mut self, file: &str, contents: String) {
        self.artifacts.push((file.into(), contents));
    }

    pub fn diagnostic(&self, name: &str) -> Option<&Diagnostic> {
        self.diagnostics.iter().find(|d| d.name == name)
    }

    /// File names written by [`emit_report`] for `format`, in order.
    pub fn planned_manifest(&self, format: ReportFormat) -> Vec<String> {
        let mut files = vec!["report.json".to_string(), "timings.json".to_string()];
        files.extend(self.artifacts.iter().map(|(f, _)| f.clone()));
        if format == ReportFormat::CsvBundle {
            files.extend(self.tables.iter().map(|t| format!("{}.csv", t.name)));
        }
        files
    }
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<PathBuf, LabError> {
    let path = dir.join(file);
    fs::write(&path, contents).map_err(|source| LabError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes the report and its artifacts into `dir`, then checks that every
/// manifest entry exists and is non-empty.
pub fn emit_report(report: &mut RunReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    report.manifest = report.planned_manifest(format);
    let mut json = serde_json::to_string_pretty(&*report).expect("report serializes");
    json.push('\n');
    let timings: Map<String, Value> = report
        .timings
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::json!(v)))
        .collect();
    let mut timings = serde_json::to_string_pretty(&timings).expect("timings serialize");
    timings.push('\n');

    let mut written = vec![write(dir, "report.json", &json)?, write(dir, "timings.json", &timings)?];
    for (file, contents) in &report.artifacts {
        written.push(write(dir, file, contents)?);
    }
    if format == ReportFormat::CsvBundle {
        for t in &report.tables {
            written.push(write(dir, &format!("{}.csv", t.name), &t.to_csv())?);
        }
    }
    for file in &report.manifest {
        let path = dir.join(file);
        let len = fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        if len == 0 {
            return Err(LabError::EmptyArtifact { path });
        }
    }
    Ok(written)
}
