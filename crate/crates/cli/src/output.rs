//! Artifact writing: the data file, the long-format plot data and the
//! metadata sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub units: String,
    pub definition: String,
}

pub fn column(name: &str, units: &str, definition: &str) -> ColumnInfo {
    ColumnInfo {
        name: name.into(),
        units: units.into(),
        definition: definition.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Missing, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format_float(*v),
            Cell::Num(_) | Cell::Missing => String::new(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Missing => Value::Null,
        }
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<ColumnInfo>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<ColumnInfo>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.name.clone(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// A scalar result or constant with its units and meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Described {
    pub value: Value,
    pub units: String,
    pub definition: String,
}

pub fn described(value: impl Into<Value>, units: &str, definition: &str) -> Described {
    Described {
        value: value.into(),
        units: units.into(),
        definition: definition.into(),
    }
}

/// Everything an experiment produces before it is written out.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub data: Table,
    pub plot: Option<Table>,
    pub resolved_beta: Option<f64>,
    pub constants: BTreeMap<String, Described>,
    pub summary: BTreeMap<String, Described>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub data: PathBuf,
    pub plotdata: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: RunConfig,
    pub resolved_beta: Option<f64>,
    pub constants: BTreeMap<String, Described>,
    pub columns: Vec<ColumnInfo>,
    pub plot_columns: Vec<ColumnInfo>,
    pub summary: BTreeMap<String, Described>,
    pub artifacts: Artifacts,
    pub wall_time_seconds: f64,
    pub versions: BTreeMap<String, String>,
}

pub fn sidecar_path(config: &RunConfig) -> PathBuf {
    with_suffix(&config.stem(), ".meta.json")
}

pub fn data_path(config: &RunConfig) -> PathBuf {
    with_suffix(&config.stem(), &format!(".{}", config.format.extension()))
}

pub fn plot_path(config: &RunConfig) -> PathBuf {
    with_suffix(&config.stem(), ".plot.csv")
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Data file contents; independent of wall time, so a re-run with the same
/// configuration reproduces it byte for byte.
pub fn render_data(config: &RunConfig, exp: &Experiment) -> String {
    match config.format {
        Format::Csv => exp.data.to_csv(),
        Format::Json => {
            let summary: Map<String, Value> = exp
                .summary
                .iter()
                .map(|(k, v)| (k.clone(), v.value.clone()))
                .collect();
            let doc = serde_json::json!({
                "command": config.command.name(),
                "config": config,
                "resolved_beta": exp.resolved_beta,
                "columns": exp.data.columns.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
                "rows": exp.data.to_json_rows(),
                "summary": summary,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("JSON values are always serialisable");
            s.push('\n');
            s
        }
    }
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("homopolymer".to_string(), homopolymer::VERSION.to_string()),
        ("homopolymer-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

/// Writes the data file, the plot data (when the experiment has a
/// prediction to compare with) and the sidecar. Returns the sidecar path.
pub fn write_artifacts(config: &RunConfig, exp: &Experiment, wall_time_seconds: f64) -> Result<PathBuf> {
    fs::create_dir_all(&config.output).map_err(|e| CliError::io(&config.output, e))?;
    let data = data_path(config);
    write_file(&data, &render_data(config, exp))?;
    let plotdata = match &exp.plot {
        Some(plot) => {
            let path = plot_path(config);
            write_file(&path, &plot.to_csv())?;
            Some(path)
        }
        None => None,
    };
    let meta = Metadata {
        config: config.clone(),
        resolved_beta: exp.resolved_beta,
        constants: exp.constants.clone(),
        columns: exp.data.columns.clone(),
        plot_columns: exp.plot.as_ref().map(|p| p.columns.clone()).unwrap_or_default(),
        summary: exp.summary.clone(),
        artifacts: Artifacts { data, plotdata },
        wall_time_seconds,
        versions: versions(),
    };
    let path = sidecar_path(config);
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Json {
        path: path.clone(),
        source: e,
    })?;
    text.push('\n');
    write_file(&path, &text)?;
    Ok(path)
}

/// The resolved configuration stored in sidecar text.
pub fn parse_sidecar(text: &str) -> std::result::Result<RunConfig, String> {
    #[derive(Deserialize)]
    struct Partial {
        config: RunConfig,
    }
    let partial: Partial = serde_json::from_str(text).map_err(|e| e.to_string())?;
    partial.config.validate().map_err(|e| e.to_string())?;
    Ok(partial.config)
}

pub fn load_sidecar_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_sidecar(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1 + 0.2;
        let s = format_float(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
        assert_eq!(s.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }

    #[test]
    fn csv_quotes_and_blanks() {
        let mut t = Table::new(vec![column("a", "", ""), column("b", "", ""), column("c", "", "")]);
        t.push(vec![Cell::Text("x,y".into()), Cell::Missing, Cell::Int(-3)]);
        t.push(vec![Cell::Text("plain".into()), Cell::Num(f64::NAN), Cell::Num(1.5)]);
        assert_eq!(t.to_csv(), "a,b,c\n\"x,y\",,-3\nplain,,1.5000000000000000e0\n");
    }

    #[test]
    fn sidecar_parser_rejects_garbage() {
        assert!(parse_sidecar("").is_err());
        assert!(parse_sidecar("{\"config\": 3}").is_err());
        assert!(parse_sidecar("[]").is_err());
    }
}
