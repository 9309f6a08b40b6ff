//! In-memory result artifacts and their serialisation.
//!
//! Experiments only build artifacts; the runner writes them, so every file
//! write happens on the orchestrating thread.

use serde::Serialize;

/// Scalar column types of a typed table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Str,
    Bool,
}

impl Kind {
    fn as_str(self) -> &'static str {
        match self {
            Kind::Int => "int",
            Kind::Float => "float",
            Kind::Str => "str",
            Kind::Bool => "bool",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
}

impl Cell {
    fn kind(&self) -> Kind {
        match self {
            Cell::Int(_) => Kind::Int,
            Cell::Float(_) => Kind::Float,
            Cell::Str(_) => Kind::Str,
            Cell::Bool(_) => Kind::Bool,
        }
    }

    /// Floats use 17 significant digits so that they read back exactly.
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => "nan".into(),
            Cell::Float(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Str(v) => v.clone(),
            Cell::Bool(v) => v.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

/// A CSV table. Typed tables carry `name:type` headers; plot data keeps
/// bare column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<(String, Kind)>,
    pub rows: Vec<Vec<Cell>>,
    pub typed: bool,
}

impl Table {
    pub fn new(columns: &[(&str, Kind)]) -> Self {
        Table {
            columns: columns.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            rows: Vec::new(),
            typed: true,
        }
    }

    /// Untyped float table for external plotting.
    pub fn plot(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|n| (n.to_string(), Kind::Float)).collect(),
            rows: Vec::new(),
            typed: false,
        }
    }

    /// Appends a row; panics on a column count or type mismatch, which is a
    /// programming error in the experiment that built the table.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        for (cell, (name, kind)) in row.iter().zip(&self.columns) {
            assert_eq!(cell.kind(), *kind, "column `{name}`");
        }
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = self
            .columns
            .iter()
            .map(|(n, k)| if self.typed { format!("{n}:{}", k.as_str()) } else { n.clone() })
            .collect();
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Table(Table),
    Json(serde_json::Value),
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub content: Content,
}

impl Artifact {
    pub fn bytes(&self) -> Vec<u8> {
        match &self.content {
            Content::Table(t) => t.to_csv(),
            Content::Json(v) => {
                let mut s = serde_json::to_string_pretty(v).expect("JSON value serialises");
                s.push('\n');
                s.into_bytes()
            }
        }
    }
}

/// A built-in sanity check whose failure makes a run inconclusive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything an experiment produced, in emission order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn table(&mut self, name: &str, table: Table) {
        self.artifacts.push(Artifact {
            name: format!("{name}.csv"),
            content: Content::Table(table),
        });
    }

    pub fn json(&mut self, name: &str, value: impl Serialize) {
        self.artifacts.push(Artifact {
            name: format!("{name}.json"),
            content: Content::Json(serde_json::to_value(value).expect("report serialises")),
        });
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}
