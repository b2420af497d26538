//! Tabular reports rendered as TSV (headers on every table) or JSON.

use std::fmt::Write as _;

use num_rational::BigRational;
use serde_json::{json, Map, Value as Json};

#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Float(f64),
    /// Printed as `num/den` (or `num` when integral); a string in JSON.
    Exact(BigRational),
    Text(String),
    Missing,
}

impl Value {
    fn tsv(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => v.to_string(),
            Value::Exact(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Missing => "-".into(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Value::Int(v) => json!(v),
            Value::Float(v) => serde_json::Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Value::Exact(v) => Json::String(v.to_string()),
            Value::Text(s) => Json::String(s.clone()),
            Value::Missing => Json::Null,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        i64::try_from(v).map_or_else(|_| Value::Text(v.to_string()), Value::Int)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<BigRational> for Value {
    fn from(v: BigRational) -> Self {
        Value::Exact(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.into())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Missing, Value::Float)
    }
}

/// Probability types the CLI can print.
pub trait Cell {
    fn cell(&self) -> Value;
}

impl Cell for f64 {
    fn cell(&self) -> Value {
        Value::Float(*self)
    }
}

impl Cell for BigRational {
    fn cell(&self) -> Value {
        Value::Exact(self.clone())
    }
}

#[derive(Debug)]
pub struct Table {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(name: &str, columns: impl IntoIterator<Item = S>) -> Self {
        Self { name: name.into(), columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Debug)]
pub struct Report {
    command: String,
    meta: Vec<(String, Value)>,
    tables: Vec<Table>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), meta: Vec::new(), tables: Vec::new() }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.meta.push((key.into(), value.into()));
        self
    }

    pub fn table(&mut self, table: Table) -> &mut Self {
        self.tables.push(table);
        self
    }

    /// Metadata as `# key<TAB>value` comment lines, then each table under a
    /// `## name` line with its column header, separated by blank lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.command);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}\t{}", v.tsv());
        }
        for t in &self.tables {
            let _ = writeln!(out, "\n## {}", t.name);
            let _ = writeln!(out, "{}", t.columns.join("\t"));
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(Value::tsv).collect();
                let _ = writeln!(out, "{}", cells.join("\t"));
            }
        }
        out
    }

    /// `{command, meta: {..}, tables: {name: {columns, rows}}}`.
    pub fn to_json(&self) -> String {
        let meta: Map<String, Json> = self.meta.iter().map(|(k, v)| (k.clone(), v.json())).collect();
        let tables: Map<String, Json> = self
            .tables
            .iter()
            .map(|t| {
                let rows: Vec<Json> = t.rows.iter().map(|r| Json::Array(r.iter().map(Value::json).collect())).collect();
                (t.name.clone(), json!({ "columns": t.columns, "rows": rows }))
            })
            .collect();
        let doc = json!({ "command": self.command, "meta": meta, "tables": tables });
        let mut s = serde_json::to_string_pretty(&doc).expect("report values are serializable");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn sample() -> Report {
        let mut r = Report::new("demo");
        r.meta("q", Value::Exact(BigRational::new(BigInt::from(3), BigInt::from(2))));
        let mut t = Table::new("pmf", ["d", "pr"]);
        t.push(vec![0i64.into(), 0.5.into()]);
        t.push(vec![1i64.into(), Value::Missing]);
        r.table(t);
        r
    }

    #[test]
    fn tsv_has_headers() {
        assert_eq!(sample().to_tsv(), "# demo\n# q\t3/2\n\n## pmf\nd\tpr\n0\t0.5\n1\t-\n");
    }

    #[test]
    fn json_keeps_exact_values_as_strings() {
        let v: Json = serde_json::from_str(&sample().to_json()).unwrap();
        assert_eq!(v["meta"]["q"], "3/2");
        assert_eq!(v["tables"]["pmf"]["rows"][0][1], 0.5);
        assert!(v["tables"]["pmf"]["rows"][1][1].is_null());
    }
}
