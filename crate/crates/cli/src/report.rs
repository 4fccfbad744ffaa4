//! Command output as an ordered list of fields, rendered either as an aligned
//! text table or as JSON.

use serde_json::{Map, Value};

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    List(Vec<Cell>),
}

impl Cell {
    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or_else(|| Value::String(x.to_string())),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::List(xs) => Value::Array(xs.iter().map(Cell::json).collect()),
        }
    }

    fn text(&self) -> String {
        match self {
            // adding zero turns -0 into 0
            Cell::Num(x) => format!("{:.10e}", x + 0.0),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => if *b { "yes" } else { "no" }.to_string(),
            Cell::List(xs) => format!("[{}]", xs.iter().map(Cell::text).collect::<Vec<_>>().join(", ")),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<i64> for Cell {
    fn from(n: i64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl<T: Into<Cell>> From<Vec<T>> for Cell {
    fn from(xs: Vec<T>) -> Self {
        Cell::List(xs.into_iter().map(Into::into).collect())
    }
}

struct Table {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Default)]
pub struct Report {
    fields: Vec<(String, Cell)>,
    tables: Vec<Table>,
    notes: Vec<String>,
}

impl Report {
    pub fn field(&mut self, key: &str, value: impl Into<Cell>) -> &mut Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    /// `ln_<key>` and its exponential `<key>` side by side.
    pub fn log_pair(&mut self, key: &str, ln: f64) -> &mut Self {
        self.field(&format!("ln_{key}"), ln).field(key, ln.exp())
    }

    pub fn table(&mut self, name: &str, columns: &[&str], rows: Vec<Vec<Cell>>) -> &mut Self {
        self.tables.push(Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows });
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn json(&self) -> String {
        let mut m = Map::new();
        for (k, v) in &self.fields {
            m.insert(k.clone(), v.json());
        }
        for t in &self.tables {
            let rows = t
                .rows
                .iter()
                .map(|r| Value::Object(t.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
                .collect();
            m.insert(t.name.clone(), Value::Array(rows));
        }
        if !self.notes.is_empty() {
            m.insert("notes".into(), Value::Array(self.notes.iter().cloned().map(Value::String).collect()));
        }
        l2torsion::document::to_json_string(&Value::Object(m))
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.fields {
            out.push_str(&format!("{k:<width$}  {}\n", v.text()));
        }
        for t in &self.tables {
            out.push_str(&format!("\n{}:\n", t.name));
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|j| cells.iter().map(|r| r[j].len()).chain([t.columns[j].len()]).max().unwrap_or(0))
                .collect();
            let line = |r: &[String]| {
                let parts: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                format!("  {}\n", parts.join("  ").trim_end())
            };
            out.push_str(&line(&t.columns));
            for r in &cells {
                out.push_str(&line(r));
            }
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                out.push_str(&format!("note: {n}\n"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_line_up() {
        let mut r = Report::default();
        r.field("a", 1usize).field("longer", "x").table("t", &["n", "value"], vec![vec!["first".into(), 2.0.into()]]);
        let text = r.text();
        assert!(text.contains("a       1\nlonger  x\n"));
        assert!(text.contains("  n      value\n  first  2.0000000000e0\n"));
    }

    #[test]
    fn json_keeps_full_precision() {
        let mut r = Report::default();
        r.log_pair("det", 0.1);
        let v: Value = serde_json::from_str(&r.json()).unwrap();
        assert_eq!(v["ln_det"].as_f64(), Some(0.1));
    }
}
