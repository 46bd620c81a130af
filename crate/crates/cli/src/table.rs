//! Row tables and their CSV and JSON encodings.

use std::io::Write;

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::error::CliResult;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    /// A column that does not apply to this row.
    Empty,
}

impl Cell {
    /// CSV text: integers verbatim, floats with 17 significant digits.
    pub fn to_csv(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(v),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(self) -> Value {
        match self {
            Cell::Int(v) => Value::from(v),
            Cell::Float(v) => Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null),
            Cell::Empty => Value::Null,
        }
    }
}

/// Scientific notation with 17 significant digits, locale independent.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: Vec<String>) -> Self {
        Table {
            headers,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Float values of a column. Integers are widened and empty cells become NaN.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[c] {
                    Cell::Int(v) => v as f64,
                    Cell::Float(v) => v,
                    Cell::Empty => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> CliResult<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_csv()))?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_json<W: Write>(&self, mut out: W) -> CliResult<()> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .headers
                    .iter()
                    .zip(row)
                    .map(|(h, c)| (h.clone(), c.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut out, &rows)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(vec!["n".into(), "gamma".into(), "p_2".into()]);
        t.rows.push(vec![Cell::Int(2), Cell::Float(0.1), Cell::Empty]);
        t.rows.push(vec![Cell::Int(3), Cell::Float(1.0 / 3.0), Cell::Float(f64::NEG_INFINITY)]);
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write(Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "n,gamma,p_2\n2,1.0000000000000001e-1,\n3,3.3333333333333331e-1,-inf\n"
        );
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 0.7630664551] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_layout() {
        let mut buf = Vec::new();
        sample().write(Format::Json, &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 2);
        let keys: Vec<&String> = rows[0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["n", "gamma", "p_2"]);
        assert_eq!(rows[0]["p_2"], Value::Null);
        assert_eq!(rows[1]["gamma"].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn float_column() {
        let t = sample();
        assert_eq!(t.floats("n").unwrap(), vec![2.0, 3.0]);
        assert!(t.floats("p_2").unwrap()[0].is_nan());
        assert!(t.floats("missing").is_none());
    }
}
