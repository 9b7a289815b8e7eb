//! Result tables and their CSV and aligned-text renderings.

use std::fmt::Write as _;

use crate::error::CliError;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Table,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        if self.rows.is_empty() {
            return Err(CliError::io("refusing to emit an empty table"));
        }
        Ok(match format {
            Format::Csv => self.to_csv(),
            Format::Table => self.to_aligned(),
        })
    }

    fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }

    fn to_aligned(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::render).collect())
            .collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r[j].chars().count())
                    .chain([self.columns[j].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, items: Vec<(String, bool)>| {
            let parts: Vec<String> = items
                .iter()
                .zip(&widths)
                .map(|((s, right), &w)| {
                    if *right {
                        format!("{s:>w$}")
                    } else {
                        format!("{s:<w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(
            &mut out,
            self.columns.iter().map(|c| (c.clone(), false)).collect(),
        );
        line(
            &mut out,
            widths.iter().map(|&w| ("-".repeat(w), false)).collect(),
        );
        for (row, raw) in cells.iter().zip(&self.rows) {
            line(
                &mut out,
                row.iter()
                    .zip(raw)
                    .map(|(s, c)| (s.clone(), matches!(c, Cell::Num(_))))
                    .collect(),
            );
        }
        out
    }
}

/// Parses CSV emitted by [`Table::render`]; numeric-looking cells become numbers.
pub fn parse_csv(text: &str) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let columns = r
        .headers()
        .map_err(|e| CliError::io(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::io(e.to_string()))?;
        rows.push(
            rec.iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map(Cell::Num)
                        .unwrap_or_else(|_| Cell::Text(s.to_string()))
                })
                .collect(),
        );
    }
    Ok(Table { columns, rows })
}

/// Shortest rendering carrying 12 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
