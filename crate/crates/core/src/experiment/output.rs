//! Result containers and their CSV/JSON forms.
//!
//! CSV: one header row, `\n` line endings, floats as `{:.16e}` (17
//! significant digits, exact round trip), missing values as empty fields.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::C64;

/// Rectangular numeric table; `None` marks an undefined entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// `name_re`, `name_im` column headers for a complex quantity.
pub fn complex_columns(name: &str) -> [String; 2] {
    [format!("{name}_re"), format!("{name}_im")]
}

pub fn complex_cells(z: C64) -> [Option<f64>; 2] {
    [Some(z.re), Some(z.im)]
}

fn format_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

fn parse_cell(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::InvalidArgument(format!("bad CSV number {s:?}: {e}")))
}

pub fn write_table_csv<W: Write>(table: &Table, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format_cell(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table_csv<R: Read>(input: R) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let columns: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut table = Table::new(columns);
    for rec in r.records() {
        let rec = rec?;
        let row = rec.iter().map(parse_cell).collect::<Result<Vec<_>>>()?;
        table.push(row);
    }
    Ok(table)
}

/// One observable sampled on a sweep grid, row-major in `(axis1, axis2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// Observables on a two-axis grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis1_name: String,
    pub axis1: Vec<f64>,
    pub axis2_name: String,
    pub axis2: Vec<f64>,
    pub observables: Vec<Observable>,
}

impl SweepResult {
    pub fn get(&self, name: &str, i1: usize, i2: usize) -> Option<f64> {
        let obs = self.observables.iter().find(|o| o.name == name)?;
        obs.values[i1 * self.axis2.len() + i2]
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.axis1.len() * self.axis2.len();
        for o in &self.observables {
            if o.values.len() != n {
                return Err(Error::InvalidDimension(format!(
                    "observable {} has {} values for a {}x{} grid",
                    o.name,
                    o.values.len(),
                    self.axis1.len(),
                    self.axis2.len()
                )));
            }
        }
        Ok(())
    }

    /// Long form: one row per grid point, `axis2` varying fastest.
    pub fn to_table(&self) -> Table {
        let mut cols = vec![self.axis1_name.clone(), self.axis2_name.clone()];
        cols.extend(self.observables.iter().map(|o| o.name.clone()));
        let mut t = Table::new(cols);
        for (i, &a) in self.axis1.iter().enumerate() {
            for (j, &b) in self.axis2.iter().enumerate() {
                let k = i * self.axis2.len() + j;
                let mut row = vec![Some(a), Some(b)];
                row.extend(self.observables.iter().map(|o| o.values[k]));
                t.push(row);
            }
        }
        t
    }

    pub fn from_table(t: &Table) -> Result<Self> {
        if t.columns.len() < 2 {
            return Err(Error::InvalidDimension("sweep table needs two axis columns".into()));
        }
        let axis = |row: &Vec<Option<f64>>, k: usize| {
            row[k].ok_or_else(|| Error::InvalidArgument("empty axis value".into()))
        };
        let mut axis1: Vec<f64> = Vec::new();
        let mut axis2: Vec<f64> = Vec::new();
        for row in &t.rows {
            let a = axis(row, 0)?;
            if axis1.last() != Some(&a) {
                axis1.push(a);
            }
            if axis1.len() == 1 {
                axis2.push(axis(row, 1)?);
            }
        }
        if axis1.len() * axis2.len() != t.rows.len() {
            return Err(Error::InvalidDimension(format!(
                "{} rows do not form a {}x{} grid",
                t.rows.len(),
                axis1.len(),
                axis2.len()
            )));
        }
        for (k, row) in t.rows.iter().enumerate() {
            if axis(row, 1)? != axis2[k % axis2.len()] {
                return Err(Error::InvalidDimension(format!("row {k} breaks the grid order")));
            }
        }
        let observables = t.columns[2..]
            .iter()
            .enumerate()
            .map(|(c, name)| Observable { name: name.clone(), values: t.rows.iter().map(|r| r[c + 2]).collect() })
            .collect();
        let out = Self {
            axis1_name: t.columns[0].clone(),
            axis1,
            axis2_name: t.columns[1].clone(),
            axis2,
            observables,
        };
        out.check_shape()?;
        Ok(out)
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RunOutput {
    Table(Table),
    Sweep(SweepResult),
}

impl RunOutput {
    pub fn to_table(&self) -> Table {
        match self {
            Self::Table(t) => t.clone(),
            Self::Sweep(s) => s.to_table(),
        }
    }
}
