use std::io::{Read, Write};

use crate::datagen::{fmt_f64, parse_f64};
use crate::error::{Error, Result};

/// Mean and sample standard deviation of the finite values in a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of<I: IntoIterator<Item = f64>>(values: I) -> Stat {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let n = v.len();
        if n == 0 {
            return Stat {
                n,
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { n, mean, std }
    }
}

/// A CSV table of strings with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse("table", format!("no column `{name}`")))
    }

    pub fn get(&self, row: usize, name: &str) -> Result<&str> {
        Ok(&self.rows[row][self.column(name)?])
    }

    pub fn f64(&self, row: usize, name: &str) -> Result<f64> {
        parse_f64(self.get(row, name)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io("<table>", e))?;
        Ok(())
    }

    /// Parse a table, checking that every row has the header's width.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::parse(
                    "table",
                    format!("row of width {} under {} columns", rec.len(), header.len()),
                ));
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }
}

pub(crate) fn f(v: f64) -> String {
    fmt_f64(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_values() {
        let s = Stat::of([1.0, 2.0, 3.0, f64::NAN]);
        assert_eq!(s.n, 3);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(Stat::of([4.0]).std, 0.0);
        assert!(Stat::of([]).mean.is_nan());
    }

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), f(0.1)]);
        t.push(vec!["".into(), f(f64::NAN)]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Table::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.f64(0, "b").unwrap(), 0.1);
        assert!(back.f64(1, "b").unwrap().is_nan());
        assert!(back.column("c").is_err());
    }
}
