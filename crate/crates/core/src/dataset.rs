//! Integer-coded sample datasets and their CSV form.
//!
//! One row per unit, one column per variable, levels coded `0..card`.
//! The CSV layout matches what the simulator writes and the estimators read.

use crate::error::{Error, Result};
use crate::table::{JointTable, VarSpec};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    vars: Vec<VarSpec>,
    rows: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(vars: Vec<VarSpec>, rows: Vec<Vec<usize>>) -> Result<Self> {
        for (i, v) in vars.iter().enumerate() {
            if v.card == 0 {
                return Err(Error::Shape(format!("variable `{}` has cardinality 0", v.name)));
            }
            if vars[..i].iter().any(|b| b.name == v.name) {
                return Err(Error::Shape(format!("duplicate column `{}`", v.name)));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != vars.len() {
                return Err(Error::Shape(format!(
                    "row {r} has {} cells, expected {}",
                    row.len(),
                    vars.len()
                )));
            }
            for (c, (&level, var)) in row.iter().zip(&vars).enumerate() {
                if level >= var.card {
                    return Err(Error::Shape(format!(
                        "row {r}, column {c} (`{}`): level {level} out of range (card {})",
                        var.name, var.card
                    )));
                }
            }
        }
        Ok(Dataset { vars, rows })
    }

    pub fn vars(&self) -> &[VarSpec] {
        &self.vars
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<usize>> {
        let i = self.var_index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Project onto the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.var_index(n))
            .collect::<Result<_>>()?;
        let vars = idx.iter().map(|&i| self.vars[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i]).collect())
            .collect();
        Dataset::new(vars, rows)
    }

    /// Empirical frequency table over all columns. No smoothing: cells that
    /// never occur have probability exactly 0, and downstream overlap checks
    /// see them as such.
    pub fn empirical_joint(&self) -> Result<JointTable> {
        if self.rows.is_empty() {
            return Err(Error::Shape("empty dataset has no empirical joint".into()));
        }
        let cards: Vec<usize> = self.vars.iter().map(|v| v.card).collect();
        let strides = crate::table::strides(&cards);
        let cells: usize = cards.iter().product();
        let mut counts = vec![0.0f64; cells];
        for row in &self.rows {
            let idx: usize = row.iter().zip(&strides).map(|(l, s)| l * s).sum();
            counts[idx] += 1.0;
        }
        let n = self.rows.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        JointTable::new(self.vars.clone(), counts)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.vars.iter().map(|v| v.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|l| l.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read an integer-coded CSV with a header row. Cardinalities are taken
    /// from `cards` when given, otherwise inferred as `max level + 1`.
    pub fn read_csv<R: Read>(input: R, cards: Option<&[usize]>) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(input);
        let names: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut rows: Vec<Vec<usize>> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row: Vec<usize> = rec
                .iter()
                .map(|cell| {
                    cell.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Shape(format!("non-integer cell `{cell}`")))
                })
                .collect::<Result<_>>()?;
            if row.len() != names.len() {
                return Err(Error::Shape("ragged CSV row".into()));
            }
            rows.push(row);
        }
        let cards: Vec<usize> = match cards {
            Some(c) => {
                if c.len() != names.len() {
                    return Err(Error::Shape("cards length does not match columns".into()));
                }
                c.to_vec()
            }
            None => (0..names.len())
                .map(|i| rows.iter().map(|r| r[i]).max().map_or(1, |m| m + 1))
                .collect(),
        };
        let vars = names
            .into_iter()
            .zip(cards)
            .map(|(name, card)| VarSpec { name, card })
            .collect();
        Dataset::new(vars, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![VarSpec::new("a1", 2), VarSpec::new("y", 3)],
            vec![vec![0, 2], vec![1, 0], vec![1, 2], vec![0, 1]],
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip() {
        let d = toy();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), Some(&[2, 3])).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_infers_cards() {
        let d = toy();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back.vars()[0].card, 2);
        assert_eq!(back.vars()[1].card, 3);
    }

    #[test]
    fn out_of_range_level_rejected() {
        let err = Dataset::new(vec![VarSpec::new("a1", 2)], vec![vec![2]]);
        assert!(err.is_err());
    }

    #[test]
    fn empirical_joint_counts() {
        let d = toy();
        let j = d.empirical_joint().unwrap();
        assert!((j.prob(&[0, 2]) - 0.25).abs() < 1e-12);
        assert!((j.prob(&[1, 1]) - 0.0).abs() < 1e-12);
        let sum: f64 = j.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
