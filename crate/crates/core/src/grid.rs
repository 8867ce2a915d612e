//! Dense row-major matrices and the per-frame score grid.

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::format::format_number;

/// A dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Text form: a `rows cols` header, then one line of space-separated
    /// values per row.
    pub fn to_text(&self) -> String {
        let mut text = format!("{} {}\n", self.rows, self.cols);
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|&v| format_number(v)).collect();
            let _ = writeln!(text, "{}", line.join(" "));
        }
        text
    }

    pub fn from_text<R: BufRead>(reader: R) -> Result<Matrix> {
        let mut lines = reader
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
        let (lineno, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let header = header?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|f| f.parse::<usize>().map_err(|e| Error::parse(lineno, e)))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::parse(lineno, "header must be `rows cols`"));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| Error::parse(lineno + rows, "fewer rows than declared"))?;
            let line = line?;
            let before = data.len();
            for f in line.split_whitespace() {
                data.push(f.parse::<f64>().map_err(|e| Error::parse(lineno, e))?);
            }
            if data.len() - before != cols {
                return Err(Error::parse(
                    lineno,
                    format!("expected {cols} values, found {}", data.len() - before),
                ));
            }
        }
        if let Some((lineno, _)) = lines.next() {
            return Err(Error::parse(lineno, "more rows than declared"));
        }
        Matrix::from_vec(rows, cols, data)
    }
}

/// Per-frame log scores: `T` rows, `V + 1` columns, column 0 is blank.
///
/// Entries are usually log-probabilities from [`crate::loss::log_softmax`] but
/// any finite values are accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrid(Matrix);

impl DenseGrid {
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() < 2 {
            return Err(Error::invalid(format!(
                "grid must have at least one frame and two columns, got {}x{}",
                values.rows(),
                values.cols()
            )));
        }
        if let Some(i) = values.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite grid entry at frame {}, column {}",
                i / values.cols(),
                i % values.cols()
            )));
        }
        Ok(DenseGrid(values))
    }

    /// Every entry `ln(1 / (V + 1))`.
    pub fn uniform(frames: usize, vocab_size: usize) -> Result<Self> {
        let cols = vocab_size + 1;
        let v = -(cols as f64).ln();
        DenseGrid::new(Matrix::from_vec(frames, cols, vec![v; frames * cols])?)
    }

    pub fn frames(&self) -> usize {
        self.0.rows()
    }

    pub fn columns(&self) -> usize {
        self.0.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.0.cols() - 1
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.0.get(t, k)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.0.row(t)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}
