//! Plain-text matrix format: a header line `rows cols`, then the entries in
//! row-major order, one matrix row per line, each written with 17 significant
//! digits so values round-trip exactly. Vectors are stored as `n 1` matrices.

use std::io::{BufRead, Write};

use crate::{Error, Matrix, Result, Vector};

pub fn write_matrix<W: Write>(mut out: W, m: &Matrix) -> Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_vector<W: Write>(out: W, v: &Vector) -> Result<()> {
    let m = Matrix::from_column_slice(v.len(), 1, v.as_slice());
    write_matrix(out, &m)
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<Matrix> {
    let mut tokens = Vec::new();
    let mut lines = input.lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(Error::Parse("missing 'rows cols' header".into())),
        }
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be 'rows cols', got {header:?}")));
    };
    for line in lines {
        for t in line?.split_whitespace() {
            let v = t
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad entry {t:?}: {e}")))?;
            tokens.push(v);
        }
    }
    if tokens.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} entries, found {}",
            rows * cols,
            tokens.len()
        )));
    }
    Ok(Matrix::from_row_slice(rows, cols, &tokens))
}

pub fn read_vector<R: BufRead>(input: R) -> Result<Vector> {
    let m = read_matrix(input)?;
    if m.ncols() != 1 {
        return Err(Error::Parse(format!(
            "vector file must have one column, found {}",
            m.ncols()
        )));
    }
    Ok(Vector::from_column_slice(m.as_slice()))
}
