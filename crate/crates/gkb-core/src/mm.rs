//! MatrixMarket coordinate I/O.
//!
//! Matrices use the coordinate format with 1-based indices and a
//! `%%MatrixMarket matrix coordinate real general|symmetric` header.
//! Symmetric storage (lower triangle) is expanded to a full matrix on read.
//! Dense vectors use the `array` format. Values are written with 17
//! significant digits so a write/read round trip is bit-exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::vector::DenseVector;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

struct Header {
    symmetric: bool,
    dense_array: bool,
}

fn parse_header(path: &Path, line: &str) -> Result<Header> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "%%MatrixMarket" {
        return Err(parse_err(path, 1, "malformed %%MatrixMarket header"));
    }
    if fields[1] != "matrix" {
        return Err(parse_err(path, 1, format!("unsupported object '{}'", fields[1])));
    }
    let dense_array = match fields[2] {
        "coordinate" => false,
        "array" => true,
        other => {
            return Err(parse_err(path, 1, format!("unsupported format '{other}'")));
        }
    };
    if fields[3] != "real" {
        return Err(parse_err(
            path,
            1,
            format!("unsupported field '{}' (only real)", fields[3]),
        ));
    }
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(parse_err(path, 1, format!("unsupported symmetry '{other}'")));
        }
    };
    Ok(Header {
        symmetric,
        dense_array,
    })
}

/// Reads a coordinate-format real matrix, expanding symmetric storage.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = parse_header(path, &first?)?;
    if header.dense_array {
        return Err(parse_err(path, 1, "expected coordinate format, found array"));
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut parsed = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(path, lineno, "size line must be 'rows cols nnz'"));
                }
                let parse = |s: &str, what: &str| -> Result<usize> {
                    s.parse()
                        .map_err(|_| parse_err(path, lineno, format!("cannot parse {what} '{s}'")))
                };
                let nrows = parse(fields[0], "row count")?;
                let ncols = parse(fields[1], "column count")?;
                let nnz = parse(fields[2], "entry count")?;
                triplets.reserve(nnz);
                dims = Some((nrows, ncols, nnz));
            }
            Some((nrows, ncols, nnz)) => {
                if fields.len() != 3 {
                    return Err(parse_err(path, lineno, "entry line must be 'i j value'"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "cannot parse row index"))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "cannot parse column index"))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "cannot parse value"))?;
                if i < 1 || i > nrows || j < 1 || j > ncols {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("index ({i},{j}) out of bounds for {nrows}x{ncols}"),
                    ));
                }
                if parsed >= nnz {
                    return Err(parse_err(path, lineno, "more entries than declared"));
                }
                parsed += 1;
                triplets.push((i - 1, j - 1, v));
                if header.symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, nnz) = dims.ok_or_else(|| parse_err(path, 0, "missing size line"))?;
    if parsed != nnz {
        return Err(parse_err(
            path,
            0,
            format!("declared {nnz} entries, found {parsed}"),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, triplets)
}

/// Writes a matrix in coordinate general format with full precision.
pub fn write_matrix_market(a: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, c + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dense vector stored as an array-format n-by-1 matrix.
pub fn read_vector_market(path: impl AsRef<Path>) -> Result<DenseVector> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = parse_header(path, &first?)?;
    if !header.dense_array || header.symmetric {
        return Err(parse_err(path, 1, "expected 'array real general' vector"));
    }
    let mut dims: Option<(usize, usize)> = None;
    let mut data: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        match dims {
            None => {
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(parse_err(path, lineno, "size line must be 'rows cols'"));
                }
                let nrows: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "cannot parse row count"))?;
                let ncols: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "cannot parse column count"))?;
                if ncols != 1 {
                    return Err(parse_err(path, lineno, "vector must have one column"));
                }
                data.reserve(nrows);
                dims = Some((nrows, ncols));
            }
            Some((nrows, _)) => {
                let v: f64 = trimmed
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "cannot parse value"))?;
                if data.len() >= nrows {
                    return Err(parse_err(path, lineno, "more values than declared"));
                }
                data.push(v);
            }
        }
    }
    let (nrows, _) = dims.ok_or_else(|| parse_err(path, 0, "missing size line"))?;
    if data.len() != nrows {
        return Err(parse_err(
            path,
            0,
            format!("declared {} values, found {}", nrows, data.len()),
        ));
    }
    Ok(DenseVector::from_vec(data))
}

/// Writes a dense vector in array format.
pub fn write_vector_market(x: &DenseVector, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", x.len())?;
    for v in x.iter() {
        writeln!(w, "{v:.16e}")?;
    }
    w.flush()?;
    Ok(())
}
