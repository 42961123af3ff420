//! Matrix Market coordinate files and plain-text vectors.
//!
//! Reads `%%MatrixMarket matrix coordinate {real|integer|pattern} {general|symmetric}`
//! with 1-based indices; symmetric files are expanded to the full pattern.
//! Writes `real general`, or `real symmetric` (lower triangle) on request.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported storage '{}'", tokens[2])));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(line_no, "size line needs 'rows cols nnz'"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| parse_err(line_no, format!("bad size '{s}': {e}")))
                };
                let dims = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                triplets.reserve(dims.2 * if symmetry == MmSymmetry::Symmetric { 2 } else { 1 });
                size = Some(dims);
            }
            Some((nrows, ncols, _)) => {
                let need = if pattern { 2 } else { 3 };
                if fields.len() < need {
                    return Err(parse_err(line_no, "entry line too short"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|e| parse_err(line_no, format!("bad row index: {e}")))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|e| parse_err(line_no, format!("bad column index: {e}")))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(
                        line_no,
                        format!("index ({i}, {j}) outside 1..={nrows} x 1..={ncols}"),
                    ));
                }
                let v: f64 = if pattern {
                    1.0
                } else {
                    fields[2]
                        .parse()
                        .map_err(|e| parse_err(line_no, format!("bad value: {e}")))?
                };
                if v.is_nan() {
                    return Err(parse_err(line_no, "NaN value"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetry == MmSymmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, nnz) = size.ok_or_else(|| parse_err(0, "missing size line"))?;
    let stored = if symmetry == MmSymmetry::Symmetric {
        triplets.iter().filter(|t| t.0 >= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(parse_err(0, format!("expected {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

pub fn format_matrix_market(a: &CsrMatrix, symmetry: MmSymmetry) -> String {
    let entries: Vec<(usize, usize, f64)> = match symmetry {
        MmSymmetry::General => a.triplets().collect(),
        MmSymmetry::Symmetric => a.triplets().filter(|&(i, j, _)| i >= j).collect(),
    };
    let kind = match symmetry {
        MmSymmetry::General => "general",
        MmSymmetry::Symmetric => "symmetric",
    };
    let mut out = String::with_capacity(32 * entries.len() + 64);
    let _ = writeln!(out, "%%MatrixMarket matrix coordinate real {kind}");
    let _ = writeln!(out, "{} {} {}", a.nrows(), a.ncols(), entries.len());
    for (i, j, v) in entries {
        // {:e} on f64 prints the shortest round-tripping representation
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &CsrMatrix, symmetry: MmSymmetry) -> Result<()> {
    fs::write(path, format_matrix_market(a, symmetry))?;
    Ok(())
}

/// One value per line; blank lines and `%`/`#` comments are skipped.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|e| parse_err(idx + 1, format!("bad value: {e}")))?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn format_vector(x: &[f64]) -> String {
    let mut out = String::with_capacity(24 * x.len());
    for v in x {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

pub fn write_vector(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    fs::write(path, format_vector(x))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_symmetric_lower_triangle() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 3\n1 1 2.0\n2 1 1.0\n2 2 3.0\n";
        let a = parse_matrix_market(text).unwrap();
        assert_eq!(a.to_dense(), vec![2.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn general_round_trip_is_exact() {
        let a = CsrMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 0.1), (1, 1, -1.0 / 3.0), (2, 0, 1e-300), (2, 1, 12345.678)],
        )
        .unwrap();
        let back = parse_matrix_market(&format_matrix_market(&a, MmSymmetry::General)).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn symmetric_write_round_trip() {
        let a = CsrMatrix::from_dense(2, 2, &[4.0, -1.0, -1.0, 4.0]).unwrap();
        let text = format_matrix_market(&a, MmSymmetry::Symmetric);
        assert!(text.contains("2 2 3"));
        assert_eq!(parse_matrix_market(&text).unwrap(), a);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(parse_matrix_market("hello\n").is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n").is_err());
        let short = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n");
        assert!(short.is_err());
    }

    #[test]
    fn vectors() {
        let x = vec![1.0, -2.5e-7, 1.0 / 3.0];
        assert_eq!(parse_vector(&format_vector(&x)).unwrap(), x);
        assert!(parse_vector("1.0\nabc\n").is_err());
    }
}
