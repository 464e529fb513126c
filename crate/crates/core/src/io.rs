//! Matrix Market (integer coordinate) matrices and plain-text vectors.
//!
//! The entry bound `U` is read from an optional `% bound U` comment and
//! otherwise taken as the largest entry magnitude.

use std::fmt::Write as _;

use thiserror::Error;

use crate::matrix::{validate_sddm, SddmMatrix, ValidationError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

/// Parses a Matrix Market `coordinate integer {symmetric|general}` matrix.
/// `real` fields are accepted when every value is integral.
pub fn parse_matrix_market(text: &str) -> Result<SddmMatrix, IoError> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'"));
    }
    let real = match fields[3].as_str() {
        "integer" => false,
        "real" => true,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    let symmetric = match fields[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };

    let mut bound = None;
    let mut size = None;
    let mut entries = Vec::new();
    let mut expected = 0usize;
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('%') {
            let mut words = c.split_whitespace();
            if words.next() == Some("bound") {
                let v = words.next().and_then(|w| w.parse::<i64>().ok()).ok_or_else(|| parse_err(no, "malformed bound comment"))?;
                bound = Some(v);
            }
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if tok.len() != 3 {
                    return Err(parse_err(no, "expected 'rows cols entries'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err(no, format!("bad count '{s}'")));
                let (r, c, k) = (p(tok[0])?, p(tok[1])?, p(tok[2])?);
                if r != c {
                    return Err(parse_err(no, format!("matrix is {r}x{c}, not square")));
                }
                size = Some(r);
                expected = k;
            }
            Some(n) => {
                if tok.len() != 3 {
                    return Err(parse_err(no, "expected 'row col value'"));
                }
                let idx = |s: &str| -> Result<usize, IoError> {
                    let v = s.parse::<usize>().map_err(|_| parse_err(no, format!("bad index '{s}'")))?;
                    if v == 0 || v > n {
                        return Err(parse_err(no, format!("index {v} outside 1..={n}")));
                    }
                    Ok(v - 1)
                };
                let (i, j) = (idx(tok[0])?, idx(tok[1])?);
                let value = if real {
                    let f = tok[2].parse::<f64>().map_err(|_| parse_err(no, format!("bad value '{}'", tok[2])))?;
                    if f.fract() != 0.0 || f.abs() > i64::MAX as f64 {
                        return Err(parse_err(no, format!("value {f} is not an integer")));
                    }
                    f as i64
                } else {
                    tok[2].parse::<i64>().map_err(|_| parse_err(no, format!("bad integer '{}'", tok[2])))?
                };
                if symmetric && j > i {
                    return Err(parse_err(no, "symmetric files list the lower triangle only"));
                }
                entries.push((i, j, value));
                if symmetric && i != j {
                    entries.push((j, i, value));
                }
            }
        }
    }
    let n = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    let listed = if symmetric { entries.iter().filter(|&&(i, j, _)| i >= j).count() } else { entries.len() };
    if listed != expected {
        return Err(parse_err(1, format!("header declares {expected} entries, found {listed}")));
    }
    let bound = bound.unwrap_or_else(|| entries.iter().map(|&(_, _, v)| v.abs()).max().unwrap_or(1).max(1));
    Ok(validate_sddm(n, &entries, bound)?)
}

pub fn read_matrix_market(path: &std::path::Path) -> Result<SddmMatrix, IoError> {
    parse_matrix_market(&std::fs::read_to_string(path)?)
}

/// Lower triangle in symmetric integer form, with the bound as a comment.
pub fn format_matrix_market(l: &SddmMatrix) -> String {
    let lower: Vec<(usize, usize, i64)> = l.triplets().into_iter().filter(|&(i, j, _)| i >= j).collect();
    let mut s = String::from("%%MatrixMarket matrix coordinate integer symmetric\n");
    let _ = writeln!(s, "% bound {}", l.bound());
    let _ = writeln!(s, "{} {} {}", l.n(), l.n(), lower.len());
    for (i, j, v) in lower {
        let _ = writeln!(s, "{} {} {}", i + 1, j + 1, v);
    }
    s
}

pub fn write_matrix_market(path: &std::path::Path, l: &SddmMatrix) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_matrix_market(l))?)
}

/// One value per line; blank lines and lines starting with `%` or `#` are skipped.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, IoError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let v = t.parse::<f64>().map_err(|_| parse_err(k + 1, format!("bad number '{t}'")))?;
        if !v.is_finite() {
            return Err(parse_err(k + 1, format!("value '{t}' is not finite")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_vector(path: &std::path::Path) -> Result<Vec<f64>, IoError> {
    parse_vector(&std::fs::read_to_string(path)?)
}

/// Integral values print as integers, others in shortest round-trip form.
pub fn format_vector(x: &[f64]) -> String {
    let mut s = String::new();
    for &v in x {
        if v.fract() == 0.0 && v.abs() < 1e15 {
            let _ = writeln!(s, "{}", v as i64);
        } else {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

pub fn write_vector(path: &std::path::Path, x: &[f64]) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_vector(x))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::from_dense;

    #[test]
    fn round_trip() {
        let l = from_dense(&[vec![3, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]], 5).unwrap();
        let back = parse_matrix_market(&format_matrix_market(&l)).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn infers_bound_and_reads_general() {
        let text = "%%MatrixMarket matrix coordinate integer general\n2 2 4\n1 1 2\n1 2 -1\n2 1 -1\n2 2 2\n";
        let l = parse_matrix_market(text).unwrap();
        assert_eq!(l.bound(), 2);
        assert_eq!(l.get(0, 1), -1);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_matrix_market("hello"), Err(IoError::Parse { .. })));
        let upper = "%%MatrixMarket matrix coordinate integer symmetric\n2 2 2\n1 2 -1\n1 1 2\n";
        assert!(matches!(parse_matrix_market(upper), Err(IoError::Parse { .. })));
        let count = "%%MatrixMarket matrix coordinate integer symmetric\n1 1 2\n1 1 2\n";
        assert!(matches!(parse_matrix_market(count), Err(IoError::Parse { .. })));
        let bad = "%%MatrixMarket matrix coordinate integer symmetric\n1 1 1\n1 1 -2\n";
        assert!(matches!(parse_matrix_market(bad), Err(IoError::Invalid(_))));
    }

    #[test]
    fn vectors() {
        let x = vec![1.0, 0.0, 2.5e-300, 1.0 / 3.0];
        assert_eq!(parse_vector(&format_vector(&x)).unwrap(), x);
        assert_eq!(parse_vector("# b\n1\n\n2\n").unwrap(), vec![1.0, 2.0]);
        assert!(parse_vector("1\nx\n").is_err());
    }
}
