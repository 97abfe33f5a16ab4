//! Plain-text matrix and vector files.
//!
//! A matrix file holds `n` on its first data line followed by `n` rows of `n`
//! whitespace-separated numbers. A vector file holds `n` followed by `n`
//! numbers on any number of lines. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use super::{MarkovError, Result};

/// Format a number with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| MarkovError::Parse {
        line,
        msg: format!("not a number: {tok:?}"),
    })
}

fn parse_header(lines: &mut dyn Iterator<Item = (usize, &str)>) -> Result<(usize, usize)> {
    let (line, l) = lines.next().ok_or(MarkovError::Parse {
        line: 0,
        msg: "missing size line".into(),
    })?;
    let n = l.parse::<usize>().map_err(|_| MarkovError::Parse {
        line,
        msg: format!("bad size {l:?}"),
    })?;
    Ok((line, n))
}

pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = data_lines(text);
    let (hline, n) = parse_header(&mut lines)?;
    let mut rows = Vec::with_capacity(n);
    for (line, l) in lines.by_ref() {
        let row = l
            .split_whitespace()
            .map(|t| parse_num(t, line))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != n {
            return Err(MarkovError::Parse {
                line,
                msg: format!("expected {n} entries, found {}", row.len()),
            });
        }
        rows.push(row);
        if rows.len() == n {
            break;
        }
    }
    if rows.len() != n {
        return Err(MarkovError::Parse {
            line: hline,
            msg: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    if let Some((line, _)) = lines.next() {
        return Err(MarkovError::Parse {
            line,
            msg: "trailing data".into(),
        });
    }
    Ok(rows)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut lines = data_lines(text);
    let (hline, n) = parse_header(&mut lines)?;
    let mut v = Vec::with_capacity(n);
    for (line, l) in lines {
        for t in l.split_whitespace() {
            v.push(parse_num(t, line)?);
        }
    }
    if v.len() != n {
        return Err(MarkovError::Parse {
            line: hline,
            msg: format!("expected {n} values, found {}", v.len()),
        });
    }
    Ok(v)
}

pub fn format_matrix(rows: &[Vec<f64>]) -> String {
    let mut s = format!("{}\n", rows.len());
    for r in rows {
        let line: Vec<String> = r.iter().map(|&x| fmt17(x)).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn format_vector(v: &[f64]) -> String {
    let line: Vec<String> = v.iter().map(|&x| fmt17(x)).collect();
    format!("{}\n{}\n", v.len(), line.join(" "))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| MarkovError::Io(format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    parse_matrix(&read(path.as_ref())?)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let rows = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let text = format_matrix(&rows);
        assert_eq!(parse_matrix(&text).unwrap(), rows);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# kernel\n2\n\n0.5 0.5 # row 0\n1 0\n";
        assert_eq!(
            parse_matrix(text).unwrap(),
            vec![vec![0.5, 0.5], vec![1.0, 0.0]]
        );
        assert_eq!(parse_vector("3\n1 2\n3\n").unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(
            parse_matrix("2\n1 0\n"),
            Err(MarkovError::Parse { .. })
        ));
        assert!(matches!(
            parse_matrix("2\n1 0 0\n0 1\n"),
            Err(MarkovError::Parse { line: 2, .. })
        ));
        assert!(parse_vector("x\n").is_err());
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
