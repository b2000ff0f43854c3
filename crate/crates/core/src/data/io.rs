//! Sparse text dataset format.
//!
//! One example per line: `label idx:value idx:value ...` with 1-based,
//! strictly increasing feature indices. Lines starting with `#` are comments.
//! Comments of the form `#@ key ...` carry metadata that a plain line format
//! cannot express (trailing empty columns, normalization scales):
//!
//! ```text
//! #@ n_cols 3
//! #@ scales 2 1 0.5
//! 1 1:0.6 2:0.8
//! -1 1:0.8
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::{ColumnMap, Dataset, SparseColMatrix};
use crate::error::{Error, Result};

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(File::open(path)?)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_dataset(dataset: &Dataset, out: &mut impl Write) -> Result<()> {
    let x = dataset.x();
    writeln!(out, "#@ n_cols {}", x.n_cols())?;
    if let Some(scales) = dataset.scales() {
        write!(out, "#@ scales")?;
        for s in scales {
            write!(out, " {s}")?;
        }
        writeln!(out)?;
    }
    if let Some(map) = dataset.column_map() {
        write!(out, "#@ columns {}", map.original_cols)?;
        for k in &map.kept {
            write!(out, " {k}")?;
        }
        writeln!(out)?;
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); x.n_rows()];
    for j in 0..x.n_cols() {
        let (ri, vals) = x.column(j);
        for (&i, &v) in ri.iter().zip(vals) {
            rows[i].push((j, v));
        }
    }
    for (label, row) in dataset.y().iter().zip(&rows) {
        write!(out, "{label}")?;
        for (j, v) in row {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Default)]
struct Metadata {
    n_cols: Option<usize>,
    scales: Option<Vec<f64>>,
    columns: Option<ColumnMap>,
}

pub fn read_dataset(input: impl Read) -> Result<Dataset> {
    let reader = BufReader::new(input);
    let mut meta = Metadata::default();
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(directive) = comment.strip_prefix('@') {
                parse_directive(directive, line_no, &mut meta)?;
            }
            continue;
        }
        let (label, row) = parse_example(trimmed, line_no, meta.n_cols)?;
        if let Some(&(j, _)) = row.last() {
            max_index = max_index.max(j + 1);
        }
        labels.push(label);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_cols = meta.n_cols.unwrap_or(max_index);
    if n_cols == 0 {
        return Err(Error::Parse {
            line: 0,
            reason: "dataset has no features".into(),
        });
    }
    let x = SparseColMatrix::from_rows(n_cols, &rows)?;
    Dataset::from_parts(x, labels, meta.scales, meta.columns)
}

fn parse_directive(directive: &str, line: usize, meta: &mut Metadata) -> Result<()> {
    let bad = |reason: String| Error::Parse { line, reason };
    let mut tokens = directive.split_whitespace();
    match tokens.next() {
        Some("n_cols") => {
            let d = tokens
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .filter(|&d| d > 0)
                .ok_or_else(|| bad("n_cols needs a positive integer".into()))?;
            meta.n_cols = Some(d);
        }
        Some("scales") => {
            let s = tokens
                .map(|t| parse_real(t, line))
                .collect::<Result<Vec<f64>>>()?;
            meta.scales = Some(s);
        }
        Some("columns") => {
            let mut nums = tokens.map(|t| {
                t.parse::<usize>()
                    .map_err(|_| bad(format!("bad column index '{t}'")))
            });
            let original_cols = nums
                .next()
                .ok_or_else(|| bad("columns needs the original width".into()))??;
            let kept = nums.collect::<Result<Vec<usize>>>()?;
            meta.columns = Some(ColumnMap {
                original_cols,
                kept,
            });
        }
        Some(other) => return Err(bad(format!("unknown directive '{other}'"))),
        None => return Err(bad("empty directive".into())),
    }
    Ok(())
}

fn parse_real(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        reason: format!("'{token}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            reason: format!("'{token}' is not finite"),
        });
    }
    Ok(v)
}

fn parse_example(
    text: &str,
    line: usize,
    n_cols: Option<usize>,
) -> Result<(f64, Vec<(usize, f64)>)> {
    let mut tokens = text.split_whitespace();
    let label = parse_real(tokens.next().unwrap_or_default(), line)?;
    let mut row = Vec::new();
    let mut prev = 0usize;
    for tok in tokens {
        let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
            line,
            reason: format!("expected idx:value, found '{tok}'"),
        })?;
        let index: usize = idx.parse().map_err(|_| Error::Parse {
            line,
            reason: format!("bad feature index '{idx}'"),
        })?;
        let limit = n_cols.unwrap_or(usize::MAX);
        if index == 0 || index > limit {
            return Err(Error::IndexOutOfRange {
                line,
                index,
                n_cols: n_cols.unwrap_or(0),
            });
        }
        if index == prev {
            return Err(Error::DuplicateIndex { line, index });
        }
        if index < prev {
            return Err(Error::UnsortedIndices { line });
        }
        prev = index;
        let value = parse_real(val, line)?;
        if value == 0.0 {
            return Err(Error::Parse {
                line,
                reason: format!("explicit zero stored for feature {index}"),
            });
        }
        row.push((index - 1, value));
    }
    Ok((label, row))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        read_dataset(s.as_bytes())
    }

    #[test]
    fn single_line() {
        let d = parse("1 1:0.6 2:0.8\n").unwrap();
        assert_eq!(d.y(), &[1.0]);
        assert_eq!(d.x().to_dense(), vec![vec![0.6, 0.8]]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let d = parse("# header\n\n-1 2:3\n  # indented comment\n+1 1:2\n").unwrap();
        assert_eq!(d.y(), &[-1.0, 1.0]);
        assert_eq!(d.x().to_dense(), vec![vec![0.0, 3.0], vec![2.0, 0.0]]);
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse(""), Err(Error::EmptyDataset)));
        assert!(matches!(parse("# nothing\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn index_errors() {
        assert!(matches!(
            parse("1 2:1 1:1\n"),
            Err(Error::UnsortedIndices { line: 1 })
        ));
        assert!(matches!(
            parse("1 1:1\n1 2:1 2:3\n"),
            Err(Error::DuplicateIndex { line: 2, index: 2 })
        ));
        assert!(matches!(
            parse("1 0:1\n"),
            Err(Error::IndexOutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            parse("#@ n_cols 2\n1 3:1\n"),
            Err(Error::IndexOutOfRange {
                index: 3,
                n_cols: 2,
                ..
            })
        ));
    }

    #[test]
    fn malformed_tokens() {
        for bad in [
            "x 1:1", "1 1-1", "1 a:1", "1 1:b", "1 1:0", "1 1:inf", "1 1:",
        ] {
            assert!(
                matches!(parse(bad), Err(Error::Parse { line: 1, .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn trailing_empty_columns_survive() {
        let d = parse("#@ n_cols 4\n1 1:1\n").unwrap();
        assert_eq!(d.n_features(), 4);
    }

    #[test]
    fn round_trip_example() {
        let x =
            SparseColMatrix::from_dense(&[vec![0.6, 0.8], vec![0.8, 0.0], vec![0.0, 0.6]]).unwrap();
        let d = Dataset::new(x, vec![1.0, -1.0, 0.1 + 0.2]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert_eq!(read_dataset(&buf[..]).unwrap(), d);
    }
}
