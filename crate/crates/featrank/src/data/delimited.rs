//! Delimited numeric text loader, covering the HAR style (features and
//! labels in separate files) and the ISOLET style (label in the final
//! column). Class codes are dense-ranked to `0..C`, so 1-based codes such
//! as ISOLET's `1..26` land on `0..25`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Dense2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Whitespace,
}

impl Delimiter {
    fn tokens<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            // A trailing delimiter is tolerated; empty fields elsewhere are
            // caught by the numeric parse.
            Delimiter::Comma => line
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Delimiter::Comma => ",",
            Delimiter::Whitespace => " ",
        }
    }
}

/// Where class labels come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSource {
    /// Final column of the feature file.
    LastColumn,
    /// Separate file with one numeric label per line.
    File(PathBuf),
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        location: format!("line {line}"),
        message: message.into(),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::to_owned)
        .filter(|l| !l.trim().is_empty())
        .collect())
}

fn parse_rows(path: &Path, delimiter: Delimiter) -> Result<Vec<Vec<f64>>> {
    let lines = read_lines(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
    let mut width = None;
    for (idx, line) in lines.iter().enumerate() {
        let lineno = idx + 1;
        let mut row = Vec::new();
        for token in delimiter.tokens(line) {
            let v: f64 = token
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("non-numeric cell {token:?}")))?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("ragged row: {} cells, expected {w}", row.len()),
                ));
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(rows)
}

fn to_label(path: &Path, lineno: usize, v: f64) -> Result<i64> {
    if !v.is_finite() || v.fract() != 0.0 || v.abs() > 1e15 {
        return Err(parse_err(
            path,
            lineno,
            format!("label {v} is not an integer class code"),
        ));
    }
    Ok(v as i64)
}

/// Load a rectangular numeric table with labels from the final column or a
/// separate file. Distinct class codes are remapped, in sorted order, to
/// `0..C`.
pub fn load_delimited(
    features_path: &Path,
    labels: LabelSource,
    delimiter: Delimiter,
) -> Result<Dataset> {
    let mut rows = parse_rows(features_path, delimiter)?;
    let codes: Vec<i64> = match labels {
        LabelSource::LastColumn => {
            if rows[0].len() < 2 {
                return Err(parse_err(
                    features_path,
                    1,
                    "need at least one feature column besides the label column",
                ));
            }
            rows.iter_mut()
                .enumerate()
                .map(|(idx, row)| to_label(features_path, idx + 1, row.pop().unwrap()))
                .collect::<Result<_>>()?
        }
        LabelSource::File(label_path) => {
            let label_rows = parse_rows(&label_path, delimiter)?;
            if label_rows.len() != rows.len() {
                return Err(parse_err(
                    &label_path,
                    label_rows.len(),
                    format!("{} labels against {} feature rows", label_rows.len(), rows.len()),
                ));
            }
            label_rows
                .iter()
                .enumerate()
                .map(|(idx, row)| {
                    if row.len() != 1 {
                        return Err(parse_err(
                            &label_path,
                            idx + 1,
                            format!("expected one label per line, found {}", row.len()),
                        ));
                    }
                    to_label(&label_path, idx + 1, row[0])
                })
                .collect::<Result<_>>()?
        }
    };

    let mut distinct: Vec<i64> = codes.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let y: Vec<usize> = codes
        .iter()
        .map(|c| distinct.binary_search(c).unwrap())
        .collect();

    Dataset::new(Dense2D::from_rows(&rows)?, y)
}

/// Write a dataset as delimited text with the label as the final column.
/// Feature values print with enough digits to reload bit-identically.
pub fn save_delimited(ds: &Dataset, path: &Path, delimiter: Delimiter) -> Result<()> {
    let sep = delimiter.as_str();
    let mut out = String::new();
    for i in 0..ds.n() {
        for v in ds.x().row(i) {
            write!(out, "{v}{sep}").expect("string write");
        }
        writeln!(out, "{}", ds.y()[i]).expect("string write");
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn last_column_labels() {
        let f = temp_with("0.5,1.5,1\n0.25,2.5,2\n0.125,3.5,1\n");
        let ds = load_delimited(f.path(), LabelSource::LastColumn, Delimiter::Comma).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.feature_count(), 2);
        assert_eq!(ds.x().row(1), &[0.25, 2.5]);
        assert_eq!(ds.y(), &[0, 1, 0]);
    }

    #[test]
    fn one_based_codes_remap_to_zero_based() {
        let rows: String = (1..=26)
            .map(|c| format!("{} {}\n", c as f64 * 0.5, c))
            .collect();
        let f = temp_with(&rows);
        let ds = load_delimited(f.path(), LabelSource::LastColumn, Delimiter::Whitespace).unwrap();
        assert_eq!(ds.class_count(), 26);
        assert_eq!(ds.y()[0], 0);
        assert_eq!(ds.y()[25], 25);
    }

    #[test]
    fn separate_label_file_count_mismatch() {
        let x = temp_with("1 2\n3 4\n");
        let y = temp_with("1\n2\n1\n");
        let err = load_delimited(
            x.path(),
            LabelSource::File(y.path().to_path_buf()),
            Delimiter::Whitespace,
        )
        .unwrap_err();
        assert!(err.to_string().contains("3 labels against 2 feature rows"), "{err}");
    }

    #[test]
    fn ragged_rows_name_the_line() {
        let f = temp_with("1,2,0\n1,2,3,0\n");
        let err = load_delimited(f.path(), LabelSource::LastColumn, Delimiter::Comma).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn non_numeric_cell_names_the_line() {
        let f = temp_with("1,2,0\n1,oops,1\n");
        let err = load_delimited(f.path(), LabelSource::LastColumn, Delimiter::Comma).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("oops"), "{msg}");
    }

    #[test]
    fn round_trip_is_bit_identical() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(87);
        let n = 17;
        let d = 5;
        let data: Vec<f64> = (0..n * d)
            .map(|_| {
                // awkward magnitudes on purpose
                let v: f64 = rng.random_range(-1.0..1.0);
                v * 10f64.powi(rng.random_range(-8..8))
            })
            .collect();
        let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let ds = Dataset::new(Dense2D::from_vec(n, d, data).unwrap(), y).unwrap();

        let f = tempfile::NamedTempFile::new().unwrap();
        save_delimited(&ds, f.path(), Delimiter::Comma).unwrap();
        let back = load_delimited(f.path(), LabelSource::LastColumn, Delimiter::Comma).unwrap();
        assert_eq!(back.x(), ds.x());
        assert_eq!(back.y(), ds.y());
    }
}
