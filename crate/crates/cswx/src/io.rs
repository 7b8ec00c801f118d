//! File formats: tree corpora, CSV matrices and fitness columns, history
//! tables and key-value configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use cswx_core::analysis::DistanceMatrix;
use cswx_core::cswx::AlignmentMatrix;
use cswx_core::grammar::{parse_tree, render_tree};
use cswx_core::search::SearchHistory;
use cswx_core::{DerivationTree, Method, ParseError, SerialisedSequence};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {kind}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        kind: String,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl IoError {
    fn format(path: &Path, msg: impl Into<String>) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            msg: msg.into(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(path: &Path, line_offset: usize, e: ParseError) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line: e.line + line_offset,
        column: e.column,
        kind: e.kind.to_string(),
    }
}

fn is_content(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && !t.starts_with('#')
}

/// One tree per non-comment line.
pub fn parse_corpus(path: &Path, text: &str) -> Result<Vec<DerivationTree>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| is_content(l))
        .map(|(k, l)| parse_tree(l).map_err(|e| parse_error(path, k, e)))
        .collect()
}

pub fn read_corpus(path: &Path) -> Result<Vec<DerivationTree>, IoError> {
    parse_corpus(path, &read_text(path)?)
}

/// A single tree, which may span several lines.
pub fn read_tree(path: &Path) -> Result<DerivationTree, IoError> {
    let text = read_text(path)?;
    let body: Vec<&str> = text
        .lines()
        .map(|l| if is_content(l) { l } else { "" })
        .collect();
    // Blank comment lines keep line numbers in parse errors meaningful.
    parse_tree(&body.join("\n")).map_err(|e| parse_error(path, 0, e))
}

fn header_lines(header: &[String]) -> String {
    header.iter().map(|h| format!("# {h}\n")).collect()
}

pub fn render_corpus(trees: &[DerivationTree], header: &[String]) -> String {
    let mut out = header_lines(header);
    for t in trees {
        out.push_str(&render_tree(t));
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: &Path, trees: &[DerivationTree], header: &[String]) -> Result<(), IoError> {
    write_text(path, &render_corpus(trees, header))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().flexible(true).from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is UTF-8")
}

/// Dense matrix: a header row of tree indices, then one row per tree
/// starting with its index.
pub fn render_distance_csv(m: &DistanceMatrix, header: &[String]) -> String {
    let mut w = csv_writer();
    let mut first = vec![String::new()];
    first.extend((0..m.n).map(|i| i.to_string()));
    w.write_record(&first).expect("in-memory writer");
    for i in 0..m.n {
        let mut row = vec![i.to_string()];
        row.extend((0..m.n).map(|j| m.get(i, j).to_string()));
        w.write_record(&row).expect("in-memory writer");
    }
    header_lines(header) + &finish_csv(w)
}

fn csv_rows(path: &Path, text: &str) -> Result<Vec<Vec<String>>, IoError> {
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(body.as_bytes());
    r.records()
        .map(|rec| {
            rec.map(|r| r.iter().map(|s| s.trim().to_string()).collect())
                .map_err(|e| IoError::format(path, e.to_string()))
        })
        .collect()
}

pub fn read_distance_csv(path: &Path, method: Method, scoring: &str) -> Result<DistanceMatrix, IoError> {
    let rows = csv_rows(path, &read_text(path)?)?;
    let Some((head, body)) = rows.split_first() else {
        return Err(IoError::format(path, "empty distance matrix"));
    };
    let n = head.len().saturating_sub(1);
    if body.len() != n {
        return Err(IoError::format(path, format!("{} rows for {n} columns", body.len())));
    }
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in body.iter().enumerate() {
        if row.len() != n + 1 {
            return Err(IoError::format(path, format!("row {i} has {} fields", row.len())));
        }
        for field in &row[1..] {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| IoError::format(path, format!("row {i}: `{field}` is not a number")))?,
            );
        }
    }
    let m = DistanceMatrix {
        n,
        values,
        method,
        scoring: scoring.into(),
    };
    m.check().map_err(|e| IoError::format(path, e.to_string()))?;
    Ok(m)
}

/// Fitness values, one per row; the last field of each row is used and a
/// non-numeric first row is taken as a header.
pub fn read_fitness_csv(path: &Path) -> Result<Vec<f64>, IoError> {
    let rows = csv_rows(path, &read_text(path)?)?;
    let mut out = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let Some(field) = row.last() else { continue };
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => {}
            Err(_) => {
                return Err(IoError::format(path, format!("row {k}: `{field}` is not a number")))
            }
        }
    }
    Ok(out)
}

/// Alignment matrix: header row of second-sequence token labels, then one
/// row per first-sequence token.
pub fn render_alignment_csv(matrix: &AlignmentMatrix, s1: &SerialisedSequence, s2: &SerialisedSequence) -> String {
    let label = |s: &SerialisedSequence, k: usize| token_label(s, k);
    let mut w = csv_writer();
    let mut head = vec![String::new()];
    head.extend((0..s2.len()).map(|j| label(s2, j)));
    w.write_record(&head).expect("in-memory writer");
    for i in 0..s1.len() {
        let mut row = vec![label(s1, i)];
        row.extend((0..s2.len()).map(|j| matrix.get(i, j).to_string()));
        w.write_record(&row).expect("in-memory writer");
    }
    finish_csv(w)
}

pub fn token_label(s: &SerialisedSequence, k: usize) -> String {
    use cswx_core::serialise::{SeparatorRole, Token};
    match &s.tokens[k] {
        Token::Start => "start".into(),
        Token::Node { label, .. } => label.to_string(),
        Token::Separator { opener, role } => match role {
            SeparatorRole::Divider => format!("divider@{opener}"),
            SeparatorRole::Closer => format!("closer@{opener}"),
        },
    }
}

pub fn render_history_csv(h: &SearchHistory, header: &[String]) -> String {
    let mut w = csv_writer();
    w.write_record(["iteration", "best_fitness", "mean_fitness", "diversity", "operator"])
        .expect("in-memory writer");
    for r in &h.records {
        w.write_record([
            r.iteration.to_string(),
            r.best_fitness.to_string(),
            r.mean_fitness.to_string(),
            r.diversity.map(|d| d.to_string()).unwrap_or_default(),
            r.operator.clone(),
        ])
        .expect("in-memory writer");
    }
    header_lines(header) + &finish_csv(w)
}

/// Column `name` of a CSV file with a header row.
pub fn read_csv_column(path: &Path, name: &str) -> Result<Vec<String>, IoError> {
    let rows = csv_rows(path, &read_text(path)?)?;
    let Some((head, body)) = rows.split_first() else {
        return Err(IoError::format(path, "empty table"));
    };
    let Some(k) = head.iter().position(|h| h == name) else {
        return Err(IoError::format(path, format!("no `{name}` column")));
    };
    Ok(body.iter().map(|r| r.get(k).cloned().unwrap_or_default()).collect())
}

/// Key-value file with `key = value` lines, read as TOML.
pub fn read_keyfile(path: &Path) -> Result<toml::Table, IoError> {
    read_text(path)?
        .parse::<toml::Table>()
        .map_err(|e| IoError::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_skips_comments_and_reports_lines() {
        let p = Path::new("x.trees");
        let trees = parse_corpus(p, "# seed 0\ncomp(relu)\n\nseq(comp(relu), comp(identity))\n").unwrap();
        assert_eq!(trees.len(), 2);
        let err = parse_corpus(p, "comp(relu)\ncomp(nope)\n").unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn distance_csv_round_trips() {
        let m = DistanceMatrix::from_upper(3, &[1.0, 2.5, 0.25], Method::Rcswx, "SM0").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_text(&p, &render_distance_csv(&m, &["seed 1".into()])).unwrap();
        assert_eq!(read_distance_csv(&p, Method::Rcswx, "SM0").unwrap(), m);
    }
}
