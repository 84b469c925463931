//! libsvm text format: `label idx:val idx:val ...` with 1-based indices.
//!
//! Labels must be `±1` or `0/1` (`0` maps to `-1`). Lines that are blank or
//! start with `#` are skipped; a trailing `# comment` is ignored. Gzip
//! input is detected from its magic bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: CsrMatrix,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn samples(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Loads a libsvm file. The dimension is the largest index seen unless
/// `dim` overrides it (it may not be smaller than that index).
pub fn load_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let head = std::io::Cursor::new(magic[..n].to_vec()).chain(file);
    if n == 2 && magic == [0x1f, 0x8b] {
        parse_libsvm(BufReader::new(GzDecoder::new(head)), path, dim)
    } else {
        parse_libsvm(BufReader::new(head), path, dim)
    }
}

pub fn parse_libsvm<R: BufRead>(reader: R, path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(lineno, format!("bad label {label_tok:?}")))?;
        let label = match label {
            1.0 => 1.0,
            -1.0 | 0.0 => -1.0,
            other => return Err(err(lineno, format!("label {other} is not one of -1, 0, 1"))),
        };
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(err(lineno, "indices are 1-based; found 0".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("bad value {val:?}")))?;
            if !val.is_finite() {
                return Err(err(lineno, format!("non-finite value at index {idx}")));
            }
            row.push((idx - 1, val));
        }
        row.sort_by_key(|e| e.0);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(err(lineno, "duplicate feature index".into()));
        }
        if let Some(&(last, _)) = row.last() {
            max_index = max_index.max(last + 1);
        }
        rows.push(row);
        labels.push(label);
    }
    let cols = match dim {
        Some(d) if d < max_index => {
            return Err(err(0, format!("dimension override {d} is below max index {max_index}")));
        }
        Some(d) => d,
        None => max_index.max(1),
    };
    Ok(Dataset {
        features: CsrMatrix::from_rows(rows, cols)?,
        labels,
    })
}

pub fn write_libsvm<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    for r in 0..data.samples() {
        write!(out, "{}", if data.labels[r] > 0.0 { "+1" } else { "-1" })?;
        for (c, v) in data.features.row(r) {
            write!(out, " {}:{}", c + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
