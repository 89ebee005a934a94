//! Text formats: whitespace matrices, measurement CSVs, PGM frames, and
//! atomic file output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::observability::MeasurementSequence;
use crate::system::GridSpec;

pub const SEQUENCE_HEADER: [&str; 3] = ["t", "component_index", "value"];

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(contents).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

/// "rows cols" followed by one line per row. `{}` on f64 prints the
/// shortest string that parses back to the same bits.
pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|j| m.get(i, j).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, source_name: &str) -> Result<DenseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source_name, 1, "empty file, expected \"rows cols\""))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(source_name, header_line, format!("invalid dimension {s:?}")))
    };
    if dims.len() != 2 {
        return Err(Error::parse(source_name, header_line, "header must be \"rows cols\""));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);

    let mut entries = Vec::with_capacity(rows * cols);
    let mut last_line = header_line;
    for r in 0..rows {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, last_line + 1, format!("expected {rows} rows, found {r}")))?;
        last_line = line_no;
        let before = entries.len();
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::parse(source_name, line_no, format!("invalid number {token:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(source_name, line_no, format!("non-finite value {token:?}")));
            }
            entries.push(v);
        }
        let found = entries.len() - before;
        if found != cols {
            return Err(Error::parse(source_name, line_no, format!("expected {cols} values, found {found}")));
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::parse(source_name, line_no, format!("unexpected data after {rows} rows")));
    }
    DenseMatrix::new(rows, cols, entries)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    parse_matrix(&read_text(path)?, &path.display().to_string())
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_atomic(path, format_matrix(m).as_bytes())
}

/// Vectors as "t,component_index,value" rows, both indices 1-based.
pub fn format_vectors(vectors: &[DVector<f64>]) -> String {
    let mut out = SEQUENCE_HEADER.join(",");
    out.push('\n');
    for (t, v) in vectors.iter().enumerate() {
        for (k, x) in v.iter().enumerate() {
            writeln!(out, "{},{},{}", t + 1, k + 1, x).expect("writing to a String");
        }
    }
    out
}

pub fn format_sequence(data: &MeasurementSequence) -> String {
    format_vectors(data.data())
}

/// Parses a sequence file. Rows may come in any order, but every time
/// 1..=T must carry the same components 1..=m exactly once.
pub fn parse_vectors(text: &str, source_name: &str) -> Result<Vec<DVector<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != SEQUENCE_HEADER {
        return Err(Error::parse(
            source_name,
            1,
            format!("expected header \"{}\"", SEQUENCE_HEADER.join(",")),
        ));
    }

    let mut cells: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(source_name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let index = |field: usize, name: &str| -> Result<usize> {
            let s = &record[field];
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(Error::parse(source_name, line, format!("{name} must be a positive integer, got {s:?}"))),
            }
        };
        let t = index(0, "t")?;
        let k = index(1, "component_index")?;
        let value: f64 = record[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(source_name, line, format!("invalid value {:?}", &record[2])))?;
        if cells.entry(t).or_default().insert(k, value).is_some() {
            return Err(Error::parse(source_name, line, format!("duplicate entry for t={t}, component {k}")));
        }
    }

    if cells.is_empty() {
        return Err(Error::parse(source_name, 1, "no data rows"));
    }
    let m = cells.values().next().expect("nonempty").len();
    let mut vectors = Vec::with_capacity(cells.len());
    for (expected_t, (t, row)) in (1..).zip(&cells) {
        if *t != expected_t {
            return Err(Error::parse(source_name, 0, format!("time {expected_t} is missing")));
        }
        if row.len() != m || row.keys().copied().ne(1..=m) {
            return Err(Error::parse(
                source_name,
                0,
                format!("time {t} does not carry components 1..={m} exactly"),
            ));
        }
        vectors.push(DVector::from_iterator(m, row.values().copied()));
    }
    Ok(vectors)
}

pub fn parse_sequence(text: &str, source_name: &str) -> Result<MeasurementSequence> {
    MeasurementSequence::new(parse_vectors(text, source_name)?)
}

pub fn read_sequence(path: &Path) -> Result<MeasurementSequence> {
    parse_sequence(&read_text(path)?, &path.display().to_string())
}

/// Maps [min, max] of the state linearly onto 0..=255; constant states
/// map to 0.
pub fn grayscale(state: &DVector<f64>) -> Vec<u8> {
    let min = state.iter().copied().fold(f64::INFINITY, f64::min);
    let max = state.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    state
        .iter()
        .map(|&x| {
            if span > 0.0 {
                ((x - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect()
}

/// ASCII PGM with image row i and column j showing pixel (i, j).
pub fn format_pgm(grid: GridSpec, state: &DVector<f64>) -> Result<String> {
    if state.len() != grid.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} cannot fill a {1}x{1} grid",
            state.len(),
            grid.side()
        )));
    }
    let g = grid.side();
    let levels = grayscale(state);
    let mut out = format!("P2\n{g} {g}\n255\n");
    for i in 1..=g {
        let row: Vec<String> = (1..=g).map(|j| levels[grid.index(i, j)].to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// A decoded P2 image, pixels in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    /// Pixel at 0-based row r and column c.
    pub fn at(&self, r: usize, c: usize) -> u16 {
        self.pixels[r * self.width + c]
    }
}

pub fn parse_pgm(text: &str, source_name: &str) -> Result<GrayImage> {
    // Tokens with their line numbers; '#' starts a comment.
    let mut tokens = text.lines().enumerate().flat_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        content.split_whitespace().map(move |t| (i + 1, t))
    });
    let mut next = |what: &str| {
        tokens
            .next()
            .ok_or_else(|| Error::parse(source_name, 0, format!("unexpected end of file, expected {what}")))
    };
    let (line, magic) = next("magic number")?;
    if magic != "P2" {
        return Err(Error::parse(source_name, line, format!("expected P2, found {magic:?}")));
    }
    let mut number = |what: &str| -> Result<usize> {
        let (line, tok) = next(what)?;
        tok.parse()
            .map_err(|_| Error::parse(source_name, line, format!("invalid {what} {tok:?}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let max_value = number("maximum value")?;
    if max_value == 0 || max_value > u16::MAX as usize {
        return Err(Error::parse(source_name, 0, format!("maximum value {max_value} out of range")));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let v = number("pixel")?;
        if v > max_value {
            return Err(Error::parse(source_name, 0, format!("pixel {v} exceeds maximum {max_value}")));
        }
        pixels.push(v as u16);
    }
    Ok(GrayImage {
        width,
        height,
        max_value: max_value as u16,
        pixels,
    })
}

pub fn write_pgm(path: &Path, grid: GridSpec, state: &DVector<f64>) -> Result<()> {
    write_atomic(path, format_pgm(grid, state)?.as_bytes())
}
