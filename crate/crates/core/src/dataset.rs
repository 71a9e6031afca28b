//! Reading and writing embeddings, per-sample scalar files and selection
//! outputs.
//!
//! Binary embeddings use a small fixed header followed by raw little-endian
//! `f32` values:
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"SESM"
//! 4       4     version (u32, = 1)
//! 8       8     n (u64)
//! 16      4     d (u32)
//! 20      4*n*d row-major f32 values
//! ```
//!
//! Values are widened to `f64` on load; all downstream arithmetic is 64-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SESM";
pub const FORMAT_VERSION: u32 = 1;

/// Dense `n x d` matrix of sample features, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(Error::format("feature dimension must be at least 1"));
        }
        if data.len() != n * d {
            return Err(Error::format(format!(
                "expected {} values for a {n}x{d} matrix, found {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(EmbeddingMatrix { n, d, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let d = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::format(format!("row {i} has {} values, expected {d}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.d, data)
    }
}

/// Integer class (or cluster) id per sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelVector {
    /// Builds a label vector; the class count is `max(label) + 1`.
    pub fn new(labels: Vec<usize>) -> Self {
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        LabelVector { labels, classes }
    }

    pub fn with_classes(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::format(format!("label {bad} outside [0, {classes})")));
        }
        Ok(LabelVector { labels, classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Externally supplied training difficulty, higher = harder.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyVector {
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Binary,
    Csv,
}

impl EmbeddingFormat {
    /// Guesses the format from the file extension; anything but `.csv` is
    /// treated as binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => EmbeddingFormat::Csv,
            _ => EmbeddingFormat::Binary,
        }
    }
}

pub fn read_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        EmbeddingFormat::Binary => decode_binary(reader).map_err(|e| match e {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::UnexpectedEof => {
                Error::format("binary embedding file is truncated")
            }
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        }),
        EmbeddingFormat::Csv => decode_csv(reader),
    }
}

fn decode_binary<R: Read>(mut r: R) -> Result<EmbeddingMatrix> {
    let io = |e| Error::io("<embedding stream>", e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::format("bad magic, expected SESM"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io)?;
    let version = u32::from_le_bytes(b4);
    if version != FORMAT_VERSION {
        return Err(Error::format(format!("unsupported format version {version}")));
    }
    r.read_exact(&mut b8).map_err(io)?;
    let n =
        usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::format("sample count does not fit in memory"))?;
    r.read_exact(&mut b4).map_err(io)?;
    let d = u32::from_le_bytes(b4) as usize;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let total = n
        .checked_mul(d)
        .ok_or_else(|| Error::format("matrix shape overflows"))?;
    let mut bytes = vec![0u8; total * 4];
    r.read_exact(&mut bytes).map_err(io)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(Error::format("trailing bytes after matrix payload"));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    EmbeddingMatrix::new(n, d, data)
}

fn decode_csv<R: Read>(r: R) -> Result<EmbeddingMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut data = Vec::new();
    let mut d = None;
    let mut n = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format(format!("csv: {e}")))?;
        if d.is_none() {
            d = Some(rec.len());
        }
        for field in rec.iter() {
            data.push(parse_f64(field)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    EmbeddingMatrix::new(n, d.unwrap_or(0), data)
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::format(format!("cannot parse {s:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::format(format!("non-finite value {s:?}")));
    }
    Ok(v)
}

/// Writes the binary format. Values are narrowed to `f32`.
pub fn write_embeddings_binary(path: impl AsRef<Path>, emb: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let d = u32::try_from(emb.d()).map_err(|_| Error::format("dimension exceeds u32"))?;
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    put(&FORMAT_VERSION.to_le_bytes())?;
    put(&(emb.n() as u64).to_le_bytes())?;
    put(&d.to_le_bytes())?;
    for &v in emb.data() {
        put(&(v as f32).to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_embeddings_csv(path: impl AsRef<Path>, emb: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    for row in emb.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(format!("csv: {other:?}")),
    }
}

/// Reads column `column` of an `index,<columns...>` CSV and orders the values
/// by index. Indices must form a permutation of `0..expected_n`.
pub fn read_column_csv(path: impl AsRef<Path>, column: &str, expected_n: usize) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::format(format!("csv header: {e}")))?
        .clone();
    if headers.get(0) != Some("index") {
        return Err(Error::format("first column must be named `index`"));
    }
    let col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::format(format!("no column named {column:?}")))?;

    let mut values: Vec<Option<f64>> = vec![None; expected_n];
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::format(format!("csv: {e}")))?;
        let idx: usize = rec[0]
            .parse()
            .map_err(|_| Error::format(format!("bad index {:?}", &rec[0])))?;
        let value = parse_f64(rec.get(col).ok_or_else(|| Error::format("short csv record"))?)?;
        let slot = values
            .get_mut(idx)
            .ok_or_else(|| Error::format(format!("index {idx} outside [0, {expected_n})")))?;
        if slot.is_some() {
            return Err(Error::DuplicateIndex(idx));
        }
        *slot = Some(value);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or(Error::MissingIndex(i)))
        .collect()
}

/// Reads an `index,value` CSV.
pub fn read_scalar_csv(path: impl AsRef<Path>, expected_n: usize) -> Result<Vec<f64>> {
    read_column_csv(path, "value", expected_n)
}

pub fn read_difficulty(path: impl AsRef<Path>, expected_n: usize) -> Result<DifficultyVector> {
    read_scalar_csv(path, expected_n).map(|raw| DifficultyVector { raw })
}

/// Reads an `index,value` CSV whose values are non-negative integer labels.
pub fn read_labels(path: impl AsRef<Path>, expected_n: usize) -> Result<LabelVector> {
    let raw = read_scalar_csv(path, expected_n)?;
    let labels = raw
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::format(format!("label {v} is not a non-negative integer")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelVector::new(labels))
}

/// Writes `index,<name>...` with one row per sample.
pub fn write_columns_csv(path: impl AsRef<Path>, columns: &[(&str, &[f64])]) -> Result<()> {
    let path = path.as_ref();
    let n = columns.first().map_or(0, |c| c.1.len());
    if let Some(c) = columns.iter().find(|c| c.1.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: c.1.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header: Vec<&str> = std::iter::once("index").chain(columns.iter().map(|c| c.0)).collect();
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..n {
        out.push_str(&i.to_string());
        for (_, col) in columns {
            out.push(',');
            out.push_str(&col[i].to_string());
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_scalar_csv(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    write_columns_csv(path, &[("value", values)])
}

/// JSON summary written next to every selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub n: usize,
    pub m: usize,
    pub theta_final: f64,
    pub k: usize,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub per_class_counts: Vec<usize>,
    pub graph_entropy: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Writes the selected indices (one per line, ascending) and the JSON report.
pub fn write_selection(
    indices: &[usize],
    report: &SelectionReport,
    index_path: impl AsRef<Path>,
    report_path: impl AsRef<Path>,
) -> Result<()> {
    let index_path = index_path.as_ref();
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut text = String::with_capacity(sorted.len() * 8);
    for i in &sorted {
        text.push_str(&i.to_string());
        text.push('\n');
    }
    std::fs::write(index_path, text).map_err(|e| Error::io(index_path, e))?;
    write_json(report_path, report)
}

pub fn read_selection(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::format(format!("bad index line {l:?}")))
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(format!("json: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(format!("json: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, body: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn binary_file(n: u64, d: u32, values: &[f32]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&n.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        for v in values {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn binary_header_and_payload() {
        let dir = tempdir().unwrap();
        let p = write(
            dir.path(),
            "e.sesm",
            &binary_file(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, -0.5]),
        );
        let m = read_embeddings(&p, EmbeddingFormat::Binary).unwrap();
        assert_eq!((m.n(), m.d()), (3, 2));
        assert_eq!(m.row(2), &[0.5, -0.5]);
    }

    #[test]
    fn csv_rows() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "e.csv", b"1.0,0.0\n0.0,1.0");
        let m = read_embeddings(&p, EmbeddingFormat::Csv).unwrap();
        assert_eq!(m, EmbeddingMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap());
    }

    #[test]
    fn nan_is_a_format_error() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "e.csv", b"1.0,NaN\n0.0,1.0\n");
        let err = read_embeddings(&p, EmbeddingFormat::Csv).unwrap_err();
        assert_eq!(err.name(), "FormatError");
        let p = write(dir.path(), "e.sesm", &binary_file(1, 2, &[1.0, f32::NAN]));
        let err = read_embeddings(&p, EmbeddingFormat::Binary).unwrap_err();
        assert_eq!(err.name(), "FormatError");
    }

    #[test]
    fn binary_rejects_bad_magic_truncation_and_empty() {
        let dir = tempdir().unwrap();
        let mut bytes = binary_file(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        bytes[0] = b'X';
        let p = write(dir.path(), "a", &bytes);
        assert_eq!(
            read_embeddings(&p, EmbeddingFormat::Binary).unwrap_err().name(),
            "FormatError"
        );
        let bytes = binary_file(2, 2, &[1.0, 2.0, 3.0]);
        let p = write(dir.path(), "b", &bytes);
        assert_eq!(
            read_embeddings(&p, EmbeddingFormat::Binary).unwrap_err().name(),
            "FormatError"
        );
        let p = write(dir.path(), "c", &binary_file(0, 2, &[]));
        assert_eq!(
            read_embeddings(&p, EmbeddingFormat::Binary).unwrap_err().name(),
            "EmptyDataset"
        );
        let p = write(dir.path(), "d.csv", b"");
        assert_eq!(
            read_embeddings(&p, EmbeddingFormat::Csv).unwrap_err().name(),
            "EmptyDataset"
        );
        let missing = dir.path().join("nope");
        assert_eq!(
            read_embeddings(&missing, EmbeddingFormat::Csv).unwrap_err().name(),
            "IoError"
        );
    }

    #[test]
    fn binary_and_csv_agree() {
        let dir = tempdir().unwrap();
        // Values exactly representable in f32 so both routes see the same numbers.
        let m = EmbeddingMatrix::from_rows(&[[0.25, -1.5, 3.0], [8.0, 0.125, -0.75]]).unwrap();
        let b = dir.path().join("m.sesm");
        let c = dir.path().join("m.csv");
        write_embeddings_binary(&b, &m).unwrap();
        write_embeddings_csv(&c, &m).unwrap();
        let from_b = read_embeddings(&b, EmbeddingFormat::Binary).unwrap();
        let from_c = read_embeddings(&c, EmbeddingFormat::Csv).unwrap();
        assert_eq!(from_b, m);
        assert_eq!(from_c, m);
    }

    #[test]
    fn scalar_csv_orders_by_index() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "s.csv", b"index,value\n1,-1.2\n0,0.5\n");
        assert_eq!(read_scalar_csv(&p, 2).unwrap(), vec![0.5, -1.2]);
        let p = write(dir.path(), "s.csv", b"index,value\n0,0.5\n1,-1.2");
        assert_eq!(read_scalar_csv(&p, 2).unwrap(), vec![0.5, -1.2]);
    }

    #[test]
    fn scalar_csv_errors() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "s.csv", b"index,value\n0,1\n0,2\n");
        assert!(matches!(read_scalar_csv(&p, 2), Err(Error::DuplicateIndex(0))));
        let p = write(dir.path(), "s.csv", b"index,value\n0,1\n1,2\n");
        assert!(matches!(read_scalar_csv(&p, 3), Err(Error::MissingIndex(2))));
        let p = write(dir.path(), "s.csv", b"index,value\n0,abc\n");
        assert_eq!(read_scalar_csv(&p, 1).unwrap_err().name(), "FormatError");
        let p = write(dir.path(), "s.csv", b"index,value\n0,1\n5,2\n");
        assert_eq!(read_scalar_csv(&p, 2).unwrap_err().name(), "FormatError");
    }

    #[test]
    fn labels_must_be_non_negative_integers() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "l.csv", b"index,value\n0,1\n1,0\n2,3\n");
        let l = read_labels(&p, 3).unwrap();
        assert_eq!(l.labels(), &[1, 0, 3]);
        assert_eq!(l.classes(), 4);
        let p = write(dir.path(), "l.csv", b"index,value\n0,-1\n");
        assert!(read_labels(&p, 1).is_err());
        let p = write(dir.path(), "l.csv", b"index,value\n0,1.5\n");
        assert!(read_labels(&p, 1).is_err());
    }

    #[test]
    fn selection_files() {
        let dir = tempdir().unwrap();
        let idx = dir.path().join("sel.txt");
        let rep = dir.path().join("report.json");
        let report = SelectionReport {
            n: 3,
            m: 2,
            theta_final: 0.8124999999999999,
            k: 1,
            beta: 0.0,
            gamma: Some(1.1),
            per_class_counts: vec![1, 1],
            graph_entropy: 1.234_567_890_123_456_7,
            seed: 7,
            warnings: vec![],
        };
        write_selection(&[2, 0], &report, &idx, &rep).unwrap();
        assert_eq!(std::fs::read_to_string(&idx).unwrap(), "0\n2\n");
        assert_eq!(read_selection(&idx).unwrap(), vec![0, 2]);
        let back: SelectionReport = read_json(&rep).unwrap();
        assert_eq!(back, report);

        let empty = SelectionReport {
            m: 0,
            per_class_counts: vec![],
            gamma: None,
            ..report
        };
        write_selection(&[], &empty, &idx, &rep).unwrap();
        assert_eq!(std::fs::read_to_string(&idx).unwrap(), "");
        let back: SelectionReport = read_json(&rep).unwrap();
        assert_eq!(back.m, 0);
        let raw: serde_json::Value = read_json(&rep).unwrap();
        for key in [
            "n",
            "m",
            "theta_final",
            "k",
            "beta",
            "gamma",
            "per_class_counts",
            "graph_entropy",
            "seed",
        ] {
            assert!(raw.get(key).is_some(), "missing {key}");
        }
    }

    mod roundtrip {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn scalar_csv_round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..40)) {
                let dir = tempdir().unwrap();
                let p = dir.path().join("v.csv");
                write_scalar_csv(&p, &values).unwrap();
                prop_assert_eq!(read_scalar_csv(&p, values.len()).unwrap(), values);
            }

            #[test]
            fn embedding_round_trip(n in 1usize..6, d in 1usize..5, seed in any::<u64>()) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-10.0f32..10.0) as f64).collect();
                let m = EmbeddingMatrix::new(n, d, data).unwrap();
                let dir = tempdir().unwrap();
                let b = dir.path().join("m.sesm");
                let c = dir.path().join("m.csv");
                write_embeddings_binary(&b, &m).unwrap();
                write_embeddings_csv(&c, &m).unwrap();
                prop_assert_eq!(&read_embeddings(&b, EmbeddingFormat::Binary).unwrap(), &m);
                prop_assert_eq!(&read_embeddings(&c, EmbeddingFormat::Csv).unwrap(), &m);
            }
        }
    }
}
