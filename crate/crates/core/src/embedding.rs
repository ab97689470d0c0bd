//! Monolingual embedding storage, text-format loading and the matrix
//! preprocessing steps shared by every other module.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Canonical token form used for every vocabulary lookup: NFC, case preserved.
pub fn normalize_token(token: &str) -> String {
    token.nfc().collect()
}

/// A monolingual word embedding: vocabulary plus one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    language: String,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
}

/// Borrowed view of one embedding row.
#[derive(Debug, Clone, Copy)]
pub struct VectorView<'a> {
    pub token: &'a str,
    pub values: ArrayView1<'a, f64>,
}

impl Embedding {
    /// Builds an embedding, validating shape, finiteness and token uniqueness.
    pub fn new(language: impl Into<String>, vocab: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::Shape("embedding dimension must be positive".into()));
        }
        if vocab.len() != matrix.nrows() {
            return Err(Error::Shape(format!(
                "{} tokens but {} rows",
                vocab.len(),
                matrix.nrows()
            )));
        }
        if let Some((row, _)) = matrix
            .outer_iter()
            .enumerate()
            .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidArgument(format!("row {row} has a non-finite value")));
        }
        let vocab: Vec<String> = vocab.iter().map(|t| normalize_token(t)).collect();
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, token) in vocab.iter().enumerate() {
            if index.insert(token.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token `{token}`")));
            }
        }
        Ok(Embedding {
            language: language.into(),
            vocab,
            index,
            matrix,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Row index of `token`, after NFC normalisation.
    pub fn index_of(&self, token: &str) -> Option<usize> {
        match self.index.get(token) {
            Some(&i) => Some(i),
            None => self.index.get(&normalize_token(token)).copied(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index_of(token).is_some()
    }

    pub fn lookup(&self, token: &str) -> Option<VectorView<'_>> {
        self.index_of(token).map(|i| self.view(i))
    }

    pub fn view(&self, index: usize) -> VectorView<'_> {
        VectorView {
            token: &self.vocab[index],
            values: self.matrix.row(index),
        }
    }

    /// Same vocabulary, new matrix of identical row count.
    pub fn with_matrix(&self, matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != self.len() {
            return Err(Error::Shape(format!(
                "replacement matrix has {} rows, vocabulary has {}",
                matrix.nrows(),
                self.len()
            )));
        }
        Embedding::new(self.language.clone(), self.vocab.clone(), matrix)
    }
}

/// A token dropped by the loader because an earlier line already defined it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateToken {
    pub line: usize,
    pub token: String,
}

#[derive(Debug, Clone)]
pub struct LoadedEmbedding {
    pub embedding: Embedding,
    pub duplicates: Vec<DuplicateToken>,
}

/// Loads a word2vec/fastText style text file.
///
/// The header is `<count> <dim>`; every following line is a token and `dim`
/// floats. At most `limit` distinct tokens are kept, in file order. Repeated
/// tokens keep their first occurrence and are listed in `duplicates`.
pub fn load_text_vectors(path: impl AsRef<Path>, language: &str, limit: Option<usize>) -> Result<LoadedEmbedding> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_text_vectors(BufReader::new(file), path, language, limit)
}

/// Reader-based variant of [`load_text_vectors`]; `path` is used for error
/// messages only.
pub fn read_text_vectors<R: BufRead>(
    reader: R,
    path: &Path,
    language: &str,
    limit: Option<usize>,
) -> Result<LoadedEmbedding> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        None => return Err(Error::Empty(format!("{} has no header", path.display()))),
        Some(line) => line.map_err(|e| Error::io(path, e))?,
    };
    let (count, dim) = parse_header(&header).ok_or_else(|| {
        Error::parse(
            path,
            1,
            format!("malformed header `{}`, expected `<count> <dim>`", header.trim()),
        )
    })?;
    if dim == 0 {
        return Err(Error::parse(path, 1, "dimension must be positive"));
    }
    let wanted = limit.map_or(count, |l| l.min(count));

    let mut vocab = Vec::with_capacity(wanted);
    let mut seen: HashMap<String, usize> = HashMap::with_capacity(wanted);
    let mut data = Vec::with_capacity(wanted * dim);
    let mut duplicates = Vec::new();
    let mut rows_read = 0;

    for (offset, line) in lines.enumerate() {
        if vocab.len() == wanted || rows_read == count {
            break;
        }
        let line_no = offset + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n', ' ']);
        if line.is_empty() {
            continue;
        }
        rows_read += 1;
        let (token, rest) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(path, line_no, format!("expected {dim} values, found 0")))?;
        let start = data.len();
        for field in rest.split_ascii_whitespace() {
            let value: f64 = field
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("cannot parse `{field}` as a number")))?;
            if !value.is_finite() {
                data.truncate(start);
                return Err(Error::parse(path, line_no, format!("non-finite value `{field}`")));
            }
            data.push(value);
        }
        let arity = data.len() - start;
        if arity != dim {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {dim} values, found {arity}"),
            ));
        }
        let token = normalize_token(token);
        if seen.contains_key(&token) {
            log::warn!("{}:{line_no}: duplicate token `{token}` ignored", path.display());
            data.truncate(start);
            duplicates.push(DuplicateToken { line: line_no, token });
            continue;
        }
        seen.insert(token.clone(), vocab.len());
        vocab.push(token);
    }

    if vocab.is_empty() {
        return Err(Error::Empty(format!("{} contains no vectors", path.display())));
    }
    if rows_read < count && vocab.len() < wanted {
        return Err(Error::parse(
            path,
            rows_read + 2,
            format!("header promises {count} rows, file ends after {rows_read}"),
        ));
    }

    let matrix = Array2::from_shape_vec((vocab.len(), dim), data).map_err(|e| Error::Shape(e.to_string()))?;
    Ok(LoadedEmbedding {
        embedding: Embedding::new(language, vocab, matrix)?,
        duplicates,
    })
}

/// Writes the text format read by [`read_text_vectors`]. Values use the
/// shortest representation that parses back to the same float.
pub fn write_text_vectors(embedding: &Embedding, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{} {}", embedding.len(), embedding.dim())?;
    for (token, row) in embedding.vocab().iter().zip(embedding.matrix().rows()) {
        write!(out, "{token}")?;
        for v in row {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut fields = line.split_ascii_whitespace();
    let count = fields.next()?.parse().ok()?;
    let dim = fields.next()?.parse().ok()?;
    fields.next().is_none().then_some((count, dim))
}

/// Subtracts the column means from every row.
pub fn mean_center(matrix: &Array2<f64>) -> Result<Array2<f64>> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::Empty("cannot centre an empty matrix".into()));
    }
    let mean = matrix.mean_axis(Axis(0)).expect("non-empty");
    Ok(matrix - &mean)
}

pub fn frobenius_norm(matrix: &Array2<f64>) -> f64 {
    matrix.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scales the matrix so its Frobenius norm is one.
pub fn frobenius_normalize(matrix: &Array2<f64>) -> Result<Array2<f64>> {
    let norm = frobenius_norm(matrix);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroMatrix);
    }
    Ok(matrix / norm)
}

/// Scales every row to unit Euclidean length.
pub fn unit_normalize_rows(matrix: &Array2<f64>) -> Result<Array2<f64>> {
    let mut out = matrix.clone();
    for (index, mut row) in out.outer_iter_mut().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroRow { index });
        }
        row /= norm;
    }
    Ok(out)
}
