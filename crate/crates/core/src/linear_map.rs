//! Row-aligned bilingual matrices and the goodness of fit of the best
//! linear map between them (S_LMP).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::analogy::AnalogyCategory;
use crate::embedding::{frobenius_norm, frobenius_normalize, mean_center, normalize_token, Embedding};
use crate::error::{Error, Result};

/// Translation pairs from `source_lang` to `target_lang`, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilingualDictionary {
    pub source_lang: String,
    pub target_lang: String,
    entries: Vec<(String, String)>,
}

impl BilingualDictionary {
    /// Drops repeated `(source, target)` entries, keeping the first.
    pub fn new(
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
        entries: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        let mut seen = HashSet::new();
        let entries = entries
            .into_iter()
            .map(|(s, t)| (normalize_token(&s), normalize_token(&t)))
            .filter(|e| seen.insert(e.clone()))
            .collect();
        BilingualDictionary {
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
            entries,
        }
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads a MUSE-style file: one `source<TAB or SPACE>target` per line.
    pub fn load_muse(path: impl AsRef<Path>, source_lang: &str, target_lang: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_muse(BufReader::new(file), path, source_lang, target_lang)
    }

    pub fn read_muse(reader: impl BufRead, path: &Path, source_lang: &str, target_lang: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                [] => continue,
                [s, t] => entries.push((s.to_string(), t.to_string())),
                _ => {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("expected `source target`, found {} fields", fields.len()),
                    ))
                }
            }
        }
        Ok(Self::new(source_lang, target_lang, entries))
    }

    /// Both words of every aligned row of `category`, as translation pairs.
    pub fn from_category(category: &AnalogyCategory, source_lang: &str, target_lang: &str) -> Result<Self> {
        let missing = |language: &str| Error::MissingCategory {
            category: category.name().to_string(),
            language: language.to_string(),
        };
        let src = category.pairs(source_lang).ok_or_else(|| missing(source_lang))?;
        let tgt = category.pairs(target_lang).ok_or_else(|| missing(target_lang))?;
        let entries = src
            .iter()
            .zip(tgt)
            .flat_map(|(s, t)| [(s.first.clone(), t.first.clone()), (s.second.clone(), t.second.clone())]);
        Ok(Self::new(source_lang, target_lang, entries))
    }

    /// Source word to its translations, in dictionary order.
    pub fn translations(&self) -> HashMap<&str, Vec<&str>> {
        let mut map: HashMap<&str, Vec<&str>> = HashMap::new();
        for (s, t) in &self.entries {
            map.entry(s.as_str()).or_default().push(t.as_str());
        }
        map
    }

    pub fn inverted(&self) -> Self {
        Self::new(
            self.target_lang.clone(),
            self.source_lang.clone(),
            self.entries.iter().map(|(s, t)| (t.clone(), s.clone())),
        )
    }
}

/// Two matrices whose row `i` holds a word and its translation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedMatrixPair {
    x: Array2<f64>,
    y: Array2<f64>,
    row_words: Vec<(String, String)>,
    preprocessed: bool,
}

impl AlignedMatrixPair {
    /// Unprocessed pair; see [`AlignedMatrixPair::preprocess`].
    pub fn raw(x: Array2<f64>, y: Array2<f64>, row_words: Vec<(String, String)>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::Shape(format!("X has {} rows, Y has {}", x.nrows(), y.nrows())));
        }
        if x.nrows() == 0 {
            return Err(Error::Empty("aligned matrices have no rows".into()));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::Shape("aligned matrices need at least one column".into()));
        }
        if row_words.len() != x.nrows() {
            return Err(Error::Shape(format!(
                "{} row labels for {} rows",
                row_words.len(),
                x.nrows()
            )));
        }
        Ok(AlignedMatrixPair {
            x,
            y,
            row_words,
            preprocessed: false,
        })
    }

    /// Unprocessed pair with placeholder row labels.
    pub fn from_matrices(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        let labels = (0..x.nrows()).map(|i| (format!("x{i}"), format!("y{i}"))).collect();
        Self::raw(x, y, labels)
    }

    /// Mean-centres both sides, then scales each to unit Frobenius norm.
    pub fn preprocess(self) -> Result<Self> {
        if self.preprocessed {
            return Ok(self);
        }
        Ok(AlignedMatrixPair {
            x: frobenius_normalize(&mean_center(&self.x)?)?,
            y: frobenius_normalize(&mean_center(&self.y)?)?,
            row_words: self.row_words,
            preprocessed: true,
        })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn row_words(&self) -> &[(String, String)] {
        &self.row_words
    }

    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_preprocessed(&self) -> bool {
        self.preprocessed
    }

    /// Same rows in a different order (`order[i]` is the old index of new row `i`).
    pub fn permuted(&self, order: &[usize]) -> Self {
        AlignedMatrixPair {
            x: self.x.select(Axis(0), order),
            y: self.y.select(Axis(0), order),
            row_words: order.iter().map(|&i| self.row_words[i].clone()).collect(),
            preprocessed: self.preprocessed,
        }
    }
}

/// Collects the dictionary entries covered by both vocabularies (and by
/// `word_filter`, when given, on both sides), in dictionary order, then
/// preprocesses the two matrices.
pub fn build_aligned(
    embedding_x: &Embedding,
    embedding_y: &Embedding,
    dictionary: &BilingualDictionary,
    word_filter: Option<&HashSet<String>>,
) -> Result<AlignedMatrixPair> {
    if dictionary.source_lang != embedding_x.language() || dictionary.target_lang != embedding_y.language() {
        return Err(Error::InvalidArgument(format!(
            "dictionary {}-{} does not match embeddings {}-{}",
            dictionary.source_lang,
            dictionary.target_lang,
            embedding_x.language(),
            embedding_y.language()
        )));
    }
    let allowed = |w: &str| word_filter.is_none_or(|f| f.contains(w));
    let mut rows_x = Vec::new();
    let mut rows_y = Vec::new();
    let mut words = Vec::new();
    for (s, t) in dictionary.entries() {
        if !(allowed(s) && allowed(t)) {
            continue;
        }
        if let (Some(i), Some(j)) = (embedding_x.index_of(s), embedding_y.index_of(t)) {
            rows_x.push(i);
            rows_y.push(j);
            words.push((s.clone(), t.clone()));
        }
    }
    if words.is_empty() {
        return Err(Error::Empty(format!(
            "no {}-{} dictionary entry is covered by both vocabularies",
            dictionary.source_lang, dictionary.target_lang
        )));
    }
    let x = embedding_x.matrix().select(Axis(0), &rows_x);
    let y = embedding_y.matrix().select(Axis(0), &rows_y);
    AlignedMatrixPair::raw(x, y, words)?.preprocess()
}

/// A fitted map `M` (d_Y x d_X) with rows of `Y` approximated by `M x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    #[serde(skip)]
    pub m_star: Array2<f64>,
    pub residual: f64,
    pub s_lmp: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LinearFit {
    fn new(pair: &AlignedMatrixPair, m_star: Array2<f64>, iterations: usize, converged: bool) -> Self {
        let residual = residual(pair, &m_star);
        LinearFit {
            m_star,
            residual,
            s_lmp: -residual,
            iterations,
            converged,
        }
    }
}

/// ||X M^T - Y||_F, i.e. the Frobenius residual with one word per row.
pub fn residual(pair: &AlignedMatrixPair, m: &Array2<f64>) -> f64 {
    frobenius_norm(&(pair.x.dot(&m.t()) - &pair.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub learning_rate: f64,
    /// Stop once `(loss_prev - loss) / loss_prev` falls below this.
    pub relative_tolerance: f64,
    pub max_iterations: usize,
    /// Factor applied to the learning rate after every accepted step; 1.0
    /// keeps it fixed between halvings.
    #[serde(default = "default_growth")]
    pub growth: f64,
}

fn default_growth() -> f64 {
    1.02
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            learning_rate: 0.1,
            relative_tolerance: 1e-10,
            max_iterations: 10_000,
            growth: default_growth(),
        }
    }
}

/// Identity on the leading square block, zero elsewhere.
fn identity_init(d_y: usize, d_x: usize) -> Array2<f64> {
    let mut m = Array2::zeros((d_y, d_x));
    for i in 0..d_y.min(d_x) {
        m[[i, i]] = 1.0;
    }
    m
}

/// Full-batch gradient descent on `||X M^T - Y||_F^2` from `M = I`.
///
/// A step that raises the loss is rejected and the learning rate halved; an
/// accepted step multiplies it by `config.growth`.
pub fn fit_linear_gd(pair: &AlignedMatrixPair, config: &GdConfig) -> Result<LinearFit> {
    if !pair.preprocessed {
        return Err(Error::NotPreprocessed);
    }
    if !(config.growth >= 1.0 && config.growth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "growth must be >= 1, got {}",
            config.growth
        )));
    }
    let (x, y) = (&pair.x, &pair.y);
    let loss_of = |m: &Array2<f64>| -> (f64, Array2<f64>) {
        let err = x.dot(&m.t()) - y;
        (err.iter().map(|v| v * v).sum(), err)
    };

    let mut m = identity_init(y.ncols(), x.ncols());
    let (mut loss, mut err) = loss_of(&m);
    let mut lr = config.learning_rate;
    let mut iterations = 0;
    let mut converged = loss == 0.0;
    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let grad = err.t().dot(x) * 2.0;
        let candidate = &m - &(&grad * lr);
        let (next, next_err) = loss_of(&candidate);
        if next > loss {
            lr *= 0.5;
            if lr < f64::EPSILON {
                converged = true;
            }
            continue;
        }
        let relative = (loss - next) / loss;
        m = candidate;
        loss = next;
        err = next_err;
        lr *= config.growth;
        if loss == 0.0 || relative < config.relative_tolerance {
            converged = true;
        }
    }
    Ok(LinearFit::new(pair, m, iterations, converged))
}

/// Least-squares map via the pseudoinverse: `M^T = pinv(X) Y`. Rank-deficient
/// `X` gives the minimum-norm solution.
pub fn fit_linear_closed(pair: &AlignedMatrixPair) -> Result<LinearFit> {
    if !pair.preprocessed {
        return Err(Error::NotPreprocessed);
    }
    let to_na = |a: &Array2<f64>| DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]]);
    let x = to_na(&pair.x);
    let y = to_na(&pair.y);
    let svd = x.svd(true, true);
    let largest = svd.singular_values.max();
    let eps = largest * f64::EPSILON * pair.x.nrows().max(pair.x.ncols()) as f64;
    let pinv = svd
        .pseudo_inverse(eps)
        .map_err(|e| Error::InvalidArgument(format!("pseudoinverse failed: {e}")))?;
    let mt = pinv * y;
    let m = Array2::from_shape_fn((mt.ncols(), mt.nrows()), |(i, j)| mt[(j, i)]);
    Ok(LinearFit::new(pair, m, 0, true))
}
