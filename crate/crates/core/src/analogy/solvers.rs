use ndarray::{Array1, Array2, ArrayView1};

use super::AnalogyQuestion;
use crate::embedding::{unit_normalize_rows, Embedding};
use crate::error::{Error, Result};

/// Additive guard in the 3CosMul denominator.
pub const COSMUL_EPSILON: f64 = 1e-3;

/// Which vocabulary items may be returned as answers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum CandidatePolicy {
    #[default]
    FullVocabulary,
    Shortlist(Vec<String>),
}

/// A candidate policy resolved against one embedding.
#[derive(Debug, Clone)]
pub struct Candidates {
    indices: Option<Vec<usize>>,
    vocab_len: usize,
}

impl Candidates {
    pub fn resolve(policy: &CandidatePolicy, embedding: &Embedding) -> Self {
        let indices = match policy {
            CandidatePolicy::FullVocabulary => None,
            CandidatePolicy::Shortlist(tokens) => {
                let mut idx: Vec<usize> = tokens.iter().filter_map(|t| embedding.index_of(t)).collect();
                idx.sort_unstable();
                idx.dedup();
                Some(idx)
            }
        };
        Candidates {
            indices,
            vocab_len: embedding.len(),
        }
    }

    /// Candidate row indices in ascending order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = usize> + '_> {
        match &self.indices {
            None => Box::new(0..self.vocab_len),
            Some(idx) => Box::new(idx.iter().copied()),
        }
    }
}

/// Unit-normalised copy of an embedding, the space all solvers score in.
#[derive(Debug, Clone)]
pub struct AnalogySpace<'a> {
    embedding: &'a Embedding,
    unit: Array2<f64>,
}

impl<'a> AnalogySpace<'a> {
    pub fn new(embedding: &'a Embedding) -> Result<Self> {
        Ok(AnalogySpace {
            embedding,
            unit: unit_normalize_rows(embedding.matrix())?,
        })
    }

    pub fn embedding(&self) -> &'a Embedding {
        self.embedding
    }

    pub fn unit(&self) -> &Array2<f64> {
        &self.unit
    }

    pub fn row(&self, index: usize) -> ArrayView1<'_, f64> {
        self.unit.row(index)
    }

    pub fn token(&self, index: usize) -> &'a str {
        &self.embedding.vocab()[index]
    }

    pub fn index(&self, token: &str) -> Result<usize> {
        self.embedding
            .index_of(token)
            .ok_or_else(|| Error::OutOfVocabulary(token.to_string()))
    }

    /// Indices of `a`, `b`, `c`; fails on the first out-of-vocabulary word.
    pub fn query(&self, question: &AnalogyQuestion) -> Result<[usize; 3]> {
        Ok([
            self.index(&question.a)?,
            self.index(&question.b)?,
            self.index(&question.c)?,
        ])
    }
}

/// Highest-scoring candidate not in `exclude`; ties go to the lowest index.
pub(crate) fn argmax(
    candidates: &Candidates,
    exclude: &[usize],
    mut score: impl FnMut(usize) -> Option<f64>,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for w in candidates.iter() {
        if exclude.contains(&w) {
            continue;
        }
        let Some(s) = score(w) else { continue };
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((w, s));
        }
    }
    best.map(|(w, _)| w)
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn no_candidate() -> Error {
    Error::InvalidArgument("no candidate left after excluding the question words".into())
}

/// argmax_w cos(w, b - a + c).
pub fn solve_3cosadd(space: &AnalogySpace<'_>, question: &AnalogyQuestion, candidates: &Candidates) -> Result<String> {
    let [a, b, c] = space.query(question)?;
    let target = &space.row(b) - &space.row(a) + space.row(c);
    let target_norm = norm(&target);
    let best = argmax(candidates, &[a, b, c], |w| {
        let dot = space.row(w).dot(&target);
        Some(if target_norm > 0.0 { dot / target_norm } else { 0.0 })
    })
    .ok_or_else(no_candidate)?;
    Ok(space.token(best).to_string())
}

/// argmax_w cos'(w, b) cos'(w, c) / (cos'(w, a) + ε) with cos' = (cos + 1) / 2.
pub fn solve_3cosmul(space: &AnalogySpace<'_>, question: &AnalogyQuestion, candidates: &Candidates) -> Result<String> {
    let [a, b, c] = space.query(question)?;
    let (ra, rb, rc) = (space.row(a), space.row(b), space.row(c));
    let shifted = |x: f64| (x + 1.0) / 2.0;
    let best = argmax(candidates, &[a, b, c], |w| {
        let rw = space.row(w);
        Some(shifted(rw.dot(&rb)) * shifted(rw.dot(&rc)) / (shifted(rw.dot(&ra)) + COSMUL_EPSILON))
    })
    .ok_or_else(no_candidate)?;
    Ok(space.token(best).to_string())
}

/// argmax_w cos(w - c, b - a); candidates identical to `c` are skipped.
pub fn solve_pairdistance(
    space: &AnalogySpace<'_>,
    question: &AnalogyQuestion,
    candidates: &Candidates,
) -> Result<String> {
    let [a, b, c] = space.query(question)?;
    let offset = &space.row(b) - &space.row(a);
    let offset_norm = norm(&offset);
    if offset_norm == 0.0 {
        return Err(Error::DegenerateQuestion);
    }
    let rc = space.row(c);
    let best = argmax(candidates, &[a, b, c], |w| {
        let diff = &space.row(w) - &rc;
        let diff_norm = norm(&diff);
        (diff_norm > 0.0).then(|| diff.dot(&offset) / (diff_norm * offset_norm))
    })
    .ok_or_else(no_candidate)?;
    Ok(space.token(best).to_string())
}
