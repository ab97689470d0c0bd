//! LRCos: class-membership probability from a logistic regression times
//! cosine similarity to the question's third word.

use std::collections::HashSet;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::solvers::{argmax, AnalogySpace, Candidates};
use super::{AnalogyCategory, AnalogyQuestion, Side};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrCosConfig {
    /// Negatives sampled per positive example.
    pub negatives_per_positive: usize,
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    /// Stop once the loss changes by less than this between epochs.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Remove the answer's own pair from the positive class.
    pub leave_one_out: bool,
    pub seed: u64,
}

impl Default for LrCosConfig {
    fn default() -> Self {
        LrCosConfig {
            negatives_per_positive: 10,
            l2: 1e-3,
            tolerance: 1e-6,
            max_epochs: 1000,
            learning_rate: 1.0,
            leave_one_out: true,
            seed: 0,
        }
    }
}

/// Binary logistic regression trained by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    weights: Array1<f64>,
    bias: f64,
    epochs: usize,
    final_loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticRegression {
    /// Minimises mean cross-entropy plus `l2 / 2 * |w|^2`.
    pub fn fit(features: &Array2<f64>, labels: &[bool], config: &LrCosConfig) -> Self {
        assert_eq!(features.nrows(), labels.len());
        let n = labels.len() as f64;
        let y: Array1<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let mut weights = Array1::<f64>::zeros(features.ncols());
        let mut bias = 0.0;

        let loss_of = |w: &Array1<f64>, b: f64| -> (f64, Array1<f64>) {
            let z = features.dot(w) + b;
            let loss =
                z.iter().zip(&y).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / n + 0.5 * config.l2 * w.dot(w);
            (loss, z)
        };

        let (mut loss, mut z) = loss_of(&weights, bias);
        let mut epochs = 0;
        while epochs < config.max_epochs {
            epochs += 1;
            let residual: Array1<f64> = z.mapv(sigmoid) - &y;
            let grad_w = features.t().dot(&residual) / n + config.l2 * &weights;
            let grad_b = residual.sum() / n;
            weights.scaled_add(-config.learning_rate, &grad_w);
            bias -= config.learning_rate * grad_b;
            let (next, next_z) = loss_of(&weights, bias);
            let change = (loss - next).abs();
            loss = next;
            z = next_z;
            if change < config.tolerance {
                break;
            }
        }
        LogisticRegression {
            weights,
            bias,
            epochs,
            final_loss: loss,
        }
    }

    pub fn probability(&self, x: ArrayView1<'_, f64>) -> f64 {
        sigmoid(x.dot(&self.weights) + self.bias)
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn loss(&self) -> f64 {
        self.final_loss
    }
}

/// LRCos for one category in one embedding.
///
/// The positive class for a question is the set of words on the same side of
/// the category's pairs as the expected answer. The cosine term is taken to
/// the question word paired with the answer: `c` normally, `b` for questions
/// that cross pairs such as `berlin:paris::germany:?`. Classifiers are trained on
/// first use and cached, one per (side, held-out pair), or one per side when
/// leave-one-out is disabled. Negatives are drawn uniformly without
/// replacement from the rest of the vocabulary with a ChaCha8 generator
/// seeded by `config.seed`; the stream number is `side << 32 | (pair + 1)`
/// (pair term 0 without leave-one-out).
pub struct LrCosSolver<'s, 'e> {
    space: &'s AnalogySpace<'e>,
    category: String,
    config: LrCosConfig,
    /// in-vocabulary row of each pair's word, per side
    members: [Vec<Option<usize>>; 2],
    classifiers: Vec<OnceLock<LogisticRegression>>,
}

impl<'s, 'e> LrCosSolver<'s, 'e> {
    pub fn new(space: &'s AnalogySpace<'e>, category: &AnalogyCategory, config: LrCosConfig) -> Result<Self> {
        let language = space.embedding().language();
        let pairs = category.pairs(language).ok_or_else(|| Error::MissingCategory {
            category: category.name().to_string(),
            language: language.to_string(),
        })?;
        let member = |side: Side| -> Vec<Option<usize>> {
            pairs.iter().map(|p| space.embedding().index_of(p.get(side))).collect()
        };
        let members = [member(Side::First), member(Side::Second)];
        let needed = if config.leave_one_out { 3 } else { 2 };
        for side in &members {
            let found = side.iter().flatten().collect::<HashSet<_>>().len();
            if found < needed {
                return Err(Error::TooFewPairs {
                    category: category.name().to_string(),
                    needed,
                    found,
                });
            }
        }
        let slots = if config.leave_one_out { 2 * pairs.len() } else { 2 };
        Ok(LrCosSolver {
            space,
            category: category.name().to_string(),
            config,
            members,
            classifiers: (0..slots).map(|_| OnceLock::new()).collect(),
        })
    }

    fn slot(&self, side: Side, pair: usize) -> usize {
        if self.config.leave_one_out {
            side.index() * self.members[0].len() + pair
        } else {
            side.index()
        }
    }

    /// Classifier used for questions whose answer sits at `(pair, side)`.
    pub fn classifier(&self, side: Side, pair: usize) -> &LogisticRegression {
        self.classifiers[self.slot(side, pair)].get_or_init(|| self.train(side, pair))
    }

    fn train(&self, side: Side, pair: usize) -> LogisticRegression {
        let class: Vec<usize> = self.members[side.index()].iter().flatten().copied().collect();
        let class_set: HashSet<usize> = class.iter().copied().collect();
        let held_out = if self.config.leave_one_out {
            self.members[side.index()][pair]
        } else {
            None
        };
        let mut positives: Vec<usize> = Vec::with_capacity(class.len());
        for &w in &class {
            if Some(w) != held_out && !positives.contains(&w) {
                positives.push(w);
            }
        }

        let pool: Vec<usize> = (0..self.space.embedding().len())
            .filter(|w| !class_set.contains(w))
            .collect();
        let wanted = (self.config.negatives_per_positive * positives.len()).min(pool.len());
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let pair_term = if self.config.leave_one_out { pair as u64 + 1 } else { 0 };
        rng.set_stream(((side.index() as u64) << 32) | pair_term);
        let negatives = index::sample(&mut rng, pool.len(), wanted);

        let rows: Vec<usize> = positives
            .iter()
            .copied()
            .chain(negatives.iter().map(|i| pool[i]))
            .collect();
        let labels: Vec<bool> = (0..rows.len()).map(|i| i < positives.len()).collect();
        let features = self.space.unit().select(Axis(0), &rows);
        LogisticRegression::fit(&features, &labels, &self.config)
    }

    pub fn category(&self) -> &str {
        &self.category
    }

    pub fn solve(&self, question: &AnalogyQuestion, candidates: &Candidates) -> Result<String> {
        let [a, b, c] = self.space.query(question)?;
        if question.target.pair >= self.members[0].len() {
            return Err(Error::InvalidArgument(format!(
                "question refers to pair {} of `{}`",
                question.target.pair, self.category
            )));
        }
        let model = self.classifier(question.target.side, question.target.pair);
        // a:b::c:d and a:c::b:d are the same proportion; when the answer's
        // partner is `b` the question crosses pairs and `b` is the anchor
        let partner_side = match question.target.side {
            Side::First => Side::Second,
            Side::Second => Side::First,
        };
        let partner = self.members[partner_side.index()][question.target.pair];
        let anchor = if partner == Some(b) && partner != Some(c) { b } else { c };
        let rc = self.space.row(anchor);
        let best = argmax(candidates, &[a, b, c], |w| {
            let rw = self.space.row(w);
            Some(model.probability(rw) * rw.dot(&rc))
        })
        .ok_or_else(|| Error::InvalidArgument("no candidate left after excluding the question words".into()))?;
        Ok(self.space.token(best).to_string())
    }
}

/// One-shot LRCos answer; trains the needed classifier from scratch.
pub fn solve_lrcos(
    space: &AnalogySpace<'_>,
    category: &AnalogyCategory,
    question: &AnalogyQuestion,
    candidates: &Candidates,
    config: &LrCosConfig,
) -> Result<String> {
    LrCosSolver::new(space, category, config.clone())?.solve(question, candidates)
}
