use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{AnalogyCategory, Side};
use crate::error::{Error, Result};

/// Position of the expected answer inside its category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoldRef {
    pub pair: usize,
    pub side: Side,
}

/// `a : b :: c : ?` with expected answer `gold`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub gold: String,
    pub category: String,
    pub target: GoldRef,
}

/// `8 * C(t, 2)`: questions produced by `t` pairs with distinct words.
pub fn question_count(pairs: usize) -> usize {
    4 * pairs * pairs.saturating_sub(1)
}

/// Every completion question obtainable from two pairs of the category.
///
/// For pairs `(α, β)` and `(γ, θ)` the eight orientations are
/// `α:β::γ:θ  β:α::θ:γ  γ:α::θ:β  θ:β::γ:α`
/// `α:γ::β:θ  β:θ::α:γ  γ:θ::α:β  θ:γ::β:α`.
/// Questions whose answer repeats a query word are dropped and duplicates
/// are removed, so colliding pairs may yield fewer than `8 * C(t, 2)`.
pub fn generate_questions(category: &AnalogyCategory, language: &str) -> Result<Vec<AnalogyQuestion>> {
    let pairs = category.pairs(language).ok_or_else(|| Error::MissingCategory {
        category: category.name().to_string(),
        language: language.to_string(),
    })?;
    if pairs.len() < 2 {
        return Err(Error::TooFewPairs {
            category: category.name().to_string(),
            needed: 2,
            found: pairs.len(),
        });
    }

    let mut out = Vec::with_capacity(question_count(pairs.len()));
    let mut seen = HashSet::with_capacity(question_count(pairs.len()));
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (alpha, beta) = (&pairs[i].first, &pairs[i].second);
            let (gamma, theta) = (&pairs[j].first, &pairs[j].second);
            let g = |pair, side| GoldRef { pair, side };
            let orientations = [
                (alpha, beta, gamma, theta, g(j, Side::Second)),
                (beta, alpha, theta, gamma, g(j, Side::First)),
                (gamma, alpha, theta, beta, g(i, Side::Second)),
                (theta, beta, gamma, alpha, g(i, Side::First)),
                (alpha, gamma, beta, theta, g(j, Side::Second)),
                (beta, theta, alpha, gamma, g(j, Side::First)),
                (gamma, theta, alpha, beta, g(i, Side::Second)),
                (theta, gamma, beta, alpha, g(i, Side::First)),
            ];
            for (a, b, c, gold, target) in orientations {
                if gold == a || gold == b || gold == c {
                    continue;
                }
                if !seen.insert((a, b, c, gold)) {
                    continue;
                }
                out.push(AnalogyQuestion {
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                    gold: gold.clone(),
                    category: category.name().to_string(),
                    target,
                });
            }
        }
    }
    Ok(out)
}
