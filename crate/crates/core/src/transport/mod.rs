//! Exhaustive check that a planted pairing of vectors is the one whose
//! offsets are cheapest to transport onto a single common offset.

mod nelder_mead;
mod pairings;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nelder_mead::{default_steps, minimize, Minimum, NelderMeadConfig};
pub use pairings::{enumerate_pairings, matching_count, validate_matching, Pairings, DEFAULT_CAP};

/// Number of extra simplex runs started from perturbations of the best point.
pub const RESTARTS: usize = 5;

/// Relative tolerance under which two matching costs count as tied.
pub const TIE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Euclidean,
    Taxicab,
    /// `1 - cos(p, v)`.
    Cosine,
}

impl CostKind {
    pub const ALL: [CostKind; 3] = [CostKind::Euclidean, CostKind::Taxicab, CostKind::Cosine];

    pub fn distance(self, p: &[f64], v: &[f64]) -> f64 {
        match self {
            CostKind::Euclidean => p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            CostKind::Taxicab => p.iter().zip(v).map(|(a, b)| (a - b).abs()).sum(),
            CostKind::Cosine => {
                let (mut dot, mut pp, mut vv) = (0.0, 0.0, 0.0);
                for (a, b) in p.iter().zip(v) {
                    dot += a * b;
                    pp += a * a;
                    vv += b * b;
                }
                if pp == 0.0 || vv == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (pp.sqrt() * vv.sqrt())
                }
            }
        }
    }

    /// Summed distance from `p` to every offset.
    pub fn total(self, p: &[f64], offsets: &[Vec<f64>]) -> f64 {
        offsets.iter().map(|v| self.distance(p, v)).sum()
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::Euclidean => "euclidean",
            CostKind::Taxicab => "taxicab",
            CostKind::Cosine => "cosine",
        })
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(CostKind::Euclidean),
            "taxicab" | "manhattan" => Ok(CostKind::Taxicab),
            "cosine" => Ok(CostKind::Cosine),
            other => Err(Error::InvalidArgument(format!("unknown cost kind `{other}`"))),
        }
    }
}

/// A perfect matching with its offsets, the common offset `p_star` they are
/// transported to, and the total cost of doing so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingScheme {
    pub pairs: Vec<(usize, usize)>,
    pub offsets: Vec<Vec<f64>>,
    pub p_star: Vec<f64>,
    pub cost: f64,
    pub cost_kind: CostKind,
}

fn mean_of(offsets: &[Vec<f64>]) -> Vec<f64> {
    let d = offsets[0].len();
    let mut m = vec![0.0; d];
    for v in offsets {
        for (acc, x) in m.iter_mut().zip(v) {
            *acc += x;
        }
    }
    m.iter_mut().for_each(|x| *x /= offsets.len() as f64);
    m
}

/// The point minimising the summed `kind` distance to `offsets`.
///
/// A simplex search starts at the offsets' mean and is restarted
/// [`RESTARTS`] times from seeded perturbations of the best point found so
/// far. The mean and every offset are also scored, so the result is never
/// worse than any of them.
pub fn find_p_star(offsets: &[Vec<f64>], kind: CostKind) -> Result<Vec<f64>> {
    find_p_star_with(offsets, kind, &NelderMeadConfig::default())
}

pub fn find_p_star_with(offsets: &[Vec<f64>], kind: CostKind, config: &NelderMeadConfig) -> Result<Vec<f64>> {
    let first = offsets.first().ok_or_else(|| Error::Empty("no offsets".into()))?;
    let d = first.len();
    if d == 0 {
        return Err(Error::Shape("offsets have dimension 0".into()));
    }
    if offsets.iter().any(|v| v.len() != d) {
        return Err(Error::Shape("offsets differ in dimension".into()));
    }
    if offsets.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("offsets contain non-finite values".into()));
    }
    if kind == CostKind::Cosine {
        if let Some(i) = offsets.iter().position(|v| v.iter().all(|&x| x == 0.0)) {
            return Err(Error::ZeroRow { index: i });
        }
    }
    if offsets.iter().all(|v| v == first) {
        return Ok(first.clone());
    }

    let mean = mean_of(offsets);
    let spread = (offsets
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum::<f64>()
        / offsets.len() as f64)
        .sqrt();
    let objective = |p: &[f64]| kind.total(p, offsets);

    let mut best = (mean.clone(), objective(&mean));
    for v in offsets {
        let c = objective(v);
        if c < best.1 {
            best = (v.clone(), c);
        }
    }

    let run = |start: &[f64]| {
        let steps: Vec<f64> = vec![0.1 * spread; d];
        minimize(objective, start, &steps, config)
    };
    let consider = |m: Minimum, best: &mut (Vec<f64>, f64)| {
        if m.value < best.1 {
            *best = (m.x, m.value);
        }
    };
    consider(run(&mean), &mut best);
    let mut rng = ChaCha8Rng::seed_from_u64(0x7072_7374);
    for _ in 0..RESTARTS {
        let start: Vec<f64> = best
            .0
            .iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + 0.1 * spread * z
            })
            .collect();
        consider(run(&start), &mut best);
    }
    Ok(best.0)
}

/// Offsets `x_a - x_b` for each `(a, b)` in `pairs`.
pub fn offsets_for(vectors: &Array2<f64>, pairs: &[(usize, usize)]) -> Vec<Vec<f64>> {
    pairs
        .iter()
        .map(|&(a, b)| (&vectors.row(a) - &vectors.row(b)).to_vec())
        .collect()
}

/// Scores `matching` over the rows of `vectors`, keeping each pair's
/// orientation as given.
pub fn pairing_cost(vectors: &Array2<f64>, matching: &[(usize, usize)], kind: CostKind) -> Result<PairingScheme> {
    validate_matching(matching, vectors.nrows())?;
    let offsets = offsets_for(vectors, matching);
    let p_star = find_p_star(&offsets, kind)?;
    let cost = kind.total(&p_star, &offsets);
    Ok(PairingScheme {
        pairs: matching.to_vec(),
        offsets,
        p_star,
        cost,
        cost_kind: kind,
    })
}

/// Smallest `sum |t - x_i|` over `t`, reached at the median of `xs`.
fn median_cost(xs: &mut [f64]) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let k = xs.len();
    (0..k / 2).map(|i| xs[k - 1 - i] - xs[i]).sum()
}

/// Weak-duality bound for the Euclidean cost: for any `w_i` with
/// `|w_i| <= 1` and `sum w_i = 0`, `sum |p - v_i| >= -sum w_i . v_i`. The
/// `w_i` are the unit directions from a few Weiszfeld steps' estimate of the
/// median, re-centred and rescaled to meet the constraints, so the bound is
/// valid for any estimate and tight near the optimum.
fn euclidean_dual_bound(offsets: &[Vec<f64>]) -> f64 {
    let k = offsets.len();
    let mut q = mean_of(offsets);
    let mut w: Vec<Vec<f64>> = vec![vec![0.0; q.len()]; k];
    for _ in 0..64 {
        let (mut num, mut den) = (vec![0.0; q.len()], 0.0);
        for v in offsets {
            let dist = CostKind::Euclidean.distance(&q, v);
            if dist == 0.0 {
                continue;
            }
            num.iter_mut().zip(v).for_each(|(n, x)| *n += x / dist);
            den += 1.0 / dist;
        }
        if den == 0.0 {
            break;
        }
        q = num.iter().map(|n| n / den).collect();
    }
    for (wi, v) in w.iter_mut().zip(offsets) {
        let dist = CostKind::Euclidean.distance(&q, v);
        if dist > 0.0 {
            wi.iter_mut().zip(v).zip(&q).for_each(|((w, x), c)| *w = (c - x) / dist);
        }
    }
    let centre = mean_of(&w);
    let mut largest: f64 = 0.0;
    for wi in &mut w {
        wi.iter_mut().zip(&centre).for_each(|(w, c)| *w -= c);
        largest = largest.max(wi.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    let scale = if largest > 1.0 { largest } else { 1.0 };
    let value: f64 = w
        .iter()
        .zip(offsets)
        .map(|(wi, v)| wi.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    -value / scale
}

/// A value no larger than the optimal transport cost of `offsets`.
///
/// Taxicab separates by coordinate, so the summed per-coordinate median
/// costs are the optimum itself. Euclidean takes the larger of
/// [`euclidean_dual_bound`] and the pairwise bound `d(p, u) + d(p, v) >=
/// d(u, v)` summed over offset pairs. For cosine the optimum has a closed form: `p` along
/// the sum of unit offsets, giving `k - |sum of unit offsets|`.
pub fn cost_lower_bound(offsets: &[Vec<f64>], kind: CostKind) -> f64 {
    let k = offsets.len();
    let d = offsets.first().map_or(0, Vec::len);
    // rounding in the sums must not lift a bound above the true optimum
    let slack = |bound: f64| (bound - 1e-12 * (1.0 + bound)).max(0.0);
    match kind {
        CostKind::Taxicab => {
            let mut column = Vec::with_capacity(k);
            let total: f64 = (0..d)
                .map(|j| {
                    column.clear();
                    column.extend(offsets.iter().map(|v| v[j]));
                    median_cost(&mut column)
                })
                .sum();
            slack(total)
        }
        CostKind::Euclidean => {
            if k < 2 {
                return 0.0;
            }
            let mut pairwise = 0.0;
            for i in 0..k {
                for j in i + 1..k {
                    pairwise += kind.distance(&offsets[i], &offsets[j]);
                }
            }
            slack((pairwise / (k - 1) as f64).max(euclidean_dual_bound(offsets)))
        }
        CostKind::Cosine => {
            let mut sum = vec![0.0; d];
            for v in offsets {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (s, x) in sum.iter_mut().zip(v) {
                        *s += x / norm;
                    }
                }
            }
            let bound = k as f64 - sum.iter().map(|x| x * x).sum::<f64>().sqrt();
            (bound - 1e-12 * k as f64).max(0.0)
        }
    }
}

/// Scores `matching` under every relative orientation of its pairs and
/// keeps the cheapest. Flipping all pairs at once mirrors the offsets, which
/// leaves the cost unchanged, so the first pair's orientation is fixed.
/// Orientations whose [`cost_lower_bound`] already reaches the best cost
/// found are skipped.
pub fn best_oriented_cost(vectors: &Array2<f64>, matching: &[(usize, usize)], kind: CostKind) -> Result<PairingScheme> {
    validate_matching(matching, vectors.nrows())?;
    let k = matching.len();
    let mut candidates: Vec<(f64, Vec<(usize, usize)>)> = (0u32..(1 << (k - 1)))
        .map(|mask| {
            let oriented: Vec<(usize, usize)> = matching
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| {
                    if i > 0 && mask >> (i - 1) & 1 == 1 {
                        (b, a)
                    } else {
                        (a, b)
                    }
                })
                .collect();
            (cost_lower_bound(&offsets_for(vectors, &oriented), kind), oriented)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<PairingScheme> = None;
    for (bound, oriented) in candidates {
        if best.as_ref().is_some_and(|b| bound >= b.cost) {
            break;
        }
        let scheme = pairing_cost(vectors, &oriented, kind)?;
        if best.as_ref().is_none_or(|b| scheme.cost < b.cost) {
            best = Some(scheme);
        }
    }
    Ok(best.expect("at least one orientation"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPairing {
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
    pub is_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub cost_kind: CostKind,
    /// True only when the reference is strictly cheaper than every other matching.
    pub is_optimal: bool,
    pub reference: PairingScheme,
    /// Other matchings whose cost is within [`TIE_TOLERANCE`] of the reference.
    pub ties: Vec<RankedPairing>,
    /// Every matching, cheapest first; equal costs keep enumeration order.
    pub ranked: Vec<RankedPairing>,
}

fn same_matching(a: &[(usize, usize)], b: &[(usize, usize)]) -> bool {
    let canon = |m: &[(usize, usize)]| {
        let mut v: Vec<(usize, usize)> = m.iter().map(|&(x, y)| (x.min(y), x.max(y))).collect();
        v.sort_unstable();
        v
    };
    canon(a) == canon(b)
}

/// Enumerates every perfect matching of the rows of `vectors` and reports
/// whether `reference` is the unique cheapest one.
pub fn verify_best_pairing(
    vectors: &Array2<f64>,
    reference: &[(usize, usize)],
    kind: CostKind,
    cap: usize,
) -> Result<Verification> {
    let n = vectors.nrows();
    let all: Vec<Vec<(usize, usize)>> = enumerate_pairings(n, cap)?.collect();
    validate_matching(reference, n)?;

    let scored: Vec<(PairingScheme, bool)> = all
        .par_iter()
        .map(|m| best_oriented_cost(vectors, m, kind).map(|s| (s, same_matching(m, reference))))
        .collect::<Result<_>>()?;

    let reference_scheme = scored
        .iter()
        .find(|(_, is_ref)| *is_ref)
        .map(|(s, _)| s.clone())
        .expect("reference is one of the enumerated matchings");
    let threshold = reference_scheme.cost + TIE_TOLERANCE * reference_scheme.cost.max(1.0);

    let mut ranked: Vec<RankedPairing> = scored
        .into_iter()
        .map(|(s, is_reference)| RankedPairing {
            pairs: s.pairs,
            cost: s.cost,
            is_reference,
        })
        .collect();
    ranked.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    let ties: Vec<RankedPairing> = ranked
        .iter()
        .filter(|r| !r.is_reference && r.cost <= threshold)
        .cloned()
        .collect();
    Ok(Verification {
        cost_kind: kind,
        is_optimal: ties.is_empty(),
        reference: reference_scheme,
        ties,
        ranked,
    })
}
