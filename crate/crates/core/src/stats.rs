//! S_PAE, rank and product-moment correlation, and the two-group ANOVA
//! used to compare semantic against syntactic categories.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

/// Geometric mean of two analogy accuracies.
pub fn s_pae(lrcos_x: f64, lrcos_y: f64) -> Result<f64> {
    for v in [lrcos_x, lrcos_y] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("accuracy {v} outside [0, 1]")));
        }
    }
    Ok((lrcos_x * lrcos_y).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub coefficient: f64,
    /// Two-tailed, from a t distribution with n - 2 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("series lengths {} and {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains a non-finite value".into()));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pearson_coefficient(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Pearson product-moment correlation.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    check_pair(xs, ys)?;
    let r = pearson_coefficient(xs, ys)?;
    Ok(Correlation {
        coefficient: r,
        p_value: t_test_p(r, xs.len()),
        n: xs.len(),
    })
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson on average ranks.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    check_pair(xs, ys)?;
    let rho = pearson_coefficient(&average_ranks(xs), &average_ranks(ys))?;
    Ok(Correlation {
        coefficient: rho,
        p_value: t_test_p(rho, xs.len()),
        n: xs.len(),
    })
}

pub fn correlation(kind: CorrelationKind, xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    match kind {
        CorrelationKind::Pearson => pearson_r(xs, ys),
        CorrelationKind::Spearman => spearman_rho(xs, ys),
    }
}

/// Two-sided permutation p-value: the share of `permutations` shuffles of
/// `ys` whose |coefficient| reaches the observed one, counting the observed
/// arrangement itself. Always in (0, 1].
pub fn permutation_p(kind: CorrelationKind, xs: &[f64], ys: &[f64], permutations: usize, seed: u64) -> Result<f64> {
    let observed = correlation(kind, xs, ys)?.coefficient.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = ys.to_vec();
    let mut hits = 0usize;
    let tolerance = 1e-12;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        let r = correlation(kind, xs, &shuffled)?.coefficient.abs();
        if r >= observed - tolerance {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (permutations + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// One-way ANOVA with two groups; p from F(1, n_a + n_b - 2).
pub fn anova_two_treatment(group_a: &[f64], group_b: &[f64]) -> Result<Anova> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "each group needs at least 2 values, got {} and {}",
            group_a.len(),
            group_b.len()
        )));
    }
    let n = (group_a.len() + group_b.len()) as f64;
    let (ma, mb) = (mean(group_a), mean(group_b));
    let grand = (ma * group_a.len() as f64 + mb * group_b.len() as f64) / n;
    let between = group_a.len() as f64 * (ma - grand).powi(2) + group_b.len() as f64 * (mb - grand).powi(2);
    let within: f64 =
        group_a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + group_b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    if within == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    let df_within = group_a.len() + group_b.len() - 2;
    let f = between / (within / df_within as f64);
    let dist = FisherSnedecor::new(1.0, df_within as f64).expect("positive df");
    Ok(Anova {
        f,
        p_value: dist.sf(f).clamp(0.0, 1.0),
        df_between: 1,
        df_within,
    })
}
