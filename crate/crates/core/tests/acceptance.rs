//! End-to-end acceptance checks. Each test prints one `PASS`, `FAIL` or
//! `SKIP` line (bypassing the test harness's output capture) and fails on
//! `FAIL`.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anlgmap_core::analogy::{
    category_accuracy, generate_questions, question_count, solve_3cosadd, solve_3cosmul, solve_pairdistance,
    AnalogyCategory, AnalogyCorpus, AnalogyQuestion, AnalogySpace, CandidatePolicy, Candidates, CategoryKind,
    EvalConfig, LrCosConfig, LrCosSolver, Side, SolverKind, WordPair, COSMUL_EPSILON,
};
use anlgmap_core::embedding::load_text_vectors;
use anlgmap_core::linear_map::{
    build_aligned, fit_linear_closed, fit_linear_gd, AlignedMatrixPair, BilingualDictionary, GdConfig,
};
use anlgmap_core::stats::{anova_two_treatment, pearson_r, spearman_rho, CorrelationKind};
use anlgmap_core::synth::{
    apply_affine, gen_analogy_space, grid, random_affine, shuffled_control, theorem_sweep, DistortionFamily,
    SweepConfig, SynthSpec,
};
use anlgmap_core::transport::{verify_best_pairing, CostKind, DEFAULT_CAP};
use anlgmap_core::xanlg::{build_corpus, MonolingualAnalogySet};
use anlgmap_core::Embedding;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

// Criteria run one at a time so their wall-clock budgets are not shared.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: u32, name: &str, outcome: Outcome) {
    let (tag, detail) = match &outcome {
        Outcome::Pass(d) => ("PASS", d),
        Outcome::Fail(d) => ("FAIL", d),
        Outcome::Skip(d) => ("SKIP", d),
    };
    let line = format!("acceptance {criterion:>2} {name}: {tag} ({detail})\n");
    let _ = std::io::stdout().write_all(line.as_bytes());
    if let Outcome::Fail(d) = outcome {
        panic!("criterion {criterion} failed: {d}");
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

fn identity_dict(emb: &Embedding, src: &str, tgt: &str) -> BilingualDictionary {
    BilingualDictionary::new(src, tgt, emb.vocab().iter().map(|w| (w.clone(), w.clone())))
}

#[test]
fn c01_affine_maps_are_fitted_exactly() {
    let _serial = serial();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..50u64 {
        let spec = SynthSpec {
            n_pairs: 8,
            dim: 10,
            n_filler: 20,
            seed: 1000 + k,
            ..Default::default()
        };
        let (source, _) = gen_analogy_space(&spec).unwrap();
        let (m, b) = random_affine(spec.dim, 5000 + k);
        let mapped = apply_affine(&source, &m, &b).unwrap();
        let target = Embedding::new("tgt", mapped.vocab().to_vec(), mapped.matrix().clone()).unwrap();
        let aligned = build_aligned(
            &source,
            &target,
            &identity_dict(&source, source.language(), "tgt"),
            None,
        )
        .unwrap();
        let fit = fit_linear_gd(&aligned, &GdConfig::default()).unwrap();
        worst = worst.max(fit.residual);
    }
    let elapsed = start.elapsed();
    report(
        1,
        "affine maps give zero residual",
        verdict(
            worst < 1e-6 && elapsed < Duration::from_secs(30),
            format!("max residual {worst:.3e}, {:.2} s", elapsed.as_secs_f64()),
        ),
    );
}

/// `t` pairs `(a_i, a_i + r)` in `d` dimensions and images `(b_i, b_i + s)`
/// with every `b_i` and `s` drawn independently. The only equal-offset
/// relations among the source rows are those implied by the shared `r`,
/// and each holds on the image side too.
fn offset_preserving_set(seed: u64, t: usize, d_x: usize, d_y: usize) -> (Array2<f64>, Array2<f64>) {
    let mut g = rng(seed);
    let a = gaussian(&mut g, t, d_x);
    let r = gaussian(&mut g, 1, d_x).row(0).to_owned();
    let b = gaussian(&mut g, t, d_y);
    let s = gaussian(&mut g, 1, d_y).row(0).to_owned();
    let mut x = Array2::zeros((2 * t, d_x));
    let mut y = Array2::zeros((2 * t, d_y));
    for i in 0..t {
        x.row_mut(2 * i).assign(&a.row(i));
        x.row_mut(2 * i + 1).assign(&(&a.row(i) + &r));
        y.row_mut(2 * i).assign(&b.row(i));
        y.row_mut(2 * i + 1).assign(&(&b.row(i) + &s));
    }
    (x, y)
}

#[test]
fn c02_offset_preserving_sets_are_linear_after_centring() {
    let _serial = serial();
    let mut worst: f64 = 0.0;
    for k in 0..50u64 {
        let mut g = rng(k);
        let d_x = g.random_range(6..=12);
        // pair count + 1 independent directions fit in d_x
        let t = g.random_range(2..d_x);
        let d_y = g.random_range(2..=12);
        let (x, y) = offset_preserving_set(100 + k, t, d_x, d_y);
        // the planted relations hold exactly on the image side
        for i in 0..t {
            for j in 0..t {
                let lhs = &y.row(2 * i + 1) - &y.row(2 * i);
                let rhs = &y.row(2 * j + 1) - &y.row(2 * j);
                assert!((&lhs - &rhs).iter().all(|v| v.abs() < 1e-12));
            }
        }
        let pair = AlignedMatrixPair::from_matrices(x, y).unwrap().preprocess().unwrap();
        worst = worst.max(fit_linear_closed(&pair).unwrap().residual);
    }
    report(
        2,
        "offset-preserving sets give zero residual",
        verdict(worst < 1e-9, format!("max residual {worst:.3e}")),
    );
}

#[test]
fn c03_gradient_descent_agrees_with_closed_form() {
    let _serial = serial();
    let mut worst: f64 = 0.0;
    let mut g = rng(3);
    for _ in 0..100 {
        let rows = g.random_range(3..=30);
        let d_x = g.random_range(1..=10);
        let d_y = g.random_range(1..=10);
        let x = gaussian(&mut g, rows, d_x);
        let y = gaussian(&mut g, rows, d_y);
        let pair = AlignedMatrixPair::from_matrices(x, y).unwrap().preprocess().unwrap();
        let gd = fit_linear_gd(&pair, &GdConfig::default()).unwrap();
        let closed = fit_linear_closed(&pair).unwrap();
        worst = worst.max((gd.residual - closed.residual).abs());
    }
    report(
        3,
        "gradient descent matches closed form",
        verdict(worst < 1e-4, format!("max gap {worst:.3e}")),
    );
}

#[test]
fn c04_distortion_sweep_correlates() {
    let _serial = serial();
    let base = SynthSpec {
        seed: 11,
        ..Default::default()
    };
    let config = SweepConfig::new(base, DistortionFamily::Field, grid(0.0, 0.95, 0.05).unwrap());
    assert_eq!(config.levels.len(), 20);
    let sweep = theorem_sweep(&config).unwrap();
    let outcome = match sweep.spearman {
        None => Outcome::Fail("a sweep column is constant".into()),
        Some(rho) => {
            let control = shuffled_control(&sweep.rows, CorrelationKind::Spearman, 11).unwrap();
            verdict(
                rho.coefficient >= 0.8 && rho.p_value < 1e-2 && control.coefficient.abs() < 0.4,
                format!(
                    "rho {:.3}, p {:.2e}, shuffled rho {:.3}",
                    rho.coefficient, rho.p_value, control.coefficient
                ),
            )
        }
    };
    report(4, "S_LMP and S_PAE correlate over a sweep", outcome);
}

fn pairs_category(t: usize) -> AnalogyCategory {
    let pairs = (0..t)
        .map(|i| WordPair::new(format!("p{i}"), format!("q{i}")))
        .collect();
    AnalogyCategory::monolingual("c", CategoryKind::Semantic, "en", pairs).unwrap()
}

#[test]
fn c05_question_counts() {
    let _serial = serial();
    let got: Vec<(usize, usize, usize)> = [(30, 3480), (2, 8), (5, 80)]
        .iter()
        .map(|&(t, _)| {
            (
                t,
                question_count(t),
                generate_questions(&pairs_category(t), "en").unwrap().len(),
            )
        })
        .collect();
    let ok = got
        .iter()
        .zip([3480, 8, 80])
        .all(|(&(_, formula, generated), want)| formula == want && generated == want);
    let detail = got
        .iter()
        .map(|(t, _, n)| format!("t={t}: {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(5, "question counts", verdict(ok, detail));
}

// Regularised incomplete beta by Lentz's continued fraction.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        for num in [
            m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m)),
            -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0)),
        ] {
            d = 1.0 + num * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = 1.0 + num / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-tailed p of a t statistic with `df` degrees of freedom.
fn oracle_t_p(t: f64, df: f64) -> f64 {
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

fn oracle_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Rank by counting, ties sharing the mean rank.
fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let below = xs.iter().filter(|&&v| v < x).count() as f64;
            let equal = xs.iter().filter(|&&v| v == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let distinct = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[0] != w[1])
    };
    let (rx, ry) = (oracle_ranks(xs), oracle_ranks(ys));
    if distinct(xs) && distinct(ys) {
        let n = xs.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    } else {
        oracle_pearson(&rx, &ry)
    }
}

/// F of a two-group ANOVA as the square of the pooled two-sample t.
fn oracle_anova(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * var(a) + (nb - 1.0) * var(b)) / df;
    let t = (mean(a) - mean(b)) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    (t * t, oracle_t_p(t, df))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn c06_statistics_match_textbook_formulas() {
    let _serial = serial();
    let mut g = rng(6);
    let mut failures = Vec::new();
    for k in 0..100 {
        let n = g.random_range(5..=40);
        let xs: Vec<f64> = (0..n).map(|_| g.sample(StandardNormal)).collect();
        let noise: Vec<f64> = (0..n).map(|_| g.sample::<f64, _>(StandardNormal)).collect();
        let slope = g.random_range(-1.0..1.0);
        let mut ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| slope * x + e).collect();
        if k % 2 == 1 {
            // ties on both sides
            ys.iter_mut().for_each(|y| *y = (*y * 2.0).round());
        }
        let xs_tied: Vec<f64> = if k % 2 == 1 {
            xs.iter().map(|x| (x * 2.0).round()).collect()
        } else {
            xs.clone()
        };
        let df = (n - 2) as f64;
        let t_of = |r: f64| r * (df / (1.0 - r * r)).sqrt();

        let r = pearson_r(&xs, &ys).unwrap();
        let r_want = oracle_pearson(&xs, &ys);
        if !close(r.coefficient, r_want, 1e-9) || !close(r.p_value, oracle_t_p(t_of(r_want), df), 1e-9) {
            failures.push(format!("pearson #{k}"));
        }
        let rho = spearman_rho(&xs_tied, &ys).unwrap();
        let rho_want = oracle_spearman(&xs_tied, &ys);
        if !close(rho.coefficient, rho_want, 1e-9) || !close(rho.p_value, oracle_t_p(t_of(rho_want), df), 1e-9) {
            failures.push(format!("spearman #{k}"));
        }
        let split = g.random_range(2..=n - 2);
        let shift = g.random_range(-1.0..1.0);
        let a: Vec<f64> = xs[..split].iter().map(|x| x + shift).collect();
        let b = &xs[split..];
        let anova = anova_two_treatment(&a, b).unwrap();
        let (f_want, p_want) = oracle_anova(&a, b);
        if !close(anova.f, f_want, 1e-9) || !close(anova.p_value, p_want, 1e-9) || anova.df_within != n - 2 {
            failures.push(format!("anova #{k}"));
        }

        // invariances
        let monotone_x: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let monotone_y: Vec<f64> = ys.iter().map(|y| y.powi(3) + 2.0 * y).collect();
        let rho_t = spearman_rho(&monotone_x, &monotone_y).unwrap();
        let rho_0 = spearman_rho(&xs, &ys).unwrap();
        if (rho_t.coefficient - rho_0.coefficient).abs() > 1e-9 {
            failures.push(format!("spearman invariance #{k}"));
        }
        let affine_x: Vec<f64> = xs.iter().map(|x| 3.5 * x - 2.0).collect();
        let affine_y: Vec<f64> = ys.iter().map(|y| 0.25 * y + 7.0).collect();
        if (pearson_r(&affine_x, &affine_y).unwrap().coefficient - r.coefficient).abs() > 1e-9 {
            failures.push(format!("pearson invariance #{k}"));
        }
    }
    report(
        6,
        "statistics match textbook formulas",
        verdict(
            failures.is_empty(),
            if failures.is_empty() {
                "300 instances, invariances hold".into()
            } else {
                failures.join(", ")
            },
        ),
    );
}

/// `t` parallel pairs with shared offset plus small noise, rows interleaved
/// as `a_0, b_0, a_1, b_1, ...`.
fn parallel_set(seed: u64, t: usize, d: usize) -> Array2<f64> {
    let mut g = rng(seed);
    let bases = gaussian(&mut g, t, d) * 2.0;
    let offset = gaussian(&mut g, 1, d).row(0).to_owned();
    let noise = gaussian(&mut g, t, d) * 0.01;
    let mut v = Array2::zeros((2 * t, d));
    for i in 0..t {
        v.row_mut(2 * i).assign(&bases.row(i));
        v.row_mut(2 * i + 1).assign(&(&bases.row(i) + &offset + noise.row(i)));
    }
    v
}

fn coordinate_median_interval(offsets: &[Vec<f64>]) -> Vec<(f64, f64)> {
    (0..offsets[0].len())
        .map(|j| {
            let mut col: Vec<f64> = offsets.iter().map(|o| o[j]).collect();
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                (col[n / 2], col[n / 2])
            } else {
                (col[n / 2 - 1], col[n / 2])
            }
        })
        .collect()
}

fn weiszfeld(offsets: &[Vec<f64>]) -> Vec<f64> {
    let d = offsets[0].len();
    let mut p: Vec<f64> = (0..d)
        .map(|j| offsets.iter().map(|o| o[j]).sum::<f64>() / offsets.len() as f64)
        .collect();
    for _ in 0..100_000 {
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        for o in offsets {
            let dist = o.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist < 1e-15 {
                return o.clone();
            }
            for j in 0..d {
                num[j] += o[j] / dist;
            }
            den += 1.0 / dist;
        }
        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        let step = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if step < 1e-13 {
            break;
        }
    }
    p
}

#[test]
fn c07_planted_pairings_are_cheapest() {
    let _serial = serial();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_median: f64 = 0.0;
    let mut worst_weiszfeld: f64 = 0.0;
    for k in 0..30u64 {
        let t = 3 + (k as usize % 3);
        let vectors = parallel_set(700 + k, t, 5);
        let reference: Vec<(usize, usize)> = (0..t).map(|i| (2 * i, 2 * i + 1)).collect();
        for kind in CostKind::ALL {
            let v = verify_best_pairing(&vectors, &reference, kind, DEFAULT_CAP).unwrap();
            if !v.is_optimal {
                failures.push(format!("set {k} under {kind}"));
            }
            let scheme = &v.reference;
            match kind {
                CostKind::Taxicab => {
                    for (p, (lo, hi)) in scheme.p_star.iter().zip(coordinate_median_interval(&scheme.offsets)) {
                        worst_median = worst_median.max((lo - p).max(p - hi).max(0.0));
                    }
                }
                CostKind::Euclidean => {
                    let oracle = weiszfeld(&scheme.offsets);
                    for (p, q) in scheme.p_star.iter().zip(&oracle) {
                        worst_weiszfeld = worst_weiszfeld.max((p - q).abs());
                    }
                }
                CostKind::Cosine => {}
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && worst_median < 1e-4 && worst_weiszfeld < 1e-4 && elapsed < Duration::from_secs(60);
    let mut detail = format!(
        "median gap {worst_median:.2e}, Weiszfeld gap {worst_weiszfeld:.2e}, {:.1} s",
        elapsed.as_secs_f64()
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; not optimal: {}", failures.join(", ")));
    }
    report(7, "planted pairings are the cheapest", verdict(ok, detail));
}

fn unit_rows(m: &Array2<f64>) -> Vec<Array1<f64>> {
    m.rows()
        .into_iter()
        .map(|r| {
            let n = r.dot(&r).sqrt();
            r.to_owned() / n
        })
        .collect()
}

fn cos(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.dot(b) / (a.dot(a).sqrt() * b.dot(b).sqrt())
}

/// Index of the best-scoring word outside `exclude`; the first one wins ties.
fn exhaustive(n: usize, exclude: [usize; 3], score: impl Fn(usize) -> Option<f64>) -> usize {
    let mut best = None::<(usize, f64)>;
    for w in (0..n).filter(|w| !exclude.contains(w)) {
        if let Some(s) = score(w) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((w, s));
            }
        }
    }
    best.expect("some candidate").0
}

fn oracle_answer(
    solver: SolverKind,
    emb: &Embedding,
    units: &[Array1<f64>],
    lrcos: Option<&LrCosSolver<'_, '_>>,
    category: &AnalogyCategory,
    q: &AnalogyQuestion,
) -> String {
    let idx = |w: &str| emb.index_of(w).unwrap();
    let (a, b, c) = (idx(&q.a), idx(&q.b), idx(&q.c));
    let (ua, ub, uc) = (&units[a], &units[b], &units[c]);
    let best = match solver {
        SolverKind::ThreeCosAdd => {
            let target = ub - ua + uc;
            exhaustive(emb.len(), [a, b, c], |w| Some(cos(&units[w], &target)))
        }
        SolverKind::ThreeCosMul => {
            let shifted = |x: f64| (x + 1.0) / 2.0;
            exhaustive(emb.len(), [a, b, c], |w| {
                let uw = &units[w];
                Some(shifted(cos(uw, ub)) * shifted(cos(uw, uc)) / (shifted(cos(uw, ua)) + COSMUL_EPSILON))
            })
        }
        SolverKind::PairDistance => {
            let offset = ub - ua;
            exhaustive(emb.len(), [a, b, c], |w| {
                let diff = &units[w] - uc;
                (diff.dot(&diff) > 0.0).then(|| cos(&diff, &offset))
            })
        }
        SolverKind::LrCos => {
            let model = lrcos.unwrap().classifier(q.target.side, q.target.pair);
            let pair = &category.pairs(emb.language()).unwrap()[q.target.pair];
            let partner = match q.target.side {
                Side::First => &pair.second,
                Side::Second => &pair.first,
            };
            // the partner of the answer is the anchor when it sits in b alone
            let anchor = if *partner == q.b && *partner != q.c { ub } else { uc };
            exhaustive(emb.len(), [a, b, c], |w| {
                let uw = &units[w];
                let z = uw.dot(model.weights()) + model.bias();
                Some(1.0 / (1.0 + (-z).exp()) * cos(uw, anchor))
            })
        }
    };
    emb.vocab()[best].clone()
}

fn twenty_word_space(seed: u64) -> (Embedding, AnalogyCategory) {
    let mut g = rng(seed);
    let vocab: Vec<String> = (0..20).map(|i| format!("w{i:02}")).collect();
    let emb = Embedding::new("en", vocab.clone(), gaussian(&mut g, 20, 6)).unwrap();
    let pairs = (0..5)
        .map(|i| WordPair::new(&vocab[2 * i], &vocab[2 * i + 1]))
        .collect();
    let category = AnalogyCategory::monolingual("c", CategoryKind::Semantic, "en", pairs).unwrap();
    (emb, category)
}

#[test]
fn c08_solvers_match_exhaustive_oracle() {
    let _serial = serial();
    let mut mismatches = Vec::new();
    for solver in SolverKind::ALL {
        let mut checked = 0;
        for seed in 0.. {
            if checked == 100 {
                break;
            }
            let (emb, category) = twenty_word_space(800 + seed);
            let space = AnalogySpace::new(&emb).unwrap();
            let candidates = Candidates::resolve(&CandidatePolicy::FullVocabulary, &emb);
            let lrcos = LrCosSolver::new(&space, &category, LrCosConfig::default()).unwrap();
            let units = unit_rows(emb.matrix());
            for q in generate_questions(&category, "en")
                .unwrap()
                .into_iter()
                .take(100 - checked)
            {
                let got = match solver {
                    SolverKind::ThreeCosAdd => solve_3cosadd(&space, &q, &candidates),
                    SolverKind::ThreeCosMul => solve_3cosmul(&space, &q, &candidates),
                    SolverKind::PairDistance => solve_pairdistance(&space, &q, &candidates),
                    SolverKind::LrCos => lrcos.solve(&q, &candidates),
                }
                .unwrap();
                let want = oracle_answer(solver, &emb, &units, Some(&lrcos), &category, &q);
                if got != want {
                    mismatches.push(format!("{solver} {}:{}::{}: {got} vs {want}", q.a, q.b, q.c));
                }
                checked += 1;
            }
        }
    }

    let accuracies: Vec<(SolverKind, f64)> = SolverKind::ALL
        .iter()
        .map(|&solver| {
            let worst = (0..4)
                .map(|seed| {
                    let spec = SynthSpec {
                        noise_sigma: 0.0,
                        seed,
                        ..Default::default()
                    };
                    let (emb, category) = gen_analogy_space(&spec).unwrap();
                    category_accuracy(&emb, &category, &EvalConfig::with_solver(solver))
                        .unwrap()
                        .accuracy
                })
                .fold(f64::INFINITY, f64::min);
            (solver, worst)
        })
        .collect();
    let perfect = accuracies.iter().all(|&(_, a)| a == 1.0);
    let mut detail = format!(
        "400 questions, {} mismatches; worst parallelogram accuracy over 4 spaces {}",
        mismatches.len(),
        accuracies
            .iter()
            .map(|(s, a)| format!("{s} {a}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if !mismatches.is_empty() {
        detail.push_str(&format!("; first: {}", mismatches[0]));
    }
    report(
        8,
        "solvers match exhaustive scoring",
        verdict(mismatches.is_empty() && perfect, detail),
    );
}

fn mono(lang: &str, categories: &[(&str, Vec<(String, String)>)]) -> MonolingualAnalogySet {
    let mut set = MonolingualAnalogySet::new(lang);
    for (name, pairs) in categories {
        set.insert(
            *name,
            CategoryKind::Semantic,
            pairs.iter().map(|(a, b)| WordPair::new(a, b)).collect(),
        )
        .unwrap();
    }
    set
}

fn dict(src: &str, tgt: &str, entries: &[(String, String)]) -> BilingualDictionary {
    BilingualDictionary::new(src, tgt, entries.iter().cloned())
}

fn s(v: &str) -> String {
    v.to_string()
}

#[test]
fn c09_builder_aligns_and_drops() {
    let _serial = serial();
    // en pivot; de and fr each lose different rows.
    //   row 0 (king, queen)   survives everywhere
    //   row 1 (man, woman)    de lists the pair reversed, so it is lost
    //   row 2 (boy, girl)     survives everywhere
    //   row 3 (uncle, aunt)   no fr translation of "aunt"
    //   row 4 (son, daughter) survives everywhere, de via its second sense
    let en = vec![
        (s("king"), s("queen")),
        (s("man"), s("woman")),
        (s("boy"), s("girl")),
        (s("uncle"), s("aunt")),
        (s("son"), s("daughter")),
    ];
    let de = vec![
        (s("junge"), s("maedchen")),
        (s("frau"), s("mann")),
        (s("sohn"), s("tochter")),
        (s("koenig"), s("koenigin")),
        (s("onkel"), s("tante")),
    ];
    let fr = vec![
        (s("roi"), s("reine")),
        (s("homme"), s("femme")),
        (s("garcon"), s("fille")),
        (s("oncle"), s("tante")),
        (s("fils"), s("fille")),
    ];
    let en_de: Vec<(String, String)> = [
        ("king", "koenig"),
        ("queen", "koenigin"),
        ("man", "mann"),
        ("woman", "frau"),
        ("boy", "junge"),
        ("girl", "maedchen"),
        ("uncle", "onkel"),
        ("aunt", "tante"),
        ("son", "kind"),
        ("son", "sohn"),
        ("daughter", "tochter"),
    ]
    .iter()
    .map(|(a, b)| (s(a), s(b)))
    .collect();
    let en_fr: Vec<(String, String)> = [
        ("king", "roi"),
        ("queen", "reine"),
        ("man", "homme"),
        ("woman", "femme"),
        ("boy", "garcon"),
        ("girl", "fille"),
        ("uncle", "oncle"),
        ("son", "fils"),
        ("daughter", "fille"),
    ]
    .iter()
    .map(|(a, b)| (s(a), s(b)))
    .collect();

    let full: Vec<(String, String)> = (0..30).map(|i| (format!("x{i}"), format!("y{i}"))).collect();
    let full_dict = |lang: &str| -> Vec<(String, String)> {
        full.iter()
            .flat_map(|(a, b)| [(a.clone(), format!("{lang}{a}")), (b.clone(), format!("{lang}{b}"))])
            .collect()
    };
    let full_in = |lang: &str| -> Vec<(String, String)> {
        full.iter()
            .map(|(a, b)| (format!("{lang}{a}"), format!("{lang}{b}")))
            .collect()
    };
    let big_en: Vec<(String, String)> = (0..29).map(|i| (format!("e{i}"), format!("f{i}"))).collect();
    let big_de: Vec<(String, String)> = (0..29).map(|i| (format!("d{i}"), format!("g{i}"))).collect();
    let big_fr: Vec<(String, String)> = (0..29).map(|i| (format!("p{i}"), format!("q{i}"))).collect();
    let mut big_en_de: Vec<(String, String)> = Vec::new();
    let mut big_en_fr: Vec<(String, String)> = Vec::new();
    for i in 0..29 {
        big_en_de.push((format!("e{i}"), format!("d{i}")));
        big_en_de.push((format!("f{i}"), format!("g{i}")));
        big_en_fr.push((format!("e{i}"), format!("p{i}")));
        big_en_fr.push((format!("f{i}"), format!("q{i}")));
    }

    let sets = vec![
        mono("en", &[("family", en), ("big", big_en), ("full", full.clone())]),
        mono("de", &[("family", de), ("big", big_de), ("full", full_in("de"))]),
        mono("fr", &[("family", fr), ("big", big_fr), ("full", full_in("fr"))]),
    ];
    let dictionaries = vec![
        dict("en", "de", &[en_de, big_en_de, full_dict("de")].concat()),
        dict("en", "fr", &[en_fr, big_en_fr, full_dict("fr")].concat()),
    ];

    let (small, _) = build_corpus(&sets, &dictionaries, 2).unwrap();
    let family = small.get("family").expect("family kept at min_pairs 2");
    let column = |lang: &str| -> Vec<(String, String)> {
        family
            .pairs(lang)
            .unwrap()
            .iter()
            .map(|p| (p.first.clone(), p.second.clone()))
            .collect()
    };
    let aligned_ok = column("en")
        == vec![
            (s("king"), s("queen")),
            (s("boy"), s("girl")),
            (s("son"), s("daughter")),
        ]
        && column("de")
            == vec![
                (s("koenig"), s("koenigin")),
                (s("junge"), s("maedchen")),
                (s("sohn"), s("tochter")),
            ]
        && column("fr")
            == vec![
                (s("roi"), s("reine")),
                (s("garcon"), s("fille")),
                (s("fils"), s("fille")),
            ];

    let (corpus, report_30) = build_corpus(&sets, &dictionaries, 30).unwrap();
    let big = report_30.categories.iter().find(|c| c.name == "big").unwrap();
    let dropped_ok = corpus.get("big").is_none()
        && corpus.get("full").is_some_and(|c| c.len() == 30)
        && !big.kept
        && big.aligned == 29
        && big.reason.as_deref().is_some_and(|r| r.contains("29"))
        && report_30.dropped().any(|c| c.name == "big");
    report(
        9,
        "analogy builder",
        verdict(
            aligned_ok && dropped_ok,
            format!(
                "family keeps {} rows; 29-pair category kept={} reason={:?}",
                family.len(),
                big.kept,
                big.reason
            ),
        ),
    );
}

/// Directory with `wiki.en.vec`, `wiki.de.vec` and an `analogy/` corpus
/// holding an en-de `cap` category.
const FULL_SCALE_ENV: &str = "ANLGMAP_FULL_SCALE_DIR";
/// Optional vocabulary cap for the full-scale vectors.
const FULL_SCALE_LIMIT_ENV: &str = "ANLGMAP_FULL_SCALE_LIMIT";

#[test]
fn c10_full_scale_en_de_capitals() {
    let _serial = serial();
    let Some(dir) = std::env::var_os(FULL_SCALE_ENV).map(PathBuf::from) else {
        report(
            10,
            "full-scale en-de capitals",
            Outcome::Skip(format!("{FULL_SCALE_ENV} not set")),
        );
        return;
    };
    let paths = [dir.join("wiki.en.vec"), dir.join("wiki.de.vec"), dir.join("analogy")];
    if let Some(missing) = paths.iter().find(|p| !p.exists()) {
        report(
            10,
            "full-scale en-de capitals",
            Outcome::Skip(format!("{} missing", missing.display())),
        );
        return;
    }
    let limit = std::env::var(FULL_SCALE_LIMIT_ENV)
        .ok()
        .map(|v| v.parse::<usize>().unwrap());
    let en = load_text_vectors(&paths[0], "en", limit).unwrap().embedding;
    let de = load_text_vectors(&paths[1], "de", limit).unwrap().embedding;
    let corpus = AnalogyCorpus::load_dir(&paths[2]).unwrap();
    let cap = corpus.get("cap").expect("cap category");
    let dictionary = BilingualDictionary::from_category(cap, "en", "de").unwrap();
    let s_lmp = fit_linear_gd(
        &build_aligned(&en, &de, &dictionary, None).unwrap(),
        &GdConfig::default(),
    )
    .unwrap()
    .s_lmp;
    let config = EvalConfig::with_solver(SolverKind::LrCos);
    let acc_en = category_accuracy(&en, cap, &config).unwrap().accuracy;
    let acc_de = category_accuracy(&de, cap, &config).unwrap().accuracy;
    report(
        10,
        "full-scale en-de capitals",
        verdict(
            (s_lmp + 0.16).abs() <= 0.03 && (acc_en - 0.94).abs() <= 0.03 && (acc_de - 0.68).abs() <= 0.03,
            format!("S_LMP {s_lmp:.3}, LRCos en {acc_en:.3}, de {acc_de:.3}"),
        ),
    );
}
