//! Seeded synthetic embedding pairs for checking, on controlled data, that
//! exactly affine maps preserve analogies and that growing nonlinearity
//! degrades both map linearity and analogy preservation together.
//!
//! Randomness: every draw comes from `ChaCha8Rng::seed_from_u64(seed)`
//! (rand_chacha 0.9), with Gaussian samples from `rand_distr::StandardNormal`
//! (ziggurat). Independent streams are selected with `set_stream`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analogy::{category_accuracy, AnalogyCategory, CategoryKind, EvalConfig, LrCosConfig, SolverKind, WordPair};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linear_map::{build_aligned, fit_linear_gd, BilingualDictionary, GdConfig};
use crate::stats::{correlation, s_pae, Correlation, CorrelationKind};

pub const SOURCE_LANGUAGE: &str = "src";
pub const TARGET_LANGUAGE: &str = "tgt";
pub const CATEGORY_NAME: &str = "synthetic";

const STREAM_VECTORS: u64 = 1;
const STREAM_AFFINE: u64 = 2;
const STREAM_SUBSEED: u64 = 3;
const STREAM_SHUFFLE: u64 = 4;
const STREAM_FIELD: u64 = 5;
const FIELD_SEED: u64 = 0x0066_6965_6c64;

/// A non-affine warp applied about the centroid of the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distortion {
    None,
    /// `z -> z (1 + lambda |z|^2 / s^2)` for centred rows `z`, where `s^2`
    /// is the mean squared norm of the centred rows.
    Radial {
        lambda: f64,
    },
    /// Rotation by `angle` degrees in the plane of the first two axes, for
    /// centred rows with a non-negative first coordinate only.
    SplitLinear {
        angle: f64,
    },
    /// Smooth random displacement `z -> z + lambda s sin(2 W z / s + phi)`
    /// for centred rows `z`, where `s` is the per-coordinate RMS of the
    /// centred rows and `W`, `phi` are a fixed seeded orthogonal matrix and
    /// phase vector.
    Field {
        lambda: f64,
    },
}

impl Distortion {
    pub fn family(&self) -> &'static str {
        match self {
            Distortion::None => "none",
            Distortion::Radial { .. } => "radial",
            Distortion::SplitLinear { .. } => "split_linear",
            Distortion::Field { .. } => "field",
        }
    }

    pub fn level(&self) -> f64 {
        match *self {
            Distortion::None => 0.0,
            Distortion::Radial { lambda } => lambda,
            Distortion::SplitLinear { angle } => angle,
            Distortion::Field { lambda } => lambda,
        }
    }

    /// Same family at another level.
    pub fn at(family: DistortionFamily, level: f64) -> Distortion {
        match family {
            DistortionFamily::Radial => Distortion::Radial { lambda: level },
            DistortionFamily::SplitLinear => Distortion::SplitLinear { angle: level },
            DistortionFamily::Field => Distortion::Field { lambda: level },
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Distortion::Radial { lambda } | Distortion::Field { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")))
            }
            Distortion::SplitLinear { angle } if !angle.is_finite() => Err(Error::InvalidArgument(format!(
                "split angle must be finite, got {angle}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionFamily {
    Radial,
    SplitLinear,
    Field,
}

impl fmt::Display for DistortionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistortionFamily::Radial => "lambda",
            DistortionFamily::SplitLinear => "angle",
            DistortionFamily::Field => "field",
        })
    }
}

impl FromStr for DistortionFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" | "radial" => Ok(DistortionFamily::Radial),
            "angle" | "split_linear" => Ok(DistortionFamily::SplitLinear),
            "field" => Ok(DistortionFamily::Field),
            other => Err(Error::InvalidArgument(format!("unknown distortion `{other}`"))),
        }
    }
}

fn default_filler() -> usize {
    100
}
fn default_offset_scale() -> f64 {
    1.0
}
fn default_mean_shift() -> f64 {
    0.0
}
fn default_cluster_spread() -> f64 {
    0.3
}

/// Parameters of one synthetic space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_pairs: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    #[serde(default = "none_distortion")]
    pub distortion: Distortion,
    pub seed: u64,
    /// Distractor words with no role in the category.
    #[serde(default = "default_filler")]
    pub n_filler: usize,
    /// Per-coordinate standard deviation of the shared offset.
    #[serde(default = "default_offset_scale")]
    pub offset_scale: f64,
    /// Distance of the filler cloud's centre from the origin.
    #[serde(default = "default_mean_shift")]
    pub mean_shift: f64,
    /// How far category words scatter around their common direction; small
    /// values make the pairs near-synonyms and analogies easy to confuse.
    #[serde(default = "default_cluster_spread")]
    pub cluster_spread: f64,
}

fn none_distortion() -> Distortion {
    Distortion::None
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_pairs: 10,
            dim: 30,
            noise_sigma: 0.1,
            distortion: Distortion::None,
            seed: 0,
            n_filler: default_filler(),
            offset_scale: default_offset_scale(),
            mean_shift: default_mean_shift(),
            cluster_spread: default_cluster_spread(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs < 2 {
            return Err(Error::InvalidArgument(format!(
                "n_pairs must be >= 2, got {}",
                self.n_pairs
            )));
        }
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!("dim must be >= 2, got {}", self.dim)));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("offset_scale", self.offset_scale),
            ("mean_shift", self.mean_shift),
            ("cluster_spread", self.cluster_spread),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        self.distortion.validate()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_vec(rng: &mut impl Rng, d: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Sub-seed `k` derived from `seed`.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut rng = rng_for(seed, STREAM_SUBSEED);
    rng.set_word_pos(2 * k as u128);
    rng.next_u64()
}

pub fn pair_words(i: usize) -> (String, String) {
    (format!("a{i:03}"), format!("b{i:03}"))
}

/// Pairs `(c_i, c_i + r + e_i)` sharing one offset `r`, plus filler words,
/// then warped by `spec.distortion`.
///
/// Each `c_i = -r/2 + w_i` with `w_i` orthogonal to `r` and of norm
/// `sqrt(dim)`, pointing along a shared category direction plus Gaussian
/// scatter of relative size `cluster_spread`, so without noise both words of every pair lie on one sphere
/// about the origin and the offsets stay equal after unit normalisation.
/// Fillers are Gaussian about a mean `mean_shift` away from the origin and
/// are redrawn while their direction is within half the unit offset of any
/// pair word.
///
/// Draw order from the vector stream: `r`, the mean direction, the
/// category direction, each scatter term, each `e_i`, then fillers.
pub fn gen_analogy_space(spec: &SynthSpec) -> Result<(Embedding, AnalogyCategory)> {
    spec.validate()?;
    let (t, d) = (spec.n_pairs, spec.dim);
    let mut rng = rng_for(spec.seed, STREAM_VECTORS);
    let offset = gaussian_vec(&mut rng, d, spec.offset_scale);
    let offset_norm2 = offset.dot(&offset);
    let spread = (d as f64).sqrt();
    let orthogonal = |g: Array1<f64>| {
        if offset_norm2 > 0.0 {
            &g - &(&offset * (g.dot(&offset) / offset_norm2))
        } else {
            g
        }
    };
    let centre = orthogonal(gaussian_vec(&mut rng, d, 1.0 / spread));
    let mean = &centre * (spec.mean_shift / centre.dot(&centre).sqrt().max(f64::MIN_POSITIVE));
    let mut bases = Vec::with_capacity(t);
    for _ in 0..t {
        let g = gaussian_vec(&mut rng, d, spec.cluster_spread / spread);
        let w = orthogonal(&centre + &g);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("degenerate base vector; change the seed".into()));
        }
        bases.push(&w * (spread / norm) - &offset * 0.5);
    }
    let noise: Vec<Array1<f64>> = (0..t).map(|_| gaussian_vec(&mut rng, d, spec.noise_sigma)).collect();

    let mut rows: Vec<Array1<f64>> = Vec::with_capacity(2 * t + spec.n_filler);
    let mut vocab = Vec::with_capacity(2 * t + spec.n_filler);
    for i in 0..t {
        let (a, b) = pair_words(i);
        rows.push(bases[i].clone());
        rows.push(&bases[i] + &offset + &noise[i]);
        vocab.push(a);
        vocab.push(b);
    }
    let unit = |v: &Array1<f64>| v / v.dot(v).sqrt().max(f64::MIN_POSITIVE);
    let pair_units: Vec<Array1<f64>> = rows.iter().map(unit).collect();
    let margin = 0.5 * (offset_norm2 / (spread * spread + offset_norm2 / 4.0)).sqrt();
    for j in 0..spec.n_filler {
        let mut attempts = 0;
        let filler = loop {
            let candidate = gaussian_vec(&mut rng, d, 1.0) + &mean;
            let u = unit(&candidate);
            if pair_units.iter().all(|p| (p - &u).dot(&(p - &u)).sqrt() >= margin) {
                break candidate;
            }
            attempts += 1;
            if attempts >= 10_000 {
                return Err(Error::InvalidArgument(
                    "cannot place filler words away from the category; lower n_filler or offset_scale".into(),
                ));
            }
        };
        rows.push(filler);
        vocab.push(format!("f{j:04}"));
    }

    let mut matrix = Array2::zeros((rows.len(), d));
    for (mut dst, src) in matrix.axis_iter_mut(Axis(0)).zip(&rows) {
        dst.assign(src);
    }
    let embedding = Embedding::new(SOURCE_LANGUAGE, vocab, matrix)?;
    let embedding = apply_distortion(&embedding, &spec.distortion)?;
    let pairs = (0..t)
        .map(|i| {
            let (a, b) = pair_words(i);
            WordPair::new(a, b)
        })
        .collect();
    let category = AnalogyCategory::monolingual(CATEGORY_NAME, CategoryKind::Semantic, SOURCE_LANGUAGE, pairs)?;
    Ok((embedding, category))
}

/// Maps every row `x` to `M x + b`; `m` is `d_out x d_in`.
pub fn apply_affine(embedding: &Embedding, m: &Array2<f64>, b: &Array1<f64>) -> Result<Embedding> {
    if m.ncols() != embedding.dim() || m.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "map is {}x{} with offset of length {}, embedding has dimension {}",
            m.nrows(),
            m.ncols(),
            b.len(),
            embedding.dim()
        )));
    }
    let mapped = embedding.matrix().dot(&m.t()) + b;
    Embedding::new(embedding.language(), embedding.vocab().to_vec(), mapped)
}

/// Applies `distortion` to every row, about the centroid of all rows.
pub fn apply_distortion(embedding: &Embedding, distortion: &Distortion) -> Result<Embedding> {
    distortion.validate()?;
    let matrix = embedding.matrix();
    let centroid = matrix.mean_axis(Axis(0)).expect("embeddings are non-empty");
    let mut centred = matrix - &centroid;
    match *distortion {
        Distortion::None
        | Distortion::Radial { lambda: 0.0 }
        | Distortion::SplitLinear { angle: 0.0 }
        | Distortion::Field { lambda: 0.0 } => return Ok(embedding.clone()),
        Distortion::Field { lambda } => {
            let d = centred.ncols();
            let s = (centred.iter().map(|x| x * x).sum::<f64>() / centred.len() as f64).sqrt();
            if s > 0.0 {
                let w = random_rotation_stream(d, FIELD_SEED, STREAM_FIELD);
                let mut rng = rng_for(FIELD_SEED, STREAM_FIELD + 1);
                let phase: Array1<f64> = (0..d).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                let argument = centred.dot(&w.t()) * (2.0 / s) + &phase;
                centred = centred + argument.mapv(f64::sin) * (lambda * s);
            }
        }
        Distortion::Radial { lambda } => {
            let scale = centred.rows().into_iter().map(|r| r.dot(&r)).sum::<f64>() / centred.nrows() as f64;
            if scale > 0.0 {
                for mut row in centred.rows_mut() {
                    let factor = 1.0 + lambda * row.dot(&row) / scale;
                    row *= factor;
                }
            }
        }
        Distortion::SplitLinear { angle } => {
            let (sin, cos) = (angle * PI / 180.0).sin_cos();
            for mut row in centred.rows_mut() {
                if row[0] >= 0.0 {
                    let (x, y) = (row[0], row[1]);
                    row[0] = cos * x - sin * y;
                    row[1] = sin * x + cos * y;
                }
            }
        }
    }
    embedding.with_matrix(centred + &centroid)
}

/// A random well-conditioned map: an orthogonal matrix with singular values
/// in `[0.5, 2]`, plus a Gaussian offset.
pub fn random_affine(dim: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = rng_for(seed, STREAM_AFFINE);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let scales: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
    let m = Array2::from_shape_fn((dim, dim), |(i, j)| q[(i, j)] * scales[j]);
    let b = gaussian_vec(&mut rng, dim, 1.0);
    (m, b)
}

/// A random orthogonal matrix.
pub fn random_rotation(dim: usize, seed: u64) -> Array2<f64> {
    random_rotation_stream(dim, seed, STREAM_AFFINE)
}

fn random_rotation_stream(dim: usize, seed: u64, stream: u64) -> Array2<f64> {
    let mut rng = rng_for(seed, stream);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    Array2::from_shape_fn((dim, dim), |(i, j)| q[(i, j)])
}

/// Source space, its distorted and rotated copy, and the category
/// in both languages (same tokens on both sides).
#[derive(Debug, Clone)]
pub struct SynthPair {
    pub source: Embedding,
    pub target: Embedding,
    pub category: AnalogyCategory,
}

/// Target = `random_rotation(seed)` applied after `distortion`; the spec's
/// own distortion shapes the source space. A rotation keeps every cosine, so
/// without distortion both sides answer analogies identically.
pub fn gen_mapped_pair(spec: &SynthSpec, distortion: &Distortion) -> Result<SynthPair> {
    let (source, mono) = gen_analogy_space(spec)?;
    let rotation = random_rotation(spec.dim, spec.seed);
    let warped = apply_distortion(&source, distortion)?;
    let mapped = apply_affine(&warped, &rotation, &Array1::zeros(spec.dim))?;
    let target = Embedding::new(TARGET_LANGUAGE, mapped.vocab().to_vec(), mapped.matrix().clone())?;
    let pairs = mono
        .pairs(SOURCE_LANGUAGE)
        .expect("generated in source language")
        .to_vec();
    let mut by_language = indexmap::IndexMap::new();
    by_language.insert(SOURCE_LANGUAGE.to_string(), pairs.clone());
    by_language.insert(TARGET_LANGUAGE.to_string(), pairs);
    let category = AnalogyCategory::new(CATEGORY_NAME, CategoryKind::Semantic, by_language)?;
    Ok(SynthPair {
        source,
        target,
        category,
    })
}

/// Identity dictionary over every source token.
pub fn identity_dictionary(pair: &SynthPair) -> BilingualDictionary {
    BilingualDictionary::new(
        SOURCE_LANGUAGE,
        TARGET_LANGUAGE,
        pair.source.vocab().iter().map(|w| (w.clone(), w.clone())),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: SynthSpec,
    pub family: DistortionFamily,
    pub levels: Vec<f64>,
    /// Independent spaces averaged per grid point.
    pub replicates: usize,
    pub lrcos: LrCosConfig,
    pub gd: GdConfig,
}

impl SweepConfig {
    pub fn new(base: SynthSpec, family: DistortionFamily, levels: Vec<f64>) -> Self {
        SweepConfig {
            base,
            family,
            levels,
            replicates: 3,
            lrcos: LrCosConfig::default(),
            gd: GdConfig::default(),
        }
    }
}

/// Scores of one grid point, averaged over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub level: f64,
    pub s_lmp: f64,
    pub s_pae: f64,
    pub lrcos_x: f64,
    pub lrcos_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub family: DistortionFamily,
    pub rows: Vec<SweepRow>,
    /// `None` when either column is constant over the grid.
    pub spearman: Option<Correlation>,
    pub pearson: Option<Correlation>,
}

/// `(S_LMP, LRCos_x, LRCos_y)` for one mapped pair.
pub fn score_pair(pair: &SynthPair, lrcos: &LrCosConfig, gd: &GdConfig) -> Result<(f64, f64, f64)> {
    let aligned = build_aligned(&pair.source, &pair.target, &identity_dictionary(pair), None)?;
    let fit = fit_linear_gd(&aligned, gd)?;
    let config = EvalConfig {
        lrcos: lrcos.clone(),
        ..EvalConfig::with_solver(SolverKind::LrCos)
    };
    let x = category_accuracy(&pair.source, &pair.category, &config)?.accuracy;
    let y = category_accuracy(&pair.target, &pair.category, &config)?.accuracy;
    Ok((fit.s_lmp, x, y))
}

/// Runs every grid level on the same replicate spaces (replicate `k` uses
/// seed `derive_seed(base.seed, k)`), so levels differ only in distortion.
pub fn theorem_sweep(config: &SweepConfig) -> Result<SweepReport> {
    if config.levels.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "a sweep needs at least 10 grid points, got {}",
            config.levels.len()
        )));
    }
    if config.replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    config.base.validate()?;
    let jobs: Vec<(usize, u64)> = (0..config.levels.len())
        .flat_map(|i| (0..config.replicates as u64).map(move |k| (i, k)))
        .collect();
    let scores: Vec<(f64, f64, f64)> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let spec = SynthSpec {
                seed: derive_seed(config.base.seed, k),
                ..config.base.clone()
            };
            let pair = gen_mapped_pair(&spec, &Distortion::at(config.family, config.levels[i]))?;
            score_pair(&pair, &config.lrcos, &config.gd)
        })
        .collect::<Result<_>>()?;

    let reps = config.replicates as f64;
    let rows: Vec<SweepRow> = config
        .levels
        .iter()
        .zip(scores.chunks(config.replicates))
        .map(|(&level, chunk)| {
            let mut row = SweepRow {
                level,
                s_lmp: 0.0,
                s_pae: 0.0,
                lrcos_x: 0.0,
                lrcos_y: 0.0,
            };
            for &(s_lmp, x, y) in chunk {
                let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
                row.s_lmp += s_lmp / reps;
                row.s_pae += s_pae(hi, lo)? / reps;
                row.lrcos_x += x / reps;
                row.lrcos_y += y / reps;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let (xs, ys) = columns(&rows);
    Ok(SweepReport {
        family: config.family,
        spearman: defined(correlation(CorrelationKind::Spearman, &xs, &ys))?,
        pearson: defined(correlation(CorrelationKind::Pearson, &xs, &ys))?,
        rows,
    })
}

fn defined(result: Result<Correlation>) -> Result<Option<Correlation>> {
    match result {
        Ok(c) => Ok(Some(c)),
        Err(Error::ConstantSeries) => {
            log::warn!("a sweep column is constant; correlation left undefined");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn columns(rows: &[SweepRow]) -> (Vec<f64>, Vec<f64>) {
    (
        rows.iter().map(|r| r.s_lmp).collect(),
        rows.iter().map(|r| r.s_pae).collect(),
    )
}

/// Correlation after shuffling the S_PAE column with a seeded permutation.
pub fn shuffled_control(rows: &[SweepRow], kind: CorrelationKind, seed: u64) -> Result<Correlation> {
    let (xs, mut ys) = columns(rows);
    ys.shuffle(&mut rng_for(seed, STREAM_SHUFFLE));
    correlation(kind, &xs, &ys)
}

/// Evenly spaced levels `start, start + step, ...` up to `end` inclusive.
pub fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || !start.is_finite() || !end.is_finite() || end < start {
        return Err(Error::InvalidArgument(format!("bad grid {start}:{end}:{step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}
