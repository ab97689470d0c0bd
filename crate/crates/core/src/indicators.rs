//! Indicator grids pairing map linearity with analogy preservation, and the
//! grouped correlation analysis run over them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analogy::{category_accuracy, AnalogyCategory, AnalogyCorpus, CategoryKind, EvalConfig};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::linear_map::{build_aligned, fit_linear_closed, fit_linear_gd, BilingualDictionary, GdConfig};
use crate::stats::{anova_two_treatment, correlation, permutation_p, s_pae, Anova, CorrelationKind};
use crate::xanlg::find_dictionary;

/// One language pair on one category. `lang_x` is always the language whose
/// embedding solves the category better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRecord {
    pub series: String,
    pub category: String,
    pub kind: CategoryKind,
    pub lang_x: String,
    pub lang_y: String,
    pub s_lmp: f64,
    pub lrcos_x: f64,
    pub lrcos_y: f64,
    pub s_pae: f64,
    /// Dictionary rows covered by both vocabularies.
    pub aligned_rows: usize,
    pub answered_x: usize,
    pub answered_y: usize,
}

impl IndicatorRecord {
    /// Orders the two languages by accuracy (ties by language code) and
    /// fills in `s_pae`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        series: impl Into<String>,
        category: impl Into<String>,
        kind: CategoryKind,
        (lang_a, lrcos_a, answered_a): (&str, f64, usize),
        (lang_b, lrcos_b, answered_b): (&str, f64, usize),
        s_lmp: f64,
        aligned_rows: usize,
    ) -> Result<Self> {
        if s_lmp.is_nan() || s_lmp > 0.0 {
            return Err(Error::InvalidArgument(format!("s_lmp must be <= 0, got {s_lmp}")));
        }
        let s = s_pae(lrcos_a, lrcos_b)?;
        let a_first = lrcos_a > lrcos_b || (lrcos_a == lrcos_b && lang_a <= lang_b);
        let ((lx, x, ax), (ly, y, ay)) = if a_first {
            ((lang_a, lrcos_a, answered_a), (lang_b, lrcos_b, answered_b))
        } else {
            ((lang_b, lrcos_b, answered_b), (lang_a, lrcos_a, answered_a))
        };
        Ok(IndicatorRecord {
            series: series.into(),
            category: category.into(),
            kind,
            lang_x: lx.to_string(),
            lang_y: ly.to_string(),
            s_lmp,
            lrcos_x: x,
            lrcos_y: y,
            s_pae: s,
            aligned_rows,
            answered_x: ax,
            answered_y: ay,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct GridConfig {
    pub eval: EvalConfig,
    pub gd: GdConfig,
    /// Use the pseudo-inverse solution instead of gradient descent.
    pub closed_form: bool,
    /// Dictionaries for the map fit. When empty, each category's own aligned
    /// word pairs serve as the dictionary.
    pub dictionaries: Vec<BilingualDictionary>,
}

struct Accuracy {
    value: f64,
    answered: usize,
}

/// One record per unordered language pair per category, over the languages
/// that have both an embedding and pairs for the category.
pub fn build_indicator_grid(
    embeddings: &IndexMap<String, Embedding>,
    corpus: &AnalogyCorpus,
    series: &str,
    config: &GridConfig,
) -> Result<Vec<IndicatorRecord>> {
    for (code, emb) in embeddings {
        if code != emb.language() {
            return Err(Error::InvalidArgument(format!(
                "embedding keyed `{code}` is for language `{}`",
                emb.language()
            )));
        }
    }
    let mut participants: Vec<(&AnalogyCategory, Vec<&str>)> = Vec::new();
    for category in &corpus.categories {
        let langs: Vec<&str> = embeddings
            .keys()
            .map(String::as_str)
            .filter(|l| category.has_language(l))
            .collect();
        if langs.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "category `{}` is shared by {} of the embedded languages, need at least 2",
                category.name(),
                langs.len()
            )));
        }
        participants.push((category, langs));
    }

    let solo_jobs: Vec<(usize, &str)> = participants
        .iter()
        .enumerate()
        .flat_map(|(c, (_, langs))| langs.iter().map(move |&l| (c, l)))
        .collect();
    let solo: Vec<Accuracy> = solo_jobs
        .par_iter()
        .map(|&(c, lang)| {
            let category = participants[c].0;
            category_accuracy(&embeddings[lang], category, &config.eval)
                .map(|r| Accuracy {
                    value: r.accuracy,
                    answered: r.answered,
                })
                .map_err(|e| e.context(format!("{lang} on `{}`", category.name())))
        })
        .collect::<Result<_>>()?;
    let accuracy: BTreeMap<(usize, &str), Accuracy> = solo_jobs.into_iter().zip(solo).collect();

    let pair_jobs: Vec<(usize, &str, &str)> = participants
        .iter()
        .enumerate()
        .flat_map(|(c, (_, langs))| {
            let langs = langs.clone();
            (0..langs.len()).flat_map(move |i| {
                let langs = langs.clone();
                (i + 1..langs.len()).map(move |j| (c, langs[i], langs[j]))
            })
        })
        .collect();
    pair_jobs
        .par_iter()
        .map(|&(c, a, b)| {
            let category = participants[c].0;
            let (acc_a, acc_b) = (&accuracy[&(c, a)], &accuracy[&(c, b)]);
            let mut record = IndicatorRecord::new(
                series,
                category.name(),
                category.kind(),
                (a, acc_a.value, acc_a.answered),
                (b, acc_b.value, acc_b.answered),
                0.0,
                0,
            )?;
            let (s_lmp, rows) = fit_pair(embeddings, category, &record.lang_x, &record.lang_y, config)
                .map_err(|e| e.context(format!("{}-{} on `{}`", record.lang_x, record.lang_y, category.name())))?;
            record.s_lmp = s_lmp;
            record.aligned_rows = rows;
            Ok(record)
        })
        .collect()
}

fn fit_pair(
    embeddings: &IndexMap<String, Embedding>,
    category: &AnalogyCategory,
    lang_x: &str,
    lang_y: &str,
    config: &GridConfig,
) -> Result<(f64, usize)> {
    let dictionary = if config.dictionaries.is_empty() {
        BilingualDictionary::from_category(category, lang_x, lang_y)?
    } else {
        find_dictionary(&config.dictionaries, lang_x, lang_y)?
    };
    let aligned = build_aligned(&embeddings[lang_x], &embeddings[lang_y], &dictionary, None)?;
    let fit = if config.closed_form {
        fit_linear_closed(&aligned)?
    } else {
        fit_linear_gd(&aligned, &config.gd)?
    };
    Ok((fit.s_lmp, aligned.rows()))
}

pub fn write_csv(records: &[IndicatorRecord], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in records {
        writer
            .serialize(record)
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    writer.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn read_csv(input: impl Read, path: &Path) -> Result<Vec<IndicatorRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut records = Vec::new();
    for row in reader.deserialize() {
        let record: IndicatorRecord = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        validate_record(&record).map_err(|e| e.context(format!("{}:{}", path.display(), records.len() + 2)))?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<IndicatorRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), path)
}

fn validate_record(r: &IndicatorRecord) -> Result<()> {
    if r.s_lmp.is_nan() || r.s_lmp > 0.0 {
        return Err(Error::InvalidArgument(format!("s_lmp {} is not <= 0", r.s_lmp)));
    }
    let expected = s_pae(r.lrcos_x, r.lrcos_y)?;
    if r.lrcos_x < r.lrcos_y {
        return Err(Error::InvalidArgument(format!(
            "lrcos_x {} is below lrcos_y {}",
            r.lrcos_x, r.lrcos_y
        )));
    }
    if (expected - r.s_pae).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "s_pae {} is not the geometric mean {expected}",
            r.s_pae
        )));
    }
    Ok(())
}

/// Record fields that can key a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupField {
    Series,
    Category,
}

impl fmt::Display for GroupField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupField::Series => "series",
            GroupField::Category => "category",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupBy {
    pub series: bool,
    pub category: bool,
}

impl Default for GroupBy {
    fn default() -> Self {
        GroupBy {
            series: true,
            category: true,
        }
    }
}

impl FromStr for GroupBy {
    type Err = Error;

    /// Comma-separated field names, e.g. `series,category`. An empty string
    /// pools everything into one group.
    fn from_str(s: &str) -> Result<Self> {
        let mut by = GroupBy {
            series: false,
            category: false,
        };
        for field in s.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match field {
                "series" => by.series = true,
                "category" => by.category = true,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "cannot group by `{other}`, expected series or category"
                    )))
                }
            }
        }
        Ok(by)
    }
}

impl fmt::Display for GroupBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fields: Vec<&str> = [(self.series, "series"), (self.category, "category")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, name)| *name)
            .collect();
        f.write_str(&fields.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.series, &self.category) {
            (Some(s), Some(c)) => write!(f, "{s}/{c}"),
            (Some(s), None) => f.write_str(s),
            (None, Some(c)) => f.write_str(c),
            (None, None) => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub group_key: GroupKey,
    /// Set when every record of the group has the same category kind.
    pub kind: Option<CategoryKind>,
    pub n: usize,
    pub spearman_rho: f64,
    pub pearson_r: f64,
    pub p_spearman: f64,
    pub p_pearson: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_spearman_permutation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_pearson_permutation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub group_key: GroupKey,
    pub n: usize,
    pub reason: String,
}

/// Semantic against syntactic groups, compared on one coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindAnova {
    pub coefficient: CorrelationKind,
    pub semantic_groups: usize,
    pub syntactic_groups: usize,
    pub f: f64,
    pub p_value: f64,
    pub df_within: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub group_by: String,
    pub groups: Vec<CorrelationReport>,
    pub skipped: Vec<SkippedGroup>,
    /// Empty unless both kinds have at least two reported groups.
    pub kind_anova: Vec<KindAnova>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelateConfig {
    pub group_by: GroupBy,
    /// Shuffles for permutation p-values; `None` reports t-based p only.
    pub permutations: Option<usize>,
    pub seed: u64,
}

fn key_of(record: &IndicatorRecord, by: GroupBy) -> GroupKey {
    GroupKey {
        series: by.series.then(|| record.series.clone()),
        category: by.category.then(|| record.category.clone()),
    }
}

/// Spearman and Pearson correlation of S_LMP against S_PAE per group, then a
/// two-treatment ANOVA of each coefficient across semantic and syntactic
/// groups. Groups whose coefficients are undefined are listed as skipped.
pub fn correlate(records: &[IndicatorRecord], config: &CorrelateConfig) -> Result<CorrelationSummary> {
    if records.is_empty() {
        return Err(Error::Empty("indicator grid has no records".into()));
    }
    let mut groups: BTreeMap<GroupKey, Vec<&IndicatorRecord>> = BTreeMap::new();
    for record in records {
        validate_record(record)?;
        groups.entry(key_of(record, config.group_by)).or_default().push(record);
    }

    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    for (index, (key, members)) in groups.into_iter().enumerate() {
        let xs: Vec<f64> = members.iter().map(|r| r.s_pae).collect();
        let ys: Vec<f64> = members.iter().map(|r| r.s_lmp).collect();
        let kind = members
            .iter()
            .all(|r| r.kind == members[0].kind)
            .then_some(members[0].kind);
        match group_report(key.clone(), kind, &xs, &ys, config, index as u64) {
            Ok(report) => reports.push(report),
            Err(e) if e.is_input_error() || matches!(e.root(), Error::ConstantSeries) => {
                log::warn!("group {key}: {e}");
                skipped.push(SkippedGroup {
                    group_key: key,
                    n: xs.len(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let mut kind_anova = Vec::new();
    for coefficient in [CorrelationKind::Spearman, CorrelationKind::Pearson] {
        let pick = |k: CategoryKind| -> Vec<f64> {
            reports
                .iter()
                .filter(|r| r.kind == Some(k))
                .map(|r| match coefficient {
                    CorrelationKind::Spearman => r.spearman_rho,
                    CorrelationKind::Pearson => r.pearson_r,
                })
                .collect()
        };
        let (semantic, syntactic) = (pick(CategoryKind::Semantic), pick(CategoryKind::Syntactic));
        if semantic.len() < 2 || syntactic.len() < 2 {
            continue;
        }
        match anova_two_treatment(&semantic, &syntactic) {
            Ok(Anova {
                f, p_value, df_within, ..
            }) => kind_anova.push(KindAnova {
                coefficient,
                semantic_groups: semantic.len(),
                syntactic_groups: syntactic.len(),
                f,
                p_value,
                df_within,
            }),
            Err(Error::DegenerateVariance) => log::warn!("{coefficient:?} ANOVA skipped: zero pooled variance"),
            Err(e) => return Err(e),
        }
    }

    Ok(CorrelationSummary {
        group_by: config.group_by.to_string(),
        groups: reports,
        skipped,
        kind_anova,
    })
}

fn group_report(
    group_key: GroupKey,
    kind: Option<CategoryKind>,
    xs: &[f64],
    ys: &[f64],
    config: &CorrelateConfig,
    index: u64,
) -> Result<CorrelationReport> {
    let rho = correlation(CorrelationKind::Spearman, xs, ys)?;
    let r = correlation(CorrelationKind::Pearson, xs, ys)?;
    let permuted = |kind| -> Result<Option<f64>> {
        config
            .permutations
            .map(|n| permutation_p(kind, xs, ys, n, config.seed.wrapping_add(index)))
            .transpose()
    };
    Ok(CorrelationReport {
        group_key,
        kind,
        n: xs.len(),
        spearman_rho: rho.coefficient,
        pearson_r: r.coefficient,
        p_spearman: rho.p_value,
        p_pearson: r.p_value,
        p_spearman_permutation: permuted(CorrelationKind::Spearman)?,
        p_pearson_permutation: permuted(CorrelationKind::Pearson)?,
    })
}
