use std::collections::HashSet;
use std::fs;
use std::path::Path;

use anlgmap_core::analogy::{category_accuracy, AnalogyCorpus, CategoryKind, EvalConfig, LrCosConfig, SolverKind};
use anlgmap_core::embedding::write_text_vectors;
use anlgmap_core::indicators::{
    build_indicator_grid, correlate, load_csv, write_csv, CorrelateConfig, CorrelationSummary, GridConfig,
    IndicatorRecord,
};
use anlgmap_core::linear_map::{build_aligned, fit_linear_closed, fit_linear_gd, BilingualDictionary, GdConfig};
use anlgmap_core::stats::{s_pae, Correlation, CorrelationKind};
use anlgmap_core::synth::{
    gen_mapped_pair, score_pair, shuffled_control, theorem_sweep, Distortion, DistortionFamily, SweepConfig, SweepRow,
    SynthSpec, SOURCE_LANGUAGE, TARGET_LANGUAGE,
};
use anlgmap_core::transport::{verify_best_pairing, CostKind};
use anlgmap_core::xanlg::{build_corpus, BuildReport, MonolingualAnalogySet};
use anlgmap_core::{Embedding, Error};
use anyhow::{Context, Result};
use indexmap::IndexMap;
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::inputs::{
    load_dictionaries, load_embedding, require_dir, require_distinct_languages, require_file, usage, LangPath,
};
use crate::report::{sidecar, to_json, write_bytes, write_json};
use crate::{
    AnalogyEvalArgs, BuildXanlgArgs, Cli, Command, CorrelateArgs, FitMapArgs, Format, IndicatorsArgs, SynthArgs,
    VerifyPaeArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::FitMap(args) => fit_map(cli, args),
        Command::AnalogyEval(args) => analogy_eval(cli, args),
        Command::Indicators(args) => indicators(cli, args),
        Command::Correlate(args) => correlate_grid(cli, args),
        Command::BuildXanlg(args) => build_xanlg(cli, args),
        Command::VerifyPae(args) => verify_pae(cli, args),
        Command::Synth(args) => synth(cli, args),
    }
}

fn lrcos_config(cli: &Cli) -> LrCosConfig {
    LrCosConfig {
        seed: cli.global.seed.unwrap_or_default(),
        ..LrCosConfig::default()
    }
}

fn load_all(specs: &[LangPath], limit: Option<usize>) -> Result<IndexMap<String, Embedding>> {
    let loaded: Vec<Embedding> = specs
        .par_iter()
        .map(|s| load_embedding(s, limit))
        .collect::<Result<_>>()?;
    Ok(specs.iter().map(|s| s.lang.clone()).zip(loaded).collect())
}

#[derive(Serialize)]
struct FitMapResult {
    source_lang: String,
    target_lang: String,
    dictionary_entries: usize,
    aligned_rows: usize,
    method: &'static str,
    s_lmp: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn fit_map(cli: &Cli, args: &FitMapArgs) -> Result<()> {
    require_file(&args.emb_x.path)?;
    require_file(&args.emb_y.path)?;
    if let Some(dict) = &args.dict {
        require_file(dict)?;
    }
    if let Some(dir) = &args.analogy {
        require_dir(dir)?;
    }
    if args.dict.is_none() && args.analogy.is_none() {
        return Err(usage("fit-map needs --dict, or --analogy with --category"));
    }
    if args.emb_x.lang == args.emb_y.lang {
        return Err(usage("--emb-x and --emb-y must name different languages"));
    }

    let (x, y) = rayon::join(
        || load_embedding(&args.emb_x, args.limit),
        || load_embedding(&args.emb_y, args.limit),
    );
    let (x, y) = (x?, y?);
    let (lx, ly) = (args.emb_x.lang.as_str(), args.emb_y.lang.as_str());

    let category = match (&args.analogy, &args.category) {
        (Some(dir), Some(name)) => {
            let corpus = AnalogyCorpus::load_dir(dir)?;
            let category = corpus
                .get(name)
                .cloned()
                .ok_or_else(|| usage(format!("no category `{name}` in {}", dir.display())))?;
            Some(category)
        }
        _ => None,
    };
    let (dictionary, filter) = match (&args.dict, &category) {
        (Some(path), None) => (BilingualDictionary::load_muse(path, lx, ly)?, None),
        (Some(path), Some(cat)) => {
            let mut words = HashSet::new();
            for lang in [lx, ly] {
                let pairs = cat.pairs(lang).ok_or_else(|| Error::MissingCategory {
                    category: cat.name().to_string(),
                    language: lang.to_string(),
                })?;
                words.extend(pairs.iter().flat_map(|p| [p.first.clone(), p.second.clone()]));
            }
            (BilingualDictionary::load_muse(path, lx, ly)?, Some(words))
        }
        (None, Some(cat)) => (BilingualDictionary::from_category(cat, lx, ly)?, None),
        (None, None) => unreachable!("checked above"),
    };
    let aligned = build_aligned(&x, &y, &dictionary, filter.as_ref())?;
    log::info!("fitting {lx}->{ly} on {} rows", aligned.rows());
    let (fit, method) = if args.closed_form {
        (fit_linear_closed(&aligned)?, "closed_form")
    } else {
        let gd = GdConfig {
            max_iterations: args.max_iterations.unwrap_or(GdConfig::default().max_iterations),
            ..GdConfig::default()
        };
        (fit_linear_gd(&aligned, &gd)?, "gradient_descent")
    };
    if !fit.converged {
        log::warn!("gradient descent stopped at the iteration cap");
    }
    let result = FitMapResult {
        source_lang: lx.to_string(),
        target_lang: ly.to_string(),
        dictionary_entries: dictionary.len(),
        aligned_rows: aligned.rows(),
        method,
        s_lmp: fit.s_lmp,
        residual: fit.residual,
        iterations: fit.iterations,
        converged: fit.converged,
    };
    write_json(&args.report, cli, &result)
}

#[derive(Serialize)]
struct EvalRow {
    language: String,
    category: String,
    kind: CategoryKind,
    solver: SolverKind,
    accuracy: f64,
    answered: usize,
    correct: usize,
    skipped_oov: usize,
}

#[derive(Serialize)]
struct Skipped {
    language: String,
    category: String,
    reason: String,
}

#[derive(Serialize)]
struct EvalResult {
    rows: Vec<EvalRow>,
    skipped: Vec<Skipped>,
}

fn analogy_eval(cli: &Cli, args: &AnalogyEvalArgs) -> Result<()> {
    for e in &args.emb {
        require_file(&e.path)?;
    }
    require_dir(&args.analogy)?;
    require_distinct_languages(args.emb.iter().map(|e| e.lang.as_str()))?;

    let corpus = AnalogyCorpus::load_dir(&args.analogy)?;
    for name in &args.category {
        if corpus.get(name).is_none() {
            return Err(usage(format!("no category `{name}` in {}", args.analogy.display())));
        }
    }
    let embeddings = load_all(&args.emb, args.limit)?;
    let config = EvalConfig {
        lrcos: LrCosConfig {
            leave_one_out: !args.include_gold,
            ..lrcos_config(cli)
        },
        ..EvalConfig::with_solver(args.solver)
    };

    let jobs: Vec<(&Embedding, &anlgmap_core::analogy::AnalogyCategory)> = embeddings
        .values()
        .flat_map(|emb| {
            corpus
                .categories
                .iter()
                .filter(|c| args.category.is_empty() || args.category.iter().any(|n| n == c.name()))
                .filter(move |c| c.has_language(emb.language()))
                .map(move |c| (emb, c))
        })
        .collect();
    let outcomes: Vec<Result<EvalRow, Skipped>> = jobs
        .par_iter()
        .map(|&(emb, category)| {
            log::info!("{} on `{}`", emb.language(), category.name());
            match category_accuracy(emb, category, &config) {
                Ok(r) => Ok(Ok(EvalRow {
                    language: emb.language().to_string(),
                    category: category.name().to_string(),
                    kind: category.kind(),
                    solver: args.solver,
                    accuracy: r.accuracy,
                    answered: r.answered,
                    correct: r.correct,
                    skipped_oov: r.skipped_oov,
                })),
                Err(e) if matches!(e.root(), Error::NoAnswerableQuestions(_) | Error::TooFewPairs { .. }) => {
                    log::warn!("{} on `{}`: {e}", emb.language(), category.name());
                    Ok(Err(Skipped {
                        language: emb.language().to_string(),
                        category: category.name().to_string(),
                        reason: e.to_string(),
                    }))
                }
                Err(e) => Err(e.context(format!("{} on `{}`", emb.language(), category.name()))),
            }
        })
        .collect::<Result<_, Error>>()?;
    let mut result = EvalResult {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for outcome in outcomes {
        match outcome {
            Ok(row) => result.rows.push(row),
            Err(skip) => result.skipped.push(skip),
        }
    }
    write_json(&args.report, cli, &result)
}

#[derive(Serialize)]
struct GridRun<'a> {
    records: usize,
    categories: Vec<&'a str>,
    languages: Vec<&'a str>,
}

#[derive(Serialize)]
struct GridReport<'a> {
    records: &'a [IndicatorRecord],
    correlation: Option<CorrelationSummary>,
}

fn indicators(cli: &Cli, args: &IndicatorsArgs) -> Result<()> {
    if args.emb.len() < 2 {
        return Err(usage("indicators needs at least two --emb languages"));
    }
    for e in &args.emb {
        require_file(&e.path)?;
    }
    for d in &args.dict {
        require_file(&d.path)?;
    }
    require_dir(&args.analogy)?;
    require_distinct_languages(args.emb.iter().map(|e| e.lang.as_str()))?;

    let corpus = AnalogyCorpus::load_dir(&args.analogy)?;
    let dictionaries = load_dictionaries(&args.dict)?;
    let embeddings = load_all(&args.emb, args.limit)?;
    let config = GridConfig {
        eval: EvalConfig {
            lrcos: lrcos_config(cli),
            ..EvalConfig::with_solver(args.solver)
        },
        gd: GdConfig::default(),
        closed_form: args.closed_form,
        dictionaries,
    };
    log::info!(
        "building grid: {} languages, {} categories",
        embeddings.len(),
        corpus.categories.len()
    );
    let records = build_indicator_grid(&embeddings, &corpus, &args.series, &config)?;

    match cli.global.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_csv(&records, &mut buf)?;
            write_bytes(&args.out, &buf)?;
            let run = GridRun {
                records: records.len(),
                categories: corpus.categories.iter().map(|c| c.name()).collect(),
                languages: embeddings.keys().map(String::as_str).collect(),
            };
            write_json(&sidecar(&args.out), cli, &run)?;
        }
        Format::Json => write_json(&args.out, cli, &records)?,
    }
    if let Some(path) = &args.report {
        let correlation = match correlate(&records, &CorrelateConfig::default()) {
            Ok(summary) => Some(summary),
            Err(e) => {
                log::warn!("no correlation in report: {e}");
                None
            }
        };
        let report = GridReport {
            records: &records,
            correlation,
        };
        write_json(path, cli, &report)?;
    }
    Ok(())
}

fn correlate_grid(cli: &Cli, args: &CorrelateArgs) -> Result<()> {
    require_file(&args.grid)?;
    if args.permute == Some(0) {
        return Err(usage("--permute needs at least one shuffle"));
    }
    let records = load_csv(&args.grid)?;
    let config = CorrelateConfig {
        group_by: args.group_by,
        permutations: args.permute,
        seed: cli.global.seed.unwrap_or_default(),
    };
    let summary = correlate(&records, &config)?;
    println!(
        "{:<28} {:>4} {:>8} {:>10} {:>8} {:>10}",
        "group", "n", "rho", "p", "r", "p"
    );
    for g in &summary.groups {
        println!(
            "{:<28} {:>4} {:>8.4} {:>10.3e} {:>8.4} {:>10.3e}",
            g.group_key.to_string(),
            g.n,
            g.spearman_rho,
            g.p_spearman,
            g.pearson_r,
            g.p_pearson
        );
    }
    for s in &summary.skipped {
        println!("{:<28} {:>4} skipped: {}", s.group_key.to_string(), s.n, s.reason);
    }
    for a in &summary.kind_anova {
        println!(
            "anova {:?} semantic({}) vs syntactic({}): F = {:.4}, p = {:.3e}",
            a.coefficient, a.semantic_groups, a.syntactic_groups, a.f, a.p_value
        );
    }
    if let Some(path) = &args.report {
        write_json(path, cli, &summary)?;
    }
    Ok(())
}

fn build_xanlg(cli: &Cli, args: &BuildXanlgArgs) -> Result<()> {
    if args.set.len() < 2 {
        return Err(usage("build-xanlg needs at least two --set languages"));
    }
    for s in &args.set {
        require_dir(&s.path)?;
    }
    for d in &args.dict {
        require_file(&d.path)?;
    }
    require_distinct_languages(args.set.iter().map(|s| s.lang.as_str()))?;

    let sets = args
        .set
        .iter()
        .map(|s| MonolingualAnalogySet::load_dir(&s.path, &s.lang))
        .collect::<Result<Vec<_>, _>>()?;
    let dictionaries = load_dictionaries(&args.dict)?;
    let (corpus, report): (AnalogyCorpus, BuildReport) = build_corpus(&sets, &dictionaries, args.min_pairs)?;
    for c in &report.categories {
        match &c.reason {
            None => log::info!("kept `{}` with {} pairs", c.name, c.aligned),
            Some(reason) => log::info!("dropped `{}`: {reason}", c.name),
        }
    }
    corpus.write_dir(&args.out)?;
    let path = args
        .report
        .clone()
        .unwrap_or_else(|| args.out.join("build_report.json"));
    write_json(&path, cli, &report)
}

#[derive(Serialize)]
struct RankedWords {
    pairs: Vec<(String, String)>,
    cost: f64,
    is_reference: bool,
}

#[derive(Serialize)]
struct CostVerdict {
    cost_kind: CostKind,
    is_optimal: bool,
    reference_cost: f64,
    best_other_cost: Option<f64>,
    ties: usize,
    matchings: usize,
    cheapest: Vec<RankedWords>,
}

#[derive(Serialize)]
struct VerifyResult {
    language: String,
    category: String,
    pairs_used: Vec<(String, String)>,
    pairs_available: usize,
    verdicts: Vec<CostVerdict>,
}

fn verify_pae(cli: &Cli, args: &VerifyPaeArgs) -> Result<()> {
    require_file(&args.emb.path)?;
    require_dir(&args.analogy)?;
    if args.max_pairs.is_some_and(|k| 2 * k > args.cap) {
        return Err(usage(format!(
            "--max-pairs {} needs {} vectors, above --cap {}",
            args.max_pairs.unwrap_or_default(),
            2 * args.max_pairs.unwrap_or_default(),
            args.cap
        )));
    }
    let corpus = AnalogyCorpus::load_dir(&args.analogy)?;
    let category = corpus
        .get(&args.category)
        .ok_or_else(|| usage(format!("no category `{}` in {}", args.category, args.analogy.display())))?;
    let lang = args.emb.lang.as_str();
    let pairs = category.pairs(lang).ok_or_else(|| Error::MissingCategory {
        category: category.name().to_string(),
        language: lang.to_string(),
    })?;
    let emb = load_embedding(&args.emb, args.limit)?;

    let covered: Vec<_> = pairs
        .iter()
        .filter(|p| emb.contains(&p.first) && emb.contains(&p.second))
        .collect();
    let k = args.max_pairs.unwrap_or(args.cap / 2).min(covered.len());
    if k < 2 {
        return Err(usage(format!(
            "`{}` has {} in-vocabulary pairs; verification needs at least 2",
            category.name(),
            covered.len()
        )));
    }
    let used = &covered[..k];
    if k < covered.len() {
        log::warn!("using the first {k} of {} covered pairs", covered.len());
    }
    let rows: Vec<usize> = used
        .iter()
        .flat_map(|p| [emb.index_of(&p.first), emb.index_of(&p.second)])
        .map(|i| i.expect("covered"))
        .collect();
    let vectors: Array2<f64> = emb.matrix().select(Axis(0), &rows);
    let reference: Vec<(usize, usize)> = (0..k).map(|i| (2 * i, 2 * i + 1)).collect();
    let word = |i: usize| emb.vocab()[rows[i]].clone();

    let kinds = if args.cost.is_empty() {
        CostKind::ALL.to_vec()
    } else {
        args.cost.clone()
    };
    let mut verdicts = Vec::new();
    for kind in kinds {
        log::info!("enumerating matchings of {} vectors under {kind}", 2 * k);
        let v = verify_best_pairing(&vectors, &reference, kind, args.cap)?;
        verdicts.push(CostVerdict {
            cost_kind: kind,
            is_optimal: v.is_optimal,
            reference_cost: v.reference.cost,
            best_other_cost: v.ranked.iter().find(|r| !r.is_reference).map(|r| r.cost),
            ties: v.ties.len(),
            matchings: v.ranked.len(),
            cheapest: v
                .ranked
                .iter()
                .take(args.top)
                .map(|r| RankedWords {
                    pairs: r.pairs.iter().map(|&(a, b)| (word(a), word(b))).collect(),
                    cost: r.cost,
                    is_reference: r.is_reference,
                })
                .collect(),
        });
    }
    let result = VerifyResult {
        language: lang.to_string(),
        category: category.name().to_string(),
        pairs_used: used.iter().map(|p| (p.first.clone(), p.second.clone())).collect(),
        pairs_available: pairs.len(),
        verdicts,
    };
    write_json(&args.report, cli, &result)
}

#[derive(Serialize)]
struct SweepSummary {
    family: Option<DistortionFamily>,
    replicates: usize,
    spearman: Option<Correlation>,
    pearson: Option<Correlation>,
    control_spearman: Option<Correlation>,
}

#[derive(Serialize)]
struct SweepTable<'a> {
    summary: &'a SweepSummary,
    rows: &'a [SweepRow],
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    require_file(&args.spec)?;
    if args.replicates == 0 {
        return Err(usage("--replicates must be at least 1"));
    }
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec: SynthSpec =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.spec.display())))?;
    if let Some(seed) = cli.global.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let levels = args.sweep.as_ref().map(|s| s.levels());
    if levels.as_ref().is_some_and(|l| l.len() < 10) {
        return Err(usage("a sweep needs at least 10 grid points"));
    }
    let out = args.out.clone().unwrap_or_else(|| {
        args.spec.with_extension(match cli.global.format {
            Format::Csv => "csv",
            Format::Json => "scores.json",
        })
    });
    // two pairs leave a single positive once the gold pair is held out
    if out == args.spec {
        return Err(usage("--out would overwrite the spec file"));
    }
    let lrcos = LrCosConfig {
        leave_one_out: spec.n_pairs >= 3,
        ..lrcos_config(cli)
    };
    if !lrcos.leave_one_out {
        log::warn!(
            "only {} pairs: LRCos keeps the gold pair among its positives",
            spec.n_pairs
        );
    }
    let gd = GdConfig::default();

    let (rows, summary) = match (&args.sweep, levels) {
        (Some(sweep), Some(levels)) => {
            let config = SweepConfig {
                replicates: args.replicates,
                lrcos,
                gd,
                ..SweepConfig::new(spec.clone(), sweep.family, levels)
            };
            log::info!(
                "sweeping {} levels x {} replicates",
                config.levels.len(),
                config.replicates
            );
            let report = theorem_sweep(&config)?;
            let control = match shuffled_control(&report.rows, CorrelationKind::Spearman, spec.seed) {
                Ok(c) => Some(c),
                Err(e) if matches!(e.root(), Error::ConstantSeries) => None,
                Err(e) => return Err(e.into()),
            };
            let summary = SweepSummary {
                family: Some(report.family),
                replicates: args.replicates,
                spearman: report.spearman,
                pearson: report.pearson,
                control_spearman: control,
            };
            (report.rows, summary)
        }
        _ => {
            let base = SynthSpec {
                distortion: Distortion::None,
                ..spec.clone()
            };
            let pair = gen_mapped_pair(&base, &spec.distortion)?;
            if let Some(dir) = &args.emit {
                emit(dir, &pair.source, &pair.target, &pair.category)?;
            }
            let (s_lmp, x, y) = score_pair(&pair, &lrcos, &gd)?;
            let row = SweepRow {
                level: spec.distortion.level(),
                s_lmp,
                s_pae: s_pae(x.max(y), x.min(y))?,
                lrcos_x: x,
                lrcos_y: y,
            };
            let summary = SweepSummary {
                family: None,
                replicates: 1,
                spearman: None,
                pearson: None,
                control_spearman: None,
            };
            (vec![row], summary)
        }
    };

    match cli.global.format {
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                writer.serialize(row)?;
            }
            let bytes = writer.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
            write_bytes(&out, &bytes)?;
            write_json(&sidecar(&out), cli, &summary)?;
        }
        Format::Json => {
            let table = SweepTable {
                summary: &summary,
                rows: &rows,
            };
            write_bytes(&out, to_json(cli, &table)?.as_bytes())?;
        }
    }
    Ok(())
}

fn emit(
    dir: &Path,
    source: &Embedding,
    target: &Embedding,
    category: &anlgmap_core::analogy::AnalogyCategory,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (emb, lang) in [(source, SOURCE_LANGUAGE), (target, TARGET_LANGUAGE)] {
        let mut buf = Vec::new();
        write_text_vectors(emb, &mut buf)?;
        write_bytes(&dir.join(format!("{lang}.vec")), &buf)?;
    }
    AnalogyCorpus::new(vec![category.clone()]).write_dir(dir.join("analogy"))?;
    Ok(())
}
