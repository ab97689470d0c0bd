//! Building row-parallel multilingual analogy corpora from monolingual
//! analogy sets and bilingual dictionaries.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analogy::{AnalogyCategory, AnalogyCorpus, CategoryKind, WordPair};
use crate::error::{Error, Result};
use crate::linear_map::BilingualDictionary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonolingualCategory {
    pub kind: CategoryKind,
    pub pairs: Vec<WordPair>,
}

/// Analogy categories for a single language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonolingualAnalogySet {
    pub language: String,
    pub categories: IndexMap<String, MonolingualCategory>,
}

impl MonolingualAnalogySet {
    pub fn new(language: impl Into<String>) -> Self {
        MonolingualAnalogySet {
            language: language.into(),
            categories: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, kind: CategoryKind, pairs: Vec<WordPair>) -> Result<()> {
        let name = name.into();
        let mut seen = HashSet::with_capacity(pairs.len());
        if let Some(dup) = pairs.iter().find(|p| !seen.insert(*p)) {
            return Err(Error::InvalidArgument(format!(
                "category `{name}` repeats pair {dup} for `{}`",
                self.language
            )));
        }
        if self.categories.contains_key(&name) {
            return Err(Error::InvalidArgument(format!("category `{name}` defined twice")));
        }
        self.categories.insert(name, MonolingualCategory { kind, pairs });
        Ok(())
    }

    /// Takes this language's column from every category of `corpus`.
    pub fn from_corpus(corpus: &AnalogyCorpus, language: &str) -> Result<Self> {
        let mut set = MonolingualAnalogySet::new(language);
        for category in &corpus.categories {
            let pairs = category.pairs(language).ok_or_else(|| Error::MissingCategory {
                category: category.name().to_string(),
                language: language.to_string(),
            })?;
            set.insert(category.name(), category.kind(), pairs.to_vec())?;
        }
        Ok(set)
    }

    /// Reads a directory of category files that all have a `language` column.
    pub fn load_dir(dir: impl AsRef<Path>, language: &str) -> Result<Self> {
        let dir = dir.as_ref();
        Self::from_corpus(&AnalogyCorpus::load_dir(dir)?, language)
            .map_err(|e| e.context(format!("reading {} analogies from {}", language, dir.display())))
    }

    pub fn with_single_category(language: &str, name: &str, kind: CategoryKind, pairs: Vec<WordPair>) -> Result<Self> {
        let mut set = MonolingualAnalogySet::new(language);
        set.insert(name, kind, pairs)?;
        Ok(set)
    }
}

/// True for tokens that stand for more than one word.
pub fn is_multiword(token: &str) -> bool {
    token.contains(char::is_whitespace) || token.contains('_')
}

/// Every combination of dictionary translations of each pair's two words,
/// in dictionary order. Multi-word translations are discarded, so a pair
/// with an untranslatable word gets no candidates.
pub fn translate_pairs(pairs: &[WordPair], dictionary: &BilingualDictionary) -> Vec<(WordPair, Vec<WordPair>)> {
    let translations = dictionary.translations();
    pairs
        .iter()
        .map(|pair| (pair.clone(), candidates(pair, &translations)))
        .collect()
}

fn candidates(pair: &WordPair, translations: &HashMap<&str, Vec<&str>>) -> Vec<WordPair> {
    let single = |w: &str| -> Vec<&str> {
        translations
            .get(w)
            .map(|ts| ts.iter().copied().filter(|t| !is_multiword(t)).collect())
            .unwrap_or_default()
    };
    let (firsts, seconds) = (single(&pair.first), single(&pair.second));
    let mut out = Vec::with_capacity(firsts.len() * seconds.len());
    for a in &firsts {
        for b in &seconds {
            out.push(WordPair::new(a, b));
        }
    }
    out
}

/// Outcome of aligning one list of source pairs to a target list.
struct Alignment {
    translated: usize,
    /// Matched target index per source pair.
    matched: Vec<Option<usize>>,
}

/// One-to-one alignment: each source pair, in order, takes the earliest
/// unconsumed target pair equal to one of its translations.
fn align(
    sources: &[&WordPair],
    targets: &[WordPair],
    translations: &HashMap<&str, Vec<&str>>,
    category: &str,
) -> Alignment {
    let position: HashMap<&WordPair, usize> = targets.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let mut consumed = vec![false; targets.len()];
    let mut translated = 0;
    let matched = sources
        .iter()
        .map(|source| {
            let cands = candidates(source, translations);
            if !cands.is_empty() {
                translated += 1;
            }
            let mut hits: Vec<usize> = cands
                .iter()
                .filter_map(|c| position.get(c).copied())
                .filter(|&i| !consumed[i])
                .collect();
            hits.sort_unstable();
            hits.dedup();
            if hits.len() > 1 {
                debug!(
                    "{category}: {source} coincides with {} target pairs, taking {}",
                    hits.len(),
                    targets[hits[0]]
                );
            }
            let hit = hits.first().copied();
            if let Some(i) = hit {
                consumed[i] = true;
            }
            hit
        })
        .collect();
    Alignment { translated, matched }
}

fn check_direction(dictionary: &BilingualDictionary, source: &str, target: &str) -> Result<()> {
    if dictionary.source_lang != source || dictionary.target_lang != target {
        return Err(Error::InvalidArgument(format!(
            "dictionary is {}-{}, expected {source}-{target}",
            dictionary.source_lang, dictionary.target_lang
        )));
    }
    Ok(())
}

fn category_pairs<'a>(set: &'a MonolingualAnalogySet, category: &str) -> Result<&'a MonolingualCategory> {
    set.categories.get(category).ok_or_else(|| Error::MissingCategory {
        category: category.to_string(),
        language: set.language.clone(),
    })
}

/// Aligned `(source, target)` pairs for one category of two languages.
pub fn intersect_bilingual(
    source: &MonolingualAnalogySet,
    target: &MonolingualAnalogySet,
    category: &str,
    dictionary: &BilingualDictionary,
) -> Result<Vec<(WordPair, WordPair)>> {
    check_direction(dictionary, &source.language, &target.language)?;
    let src = category_pairs(source, category)?;
    let tgt = category_pairs(target, category)?;
    let sources: Vec<&WordPair> = src.pairs.iter().collect();
    let alignment = align(&sources, &tgt.pairs, &dictionary.translations(), category);
    Ok(src
        .pairs
        .iter()
        .zip(alignment.matched)
        .filter_map(|(s, m)| m.map(|i| (s.clone(), tgt.pairs[i].clone())))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageStage {
    pub language: String,
    /// Rows still alive before this language that had any translation candidate.
    pub translated: usize,
    /// Rows that found a matching pair in this language.
    pub coincided: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub name: String,
    pub kind: CategoryKind,
    pub source_pairs: usize,
    pub stages: Vec<LanguageStage>,
    pub aligned: usize,
    pub kept: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub pivot: String,
    pub languages: Vec<String>,
    pub min_pairs: usize,
    pub categories: Vec<CategoryReport>,
}

impl BuildReport {
    pub fn kept(&self) -> impl Iterator<Item = &CategoryReport> {
        self.categories.iter().filter(|c| c.kept)
    }

    pub fn dropped(&self) -> impl Iterator<Item = &CategoryReport> {
        self.categories.iter().filter(|c| !c.kept)
    }
}

/// Dictionary from `source` to `target`, inverting a `target`-`source` one if needed.
pub fn find_dictionary(
    dictionaries: &[BilingualDictionary],
    source: &str,
    target: &str,
) -> Result<BilingualDictionary> {
    if let Some(d) = dictionaries
        .iter()
        .find(|d| d.source_lang == source && d.target_lang == target)
    {
        return Ok(d.clone());
    }
    dictionaries
        .iter()
        .find(|d| d.source_lang == target && d.target_lang == source)
        .map(BilingualDictionary::inverted)
        .ok_or_else(|| Error::MissingDictionary(source.to_string(), target.to_string()))
}

/// Aligns every category of the first set with each other language in turn.
///
/// Rows are pivot pairs; a row survives a language when one of its
/// translations from the pivot coincides with an unconsumed pair of that
/// language. Categories with fewer than `min_pairs` surviving rows, or
/// missing from some language, are dropped and reported.
pub fn build_corpus(
    sets: &[MonolingualAnalogySet],
    dictionaries: &[BilingualDictionary],
    min_pairs: usize,
) -> Result<(AnalogyCorpus, BuildReport)> {
    let pivot = sets
        .first()
        .ok_or_else(|| Error::InvalidArgument("no analogy sets given".into()))?;
    let mut languages = HashSet::new();
    for set in sets {
        if !languages.insert(set.language.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "language `{}` given twice",
                set.language
            )));
        }
    }
    let links: Vec<(&MonolingualAnalogySet, BilingualDictionary)> = sets[1..]
        .iter()
        .map(|set| Ok((set, find_dictionary(dictionaries, &pivot.language, &set.language)?)))
        .collect::<Result<_>>()?;
    let translations: Vec<HashMap<&str, Vec<&str>>> = links.iter().map(|(_, d)| d.translations()).collect();

    let entries: Vec<(&String, &MonolingualCategory)> = pivot.categories.iter().collect();
    let built: Vec<(Option<AnalogyCategory>, CategoryReport)> = entries
        .par_iter()
        .map(|&(name, category)| (name, category))
        .map(|(name, category)| {
            let mut rows: Vec<Vec<WordPair>> = category.pairs.iter().map(|p| vec![p.clone()]).collect();
            let mut stages = Vec::with_capacity(links.len());
            let mut reason = None;
            for ((set, _), table) in links.iter().zip(&translations) {
                let Some(target) = set.categories.get(name) else {
                    reason = Some(format!("missing in `{}`", set.language));
                    rows.clear();
                    break;
                };
                let sources: Vec<&WordPair> = rows.iter().map(|r| &r[0]).collect();
                let alignment = align(&sources, &target.pairs, table, name);
                rows = rows
                    .into_iter()
                    .zip(alignment.matched)
                    .filter_map(|(mut row, m)| {
                        m.map(|i| {
                            row.push(target.pairs[i].clone());
                            row
                        })
                    })
                    .collect();
                stages.push(LanguageStage {
                    language: set.language.clone(),
                    translated: alignment.translated,
                    coincided: rows.len(),
                });
            }
            let aligned = rows.len();
            if reason.is_none() && aligned < min_pairs {
                reason = Some(format!("{aligned} aligned pairs, below {min_pairs}"));
            }
            let output = reason.is_none().then(|| {
                let mut by_language = IndexMap::new();
                for (k, set) in sets.iter().enumerate() {
                    by_language.insert(set.language.clone(), rows.iter().map(|r| r[k].clone()).collect());
                }
                AnalogyCategory::new(name.clone(), category.kind, by_language)
            });
            let report = CategoryReport {
                name: name.clone(),
                kind: category.kind,
                source_pairs: category.pairs.len(),
                stages,
                aligned,
                kept: output.is_some(),
                reason,
            };
            (output, report)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|(c, r)| c.transpose().map(|c| (c, r)))
        .collect::<Result<_>>()?;

    let mut categories = Vec::new();
    let mut reports = Vec::new();
    for (category, report) in built {
        categories.extend(category);
        reports.push(report);
    }
    if categories.is_empty() {
        return Err(Error::Empty(format!("no category reached {min_pairs} aligned pairs")));
    }
    let report = BuildReport {
        pivot: pivot.language.clone(),
        languages: sets.iter().map(|s| s.language.clone()).collect(),
        min_pairs,
        categories: reports,
    };
    Ok((AnalogyCorpus::new(categories), report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(list: &[(&str, &str)]) -> Vec<WordPair> {
        list.iter().map(|(a, b)| WordPair::new(a, b)).collect()
    }

    fn dict(src: &str, tgt: &str, entries: &[(&str, &str)]) -> BilingualDictionary {
        BilingualDictionary::new(src, tgt, entries.iter().map(|(a, b)| (a.to_string(), b.to_string())))
    }

    fn set(language: &str, name: &str, list: &[(&str, &str)]) -> MonolingualAnalogySet {
        MonolingualAnalogySet::with_single_category(language, name, CategoryKind::Semantic, pairs(list)).unwrap()
    }

    #[test]
    fn translate_single_entries() {
        let d = dict("en", "de", &[("paris", "paris"), ("france", "frankreich")]);
        let out = translate_pairs(&pairs(&[("paris", "france")]), &d);
        assert_eq!(out[0].1, pairs(&[("paris", "frankreich")]));
    }

    #[test]
    fn translate_cross_product_and_missing() {
        let d = dict(
            "en",
            "de",
            &[("a", "a1"), ("a", "a2"), ("b", "b1"), ("b", "b2"), ("c", "new york")],
        );
        let out = translate_pairs(&pairs(&[("a", "b"), ("a", "zzz"), ("a", "c")]), &d);
        assert_eq!(
            out[0].1,
            pairs(&[("a1", "b1"), ("a1", "b2"), ("a2", "b1"), ("a2", "b2")])
        );
        assert!(out[1].1.is_empty());
        assert!(out[2].1.is_empty(), "multi-word translations are dropped");
        assert!(is_multiword("new_york"));
    }

    #[test]
    fn intersect_order_sensitive() {
        let d = dict(
            "en",
            "de",
            &[
                ("berlin", "berlin"),
                ("germany", "deutschland"),
                ("rome", "rom"),
                ("italy", "italien"),
            ],
        );
        let en = set("en", "cap", &[("berlin", "germany"), ("rome", "italy")]);
        let de = set("de", "cap", &[("berlin", "deutschland"), ("italien", "rom")]);
        let out = intersect_bilingual(&en, &de, "cap", &d).unwrap();
        assert_eq!(
            out,
            vec![(
                WordPair::new("berlin", "germany"),
                WordPair::new("berlin", "deutschland")
            )]
        );
    }

    #[test]
    fn intersect_errors() {
        let d = dict("en", "de", &[]);
        let en = set("en", "cap", &[("a", "b")]);
        let de = set("de", "other", &[("a", "b")]);
        assert!(matches!(
            intersect_bilingual(&en, &de, "cap", &d),
            Err(Error::MissingCategory { language, .. }) if language == "de"
        ));
        assert!(matches!(
            intersect_bilingual(&de, &en, "cap", &d),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn five_pair_fixture_three_coincidences() {
        // Hand trace: p1 -> (x1, y1) present; p2 -> no entry for "b2";
        // p3 -> (x3, y3) present; p4 -> only reversed (y4, x4) present;
        // p5 -> two candidates, (x5, y5b) present.
        let d = dict(
            "en",
            "fr",
            &[
                ("a1", "x1"),
                ("b1", "y1"),
                ("a2", "x2"),
                ("a3", "x3"),
                ("b3", "y3"),
                ("a4", "x4"),
                ("b4", "y4"),
                ("a5", "x5"),
                ("b5", "y5a"),
                ("b5", "y5b"),
            ],
        );
        let en = set(
            "en",
            "c",
            &[("a1", "b1"), ("a2", "b2"), ("a3", "b3"), ("a4", "b4"), ("a5", "b5")],
        );
        let fr = set(
            "fr",
            "c",
            &[("x3", "y3"), ("y4", "x4"), ("x5", "y5b"), ("x1", "y1"), ("q", "r")],
        );
        let out = intersect_bilingual(&en, &fr, "c", &d).unwrap();
        let got: Vec<(&str, &str)> = out.iter().map(|(s, t)| (s.first.as_str(), t.second.as_str())).collect();
        assert_eq!(got, vec![("a1", "y1"), ("a3", "y3"), ("a5", "y5b")]);
    }

    #[test]
    fn ambiguous_coincidence_takes_first_target_and_consumes_it() {
        let d = dict(
            "en",
            "de",
            &[("a", "x"), ("a", "z"), ("b", "y"), ("c", "x"), ("d", "y")],
        );
        let en = set("en", "c", &[("a", "b"), ("c", "d")]);
        let de = set("de", "c", &[("z", "y"), ("x", "y")]);
        let out = intersect_bilingual(&en, &de, "c", &d).unwrap();
        assert_eq!(out[0].1, WordPair::new("z", "y"));
        assert_eq!(out[1].1, WordPair::new("x", "y"));
    }

    #[test]
    fn one_language_is_identity() {
        let list: Vec<(String, String)> = (0..31).map(|i| (format!("a{i}"), format!("b{i}"))).collect();
        let refs: Vec<(&str, &str)> = list.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let en = set("en", "c", &refs);
        let (corpus, report) = build_corpus(std::slice::from_ref(&en), &[], 30).unwrap();
        assert_eq!(
            corpus.categories[0].pairs("en").unwrap(),
            en.categories["c"].pairs.as_slice()
        );
        assert_eq!(report.categories[0].aligned, 31);
        assert!(report.categories[0].kept);
    }

    /// Three languages with `n` parallel pairs, plus noise pairs that only
    /// some languages share.
    fn three_languages(n: usize) -> (Vec<MonolingualAnalogySet>, Vec<BilingualDictionary>) {
        let mut en = Vec::new();
        let mut de = Vec::new();
        let mut fr = Vec::new();
        let mut en_de = Vec::new();
        let mut fr_en = Vec::new();
        for i in 0..n {
            en.push((format!("e{i}"), format!("f{i}")));
            de.push((format!("d{i}"), format!("g{i}")));
            fr.push((format!("p{i}"), format!("q{i}")));
            en_de.push((format!("e{i}"), format!("d{i}")));
            en_de.push((format!("f{i}"), format!("g{i}")));
            fr_en.push((format!("p{i}"), format!("e{i}")));
            fr_en.push((format!("q{i}"), format!("f{i}")));
        }
        // Translates into German but has no French counterpart.
        en.push(("e_only".into(), "x".into()));
        en.push(("eonly".into(), "x".into()));
        en_de.push(("eonly".into(), "donly".into()));
        en_de.push(("x".into(), "dx".into()));
        de.push(("donly".into(), "dx".into()));
        // French pair with no English source.
        fr.push(("stray".into(), "pair".into()));
        let mk = |lang: &str, list: Vec<(String, String)>| {
            let refs: Vec<(&str, &str)> = list.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
            set(lang, "cat", &refs)
        };
        let to_dict = |s: &str, t: &str, list: Vec<(String, String)>| BilingualDictionary::new(s, t, list);
        (
            vec![mk("en", en), mk("de", de), mk("fr", fr)],
            vec![to_dict("en", "de", en_de), to_dict("fr", "en", fr_en)],
        )
    }

    #[test]
    fn three_language_fixture() {
        let (sets, dicts) = three_languages(4);
        let (corpus, report) = build_corpus(&sets, &dicts, 1).unwrap();
        let cat = &corpus.categories[0];
        assert_eq!(cat.len(), 4);
        assert_eq!(cat.languages().collect::<Vec<_>>(), vec!["en", "de", "fr"]);
        for i in 0..4 {
            assert_eq!(
                cat.pairs("de").unwrap()[i],
                WordPair::new(format!("d{i}"), format!("g{i}"))
            );
            assert_eq!(
                cat.pairs("fr").unwrap()[i],
                WordPair::new(format!("p{i}"), format!("q{i}"))
            );
        }
        let r = &report.categories[0];
        assert_eq!(r.source_pairs, 6);
        assert_eq!(
            r.stages[0],
            LanguageStage {
                language: "de".into(),
                translated: 5,
                coincided: 5
            }
        );
        assert_eq!(
            r.stages[1],
            LanguageStage {
                language: "fr".into(),
                translated: 4,
                coincided: 4
            }
        );
        assert_eq!(r.aligned, 4);
    }

    #[test]
    fn below_threshold_is_dropped_and_reported() {
        let (mut sets, dicts) = three_languages(29);
        let (extra, _) = three_languages(30);
        for (s, e) in sets.iter_mut().zip(&extra) {
            s.insert("big", CategoryKind::Syntactic, e.categories["cat"].pairs.clone())
                .unwrap();
        }
        let (_, dicts30) = three_languages(30);
        let merged: Vec<BilingualDictionary> = dicts
            .iter()
            .zip(&dicts30)
            .map(|(a, b)| {
                BilingualDictionary::new(
                    &a.source_lang,
                    &a.target_lang,
                    a.entries().iter().chain(b.entries()).cloned(),
                )
            })
            .collect();
        let (corpus, report) = build_corpus(&sets, &merged, 30).unwrap();
        assert_eq!(corpus.categories.len(), 1);
        assert_eq!(corpus.categories[0].name(), "big");
        let dropped: Vec<_> = report.dropped().collect();
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].name, "cat");
        assert_eq!(dropped[0].aligned, 29);
        assert!(dropped[0].reason.as_deref().unwrap().contains("29"));
    }

    #[test]
    fn errors_and_missing_categories() {
        let (sets, dicts) = three_languages(3);
        assert!(
            matches!(build_corpus(&sets, &dicts[..1], 1), Err(Error::MissingDictionary(a, b)) if a == "en" && b == "fr")
        );
        assert!(matches!(build_corpus(&sets, &dicts, 10), Err(Error::Empty(_))));
        assert!(build_corpus(&[], &dicts, 1).is_err());
        let twice = vec![sets[0].clone(), sets[0].clone()];
        assert!(matches!(
            build_corpus(&twice, &dicts, 1),
            Err(Error::InvalidArgument(_))
        ));

        let mut sets = sets;
        sets[0]
            .insert("lonely", CategoryKind::Semantic, pairs(&[("e0", "f0")]))
            .unwrap();
        let (_, report) = build_corpus(&sets, &dicts, 1).unwrap();
        let lonely = report.categories.iter().find(|c| c.name == "lonely").unwrap();
        assert!(!lonely.kept);
        assert!(lonely.reason.as_deref().unwrap().contains("missing"));
    }

    #[test]
    fn stages_never_increase() {
        let (sets, dicts) = three_languages(7);
        let (_, report) = build_corpus(&sets, &dicts, 1).unwrap();
        for c in &report.categories {
            let mut last = c.source_pairs;
            for s in &c.stages {
                assert!(s.translated <= last && s.coincided <= s.translated);
                last = s.coincided;
            }
            assert_eq!(c.aligned, last);
        }
    }

    #[test]
    fn input_order_only_permutes_rows() {
        let (sets, dicts) = three_languages(6);
        let (a, _) = build_corpus(&sets, &dicts, 1).unwrap();
        let mut shuffled = sets.clone();
        for s in &mut shuffled {
            s.categories["cat"].pairs.reverse();
        }
        let (b, _) = build_corpus(&shuffled, &dicts, 1).unwrap();
        let rows = |c: &AnalogyCorpus| {
            let cat = &c.categories[0];
            let mut v: Vec<Vec<WordPair>> = (0..cat.len())
                .map(|i| cat.languages().map(|l| cat.pairs(l).unwrap()[i].clone()).collect())
                .collect();
            v.sort();
            v
        };
        assert_eq!(rows(&a), rows(&b));
    }
}
