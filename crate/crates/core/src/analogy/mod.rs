//! Analogy categories, the tab-separated corpus format, question generation
//! and the four analogy solvers.

mod eval;
mod lrcos;
mod questions;
mod solvers;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::embedding::normalize_token;
use crate::error::{Error, Result};

pub use eval::{category_accuracy, EvalConfig, QuestionOutcome, SolverKind, SolverResult};
pub use lrcos::{solve_lrcos, LogisticRegression, LrCosConfig, LrCosSolver};
pub use questions::{generate_questions, question_count, AnalogyQuestion, GoldRef};
pub use solvers::{
    solve_3cosadd, solve_3cosmul, solve_pairdistance, AnalogySpace, CandidatePolicy, Candidates, COSMUL_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryKind {
    Semantic,
    Syntactic,
}

impl fmt::Display for CategoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CategoryKind::Semantic => "semantic",
            CategoryKind::Syntactic => "syntactic",
        })
    }
}

impl FromStr for CategoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semantic" => Ok(CategoryKind::Semantic),
            "syntactic" => Ok(CategoryKind::Syntactic),
            other => Err(Error::InvalidArgument(format!(
                "category kind must be `semantic` or `syntactic`, got `{other}`"
            ))),
        }
    }
}

/// Which element of a word pair a word occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::First => 0,
            Side::Second => 1,
        }
    }
}

/// An ordered word pair `(first, second)` such as `(paris, france)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WordPair {
    pub first: String,
    pub second: String,
}

impl WordPair {
    pub fn new(first: impl AsRef<str>, second: impl AsRef<str>) -> Self {
        WordPair {
            first: normalize_token(first.as_ref()),
            second: normalize_token(second.as_ref()),
        }
    }

    pub fn get(&self, side: Side) -> &str {
        match side {
            Side::First => &self.first,
            Side::Second => &self.second,
        }
    }
}

impl fmt::Display for WordPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.first, self.second)
    }
}

/// One relation (e.g. capital-country) with row-aligned pairs per language.
///
/// Row `i` of every language refers to the same concept pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyCategory {
    name: String,
    kind: CategoryKind,
    pairs_by_language: IndexMap<String, Vec<WordPair>>,
}

impl AnalogyCategory {
    pub fn new(
        name: impl Into<String>,
        kind: CategoryKind,
        pairs_by_language: IndexMap<String, Vec<WordPair>>,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid category name `{name}`")));
        }
        let mut rows = None;
        for (language, pairs) in &pairs_by_language {
            match rows {
                None => rows = Some(pairs.len()),
                Some(n) if n != pairs.len() => {
                    return Err(Error::InvalidArgument(format!(
                        "category `{name}`: language `{language}` has {} pairs, expected {n}",
                        pairs.len()
                    )))
                }
                _ => {}
            }
            let mut seen = std::collections::HashSet::with_capacity(pairs.len());
            for pair in pairs {
                if !seen.insert(pair) {
                    return Err(Error::InvalidArgument(format!(
                        "category `{name}`: duplicate pair {pair} for `{language}`"
                    )));
                }
            }
        }
        Ok(AnalogyCategory {
            name,
            kind,
            pairs_by_language,
        })
    }

    /// Single-language category.
    pub fn monolingual(
        name: impl Into<String>,
        kind: CategoryKind,
        language: impl Into<String>,
        pairs: Vec<WordPair>,
    ) -> Result<Self> {
        let mut map = IndexMap::new();
        map.insert(language.into(), pairs);
        AnalogyCategory::new(name, kind, map)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> CategoryKind {
        self.kind
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.pairs_by_language.keys().map(String::as_str)
    }

    pub fn has_language(&self, language: &str) -> bool {
        self.pairs_by_language.contains_key(language)
    }

    pub fn pairs(&self, language: &str) -> Option<&[WordPair]> {
        self.pairs_by_language.get(language).map(Vec::as_slice)
    }

    pub fn pairs_by_language(&self) -> &IndexMap<String, Vec<WordPair>> {
        &self.pairs_by_language
    }

    /// Number of aligned rows.
    pub fn len(&self) -> usize {
        self.pairs_by_language.values().next().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses the tab-separated category format.
    pub fn read(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let mut next_line = || -> Result<Option<(usize, String)>> {
            for (i, line) in lines.by_ref() {
                let line = line.map_err(|e| Error::io(path, e))?;
                let line = line.trim_end_matches(['\r', '\n']).to_string();
                if !line.trim().is_empty() {
                    return Ok(Some((i + 1, line)));
                }
            }
            Ok(None)
        };

        let (line_no, header) = next_line()?.ok_or_else(|| Error::Empty(format!("{} is empty", path.display())))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "#category" {
            return Err(Error::parse(
                path,
                line_no,
                "expected `#category <name> <semantic|syntactic>`",
            ));
        }
        let name = fields[1].to_string();
        let kind: CategoryKind = fields[2]
            .parse()
            .map_err(|e: Error| Error::parse(path, line_no, e.to_string()))?;

        let (line_no, langs) =
            next_line()?.ok_or_else(|| Error::parse(path, line_no + 1, "missing language header line"))?;
        let languages: Vec<String> = langs.split('\t').map(|l| l.trim().to_string()).collect();
        if languages.iter().any(String::is_empty) {
            return Err(Error::parse(path, line_no, "empty language code"));
        }

        let mut columns: Vec<Vec<WordPair>> = vec![Vec::new(); languages.len()];
        while let Some((line_no, row)) = next_line()? {
            let cells: Vec<&str> = row.split('\t').collect();
            if cells.len() != languages.len() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {} cells, found {}", languages.len(), cells.len()),
                ));
            }
            for (column, cell) in columns.iter_mut().zip(cells) {
                let (a, b) = cell
                    .trim()
                    .split_once('/')
                    .filter(|(a, b)| !a.is_empty() && !b.is_empty())
                    .ok_or_else(|| Error::parse(path, line_no, format!("cell `{cell}` is not `a/b`")))?;
                column.push(WordPair::new(a, b));
            }
        }
        let map: IndexMap<String, Vec<WordPair>> = languages.into_iter().zip(columns).collect();
        AnalogyCategory::new(name, kind, map).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "#category {} {}", self.name, self.kind)?;
        let langs: Vec<&str> = self.languages().collect();
        writeln!(out, "{}", langs.join("\t"))?;
        for row in 0..self.len() {
            let cells: Vec<String> = self
                .pairs_by_language
                .values()
                .map(|pairs| pairs[row].to_string())
                .collect();
            writeln!(out, "{}", cells.join("\t"))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        AnalogyCategory::read(BufReader::new(file), path)
    }
}

/// A set of categories, stored on disk as one `<name>.tsv` file per category.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalogyCorpus {
    pub categories: Vec<AnalogyCategory>,
}

impl AnalogyCorpus {
    pub fn new(categories: Vec<AnalogyCategory>) -> Self {
        AnalogyCorpus { categories }
    }

    pub fn get(&self, name: &str) -> Option<&AnalogyCategory> {
        self.categories.iter().find(|c| c.name() == name)
    }

    /// Reads every `*.tsv` file in `dir`, sorted by file name.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "tsv"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Empty(format!("no .tsv category files in {}", dir.display())));
        }
        let categories = paths.iter().map(AnalogyCategory::load).collect::<Result<Vec<_>>>()?;
        let mut names = std::collections::HashSet::new();
        for c in &categories {
            if !names.insert(c.name()) {
                return Err(Error::InvalidArgument(format!(
                    "category `{}` defined twice in {}",
                    c.name(),
                    dir.display()
                )));
            }
        }
        Ok(AnalogyCorpus { categories })
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for category in &self.categories {
            let path = dir.join(format!("{}.tsv", category.name()));
            let mut buf = Vec::new();
            category.write(&mut buf).map_err(|e| Error::io(&path, e))?;
            fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read(text: &str) -> Result<AnalogyCategory> {
        AnalogyCategory::read(Cursor::new(text), Path::new("cat.tsv"))
    }

    #[test]
    fn reads_and_writes_category() {
        let text =
            "#category CAP semantic\nen\tde\nparis/france\tparis/frankreich\nberlin/germany\tberlin/deutschland\n";
        let cat = read(text).unwrap();
        assert_eq!(cat.name(), "CAP");
        assert_eq!(cat.kind(), CategoryKind::Semantic);
        assert_eq!(cat.len(), 2);
        assert_eq!(cat.pairs("de").unwrap()[1], WordPair::new("berlin", "deutschland"));
        let mut out = Vec::new();
        cat.write(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            read("#cat CAP semantic\nen\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read("#category CAP both\nen\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read("#category CAP semantic\nen\tde\na/b\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            read("#category CAP semantic\nen\nab\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        let dup = read("#category CAP semantic\nen\na/b\na/b\n").unwrap_err();
        assert!(matches!(dup.root(), Error::InvalidArgument(_)));
    }

    #[test]
    fn unequal_rows_rejected() {
        let mut map = IndexMap::new();
        map.insert("en".to_string(), vec![WordPair::new("a", "b")]);
        map.insert("de".to_string(), vec![]);
        assert!(AnalogyCategory::new("X", CategoryKind::Semantic, map).is_err());
    }

    #[test]
    fn corpus_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cat = AnalogyCategory::monolingual(
            "G-PL",
            CategoryKind::Syntactic,
            "en",
            vec![WordPair::new("cat", "cats"), WordPair::new("dog", "dogs")],
        )
        .unwrap();
        let corpus = AnalogyCorpus::new(vec![cat]);
        corpus.write_dir(dir.path()).unwrap();
        assert_eq!(AnalogyCorpus::load_dir(dir.path()).unwrap(), corpus);
    }
}
