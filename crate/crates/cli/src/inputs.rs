//! Flag value types, preflight checks and input loading.

use std::fmt;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anlgmap_core::embedding::load_text_vectors;
use anlgmap_core::linear_map::BilingualDictionary;
use anlgmap_core::synth::{grid, DistortionFamily};
use anlgmap_core::Embedding;
use anyhow::{Context, Result};
use ndarray::Array2;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "ANLGMAP_CACHE";

/// A problem with the invocation itself, found before any work starts.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// `lang=path`.
#[derive(Debug, Clone, PartialEq)]
pub struct LangPath {
    pub lang: String,
    pub path: PathBuf,
}

impl FromStr for LangPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('=') {
            Some((lang, path)) if !lang.is_empty() && !path.is_empty() => Ok(LangPath {
                lang: lang.to_string(),
                path: PathBuf::from(path),
            }),
            _ => Err(format!("expected `lang=path`, got `{s}`")),
        }
    }
}

impl fmt::Display for LangPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.lang, self.path.display())
    }
}

impl Serialize for LangPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `l1-l2=path`.
#[derive(Debug, Clone, PartialEq)]
pub struct DictSpec {
    pub source: String,
    pub target: String,
    pub path: PathBuf,
}

impl FromStr for DictSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `l1-l2=path`, got `{s}`");
        let (langs, path) = s.split_once('=').ok_or_else(bad)?;
        let (source, target) = langs.split_once('-').ok_or_else(bad)?;
        if source.is_empty() || target.is_empty() || path.is_empty() {
            return Err(bad());
        }
        Ok(DictSpec {
            source: source.to_string(),
            target: target.to_string(),
            path: PathBuf::from(path),
        })
    }
}

impl fmt::Display for DictSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}={}", self.source, self.target, self.path.display())
    }
}

impl Serialize for DictSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `family=start:end:step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub family: DistortionFamily,
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl SweepSpec {
    pub fn levels(&self) -> Vec<f64> {
        grid(self.start, self.end, self.step).expect("checked on parse")
    }
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `family=start:end:step`, got `{s}`");
        let (family, range) = s.split_once('=').ok_or_else(bad)?;
        let family: DistortionFamily = family.parse().map_err(|e| format!("{e}"))?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, end, step] = parts[..] else {
            return Err(bad());
        };
        grid(start, end, step).map_err(|e| e.to_string())?;
        Ok(SweepSpec {
            family,
            start,
            end,
            step,
        })
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.family, self.start, self.end, self.step)
    }
}

impl Serialize for SweepSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("no such file: {}", path.display())));
    }
    Ok(())
}

pub fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(usage(format!("no such directory: {}", path.display())));
    }
    Ok(())
}

pub fn require_distinct_languages<'a>(langs: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for lang in langs {
        if !seen.insert(lang) {
            return Err(usage(format!("language `{lang}` given twice")));
        }
    }
    Ok(())
}

/// Loads a text vector file, through the parsed-embedding cache when
/// `ANLGMAP_CACHE` names a directory.
pub fn load_embedding(spec: &LangPath, limit: Option<usize>) -> Result<Embedding> {
    let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let Some(dir) = cache else {
        return load_fresh(spec, limit);
    };
    let bytes = fs::read(&spec.path).map_err(|e| anlgmap_core::Error::Io {
        path: spec.path.clone(),
        source: e,
    })?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update(format!("\0{}\0{:?}", spec.lang, limit).as_bytes());
    let key: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let entry = dir.join(format!("{key}.emb"));
    if entry.is_file() {
        match read_cache(&entry, &spec.lang) {
            Ok(emb) => {
                log::info!("{}: cache hit {}", spec.path.display(), entry.display());
                return Ok(emb);
            }
            Err(e) => log::warn!("ignoring unreadable cache entry {}: {e:#}", entry.display()),
        }
    }
    let emb = load_fresh(spec, limit)?;
    if let Err(e) = fs::create_dir_all(&dir).and_then(|_| write_cache(&entry, &emb)) {
        log::warn!("could not write cache entry {}: {e}", entry.display());
    }
    Ok(emb)
}

fn load_fresh(spec: &LangPath, limit: Option<usize>) -> Result<Embedding> {
    log::info!("loading {}", spec);
    let loaded = load_text_vectors(&spec.path, &spec.lang, limit)?;
    if !loaded.duplicates.is_empty() {
        log::warn!(
            "{}: {} duplicate tokens ignored",
            spec.path.display(),
            loaded.duplicates.len()
        );
    }
    Ok(loaded.embedding)
}

const CACHE_MAGIC: &[u8; 8] = b"ANLGEMB1";

// Layout: magic, rows and dim as u64 LE, then per row a u32 LE token length,
// the UTF-8 token and `dim` f64 LE values.
fn write_cache(path: &Path, emb: &Embedding) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&(emb.len() as u64).to_le_bytes())?;
    out.write_all(&(emb.dim() as u64).to_le_bytes())?;
    for (token, row) in emb.vocab().iter().zip(emb.matrix().rows()) {
        out.write_all(&(token.len() as u32).to_le_bytes())?;
        out.write_all(token.as_bytes())?;
        for v in row {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    fs::rename(tmp, path)
}

fn read_cache(path: &Path, lang: &str) -> Result<Embedding> {
    let mut input = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    anyhow::ensure!(&magic == CACHE_MAGIC, "bad magic");
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let dim = u64::from_le_bytes(word) as usize;
    let mut vocab = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    let mut len = [0u8; 4];
    for _ in 0..rows {
        input.read_exact(&mut len)?;
        let mut token = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut token)?;
        vocab.push(String::from_utf8(token).context("token is not UTF-8")?);
        for _ in 0..dim {
            input.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
    }
    let matrix = Array2::from_shape_vec((rows, dim), data)?;
    Ok(Embedding::new(lang, vocab, matrix)?)
}

pub fn load_dictionaries(specs: &[DictSpec]) -> Result<Vec<BilingualDictionary>> {
    specs
        .iter()
        .map(|d| Ok(BilingualDictionary::load_muse(&d.path, &d.source, &d.target)?))
        .collect()
}
