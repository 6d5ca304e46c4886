//! Declared global domains and uniform sampling from them.
//!
//! A domain is never enumerated. Each variant maps integers `[0, n)` to
//! labels and back, and sampling draws integers.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::histogram::Category;

/// How the publisher declares the global domain.
#[derive(Clone, Debug, PartialEq)]
pub enum DomainSpec {
    ExplicitList(Vec<Category>),
    /// UTF-8 file, one word per line, blank lines ignored.
    WordList(PathBuf),
    /// Every ordered pair of words from a wordlist, joined by one space.
    WordPairs(PathBuf),
    /// A domain known only by its size; labels are `<prefix>-<index>`.
    SizeOnly { n: u64, prefix: String },
}

impl DomainSpec {
    pub fn explicit<L: Into<String>>(labels: impl IntoIterator<Item = L>) -> Result<Self> {
        Ok(DomainSpec::ExplicitList(labels.into_iter().map(Category::new).collect::<Result<_>>()?))
    }

    pub fn size_only(n: u64, prefix: impl Into<String>) -> Self {
        DomainSpec::SizeOnly { n, prefix: prefix.into() }
    }
}

#[derive(Debug)]
enum Indexer {
    List { labels: Vec<Category>, index: HashMap<Category, u64> },
    Pairs { words: Vec<String>, index: HashMap<String, u64> },
    Generated { n: u64, prefix: String },
}

/// A loaded domain: a bijection between `[0, size)` and category labels.
#[derive(Debug)]
pub struct DomainSampler {
    spec: DomainSpec,
    indexer: Indexer,
}

/// Below this many candidates per requested draw the sampler enumerates
/// instead of rejecting.
const ENUMERATE_FACTOR: u64 = 4;
const MAX_REJECTIONS_PER_DRAW: u64 = 10_000;

fn read_wordlist(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(dedup_words(text.lines()))
}

fn dedup_words<'a>(lines: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    lines
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .filter(|w| seen.insert(w.to_string()))
        .map(str::to_string)
        .collect()
}

fn list_indexer(labels: Vec<Category>) -> Result<Indexer> {
    let mut index = HashMap::with_capacity(labels.len());
    for (i, c) in labels.iter().enumerate() {
        if index.insert(c.clone(), i as u64).is_some() {
            return Err(Error::DuplicateCategory(c.as_str().to_string()));
        }
    }
    if labels.is_empty() {
        return Err(Error::InvalidParameter("domain must contain at least one category".into()));
    }
    Ok(Indexer::List { labels, index })
}

fn pairs_indexer(words: Vec<String>, location: &str) -> Result<Indexer> {
    if words.is_empty() {
        return Err(Error::InvalidParameter("domain must contain at least one category".into()));
    }
    if let Some(w) = words.iter().find(|w| w.contains(char::is_whitespace)) {
        return Err(Error::Format {
            location: location.to_string(),
            message: format!("word {w:?} contains whitespace, so pairs would be ambiguous"),
        });
    }
    let w = words.len() as u64;
    if w.checked_mul(w).is_none() {
        return Err(Error::InvalidParameter(format!("word-pair domain over {w} words overflows")));
    }
    let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u64)).collect();
    Ok(Indexer::Pairs { words, index })
}

impl DomainSampler {
    /// Loads a domain; wordlist variants read their file here.
    pub fn load(spec: DomainSpec) -> Result<Self> {
        let indexer = match &spec {
            DomainSpec::ExplicitList(labels) => list_indexer(labels.clone())?,
            DomainSpec::WordList(path) => {
                let labels = read_wordlist(path)?.into_iter().map(Category::new).collect::<Result<_>>()?;
                list_indexer(labels)?
            }
            DomainSpec::WordPairs(path) => pairs_indexer(read_wordlist(path)?, &path.display().to_string())?,
            DomainSpec::SizeOnly { n, prefix } => {
                if *n == 0 {
                    return Err(Error::InvalidParameter("domain size must be at least 1".into()));
                }
                if prefix.is_empty() {
                    return Err(Error::InvalidParameter("size-only domain needs a non-empty label prefix".into()));
                }
                Indexer::Generated { n: *n, prefix: prefix.clone() }
            }
        };
        Ok(DomainSampler { spec, indexer })
    }

    /// Wordlist domains built from in-memory words rather than a file.
    pub fn from_words<S: AsRef<str>>(words: &[S], pairs: bool) -> Result<Self> {
        let words = dedup_words(words.iter().map(AsRef::as_ref));
        if pairs {
            Ok(DomainSampler {
                spec: DomainSpec::WordPairs(PathBuf::from("<memory>")),
                indexer: pairs_indexer(words, "<memory>")?,
            })
        } else {
            let labels: Vec<Category> = words.into_iter().map(Category::new).collect::<Result<_>>()?;
            Ok(DomainSampler {
                spec: DomainSpec::WordList(PathBuf::from("<memory>")),
                indexer: list_indexer(labels)?,
            })
        }
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// Exact cardinality of the domain.
    pub fn size(&self) -> u64 {
        match &self.indexer {
            Indexer::List { labels, .. } => labels.len() as u64,
            Indexer::Pairs { words, .. } => (words.len() as u64) * (words.len() as u64),
            Indexer::Generated { n, .. } => *n,
        }
    }

    /// The label at `index`, or `None` past the end.
    pub fn label_at(&self, index: u64) -> Option<Category> {
        if index >= self.size() {
            return None;
        }
        let label = match &self.indexer {
            Indexer::List { labels, .. } => return Some(labels[index as usize].clone()),
            Indexer::Pairs { words, .. } => {
                let w = words.len() as u64;
                format!("{} {}", words[(index / w) as usize], words[(index % w) as usize])
            }
            Indexer::Generated { prefix, .. } => format!("{prefix}-{index}"),
        };
        Some(Category::new(label).expect("generated labels are non-empty"))
    }

    /// Inverse of [`label_at`](Self::label_at).
    pub fn index_of(&self, label: &str) -> Option<u64> {
        match &self.indexer {
            Indexer::List { index, .. } => index.get(label).copied(),
            Indexer::Pairs { words, index } => {
                let (first, second) = label.split_once(' ')?;
                Some(index.get(first)? * words.len() as u64 + index.get(second)?)
            }
            Indexer::Generated { n, prefix } => {
                let digits = label.strip_prefix(prefix.as_str())?.strip_prefix('-')?;
                let canonical = !digits.is_empty()
                    && digits.bytes().all(|b| b.is_ascii_digit())
                    && (digits == "0" || !digits.starts_with('0'));
                if !canonical {
                    return None;
                }
                digits.parse::<u64>().ok().filter(|i| i < n)
            }
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    /// `k` distinct categories drawn uniformly from the domain minus `exclude`.
    ///
    /// Draws integer indices and rejects collisions with the exclusion set or
    /// with earlier picks. Small domains are enumerated instead.
    pub fn sample_distinct<'a, R, I>(&self, rng: &mut R, k: u64, exclude: I) -> Result<Vec<Category>>
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = &'a Category>,
    {
        let excluded: HashSet<u64> = exclude.into_iter().filter_map(|c| self.index_of(c.as_str())).collect();
        let n = self.size();
        let available = n - excluded.len() as u64;
        if k > available {
            return Err(Error::DomainExhausted { requested: k, available });
        }
        if k == 0 {
            return Ok(Vec::new());
        }

        if n <= ENUMERATE_FACTOR.saturating_mul(k.saturating_add(excluded.len() as u64)) {
            let candidates: Vec<u64> = (0..n).filter(|i| !excluded.contains(i)).collect();
            let picks = rand::seq::index::sample(rng, candidates.len(), k as usize);
            return Ok(picks.iter().map(|i| self.label_at(candidates[i]).expect("index in range")).collect());
        }

        let budget = MAX_REJECTIONS_PER_DRAW.saturating_mul(k);
        let mut chosen = HashSet::with_capacity(k as usize);
        let mut out = Vec::with_capacity(k as usize);
        let mut attempts = 0u64;
        while (out.len() as u64) < k {
            if attempts >= budget {
                return Err(Error::RetriesExhausted { requested: k, attempts });
            }
            attempts += 1;
            let i = rng.gen_range(0..n);
            if excluded.contains(&i) || !chosen.insert(i) {
                continue;
            }
            out.push(self.label_at(i).expect("index in range"));
        }
        Ok(out)
    }
}
