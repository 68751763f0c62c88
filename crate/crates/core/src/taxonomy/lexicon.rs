//! Motion labels, their aliases and their codes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::code::{CodeError, MotionCode};

/// The seed lexicon as shipped, one entry per motion label.
pub const TABLE_SEED_JSON: &str = include_str!("../../data/lexicon/seed-v1.json");
pub const TABLE_SEED_VERSION: &str = "seed-v1";

/// Seed labels whose trajectory bits are exchanged in the prose-corrected
/// variant.
const PROSE_CORRECTED_LABELS: [&str; 3] = ["shake", "rotate", "pour"];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("unknown motion label {label:?}; nearest: {}", nearest.join(", "))]
    NotFound { label: String, nearest: Vec<String> },
    #[error("motion label {label:?} is ambiguous between {}", candidates.join(", "))]
    Ambiguous {
        label: String,
        candidates: Vec<String>,
    },
    #[error("label {key:?} maps to both {first} and {second}")]
    Conflict {
        key: String,
        first: MotionCode,
        second: MotionCode,
    },
    #[error("entry {label:?} has illegal code {code}")]
    IllegalCode { label: String, code: MotionCode },
    #[error("entry has an empty label")]
    EmptyLabel,
    #[error("bad code in lexicon: {0}")]
    Code(#[from] CodeError),
    #[error("lexicon json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("lexicon io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntrySource {
    SeedTable,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LexiconVariant {
    /// The seed table codes as printed.
    #[default]
    Verbatim,
    /// Trajectory bits of the shake/sprinkle and rotate/pour rows exchanged,
    /// so pouring and rotating are revolute and shaking is prismatic.
    ProseCorrected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub label: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub code: MotionCode,
    #[serde(skip, default = "user_source")]
    pub source: EntrySource,
}

fn user_source() -> EntrySource {
    EntrySource::User
}

/// Case-folds, trims and collapses internal whitespace.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Drops parenthetical qualifiers, e.g. `roll (bimanual)` becomes `roll`.
pub fn strip_qualifiers(normalized: &str) -> String {
    let mut out = String::with_capacity(normalized.len());
    let mut depth = 0usize;
    for ch in normalized.chars() {
        match ch {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(ch),
            _ => {}
        }
    }
    normalize_label(&out)
}

#[derive(Debug, Clone)]
pub struct MotionLexicon {
    entries: Vec<LexiconEntry>,
    exact: BTreeMap<String, usize>,
    stripped: BTreeMap<String, Vec<usize>>,
}

impl MotionLexicon {
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        let mut exact: BTreeMap<String, usize> = BTreeMap::new();
        let mut stripped: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (idx, entry) in entries.iter().enumerate() {
            if normalize_label(&entry.label).is_empty() {
                return Err(LexiconError::EmptyLabel);
            }
            if !entry.code.is_legal() {
                return Err(LexiconError::IllegalCode {
                    label: entry.label.clone(),
                    code: entry.code,
                });
            }
            for name in std::iter::once(&entry.label).chain(&entry.aliases) {
                let key = normalize_label(name);
                if key.is_empty() {
                    continue;
                }
                if let Some(&prev) = exact.get(&key) {
                    if entries[prev].code != entry.code {
                        return Err(LexiconError::Conflict {
                            key,
                            first: entries[prev].code,
                            second: entry.code,
                        });
                    }
                    continue;
                }
                exact.insert(key.clone(), idx);
                let bucket = stripped.entry(strip_qualifiers(&key)).or_default();
                if !bucket.contains(&idx) {
                    bucket.push(idx);
                }
            }
        }
        Ok(MotionLexicon {
            entries,
            exact,
            stripped,
        })
    }

    /// The shipped seed table.
    pub fn table_seed(variant: LexiconVariant) -> Self {
        let mut entries: Vec<LexiconEntry> =
            serde_json::from_str(TABLE_SEED_JSON).expect("seed lexicon fixture parses");
        for e in &mut entries {
            e.source = EntrySource::SeedTable;
            if variant == LexiconVariant::ProseCorrected
                && PROSE_CORRECTED_LABELS.contains(&e.label.as_str())
            {
                e.code = e.code.with_trajectory_swapped();
            }
        }
        MotionLexicon::from_entries(entries).expect("seed lexicon is consistent")
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let entries: Vec<LexiconEntry> = serde_json::from_str(text)?;
        MotionLexicon::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        MotionLexicon::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("lexicon serializes")
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    /// Distinct codes in ascending order.
    pub fn codes(&self) -> BTreeSet<MotionCode> {
        self.entries.iter().map(|e| e.code).collect()
    }

    /// Resolves a label or alias. Exact (normalized) matches win; otherwise
    /// the label is matched with parenthetical qualifiers removed, which
    /// fails as ambiguous when the bare form maps to more than one code.
    pub fn lookup(&self, label: &str) -> Result<MotionCode, LexiconError> {
        let key = normalize_label(label);
        if let Some(&idx) = self.exact.get(&key) {
            return Ok(self.entries[idx].code);
        }
        let bare = strip_qualifiers(&key);
        if let Some(bucket) = self.stripped.get(&bare) {
            let codes: BTreeSet<MotionCode> = bucket.iter().map(|&i| self.entries[i].code).collect();
            if codes.len() == 1 {
                return Ok(*codes.iter().next().unwrap());
            }
            return Err(LexiconError::Ambiguous {
                label: label.to_string(),
                candidates: bucket.iter().map(|&i| self.entries[i].label.clone()).collect(),
            });
        }
        Err(LexiconError::NotFound {
            label: label.to_string(),
            nearest: self.nearest(&key, 3),
        })
    }

    fn nearest(&self, key: &str, count: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &str)> = self
            .exact
            .keys()
            .map(|k| (strsim::levenshtein(key, k), k.as_str()))
            .collect();
        scored.sort();
        scored
            .into_iter()
            .take(count)
            .map(|(_, k)| k.to_string())
            .collect()
    }
}

/// Known labels grouped by code, plus labels the lexicon cannot resolve.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Consolidation {
    pub groups: BTreeMap<MotionCode, Vec<String>>,
    pub unknowns: Vec<String>,
}

/// Groups labels by code. Labels are normalized and deduplicated first;
/// each group keeps first-seen order. Ambiguous labels count as unknown.
pub fn consolidate<S: AsRef<str>>(labels: &[S], lex: &MotionLexicon) -> Consolidation {
    let mut seen = BTreeSet::new();
    let mut out = Consolidation::default();
    for raw in labels {
        let label = normalize_label(raw.as_ref());
        if label.is_empty() || !seen.insert(label.clone()) {
            continue;
        }
        match lex.lookup(&label) {
            Ok(code) => out.groups.entry(code).or_default().push(label),
            Err(_) => out.unknowns.push(label),
        }
    }
    out
}
