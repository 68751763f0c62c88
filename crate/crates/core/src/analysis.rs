//! Pairwise divergence matrices and their agreement with motion codes.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gmm::{symmetric_divergence, GaussianMixture, GmmError};
use crate::taxonomy::{code_distance, normalize_label, CodeDistanceWeights, MotionCode};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 2 motion labels, got {0}")]
    TooFewLabels(usize),
    #[error("motion {0:?} has no models")]
    EmptyVariants(String),
    #[error("duplicate motion label {0:?}")]
    DuplicateLabel(String),
    #[error("mixture dimension mismatch: {0}")]
    Gmm(#[from] GmmError),
    #[error("no motion code for label {0:?}")]
    MissingCode(String),
    #[error("rank correlation needs at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("pair lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid divergence matrix: {0}")]
    InvalidMatrix(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Fitted mixtures for one motion type, one per recording variant.
#[derive(Debug, Clone)]
pub struct MotionModels {
    pub label: String,
    pub variants: Vec<GaussianMixture>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MatrixMetadata {
    /// Label pairs where at least one variational estimate was clamped at 0.
    pub clamped_pairs: Vec<(String, String)>,
    pub notes: BTreeMap<String, String>,
}

/// Symmetric, zero-diagonal matrix of nonnegative divergences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceMatrix {
    labels: Vec<String>,
    /// Row-major n x n.
    values: Vec<f64>,
    pub metadata: MatrixMetadata,
}

impl DivergenceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self, AnalysisError> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(AnalysisError::InvalidMatrix(format!(
                "{} labels but {} values",
                n,
                values.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(AnalysisError::DuplicateLabel(l.clone()));
            }
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(AnalysisError::InvalidMatrix(format!(
                    "diagonal entry {i} is not zero"
                )));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(AnalysisError::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {v} is not a finite nonnegative value"
                    )));
                }
                if v != values[j * n + i] {
                    return Err(AnalysisError::InvalidMatrix(format!(
                        "entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(DivergenceMatrix {
            labels,
            values,
            metadata: MatrixMetadata::default(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Rows and columns reordered so that new index `k` is old `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.len();
        let mut values = vec![0.0; n * n];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                values[a * n + b] = self.get(i, j);
            }
        }
        DivergenceMatrix {
            labels: order.iter().map(|&i| self.labels[i].clone()).collect(),
            values,
            metadata: self.metadata.clone(),
        }
    }
}

/// Entry `(i, j)` is the mean symmetrized variational divergence over all
/// variant pairs of labels `i` and `j`. Each pair is symmetrized before
/// averaging; for arithmetic means the order does not matter. Cells are
/// computed in parallel on the current rayon pool and assembled in a fixed
/// order, so the result does not depend on the thread count.
pub fn divergence_matrix(models: &[MotionModels]) -> Result<DivergenceMatrix, AnalysisError> {
    let n = models.len();
    if n < 2 {
        return Err(AnalysisError::TooFewLabels(n));
    }
    for m in models {
        if m.variants.is_empty() {
            return Err(AnalysisError::EmptyVariants(m.label.clone()));
        }
    }
    let d = models[0].variants[0].dims();
    for m in models {
        if let Some(g) = m.variants.iter().find(|g| g.dims() != d) {
            return Err(GmmError::DimensionMismatch {
                expected: d,
                found: g.dims(),
            }
            .into());
        }
    }

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let cells: Vec<(f64, bool)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut sum = 0.0;
            let mut clamped = false;
            for f in &models[i].variants {
                for g in &models[j].variants {
                    let div = symmetric_divergence(f, g)?;
                    sum += div.value;
                    clamped |= div.clamped;
                }
            }
            let count = (models[i].variants.len() * models[j].variants.len()) as f64;
            Ok((sum / count, clamped))
        })
        .collect::<Result<_, GmmError>>()?;

    let mut values = vec![0.0; n * n];
    let mut clamped_pairs = Vec::new();
    for (&(i, j), &(v, clamped)) in pairs.iter().zip(&cells) {
        values[i * n + j] = v;
        values[j * n + i] = v;
        if clamped {
            clamped_pairs.push((models[i].label.clone(), models[j].label.clone()));
        }
    }
    let mut m = DivergenceMatrix::new(models.iter().map(|m| m.label.clone()).collect(), values)?;
    m.metadata.clamped_pairs = clamped_pairs;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub a: String,
    pub b: String,
    pub divergence: f64,
    pub same_code: bool,
    pub code_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearestNeighbor {
    pub label: String,
    pub nearest: String,
    pub divergence: f64,
    pub same_code: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// Mean divergence over same-code pairs; absent when there are none.
    pub intra_mean: Option<f64>,
    pub inter_mean: Option<f64>,
    /// `intra_mean / inter_mean`, absent unless both exist and inter > 0.
    pub ratio: Option<f64>,
    pub nn_agreement: f64,
    pub nearest: Vec<NearestNeighbor>,
    /// Spearman correlation between code distance and divergence.
    pub rank_correlation: Option<f64>,
    pub pairs: Vec<PairRow>,
}

/// Compares data-driven similarity with code equality.
pub fn cluster_consistency(
    m: &DivergenceMatrix,
    codes: &BTreeMap<String, MotionCode>,
) -> Result<ConsistencyReport, AnalysisError> {
    let n = m.len();
    let label_codes: Vec<MotionCode> = m
        .labels()
        .iter()
        .map(|l| codes.get(l).copied().ok_or_else(|| AnalysisError::MissingCode(l.clone())))
        .collect::<Result<_, _>>()?;
    let weights = CodeDistanceWeights::uniform();

    let mut pairs = Vec::new();
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in (i + 1)..n {
            let same = label_codes[i] == label_codes[j];
            let v = m.get(i, j);
            if same {
                intra.push(v);
            } else {
                inter.push(v);
            }
            pairs.push(PairRow {
                a: m.labels()[i].clone(),
                b: m.labels()[j].clone(),
                divergence: v,
                same_code: same,
                code_distance: code_distance(label_codes[i], label_codes[j], &weights),
            });
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let intra_mean = mean(&intra);
    let inter_mean = mean(&inter);
    let ratio = match (intra_mean, inter_mean) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };

    let mut nearest = Vec::with_capacity(n);
    for i in 0..n {
        let best = (0..n)
            .filter(|&j| j != i)
            .min_by(|&a, &b| {
                m.get(i, a)
                    .total_cmp(&m.get(i, b))
                    .then_with(|| m.labels()[a].cmp(&m.labels()[b]))
            });
        if let Some(j) = best {
            nearest.push(NearestNeighbor {
                label: m.labels()[i].clone(),
                nearest: m.labels()[j].clone(),
                divergence: m.get(i, j),
                same_code: label_codes[i] == label_codes[j],
            });
        }
    }
    let nn_agreement = if nearest.is_empty() {
        0.0
    } else {
        nearest.iter().filter(|r| r.same_code).count() as f64 / nearest.len() as f64
    };

    let code_d: Vec<f64> = pairs.iter().map(|p| p.code_distance).collect();
    let divs: Vec<f64> = pairs.iter().map(|p| p.divergence).collect();
    let rank_correlation = if pairs.len() >= 3 {
        rank_correlation(&code_d, &divs)?
    } else {
        None
    };

    Ok(ConsistencyReport {
        intra_mean,
        inter_mean,
        ratio,
        nn_agreement,
        nearest,
        rank_correlation,
        pairs,
    })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // ranks are 1-based; ties share the mean of their positions
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation with average ranks for ties. `None` when either
/// list has no spread.
pub fn rank_correlation(x: &[f64], y: &[f64]) -> Result<Option<f64>, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(AnalysisError::TooFewPairs(x.len()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes the full square matrix: a `label,<l1>,...` header, then one row
/// per label. Values carry 9 significant digits.
pub fn write_matrix_csv<W: Write>(m: &DivergenceMatrix, out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend(m.labels().iter().cloned());
    w.write_record(&header)?;
    for i in 0..m.len() {
        let mut rec = vec![m.labels()[i].clone()];
        rec.extend((0..m.len()).map(|j| format_value(m.get(i, j))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_matrix_csv(m: &DivergenceMatrix, path: impl AsRef<Path>) -> Result<(), AnalysisError> {
    let file = std::fs::File::create(path)?;
    write_matrix_csv(m, std::io::BufWriter::new(file))
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DivergenceMatrix, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let labels: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let n = labels.len();
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        if rows >= n || record.get(0) != Some(labels[rows].as_str()) {
            return Err(AnalysisError::InvalidMatrix(format!(
                "row {} label does not match the header",
                rows + 1
            )));
        }
        if record.len() != n + 1 {
            return Err(AnalysisError::InvalidMatrix(format!(
                "row {} has {} cells, expected {}",
                rows + 1,
                record.len(),
                n + 1
            )));
        }
        for cell in record.iter().skip(1) {
            values.push(cell.trim().parse::<f64>().map_err(|_| {
                AnalysisError::InvalidMatrix(format!("cannot parse {cell:?}"))
            })?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(AnalysisError::InvalidMatrix(format!(
            "{rows} rows for {n} labels"
        )));
    }
    DivergenceMatrix::new(labels, values)
}

pub fn import_matrix_csv(path: impl AsRef<Path>) -> Result<DivergenceMatrix, AnalysisError> {
    read_matrix_csv(std::fs::File::open(path)?)
}

/// Grayscale levels, one per cell: the smallest value maps to 255 (light,
/// similar) and the largest to 0 (dark, dissimilar). The lower triangle
/// mirrors the upper one.
pub fn heatmap_pixels(m: &DivergenceMatrix) -> Vec<u8> {
    let n = m.len();
    let min = m.values().iter().copied().fold(f64::INFINITY, f64::min);
    let max = m.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut px = vec![255u8; n * n];
    for i in 0..n {
        for j in i..n {
            let level = if span > 0.0 {
                (255.0 * (max - m.get(i, j)) / span).round() as u8
            } else {
                255
            };
            px[i * n + j] = level;
            px[j * n + i] = level;
        }
    }
    px
}

/// Binary PGM (P5), one pixel per cell.
pub fn write_heatmap<W: Write>(m: &DivergenceMatrix, mut out: W) -> Result<(), AnalysisError> {
    let n = m.len();
    write!(
        out,
        "P5\n# divergence heatmap: min -> 255 (light, similar), max -> 0 (dark, dissimilar)\n{n} {n}\n255\n"
    )?;
    out.write_all(&heatmap_pixels(m))?;
    out.flush()?;
    Ok(())
}

pub fn export_heatmap(m: &DivergenceMatrix, path: impl AsRef<Path>) -> Result<(), AnalysisError> {
    let file = std::fs::File::create(path)?;
    write_heatmap(m, std::io::BufWriter::new(file))
}

/// A reported observation about one pair of real force recordings, for
/// comparison with a matrix built from comparable data. Not a pass/fail gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChecklistItem {
    pub a: &'static str,
    pub b: &'static str,
    /// Whether the pair was reported as similar in the reference analysis.
    pub reported_similar: bool,
    /// Matrix labels matched for each motion, when present.
    pub matched: Option<(String, String)>,
    pub divergence: Option<f64>,
    /// Divergence at or below the median off-diagonal value.
    pub observed_similar: Option<bool>,
}

impl ChecklistItem {
    pub fn agrees(&self) -> Option<bool> {
        self.observed_similar.map(|o| o == self.reported_similar)
    }
}

const REFERENCE_PAIRS: [(&str, &str, bool); 15] = [
    ("mash", "slice", true),
    ("mash", "shave", true),
    ("spread", "shave", true),
    ("spread", "mash", true),
    ("peel", "shave", true),
    ("brush", "shave", true),
    ("flip", "scoop", true),
    ("peel", "scrape", false),
    ("flip", "mash", true),
    ("flip", "shave", true),
    ("stir", "slice", true),
    ("stir", "shave", true),
    ("stir", "spread", true),
    ("twist", "slice", true),
    ("twist", "shave", true),
];

fn word_forms(stem: &str) -> Vec<String> {
    let gerund = match stem {
        "slice" | "shave" | "scrape" => format!("{}ing", &stem[..stem.len() - 1]),
        "flip" | "stir" => format!("{stem}{}ing", &stem[stem.len() - 1..]),
        _ => format!("{stem}ing"),
    };
    vec![stem.to_string(), gerund]
}

fn find_label(m: &DivergenceMatrix, stem: &str) -> Option<usize> {
    let forms = word_forms(stem);
    m.labels().iter().position(|l| {
        let l = normalize_label(&l.replace(['_', '-'], " "));
        forms
            .iter()
            .any(|f| l == *f || l.starts_with(&format!("{f} ")))
    })
}

/// Looks up each reference pair in `m` and reports whether it lands on the
/// similar side of the median off-diagonal divergence.
pub fn qualitative_checklist(m: &DivergenceMatrix) -> Vec<ChecklistItem> {
    let n = m.len();
    let mut off: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| m.get(i, j))
        .collect();
    off.sort_by(f64::total_cmp);
    let median = if off.is_empty() {
        None
    } else if off.len() % 2 == 1 {
        Some(off[off.len() / 2])
    } else {
        Some(0.5 * (off[off.len() / 2 - 1] + off[off.len() / 2]))
    };
    REFERENCE_PAIRS
        .iter()
        .map(|&(a, b, reported_similar)| {
            let found = find_label(m, a).zip(find_label(m, b)).filter(|(i, j)| i != j);
            let divergence = found.map(|(i, j)| m.get(i, j));
            ChecklistItem {
                a,
                b,
                reported_similar,
                matched: found.map(|(i, j)| (m.labels()[i].clone(), m.labels()[j].clone())),
                divergence,
                observed_similar: divergence.zip(median).map(|(v, med)| v <= med),
            }
        })
        .collect()
}
