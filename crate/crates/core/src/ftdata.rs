//! Force/torque trial recordings and pooled sample matrices.
//!
//! A trial file is a CSV with header `t,fx,fy,fz,tx,ty,tz` named
//! `<label>_<variant>.csv`. Samples are treated as i.i.d. points of a spatial
//! force distribution, so no resampling or filtering is applied.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gmm::GaussianMixture;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("{file}: missing column {column:?}")]
    MissingColumn { file: String, column: &'static str },
    #[error("{file}: row {row}: non-finite value in column {column:?}")]
    NonFinite {
        file: String,
        row: usize,
        column: String,
    },
    #[error("{file}: row {row}: cannot parse {value:?} in column {column:?}")]
    Unparseable {
        file: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{file}: row {row}: timestamp does not increase")]
    NonMonotone { file: String, row: usize },
    #[error("{file}: a trial needs at least 2 samples, found {found}")]
    TooFewSamples { file: String, found: usize },
    #[error("{0}: no trial files found")]
    NoTrials(String),
    #[error("no trials to pool")]
    EmptyPool,
    #[error("cannot pool trials with labels {0:?} and {1:?} without cross-label pooling")]
    LabelMismatch(String, String),
    #[error("channel selection must be non-empty and free of duplicates")]
    ChannelMismatch,
    #[error("sample matrix needs at least {needed} rows, has {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("sample matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Fx,
    Fy,
    Fz,
    Tx,
    Ty,
    Tz,
}

impl Channel {
    pub const ALL: [Channel; 6] = [
        Channel::Fx,
        Channel::Fy,
        Channel::Fz,
        Channel::Tx,
        Channel::Ty,
        Channel::Tz,
    ];
    pub const FORCE: [Channel; 3] = [Channel::Fx, Channel::Fy, Channel::Fz];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Fx => "fx",
            Channel::Fy => "fy",
            Channel::Fz => "fz",
            Channel::Tx => "tx",
            Channel::Ty => "ty",
            Channel::Tz => "tz",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timestamped force/torque reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// fx, fy, fz in newtons, then tx, ty, tz in newton-meters.
    pub wrench: [f64; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrial {
    pub motion_label: String,
    pub variant: String,
    pub samples: Vec<Sample>,
}

const HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "tx", "ty", "tz"];

/// Splits `<label>_<variant>` at the last underscore. A stem without an
/// underscore is its own label with variant `default`.
pub fn split_trial_name(stem: &str) -> (String, String) {
    match stem.rsplit_once('_') {
        Some((label, variant)) if !label.is_empty() && !variant.is_empty() => {
            (label.to_string(), variant.to_string())
        }
        _ => (stem.to_string(), "default".to_string()),
    }
}

impl ForceTrial {
    /// Reads one trial from CSV text. `name` is used for diagnostics and, via
    /// [`split_trial_name`], for the label and variant.
    pub fn from_reader<R: Read>(name: &str, reader: R) -> Result<Self, TrialError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut columns = [0usize; 7];
        for (slot, column) in columns.iter_mut().zip(HEADER) {
            *slot = headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(column))
                .ok_or_else(|| TrialError::MissingColumn {
                    file: name.to_string(),
                    column,
                })?;
        }

        let mut samples: Vec<Sample> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record?;
            let mut values = [0.0f64; 7];
            for (k, &col) in columns.iter().enumerate() {
                let text = record.get(col).unwrap_or("");
                let v: f64 = text.parse().map_err(|_| TrialError::Unparseable {
                    file: name.to_string(),
                    row,
                    column: HEADER[k].to_string(),
                    value: text.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(TrialError::NonFinite {
                        file: name.to_string(),
                        row,
                        column: HEADER[k].to_string(),
                    });
                }
                values[k] = v;
            }
            if let Some(prev) = samples.last() {
                if values[0] <= prev.t {
                    return Err(TrialError::NonMonotone {
                        file: name.to_string(),
                        row,
                    });
                }
            }
            let mut wrench = [0.0; 6];
            wrench.copy_from_slice(&values[1..]);
            samples.push(Sample {
                t: values[0],
                wrench,
            });
        }
        if samples.len() < 2 {
            return Err(TrialError::TooFewSamples {
                file: name.to_string(),
                found: samples.len(),
            });
        }
        let stem = Path::new(name)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name.to_string());
        let (motion_label, variant) = split_trial_name(&stem);
        Ok(ForceTrial {
            motion_label,
            variant,
            samples,
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrialError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(HEADER)?;
        for s in &self.samples {
            let mut rec = vec![s.t.to_string()];
            rec.extend(s.wrench.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads trials from a single CSV file or from every `*.csv` in a directory
/// (sorted by file name).
pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<ForceTrial>, TrialError> {
    let path = path.as_ref();
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .map(|e| e.eq_ignore_ascii_case("csv"))
                        .unwrap_or(false)
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(TrialError::NoTrials(path.display().to_string()));
        }
        files
    } else {
        vec![path.to_path_buf()]
    };
    files
        .iter()
        .map(|f| {
            let name = f
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            ForceTrial::from_reader(&name, std::fs::File::open(f)?)
        })
        .collect()
}

/// An n x d matrix of samples with named channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: DMatrix<f64>,
    channels: Vec<String>,
}

impl SampleMatrix {
    pub fn new(data: DMatrix<f64>, channels: Vec<String>) -> Result<Self, TrialError> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(TrialError::InvalidMatrix("matrix is empty".into()));
        }
        if data.ncols() != channels.len() {
            return Err(TrialError::InvalidMatrix(format!(
                "{} columns but {} channel names",
                data.ncols(),
                channels.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TrialError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(SampleMatrix { data, channels })
    }

    /// Builds a matrix from rows with default channel names (`fx,fy,fz` for
    /// three columns, all six for six, `x1..xd` otherwise).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TrialError> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(TrialError::InvalidMatrix("ragged rows".into()));
        }
        let data = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        SampleMatrix::new(data, default_channel_names(d))
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dims(&self) -> usize {
        self.data.ncols()
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    /// Rows copied into a contiguous row-major buffer.
    pub fn to_row_major(&self) -> Vec<f64> {
        let (n, d) = self.data.shape();
        let mut out = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..d {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrialError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.channels)?;
        for i in 0..self.nrows() {
            w.write_record(self.data.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a header + numeric rows CSV. A `t` column, when present, is
    /// dropped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TrialError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let keep: Vec<usize> = (0..headers.len())
            .filter(|&i| !headers[i].eq_ignore_ascii_case("t"))
            .collect();
        let channels: Vec<String> = keep.iter().map(|&i| headers[i].to_string()).collect();
        let mut values = Vec::new();
        let mut n = 0usize;
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            for &i in &keep {
                let text = record.get(i).unwrap_or("");
                let v: f64 = text.parse().map_err(|_| TrialError::Unparseable {
                    file: "samples".into(),
                    row: r + 1,
                    column: headers[i].to_string(),
                    value: text.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(TrialError::NonFinite {
                        file: "samples".into(),
                        row: r + 1,
                        column: headers[i].to_string(),
                    });
                }
                values.push(v);
            }
            n += 1;
        }
        SampleMatrix::new(DMatrix::from_row_slice(n, keep.len(), &values), channels)
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self, TrialError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.channels
                    .iter()
                    .position(|c| c.eq_ignore_ascii_case(n))
                    .ok_or(TrialError::ChannelMismatch)
            })
            .collect::<Result<_, _>>()?;
        let data = DMatrix::from_fn(self.nrows(), idx.len(), |i, j| self.data[(i, idx[j])]);
        SampleMatrix::new(data, names.iter().map(|s| s.to_string()).collect())
    }
}

fn default_channel_names(d: usize) -> Vec<String> {
    match d {
        3 => Channel::FORCE.iter().map(|c| c.name().to_string()).collect(),
        6 => Channel::ALL.iter().map(|c| c.name().to_string()).collect(),
        _ => (1..=d).map(|i| format!("x{i}")).collect(),
    }
}

/// Stacks trial samples into one matrix, trial order then time order.
pub fn pool_samples(
    trials: &[ForceTrial],
    channels: &[Channel],
    allow_cross_label: bool,
) -> Result<SampleMatrix, TrialError> {
    let first = trials.first().ok_or(TrialError::EmptyPool)?;
    if channels.is_empty()
        || (1..channels.len()).any(|i| channels[..i].contains(&channels[i]))
    {
        return Err(TrialError::ChannelMismatch);
    }
    if !allow_cross_label {
        if let Some(other) = trials.iter().find(|t| t.motion_label != first.motion_label) {
            return Err(TrialError::LabelMismatch(
                first.motion_label.clone(),
                other.motion_label.clone(),
            ));
        }
    }
    let n: usize = trials.iter().map(|t| t.samples.len()).sum();
    let d = channels.len();
    let mut values = Vec::with_capacity(n * d);
    for trial in trials {
        for s in &trial.samples {
            values.extend(channels.iter().map(|c| s.wrench[c.index()]));
        }
    }
    SampleMatrix::new(
        DMatrix::from_row_slice(n, d, &values),
        channels.iter().map(|c| c.name().to_string()).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StandardizePolicy {
    #[default]
    None,
    ZScore,
}

/// Per-channel affine transform applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Channels with zero spread, left unchanged.
    pub constant: Vec<bool>,
}

impl Standardization {
    fn identity(d: usize) -> Self {
        Standardization {
            means: vec![0.0; d],
            scales: vec![1.0; d],
            constant: vec![false; d],
        }
    }

    pub fn any_constant(&self) -> bool {
        self.constant.iter().any(|&c| c)
    }

    pub fn inverse(&self, m: &SampleMatrix) -> SampleMatrix {
        let mut data = m.data.clone();
        for (j, mut col) in data.column_iter_mut().enumerate() {
            if !self.constant[j] {
                col.iter_mut()
                    .for_each(|v| *v = *v * self.scales[j] + self.means[j]);
            }
        }
        SampleMatrix {
            data,
            channels: m.channels.clone(),
        }
    }
}

/// Applies `policy`. Z-scoring uses the population standard deviation.
pub fn standardize(
    m: &SampleMatrix,
    policy: StandardizePolicy,
) -> Result<(SampleMatrix, Standardization), TrialError> {
    let d = m.dims();
    match policy {
        StandardizePolicy::None => Ok((m.clone(), Standardization::identity(d))),
        StandardizePolicy::ZScore => {
            let n = m.nrows();
            if n < 2 {
                return Err(TrialError::TooFewRows {
                    needed: 2,
                    found: n,
                });
            }
            let mut t = Standardization::identity(d);
            let mut data = m.data.clone();
            for (j, mut col) in data.column_iter_mut().enumerate() {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                let sd = var.sqrt();
                if sd <= f64::EPSILON * mean.abs().max(1.0) {
                    t.constant[j] = true;
                    continue;
                }
                t.means[j] = mean;
                t.scales[j] = sd;
                col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
            }
            Ok((
                SampleMatrix {
                    data,
                    channels: m.channels.clone(),
                },
                t,
            ))
        }
    }
}

/// Draws `n` samples from `gmm` together with the component index of each.
pub fn synth_generate_with_assignments(
    gmm: &GaussianMixture,
    n: usize,
    seed: u64,
) -> Result<(SampleMatrix, Vec<usize>), TrialError> {
    if n == 0 {
        return Err(TrialError::TooFewRows { needed: 1, found: 0 });
    }
    gmm.check().map_err(|e| TrialError::InvalidMixture(e.to_string()))?;
    let d = gmm.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * d];
    let mut assignments = Vec::with_capacity(n);
    for row in values.chunks_exact_mut(d) {
        assignments.push(gmm.sample_into(&mut rng, row));
    }
    let m = SampleMatrix::new(
        DMatrix::from_row_slice(n, d, &values),
        default_channel_names(d),
    )?;
    Ok((m, assignments))
}

/// Draws `n` i.i.d. samples from `gmm`; deterministic for a fixed seed.
pub fn synth_generate(
    gmm: &GaussianMixture,
    n: usize,
    seed: u64,
) -> Result<SampleMatrix, TrialError> {
    synth_generate_with_assignments(gmm, n, seed).map(|(m, _)| m)
}
