//! The `manipcode` command line.
//!
//! Every subcommand parses its inputs, calls the library, and prints the
//! result. Exit status is 0 on success, 1 on data or validation errors and 2
//! on usage errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::analysis::{
    self, cluster_consistency, divergence_matrix, AnalysisError, MotionModels,
};
use crate::foon::{self, FoonError};
use crate::ftdata::{
    self, split_trial_name, standardize, synth_generate, SampleMatrix, StandardizePolicy,
    TrialError,
};
use crate::gmm::{
    fit_em, mc_kl, select_k_by_bic, symmetric_divergence, variational_kl, EmConfig,
    GaussianMixture, GmmError, InitPolicy,
};
use crate::taxonomy::{
    code_distance, consolidate, normalize_label, CodeDistanceWeights, CodeError, LexiconError,
    LexiconVariant, MotionCode, MotionLexicon,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Foon(#[from] FoonError),
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Gmm(#[from] GmmError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum VariantArg {
    #[default]
    Verbatim,
    ProseCorrected,
}

impl From<VariantArg> for LexiconVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Verbatim => LexiconVariant::Verbatim,
            VariantArg::ProseCorrected => LexiconVariant::ProseCorrected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum ChannelsArg {
    /// fx, fy, fz
    #[default]
    Force,
    /// fx, fy, fz, tx, ty, tz
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum StandardizeArg {
    #[default]
    None,
    Zscore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum InitArg {
    #[default]
    Kmeans,
    Random,
}

/// Command-line configuration for one invocation.
#[derive(Debug, Parser)]
#[command(name = "manipcode", version, about = "Manipulation motion codes and force-data cluster checks")]
pub struct RunConfig {
    /// Structured JSON output instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for stochastic subcommands (synth, fit, kl --mc).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel work; output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Which seed lexicon to use when no lexicon file is given.
    #[arg(long, global = true, value_enum, default_value_t = VariantArg::Verbatim)]
    pub lexicon_variant: VariantArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a code from attribute words (e.g. contact rigid moving prismatic continuous).
    Encode {
        #[arg(required = true, num_args = 1..)]
        attributes: Vec<String>,
    },
    /// Describe the attributes of a code.
    Decode { code: String },
    /// Check a code against the legality rules.
    Validate { code: String },
    /// Weighted Hamming distance between two codes.
    Dist {
        a: String,
        b: String,
        /// Eight comma-separated per-bit weights.
        #[arg(long, value_delimiter = ',', num_args = 8)]
        weights: Option<Vec<f64>>,
    },
    /// Group the labels of a file (one per line) by code.
    Consolidate {
        labels_file: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Node counts and motion frequencies of a FOON file.
    FoonStats(FoonStatsArgs),
    /// Sample from a mixture.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a Gaussian mixture to samples or a trial recording.
    Fit(FitArgs),
    /// Variational (and optionally Monte Carlo) KL between two mixtures.
    Kl {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        /// Monte Carlo draws for the sampled estimate.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Pairwise divergence matrix from a directory of `<label>_<variant>.json` models.
    Matrix {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Compare a divergence matrix with the motion codes of its labels.
    Eval {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct FoonStatsArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    /// Lexicon JSON used to attach codes to motions.
    #[arg(long)]
    pub annotate: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Sweep k = 1..=5 and keep the lowest BIC (overrides --k).
    #[arg(long)]
    pub bic: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Fit report JSON with per-iteration log-likelihoods.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ChannelsArg::Force)]
    pub channels: ChannelsArg,
    #[arg(long, value_enum, default_value_t = StandardizeArg::None)]
    pub standardize: StandardizeArg,
    #[arg(long, value_enum, default_value_t = InitArg::Kmeans)]
    pub init: InitArg,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit status.
pub fn dispatch<I, S>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(cfg) => cfg,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    let result = match cfg.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => {
                let mut buf = Vec::new();
                let r = pool.install(|| run(&cfg, &mut buf));
                let _ = stdout.write_all(&buf);
                r
            }
            Err(e) => Err(CliError::Data(e.to_string())),
        },
        None => run(&cfg, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            if cfg.json {
                let kind = if code == 2 { "usage" } else { "data" };
                let _ = writeln!(stderr, "{}", json!({"error": kind, "message": e.to_string()}));
            } else {
                let _ = writeln!(stderr, "error: {e}");
                if code == 2 {
                    let _ = writeln!(stderr, "run `manipcode --help` for usage");
                }
            }
            code
        }
    }
}

fn require_seed(cfg: &RunConfig, what: &str) -> Result<u64, CliError> {
    cfg.seed
        .ok_or_else(|| CliError::Usage(format!("{what} requires --seed")))
}

fn check_input(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("{}: no such file or directory", path.display())));
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(CliError::Data(format!(
            "{}: output directory does not exist",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn lexicon(cfg: &RunConfig, path: Option<&Path>) -> Result<MotionLexicon, CliError> {
    match path {
        Some(p) => {
            check_input(p)?;
            Ok(MotionLexicon::load(p)?)
        }
        None => Ok(MotionLexicon::table_seed(cfg.lexicon_variant.into())),
    }
}

fn load_mixture(path: &Path) -> Result<GaussianMixture, CliError> {
    check_input(path)?;
    let text = fs::read_to_string(path)?;
    GaussianMixture::from_json(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cfg.command {
        Command::Encode { attributes } => encode(cfg, attributes, out),
        Command::Decode { code } => decode(cfg, code, out),
        Command::Validate { code } => validate(cfg, code, out),
        Command::Dist { a, b, weights } => dist(cfg, a, b, weights.as_deref(), out),
        Command::Consolidate {
            labels_file,
            lexicon: lex,
        } => consolidate_cmd(cfg, labels_file, lex.as_deref(), out),
        Command::FoonStats(args) => foon_stats(cfg, args, out),
        Command::Synth { spec, n, out: path } => synth(cfg, spec, *n, path, out),
        Command::Fit(args) => fit(cfg, args, out),
        Command::Kl { f, g, mc } => kl(cfg, f, g, *mc, out),
        Command::Matrix {
            models,
            out: path,
            heatmap,
        } => matrix(cfg, models, path, heatmap.as_deref(), out),
        Command::Eval {
            matrix,
            lexicon: lex,
            out: path,
        } => eval(cfg, matrix, lex.as_deref(), path.as_deref(), out),
    }
}

fn encode(cfg: &RunConfig, attributes: &[String], out: &mut dyn Write) -> Result<i32, CliError> {
    let code = MotionCode::from_attributes(attributes)?;
    let validation = code.validate();
    if cfg.json {
        emit_json(out, &json!({"code": code, "validation": validation}))?;
    } else {
        writeln!(out, "{code}")?;
        for v in &validation.violations {
            writeln!(out, "violation: {v}")?;
        }
        for w in &validation.warnings {
            writeln!(out, "warning: {w}")?;
        }
    }
    Ok(if validation.is_ok() { 0 } else { 1 })
}

fn decode(cfg: &RunConfig, text: &str, out: &mut dyn Write) -> Result<i32, CliError> {
    let code = MotionCode::parse(text)?;
    let validation = code.validate();
    let lex = MotionLexicon::table_seed(cfg.lexicon_variant.into());
    let motions: Vec<&str> = lex
        .entries()
        .iter()
        .filter(|e| e.code == code)
        .map(|e| e.label.as_str())
        .collect();
    let attrs = code.describe();
    if cfg.json {
        let attributes: BTreeMap<&str, &str> =
            attrs.iter().map(|(k, v)| (*k, v.as_str())).collect();
        emit_json(
            out,
            &json!({
                "code": code,
                "attributes": attributes,
                "validation": validation,
                "motions": motions,
            }),
        )?;
    } else {
        writeln!(out, "code: {code}")?;
        for (k, v) in &attrs {
            writeln!(out, "{k}: {v}")?;
        }
        if !motions.is_empty() {
            writeln!(out, "motions: {}", motions.join(", "))?;
        }
        for v in &validation.violations {
            writeln!(out, "violation: {v}")?;
        }
        for w in &validation.warnings {
            writeln!(out, "warning: {w}")?;
        }
    }
    Ok(0)
}

fn validate(cfg: &RunConfig, text: &str, out: &mut dyn Write) -> Result<i32, CliError> {
    let code = MotionCode::parse(text)?;
    let validation = code.validate();
    if cfg.json {
        emit_json(out, &json!({"code": code, "ok": validation.is_ok(), "validation": validation}))?;
    } else {
        if validation.is_ok() {
            writeln!(out, "{code}: ok")?;
        }
        for v in &validation.violations {
            writeln!(out, "{code}: violation: {v}")?;
        }
        for w in &validation.warnings {
            writeln!(out, "{code}: warning: {w}")?;
        }
    }
    Ok(if validation.is_ok() { 0 } else { 1 })
}

fn dist(
    cfg: &RunConfig,
    a: &str,
    b: &str,
    weights: Option<&[f64]>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let a = MotionCode::parse(a)?;
    let b = MotionCode::parse(b)?;
    let w = match weights {
        Some(w) => {
            let arr: [f64; 8] = w
                .try_into()
                .map_err(|_| CliError::Usage("--weights needs exactly 8 values".into()))?;
            CodeDistanceWeights::new(arr).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => CodeDistanceWeights::uniform(),
    };
    let d = code_distance(a, b, &w);
    if cfg.json {
        emit_json(out, &json!({"a": a, "b": b, "distance": d}))?;
    } else {
        writeln!(out, "{d}")?;
    }
    Ok(0)
}

fn consolidate_cmd(
    cfg: &RunConfig,
    file: &Path,
    lex_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    check_input(file)?;
    let lex = lexicon(cfg, lex_path)?;
    let text = fs::read_to_string(file)?;
    let labels: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let result = consolidate(&labels, &lex);
    if cfg.json {
        emit_json(out, &result)?;
    } else {
        for (code, group) in &result.groups {
            writeln!(out, "{code}: {}", group.join(", "))?;
        }
        if !result.unknowns.is_empty() {
            writeln!(out, "unknown: {}", result.unknowns.join(", "))?;
        }
    }
    Ok(0)
}

fn foon_stats(cfg: &RunConfig, args: &FoonStatsArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    check_input(&args.file)?;
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    if args.top < 1 {
        return Err(CliError::Usage("--top must be at least 1".into()));
    }
    let text = fs::read_to_string(&args.file)?;
    let mut graph = foon::parse_foon(&text)?;
    let mut unknown = Vec::new();
    if let Some(lex_path) = &args.annotate {
        let lex = lexicon(cfg, Some(lex_path))?;
        let (annotated, missing) = foon::annotate_motions(&graph, &lex);
        graph = annotated;
        unknown = missing;
    }
    let counts = foon::node_counts(&graph);
    let report = foon::motion_frequency(&graph)?;
    let coverage = report.top_k_coverage(args.top)?;
    if let Some(p) = &args.out {
        report.write_csv(fs::File::create(p)?).map_err(|e| CliError::Data(e.to_string()))?;
    }
    if cfg.json {
        let top: Vec<_> = report.rows.iter().take(args.top).collect();
        emit_json(
            out,
            &json!({
                "nodes": counts,
                "distinct_motions": report.rows.len(),
                "top": args.top,
                "top_coverage": coverage,
                "rows": top,
                "unknown_labels": unknown,
            }),
        )?;
    } else {
        writeln!(
            out,
            "objects: {}\nmotions: {}\ntotal: {}\ndistinct motions: {}",
            counts.objects,
            counts.motions,
            counts.total,
            report.rows.len()
        )?;
        writeln!(out, "top-{} coverage: {:.4}", args.top, coverage)?;
        for (i, row) in report.rows.iter().take(args.top).enumerate() {
            let code = row.code.map(|c| format!("  {c}")).unwrap_or_default();
            writeln!(
                out,
                "{:>3}  {:<24} {:>6}  {:>6.2}%{code}",
                i + 1,
                row.motion,
                row.count,
                100.0 * row.share
            )?;
        }
        if !unknown.is_empty() {
            writeln!(out, "unannotated: {}", unknown.join(", "))?;
        }
    }
    Ok(0)
}

fn synth(
    cfg: &RunConfig,
    spec: &Path,
    n: usize,
    path: &Path,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let seed = require_seed(cfg, "synth")?;
    if n < 1 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let g = load_mixture(spec)?;
    check_output(path)?;
    let m = synth_generate(&g, n, seed)?;
    m.write_csv(std::io::BufWriter::new(fs::File::create(path)?))?;
    if cfg.json {
        emit_json(out, &json!({"rows": n, "dims": m.dims(), "seed": seed, "out": path}))?;
    } else {
        writeln!(out, "wrote {n} x {} samples to {}", m.dims(), path.display())?;
    }
    Ok(0)
}

fn read_samples(path: &Path, channels: ChannelsArg) -> Result<SampleMatrix, CliError> {
    check_input(path)?;
    if path.is_dir() {
        let trials = ftdata::load_trials(path)?;
        let chans: &[ftdata::Channel] = match channels {
            ChannelsArg::Force => &ftdata::Channel::FORCE,
            ChannelsArg::All => &ftdata::Channel::ALL,
        };
        return Ok(ftdata::pool_samples(&trials, chans, false)?);
    }
    let m = SampleMatrix::read_csv(fs::File::open(path)?)?;
    let is_trial = m.dims() == 6
        && m.channels()
            .iter()
            .zip(ftdata::Channel::ALL)
            .all(|(a, b)| a.eq_ignore_ascii_case(b.name()));
    if is_trial && channels == ChannelsArg::Force {
        return Ok(m.select(&["fx", "fy", "fz"])?);
    }
    Ok(m)
}

fn fit(cfg: &RunConfig, args: &FitArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let seed = require_seed(cfg, "fit")?;
    check_output(&args.out)?;
    if let Some(p) = &args.report {
        check_output(p)?;
    }
    let samples = read_samples(&args.input, args.channels)?;
    let policy = match args.standardize {
        StandardizeArg::None => StandardizePolicy::None,
        StandardizeArg::Zscore => StandardizePolicy::ZScore,
    };
    let (samples, transform) = standardize(&samples, policy)?;
    let em = EmConfig {
        k: args.k,
        max_iters: args.max_iters,
        init: match args.init {
            InitArg::Kmeans => InitPolicy::KMeans,
            InitArg::Random => InitPolicy::RandomFromData,
        },
        seed,
        ..EmConfig::default()
    };
    let (outcome, sweep) = if args.bic {
        let (o, s) = select_k_by_bic(&samples, &em, &[1, 2, 3, 4, 5])?;
        (o, Some(s))
    } else {
        (fit_em(&samples, &em)?, None)
    };
    fs::write(&args.out, outcome.mixture.to_json() + "\n")?;
    let report = json!({
        "input": args.input,
        "rows": samples.nrows(),
        "channels": samples.channels(),
        "config": em,
        "standardization": transform,
        "bic": sweep,
        "fit": outcome.report,
    });
    if let Some(p) = &args.report {
        fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    if cfg.json {
        emit_json(out, &report)?;
    } else {
        writeln!(
            out,
            "fitted k={} on {} x {} samples: log-likelihood {:.6}, {} iterations{}{}",
            outcome.report.k,
            samples.nrows(),
            samples.dims(),
            outcome.report.log_likelihood,
            outcome.report.iterations,
            if outcome.report.converged { "" } else { " (not converged)" },
            if outcome.report.degenerate { " (degenerate data)" } else { "" },
        )?;
        if transform.any_constant() {
            writeln!(out, "note: constant channels left unscaled")?;
        }
    }
    Ok(0)
}

fn kl(
    cfg: &RunConfig,
    f_path: &Path,
    g_path: &Path,
    mc: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let f = load_mixture(f_path)?;
    let g = load_mixture(g_path)?;
    let seed = match mc {
        Some(_) => Some(require_seed(cfg, "kl --mc")?),
        None => None,
    };
    let fg = variational_kl(&f, &g)?;
    let gf = variational_kl(&g, &f)?;
    let sym = symmetric_divergence(&f, &g)?;
    let mc_est = match (mc, seed) {
        (Some(n), Some(s)) => Some((mc_kl(&f, &g, n, s)?, mc_kl(&g, &f, n, s)?)),
        _ => None,
    };
    if cfg.json {
        emit_json(
            out,
            &json!({
                "variational_fg": fg,
                "variational_gf": gf,
                "symmetric": sym,
                "mc_fg": mc_est.map(|m| m.0),
                "mc_gf": mc_est.map(|m| m.1),
            }),
        )?;
    } else {
        let flag = |c: bool| if c { " (clamped)" } else { "" };
        writeln!(out, "variational KL(f||g): {}{}", fg.value, flag(fg.clamped))?;
        writeln!(out, "variational KL(g||f): {}{}", gf.value, flag(gf.clamped))?;
        writeln!(out, "symmetric: {}{}", sym.value, flag(sym.clamped))?;
        if let Some((a, b)) = mc_est {
            writeln!(out, "monte carlo KL(f||g): {} +/- {}", a.value, a.std_error)?;
            writeln!(out, "monte carlo KL(g||f): {} +/- {}", b.value, b.std_error)?;
        }
    }
    Ok(0)
}

/// Loads `<label>_<variant>.json` mixtures, grouped by label in sorted order.
pub fn load_models_dir(dir: &Path) -> Result<Vec<MotionModels>, CliError> {
    check_input(dir)?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().map(|e| e == "json").unwrap_or(false))
        .collect();
    files.sort();
    let mut grouped: BTreeMap<String, Vec<GaussianMixture>> = BTreeMap::new();
    for f in &files {
        let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let (label, _) = split_trial_name(&stem);
        grouped.entry(label).or_default().push(load_mixture(f)?);
    }
    if grouped.is_empty() {
        return Err(CliError::Data(format!("{}: no model files", dir.display())));
    }
    Ok(grouped
        .into_iter()
        .map(|(label, variants)| MotionModels { label, variants })
        .collect())
}

fn matrix(
    cfg: &RunConfig,
    models_dir: &Path,
    path: &Path,
    heatmap: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    check_output(path)?;
    if let Some(h) = heatmap {
        check_output(h)?;
    }
    let models = load_models_dir(models_dir)?;
    let m = divergence_matrix(&models)?;
    analysis::export_matrix_csv(&m, path)?;
    if let Some(h) = heatmap {
        analysis::export_heatmap(&m, h)?;
    }
    if cfg.json {
        emit_json(
            out,
            &json!({
                "labels": m.labels(),
                "variants": models.iter().map(|m| m.variants.len()).collect::<Vec<_>>(),
                "clamped_pairs": m.metadata.clamped_pairs,
                "out": path,
            }),
        )?;
    } else {
        writeln!(out, "wrote {} x {} matrix to {}", m.len(), m.len(), path.display())?;
        for (a, b) in &m.metadata.clamped_pairs {
            writeln!(out, "clamped: {a} / {b}")?;
        }
    }
    Ok(0)
}

/// Resolves a matrix label to a code, also trying `_` and `-` as spaces.
fn resolve_label(lex: &MotionLexicon, label: &str) -> Option<MotionCode> {
    lex.lookup(label)
        .or_else(|_| lex.lookup(&label.replace('_', " ")))
        .or_else(|_| lex.lookup(&normalize_label(&label.replace(['_', '-'], " "))))
        .ok()
}

fn eval(
    cfg: &RunConfig,
    matrix_path: &Path,
    lex_path: Option<&Path>,
    out_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    check_input(matrix_path)?;
    if let Some(p) = out_path {
        check_output(p)?;
    }
    let lex = lexicon(cfg, lex_path)?;
    let m = analysis::import_matrix_csv(matrix_path)?;
    let mut codes = BTreeMap::new();
    let mut missing = Vec::new();
    for l in m.labels() {
        match resolve_label(&lex, l) {
            Some(c) => {
                codes.insert(l.clone(), c);
            }
            None => missing.push(l.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Data(format!(
            "no code for matrix labels: {}",
            missing.join(", ")
        )));
    }
    let report = cluster_consistency(&m, &codes)?;
    let checklist = analysis::qualitative_checklist(&m);
    let doc = json!({
        "codes": codes,
        "consistency": report,
        "checklist": checklist,
    });
    if let Some(p) = out_path {
        fs::write(p, serde_json::to_string_pretty(&doc)? + "\n")?;
    }
    if cfg.json {
        emit_json(out, &doc)?;
    } else {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
        writeln!(out, "intra mean: {}", opt(report.intra_mean))?;
        writeln!(out, "inter mean: {}", opt(report.inter_mean))?;
        writeln!(out, "ratio: {}", opt(report.ratio))?;
        writeln!(out, "nearest-neighbor code agreement: {:.4}", report.nn_agreement)?;
        writeln!(out, "rank correlation: {}", opt(report.rank_correlation))?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["manipcode"];
        argv.extend_from_slice(args);
        let code = dispatch(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn decode_prints_attributes() {
        let (code, out, _) = call(&["decode", "10111010"]);
        assert_eq!(code, 0);
        assert!(out.contains("contact: contact (1)"));
        assert!(out.contains("engagement: rigid engagement, moving (011)"));
        assert!(out.contains("trajectory: prismatic, non-revolute (10)"));
        assert!(out.contains("duration: continuous (1)"));
        assert!(out.contains("manual: unimanual (0)"));
        assert!(out.contains("pick-and-place"));
    }

    #[test]
    fn validate_and_dist() {
        let (code, out, _) = call(&["validate", "10011010"]);
        assert_eq!(code, 1);
        assert!(out.contains("illegal rigid subclass"));
        assert_eq!(call(&["validate", "10111010"]).0, 0);
        let (code, out, _) = call(&["dist", "11111010", "11111011"]);
        assert_eq!((code, out.as_str()), (0, "1\n"));
        let (code, out, _) = call(&["--json", "dist", "11111010", "11111011"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["distance"], 1.0);
    }

    #[test]
    fn usage_and_data_errors() {
        assert_eq!(call(&[]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        let (code, _, err) = call(&["decode", "1011"]);
        assert_eq!(code, 1);
        assert!(err.contains("8 characters"));
        let (code, _, err) = call(&["synth", "--spec", "x.json", "--n", "5", "--out", "y.csv"]);
        assert_eq!(code, 2);
        assert!(err.contains("--seed"));
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn encode_round_trip() {
        let (code, out, _) = call(&["encode", "contact", "soft", "admitting", "prismatic", "continuous"]);
        assert_eq!((code, out.as_str()), (0, "11001010\n"));
    }
}
