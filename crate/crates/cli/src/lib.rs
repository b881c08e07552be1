//! `screeval` command-line front end.
//!
//! Each subcommand is a plain function over a [`RunConfig`] so that tests can
//! drive the pipeline without spawning the binary. Settings come from an
//! optional TOML file; flags override the file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Deserializer, Serialize};

use screeval_core::ingest::{parse_cohort, validate_cohort, write_cohort, CohortPaths, RawCohort, Reject};
use screeval_core::labeler::{label_cohort, LabelSummary};
use screeval_core::linkage::TemporalWindows;
use screeval_core::metrics::{BootstrapConfig, PermutationConfig, DEFAULT_THRESHOLD};
use screeval_core::report::{build_report, overall_line, write_report, ReportConfig, DEFAULT_HISTOGRAM_BINS};
use screeval_core::rng::{self, stage};
use screeval_core::stratify::Axis;
use screeval_core::synth::{generate_cohort, paper_replica_raw, CohortBlueprint};
use screeval_core::LabeledCohort;

pub use screeval_core as core;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] screeval_core::Error),

    #[error("no binary-class exams")]
    NoBinaryClassExams,

    #[error("no {0} file given (use --{0} or --input-dir)")]
    MissingInput(&'static str),

    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },

    #[error("cannot start thread pool: {0}")]
    Threads(String),
}

impl CliError {
    /// 0 success, 1 runtime failure, 2 input or schema error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::MissingInput(_) | CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn parse_axes<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Axis>, D::Error> {
    let names = Vec::<String>::deserialize(d)?;
    names
        .iter()
        .map(|n| Axis::parse(n).map_err(serde::de::Error::custom))
        .collect()
}

/// Everything a run needs. `seed` is the single source of randomness; the
/// bootstrap and permutation seeds are derived from it per stage and any
/// seed set in their own sections is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding exams.csv, findings.csv, scores.csv, pathology.csv.
    pub input_dir: Option<PathBuf>,
    pub exams: Option<PathBuf>,
    pub findings: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub pathology: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threshold: f64,
    pub seed: u64,
    /// Worker threads; all cores when unset.
    pub threads: Option<usize>,
    #[serde(deserialize_with = "parse_axes")]
    pub axes: Vec<Axis>,
    pub histogram_bins: usize,
    /// Percentile CIs; off when `bootstrap.n_resamples` is 0.
    pub bootstrap: BootstrapConfig,
    /// Invasive vs non-invasive AUROC test; off when `n_permutations` is 0.
    pub permutation: PermutationConfig,
    pub windows: TemporalWindows,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_dir: None,
            exams: None,
            findings: None,
            scores: None,
            pathology: None,
            out_dir: PathBuf::from("screeval-out"),
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            threads: None,
            axes: Axis::ALL.to_vec(),
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            bootstrap: BootstrapConfig::default(),
            permutation: PermutationConfig::default(),
            windows: TemporalWindows::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, path)
    }

    /// Resolved input files; explicit paths win over `input_dir`.
    pub fn input_paths(&self) -> Result<CohortPaths> {
        let base = self.input_dir.as_ref().map(CohortPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, from_dir: Option<&PathBuf>, name| {
            explicit
                .clone()
                .or_else(|| from_dir.cloned())
                .ok_or(CliError::MissingInput(name))
        };
        Ok(CohortPaths {
            exams: pick(&self.exams, base.as_ref().map(|b| &b.exams), "exams")?,
            findings: pick(&self.findings, base.as_ref().map(|b| &b.findings), "findings")?,
            scores: pick(&self.scores, base.as_ref().map(|b| &b.scores), "scores")?,
            pathology: pick(&self.pathology, base.as_ref().map(|b| &b.pathology), "pathology")?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(screeval_core::Error::InvalidConfig(format!("threshold {} outside [0,1]", self.threshold)).into());
        }
        if self.histogram_bins == 0 {
            return Err(screeval_core::Error::InvalidConfig("histogram_bins must be positive".into()).into());
        }
        if self.threads == Some(0) {
            return Err(screeval_core::Error::InvalidConfig("threads must be positive".into()).into());
        }
        self.windows.validate()?;
        Ok(())
    }

    pub fn report_config(&self) -> ReportConfig {
        ReportConfig {
            threshold: self.threshold,
            histogram_bins: self.histogram_bins,
            axes: self.axes.clone(),
            bootstrap: (self.bootstrap.n_resamples > 0).then(|| BootstrapConfig {
                seed: rng::derive_seed(self.seed, stage::BOOTSTRAP),
                ..self.bootstrap
            }),
            permutation: (self.permutation.n_permutations > 0).then(|| PermutationConfig {
                seed: rng::derive_seed(self.seed, stage::PERMUTATION),
                ..self.permutation
            }),
        }
    }
}

// ---------------------------------------------------------------- arguments

#[derive(Debug, Parser)]
#[command(name = "screeval", version, about = "Ground-truth labels and subgroup evaluation for screening-mammography AI scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the four input tables and write validation_report.csv.
    Validate(RunArgs),
    /// Assign outcome labels and write labels.csv.
    Label(RunArgs),
    /// Label, then compute metrics, distributions and failure analysis.
    Evaluate(RunArgs),
    /// Write a synthetic cohort and its ground-truth ledger.
    Synth(SynthArgs),
}

#[derive(Debug, Default, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory with exams.csv, findings.csv, scores.csv and pathology.csv.
    #[arg(long)]
    pub input_dir: Option<PathBuf>,
    #[arg(long)]
    pub exams: Option<PathBuf>,
    #[arg(long)]
    pub findings: Option<PathBuf>,
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub pathology: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Operating point; exams scoring at or above it are called positive.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Comma-separated stratification axes, e.g. race,age,cancer_type.
    #[arg(long)]
    pub axes: Option<String>,
    #[arg(long)]
    pub histogram_bins: Option<usize>,
    /// Bootstrap resamples per metric; 0 disables confidence intervals.
    #[arg(long)]
    pub bootstrap_resamples: Option<usize>,
    /// Permutations for the AUROC comparison; 0 disables it.
    #[arg(long)]
    pub permutations: Option<usize>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                }
            )*};
        }
        set!(input_dir, exams, findings, scores, pathology, threads);
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.axes {
            cfg.axes = Axis::parse_list(v)?;
        }
        if let Some(v) = self.histogram_bins {
            cfg.histogram_bins = v;
        }
        if let Some(v) = self.bootstrap_resamples {
            cfg.bootstrap.n_resamples = v;
        }
        if let Some(v) = self.permutations {
            cfg.permutation.n_permutations = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Default, Clone, Args)]
pub struct SynthArgs {
    /// TOML cohort blueprint; the default blueprint when omitted.
    #[arg(long)]
    pub blueprint: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the blueprint's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the blueprint's patient count.
    #[arg(long)]
    pub n_patients: Option<usize>,
    /// Write the population reconstructed from the published counts
    /// instead of sampling a blueprint.
    #[arg(long, conflicts_with_all = ["blueprint", "n_patients"])]
    pub replica: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

// ---------------------------------------------------------------- commands

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Threads(e.to_string()))?;
    pool.install(f)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| {
        screeval_core::Error::Write {
            path: dir.to_owned(),
            source,
        }
        .into()
    })
}

fn write_rejects(rejects: &[Reject], path: &Path) -> Result<()> {
    let mut out = String::from("file,line,reason,record\n");
    for r in rejects {
        let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
        out.push_str(&format!("{},{},{},{}\n", r.file, r.line, quote(&r.reason), quote(&r.record)));
    }
    fs::write(path, out).map_err(|source| {
        screeval_core::Error::Write {
            path: path.to_owned(),
            source,
        }
        .into()
    })
}

fn load(cfg: &RunConfig) -> Result<RawCohort> {
    let paths = cfg.input_paths()?;
    let raw = parse_cohort(&paths)?;
    if !raw.rejects.is_empty() {
        log::warn!("{} input rows rejected; see rejects.csv", raw.rejects.len());
    }
    Ok(raw)
}

/// What a command reports on standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub written: Vec<PathBuf>,
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<Outcome> {
    with_threads(cfg.threads, || {
        let raw = load(cfg)?;
        let report = validate_cohort(&raw);
        create_dir(&cfg.out_dir)?;
        let report_path = cfg.out_dir.join("validation_report.csv");
        report.write_csv(&report_path)?;
        let rejects_path = cfg.out_dir.join("rejects.csv");
        write_rejects(&raw.rejects, &rejects_path)?;
        let stdout = format!(
            "exams={} findings={} pathology={} scores={} rejected_rows={} issues={} excluded_exams={}",
            raw.exams.len(),
            raw.findings.len(),
            raw.pathology.len(),
            raw.scores.len(),
            raw.rejects.len(),
            report.issues.len(),
            report.exclusion_candidates().len(),
        );
        Ok(Outcome {
            stdout,
            written: vec![rejects_path, report_path],
        })
    })
}

fn label(cfg: &RunConfig) -> Result<(RawCohort, LabeledCohort)> {
    let raw = load(cfg)?;
    let cohort = label_cohort(&raw, &cfg.windows)?;
    Ok((raw, cohort))
}

fn summary_line(cohort: &LabeledCohort) -> String {
    let s = LabelSummary::from(cohort);
    let mut parts = vec![format!("screening_exams={}", s.screening_exams)];
    parts.extend(s.labels.iter().map(|(l, n)| format!("{l}={n}")));
    parts.extend(s.exclusions.iter().filter(|(_, n)| **n > 0).map(|(r, n)| format!("excluded.{r}={n}")));
    parts.join(" ")
}

pub fn cmd_label(cfg: &RunConfig) -> Result<Outcome> {
    with_threads(cfg.threads, || {
        let (raw, cohort) = label(cfg)?;
        create_dir(&cfg.out_dir)?;
        let labels = cfg.out_dir.join("labels.csv");
        cohort.write_labels(&labels)?;
        let validation = cfg.out_dir.join("validation_report.csv");
        cohort.validation.write_csv(&validation)?;
        let rejects = cfg.out_dir.join("rejects.csv");
        write_rejects(&raw.rejects, &rejects)?;
        Ok(Outcome {
            stdout: summary_line(&cohort),
            written: vec![labels, rejects, validation],
        })
    })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Outcome> {
    with_threads(cfg.threads, || {
        let (raw, cohort) = label(cfg)?;
        if cohort.evaluable().next().is_none() {
            return Err(CliError::NoBinaryClassExams);
        }
        let report = build_report(&cohort, &cfg.report_config())?;
        let mut written = write_report(&report, &cohort, &cfg.out_dir)?;
        let rejects = cfg.out_dir.join("rejects.csv");
        write_rejects(&raw.rejects, &rejects)?;
        written.push(rejects);
        written.sort();
        Ok(Outcome {
            stdout: overall_line(report.overall()),
            written,
        })
    })
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Outcome> {
    with_threads(args.threads, || {
        let (raw, ledger) = if args.replica {
            paper_replica_raw(args.seed.unwrap_or(0))
        } else {
            let mut bp = match &args.blueprint {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| CliError::Config {
                        path: p.clone(),
                        message: e.to_string(),
                    })?;
                    CohortBlueprint::from_toml(&text)?
                }
                None => CohortBlueprint::default(),
            };
            if let Some(s) = args.seed {
                bp.seed = s;
            }
            if let Some(n) = args.n_patients {
                bp.n_patients = n;
            }
            generate_cohort(&bp)?
        };
        let paths = write_cohort(&raw, &args.out_dir)?;
        let ledger_path = args.out_dir.join("ledger.csv");
        ledger.write_csv(&ledger_path)?;
        let patients: std::collections::BTreeSet<&str> = raw.exams.iter().map(|e| e.patient_id.as_str()).collect();
        Ok(Outcome {
            stdout: format!(
                "patients={} exams={} screening_exams={} findings={} pathology={} scores={}",
                patients.len(),
                raw.exams.len(),
                ledger.rows.len(),
                raw.findings.len(),
                raw.pathology.len(),
                raw.scores.len()
            ),
            written: vec![paths.exams, paths.findings, paths.scores, paths.pathology, ledger_path],
        })
    })
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(&a.resolve()?),
        Command::Label(a) => cmd_label(&a.resolve()?),
        Command::Evaluate(a) => cmd_evaluate(&a.resolve()?),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            let _ = writeln!(stdout, "{}", out.stdout);
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "screeval: {e}");
            e.exit_code()
        }
    }
}
