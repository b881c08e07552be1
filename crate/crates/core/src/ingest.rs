//! Delimited-text input layer.
//!
//! Four comma-separated files, one header row each, with lowercase
//! snake_case column names matching the record fields. Malformed rows are
//! quarantined in [`RawCohort::rejects`]; only unreadable files and missing
//! columns abort a parse.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Birads, ExamRecord, ExamType, FindingRecord, ImageScore, PathologyResult};

pub const EXAM_COLUMNS: &[&str] = &[
    "exam_id",
    "patient_id",
    "exam_date",
    "exam_type",
    "density",
    "race",
    "ethnicity",
    "age_at_exam",
];

pub const FINDING_COLUMNS: &[&str] = &[
    "finding_id",
    "exam_id",
    "laterality",
    "birads",
    "has_mass",
    "has_asymmetry",
    "has_arch_distortion",
    "has_calcification",
    "mass_shape",
    "mass_margin",
    "calc_morphology",
    "calc_distribution",
    "asymmetry_type",
];

pub const PATHOLOGY_COLUMNS: &[&str] =
    &["finding_id", "procedure", "severity", "subtype", "result_date"];

pub const SCORE_COLUMNS: &[&str] = &["exam_id", "image_id", "malignancy_score"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFile {
    Exams,
    Findings,
    Scores,
    Pathology,
}

impl InputFile {
    pub fn file_name(self) -> &'static str {
        match self {
            InputFile::Exams => "exams.csv",
            InputFile::Findings => "findings.csv",
            InputFile::Scores => "scores.csv",
            InputFile::Pathology => "pathology.csv",
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            InputFile::Exams => EXAM_COLUMNS,
            InputFile::Findings => FINDING_COLUMNS,
            InputFile::Scores => SCORE_COLUMNS,
            InputFile::Pathology => PATHOLOGY_COLUMNS,
        }
    }
}

impl fmt::Display for InputFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_name())
    }
}

/// Locations of the four input tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortPaths {
    pub exams: PathBuf,
    pub findings: PathBuf,
    pub scores: PathBuf,
    pub pathology: PathBuf,
}

impl CohortPaths {
    /// The canonical file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        CohortPaths {
            exams: dir.join(InputFile::Exams.file_name()),
            findings: dir.join(InputFile::Findings.file_name()),
            scores: dir.join(InputFile::Scores.file_name()),
            pathology: dir.join(InputFile::Pathology.file_name()),
        }
    }
}

/// A quarantined input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    pub file: InputFile,
    /// 1-based physical line number (the header is line 1).
    pub line: u64,
    pub record: String,
    pub reason: String,
}

/// Typed contents of the four input tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCohort {
    pub exams: Vec<ExamRecord>,
    pub findings: Vec<FindingRecord>,
    pub pathology: Vec<PathologyResult>,
    pub scores: Vec<ImageScore>,
    pub rejects: Vec<Reject>,
}

impl RawCohort {
    /// Exam-level scores: the maximum image score of every scored exam.
    ///
    /// Exams without image scores are absent from the map.
    pub fn exam_scores(&self) -> BTreeMap<String, f64> {
        let mut by_exam: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for s in &self.scores {
            by_exam
                .entry(s.exam_id.as_str())
                .or_default()
                .push(s.malignancy_score);
        }
        by_exam
            .into_iter()
            .map(|(id, scores)| {
                let score = aggregate_exam_scores(id, scores).expect("non-empty by construction");
                (id.to_owned(), score)
            })
            .collect()
    }
}

/// Exam-level score: the highest image malignancy score.
pub fn aggregate_exam_scores(
    exam_id: &str,
    scores: impl IntoIterator<Item = f64>,
) -> Result<f64> {
    scores
        .into_iter()
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |m| m.max(s))))
        .ok_or_else(|| Error::MissingScores {
            exam_id: exam_id.to_owned(),
        })
}

struct Table<T> {
    rows: Vec<(u64, String, T)>,
    rejects: Vec<Reject>,
}

fn read_table<T: DeserializeOwned>(path: &Path, file: InputFile) -> Result<Table<T>> {
    let handle = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(handle);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            file: file.to_string(),
            message: e.to_string(),
        })?
        .clone();
    for column in file.columns() {
        if !headers.iter().any(|h| h == *column) {
            return Err(Error::MissingColumn {
                file: file.to_string(),
                column: (*column).to_owned(),
            });
        }
    }

    let mut table = Table {
        rows: Vec::new(),
        rejects: Vec::new(),
    };
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map_or(line, |p| p.line());
                let raw = record.iter().collect::<Vec<_>>().join(",");
                match record.deserialize::<T>(Some(&headers)) {
                    Ok(row) => table.rows.push((line, raw, row)),
                    Err(e) => table.rejects.push(Reject {
                        file,
                        line,
                        record: raw,
                        reason: describe_csv_error(&e),
                    }),
                }
            }
            Err(e) => {
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(Error::Csv {
                        file: file.to_string(),
                        message: e.to_string(),
                    });
                }
                table.rejects.push(Reject {
                    file,
                    line: e.position().map_or(line, |p| p.line()),
                    record: String::new(),
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(table)
}

fn describe_csv_error(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(i) => format!("field {}: {}", i + 1, err.kind()),
            None => err.kind().to_string(),
        },
        _ => e.to_string(),
    }
}

/// Parses the four input tables into a [`RawCohort`].
///
/// Row order is preserved. Rows failing type conversion, range checks,
/// uniqueness or foreign-key resolution go to `rejects`, each with a reason.
pub fn parse_cohort(paths: &CohortPaths) -> Result<RawCohort> {
    let exams: Table<ExamRecord> = read_table(&paths.exams, InputFile::Exams)?;
    let findings: Table<FindingRecord> = read_table(&paths.findings, InputFile::Findings)?;
    let scores: Table<ImageScore> = read_table(&paths.scores, InputFile::Scores)?;
    let pathology: Table<PathologyResult> = read_table(&paths.pathology, InputFile::Pathology)?;

    let mut cohort = RawCohort::default();
    let mut rejects = Vec::new();
    let reject = |rejects: &mut Vec<Reject>, file, line, record: String, reason: String| {
        rejects.push(Reject {
            file,
            line,
            record,
            reason,
        })
    };

    rejects.extend(exams.rejects);
    let mut exam_dates = HashMap::new();
    for (line, raw, exam) in exams.rows {
        if exam_dates.contains_key(&exam.exam_id) {
            reject(&mut rejects, InputFile::Exams, line, raw, "duplicate exam_id".into());
            continue;
        }
        exam_dates.insert(exam.exam_id.clone(), exam.exam_date);
        cohort.exams.push(exam);
    }

    rejects.extend(findings.rejects);
    let mut finding_exam = HashMap::new();
    for (line, raw, finding) in findings.rows {
        let reason = if finding_exam.contains_key(&finding.finding_id) {
            Some("duplicate finding_id".to_owned())
        } else if !exam_dates.contains_key(&finding.exam_id) {
            Some(format!("unknown exam_id `{}`", finding.exam_id))
        } else {
            finding
                .orphan_descriptor()
                .map(|field| format!("{field} set without matching finding flag"))
        };
        if let Some(reason) = reason {
            reject(&mut rejects, InputFile::Findings, line, raw, reason);
            continue;
        }
        finding_exam.insert(finding.finding_id.clone(), finding.exam_id.clone());
        cohort.findings.push(finding);
    }

    rejects.extend(scores.rejects);
    for (line, raw, score) in scores.rows {
        let reason = if !(0.0..=1.0).contains(&score.malignancy_score) {
            Some("score out of [0,1]".to_owned())
        } else if !exam_dates.contains_key(&score.exam_id) {
            Some(format!("unknown exam_id `{}`", score.exam_id))
        } else {
            None
        };
        match reason {
            Some(reason) => reject(&mut rejects, InputFile::Scores, line, raw, reason),
            None => cohort.scores.push(score),
        }
    }

    rejects.extend(pathology.rejects);
    for (line, raw, result) in pathology.rows {
        let exam_date = finding_exam
            .get(&result.finding_id)
            .and_then(|exam_id| exam_dates.get(exam_id));
        let reason = match exam_date {
            None => Some(format!("unknown finding_id `{}`", result.finding_id)),
            Some(date) if result.result_date < *date => {
                Some("result_date precedes exam_date".to_owned())
            }
            Some(_) => None,
        };
        match reason {
            Some(reason) => reject(&mut rejects, InputFile::Pathology, line, raw, reason),
            None => cohort.pathology.push(result),
        }
    }

    cohort.rejects = rejects;
    Ok(cohort)
}

fn write_table<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let wrap = |e: csv::Error| Error::Write {
        path: path.to_owned(),
        source: std::io::Error::other(e),
    };
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(wrap)?;
    writer.write_record(header).map_err(wrap)?;
    for row in rows {
        writer.serialize(row).map_err(wrap)?;
    }
    writer.flush().map_err(|source| Error::Write {
        path: path.to_owned(),
        source,
    })
}

/// Writes the accepted rows of `cohort` as the four input tables in `dir`.
pub fn write_cohort(cohort: &RawCohort, dir: impl AsRef<Path>) -> Result<CohortPaths> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.to_owned(),
        source,
    })?;
    let paths = CohortPaths::in_dir(dir);
    write_table(&paths.exams, &cohort.exams, EXAM_COLUMNS)?;
    write_table(&paths.findings, &cohort.findings, FINDING_COLUMNS)?;
    write_table(&paths.scores, &cohort.scores, SCORE_COLUMNS)?;
    write_table(&paths.pathology, &cohort.pathology, PATHOLOGY_COLUMNS)?;
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueKind {
    /// B0 on a diagnostic exam, or B3/B4/B5 on a screening exam.
    InvalidBiradsForExamType,
    /// Exam with no finding rows, so no assessment at all.
    MissingBirads,
    DanglingFinding,
    DanglingScore,
    DanglingPathology,
    PathologyBeforeExam,
    /// Screening exam with no image scores.
    NoScores,
}

impl IssueKind {
    pub fn token(self) -> &'static str {
        match self {
            IssueKind::InvalidBiradsForExamType => "INVALID_BIRADS_FOR_EXAM_TYPE",
            IssueKind::MissingBirads => "MISSING_BIRADS",
            IssueKind::DanglingFinding => "DANGLING_FINDING",
            IssueKind::DanglingScore => "DANGLING_SCORE",
            IssueKind::DanglingPathology => "DANGLING_PATHOLOGY",
            IssueKind::PathologyBeforeExam => "PATHOLOGY_BEFORE_EXAM",
            IssueKind::NoScores => "NO_SCORES",
        }
    }

    /// Issues that make an exam's assessment unusable for labeling.
    pub fn excludes_exam(self) -> bool {
        matches!(
            self,
            IssueKind::InvalidBiradsForExamType | IssueKind::MissingBirads
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    /// Key of the offending row: an exam id, finding id or image id.
    pub record_id: String,
    /// Exam the issue attaches to, when it resolves to one.
    pub exam_id: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    /// Exams whose assessment is unusable; the labeler excludes any screen
    /// that depends on one of these.
    pub fn exclusion_candidates(&self) -> BTreeSet<&str> {
        self.issues
            .iter()
            .filter(|i| i.kind.excludes_exam())
            .filter_map(|i| i.exam_id.as_deref())
            .collect()
    }

    pub fn count(&self, kind: IssueKind) -> usize {
        self.issues.iter().filter(|i| i.kind == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_table(
            path,
            &self
                .issues
                .iter()
                .map(|i| {
                    (
                        i.kind.token(),
                        i.record_id.as_str(),
                        i.exam_id.as_deref().unwrap_or(""),
                        i.detail.as_str(),
                    )
                })
                .collect::<Vec<_>>(),
            &["kind", "record_id", "exam_id", "detail"],
        )
    }
}

/// Consistency checks across the typed tables. Never fails; every problem is
/// reported as an [`Issue`], sorted by kind and record id.
pub fn validate_cohort(raw: &RawCohort) -> ValidationReport {
    let exams: HashMap<&str, &ExamRecord> =
        raw.exams.iter().map(|e| (e.exam_id.as_str(), e)).collect();
    let mut findings_by_exam: HashMap<&str, Vec<&FindingRecord>> = HashMap::new();
    let mut issues = Vec::new();

    for f in &raw.findings {
        if exams.contains_key(f.exam_id.as_str()) {
            findings_by_exam.entry(f.exam_id.as_str()).or_default().push(f);
        } else {
            issues.push(Issue {
                kind: IssueKind::DanglingFinding,
                record_id: f.finding_id.clone(),
                exam_id: None,
                detail: format!("exam_id `{}` not found", f.exam_id),
            });
        }
    }

    let scored: HashSet<&str> = raw.scores.iter().map(|s| s.exam_id.as_str()).collect();
    for s in &raw.scores {
        if !exams.contains_key(s.exam_id.as_str()) {
            issues.push(Issue {
                kind: IssueKind::DanglingScore,
                record_id: s.image_id.clone(),
                exam_id: None,
                detail: format!("exam_id `{}` not found", s.exam_id),
            });
        }
    }

    for exam in &raw.exams {
        let id = exam.exam_id.as_str();
        let findings = findings_by_exam.get(id).map(Vec::as_slice).unwrap_or(&[]);
        if findings.is_empty() {
            issues.push(Issue {
                kind: IssueKind::MissingBirads,
                record_id: id.to_owned(),
                exam_id: Some(id.to_owned()),
                detail: format!("{} exam has no findings", exam.exam_type),
            });
        }
        let bad: Vec<Birads> = findings
            .iter()
            .map(|f| f.birads)
            .filter(|b| match exam.exam_type {
                ExamType::Screening => matches!(b, Birads::B3 | Birads::B4 | Birads::B5),
                ExamType::Diagnostic => *b == Birads::B0,
            })
            .collect();
        if let Some(b) = bad.iter().max() {
            issues.push(Issue {
                kind: IssueKind::InvalidBiradsForExamType,
                record_id: id.to_owned(),
                exam_id: Some(id.to_owned()),
                detail: format!("invalid BI-RADS for exam type: {b} on {}", exam.exam_type),
            });
        }
        if exam.exam_type == ExamType::Screening && !scored.contains(id) {
            issues.push(Issue {
                kind: IssueKind::NoScores,
                record_id: id.to_owned(),
                exam_id: Some(id.to_owned()),
                detail: "screening exam has no image scores".to_owned(),
            });
        }
    }

    let finding_exam: HashMap<&str, &str> = raw
        .findings
        .iter()
        .map(|f| (f.finding_id.as_str(), f.exam_id.as_str()))
        .collect();
    for p in &raw.pathology {
        let exam = finding_exam
            .get(p.finding_id.as_str())
            .and_then(|e| exams.get(e));
        match exam {
            None => issues.push(Issue {
                kind: IssueKind::DanglingPathology,
                record_id: p.finding_id.clone(),
                exam_id: None,
                detail: "finding_id not found".to_owned(),
            }),
            Some(exam) if p.result_date < exam.exam_date => issues.push(Issue {
                kind: IssueKind::PathologyBeforeExam,
                record_id: p.finding_id.clone(),
                exam_id: Some(exam.exam_id.clone()),
                detail: format!("result {} before exam {}", p.result_date, exam.exam_date),
            }),
            Some(_) => {}
        }
    }

    issues.sort();
    issues.dedup();
    ValidationReport { issues }
}
