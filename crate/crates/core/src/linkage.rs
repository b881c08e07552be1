//! Per-patient timelines and follow-up resolution.
//!
//! A diagnostic exam belongs to the nearest screening exam strictly before
//! it, so no diagnostic is ever attached to two screens. Within that
//! ownership, the recall window decides which diagnostics count as the
//! screen's workup and the interval window decides which can reveal an
//! interval cancer.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RawCohort;
use crate::model::{ExamRecord, ExamType, FindingRecord, PathologyResult, Procedure, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalWindows {
    /// Recall workup window after an abnormal screen (6 months).
    pub diagnostic_followup_days: u32,
    /// Window in which a cancer after a normal screen is an interval cancer.
    pub interval_cancer_days: u32,
    pub negative_followup_min_days: u32,
    pub negative_followup_max_days: u32,
}

impl Default for TemporalWindows {
    fn default() -> Self {
        TemporalWindows {
            diagnostic_followup_days: 183,
            interval_cancer_days: 365,
            negative_followup_min_days: 0,
            negative_followup_max_days: 365,
        }
    }
}

impl TemporalWindows {
    /// Negative screens need a follow-up between one and four years out.
    pub fn one_to_four_years() -> Self {
        TemporalWindows {
            negative_followup_min_days: 365,
            negative_followup_max_days: 4 * 365 + 1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.diagnostic_followup_days == 0 {
            return Err(Error::InvalidConfig(
                "diagnostic_followup_days must be positive".into(),
            ));
        }
        if self.negative_followup_max_days == 0 {
            return Err(Error::InvalidConfig(
                "negative_followup_max_days must be positive".into(),
            ));
        }
        if self.negative_followup_min_days > self.negative_followup_max_days {
            return Err(Error::InvalidConfig(format!(
                "negative follow-up window is empty: min {} > max {}",
                self.negative_followup_min_days, self.negative_followup_max_days
            )));
        }
        Ok(())
    }

    fn horizon(&self) -> i64 {
        self.diagnostic_followup_days
            .max(self.interval_cancer_days)
            .max(self.negative_followup_max_days) as i64
    }
}

/// Exams grouped by patient, ordered by date with screening before
/// diagnostic on the same day, then by exam id.
pub type Timelines<'a> = BTreeMap<&'a str, Vec<&'a ExamRecord>>;

fn timeline_key(e: &ExamRecord) -> (chrono::NaiveDate, ExamType, &str) {
    (e.exam_date, e.exam_type, e.exam_id.as_str())
}

pub fn build_timelines(cohort: &RawCohort) -> Timelines<'_> {
    let mut timelines: Timelines<'_> = BTreeMap::new();
    for exam in &cohort.exams {
        timelines.entry(exam.patient_id.as_str()).or_default().push(exam);
    }
    for exams in timelines.values_mut() {
        exams.sort_by(|a, b| timeline_key(a).cmp(&timeline_key(b)));
    }
    timelines
}

/// Finding and pathology lookups keyed by exam.
#[derive(Debug, Default)]
pub struct RecordIndex<'a> {
    findings: HashMap<&'a str, Vec<&'a FindingRecord>>,
    pathology: HashMap<&'a str, Vec<&'a PathologyResult>>,
}

impl<'a> RecordIndex<'a> {
    pub fn new(cohort: &'a RawCohort) -> Self {
        let mut findings: HashMap<&str, Vec<&FindingRecord>> = HashMap::new();
        for f in &cohort.findings {
            findings.entry(f.exam_id.as_str()).or_default().push(f);
        }
        let mut pathology: HashMap<&str, Vec<&PathologyResult>> = HashMap::new();
        for p in &cohort.pathology {
            pathology.entry(p.finding_id.as_str()).or_default().push(p);
        }
        RecordIndex {
            findings,
            pathology,
        }
    }

    pub fn findings(&self, exam_id: &str) -> &[&'a FindingRecord] {
        self.findings.get(exam_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All pathology results on the findings of one exam.
    pub fn exam_pathology(&self, exam_id: &str) -> impl Iterator<Item = &'a PathologyResult> + '_ {
        self.findings(exam_id).iter().flat_map(|f| {
            self.pathology
                .get(f.finding_id.as_str())
                .into_iter()
                .flatten()
                .copied()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FollowupSet {
    pub screening_exam_id: String,
    /// Recall diagnostics owned by this screen, within the recall window.
    pub diagnostics: Vec<(String, i64)>,
    /// Diagnostics owned by this screen within the interval-cancer window,
    /// including problem evaluations.
    pub interval_diagnostics: Vec<(String, i64)>,
    pub any_followup_within_window: bool,
    /// Pathology on the findings of `diagnostics`, date-ordered.
    pub pathology_chain: Vec<PathologyResult>,
    /// Pathology on the findings of `interval_diagnostics`, date-ordered.
    pub interval_pathology_chain: Vec<PathologyResult>,
}

impl FollowupSet {
    pub fn screen_detected_pathology(&self) -> FinalPathology {
        resolve_exam_pathology(&self.pathology_chain)
    }

    pub fn interval_pathology(&self) -> FinalPathology {
        resolve_exam_pathology(&self.interval_pathology_chain)
    }
}

fn chain_key(p: &PathologyResult) -> (chrono::NaiveDate, &str, Procedure) {
    (p.result_date, p.finding_id.as_str(), p.procedure)
}

fn collect_chain<'a>(
    exams: &[(String, i64)],
    index: &RecordIndex<'a>,
) -> Vec<PathologyResult> {
    let mut chain: Vec<PathologyResult> = exams
        .iter()
        .flat_map(|(id, _)| index.exam_pathology(id))
        .cloned()
        .collect();
    chain.sort_by(|a, b| chain_key(a).cmp(&chain_key(b)));
    chain
}

/// Resolves the follow-up exams of one screening exam.
///
/// `timeline` is the patient's ordered exam list from [`build_timelines`].
pub fn match_followups(
    screen: &ExamRecord,
    timeline: &[&ExamRecord],
    windows: &TemporalWindows,
    index: &RecordIndex<'_>,
) -> FollowupSet {
    debug_assert_eq!(screen.exam_type, ExamType::Screening);
    let start = timeline
        .iter()
        .position(|e| e.exam_id == screen.exam_id)
        .expect("screen belongs to its timeline");

    let mut set = FollowupSet {
        screening_exam_id: screen.exam_id.clone(),
        diagnostics: Vec::new(),
        interval_diagnostics: Vec::new(),
        any_followup_within_window: false,
        pathology_chain: Vec::new(),
        interval_pathology_chain: Vec::new(),
    };
    let min = windows.negative_followup_min_days as i64;
    let max = windows.negative_followup_max_days as i64;
    let horizon = windows.horizon();
    // Date of the earliest later screen; it (or a successor) owns every
    // diagnostic strictly after it.
    let mut next_screen: Option<chrono::NaiveDate> = None;

    for exam in &timeline[start + 1..] {
        let days = (exam.exam_date - screen.exam_date).num_days();
        if days > horizon {
            break;
        }
        if days > 0 && (min..=max).contains(&days) {
            set.any_followup_within_window = true;
        }
        match exam.exam_type {
            ExamType::Screening => {
                next_screen.get_or_insert(exam.exam_date);
            }
            ExamType::Diagnostic => {
                let owned = next_screen.is_none_or(|d| d >= exam.exam_date);
                if days > 0 && owned {
                    if days <= windows.diagnostic_followup_days as i64 {
                        set.diagnostics.push((exam.exam_id.clone(), days));
                    }
                    if days <= windows.interval_cancer_days as i64 {
                        set.interval_diagnostics.push((exam.exam_id.clone(), days));
                    }
                }
            }
        }
    }

    set.pathology_chain = collect_chain(&set.diagnostics, index);
    set.interval_pathology_chain = collect_chain(&set.interval_diagnostics, index);
    set
}

/// Outcome of a biopsy→resection chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FinalPathology {
    pub severity: Severity,
    pub subtype: Option<String>,
    /// Biopsy severity superseded by a more severe resection.
    pub upgraded_from: Option<Severity>,
    /// A non-breast cancer appeared somewhere in the chain.
    pub non_breast_cancer: bool,
}

impl FinalPathology {
    pub fn none() -> Self {
        FinalPathology {
            severity: Severity::NoPathology,
            subtype: None,
            upgraded_from: None,
            non_breast_cancer: false,
        }
    }
}

impl Default for FinalPathology {
    fn default() -> Self {
        FinalPathology::none()
    }
}

/// Resolves one finding's date-ordered chain to its most severe result.
pub fn resolve_pathology_chain(chain: &[PathologyResult]) -> FinalPathology {
    let mut out = FinalPathology::none();
    let mut biopsy_max: Option<Severity> = None;
    let mut resection_max: Option<Severity> = None;
    for result in chain {
        if result.severity == Severity::NonBreastCancer {
            out.non_breast_cancer = true;
            continue;
        }
        if result.severity >= out.severity {
            out.severity = result.severity;
            out.subtype = result.subtype.clone();
        }
        let slot = match result.procedure {
            Procedure::Biopsy => &mut biopsy_max,
            Procedure::Resection => &mut resection_max,
        };
        *slot = Some(slot.map_or(result.severity, |s| s.max(result.severity)));
    }
    if let (Some(b), Some(r)) = (biopsy_max, resection_max) {
        if r > b {
            out.upgraded_from = Some(b);
        }
    }
    out
}

/// Resolves each finding's chain separately; the exam takes the most severe
/// finding (first finding id on ties).
pub fn resolve_exam_pathology(chain: &[PathologyResult]) -> FinalPathology {
    let mut by_finding: BTreeMap<&str, Vec<PathologyResult>> = BTreeMap::new();
    for p in chain {
        by_finding.entry(p.finding_id.as_str()).or_default().push(p.clone());
    }
    let mut out = FinalPathology::none();
    let mut non_breast = false;
    let mut first = true;
    for results in by_finding.values() {
        let resolved = resolve_pathology_chain(results);
        non_breast |= resolved.non_breast_cancer;
        if first || resolved.severity > out.severity {
            out = resolved;
            first = false;
        }
    }
    out.non_breast_cancer = non_breast;
    out
}
