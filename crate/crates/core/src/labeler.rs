//! Outcome labels for screening exams.
//!
//! Every screening exam ends in exactly one of five outcome labels or an
//! exclusion. Diagnostic exams are evidence only and never receive a row.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{validate_cohort, RawCohort, ValidationReport};
use crate::linkage::{
    build_timelines, match_followups, FinalPathology, FollowupSet, RecordIndex, TemporalWindows,
};
use crate::metrics::Observation;
use crate::model::{
    AgeBin, Birads, CancerType, Density, Descriptor, Ethnicity, ExamRecord, ExamType,
    FindingRecord, FindingType, Race, Severity,
};

token_enum! {
    pub enum OutcomeLabel {
        ScreenNegative => "SCREEN_NEGATIVE",
        DiagnosticNegative => "DIAGNOSTIC_NEGATIVE",
        BiopsyProvenBenign => "BIOPSY_PROVEN_BENIGN",
        ScreenDetectedCancer => "SCREEN_DETECTED_CANCER",
        IntervalCancer => "INTERVAL_CANCER",
        Excluded => "EXCLUDED",
    }
}

impl OutcomeLabel {
    /// The five labels that describe an outcome (everything but `Excluded`).
    pub const OUTCOMES: &'static [OutcomeLabel] = &[
        OutcomeLabel::ScreenNegative,
        OutcomeLabel::DiagnosticNegative,
        OutcomeLabel::BiopsyProvenBenign,
        OutcomeLabel::IntervalCancer,
        OutcomeLabel::ScreenDetectedCancer,
    ];

    pub fn binary_class(self) -> BinaryClass {
        match self {
            OutcomeLabel::ScreenNegative
            | OutcomeLabel::DiagnosticNegative
            | OutcomeLabel::BiopsyProvenBenign => BinaryClass::Negative,
            OutcomeLabel::ScreenDetectedCancer => BinaryClass::Positive,
            OutcomeLabel::IntervalCancer | OutcomeLabel::Excluded => BinaryClass::NotApplicable,
        }
    }
}

token_enum! {
    pub enum BinaryClass {
        Negative => "NEGATIVE",
        Positive => "POSITIVE",
        NotApplicable => "NOT_APPLICABLE",
    }
}

token_enum! {
    pub enum ExclusionReason {
        NoFollowup => "NO_FOLLOWUP",
        AbnormalNoDiagnostic => "ABNORMAL_NO_DIAGNOSTIC",
        Birads45NoBiopsy => "BIRADS45_NO_BIOPSY",
        InvalidBirads => "INVALID_BIRADS",
        NonBreastCancer => "NON_BREAST_CANCER",
        MissingScores => "MISSING_SCORES",
    }
}

token_enum! {
    /// Exam-level screening assessment.
    pub enum Assessment { Normal => "NORMAL", Abnormal => "ABNORMAL", Invalid => "INVALID" }
}

/// Which rule of the flowchart produced a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    InvalidAssessment,
    NormalNonBreastCancer,
    IntervalCancer,
    ScreenNegative,
    NoFollowup,
    AbnormalNoDiagnostic,
    InconsistentWorkup,
    AbnormalNonBreastCancer,
    DiagnosticNegative,
    Birads45NoBiopsy,
    BiopsyProvenBenign,
    ScreenDetectedCancer,
}

impl Branch {
    pub const ALL: &'static [Branch] = &[
        Branch::InvalidAssessment,
        Branch::NormalNonBreastCancer,
        Branch::IntervalCancer,
        Branch::ScreenNegative,
        Branch::NoFollowup,
        Branch::AbnormalNoDiagnostic,
        Branch::InconsistentWorkup,
        Branch::AbnormalNonBreastCancer,
        Branch::DiagnosticNegative,
        Branch::Birads45NoBiopsy,
        Branch::BiopsyProvenBenign,
        Branch::ScreenDetectedCancer,
    ];

    pub fn outcome(self) -> (OutcomeLabel, Option<ExclusionReason>) {
        use ExclusionReason as R;
        use OutcomeLabel as L;
        match self {
            Branch::InvalidAssessment | Branch::InconsistentWorkup => {
                (L::Excluded, Some(R::InvalidBirads))
            }
            Branch::NormalNonBreastCancer | Branch::AbnormalNonBreastCancer => {
                (L::Excluded, Some(R::NonBreastCancer))
            }
            Branch::IntervalCancer => (L::IntervalCancer, None),
            Branch::ScreenNegative => (L::ScreenNegative, None),
            Branch::NoFollowup => (L::Excluded, Some(R::NoFollowup)),
            Branch::AbnormalNoDiagnostic => (L::Excluded, Some(R::AbnormalNoDiagnostic)),
            Branch::DiagnosticNegative => (L::DiagnosticNegative, None),
            Branch::Birads45NoBiopsy => (L::Excluded, Some(R::Birads45NoBiopsy)),
            Branch::BiopsyProvenBenign => (L::BiopsyProvenBenign, None),
            Branch::ScreenDetectedCancer => (L::ScreenDetectedCancer, None),
        }
    }
}

/// Exam-level assessment of a screening exam's findings.
///
/// Any B0 makes the exam abnormal; all-B1/B2 is normal; anything else
/// (B3–B5 without a B0, or no findings) is invalid at screening.
pub fn aggregate_exam_assessment<'a>(
    findings: impl IntoIterator<Item = &'a FindingRecord>,
) -> Assessment {
    let mut any = false;
    let mut all_normal = true;
    for f in findings {
        any = true;
        match f.birads {
            Birads::B0 => return Assessment::Abnormal,
            Birads::B1 | Birads::B2 => {}
            _ => all_normal = false,
        }
    }
    if any && all_normal {
        Assessment::Normal
    } else {
        Assessment::Invalid
    }
}

/// One recall diagnostic, reduced to what the flowchart needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosticEvidence {
    pub exam_id: String,
    /// Most severe BI-RADS on the exam; `None` when it has no findings.
    pub max_birads: Option<Birads>,
    /// Assessment unusable (B0 on a diagnostic, or no findings).
    pub invalid: bool,
}

/// Everything the flowchart looks at for one screening exam.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScreenEvidence {
    pub assessment: Assessment,
    /// The screen itself carries a validation exclusion marker.
    pub screen_flagged: bool,
    pub recall_diagnostics: Vec<DiagnosticEvidence>,
    pub recall_pathology: FinalPathology,
    pub interval_pathology: FinalPathology,
    pub any_followup_within_window: bool,
}

impl ScreenEvidence {
    pub fn gather(
        screen_findings: &[&FindingRecord],
        followups: &FollowupSet,
        index: &RecordIndex<'_>,
        flagged: &BTreeSet<&str>,
    ) -> Self {
        let recall_diagnostics = followups
            .diagnostics
            .iter()
            .map(|(id, _)| DiagnosticEvidence {
                exam_id: id.clone(),
                max_birads: index.findings(id).iter().map(|f| f.birads).max(),
                invalid: flagged.contains(id.as_str()),
            })
            .collect();
        ScreenEvidence {
            assessment: aggregate_exam_assessment(screen_findings.iter().copied()),
            screen_flagged: flagged.contains(followups.screening_exam_id.as_str()),
            recall_diagnostics,
            recall_pathology: followups.screen_detected_pathology(),
            interval_pathology: followups.interval_pathology(),
            any_followup_within_window: followups.any_followup_within_window,
        }
    }
}

/// The class-assignment flowchart.
pub fn decide(e: &ScreenEvidence) -> Branch {
    if e.screen_flagged {
        return Branch::InvalidAssessment;
    }
    match e.assessment {
        Assessment::Invalid => Branch::InvalidAssessment,
        Assessment::Normal => {
            if e.interval_pathology.non_breast_cancer {
                Branch::NormalNonBreastCancer
            } else if e.interval_pathology.severity.is_cancer() {
                Branch::IntervalCancer
            } else if e.any_followup_within_window {
                Branch::ScreenNegative
            } else {
                Branch::NoFollowup
            }
        }
        Assessment::Abnormal => {
            if e.recall_diagnostics.is_empty() {
                return Branch::AbnormalNoDiagnostic;
            }
            if e.recall_diagnostics.iter().any(|d| d.invalid) {
                return Branch::InconsistentWorkup;
            }
            if e.recall_pathology.non_breast_cancer {
                return Branch::AbnormalNonBreastCancer;
            }
            let worst = e
                .recall_diagnostics
                .iter()
                .filter_map(|d| d.max_birads)
                .max();
            let severity = e.recall_pathology.severity;
            match worst {
                Some(b) if b.is_suspicious() => {
                    if severity.is_cancer() {
                        Branch::ScreenDetectedCancer
                    } else if severity.is_benign_lesion() {
                        Branch::BiopsyProvenBenign
                    } else {
                        Branch::Birads45NoBiopsy
                    }
                }
                // B1–B3 workup; a sampled lesion here contradicts the assessment.
                Some(_) if severity == Severity::NoPathology => Branch::DiagnosticNegative,
                _ => Branch::InconsistentWorkup,
            }
        }
    }
}

/// A screening exam after label assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExam {
    pub exam_id: String,
    pub patient_id: String,
    pub label: OutcomeLabel,
    pub binary_class: BinaryClass,
    pub exclusion_reason: Option<ExclusionReason>,
    pub assessment: Assessment,
    /// Pathology from the recall workup; `NoPathology` for normal screens.
    pub final_pathology: FinalPathology,
    /// Pathology that made this an interval cancer.
    pub interval_pathology: Option<FinalPathology>,
    pub finding_types: BTreeSet<FindingType>,
    pub descriptors: BTreeSet<Descriptor>,
    pub exam_score: Option<f64>,
    pub race: Race,
    pub ethnicity: Ethnicity,
    pub density: Density,
    pub age_at_exam: u32,
}

impl LabeledExam {
    /// Counted in binary metrics: negative or positive class, scored, and
    /// not excluded for evaluation.
    pub fn is_evaluable(&self) -> bool {
        self.binary_class != BinaryClass::NotApplicable
            && self.exclusion_reason.is_none()
            && self.exam_score.is_some()
    }

    pub fn observation(&self) -> Option<Observation> {
        if !self.is_evaluable() {
            return None;
        }
        Some(Observation {
            score: self.exam_score?,
            positive: self.binary_class == BinaryClass::Positive,
        })
    }

    /// One of the five outcome labels, with or without a score.
    pub fn has_outcome(&self) -> bool {
        self.label != OutcomeLabel::Excluded
    }

    /// Outcome label with a usable score: the population of score
    /// distributions, interval cancers included.
    pub fn is_scored_outcome(&self) -> bool {
        self.has_outcome() && self.exam_score.is_some()
    }

    pub fn cancer_type(&self) -> Option<CancerType> {
        if self.label != OutcomeLabel::ScreenDetectedCancer {
            return None;
        }
        CancerType::from_severity(self.final_pathology.severity)
    }

    pub fn age_bin(&self) -> AgeBin {
        AgeBin::of(self.age_at_exam)
    }
}

/// Builds the labeled row for one screening exam.
pub fn assign_label(
    screen: &ExamRecord,
    screen_findings: &[&FindingRecord],
    followups: &FollowupSet,
    index: &RecordIndex<'_>,
    flagged: &BTreeSet<&str>,
    exam_score: Option<f64>,
) -> LabeledExam {
    let evidence = ScreenEvidence::gather(screen_findings, followups, index, flagged);
    let branch = decide(&evidence);
    let (label, mut exclusion_reason) = branch.outcome();
    if branch == Branch::InconsistentWorkup {
        log::debug!(
            "exam {}: inconsistent recall workup {:?}",
            screen.exam_id,
            evidence.recall_diagnostics
        );
    }
    if exam_score.is_none() && exclusion_reason.is_none() {
        exclusion_reason = Some(ExclusionReason::MissingScores);
    }

    let final_pathology = match evidence.assessment {
        Assessment::Abnormal => evidence.recall_pathology,
        _ => FinalPathology::none(),
    };
    LabeledExam {
        exam_id: screen.exam_id.clone(),
        patient_id: screen.patient_id.clone(),
        label,
        binary_class: label.binary_class(),
        exclusion_reason,
        assessment: evidence.assessment,
        final_pathology,
        interval_pathology: (label == OutcomeLabel::IntervalCancer)
            .then_some(evidence.interval_pathology),
        finding_types: screen_findings.iter().flat_map(|f| f.finding_types()).collect(),
        descriptors: screen_findings.iter().flat_map(|f| f.descriptors()).collect(),
        exam_score,
        race: screen.race,
        ethnicity: screen.ethnicity,
        density: screen.density,
        age_at_exam: screen.age_at_exam,
    }
}

#[derive(Debug, Clone, Default)]
pub struct LabeledCohort {
    /// One row per screening exam, ordered by exam id.
    pub exams: Vec<LabeledExam>,
    pub validation: ValidationReport,
}

impl LabeledCohort {
    pub fn from_exams(mut exams: Vec<LabeledExam>) -> Self {
        exams.sort_by(|a, b| a.exam_id.cmp(&b.exam_id));
        LabeledCohort {
            exams,
            validation: ValidationReport::default(),
        }
    }

    pub fn label_counts(&self) -> BTreeMap<OutcomeLabel, usize> {
        let mut counts: BTreeMap<OutcomeLabel, usize> =
            OutcomeLabel::ALL.iter().map(|l| (*l, 0)).collect();
        for e in &self.exams {
            *counts.entry(e.label).or_default() += 1;
        }
        counts
    }

    pub fn exclusion_counts(&self) -> BTreeMap<ExclusionReason, usize> {
        let mut counts: BTreeMap<ExclusionReason, usize> =
            ExclusionReason::ALL.iter().map(|r| (*r, 0)).collect();
        for r in self.exams.iter().filter_map(|e| e.exclusion_reason) {
            *counts.entry(r).or_default() += 1;
        }
        counts
    }

    /// Exams that enter binary metrics.
    pub fn evaluable(&self) -> impl Iterator<Item = &LabeledExam> {
        self.exams.iter().filter(|e| e.is_evaluable())
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.exams.iter().filter_map(LabeledExam::observation).collect()
    }

    /// Writes `labels.csv`.
    pub fn write_labels(&self, path: &Path) -> Result<()> {
        let wrap = |e: csv::Error| Error::Write {
            path: path.to_owned(),
            source: std::io::Error::other(e),
        };
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        w.write_record([
            "exam_id",
            "label",
            "binary_class",
            "exclusion_reason",
            "final_severity",
            "finding_types",
        ])
        .map_err(wrap)?;
        for e in &self.exams {
            let finding_types = e
                .finding_types
                .iter()
                .map(|t| t.token())
                .collect::<Vec<_>>()
                .join(";");
            w.write_record([
                e.exam_id.as_str(),
                e.label.token(),
                e.binary_class.token(),
                e.exclusion_reason.map_or("", |r| r.token()),
                e.final_pathology.severity.token(),
                finding_types.as_str(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Write {
            path: path.to_owned(),
            source,
        })
    }
}

/// Label counts in a stable, serializable form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSummary {
    pub screening_exams: usize,
    pub labels: BTreeMap<OutcomeLabel, usize>,
    pub exclusions: BTreeMap<ExclusionReason, usize>,
}

impl From<&LabeledCohort> for LabelSummary {
    fn from(c: &LabeledCohort) -> Self {
        LabelSummary {
            screening_exams: c.exams.len(),
            labels: c.label_counts(),
            exclusions: c.exclusion_counts(),
        }
    }
}

/// Labels every screening exam of `raw`.
///
/// Patients are processed in parallel; the result is ordered by exam id and
/// does not depend on the thread count.
pub fn label_cohort(raw: &RawCohort, windows: &TemporalWindows) -> Result<LabeledCohort> {
    windows.validate()?;
    let validation = validate_cohort(raw);
    let flagged = validation.exclusion_candidates();
    let index = RecordIndex::new(raw);
    let timelines = build_timelines(raw);
    let scores = raw.exam_scores();
    let score_lookup: HashMap<&str, f64> = scores.iter().map(|(k, v)| (k.as_str(), *v)).collect();

    let timelines: Vec<_> = timelines.into_iter().collect();
    let mut exams: Vec<LabeledExam> = timelines
        .par_iter()
        .flat_map_iter(|(_, timeline)| {
            let index = &index;
            let flagged = &flagged;
            let score_lookup = &score_lookup;
            timeline
                .iter()
                .filter(|e| e.exam_type == ExamType::Screening)
                .map(move |screen| {
                    let followups = match_followups(screen, timeline, windows, index);
                    assign_label(
                        screen,
                        index.findings(&screen.exam_id),
                        &followups,
                        index,
                        flagged,
                        score_lookup.get(screen.exam_id.as_str()).copied(),
                    )
                })
        })
        .collect();
    exams.sort_by(|a, b| a.exam_id.cmp(&b.exam_id));
    Ok(LabeledCohort { exams, validation })
}
