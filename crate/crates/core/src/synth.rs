//! Synthetic cohorts with a known answer.
//!
//! Every screening exam is planned first (intended label, exclusion reason,
//! score, demographics, findings, pathology) and then realised as raw
//! records whose timeline satisfies that label's definition by
//! construction. The plan is kept as a [`GroundTruthLedger`]; labelling the
//! raw records must reproduce it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ingest::RawCohort;
use crate::labeler::{label_cohort, BinaryClass, ExclusionReason, LabeledCohort, LabeledExam, OutcomeLabel};
use crate::linkage::TemporalWindows;
use crate::model::{
    AgeBin, AsymmetryType, Birads, CalcDistribution, CalcMorphology, CancerType, Density,
    Ethnicity, ExamRecord, ExamType, FindingRecord, FindingType, ImageScore, Laterality,
    MassMargin, MassShape, PathologyResult, Procedure, Race, Severity,
};
use crate::rng::{self, StreamRng};

// ---------------------------------------------------------------- score model

/// One bounded unimodal component on [0,1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScoreDist {
    /// `lo + (hi - lo) * Beta(alpha, beta)`.
    Beta {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    Uniform {
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    Point { value: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    #[serde(flatten)]
    pub dist: ScoreDist,
}

pub type Mixture = Vec<Component>;

impl ScoreDist {
    fn validate(&self) -> std::result::Result<(), String> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        match *self {
            ScoreDist::Beta { alpha, beta, lo, hi } => {
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(format!("beta parameters must be positive, got ({alpha}, {beta})"));
                }
                if !(unit(lo) && unit(hi) && lo <= hi) {
                    return Err(format!("support [{lo}, {hi}] not within [0,1]"));
                }
            }
            ScoreDist::Uniform { lo, hi } => {
                if !(unit(lo) && unit(hi) && lo <= hi) {
                    return Err(format!("support [{lo}, {hi}] not within [0,1]"));
                }
            }
            ScoreDist::Point { value } => {
                if !unit(value) {
                    return Err(format!("point mass {value} not within [0,1]"));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        let x = match *self {
            ScoreDist::Beta { alpha, beta, lo, hi } => {
                let b = rand_distr::Beta::new(alpha, beta).expect("validated");
                lo + (hi - lo) * b.sample(rng)
            }
            ScoreDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ScoreDist::Point { value } => value,
        };
        x.clamp(0.0, 1.0)
    }
}

fn validate_mixture(label: OutcomeLabel, m: &Mixture) -> Result<()> {
    let bad = |msg: String| Error::InfeasibleBlueprint(format!("score_model.{label}: {msg}"));
    if m.is_empty() {
        return Err(bad("no components".into()));
    }
    for c in m {
        if !(c.weight >= 0.0 && c.weight.is_finite()) {
            return Err(bad(format!("negative weight {}", c.weight)));
        }
        c.dist.validate().map_err(bad)?;
    }
    if m.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
        return Err(bad("weights sum to zero".into()));
    }
    Ok(())
}

fn sample_mixture(m: &Mixture, rng: &mut StreamRng) -> f64 {
    if m.len() == 1 {
        return m[0].dist.sample(rng);
    }
    let idx = WeightedIndex::new(m.iter().map(|c| c.weight)).expect("validated");
    m[idx.sample(rng)].dist.sample(rng)
}

/// Per-label score mixtures; labels without an entry score uniformly.
pub type ScoreModel = BTreeMap<OutcomeLabel, Mixture>;

const UNIFORM: Component = Component {
    weight: 1.0,
    dist: ScoreDist::Uniform { lo: 0.0, hi: 1.0 },
};

fn mixture_for(model: &ScoreModel, label: OutcomeLabel) -> &[Component] {
    model
        .get(&label)
        .map(Vec::as_slice)
        .unwrap_or(std::slice::from_ref(&UNIFORM))
}

/// `n` scores for `label` from the model, deterministic in `seed`.
pub fn sample_scores(label: OutcomeLabel, model: &ScoreModel, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = rng::seeded(seed);
    let m = mixture_for(model, label).to_vec();
    (0..n).map(|_| sample_mixture(&m, &mut rng)).collect()
}

/// Below-threshold mass on [0, 0.1), the rest on [0.1, 1].
fn two_sided(above: f64, below: (f64, f64), high: (f64, f64)) -> Mixture {
    vec![
        Component {
            weight: 1.0 - above,
            dist: ScoreDist::Beta { alpha: below.0, beta: below.1, lo: 0.0, hi: 0.0999 },
        },
        Component {
            weight: above,
            dist: ScoreDist::Beta { alpha: high.0, beta: high.1, lo: 0.1, hi: 1.0 },
        },
    ]
}

/// Mixtures whose threshold-crossing fractions match the published
/// per-outcome fractions at 0.1.
pub fn default_score_model() -> ScoreModel {
    use OutcomeLabel as L;
    BTreeMap::from([
        (L::ScreenNegative, two_sided(9297.0 / 142638.0, (1.2, 4.0), (1.0, 6.0))),
        (L::DiagnosticNegative, two_sided(1477.0 / 15407.0, (1.3, 3.5), (1.0, 5.0))),
        (L::BiopsyProvenBenign, two_sided(738.0 / 3931.0, (1.6, 3.0), (1.1, 4.0))),
        (L::IntervalCancer, two_sided(33.0 / 105.0, (1.8, 2.5), (1.2, 3.0))),
        (L::ScreenDetectedCancer, two_sided(1002.0 / 1368.0, (2.0, 2.0), (2.0, 1.5))),
        (L::Excluded, two_sided(0.1, (1.2, 4.0), (1.0, 5.0))),
    ])
}

// ---------------------------------------------------------------- blueprint

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemographicMarginals {
    pub race: BTreeMap<Race, f64>,
    pub ethnicity: BTreeMap<Ethnicity, f64>,
    /// Age at a patient's first screen; uniform within the bin.
    pub age: BTreeMap<AgeBin, f64>,
    pub density: BTreeMap<Density, f64>,
}

impl Default for DemographicMarginals {
    fn default() -> Self {
        DemographicMarginals {
            race: BTreeMap::from([
                (Race::Black, 75635.0),
                (Race::White, 70763.0),
                (Race::Asian, 8602.0),
                (Race::Other, 1472.0),
                (Race::Unknown, 6977.0),
            ]),
            ethnicity: BTreeMap::from([
                (Ethnicity::NotHispanicOrLatino, 135556.0),
                (Ethnicity::HispanicOrLatino, 4799.0),
                (Ethnicity::Unknown, 23094.0),
            ]),
            age: BTreeMap::from([
                (AgeBin::Under50, 38073.0),
                (AgeBin::From50To75, 110697.0),
                (AgeBin::From75, 14679.0),
            ]),
            density: BTreeMap::from([
                (Density::A, 17931.0),
                (Density::B, 67228.0),
                (Density::C, 68522.0),
                (Density::D, 9041.0),
                (Density::Unknown, 727.0),
            ]),
        }
    }
}

/// Everything a synthetic cohort is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortBlueprint {
    pub n_patients: usize,
    /// Inclusive range of screening exams per patient.
    pub screens_per_patient: [u32; 2],
    pub seed: u64,
    /// Intended outcome of each screen; `EXCLUDED` draws a reason from
    /// `exclusion_weights`.
    pub label_weights: BTreeMap<OutcomeLabel, f64>,
    /// Every reason except `MISSING_SCORES`, which `missing_score_rate`
    /// controls independently of the label.
    pub exclusion_weights: BTreeMap<ExclusionReason, f64>,
    pub missing_score_rate: f64,
    pub demographics: DemographicMarginals,
    /// Per-label probability that a screen shows each finding type.
    pub finding_mix: BTreeMap<OutcomeLabel, BTreeMap<FindingType, f64>>,
    pub cancer_type_weights: BTreeMap<CancerType, f64>,
    pub score_model: ScoreModel,
    pub windows: TemporalWindows,
}

fn mix(n: f64, counts: [f64; 4]) -> BTreeMap<FindingType, f64> {
    FindingType::ALL
        .iter()
        .copied()
        .zip(counts.map(|c| c / n))
        .collect()
}

impl Default for CohortBlueprint {
    /// Published label proportions, demographics and finding mix.
    fn default() -> Self {
        use OutcomeLabel as L;
        CohortBlueprint {
            n_patients: 1000,
            screens_per_patient: [1, 3],
            seed: 0,
            label_weights: BTreeMap::from([
                (L::ScreenNegative, 142638.0),
                (L::DiagnosticNegative, 15407.0),
                (L::BiopsyProvenBenign, 3931.0),
                (L::IntervalCancer, 105.0),
                (L::ScreenDetectedCancer, 1368.0),
                (L::Excluded, 0.0),
            ]),
            exclusion_weights: ExclusionReason::ALL
                .iter()
                .filter(|r| **r != ExclusionReason::MissingScores)
                .map(|r| (*r, 1.0))
                .collect(),
            missing_score_rate: 0.0,
            demographics: DemographicMarginals::default(),
            finding_mix: BTreeMap::from([
                (L::ScreenNegative, mix(142638.0, [2269.0, 753.0, 38.0, 1507.0])),
                (L::DiagnosticNegative, mix(15407.0, [2775.0, 8731.0, 1419.0, 2204.0])),
                (L::BiopsyProvenBenign, mix(3931.0, [707.0, 1503.0, 352.0, 1741.0])),
                (L::IntervalCancer, mix(105.0, [0.0, 3.0, 0.0, 2.0])),
                (L::ScreenDetectedCancer, mix(1368.0, [236.0, 538.0, 214.0, 627.0])),
                (L::Excluded, mix(1.0, [0.05, 0.2, 0.02, 0.1])),
            ]),
            cancer_type_weights: BTreeMap::from([
                (CancerType::Invasive, 914.0),
                (CancerType::NonInvasive, 454.0),
            ]),
            score_model: default_score_model(),
            windows: TemporalWindows::default(),
        }
    }
}

/// Weighted sampler over the positive-weight keys of a map.
struct Categorical<K> {
    keys: Vec<K>,
    index: WeightedIndex<f64>,
}

impl<K: Copy + std::fmt::Display> Categorical<K> {
    fn new(name: &str, weights: &BTreeMap<K, f64>) -> Result<Self> {
        for (k, w) in weights {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::InfeasibleBlueprint(format!("{name}.{k}: weight {w}")));
            }
        }
        let (keys, w): (Vec<K>, Vec<f64>) = weights.iter().filter(|(_, w)| **w > 0.0).map(|(k, w)| (*k, *w)).unzip();
        let index = WeightedIndex::new(&w)
            .map_err(|_| Error::InfeasibleBlueprint(format!("{name}: weights must have a positive total")))?;
        Ok(Categorical { keys, index })
    }

    fn sample(&self, rng: &mut StreamRng) -> K {
        self.keys[self.index.sample(rng)]
    }
}

/// Validated samplers of one blueprint.
struct Samplers {
    label: Categorical<OutcomeLabel>,
    exclusion: Option<Categorical<ExclusionReason>>,
    race: Categorical<Race>,
    ethnicity: Categorical<Ethnicity>,
    age: Categorical<AgeBin>,
    density: Categorical<Density>,
    cancer_type: Option<Categorical<CancerType>>,
}

impl CohortBlueprint {
    fn weight(&self, label: OutcomeLabel) -> f64 {
        self.label_weights.get(&label).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.samplers().map(|_| ())
    }

    fn samplers(&self) -> Result<Samplers> {
        let bad = |msg: String| Err(Error::InfeasibleBlueprint(msg));
        self.windows
            .validate()
            .map_err(|e| Error::InfeasibleBlueprint(e.to_string()))?;
        if self.n_patients == 0 {
            return bad("n_patients must be positive".into());
        }
        let [lo, hi] = self.screens_per_patient;
        if lo == 0 || lo > hi {
            return bad(format!("screens_per_patient [{lo}, {hi}] is not a range of positive counts"));
        }
        if !(0.0..=1.0).contains(&self.missing_score_rate) {
            return bad(format!("missing_score_rate {} outside [0,1]", self.missing_score_rate));
        }
        if self.weight(OutcomeLabel::IntervalCancer) > 0.0 && self.windows.interval_cancer_days == 0 {
            return bad("interval cancers requested with a zero-day interval window".into());
        }
        if self.exclusion_weights.get(&ExclusionReason::MissingScores).is_some_and(|w| *w > 0.0) {
            return bad("MISSING_SCORES is set by missing_score_rate, not exclusion_weights".into());
        }
        for (label, types) in &self.finding_mix {
            for (t, p) in types {
                if !(0.0..=1.0).contains(p) {
                    return bad(format!("finding_mix.{label}.{t}: probability {p} outside [0,1]"));
                }
            }
        }
        for (label, m) in &self.score_model {
            validate_mixture(*label, m)?;
        }
        let excluded = self.weight(OutcomeLabel::Excluded) > 0.0;
        let cancers = self.weight(OutcomeLabel::ScreenDetectedCancer) > 0.0;
        Ok(Samplers {
            label: Categorical::new("label_weights", &self.label_weights)?,
            exclusion: excluded
                .then(|| Categorical::new("exclusion_weights", &self.exclusion_weights))
                .transpose()?,
            race: Categorical::new("demographics.race", &self.demographics.race)?,
            ethnicity: Categorical::new("demographics.ethnicity", &self.demographics.ethnicity)?,
            age: Categorical::new("demographics.age", &self.demographics.age)?,
            density: Categorical::new("demographics.density", &self.demographics.density)?,
            cancer_type: cancers
                .then(|| Categorical::new("cancer_type_weights", &self.cancer_type_weights))
                .transpose()?,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("blueprint: {e}")))
    }
}

// ---------------------------------------------------------------- plans

/// Pathology planned for the screen's workup (or interval diagnostic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedPathology {
    pub severity: Severity,
    pub subtype: String,
}

/// Intended outcome and attributes of one screening exam.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenPlan {
    pub label: OutcomeLabel,
    /// Reason for `Excluded` plans (never `MissingScores`).
    pub exclusion: Option<ExclusionReason>,
    /// `None` leaves the exam without image scores.
    pub score: Option<f64>,
    pub density: Density,
    pub finding_types: BTreeSet<FindingType>,
    pub pathology: Option<PlannedPathology>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientPlan {
    pub race: Race,
    pub ethnicity: Ethnicity,
    /// Age at the first screen.
    pub age: u32,
    pub screens: Vec<ScreenPlan>,
}

fn age_in_bin(bin: AgeBin, rng: &mut StreamRng) -> u32 {
    match bin {
        AgeBin::Under50 => rng.random_range(40..50),
        AgeBin::From50To75 => rng.random_range(50..75),
        AgeBin::From75 => rng.random_range(75..90),
    }
}

const INVASIVE_SUBTYPES: [(&str, f64); 4] = [("IDC-NOS", 544.0), ("ILC", 100.0), ("IMC", 67.0), ("IDC-MUCINOUS", 23.0)];
const NONINVASIVE_SUBTYPES: [(&str, f64); 4] = [
    ("DCIS-NOS", 201.0),
    ("DCIS-HIGH-GRADE", 90.0),
    ("DCIS-INTERMEDIATE-GRADE", 50.0),
    ("DCIS-LOW-GRADE", 23.0),
];
const BENIGN_SUBTYPES: [&str; 3] = ["FIBROADENOMA", "FIBROCYSTIC-CHANGE", "PAPILLOMA"];
const HIGH_RISK_SUBTYPES: [&str; 2] = ["ATYPICAL-DUCTAL-HYPERPLASIA", "LOBULAR-CARCINOMA-IN-SITU"];
const NON_BREAST_SUBTYPES: [&str; 2] = ["LYMPHOMA", "METASTATIC-MELANOMA"];

fn pick_weighted(options: &[(&'static str, f64)], rng: &mut StreamRng) -> &'static str {
    options.choose_weighted(rng, |o| o.1).expect("static weights").0
}

fn cancer_pathology(ct: CancerType, rng: &mut StreamRng) -> PlannedPathology {
    match ct {
        CancerType::Invasive => PlannedPathology {
            severity: Severity::InvasiveCancer,
            subtype: pick_weighted(&INVASIVE_SUBTYPES, rng).into(),
        },
        CancerType::NonInvasive => PlannedPathology {
            severity: Severity::NonInvasiveCancer,
            subtype: pick_weighted(&NONINVASIVE_SUBTYPES, rng).into(),
        },
    }
}

fn lesion_pathology(severity: Severity, rng: &mut StreamRng) -> PlannedPathology {
    let subtype = match severity {
        Severity::Borderline => "BORDERLINE-PHYLLODES",
        Severity::HighRisk => HIGH_RISK_SUBTYPES.choose(rng).unwrap(),
        _ => BENIGN_SUBTYPES.choose(rng).unwrap(),
    };
    PlannedPathology {
        severity,
        subtype: subtype.into(),
    }
}

fn plan_patient(bp: &CohortBlueprint, s: &Samplers, rng: &mut StreamRng) -> PatientPlan {
    let [lo, hi] = bp.screens_per_patient;
    let n = rng.random_range(lo..=hi);
    let race = s.race.sample(rng);
    let ethnicity = s.ethnicity.sample(rng);
    let age = age_in_bin(s.age.sample(rng), rng);
    let screens = (0..n)
        .map(|_| {
            let label = s.label.sample(rng);
            let exclusion = (label == OutcomeLabel::Excluded)
                .then(|| s.exclusion.as_ref().expect("sampler exists when excluded").sample(rng));
            let missing = bp.missing_score_rate > 0.0 && rng.random_bool(bp.missing_score_rate);
            let score = sample_mixture(&mixture_for(&bp.score_model, label).to_vec(), rng);
            let finding_types = bp
                .finding_mix
                .get(&label)
                .map(|m| {
                    m.iter()
                        .filter(|(_, p)| rng.random_bool(**p))
                        .map(|(t, _)| *t)
                        .collect()
                })
                .unwrap_or_default();
            let pathology = match label {
                OutcomeLabel::ScreenDetectedCancer => {
                    Some(cancer_pathology(s.cancer_type.as_ref().expect("cancer sampler").sample(rng), rng))
                }
                OutcomeLabel::IntervalCancer => {
                    let ct = if rng.random_bool(0.7) { CancerType::Invasive } else { CancerType::NonInvasive };
                    Some(cancer_pathology(ct, rng))
                }
                OutcomeLabel::BiopsyProvenBenign => {
                    let severity = *[Severity::Benign, Severity::Borderline, Severity::HighRisk]
                        .choose_weighted(rng, |s| match s {
                            Severity::Benign => 3135.0,
                            Severity::Borderline => 35.0,
                            _ => 761.0,
                        })
                        .unwrap();
                    Some(lesion_pathology(severity, rng))
                }
                _ => None,
            };
            ScreenPlan {
                label,
                exclusion,
                score: (!missing).then_some(score),
                density: s.density.sample(rng),
                finding_types,
                pathology,
            }
        })
        .collect();
    PatientPlan {
        race,
        ethnicity,
        age,
        screens,
    }
}

// ---------------------------------------------------------------- ledger

/// Intended outcome of one generated screening exam.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerRow {
    pub exam_id: String,
    pub patient_id: String,
    pub label: OutcomeLabel,
    pub binary_class: BinaryClass,
    pub exclusion_reason: Option<ExclusionReason>,
    pub race: Race,
    pub ethnicity: Ethnicity,
    pub density: Density,
    pub age_bin: AgeBin,
    pub cancer_type: Option<CancerType>,
    pub finding_types: BTreeSet<FindingType>,
}

impl LedgerRow {
    /// The same row as the labeler sees it.
    pub fn observed(e: &LabeledExam) -> Self {
        LedgerRow {
            exam_id: e.exam_id.clone(),
            patient_id: e.patient_id.clone(),
            label: e.label,
            binary_class: e.binary_class,
            exclusion_reason: e.exclusion_reason,
            race: e.race,
            ethnicity: e.ethnicity,
            density: e.density,
            age_bin: e.age_bin(),
            cancer_type: e.cancer_type(),
            finding_types: e.finding_types.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruthLedger {
    /// One row per screening exam, ordered by exam id.
    pub rows: Vec<LedgerRow>,
}

impl GroundTruthLedger {
    /// Rows where the labeled cohort disagrees with the ledger, as
    /// `(intended, observed)`; a missing side is `None`.
    pub fn mismatches(&self, cohort: &LabeledCohort) -> Vec<(Option<LedgerRow>, Option<LedgerRow>)> {
        let observed: BTreeMap<&str, LedgerRow> = cohort
            .exams
            .iter()
            .map(|e| (e.exam_id.as_str(), LedgerRow::observed(e)))
            .collect();
        let mut out = Vec::new();
        for row in &self.rows {
            match observed.get(row.exam_id.as_str()) {
                Some(o) if o == row => {}
                o => out.push((Some(row.clone()), o.cloned())),
            }
        }
        let planned: BTreeSet<&str> = self.rows.iter().map(|r| r.exam_id.as_str()).collect();
        for (id, o) in &observed {
            if !planned.contains(id) {
                out.push((None, Some(o.clone())));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let wrap = |e: csv::Error| Error::Write {
            path: path.to_owned(),
            source: std::io::Error::other(e),
        };
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        w.write_record([
            "exam_id",
            "patient_id",
            "label",
            "binary_class",
            "exclusion_reason",
            "race",
            "ethnicity",
            "density",
            "age_bin",
            "cancer_type",
            "finding_types",
        ])
        .map_err(wrap)?;
        for r in &self.rows {
            let types: Vec<&str> = r.finding_types.iter().map(|t| t.token()).collect();
            w.write_record([
                r.exam_id.as_str(),
                r.patient_id.as_str(),
                r.label.token(),
                r.binary_class.token(),
                r.exclusion_reason.map_or("", |x| x.token()),
                r.race.token(),
                r.ethnicity.token(),
                r.density.token(),
                r.age_bin.token(),
                r.cancer_type.map_or("", |c| c.token()),
                &types.join(";"),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|source| Error::Write {
            path: path.to_owned(),
            source,
        })
    }
}

// ---------------------------------------------------------------- realisation

/// How a screen presents at screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Presentation {
    Normal,
    Abnormal,
    /// B3–B5 on the screen itself.
    SuspiciousScreen,
    /// A screen without findings.
    NoFindings,
}

/// Builds one patient's records.
struct PatientBuilder<'a> {
    windows: &'a TemporalWindows,
    rng: StreamRng,
    patient_id: String,
    start: NaiveDate,
    n_exams: usize,
    out: RawCohort,
    ledger: Vec<LedgerRow>,
}

impl<'a> PatientBuilder<'a> {
    fn date(&self, day: i64) -> NaiveDate {
        self.start + Days::new(day as u64)
    }

    fn exam(&mut self, day: i64, ty: ExamType, density: Density, plan: &PatientPlan) -> String {
        let exam_id = format!("{}-{:03}", self.patient_id, self.n_exams);
        self.n_exams += 1;
        self.out.exams.push(ExamRecord {
            exam_id: exam_id.clone(),
            patient_id: self.patient_id.clone(),
            exam_date: self.date(day),
            exam_type: ty,
            density,
            race: plan.race,
            ethnicity: plan.ethnicity,
            age_at_exam: plan.age + (day / 365) as u32,
        });
        exam_id
    }

    fn finding(
        &mut self,
        exam_id: &str,
        laterality: Laterality,
        birads: Birads,
        types: &BTreeSet<FindingType>,
        descriptors: bool,
    ) -> String {
        let n = self.out.findings.iter().rev().take_while(|f| f.exam_id == exam_id).count();
        let mut f = FindingRecord::plain(format!("{exam_id}-F{n}"), exam_id, laterality, birads);
        f.has_mass = types.contains(&FindingType::Mass);
        f.has_asymmetry = types.contains(&FindingType::Asymmetry);
        f.has_arch_distortion = types.contains(&FindingType::ArchDistortion);
        f.has_calcification = types.contains(&FindingType::Calcification);
        if descriptors {
            let rng = &mut self.rng;
            if f.has_mass {
                f.mass_shape = MassShape::ALL.choose(rng).copied();
                f.mass_margin = MassMargin::ALL.choose(rng).copied();
            }
            if f.has_calcification {
                f.calc_morphology = CalcMorphology::ALL.choose(rng).copied();
                f.calc_distribution = CalcDistribution::ALL.choose(rng).copied();
            }
            if f.has_asymmetry && rng.random_bool(0.8) {
                f.asymmetry_type = AsymmetryType::ALL.choose(rng).copied();
            }
        }
        let id = f.finding_id.clone();
        self.out.findings.push(f);
        id
    }

    fn pathology(&mut self, finding_id: &str, procedure: Procedure, severity: Severity, subtype: &str, day: i64) {
        self.out.pathology.push(PathologyResult {
            finding_id: finding_id.into(),
            procedure,
            severity,
            subtype: Some(subtype.into()),
            result_date: self.date(day),
        });
    }

    fn scores(&mut self, exam_id: &str, score: f64) {
        let top = self.rng.random_range(0..4);
        for (i, view) in ["LCC", "LMLO", "RCC", "RMLO"].iter().enumerate() {
            let s = if i == top { score } else { score * self.rng.random::<f64>() };
            self.out.scores.push(ImageScore {
                exam_id: exam_id.into(),
                image_id: format!("{exam_id}-{view}"),
                malignancy_score: s,
            });
        }
    }

    fn side(&mut self) -> Laterality {
        if self.rng.random_bool(0.5) {
            Laterality::Left
        } else {
            Laterality::Right
        }
    }

    /// A diagnostic exam with one finding; returns the finding id.
    fn diagnostic(
        &mut self,
        day: i64,
        birads: Birads,
        types: &BTreeSet<FindingType>,
        screen: &ScreenPlan,
        plan: &PatientPlan,
    ) -> String {
        let exam_id = self.exam(day, ExamType::Diagnostic, screen.density, plan);
        let side = self.side();
        self.finding(&exam_id, side, birads, types, false)
    }

    /// Biopsy (and sometimes resection) results for a planned pathology.
    fn resolve_to(&mut self, finding_id: &str, day: i64, p: &PlannedPathology) {
        let biopsy_day = day + self.rng.random_range(0..=14);
        if p.severity.is_cancer() && self.rng.random_bool(0.15) {
            // High-risk biopsy upgraded at resection.
            self.pathology(finding_id, Procedure::Biopsy, Severity::HighRisk, HIGH_RISK_SUBTYPES[0], biopsy_day);
            let r = biopsy_day + self.rng.random_range(7..=60);
            self.pathology(finding_id, Procedure::Resection, p.severity, &p.subtype, r);
            return;
        }
        self.pathology(finding_id, Procedure::Biopsy, p.severity, &p.subtype, biopsy_day);
        if p.severity == Severity::HighRisk && self.rng.random_bool(0.3) {
            let r = biopsy_day + self.rng.random_range(7..=60);
            self.pathology(finding_id, Procedure::Resection, Severity::Benign, BENIGN_SUBTYPES[0], r);
        }
    }

    /// Recall visits at distinct offsets in `[1, D]`, the last being the
    /// decisive one. Returns the offsets.
    fn recall_offsets(&mut self) -> Vec<i64> {
        let d = self.windows.diagnostic_followup_days as i64;
        if d >= 2 && self.rng.random_bool(0.3) {
            let last = self.rng.random_range(2..=d);
            vec![self.rng.random_range(1..last), last]
        } else {
            vec![self.rng.random_range(1..=d)]
        }
    }

    /// Realises one screening episode starting on `day`; returns the
    /// earliest day the next screen may take place.
    fn episode(&mut self, screen: &ScreenPlan, day: i64, is_last: bool, plan: &PatientPlan) -> i64 {
        use ExclusionReason as R;
        use OutcomeLabel as L;
        let w = *self.windows;
        let (dx, interval) = (w.diagnostic_followup_days as i64, w.interval_cancer_days as i64);
        let (fmin, fmax) = ((w.negative_followup_min_days as i64).max(1), w.negative_followup_max_days as i64);

        let non_breast_normal = screen.exclusion == Some(R::NonBreastCancer) && interval >= 1 && self.rng.random_bool(0.5);
        let invalid_variant = self.rng.random_range(0..4);
        let presentation = match (screen.label, screen.exclusion) {
            (L::ScreenNegative | L::IntervalCancer, _) => Presentation::Normal,
            (L::Excluded, Some(R::NoFollowup)) => Presentation::Normal,
            (L::Excluded, Some(R::NonBreastCancer)) if non_breast_normal => Presentation::Normal,
            (L::Excluded, Some(R::InvalidBirads)) => match invalid_variant {
                0 => Presentation::SuspiciousScreen,
                1 => Presentation::NoFindings,
                _ => Presentation::Abnormal,
            },
            _ => Presentation::Abnormal,
        };

        let screen_id = self.exam(day, ExamType::Screening, screen.density, plan);
        let types = if presentation == Presentation::NoFindings {
            BTreeSet::new()
        } else {
            screen.finding_types.clone()
        };
        let main_birads = match presentation {
            Presentation::Normal if types.is_empty() => Birads::B1,
            Presentation::Normal => Birads::B2,
            Presentation::Abnormal => Birads::B0,
            Presentation::SuspiciousScreen => *[Birads::B3, Birads::B4, Birads::B5].choose(&mut self.rng).unwrap(),
            Presentation::NoFindings => Birads::B1,
        };
        if presentation != Presentation::NoFindings {
            let side = self.side();
            self.finding(&screen_id, side, main_birads, &types, true);
            if self.rng.random_bool(0.2) {
                let other = if side == Laterality::Left { Laterality::Right } else { Laterality::Left };
                let b = if self.rng.random_bool(0.5) { Birads::B1 } else { Birads::B2 };
                self.finding(&screen_id, other, b, &BTreeSet::new(), false);
            }
        }
        if let Some(s) = screen.score {
            self.scores(&screen_id, s);
        }
        self.ledger.push(LedgerRow {
            exam_id: screen_id,
            patient_id: self.patient_id.clone(),
            label: screen.label,
            binary_class: screen.label.binary_class(),
            exclusion_reason: screen.exclusion.or(screen.score.is_none().then_some(R::MissingScores)),
            race: plan.race,
            ethnicity: plan.ethnicity,
            density: screen.density,
            age_bin: AgeBin::of(plan.age + (day / 365) as u32),
            cancer_type: match (screen.label, &screen.pathology) {
                (L::ScreenDetectedCancer, Some(p)) => CancerType::from_severity(p.severity),
                _ => None,
            },
            finding_types: types.clone(),
        });

        // Diagnostic workup; `last` is the latest exam of the episode.
        let mut last = 0i64;
        match (screen.label, screen.exclusion) {
            (L::ScreenNegative, _) => {
                if is_last {
                    let o = self.rng.random_range(fmin..=fmax);
                    self.diagnostic(day + o, Birads::B1, &BTreeSet::new(), screen, plan);
                    last = o;
                } else {
                    // The next screen itself is the negative follow-up.
                    let o = self.rng.random_range(fmin.max(fmax * 3 / 4)..=fmax);
                    return day + o;
                }
            }
            (L::Excluded, Some(R::NoFollowup)) => return day + fmax + self.rng.random_range(1..=365),
            (L::IntervalCancer, _) | (L::Excluded, Some(R::NonBreastCancer)) if presentation == Presentation::Normal => {
                let o = self.rng.random_range(1..=interval);
                let b = self.suspicious_birads();
                let f = self.diagnostic(day + o, b, &types, screen, plan);
                let p = match &screen.pathology {
                    Some(p) => p.clone(),
                    None => PlannedPathology {
                        severity: Severity::NonBreastCancer,
                        subtype: NON_BREAST_SUBTYPES.choose(&mut self.rng).unwrap().to_string(),
                    },
                };
                self.resolve_to(&f, day + o, &p);
                last = o;
            }
            (L::DiagnosticNegative, _) => {
                for o in self.recall_offsets() {
                    let b = *[Birads::B1, Birads::B2, Birads::B3].choose(&mut self.rng).unwrap();
                    self.diagnostic(day + o, b, &types, screen, plan);
                    last = o;
                }
            }
            (L::BiopsyProvenBenign | L::ScreenDetectedCancer, _)
            | (L::Excluded, Some(R::Birads45NoBiopsy | R::NonBreastCancer)) => {
                let offsets = self.recall_offsets();
                for (i, o) in offsets.iter().enumerate() {
                    let decisive = i + 1 == offsets.len();
                    let b = if decisive { self.suspicious_birads() } else { Birads::B3 };
                    let f = self.diagnostic(day + o, b, &types, screen, plan);
                    if decisive {
                        match (&screen.pathology, screen.exclusion) {
                            (Some(p), _) => self.resolve_to(&f, day + o, p),
                            (None, Some(R::NonBreastCancer)) => {
                                let subtype = *NON_BREAST_SUBTYPES.choose(&mut self.rng).unwrap();
                                self.pathology(&f, Procedure::Biopsy, Severity::NonBreastCancer, subtype, day + o);
                            }
                            _ => {}
                        }
                    }
                    last = *o;
                }
            }
            (L::Excluded, Some(R::AbnormalNoDiagnostic)) => return day + dx + self.rng.random_range(1..=365),
            (L::Excluded, Some(R::InvalidBirads)) if presentation == Presentation::Abnormal => {
                let o = self.rng.random_range(1..=dx);
                if invalid_variant == 2 {
                    // B0 on the recall diagnostic.
                    self.diagnostic(day + o, Birads::B0, &types, screen, plan);
                } else {
                    // A biopsy under a B1–B3 workup.
                    let f = self.diagnostic(day + o, Birads::B2, &types, screen, plan);
                    let subtype = BENIGN_SUBTYPES[0];
                    self.pathology(&f, Procedure::Biopsy, Severity::Benign, subtype, day + o);
                }
                last = o;
            }
            _ => {}
        }
        day + last + self.rng.random_range(30..=400)
    }

    fn suspicious_birads(&mut self) -> Birads {
        if self.rng.random_bool(0.3) {
            Birads::B5
        } else {
            Birads::B4
        }
    }
}

/// Realises planned patients as raw records. Patient `i` draws from its own
/// stream, so the output does not depend on scheduling.
pub fn realise(plans: &[PatientPlan], windows: &TemporalWindows, seed: u64) -> (RawCohort, GroundTruthLedger) {
    let width = plans.len().max(1).to_string().len();
    let parts: Vec<(RawCohort, Vec<LedgerRow>)> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let mut rng = rng::stream(seed, i as u64);
            let start = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap() + Days::new(rng.random_range(0..730));
            let mut b = PatientBuilder {
                windows,
                rng,
                patient_id: format!("P{i:0width$}"),
                start,
                n_exams: 0,
                out: RawCohort::default(),
                ledger: Vec::new(),
            };
            let mut day = 0;
            for (k, screen) in plan.screens.iter().enumerate() {
                day = b.episode(screen, day, k + 1 == plan.screens.len(), plan);
            }
            (b.out, b.ledger)
        })
        .collect();

    let mut raw = RawCohort::default();
    let mut ledger = GroundTruthLedger::default();
    for (part, rows) in parts {
        raw.exams.extend(part.exams);
        raw.findings.extend(part.findings);
        raw.pathology.extend(part.pathology);
        raw.scores.extend(part.scores);
        ledger.rows.extend(rows);
    }
    ledger.rows.sort_by(|a, b| a.exam_id.cmp(&b.exam_id));
    (raw, ledger)
}

/// Draws a cohort from `bp`.
pub fn generate_cohort(bp: &CohortBlueprint) -> Result<(RawCohort, GroundTruthLedger)> {
    let samplers = bp.samplers()?;
    let seed = rng::derive_seed(bp.seed, rng::stage::SYNTH);
    let plans: Vec<PatientPlan> = (0..bp.n_patients)
        .into_par_iter()
        .map(|i| plan_patient(bp, &samplers, &mut rng::stream(seed, i as u64)))
        .collect();
    Ok(realise(&plans, &bp.windows, rng::derive_seed(seed, u64::MAX)))
}

// ---------------------------------------------------------------- replica

/// Published per-outcome counts, used to build the replica population.
pub mod published {
    /// Screen negative, diagnostic negative, biopsy-proven benign, interval
    /// cancer, screen-detected cancer.
    pub const LABEL_COUNTS: [usize; 5] = [142638, 15407, 3931, 105, 1368];
    /// Exams scoring at or above 0.1, same order.
    pub const ABOVE_THRESHOLD: [usize; 5] = [9297, 1477, 738, 33, 1002];
    pub const INVASIVE: (usize, usize) = (914, 754);
    pub const NON_INVASIVE: (usize, usize) = (454, 248);
    /// Benign, borderline and high-risk lesions among biopsy-proven benign
    /// exams, with the number scoring at or above 0.1.
    pub const BENIGN_LESIONS: [(usize, usize); 3] = [(3135, 500), (35, 9), (761, 229)];
}

/// Per-label attribute counts of the published cohort: race, ethnicity, age, density
/// (A–D; the rest unknown) and findings (mass, asymmetry, distortion,
/// calcification).
struct LabelProfile {
    race: [usize; 5],
    ethnicity: [usize; 3],
    age: [usize; 3],
    density: [usize; 4],
    findings: [usize; 4],
}

const PROFILES: [LabelProfile; 5] = [
    LabelProfile {
        race: [65851, 62422, 7497, 1191, 5677],
        ethnicity: [118669, 3990, 19979],
        age: [30717, 98571, 13350],
        density: [16498, 59414, 58557, 7782],
        findings: [2269, 753, 38, 1507],
    },
    LabelProfile {
        race: [7019, 6288, 838, 220, 1042],
        ethnicity: [12369, 657, 2381],
        age: [5775, 8693, 939],
        density: [1006, 5676, 7533, 948],
        findings: [2775, 8731, 1419, 2204],
    },
    LabelProfile {
        race: [2069, 1381, 201, 50, 230],
        ethnicity: [3191, 125, 615],
        age: [1371, 2364, 196],
        density: [327, 1479, 1793, 253],
        findings: [707, 1503, 352, 1741],
    },
    LabelProfile {
        race: [43, 53, 5, 1, 3],
        ethnicity: [96, 0, 9],
        age: [28, 71, 6],
        density: [0, 26, 71, 7],
        findings: [0, 3, 0, 2],
    },
    LabelProfile {
        race: [653, 619, 61, 10, 25],
        ethnicity: [1231, 27, 110],
        age: [182, 998, 188],
        density: [100, 633, 568, 51],
        findings: [236, 538, 214, 627],
    },
];

/// `counts[i]` copies of `values[i]`, padded with `fill`, shuffled.
fn exact_column<T: Copy>(n: usize, values: &[T], counts: &[usize], fill: T, rng: &mut StreamRng) -> Vec<T> {
    let mut out: Vec<T> = values
        .iter()
        .zip(counts)
        .flat_map(|(v, c)| std::iter::repeat_n(*v, *c))
        .collect();
    assert!(out.len() <= n, "profile counts exceed label size");
    out.resize(n, fill);
    out.shuffle(rng);
    out
}

/// Within-side class separation of the replica scores; gives an overall
/// AUROC near the published 0.91.
const REPLICA_SHIFT: f64 = 1.0163;

/// `n` scores on `[lo, hi)` at evenly spaced quantiles of a logistic-
/// transformed normal with location `loc`.
fn score_grid(n: usize, loc: f64, lo: f64, hi: f64) -> Vec<f64> {
    let normal = Normal::standard();
    (0..n)
        .map(|i| {
            let z = normal.inverse_cdf((i as f64 + 0.5) / n as f64);
            lo + (hi - lo) * 0.999 / (1.0 + (-(z + loc)).exp())
        })
        .collect()
}

/// Scores for `n` exams of which `above` reach 0.1, shuffled.
fn replica_scores(n: usize, above: usize, positive: bool, rng: &mut StreamRng) -> Vec<f64> {
    let shift = if positive { REPLICA_SHIFT } else { 0.0 };
    let mut s = score_grid(above, -1.5 + shift, 0.1, 1.0);
    s.extend(score_grid(n - above, -1.0 + shift, 0.0, 0.1));
    s.shuffle(rng);
    s
}

/// Plans for the published population: exact label, demographic, finding
/// and pathology counts, and exact above/below-threshold counts per label,
/// cancer type and benign lesion type. One screen per patient.
pub fn paper_replica_plans(seed: u64) -> Vec<PatientPlan> {
    let mut rng = rng::stream(seed, rng::stage::SYNTH);
    let mut plans = Vec::with_capacity(published::LABEL_COUNTS.iter().sum());
    for (li, label) in OutcomeLabel::OUTCOMES.iter().enumerate() {
        let n = published::LABEL_COUNTS[li];
        let profile = &PROFILES[li];

        let (scores, pathology): (Vec<f64>, Vec<Option<PlannedPathology>>) = match label {
            OutcomeLabel::ScreenDetectedCancer => {
                let mut rows = Vec::new();
                for (ct, (count, above)) in [
                    (CancerType::Invasive, published::INVASIVE),
                    (CancerType::NonInvasive, published::NON_INVASIVE),
                ] {
                    for s in replica_scores(count, above, true, &mut rng) {
                        rows.push((s, Some(cancer_pathology(ct, &mut rng))));
                    }
                }
                rows.shuffle(&mut rng);
                rows.into_iter().unzip()
            }
            OutcomeLabel::BiopsyProvenBenign => {
                let mut rows = Vec::new();
                for (sev, (count, above)) in [Severity::Benign, Severity::Borderline, Severity::HighRisk]
                    .into_iter()
                    .zip(published::BENIGN_LESIONS)
                {
                    for s in replica_scores(count, above, false, &mut rng) {
                        rows.push((s, Some(lesion_pathology(sev, &mut rng))));
                    }
                }
                rows.shuffle(&mut rng);
                rows.into_iter().unzip()
            }
            OutcomeLabel::IntervalCancer => {
                let s = replica_scores(n, published::ABOVE_THRESHOLD[li], true, &mut rng);
                let p = (0..n)
                    .map(|_| {
                        let ct = if rng.random_bool(0.7) { CancerType::Invasive } else { CancerType::NonInvasive };
                        Some(cancer_pathology(ct, &mut rng))
                    })
                    .collect();
                (s, p)
            }
            _ => (
                replica_scores(n, published::ABOVE_THRESHOLD[li], false, &mut rng),
                vec![None; n],
            ),
        };

        let race = exact_column(n, Race::ALL, &profile.race, Race::Unknown, &mut rng);
        let ethnicity = exact_column(n, Ethnicity::ALL, &profile.ethnicity, Ethnicity::Unknown, &mut rng);
        let age = exact_column(n, AgeBin::ALL, &profile.age, AgeBin::From50To75, &mut rng);
        let density = exact_column(n, &Density::ALL[..4], &profile.density, Density::Unknown, &mut rng);
        let mut finding_types = vec![BTreeSet::new(); n];
        for (t, count) in FindingType::ALL.iter().zip(profile.findings) {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            for i in &idx[..count] {
                finding_types[*i].insert(*t);
            }
        }

        for i in 0..n {
            plans.push(PatientPlan {
                race: race[i],
                ethnicity: ethnicity[i],
                age: age_in_bin(age[i], &mut rng),
                screens: vec![ScreenPlan {
                    label: *label,
                    exclusion: None,
                    score: Some(scores[i]),
                    density: density[i],
                    finding_types: std::mem::take(&mut finding_types[i]),
                    pathology: pathology[i].clone(),
                }],
            });
        }
    }
    plans.shuffle(&mut rng);
    plans
}

/// A random valid blueprint, for property tests: arbitrary label and
/// exclusion mixes (some weights zero), windows, marginals and score
/// models, with at most `max_patients` patients.
pub fn random_blueprint(seed: u64, max_patients: usize) -> CohortBlueprint {
    /// Some weights zero, but never all of them.
    fn weights<K: Ord + Copy>(keys: &[K], r: &mut StreamRng) -> BTreeMap<K, f64> {
        let mut m: BTreeMap<K, f64> = keys
            .iter()
            .map(|k| (*k, if r.random_bool(0.25) { 0.0 } else { r.random_range(0.1..10.0) }))
            .collect();
        *m.get_mut(&keys[0]).unwrap() += 1.0;
        m
    }
    let mut r = rng::seeded(seed);
    let labels = weights(OutcomeLabel::ALL, &mut r);
    let mut exclusions = BTreeMap::new();
    for reason in ExclusionReason::ALL.iter().filter(|x| **x != ExclusionReason::MissingScores) {
        exclusions.insert(*reason, if r.random_bool(0.2) { 0.0 } else { r.random_range(0.1..5.0) });
    }
    exclusions.insert(ExclusionReason::InvalidBirads, 1.0);

    let d = r.random_range(1..=400);
    let interval = if r.random_bool(0.1) { 0 } else { r.random_range(1..=730) };
    let fmax = r.random_range(1..=1500);
    let windows = TemporalWindows {
        diagnostic_followup_days: d,
        interval_cancer_days: interval,
        negative_followup_min_days: r.random_range(0..=fmax),
        negative_followup_max_days: fmax,
    };
    let mut label_weights = labels;
    if interval == 0 {
        label_weights.insert(OutcomeLabel::IntervalCancer, 0.0);
    }

    let race = weights(Race::ALL, &mut r);
    let ethnicity = weights(Ethnicity::ALL, &mut r);
    let age = weights(AgeBin::ALL, &mut r);
    let density = weights(Density::ALL, &mut r);
    let mut finding_mix = BTreeMap::new();
    let mut score_model = BTreeMap::new();
    for label in OutcomeLabel::ALL {
        finding_mix.insert(*label, FindingType::ALL.iter().map(|t| (*t, r.random_range(0.0..=1.0))).collect());
        if r.random_bool(0.2) {
            continue;
        }
        let lo = r.random_range(0.0..0.5);
        let hi = r.random_range(lo..=1.0);
        score_model.insert(
            *label,
            vec![
                Component {
                    weight: r.random_range(0.1..1.0),
                    dist: ScoreDist::Beta {
                        alpha: r.random_range(0.5..5.0),
                        beta: r.random_range(0.5..5.0),
                        lo,
                        hi,
                    },
                },
                Component {
                    weight: r.random_range(0.0..0.3),
                    dist: ScoreDist::Point { value: r.random_range(0.0..=1.0) },
                },
            ],
        );
    }
    let lo = r.random_range(1..=3);
    CohortBlueprint {
        n_patients: r.random_range(1..=max_patients.max(1)),
        screens_per_patient: [lo, lo + r.random_range(0..=3)],
        seed: r.random(),
        label_weights,
        exclusion_weights: exclusions,
        missing_score_rate: if r.random_bool(0.5) { 0.0 } else { r.random_range(0.0..0.2) },
        demographics: DemographicMarginals { race, ethnicity, age, density },
        finding_mix,
        cancer_type_weights: weights(CancerType::ALL, &mut r),
        score_model,
        windows,
    }
}

/// Raw records and ledger of the replica population.
pub fn paper_replica_raw(seed: u64) -> (RawCohort, GroundTruthLedger) {
    realise(&paper_replica_plans(seed), &TemporalWindows::default(), seed)
}

/// The replica population, labeled.
pub fn paper_replica(seed: u64) -> LabeledCohort {
    let (raw, _) = paper_replica_raw(seed);
    label_cohort(&raw, &TemporalWindows::default()).expect("default windows are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closure(bp: &CohortBlueprint) {
        let (raw, ledger) = generate_cohort(bp).unwrap();
        let cohort = label_cohort(&raw, &bp.windows).unwrap();
        let bad = ledger.mismatches(&cohort);
        assert!(bad.is_empty(), "{} mismatches, first: {:#?}", bad.len(), bad.first());
        assert_eq!(ledger.rows.len(), cohort.exams.len());
    }

    #[test]
    fn default_blueprint_closes() {
        closure(&CohortBlueprint {
            n_patients: 3000,
            seed: 11,
            ..Default::default()
        });
    }

    #[test]
    fn exclusions_close() {
        let mut bp = CohortBlueprint {
            n_patients: 3000,
            seed: 12,
            missing_score_rate: 0.1,
            screens_per_patient: [1, 5],
            ..Default::default()
        };
        bp.label_weights.insert(OutcomeLabel::Excluded, 1.0);
        for w in bp.label_weights.values_mut() {
            *w = 1.0;
        }
        closure(&bp);
        bp.windows = TemporalWindows::one_to_four_years();
        closure(&bp);
    }

    #[test]
    fn all_screen_negative() {
        let bp = CohortBlueprint {
            n_patients: 200,
            label_weights: BTreeMap::from([(OutcomeLabel::ScreenNegative, 1.0)]),
            ..Default::default()
        };
        let (raw, _) = generate_cohort(&bp).unwrap();
        let cohort = label_cohort(&raw, &bp.windows).unwrap();
        assert!(cohort.exams.iter().all(|e| e.label == OutcomeLabel::ScreenNegative));
    }

    #[test]
    fn infeasible_interval_window() {
        let mut bp = CohortBlueprint::default();
        bp.windows.interval_cancer_days = 0;
        assert!(matches!(generate_cohort(&bp), Err(Error::InfeasibleBlueprint(_))));
        bp.label_weights.insert(OutcomeLabel::IntervalCancer, 0.0);
        assert!(generate_cohort(&bp).is_ok());
    }

    #[test]
    fn bad_weights_rejected() {
        let bp = CohortBlueprint {
            label_weights: BTreeMap::from([(OutcomeLabel::ScreenNegative, 0.0)]),
            ..Default::default()
        };
        assert!(bp.validate().is_err());
        let mut bp = CohortBlueprint::default();
        bp.score_model.insert(
            OutcomeLabel::ScreenNegative,
            vec![Component { weight: 1.0, dist: ScoreDist::Uniform { lo: 0.5, hi: 1.5 } }],
        );
        assert!(bp.validate().is_err());
    }

    #[test]
    fn point_mass_and_determinism() {
        let model = BTreeMap::from([(
            OutcomeLabel::ScreenNegative,
            vec![Component { weight: 1.0, dist: ScoreDist::Point { value: 0.05 } }],
        )]);
        assert!(sample_scores(OutcomeLabel::ScreenNegative, &model, 1, 100).iter().all(|s| *s == 0.05));
        let m = default_score_model();
        let a = sample_scores(OutcomeLabel::ScreenDetectedCancer, &m, 5, 50);
        assert_eq!(a, sample_scores(OutcomeLabel::ScreenDetectedCancer, &m, 5, 50));
        assert_ne!(a, sample_scores(OutcomeLabel::ScreenDetectedCancer, &m, 6, 50));
    }

    #[test]
    fn cancer_model_crossing_fraction() {
        let s = sample_scores(OutcomeLabel::ScreenDetectedCancer, &default_score_model(), 8, 10_000);
        let frac = s.iter().filter(|x| **x >= 0.1).count() as f64 / 1e4;
        assert!((frac - 0.73).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn blueprint_toml() {
        let bp = CohortBlueprint::from_toml(
            r#"
            n_patients = 10
            seed = 3
            [label_weights]
            SCREEN_NEGATIVE = 1.0
            [[score_model.SCREEN_NEGATIVE]]
            weight = 1.0
            kind = "beta"
            alpha = 2.0
            beta = 5.0
            hi = 0.5
            [windows]
            interval_cancer_days = 365
            "#,
        )
        .unwrap();
        assert_eq!(bp.n_patients, 10);
        assert_eq!(
            bp.score_model[&OutcomeLabel::ScreenNegative][0].dist,
            ScoreDist::Beta { alpha: 2.0, beta: 5.0, lo: 0.0, hi: 0.5 }
        );
        assert!(CohortBlueprint::from_toml("n_patient = 3").is_err());
    }
}
