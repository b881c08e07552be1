//! Evaluation subgroups.
//!
//! Demographic axes partition the binary population. Cancer-type subgroups
//! keep every negative and restrict the positives; feature subgroups
//! (finding type, BI-RADS descriptor, pathology subtype) restrict both
//! classes to exams that show the feature.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::labeler::{LabeledCohort, LabeledExam, OutcomeLabel};
use crate::metrics::{self, BootstrapConfig, MetricsBundle, Observation, PermutationConfig};
use crate::model::{
    AgeBin, CancerType, Density, Descriptor, DescriptorAxis, Ethnicity, FindingType, Race,
};
use crate::rng;

token_enum! {
    /// Stratification axes in canonical (report) order.
    pub enum Axis {
        Overall => "OVERALL",
        Race => "RACE",
        Ethnicity => "ETHNICITY",
        Age => "AGE",
        Density => "DENSITY",
        CancerType => "CANCER_TYPE",
        FindingType => "FINDING_TYPE",
        BiradsDescriptor => "BIRADS_DESCRIPTOR",
        PathologySubtype => "PATHOLOGY_SUBTYPE",
    }
}

impl Axis {
    /// Lenient parse for command lines: case-insensitive, `-` for `_`.
    pub fn parse(name: &str) -> Result<Axis> {
        let norm = name.trim().to_ascii_uppercase().replace('-', "_");
        Axis::from_str(&norm).map_err(|_| Error::UnknownAxis(name.to_string()))
    }

    /// Parses a comma-separated axis list.
    pub fn parse_list(list: &str) -> Result<Vec<Axis>> {
        list.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(Axis::parse)
            .collect()
    }

    pub fn negative_scope(self) -> NegativeScope {
        match self {
            Axis::FindingType | Axis::BiradsDescriptor | Axis::PathologySubtype => {
                NegativeScope::MatchingNegativesOnly
            }
            _ => NegativeScope::AllNegatives,
        }
    }

    /// Axes whose subgroups partition the binary population.
    pub fn is_partition(self) -> bool {
        matches!(self, Axis::Race | Axis::Ethnicity | Axis::Age)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NegativeScope {
    AllNegatives,
    MatchingNegativesOnly,
}

/// Axis-specific subgroup value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Selector {
    All,
    Race(Race),
    Ethnicity(Ethnicity),
    Age(AgeBin),
    Density(Density),
    CancerType(CancerType),
    FindingType(FindingType),
    Descriptor(Descriptor),
    PathologySubtype(String),
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::All => f.write_str("ALL"),
            Selector::Race(v) => v.fmt(f),
            Selector::Ethnicity(v) => v.fmt(f),
            Selector::Age(v) => v.fmt(f),
            Selector::Density(v) => v.fmt(f),
            Selector::CancerType(v) => v.fmt(f),
            Selector::FindingType(v) => v.fmt(f),
            Selector::Descriptor(v) => v.fmt(f),
            Selector::PathologySubtype(v) => f.write_str(v),
        }
    }
}

impl Serialize for Selector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SubgroupSpec {
    pub axis: Axis,
    pub selector: Selector,
    pub negative_scope: NegativeScope,
}

impl SubgroupSpec {
    pub fn overall() -> Self {
        SubgroupSpec {
            axis: Axis::Overall,
            selector: Selector::All,
            negative_scope: NegativeScope::AllNegatives,
        }
    }

    fn new(axis: Axis, selector: Selector) -> Self {
        SubgroupSpec {
            axis,
            selector,
            negative_scope: axis.negative_scope(),
        }
    }
}

impl fmt::Display for SubgroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.axis, self.selector)
    }
}

/// A subgroup with its metric population.
#[derive(Debug, Clone)]
pub struct Subgroup<'a> {
    pub spec: SubgroupSpec,
    pub members: Vec<&'a LabeledExam>,
}

impl Subgroup<'_> {
    pub fn observations(&self) -> Vec<Observation> {
        self.members.iter().filter_map(|e| e.observation()).collect()
    }
}

/// The feature values one exam carries on a feature axis.
fn feature_selectors(axis: Axis, e: &LabeledExam) -> Vec<Selector> {
    match axis {
        Axis::FindingType => e.finding_types.iter().map(|f| Selector::FindingType(*f)).collect(),
        Axis::BiradsDescriptor => e.descriptors.iter().map(|d| Selector::Descriptor(*d)).collect(),
        Axis::PathologySubtype => e
            .final_pathology
            .subtype
            .iter()
            .map(|s| Selector::PathologySubtype(s.clone()))
            .collect(),
        _ => Vec::new(),
    }
}

/// Demographic value of one exam; `None` keeps it out of every subgroup on
/// that axis (unknown density).
fn partition_selector(axis: Axis, e: &LabeledExam) -> Option<Selector> {
    match axis {
        Axis::Overall => Some(Selector::All),
        Axis::Race => Some(Selector::Race(e.race)),
        Axis::Ethnicity => Some(Selector::Ethnicity(e.ethnicity)),
        Axis::Age => Some(Selector::Age(e.age_bin())),
        Axis::Density => (e.density != Density::Unknown).then_some(Selector::Density(e.density)),
        _ => None,
    }
}

/// Non-empty subgroups of the evaluable population along `axis`, in
/// canonical order.
pub fn derive_subgroups(cohort: &LabeledCohort, axis: Axis) -> Vec<Subgroup<'_>> {
    let mut groups: BTreeMap<Selector, Vec<&LabeledExam>> = BTreeMap::new();
    let evaluable: Vec<&LabeledExam> = cohort.evaluable().collect();
    match axis {
        Axis::CancerType => {
            let negatives: Vec<&LabeledExam> =
                evaluable.iter().copied().filter(|e| !is_positive(e)).collect();
            for ct in CancerType::ALL {
                let positives = evaluable.iter().copied().filter(|e| e.cancer_type() == Some(*ct));
                let members: Vec<&LabeledExam> = positives.chain(negatives.iter().copied()).collect();
                if members.iter().any(|e| is_positive(e)) {
                    groups.insert(Selector::CancerType(*ct), members);
                }
            }
        }
        Axis::FindingType | Axis::BiradsDescriptor | Axis::PathologySubtype => {
            for e in &evaluable {
                for sel in feature_selectors(axis, e) {
                    groups.entry(sel).or_default().push(e);
                }
            }
        }
        _ => {
            for e in &evaluable {
                if let Some(sel) = partition_selector(axis, e) {
                    groups.entry(sel).or_default().push(e);
                }
            }
        }
    }
    groups
        .into_iter()
        .map(|(selector, members)| Subgroup {
            spec: SubgroupSpec::new(axis, selector),
            members,
        })
        .collect()
}

fn is_positive(e: &LabeledExam) -> bool {
    e.observation().is_some_and(|o| o.positive)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupResult {
    pub spec: SubgroupSpec,
    pub bundle: MetricsBundle,
    pub n_total: u64,
    /// Both classes present, so AUROC is defined.
    pub evaluable: bool,
}

/// Metrics for one subgroup. Subgroups with an empty class are still
/// reported, flagged as not evaluable.
pub fn evaluate_subgroup(
    spec: &SubgroupSpec,
    members: &[&LabeledExam],
    bootstrap: Option<&BootstrapConfig>,
    threshold: f64,
) -> Result<SubgroupResult> {
    let obs = metrics::observations_of(members.iter().copied())?;
    // Each subgroup gets its own resampling stream, keyed by its identity
    // so that adding or removing other subgroups changes nothing here.
    let cfg = bootstrap.map(|c| BootstrapConfig {
        seed: rng::derive_named(c.seed, &spec.to_string()),
        ..*c
    });
    let bundle = metrics::evaluate(&obs, threshold, cfg.as_ref())?;
    Ok(SubgroupResult {
        spec: spec.clone(),
        n_total: bundle.n_pos + bundle.n_neg,
        evaluable: bundle.auroc.is_some(),
        bundle,
    })
}

/// Overall plus every subgroup on `axes`, evaluated in parallel and
/// returned in canonical order.
pub fn evaluate_axes(
    cohort: &LabeledCohort,
    axes: &[Axis],
    bootstrap: Option<&BootstrapConfig>,
    threshold: f64,
) -> Result<Vec<SubgroupResult>> {
    let mut axes = axes.to_vec();
    axes.push(Axis::Overall);
    axes.sort();
    axes.dedup();
    let groups: Vec<Subgroup> = axes.iter().flat_map(|a| derive_subgroups(cohort, *a)).collect();
    if groups.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut results = groups
        .par_iter()
        .map(|g| evaluate_subgroup(&g.spec, &g.members, bootstrap, threshold))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.spec.cmp(&b.spec));
    Ok(results)
}

/// AUROC comparison between two subgroups (exams in both stay in both).
pub fn compare_subgroups(
    a: &Subgroup<'_>,
    b: &Subgroup<'_>,
    cfg: &PermutationConfig,
) -> Result<metrics::AucComparison> {
    let cfg = PermutationConfig {
        seed: rng::derive_named(cfg.seed, &format!("{} vs {}", a.spec, b.spec)),
        ..*cfg
    };
    metrics::compare_auc(&a.members, &b.members, &cfg)
}

/// Score quartiles of one descriptor value within one outcome label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptorStratum {
    pub axis: DescriptorAxis,
    pub value: &'static str,
    pub label: OutcomeLabel,
    pub n: usize,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
}

/// Descriptor × outcome-label score summaries over scored exams. Generic
/// descriptors never reach here; they are dropped when findings are read.
pub fn descriptor_strata(cohort: &LabeledCohort, axis: DescriptorAxis) -> Vec<DescriptorStratum> {
    let mut cells: BTreeMap<(Descriptor, OutcomeLabel), Vec<f64>> = BTreeMap::new();
    for e in cohort.exams.iter().filter(|e| e.is_scored_outcome()) {
        let score = e.exam_score.expect("scored outcome");
        for d in e.descriptors.iter().filter(|d| d.axis() == axis) {
            cells.entry((*d, e.label)).or_default().push(score);
        }
    }
    cells
        .into_iter()
        .map(|((d, label), mut scores)| {
            scores.sort_by(f64::total_cmp);
            let q = |p| metrics::nearest_rank(&scores, p).expect("non-empty cell");
            DescriptorStratum {
                axis,
                value: d.value_token(),
                label,
                n: scores.len(),
                p25: q(0.25),
                median: q(0.5),
                p75: q(0.75),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::Assessment;
    use crate::linkage::FinalPathology;
    use crate::model::{MassShape, Severity};

    pub(crate) fn exam(id: &str, label: OutcomeLabel, score: f64) -> LabeledExam {
        LabeledExam {
            exam_id: id.into(),
            patient_id: format!("p{id}"),
            label,
            binary_class: label.binary_class(),
            exclusion_reason: None,
            assessment: Assessment::Normal,
            final_pathology: FinalPathology::none(),
            interval_pathology: None,
            finding_types: Default::default(),
            descriptors: Default::default(),
            exam_score: Some(score),
            race: Race::White,
            ethnicity: Ethnicity::Unknown,
            density: Density::B,
            age_at_exam: 60,
        }
    }

    fn cancer(id: &str, severity: Severity, score: f64) -> LabeledExam {
        let mut e = exam(id, OutcomeLabel::ScreenDetectedCancer, score);
        e.final_pathology.severity = severity;
        e
    }

    #[test]
    fn axis_parsing() {
        assert_eq!(Axis::parse("race").unwrap(), Axis::Race);
        assert_eq!(Axis::parse("finding-type").unwrap(), Axis::FindingType);
        assert_eq!(
            Axis::parse_list("age, density").unwrap(),
            vec![Axis::Age, Axis::Density]
        );
        assert!(matches!(Axis::parse("zodiac"), Err(Error::UnknownAxis(a)) if a == "zodiac"));
    }

    #[test]
    fn cancer_type_keeps_all_negatives() {
        let cohort = LabeledCohort::from_exams(vec![
            cancer("a", Severity::InvasiveCancer, 0.9),
            cancer("b", Severity::NonInvasiveCancer, 0.2),
            exam("c", OutcomeLabel::ScreenNegative, 0.01),
            exam("d", OutcomeLabel::BiopsyProvenBenign, 0.3),
            exam("e", OutcomeLabel::IntervalCancer, 0.5),
        ]);
        let groups = derive_subgroups(&cohort, Axis::CancerType);
        assert_eq!(groups.len(), 2);
        let r = evaluate_subgroup(&groups[0].spec, &groups[0].members, None, 0.1).unwrap();
        assert_eq!(groups[0].spec.selector, Selector::CancerType(CancerType::Invasive));
        assert_eq!((r.bundle.n_pos, r.bundle.n_neg), (1, 2));
        assert_eq!(r.n_total, 3);
    }

    #[test]
    fn finding_membership_overlaps() {
        let mut a = cancer("a", Severity::InvasiveCancer, 0.9);
        a.finding_types = [FindingType::Mass, FindingType::Calcification].into();
        a.descriptors = [Descriptor::MassShape(MassShape::Irregular)].into();
        let mut b = exam("b", OutcomeLabel::DiagnosticNegative, 0.2);
        b.finding_types = [FindingType::Mass].into();
        let cohort = LabeledCohort::from_exams(vec![a, b, exam("c", OutcomeLabel::ScreenNegative, 0.0)]);
        let groups = derive_subgroups(&cohort, Axis::FindingType);
        let sizes: Vec<(String, usize)> =
            groups.iter().map(|g| (g.spec.selector.to_string(), g.members.len())).collect();
        assert_eq!(sizes, vec![("MASS".into(), 2), ("CALCIFICATION".into(), 1)]);
        assert_eq!(groups[0].spec.negative_scope, NegativeScope::MatchingNegativesOnly);
    }

    #[test]
    fn all_negative_subgroup_is_not_evaluable() {
        let exams: Vec<LabeledExam> =
            (0..10).map(|i| exam(&i.to_string(), OutcomeLabel::ScreenNegative, 0.05)).collect();
        let members: Vec<&LabeledExam> = exams.iter().collect();
        let r = evaluate_subgroup(&SubgroupSpec::overall(), &members, None, 0.1).unwrap();
        assert!(!r.evaluable);
        assert_eq!(r.bundle.n_pos, 0);
        assert_eq!(r.bundle.auroc, None);
    }

    #[test]
    fn unknown_density_only_in_overall() {
        let mut a = exam("a", OutcomeLabel::ScreenNegative, 0.05);
        a.density = Density::Unknown;
        let cohort = LabeledCohort::from_exams(vec![a, exam("b", OutcomeLabel::ScreenNegative, 0.2)]);
        let total: usize = derive_subgroups(&cohort, Axis::Density).iter().map(|g| g.members.len()).sum();
        assert_eq!(total, 1);
        assert_eq!(derive_subgroups(&cohort, Axis::Overall)[0].members.len(), 2);
    }

    #[test]
    fn singleton_descriptor_quantiles() {
        let mut a = exam("a", OutcomeLabel::DiagnosticNegative, 0.3);
        a.descriptors = [Descriptor::MassShape(MassShape::Oval)].into();
        let cohort = LabeledCohort::from_exams(vec![a]);
        let s = descriptor_strata(&cohort, DescriptorAxis::MassShape);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].p25, s[0].median, s[0].p75), (0.3, 0.3, 0.3));
        assert!(descriptor_strata(&cohort, DescriptorAxis::MassMargin).is_empty());
    }

    #[test]
    fn results_in_canonical_order() {
        let mut exams = vec![
            cancer("a", Severity::InvasiveCancer, 0.9),
            exam("b", OutcomeLabel::ScreenNegative, 0.01),
        ];
        exams[1].race = Race::Black;
        let cohort = LabeledCohort::from_exams(exams);
        let r = evaluate_axes(&cohort, &[Axis::CancerType, Axis::Race], None, 0.1).unwrap();
        let specs: Vec<String> = r.iter().map(|r| r.spec.to_string()).collect();
        assert_eq!(
            specs,
            ["OVERALL=ALL", "RACE=BLACK", "RACE=WHITE", "CANCER_TYPE=INVASIVE"]
        );
        assert_eq!(r[0].spec.negative_scope, NegativeScope::AllNegatives);
    }
}
