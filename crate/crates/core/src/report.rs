//! Result tables: demographics by outcome, stratified metrics, score
//! distributions, false-negative analysis.
//!
//! Every table is written twice: `<name>.csv` for people (metrics rounded
//! half-to-even, `N/A` for undefined values) and `<name>.jsonl` for machines
//! (one object per row, full precision, `null` for undefined). `schema.txt`
//! documents the columns of both.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::labeler::{LabeledCohort, LabeledExam, OutcomeLabel};
use crate::metrics::{self, AucComparison, Metric, PermutationConfig};
use crate::model::{AgeBin, CancerType, Density, DescriptorAxis, Ethnicity, FindingType, Race, Severity};
use crate::stratify::{self, Axis, DescriptorStratum, SubgroupResult};
use crate::metrics::BootstrapConfig;

/// Rounds half-to-even at `decimals` places.
pub fn round_half_even(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round_ties_even() / scale
}

pub fn render_real(x: Option<f64>, decimals: u32) -> String {
    match x {
        Some(v) => format!("{:.*}", decimals as usize, round_half_even(v, decimals)),
        None => "N/A".to_string(),
    }
}

/// One table cell, rendered differently for CSV and JSONL.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    /// Real with its rendered precision.
    Real(Option<f64>, u32),
    Bool(bool),
    Counts(Vec<u64>),
}

impl Cell {
    fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Real(x, d) => render_real(*x, *d),
            Cell::Bool(b) => b.to_string(),
            Cell::Counts(c) => c.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Int(n) => Value::from(*n),
            Cell::Real(x, _) => x.map_or(Value::Null, Value::from),
            Cell::Bool(b) => Value::from(*b),
            Cell::Counts(c) => Value::from(c.clone()),
        }
    }
}

pub struct Column {
    pub name: String,
    pub doc: String,
}

fn col(name: impl Into<String>, doc: impl Into<String>) -> Column {
    Column {
        name: name.into(),
        doc: doc.into(),
    }
}

/// A rendered table: header plus cells.
pub struct Table {
    pub name: String,
    pub doc: &'static str,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let csv_path = dir.join(format!("{}.csv", self.name));
        let write_err = |path: &Path| {
            let path = path.to_path_buf();
            move |e: std::io::Error| Error::Write { path, source: e }
        };
        let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::Write {
            path: csv_path.clone(),
            source: e.into(),
        })?;
        let csv_err = |e: csv::Error| Error::Write {
            path: csv_path.clone(),
            source: e.into(),
        };
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(csv_err)?;
        }
        w.flush().map_err(write_err(&csv_path))?;

        let jsonl_path = dir.join(format!("{}.jsonl", self.name));
        let mut out = String::new();
        for row in &self.rows {
            let obj: Map<String, Value> = self
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.name.clone(), v.json()))
                .collect();
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        fs::write(&jsonl_path, out).map_err(write_err(&jsonl_path))?;
        Ok(vec![csv_path, jsonl_path])
    }

    fn schema(&self, out: &mut String) {
        out.push_str(&format!("{}.csv / {}.jsonl\n  {}\n", self.name, self.name, self.doc));
        for c in &self.columns {
            out.push_str(&format!("  {:<28} {}\n", c.name, c.doc));
        }
        out.push('\n');
    }
}

// ---------------------------------------------------------------- demographics

/// Column headers of the demographics table, in order.
pub fn demographic_columns() -> Vec<&'static str> {
    std::iter::once("OVERALL")
        .chain(OutcomeLabel::OUTCOMES.iter().map(|l| l.token()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountCell {
    pub n: u64,
    /// Column percentage; 0 for an empty column.
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemographicsRow {
    pub section: &'static str,
    pub category: String,
    /// Overall first, then the outcome labels.
    pub cells: Vec<CountCell>,
}

fn pathology_category(e: &LabeledExam) -> &'static str {
    match e.final_pathology.severity {
        Severity::NoPathology | Severity::NonBreastCancer => "NO_PATHOLOGY",
        Severity::Benign => "BENIGN_LESION",
        Severity::Borderline => "BORDERLINE_LESION",
        Severity::HighRisk => "HIGH_RISK_LESION",
        Severity::InvasiveCancer => "INVASIVE_CANCER",
        Severity::NonInvasiveCancer => "NONINVASIVE_CANCER",
    }
}

const PATHOLOGY_CATEGORIES: [&str; 6] = [
    "NO_PATHOLOGY",
    "BENIGN_LESION",
    "BORDERLINE_LESION",
    "HIGH_RISK_LESION",
    "INVASIVE_CANCER",
    "NONINVASIVE_CANCER",
];

/// Counts by demographic, density, screen-detected pathology and finding
/// type for every exam with an outcome label. Density percentages use the
/// known-density exams as denominator; finding percentages can add past
/// 100 because exams carry several findings.
pub fn demographics_table(cohort: &LabeledCohort) -> Vec<DemographicsRow> {
    let exams: Vec<&LabeledExam> = cohort.exams.iter().filter(|e| e.has_outcome()).collect();
    let in_column = |e: &LabeledExam, c: usize| c == 0 || OutcomeLabel::OUTCOMES[c - 1] == e.label;
    let ncols = 1 + OutcomeLabel::OUTCOMES.len();
    let column_total = |pred: &dyn Fn(&LabeledExam) -> bool| -> Vec<u64> {
        (0..ncols)
            .map(|c| exams.iter().filter(|e| in_column(e, c) && pred(e)).count() as u64)
            .collect()
    };
    let all = column_total(&|_| true);
    let known_density = column_total(&|e| e.density != Density::Unknown);

    let mut rows = Vec::new();
    let mut push = |section: &'static str, category: String, denom: &[u64], pred: &dyn Fn(&LabeledExam) -> bool| {
        let counts = column_total(pred);
        let cells = counts
            .iter()
            .zip(denom)
            .map(|(n, d)| CountCell {
                n: *n,
                pct: if *d == 0 { 0.0 } else { 100.0 * *n as f64 / *d as f64 },
            })
            .collect();
        rows.push(DemographicsRow { section, category, cells });
    };

    push("N", "ALL".into(), &all, &|_| true);
    for r in Race::ALL {
        push("RACE", r.to_string(), &all, &|e| e.race == *r);
    }
    for x in Ethnicity::ALL {
        push("ETHNICITY", x.to_string(), &all, &|e| e.ethnicity == *x);
    }
    for a in AgeBin::ALL {
        push("AGE", a.to_string(), &all, &|e| e.age_bin() == *a);
    }
    for d in Density::ALL.iter().filter(|d| **d != Density::Unknown) {
        push("DENSITY", d.to_string(), &known_density, &|e| e.density == *d);
    }
    for p in PATHOLOGY_CATEGORIES {
        push("SCREEN_DETECTED_PATHOLOGY", p.into(), &all, &|e| pathology_category(e) == p);
    }
    for f in FindingType::ALL {
        push("FINDING", f.to_string(), &all, &|e| e.finding_types.contains(f));
    }
    rows
}

fn demographics_tabular(rows: &[DemographicsRow]) -> Table {
    let mut columns = vec![
        col("section", "row group: N, RACE, ETHNICITY, AGE, DENSITY, SCREEN_DETECTED_PATHOLOGY, FINDING"),
        col("category", "value within the row group"),
    ];
    for c in demographic_columns() {
        let lc = c.to_ascii_lowercase();
        columns.push(col(format!("{lc}_n"), format!("exam count in column {c}")));
        columns.push(col(
            format!("{lc}_pct"),
            format!("column percentage in {c} (1 d.p.; DENSITY uses known-density exams)"),
        ));
    }
    Table {
        name: "table_demographics".into(),
        doc: "Exams with an outcome label, by demographic and imaging characteristic and outcome.",
        columns,
        rows: rows
            .iter()
            .map(|r| {
                let mut cells = vec![Cell::text(r.section), Cell::text(r.category.clone())];
                for c in &r.cells {
                    cells.push(Cell::Int(c.n));
                    cells.push(Cell::Real(Some(c.pct), 1));
                }
                cells
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- metrics

/// Stratified metrics in canonical order (Overall first).
pub fn metrics_table(results: &[SubgroupResult]) -> Table {
    let mut results: Vec<&SubgroupResult> = results.iter().collect();
    results.sort_by(|a, b| a.spec.cmp(&b.spec));
    let mut columns = vec![
        col("axis", "stratification axis"),
        col("subgroup", "subgroup value (ALL for the overall row)"),
        col("negative_scope", "ALL_NEGATIVES or MATCHING_NEGATIVES_ONLY"),
        col("total_negatives", "negative-class exams"),
        col("total_positives", "positive-class exams"),
        col("tp", "true positives at threshold"),
        col("fp", "false positives at threshold"),
        col("tn", "true negatives at threshold"),
        col("fn", "false negatives at threshold"),
    ];
    for m in Metric::ALL {
        columns.push(col(m.name(), format!("{m} (2 d.p. in CSV; N/A when undefined)")));
        columns.push(col(format!("{m}_low"), format!("{m} 95% CI lower bound")));
        columns.push(col(format!("{m}_high"), format!("{m} 95% CI upper bound")));
    }
    columns.push(col("evaluable", "both classes present (AUROC defined)"));
    columns.push(col("threshold", "operating point; score >= threshold is positive"));
    let rows = results
        .iter()
        .map(|r| {
            let b = &r.bundle;
            let mut cells = vec![
                Cell::text(r.spec.axis.token()),
                Cell::text(r.spec.selector.to_string()),
                Cell::text(match r.spec.negative_scope {
                    stratify::NegativeScope::AllNegatives => "ALL_NEGATIVES",
                    stratify::NegativeScope::MatchingNegativesOnly => "MATCHING_NEGATIVES_ONLY",
                }),
                Cell::Int(b.n_neg),
                Cell::Int(b.n_pos),
                Cell::Int(b.counts.tp),
                Cell::Int(b.counts.fp),
                Cell::Int(b.counts.tn),
                Cell::Int(b.counts.fn_),
            ];
            for m in Metric::ALL {
                let ci = b.ci.get(&m);
                cells.push(Cell::Real(b.get(m), 2));
                cells.push(Cell::Real(ci.map(|c| c.low), 2));
                cells.push(Cell::Real(ci.map(|c| c.high), 2));
            }
            cells.push(Cell::Bool(r.evaluable));
            cells.push(Cell::Real(Some(b.threshold), 2));
            cells
        })
        .collect();
    Table {
        name: "table_metrics".into(),
        doc: "Binary metrics overall and per subgroup; interval cancers and excluded exams are not counted.",
        columns,
        rows,
    }
}

/// The overall row as printed by the command line tool.
pub fn overall_line(r: &SubgroupResult) -> String {
    let b = &r.bundle;
    let mut parts = vec![format!("n_neg={}", b.n_neg), format!("n_pos={}", b.n_pos)];
    for m in Metric::ALL {
        let mut s = format!("{}={}", m, render_real(b.get(m), 2));
        if let Some(ci) = b.ci.get(&m) {
            s.push_str(&format!(
                " ({}-{})",
                render_real(Some(ci.low), 2),
                render_real(Some(ci.high), 2)
            ));
        }
        parts.push(s);
    }
    format!("OVERALL {}", parts.join(" "))
}

// ---------------------------------------------------------------- distributions

token_enum! {
    pub enum Grouping {
        OutcomeLabel => "OUTCOME_LABEL",
        PathologySeverity => "PATHOLOGY_SEVERITY",
        PathologySubtype => "PATHOLOGY_SUBTYPE",
        FindingTypeByOutcome => "FINDING_TYPE_BY_OUTCOME",
    }
}

impl Grouping {
    fn file_stem(self) -> String {
        format!("distributions_{}", self.token().to_ascii_lowercase())
    }

    fn groups(self, e: &LabeledExam) -> Vec<String> {
        match self {
            Grouping::OutcomeLabel => vec![e.label.to_string()],
            Grouping::PathologySeverity => vec![e.final_pathology.severity.to_string()],
            Grouping::PathologySubtype => e.final_pathology.subtype.iter().cloned().collect(),
            Grouping::FindingTypeByOutcome => e
                .finding_types
                .iter()
                .map(|f| format!("{f}/{}", e.label))
                .collect(),
        }
    }

    /// Group order: enum order for labels, lexical otherwise.
    fn rank(self, group: &str) -> (usize, String) {
        let pos = match self {
            Grouping::OutcomeLabel => OutcomeLabel::ALL.iter().position(|l| l.token() == group),
            Grouping::PathologySeverity => Severity::ALL.iter().position(|s| s.token() == group),
            _ => None,
        };
        (pos.unwrap_or(0), group.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub group: String,
    pub n: u64,
    pub n_above: u64,
    pub fraction_above_threshold: f64,
    /// Equal-width bins over [0,1]; a score of 1.0 falls in the last bin.
    pub histogram: Vec<u64>,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
}

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

fn bin_of(score: f64, bins: usize) -> usize {
    ((score * bins as f64).floor() as usize).min(bins - 1)
}

/// Score summaries over exams with an outcome label and a score (interval
/// cancers included).
pub fn distribution_summaries(
    cohort: &LabeledCohort,
    grouping: Grouping,
    threshold: f64,
    bins: usize,
) -> Vec<DistributionSummary> {
    let bins = bins.max(1);
    let mut by_group: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    for e in cohort.exams.iter().filter(|e| e.is_scored_outcome()) {
        let score = e.exam_score.expect("scored outcome");
        for g in grouping.groups(e) {
            by_group.entry(grouping.rank(&g)).or_default().push(score);
        }
    }
    by_group
        .into_iter()
        .map(|((_, group), mut scores)| {
            scores.sort_by(f64::total_cmp);
            let mut histogram = vec![0u64; bins];
            for s in &scores {
                histogram[bin_of(*s, bins)] += 1;
            }
            let n_above = scores.iter().filter(|s| **s >= threshold).count() as u64;
            let q = |p| metrics::nearest_rank(&scores, p).expect("non-empty group");
            DistributionSummary {
                group,
                n: scores.len() as u64,
                n_above,
                fraction_above_threshold: n_above as f64 / scores.len() as f64,
                histogram,
                p25: q(0.25),
                median: q(0.5),
                p75: q(0.75),
            }
        })
        .collect()
}

fn distribution_tabular(grouping: Grouping, rows: &[DistributionSummary], bins: usize) -> Table {
    Table {
        name: grouping.file_stem(),
        doc: "Exam-score distribution per group (exams with an outcome label and a score).",
        columns: vec![
            col("group", format!("{} value", grouping)),
            col("n", "exams in the group"),
            col("n_above", "exams scoring >= threshold"),
            col("fraction_above_threshold", "n_above / n (4 d.p. in CSV)"),
            col("p25", "25th percentile score, nearest rank"),
            col("median", "median score, nearest rank"),
            col("p75", "75th percentile score, nearest rank"),
            col(
                "histogram",
                format!("{bins} equal-width bin counts over [0,1], ';'-separated in CSV"),
            ),
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::text(r.group.clone()),
                    Cell::Int(r.n),
                    Cell::Int(r.n_above),
                    Cell::Real(Some(r.fraction_above_threshold), 4),
                    Cell::Real(Some(r.p25), 4),
                    Cell::Real(Some(r.median), 4),
                    Cell::Real(Some(r.p75), 4),
                    Cell::Counts(r.histogram.clone()),
                ]
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- failures

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureRow {
    pub cancer_type: CancerType,
    pub finding_type: FindingType,
    /// Evaluable screen-detected cancers of this type.
    pub n_cancer_type: u64,
    /// ... of which show the finding.
    pub n_overall: u64,
    /// False negatives of this cancer type.
    pub n_false_negative_cancer_type: u64,
    /// ... of which show the finding.
    pub n_false_negative: u64,
}

/// Finding-type breakdown of screen-detected cancers and their false
/// negatives at `threshold`.
pub fn failure_analysis(cohort: &LabeledCohort, threshold: f64) -> Vec<FailureRow> {
    let mut rows = Vec::new();
    for ct in CancerType::ALL {
        let cancers: Vec<(&LabeledExam, bool)> = cohort
            .evaluable()
            .filter(|e| e.cancer_type() == Some(*ct))
            .map(|e| (e, e.exam_score.is_some_and(|s| s < threshold)))
            .collect();
        let fn_total = cancers.iter().filter(|(_, missed)| *missed).count() as u64;
        for f in FindingType::ALL {
            let with: Vec<bool> = cancers
                .iter()
                .filter(|(e, _)| e.finding_types.contains(f))
                .map(|(_, missed)| *missed)
                .collect();
            rows.push(FailureRow {
                cancer_type: *ct,
                finding_type: *f,
                n_cancer_type: cancers.len() as u64,
                n_overall: with.len() as u64,
                n_false_negative_cancer_type: fn_total,
                n_false_negative: with.iter().filter(|m| **m).count() as u64,
            });
        }
    }
    rows
}

fn failure_tabular(rows: &[FailureRow]) -> Table {
    let pct = |n: u64, d: u64| (d > 0).then(|| 100.0 * n as f64 / d as f64);
    Table {
        name: "failure_analysis".into(),
        doc: "Finding types among screen-detected cancers and their false negatives at the threshold.",
        columns: vec![
            col("cancer_type", "INVASIVE or NON_INVASIVE"),
            col("finding_type", "finding present on the exam"),
            col("n_cancer_type", "evaluable cancers of this type"),
            col("n_overall", "cancers of this type with the finding"),
            col("pct_overall", "n_overall / n_cancer_type, percent"),
            col("n_false_negative_cancer_type", "false negatives of this type"),
            col("n_false_negative", "false negatives of this type with the finding"),
            col("pct_false_negative", "n_false_negative / n_overall, percent"),
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::text(r.cancer_type.token()),
                    Cell::text(r.finding_type.token()),
                    Cell::Int(r.n_cancer_type),
                    Cell::Int(r.n_overall),
                    Cell::Real(pct(r.n_overall, r.n_cancer_type), 1),
                    Cell::Int(r.n_false_negative_cancer_type),
                    Cell::Int(r.n_false_negative),
                    Cell::Real(pct(r.n_false_negative, r.n_overall), 1),
                ]
            })
            .collect(),
    }
}

// ---------------------------------------------------------------- the rest

fn strata_tabular(rows: &[DescriptorStratum]) -> Table {
    Table {
        name: "descriptor_strata".into(),
        doc: "Exam-score quartiles per BI-RADS descriptor value and outcome label.",
        columns: vec![
            col("descriptor_axis", "descriptor family"),
            col("descriptor", "descriptor value"),
            col("label", "outcome label"),
            col("n", "exams"),
            col("p25", "25th percentile score, nearest rank"),
            col("median", "median score, nearest rank"),
            col("p75", "75th percentile score, nearest rank"),
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::text(r.axis.token()),
                    Cell::text(r.value),
                    Cell::text(r.label.token()),
                    Cell::Int(r.n as u64),
                    Cell::Real(Some(r.p25), 4),
                    Cell::Real(Some(r.median), 4),
                    Cell::Real(Some(r.p75), 4),
                ]
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub group_a: String,
    pub group_b: String,
    pub comparison: AucComparison,
}

fn significance_tabular(rows: &[SignificanceRow]) -> Table {
    Table {
        name: "significance".into(),
        doc: "Two-sided permutation tests for AUROC differences between subgroups.",
        columns: vec![
            col("group_a", "first subgroup"),
            col("group_b", "second subgroup"),
            col("auc_a", "AUROC of group_a"),
            col("auc_b", "AUROC of group_b"),
            col("p_value", "(1 + #permutations as extreme) / (1 + n_permutations)"),
            col("n_permutations", "label permutations drawn"),
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::text(r.group_a.clone()),
                    Cell::text(r.group_b.clone()),
                    Cell::Real(Some(r.comparison.auc_a), 4),
                    Cell::Real(Some(r.comparison.auc_b), 4),
                    Cell::Real(Some(r.comparison.p_value), 4),
                    Cell::Int(r.comparison.n_permutations as u64),
                ]
            })
            .collect(),
    }
}

/// Everything `evaluate` computes.
#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub threshold: f64,
    pub histogram_bins: usize,
    pub axes: Vec<Axis>,
    pub bootstrap: Option<BootstrapConfig>,
    pub permutation: Option<PermutationConfig>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            threshold: metrics::DEFAULT_THRESHOLD,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            axes: Axis::ALL.to_vec(),
            bootstrap: Some(BootstrapConfig::default()),
            permutation: Some(PermutationConfig::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub demographics: Vec<DemographicsRow>,
    pub metrics: Vec<SubgroupResult>,
    pub distributions: Vec<(Grouping, Vec<DistributionSummary>)>,
    pub failures: Vec<FailureRow>,
    pub strata: Vec<DescriptorStratum>,
    pub significance: Vec<SignificanceRow>,
    pub histogram_bins: usize,
}

impl Report {
    pub fn overall(&self) -> &SubgroupResult {
        self.metrics
            .iter()
            .find(|r| r.spec.axis == Axis::Overall)
            .expect("overall row is always evaluated")
    }
}

pub fn build_report(cohort: &LabeledCohort, cfg: &ReportConfig) -> Result<Report> {
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(Error::InvalidConfig(format!(
            "threshold {} outside [0,1]",
            cfg.threshold
        )));
    }
    let metrics = stratify::evaluate_axes(cohort, &cfg.axes, cfg.bootstrap.as_ref(), cfg.threshold)?;

    let mut significance = Vec::new();
    if let Some(perm) = &cfg.permutation {
        let groups = stratify::derive_subgroups(cohort, Axis::CancerType);
        if let [a, b] = groups.as_slice() {
            match stratify::compare_subgroups(a, b, perm) {
                Ok(comparison) => significance.push(SignificanceRow {
                    group_a: a.spec.to_string(),
                    group_b: b.spec.to_string(),
                    comparison,
                }),
                Err(e) => log::warn!("skipping cancer-type comparison: {e}"),
            }
        }
    }

    Ok(Report {
        demographics: demographics_table(cohort),
        metrics,
        distributions: Grouping::ALL
            .iter()
            .map(|g| (*g, distribution_summaries(cohort, *g, cfg.threshold, cfg.histogram_bins)))
            .collect(),
        failures: failure_analysis(cohort, cfg.threshold),
        strata: DescriptorAxis::ALL
            .iter()
            .flat_map(|a| stratify::descriptor_strata(cohort, *a))
            .collect(),
        significance,
        histogram_bins: cfg.histogram_bins,
    })
}

/// Writes every table, its JSONL twin, labels, the validation report and
/// `schema.txt` into `dir`. Returns the files written, sorted.
pub fn write_report(report: &Report, cohort: &LabeledCohort, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Write {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut tables = vec![
        demographics_tabular(&report.demographics),
        metrics_table(&report.metrics),
    ];
    for (g, rows) in &report.distributions {
        tables.push(distribution_tabular(*g, rows, report.histogram_bins));
    }
    tables.push(failure_tabular(&report.failures));
    tables.push(strata_tabular(&report.strata));
    tables.push(significance_tabular(&report.significance));

    let mut written = Vec::new();
    let mut schema = String::from("Columns of every file written by `screeval evaluate`.\n\n");
    for t in &tables {
        written.extend(t.write(dir)?);
        t.schema(&mut schema);
    }
    schema.push_str(LABELS_SCHEMA);

    let labels = dir.join("labels.csv");
    cohort.write_labels(&labels)?;
    let validation = dir.join("validation_report.csv");
    cohort.validation.write_csv(&validation)?;
    let schema_path = dir.join("schema.txt");
    let mut f = fs::File::create(&schema_path).map_err(|e| Error::Write {
        path: schema_path.clone(),
        source: e,
    })?;
    f.write_all(schema.as_bytes()).map_err(|e| Error::Write {
        path: schema_path.clone(),
        source: e,
    })?;
    written.extend([labels, validation, schema_path]);
    written.sort();
    Ok(written)
}

const LABELS_SCHEMA: &str = "\
labels.csv
  One row per screening exam.
  exam_id                      screening exam
  label                        outcome label, or EXCLUDED
  binary_class                 NEGATIVE, POSITIVE or NOT_APPLICABLE
  exclusion_reason             why the exam is not evaluated (empty if it is)
  final_severity               resolved pathology of the recall workup
  finding_types                ';'-separated finding types on the screen

validation_report.csv
  Problems found in the input records; flagged exams are excluded.
  kind                         issue kind
  record_id                    offending record
  exam_id                      related exam, if any
  detail                       human-readable description
";
