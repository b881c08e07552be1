//! Binary-classification metrics at a fixed operating point, AUROC, and
//! their resampling statistics.
//!
//! AUROC is the Mann–Whitney statistic with ties counted as half a win.
//! Win counts are accumulated as doubled integers, so every AUROC value is
//! an exact ratio of integers rounded once.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::LabeledExam;
use crate::rng;

/// Default operating point of the evaluated model.
pub const DEFAULT_THRESHOLD: f64 = 0.10;

/// One scored exam with its binary ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub score: f64,
    pub positive: bool,
}

impl Observation {
    pub fn new(score: f64, positive: bool) -> Self {
        Observation { score, positive }
    }

    /// Positive prediction iff the score reaches the threshold.
    pub fn predicted_positive(&self, threshold: f64) -> bool {
        self.score >= threshold
    }
}

/// Evaluable observations of `exams`; fails on any exam outside the binary
/// population.
pub fn observations_of<'a>(
    exams: impl IntoIterator<Item = &'a LabeledExam>,
) -> Result<Vec<Observation>> {
    exams
        .into_iter()
        .map(|e| {
            e.observation().ok_or_else(|| Error::NotBinary {
                exam_id: e.exam_id.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn n_pos(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn n_neg(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.n_pos() + self.n_neg()
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

pub fn confusion_at_threshold(obs: &[Observation], threshold: f64) -> Result<ConfusionCounts> {
    if obs.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut c = ConfusionCounts::default();
    for o in obs {
        match (o.positive, o.predicted_positive(threshold)) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Precision,
    Recall,
    Fpr,
    Tnr,
    Fnr,
    Auroc,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Precision,
        Metric::Recall,
        Metric::Fpr,
        Metric::Tnr,
        Metric::Fnr,
        Metric::Auroc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Fpr => "fpr",
            Metric::Tnr => "tnr",
            Metric::Fnr => "fnr",
            Metric::Auroc => "auroc",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Threshold metrics; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fnr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn point_metrics(c: &ConfusionCounts) -> PointMetrics {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let fpr = ratio(c.fp, c.fp + c.tn);
    PointMetrics {
        precision: ratio(c.tp, c.tp + c.fp),
        recall,
        fpr,
        tnr: fpr.map(|v| 1.0 - v),
        fnr: recall.map(|v| 1.0 - v),
    }
}

impl PointMetrics {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::Fpr => self.fpr,
            Metric::Tnr => self.tnr,
            Metric::Fnr => self.fnr,
            Metric::Auroc => None,
        }
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    match scores.iter().find(|s| s.is_nan()) {
        Some(s) => Err(Error::InvalidScore(*s)),
        None => Ok(()),
    }
}

/// Area under the ROC curve, `(wins + ties/2) / (|P|·|N|)`, in
/// `O((|P|+|N|) log(|P|+|N|))`.
pub fn auroc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() {
        return Err(Error::EmptyClass { class: "positive" });
    }
    if negatives.is_empty() {
        return Err(Error::EmptyClass { class: "negative" });
    }
    check_scores(positives)?;
    check_scores(negatives)?;
    let mut neg = negatives.to_vec();
    neg.sort_by(f64::total_cmp);
    let wins2: u128 = positives
        .iter()
        .map(|p| {
            let below = neg.partition_point(|n| n < p);
            let up_to = neg.partition_point(|n| n <= p);
            (2 * below + (up_to - below)) as u128
        })
        .sum();
    Ok(wins2 as f64 / (2 * positives.len() as u128 * negatives.len() as u128) as f64)
}

pub fn auroc_of(obs: &[Observation]) -> Result<f64> {
    let scores = |positive: bool| -> Vec<f64> {
        obs.iter().filter(|o| o.positive == positive).map(|o| o.score).collect()
    };
    let (pos, neg) = (scores(true), scores(false));
    auroc(&pos, &neg)
}

/// Nearest-rank (inverted CDF) quantile of sorted data: the smallest value
/// whose empirical CDF reaches `q`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Percentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub seed: u64,
    pub method: CiMethod,
    /// Resample positives and negatives separately, preserving prevalence.
    pub stratified: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 2000,
            seed: 0,
            method: CiMethod::Percentile,
            stratified: true,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_resamples == 0 {
            return Err(Error::InvalidConfig("n_resamples must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Observations sorted by score with tie groups, the shared input of every
/// weighted (resampled) evaluation.
struct Ranked {
    positive: Vec<bool>,
    above: Vec<bool>,
    /// Start index of each tie group, plus a final sentinel at `len`.
    groups: Vec<usize>,
    pos_idx: Vec<usize>,
    neg_idx: Vec<usize>,
}

impl Ranked {
    fn new(obs: &[Observation], threshold: f64) -> Result<Self> {
        let scores: Vec<f64> = obs.iter().map(|o| o.score).collect();
        check_scores(&scores)?;
        let mut sorted = obs.to_vec();
        sorted.sort_by(|a, b| a.score.total_cmp(&b.score));
        let mut groups = Vec::new();
        for (i, o) in sorted.iter().enumerate() {
            if i == 0 || o.score != sorted[i - 1].score {
                groups.push(i);
            }
        }
        groups.push(sorted.len());
        let (pos_idx, neg_idx) = (0..sorted.len()).partition(|i| sorted[*i].positive);
        Ok(Ranked {
            positive: sorted.iter().map(|o| o.positive).collect(),
            above: sorted.iter().map(|o| o.predicted_positive(threshold)).collect(),
            groups,
            pos_idx,
            neg_idx,
        })
    }

    fn len(&self) -> usize {
        self.positive.len()
    }

    /// Confusion counts and doubled Mann–Whitney wins under integer weights.
    fn weighted(&self, w: &[u32]) -> (ConfusionCounts, u128) {
        let mut c = ConfusionCounts::default();
        let mut wins2: u128 = 0;
        let mut neg_below: u128 = 0;
        for g in self.groups.windows(2) {
            let (mut gp, mut gn) = (0u64, 0u64);
            for i in g[0]..g[1] {
                let wi = w[i] as u64;
                if wi == 0 {
                    continue;
                }
                match (self.positive[i], self.above[i]) {
                    (true, true) => c.tp += wi,
                    (true, false) => c.fn_ += wi,
                    (false, true) => c.fp += wi,
                    (false, false) => c.tn += wi,
                }
                if self.positive[i] {
                    gp += wi;
                } else {
                    gn += wi;
                }
            }
            wins2 += gp as u128 * (2 * neg_below + gn as u128);
            neg_below += gn as u128;
        }
        (c, wins2)
    }

    fn metrics(&self, w: &[u32]) -> [Option<f64>; 6] {
        let (c, wins2) = self.weighted(w);
        let p = point_metrics(&c);
        let pairs = 2 * c.n_pos() as u128 * c.n_neg() as u128;
        let auc = (pairs > 0).then(|| wins2 as f64 / pairs as f64);
        [p.precision, p.recall, p.fpr, p.tnr, p.fnr, auc]
    }

    fn resample(&self, cfg: &BootstrapConfig, r: usize, w: &mut [u32]) {
        w.fill(0);
        let mut rng = rng::stream(cfg.seed, r as u64);
        if cfg.stratified {
            for idx in [&self.pos_idx, &self.neg_idx] {
                for _ in 0..idx.len() {
                    w[idx[rng.random_range(0..idx.len())]] += 1;
                }
            }
        } else {
            let n = self.len();
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1;
            }
        }
    }

    /// Every metric on every resample, in resample order.
    fn replicates(&self, cfg: &BootstrapConfig) -> Vec<[Option<f64>; 6]> {
        let n = self.len();
        (0..cfg.n_resamples)
            .into_par_iter()
            .map_init(
                || vec![0u32; n],
                |w, r| {
                    self.resample(cfg, r, w);
                    self.metrics(w)
                },
            )
            .collect()
    }
}

fn percentile_interval(
    metric: Metric,
    replicates: &[[Option<f64>; 6]],
) -> Result<Interval> {
    let slot = Metric::ALL.iter().position(|m| *m == metric).unwrap();
    let mut values: Vec<f64> = replicates.iter().filter_map(|r| r[slot]).collect();
    let undefined = replicates.len() - values.len();
    if undefined * 2 > replicates.len() || values.is_empty() {
        return Err(Error::DegenerateResamples {
            metric: metric.name(),
            undefined,
            total: replicates.len(),
        });
    }
    values.sort_by(f64::total_cmp);
    Ok(Interval {
        low: nearest_rank(&values, 0.025).unwrap(),
        high: nearest_rank(&values, 0.975).unwrap(),
    })
}

/// Percentile bootstrap interval for one metric, widened if needed so that
/// it contains the full-sample value.
pub fn bootstrap_ci(
    metric: Metric,
    obs: &[Observation],
    threshold: f64,
    cfg: &BootstrapConfig,
) -> Result<Interval> {
    cfg.validate()?;
    if obs.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let ranked = Ranked::new(obs, threshold)?;
    let ones = vec![1u32; ranked.len()];
    let point = ranked.metrics(&ones)[Metric::ALL.iter().position(|m| *m == metric).unwrap()];
    let point = point.ok_or(Error::DegenerateResamples {
        metric: metric.name(),
        undefined: 1,
        total: 1,
    })?;
    let ci = percentile_interval(metric, &ranked.replicates(cfg))?;
    Ok(widen(ci, point))
}

fn widen(ci: Interval, point: f64) -> Interval {
    Interval {
        low: ci.low.min(point),
        high: ci.high.max(point),
    }
}

/// Point metrics, AUROC and confidence intervals for one population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsBundle {
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fnr: Option<f64>,
    pub auroc: Option<f64>,
    /// 95% intervals; metrics without a defined interval are absent.
    pub ci: BTreeMap<Metric, Interval>,
    pub n_pos: u64,
    pub n_neg: u64,
    pub threshold: f64,
}

impl MetricsBundle {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::Fpr => self.fpr,
            Metric::Tnr => self.tnr,
            Metric::Fnr => self.fnr,
            Metric::Auroc => self.auroc,
        }
    }
}

/// Evaluates one population; intervals are computed only when `bootstrap`
/// is given.
pub fn evaluate(
    obs: &[Observation],
    threshold: f64,
    bootstrap: Option<&BootstrapConfig>,
) -> Result<MetricsBundle> {
    let counts = confusion_at_threshold(obs, threshold)?;
    let p = point_metrics(&counts);
    let auroc = if counts.n_pos() > 0 && counts.n_neg() > 0 {
        Some(auroc_of(obs)?)
    } else {
        None
    };
    let mut bundle = MetricsBundle {
        counts,
        precision: p.precision,
        recall: p.recall,
        fpr: p.fpr,
        tnr: p.tnr,
        fnr: p.fnr,
        auroc,
        ci: BTreeMap::new(),
        n_pos: counts.n_pos(),
        n_neg: counts.n_neg(),
        threshold,
    };
    if let Some(cfg) = bootstrap {
        cfg.validate()?;
        let replicates = Ranked::new(obs, threshold)?.replicates(cfg);
        for metric in Metric::ALL {
            let Some(point) = bundle.get(metric) else {
                continue;
            };
            if let Ok(ci) = percentile_interval(metric, &replicates) {
                bundle.ci.insert(metric, widen(ci, point));
            }
        }
    }
    Ok(bundle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermutationConfig {
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        PermutationConfig {
            n_permutations: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AucComparison {
    pub auc_a: f64,
    pub auc_b: f64,
    pub p_value: f64,
    pub n_permutations: usize,
}

/// Exclusive member of one group in a two-group comparison.
#[derive(Clone, Copy)]
struct Exclusive {
    score: f64,
    positive: bool,
    /// Doubled wins against the opposite class of the shared members.
    shared_wins2: u64,
}

/// Doubled AUROC numerators for both groups under one membership
/// assignment of the exclusive members.
struct PermutationState {
    exclusives: Vec<Exclusive>,
    groups: Vec<usize>,
    shared_wins2: u128,
    shared_pos: u64,
    shared_neg: u64,
}

impl PermutationState {
    fn aucs(&self, in_a: &[bool]) -> (f64, f64) {
        let mut wins = [self.shared_wins2; 2];
        let mut pos = [self.shared_pos; 2];
        let mut neg = [self.shared_neg; 2];
        let mut neg_below = [0u128; 2];
        for g in self.groups.windows(2) {
            let mut gp = [0u128; 2];
            let mut gn = [0u128; 2];
            for i in g[0]..g[1] {
                let x = &self.exclusives[i];
                let side = usize::from(!in_a[i]);
                wins[side] += x.shared_wins2 as u128;
                if x.positive {
                    gp[side] += 1;
                    pos[side] += 1;
                } else {
                    gn[side] += 1;
                    neg[side] += 1;
                }
            }
            for s in 0..2 {
                wins[s] += gp[s] * (2 * neg_below[s] + gn[s]);
                neg_below[s] += gn[s];
            }
        }
        let auc = |s: usize| wins[s] as f64 / (2 * pos[s] as u128 * neg[s] as u128) as f64;
        (auc(0), auc(1))
    }
}

fn doubled_wins_against(sorted: &[f64], x: f64, x_is_positive: bool) -> u64 {
    let below = sorted.partition_point(|v| *v < x);
    let up_to = sorted.partition_point(|v| *v <= x);
    let ties = (up_to - below) as u64;
    if x_is_positive {
        2 * below as u64 + ties
    } else {
        2 * (sorted.len() - up_to) as u64 + ties
    }
}

/// Two-sided permutation test for a difference in AUROC between two groups
/// of keyed observations.
///
/// Members present in both groups (same key) stay in both. The remaining
/// members are reassigned between groups at random, separately within each
/// class, so every permuted group keeps its class sizes.
pub fn compare_auc_keyed<K: std::hash::Hash + Eq>(
    group_a: &[(K, Observation)],
    group_b: &[(K, Observation)],
    cfg: &PermutationConfig,
) -> Result<AucComparison> {
    for group in [group_a, group_b] {
        if !group.iter().any(|(_, o)| o.positive) {
            return Err(Error::EmptyClass { class: "positive" });
        }
        if !group.iter().any(|(_, o)| !o.positive) {
            return Err(Error::EmptyClass { class: "negative" });
        }
    }
    let in_b: HashMap<&K, &Observation> = group_b.iter().map(|(k, o)| (k, o)).collect();
    let in_a: HashMap<&K, &Observation> = group_a.iter().map(|(k, o)| (k, o)).collect();

    let mut shared_pos = Vec::new();
    let mut shared_neg = Vec::new();
    let mut exclusive = Vec::new();
    for (k, o) in group_a {
        check_scores(&[o.score])?;
        if in_b.contains_key(k) {
            if o.positive {
                shared_pos.push(o.score);
            } else {
                shared_neg.push(o.score);
            }
        } else {
            exclusive.push((*o, true));
        }
    }
    for (k, o) in group_b {
        check_scores(&[o.score])?;
        if !in_a.contains_key(k) {
            exclusive.push((*o, false));
        }
    }
    shared_pos.sort_by(f64::total_cmp);
    shared_neg.sort_by(f64::total_cmp);
    exclusive.sort_by(|a, b| a.0.score.total_cmp(&b.0.score));

    let shared_wins2: u128 = shared_pos
        .iter()
        .map(|p| doubled_wins_against(&shared_neg, *p, true) as u128)
        .sum();
    let exclusives: Vec<Exclusive> = exclusive
        .iter()
        .map(|(o, _)| Exclusive {
            score: o.score,
            positive: o.positive,
            shared_wins2: if o.positive {
                doubled_wins_against(&shared_neg, o.score, true)
            } else {
                doubled_wins_against(&shared_pos, o.score, false)
            },
        })
        .collect();
    let mut groups = Vec::new();
    for (i, x) in exclusives.iter().enumerate() {
        if i == 0 || x.score != exclusives[i - 1].score {
            groups.push(i);
        }
    }
    groups.push(exclusives.len());
    let state = PermutationState {
        exclusives,
        groups,
        shared_wins2,
        shared_pos: shared_pos.len() as u64,
        shared_neg: shared_neg.len() as u64,
    };

    let membership: Vec<bool> = exclusive.iter().map(|(_, a)| *a).collect();
    let (auc_a, auc_b) = state.aucs(&membership);
    let observed = (auc_a - auc_b).abs();

    let pos_slots: Vec<usize> = (0..membership.len())
        .filter(|i| state.exclusives[*i].positive)
        .collect();
    let neg_slots: Vec<usize> = (0..membership.len())
        .filter(|i| !state.exclusives[*i].positive)
        .collect();
    let as_extreme: usize = (0..cfg.n_permutations)
        .into_par_iter()
        .map_init(
            || (membership.clone(), Vec::new()),
            |(perm, labels), r| {
                let mut rng = rng::stream(cfg.seed, r as u64);
                for slots in [&pos_slots, &neg_slots] {
                    labels.clear();
                    labels.extend(slots.iter().map(|i| membership[*i]));
                    labels.shuffle(&mut rng);
                    for (slot, label) in slots.iter().zip(labels.iter()) {
                        perm[*slot] = *label;
                    }
                }
                let (a, b) = state.aucs(perm);
                usize::from((a - b).abs() >= observed - 1e-12)
            },
        )
        .sum();

    Ok(AucComparison {
        auc_a,
        auc_b,
        p_value: (1 + as_extreme) as f64 / (1 + cfg.n_permutations) as f64,
        n_permutations: cfg.n_permutations,
    })
}

/// [`compare_auc_keyed`] over labeled exams, keyed by exam id.
pub fn compare_auc(
    group_a: &[&LabeledExam],
    group_b: &[&LabeledExam],
    cfg: &PermutationConfig,
) -> Result<AucComparison> {
    let keyed = |g: &[&LabeledExam]| -> Result<Vec<(String, Observation)>> {
        g.iter()
            .map(|e| {
                e.observation()
                    .map(|o| (e.exam_id.clone(), o))
                    .ok_or_else(|| Error::NotBinary {
                        exam_id: e.exam_id.clone(),
                    })
            })
            .collect()
    };
    compare_auc_keyed(&keyed(group_a)?, &keyed(group_b)?, cfg)
}
