//! Acceptance gate. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.
//!
//! `cargo test -p screeval-cli --test acceptance -- 3 6` runs a subset.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

use screeval_cli::core::ingest::{write_cohort, RawCohort};
use screeval_cli::core::labeler::{decide, label_cohort, Assessment, Branch, DiagnosticEvidence, ScreenEvidence};
use screeval_cli::core::linkage::{FinalPathology, TemporalWindows};
use screeval_cli::core::metrics::{
    auroc, compare_auc_keyed, confusion_at_threshold, evaluate, BootstrapConfig, Metric, Observation, PermutationConfig,
    DEFAULT_THRESHOLD,
};
use screeval_cli::core::report::{distribution_summaries, round_half_even, Grouping};
use screeval_cli::core::stratify::{evaluate_axes, Axis, Selector};
use screeval_cli::core::synth::{generate_cohort, paper_replica, random_blueprint, CohortBlueprint};
use screeval_cli::core::*;
use screeval_cli::{cmd_evaluate, RunConfig};

type Verdict = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn r2(x: f64) -> f64 {
    round_half_even(x, 2)
}

// ------------------------------------------------------------------ 1, 2

fn replica() -> &'static LabeledCohort {
    static C: std::sync::OnceLock<LabeledCohort> = std::sync::OnceLock::new();
    C.get_or_init(|| paper_replica(2024))
}

fn paper_counts() -> Verdict {
    let obs = replica().observations();
    let t = Instant::now();
    let b = evaluate(&obs, DEFAULT_THRESHOLD, None).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    let c = b.counts;
    ensure!((c.tp, c.fn_) == (1002, 366), "tp/fn {}/{}", c.tp, c.fn_);
    ensure!(c.fp == 9297 + 1477 + 738 && c.n_neg() == 161_976, "fp {} n_neg {}", c.fp, c.n_neg());
    let got = [b.precision, b.recall, b.fpr, b.tnr, b.fnr].map(|x| r2(x.unwrap()));
    ensure!(got == [0.08, 0.73, 0.07, 0.93, 0.27], "metrics {got:?}");
    ensure!(elapsed < Duration::from_secs(1), "metrics took {elapsed:?}");
    Ok(format!(
        "precision/recall/fpr/tnr/fnr = {got:?}, auroc {:.3}, metrics in {:.0} ms",
        b.auroc.unwrap(),
        elapsed.as_secs_f64() * 1e3
    ))
}

fn outcome_fractions() -> Verdict {
    let s = distribution_summaries(replica(), Grouping::OutcomeLabel, DEFAULT_THRESHOLD, 50);
    let by: BTreeMap<&str, _> = s.iter().map(|d| (d.group.as_str(), d)).collect();
    // (group, n, n_above, reported fraction, reported side)
    let expect = [
        ("SCREEN_NEGATIVE", 142_638, 9_297, 0.93, false),
        ("DIAGNOSTIC_NEGATIVE", 15_407, 1_477, 0.90, false),
        ("BIOPSY_PROVEN_BENIGN", 3_931, 738, 0.81, false),
        ("SCREEN_DETECTED_CANCER", 1_368, 1_002, 0.73, true),
        ("INTERVAL_CANCER", 105, 33, 0.31, true),
    ];
    let mut shown = Vec::new();
    for (g, n, above, frac, positive_side) in expect {
        let d = by.get(g).ok_or(format!("no {g} row"))?;
        ensure!((d.n, d.n_above) == (n, above), "{g}: {}/{} vs {above}/{n}", d.n_above, d.n);
        ensure!(d.fraction_above_threshold == above as f64 / n as f64, "{g}: fraction not the count ratio");
        let side = if positive_side { d.fraction_above_threshold } else { 1.0 - d.fraction_above_threshold };
        ensure!(r2(side) == frac, "{g}: {side}");
        shown.push(format!("{}%", (frac * 100.0).round()));
    }
    Ok(format!("SN/DN/BPB below, SDC/IC above: {}", shown.join("/")))
}

// ------------------------------------------------------------------ 3

fn auroc_oracle() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0f64;
    let mut tie_heavy = 0;
    for i in 0..1000 {
        let np = rng.random_range(1..=200);
        let nn = rng.random_range(1..=200);
        let levels = if i % 2 == 0 { Some(rng.random_range(1..=6)) } else { None };
        tie_heavy += levels.is_some() as usize;
        let draw = |rng: &mut ChaCha8Rng| match levels {
            Some(k) => rng.random_range(0..k) as f64 / k as f64,
            None => rng.random::<f64>(),
        };
        let pos: Vec<f64> = (0..np).map(|_| draw(&mut rng)).collect();
        let neg: Vec<f64> = (0..nn).map(|_| draw(&mut rng)).collect();
        let mut wins2 = 0u64;
        for p in &pos {
            for n in &neg {
                wins2 += if p > n { 2 } else if p == n { 1 } else { 0 };
            }
        }
        let oracle = wins2 as f64 / (2 * np * nn) as f64;
        let fast = auroc(&pos, &neg).map_err(|e| e.to_string())?;
        let obs: Vec<Observation> = pos
            .iter()
            .map(|s| Observation::new(*s, true))
            .chain(neg.iter().map(|s| Observation::new(*s, false)))
            .collect();
        let bundled = evaluate(&obs, 0.5, None).map_err(|e| e.to_string())?.auroc.unwrap();
        worst = worst.max((fast - oracle).abs()).max((bundled - oracle).abs());
        ensure!(worst <= 1e-12, "instance {i}: {fast} / {bundled} vs {oracle}");
    }
    let elapsed = t.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("1000 instances ({tie_heavy} tie-heavy), max |diff| {worst:e}"))
}

// ------------------------------------------------------------------ 4

fn evidence(assessment: Assessment) -> ScreenEvidence {
    ScreenEvidence {
        assessment,
        screen_flagged: false,
        recall_diagnostics: Vec::new(),
        recall_pathology: FinalPathology::none(),
        interval_pathology: FinalPathology::none(),
        any_followup_within_window: true,
    }
}

fn with_diags(mut e: ScreenEvidence, diags: &[(Option<Birads>, bool)], severity: Severity) -> ScreenEvidence {
    e.recall_diagnostics = diags
        .iter()
        .enumerate()
        .map(|(i, (b, invalid))| DiagnosticEvidence {
            exam_id: format!("D{i}"),
            max_birads: *b,
            invalid: *invalid,
        })
        .collect();
    e.recall_pathology.severity = severity;
    e
}

fn day(n: u64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 1, 1).unwrap() + Days::new(n)
}

fn push_exam(raw: &mut RawCohort, id: &str, d: u64, ty: ExamType, birads: &[Birads], score: Option<f64>) {
    raw.exams.push(ExamRecord {
        exam_id: id.into(),
        patient_id: "P1".into(),
        exam_date: day(d),
        exam_type: ty,
        density: Density::C,
        race: Race::White,
        ethnicity: Ethnicity::NotHispanicOrLatino,
        age_at_exam: 60,
    });
    for (i, b) in birads.iter().enumerate() {
        raw.findings.push(FindingRecord::plain(format!("{id}-F{i}"), id, Laterality::Right, *b));
    }
    if let Some(s) = score {
        raw.scores.push(ImageScore {
            exam_id: id.into(),
            image_id: format!("{id}-I"),
            malignancy_score: s,
        });
    }
}

fn branch_coverage() -> Verdict {
    use Assessment::{Abnormal, Invalid, Normal};
    use Birads::*;
    use Branch as B;
    use ExclusionReason as R;
    use OutcomeLabel as L;
    use Severity as S;

    let flagged = ScreenEvidence { screen_flagged: true, ..evidence(Normal) };
    let mut nbc_interval = evidence(Normal);
    nbc_interval.interval_pathology = FinalPathology { severity: S::NonBreastCancer, non_breast_cancer: true, ..FinalPathology::none() };
    let mut interval = evidence(Normal);
    interval.interval_pathology.severity = S::InvasiveCancer;
    let mut benign_interval = evidence(Normal);
    benign_interval.interval_pathology.severity = S::Benign;
    let no_followup = ScreenEvidence { any_followup_within_window: false, ..evidence(Normal) };
    let mut nbc_recall = with_diags(evidence(Abnormal), &[(Some(B4), false)], S::NonBreastCancer);
    nbc_recall.recall_pathology.non_breast_cancer = true;

    let table: Vec<(&str, ScreenEvidence, Branch)> = vec![
        ("flagged screen", flagged, B::InvalidAssessment),
        ("B3-B5 screen", evidence(Invalid), B::InvalidAssessment),
        ("normal, non-breast cancer", nbc_interval, B::NormalNonBreastCancer),
        ("normal, cancer within window", interval, B::IntervalCancer),
        ("normal, follow-up", evidence(Normal), B::ScreenNegative),
        ("normal, benign interval lesion", benign_interval, B::ScreenNegative),
        ("normal, no follow-up", no_followup, B::NoFollowup),
        ("B0, no diagnostic", evidence(Abnormal), B::AbnormalNoDiagnostic),
        ("B0, invalid diagnostic", with_diags(evidence(Abnormal), &[(Some(B4), true)], S::NoPathology), B::InconsistentWorkup),
        ("B0, B3 workup with biopsy", with_diags(evidence(Abnormal), &[(Some(B3), false)], S::Benign), B::InconsistentWorkup),
        ("B0, workup without findings", with_diags(evidence(Abnormal), &[(None, false)], S::NoPathology), B::InconsistentWorkup),
        ("B0, non-breast cancer", nbc_recall, B::AbnormalNonBreastCancer),
        ("B0, B1-B3 workup", with_diags(evidence(Abnormal), &[(Some(B2), false), (Some(B3), false)], S::NoPathology), B::DiagnosticNegative),
        ("B0, B4 without biopsy", with_diags(evidence(Abnormal), &[(Some(B4), false)], S::NoPathology), B::Birads45NoBiopsy),
        ("B0, B4 benign", with_diags(evidence(Abnormal), &[(Some(B4), false)], S::Benign), B::BiopsyProvenBenign),
        ("B0, B4 borderline", with_diags(evidence(Abnormal), &[(Some(B4), false)], S::Borderline), B::BiopsyProvenBenign),
        ("B0, B5 high-risk", with_diags(evidence(Abnormal), &[(Some(B5), false)], S::HighRisk), B::BiopsyProvenBenign),
        ("B0, B5 invasive", with_diags(evidence(Abnormal), &[(Some(B5), false)], S::InvasiveCancer), B::ScreenDetectedCancer),
        ("B0, B1 then B4 DCIS", with_diags(evidence(Abnormal), &[(Some(B1), false), (Some(B4), false)], S::NonInvasiveCancer), B::ScreenDetectedCancer),
    ];
    let expected_outcome = |b: Branch| -> (L, Option<R>) {
        match b {
            B::InvalidAssessment | B::InconsistentWorkup => (L::Excluded, Some(R::InvalidBirads)),
            B::NormalNonBreastCancer | B::AbnormalNonBreastCancer => (L::Excluded, Some(R::NonBreastCancer)),
            B::IntervalCancer => (L::IntervalCancer, None),
            B::ScreenNegative => (L::ScreenNegative, None),
            B::NoFollowup => (L::Excluded, Some(R::NoFollowup)),
            B::AbnormalNoDiagnostic => (L::Excluded, Some(R::AbnormalNoDiagnostic)),
            B::DiagnosticNegative => (L::DiagnosticNegative, None),
            B::Birads45NoBiopsy => (L::Excluded, Some(R::Birads45NoBiopsy)),
            B::BiopsyProvenBenign => (L::BiopsyProvenBenign, None),
            B::ScreenDetectedCancer => (L::ScreenDetectedCancer, None),
        }
    };
    let mut hit = std::collections::BTreeSet::new();
    let mut reasons = std::collections::BTreeSet::new();
    let mut labels = std::collections::BTreeSet::new();
    for (name, e, want) in &table {
        let got = decide(e);
        ensure!(got == *want, "{name}: {got:?}, expected {want:?}");
        ensure!(got.outcome() == expected_outcome(got), "{name}: outcome {:?}", got.outcome());
        hit.insert(got);
        let (l, r) = got.outcome();
        labels.insert(l);
        reasons.extend(r);
    }
    ensure!(hit.len() == Branch::ALL.len(), "branches hit {}/{}", hit.len(), Branch::ALL.len());

    // The same flowchart through the full pipeline, plus the score-driven
    // exclusion that only assign_label applies.
    let mut raw = RawCohort::default();
    let t = |k: u64| k * 1000;
    push_exam(&mut raw, "S1", t(0), ExamType::Screening, &[B1], Some(0.02));
    push_exam(&mut raw, "S1n", t(0) + 300, ExamType::Screening, &[B1], Some(0.02));
    push_exam(&mut raw, "S2", t(1), ExamType::Screening, &[B0], Some(0.4));
    push_exam(&mut raw, "D2", t(1) + 14, ExamType::Diagnostic, &[B5], None);
    raw.pathology.push(PathologyResult {
        finding_id: "D2-F0".into(),
        procedure: Procedure::Biopsy,
        severity: S::InvasiveCancer,
        subtype: None,
        result_date: day(t(1) + 20),
    });
    push_exam(&mut raw, "S3", t(2), ExamType::Screening, &[B0], Some(0.3));
    push_exam(&mut raw, "D3", t(2) + 14, ExamType::Diagnostic, &[B2], None);
    push_exam(&mut raw, "S4", t(3), ExamType::Screening, &[B2], None);
    push_exam(&mut raw, "S4n", t(3) + 200, ExamType::Screening, &[B1], Some(0.1));
    let cohort = label_cohort(&raw, &TemporalWindows::default()).map_err(|e| e.to_string())?;
    let got: BTreeMap<&str, (L, Option<R>)> =
        cohort.exams.iter().map(|e| (e.exam_id.as_str(), (e.label, e.exclusion_reason))).collect();
    let want = [
        ("S1", (L::ScreenNegative, None)),
        ("S2", (L::ScreenDetectedCancer, None)),
        ("S3", (L::DiagnosticNegative, None)),
        ("S4", (L::ScreenNegative, Some(R::MissingScores))),
    ];
    for (id, w) in want {
        ensure!(got.get(id) == Some(&w), "pipeline {id}: {:?}", got.get(id));
    }
    reasons.insert(R::MissingScores);
    ensure!(reasons.len() == ExclusionReason::ALL.len(), "exclusion reasons {}", reasons.len());
    ensure!(labels.len() == OutcomeLabel::ALL.len(), "labels {}", labels.len());
    Ok(format!(
        "{} cases: {}/{} branches, {} labels, {} exclusion reasons",
        table.len() + want.len(),
        hit.len(),
        Branch::ALL.len(),
        labels.len(),
        reasons.len()
    ))
}

// ------------------------------------------------------------------ 5

fn oracle_closure() -> Verdict {
    let t = Instant::now();
    let (mut total, mut largest) = (0, 0);
    for seed in 0..100 {
        let bp = random_blueprint(5000 + seed, 2500);
        let (raw, ledger) = generate_cohort(&bp).map_err(|e| format!("blueprint {seed}: {e}"))?;
        let cohort = label_cohort(&raw, &bp.windows).map_err(|e| e.to_string())?;
        let bad = ledger.mismatches(&cohort);
        ensure!(bad.is_empty(), "blueprint {seed}: {} mismatches, first {:?}", bad.len(), bad[0]);
        total += raw.exams.len();
        largest = largest.max(raw.exams.len());
    }
    let elapsed = t.elapsed();
    ensure!(largest <= 20_000, "a blueprint produced {largest} exams");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("100 blueprints, {total} exams (largest {largest}), {:.1} s", elapsed.as_secs_f64()))
}

// ------------------------------------------------------------------ 6

/// Binormal scores squashed into [0,1]; the AUROC is Φ(μ/√2).
fn binormal(rng: &mut ChaCha8Rng, auc: f64, n_pos: usize, n_neg: usize) -> Vec<Observation> {
    let std = StatNormal::standard();
    let mu = std::f64::consts::SQRT_2 * std.inverse_cdf(auc);
    let pos = Normal::new(mu, 1.0).unwrap();
    let neg = Normal::new(0.0, 1.0).unwrap();
    let mut obs = Vec::with_capacity(n_pos + n_neg);
    obs.extend((0..n_pos).map(|_| Observation::new(std.cdf(pos.sample(rng)), true)));
    obs.extend((0..n_neg).map(|_| Observation::new(std.cdf(neg.sample(rng)), false)));
    obs
}

fn bootstrap_coverage() -> Verdict {
    let t = Instant::now();
    let trials = 200;
    let mut covered = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + trial);
        let obs = binormal(&mut rng, 0.9, 500, 5000);
        let cfg = BootstrapConfig { seed: trial, ..Default::default() };
        let b = evaluate(&obs, DEFAULT_THRESHOLD, Some(&cfg)).map_err(|e| e.to_string())?;
        covered += b.ci[&Metric::Auroc].contains(0.9) as usize;
    }
    let rate = covered as f64 / trials as f64;
    let elapsed = t.elapsed();
    ensure!((0.90..=0.99).contains(&rate), "coverage {rate}");
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!("{covered}/{trials} intervals cover 0.9 ({:.1} s)", elapsed.as_secs_f64()))
}

// ------------------------------------------------------------------ 7

fn subgroup_consistency() -> Verdict {
    let demographic = [Axis::Race, Axis::Ethnicity, Axis::Age, Axis::Density];
    for seed in 0..5 {
        let mut bp = CohortBlueprint {
            n_patients: 4000,
            seed,
            missing_score_rate: 0.02,
            ..Default::default()
        };
        // Enough cancers of both types for every check to bite.
        *bp.label_weights.get_mut(&OutcomeLabel::ScreenDetectedCancer).unwrap() *= 5.0;
        let (raw, _) = generate_cohort(&bp).map_err(|e| e.to_string())?;
        let cohort = label_cohort(&raw, &bp.windows).map_err(|e| e.to_string())?;
        let mut axes = demographic.to_vec();
        axes.push(Axis::CancerType);
        let threshold = [0.1, 0.05, 0.3, 0.0, 0.7][seed as usize];
        let rows = evaluate_axes(&cohort, &axes, None, threshold).map_err(|e| e.to_string())?;
        let overall = rows.iter().find(|r| r.spec.axis == Axis::Overall).unwrap().bundle.counts;
        for axis in demographic {
            let mut sum = [0u64; 4];
            if axis == Axis::Density {
                // UNKNOWN density is in the overall row but in no density subgroup.
                let unknown: Vec<Observation> = cohort
                    .evaluable()
                    .filter(|e| e.density == Density::Unknown)
                    .filter_map(|e| e.observation())
                    .collect();
                if !unknown.is_empty() {
                    let c = confusion_at_threshold(&unknown, threshold).map_err(|e| e.to_string())?;
                    sum = [c.tp, c.fp, c.tn, c.fn_];
                }
            }
            for r in rows.iter().filter(|r| r.spec.axis == axis) {
                let c = r.bundle.counts;
                for (s, v) in sum.iter_mut().zip([c.tp, c.fp, c.tn, c.fn_]) {
                    *s += v;
                }
            }
            ensure!(
                sum == [overall.tp, overall.fp, overall.tn, overall.fn_],
                "seed {seed} {axis}: {sum:?} vs {overall:?}"
            );
        }
        let by_type = |ct| {
            rows.iter()
                .find(|r| r.spec.selector == Selector::CancerType(ct))
                .map(|r| r.bundle.counts)
                .ok_or(format!("seed {seed}: no {ct} row"))
        };
        let (inv, non) = (by_type(CancerType::Invasive)?, by_type(CancerType::NonInvasive)?);
        // tp/N == (n_i·tp_i/n_i + n_j·tp_j/n_j) / N, cleared of denominators
        // (N·n_i·n_j).
        ensure!(inv.n_pos() + non.n_pos() == overall.n_pos(), "seed {seed}: positives do not split");
        let (ni, nj) = (inv.n_pos() as u128, non.n_pos() as u128);
        let lhs = overall.tp as u128 * ni * nj;
        let rhs = ni * inv.tp as u128 * nj + nj * non.tp as u128 * ni;
        ensure!(
            lhs == rhs,
            "seed {seed}: recall {}/{} vs invasive {}/{ni}, non-invasive {}/{nj}",
            overall.tp,
            overall.n_pos(),
            inv.tp,
            non.tp
        );
    }
    Ok("5 cohorts × 4 demographic axes (density plus UNKNOWN) sum to overall; recall splits by cancer type exactly".into())
}

// ------------------------------------------------------------------ 8

fn significance_sanity() -> Verdict {
    let t = Instant::now();
    let seeds = 50;
    let mut significant = 0;
    let mut worst_p = 0f64;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        // Shared negatives, then two positive sets at different separations.
        let negatives = binormal(&mut rng, 0.5, 0, 16_198);
        let std = StatNormal::standard();
        let positives = |rng: &mut ChaCha8Rng, auc: f64, n: usize| -> Vec<Observation> {
            let d = Normal::new(std::f64::consts::SQRT_2 * std.inverse_cdf(auc), 1.0).unwrap();
            (0..n).map(|_| Observation::new(std.cdf(d.sample(rng)), true)).collect()
        };
        let keyed = |prefix: &str, pos: Vec<Observation>| -> Vec<(String, Observation)> {
            pos.into_iter()
                .enumerate()
                .map(|(i, o)| (format!("{prefix}{i}"), o))
                .chain(negatives.iter().enumerate().map(|(i, o)| (format!("n{i}"), *o)))
                .collect()
        };
        let a = keyed("a", positives(&mut rng, 0.94, 914));
        let b = keyed("b", positives(&mut rng, 0.85, 454));
        let cfg = PermutationConfig { n_permutations: 2000, seed };
        let cmp = compare_auc_keyed(&a, &b, &cfg).map_err(|e| e.to_string())?;
        significant += (cmp.p_value < 0.05) as usize;
        worst_p = worst_p.max(cmp.p_value);
    }
    let rate = significant as f64 / seeds as f64;
    ensure!(rate >= 0.9, "significant in {significant}/{seeds}");
    Ok(format!(
        "p < 0.05 in {significant}/{seeds} seeds (largest p {worst_p:.4}, {:.1} s)",
        t.elapsed().as_secs_f64()
    ))
}

// ------------------------------------------------------------------ 9

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = tmp.path().join("in");
    let bp = CohortBlueprint { n_patients: 3000, seed: 9, missing_score_rate: 0.01, ..Default::default() };
    let (raw, _) = generate_cohort(&bp).map_err(|e| e.to_string())?;
    write_cohort(&raw, &input).map_err(|e| e.to_string())?;

    let mut trees = Vec::new();
    let n = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    for (run, threads) in [(0, 1), (1, 1), (2, n), (3, n)] {
        let mut cfg = RunConfig {
            input_dir: Some(input.clone()),
            out_dir: tmp.path().join(format!("out{run}")),
            seed: 17,
            threads: Some(threads),
            ..Default::default()
        };
        cfg.bootstrap.n_resamples = 200;
        cfg.permutation.n_permutations = 500;
        cmd_evaluate(&cfg).map_err(|e| e.to_string())?;
        trees.push(read_tree(&cfg.out_dir));
    }
    ensure!(trees[0] == trees[1], "two single-thread runs differ");
    ensure!(trees[2] == trees[3], "two {n}-thread runs differ");
    ensure!(trees[0] == trees[2], "1-thread and {n}-thread runs differ");
    let bytes: usize = trees[0].values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical across 2×1 and 2×{n} threads", trees[0].len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 9] = [
        (1, "paper-count reproduction", paper_counts),
        (2, "outcome-fraction reproduction", outcome_fractions),
        (3, "AUROC oracle equivalence", auroc_oracle),
        (4, "label-assignment branch coverage", branch_coverage),
        (5, "oracle closure end-to-end", oracle_closure),
        (6, "bootstrap coverage", bootstrap_coverage),
        (7, "subgroup consistency", subgroup_consistency),
        (8, "significance sanity", significance_sanity),
        (9, "determinism", determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let verdict = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
