//! Shared fixtures for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use screeval_core::ingest::RawCohort;
use screeval_core::metrics::Observation;
use screeval_core::synth::{generate_cohort, CohortBlueprint};
use screeval_core::linkage::TemporalWindows;

/// `n` observations at roughly the replica prevalence (0.8% positive);
/// positives score higher on average.
pub fn observations(n: usize, seed: u64) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let positive = rng.random_bool(0.008);
            let s: f64 = rng.random();
            Observation::new(if positive { s.sqrt() } else { s * s }, positive)
        })
        .collect()
}

/// Default-blueprint cohort with `n_patients` patients.
pub fn raw_cohort(n_patients: usize, seed: u64) -> (RawCohort, TemporalWindows) {
    let bp = CohortBlueprint {
        n_patients,
        seed,
        ..Default::default()
    };
    let (raw, _) = generate_cohort(&bp).expect("default blueprint is feasible");
    (raw, bp.windows)
}
