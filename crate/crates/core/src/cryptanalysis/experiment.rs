use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{attack_with, equivalent_keys, AttackError, CandidateKey, Transcript};
use crate::par::Execution;
use crate::scheme::{compute_response_original, random_credential, random_nonce, random_salt};

pub const EXPERIMENT_CSV_HEADER: &str = "Z,n,transcripts,trials,unique_rate,mean_candidates,work";

/// Aggregate outcome of one `(Z, n, transcripts)` configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub modulus: u32,
    pub n: usize,
    pub transcripts: usize,
    pub trials: usize,
    /// Fraction of trials whose candidate set was exactly `{true key}`.
    pub unique_rate: f64,
    /// Fraction of trials whose candidate set was exactly the true key's
    /// equivalence class ([`equivalent_keys`]).
    pub class_rate: f64,
    /// Fraction of trials in which the true key survived.
    pub true_key_rate: f64,
    pub mean_candidates: f64,
    /// Mean `(a, c)` pairs examined per trial.
    pub mean_work: f64,
    pub mean_class_size: f64,
}

impl ExperimentResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.2},{:.1}",
            self.modulus, self.n, self.transcripts, self.trials, self.unique_rate, self.mean_candidates, self.mean_work
        )
    }
}

struct TrialOutcome {
    unique: bool,
    class_exact: bool,
    true_key_kept: bool,
    candidates: usize,
    class_size: usize,
    work: u64,
}

fn run_trial(seed: u64, modulus: u32, n: usize, count: usize, exec: Execution) -> Result<TrialOutcome, AttackError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bad = |e: crate::scheme::SchemeError| AttackError::Parameters(e.to_string());
    let key = random_credential(n, modulus, &mut rng).map_err(bad)?;
    let transcripts = (0..count)
        .map(|_| {
            let salt = random_salt(n, modulus, &mut rng)?;
            let c = random_nonce(modulus, &mut rng)?;
            let response = compute_response_original(&key, &salt, c)?;
            Ok(Transcript::new(salt, response))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(bad)?;
    let report = attack_with(&transcripts, modulus, exec)?;
    let truth = CandidateKey::from_credential(&key);
    let class = equivalent_keys(&truth, modulus);
    Ok(TrialOutcome {
        unique: report.candidates.len() == 1 && report.candidates[0] == truth,
        class_exact: report.candidates == class,
        true_key_kept: report.candidates.binary_search(&truth).is_ok(),
        candidates: report.candidates.len(),
        class_size: class.len(),
        work: report.work,
    })
}

/// Draws `trials` random keys, observes `transcripts_per_trial` honest logins
/// for each, runs the attack, and aggregates how well it did.
///
/// Per-trial seeds are drawn from `rng` up front, so results do not depend on
/// the execution strategy.
pub fn attack_success_experiment<R: Rng + ?Sized>(
    modulus: u32,
    n: usize,
    trials: usize,
    transcripts_per_trial: usize,
    rng: &mut R,
) -> Result<ExperimentResult, AttackError> {
    attack_success_experiment_with(modulus, n, trials, transcripts_per_trial, rng, Execution::default())
}

pub fn attack_success_experiment_with<R: Rng + ?Sized>(
    modulus: u32,
    n: usize,
    trials: usize,
    transcripts_per_trial: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<ExperimentResult, AttackError> {
    if transcripts_per_trial == 0 {
        return Err(AttackError::Parameters("at least one transcript per trial".into()));
    }
    if trials == 0 {
        return Err(AttackError::Parameters("at least one trial".into()));
    }
    if modulus < 2 {
        return Err(AttackError::BadModulus(modulus));
    }
    if n < 2 {
        return Err(AttackError::TooShort(n));
    }
    let seeds: Vec<u64> = (0..trials).map(|_| rng.gen()).collect();
    // Trials fan out; the attack inside each trial stays sequential.
    let outcomes = exec
        .map(&seeds, |&seed| run_trial(seed, modulus, n, transcripts_per_trial, Execution::Sequential))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let t = trials as f64;
    let rate = |f: fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / t;
    let mean = |f: fn(&TrialOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / t;
    Ok(ExperimentResult {
        modulus,
        n,
        transcripts: transcripts_per_trial,
        trials,
        unique_rate: rate(|o| o.unique),
        class_rate: rate(|o| o.class_exact),
        true_key_rate: rate(|o| o.true_key_kept),
        mean_candidates: mean(|o| o.candidates as f64),
        mean_work: mean(|o| o.work as f64),
        mean_class_size: mean(|o| o.class_size as f64),
    })
}
