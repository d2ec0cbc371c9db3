//! Key recovery from observed logins of the original scheme.
//!
//! An eavesdropper sees `(Y, K)` per login but not `c`. Once a multiplier `a`
//! and nonce `c` are guessed, every `k(i-1)` on the right-hand side is known,
//! and the recurrence becomes linear in the secret digits:
//!
//! ```text
//! a*x1 + x2             = k1 - y1 - c                   (mod Z)
//! xi   + x(succ(i))     = ki - a*k(i-1) - yi - c        (mod Z), 2 <= i <= n
//! ```
//!
//! Forward substitution writes each `xj = alpha_j + beta_j * x1`, with
//! `beta_1 = 1` and `beta_j = (-1)^(j+1) * a` for `j >= 2`. The closing equation
//! (`xn + x1`) leaves one congruence `(1 + beta_n) * x1 = rhs`, solved with the
//! usual gcd rule. Enumerating all `(a, c)` for the first transcript yields
//! every consistent key; each further transcript only has to be re-checked.
//!
//! Keys are never identified exactly: for a fixed `a`, shifting `c` by `d`
//! and compensating the digits (see [`equivalent_keys`]) reproduces every
//! transcript, past or future. The attack converges to that class, which is
//! as good as the real key for impersonation.

mod experiment;
mod oracle;

use std::fmt;

use thiserror::Error;

pub use experiment::{attack_success_experiment, attack_success_experiment_with, ExperimentResult, EXPERIMENT_CSV_HEADER};
pub use oracle::{oracle_enumerate, oracle_enumerate_salt_unknown, ORACLE_SPACE_LIMIT};

use crate::digits::{format_digits, parse_digits};
use crate::modular::{self, reduce};
use crate::par::Execution;
use crate::scheme::{evaluate, Response, Salt, SecretCredential};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttackError {
    #[error("at least one transcript is required")]
    NoTranscripts,
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u32),
    #[error("transcript length {0} is below the minimum of 2")]
    TooShort(usize),
    #[error("transcript {index} has length {got}, expected {expected}")]
    MixedLengths { index: usize, expected: usize, got: usize },
    #[error("transcript {index} contains digit {value} outside [0, {modulus})")]
    DigitOutOfRange { index: usize, value: u32, modulus: u32 },
    #[error("multiplier {multiplier} is not a unit mod {modulus}")]
    NotUnit { multiplier: u32, modulus: u32 },
    #[error("nonce {c} is outside [0, {modulus})")]
    NonceOutOfRange { c: u32, modulus: u32 },
    #[error("search space {space} exceeds the enumeration bound {bound}")]
    SpaceTooLarge { space: u128, bound: u128 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("experiment parameters: {0}")]
    Parameters(String),
}

/// One eavesdropped login: the salt and the virtual password it produced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transcript {
    pub salt: Salt,
    pub response: Response,
}

impl Transcript {
    pub fn new(salt: Salt, response: Response) -> Self {
        Transcript { salt, response }
    }

    pub fn len(&self) -> usize {
        self.salt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.salt.is_empty()
    }

    /// Parses `y1,..,yn;k1,..,kn`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let (y, k) = text.split_once(';').ok_or("expected `Y-digits;K-digits`")?;
        let y = parse_digits(y.trim()).map_err(|e| format!("salt: {e}"))?;
        let k = parse_digits(k.trim()).map_err(|e| format!("response: {e}"))?;
        if y.len() != k.len() {
            return Err(format!("salt has {} digits but response has {}", y.len(), k.len()));
        }
        Ok(Transcript::new(Salt(y), Response(k)))
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{}", self.salt, self.response)
    }
}

/// Parses a transcript file: one `Y;K` per line, blank lines and `#` comments skipped.
pub fn parse_transcript_file(text: &str) -> Result<Vec<Transcript>, AttackError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(Transcript::parse(line).map_err(|message| AttackError::Parse { line: i + 1, message })?);
    }
    if out.is_empty() {
        return Err(AttackError::NoTranscripts);
    }
    Ok(out)
}

/// A key consistent with the observations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateKey {
    pub digits: Vec<u32>,
    pub multiplier: u32,
}

impl CandidateKey {
    pub fn from_credential(cred: &SecretCredential) -> Self {
        CandidateKey { digits: cred.digits().to_vec(), multiplier: cred.multiplier() }
    }

    pub fn to_credential(&self, modulus: u32) -> Option<SecretCredential> {
        SecretCredential::new(self.digits.clone(), self.multiplier, modulus).ok()
    }
}

impl fmt::Display for CandidateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X={} a={}", format_digits(&self.digits), self.multiplier)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackReport {
    /// Surviving keys, sorted.
    pub candidates: Vec<CandidateKey>,
    /// Candidate count after each transcript has been applied.
    pub per_transcript_counts: Vec<usize>,
    /// `(a, c)` pairs examined: all of them for the first transcript, then one
    /// derived pair per surviving candidate for each later transcript.
    pub work: u64,
}

fn validate(transcripts: &[Transcript], modulus: u32) -> Result<usize, AttackError> {
    if modulus < 2 {
        return Err(AttackError::BadModulus(modulus));
    }
    let first = transcripts.first().ok_or(AttackError::NoTranscripts)?;
    let n = first.len();
    if n < 2 {
        return Err(AttackError::TooShort(n));
    }
    for (index, t) in transcripts.iter().enumerate() {
        for len in [t.salt.len(), t.response.len()] {
            if len != n {
                return Err(AttackError::MixedLengths { index, expected: n, got: len });
            }
        }
        if let Some(&value) = t.salt.digits().iter().chain(t.response.digits()).find(|&&d| d >= modulus) {
            return Err(AttackError::DigitOutOfRange { index, value, modulus });
        }
    }
    Ok(n)
}

/// Every digit string `X` for which `(X, a)` maps `t.salt` to `t.response`
/// under nonce `c`, in ascending order.
///
/// The result has either 0 or `g` elements, where `g = gcd(1 - (-1)^n * a, Z)`
/// (and `g = Z` when that coefficient vanishes).
pub fn solve_single(t: &Transcript, multiplier: u32, c: u32, modulus: u32) -> Result<Vec<Vec<u32>>, AttackError> {
    validate(std::slice::from_ref(t), modulus)?;
    if !modular::is_unit(multiplier as u64, modulus as u64) {
        return Err(AttackError::NotUnit { multiplier, modulus });
    }
    if c >= modulus {
        return Err(AttackError::NonceOutOfRange { c, modulus });
    }
    Ok(solve_unchecked(t.salt.digits(), t.response.digits(), multiplier, c, modulus))
}

fn solve_unchecked(y: &[u32], k: &[u32], a: u32, c: u32, modulus: u32) -> Vec<Vec<u32>> {
    let n = y.len();
    let m = modulus as u64;
    let (a, c) = (a as i64, c as i64);
    let rhs = |i: usize| -> i64 {
        let prev = if i == 0 { 0 } else { a * k[i - 1] as i64 };
        reduce(k[i] as i64 - prev - y[i] as i64 - c, m) as i64
    };
    // alpha[j], beta[j] with x[j] = alpha[j] + beta[j] * x[0], 0-based.
    let mut alpha = vec![0i64; n];
    let mut beta = vec![0i64; n];
    beta[0] = 1;
    alpha[1] = rhs(0);
    beta[1] = -a;
    for j in 2..n {
        alpha[j] = reduce(rhs(j - 1) - alpha[j - 1], m) as i64;
        beta[j] = -beta[j - 1];
    }
    let coeff = reduce(1 + beta[n - 1], m);
    let constant = reduce(rhs(n - 1) - alpha[n - 1], m);
    modular::solve_linear_congruence(coeff, constant, m)
        .into_iter()
        .map(|x1| {
            (0..n)
                .map(|j| reduce(alpha[j] + beta[j] * x1 as i64, m) as u32)
                .collect()
        })
        .collect()
}

/// The unique nonce under which `key` could have produced `t`, if it did.
fn matching_nonce(key: &CandidateKey, t: &Transcript, modulus: u32) -> Option<u32> {
    let (x, y, k) = (&key.digits, t.salt.digits(), t.response.digits());
    let m = modulus as u64;
    let c = reduce(
        k[0] as i64 - key.multiplier as i64 * x[0] as i64 - y[0] as i64 - x[1] as i64,
        m,
    ) as u32;
    (evaluate(x, key.multiplier, y, c, modulus) == k).then_some(c)
}

pub fn attack(transcripts: &[Transcript], modulus: u32) -> Result<AttackReport, AttackError> {
    attack_with(transcripts, modulus, Execution::default())
}

pub fn attack_sequential(transcripts: &[Transcript], modulus: u32) -> Result<AttackReport, AttackError> {
    attack_with(transcripts, modulus, Execution::Sequential)
}

pub fn attack_with(transcripts: &[Transcript], modulus: u32, exec: Execution) -> Result<AttackReport, AttackError> {
    validate(transcripts, modulus)?;
    let units = modular::units(modulus);
    let first = &transcripts[0];
    let z = modulus as usize;
    let pairs = units.len() * z;

    let mut candidates: Vec<CandidateKey> = exec.flat_map_range(pairs, |idx| {
        let a = units[idx / z];
        let c = (idx % z) as u32;
        solve_unchecked(first.salt.digits(), first.response.digits(), a, c, modulus)
            .into_iter()
            .map(|digits| CandidateKey { digits, multiplier: a })
            .collect()
    });
    candidates.sort_unstable();
    candidates.dedup();

    let mut work = pairs as u64;
    let mut counts = vec![candidates.len()];
    for t in &transcripts[1..] {
        work += candidates.len() as u64;
        candidates = exec.filter(candidates, |key| matching_nonce(key, t, modulus).is_some());
        counts.push(candidates.len());
    }
    Ok(AttackReport { candidates, per_transcript_counts: counts, work })
}

/// All keys indistinguishable from `key` by any transcript: the same `a`,
/// digits shifted by a vector `d` for which some nonce offset `e` satisfies
/// `a*d1 + d2 + e = 0` and `di + d(succ(i)) + e = 0` for `i >= 2`.
pub fn equivalent_keys(key: &CandidateKey, modulus: u32) -> Vec<CandidateKey> {
    let n = key.digits.len();
    let m = modulus as u64;
    let a = key.multiplier as i64;
    let mut out = Vec::new();
    for d1 in 0..modulus as i64 {
        for e in 0..modulus as i64 {
            let mut d = vec![0i64; n];
            d[0] = d1;
            d[1] = reduce(-e - a * d1, m) as i64;
            for j in 2..n {
                d[j] = reduce(-e - d[j - 1], m) as i64;
            }
            if reduce(d[n - 1] + d[0] + e, m) != 0 {
                continue;
            }
            let digits = key.digits.iter().zip(&d).map(|(&x, &s)| reduce(x as i64 + s, m) as u32).collect();
            out.push(CandidateKey { digits, multiplier: key.multiplier });
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Attack on the modified scheme, where the salt travels sealed and only `K`
/// is observed. Every salt is tried for the first response; later responses
/// keep a key if any salt maps it onto them.
pub fn attack_salt_unknown(responses: &[Response], modulus: u32, exec: Execution) -> Result<AttackReport, AttackError> {
    if modulus < 2 {
        return Err(AttackError::BadModulus(modulus));
    }
    let first = responses.first().ok_or(AttackError::NoTranscripts)?;
    let n = first.len();
    if n < 2 {
        return Err(AttackError::TooShort(n));
    }
    for (index, r) in responses.iter().enumerate() {
        if r.len() != n {
            return Err(AttackError::MixedLengths { index, expected: n, got: r.len() });
        }
        if let Some(&value) = r.digits().iter().find(|&&d| d >= modulus) {
            return Err(AttackError::DigitOutOfRange { index, value, modulus });
        }
    }
    let salts = checked_space(modulus, n)?;
    let units = modular::units(modulus);
    let pairs = units.len() * salts as usize;

    let mut candidates: Vec<CandidateKey> = exec.flat_map_range(pairs, |idx| {
        let a = units[idx / salts as usize];
        let y = index_to_digits((idx % salts as usize) as u64, n, modulus);
        solve_unchecked(&y, first.digits(), a, 0, modulus)
            .into_iter()
            .map(|digits| CandidateKey { digits, multiplier: a })
            .collect()
    });
    candidates.sort_unstable();
    candidates.dedup();

    let mut work = pairs as u64;
    let mut counts = vec![candidates.len()];
    for r in &responses[1..] {
        work += candidates.len() as u64;
        candidates = exec.filter(candidates, |key| {
            let y = implied_salt(key, r.digits(), modulus);
            evaluate(&key.digits, key.multiplier, &y, 0, modulus) == r.digits()
        });
        counts.push(candidates.len());
    }
    Ok(AttackReport { candidates, per_transcript_counts: counts, work })
}

/// The salt that makes `key` produce `k` with `c = 0`.
fn implied_salt(key: &CandidateKey, k: &[u32], modulus: u32) -> Vec<u32> {
    let (x, a, m, n) = (&key.digits, key.multiplier as i64, modulus as u64, k.len());
    (0..n)
        .map(|i| {
            let prev = if i == 0 { a * x[0] as i64 } else { a * k[i - 1] as i64 + x[i] as i64 };
            let succ = x[(i + 1) % n] as i64;
            reduce(k[i] as i64 - prev - succ, m) as u32
        })
        .collect()
}

pub(crate) fn checked_space(modulus: u32, n: usize) -> Result<u64, AttackError> {
    let space = (modulus as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if space > ORACLE_SPACE_LIMIT as u128 {
        return Err(AttackError::SpaceTooLarge { space, bound: ORACLE_SPACE_LIMIT as u128 });
    }
    Ok(space as u64)
}

/// Writes `idx` as `n` base-`modulus` digits, most significant first.
pub(crate) fn index_to_digits(mut idx: u64, n: usize, modulus: u32) -> Vec<u32> {
    let mut out = vec![0u32; n];
    for slot in out.iter_mut().rev() {
        *slot = (idx % modulus as u64) as u32;
        idx /= modulus as u64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::compute_response_original;

    fn t(y: &[u32], k: &[u32]) -> Transcript {
        Transcript::new(Salt(y.to_vec()), Response(k.to_vec()))
    }

    /// Every X in Z^n that maps the transcript under (a, c), by recomputation.
    fn brute_solve(tr: &Transcript, a: u32, c: u32, z: u32) -> Vec<Vec<u32>> {
        let n = tr.len();
        (0..(z as u64).pow(n as u32))
            .map(|i| index_to_digits(i, n, z))
            .filter(|x| evaluate(x, a, tr.salt.digits(), c, z) == tr.response.digits())
            .collect()
    }

    #[test]
    fn solve_single_recovers_known_key() {
        let tr = t(&[0, 1, 2], &[0, 2, 1]);
        let sols = solve_single(&tr, 2, 1, 5).unwrap();
        assert!(sols.contains(&vec![1, 2, 3]));
        assert_eq!(sols, brute_solve(&tr, 2, 1, 5));
    }

    #[test]
    fn solve_single_matches_brute_force_for_every_pair() {
        let tr = t(&[0, 1, 2], &[0, 2, 1]);
        for a in modular::units(5) {
            for c in 0..5 {
                assert_eq!(solve_single(&tr, a, c, 5).unwrap(), brute_solve(&tr, a, c, 5), "a={a} c={c}");
            }
        }
    }

    #[test]
    fn solve_single_rejects_bad_inputs() {
        let tr = t(&[0, 1, 2], &[0, 2, 1]);
        assert_eq!(solve_single(&tr, 5, 0, 10), Err(AttackError::NotUnit { multiplier: 5, modulus: 10 }));
        assert_eq!(solve_single(&tr, 1, 5, 5), Err(AttackError::NonceOutOfRange { c: 5, modulus: 5 }));
        assert_eq!(solve_single(&t(&[1], &[1]), 1, 0, 5), Err(AttackError::TooShort(1)));
        assert!(matches!(solve_single(&t(&[1, 2], &[1]), 1, 0, 5), Err(AttackError::MixedLengths { .. })));
    }

    #[test]
    fn solution_count_law_exhaustive_z6() {
        let z = 6u32;
        for n in 2..=3usize {
            let space = (z as u64).pow(n as u32);
            for yi in 0..space {
                for ki in 0..space {
                    let tr = t(&index_to_digits(yi, n, z), &index_to_digits(ki, n, z));
                    for a in modular::units(z) {
                        let sign = if n % 2 == 0 { -1i64 } else { 1 };
                        let coeff = reduce(1 + sign * a as i64, z as u64);
                        let g = modular::gcd(coeff, z as u64) as usize;
                        for c in 0..z {
                            let sols = solve_single(&tr, a, c, z).unwrap();
                            assert!(sols.is_empty() || sols.len() == g, "n={n} a={a} {tr}");
                            if yi % 7 == 0 && ki % 5 == 0 {
                                assert_eq!(sols, brute_solve(&tr, a, c, z));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn completeness_by_construction() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        for z in [5u32, 6, 10, 26, 95] {
            for n in [2usize, 3, 5, 8] {
                let key = crate::scheme::random_credential(n, z, &mut rng).unwrap();
                let salt = crate::scheme::random_salt(n, z, &mut rng).unwrap();
                let c = crate::scheme::random_nonce(z, &mut rng).unwrap();
                let k = compute_response_original(&key, &salt, c).unwrap();
                let sols = solve_single(&Transcript::new(salt, k), key.multiplier(), c.value(), z).unwrap();
                assert!(sols.contains(&key.digits().to_vec()));
            }
        }
    }

    #[test]
    fn attack_on_the_worked_pair() {
        let ts = [t(&[0, 1, 2], &[0, 2, 1]), t(&[4, 4, 0], &[1, 4, 0])];
        let report = attack(&ts, 5).unwrap();
        let truth = CandidateKey { digits: vec![1, 2, 3], multiplier: 2 };
        assert!(report.candidates.contains(&truth));
        assert_eq!(report.per_transcript_counts.len(), 2);
        assert!(report.per_transcript_counts[1] <= report.per_transcript_counts[0]);
        assert_eq!(report.work, 20 + report.per_transcript_counts[0] as u64);
        assert_eq!(attack_sequential(&ts, 5).unwrap(), report);
    }

    #[test]
    fn attack_rejects_bad_batches() {
        assert_eq!(attack(&[], 5), Err(AttackError::NoTranscripts));
        let ts = [t(&[0, 1, 2], &[0, 2, 1]), t(&[4, 4], &[1, 4])];
        assert_eq!(attack(&ts, 5), Err(AttackError::MixedLengths { index: 1, expected: 3, got: 2 }));
        assert!(matches!(attack(&[t(&[0, 9], &[0, 1])], 5), Err(AttackError::DigitOutOfRange { .. })));
    }

    #[test]
    fn equivalent_keys_reproduce_every_transcript() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        for (z, n) in [(5u32, 3usize), (6, 2), (26, 8), (10, 5)] {
            let key = crate::scheme::random_credential(n, z, &mut rng).unwrap();
            let cand = CandidateKey::from_credential(&key);
            let class = equivalent_keys(&cand, z);
            assert!(class.contains(&cand));
            assert!(class.len() >= z as usize);
            for _ in 0..20 {
                let salt = crate::scheme::random_salt(n, z, &mut rng).unwrap();
                let c = crate::scheme::random_nonce(z, &mut rng).unwrap();
                let tr = Transcript::new(salt.clone(), compute_response_original(&key, &salt, c).unwrap());
                for other in &class {
                    assert!(matching_nonce(other, &tr, z).is_some());
                }
            }
        }
    }

    #[test]
    fn transcript_file_parsing() {
        let ts = parse_transcript_file("# observed\n0,1,2;0,2,1\n\n4,4,0;1,4,0\n").unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[1].to_string(), "4,4,0;1,4,0");
        assert_eq!(parse_transcript_file(""), Err(AttackError::NoTranscripts));
        assert!(matches!(parse_transcript_file("0,1;1,2\n0,1,2"), Err(AttackError::Parse { line: 2, .. })));
        assert!(matches!(parse_transcript_file("0,1;1"), Err(AttackError::Parse { line: 1, .. })));
    }

    #[test]
    fn implied_salt_inverts_modified_response() {
        let key = CandidateKey { digits: vec![3, 7], multiplier: 3 };
        assert_eq!(implied_salt(&key, &[8, 3], 10), vec![2, 9]);
    }
}
