//! Exhaustive ground truth for the attack. Walks the whole key space and asks
//! the forward verifier about each key; shares no code with the solver.

use super::{checked_space, index_to_digits, AttackError, CandidateKey, Transcript};
use crate::modular;
use crate::par::Execution;
use crate::scheme::{compute_response_modified, verify_original, Response, Salt, SecretCredential};

/// Largest `Z^n` the oracles will walk.
pub const ORACLE_SPACE_LIMIT: u64 = 1_000_000;

/// Every `(X, a)` with `gcd(a, Z) = 1` that reproduces each transcript under
/// some nonce, sorted.
pub fn oracle_enumerate(transcripts: &[Transcript], modulus: u32) -> Result<Vec<CandidateKey>, AttackError> {
    super::validate(transcripts, modulus)?;
    let n = transcripts[0].len();
    let space = checked_space(modulus, n)?;
    let units = modular::units(modulus);
    let mut keys: Vec<CandidateKey> = Execution::default().flat_map_range(space as usize, |idx| {
        let digits = index_to_digits(idx as u64, n, modulus);
        units
            .iter()
            .filter_map(|&a| {
                let cred = SecretCredential::new(digits.clone(), a, modulus).ok()?;
                transcripts
                    .iter()
                    .all(|t| {
                        verify_original(&cred, &t.salt, &t.response)
                            .map(|o| o.is_accepted())
                            .unwrap_or(false)
                    })
                    .then(|| CandidateKey { digits: digits.clone(), multiplier: a })
            })
            .collect()
    });
    keys.sort_unstable();
    Ok(keys)
}

/// Every `(X, a)` for which each response is the modified-scheme output of
/// some salt, found by trying all `Z^n` salts per key.
pub fn oracle_enumerate_salt_unknown(responses: &[Response], modulus: u32) -> Result<Vec<CandidateKey>, AttackError> {
    let first = responses.first().ok_or(AttackError::NoTranscripts)?;
    let n = first.len();
    if modulus < 2 {
        return Err(AttackError::BadModulus(modulus));
    }
    if n < 2 {
        return Err(AttackError::TooShort(n));
    }
    if let Some((index, r)) = responses.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(AttackError::MixedLengths { index, expected: n, got: r.len() });
    }
    let space = checked_space(modulus, n)?;
    if (space as u128) * (space as u128) > (ORACLE_SPACE_LIMIT as u128) * 100 {
        return Err(AttackError::SpaceTooLarge {
            space: (space as u128) * (space as u128),
            bound: ORACLE_SPACE_LIMIT as u128 * 100,
        });
    }
    let units = modular::units(modulus);
    let salts: Vec<Salt> = (0..space).map(|i| Salt(index_to_digits(i, n, modulus))).collect();
    let mut keys: Vec<CandidateKey> = Execution::default().flat_map_range(space as usize, |idx| {
        let digits = index_to_digits(idx as u64, n, modulus);
        units
            .iter()
            .filter_map(|&a| {
                let cred = SecretCredential::new(digits.clone(), a, modulus).ok()?;
                responses
                    .iter()
                    .all(|r| salts.iter().any(|y| compute_response_modified(&cred, y).as_ref() == Ok(r)))
                    .then(|| CandidateKey { digits: digits.clone(), multiplier: a })
            })
            .collect()
    });
    keys.sort_unstable();
    Ok(keys)
}
