//! The randomized linear response function, in its original form (blinded by
//! a per-login nonce `c` the server must search for) and its modified form
//! (no nonce; the salt is user-generated and sealed to the server).
//!
//! For a secret `X = x1..xn`, multiplier `a` and salt `Y = y1..yn`, all residues
//! mod `Z`:
//!
//! ```text
//! k1 = a*x1 + y1 + x2 + c                      (mod Z)
//! ki = a*k(i-1) + yi + xi + c + x(succ(i))     (mod Z), 2 <= i <= n
//! ```
//!
//! where `succ(i) = (i mod n) + 1` cycles `n` back to `1`. The modified scheme
//! is the same recurrence with `c = 0`.

use rand::Rng;
use thiserror::Error;

use crate::alphabet::{Alphabet, AlphabetError};
use crate::modular;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u32),
    #[error("sequence length {0} is below the minimum of 2")]
    TooShort(usize),
    #[error("length mismatch: expected {expected} digits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("digit {value} at position {position} is outside [0, {modulus})")]
    DigitOutOfRange { position: usize, value: u32, modulus: u32 },
    #[error("multiplier {multiplier} violates gcd(a, Z) = 1 for Z = {modulus}")]
    NotUnit { multiplier: u32, modulus: u32 },
    #[error("multiplier {multiplier} is outside [0, {modulus})")]
    MultiplierOutOfRange { multiplier: u32, modulus: u32 },
    #[error("nonce {c} is outside [0, {modulus})")]
    NonceOutOfRange { c: u32, modulus: u32 },
    #[error("position {i} is outside [1, {n}]")]
    IndexOutOfRange { i: usize, n: usize },
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
}

/// Successor of 1-based position `i` in a cycle of length `n`.
pub fn wrap_index(i: usize, n: usize) -> Result<usize, SchemeError> {
    if n < 2 {
        return Err(SchemeError::TooShort(n));
    }
    if i == 0 || i > n {
        return Err(SchemeError::IndexOutOfRange { i, n });
    }
    Ok(i % n + 1)
}

pub fn is_valid_multiplier(a: u32, modulus: u32) -> bool {
    modular::is_unit(a as u64, modulus as u64)
}

fn check_range(digits: &[u32], modulus: u32) -> Result<(), SchemeError> {
    match digits.iter().position(|&d| d >= modulus) {
        Some(p) => Err(SchemeError::DigitOutOfRange { position: p + 1, value: digits[p], modulus }),
        None => Ok(()),
    }
}

/// The long-term shared secret: fixed digits `X` and multiplier `a`, residues mod `Z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SecretCredential {
    digits: Vec<u32>,
    multiplier: u32,
    modulus: u32,
}

impl SecretCredential {
    pub fn new(digits: Vec<u32>, multiplier: u32, modulus: u32) -> Result<Self, SchemeError> {
        if modulus < 2 {
            return Err(SchemeError::BadModulus(modulus));
        }
        if digits.len() < 2 {
            return Err(SchemeError::TooShort(digits.len()));
        }
        check_range(&digits, modulus)?;
        if multiplier >= modulus {
            return Err(SchemeError::MultiplierOutOfRange { multiplier, modulus });
        }
        if !is_valid_multiplier(multiplier, modulus) {
            return Err(SchemeError::NotUnit { multiplier, modulus });
        }
        Ok(SecretCredential { digits, multiplier, modulus })
    }

    /// Builds a credential from a password string over `alphabet`.
    pub fn from_password(password: &str, multiplier: u32, alphabet: &Alphabet) -> Result<Self, SchemeError> {
        Self::new(alphabet.encode(password)?, multiplier, alphabet.size())
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn multiplier(&self) -> u32 {
        self.multiplier
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

/// Per-session challenge digits `Y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Salt(pub Vec<u32>);

/// Virtual password digits `K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Response(pub Vec<u32>);

macro_rules! digit_seq {
    ($ty:ty) => {
        impl $ty {
            pub fn digits(&self) -> &[u32] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn validate(&self, n: usize, modulus: u32) -> Result<(), SchemeError> {
                if self.0.len() != n {
                    return Err(SchemeError::LengthMismatch { expected: n, got: self.0.len() });
                }
                check_range(&self.0, modulus)
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&crate::digits::format_digits(&self.0))
            }
        }

        impl From<Vec<u32>> for $ty {
            fn from(v: Vec<u32>) -> Self {
                Self(v)
            }
        }
    };
}

digit_seq!(Salt);
digit_seq!(Response);

/// The blinding nonce `c` of the original scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionNonce(u32);

impl SessionNonce {
    pub fn new(c: u32, modulus: u32) -> Result<Self, SchemeError> {
        if c >= modulus {
            return Err(SchemeError::NonceOutOfRange { c, modulus });
        }
        Ok(SessionNonce(c))
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

/// Evaluates the recurrence. Callers have validated lengths and ranges.
pub(crate) fn evaluate(x: &[u32], a: u32, y: &[u32], c: u32, modulus: u32) -> Vec<u32> {
    let n = x.len();
    let z = modulus as u64;
    let a = a as u64;
    let c = c as u64;
    let mut out = Vec::with_capacity(n);
    let mut prev = (a * x[0] as u64 + y[0] as u64 + x[1] as u64 + c) % z;
    out.push(prev as u32);
    for i in 1..n {
        let succ = x[(i + 1) % n] as u64;
        prev = (a * prev + y[i] as u64 + x[i] as u64 + c + succ) % z;
        out.push(prev as u32);
    }
    out
}

pub fn compute_response_original(
    cred: &SecretCredential,
    salt: &Salt,
    nonce: SessionNonce,
) -> Result<Response, SchemeError> {
    salt.validate(cred.len(), cred.modulus)?;
    if nonce.0 >= cred.modulus {
        return Err(SchemeError::NonceOutOfRange { c: nonce.0, modulus: cred.modulus });
    }
    Ok(Response(evaluate(&cred.digits, cred.multiplier, &salt.0, nonce.0, cred.modulus)))
}

pub fn compute_response_modified(cred: &SecretCredential, salt: &Salt) -> Result<Response, SchemeError> {
    salt.validate(cred.len(), cred.modulus)?;
    Ok(Response(evaluate(&cred.digits, cred.multiplier, &salt.0, 0, cred.modulus)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OriginalOutcome {
    Accepted { c: SessionNonce },
    Rejected,
}

impl OriginalOutcome {
    pub fn is_accepted(self) -> bool {
        matches!(self, OriginalOutcome::Accepted { .. })
    }
}

/// Scans `c = 0..Z` and reports the first nonce reproducing `response`.
pub fn verify_original(
    cred: &SecretCredential,
    salt: &Salt,
    response: &Response,
) -> Result<OriginalOutcome, SchemeError> {
    verify_original_counted(cred, salt, response).map(|(outcome, _)| outcome)
}

/// As [`verify_original`], also returning how many responses were computed.
pub fn verify_original_counted(
    cred: &SecretCredential,
    salt: &Salt,
    response: &Response,
) -> Result<(OriginalOutcome, u32), SchemeError> {
    salt.validate(cred.len(), cred.modulus)?;
    if response.len() != cred.len() {
        return Err(SchemeError::LengthMismatch { expected: cred.len(), got: response.len() });
    }
    let mut computed = 0;
    for c in 0..cred.modulus {
        computed += 1;
        if evaluate(&cred.digits, cred.multiplier, &salt.0, c, cred.modulus) == response.0 {
            return Ok((OriginalOutcome::Accepted { c: SessionNonce(c) }, computed));
        }
    }
    Ok((OriginalOutcome::Rejected, computed))
}

pub fn verify_modified(cred: &SecretCredential, salt: &Salt, response: &Response) -> Result<bool, SchemeError> {
    if response.len() != cred.len() {
        return Err(SchemeError::LengthMismatch { expected: cred.len(), got: response.len() });
    }
    Ok(compute_response_modified(cred, salt)? == *response)
}

pub fn random_salt<R: Rng + ?Sized>(n: usize, modulus: u32, rng: &mut R) -> Result<Salt, SchemeError> {
    if n < 2 {
        return Err(SchemeError::TooShort(n));
    }
    if modulus < 2 {
        return Err(SchemeError::BadModulus(modulus));
    }
    Ok(Salt((0..n).map(|_| rng.gen_range(0..modulus)).collect()))
}

pub fn random_nonce<R: Rng + ?Sized>(modulus: u32, rng: &mut R) -> Result<SessionNonce, SchemeError> {
    if modulus < 2 {
        return Err(SchemeError::BadModulus(modulus));
    }
    Ok(SessionNonce(rng.gen_range(0..modulus)))
}

/// Uniformly random credential: digits uniform, multiplier uniform over the units.
pub fn random_credential<R: Rng + ?Sized>(n: usize, modulus: u32, rng: &mut R) -> Result<SecretCredential, SchemeError> {
    let units = modular::units(modulus);
    if units.is_empty() {
        return Err(SchemeError::BadModulus(modulus));
    }
    let digits = random_salt(n, modulus, rng)?.0;
    let a = units[rng.gen_range(0..units.len())];
    SecretCredential::new(digits, a, modulus)
}
