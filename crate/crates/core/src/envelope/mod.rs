//! Payloads sealed to the server's public key.
//!
//! Two payload kinds travel sealed: a user-generated salt (modified scheme)
//! and a `(c, timestamp)` pair (original scheme with the nonce disclosed).
//! Ciphers are looked up by id in a [`CipherRegistry`]; two ship by default:
//!
//! * `test-transparent`: reversible, checksummed, **not confidential**. It exists
//!   so protocol transcripts are byte-stable in tests.
//! * `x25519-xsalsa20poly1305`: anonymous sealed box (ephemeral X25519 key
//!   agreement with XSalsa20-Poly1305).

mod cipher;
mod payload;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::{CryptoRng, RngCore};
use rand_core::CryptoRngCore;
use thiserror::Error;

pub use cipher::{SealedBoxCipher, TransparentCipher, SEALED_BOX, TEST_TRANSPARENT};
pub use payload::{
    decode_c_payload, decode_salt_payload, encode_c_payload, encode_salt_payload, CPayload, PayloadError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvelopeError {
    #[error("unknown cipher {0:?}")]
    UnknownCipher(String),
    #[error("cipher mismatch: key is for {key:?}, envelope is {envelope:?}")]
    CipherMismatch { key: String, envelope: String },
    #[error("malformed envelope: {0}")]
    Malformed(String),
    #[error("envelope failed integrity check")]
    Integrity,
    #[error("sealing failed")]
    Seal,
}

impl EnvelopeError {
    /// Tampering or a wrong key, as opposed to a structurally broken envelope.
    pub fn is_integrity_failure(&self) -> bool {
        matches!(self, EnvelopeError::Integrity)
    }
}

/// A public-key cipher able to seal payloads anonymously to a recipient.
pub trait EnvelopeCipher: Send + Sync {
    fn id(&self) -> &'static str;
    /// Returns `(public_part, private_part)`.
    fn generate(&self, rng: &mut dyn CryptoRngCore) -> (Vec<u8>, Vec<u8>);
    fn seal(&self, public: &[u8], payload: &[u8], rng: &mut dyn CryptoRngCore) -> Result<Vec<u8>, EnvelopeError>;
    fn open(&self, private: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, EnvelopeError>;
}

#[derive(Clone, PartialEq, Eq)]
pub struct KeyPair {
    pub cipher_id: String,
    pub public_part: Vec<u8>,
    pub private_part: Vec<u8>,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("cipher_id", &self.cipher_id)
            .field("public_part", &STANDARD.encode(&self.public_part))
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn public_key(&self) -> PublicKey {
        PublicKey { cipher_id: self.cipher_id.clone(), bytes: self.public_part.clone() }
    }
}

/// The shareable half of a [`KeyPair`]. Text form `<cipher_id>:<base64>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub cipher_id: String,
    pub bytes: Vec<u8>,
}

/// Sealed payload. Text form `<cipher_id>:<base64 of ciphertext>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub cipher_id: String,
    pub ciphertext: Vec<u8>,
}

fn split_tagged(text: &str) -> Result<(String, Vec<u8>), EnvelopeError> {
    let (id, body) = text
        .split_once(':')
        .ok_or_else(|| EnvelopeError::Malformed("missing ':' separator".into()))?;
    if id.is_empty() || !id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_') {
        return Err(EnvelopeError::Malformed(format!("bad cipher id {id:?}")));
    }
    let bytes = STANDARD
        .decode(body)
        .map_err(|e| EnvelopeError::Malformed(format!("base64: {e}")))?;
    Ok((id.to_string(), bytes))
}

impl fmt::Display for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cipher_id, STANDARD.encode(&self.ciphertext))
    }
}

impl FromStr for Envelope {
    type Err = EnvelopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (cipher_id, ciphertext) = split_tagged(s)?;
        Ok(Envelope { cipher_id, ciphertext })
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cipher_id, STANDARD.encode(&self.bytes))
    }
}

impl FromStr for PublicKey {
    type Err = EnvelopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (cipher_id, bytes) = split_tagged(s.trim())?;
        Ok(PublicKey { cipher_id, bytes })
    }
}

pub struct CipherRegistry {
    ciphers: BTreeMap<&'static str, Box<dyn EnvelopeCipher>>,
}

impl Default for CipherRegistry {
    fn default() -> Self {
        let mut registry = CipherRegistry::empty();
        registry.register(Box::new(TransparentCipher));
        registry.register(Box::new(SealedBoxCipher));
        registry
    }
}

impl CipherRegistry {
    pub fn empty() -> Self {
        CipherRegistry { ciphers: BTreeMap::new() }
    }

    pub fn register(&mut self, cipher: Box<dyn EnvelopeCipher>) {
        self.ciphers.insert(cipher.id(), cipher);
    }

    pub fn ids(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.ciphers.keys().copied()
    }

    fn get(&self, id: &str) -> Result<&dyn EnvelopeCipher, EnvelopeError> {
        self.ciphers
            .get(id)
            .map(|c| c.as_ref())
            .ok_or_else(|| EnvelopeError::UnknownCipher(id.to_string()))
    }

    pub fn generate_keypair<R: RngCore + CryptoRng>(&self, cipher_id: &str, rng: &mut R) -> Result<KeyPair, EnvelopeError> {
        let cipher = self.get(cipher_id)?;
        let (public_part, private_part) = cipher.generate(rng);
        Ok(KeyPair { cipher_id: cipher.id().to_string(), public_part, private_part })
    }

    pub fn seal<R: RngCore + CryptoRng>(
        &self,
        public: &PublicKey,
        payload: &[u8],
        rng: &mut R,
    ) -> Result<Envelope, EnvelopeError> {
        let cipher = self.get(&public.cipher_id)?;
        let ciphertext = cipher.seal(&public.bytes, payload, rng)?;
        Ok(Envelope { cipher_id: public.cipher_id.clone(), ciphertext })
    }

    pub fn open(&self, keys: &KeyPair, envelope: &Envelope) -> Result<Vec<u8>, EnvelopeError> {
        if keys.cipher_id != envelope.cipher_id {
            return Err(EnvelopeError::CipherMismatch {
                key: keys.cipher_id.clone(),
                envelope: envelope.cipher_id.clone(),
            });
        }
        self.get(&envelope.cipher_id)?.open(&keys.private_part, &envelope.ciphertext)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn keypairs_are_deterministic() {
        let reg = CipherRegistry::default();
        for id in [TEST_TRANSPARENT, SEALED_BOX] {
            let a = reg.generate_keypair(id, &mut rng(1)).unwrap();
            let b = reg.generate_keypair(id, &mut rng(1)).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, reg.generate_keypair(id, &mut rng(2)).unwrap());
        }
        assert_eq!(
            reg.generate_keypair("no-such-cipher", &mut rng(1)),
            Err(EnvelopeError::UnknownCipher("no-such-cipher".into()))
        );
    }

    #[test]
    fn round_trip_c_payload_text() {
        let reg = CipherRegistry::default();
        let payload = b"4|2010-06-01T12:00:00Z";
        for id in reg.ids().collect::<Vec<_>>() {
            let keys = reg.generate_keypair(id, &mut rng(1)).unwrap();
            let env = reg.seal(&keys.public_key(), payload, &mut rng(3)).unwrap();
            assert_eq!(reg.open(&keys, &env).unwrap(), payload);
        }
    }

    #[test]
    fn wrong_key_fails_cleanly() {
        let reg = CipherRegistry::default();
        for id in [TEST_TRANSPARENT, SEALED_BOX] {
            let mine = reg.generate_keypair(id, &mut rng(1)).unwrap();
            let theirs = reg.generate_keypair(id, &mut rng(2)).unwrap();
            let env = reg.seal(&mine.public_key(), b"S|2,9", &mut rng(3)).unwrap();
            assert_eq!(reg.open(&theirs, &env), Err(EnvelopeError::Integrity));
        }
    }

    #[test]
    fn cipher_mismatch_detected() {
        let reg = CipherRegistry::default();
        let tt = reg.generate_keypair(TEST_TRANSPARENT, &mut rng(1)).unwrap();
        let sb = reg.generate_keypair(SEALED_BOX, &mut rng(1)).unwrap();
        let env = reg.seal(&tt.public_key(), b"x", &mut rng(3)).unwrap();
        assert!(matches!(reg.open(&sb, &env), Err(EnvelopeError::CipherMismatch { .. })));
    }

    fn assert_tamper_detected(id: &str, deltas: &[u8]) {
        let reg = CipherRegistry::default();
        let keys = reg.generate_keypair(id, &mut rng(1)).unwrap();
        let env = reg.seal(&keys.public_key(), b"C|4|2010-06-01T12:00:00Z", &mut rng(3)).unwrap();
        for pos in 0..env.ciphertext.len() {
            for &delta in deltas {
                let mut bad = env.clone();
                bad.ciphertext[pos] = bad.ciphertext[pos].wrapping_add(delta);
                let err = reg.open(&keys, &bad).unwrap_err();
                assert!(err.is_integrity_failure(), "{id} pos {pos}: {err:?}");
            }
        }
    }

    #[test]
    fn every_single_byte_change_is_detected() {
        let all: Vec<u8> = (1..=255).collect();
        assert_tamper_detected(TEST_TRANSPARENT, &all);
    }

    #[test]
    fn sealed_box_detects_byte_flips() {
        assert_tamper_detected(SEALED_BOX, &[1, 0x80]);
    }

    #[test]
    fn truncated_ciphertext_is_malformed_not_integrity() {
        let reg = CipherRegistry::default();
        for id in [TEST_TRANSPARENT, SEALED_BOX] {
            let keys = reg.generate_keypair(id, &mut rng(1)).unwrap();
            let env = Envelope { cipher_id: id.into(), ciphertext: vec![1, 2, 3] };
            assert!(matches!(reg.open(&keys, &env), Err(EnvelopeError::Malformed(_))));
        }
    }

    #[test]
    fn wire_form() {
        let env = Envelope { cipher_id: "test-transparent".into(), ciphertext: vec![0xde, 0xad, 0xbe, 0xef, 0x01] };
        assert_eq!(env.to_string(), "test-transparent:3q2+7wE=");
        assert_eq!("test-transparent:3q2+7wE=".parse::<Envelope>().unwrap(), env);
        for bad in ["nocolon", ":AAAA", "id:!!!", "sp ace:AAAA", "id:3q2+7wE"] {
            assert!(matches!(bad.parse::<Envelope>(), Err(EnvelopeError::Malformed(_))), "{bad}");
        }
        let pk = PublicKey { cipher_id: "x".into(), bytes: vec![1, 2, 3] };
        assert_eq!(pk.to_string().parse::<PublicKey>().unwrap(), pk);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn seal_open_round_trip(payload in proptest::collection::vec(any::<u8>(), 0..=1024), seed in any::<u64>()) {
            let reg = CipherRegistry::default();
            for id in [TEST_TRANSPARENT, SEALED_BOX] {
                let keys = reg.generate_keypair(id, &mut rng(seed)).unwrap();
                let env = reg.seal(&keys.public_key(), &payload, &mut rng(seed ^ 1)).unwrap();
                let wire = env.to_string();
                let back: Envelope = wire.parse().unwrap();
                prop_assert_eq!(reg.open(&keys, &back).unwrap(), payload.clone());
            }
        }
    }
}
