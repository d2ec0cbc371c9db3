use crypto_box::{PublicKey as BoxPublic, SecretKey as BoxSecret};
use rand_core::CryptoRngCore;

use super::{EnvelopeCipher, EnvelopeError};

pub const TEST_TRANSPARENT: &str = "test-transparent";
pub const SEALED_BOX: &str = "x25519-xsalsa20poly1305";

const KEY_ID_LEN: usize = 16;
const CHECKSUM_LEN: usize = 4;

/// Insecure reference cipher: `key_id || payload || crc32(key_id || payload)`.
///
/// Public and private parts are the same random key id, so a payload sealed
/// for one key pair fails to open under another. The payload is readable by
/// anyone; use only in tests and golden transcripts.
#[derive(Debug, Default, Clone, Copy)]
pub struct TransparentCipher;

impl EnvelopeCipher for TransparentCipher {
    fn id(&self) -> &'static str {
        TEST_TRANSPARENT
    }

    fn generate(&self, rng: &mut dyn CryptoRngCore) -> (Vec<u8>, Vec<u8>) {
        let mut key_id = vec![0u8; KEY_ID_LEN];
        rng.fill_bytes(&mut key_id);
        (key_id.clone(), key_id)
    }

    fn seal(&self, public: &[u8], payload: &[u8], _rng: &mut dyn CryptoRngCore) -> Result<Vec<u8>, EnvelopeError> {
        if public.len() != KEY_ID_LEN {
            return Err(EnvelopeError::Malformed(format!("key id must be {KEY_ID_LEN} bytes")));
        }
        let mut out = Vec::with_capacity(KEY_ID_LEN + payload.len() + CHECKSUM_LEN);
        out.extend_from_slice(public);
        out.extend_from_slice(payload);
        let sum = crc32fast::hash(&out);
        out.extend_from_slice(&sum.to_be_bytes());
        Ok(out)
    }

    fn open(&self, private: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, EnvelopeError> {
        if ciphertext.len() < KEY_ID_LEN + CHECKSUM_LEN {
            return Err(EnvelopeError::Malformed(format!("ciphertext too short ({} bytes)", ciphertext.len())));
        }
        let (body, sum) = ciphertext.split_at(ciphertext.len() - CHECKSUM_LEN);
        let expected = u32::from_be_bytes(sum.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != expected || &body[..KEY_ID_LEN] != private {
            return Err(EnvelopeError::Integrity);
        }
        Ok(body[KEY_ID_LEN..].to_vec())
    }
}

/// X25519 + XSalsa20-Poly1305 sealed box (libsodium `crypto_box_seal` layout).
#[derive(Debug, Default, Clone, Copy)]
pub struct SealedBoxCipher;

const SEAL_OVERHEAD: usize = crypto_box::KEY_SIZE + 16;

impl EnvelopeCipher for SealedBoxCipher {
    fn id(&self) -> &'static str {
        SEALED_BOX
    }

    fn generate(&self, mut rng: &mut dyn CryptoRngCore) -> (Vec<u8>, Vec<u8>) {
        let secret = BoxSecret::generate(&mut rng);
        (secret.public_key().as_bytes().to_vec(), secret.to_bytes().to_vec())
    }

    fn seal(&self, public: &[u8], payload: &[u8], mut rng: &mut dyn CryptoRngCore) -> Result<Vec<u8>, EnvelopeError> {
        let public = BoxPublic::from_slice(public)
            .map_err(|_| EnvelopeError::Malformed("public key must be 32 bytes".into()))?;
        public.seal(&mut rng, payload).map_err(|_| EnvelopeError::Seal)
    }

    fn open(&self, private: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, EnvelopeError> {
        let secret = BoxSecret::from_slice(private)
            .map_err(|_| EnvelopeError::Malformed("private key must be 32 bytes".into()))?;
        if ciphertext.len() < SEAL_OVERHEAD {
            return Err(EnvelopeError::Malformed(format!("ciphertext too short ({} bytes)", ciphertext.len())));
        }
        secret.unseal(ciphertext).map_err(|_| EnvelopeError::Integrity)
    }
}
