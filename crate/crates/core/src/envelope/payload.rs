//! Canonical ASCII encodings of the sealed payloads:
//! `S|<y1,..,yn>` for a salt and `C|<c>|<YYYY-MM-DDTHH:MM:SSZ>` for a nonce.

use thiserror::Error;

use crate::clock::{format_timestamp, parse_timestamp, Timestamp};
use crate::digits::{format_digits, parse_digits};
use crate::scheme::Salt;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PayloadError {
    #[error("payload is not ASCII text")]
    NotText,
    #[error("expected tag {expected:?}")]
    WrongTag { expected: &'static str },
    #[error("malformed payload: {0}")]
    Syntax(String),
    #[error("salt has {got} digits, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("value {value} is outside [0, {modulus})")]
    Range { value: u32, modulus: u32 },
    #[error("malformed timestamp {0:?}")]
    Timestamp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CPayload {
    pub c: u32,
    pub timestamp: Timestamp,
}

pub fn encode_salt_payload(salt: &Salt) -> Vec<u8> {
    format!("S|{}", format_digits(salt.digits())).into_bytes()
}

fn as_text(bytes: &[u8]) -> Result<&str, PayloadError> {
    if !bytes.is_ascii() {
        return Err(PayloadError::NotText);
    }
    std::str::from_utf8(bytes).map_err(|_| PayloadError::NotText)
}

pub fn decode_salt_payload(bytes: &[u8], expected_len: usize, modulus: u32) -> Result<Salt, PayloadError> {
    let text = as_text(bytes)?;
    let body = text.strip_prefix("S|").ok_or(PayloadError::WrongTag { expected: "S" })?;
    let digits = parse_digits(body).map_err(|e| PayloadError::Syntax(e.to_string()))?;
    if digits.len() != expected_len {
        return Err(PayloadError::Length { expected: expected_len, got: digits.len() });
    }
    if let Some(&value) = digits.iter().find(|&&d| d >= modulus) {
        return Err(PayloadError::Range { value, modulus });
    }
    Ok(Salt(digits))
}

pub fn encode_c_payload(payload: &CPayload) -> Vec<u8> {
    format!("C|{}|{}", payload.c, format_timestamp(&payload.timestamp)).into_bytes()
}

pub fn decode_c_payload(bytes: &[u8], modulus: u32) -> Result<CPayload, PayloadError> {
    let text = as_text(bytes)?;
    let body = text.strip_prefix("C|").ok_or(PayloadError::WrongTag { expected: "C" })?;
    let (c_text, ts_text) = body
        .split_once('|')
        .ok_or_else(|| PayloadError::Syntax("missing timestamp field".into()))?;
    let c = match parse_digits(c_text) {
        Ok(v) if v.len() == 1 => v[0],
        _ => return Err(PayloadError::Syntax(format!("bad nonce {c_text:?}"))),
    };
    if c >= modulus {
        return Err(PayloadError::Range { value: c, modulus });
    }
    let timestamp = parse_timestamp(ts_text).ok_or_else(|| PayloadError::Timestamp(ts_text.to_string()))?;
    Ok(CPayload { c, timestamp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn salt_payload_examples() {
        assert_eq!(encode_salt_payload(&Salt(vec![2, 9])), b"S|2,9");
        assert_eq!(decode_salt_payload(b"S|2,9", 2, 10).unwrap(), Salt(vec![2, 9]));
        assert_eq!(decode_salt_payload(b"S|2,9", 3, 10), Err(PayloadError::Length { expected: 3, got: 2 }));
        assert_eq!(decode_salt_payload(b"S|2,12", 2, 10), Err(PayloadError::Range { value: 12, modulus: 10 }));
        assert_eq!(decode_salt_payload(b"C|2,9", 2, 10), Err(PayloadError::WrongTag { expected: "S" }));
        assert!(matches!(decode_salt_payload(b"S|2,,9", 2, 10), Err(PayloadError::Syntax(_))));
        assert_eq!(decode_salt_payload(&[b'S', b'|', 0xff], 1, 10), Err(PayloadError::NotText));
    }

    #[test]
    fn c_payload_examples() {
        let ts = parse_timestamp("2010-06-01T12:00:00Z").unwrap();
        let p = CPayload { c: 4, timestamp: ts };
        assert_eq!(encode_c_payload(&p), b"C|4|2010-06-01T12:00:00Z");
        assert_eq!(decode_c_payload(b"C|4|2010-06-01T12:00:00Z", 10).unwrap(), p);
        assert_eq!(
            decode_c_payload(b"C|10|2010-06-01T12:00:00Z", 10),
            Err(PayloadError::Range { value: 10, modulus: 10 })
        );
        assert_eq!(
            decode_c_payload(b"C|4|2010-06-01 12:00", 10),
            Err(PayloadError::Timestamp("2010-06-01 12:00".into()))
        );
        assert!(matches!(decode_c_payload(b"C|4", 10), Err(PayloadError::Syntax(_))));
        assert!(matches!(decode_c_payload(b"C|4,5|2010-06-01T12:00:00Z", 10), Err(PayloadError::Syntax(_))));
        assert_eq!(decode_c_payload(b"S|4", 10), Err(PayloadError::WrongTag { expected: "C" }));
    }

    proptest! {
        #[test]
        fn salt_round_trip(z in 2u32..200, digits in proptest::collection::vec(0u32..10_000, 2..16)) {
            let salt = Salt(digits.iter().map(|d| d % z).collect());
            let back = decode_salt_payload(&encode_salt_payload(&salt), salt.len(), z).unwrap();
            prop_assert_eq!(back, salt);
        }

        #[test]
        fn c_round_trip(z in 2u32..200, c in 0u32..10_000, secs in 0i64..4_000_000_000) {
            let p = CPayload { c: c % z, timestamp: chrono::DateTime::from_timestamp(secs, 0).unwrap() };
            prop_assert_eq!(decode_c_payload(&encode_c_payload(&p), z).unwrap(), p);
        }
    }
}
