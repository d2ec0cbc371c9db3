//! Comma-separated residue lists (`3,7`), the form digit sequences take in
//! every file and on the wire.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DigitListError {
    #[error("empty digit list")]
    Empty,
    #[error("item {position} ({item:?}) is not a decimal residue")]
    BadItem { position: usize, item: String },
}

pub fn format_digits(digits: &[u32]) -> String {
    let mut out = String::with_capacity(digits.len() * 3);
    for (i, d) in digits.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&d.to_string());
    }
    out
}

/// Parses `d1,d2,...`. Whitespace, signs and empty items are rejected.
pub fn parse_digits(text: &str) -> Result<Vec<u32>, DigitListError> {
    if text.is_empty() {
        return Err(DigitListError::Empty);
    }
    text.split(',')
        .enumerate()
        .map(|(i, item)| {
            if item.is_empty() || !item.bytes().all(|b| b.is_ascii_digit()) {
                return Err(DigitListError::BadItem { position: i + 1, item: item.to_string() });
            }
            item.parse::<u32>()
                .map_err(|_| DigitListError::BadItem { position: i + 1, item: item.to_string() })
        })
        .collect()
}
