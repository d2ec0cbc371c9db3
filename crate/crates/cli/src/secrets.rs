//! Credential input. Secrets come from a file or a hidden prompt, never argv.
//!
//! Key file lines:
//!
//! ```text
//! # either the digit form ...
//! digits=3,7
//! # ... or the password text, mapped through the alphabet
//! password=37
//! multiplier=3
//! ```

use std::path::Path;

use vpass_core::digits::parse_digits;
use vpass_core::{Alphabet, SecretCredential};

use crate::error::CliError;

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn parse_key_file(text: &str, alphabet: &Alphabet) -> Result<SecretCredential, CliError> {
    let (mut digits, mut multiplier) = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |msg: &str| CliError::domain(format!("key file line {}: {msg}", i + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
        match key.trim() {
            "digits" | "password" if digits.is_some() => return Err(bad("secret given twice")),
            "digits" => digits = Some(parse_digits(value.trim()).map_err(|e| bad(&e.to_string()))?),
            // Password text is taken verbatim: spaces may be alphabet symbols.
            "password" => digits = Some(alphabet.encode(value).map_err(|e| bad(&e.to_string()))?),
            "multiplier" => {
                multiplier = Some(value.trim().parse::<u32>().map_err(|_| bad("multiplier must be a number"))?)
            }
            other => return Err(bad(&format!("unknown key {other:?}"))),
        }
    }
    let digits = digits.ok_or_else(|| CliError::domain("key file has no digits= or password= line"))?;
    let multiplier = multiplier.ok_or_else(|| CliError::domain("key file has no multiplier= line"))?;
    SecretCredential::new(digits, multiplier, alphabet.size()).map_err(|e| CliError::domain(format!("invalid credential: {e}")))
}

fn prompt(label: &str) -> Result<String, CliError> {
    rpassword::prompt_password(label).map_err(|e| CliError::Io(format!("cannot read from terminal: {e}")))
}

/// Reads the credential from `key_file`, or prompts without echo.
pub fn read_credential(key_file: Option<&Path>, alphabet: &Alphabet) -> Result<SecretCredential, CliError> {
    match key_file {
        Some(path) => parse_key_file(&read_file(path)?, alphabet),
        None => {
            let password = prompt("password: ")?;
            let multiplier = prompt("multiplier: ")?;
            parse_key_file(&format!("password={password}\nmultiplier={multiplier}\n"), alphabet)
        }
    }
}

/// Reads a second password: first line of `file`, or a hidden prompt.
pub fn read_second_password(file: Option<&Path>, label: &str) -> Result<String, CliError> {
    let text = match file {
        Some(path) => read_file(path)?.lines().next().unwrap_or("").trim_end_matches('\r').to_string(),
        None => prompt(label)?,
    };
    if text.is_empty() {
        return Err(CliError::domain("second password is empty"));
    }
    Ok(text)
}
