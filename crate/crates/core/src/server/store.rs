//! Account registry and its JSON persistence.
//!
//! The file keeps secrets in clear: the server has to recompute `K`, so it
//! needs `X` and `a` as-is. Protect the file with filesystem permissions.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::Alphabet;
use crate::clock::{format_timestamp, parse_timestamp, Timestamp};
use crate::digits::{format_digits, parse_digits};
use crate::envelope::KeyPair;
use crate::recovery::{OutboxMessage, RecoveryFields, ResetToken, TokenKind};
use crate::scheme::{SchemeError, SecretCredential};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("username {0:?} already registered")]
    DuplicateUser(String),
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("invalid username {0:?}: must be 1-64 printable characters without spaces")]
    InvalidUsername(String),
    #[error("unknown alphabet {0:?}")]
    UnknownAlphabet(String),
    #[error("credential modulus {credential} does not match alphabet size {alphabet}")]
    ModulusMismatch { credential: u32, alphabet: u32 },
    #[error("invalid credential: {0}")]
    InvalidCredential(#[from] SchemeError),
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("store file syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("store file field `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("unsupported store format_version {found:?} (expected {FORMAT_VERSION})")]
    Version { found: Option<i64> },
}

/// Which login path an account uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    /// Server-issued salt, nonce found by scanning all of `Z`.
    Original,
    /// Server-issued salt, nonce disclosed in a sealed `(c, timestamp)` payload.
    OriginalEncryptedC,
    /// User-generated salt sealed to the server, no nonce.
    Modified,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Original, SchemeKind::OriginalEncryptedC, SchemeKind::Modified];

    pub fn code(self) -> &'static str {
        match self {
            SchemeKind::Original => "ORIG",
            SchemeKind::OriginalEncryptedC => "ORIG-ENC-C",
            SchemeKind::Modified => "MOD",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme {s:?} (expected ORIG, ORIG-ENC-C or MOD)"))
    }
}

/// One successfully used nonce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CUsageEntry {
    pub c: u32,
    pub used_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccountRecord {
    pub username: String,
    pub credential: SecretCredential,
    pub alphabet_id: String,
    pub scheme: SchemeKind,
    pub c_history: Vec<CUsageEntry>,
    pub recovery: RecoveryFields,
    pub outbox: Vec<OutboxMessage>,
}

impl AccountRecord {
    pub fn has_used_c(&self, c: u32) -> bool {
        self.c_history.iter().any(|e| e.c == c)
    }

    /// Appends to the ledger, keeping timestamps non-decreasing.
    pub fn record_c(&mut self, c: u32, now: Timestamp) {
        let used_at = self.c_history.last().map_or(now, |last| last.used_at.max(now));
        self.c_history.push(CUsageEntry { c, used_at });
    }
}

fn valid_username(name: &str) -> bool {
    !name.is_empty() && name.chars().count() <= 64 && name.chars().all(|ch| ch.is_ascii_graphic())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    alphabets: BTreeMap<String, Alphabet>,
    accounts: BTreeMap<String, AccountRecord>,
    server_key: Option<KeyPair>,
}

impl Default for Store {
    fn default() -> Self {
        let alphabets = Alphabet::builtin_ids()
            .into_iter()
            .map(|id| (id.to_string(), Alphabet::builtin(id).expect("builtin")))
            .collect();
        Store { alphabets, accounts: BTreeMap::new(), server_key: None }
    }
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alphabet(&self, id: &str) -> Result<&Alphabet, StoreError> {
        self.alphabets.get(id).ok_or_else(|| StoreError::UnknownAlphabet(id.to_string()))
    }

    pub fn add_alphabet(&mut self, id: &str, alphabet: Alphabet) {
        self.alphabets.insert(id.to_string(), alphabet);
    }

    pub fn server_key(&self) -> Option<&KeyPair> {
        self.server_key.as_ref()
    }

    pub fn set_server_key(&mut self, key: KeyPair) {
        self.server_key = Some(key);
    }

    pub fn account(&self, username: &str) -> Result<&AccountRecord, StoreError> {
        self.accounts.get(username).ok_or_else(|| StoreError::UnknownUser(username.to_string()))
    }

    pub fn account_mut(&mut self, username: &str) -> Result<&mut AccountRecord, StoreError> {
        self.accounts.get_mut(username).ok_or_else(|| StoreError::UnknownUser(username.to_string()))
    }

    pub fn accounts(&self) -> impl Iterator<Item = &AccountRecord> {
        self.accounts.values()
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    /// Checks that `credential` is valid over the named alphabet.
    pub fn check_credential(&self, alphabet_id: &str, credential: &SecretCredential) -> Result<(), StoreError> {
        let size = self.alphabet(alphabet_id)?.size();
        if credential.modulus() != size {
            return Err(StoreError::ModulusMismatch { credential: credential.modulus(), alphabet: size });
        }
        // Re-run construction so a credential can never bypass validation.
        SecretCredential::new(credential.digits().to_vec(), credential.multiplier(), size)?;
        Ok(())
    }

    pub fn register(
        &mut self,
        username: &str,
        credential: SecretCredential,
        alphabet_id: &str,
        scheme: SchemeKind,
    ) -> Result<&AccountRecord, StoreError> {
        if !valid_username(username) {
            return Err(StoreError::InvalidUsername(username.to_string()));
        }
        if self.accounts.contains_key(username) {
            return Err(StoreError::DuplicateUser(username.to_string()));
        }
        self.check_credential(alphabet_id, &credential)?;
        let record = AccountRecord {
            username: username.to_string(),
            credential,
            alphabet_id: alphabet_id.to_string(),
            scheme,
            c_history: Vec::new(),
            recovery: RecoveryFields::default(),
            outbox: Vec::new(),
        };
        Ok(self.accounts.entry(username.to_string()).or_insert(record))
    }

    pub fn to_json(&self) -> String {
        let file = StoreFile::from(self);
        let mut text = serde_json::to_string_pretty(&file).expect("store serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| StoreError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let version = value.get("format_version").and_then(|v| v.as_i64());
        if version != Some(FORMAT_VERSION as i64) {
            return Err(StoreError::Version { found: version });
        }
        let file: StoreFile = serde_path_to_error::deserialize(value).map_err(|e| StoreError::Field {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        file.into_store()
    }
}

/// Writes the store atomically (temp file, then rename).
pub fn save_store(store: &Store, path: &Path) -> Result<(), StoreError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "store".into());
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(store.to_json().as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_store(path: &Path) -> Result<Store, StoreError> {
    Store::from_json(&fs::read_to_string(path)?)
}

// On-disk representation.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreFile {
    format_version: u32,
    alphabets: Vec<AlphabetEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    server_key: Option<KeyEntry>,
    accounts: Vec<AccountEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphabetEntry {
    id: String,
    symbols: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyEntry {
    cipher_id: String,
    public: String,
    private: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AccountEntry {
    username: String,
    alphabet_id: String,
    scheme: String,
    credential: CredentialEntry,
    c_history: Vec<CUsageRow>,
    recovery: RecoveryEntry,
    outbox: Vec<OutboxRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CredentialEntry {
    digits: String,
    multiplier: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CUsageRow {
    c: u32,
    used_at: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecoveryEntry {
    secondary_email: Option<String>,
    second_password: Option<String>,
    pending_tokens: Vec<TokenRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenRow {
    token: String,
    kind: String,
    issued_at: String,
    used: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutboxRow {
    to: String,
    token: String,
    kind: String,
    sent_at: String,
}

impl From<&Store> for StoreFile {
    fn from(store: &Store) -> Self {
        StoreFile {
            format_version: FORMAT_VERSION,
            alphabets: store
                .alphabets
                .iter()
                .map(|(id, a)| AlphabetEntry { id: id.clone(), symbols: a.symbols() })
                .collect(),
            server_key: store.server_key.as_ref().map(|k| KeyEntry {
                cipher_id: k.cipher_id.clone(),
                public: STANDARD.encode(&k.public_part),
                private: STANDARD.encode(&k.private_part),
            }),
            accounts: store.accounts.values().map(AccountEntry::from).collect(),
        }
    }
}

impl From<&AccountRecord> for AccountEntry {
    fn from(a: &AccountRecord) -> Self {
        AccountEntry {
            username: a.username.clone(),
            alphabet_id: a.alphabet_id.clone(),
            scheme: a.scheme.code().to_string(),
            credential: CredentialEntry {
                digits: format_digits(a.credential.digits()),
                multiplier: a.credential.multiplier(),
            },
            c_history: a
                .c_history
                .iter()
                .map(|e| CUsageRow { c: e.c, used_at: format_timestamp(&e.used_at) })
                .collect(),
            recovery: RecoveryEntry {
                secondary_email: a.recovery.secondary_email.clone(),
                second_password: a.recovery.second_password.clone(),
                pending_tokens: a
                    .recovery
                    .pending_tokens
                    .iter()
                    .map(|t| TokenRow {
                        token: t.token.clone(),
                        kind: t.kind.code().to_string(),
                        issued_at: format_timestamp(&t.issued_at),
                        used: t.used,
                    })
                    .collect(),
            },
            outbox: a
                .outbox
                .iter()
                .map(|m| OutboxRow {
                    to: m.to.clone(),
                    token: m.token.clone(),
                    kind: m.kind.code().to_string(),
                    sent_at: format_timestamp(&m.sent_at),
                })
                .collect(),
        }
    }
}

fn field_err(path: impl Into<String>, message: impl fmt::Display) -> StoreError {
    StoreError::Field { path: path.into(), message: message.to_string() }
}

fn ts(path: String, text: &str) -> Result<Timestamp, StoreError> {
    parse_timestamp(text).ok_or_else(|| field_err(path, format!("malformed timestamp {text:?}")))
}

fn kind(path: String, text: &str) -> Result<TokenKind, StoreError> {
    text.parse().map_err(|e| field_err(path, e))
}

impl StoreFile {
    fn into_store(self) -> Result<Store, StoreError> {
        let mut alphabets = BTreeMap::new();
        for (i, entry) in self.alphabets.into_iter().enumerate() {
            let alphabet = Alphabet::new(&entry.symbols).map_err(|e| field_err(format!("alphabets[{i}].symbols"), e))?;
            if alphabets.insert(entry.id.clone(), alphabet).is_some() {
                return Err(field_err(format!("alphabets[{i}].id"), format!("duplicate alphabet {:?}", entry.id)));
            }
        }
        let server_key = match self.server_key {
            None => None,
            Some(k) => Some(KeyPair {
                public_part: STANDARD.decode(&k.public).map_err(|e| field_err("server_key.public", e))?,
                private_part: STANDARD.decode(&k.private).map_err(|e| field_err("server_key.private", e))?,
                cipher_id: k.cipher_id,
            }),
        };
        let mut store = Store { alphabets, accounts: BTreeMap::new(), server_key };
        for (i, entry) in self.accounts.into_iter().enumerate() {
            let record = entry.into_record(i, &store)?;
            if store.accounts.contains_key(&record.username) {
                return Err(field_err(format!("accounts[{i}].username"), format!("duplicate user {:?}", record.username)));
            }
            store.accounts.insert(record.username.clone(), record);
        }
        Ok(store)
    }
}

impl AccountEntry {
    fn into_record(self, i: usize, store: &Store) -> Result<AccountRecord, StoreError> {
        let at = |field: &str| format!("accounts[{i}].{field}");
        if !valid_username(&self.username) {
            return Err(field_err(at("username"), format!("invalid username {:?}", self.username)));
        }
        let size = store
            .alphabet(&self.alphabet_id)
            .map_err(|e| field_err(at("alphabet_id"), e))?
            .size();
        let scheme: SchemeKind = self.scheme.parse().map_err(|e| field_err(at("scheme"), e))?;
        let digits = parse_digits(&self.credential.digits).map_err(|e| field_err(at("credential.digits"), e))?;
        let credential =
            SecretCredential::new(digits, self.credential.multiplier, size).map_err(|e| field_err(at("credential"), e))?;

        let mut c_history = Vec::with_capacity(self.c_history.len());
        for (j, row) in self.c_history.into_iter().enumerate() {
            if row.c >= size {
                return Err(field_err(at(&format!("c_history[{j}].c")), format!("{} is outside [0, {size})", row.c)));
            }
            let used_at = ts(at(&format!("c_history[{j}].used_at")), &row.used_at)?;
            if c_history.last().is_some_and(|prev: &CUsageEntry| prev.used_at > used_at) {
                return Err(field_err(at(&format!("c_history[{j}].used_at")), "ledger timestamps go backwards"));
            }
            c_history.push(CUsageEntry { c: row.c, used_at });
        }

        let rec = self.recovery;
        if rec.secondary_email.is_some() != rec.second_password.is_some() {
            return Err(field_err(at("recovery"), "secondary_email and second_password must be set together"));
        }
        let mut pending_tokens: Vec<ResetToken> = Vec::with_capacity(rec.pending_tokens.len());
        for (j, row) in rec.pending_tokens.into_iter().enumerate() {
            let path = |f: &str| at(&format!("recovery.pending_tokens[{j}].{f}"));
            if pending_tokens.iter().any(|t| t.token == row.token) {
                return Err(field_err(path("token"), "duplicate token"));
            }
            pending_tokens.push(ResetToken {
                kind: kind(path("kind"), &row.kind)?,
                issued_at: ts(path("issued_at"), &row.issued_at)?,
                used: row.used,
                token: row.token,
            });
        }
        let mut outbox = Vec::with_capacity(self.outbox.len());
        for (j, row) in self.outbox.into_iter().enumerate() {
            let path = |f: &str| at(&format!("outbox[{j}].{f}"));
            outbox.push(OutboxMessage {
                kind: kind(path("kind"), &row.kind)?,
                sent_at: ts(path("sent_at"), &row.sent_at)?,
                to: row.to,
                token: row.token,
            });
        }

        Ok(AccountRecord {
            username: self.username,
            credential,
            alphabet_id: self.alphabet_id,
            scheme,
            c_history,
            recovery: RecoveryFields {
                secondary_email: rec.secondary_email,
                second_password: rec.second_password,
                pending_tokens,
            },
            outbox,
        })
    }
}
