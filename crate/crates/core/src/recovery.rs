//! Two-password account recovery.
//!
//! A second password gates changes to the secondary email address. Reset
//! tokens are "mailed" to that address through a per-account outbox, which
//! stands in for real delivery. Whoever reads the mailbox can reset the
//! primary credential; [`chained_compromise_scenario`] demonstrates exactly
//! that residual weakness.

use std::fmt;
use std::str::FromStr;

use chrono::Duration;
use rand::Rng;
use thiserror::Error;

use crate::clock::{Clock, Timestamp};
use crate::scheme::SecretCredential;
use crate::server::store::{StoreError, Store};

/// How long a reset token stays valid after issue.
pub const TOKEN_LIFETIME: Duration = Duration::hours(24);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecoveryError {
    #[error("WRONG-SECOND-PASSWORD: the presented second password does not match")]
    WrongSecondPassword,
    #[error("NO-RECOVERY-CONFIGURED: account has no secondary email")]
    NoRecoveryConfigured,
    #[error("ALREADY-CONFIGURED: recovery fields are already set")]
    AlreadyConfigured,
    #[error("UNKNOWN-TOKEN: no such reset token")]
    UnknownToken,
    #[error("TOKEN-USED: reset token was already consumed")]
    TokenUsed,
    #[error("TOKEN-EXPIRED: reset token is older than 24 hours")]
    TokenExpired,
    #[error("WRONG-KIND: token is a {found} token, expected {expected}")]
    WrongKind { expected: TokenKind, found: TokenKind },
    #[error("UNKNOWN-USER: {0:?}")]
    UnknownUser(String),
    #[error("INVALID-EMAIL: {0:?}")]
    InvalidEmail(String),
    #[error("INVALID-SECOND-PASSWORD: must not be empty")]
    InvalidSecondPassword,
    #[error("INVALID-CREDENTIAL: {0}")]
    InvalidCredential(String),
}

impl RecoveryError {
    /// Stable reason code, the text before the colon.
    pub fn code(&self) -> &'static str {
        match self {
            RecoveryError::WrongSecondPassword => "WRONG-SECOND-PASSWORD",
            RecoveryError::NoRecoveryConfigured => "NO-RECOVERY-CONFIGURED",
            RecoveryError::AlreadyConfigured => "ALREADY-CONFIGURED",
            RecoveryError::UnknownToken => "UNKNOWN-TOKEN",
            RecoveryError::TokenUsed => "TOKEN-USED",
            RecoveryError::TokenExpired => "TOKEN-EXPIRED",
            RecoveryError::WrongKind { .. } => "WRONG-KIND",
            RecoveryError::UnknownUser(_) => "UNKNOWN-USER",
            RecoveryError::InvalidEmail(_) => "INVALID-EMAIL",
            RecoveryError::InvalidSecondPassword => "INVALID-SECOND-PASSWORD",
            RecoveryError::InvalidCredential(_) => "INVALID-CREDENTIAL",
        }
    }
}

impl From<StoreError> for RecoveryError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownUser(u) => RecoveryError::UnknownUser(u),
            other => RecoveryError::InvalidCredential(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    ResetSecondPassword,
    ResetPrimaryCredential,
}

impl TokenKind {
    pub fn code(self) -> &'static str {
        match self {
            TokenKind::ResetSecondPassword => "RESET-SECOND-PASSWORD",
            TokenKind::ResetPrimaryCredential => "RESET-PRIMARY-CREDENTIAL",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TokenKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [TokenKind::ResetSecondPassword, TokenKind::ResetPrimaryCredential]
            .into_iter()
            .find(|k| k.code() == s)
            .ok_or_else(|| format!("unknown token kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResetToken {
    /// 32 lowercase hex characters.
    pub token: String,
    pub kind: TokenKind,
    pub issued_at: Timestamp,
    pub used: bool,
}

impl ResetToken {
    pub fn is_expired(&self, now: Timestamp) -> bool {
        now - self.issued_at > TOKEN_LIFETIME
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryFields {
    pub secondary_email: Option<String>,
    pub second_password: Option<String>,
    pub pending_tokens: Vec<ResetToken>,
}

impl RecoveryFields {
    pub fn is_configured(&self) -> bool {
        self.secondary_email.is_some()
    }
}

/// One mock email carrying a reset token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboxMessage {
    pub to: String,
    pub token: String,
    pub kind: TokenKind,
    pub sent_at: Timestamp,
}

fn check_email(email: &str) -> Result<(), RecoveryError> {
    let ok = email
        .split_once('@')
        .is_some_and(|(local, domain)| !local.is_empty() && !domain.is_empty() && !domain.contains('@'))
        && email.chars().all(|c| c.is_ascii_graphic());
    if ok {
        Ok(())
    } else {
        Err(RecoveryError::InvalidEmail(email.to_string()))
    }
}

/// Sets secondary email and second password together on an account that has neither.
pub fn configure(store: &mut Store, username: &str, email: &str, second_password: &str) -> Result<(), RecoveryError> {
    check_email(email)?;
    if second_password.is_empty() {
        return Err(RecoveryError::InvalidSecondPassword);
    }
    let account = store.account_mut(username)?;
    if account.recovery.is_configured() {
        return Err(RecoveryError::AlreadyConfigured);
    }
    account.recovery.secondary_email = Some(email.to_string());
    account.recovery.second_password = Some(second_password.to_string());
    Ok(())
}

pub fn change_secondary_email(
    store: &mut Store,
    username: &str,
    presented_second_password: &str,
    new_email: &str,
) -> Result<(), RecoveryError> {
    let account = store.account_mut(username)?;
    let stored = account.recovery.second_password.as_deref().ok_or(RecoveryError::NoRecoveryConfigured)?;
    if stored != presented_second_password {
        return Err(RecoveryError::WrongSecondPassword);
    }
    check_email(new_email)?;
    account.recovery.secondary_email = Some(new_email.to_string());
    Ok(())
}

fn fresh_token<R: Rng + ?Sized>(store: &Store, rng: &mut R) -> String {
    loop {
        let bytes: [u8; 16] = rng.gen();
        let token = hex::encode(bytes);
        if find_token(store, &token).is_none() {
            return token;
        }
    }
}

fn find_token(store: &Store, token: &str) -> Option<(String, usize)> {
    store.accounts().find_map(|a| {
        a.recovery
            .pending_tokens
            .iter()
            .position(|t| t.token == token)
            .map(|i| (a.username.clone(), i))
    })
}

fn request_reset<R: Rng + ?Sized>(
    store: &mut Store,
    username: &str,
    kind: TokenKind,
    rng: &mut R,
    clock: &dyn Clock,
) -> Result<OutboxMessage, RecoveryError> {
    let to = store
        .account(username)?
        .recovery
        .secondary_email
        .clone()
        .ok_or(RecoveryError::NoRecoveryConfigured)?;
    let token = fresh_token(store, rng);
    let now = clock.now();
    let account = store.account_mut(username)?;
    account.recovery.pending_tokens.push(ResetToken { token: token.clone(), kind, issued_at: now, used: false });
    let message = OutboxMessage { to, token, kind, sent_at: now };
    account.outbox.push(message.clone());
    Ok(message)
}

pub fn request_second_password_reset<R: Rng + ?Sized>(
    store: &mut Store,
    username: &str,
    rng: &mut R,
    clock: &dyn Clock,
) -> Result<OutboxMessage, RecoveryError> {
    request_reset(store, username, TokenKind::ResetSecondPassword, rng, clock)
}

pub fn request_primary_reset<R: Rng + ?Sized>(
    store: &mut Store,
    username: &str,
    rng: &mut R,
    clock: &dyn Clock,
) -> Result<OutboxMessage, RecoveryError> {
    request_reset(store, username, TokenKind::ResetPrimaryCredential, rng, clock)
}

/// Finds a usable token of `kind` without consuming it. Returns the owner.
fn redeemable(store: &Store, token: &str, kind: TokenKind, now: Timestamp) -> Result<(String, usize), RecoveryError> {
    let (username, index) = find_token(store, token).ok_or(RecoveryError::UnknownToken)?;
    let t = &store.account(&username)?.recovery.pending_tokens[index];
    if t.kind != kind {
        return Err(RecoveryError::WrongKind { expected: kind, found: t.kind });
    }
    if t.used {
        return Err(RecoveryError::TokenUsed);
    }
    if t.is_expired(now) {
        return Err(RecoveryError::TokenExpired);
    }
    Ok((username, index))
}

/// Consumes the token and installs the new second password. Returns the account name.
pub fn complete_second_password_reset(
    store: &mut Store,
    token: &str,
    new_second_password: &str,
    clock: &dyn Clock,
) -> Result<String, RecoveryError> {
    let (username, index) = redeemable(store, token, TokenKind::ResetSecondPassword, clock.now())?;
    if new_second_password.is_empty() {
        return Err(RecoveryError::InvalidSecondPassword);
    }
    let account = store.account_mut(&username)?;
    account.recovery.pending_tokens[index].used = true;
    account.recovery.second_password = Some(new_second_password.to_string());
    Ok(username)
}

/// Consumes the token, installs `new_credential` and clears the nonce ledger.
/// An invalid credential leaves the token unconsumed.
pub fn complete_primary_reset(
    store: &mut Store,
    token: &str,
    new_credential: SecretCredential,
    clock: &dyn Clock,
) -> Result<String, RecoveryError> {
    let (username, index) = redeemable(store, token, TokenKind::ResetPrimaryCredential, clock.now())?;
    let alphabet_id = store.account(&username)?.alphabet_id.clone();
    store
        .check_credential(&alphabet_id, &new_credential)
        .map_err(|e| RecoveryError::InvalidCredential(e.to_string()))?;
    let account = store.account_mut(&username)?;
    account.recovery.pending_tokens[index].used = true;
    account.credential = new_credential;
    account.c_history.clear();
    Ok(username)
}

/// All mock mail delivered to `address`, in delivery order per account.
pub fn mailbox<'s>(store: &'s Store, address: &str) -> Vec<&'s OutboxMessage> {
    let mut mail: Vec<&OutboxMessage> = store.accounts().flat_map(|a| a.outbox.iter()).filter(|m| m.to == address).collect();
    mail.sort_by_key(|m| m.sent_at);
    mail
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    /// The defence held; carries the reason code.
    Blocked(&'static str),
    Succeeded,
    /// The attacker cannot read the mailbox, so the step never starts.
    NotControlled,
    /// The account has no secondary email.
    Inapplicable,
}

impl fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepOutcome::Blocked(code) => write!(f, "blocked ({code})"),
            StepOutcome::Succeeded => f.write_str("succeeded"),
            StepOutcome::NotControlled => f.write_str("not attempted: mailbox not controlled"),
            StepOutcome::Inapplicable => f.write_str("inapplicable: no secondary email"),
        }
    }
}

/// Outcome of the mailbox-compromise walk-through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub username: String,
    /// (a) attacker holding the primary credential tries to redirect the secondary email.
    pub email_change: StepOutcome,
    /// (b) attacker reading the secondary mailbox resets the primary credential.
    pub primary_reset: StepOutcome,
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "account: {}", self.username)?;
        writeln!(f, "(a) change secondary email with primary credential only: {}", self.email_change)?;
        write!(f, "(b) primary reset via secondary mailbox: {}", self.primary_reset)
    }
}

/// Plays the attacker against `username`. The attacker knows the primary
/// credential, guesses `second_password_guess`, and reads every mailbox in
/// `attacker_mailboxes`. Mutates `store` exactly as the attack would.
pub fn chained_compromise_scenario<R: Rng + ?Sized>(
    store: &mut Store,
    username: &str,
    second_password_guess: &str,
    attacker_mailboxes: &[&str],
    rng: &mut R,
    clock: &dyn Clock,
) -> Result<ScenarioReport, RecoveryError> {
    let account = store.account(username)?;
    let Some(victim_mailbox) = account.recovery.secondary_email.clone() else {
        return Ok(ScenarioReport {
            username: username.to_string(),
            email_change: StepOutcome::Inapplicable,
            primary_reset: StepOutcome::Inapplicable,
        });
    };
    let stolen = account.credential.clone();
    let attacker_mailbox = attacker_mailboxes.first().copied().unwrap_or("attacker@evil.example");

    let email_change = match change_secondary_email(store, username, second_password_guess, attacker_mailbox) {
        Ok(()) => StepOutcome::Succeeded,
        Err(e) => StepOutcome::Blocked(e.code()),
    };

    let current_mailbox = store.account(username)?.recovery.secondary_email.clone().unwrap_or(victim_mailbox);
    let primary_reset = if !attacker_mailboxes.contains(&current_mailbox.as_str()) {
        StepOutcome::NotControlled
    } else {
        let sent = request_primary_reset(store, username, rng, clock)?;
        let intercepted = mailbox(store, &current_mailbox)
            .into_iter()
            .rev()
            .find(|m| m.kind == TokenKind::ResetPrimaryCredential && m.token == sent.token)
            .map(|m| m.token.clone());
        match intercepted {
            None => StepOutcome::NotControlled,
            Some(token) => {
                let modulus = stolen.modulus();
                let mut attacker_key = crate::scheme::random_credential(stolen.len(), modulus, rng)
                    .map_err(|e| RecoveryError::InvalidCredential(e.to_string()))?;
                while attacker_key == stolen {
                    attacker_key = crate::scheme::random_credential(stolen.len(), modulus, rng)
                        .map_err(|e| RecoveryError::InvalidCredential(e.to_string()))?;
                }
                match complete_primary_reset(store, &token, attacker_key.clone(), clock) {
                    Ok(_) if store.account(username)?.credential == attacker_key => StepOutcome::Succeeded,
                    Ok(_) => StepOutcome::Blocked("UNCHANGED"),
                    Err(e) => StepOutcome::Blocked(e.code()),
                }
            }
        }
    };
    Ok(ScenarioReport { username: username.to_string(), email_change, primary_reset })
}

/// Store with one account `alice` (X=3,7 a=3 over decimal). When
/// `with_recovery` is set, her secondary mailbox is `alice@mailbox-b.example`
/// and her second password `blue-heron`.
pub fn scenario_fixture(with_recovery: bool) -> Store {
    let mut store = Store::new();
    let cred = SecretCredential::new(vec![3, 7], 3, 10).expect("fixture credential");
    store
        .register("alice", cred, crate::alphabet::DECIMAL, crate::server::store::SchemeKind::OriginalEncryptedC)
        .expect("fixture account");
    if with_recovery {
        configure(&mut store, "alice", FIXTURE_MAILBOX, "blue-heron").expect("fixture recovery");
    }
    store
}

pub const FIXTURE_MAILBOX: &str = "alice@mailbox-b.example";
