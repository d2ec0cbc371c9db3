//! Stateful authentication service.
//!
//! [`AuthServer`] owns the account [`store::Store`], live challenge sessions,
//! and the per-account ledger of used nonces. It is a single-writer state
//! machine; [`net`] shares it across connections behind a mutex.

pub mod client;
pub mod net;
pub mod protocol;
pub mod store;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::clock::{Clock, Timestamp};
use crate::envelope::{decode_c_payload, decode_salt_payload, CipherRegistry, Envelope, EnvelopeError, KeyPair, PublicKey};
use crate::scheme::{
    compute_response_modified, compute_response_original, random_salt, verify_original_counted, OriginalOutcome,
    Response, Salt, SecretCredential, SessionNonce,
};
use store::{save_store, AccountRecord, CUsageEntry, SchemeKind, Store, StoreError};

/// Maximum clock skew accepted on a sealed `(c, timestamp)` payload, either direction.
pub const FRESHNESS_WINDOW: Duration = Duration::seconds(120);
/// Unconsumed sessions die after this long.
pub const SESSION_TTL: Duration = Duration::minutes(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    BadSession,
    BadResponse,
    BadEnvelope,
    StaleTimestamp,
    ReplayedC,
}

impl RejectReason {
    pub const ALL: [RejectReason; 5] = [
        RejectReason::BadSession,
        RejectReason::BadResponse,
        RejectReason::BadEnvelope,
        RejectReason::StaleTimestamp,
        RejectReason::ReplayedC,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::BadSession => "BAD-SESSION",
            RejectReason::BadResponse => "BAD-RESPONSE",
            RejectReason::BadEnvelope => "BAD-ENVELOPE",
            RejectReason::StaleTimestamp => "STALE-TIMESTAMP",
            RejectReason::ReplayedC => "REPLAYED-C",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    /// `detail` is for logs and callers; only the reason goes on the wire.
    Reject { reason: RejectReason, detail: String },
}

impl Verdict {
    fn reject(reason: RejectReason, detail: impl Into<String>) -> Self {
        Verdict::Reject { reason, detail: detail.into() }
    }

    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match self {
            Verdict::Accept => None,
            Verdict::Reject { reason, .. } => Some(*reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    /// 16 lowercase hex characters.
    pub session_id: String,
    pub username: String,
    /// Absent for modified-scheme accounts, which bring their own salt.
    pub issued_salt: Option<Salt>,
    pub issued_at: Timestamp,
    pub consumed: bool,
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("store has no server key; initialise it first")]
    NoServerKey,
    #[error("history is only available after a successful login")]
    Unauthenticated,
    #[error(transparent)]
    Store(StoreError),
    #[error("server key: {0}")]
    Envelope(#[from] EnvelopeError),
}

impl From<StoreError> for ServerError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownUser(u) => ServerError::UnknownUser(u),
            other => ServerError::Store(other),
        }
    }
}

/// A store carrying a freshly generated server key for `cipher_id`.
pub fn new_store_with_key<R: rand::RngCore + rand::CryptoRng>(
    cipher_id: &str,
    ciphers: &CipherRegistry,
    rng: &mut R,
) -> Result<Store, EnvelopeError> {
    let mut store = Store::new();
    store.set_server_key(ciphers.generate_keypair(cipher_id, rng)?);
    Ok(store)
}

pub struct AuthServer {
    store: Store,
    key: KeyPair,
    sessions: HashMap<String, SessionState>,
    rng: ChaCha20Rng,
    clock: Arc<dyn Clock>,
    ciphers: CipherRegistry,
    persist_to: Option<PathBuf>,
    computations: u64,
}

impl fmt::Debug for AuthServer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuthServer")
            .field("accounts", &self.store.len())
            .field("sessions", &self.sessions.len())
            .field("persist_to", &self.persist_to)
            .finish_non_exhaustive()
    }
}

impl AuthServer {
    pub fn new(store: Store, rng: ChaCha20Rng, clock: Arc<dyn Clock>) -> Result<Self, ServerError> {
        let key = store.server_key().cloned().ok_or(ServerError::NoServerKey)?;
        Ok(AuthServer {
            store,
            key,
            sessions: HashMap::new(),
            rng,
            clock,
            ciphers: CipherRegistry::default(),
            persist_to: None,
            computations: 0,
        })
    }

    /// Saves the store to `path` after every committed mutation.
    pub fn persist_to(mut self, path: impl Into<PathBuf>) -> Self {
        self.persist_to = Some(path.into());
        self
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Direct store access for administrative operations; call [`Self::commit`] afterwards.
    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    pub fn ciphers(&self) -> &CipherRegistry {
        &self.ciphers
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public_key()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Responses computed by verification so far.
    pub fn response_computations(&self) -> u64 {
        self.computations
    }

    /// Restarts the server's randomness, for reproducing a session.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha20Rng::seed_from_u64(seed);
    }

    pub fn session(&self, session_id: &str) -> Option<&SessionState> {
        self.sessions.get(session_id)
    }

    pub fn commit(&self) -> Result<(), StoreError> {
        match &self.persist_to {
            Some(path) => save_store(&self.store, path),
            None => Ok(()),
        }
    }

    pub fn register(
        &mut self,
        username: &str,
        credential: SecretCredential,
        alphabet_id: &str,
        scheme: SchemeKind,
    ) -> Result<AccountRecord, ServerError> {
        let record = self.store.register(username, credential, alphabet_id, scheme)?.clone();
        self.commit()?;
        Ok(record)
    }

    pub fn issue_challenge(&mut self, username: &str) -> Result<SessionState, ServerError> {
        let account = self.store.account(username)?;
        let (scheme, n, modulus) = (account.scheme, account.credential.len(), account.credential.modulus());
        let now = self.clock.now();
        self.sessions.retain(|_, s| !s.consumed && now - s.issued_at <= SESSION_TTL);

        let issued_salt = match scheme {
            SchemeKind::Original | SchemeKind::OriginalEncryptedC => {
                Some(random_salt(n, modulus, &mut self.rng).expect("stored credentials are valid"))
            }
            SchemeKind::Modified => None,
        };
        let session_id = loop {
            let id = hex::encode(self.rng.gen::<[u8; 8]>());
            if !self.sessions.contains_key(&id) {
                break id;
            }
        };
        let session = SessionState {
            session_id: session_id.clone(),
            username: username.to_string(),
            issued_salt,
            issued_at: now,
            consumed: false,
        };
        self.sessions.insert(session_id, session.clone());
        Ok(session)
    }

    /// Consumes the session whatever the outcome, so it yields one verdict at most.
    fn take_session(&mut self, session_id: &str, scheme: SchemeKind) -> Result<(SessionState, AccountRecord), Verdict> {
        let now = self.clock.now();
        let session = match self.sessions.get_mut(session_id) {
            None => return Err(Verdict::reject(RejectReason::BadSession, "unknown session")),
            Some(s) if s.consumed => return Err(Verdict::reject(RejectReason::BadSession, "session already used")),
            Some(s) => {
                s.consumed = true;
                s.clone()
            }
        };
        if now - session.issued_at > SESSION_TTL {
            return Err(Verdict::reject(RejectReason::BadSession, "session expired"));
        }
        let account = match self.store.account(&session.username) {
            Ok(a) => a.clone(),
            Err(_) => return Err(Verdict::reject(RejectReason::BadSession, "account no longer exists")),
        };
        if account.scheme != scheme {
            return Err(Verdict::reject(
                RejectReason::BadSession,
                format!("account uses {}, not {scheme}", account.scheme),
            ));
        }
        Ok((session, account))
    }

    fn check_response(account: &AccountRecord, response: &Response) -> Result<(), Verdict> {
        response
            .validate(account.credential.len(), account.credential.modulus())
            .map_err(|e| Verdict::reject(RejectReason::BadResponse, e.to_string()))
    }

    fn open(&self, envelope: &Envelope) -> Result<Vec<u8>, Verdict> {
        self.ciphers
            .open(&self.key, envelope)
            .map_err(|e| Verdict::reject(RejectReason::BadEnvelope, e.to_string()))
    }

    fn accept_with_c(&mut self, username: &str, c: u32) -> Result<Verdict, ServerError> {
        let now = self.clock.now();
        self.store.account_mut(username)?.record_c(c, now);
        self.commit()?;
        Ok(Verdict::Accept)
    }

    /// Original scheme: scans every nonce. Up to `Z` response computations.
    pub fn verify_login_original(&mut self, session_id: &str, response: &Response) -> Result<Verdict, ServerError> {
        let (session, account) = match self.take_session(session_id, SchemeKind::Original) {
            Ok(v) => v,
            Err(verdict) => return Ok(verdict),
        };
        if let Err(verdict) = Self::check_response(&account, response) {
            return Ok(verdict);
        }
        let salt = session.issued_salt.as_ref().expect("original sessions carry a salt");
        let (outcome, computed) =
            verify_original_counted(&account.credential, salt, response).expect("inputs validated");
        self.computations += u64::from(computed);
        match outcome {
            OriginalOutcome::Rejected => Ok(Verdict::reject(RejectReason::BadResponse, "no nonce reproduces the response")),
            OriginalOutcome::Accepted { c } if account.has_used_c(c.value()) => Ok(Verdict::reject(
                RejectReason::ReplayedC,
                format!("nonce {} was already used", c.value()),
            )),
            OriginalOutcome::Accepted { c } => self.accept_with_c(&account.username, c.value()),
        }
    }

    /// Original scheme with the nonce disclosed in a sealed payload. Exactly one
    /// response computation when the envelope, timestamp and nonce pass.
    pub fn verify_login_enc_c(
        &mut self,
        session_id: &str,
        response: &Response,
        envelope: &Envelope,
    ) -> Result<Verdict, ServerError> {
        let (session, account) = match self.take_session(session_id, SchemeKind::OriginalEncryptedC) {
            Ok(v) => v,
            Err(verdict) => return Ok(verdict),
        };
        let bytes = match self.open(envelope) {
            Ok(b) => b,
            Err(verdict) => return Ok(verdict),
        };
        let payload = match decode_c_payload(&bytes, account.credential.modulus()) {
            Ok(p) => p,
            Err(e) => return Ok(Verdict::reject(RejectReason::BadEnvelope, e.to_string())),
        };
        let skew = self.clock.now() - payload.timestamp;
        if skew.abs() > FRESHNESS_WINDOW {
            return Ok(Verdict::reject(
                RejectReason::StaleTimestamp,
                format!("timestamp is {}s away from server time", skew.num_seconds()),
            ));
        }
        if account.has_used_c(payload.c) {
            return Ok(Verdict::reject(RejectReason::ReplayedC, format!("nonce {} was already used", payload.c)));
        }
        if let Err(verdict) = Self::check_response(&account, response) {
            return Ok(verdict);
        }
        let salt = session.issued_salt.as_ref().expect("original sessions carry a salt");
        let nonce = SessionNonce::new(payload.c, account.credential.modulus()).expect("range checked");
        self.computations += 1;
        let expected = compute_response_original(&account.credential, salt, nonce).expect("inputs validated");
        if expected != *response {
            return Ok(Verdict::reject(RejectReason::BadResponse, "response does not match the sealed nonce"));
        }
        self.accept_with_c(&account.username, payload.c)
    }

    /// Modified scheme: the user's salt arrives sealed; no nonce, no ledger.
    pub fn verify_login_modified(
        &mut self,
        session_id: &str,
        response: &Response,
        envelope: &Envelope,
    ) -> Result<Verdict, ServerError> {
        let (_, account) = match self.take_session(session_id, SchemeKind::Modified) {
            Ok(v) => v,
            Err(verdict) => return Ok(verdict),
        };
        let bytes = match self.open(envelope) {
            Ok(b) => b,
            Err(verdict) => return Ok(verdict),
        };
        let cred = &account.credential;
        let salt = match decode_salt_payload(&bytes, cred.len(), cred.modulus()) {
            Ok(s) => s,
            Err(e) => return Ok(Verdict::reject(RejectReason::BadEnvelope, e.to_string())),
        };
        if let Err(verdict) = Self::check_response(&account, response) {
            return Ok(verdict);
        }
        self.computations += 1;
        if compute_response_modified(cred, &salt).expect("inputs validated") == *response {
            Ok(Verdict::Accept)
        } else {
            Ok(Verdict::reject(RejectReason::BadResponse, "response does not match the sealed salt"))
        }
    }

    /// Routes to the path for the session's account. A missing or superfluous
    /// envelope consumes the session and rejects.
    pub fn verify_login(
        &mut self,
        session_id: &str,
        response: &Response,
        envelope: Option<&Envelope>,
    ) -> Result<Verdict, ServerError> {
        let scheme = self
            .sessions
            .get(session_id)
            .and_then(|s| self.store.account(&s.username).ok())
            .map(|a| a.scheme);
        match (scheme, envelope) {
            (None, _) => Ok(Verdict::reject(RejectReason::BadSession, "unknown session")),
            (Some(SchemeKind::Original), None) => self.verify_login_original(session_id, response),
            (Some(SchemeKind::OriginalEncryptedC), Some(env)) => self.verify_login_enc_c(session_id, response, env),
            (Some(SchemeKind::Modified), Some(env)) => self.verify_login_modified(session_id, response, env),
            (Some(scheme), _) => {
                let first = self.take_session(session_id, scheme).err();
                Ok(first.unwrap_or_else(|| match scheme {
                    SchemeKind::Original => Verdict::reject(RejectReason::BadResponse, "unexpected envelope"),
                    _ => Verdict::reject(RejectReason::BadEnvelope, "missing envelope"),
                }))
            }
        }
    }

    /// Nonces used by `username`, oldest first. Refused unless the caller has logged in.
    pub fn c_history(&self, username: &str, authenticated: bool) -> Result<Vec<CUsageEntry>, ServerError> {
        if !authenticated {
            return Err(ServerError::Unauthenticated);
        }
        Ok(self.store.account(username)?.c_history.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::DECIMAL;
    use crate::clock::ManualClock;
    use crate::envelope::{encode_c_payload, encode_salt_payload, CPayload, TEST_TRANSPARENT};
    use crate::scheme::random_credential;

    struct Fixture {
        server: AuthServer,
        clock: Arc<ManualClock>,
        client_rng: ChaCha20Rng,
    }

    fn fixture() -> Fixture {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let store = new_store_with_key(TEST_TRANSPARENT, &CipherRegistry::default(), &mut rng).unwrap();
        let clock = Arc::new(ManualClock::at("2010-06-01T12:00:00Z"));
        let mut server = AuthServer::new(store, ChaCha20Rng::seed_from_u64(2), clock.clone()).unwrap();
        let x37 = || SecretCredential::new(vec![3, 7], 3, 10).unwrap();
        server.register("orig", x37(), DECIMAL, SchemeKind::Original).unwrap();
        server.register("encc", x37(), DECIMAL, SchemeKind::OriginalEncryptedC).unwrap();
        server.register("mod", x37(), DECIMAL, SchemeKind::Modified).unwrap();
        Fixture { server, clock, client_rng: ChaCha20Rng::seed_from_u64(3) }
    }

    impl Fixture {
        fn cred(&self, user: &str) -> SecretCredential {
            self.server.store().account(user).unwrap().credential.clone()
        }

        fn seal(&mut self, payload: &[u8]) -> Envelope {
            let key = self.server.public_key();
            self.server.ciphers().seal(&key, payload, &mut self.client_rng).unwrap()
        }

        fn seal_c(&mut self, c: u32, at: Timestamp) -> Envelope {
            self.seal(&encode_c_payload(&CPayload { c, timestamp: at }))
        }

        fn login_encc(&mut self, c: u32) -> Verdict {
            let s = self.server.issue_challenge("encc").unwrap();
            let k = compute_response_original(&self.cred("encc"), s.issued_salt.as_ref().unwrap(), SessionNonce::new(c, 10).unwrap()).unwrap();
            let env = self.seal_c(c, self.clock.now());
            self.server.verify_login_enc_c(&s.session_id, &k, &env).unwrap()
        }
    }

    fn reason(v: Verdict) -> RejectReason {
        v.reason().expect("expected a rejection")
    }

    #[test]
    fn challenge_shapes() {
        let mut f = fixture();
        let s = f.server.issue_challenge("orig").unwrap();
        assert_eq!(s.session_id.len(), 16);
        assert!(s.session_id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
        assert_eq!(s.issued_salt.as_ref().unwrap().len(), 2);
        assert!(f.server.issue_challenge("mod").unwrap().issued_salt.is_none());
        assert!(matches!(f.server.issue_challenge("nobody"), Err(ServerError::UnknownUser(_))));

        let mut g = fixture();
        assert_eq!(g.server.issue_challenge("orig").unwrap(), s);
    }

    #[test]
    fn original_round_trip_and_single_use() {
        let mut f = fixture();
        let s = f.server.issue_challenge("orig").unwrap();
        let k = compute_response_original(&f.cred("orig"), s.issued_salt.as_ref().unwrap(), SessionNonce::new(4, 10).unwrap()).unwrap();
        assert_eq!(f.server.verify_login_original(&s.session_id, &k).unwrap(), Verdict::Accept);
        let hist = f.server.c_history("orig", true).unwrap();
        assert_eq!(hist.len(), 1);
        assert_eq!(hist[0].c, 4);
        assert_eq!(reason(f.server.verify_login_original(&s.session_id, &k).unwrap()), RejectReason::BadSession);
        assert_eq!(reason(f.server.verify_login_original("0123456789abcdef", &k).unwrap()), RejectReason::BadSession);
    }

    #[test]
    fn original_length_mismatch_is_bad_response() {
        let mut f = fixture();
        let s = f.server.issue_challenge("orig").unwrap();
        let v = f.server.verify_login_original(&s.session_id, &Response(vec![1, 2, 3])).unwrap();
        assert_eq!(reason(v), RejectReason::BadResponse);
    }

    #[test]
    fn original_replay_of_matched_c() {
        let mut f = fixture();
        f.server.reseed(77);
        let s1 = f.server.issue_challenge("orig").unwrap();
        let y = s1.issued_salt.clone().unwrap();
        let k = compute_response_original(&f.cred("orig"), &y, SessionNonce::new(6, 10).unwrap()).unwrap();
        assert!(f.server.verify_login_original(&s1.session_id, &k).unwrap().is_accept());

        // Same seed reproduces the same salt; the response is replayed verbatim.
        f.server.reseed(77);
        let s2 = f.server.issue_challenge("orig").unwrap();
        assert_eq!(s2.issued_salt.as_ref(), Some(&y));
        assert_eq!(reason(f.server.verify_login_original(&s2.session_id, &k).unwrap()), RejectReason::ReplayedC);
        assert_eq!(f.server.c_history("orig", true).unwrap().len(), 1);
    }

    #[test]
    fn enc_c_paths() {
        let mut f = fixture();
        assert!(f.login_encc(4).is_accept());
        assert_eq!(reason(f.login_encc(4)), RejectReason::ReplayedC);
        assert!(f.login_encc(7).is_accept());
        assert!(f.login_encc(1).is_accept());
        let hist: Vec<u32> = f.server.c_history("encc", true).unwrap().iter().map(|e| e.c).collect();
        assert_eq!(hist, [4, 7, 1]);

        let s = f.server.issue_challenge("encc").unwrap();
        let k = compute_response_original(&f.cred("encc"), s.issued_salt.as_ref().unwrap(), SessionNonce::new(2, 10).unwrap()).unwrap();
        let old = f.clock.now() - Duration::minutes(10);
        let env = f.seal_c(2, old);
        assert_eq!(reason(f.server.verify_login_enc_c(&s.session_id, &k, &env).unwrap()), RejectReason::StaleTimestamp);

        let s = f.server.issue_challenge("encc").unwrap();
        let mut env = f.seal_c(2, f.clock.now());
        env.ciphertext[17] ^= 1;
        assert_eq!(reason(f.server.verify_login_enc_c(&s.session_id, &k, &env).unwrap()), RejectReason::BadEnvelope);
    }

    #[test]
    fn enc_c_freshness_boundary() {
        let mut f = fixture();
        for (offset, ok) in [(120, true), (-120, true), (121, false), (-121, false)] {
            let s = f.server.issue_challenge("encc").unwrap();
            let c = f.server.store().account("encc").unwrap().c_history.len() as u32;
            let k = compute_response_original(&f.cred("encc"), s.issued_salt.as_ref().unwrap(), SessionNonce::new(c, 10).unwrap()).unwrap();
            let env = f.seal_c(c, f.clock.now() + Duration::seconds(offset));
            let v = f.server.verify_login_enc_c(&s.session_id, &k, &env).unwrap();
            assert_eq!(v.is_accept(), ok, "offset {offset}: {v:?}");
        }
    }

    #[test]
    fn work_counts() {
        let mut f = fixture();
        let before = f.server.response_computations();
        assert!(f.login_encc(5).is_accept());
        assert_eq!(f.server.response_computations() - before, 1);

        let s = f.server.issue_challenge("orig").unwrap();
        let k = compute_response_original(&f.cred("orig"), s.issued_salt.as_ref().unwrap(), SessionNonce::new(9, 10).unwrap()).unwrap();
        let before = f.server.response_computations();
        f.server.verify_login_original(&s.session_id, &k).unwrap();
        assert_eq!(f.server.response_computations() - before, 10);
    }

    #[test]
    fn modified_paths() {
        let mut f = fixture();
        let s = f.server.issue_challenge("mod").unwrap();
        let env = f.seal(&encode_salt_payload(&Salt(vec![2, 9])));
        assert!(f.server.verify_login_modified(&s.session_id, &Response(vec![8, 3]), &env).unwrap().is_accept());
        assert!(f.server.c_history("mod", true).unwrap().is_empty());

        let s = f.server.issue_challenge("mod").unwrap();
        let mut bad = env.clone();
        let last = bad.ciphertext.len() - 1;
        bad.ciphertext[last] ^= 0x40;
        assert_eq!(reason(f.server.verify_login_modified(&s.session_id, &Response(vec![8, 3]), &bad).unwrap()), RejectReason::BadEnvelope);

        let s = f.server.issue_challenge("mod").unwrap();
        let short = f.seal(&encode_salt_payload(&Salt(vec![2, 9, 1])));
        match f.server.verify_login_modified(&s.session_id, &Response(vec![8, 3]), &short).unwrap() {
            Verdict::Reject { reason, detail } => {
                assert_eq!(reason, RejectReason::BadEnvelope);
                assert!(detail.contains("3 digits"), "{detail}");
            }
            v => panic!("{v:?}"),
        }

        let s = f.server.issue_challenge("mod").unwrap();
        assert_eq!(reason(f.server.verify_login_modified(&s.session_id, &Response(vec![8, 4]), &env).unwrap()), RejectReason::BadResponse);
    }

    #[test]
    fn dispatch_handles_envelope_mismatch() {
        let mut f = fixture();
        let s = f.server.issue_challenge("encc").unwrap();
        assert_eq!(reason(f.server.verify_login(&s.session_id, &Response(vec![1, 1]), None).unwrap()), RejectReason::BadEnvelope);
        assert_eq!(reason(f.server.verify_login(&s.session_id, &Response(vec![1, 1]), None).unwrap()), RejectReason::BadSession);
        let s = f.server.issue_challenge("orig").unwrap();
        let env = f.seal(b"x");
        assert_eq!(reason(f.server.verify_login(&s.session_id, &Response(vec![1, 1]), Some(&env)).unwrap()), RejectReason::BadResponse);
        let s = f.server.issue_challenge("mod").unwrap();
        assert_eq!(reason(f.server.verify_login_original(&s.session_id, &Response(vec![1, 1])).unwrap()), RejectReason::BadSession);
    }

    #[test]
    fn sessions_expire() {
        let mut f = fixture();
        let s = f.server.issue_challenge("orig").unwrap();
        f.clock.advance(Duration::minutes(11));
        let k = compute_response_original(&f.cred("orig"), s.issued_salt.as_ref().unwrap(), SessionNonce::new(0, 10).unwrap()).unwrap();
        assert_eq!(reason(f.server.verify_login_original(&s.session_id, &k).unwrap()), RejectReason::BadSession);
    }

    #[test]
    fn history_requires_authentication() {
        let f = fixture();
        assert!(matches!(f.server.c_history("orig", false), Err(ServerError::Unauthenticated)));
        assert!(f.server.c_history("orig", true).unwrap().is_empty());
    }

    #[test]
    fn path_equivalence() {
        // Same (salt, c, response) through ORIG and ORIG-ENC-C agree.
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut f = fixture();
            let cred = random_credential(2, 10, &mut rng).unwrap();
            f.server.store_mut().account_mut("orig").unwrap().credential = cred.clone();
            f.server.store_mut().account_mut("encc").unwrap().credential = cred.clone();
            let c: u32 = rng.gen_range(0..10);
            let honest: bool = rng.gen();
            f.server.reseed(5);
            let so = f.server.issue_challenge("orig").unwrap();
            f.server.reseed(5);
            let se = f.server.issue_challenge("encc").unwrap();
            let k = if honest {
                compute_response_original(&cred, so.issued_salt.as_ref().unwrap(), SessionNonce::new(c, 10).unwrap()).unwrap()
            } else {
                Response(vec![rng.gen_range(0..10), rng.gen_range(0..10)])
            };
            let vo = f.server.verify_login_original(&so.session_id, &k).unwrap();
            let env = f.seal_c(c, f.clock.now());
            let ve = f.server.verify_login_enc_c(&se.session_id, &k, &env).unwrap();
            if honest {
                assert!(vo.is_accept() && ve.is_accept());
            } else {
                // ENC-C pins c, so it can only be stricter.
                assert!(!ve.is_accept() || vo.is_accept());
            }
        }
    }

    #[test]
    fn persistence_on_commit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let mut f = fixture();
        f.server = AuthServer::new(f.server.store().clone(), ChaCha20Rng::seed_from_u64(2), f.clock.clone())
            .unwrap()
            .persist_to(&path);
        assert!(f.login_encc(3).is_accept());
        let loaded = store::load_store(&path).unwrap();
        assert_eq!(&loaded, f.server.store());
        assert_eq!(loaded.account("encc").unwrap().c_history[0].c, 3);
    }
}
