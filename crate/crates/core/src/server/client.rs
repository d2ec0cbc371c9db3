//! Protocol client. Records every line sent and received so exchanges can be
//! compared byte for byte.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use super::net::read_line;
use super::protocol::{ClientMessage, ProtocolError, ServerMessage};
use super::store::{CUsageEntry, SchemeKind};
use crate::clock::Clock;
use crate::envelope::{encode_c_payload, encode_salt_payload, CPayload, CipherRegistry, EnvelopeError, PublicKey};
use crate::scheme::{
    compute_response_modified, compute_response_original, random_nonce, random_salt, Salt, SchemeError,
    SecretCredential, SessionNonce,
};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("network: {0}")]
    Io(#[from] io::Error),
    #[error("server closed the connection")]
    Closed,
    #[error("unknown user")]
    UnknownUser,
    #[error("server refused: {0}")]
    Refused(String),
    #[error("unexpected server line {0:?}")]
    Unexpected(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error("the {0} scheme needs the server's public key")]
    MissingServerKey(SchemeKind),
    #[error("server answered {got} but the account was expected to use {expected}")]
    SchemeMismatch { expected: SchemeKind, got: &'static str },
}

/// Inputs for one login. `nonce` and `salt` pin the otherwise random choices.
#[derive(Debug, Clone)]
pub struct LoginRequest<'a> {
    pub username: &'a str,
    pub credential: &'a SecretCredential,
    pub scheme: SchemeKind,
    pub server_key: Option<&'a PublicKey>,
    pub nonce: Option<u32>,
    pub salt: Option<Salt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginOutcome {
    pub session_id: String,
    /// The server's `ACCEPT` or `REJECT` line.
    pub verdict: ServerMessage,
}

impl LoginOutcome {
    pub fn accepted(&self) -> bool {
        matches!(self.verdict, ServerMessage::Accept { .. })
    }
}

pub struct Client<R, W> {
    reader: R,
    writer: W,
    transcript: Vec<String>,
}

impl Client<BufReader<TcpStream>, TcpStream> {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        Ok(Client::new(BufReader::new(stream.try_clone()?), stream))
    }
}

impl<R: BufRead, W: Write> Client<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Client { reader, writer, transcript: Vec::new() }
    }

    /// Every line so far, prefixed `C: ` or `S: `, newline-terminated.
    pub fn transcript(&self) -> String {
        self.transcript.iter().map(|l| format!("{l}\n")).collect()
    }

    pub fn send(&mut self, msg: &ClientMessage) -> Result<(), ClientError> {
        let line = msg.to_string();
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        self.transcript.push(format!("C: {line}"));
        Ok(())
    }

    pub fn recv(&mut self) -> Result<ServerMessage, ClientError> {
        let line = read_line(&mut self.reader)?.ok_or(ClientError::Closed)?;
        self.transcript.push(format!("S: {line}"));
        let msg = ServerMessage::parse(&line)?;
        match msg {
            ServerMessage::Malformed | ServerMessage::Internal => Err(ClientError::Refused(line)),
            _ => Ok(msg),
        }
    }

    pub fn login<G: RngCore + CryptoRng>(
        &mut self,
        req: &LoginRequest<'_>,
        ciphers: &CipherRegistry,
        rng: &mut G,
        clock: &dyn Clock,
    ) -> Result<LoginOutcome, ClientError> {
        let cred = req.credential;
        self.send(&ClientMessage::Hello { username: req.username.to_string() })?;
        let (session_id, response, envelope) = match (self.recv()?, req.scheme) {
            (ServerMessage::UnknownUser, _) => return Err(ClientError::UnknownUser),
            (ServerMessage::Challenge { session_id, salt }, SchemeKind::Original) => {
                let c = match req.nonce {
                    Some(c) => SessionNonce::new(c, cred.modulus())?,
                    None => random_nonce(cred.modulus(), rng)?,
                };
                (session_id, compute_response_original(cred, &salt, c)?, None)
            }
            (ServerMessage::Challenge { session_id, salt }, SchemeKind::OriginalEncryptedC) => {
                let key = req.server_key.ok_or(ClientError::MissingServerKey(req.scheme))?;
                let c = match req.nonce {
                    Some(c) => SessionNonce::new(c, cred.modulus())?,
                    None => random_nonce(cred.modulus(), rng)?,
                };
                let response = compute_response_original(cred, &salt, c)?;
                let payload = encode_c_payload(&CPayload { c: c.value(), timestamp: clock.now() });
                (session_id, response, Some(ciphers.seal(key, &payload, rng)?))
            }
            (ServerMessage::SaltReq { session_id }, SchemeKind::Modified) => {
                let key = req.server_key.ok_or(ClientError::MissingServerKey(req.scheme))?;
                let salt = match &req.salt {
                    Some(s) => s.clone(),
                    None => random_salt(cred.len(), cred.modulus(), rng)?,
                };
                let response = compute_response_modified(cred, &salt)?;
                (session_id, response, Some(ciphers.seal(key, &encode_salt_payload(&salt), rng)?))
            }
            (ServerMessage::Challenge { .. }, expected) => {
                return Err(ClientError::SchemeMismatch { expected, got: "CHALLENGE" })
            }
            (ServerMessage::SaltReq { .. }, expected) => return Err(ClientError::SchemeMismatch { expected, got: "SALTREQ" }),
            (other, _) => return Err(ClientError::Unexpected(other.to_string())),
        };
        self.send(&ClientMessage::Response { session_id: session_id.clone(), response, envelope })?;
        match self.recv()? {
            verdict @ (ServerMessage::Accept { .. } | ServerMessage::Reject { .. }) => Ok(LoginOutcome { session_id, verdict }),
            other => Err(ClientError::Unexpected(other.to_string())),
        }
    }

    /// Fetches the nonce ledger; only valid after this connection's login was accepted.
    pub fn history(&mut self, session_id: &str) -> Result<Vec<CUsageEntry>, ClientError> {
        self.send(&ClientMessage::History { session_id: session_id.to_string() })?;
        let mut entries = Vec::new();
        loop {
            match self.recv()? {
                ServerMessage::CUsed { c, used_at } => entries.push(CUsageEntry { c, used_at }),
                ServerMessage::End => return Ok(entries),
                ServerMessage::Unauthenticated => return Err(ClientError::Refused("ERR UNAUTHENTICATED".into())),
                other => return Err(ClientError::Unexpected(other.to_string())),
            }
        }
    }
}
