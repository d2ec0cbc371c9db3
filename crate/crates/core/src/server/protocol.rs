//! Line protocol. One command per `\n`-terminated UTF-8 line, fields separated
//! by single spaces, digit lists in comma form, envelopes as `<cipher_id>:<base64>`.
//!
//! ```text
//! C: HELLO v1 <username>
//! S: CHALLENGE <session_id> <y1,..,yn>   | SALTREQ <session_id> | ERR UNKNOWN-USER
//! C: RESPONSE <session_id> <k1,..,kn> [<envelope>]
//! S: ACCEPT <session_id>                 | REJECT <session_id> <reason>
//! C: HISTORY <session_id>
//! S: CUSED <c> <timestamp> ... END       | ERR UNAUTHENTICATED
//! ```
//!
//! Anything unparseable gets `ERR MALFORMED` and the connection closes.

use std::fmt;

use thiserror::Error;

use super::RejectReason;
use crate::clock::{format_timestamp, parse_timestamp, Timestamp};
use crate::digits::{format_digits, parse_digits};
use crate::envelope::Envelope;
use crate::scheme::{Response, Salt};

pub const PROTOCOL_VERSION: &str = "v1";
/// Longest line either side will read, newline included.
pub const MAX_LINE: usize = 16 * 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed line: {0}")]
pub struct ProtocolError(pub String);

fn malformed(msg: impl Into<String>) -> ProtocolError {
    ProtocolError(msg.into())
}

pub fn is_session_id(s: &str) -> bool {
    s.len() == 16 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn session_id(s: &str) -> Result<String, ProtocolError> {
    if is_session_id(s) {
        Ok(s.to_string())
    } else {
        Err(malformed(format!("bad session id {s:?}")))
    }
}

fn digits(s: &str) -> Result<Vec<u32>, ProtocolError> {
    parse_digits(s).map_err(|e| malformed(e.to_string()))
}

fn fields(line: &str) -> Result<Vec<&str>, ProtocolError> {
    if line.is_empty() {
        return Err(malformed("empty line"));
    }
    let parts: Vec<&str> = line.split(' ').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(malformed("fields must be separated by single spaces"));
    }
    Ok(parts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientMessage {
    Hello { username: String },
    Response { session_id: String, response: Response, envelope: Option<Envelope> },
    History { session_id: String },
}

impl ClientMessage {
    /// Parses one line without its terminator.
    pub fn parse(line: &str) -> Result<Self, ProtocolError> {
        match fields(line)?.as_slice() {
            ["HELLO", version, username] => {
                if *version != PROTOCOL_VERSION {
                    return Err(malformed(format!("unsupported version {version:?}")));
                }
                Ok(ClientMessage::Hello { username: username.to_string() })
            }
            ["RESPONSE", sid, k] => Ok(ClientMessage::Response {
                session_id: session_id(sid)?,
                response: Response(digits(k)?),
                envelope: None,
            }),
            ["RESPONSE", sid, k, env] => Ok(ClientMessage::Response {
                session_id: session_id(sid)?,
                response: Response(digits(k)?),
                envelope: Some(env.parse().map_err(|e: crate::envelope::EnvelopeError| malformed(e.to_string()))?),
            }),
            ["HISTORY", sid] => Ok(ClientMessage::History { session_id: session_id(sid)? }),
            _ => Err(malformed(format!("unrecognised command {:?}", line.split(' ').next().unwrap_or("")))),
        }
    }
}

impl fmt::Display for ClientMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClientMessage::Hello { username } => write!(f, "HELLO {PROTOCOL_VERSION} {username}"),
            ClientMessage::Response { session_id, response, envelope: None } => {
                write!(f, "RESPONSE {session_id} {response}")
            }
            ClientMessage::Response { session_id, response, envelope: Some(env) } => {
                write!(f, "RESPONSE {session_id} {response} {env}")
            }
            ClientMessage::History { session_id } => write!(f, "HISTORY {session_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerMessage {
    Challenge { session_id: String, salt: Salt },
    SaltReq { session_id: String },
    Accept { session_id: String },
    Reject { session_id: String, reason: RejectReason },
    CUsed { c: u32, used_at: Timestamp },
    End,
    UnknownUser,
    Unauthenticated,
    Malformed,
    Internal,
}

impl ServerMessage {
    pub fn parse(line: &str) -> Result<Self, ProtocolError> {
        match fields(line)?.as_slice() {
            ["CHALLENGE", sid, y] => Ok(ServerMessage::Challenge { session_id: session_id(sid)?, salt: Salt(digits(y)?) }),
            ["SALTREQ", sid] => Ok(ServerMessage::SaltReq { session_id: session_id(sid)? }),
            ["ACCEPT", sid] => Ok(ServerMessage::Accept { session_id: session_id(sid)? }),
            ["REJECT", sid, reason] => Ok(ServerMessage::Reject {
                session_id: session_id(sid)?,
                reason: RejectReason::from_code(reason).ok_or_else(|| malformed(format!("unknown reason {reason:?}")))?,
            }),
            ["CUSED", c, ts] => {
                let c = match digits(c)?.as_slice() {
                    [c] => *c,
                    _ => return Err(malformed("CUSED takes one nonce")),
                };
                let used_at = parse_timestamp(ts).ok_or_else(|| malformed(format!("bad timestamp {ts:?}")))?;
                Ok(ServerMessage::CUsed { c, used_at })
            }
            ["END"] => Ok(ServerMessage::End),
            ["ERR", "UNKNOWN-USER"] => Ok(ServerMessage::UnknownUser),
            ["ERR", "UNAUTHENTICATED"] => Ok(ServerMessage::Unauthenticated),
            ["ERR", "MALFORMED"] => Ok(ServerMessage::Malformed),
            ["ERR", "INTERNAL"] => Ok(ServerMessage::Internal),
            _ => Err(malformed(format!("unrecognised server line {line:?}"))),
        }
    }
}

impl fmt::Display for ServerMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServerMessage::Challenge { session_id, salt } => write!(f, "CHALLENGE {session_id} {}", format_digits(salt.digits())),
            ServerMessage::SaltReq { session_id } => write!(f, "SALTREQ {session_id}"),
            ServerMessage::Accept { session_id } => write!(f, "ACCEPT {session_id}"),
            ServerMessage::Reject { session_id, reason } => write!(f, "REJECT {session_id} {reason}"),
            ServerMessage::CUsed { c, used_at } => write!(f, "CUSED {c} {}", format_timestamp(used_at)),
            ServerMessage::End => f.write_str("END"),
            ServerMessage::UnknownUser => f.write_str("ERR UNKNOWN-USER"),
            ServerMessage::Unauthenticated => f.write_str("ERR UNAUTHENTICATED"),
            ServerMessage::Malformed => f.write_str("ERR MALFORMED"),
            ServerMessage::Internal => f.write_str("ERR INTERNAL"),
        }
    }
}
