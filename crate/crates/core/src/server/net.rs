//! TCP front end: one thread per connection, one shared [`AuthServer`].

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;

use super::protocol::{ClientMessage, ServerMessage, MAX_LINE};
use super::{AuthServer, ServerError, Verdict};

pub type SharedServer = Arc<Mutex<AuthServer>>;

fn lock(server: &SharedServer) -> MutexGuard<'_, AuthServer> {
    // A panic mid-request leaves the state consistent enough to keep serving.
    server.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// What to send back for one client line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reply {
    pub lines: Vec<ServerMessage>,
    pub close: bool,
}

impl Reply {
    fn one(msg: ServerMessage) -> Self {
        Reply { lines: vec![msg], close: false }
    }

    fn closing(msg: ServerMessage) -> Self {
        Reply { lines: vec![msg], close: true }
    }
}

/// Per-connection protocol state.
pub struct Connection {
    server: SharedServer,
    /// Sessions accepted on this connection, with their account.
    accepted: HashMap<String, String>,
}

impl Connection {
    pub fn new(server: SharedServer) -> Self {
        Connection { server, accepted: HashMap::new() }
    }

    pub fn handle_line(&mut self, line: &str) -> Reply {
        let msg = match ClientMessage::parse(line) {
            Ok(m) => m,
            Err(_) => return Reply::closing(ServerMessage::Malformed),
        };
        let mut server = lock(&self.server);
        match msg {
            ClientMessage::Hello { username } => match server.issue_challenge(&username) {
                Ok(session) => Reply::one(match session.issued_salt {
                    Some(salt) => ServerMessage::Challenge { session_id: session.session_id, salt },
                    None => ServerMessage::SaltReq { session_id: session.session_id },
                }),
                Err(ServerError::UnknownUser(_)) => Reply::one(ServerMessage::UnknownUser),
                Err(_) => Reply::closing(ServerMessage::Internal),
            },
            ClientMessage::Response { session_id, response, envelope } => {
                let username = server.session(&session_id).map(|s| s.username.clone());
                match server.verify_login(&session_id, &response, envelope.as_ref()) {
                    Ok(Verdict::Accept) => {
                        if let Some(user) = username {
                            self.accepted.insert(session_id.clone(), user);
                        }
                        Reply::one(ServerMessage::Accept { session_id })
                    }
                    Ok(Verdict::Reject { reason, .. }) => Reply::one(ServerMessage::Reject { session_id, reason }),
                    Err(_) => Reply::closing(ServerMessage::Internal),
                }
            }
            ClientMessage::History { session_id } => {
                let Some(user) = self.accepted.get(&session_id) else {
                    return Reply::one(ServerMessage::Unauthenticated);
                };
                match server.c_history(user, true) {
                    Ok(entries) => {
                        let mut lines: Vec<ServerMessage> = entries
                            .into_iter()
                            .map(|e| ServerMessage::CUsed { c: e.c, used_at: e.used_at })
                            .collect();
                        lines.push(ServerMessage::End);
                        Reply { lines, close: false }
                    }
                    Err(_) => Reply::one(ServerMessage::Unauthenticated),
                }
            }
        }
    }
}

/// Reads one `\n`-terminated line of at most [`MAX_LINE`] bytes. `Ok(None)` at
/// end of stream; `Err(InvalidData)` for over-long or non-UTF-8 lines.
pub fn read_line<R: BufRead>(reader: &mut R) -> io::Result<Option<String>> {
    let mut buf = Vec::new();
    let n = reader.by_ref().take(MAX_LINE as u64).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    if buf.last() != Some(&b'\n') {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "line too long or unterminated"));
    }
    buf.pop();
    if buf.last() == Some(&b'\r') {
        buf.pop();
    }
    String::from_utf8(buf)
        .map(Some)
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "line is not UTF-8"))
}

/// Serves one client until it disconnects or sends a malformed line.
pub fn serve_stream<R: BufRead, W: Write>(server: SharedServer, mut reader: R, mut writer: W) -> io::Result<()> {
    let mut conn = Connection::new(server);
    loop {
        let reply = match read_line(&mut reader) {
            Ok(None) => return Ok(()),
            Ok(Some(line)) => conn.handle_line(&line),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => Reply::closing(ServerMessage::Malformed),
            Err(e) => return Err(e),
        };
        for msg in &reply.lines {
            writeln!(writer, "{msg}")?;
        }
        writer.flush()?;
        if reply.close {
            return Ok(());
        }
    }
}

pub fn serve_connection(server: SharedServer, stream: TcpStream) -> io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let result = serve_stream(server, reader, &stream);
    let _ = stream.shutdown(std::net::Shutdown::Both);
    result
}

/// Accepts forever, one thread per connection.
pub fn run(listener: TcpListener, server: SharedServer) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        let server = Arc::clone(&server);
        thread::spawn(move || {
            let _ = serve_connection(server, stream);
        });
    }
    Ok(())
}

/// Binds to `addr` (port 0 allowed) and serves in a background thread.
/// Returns the bound address.
pub fn spawn(addr: &str, server: SharedServer) -> io::Result<std::net::SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    thread::spawn(move || run(listener, server));
    Ok(local)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::DECIMAL;
    use crate::clock::ManualClock;
    use crate::envelope::{CipherRegistry, TEST_TRANSPARENT};
    use crate::scheme::SecretCredential;
    use crate::server::store::SchemeKind;
    use crate::server::new_store_with_key;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn shared() -> SharedServer {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let store = new_store_with_key(TEST_TRANSPARENT, &CipherRegistry::default(), &mut rng).unwrap();
        let clock = Arc::new(ManualClock::at("2010-06-01T12:00:00Z"));
        let mut server = AuthServer::new(store, ChaCha20Rng::seed_from_u64(2), clock).unwrap();
        let cred = SecretCredential::new(vec![3, 7], 3, 10).unwrap();
        server.register("alice", cred, DECIMAL, SchemeKind::Original).unwrap();
        Arc::new(Mutex::new(server))
    }

    fn exchange(input: &str) -> String {
        let mut out = Vec::new();
        serve_stream(shared(), input.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn unknown_user_then_malformed_closes() {
        let out = exchange("HELLO v1 bob\nNONSENSE\nHELLO v1 alice\n");
        assert_eq!(out, "ERR UNKNOWN-USER\nERR MALFORMED\n");
    }

    #[test]
    fn history_needs_accept_on_this_connection() {
        let out = exchange("HISTORY 0123456789abcdef\n");
        assert_eq!(out, "ERR UNAUTHENTICATED\n");
    }

    #[test]
    fn overlong_and_binary_lines_are_malformed() {
        let long = format!("HELLO v1 {}\n", "a".repeat(MAX_LINE));
        assert_eq!(exchange(&long), "ERR MALFORMED\n");
        let mut out = Vec::new();
        serve_stream(shared(), &b"HELLO v1 \xff\n"[..], &mut out).unwrap();
        assert_eq!(out, b"ERR MALFORMED\n");
    }

    #[test]
    fn crlf_tolerated() {
        assert!(exchange("HELLO v1 alice\r\n").starts_with("CHALLENGE "));
    }

    #[test]
    fn unknown_session_is_rejected_not_malformed() {
        assert_eq!(exchange("RESPONSE 0123456789abcdef 1,2\n"), "REJECT 0123456789abcdef BAD-SESSION\n");
    }
}
