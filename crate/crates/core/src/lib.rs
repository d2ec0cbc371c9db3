//! Virtual-password authentication built on randomized linear response
//! functions.
//!
//! * [`scheme`]: the original (nonce-blinded) and modified (sealed-salt) response schemes.
//! * [`envelope`]: sealing salts and `(c, timestamp)` payloads to the server's public key.
//! * [`cryptanalysis`]: known-transcript key recovery and its exhaustive oracle.
//! * [`server`]: account store, login sessions, replay ledger, wire protocol.
//! * [`recovery`]: second-password gated secondary email and reset tokens.

pub mod alphabet;
pub mod clock;
pub mod cryptanalysis;
pub mod digits;
pub mod envelope;
pub mod modular;
pub mod par;
pub mod recovery;
pub mod scheme;
pub mod server;

pub use alphabet::Alphabet;
pub use par::Execution;
pub use server::store::{SchemeKind, Store};
pub use server::{AuthServer, RejectReason, Verdict};
pub use scheme::{OriginalOutcome, Response, Salt, SecretCredential, SessionNonce};
