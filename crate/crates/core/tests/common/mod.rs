#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vpass_core::alphabet::{Alphabet, DECIMAL};
use vpass_core::clock::{Clock, ManualClock};
use vpass_core::envelope::{CipherRegistry, SEALED_BOX, TEST_TRANSPARENT};
use vpass_core::recovery;
use vpass_core::scheme::random_credential;
use vpass_core::server::client::{Client, LoginRequest};
use vpass_core::server::net::{spawn, SharedServer};
use vpass_core::server::new_store_with_key;
use vpass_core::{AuthServer, Salt, SchemeKind, SecretCredential, Store};

pub const START: &str = "2010-06-01T12:00:00Z";

pub fn x37() -> SecretCredential {
    SecretCredential::new(vec![3, 7], 3, 10).unwrap()
}

/// Server over the transparent cipher with accounts `orig`, `encc`, `mod`,
/// all holding X=3,7 a=3 over decimal digits.
pub fn seeded_server(seed: u64) -> (AuthServer, Arc<ManualClock>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let store = new_store_with_key(TEST_TRANSPARENT, &CipherRegistry::default(), &mut rng).unwrap();
    let clock = Arc::new(ManualClock::at(START));
    let mut server = AuthServer::new(store, ChaCha20Rng::seed_from_u64(seed + 1), clock.clone()).unwrap();
    for (name, scheme) in [("orig", SchemeKind::Original), ("encc", SchemeKind::OriginalEncryptedC), ("mod", SchemeKind::Modified)] {
        server.register(name, x37(), DECIMAL, scheme).unwrap();
    }
    (server, clock)
}

pub fn serve(server: AuthServer) -> (SocketAddr, SharedServer) {
    let shared = Arc::new(Mutex::new(server));
    (spawn("127.0.0.1:0", shared.clone()).unwrap(), shared)
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden").join(name)
}

/// Runs the canonical exchange for `user` and returns the transcript.
pub fn exchange(user: &str, scheme: SchemeKind) -> String {
    let (server, clock) = seeded_server(2026);
    let key = server.public_key();
    let (addr, _shared) = serve(server);
    let cred = x37();
    let mut client = Client::connect(addr).unwrap();
    let req = LoginRequest {
        username: user,
        credential: &cred,
        scheme,
        server_key: Some(&key),
        nonce: Some(4),
        salt: Some(Salt(vec![2, 9])),
    };
    let out = client
        .login(&req, &CipherRegistry::default(), &mut ChaCha20Rng::seed_from_u64(7), clock.as_ref())
        .unwrap();
    assert!(out.accepted(), "{}", client.transcript());
    client.history(&out.session_id).unwrap();
    client.transcript()
}

/// A store exercising every field: several alphabets, all schemes, ledgers,
/// recovery settings, used and pending tokens, outbox mail.
pub fn random_store(seed: u64) -> Store {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let clock = ManualClock::at("2010-06-01T12:00:00Z");
    let mut store = Store::new();
    if rng.gen() {
        let cipher = if rng.gen() { TEST_TRANSPARENT } else { SEALED_BOX };
        store.set_server_key(CipherRegistry::default().generate_keypair(cipher, &mut rng).unwrap());
    }
    store.add_alphabet("hex", Alphabet::new("0123456789abcdef").unwrap());
    let alphabets = ["decimal", "alnum36", "printable95", "hex"];
    for i in 0..rng.gen_range(0..6) {
        let alphabet_id = alphabets[rng.gen_range(0..alphabets.len())];
        let z = store.alphabet(alphabet_id).unwrap().size();
        let n = rng.gen_range(2..10);
        let cred = random_credential(n, z, &mut rng).unwrap();
        let scheme = SchemeKind::ALL[rng.gen_range(0..3)];
        let name = format!("user{i}-{}", rng.gen_range(0..1000));
        store.register(&name, cred, alphabet_id, scheme).unwrap();
        for _ in 0..rng.gen_range(0..5) {
            clock.advance(Duration::seconds(rng.gen_range(0..100_000)));
            store.account_mut(&name).unwrap().record_c(rng.gen_range(0..z), clock.now());
        }
        if rng.gen() {
            recovery::configure(&mut store, &name, &format!("{name}@mail.example"), "second pw with spaces").unwrap();
            for _ in 0..rng.gen_range(0..3) {
                let msg = if rng.gen() {
                    recovery::request_second_password_reset(&mut store, &name, &mut rng, &clock).unwrap()
                } else {
                    recovery::request_primary_reset(&mut store, &name, &mut rng, &clock).unwrap()
                };
                if rng.gen() && msg.kind == recovery::TokenKind::ResetSecondPassword {
                    recovery::complete_second_password_reset(&mut store, &msg.token, "new \"quoted\" pw", &clock).unwrap();
                }
            }
        }
    }
    store
}

