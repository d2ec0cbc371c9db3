mod common;

use common::random_store;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vpass_core::recovery;
use vpass_core::scheme::random_credential;
use vpass_core::server::store::{load_store, save_store, StoreError};
use vpass_core::{SchemeKind, Store};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn save_load_is_identity(seed in any::<u64>()) {
        let store = random_store(seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        save_store(&store, &path).unwrap();
        prop_assert_eq!(load_store(&path).unwrap(), store);
    }
}

#[test]
fn save_overwrites_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    save_store(&random_store(1), &path).unwrap();
    let second = random_store(2);
    save_store(&second, &path).unwrap();
    assert_eq!(load_store(&path).unwrap(), second);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_store(&dir.path().join("nope.json")), Err(StoreError::Io(_))));
}

#[test]
fn recovery_invariant_checked_on_load() {
    let mut store = random_store(3);
    let name = "solo";
    store.register(name, random_credential(3, 10, &mut ChaCha20Rng::seed_from_u64(0)).unwrap(), "decimal", SchemeKind::Modified).unwrap();
    recovery::configure(&mut store, name, "solo@x.example", "pw").unwrap();
    let text = store.to_json().replace("\"second_password\": \"pw\"", "\"second_password\": null");
    match Store::from_json(&text) {
        Err(StoreError::Field { path, .. }) => assert!(path.ends_with(".recovery"), "{path}"),
        other => panic!("{other:?}"),
    }
}
