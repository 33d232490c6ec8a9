//! Vault files on disk, checked against the stand-alone layout oracle.

mod common;

use std::fs;
use std::path::Path;

use common::{vault_oracle as oracle, wait_for, Gate};
use morphvault::vault::stream::{decrypt_bytes, encrypt_bytes};
use morphvault::vault::{
    ciphertext_len, Direction, EntryState, KdfParams, Vault, VaultError, LOCKED_DIR, META_FILE, OPEN_DIR,
};
use rand::{Rng, RngCore, SeedableRng};

const PIN: &str = "4711";
const FAST: KdfParams = KdfParams::insecure_fast();

fn new_vault(dir: &Path) -> Vault {
    Vault::init(dir, PIN, FAST).unwrap();
    Vault::open(dir, PIN).unwrap()
}

fn write(dir: &Path, name: &str, data: &[u8]) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, data).unwrap();
    p
}

fn only_locked_file(vault_dir: &Path) -> Vec<u8> {
    let files: Vec<_> = fs::read_dir(vault_dir.join(LOCKED_DIR)).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    fs::read(&files[0]).unwrap()
}

#[test]
fn oracle_decrypts_library_output_and_back() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(6);
    let key: [u8; 32] = rng.gen();
    for _ in 0..100 {
        let len = match rng.gen_range(0..4) {
            0 => rng.gen_range(0..64),
            1 => 4096 * rng.gen_range(1..4) + rng.gen_range(0..2) - 1,
            _ => rng.gen_range(0..20_000),
        };
        let mut data = vec![0u8; len];
        rng.fill_bytes(&mut data);
        let ct = encrypt_bytes(&key, &data);
        assert_eq!(ct.len(), oracle::expected_len(len));
        assert_eq!(oracle::decrypt(&key, &ct).unwrap(), data);
        let theirs = oracle::encrypt(&key, rng.gen(), &data);
        assert_eq!(decrypt_bytes(&key, &theirs).unwrap(), data);
    }
}

#[test]
fn locked_file_readable_by_oracle_from_meta() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let vault = new_vault(&dir);
    let data: Vec<u8> = (0..9000u32).map(|i| (i * 7) as u8).collect();
    let src = write(tmp.path(), "photo.jpg", &data);
    vault.lock_file(&src).unwrap();
    vault.wait_idle();
    assert!(!src.exists());

    let meta = fs::read(dir.join(META_FILE)).unwrap();
    let key = oracle::key_from_meta(&meta, PIN);
    assert!(oracle::check_key(&meta, &key));
    assert!(!oracle::check_key(&meta, &oracle::key_from_meta(&meta, "4712")));
    let ct = only_locked_file(&dir);
    assert_eq!(ct.len() as u64, ciphertext_len(data.len() as u64));
    assert_eq!(oracle::decrypt(&key, &ct).unwrap(), data);
}

#[test]
fn lock_unlock_roundtrip_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let vault = new_vault(&dir);
    let src = write(tmp.path(), "notes.txt", b"secret notes");
    vault.lock_file(&src).unwrap();
    vault.wait_idle();
    let entries = vault.entries();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].state, EntryState::Locked);
    assert_eq!(entries[0].size_plain, 12);
    assert_eq!(entries[0].stored_name.len(), 20);

    let again = write(tmp.path(), "notes.txt", b"other");
    assert_eq!(vault.lock_file(&again).unwrap_err(), VaultError::DuplicateName("notes.txt".into()));
    assert!(matches!(vault.lock_file(&tmp.path().join("nope")), Err(VaultError::SourceMissing(_))));

    vault.unlock_file("notes.txt").unwrap();
    vault.wait_idle();
    assert_eq!(fs::read(dir.join(OPEN_DIR).join("notes.txt")).unwrap(), b"secret notes");
    assert_eq!(vault.entries()[0].state, EntryState::Unlocked);
    assert_eq!(vault.unlock_file("notes.txt").unwrap_err(), VaultError::NotLocked("notes.txt".into()));
    assert_eq!(vault.destroy_entry("notes.txt").unwrap_err(), VaultError::NotLocked("notes.txt".into()));
    assert_eq!(vault.unlock_file("nosuch").unwrap_err(), VaultError::EntryNotFound("nosuch".into()));
    assert_eq!(vault.destroy_entry("nosuch").unwrap_err(), VaultError::EntryNotFound("nosuch".into()));

    // ciphertext is retained while unlocked
    assert_eq!(fs::read_dir(dir.join(LOCKED_DIR)).unwrap().count(), 1);
    assert_eq!(vault.lock_all(), 1);
    vault.wait_idle();
    assert!(!dir.join(OPEN_DIR).join("notes.txt").exists());
    assert_eq!(vault.lock_all(), 0);

    vault.destroy_entry("notes.txt").unwrap();
    assert!(vault.entries().is_empty());
    assert_eq!(fs::read_dir(dir.join(LOCKED_DIR)).unwrap().count(), 0);
    assert!(vault.take_outcomes().iter().all(|o| o.result.is_ok()));
}

#[test]
fn index_persists_across_reopen() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    {
        let vault = new_vault(&dir);
        vault.lock_file(&write(tmp.path(), "a", b"1")).unwrap();
        vault.lock_file(&write(tmp.path(), "b", b"22")).unwrap();
        vault.close();
    }
    let vault = Vault::open(&dir, PIN).unwrap();
    let names: Vec<_> = vault.entries().into_iter().map(|e| (e.original_name, e.size_plain)).collect();
    assert_eq!(names, [("a".to_string(), 1), ("b".to_string(), 2)]);
    drop(vault);
    assert_eq!(Vault::open(&dir, "0000").unwrap_err(), VaultError::PinRejected);
}

#[test]
fn init_and_open_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    Vault::init(&dir, PIN, FAST).unwrap();
    assert_eq!(Vault::init(&dir, PIN, FAST).unwrap_err(), VaultError::VaultExists);
    assert_eq!(Vault::init(&dir, "12ab", FAST).unwrap_err(), VaultError::VaultExists);
    assert_eq!(Vault::init(&tmp.path().join("w"), "12ab", FAST).unwrap_err(), VaultError::BadPinFormat);
    assert_eq!(Vault::open(&tmp.path().join("none"), PIN).unwrap_err(), VaultError::NoVault);
    let first = Vault::open(&dir, PIN).unwrap();
    assert!(matches!(Vault::open(&dir, PIN), Err(VaultError::VaultBusy(_))));
    drop(first);
    Vault::open(&dir, PIN).unwrap();
}

#[test]
fn tampered_locked_file_does_not_unlock() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let vault = new_vault(&dir);
    vault.lock_file(&write(tmp.path(), "x", &[5u8; 5000])).unwrap();
    vault.wait_idle();
    let path = fs::read_dir(dir.join(LOCKED_DIR)).unwrap().next().unwrap().unwrap().path();
    let mut ct = fs::read(&path).unwrap();
    ct[4200] ^= 0x80;
    fs::write(&path, ct).unwrap();
    vault.unlock_file("x").unwrap();
    vault.wait_idle();
    let outcome = vault.take_outcomes().pop().unwrap();
    assert_eq!(outcome.result, Err(VaultError::AuthFailed(1)));
    assert_eq!(vault.entries()[0].state, EntryState::Locked);
    assert_eq!(fs::read_dir(dir.join(OPEN_DIR)).unwrap().count(), 0);
}

#[test]
fn queue_is_fifo() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let gate = Gate::default();
    Vault::init(&dir, PIN, FAST).unwrap();
    let vault = Vault::open_with_hook(&dir, PIN, Some(gate.hook("first"))).unwrap();
    let names = ["first", "b", "c", "d", "e"];
    let ids: Vec<u64> = names
        .iter()
        .map(|n| vault.lock_file(&write(tmp.path(), n, n.as_bytes())).unwrap().id)
        .collect();
    wait_for(|| vault.in_flight().is_some());
    assert_eq!(vault.pending().len(), 4);
    gate.release();
    vault.wait_idle();
    let done: Vec<u64> = vault.take_outcomes().iter().map(|o| o.task.id).collect();
    assert_eq!(done, ids);
    let order: Vec<_> = vault.entries().into_iter().map(|e| e.original_name).collect();
    assert_eq!(order, names);
}

#[test]
fn cancel_discards_pending_and_finishes_current() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let gate = Gate::default();
    Vault::init(&dir, PIN, FAST).unwrap();
    let vault = Vault::open_with_hook(&dir, PIN, Some(gate.hook("big.bin"))).unwrap();
    let big = vec![0xAB; 64 * 1024];
    vault.lock_file(&write(tmp.path(), "big.bin", &big)).unwrap();
    wait_for(|| vault.in_flight().is_some());
    let b = write(tmp.path(), "b.txt", b"b");
    let c = write(tmp.path(), "c.txt", b"c");
    vault.lock_file(&b).unwrap();
    vault.lock_file(&c).unwrap();

    let status = vault.status();
    assert_eq!(status.processing, 1);
    assert_eq!(status.pending, 2);
    assert_eq!(status.entries[0].state, Some(EntryState::Processing));
    assert_eq!(status.entries[1].pending, Some(Direction::Lock));

    assert_eq!(vault.cancel(), 2);
    assert_eq!(vault.cancel(), 0);
    gate.release();
    vault.wait_idle();
    let outcomes = vault.take_outcomes();
    assert_eq!(outcomes.len(), 1);
    assert_eq!(outcomes[0].task.name, "big.bin");
    assert!(outcomes[0].result.is_ok());
    assert!(b.exists() && c.exists());
    let entries = vault.entries();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].state, EntryState::Locked);

    let key = oracle::key_from_meta(&fs::read(dir.join(META_FILE)).unwrap(), PIN);
    assert_eq!(oracle::decrypt(&key, &only_locked_file(&dir)).unwrap(), big);
}

#[test]
fn lock_all_skips_in_flight_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let gate = Gate::default();
    Vault::init(&dir, PIN, FAST).unwrap();
    {
        let v = Vault::open(&dir, PIN).unwrap();
        for n in ["x", "y", "z"] {
            v.lock_file(&write(tmp.path(), n, &[1u8; 10_000])).unwrap();
        }
        v.wait_idle();
        v.unlock_file("y").unwrap();
        v.close();
    }
    let vault = Vault::open_with_hook(&dir, PIN, Some(gate.hook("x"))).unwrap();
    vault.unlock_file("x").unwrap();
    wait_for(|| vault.in_flight().is_some());
    // x is Processing, y is Unlocked, z is Locked
    assert_eq!(vault.lock_all(), 1);
    assert_eq!(vault.pending()[0].name, "y");
    gate.release();
    vault.wait_idle();
    let states: Vec<_> = vault.entries().into_iter().map(|e| e.state).collect();
    assert_eq!(states, [EntryState::Unlocked, EntryState::Locked, EntryState::Locked]);
}

#[test]
fn queued_entry_rejects_second_request() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("v");
    let gate = Gate::default();
    Vault::init(&dir, PIN, FAST).unwrap();
    let vault = Vault::open_with_hook(&dir, PIN, Some(gate.hook("a"))).unwrap();
    vault.lock_file(&write(tmp.path(), "a", &[0u8; 100])).unwrap();
    wait_for(|| vault.in_flight().is_some());
    assert_eq!(vault.unlock_file("a").unwrap_err(), VaultError::AlreadyQueued("a".into()));
    gate.release();
    vault.wait_idle();
}
