//! Stand-alone reader and writer for the vault byte layout, written from the
//! documented format and sharing no code with the library.
//!
//! meta:   "DSV1" | ver u8 | kdf u8 | salt[16] | t u32 | m u32 | p u32 | check[32]
//! file:   "DSF1" | ver u8 | prefix[7] | plain_len u64 | sealed chunks
//! chunk i (4096 plaintext bytes max): nonce = prefix | i u32 | last,
//!         aad = file header | i u32 | last, ciphertext = plaintext + 16 tag

#![allow(dead_code)]

use argon2::{Algorithm, Argon2, Params, Version};
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::ChaCha20Poly1305;

pub const HEADER: usize = 20;
pub const CHUNK: usize = 4096;
pub const TAG: usize = 16;
pub const META: usize = 66;

pub fn key_from_meta(meta: &[u8], pin: &str) -> [u8; 32] {
    assert_eq!(meta.len(), META, "meta length");
    assert_eq!(&meta[..4], b"DSV1");
    let salt = &meta[6..22];
    let word = |at: usize| u32::from_le_bytes(meta[at..at + 4].try_into().unwrap());
    let params = Params::new(word(26), word(22), word(30), Some(32)).unwrap();
    let mut key = [0u8; 32];
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
        .hash_password_into(pin.as_bytes(), salt, &mut key)
        .unwrap();
    key
}

pub fn check_key(meta: &[u8], key: &[u8; 32]) -> bool {
    let cipher = ChaCha20Poly1305::new(key.into());
    cipher
        .decrypt(
            &[0u8; 12].into(),
            Payload {
                msg: &meta[34..66],
                aad: b"DSV1-check",
            },
        )
        .map(|p| p == [0u8; 16])
        .unwrap_or(false)
}

fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK).max(1)
}

pub fn expected_len(n: usize) -> usize {
    HEADER + n + TAG * chunk_count(n)
}

fn nonce_and_aad(header: &[u8], i: u32, last: bool) -> ([u8; 12], Vec<u8>) {
    let mut nonce = [0u8; 12];
    nonce[..7].copy_from_slice(&header[5..12]);
    nonce[7..11].copy_from_slice(&i.to_le_bytes());
    nonce[11] = last as u8;
    let mut aad = header.to_vec();
    aad.extend_from_slice(&i.to_le_bytes());
    aad.push(last as u8);
    (nonce, aad)
}

pub fn encrypt(key: &[u8; 32], prefix: [u8; 7], plain: &[u8]) -> Vec<u8> {
    let cipher = ChaCha20Poly1305::new(key.into());
    let mut out = b"DSF1\x01".to_vec();
    out.extend_from_slice(&prefix);
    out.extend_from_slice(&(plain.len() as u64).to_le_bytes());
    let header = out.clone();
    let n = chunk_count(plain.len());
    for i in 0..n {
        let slice = &plain[(i * CHUNK).min(plain.len())..((i + 1) * CHUNK).min(plain.len())];
        let (nonce, aad) = nonce_and_aad(&header, i as u32, i + 1 == n);
        out.extend(cipher.encrypt(&nonce.into(), Payload { msg: slice, aad: &aad }).unwrap());
    }
    out
}

/// Decrypts, returning the plaintext or a description of the first failure.
pub fn decrypt(key: &[u8; 32], data: &[u8]) -> Result<Vec<u8>, String> {
    if data.len() < HEADER || &data[..5] != b"DSF1\x01" {
        return Err("header".into());
    }
    let header = &data[..HEADER];
    let plain_len = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    if data.len() != expected_len(plain_len) {
        return Err(format!("length {} != {}", data.len(), expected_len(plain_len)));
    }
    let cipher = ChaCha20Poly1305::new(key.into());
    let n = chunk_count(plain_len);
    let mut body = &data[HEADER..];
    let mut out = Vec::with_capacity(plain_len);
    for i in 0..n {
        let len = (plain_len - i * CHUNK).min(CHUNK) + TAG;
        let (nonce, aad) = nonce_and_aad(header, i as u32, i + 1 == n);
        let plain = cipher
            .decrypt(&nonce.into(), Payload { msg: &body[..len], aad: &aad })
            .map_err(|_| format!("auth chunk {i}"))?;
        out.extend(plain);
        body = &body[len..];
    }
    Ok(out)
}
