//! Chunked ChaCha20-Poly1305 file format.
//!
//! ```text
//! header   "DSF1" | version u8 | nonce prefix [7] | plain_len u64le
//! chunk i  seal(key, prefix | i u32le | last, header | i u32le | last, slice)
//! ```
//!
//! Plaintext is cut into 4096-byte slices; an empty file still gets one
//! (empty) final chunk.

use std::io::{self, Read, Write};

use chacha20poly1305::aead::{AeadInPlace, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce, Tag};
use rand::RngCore;

use super::VaultError;

pub const FILE_MAGIC: &[u8; 4] = b"DSF1";
pub const FILE_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 20;
pub const CHUNK_LEN: usize = 4096;
pub const TAG_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub nonce_prefix: [u8; 7],
    pub plain_len: u64,
}

impl FileHeader {
    /// A header with a fresh random nonce prefix.
    pub fn new(plain_len: u64) -> Self {
        let mut nonce_prefix = [0u8; 7];
        rand::thread_rng().fill_bytes(&mut nonce_prefix);
        Self {
            nonce_prefix,
            plain_len,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(FILE_MAGIC);
        out[4] = FILE_VERSION;
        out[5..12].copy_from_slice(&self.nonce_prefix);
        out[12..].copy_from_slice(&self.plain_len.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8; HEADER_LEN]) -> Result<Self, VaultError> {
        if &bytes[..4] != FILE_MAGIC {
            return Err(VaultError::BadHeader("bad magic".into()));
        }
        if bytes[4] != FILE_VERSION {
            return Err(VaultError::BadHeader(format!("unsupported version {}", bytes[4])));
        }
        Ok(Self {
            nonce_prefix: bytes[5..12].try_into().unwrap(),
            plain_len: u64::from_le_bytes(bytes[12..].try_into().unwrap()),
        })
    }

    pub fn chunk_count(&self) -> u64 {
        chunk_count(self.plain_len)
    }
}

pub fn chunk_count(plain_len: u64) -> u64 {
    plain_len.div_ceil(CHUNK_LEN as u64).max(1)
}

/// Exact size of the encrypted form of `plain_len` bytes.
pub fn ciphertext_len(plain_len: u64) -> u64 {
    HEADER_LEN as u64 + plain_len + TAG_LEN as u64 * chunk_count(plain_len)
}

fn chunk_nonce(header: &FileHeader, index: u32, last: bool) -> Nonce {
    let mut n = [0u8; 12];
    n[..7].copy_from_slice(&header.nonce_prefix);
    n[7..11].copy_from_slice(&index.to_le_bytes());
    n[11] = last as u8;
    n.into()
}

fn chunk_aad(header_bytes: &[u8; HEADER_LEN], index: u32, last: bool) -> [u8; HEADER_LEN + 5] {
    let mut aad = [0u8; HEADER_LEN + 5];
    aad[..HEADER_LEN].copy_from_slice(header_bytes);
    aad[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&index.to_le_bytes());
    aad[HEADER_LEN + 4] = last as u8;
    aad
}

/// Reads until `buf` is full or the source ends; returns bytes read.
fn read_full(src: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn io_at(offset: u64) -> impl Fn(io::Error) -> VaultError {
    move |e| VaultError::Io {
        offset: Some(offset),
        message: e.to_string(),
    }
}

/// Encrypts exactly `header.plain_len` bytes from `src` into `sink`.
/// `progress` is called with the plaintext byte count after each chunk.
pub fn encrypt_stream(
    key: &[u8; 32],
    header: &FileHeader,
    src: &mut impl Read,
    sink: &mut impl Write,
    mut progress: impl FnMut(u64),
) -> Result<(), VaultError> {
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    let header_bytes = header.to_bytes();
    sink.write_all(&header_bytes).map_err(io_at(0))?;
    let n = header.chunk_count();
    let mut buf = vec![0u8; CHUNK_LEN + TAG_LEN];
    let mut done = 0u64;
    for i in 0..n {
        let want = (header.plain_len - done).min(CHUNK_LEN as u64) as usize;
        let got = read_full(src, &mut buf[..want]).map_err(io_at(done))?;
        if got != want {
            return Err(VaultError::Io {
                offset: Some(done + got as u64),
                message: "source ended early".into(),
            });
        }
        let last = i + 1 == n;
        let tag = cipher
            .encrypt_in_place_detached(
                &chunk_nonce(header, i as u32, last),
                &chunk_aad(&header_bytes, i as u32, last),
                &mut buf[..want],
            )
            .expect("chunk below AEAD size limit");
        buf[want..want + TAG_LEN].copy_from_slice(&tag);
        sink.write_all(&buf[..want + TAG_LEN])
            .map_err(io_at(HEADER_LEN as u64 + done + i * TAG_LEN as u64))?;
        done += want as u64;
        progress(done);
    }
    if read_full(src, &mut [0u8; 1]).map_err(io_at(done))? != 0 {
        return Err(VaultError::Io {
            offset: Some(done),
            message: "source longer than declared".into(),
        });
    }
    Ok(())
}

/// Decrypts a stream produced by [`encrypt_stream`]. Only authenticated
/// plaintext reaches `sink`. Returns the header.
pub fn decrypt_stream(
    key: &[u8; 32],
    src: &mut impl Read,
    sink: &mut impl Write,
    mut progress: impl FnMut(u64),
) -> Result<FileHeader, VaultError> {
    let mut header_bytes = [0u8; HEADER_LEN];
    let got = read_full(src, &mut header_bytes).map_err(io_at(0))?;
    if got < HEADER_LEN {
        return Err(VaultError::BadHeader(format!("{got} bytes is too short for a header")));
    }
    let header = FileHeader::parse(&header_bytes)?;
    let cipher = ChaCha20Poly1305::new(Key::from_slice(key));
    let n = header.chunk_count();
    let mut buf = vec![0u8; CHUNK_LEN + TAG_LEN];
    let mut done = 0u64;
    let mut offset = HEADER_LEN as u64;
    for i in 0..n {
        let plain = (header.plain_len - done).min(CHUNK_LEN as u64) as usize;
        let got = read_full(src, &mut buf[..plain + TAG_LEN]).map_err(io_at(offset))?;
        if got < plain + TAG_LEN {
            return Err(VaultError::TruncatedStream);
        }
        let last = i + 1 == n;
        let tag = *Tag::from_slice(&buf[plain..plain + TAG_LEN]);
        cipher
            .decrypt_in_place_detached(
                &chunk_nonce(&header, i as u32, last),
                &chunk_aad(&header_bytes, i as u32, last),
                &mut buf[..plain],
                &tag,
            )
            .map_err(|_| VaultError::AuthFailed(i))?;
        sink.write_all(&buf[..plain]).map_err(io_at(done))?;
        done += plain as u64;
        offset += (plain + TAG_LEN) as u64;
        progress(done);
    }
    if read_full(src, &mut [0u8; 1]).map_err(io_at(offset))? != 0 {
        return Err(VaultError::TrailingData);
    }
    Ok(header)
}

/// In-memory convenience wrapper around [`encrypt_stream`].
pub fn encrypt_bytes(key: &[u8; 32], plain: &[u8]) -> Vec<u8> {
    let header = FileHeader::new(plain.len() as u64);
    let mut out = Vec::with_capacity(ciphertext_len(plain.len() as u64) as usize);
    encrypt_stream(key, &header, &mut &plain[..], &mut out, |_| {}).expect("in-memory streams");
    out
}

/// In-memory convenience wrapper around [`decrypt_stream`].
pub fn decrypt_bytes(key: &[u8; 32], data: &[u8]) -> Result<Vec<u8>, VaultError> {
    let mut out = Vec::new();
    decrypt_stream(key, &mut &data[..], &mut out, |_| {})?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const KEY: [u8; 32] = [7; 32];

    #[test]
    fn lengths() {
        for (n, chunks) in [(0u64, 1u64), (1, 1), (4095, 1), (4096, 1), (4097, 2), (8192, 2)] {
            assert_eq!(chunk_count(n), chunks);
            assert_eq!(encrypt_bytes(&KEY, &vec![0; n as usize]).len() as u64, ciphertext_len(n));
        }
        assert_eq!(ciphertext_len(0), 36);
        assert_eq!(ciphertext_len(4096), 20 + 4096 + 16);
    }

    #[test]
    fn swapped_chunks_fail_at_zero() {
        let ct = encrypt_bytes(&KEY, &[1u8; 8192]);
        let (h, body) = ct.split_at(HEADER_LEN);
        let (a, b) = body.split_at(CHUNK_LEN + TAG_LEN);
        let swapped = [h, b, a].concat();
        assert_eq!(decrypt_bytes(&KEY, &swapped).unwrap_err(), VaultError::AuthFailed(0));
    }

    #[test]
    fn dropped_final_chunk_is_truncation() {
        let ct = encrypt_bytes(&KEY, &[1u8; 5000]);
        let cut = HEADER_LEN + CHUNK_LEN + TAG_LEN;
        assert_eq!(decrypt_bytes(&KEY, &ct[..cut]).unwrap_err(), VaultError::TruncatedStream);
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut ct = encrypt_bytes(&KEY, b"abc");
        ct.push(0);
        assert_eq!(decrypt_bytes(&KEY, &ct).unwrap_err(), VaultError::TrailingData);
    }

    #[test]
    fn bad_magic() {
        let mut ct = encrypt_bytes(&KEY, b"abc");
        ct[0] = b'X';
        assert!(matches!(decrypt_bytes(&KEY, &ct), Err(VaultError::BadHeader(_))));
    }

    #[test]
    fn short_source_reports_offset() {
        let header = FileHeader::new(10);
        let err = encrypt_stream(&KEY, &header, &mut &b"12345"[..], &mut Vec::new(), |_| {}).unwrap_err();
        assert!(matches!(err, VaultError::Io { offset: Some(5), .. }), "{err:?}");
    }

    #[test]
    fn no_plaintext_on_auth_failure() {
        let mut ct = encrypt_bytes(&KEY, &[9u8; 100]);
        ct[30] ^= 1;
        let mut out = Vec::new();
        assert!(decrypt_stream(&KEY, &mut &ct[..], &mut out, |_| {}).is_err());
        assert!(out.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn roundtrip(data in proptest::collection::vec(any::<u8>(), 0..12_000)) {
            let ct = encrypt_bytes(&KEY, &data);
            prop_assert_eq!(ct.len() as u64, ciphertext_len(data.len() as u64));
            prop_assert_eq!(decrypt_bytes(&KEY, &ct).unwrap(), data);
        }

        #[test]
        fn any_bit_flip_fails(len in 0usize..9000, pos in any::<prop::sample::Index>(), bit in 0u8..8) {
            let mut ct = encrypt_bytes(&KEY, &vec![3u8; len]);
            let i = pos.index(ct.len());
            ct[i] ^= 1 << bit;
            prop_assert!(decrypt_bytes(&KEY, &ct).is_err());
        }
    }
}
