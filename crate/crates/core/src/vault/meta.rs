use argon2::{Algorithm, Argon2, Params, Version};
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key};
use rand::RngCore;
use serde::Serialize;

use super::VaultError;

pub const META_MAGIC: &[u8; 4] = b"DSV1";
pub const META_VERSION: u8 = 1;
pub const KDF_ARGON2ID: u8 = 1;
pub const META_LEN: usize = 66;
const CHECK_AAD: &[u8] = b"DSV1-check";

/// Argon2id cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KdfParams {
    pub t: u32,
    pub m_kib: u32,
    pub p: u32,
}

impl Default for KdfParams {
    fn default() -> Self {
        Self {
            t: 3,
            m_kib: 65536,
            p: 1,
        }
    }
}

impl KdfParams {
    /// Cheap parameters for tests and examples. Not for real data.
    pub const fn insecure_fast() -> Self {
        Self { t: 1, m_kib: 64, p: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaultMeta {
    pub salt: [u8; 16],
    pub kdf: KdfParams,
    pub key_check: [u8; 32],
}

pub fn validate_pin(pin: &str) -> Result<(), VaultError> {
    if (4..=16).contains(&pin.len()) && pin.bytes().all(|b| b.is_ascii_digit()) {
        Ok(())
    } else {
        Err(VaultError::BadPinFormat)
    }
}

/// Argon2id(pin, salt) with the meta's cost parameters.
pub fn derive_key(pin: &str, salt: &[u8; 16], kdf: KdfParams) -> Result<[u8; 32], VaultError> {
    validate_pin(pin)?;
    let params = Params::new(kdf.m_kib, kdf.t, kdf.p, Some(32))
        .map_err(|e| VaultError::BadMeta(format!("kdf parameters: {e}")))?;
    let mut key = [0u8; 32];
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
        .hash_password_into(pin.as_bytes(), salt, &mut key)
        .map_err(|e| VaultError::BadMeta(format!("kdf: {e}")))?;
    Ok(key)
}

fn seal_check(key: &[u8; 32]) -> [u8; 32] {
    ChaCha20Poly1305::new(Key::from_slice(key))
        .encrypt(
            &[0u8; 12].into(),
            Payload {
                msg: &[0u8; 16],
                aad: CHECK_AAD,
            },
        )
        .expect("fixed-size seal")
        .try_into()
        .expect("16 bytes plus tag")
}

impl VaultMeta {
    /// Fresh salt; returns the meta and the derived key.
    pub fn create(pin: &str, kdf: KdfParams) -> Result<(Self, [u8; 32]), VaultError> {
        let mut salt = [0u8; 16];
        rand::thread_rng().fill_bytes(&mut salt);
        let key = derive_key(pin, &salt, kdf)?;
        Ok((
            Self {
                salt,
                kdf,
                key_check: seal_check(&key),
            },
            key,
        ))
    }

    pub fn derive_key(&self, pin: &str) -> Result<[u8; 32], VaultError> {
        derive_key(pin, &self.salt, self.kdf)
    }

    /// Derives the key and checks it against the stored seal.
    pub fn unlock(&self, pin: &str) -> Result<[u8; 32], VaultError> {
        let key = self.derive_key(pin)?;
        let opened = ChaCha20Poly1305::new(Key::from_slice(&key)).decrypt(
            &[0u8; 12].into(),
            Payload {
                msg: &self.key_check,
                aad: CHECK_AAD,
            },
        );
        match opened {
            Ok(p) if p == [0u8; 16] => Ok(key),
            _ => Err(VaultError::PinRejected),
        }
    }

    pub fn to_bytes(&self) -> [u8; META_LEN] {
        let mut out = [0u8; META_LEN];
        out[..4].copy_from_slice(META_MAGIC);
        out[4] = META_VERSION;
        out[5] = KDF_ARGON2ID;
        out[6..22].copy_from_slice(&self.salt);
        out[22..26].copy_from_slice(&self.kdf.t.to_le_bytes());
        out[26..30].copy_from_slice(&self.kdf.m_kib.to_le_bytes());
        out[30..34].copy_from_slice(&self.kdf.p.to_le_bytes());
        out[34..].copy_from_slice(&self.key_check);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, VaultError> {
        if bytes.len() != META_LEN || &bytes[..4] != META_MAGIC {
            return Err(VaultError::BadMeta("not a vault meta file".into()));
        }
        if bytes[4] != META_VERSION || bytes[5] != KDF_ARGON2ID {
            return Err(VaultError::BadMeta(format!(
                "unsupported version {} / kdf {}",
                bytes[4], bytes[5]
            )));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        Ok(Self {
            salt: bytes[6..22].try_into().unwrap(),
            kdf: KdfParams {
                t: word(22),
                m_kib: word(26),
                p: word(30),
            },
            key_check: bytes[34..].try_into().unwrap(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FAST: KdfParams = KdfParams::insecure_fast();

    #[test]
    fn pin_format() {
        for ok in ["1234", "0000000000000000"] {
            assert!(validate_pin(ok).is_ok());
        }
        for bad in ["123", "12ab", "12345678901234567", "", "１２３４"] {
            assert_eq!(validate_pin(bad), Err(VaultError::BadPinFormat), "{bad}");
        }
    }

    #[test]
    fn derivation_deterministic_and_pin_sensitive() {
        let salt = [1u8; 16];
        let a = derive_key("1234", &salt, FAST).unwrap();
        assert_eq!(a, derive_key("1234", &salt, FAST).unwrap());
        assert_ne!(a, derive_key("1235", &salt, FAST).unwrap());
    }

    #[test]
    fn meta_roundtrip_and_check() {
        let (meta, key) = VaultMeta::create("2468", FAST).unwrap();
        let back = VaultMeta::parse(&meta.to_bytes()).unwrap();
        assert_eq!(back, meta);
        assert_eq!(back.unlock("2468").unwrap(), key);
        assert_eq!(back.unlock("2469").unwrap_err(), VaultError::PinRejected);
    }

    #[test]
    fn flipped_salt_rejects_pin() {
        let (meta, _) = VaultMeta::create("2468", FAST).unwrap();
        let mut bytes = meta.to_bytes();
        bytes[10] ^= 0x40;
        assert_eq!(
            VaultMeta::parse(&bytes).unwrap().unlock("2468").unwrap_err(),
            VaultError::PinRejected
        );
    }

    #[test]
    fn default_params() {
        assert_eq!(KdfParams::default(), KdfParams { t: 3, m_kib: 65536, p: 1 });
    }
}
