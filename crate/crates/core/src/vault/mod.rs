//! An encrypted file vault.
//!
//! Files are encrypted one by one under a key derived from a numeric PIN
//! and kept under random names in `locked/`. Unlocking writes the plaintext
//! to `open/` and keeps the ciphertext. All lock and unlock work goes
//! through a FIFO queue drained by one worker thread.
//!
//! ```text
//! <dir>/vault.meta   salt, KDF parameters and a key check value
//! <dir>/index.dsi    encrypted list of entries
//! <dir>/locked/      one .dsf file per entry
//! <dir>/open/        plaintext of unlocked entries
//! ```

mod handle;
mod index;
mod meta;
pub mod stream;

use thiserror::Error;

pub use handle::{
    Direction, ProgressHook, QueuedTask, Status, StatusRow, TaskOutcome, Vault, INDEX_FILE, LOCKED_DIR,
    LOCK_FILE, META_FILE, OPEN_DIR,
};
pub use index::{validate_name, EntryState, VaultEntry};
pub use meta::{derive_key, validate_pin, KdfParams, VaultMeta, META_LEN};
pub use stream::{ciphertext_len, decrypt_stream, encrypt_stream, FileHeader, CHUNK_LEN, HEADER_LEN, TAG_LEN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VaultError {
    #[error("BadPinFormat: a PIN is 4 to 16 decimal digits")]
    BadPinFormat,
    #[error("VaultExists: target directory already holds a vault or other files")]
    VaultExists,
    #[error("NoVault: no vault.meta in the vault directory")]
    NoVault,
    #[error("VaultBusy: vault is in use by process {0}")]
    VaultBusy(u32),
    #[error("PinRejected: wrong PIN or damaged vault metadata")]
    PinRejected,
    #[error("BadMeta: {0}")]
    BadMeta(String),
    #[error("BadIndex: {0}")]
    BadIndex(String),
    #[error("AuthFailed: chunk {0} failed authentication")]
    AuthFailed(u64),
    #[error("TruncatedStream: ciphertext ends before the final chunk")]
    TruncatedStream,
    #[error("TrailingData: bytes after the final chunk")]
    TrailingData,
    #[error("BadHeader: {0}")]
    BadHeader(String),
    #[error("Io: {message}{}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Io { offset: Option<u64>, message: String },
    #[error("SourceMissing: {0}")]
    SourceMissing(String),
    #[error("BadName: {0:?} cannot be stored")]
    BadName(String),
    #[error("DuplicateName: {0}")]
    DuplicateName(String),
    #[error("EntryNotFound: {0}")]
    EntryNotFound(String),
    #[error("NotLocked: {0}")]
    NotLocked(String),
    #[error("NotUnlocked: {0}")]
    NotUnlocked(String),
    #[error("AlreadyQueued: {0}")]
    AlreadyQueued(String),
}

impl VaultError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BadPinFormat => "BadPinFormat",
            Self::VaultExists => "VaultExists",
            Self::NoVault => "NoVault",
            Self::VaultBusy(_) => "VaultBusy",
            Self::PinRejected => "PinRejected",
            Self::BadMeta(_) => "BadMeta",
            Self::BadIndex(_) => "BadIndex",
            Self::AuthFailed(_) => "AuthFailed",
            Self::TruncatedStream => "TruncatedStream",
            Self::TrailingData => "TrailingData",
            Self::BadHeader(_) => "BadHeader",
            Self::Io { .. } => "Io",
            Self::SourceMissing(_) => "SourceMissing",
            Self::BadName(_) => "BadName",
            Self::DuplicateName(_) => "DuplicateName",
            Self::EntryNotFound(_) => "EntryNotFound",
            Self::NotLocked(_) => "NotLocked",
            Self::NotUnlocked(_) => "NotUnlocked",
            Self::AlreadyQueued(_) => "AlreadyQueued",
        }
    }
}
