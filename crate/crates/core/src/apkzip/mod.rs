//! Reading, rebuilding and aligning application package archives.
//!
//! Archives are handled whole, in memory. Only the stored (0) and deflate (8)
//! methods are supported; Zip64 archives are rejected.

mod align;
mod read;
mod write;

use thiserror::Error;

pub use align::{align_archive, check_alignment, AlignmentReport, DEFAULT_ALIGNMENT};
pub use read::{list_entries, read_archive, read_entries_lenient, EntryInfo, LenientEntry};
pub use write::{write_archive, DEFLATE_LEVEL};

pub(crate) const LOCAL_HEADER_SIG: u32 = 0x0403_4b50;
pub(crate) const CENTRAL_HEADER_SIG: u32 = 0x0201_4b50;
pub(crate) const END_RECORD_SIG: u32 = 0x0605_4b50;
pub(crate) const ZIP64_LOCATOR_SIG: u32 = 0x0706_4b50;

pub(crate) const LOCAL_HEADER_LEN: usize = 30;
pub(crate) const CENTRAL_HEADER_LEN: usize = 46;
pub(crate) const END_RECORD_LEN: usize = 22;

pub(crate) const FLAG_ENCRYPTED: u16 = 1 << 0;
pub(crate) const FLAG_DATA_DESCRIPTOR: u16 = 1 << 3;
pub(crate) const FLAG_UTF8: u16 = 1 << 11;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZipError {
    #[error("BadArchive: {0}")]
    BadArchive(String),
    #[error("CrcMismatch: {0}")]
    CrcMismatch(String),
    #[error("UnsupportedMethod: {path} uses compression method {method}")]
    UnsupportedMethod { path: String, method: u16 },
    #[error("Zip64Unsupported: {0}")]
    Zip64Unsupported(String),
    #[error("EncryptedEntry: {0}")]
    EncryptedEntry(String),
    #[error("EntryNotFound: {0}")]
    EntryNotFound(String),
    #[error("DuplicateEntry: {0}")]
    DuplicateEntry(String),
}

impl ZipError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BadArchive(_) => "BadArchive",
            Self::CrcMismatch(_) => "CrcMismatch",
            Self::UnsupportedMethod { .. } => "UnsupportedMethod",
            Self::Zip64Unsupported(_) => "Zip64Unsupported",
            Self::EncryptedEntry(_) => "EncryptedEntry",
            Self::EntryNotFound(_) => "EntryNotFound",
            Self::DuplicateEntry(_) => "DuplicateEntry",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Method {
    Stored,
    Deflated,
}

impl Method {
    pub fn code(self) -> u16 {
        match self {
            Self::Stored => 0,
            Self::Deflated => 8,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            0 => Some(Self::Stored),
            8 => Some(Self::Deflated),
            _ => None,
        }
    }
}

/// One archive member with its decompressed contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveEntry {
    pub path: String,
    pub method: Method,
    pub crc32: u32,
    pub data: Vec<u8>,
    /// Local header extra field.
    pub extra: Vec<u8>,
    /// MS-DOS modification time and date.
    pub dos_time: u16,
    pub dos_date: u16,
    pub version_made_by: u16,
    pub external_attrs: u32,
}

/// 1980-01-01 00:00, the earliest representable DOS timestamp.
pub const DOS_EPOCH_DATE: u16 = 0x21;

impl ArchiveEntry {
    pub fn new(path: impl Into<String>, method: Method, data: Vec<u8>) -> Self {
        let crc32 = crc32fast::hash(&data);
        Self {
            path: path.into(),
            method,
            crc32,
            data,
            extra: Vec::new(),
            dos_time: 0,
            dos_date: DOS_EPOCH_DATE,
            version_made_by: 20,
            external_attrs: 0,
        }
    }

    pub fn extra_len(&self) -> u16 {
        self.extra.len() as u16
    }
}

/// An archive as an ordered list of entries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArchiveModel {
    pub entries: Vec<ArchiveEntry>,
    pub comment: Vec<u8>,
}

impl ArchiveModel {
    pub fn entry(&self, path: &str) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.path == path)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.entry(path).is_some()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.path.as_str())
    }

    /// Replaces an entry's contents, keeping its position and method.
    pub fn replace_entry(&mut self, path: &str, data: Vec<u8>) -> Result<(), ZipError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.path == path)
            .ok_or_else(|| ZipError::EntryNotFound(path.to_owned()))?;
        entry.crc32 = crc32fast::hash(&data);
        entry.data = data;
        Ok(())
    }

    /// Appends a new entry; paths must stay unique.
    pub fn push_entry(&mut self, entry: ArchiveEntry) -> Result<(), ZipError> {
        if self.contains(&entry.path) {
            return Err(ZipError::DuplicateEntry(entry.path));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn remove_entry(&mut self, path: &str) -> Option<ArchiveEntry> {
        let pos = self.entries.iter().position(|e| e.path == path)?;
        Some(self.entries.remove(pos))
    }
}

/// Functional form of [`ArchiveModel::replace_entry`].
pub fn replace_entry(mut model: ArchiveModel, path: &str, data: Vec<u8>) -> Result<ArchiveModel, ZipError> {
    model.replace_entry(path, data)?;
    Ok(model)
}

pub(crate) fn le16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

pub(crate) fn le32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}
