use std::collections::HashSet;
use std::io::Read;

use flate2::read::DeflateDecoder;

use super::*;

/// End of central directory, as found.
#[derive(Debug, Clone)]
pub(crate) struct EndRecord {
    pub offset: usize,
    pub entry_count: usize,
    pub cd_size: usize,
    pub cd_offset: usize,
    pub comment: Vec<u8>,
}

/// An entry located by scanning the central directory and its local header,
/// without touching the payload.
#[derive(Debug, Clone)]
pub(crate) struct RawEntry {
    pub path: String,
    pub flags: u16,
    pub method: u16,
    pub crc32: u32,
    pub compressed_size: usize,
    pub uncompressed_size: usize,
    pub local_offset: usize,
    /// Central directory record, byte-exact.
    pub central: Vec<u8>,
    pub local_extra: Vec<u8>,
    pub data_offset: usize,
    pub dos_time: u16,
    pub dos_date: u16,
    pub version_made_by: u16,
    pub external_attrs: u32,
}

fn bad(msg: impl Into<String>) -> ZipError {
    ZipError::BadArchive(msg.into())
}

pub(crate) fn find_end_record(bytes: &[u8]) -> Result<EndRecord, ZipError> {
    if bytes.len() < END_RECORD_LEN {
        return Err(bad(format!(
            "{} bytes is too short for an end of central directory record",
            bytes.len()
        )));
    }
    let last = bytes.len() - END_RECORD_LEN;
    let first = last.saturating_sub(u16::MAX as usize);
    let offset = (first..=last)
        .rev()
        .find(|&i| {
            le32(bytes, i) == END_RECORD_SIG
                && i + END_RECORD_LEN + le16(bytes, i + 20) as usize == bytes.len()
        })
        .ok_or_else(|| bad("missing end of central directory record"))?;
    if offset >= 20 && le32(bytes, offset - 20) == ZIP64_LOCATOR_SIG {
        return Err(ZipError::Zip64Unsupported("zip64 end locator present".into()));
    }
    let disk = le16(bytes, offset + 4);
    let cd_disk = le16(bytes, offset + 6);
    let disk_entries = le16(bytes, offset + 8);
    let entry_count = le16(bytes, offset + 10);
    let cd_size = le32(bytes, offset + 12);
    let cd_offset = le32(bytes, offset + 16);
    if entry_count == 0xFFFF || cd_size == 0xFFFF_FFFF || cd_offset == 0xFFFF_FFFF {
        return Err(ZipError::Zip64Unsupported("end record uses zip64 markers".into()));
    }
    if disk != 0 || cd_disk != 0 || disk_entries != entry_count {
        return Err(bad("multi-disk archives are not supported"));
    }
    if cd_offset as usize + cd_size as usize > offset {
        return Err(bad("central directory overlaps end record"));
    }
    Ok(EndRecord {
        offset,
        entry_count: entry_count as usize,
        cd_size: cd_size as usize,
        cd_offset: cd_offset as usize,
        comment: bytes[offset + END_RECORD_LEN..].to_vec(),
    })
}

pub(crate) fn scan(bytes: &[u8]) -> Result<(Vec<RawEntry>, EndRecord), ZipError> {
    let end = find_end_record(bytes)?;
    let cd_end = end.cd_offset + end.cd_size;
    let mut pos = end.cd_offset;
    let mut entries = Vec::with_capacity(end.entry_count);
    for i in 0..end.entry_count {
        if pos + CENTRAL_HEADER_LEN > cd_end || le32(bytes, pos) != CENTRAL_HEADER_SIG {
            return Err(bad(format!("bad central directory record {i} at offset {pos}")));
        }
        let version_made_by = le16(bytes, pos + 4);
        let flags = le16(bytes, pos + 8);
        let method = le16(bytes, pos + 10);
        let dos_time = le16(bytes, pos + 12);
        let dos_date = le16(bytes, pos + 14);
        let crc32 = le32(bytes, pos + 16);
        let csize = le32(bytes, pos + 20);
        let usize_ = le32(bytes, pos + 24);
        let name_len = le16(bytes, pos + 28) as usize;
        let extra_len = le16(bytes, pos + 30) as usize;
        let comment_len = le16(bytes, pos + 32) as usize;
        let external_attrs = le32(bytes, pos + 38);
        let local_offset = le32(bytes, pos + 42);
        let rec_len = CENTRAL_HEADER_LEN + name_len + extra_len + comment_len;
        if pos + rec_len > cd_end {
            return Err(bad(format!("central directory record {i} overruns directory")));
        }
        let name_bytes = &bytes[pos + CENTRAL_HEADER_LEN..pos + CENTRAL_HEADER_LEN + name_len];
        let path = String::from_utf8(name_bytes.to_vec())
            .unwrap_or_else(|_| name_bytes.iter().map(|&b| b as char).collect());
        if csize == 0xFFFF_FFFF || usize_ == 0xFFFF_FFFF || local_offset == 0xFFFF_FFFF {
            return Err(ZipError::Zip64Unsupported(path));
        }
        let central = bytes[pos..pos + rec_len].to_vec();
        pos += rec_len;

        let lo = local_offset as usize;
        if lo + LOCAL_HEADER_LEN > bytes.len() || le32(bytes, lo) != LOCAL_HEADER_SIG {
            return Err(bad(format!("bad local header for {path} at offset {lo}")));
        }
        let local_name_len = le16(bytes, lo + 26) as usize;
        let local_extra_len = le16(bytes, lo + 28) as usize;
        let data_offset = lo + LOCAL_HEADER_LEN + local_name_len + local_extra_len;
        if data_offset + csize as usize > bytes.len() {
            return Err(bad(format!("payload of {path} runs past end of archive")));
        }
        let local_extra = bytes[lo + LOCAL_HEADER_LEN + local_name_len..data_offset].to_vec();

        entries.push(RawEntry {
            path,
            flags,
            method,
            crc32,
            compressed_size: csize as usize,
            uncompressed_size: usize_ as usize,
            local_offset: lo,
            central,
            local_extra,
            data_offset,
            dos_time,
            dos_date,
            version_made_by,
            external_attrs,
        });
    }
    Ok((entries, end))
}

/// Parses an archive, inflating and checksum-verifying every entry.
pub fn read_archive(bytes: &[u8]) -> Result<ArchiveModel, ZipError> {
    let (raw, end) = scan(bytes)?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(raw.len());
    for r in raw {
        if !seen.insert(r.path.clone()) {
            return Err(ZipError::DuplicateEntry(r.path));
        }
        if r.flags & FLAG_ENCRYPTED != 0 {
            return Err(ZipError::EncryptedEntry(r.path));
        }
        let method = Method::from_code(r.method).ok_or_else(|| ZipError::UnsupportedMethod {
            path: r.path.clone(),
            method: r.method,
        })?;
        let payload = &bytes[r.data_offset..r.data_offset + r.compressed_size];
        let data = match method {
            Method::Stored => payload.to_vec(),
            Method::Deflated => {
                let mut out = Vec::with_capacity(r.uncompressed_size);
                DeflateDecoder::new(payload)
                    .read_to_end(&mut out)
                    // a corrupt stream is a payload integrity failure
                    .map_err(|_| ZipError::CrcMismatch(r.path.clone()))?;
                out
            }
        };
        if data.len() != r.uncompressed_size || crc32fast::hash(&data) != r.crc32 {
            return Err(ZipError::CrcMismatch(r.path));
        }
        entries.push(ArchiveEntry {
            path: r.path,
            method,
            crc32: r.crc32,
            data,
            extra: r.local_extra,
            dos_time: r.dos_time,
            dos_date: r.dos_date,
            version_made_by: r.version_made_by,
            external_attrs: r.external_attrs,
        });
    }
    Ok(ArchiveModel {
        entries,
        comment: end.comment,
    })
}

/// An entry path with its contents or the reason they could not be read.
pub type LenientEntry = (String, Result<Vec<u8>, ZipError>);

/// Reads every entry without failing on payload damage: each path is paired
/// with its inflated bytes or the reason they could not be produced. Checksum
/// mismatches are not reported here; callers compare contents themselves.
pub fn read_entries_lenient(bytes: &[u8]) -> Result<Vec<LenientEntry>, ZipError> {
    let (raw, _) = scan(bytes)?;
    Ok(raw
        .into_iter()
        .map(|r| {
            let payload = &bytes[r.data_offset..r.data_offset + r.compressed_size];
            let data = match Method::from_code(r.method) {
                Some(Method::Stored) => Ok(payload.to_vec()),
                Some(Method::Deflated) => {
                    let mut out = Vec::with_capacity(r.uncompressed_size);
                    DeflateDecoder::new(payload)
                        .read_to_end(&mut out)
                        .map(|_| out)
                        .map_err(|_| ZipError::CrcMismatch(r.path.clone()))
                }
                None => Err(ZipError::UnsupportedMethod {
                    path: r.path.clone(),
                    method: r.method,
                }),
            };
            (r.path, data)
        })
        .collect())
}

/// Central-directory view of one entry, with where its payload starts.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct EntryInfo {
    pub path: String,
    /// Raw method code; 0 is stored, 8 is deflate.
    pub method: u16,
    pub crc32: u32,
    pub compressed_size: u64,
    pub uncompressed_size: u64,
    pub data_offset: u64,
}

/// Lists entries in central directory order without decompressing them.
pub fn list_entries(bytes: &[u8]) -> Result<Vec<EntryInfo>, ZipError> {
    let (raw, _) = scan(bytes)?;
    Ok(raw
        .into_iter()
        .map(|r| EntryInfo {
            path: r.path,
            method: r.method,
            crc32: r.crc32,
            compressed_size: r.compressed_size as u64,
            uncompressed_size: r.uncompressed_size as u64,
            data_offset: r.data_offset as u64,
        })
        .collect())
}
