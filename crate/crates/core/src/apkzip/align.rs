use serde::Serialize;

use super::read::scan;
use super::*;

pub const DEFAULT_ALIGNMENT: u16 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignmentReport {
    pub ok: bool,
    /// Stored entries whose data does not start on the boundary: `(path, offset)`.
    pub violations: Vec<(String, u64)>,
}

/// Scans local headers and reports stored entries whose data offset is not a
/// multiple of `boundary`.
pub fn check_alignment(bytes: &[u8], boundary: u16) -> Result<AlignmentReport, ZipError> {
    let boundary = boundary.max(1) as usize;
    let (entries, _) = scan(bytes)?;
    let violations: Vec<_> = entries
        .iter()
        .filter(|e| e.method == Method::Stored.code() && e.data_offset % boundary != 0)
        .map(|e| (e.path.clone(), e.data_offset as u64))
        .collect();
    Ok(AlignmentReport {
        ok: violations.is_empty(),
        violations,
    })
}

/// Drops zero-id padding records (and any trailing partial record) from an
/// extra field, keeping real extension records.
fn strip_padding(extra: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(extra.len());
    let mut i = 0;
    while i + 4 <= extra.len() {
        let id = le16(extra, i);
        let len = le16(extra, i + 2) as usize;
        if i + 4 + len > extra.len() {
            break;
        }
        if id != 0 {
            out.extend_from_slice(&extra[i..i + 4 + len]);
        }
        i += 4 + len;
    }
    out
}

/// Rewrites the archive so every stored entry's data starts on a multiple of
/// `boundary`, padding the local extra field with zero bytes. Deflated
/// entries are copied untouched. Data descriptors are folded into the local
/// headers. Entry payloads are copied byte-for-byte, so the operation is
/// idempotent.
pub fn align_archive(bytes: &[u8], boundary: u16) -> Result<Vec<u8>, ZipError> {
    let boundary = boundary.max(1) as usize;
    let (entries, end) = scan(bytes)?;

    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by_key(|&i| entries[i].local_offset);

    let mut out = Vec::with_capacity(bytes.len() + entries.len() * boundary);
    let mut new_offsets = vec![0u32; entries.len()];
    for &i in &order {
        let e = &entries[i];
        let lo = e.local_offset;
        let name_len = le16(bytes, lo + 26) as usize;
        let name = &bytes[lo + LOCAL_HEADER_LEN..lo + LOCAL_HEADER_LEN + name_len];
        let mut header = bytes[lo..lo + LOCAL_HEADER_LEN].to_vec();

        if e.flags & FLAG_DATA_DESCRIPTOR != 0 {
            let flags = le16(&header, 6) & !FLAG_DATA_DESCRIPTOR;
            header[6..8].copy_from_slice(&flags.to_le_bytes());
            header[14..18].copy_from_slice(&e.crc32.to_le_bytes());
            header[18..22].copy_from_slice(&(e.compressed_size as u32).to_le_bytes());
            header[22..26].copy_from_slice(&(e.uncompressed_size as u32).to_le_bytes());
        }

        let extra = if e.method == Method::Stored.code() {
            let mut extra = strip_padding(&e.local_extra);
            let data_start = out.len() + LOCAL_HEADER_LEN + name_len + extra.len();
            let pad = (boundary - data_start % boundary) % boundary;
            extra.resize(extra.len() + pad, 0);
            extra
        } else {
            e.local_extra.clone()
        };
        if extra.len() > u16::MAX as usize {
            return Err(ZipError::BadArchive(format!("extra field of {} too large", e.path)));
        }
        header[28..30].copy_from_slice(&(extra.len() as u16).to_le_bytes());

        new_offsets[i] = out.len() as u32;
        out.extend_from_slice(&header);
        out.extend_from_slice(name);
        out.extend_from_slice(&extra);
        out.extend_from_slice(&bytes[e.data_offset..e.data_offset + e.compressed_size]);
    }

    let cd_offset = out.len();
    for (i, e) in entries.iter().enumerate() {
        let mut rec = e.central.clone();
        if e.flags & FLAG_DATA_DESCRIPTOR != 0 {
            let flags = le16(&rec, 8) & !FLAG_DATA_DESCRIPTOR;
            rec[8..10].copy_from_slice(&flags.to_le_bytes());
        }
        rec[42..46].copy_from_slice(&new_offsets[i].to_le_bytes());
        out.extend_from_slice(&rec);
    }
    let cd_size = out.len() - cd_offset;

    let mut eocd = bytes[end.offset..end.offset + END_RECORD_LEN].to_vec();
    eocd[12..16].copy_from_slice(&(cd_size as u32).to_le_bytes());
    eocd[16..20].copy_from_slice(&(cd_offset as u32).to_le_bytes());
    out.extend_from_slice(&eocd);
    out.extend_from_slice(&end.comment);
    Ok(out)
}
