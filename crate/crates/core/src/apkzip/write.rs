use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::*;

/// Compression level used for every deflated entry on rebuild. Compressed
/// bytes are therefore not expected to match the source archive.
pub const DEFLATE_LEVEL: u32 = 6;

fn put16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serializes a model. Sizes and checksums always go in the local header;
/// no data descriptors are written.
pub fn write_archive(model: &ArchiveModel) -> Vec<u8> {
    let mut out = Vec::new();
    let mut central = Vec::new();
    for e in &model.entries {
        let payload = match e.method {
            Method::Stored => std::borrow::Cow::Borrowed(&e.data[..]),
            Method::Deflated => {
                let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(DEFLATE_LEVEL));
                enc.write_all(&e.data).expect("in-memory write");
                std::borrow::Cow::Owned(enc.finish().expect("in-memory write"))
            }
        };
        let name = e.path.as_bytes();
        let flags = if e.path.is_ascii() { 0 } else { FLAG_UTF8 };
        let offset = out.len() as u32;

        put32(&mut out, LOCAL_HEADER_SIG);
        put16(&mut out, 20);
        put16(&mut out, flags);
        put16(&mut out, e.method.code());
        put16(&mut out, e.dos_time);
        put16(&mut out, e.dos_date);
        put32(&mut out, e.crc32);
        put32(&mut out, payload.len() as u32);
        put32(&mut out, e.data.len() as u32);
        put16(&mut out, name.len() as u16);
        put16(&mut out, e.extra.len() as u16);
        out.extend_from_slice(name);
        out.extend_from_slice(&e.extra);
        out.extend_from_slice(&payload);

        put32(&mut central, CENTRAL_HEADER_SIG);
        put16(&mut central, e.version_made_by);
        put16(&mut central, 20);
        put16(&mut central, flags);
        put16(&mut central, e.method.code());
        put16(&mut central, e.dos_time);
        put16(&mut central, e.dos_date);
        put32(&mut central, e.crc32);
        put32(&mut central, payload.len() as u32);
        put32(&mut central, e.data.len() as u32);
        put16(&mut central, name.len() as u16);
        put16(&mut central, 0); // extra
        put16(&mut central, 0); // comment
        put16(&mut central, 0); // disk
        put16(&mut central, 0); // internal attrs
        put32(&mut central, e.external_attrs);
        put32(&mut central, offset);
        central.extend_from_slice(name);
    }
    let cd_offset = out.len() as u32;
    out.extend_from_slice(&central);
    put32(&mut out, END_RECORD_SIG);
    put16(&mut out, 0);
    put16(&mut out, 0);
    put16(&mut out, model.entries.len() as u16);
    put16(&mut out, model.entries.len() as u16);
    put32(&mut out, central.len() as u32);
    put32(&mut out, cd_offset);
    put16(&mut out, model.comment.len() as u16);
    out.extend_from_slice(&model.comment);
    out
}
