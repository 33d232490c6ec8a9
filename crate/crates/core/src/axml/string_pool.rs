use std::ops::Range;

use super::chunk::{put_u16, put_u32, ChunkHeader, Reader, RES_STRING_POOL};
use super::AxmlError;

pub const FLAG_SORTED: u32 = 1 << 0;
pub const FLAG_UTF8: u32 = 1 << 8;

const HEADER_LEN: usize = 28;

/// A string pool chunk.
///
/// A parsed pool remembers its exact on-disk bytes so that an unedited pool
/// re-serializes byte-for-byte, and so that strings can be overwritten inside
/// their original slot without moving anything else. Any edit that changes
/// the layout ([`StringPool::set`], [`StringPool::push`]) drops the cached
/// bytes and the pool is re-encoded on write.
#[derive(Debug, Clone)]
pub struct StringPool {
    strings: Vec<String>,
    flags: u32,
    styles: Option<StyleSection>,
    raw: Option<RawPool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct StyleSection {
    offsets: Vec<u32>,
    data: Vec<u8>,
}

#[derive(Debug, Clone)]
struct RawPool {
    bytes: Vec<u8>,
    /// Byte range of each encoded string (length prefix through terminator).
    spans: Vec<Range<usize>>,
}

/// Structural equality: strings, encoding and style data. The cached byte
/// layout is not compared.
impl PartialEq for StringPool {
    fn eq(&self, other: &Self) -> bool {
        self.strings == other.strings
            && self.is_utf8() == other.is_utf8()
            && self.styles == other.styles
    }
}

impl Eq for StringPool {}

/// Returned when an in-place overwrite does not fit the original slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotTooSmall {
    pub needed: usize,
    pub available: usize,
}

impl StringPool {
    pub fn new(strings: Vec<String>, utf8: bool) -> Self {
        Self {
            strings,
            flags: if utf8 { FLAG_UTF8 } else { 0 },
            styles: None,
            raw: None,
        }
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn is_utf8(&self) -> bool {
        self.flags & FLAG_UTF8 != 0
    }

    pub fn is_sorted(&self) -> bool {
        self.flags & FLAG_SORTED != 0
    }

    pub fn get(&self, index: u32) -> Option<&str> {
        self.strings.get(index as usize).map(String::as_str)
    }

    pub fn strings(&self) -> &[String] {
        &self.strings
    }

    pub fn position(&self, s: &str) -> Option<u32> {
        self.strings.iter().position(|x| x == s).map(|i| i as u32)
    }

    /// Appends a string and returns its index.
    pub fn push(&mut self, s: &str) -> u32 {
        self.invalidate();
        self.strings.push(s.to_owned());
        (self.strings.len() - 1) as u32
    }

    /// Replaces a string; the pool is re-encoded on the next write.
    pub fn set(&mut self, index: u32, s: &str) {
        self.invalidate();
        self.strings[index as usize] = s.to_owned();
    }

    /// Size of the original encoded slot for `index`, if the pool layout is
    /// known.
    pub fn slot_len(&self, index: u32) -> Option<usize> {
        self.raw
            .as_ref()
            .and_then(|raw| raw.spans.get(index as usize))
            .map(|span| span.len())
    }

    /// Overwrites a string inside its existing slot: the length prefix is
    /// rewritten, the remainder of the slot is zero-filled and no other byte
    /// of the pool moves.
    pub fn overwrite_in_place(&mut self, index: u32, s: &str) -> Result<(), SlotTooSmall> {
        if self.raw.is_none() {
            self.freeze();
        }
        let utf8 = self.is_utf8();
        let encoded = encode_string(s, utf8).map_err(|_| SlotTooSmall {
            needed: usize::MAX,
            available: 0,
        })?;
        let raw = self.raw.as_mut().expect("frozen above");
        let span = raw.spans[index as usize].clone();
        if encoded.len() > span.len() {
            return Err(SlotTooSmall {
                needed: encoded.len(),
                available: span.len(),
            });
        }
        let slot = &mut raw.bytes[span];
        slot[..encoded.len()].copy_from_slice(&encoded);
        slot[encoded.len()..].fill(0);
        self.strings[index as usize] = s.to_owned();
        Ok(())
    }

    fn invalidate(&mut self) {
        self.raw = None;
        // Edits can break the sort order the flag promises.
        self.flags &= !FLAG_SORTED;
    }

    /// Encodes the pool from its strings and caches the resulting layout.
    fn freeze(&mut self) {
        let bytes = self.encode().expect("pool strings must be encodable");
        let parsed = Self::parse(&bytes).expect("freshly encoded pool must parse");
        self.raw = parsed.raw;
    }

    pub fn parse(chunk: &[u8]) -> Result<Self, AxmlError> {
        let header = ChunkHeader::read(chunk, 0)?;
        if header.kind != RES_STRING_POOL {
            return Err(AxmlError::MalformedChunk(format!(
                "expected string pool chunk, found type 0x{:04x}",
                header.kind
            )));
        }
        if (header.header_size as usize) < HEADER_LEN {
            return Err(AxmlError::MalformedChunk(format!(
                "string pool header size {} < {HEADER_LEN}",
                header.header_size
            )));
        }
        let chunk = &chunk[..header.size as usize];
        let mut r = Reader::at(chunk, 8, "string pool header");
        let string_count = r.u32()? as usize;
        let style_count = r.u32()? as usize;
        let flags = r.u32()?;
        let strings_start = r.u32()? as usize;
        let styles_start = r.u32()? as usize;
        let utf8 = flags & FLAG_UTF8 != 0;

        let mut r = Reader::at(chunk, header.header_size as usize, "string pool offsets");
        let mut offsets = Vec::with_capacity(string_count.min(chunk.len() / 4));
        for _ in 0..string_count {
            offsets.push(r.u32()? as usize);
        }
        let mut style_offsets = Vec::with_capacity(style_count.min(chunk.len() / 4));
        for _ in 0..style_count {
            style_offsets.push(r.u32()?);
        }

        if string_count > 0 && strings_start > chunk.len() {
            return Err(AxmlError::BadStringPool(format!(
                "strings start {strings_start} beyond chunk end {}",
                chunk.len()
            )));
        }

        let mut strings = Vec::with_capacity(offsets.len());
        let mut spans = Vec::with_capacity(offsets.len());
        for (i, off) in offsets.iter().enumerate() {
            let start = strings_start + off;
            if start >= chunk.len() {
                return Err(AxmlError::BadStringPool(format!(
                    "string {i} offset {off} out of range"
                )));
            }
            let (s, end) = decode_string(chunk, start, utf8).map_err(|e| match e {
                AxmlError::MalformedChunk(msg) => {
                    AxmlError::MalformedChunk(format!("string {i} runs past chunk end: {msg}"))
                }
                other => other,
            })?;
            strings.push(s);
            spans.push(start..end);
        }

        let styles = if style_count > 0 {
            if styles_start == 0 || styles_start > chunk.len() {
                return Err(AxmlError::BadStringPool(format!(
                    "styles start {styles_start} out of range"
                )));
            }
            Some(StyleSection {
                offsets: style_offsets,
                data: chunk[styles_start..].to_vec(),
            })
        } else {
            None
        };

        Ok(Self {
            strings,
            flags,
            styles,
            raw: Some(RawPool {
                bytes: chunk.to_vec(),
                spans,
            }),
        })
    }

    /// Writes the chunk: cached bytes when the layout is unchanged, a fresh
    /// encoding otherwise.
    pub fn write(&self, out: &mut Vec<u8>) -> Result<(), AxmlError> {
        match &self.raw {
            Some(raw) => out.extend_from_slice(&raw.bytes),
            None => out.extend_from_slice(&self.encode()?),
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, AxmlError> {
        let mut out = Vec::new();
        self.write(&mut out)?;
        Ok(out)
    }

    fn encode(&self) -> Result<Vec<u8>, AxmlError> {
        let utf8 = self.is_utf8();
        let mut data = Vec::new();
        let mut offsets = Vec::with_capacity(self.strings.len());
        for s in &self.strings {
            offsets.push(data.len() as u32);
            data.extend_from_slice(&encode_string(s, utf8)?);
        }
        while data.len() % 4 != 0 {
            data.push(0);
        }
        let (style_offsets, style_data): (&[u32], &[u8]) = match &self.styles {
            Some(st) => (&st.offsets, &st.data),
            None => (&[], &[]),
        };
        let strings_start = HEADER_LEN + 4 * (offsets.len() + style_offsets.len());
        let styles_start = if self.styles.is_some() {
            strings_start + data.len()
        } else {
            0
        };
        let size = strings_start + data.len() + style_data.len();

        let mut out = Vec::with_capacity(size);
        ChunkHeader {
            kind: RES_STRING_POOL,
            header_size: HEADER_LEN as u16,
            size: size as u32,
        }
        .write(&mut out);
        put_u32(&mut out, offsets.len() as u32);
        put_u32(&mut out, style_offsets.len() as u32);
        put_u32(&mut out, self.flags);
        put_u32(&mut out, if offsets.is_empty() { 0 } else { strings_start as u32 });
        put_u32(&mut out, styles_start as u32);
        for o in &offsets {
            put_u32(&mut out, *o);
        }
        for o in style_offsets {
            put_u32(&mut out, *o);
        }
        out.extend_from_slice(&data);
        out.extend_from_slice(style_data);
        Ok(out)
    }
}

/// Encoded size of `s` in a pool of the given encoding, prefix and
/// terminator included.
pub fn encoded_len(s: &str, utf8: bool) -> Result<usize, AxmlError> {
    encode_string(s, utf8).map(|v| v.len())
}

fn encode_string(s: &str, utf8: bool) -> Result<Vec<u8>, AxmlError> {
    let mut out = Vec::new();
    if utf8 {
        let units = s.encode_utf16().count();
        let bytes = s.as_bytes();
        if units > 0x7FFF || bytes.len() > 0x7FFF {
            return Err(AxmlError::BadStringPool(format!(
                "string of {} bytes too long for a UTF-8 pool",
                bytes.len()
            )));
        }
        put_len8(&mut out, units);
        put_len8(&mut out, bytes.len());
        out.extend_from_slice(bytes);
        out.push(0);
    } else {
        let units: Vec<u16> = s.encode_utf16().collect();
        if units.len() > 0x7FFF_FFFF {
            return Err(AxmlError::BadStringPool("string too long".into()));
        }
        if units.len() > 0x7FFF {
            put_u16(&mut out, 0x8000 | (units.len() >> 16) as u16);
            put_u16(&mut out, (units.len() & 0xFFFF) as u16);
        } else {
            put_u16(&mut out, units.len() as u16);
        }
        for u in units {
            put_u16(&mut out, u);
        }
        put_u16(&mut out, 0);
    }
    Ok(out)
}

fn put_len8(out: &mut Vec<u8>, n: usize) {
    if n > 0x7F {
        out.push(0x80 | (n >> 8) as u8);
        out.push((n & 0xFF) as u8);
    } else {
        out.push(n as u8);
    }
}

fn read_len8(r: &mut Reader<'_>) -> Result<usize, AxmlError> {
    let first = r.u8()? as usize;
    if first & 0x80 != 0 {
        Ok(((first & 0x7F) << 8) | r.u8()? as usize)
    } else {
        Ok(first)
    }
}

fn read_len16(r: &mut Reader<'_>) -> Result<usize, AxmlError> {
    let first = r.u16()? as usize;
    if first & 0x8000 != 0 {
        Ok(((first & 0x7FFF) << 16) | r.u16()? as usize)
    } else {
        Ok(first)
    }
}

/// Decodes one string starting at `start`; returns it with the end offset of
/// its encoding (terminator included).
fn decode_string(chunk: &[u8], start: usize, utf8: bool) -> Result<(String, usize), AxmlError> {
    let mut r = Reader::at(chunk, start, "string pool entry");
    if utf8 {
        let _units = read_len8(&mut r)?;
        let len = read_len8(&mut r)?;
        let bytes = r.bytes(len)?;
        let nul = r.u8()?;
        if nul != 0 {
            return Err(AxmlError::BadStringPool(format!(
                "UTF-8 string at {start} not NUL-terminated"
            )));
        }
        Ok((String::from_utf8_lossy(bytes).into_owned(), r.pos()))
    } else {
        let len = read_len16(&mut r)?;
        let bytes = r.bytes(len.checked_mul(2).ok_or_else(|| {
            AxmlError::BadStringPool(format!("string length {len} overflows"))
        })?)?;
        let nul = r.u16()?;
        if nul != 0 {
            return Err(AxmlError::BadStringPool(format!(
                "UTF-16 string at {start} not NUL-terminated"
            )));
        }
        let units: Vec<u16> = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        Ok((String::from_utf16_lossy(&units), r.pos()))
    }
}
