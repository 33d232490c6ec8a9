//! Chunk headers and little-endian reading helpers shared by the binary XML
//! and resource table parsers.

use super::AxmlError;

pub const RES_STRING_POOL: u16 = 0x0001;
pub const RES_TABLE: u16 = 0x0002;
pub const RES_XML: u16 = 0x0003;

pub const RES_XML_START_NAMESPACE: u16 = 0x0100;
pub const RES_XML_END_NAMESPACE: u16 = 0x0101;
pub const RES_XML_START_ELEMENT: u16 = 0x0102;
pub const RES_XML_END_ELEMENT: u16 = 0x0103;
pub const RES_XML_CDATA: u16 = 0x0104;
pub const RES_XML_RESOURCE_MAP: u16 = 0x0180;

pub const RES_TABLE_PACKAGE: u16 = 0x0200;
pub const RES_TABLE_TYPE: u16 = 0x0201;
pub const RES_TABLE_TYPE_SPEC: u16 = 0x0202;

/// Sentinel for "no string" in index fields.
pub const NO_INDEX: u32 = 0xFFFF_FFFF;

pub const CHUNK_HEADER_LEN: usize = 8;

/// `{type: u16, header_size: u16, chunk_size: u32}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkHeader {
    pub kind: u16,
    pub header_size: u16,
    pub size: u32,
}

impl ChunkHeader {
    /// Reads and validates a header at `offset`: the header must fit, and the
    /// declared chunk must lie inside `buf`.
    pub fn read(buf: &[u8], offset: usize) -> Result<Self, AxmlError> {
        if buf.len() < offset + CHUNK_HEADER_LEN {
            return Err(AxmlError::MalformedChunk(format!(
                "truncated chunk header at offset {offset}"
            )));
        }
        let kind = u16::from_le_bytes([buf[offset], buf[offset + 1]]);
        let header_size = u16::from_le_bytes([buf[offset + 2], buf[offset + 3]]);
        let size = u32::from_le_bytes(buf[offset + 4..offset + 8].try_into().unwrap());
        if (header_size as usize) < CHUNK_HEADER_LEN || size < header_size as u32 {
            return Err(AxmlError::MalformedChunk(format!(
                "chunk 0x{kind:04x} at offset {offset}: header size {header_size}, chunk size {size}"
            )));
        }
        if offset as u64 + size as u64 > buf.len() as u64 {
            return Err(AxmlError::MalformedChunk(format!(
                "chunk 0x{kind:04x} at offset {offset} claims {size} bytes, only {} available",
                buf.len() - offset
            )));
        }
        Ok(Self {
            kind,
            header_size,
            size,
        })
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.kind.to_le_bytes());
        out.extend_from_slice(&self.header_size.to_le_bytes());
        out.extend_from_slice(&self.size.to_le_bytes());
    }
}

/// Bounds-checked little-endian reader over a chunk's bytes.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    pub fn at(buf: &'a [u8], pos: usize, what: &'static str) -> Self {
        Self { buf, pos, what }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], AxmlError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(AxmlError::MalformedChunk(format!(
                "{} truncated: need {n} bytes at offset {}, have {}",
                self.what,
                self.pos,
                self.buf.len().saturating_sub(self.pos)
            ))),
        }
    }

    pub fn u8(&mut self) -> Result<u8, AxmlError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, AxmlError> {
        let b = self.bytes(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32, AxmlError> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Typed value as stored on disk (`Res_value`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TypedValue {
    pub size: u16,
    pub res0: u8,
    pub data_type: u8,
    pub data: u32,
}

pub const TYPE_REFERENCE: u8 = 0x01;
pub const TYPE_STRING: u8 = 0x03;
pub const TYPE_INT_DEC: u8 = 0x10;
pub const TYPE_BOOLEAN: u8 = 0x12;

impl TypedValue {
    pub const LEN: usize = 8;

    pub fn new(data_type: u8, data: u32) -> Self {
        Self {
            size: Self::LEN as u16,
            res0: 0,
            data_type,
            data,
        }
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self, AxmlError> {
        Ok(Self {
            size: r.u16()?,
            res0: r.u8()?,
            data_type: r.u8()?,
            data: r.u32()?,
        })
    }

    pub fn write(&self, out: &mut Vec<u8>) {
        put_u16(out, self.size);
        out.push(self.res0);
        out.push(self.data_type);
        put_u32(out, self.data);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_rejects_short_input() {
        assert!(matches!(
            ChunkHeader::read(&[3, 0, 8], 0),
            Err(AxmlError::MalformedChunk(_))
        ));
    }

    #[test]
    fn header_rejects_size_overflow() {
        let mut buf = Vec::new();
        ChunkHeader {
            kind: RES_XML,
            header_size: 8,
            size: 64,
        }
        .write(&mut buf);
        assert!(matches!(
            ChunkHeader::read(&buf, 0),
            Err(AxmlError::MalformedChunk(_))
        ));
    }

    #[test]
    fn header_rejects_size_smaller_than_header() {
        let buf = [3, 0, 16, 0, 8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        assert!(ChunkHeader::read(&buf, 0).is_err());
    }

    #[test]
    fn reader_reports_truncation() {
        let mut r = Reader::new(&[1, 2, 3], "test");
        assert_eq!(r.u16().unwrap(), 0x0201);
        assert!(r.u16().is_err());
    }
}
