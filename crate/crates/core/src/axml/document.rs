use std::fmt::Write as _;

use log::warn;

use super::chunk::*;
use super::string_pool::{encoded_len, StringPool};
use super::AxmlError;

/// A parsed binary XML document (the packaged `AndroidManifest.xml`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxmlDocument {
    pub string_pool: StringPool,
    /// Attribute resource ids, parallel to the first strings of the pool.
    pub resource_map: Option<Vec<u32>>,
    pub chunks: Vec<XmlChunk>,
    /// Bytes inside the outer chunk after the last child (normally none).
    pub trailing: Vec<u8>,
}

/// Line number and comment index carried by every XML node header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeInfo {
    pub line: u32,
    pub comment: u32,
}

impl Default for NodeInfo {
    fn default() -> Self {
        Self {
            line: 0,
            comment: NO_INDEX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XmlChunk {
    StartNamespace(Namespace),
    EndNamespace(Namespace),
    StartElement(StartElement),
    EndElement(EndElement),
    CData(CData),
    /// A chunk of a type this parser does not model, kept verbatim.
    Opaque(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Namespace {
    pub info: NodeInfo,
    pub prefix: u32,
    pub uri: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StartElement {
    pub info: NodeInfo,
    pub namespace: u32,
    pub name: u32,
    pub id_index: u16,
    pub class_index: u16,
    pub style_index: u16,
    pub attributes: Vec<Attribute>,
    /// Bytes after the attribute array within the chunk.
    pub trailing: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndElement {
    pub info: NodeInfo,
    pub namespace: u32,
    pub name: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CData {
    pub info: NodeInfo,
    pub data: u32,
    pub typed: TypedValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attribute {
    pub namespace: u32,
    pub name: u32,
    pub raw_value: u32,
    pub typed: TypedValue,
}

/// Decoded view of an attribute's typed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeValue {
    /// Index into the document string pool.
    String(u32),
    /// Resource id of the form `0xPPTTEEEE`.
    Reference(u32),
    IntDec(i32),
    Boolean(bool),
    Other { data_type: u8, data: u32 },
}

impl AttributeValue {
    pub fn from_typed(typed: &TypedValue) -> Self {
        match typed.data_type {
            TYPE_STRING => Self::String(typed.data),
            TYPE_REFERENCE => Self::Reference(typed.data),
            TYPE_INT_DEC => Self::IntDec(typed.data as i32),
            TYPE_BOOLEAN => Self::Boolean(typed.data != 0),
            data_type => Self::Other {
                data_type,
                data: typed.data,
            },
        }
    }

    /// The 32-bit data word as stored.
    pub fn raw(&self) -> u32 {
        match *self {
            Self::String(i) => i,
            Self::Reference(id) => id,
            Self::IntDec(v) => v as u32,
            Self::Boolean(b) => {
                if b {
                    0xFFFF_FFFF
                } else {
                    0
                }
            }
            Self::Other { data, .. } => data,
        }
    }
}

/// How [`AxmlDocument::set_label`] writes the new name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Overwrite the existing pool string inside its slot; the new name must
    /// encode no longer than the old one.
    InPlace,
    /// Re-encode the string pool; any length is accepted.
    #[default]
    Rebuild,
}

const NODE_HEADER_LEN: u16 = 16;
const ATTRIBUTE_LEN: u16 = 20;

/// Whether unknown chunk types are kept or rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownChunks {
    #[default]
    Preserve,
    Reject,
}

impl AxmlDocument {
    pub fn new(string_pool: StringPool, resource_map: Option<Vec<u32>>, chunks: Vec<XmlChunk>) -> Self {
        Self {
            string_pool,
            resource_map,
            chunks,
            trailing: Vec::new(),
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, AxmlError> {
        Self::parse_with(bytes, UnknownChunks::Preserve)
    }

    pub fn parse_with(bytes: &[u8], unknown: UnknownChunks) -> Result<Self, AxmlError> {
        if bytes.is_empty() {
            return Err(AxmlError::MalformedChunk("empty input".into()));
        }
        let outer = ChunkHeader::read(bytes, 0)?;
        if outer.kind != RES_XML {
            return Err(AxmlError::MalformedChunk(format!(
                "leading chunk type 0x{:04x} is not binary XML",
                outer.kind
            )));
        }
        if outer.header_size as usize != CHUNK_HEADER_LEN {
            return Err(AxmlError::MalformedChunk(format!(
                "binary XML header size {} != 8",
                outer.header_size
            )));
        }
        if outer.size as usize != bytes.len() {
            return Err(AxmlError::MalformedChunk(format!(
                "binary XML chunk size {} does not match input length {}",
                outer.size,
                bytes.len()
            )));
        }

        let mut pos = CHUNK_HEADER_LEN;
        let pool_header = ChunkHeader::read(bytes, pos)?;
        if pool_header.kind != RES_STRING_POOL {
            return Err(AxmlError::MalformedChunk(format!(
                "expected string pool after XML header, found 0x{:04x}",
                pool_header.kind
            )));
        }
        let string_pool = StringPool::parse(&bytes[pos..pos + pool_header.size as usize])?;
        pos += pool_header.size as usize;

        let mut resource_map = None;
        if pos + CHUNK_HEADER_LEN <= bytes.len() {
            let h = ChunkHeader::read(bytes, pos)?;
            if h.kind == RES_XML_RESOURCE_MAP {
                let body = &bytes[pos + h.header_size as usize..pos + h.size as usize];
                if !body.len().is_multiple_of(4) {
                    return Err(AxmlError::MalformedChunk(
                        "resource map length not a multiple of 4".into(),
                    ));
                }
                resource_map = Some(
                    body.chunks_exact(4)
                        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                );
                pos += h.size as usize;
            }
        }

        let mut chunks = Vec::new();
        while pos + CHUNK_HEADER_LEN <= bytes.len() {
            let h = ChunkHeader::read(bytes, pos)?;
            let chunk = &bytes[pos..pos + h.size as usize];
            chunks.push(parse_node(h, chunk, pos, unknown)?);
            pos += h.size as usize;
        }
        let trailing = bytes[pos..].to_vec();

        let doc = Self {
            string_pool,
            resource_map,
            chunks,
            trailing,
        };
        doc.validate_indices()?;
        Ok(doc)
    }

    /// Every string index referenced by a chunk must exist in the pool.
    pub fn validate_indices(&self) -> Result<(), AxmlError> {
        let n = self.string_pool.len() as u32;
        let check = |idx: u32, what: &str| -> Result<(), AxmlError> {
            if idx != NO_INDEX && idx >= n {
                Err(AxmlError::BadStringPool(format!(
                    "{what} references string {idx}, pool has {n}"
                )))
            } else {
                Ok(())
            }
        };
        for chunk in &self.chunks {
            match chunk {
                XmlChunk::StartNamespace(ns) | XmlChunk::EndNamespace(ns) => {
                    check(ns.info.comment, "namespace comment")?;
                    check(ns.prefix, "namespace prefix")?;
                    check(ns.uri, "namespace uri")?;
                }
                XmlChunk::StartElement(el) => {
                    check(el.info.comment, "element comment")?;
                    check(el.namespace, "element namespace")?;
                    check(el.name, "element name")?;
                    for a in &el.attributes {
                        check(a.namespace, "attribute namespace")?;
                        check(a.name, "attribute name")?;
                        check(a.raw_value, "attribute raw value")?;
                        if a.typed.data_type == TYPE_STRING {
                            check(a.typed.data, "attribute string value")?;
                        }
                    }
                }
                XmlChunk::EndElement(el) => {
                    check(el.info.comment, "element comment")?;
                    check(el.namespace, "element namespace")?;
                    check(el.name, "element name")?;
                }
                XmlChunk::CData(cd) => {
                    check(cd.info.comment, "cdata comment")?;
                    check(cd.data, "cdata")?;
                }
                XmlChunk::Opaque(_) => {}
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> Result<Vec<u8>, AxmlError> {
        let mut body = Vec::new();
        self.string_pool.write(&mut body)?;
        if let Some(map) = &self.resource_map {
            ChunkHeader {
                kind: RES_XML_RESOURCE_MAP,
                header_size: CHUNK_HEADER_LEN as u16,
                size: (CHUNK_HEADER_LEN + 4 * map.len()) as u32,
            }
            .write(&mut body);
            for id in map {
                put_u32(&mut body, *id);
            }
        }
        for chunk in &self.chunks {
            write_node(chunk, &mut body);
        }
        body.extend_from_slice(&self.trailing);

        let mut out = Vec::with_capacity(body.len() + CHUNK_HEADER_LEN);
        ChunkHeader {
            kind: RES_XML,
            header_size: CHUNK_HEADER_LEN as u16,
            size: (body.len() + CHUNK_HEADER_LEN) as u32,
        }
        .write(&mut out);
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn string(&self, index: u32) -> Option<&str> {
        self.string_pool.get(index)
    }

    /// Opaque chunks carried through unparsed.
    pub fn unknown_chunk_count(&self) -> usize {
        self.chunks
            .iter()
            .filter(|c| matches!(c, XmlChunk::Opaque(_)))
            .count()
    }

    /// Index into `chunks` of the first start element whose ancestry (root
    /// first) equals `path`.
    pub fn find_element(&self, path: &[&str]) -> Option<usize> {
        let mut stack: Vec<&str> = Vec::new();
        for (i, chunk) in self.chunks.iter().enumerate() {
            match chunk {
                XmlChunk::StartElement(el) => {
                    stack.push(self.string(el.name).unwrap_or(""));
                    if stack.len() == path.len() && stack.iter().zip(path).all(|(a, b)| a == b) {
                        return Some(i);
                    }
                }
                XmlChunk::EndElement(_) => {
                    stack.pop();
                }
                _ => {}
            }
        }
        None
    }

    fn element(&self, index: usize) -> &StartElement {
        match &self.chunks[index] {
            XmlChunk::StartElement(el) => el,
            _ => unreachable!("find_element returns start elements"),
        }
    }

    fn attribute_position(&self, el: &StartElement, name: &str) -> Option<usize> {
        el.attributes
            .iter()
            .position(|a| self.string(a.name) == Some(name))
    }

    /// Looks up an attribute by name (namespace ignored) on the first element
    /// matching `path`.
    pub fn get_attribute(&self, path: &[&str], attr: &str) -> Result<AttributeValue, AxmlError> {
        if path.is_empty() {
            return Err(AxmlError::ElementNotFound(String::new()));
        }
        let idx = self
            .find_element(path)
            .ok_or_else(|| AxmlError::ElementNotFound(path.join("/")))?;
        let el = self.element(idx);
        let pos = self
            .attribute_position(el, attr)
            .ok_or_else(|| AxmlError::AttributeNotFound(format!("{}@{attr}", path.join("/"))))?;
        Ok(AttributeValue::from_typed(&el.attributes[pos].typed))
    }

    /// Like [`get_attribute`](Self::get_attribute), resolving string values
    /// to their text.
    pub fn get_attribute_text(&self, path: &[&str], attr: &str) -> Result<Option<String>, AxmlError> {
        Ok(match self.get_attribute(path, attr)? {
            AttributeValue::String(i) => self.string(i).map(str::to_owned),
            _ => None,
        })
    }

    /// Sets the application label (`manifest/application@label`).
    pub fn set_label(&mut self, new_name: &str, mode: LabelMode) -> Result<(), AxmlError> {
        if new_name.is_empty() {
            return Err(AxmlError::InvalidName("new name is empty".into()));
        }
        let el_idx = self
            .find_element(&["manifest", "application"])
            .ok_or(AxmlError::LabelNotFound)?;
        let attr_pos = self
            .attribute_position(self.element(el_idx), "label")
            .ok_or(AxmlError::LabelNotFound)?;
        let attr = self.element(el_idx).attributes[attr_pos];
        match (mode, AttributeValue::from_typed(&attr.typed)) {
            (LabelMode::InPlace, AttributeValue::String(index)) => {
                let utf8 = self.string_pool.is_utf8();
                self.string_pool
                    .overwrite_in_place(index, new_name)
                    .map_err(|e| AxmlError::NameTooLong {
                        name: new_name.to_owned(),
                        encoded: encoded_len(new_name, utf8).unwrap_or(e.needed),
                        slot: e.available,
                    })
            }
            (LabelMode::InPlace, AttributeValue::Reference(id)) => {
                Err(AxmlError::LabelIsResourceReference(id))
            }
            (LabelMode::Rebuild, AttributeValue::String(index))
                if self.string_reference_count(index) == 1 =>
            {
                self.string_pool.set(index, new_name);
                Ok(())
            }
            (LabelMode::Rebuild, AttributeValue::String(_) | AttributeValue::Reference(_)) => {
                let index = self.string_pool.push(new_name);
                let XmlChunk::StartElement(el) = &mut self.chunks[el_idx] else {
                    unreachable!()
                };
                let a = &mut el.attributes[attr_pos];
                a.raw_value = index;
                a.typed = TypedValue::new(TYPE_STRING, index);
                Ok(())
            }
            (_, other) => Err(AxmlError::LabelNotEditable(format!("{other:?}"))),
        }
    }

    /// Number of places that point at pool string `index`.
    fn string_reference_count(&self, index: u32) -> usize {
        let mut n = 0;
        let mut hit = |i: u32| {
            if i == index {
                n += 1;
            }
        };
        for chunk in &self.chunks {
            match chunk {
                XmlChunk::StartNamespace(ns) | XmlChunk::EndNamespace(ns) => {
                    hit(ns.info.comment);
                    hit(ns.prefix);
                    hit(ns.uri);
                }
                XmlChunk::StartElement(el) => {
                    hit(el.info.comment);
                    hit(el.namespace);
                    hit(el.name);
                    for a in &el.attributes {
                        hit(a.namespace);
                        hit(a.name);
                        // raw_value and typed data normally name the same
                        // string; count the attribute once.
                        if a.typed.data_type == TYPE_STRING && a.typed.data == index {
                            hit(index);
                        } else {
                            hit(a.raw_value);
                        }
                    }
                }
                XmlChunk::EndElement(el) => {
                    hit(el.info.comment);
                    hit(el.namespace);
                    hit(el.name);
                }
                XmlChunk::CData(cd) => {
                    hit(cd.info.comment);
                    hit(cd.data);
                }
                XmlChunk::Opaque(_) => {}
            }
        }
        n
    }

    /// Renders the document as indented textual XML. References print as
    /// `@XXXXXXXX`, booleans as `true`/`false`; empty elements self-close.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        let mut depth = 0usize;
        let mut pending_ns: Vec<(String, String)> = Vec::new();
        let mut prefixes: Vec<(u32, u32)> = Vec::new();
        let s = |i: u32| self.string(i).unwrap_or("");
        let mut skip_end = false;
        for (i, chunk) in self.chunks.iter().enumerate() {
            match chunk {
                XmlChunk::StartNamespace(ns) => {
                    pending_ns.push((s(ns.prefix).to_owned(), s(ns.uri).to_owned()));
                    prefixes.push((ns.uri, ns.prefix));
                }
                XmlChunk::EndNamespace(_) => {
                    prefixes.pop();
                }
                XmlChunk::StartElement(el) => {
                    let _ = write!(out, "{:indent$}<{}", "", s(el.name), indent = depth * 2);
                    for (prefix, uri) in pending_ns.drain(..) {
                        let _ = write!(out, " xmlns:{prefix}=\"{uri}\"");
                    }
                    for a in &el.attributes {
                        let name = match prefixes.iter().rev().find(|(u, _)| *u == a.namespace) {
                            Some((_, p)) if a.namespace != NO_INDEX => {
                                format!("{}:{}", s(*p), s(a.name))
                            }
                            _ => s(a.name).to_owned(),
                        };
                        let value = match AttributeValue::from_typed(&a.typed) {
                            AttributeValue::String(i) => s(i).to_owned(),
                            AttributeValue::Reference(id) => format!("@{id:08X}"),
                            AttributeValue::IntDec(v) => v.to_string(),
                            AttributeValue::Boolean(b) => b.to_string(),
                            AttributeValue::Other { data, .. } => format!("0x{data:08x}"),
                        };
                        let _ = write!(out, " {name}=\"{}\"", escape(&value));
                    }
                    if matches!(self.chunks.get(i + 1), Some(XmlChunk::EndElement(_))) {
                        out.push_str("/>\n");
                        skip_end = true;
                    } else {
                        out.push_str(">\n");
                        depth += 1;
                    }
                }
                XmlChunk::EndElement(_) if skip_end => skip_end = false,
                XmlChunk::EndElement(el) => {
                    depth = depth.saturating_sub(1);
                    let _ = writeln!(out, "{:indent$}</{}>", "", s(el.name), indent = depth * 2);
                }
                XmlChunk::CData(cd) => {
                    let _ = writeln!(out, "{:indent$}{}", "", escape(s(cd.data)), indent = depth * 2);
                }
                XmlChunk::Opaque(_) => {}
            }
        }
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn parse_node(
    h: ChunkHeader,
    chunk: &[u8],
    offset: usize,
    unknown: UnknownChunks,
) -> Result<XmlChunk, AxmlError> {
    let known = matches!(
        h.kind,
        RES_XML_START_NAMESPACE
            | RES_XML_END_NAMESPACE
            | RES_XML_START_ELEMENT
            | RES_XML_END_ELEMENT
            | RES_XML_CDATA
    );
    if !known {
        if unknown == UnknownChunks::Reject {
            return Err(AxmlError::UnsupportedChunk {
                kind: h.kind,
                offset,
            });
        }
        warn!("keeping unknown chunk type 0x{:04x} at offset {offset} verbatim", h.kind);
        return Ok(XmlChunk::Opaque(chunk.to_vec()));
    }
    if h.header_size != NODE_HEADER_LEN {
        return Err(AxmlError::MalformedChunk(format!(
            "XML node at offset {offset} has header size {}",
            h.header_size
        )));
    }
    let mut r = Reader::at(chunk, 8, "XML node");
    let info = NodeInfo {
        line: r.u32()?,
        comment: r.u32()?,
    };
    let node = match h.kind {
        RES_XML_START_NAMESPACE | RES_XML_END_NAMESPACE => {
            let ns = Namespace {
                info,
                prefix: r.u32()?,
                uri: r.u32()?,
            };
            if h.kind == RES_XML_START_NAMESPACE {
                XmlChunk::StartNamespace(ns)
            } else {
                XmlChunk::EndNamespace(ns)
            }
        }
        RES_XML_START_ELEMENT => {
            let namespace = r.u32()?;
            let name = r.u32()?;
            let attr_start = r.u16()?;
            let attr_size = r.u16()?;
            let count = r.u16()?;
            let id_index = r.u16()?;
            let class_index = r.u16()?;
            let style_index = r.u16()?;
            if attr_start != ATTRIBUTE_LEN || attr_size != ATTRIBUTE_LEN {
                return Err(AxmlError::MalformedChunk(format!(
                    "element at offset {offset}: attribute start/size {attr_start}/{attr_size}"
                )));
            }
            let mut attributes = Vec::with_capacity(count as usize);
            for _ in 0..count {
                attributes.push(Attribute {
                    namespace: r.u32()?,
                    name: r.u32()?,
                    raw_value: r.u32()?,
                    typed: TypedValue::read(&mut r)?,
                });
            }
            let trailing = chunk[r.pos()..].to_vec();
            XmlChunk::StartElement(StartElement {
                info,
                namespace,
                name,
                id_index,
                class_index,
                style_index,
                attributes,
                trailing,
            })
        }
        RES_XML_END_ELEMENT => XmlChunk::EndElement(EndElement {
            info,
            namespace: r.u32()?,
            name: r.u32()?,
        }),
        RES_XML_CDATA => XmlChunk::CData(CData {
            info,
            data: r.u32()?,
            typed: TypedValue::read(&mut r)?,
        }),
        _ => unreachable!(),
    };
    let consumed = match &node {
        XmlChunk::StartElement(_) => chunk.len(),
        _ => r.pos(),
    };
    if consumed != chunk.len() {
        return Err(AxmlError::MalformedChunk(format!(
            "XML node 0x{:04x} at offset {offset}: size {} but body ends at {consumed}",
            h.kind,
            chunk.len()
        )));
    }
    Ok(node)
}

fn write_node(chunk: &XmlChunk, out: &mut Vec<u8>) {
    let (kind, info) = match chunk {
        XmlChunk::Opaque(bytes) => {
            out.extend_from_slice(bytes);
            return;
        }
        XmlChunk::StartNamespace(ns) => (RES_XML_START_NAMESPACE, ns.info),
        XmlChunk::EndNamespace(ns) => (RES_XML_END_NAMESPACE, ns.info),
        XmlChunk::StartElement(el) => (RES_XML_START_ELEMENT, el.info),
        XmlChunk::EndElement(el) => (RES_XML_END_ELEMENT, el.info),
        XmlChunk::CData(cd) => (RES_XML_CDATA, cd.info),
    };
    let mut body = Vec::new();
    match chunk {
        XmlChunk::StartNamespace(ns) | XmlChunk::EndNamespace(ns) => {
            put_u32(&mut body, ns.prefix);
            put_u32(&mut body, ns.uri);
        }
        XmlChunk::StartElement(el) => {
            put_u32(&mut body, el.namespace);
            put_u32(&mut body, el.name);
            put_u16(&mut body, ATTRIBUTE_LEN);
            put_u16(&mut body, ATTRIBUTE_LEN);
            put_u16(&mut body, el.attributes.len() as u16);
            put_u16(&mut body, el.id_index);
            put_u16(&mut body, el.class_index);
            put_u16(&mut body, el.style_index);
            for a in &el.attributes {
                put_u32(&mut body, a.namespace);
                put_u32(&mut body, a.name);
                put_u32(&mut body, a.raw_value);
                a.typed.write(&mut body);
            }
            body.extend_from_slice(&el.trailing);
        }
        XmlChunk::EndElement(el) => {
            put_u32(&mut body, el.namespace);
            put_u32(&mut body, el.name);
        }
        XmlChunk::CData(cd) => {
            put_u32(&mut body, cd.data);
            cd.typed.write(&mut body);
        }
        XmlChunk::Opaque(_) => unreachable!(),
    }
    ChunkHeader {
        kind,
        header_size: NODE_HEADER_LEN,
        size: (NODE_HEADER_LEN as usize + body.len()) as u32,
    }
    .write(out);
    put_u32(out, info.line);
    put_u32(out, info.comment);
    out.extend_from_slice(&body);
}
