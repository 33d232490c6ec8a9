//! Android binary XML and resource table reading and editing.
//!
//! Enough of both formats is modelled to read and rewrite the application
//! label in a packaged manifest and to find the files behind the launcher
//! icon. Chunks the parser does not understand are carried through as raw
//! bytes, so an unedited document re-serializes byte-for-byte.

pub mod chunk;
mod document;
mod string_pool;
mod table;

use thiserror::Error;

pub use chunk::TypedValue;
pub use document::{
    Attribute, AttributeValue, AxmlDocument, CData, EndElement, LabelMode, Namespace, NodeInfo,
    StartElement, UnknownChunks, XmlChunk,
};
pub use string_pool::{encoded_len, SlotTooSmall, StringPool};
pub use table::{
    density_name, Entry, EntryValue, Package, ResourcePath, ResourceTable, TypeConfig, TypeGroup,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AxmlError {
    #[error("MalformedChunk: {0}")]
    MalformedChunk(String),
    #[error("BadStringPool: {0}")]
    BadStringPool(String),
    #[error("UnsupportedChunk: type 0x{kind:04x} at offset {offset}")]
    UnsupportedChunk { kind: u16, offset: usize },
    #[error("ElementNotFound: {0}")]
    ElementNotFound(String),
    #[error("AttributeNotFound: {0}")]
    AttributeNotFound(String),
    #[error("NameTooLong: {name:?} encodes to {encoded} bytes, the original slot holds {slot}")]
    NameTooLong {
        name: String,
        encoded: usize,
        slot: usize,
    },
    #[error("LabelIsResourceReference: label is @{0:08X}, no inline string to edit")]
    LabelIsResourceReference(u32),
    #[error("LabelNotFound: application element has no label attribute")]
    LabelNotFound,
    #[error("LabelNotEditable: label value {0} is neither a string nor a reference")]
    LabelNotEditable(String),
    #[error("InvalidName: {0}")]
    InvalidName(String),
    #[error("ResourceNotFound: 0x{0:08x}")]
    ResourceNotFound(u32),
}

impl AxmlError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::MalformedChunk(_) => "MalformedChunk",
            Self::BadStringPool(_) => "BadStringPool",
            Self::UnsupportedChunk { .. } => "UnsupportedChunk",
            Self::ElementNotFound(_) => "ElementNotFound",
            Self::AttributeNotFound(_) => "AttributeNotFound",
            Self::NameTooLong { .. } => "NameTooLong",
            Self::LabelIsResourceReference(_) => "LabelIsResourceReference",
            Self::LabelNotFound => "LabelNotFound",
            Self::LabelNotEditable(_) => "LabelNotEditable",
            Self::InvalidName(_) => "InvalidName",
            Self::ResourceNotFound(_) => "ResourceNotFound",
        }
    }
}

pub fn parse_axml(bytes: &[u8]) -> Result<AxmlDocument, AxmlError> {
    AxmlDocument::parse(bytes)
}

pub fn serialize_axml(doc: &AxmlDocument) -> Result<Vec<u8>, AxmlError> {
    doc.serialize()
}

pub fn parse_resource_table(bytes: &[u8]) -> Result<ResourceTable, AxmlError> {
    ResourceTable::parse(bytes)
}
