//! The compiled resource table (`resources.arsc`), parsed only as far as
//! resolving resource ids to entry names and density-qualified file paths.

use std::collections::BTreeMap;

use log::warn;
use serde::Serialize;

use super::chunk::*;
use super::string_pool::StringPool;
use super::AxmlError;

const FLAG_COMPLEX: u16 = 0x0001;
const TYPE_FLAG_SPARSE: u8 = 0x01;
const TYPE_FLAG_OFFSET16: u8 = 0x02;
const DENSITY_OFFSET_IN_CONFIG: usize = 14;

#[derive(Debug, Clone)]
pub struct ResourceTable {
    /// Global value pool; file paths live here.
    pub strings: StringPool,
    pub packages: Vec<Package>,
    /// Things skipped while parsing (complex values, unknown chunks).
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Package {
    pub id: u8,
    pub name: String,
    pub type_strings: StringPool,
    pub key_strings: StringPool,
    pub types: BTreeMap<u8, TypeGroup>,
}

#[derive(Debug, Clone, Default)]
pub struct TypeGroup {
    pub id: u8,
    pub name: String,
    pub spec_flags: Vec<u32>,
    pub configs: Vec<TypeConfig>,
}

#[derive(Debug, Clone)]
pub struct TypeConfig {
    /// Raw `ResTable_config` bytes.
    pub config: Vec<u8>,
    pub density: u16,
    pub entries: BTreeMap<u16, Entry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: u32,
    pub name: String,
    pub value: EntryValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryValue {
    Simple(TypedValue),
    /// A bag (style, array, ...); items are not decoded.
    Complex { parent: u32, count: u32 },
}

/// One density variant of a file-backed resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResourcePath {
    pub density: String,
    pub path: String,
}

type Variant<'a> = (&'a TypeConfig, &'a Entry);

/// Name of a density qualifier as used in resource directory names.
pub fn density_name(density: u16) -> String {
    match density {
        0 => "default".into(),
        120 => "ldpi".into(),
        160 => "mdpi".into(),
        213 => "tvdpi".into(),
        240 => "hdpi".into(),
        320 => "xhdpi".into(),
        480 => "xxhdpi".into(),
        640 => "xxxhdpi".into(),
        0xFFFE => "anydpi".into(),
        0xFFFF => "nodpi".into(),
        other => format!("{other}dpi"),
    }
}

impl ResourceTable {
    pub fn parse(bytes: &[u8]) -> Result<Self, AxmlError> {
        if bytes.is_empty() {
            return Err(AxmlError::MalformedChunk("empty input".into()));
        }
        let outer = ChunkHeader::read(bytes, 0)?;
        if outer.kind != RES_TABLE {
            return Err(AxmlError::MalformedChunk(format!(
                "leading chunk type 0x{:04x} is not a resource table",
                outer.kind
            )));
        }
        let bytes = &bytes[..outer.size as usize];
        let mut r = Reader::at(bytes, 8, "table header");
        let package_count = r.u32()?;

        let mut strings = None;
        let mut packages = Vec::new();
        let mut warnings = Vec::new();
        let mut pos = outer.header_size as usize;
        while pos + CHUNK_HEADER_LEN <= bytes.len() {
            let h = ChunkHeader::read(bytes, pos)?;
            let chunk = &bytes[pos..pos + h.size as usize];
            match h.kind {
                RES_STRING_POOL if strings.is_none() => strings = Some(StringPool::parse(chunk)?),
                RES_TABLE_PACKAGE => packages.push(parse_package(chunk, pos, &mut warnings)?),
                other => {
                    let msg = format!("skipped table chunk 0x{other:04x} at offset {pos}");
                    warn!("{msg}");
                    warnings.push(msg);
                }
            }
            pos += h.size as usize;
        }
        let strings = strings
            .ok_or_else(|| AxmlError::MalformedChunk("resource table has no string pool".into()))?;
        if packages.len() != package_count as usize {
            return Err(AxmlError::MalformedChunk(format!(
                "table declares {package_count} packages, found {}",
                packages.len()
            )));
        }
        let table = Self {
            strings,
            packages,
            warnings,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), AxmlError> {
        let n = self.strings.len() as u32;
        for pkg in &self.packages {
            for group in pkg.types.values() {
                for cfg in &group.configs {
                    for entry in cfg.entries.values() {
                        if let EntryValue::Simple(v) = entry.value {
                            if v.data_type == TYPE_STRING && v.data >= n {
                                return Err(AxmlError::BadStringPool(format!(
                                    "{}/{} references global string {}, pool has {n}",
                                    group.name, entry.name, v.data
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn package(&self, id: u8) -> Option<&Package> {
        self.packages.iter().find(|p| p.id == id)
    }

    fn entry_variants(&self, resource_id: u32) -> Result<(&TypeGroup, Vec<Variant<'_>>), AxmlError> {
        let not_found = || AxmlError::ResourceNotFound(resource_id);
        let pkg = self.package((resource_id >> 24) as u8).ok_or_else(not_found)?;
        let group = pkg
            .types
            .get(&(((resource_id >> 16) & 0xFF) as u8))
            .ok_or_else(not_found)?;
        let index = (resource_id & 0xFFFF) as u16;
        let variants: Vec<_> = group
            .configs
            .iter()
            .filter_map(|cfg| cfg.entries.get(&index).map(|e| (cfg, e)))
            .collect();
        if variants.is_empty() {
            return Err(not_found());
        }
        Ok((group, variants))
    }

    /// `type/name` of a resource id.
    pub fn entry_name(&self, resource_id: u32) -> Result<String, AxmlError> {
        let (group, variants) = self.entry_variants(resource_id)?;
        Ok(format!("{}/{}", group.name, variants[0].1.name))
    }

    /// Every density-qualified file path configured for `resource_id`.
    /// Entries whose values are not file paths yield an empty list.
    pub fn resolve_resource_paths(&self, resource_id: u32) -> Result<Vec<ResourcePath>, AxmlError> {
        let (_, variants) = self.entry_variants(resource_id)?;
        Ok(variants
            .into_iter()
            .filter_map(|(cfg, entry)| match entry.value {
                EntryValue::Simple(v) if v.data_type == TYPE_STRING => self
                    .strings
                    .get(v.data)
                    .filter(|s| s.starts_with("res/"))
                    .map(|path| ResourcePath {
                        density: density_name(cfg.density),
                        path: path.to_owned(),
                    }),
                _ => None,
            })
            .collect())
    }

    /// The default-configuration string value of a resource, if it has one.
    pub fn string_value(&self, resource_id: u32) -> Option<String> {
        let (_, variants) = self.entry_variants(resource_id).ok()?;
        let (_, entry) = variants
            .iter()
            .find(|(cfg, _)| cfg.config.iter().skip(4).all(|b| *b == 0))
            .or(variants.first())?;
        match entry.value {
            EntryValue::Simple(v) if v.data_type == TYPE_STRING => {
                self.strings.get(v.data).map(str::to_owned)
            }
            _ => None,
        }
    }
}

fn parse_package(chunk: &[u8], offset: usize, warnings: &mut Vec<String>) -> Result<Package, AxmlError> {
    let h = ChunkHeader::read(chunk, 0)?;
    let mut r = Reader::at(chunk, 8, "package header");
    let id = r.u32()?;
    if id > 0xFF {
        return Err(AxmlError::MalformedChunk(format!("package id 0x{id:x} out of range")));
    }
    let name_units: Vec<u16> = r
        .bytes(256)?
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .take_while(|u| *u != 0)
        .collect();
    let name = String::from_utf16_lossy(&name_units);
    let type_strings_off = r.u32()? as usize;
    let _last_public_type = r.u32()?;
    let key_strings_off = r.u32()? as usize;

    let sub_pool = |off: usize, what: &str| -> Result<StringPool, AxmlError> {
        if off < h.header_size as usize || off >= chunk.len() {
            return Err(AxmlError::MalformedChunk(format!(
                "package {what} offset {off} out of range"
            )));
        }
        let ph = ChunkHeader::read(chunk, off)?;
        StringPool::parse(&chunk[off..off + ph.size as usize])
    };
    let type_strings = sub_pool(type_strings_off, "type strings")?;
    let key_strings = sub_pool(key_strings_off, "key strings")?;

    let mut types: BTreeMap<u8, TypeGroup> = BTreeMap::new();
    let mut pos = h.header_size as usize;
    while pos + CHUNK_HEADER_LEN <= chunk.len() {
        let ch = ChunkHeader::read(chunk, pos)?;
        let body = &chunk[pos..pos + ch.size as usize];
        match ch.kind {
            RES_STRING_POOL => {}
            RES_TABLE_TYPE_SPEC => {
                let mut r = Reader::at(body, 8, "type spec");
                let type_id = r.u8()?;
                let _res0 = r.u8()?;
                let _res1 = r.u16()?;
                let count = r.u32()?;
                let mut flags = Vec::new();
                for _ in 0..count {
                    flags.push(r.u32()?);
                }
                let group = types.entry(type_id).or_default();
                group.id = type_id;
                group.name = type_name(&type_strings, type_id)?;
                group.spec_flags = flags;
            }
            RES_TABLE_TYPE => {
                let (type_id, cfg) = parse_type(body, ch, &key_strings, offset + pos, warnings)?;
                let group = types.entry(type_id).or_default();
                if group.name.is_empty() {
                    group.id = type_id;
                    group.name = type_name(&type_strings, type_id)?;
                }
                group.configs.push(cfg);
            }
            other => {
                let msg = format!("skipped package chunk 0x{other:04x} at offset {}", offset + pos);
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        pos += ch.size as usize;
    }

    Ok(Package {
        id: id as u8,
        name,
        type_strings,
        key_strings,
        types,
    })
}

fn type_name(type_strings: &StringPool, type_id: u8) -> Result<String, AxmlError> {
    type_id
        .checked_sub(1)
        .and_then(|i| type_strings.get(i as u32))
        .map(str::to_owned)
        .ok_or_else(|| AxmlError::BadStringPool(format!("type id {type_id} has no name")))
}

fn parse_type(
    body: &[u8],
    h: ChunkHeader,
    keys: &StringPool,
    offset: usize,
    warnings: &mut Vec<String>,
) -> Result<(u8, TypeConfig), AxmlError> {
    let mut r = Reader::at(body, 8, "type chunk");
    let type_id = r.u8()?;
    let flags = r.u8()?;
    let _reserved = r.u16()?;
    let entry_count = r.u32()?;
    let entries_start = r.u32()? as usize;
    let config_start = r.pos();
    let config_size = Reader::at(body, config_start, "type config").u32()? as usize;
    if config_start + config_size > h.header_size as usize {
        return Err(AxmlError::MalformedChunk(format!(
            "type chunk at offset {offset}: config overruns header"
        )));
    }
    let config = body[config_start..config_start + config_size].to_vec();
    let density = if config_size >= DENSITY_OFFSET_IN_CONFIG + 2 {
        u16::from_le_bytes([
            config[DENSITY_OFFSET_IN_CONFIG],
            config[DENSITY_OFFSET_IN_CONFIG + 1],
        ])
    } else {
        0
    };

    let mut r = Reader::at(body, h.header_size as usize, "type entry offsets");
    let mut slots: Vec<(u16, usize)> = Vec::new();
    for i in 0..entry_count {
        if flags & TYPE_FLAG_SPARSE != 0 {
            let idx = r.u16()?;
            let off = r.u16()? as usize * 4;
            slots.push((idx, off));
        } else if flags & TYPE_FLAG_OFFSET16 != 0 {
            let off = r.u16()?;
            if off != 0xFFFF {
                slots.push((i as u16, off as usize * 4));
            }
        } else {
            let off = r.u32()?;
            if off != NO_INDEX {
                slots.push((i as u16, off as usize));
            }
        }
    }

    let mut entries = BTreeMap::new();
    for (index, off) in slots {
        let mut r = Reader::at(body, entries_start + off, "table entry");
        let size = r.u16()?;
        let eflags = r.u16()?;
        let key = r.u32()?;
        let name = keys
            .get(key)
            .ok_or_else(|| AxmlError::BadStringPool(format!("entry key {key} out of range")))?
            .to_owned();
        let value = if eflags & FLAG_COMPLEX != 0 {
            let parent = r.u32()?;
            let count = r.u32()?;
            // bag items follow at entries_start + off + size
            let mut items = Reader::at(body, entries_start + off + size as usize, "bag items");
            items.bytes(count as usize * 12)?;
            let msg = format!("complex value for {name} not decoded");
            warnings.push(msg);
            EntryValue::Complex { parent, count }
        } else {
            EntryValue::Simple(TypedValue::read(&mut r)?)
        };
        entries.insert(index, Entry { key, name, value });
    }

    Ok((
        type_id,
        TypeConfig {
            config,
            density,
            entries,
        },
    ))
}
