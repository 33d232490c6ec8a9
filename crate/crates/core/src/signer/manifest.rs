//! JAR manifest text: writing with 72-byte line wrapping and parsing back
//! into sections with their exact bytes.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use sha2::{Digest, Sha256};

use crate::apkzip::ArchiveModel;

pub const DIGEST_ATTR: &str = "SHA-256-Digest";
pub const MANIFEST_DIGEST_ATTR: &str = "SHA-256-Digest-Manifest";
pub const CREATED_BY: &str = "1.0 (morphvault)";

const MAX_LINE: usize = 72;

pub fn b64_sha256(data: &[u8]) -> String {
    B64.encode(Sha256::digest(data))
}

/// Writes `name: value` followed by CRLF, wrapping so no line exceeds 72
/// bytes. Continuation lines start with a single space. Multi-byte UTF-8
/// sequences are never split.
pub fn write_attribute(out: &mut Vec<u8>, name: &str, value: &str) {
    let line = format!("{name}: {value}");
    let mut rest = line.as_str();
    let mut limit = MAX_LINE;
    let mut first = true;
    loop {
        if !first {
            out.push(b' ');
        }
        if rest.len() <= limit {
            out.extend_from_slice(rest.as_bytes());
            out.extend_from_slice(b"\r\n");
            return;
        }
        let mut cut = limit;
        while !rest.is_char_boundary(cut) {
            cut -= 1;
        }
        out.extend_from_slice(&rest.as_bytes()[..cut]);
        out.extend_from_slice(b"\r\n");
        rest = &rest[cut..];
        first = false;
        limit = MAX_LINE - 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestSection {
    pub name: String,
    /// Base64 SHA-256 of the entry's uncompressed bytes.
    pub digest: String,
}

impl ManifestSection {
    /// Exact bytes of this section, trailing blank line included.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_attribute(&mut out, "Name", &self.name);
        write_attribute(&mut out, DIGEST_ATTR, &self.digest);
        out.extend_from_slice(b"\r\n");
        out
    }
}

/// `META-INF/MANIFEST.MF` contents: one SHA-256 section per signed entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestManifest {
    pub main_attributes: Vec<(String, String)>,
    pub sections: Vec<ManifestSection>,
}

impl DigestManifest {
    pub fn main_section_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (k, v) in &self.main_attributes {
            write_attribute(&mut out, k, v);
        }
        out.extend_from_slice(b"\r\n");
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.main_section_bytes();
        for s in &self.sections {
            out.extend_from_slice(&s.to_bytes());
        }
        out
    }

    pub fn section(&self, name: &str) -> Option<&ManifestSection> {
        self.sections.iter().find(|s| s.name == name)
    }
}

pub fn is_meta_inf(path: &str) -> bool {
    path.starts_with("META-INF/")
}

/// Digests every entry outside `META-INF/`, in archive order.
pub fn compute_entry_digests(model: &ArchiveModel) -> DigestManifest {
    DigestManifest {
        main_attributes: vec![
            ("Manifest-Version".into(), "1.0".into()),
            ("Created-By".into(), CREATED_BY.into()),
        ],
        sections: model
            .entries
            .iter()
            .filter(|e| !is_meta_inf(&e.path))
            .map(|e| ManifestSection {
                name: e.path.clone(),
                digest: b64_sha256(&e.data),
            })
            .collect(),
    }
}

/// Signature file (`.SF`) for a manifest: a digest of the whole manifest plus
/// a digest of each manifest section's bytes.
pub fn signature_file(manifest: &DigestManifest) -> Vec<u8> {
    let mut out = Vec::new();
    write_attribute(&mut out, "Signature-Version", "1.0");
    write_attribute(&mut out, "Created-By", CREATED_BY);
    write_attribute(&mut out, MANIFEST_DIGEST_ATTR, &b64_sha256(&manifest.to_bytes()));
    out.extend_from_slice(b"\r\n");
    for s in &manifest.sections {
        write_attribute(&mut out, "Name", &s.name);
        write_attribute(&mut out, DIGEST_ATTR, &b64_sha256(&s.to_bytes()));
        out.extend_from_slice(b"\r\n");
    }
    out
}

/// A parsed manifest-format section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSection {
    pub attributes: Vec<(String, String)>,
    /// Bytes the section occupied in the file, trailing blank line included.
    pub raw: Vec<u8>,
}

impl ParsedSection {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Parses manifest-format text (MANIFEST.MF or .SF) into the main section
/// and the individual sections. Accepts CRLF, LF or CR line endings.
pub fn parse_sections(bytes: &[u8]) -> Result<(ParsedSection, Vec<ParsedSection>), String> {
    let mut sections = Vec::new();
    let mut current = ParsedSection {
        attributes: Vec::new(),
        raw: Vec::new(),
    };
    let mut pos = 0;
    while pos < bytes.len() {
        let (line, next) = next_line(bytes, pos);
        current.raw.extend_from_slice(&bytes[pos..next]);
        pos = next;
        if line.is_empty() {
            if !current.attributes.is_empty() || sections.is_empty() {
                sections.push(std::mem::replace(
                    &mut current,
                    ParsedSection {
                        attributes: Vec::new(),
                        raw: Vec::new(),
                    },
                ));
            } else {
                // stray blank line between sections
                current.raw.clear();
            }
            continue;
        }
        if line[0] == b' ' {
            let (_, value) = current
                .attributes
                .last_mut()
                .ok_or("continuation line without an attribute")?;
            value.push_str(&String::from_utf8_lossy(&line[1..]));
            continue;
        }
        let text = String::from_utf8_lossy(line);
        let (k, v) = text
            .split_once(": ")
            .ok_or_else(|| format!("malformed manifest line {text:?}"))?;
        current.attributes.push((k.to_owned(), v.to_owned()));
    }
    if !current.attributes.is_empty() {
        sections.push(current);
    }
    if sections.is_empty() {
        return Err("empty manifest".into());
    }
    let main = sections.remove(0);
    Ok((main, sections))
}

fn next_line(bytes: &[u8], start: usize) -> (&[u8], usize) {
    let mut i = start;
    while i < bytes.len() && bytes[i] != b'\r' && bytes[i] != b'\n' {
        i += 1;
    }
    let line = &bytes[start..i];
    if i < bytes.len() && bytes[i] == b'\r' {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'\n' {
        i += 1;
    }
    (line, i)
}
