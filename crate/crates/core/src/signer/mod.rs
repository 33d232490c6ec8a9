//! v1 (JAR-style) archive signing and verification.
//!
//! A signature set is three entries under `META-INF/`: the digest manifest,
//! a signature file over it, and a detached CMS block over the signature
//! file. Only SHA-256 with RSA is produced; verification also accepts CMS
//! blocks that carry signed attributes.

mod cms;
pub mod manifest;

use std::path::Path;

use der::{Decode, DecodePem, Encode};
use rsa::pkcs1::DecodeRsaPrivateKey;
use rsa::pkcs8::{DecodePrivateKey, DecodePublicKey};
use rsa::{RsaPrivateKey, RsaPublicKey};
use serde::Serialize;
use thiserror::Error;
use x509_cert::Certificate;

use crate::apkzip::{read_entries_lenient, ArchiveEntry, ArchiveModel, Method, ZipError};

pub use cms::{sign_detached, verify_detached};
pub use manifest::{compute_entry_digests, signature_file, DigestManifest, ManifestSection};

use manifest::{b64_sha256, is_meta_inf, parse_sections, DIGEST_ATTR, MANIFEST_DIGEST_ATTR};

pub const MANIFEST_PATH: &str = "META-INF/MANIFEST.MF";
pub const DEFAULT_ALIAS: &str = "CERT";

const TEST_KEY_PEM: &str = include_str!("../../keys/testkey.pk8.pem");
const TEST_CERT_PEM: &str = include_str!("../../keys/testkey.x509.pem");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignError {
    #[error("KeyMismatch: certificate public key does not match the private key")]
    KeyMismatch,
    #[error("NotSigned: no META-INF signature set")]
    NotSigned,
    #[error("BadKey: {0}")]
    BadKey(String),
    #[error("Cms: {0}")]
    Cms(String),
    #[error("{0}")]
    Zip(#[from] ZipError),
}

impl SignError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::KeyMismatch => "KeyMismatch",
            Self::NotSigned => "NotSigned",
            Self::BadKey(_) => "BadKey",
            Self::Cms(_) => "Cms",
            Self::Zip(e) => e.name(),
        }
    }
}

/// RSA key plus self-signed certificate.
#[derive(Debug, Clone)]
pub struct SigningMaterial {
    pub private_key: RsaPrivateKey,
    pub certificate: Certificate,
    pub alias: String,
}

impl SigningMaterial {
    /// Pairs a key and certificate, rejecting a certificate for another key.
    pub fn new(private_key: RsaPrivateKey, certificate: Certificate, alias: &str) -> Result<Self, SignError> {
        let spki = certificate
            .tbs_certificate
            .subject_public_key_info
            .to_der()
            .map_err(|e| SignError::BadKey(e.to_string()))?;
        let public = RsaPublicKey::from_public_key_der(&spki).map_err(|_| SignError::KeyMismatch)?;
        if public != private_key.to_public_key() {
            return Err(SignError::KeyMismatch);
        }
        if alias.is_empty() || alias.contains(['/', '\\']) {
            return Err(SignError::BadKey(format!("invalid alias {alias:?}")));
        }
        Ok(Self {
            private_key,
            certificate,
            alias: alias.to_owned(),
        })
    }

    /// Loads a PKCS#8 or PKCS#1 PEM key and a PEM certificate.
    pub fn from_pem(key_pem: &str, cert_pem: &str) -> Result<Self, SignError> {
        let key = RsaPrivateKey::from_pkcs8_pem(key_pem)
            .or_else(|_| RsaPrivateKey::from_pkcs1_pem(key_pem))
            .map_err(|e| SignError::BadKey(e.to_string()))?;
        let cert = Certificate::from_pem(cert_pem.as_bytes())
            .or_else(|_| Certificate::from_der(cert_pem.as_bytes()))
            .map_err(|e| SignError::BadKey(format!("certificate: {e}")))?;
        Self::new(key, cert, DEFAULT_ALIAS)
    }

    pub fn from_files(key: &Path, cert: &Path) -> Result<Self, SignError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| SignError::BadKey(format!("{}: {e}", p.display())))
        };
        Self::from_pem(&read(key)?, &read(cert)?)
    }

    /// The bundled, publicly known test key. Anyone holding this repository
    /// can produce packages signed with it.
    pub fn test_key() -> Self {
        Self::from_pem(TEST_KEY_PEM, TEST_CERT_PEM).expect("bundled test key is consistent")
    }

    pub fn with_alias(mut self, alias: &str) -> Result<Self, SignError> {
        let material = Self::new(self.private_key.clone(), self.certificate.clone(), alias)?;
        self.alias = material.alias;
        Ok(self)
    }

    pub fn certificate_der(&self) -> Vec<u8> {
        self.certificate.to_der().expect("decoded certificate re-encodes")
    }

    pub fn signature_file_path(&self) -> String {
        format!("META-INF/{}.SF", self.alias)
    }

    pub fn block_path(&self) -> String {
        format!("META-INF/{}.RSA", self.alias)
    }
}

/// Whether `path` belongs to a v1 signature set.
pub fn is_signing_entry(path: &str) -> bool {
    let Some(name) = path.strip_prefix("META-INF/") else {
        return false;
    };
    if name.contains('/') {
        return false;
    }
    let upper = name.to_ascii_uppercase();
    upper == "MANIFEST.MF"
        || upper.starts_with("SIG-")
        || [".SF", ".RSA", ".DSA", ".EC"].iter().any(|ext| upper.ends_with(ext))
}

/// Replaces any existing signature set with a fresh one. The manifest, the
/// signature file and the signature block go first in the archive.
pub fn sign_archive(mut model: ArchiveModel, material: &SigningMaterial) -> Result<ArchiveModel, SignError> {
    model.entries.retain(|e| !is_signing_entry(&e.path));
    let manifest = compute_entry_digests(&model);
    let mf = manifest.to_bytes();
    let sf = signature_file(&manifest);
    let block = sign_detached(material, &sf)?;
    let signing = [
        ArchiveEntry::new(MANIFEST_PATH, Method::Deflated, mf),
        ArchiveEntry::new(material.signature_file_path(), Method::Deflated, sf),
        ArchiveEntry::new(material.block_path(), Method::Deflated, block),
    ];
    model.entries.splice(0..0, signing);
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail")]
pub enum FailureReason {
    /// CMS block does not verify over the signature file.
    BadSignature(String),
    /// Signature file's digest of the manifest (or of a section) is wrong.
    ManifestDigestMismatch,
    /// Entry contents do not match the manifest digest.
    DigestMismatch,
    /// Listed in the manifest but absent from the archive.
    MissingEntry,
    /// Present in the archive but absent from the manifest.
    NotCovered,
    /// Manifest section has no SHA-256 digest.
    UnsupportedDigest,
    /// Entry payload could not be decompressed.
    Unreadable,
    /// Manifest or signature file could not be parsed.
    Malformed(String),
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BadSignature(d) => write!(f, "bad signature: {d}"),
            Self::ManifestDigestMismatch => f.write_str("manifest digest mismatch"),
            Self::DigestMismatch => f.write_str("digest mismatch"),
            Self::MissingEntry => f.write_str("entry missing"),
            Self::NotCovered => f.write_str("entry not covered"),
            Self::UnsupportedDigest => f.write_str("no SHA-256 digest"),
            Self::Unreadable => f.write_str("entry unreadable"),
            Self::Malformed(d) => write!(f, "malformed: {d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyFailure {
    pub entry: String,
    pub reason: FailureReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    /// Subject of the embedded signer certificate, when the block parsed.
    pub signer: Option<String>,
    pub failures: Vec<VerifyFailure>,
}

impl VerifyReport {
    pub fn failed(&self, entry: &str) -> Option<&FailureReason> {
        self.failures.iter().find(|f| f.entry == entry).map(|f| &f.reason)
    }
}

/// Verifies the v1 signature set of an archive.
pub fn verify_v1(bytes: &[u8]) -> Result<VerifyReport, SignError> {
    let entries = read_entries_lenient(bytes)?;
    let find = |path: &str| entries.iter().find(|(p, _)| p == path).map(|(_, d)| d);

    let (sf_path, block_path) = entries
        .iter()
        .filter(|(p, _)| is_signing_entry(p) && p.to_ascii_uppercase().ends_with(".SF"))
        .find_map(|(p, _)| {
            let base = &p[..p.len() - 3];
            let block = format!("{base}.RSA");
            find(&block).map(|_| (p.clone(), block))
        })
        .ok_or(SignError::NotSigned)?;
    let mf_bytes = match find(MANIFEST_PATH) {
        Some(Ok(b)) => b.clone(),
        _ => return Err(SignError::NotSigned),
    };
    let mut failures = Vec::new();
    let mut fail = |entry: &str, reason: FailureReason| {
        failures.push(VerifyFailure {
            entry: entry.to_owned(),
            reason,
        })
    };

    let sf_bytes = match find(&sf_path) {
        Some(Ok(b)) => b.clone(),
        _ => {
            fail(&sf_path, FailureReason::Unreadable);
            Vec::new()
        }
    };
    let mut signer = None;
    match find(&block_path) {
        Some(Ok(block)) => match verify_detached(block, &sf_bytes) {
            Ok(cert) => signer = Some(cert.tbs_certificate.subject.to_string()),
            Err(e) => fail(&block_path, FailureReason::BadSignature(e)),
        },
        _ => fail(&block_path, FailureReason::Unreadable),
    }

    let (_, mf_sections) = match parse_sections(&mf_bytes) {
        Ok(s) => s,
        Err(e) => {
            fail(MANIFEST_PATH, FailureReason::Malformed(e));
            return Ok(finish(signer, failures));
        }
    };
    match parse_sections(&sf_bytes) {
        Ok((sf_main, sf_sections)) => {
            let whole_ok = sf_main.get(MANIFEST_DIGEST_ATTR) == Some(b64_sha256(&mf_bytes).as_str());
            if !whole_ok {
                // fall back to per-section digests, as reference verifiers do
                let mut sections_ok = !sf_sections.is_empty() || mf_sections.is_empty();
                for s in &mf_sections {
                    let name = s.get("Name").unwrap_or_default();
                    let listed = sf_sections.iter().find(|x| x.get("Name") == Some(name));
                    if listed.and_then(|x| x.get(DIGEST_ATTR)) != Some(b64_sha256(&s.raw).as_str()) {
                        sections_ok = false;
                    }
                }
                if !sections_ok {
                    fail(MANIFEST_PATH, FailureReason::ManifestDigestMismatch);
                }
            }
        }
        Err(e) => fail(&sf_path, FailureReason::Malformed(e)),
    }

    for s in &mf_sections {
        let Some(name) = s.get("Name") else {
            fail(MANIFEST_PATH, FailureReason::Malformed("section without Name".into()));
            continue;
        };
        let Some(expected) = s.get(DIGEST_ATTR) else {
            fail(name, FailureReason::UnsupportedDigest);
            continue;
        };
        match find(name) {
            None => fail(name, FailureReason::MissingEntry),
            Some(Err(_)) => fail(name, FailureReason::Unreadable),
            Some(Ok(data)) if b64_sha256(data) != expected => fail(name, FailureReason::DigestMismatch),
            Some(Ok(_)) => {}
        }
    }
    for (path, _) in &entries {
        if is_meta_inf(path) || path.ends_with('/') {
            continue;
        }
        if !mf_sections.iter().any(|s| s.get("Name") == Some(path.as_str())) {
            fail(path, FailureReason::NotCovered);
        }
    }
    Ok(finish(signer, failures))
}

fn finish(signer: Option<String>, failures: Vec<VerifyFailure>) -> VerifyReport {
    VerifyReport {
        ok: failures.is_empty(),
        signer,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apkzip::write_archive;

    fn model() -> ArchiveModel {
        ArchiveModel {
            entries: vec![
                ArchiveEntry::new("AndroidManifest.xml", Method::Deflated, b"manifest".to_vec()),
                ArchiveEntry::new("classes.dex", Method::Deflated, vec![7; 300]),
                ArchiveEntry::new("res/a.png", Method::Stored, vec![1, 2, 3]),
            ],
            comment: Vec::new(),
        }
    }

    #[test]
    fn test_key_loads() {
        let k = SigningMaterial::test_key();
        assert_eq!(k.alias, "CERT");
        assert!(k.certificate_der().len() > 300);
    }

    #[test]
    fn mismatched_key_rejected() {
        let other = RsaPrivateKey::new(&mut rand::thread_rng(), 1024).unwrap();
        let cert = SigningMaterial::test_key().certificate;
        assert_eq!(SigningMaterial::new(other, cert, "CERT").unwrap_err(), SignError::KeyMismatch);
    }

    #[test]
    fn signing_entries_recognised() {
        for p in ["META-INF/MANIFEST.MF", "META-INF/CERT.SF", "META-INF/x.rsa", "META-INF/SIG-foo"] {
            assert!(is_signing_entry(p), "{p}");
        }
        for p in ["META-INF/services/x.SF", "META-INF/version", "classes.dex"] {
            assert!(!is_signing_entry(p), "{p}");
        }
    }

    #[test]
    fn sign_then_verify() {
        let signed = sign_archive(model(), &SigningMaterial::test_key()).unwrap();
        assert_eq!(signed.entries.len(), 6);
        let report = verify_v1(&write_archive(&signed)).unwrap();
        assert!(report.ok, "{report:?}");
        assert!(report.signer.unwrap().contains("Morphvault Test Key"));
    }

    #[test]
    fn resigning_replaces_previous_set() {
        let key = SigningMaterial::test_key();
        let once = sign_archive(model(), &key).unwrap();
        let twice = sign_archive(once.clone(), &key).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unsigned_is_not_signed() {
        assert_eq!(verify_v1(&write_archive(&model())).unwrap_err(), SignError::NotSigned);
    }

    #[test]
    fn modified_entry_named() {
        let mut signed = sign_archive(model(), &SigningMaterial::test_key()).unwrap();
        signed.replace_entry("res/a.png", vec![1, 2, 4]).unwrap();
        let report = verify_v1(&write_archive(&signed)).unwrap();
        assert!(!report.ok);
        assert_eq!(report.failed("res/a.png"), Some(&FailureReason::DigestMismatch));
        assert_eq!(report.failures.len(), 1);
    }

    #[test]
    fn extra_entry_not_covered() {
        let mut signed = sign_archive(model(), &SigningMaterial::test_key()).unwrap();
        signed
            .push_entry(ArchiveEntry::new("assets/new.txt", Method::Stored, b"hi".to_vec()))
            .unwrap();
        let report = verify_v1(&write_archive(&signed)).unwrap();
        assert_eq!(report.failed("assets/new.txt"), Some(&FailureReason::NotCovered));
        assert_eq!(FailureReason::NotCovered.to_string(), "entry not covered");
    }

    #[test]
    fn tampered_signature_file_fails() {
        let mut signed = sign_archive(model(), &SigningMaterial::test_key()).unwrap();
        let mut sf = signed.entry("META-INF/CERT.SF").unwrap().data.clone();
        sf.extend_from_slice(b"X-Extra: 1\r\n\r\n");
        signed.replace_entry("META-INF/CERT.SF", sf).unwrap();
        let report = verify_v1(&write_archive(&signed)).unwrap();
        assert!(matches!(report.failed("META-INF/CERT.RSA"), Some(FailureReason::BadSignature(_))));
    }
}
