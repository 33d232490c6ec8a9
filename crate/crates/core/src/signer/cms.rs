//! Detached CMS SignedData over the signature file.

use cms::cert::{CertificateChoices, IssuerAndSerialNumber};
use cms::content_info::{CmsVersion, ContentInfo};
use cms::signed_data::{
    CertificateSet, EncapsulatedContentInfo, SignedData, SignerIdentifier, SignerInfo, SignerInfos,
};
use const_oid::db::{rfc5911, rfc5912};
use der::asn1::{OctetString, SetOfVec};
use der::{Any, Decode, Encode};
use rsa::pkcs1v15::{Signature, SigningKey, VerifyingKey};
use rsa::pkcs8::DecodePublicKey;
use rsa::signature::{SignatureEncoding, Signer, Verifier};
use rsa::RsaPublicKey;
use sha2::{Digest, Sha256};
use spki::AlgorithmIdentifierOwned;
use x509_cert::Certificate;

use super::{SignError, SigningMaterial};

fn sha256_alg() -> AlgorithmIdentifierOwned {
    AlgorithmIdentifierOwned {
        oid: rfc5912::ID_SHA_256,
        parameters: None,
    }
}

fn cms_err(e: impl std::fmt::Display) -> SignError {
    SignError::Cms(e.to_string())
}

/// Signs `content` and returns the DER ContentInfo. No signed attributes
/// are emitted, so the RSA signature covers the content directly.
pub fn sign_detached(material: &SigningMaterial, content: &[u8]) -> Result<Vec<u8>, SignError> {
    let signer = SigningKey::<Sha256>::new(material.private_key.clone());
    let signature = signer.sign(content).to_vec();
    let cert = &material.certificate;

    let signed_data = SignedData {
        version: CmsVersion::V1,
        digest_algorithms: SetOfVec::try_from(vec![sha256_alg()]).map_err(cms_err)?,
        encap_content_info: EncapsulatedContentInfo {
            econtent_type: rfc5911::ID_DATA,
            econtent: None,
        },
        certificates: Some(CertificateSet(
            SetOfVec::try_from(vec![CertificateChoices::Certificate(cert.clone())]).map_err(cms_err)?,
        )),
        crls: None,
        signer_infos: SignerInfos(
            SetOfVec::try_from(vec![SignerInfo {
                version: CmsVersion::V1,
                sid: SignerIdentifier::IssuerAndSerialNumber(IssuerAndSerialNumber {
                    issuer: cert.tbs_certificate.issuer.clone(),
                    serial_number: cert.tbs_certificate.serial_number.clone(),
                }),
                digest_alg: sha256_alg(),
                signed_attrs: None,
                signature_algorithm: AlgorithmIdentifierOwned {
                    oid: rfc5912::SHA_256_WITH_RSA_ENCRYPTION,
                    parameters: None,
                },
                signature: OctetString::new(signature).map_err(cms_err)?,
                unsigned_attrs: None,
            }])
            .map_err(cms_err)?,
        ),
    };
    let info = ContentInfo {
        content_type: rfc5911::ID_SIGNED_DATA,
        content: Any::encode_from(&signed_data).map_err(cms_err)?,
    };
    info.to_der().map_err(cms_err)
}

fn signer_certificate<'a>(data: &'a SignedData, info: &SignerInfo) -> Option<&'a Certificate> {
    let certs = data.certificates.as_ref()?;
    let mut all = certs.0.iter().filter_map(|c| match c {
        CertificateChoices::Certificate(c) => Some(c),
        _ => None,
    });
    match &info.sid {
        SignerIdentifier::IssuerAndSerialNumber(ias) => all.find(|c| {
            c.tbs_certificate.issuer == ias.issuer && c.tbs_certificate.serial_number == ias.serial_number
        }),
        SignerIdentifier::SubjectKeyIdentifier(_) => all.next(),
    }
}

/// Verifies a detached SignedData block over `content` with the embedded
/// certificate. Signed attributes are accepted when present, in which case
/// their message digest must match the content.
pub fn verify_detached(block: &[u8], content: &[u8]) -> Result<Certificate, String> {
    let info = ContentInfo::from_der(block).map_err(|e| format!("bad ContentInfo: {e}"))?;
    if info.content_type != rfc5911::ID_SIGNED_DATA {
        return Err(format!("content type {} is not SignedData", info.content_type));
    }
    let data: SignedData = info
        .content
        .decode_as()
        .map_err(|e| format!("bad SignedData: {e}"))?;
    let signer = data
        .signer_infos
        .0
        .iter()
        .next()
        .ok_or("no signer info")?;
    if signer.digest_alg.oid != rfc5912::ID_SHA_256 {
        return Err(format!("unsupported digest algorithm {}", signer.digest_alg.oid));
    }
    let sig_oid = signer.signature_algorithm.oid;
    if sig_oid != rfc5912::RSA_ENCRYPTION && sig_oid != rfc5912::SHA_256_WITH_RSA_ENCRYPTION {
        return Err(format!("unsupported signature algorithm {sig_oid}"));
    }
    let cert = signer_certificate(&data, signer).ok_or("signer certificate not embedded")?;
    let spki = cert
        .tbs_certificate
        .subject_public_key_info
        .to_der()
        .map_err(|e| e.to_string())?;
    let public = RsaPublicKey::from_public_key_der(&spki).map_err(|e| format!("bad public key: {e}"))?;

    let signed_bytes = match &signer.signed_attrs {
        None => content.to_vec(),
        Some(attrs) => {
            let digest = attrs
                .iter()
                .find(|a| a.oid == rfc5911::ID_MESSAGE_DIGEST)
                .and_then(|a| a.values.iter().next())
                .ok_or("signed attributes lack a message digest")?
                .decode_as::<OctetString>()
                .map_err(|e| format!("bad message digest: {e}"))?;
            if digest.as_bytes() != Sha256::digest(content).as_slice() {
                return Err("message digest attribute does not match signature file".into());
            }
            attrs.to_der().map_err(|e| e.to_string())?
        }
    };
    let signature =
        Signature::try_from(signer.signature.as_bytes()).map_err(|e| format!("bad signature: {e}"))?;
    VerifyingKey::<Sha256>::new(public)
        .verify(&signed_bytes, &signature)
        .map_err(|_| "signature does not verify".to_string())?;
    Ok(cert.clone())
}
