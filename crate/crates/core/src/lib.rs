//! Repackaging of Android application packages under a new name and icon,
//! and a per-file encrypted vault.
//!
//! The morphing side reads a package ([`apkzip`]), edits its binary
//! manifest ([`axml`]), swaps icon files, rebuilds and aligns the archive and
//! signs it with a v1 (JAR-style) signature ([`signer`]); [`morph`] ties the
//! steps together. The [`vault`] module stores files individually encrypted
//! under a PIN-derived key and processes lock/unlock requests through a
//! single-worker FIFO queue.
//!
//! The guide in `book/` walks through each format; its code samples are
//! compiled and run as doc-tests of this crate.

pub mod apkzip;
pub mod axml;
pub mod morph;
pub mod signer;
pub mod vault;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/binary-xml.md")]
    mod binary_xml {}
    #[doc = include_str!("../../../book/src/resource-table.md")]
    mod resource_table {}
    #[doc = include_str!("../../../book/src/archives.md")]
    mod archives {}
    #[doc = include_str!("../../../book/src/signing.md")]
    mod signing {}
    #[doc = include_str!("../../../book/src/morphing.md")]
    mod morphing {}
    #[doc = include_str!("../../../book/src/vault-format.md")]
    mod vault_format {}
    #[doc = include_str!("../../../book/src/task-queue.md")]
    mod task_queue {}
}
