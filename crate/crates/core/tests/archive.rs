//! Archive reading, rebuilding and alignment against the listing oracles.

use morphvault::apkzip::{
    align_archive, check_alignment, list_entries, read_archive, write_archive, ArchiveEntry, ArchiveModel, Method,
    ZipError,
};
use proptest::prelude::*;

const FIXTURE: &[u8] = include_bytes!("fixtures/fixture.apk");
const MISALIGNED: &[u8] = include_bytes!("fixtures/misaligned.apk");

fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn listing(bytes: &[u8]) -> String {
    list_entries(bytes)
        .unwrap()
        .iter()
        .map(|e| {
            let method = if e.method == 0 { "stored" } else { "deflated" };
            format!("{}\t{method}\t{:08x}\t{}\t{}\n", e.path, e.crc32, e.uncompressed_size, e.data_offset)
        })
        .collect()
}

#[test]
fn listings_match_reference() {
    assert_eq!(listing(FIXTURE), fixture_text("fixture.apk.listing.txt"));
    assert_eq!(listing(MISALIGNED), fixture_text("misaligned.apk.listing.txt"));
}

#[test]
fn alignment_matches_reference_report() {
    assert!(check_alignment(FIXTURE, 4).unwrap().ok);
    let report = check_alignment(MISALIGNED, 4).unwrap();
    let expected: Vec<(String, u64)> = fixture_text("misaligned.apk.align.txt")
        .lines()
        .filter(|l| l.contains("(BAD"))
        .map(|l| {
            let mut parts = l.splitn(2, ' ');
            let offset = parts.next().unwrap().parse().unwrap();
            (parts.next().unwrap().split(" (BAD").next().unwrap().to_string(), offset)
        })
        .collect();
    assert_eq!(report.violations, expected);
}

#[test]
fn align_repairs_idempotently_and_preserves_payloads() {
    let aligned = align_archive(MISALIGNED, 4).unwrap();
    assert!(check_alignment(&aligned, 4).unwrap().ok);
    assert_eq!(align_archive(&aligned, 4).unwrap(), aligned);
    let (a, b) = (read_archive(&aligned).unwrap(), read_archive(MISALIGNED).unwrap());
    let key = |m: &ArchiveModel| m.entries.iter().map(|e| (e.path.clone(), e.method, e.data.clone())).collect::<Vec<_>>();
    assert_eq!(key(&a), key(&b));
    let before = list_entries(MISALIGNED).unwrap();
    let after = list_entries(&aligned).unwrap();
    for (b, a) in before.iter().zip(&after) {
        assert_eq!((&b.path, b.crc32, b.compressed_size), (&a.path, a.crc32, a.compressed_size));
        assert_eq!(
            &MISALIGNED[b.data_offset as usize..(b.data_offset + b.compressed_size) as usize],
            &aligned[a.data_offset as usize..(a.data_offset + a.compressed_size) as usize]
        );
    }
}

#[test]
fn rebuild_preserves_contents_and_methods() {
    let model = read_archive(FIXTURE).unwrap();
    let rebuilt = read_archive(&write_archive(&model)).unwrap();
    assert_eq!(rebuilt, model);
}

#[test]
fn corrupt_payload_is_crc_mismatch() {
    let info = list_entries(FIXTURE).unwrap();
    let arsc = info.iter().find(|e| e.path == "resources.arsc").unwrap();
    let mut bytes = FIXTURE.to_vec();
    bytes[arsc.data_offset as usize + 5] ^= 0xFF;
    assert_eq!(read_archive(&bytes).unwrap_err(), ZipError::CrcMismatch("resources.arsc".into()));
}

#[test]
fn rejects_garbage_and_zip64() {
    assert!(matches!(read_archive(b"not a zip"), Err(ZipError::BadArchive(_))));
    let mut bytes = write_archive(&ArchiveModel::default());
    let end = bytes.len() - 22;
    bytes[end + 10..end + 12].copy_from_slice(&0xFFFFu16.to_le_bytes());
    bytes[end + 8..end + 10].copy_from_slice(&0xFFFFu16.to_le_bytes());
    assert!(matches!(read_archive(&bytes), Err(ZipError::Zip64Unsupported(_))));
}

#[test]
fn replace_and_push() {
    let mut model = read_archive(FIXTURE).unwrap();
    model.replace_entry("assets/readme.txt", b"new".to_vec()).unwrap();
    assert_eq!(model.entry("assets/readme.txt").unwrap().method, Method::Deflated);
    assert_eq!(model.replace_entry("missing", vec![]).unwrap_err(), ZipError::EntryNotFound("missing".into()));
    assert!(matches!(
        model.push_entry(ArchiveEntry::new("classes.dex", Method::Stored, vec![])),
        Err(ZipError::DuplicateEntry(_))
    ));
}

fn arb_model() -> impl Strategy<Value = ArchiveModel> {
    proptest::collection::btree_map(
        "[a-z]{1,8}(/[a-z]{1,8}){0,2}",
        (any::<bool>(), proptest::collection::vec(any::<u8>(), 0..600)),
        0..8,
    )
    .prop_map(|m| ArchiveModel {
        entries: m
            .into_iter()
            .map(|(path, (stored, data))| {
                ArchiveEntry::new(path, if stored { Method::Stored } else { Method::Deflated }, data)
            })
            .collect(),
        comment: Vec::new(),
    })
}

proptest! {
    #[test]
    fn write_read_roundtrip(model in arb_model()) {
        prop_assert_eq!(read_archive(&write_archive(&model)).unwrap(), model);
    }

    #[test]
    fn align_is_idempotent_and_lossless(model in arb_model(), boundary in prop::sample::select(vec![2u16, 4, 8, 4096])) {
        let bytes = write_archive(&model);
        let aligned = align_archive(&bytes, boundary).unwrap();
        prop_assert!(check_alignment(&aligned, boundary).unwrap().ok);
        prop_assert_eq!(align_archive(&aligned, boundary).unwrap(), aligned.clone());
        let back = read_archive(&aligned).unwrap();
        for (a, b) in back.entries.iter().zip(&model.entries) {
            prop_assert_eq!((&a.path, a.method, &a.data), (&b.path, b.method, &b.data));
        }
    }
}
