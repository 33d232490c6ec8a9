//! Random small binary XML documents built from the public node types.

use morphvault::axml::chunk::{NO_INDEX, TYPE_BOOLEAN, TYPE_INT_DEC, TYPE_REFERENCE, TYPE_STRING};
use morphvault::axml::{
    Attribute, AxmlDocument, CData, EndElement, Namespace, NodeInfo, StartElement, StringPool, TypedValue,
    XmlChunk,
};
use rand::seq::SliceRandom;
use rand::Rng;

const ALPHABET: &[char] = &['a', 'b', 'Z', '_', '.', ' ', 'é', 'ß', '中', '😀', '0'];

fn random_string(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(0..12);
    (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

fn info(rng: &mut impl Rng, pool_len: u32) -> NodeInfo {
    NodeInfo {
        line: rng.gen_range(0..500),
        comment: if rng.gen_bool(0.1) { rng.gen_range(0..pool_len) } else { NO_INDEX },
    }
}

fn element(rng: &mut impl Rng, pool_len: u32, ns: Option<u32>, depth: u32, out: &mut Vec<XmlChunk>) {
    let name = rng.gen_range(0..pool_len);
    let namespace = NO_INDEX;
    let attributes = (0..rng.gen_range(0..5))
        .map(|_| {
            let (raw_value, typed) = match rng.gen_range(0..4) {
                0 => {
                    let i = rng.gen_range(0..pool_len);
                    (i, TypedValue::new(TYPE_STRING, i))
                }
                1 => (NO_INDEX, TypedValue::new(TYPE_REFERENCE, rng.gen_range(0x7f00_0000..0x7f10_0000))),
                2 => (NO_INDEX, TypedValue::new(TYPE_INT_DEC, rng.gen())),
                _ => (NO_INDEX, TypedValue::new(TYPE_BOOLEAN, if rng.gen() { u32::MAX } else { 0 })),
            };
            Attribute {
                namespace: match ns {
                    Some(uri) if rng.gen() => uri,
                    _ => NO_INDEX,
                },
                name: rng.gen_range(0..pool_len),
                raw_value,
                typed,
            }
        })
        .collect();
    out.push(XmlChunk::StartElement(StartElement {
        info: info(rng, pool_len),
        namespace,
        name,
        id_index: 0,
        class_index: 0,
        style_index: 0,
        attributes,
        trailing: Vec::new(),
    }));
    if depth < 3 {
        for _ in 0..rng.gen_range(0..3) {
            if rng.gen_bool(0.2) {
                let data = rng.gen_range(0..pool_len);
                out.push(XmlChunk::CData(CData {
                    info: info(rng, pool_len),
                    data,
                    typed: TypedValue::new(TYPE_STRING, data),
                }));
            } else {
                element(rng, pool_len, ns, depth + 1, out);
            }
        }
    }
    out.push(XmlChunk::EndElement(EndElement {
        info: info(rng, pool_len),
        namespace,
        name,
    }));
}

pub fn random_document(rng: &mut impl Rng) -> AxmlDocument {
    let mut strings: Vec<String> = (0..rng.gen_range(2..20)).map(|_| random_string(rng)).collect();
    strings.push("http://schemas.android.com/apk/res/android".into());
    strings.push("android".into());
    let pool_len = strings.len() as u32;
    let pool = StringPool::new(strings, rng.gen());
    let resource_map = rng
        .gen_bool(0.5)
        .then(|| (0..rng.gen_range(0..pool_len)).map(|i| 0x0101_0000 + i).collect());

    let with_ns = rng.gen_bool(0.7);
    let ns = Namespace {
        info: NodeInfo::default(),
        prefix: pool_len - 1,
        uri: pool_len - 2,
    };
    let mut chunks = Vec::new();
    if with_ns {
        chunks.push(XmlChunk::StartNamespace(ns.clone()));
    }
    element(rng, pool_len, with_ns.then_some(pool_len - 2), 0, &mut chunks);
    if with_ns {
        chunks.push(XmlChunk::EndNamespace(ns));
    }
    AxmlDocument::new(pool, resource_map, chunks)
}

/// serialize → parse gives the same structure, and re-serializing the
/// parsed document reproduces the bytes.
pub fn check_roundtrip(doc: &AxmlDocument) -> Result<(), String> {
    let bytes = doc.serialize().map_err(|e| e.to_string())?;
    let parsed = AxmlDocument::parse(&bytes).map_err(|e| e.to_string())?;
    if &parsed != doc {
        return Err("parsed structure differs".into());
    }
    if parsed.serialize().map_err(|e| e.to_string())? != bytes {
        return Err("re-serialized bytes differ".into());
    }
    Ok(())
}
