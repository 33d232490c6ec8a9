use rand::RngCore;
use serde::Serialize;

use super::VaultError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EntryState {
    Locked,
    Unlocked,
    /// The worker is currently encrypting or decrypting this entry.
    Processing,
}

impl EntryState {
    fn as_str(self) -> &'static str {
        match self {
            Self::Locked => "Locked",
            Self::Unlocked => "Unlocked",
            Self::Processing => "Processing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VaultEntry {
    pub original_name: String,
    /// File name under `locked/`; random, so listings disclose nothing.
    pub stored_name: String,
    pub size_plain: u64,
    pub state: EntryState,
}

pub fn random_stored_name() -> String {
    let mut b = [0u8; 8];
    rand::thread_rng().fill_bytes(&mut b);
    format!("{}.dsf", hex::encode(b))
}

/// Names must be a single path component that fits in the index format.
pub fn validate_name(name: &str) -> Result<(), VaultError> {
    let bad = name.is_empty()
        || name == "."
        || name == ".."
        || name.contains(['/', '\\', '\t', '\n', '\r', '\0']);
    if bad {
        Err(VaultError::BadName(name.to_owned()))
    } else {
        Ok(())
    }
}

/// One record per line: name, stored name, size, state, tab separated.
/// Only settled states are written.
pub fn encode(entries: &[VaultEntry]) -> Vec<u8> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.original_name,
            e.stored_name,
            e.size_plain,
            e.state.as_str()
        ));
    }
    out.into_bytes()
}

pub fn decode(bytes: &[u8]) -> Result<Vec<VaultEntry>, VaultError> {
    let text = std::str::from_utf8(bytes).map_err(|_| VaultError::BadIndex("not UTF-8".into()))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || VaultError::BadIndex(format!("record {i}"));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let state = match f[3] {
                "Locked" => EntryState::Locked,
                "Unlocked" => EntryState::Unlocked,
                _ => return Err(bad()),
            };
            Ok(VaultEntry {
                original_name: f[0].to_owned(),
                stored_name: f[1].to_owned(),
                size_plain: f[2].parse().map_err(|_| bad())?,
                state,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stored_names_are_hex() {
        let n = random_stored_name();
        assert_eq!(n.len(), 20);
        assert!(n[..16].bytes().all(|b| b.is_ascii_hexdigit()));
        assert_ne!(n, random_stored_name());
    }

    #[test]
    fn names() {
        assert!(validate_name("photo 1.jpg").is_ok());
        for bad in ["", "..", "a/b", "a\tb", "x\n"] {
            assert!(validate_name(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn roundtrip() {
        let entries = vec![
            VaultEntry {
                original_name: "a b.jpg".into(),
                stored_name: random_stored_name(),
                size_plain: 12,
                state: EntryState::Locked,
            },
            VaultEntry {
                original_name: "é.txt".into(),
                stored_name: random_stored_name(),
                size_plain: 0,
                state: EntryState::Unlocked,
            },
        ];
        assert_eq!(decode(&encode(&entries)).unwrap(), entries);
        assert!(decode(b"x\ty\t1\tProcessing\n").is_err());
    }
}
