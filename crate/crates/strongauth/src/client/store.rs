//! The client credential store: encrypted key pairs at rest.
//!
//! One record per enrolled identity, keyed by the identity digest. The
//! signature key pair is sealed under the KDF of the user secret, so the
//! file on disk is exactly as useful to a thief as the offline-dictionary
//! scenario demonstrates — and no more.
//!
//! File format (also the import/export format, byte for byte): one record
//! per line, four lowercase-hex fields joined by `:`
//!
//! ```text
//! id_digest : a1 : a2 : salt
//! ```
//!
//! terminated by `\n`, records sorted by `id_digest`, `#` comment lines and
//! blank lines ignored on read, never written. Writes go through a
//! temporary sibling file and an atomic rename.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::suite::{Digest32, SaltValue, SealedBlob, KEY_LEN};

use super::ClientError;

/// One enrolled identity: sealed private key `a1`, sealed public key `a2`,
/// and the KDF salt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialRecord {
    pub id_digest: Digest32,
    pub a1: SealedBlob,
    pub a2: SealedBlob,
    pub salt: SaltValue,
}

impl CredentialRecord {
    fn to_line(&self) -> String {
        format!(
            "{}:{}:{}:{}\n",
            self.id_digest.to_hex(),
            hex::encode(self.a1.to_bytes()),
            hex::encode(self.a2.to_bytes()),
            hex::encode(self.salt.as_bytes()),
        )
    }
}

/// The collection of credential records, optionally bound to a file.
#[derive(Debug, Default)]
pub struct CredentialStore {
    records: BTreeMap<[u8; KEY_LEN], CredentialRecord>,
    path: Option<PathBuf>,
}

impl CredentialStore {
    /// An empty store with no backing file (tests and attack scenarios).
    pub fn in_memory() -> CredentialStore {
        CredentialStore::default()
    }

    /// Load a store file. The file must exist and parse.
    pub fn open(path: impl AsRef<Path>) -> Result<CredentialStore, ClientError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let records = parse_records(&text)?;
        Ok(CredentialStore { records, path: Some(path.as_ref().to_path_buf()) })
    }

    /// Load a store file, treating a missing file as an empty store bound
    /// to that path (first enrollment creates it on save).
    pub fn open_or_create(path: impl AsRef<Path>) -> Result<CredentialStore, ClientError> {
        match std::fs::metadata(path.as_ref()) {
            Ok(_) => CredentialStore::open(path),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Ok(CredentialStore { records: BTreeMap::new(), path: Some(path.as_ref().to_path_buf()) })
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Parse the canonical text format into an unbound store.
    pub fn import(source: impl AsRef<Path>) -> Result<CredentialStore, ClientError> {
        let text = std::fs::read_to_string(source.as_ref())?;
        Ok(CredentialStore { records: parse_records(&text)?, path: None })
    }

    /// Serialize to the canonical text format.
    pub fn to_text(&self) -> String {
        self.records.values().map(CredentialRecord::to_line).collect()
    }

    /// Persist to the bound file (atomic replace).
    pub fn save(&self) -> Result<(), ClientError> {
        let path = self.path.as_ref().ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::NotFound, "credential store has no backing file")
        })?;
        write_atomically(path, self.to_text().as_bytes())?;
        Ok(())
    }

    /// Write the canonical serialization to `destination`. The output is
    /// byte-identical to what [`save`](CredentialStore::save) writes.
    pub fn export(&self, destination: impl AsRef<Path>) -> Result<(), ClientError> {
        write_atomically(destination.as_ref(), self.to_text().as_bytes())?;
        Ok(())
    }

    /// Bind (or re-bind) the store to a file path without writing.
    pub fn set_path(&mut self, path: impl AsRef<Path>) {
        self.path = Some(path.as_ref().to_path_buf());
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, id_digest: &Digest32) -> Option<&CredentialRecord> {
        self.records.get(id_digest.as_bytes())
    }

    pub fn contains(&self, id_digest: &Digest32) -> bool {
        self.records.contains_key(id_digest.as_bytes())
    }

    /// Insert or replace the record for its identity digest.
    pub fn put(&mut self, record: CredentialRecord) {
        self.records.insert(*record.id_digest.as_bytes(), record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &CredentialRecord> {
        self.records.values()
    }
}

/// Atomic file replacement: write a temporary sibling, then rename over
/// the target. Readers never observe a half-written file.
pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn parse_records(
    text: &str,
) -> Result<BTreeMap<[u8; KEY_LEN], CredentialRecord>, ClientError> {
    let mut records = BTreeMap::new();
    for (number, line) in text.lines().enumerate() {
        let number = number + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(':').collect();
        if fields.len() != 4 {
            return Err(parse_error(number, "expected 4 ':'-separated fields"));
        }
        let id_digest = Digest32::from_slice(&hex_field(number, fields[0], "id digest")?)
            .map_err(|_| parse_error(number, "id digest must be 32 bytes"))?;
        let a1 = SealedBlob::from_bytes(&hex_field(number, fields[1], "a1")?)
            .map_err(|_| parse_error(number, "a1 is too short to be a sealed blob"))?;
        let a2 = SealedBlob::from_bytes(&hex_field(number, fields[2], "a2")?)
            .map_err(|_| parse_error(number, "a2 is too short to be a sealed blob"))?;
        let salt = SaltValue::new(hex_field(number, fields[3], "salt")?)
            .map_err(|_| parse_error(number, "salt is below the 8-byte floor"))?;
        if records
            .insert(*id_digest.as_bytes(), CredentialRecord { id_digest, a1, a2, salt })
            .is_some()
        {
            return Err(parse_error(number, "duplicate id digest"));
        }
    }
    Ok(records)
}

pub(crate) fn parse_error(line: usize, reason: &str) -> ClientError {
    ClientError::Parse { line, reason: reason.to_string() }
}

pub(crate) fn hex_field(line: usize, field: &str, what: &str) -> Result<Vec<u8>, ClientError> {
    if field.chars().any(|c| c.is_ascii_uppercase()) {
        return Err(parse_error(line, "hex fields must be lowercase"));
    }
    hex::decode(field).map_err(|_| ClientError::Parse {
        line,
        reason: format!("{what} is not valid hex"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::{self, rng::Rng};

    fn sample_record(rng: &mut Rng, tag: &[u8]) -> CredentialRecord {
        let key = rng.symkey();
        CredentialRecord {
            id_digest: suite::hash(tag),
            a1: suite::aead_seal(&key, &[1u8; 32], rng),
            a2: suite::aead_seal(&key, &[2u8; 32], rng),
            salt: rng.salt(),
        }
    }

    #[test]
    fn text_roundtrip_preserves_records() {
        let mut rng = Rng::seeded([31u8; 32]);
        let mut store = CredentialStore::in_memory();
        store.put(sample_record(&mut rng, b"one"));
        store.put(sample_record(&mut rng, b"two"));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("credentials");
        store.export(&path).unwrap();
        let loaded = CredentialStore::open(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.to_text(), store.to_text());
    }

    #[test]
    fn format_is_canonical_and_sorted() {
        let mut rng = Rng::seeded([32u8; 32]);
        let mut store = CredentialStore::in_memory();
        store.put(sample_record(&mut rng, b"zzz"));
        store.put(sample_record(&mut rng, b"aaa"));
        let text = store.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0] < lines[1], "records must be sorted by id digest");
        assert!(text.ends_with('\n'));
        for line in &lines {
            assert_eq!(line.split(':').count(), 4);
            assert!(line.chars().all(|c| c.is_ascii_hexdigit() && !c.is_uppercase() || c == ':'));
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut rng = Rng::seeded([33u8; 32]);
        let mut store = CredentialStore::in_memory();
        store.put(sample_record(&mut rng, b"only"));
        let text = format!("# backup of my credentials\n\n{}", store.to_text());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("annotated");
        std::fs::write(&path, text).unwrap();
        assert_eq!(CredentialStore::open(&path).unwrap().len(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let mut rng = Rng::seeded([34u8; 32]);
        let mut store = CredentialStore::in_memory();
        store.put(sample_record(&mut rng, b"fine"));
        let good_line = store.to_text();

        let dir = tempfile::tempdir().unwrap();
        let cases: &[(&str, &str)] = &[
            ("truncated record", "deadbeef:aabb\n"),
            ("bad hex", "zz:aa:bb:cc\n"),
            ("uppercase hex", &good_line.to_uppercase()),
            ("short digest", "aabb:aabb:aabb:aabbccddeeff0011\n"),
        ];
        for (label, bad_line) in cases {
            let path = dir.path().join("broken");
            std::fs::write(&path, format!("{good_line}{bad_line}")).unwrap();
            match CredentialStore::open(&path) {
                Err(ClientError::Parse { line, .. }) => {
                    assert_eq!(line, 2, "{label}: wrong line number")
                }
                other => panic!("{label}: expected a parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_digests_are_rejected() {
        let mut rng = Rng::seeded([35u8; 32]);
        let mut store = CredentialStore::in_memory();
        store.put(sample_record(&mut rng, b"dup"));
        let line = store.to_text();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup");
        std::fs::write(&path, format!("{line}{line}")).unwrap();
        match CredentialStore::open(&path) {
            Err(ClientError::Parse { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("duplicate"));
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn open_or_create_treats_missing_as_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fresh");
        let store = CredentialStore::open_or_create(&path).unwrap();
        assert!(store.is_empty());
        assert!(!path.exists(), "open_or_create must not write");
        assert!(CredentialStore::open(&path).is_err(), "strict open still requires the file");
    }

    #[test]
    fn save_is_atomic_replace() {
        let mut rng = Rng::seeded([36u8; 32]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store");
        let mut store = CredentialStore::open_or_create(&path).unwrap();
        store.put(sample_record(&mut rng, b"a"));
        store.save().unwrap();
        store.put(sample_record(&mut rng, b"b"));
        store.save().unwrap();
        assert_eq!(CredentialStore::open(&path).unwrap().len(), 2);
        assert!(!path.with_extension("tmp").exists());
    }
}
