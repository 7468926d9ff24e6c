use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use flate2::read::DeflateDecoder;

use super::ApkError;

/// Upper bound on the declared uncompressed size of a single entry.
pub const MAX_ENTRY_SIZE: u64 = 512 * 1024 * 1024;

const LOCAL_HEADER_SIG: u32 = 0x0403_4b50;
const CENTRAL_HEADER_SIG: u32 = 0x0201_4b50;
const EOCD_SIG: u32 = 0x0605_4b50;
const EOCD_LEN: usize = 22;
const CENTRAL_HEADER_LEN: usize = 46;
const LOCAL_HEADER_LEN: usize = 30;

pub const MANIFEST_NAME: &str = "AndroidManifest.xml";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionMethod {
    Stored,
    Deflated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZipEntry {
    pub name: String,
    pub method: CompressionMethod,
    pub crc32: u32,
    pub compressed_size: u64,
    pub uncompressed_size: u64,
    local_header_offset: u64,
}

/// An APK container with its central directory parsed. Payloads are
/// decompressed on demand by [`ApkArchive::read`].
#[derive(Debug, Clone)]
pub struct ApkArchive {
    data: Vec<u8>,
    entries: Vec<ZipEntry>,
    by_name: HashMap<String, usize>,
    central_directory_offset: u64,
}

pub fn open_apk(path: impl AsRef<Path>) -> Result<ApkArchive, ApkError> {
    let data = std::fs::read(path)?;
    ApkArchive::from_bytes(data)
}

fn u16_at(data: &[u8], pos: usize) -> u16 {
    u16::from_le_bytes([data[pos], data[pos + 1]])
}

fn u32_at(data: &[u8], pos: usize) -> u32 {
    u32::from_le_bytes([data[pos], data[pos + 1], data[pos + 2], data[pos + 3]])
}

fn find_eocd(data: &[u8]) -> Option<usize> {
    if data.len() < EOCD_LEN {
        return None;
    }
    let last = data.len() - EOCD_LEN;
    let first = last.saturating_sub(u16::MAX as usize);
    (first..=last).rev().find(|&pos| u32_at(data, pos) == EOCD_SIG)
}

impl ApkArchive {
    pub fn from_bytes(data: Vec<u8>) -> Result<Self, ApkError> {
        let starts_like_zip = data.len() >= 4 && u32_at(&data, 0) == LOCAL_HEADER_SIG;
        let eocd = match find_eocd(&data) {
            Some(pos) => pos,
            None if starts_like_zip => {
                return Err(ApkError::TruncatedArchive(
                    "end of central directory record not found".into(),
                ))
            }
            None => return Err(ApkError::NotAnArchive),
        };

        let total_entries = u16_at(&data, eocd + 10);
        let cd_size = u32_at(&data, eocd + 12);
        let cd_offset = u32_at(&data, eocd + 16);
        if total_entries == u16::MAX || cd_size == u32::MAX || cd_offset == u32::MAX {
            return Err(ApkError::Zip64Unsupported);
        }
        let cd_start = cd_offset as usize;
        let cd_end = cd_start
            .checked_add(cd_size as usize)
            .filter(|&end| end <= eocd)
            .ok_or_else(|| {
                ApkError::TruncatedArchive("central directory extends past its end record".into())
            })?;

        let mut entries = Vec::with_capacity(total_entries as usize);
        let mut by_name = HashMap::with_capacity(total_entries as usize);
        let mut pos = cd_start;
        for _ in 0..total_entries {
            if pos + CENTRAL_HEADER_LEN > cd_end {
                return Err(ApkError::TruncatedArchive("central directory cut short".into()));
            }
            if u32_at(&data, pos) != CENTRAL_HEADER_SIG {
                return Err(ApkError::TruncatedArchive(format!(
                    "bad central directory signature at offset {pos}"
                )));
            }
            let flags = u16_at(&data, pos + 8);
            let method = u16_at(&data, pos + 10);
            let crc32 = u32_at(&data, pos + 16);
            let compressed_size = u32_at(&data, pos + 20) as u64;
            let uncompressed_size = u32_at(&data, pos + 24) as u64;
            let name_len = u16_at(&data, pos + 28) as usize;
            let extra_len = u16_at(&data, pos + 30) as usize;
            let comment_len = u16_at(&data, pos + 32) as usize;
            let local_header_offset = u32_at(&data, pos + 42) as u64;
            let name_start = pos + CENTRAL_HEADER_LEN;
            let next = name_start + name_len + extra_len + comment_len;
            if next > cd_end {
                return Err(ApkError::TruncatedArchive("central directory cut short".into()));
            }
            let name = String::from_utf8_lossy(&data[name_start..name_start + name_len]).into_owned();
            if flags & 1 != 0 {
                return Err(ApkError::Encrypted(name));
            }
            let method = match method {
                0 => CompressionMethod::Stored,
                8 => CompressionMethod::Deflated,
                other => return Err(ApkError::UnsupportedCompression { entry: name, method: other }),
            };
            if by_name.insert(name.clone(), entries.len()).is_some() {
                return Err(ApkError::DuplicateEntry(name));
            }
            entries.push(ZipEntry {
                name,
                method,
                crc32,
                compressed_size,
                uncompressed_size,
                local_header_offset,
            });
            pos = next;
        }

        Ok(ApkArchive {
            data,
            entries,
            by_name,
            central_directory_offset: cd_offset as u64,
        })
    }

    pub fn entries(&self) -> &[ZipEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&ZipEntry> {
        self.by_name.get(name).map(|&i| &self.entries[i])
    }

    pub fn manifest_entry(&self) -> Option<&ZipEntry> {
        self.entry(MANIFEST_NAME)
    }

    /// `classes.dex`, `classes2.dex`, ... in load order.
    pub fn dex_entries(&self) -> Vec<&ZipEntry> {
        let mut dex: Vec<(u32, &ZipEntry)> = self
            .entries
            .iter()
            .filter_map(|e| dex_ordinal(&e.name).map(|n| (n, e)))
            .collect();
        dex.sort_by_key(|&(n, _)| n);
        dex.into_iter().map(|(_, e)| e).collect()
    }

    pub fn read(&self, name: &str) -> Result<Vec<u8>, ApkError> {
        let entry = self.entry(name).ok_or_else(|| ApkError::EntryNotFound(name.to_string()))?;
        self.read_entry(entry)
    }

    pub fn read_entry(&self, entry: &ZipEntry) -> Result<Vec<u8>, ApkError> {
        let truncated = |what: &str| ApkError::TruncatedArchive(format!("{what} of {:?}", entry.name));
        if entry.uncompressed_size > MAX_ENTRY_SIZE {
            return Err(ApkError::EntryTooLarge {
                entry: entry.name.clone(),
                size: entry.uncompressed_size,
                limit: MAX_ENTRY_SIZE,
            });
        }
        let data_limit = self.central_directory_offset as usize;
        let header = entry.local_header_offset as usize;
        if header + LOCAL_HEADER_LEN > data_limit {
            return Err(truncated("local header"));
        }
        if u32_at(&self.data, header) != LOCAL_HEADER_SIG {
            return Err(ApkError::CorruptEntry {
                entry: entry.name.clone(),
                reason: "bad local header signature".into(),
            });
        }
        let name_len = u16_at(&self.data, header + 26) as usize;
        let extra_len = u16_at(&self.data, header + 28) as usize;
        let start = header + LOCAL_HEADER_LEN + name_len + extra_len;
        let end = start
            .checked_add(entry.compressed_size as usize)
            .filter(|&end| end <= data_limit)
            .ok_or_else(|| truncated("payload"))?;
        let raw = &self.data[start..end];

        let payload = match entry.method {
            CompressionMethod::Stored => {
                if entry.compressed_size != entry.uncompressed_size {
                    return Err(ApkError::CorruptEntry {
                        entry: entry.name.clone(),
                        reason: "stored entry with differing compressed and uncompressed sizes".into(),
                    });
                }
                raw.to_vec()
            }
            CompressionMethod::Deflated => {
                let mut out = Vec::with_capacity(entry.uncompressed_size as usize);
                DeflateDecoder::new(raw)
                    .take(entry.uncompressed_size + 1)
                    .read_to_end(&mut out)
                    .map_err(|err| match err.kind() {
                        std::io::ErrorKind::UnexpectedEof => truncated("deflate stream"),
                        _ => ApkError::CorruptEntry { entry: entry.name.clone(), reason: err.to_string() },
                    })?;
                if out.len() as u64 != entry.uncompressed_size {
                    return Err(ApkError::CorruptEntry {
                        entry: entry.name.clone(),
                        reason: format!(
                            "inflated to {} bytes, header declares {}",
                            out.len(),
                            entry.uncompressed_size
                        ),
                    });
                }
                out
            }
        };
        if crc32fast::hash(&payload) != entry.crc32 {
            return Err(ApkError::CorruptEntry {
                entry: entry.name.clone(),
                reason: "CRC-32 mismatch".into(),
            });
        }
        Ok(payload)
    }
}

fn dex_ordinal(name: &str) -> Option<u32> {
    let middle = name.strip_prefix("classes")?.strip_suffix(".dex")?;
    if middle.is_empty() {
        Some(1)
    } else if middle.bytes().all(|b| b.is_ascii_digit()) && !middle.starts_with('0') {
        middle.parse().ok().filter(|&n| n >= 2)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::ZipBuilder;

    /// One stored entry "AndroidManifest.xml" holding b"hello", assembled by
    /// hand from the ZIP layout (local header, data, central header, EOCD).
    fn hand_assembled_zip() -> Vec<u8> {
        let name = b"AndroidManifest.xml";
        let payload = b"hello";
        let crc = 0x3610_a686u32; // CRC-32 of "hello"
        let mut z = Vec::new();
        z.extend_from_slice(&[0x50, 0x4b, 0x03, 0x04, 20, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        z.extend_from_slice(&crc.to_le_bytes());
        z.extend_from_slice(&5u32.to_le_bytes());
        z.extend_from_slice(&5u32.to_le_bytes());
        z.extend_from_slice(&(name.len() as u16).to_le_bytes());
        z.extend_from_slice(&0u16.to_le_bytes());
        z.extend_from_slice(name);
        z.extend_from_slice(payload);
        let cd = z.len() as u32;
        z.extend_from_slice(&[0x50, 0x4b, 0x01, 0x02, 20, 0, 20, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        z.extend_from_slice(&crc.to_le_bytes());
        z.extend_from_slice(&5u32.to_le_bytes());
        z.extend_from_slice(&5u32.to_le_bytes());
        z.extend_from_slice(&(name.len() as u16).to_le_bytes());
        z.extend_from_slice(&[0; 12]);
        z.extend_from_slice(&0u32.to_le_bytes());
        z.extend_from_slice(name);
        let cd_len = z.len() as u32 - cd;
        z.extend_from_slice(&[0x50, 0x4b, 0x05, 0x06, 0, 0, 0, 0, 1, 0, 1, 0]);
        z.extend_from_slice(&cd_len.to_le_bytes());
        z.extend_from_slice(&cd.to_le_bytes());
        z.extend_from_slice(&0u16.to_le_bytes());
        z
    }

    #[test]
    fn minimal_stored_archive() {
        let archive = ApkArchive::from_bytes(hand_assembled_zip()).unwrap();
        assert_eq!(archive.entries().len(), 1);
        let entry = archive.manifest_entry().unwrap();
        assert_eq!(entry.method, CompressionMethod::Stored);
        assert_eq!(archive.read_entry(entry).unwrap(), b"hello");
    }

    #[test]
    fn builder_matches_hand_assembly() {
        let built = ZipBuilder::new().stored("AndroidManifest.xml", b"hello").build();
        assert_eq!(built, hand_assembled_zip());
    }

    #[test]
    fn empty_and_garbage_are_not_archives() {
        assert!(matches!(ApkArchive::from_bytes(vec![]), Err(ApkError::NotAnArchive)));
        assert!(matches!(
            ApkArchive::from_bytes(b"definitely not a zip file at all".to_vec()),
            Err(ApkError::NotAnArchive)
        ));
    }

    #[test]
    fn declared_size_beyond_payload_is_truncated() {
        // 50-byte payload whose headers claim 100 bytes.
        let payload = vec![7u8; 50];
        let mut bytes = ZipBuilder::new().stored("AndroidManifest.xml", &payload).build();
        let cd = u32_at(&bytes, bytes.len() - 6) as usize;
        for off in [18, 22] {
            bytes[off..off + 4].copy_from_slice(&100u32.to_le_bytes());
        }
        for off in [cd + 20, cd + 24] {
            bytes[off..off + 4].copy_from_slice(&100u32.to_le_bytes());
        }
        let archive = ApkArchive::from_bytes(bytes).unwrap();
        let err = archive.read("AndroidManifest.xml").unwrap_err();
        assert!(matches!(err, ApkError::TruncatedArchive(_)), "{err:?}");
    }

    #[test]
    fn cut_off_archive_is_truncated() {
        let bytes = ZipBuilder::new().stored("AndroidManifest.xml", b"hello").build();
        let err = ApkArchive::from_bytes(bytes[..bytes.len() - 10].to_vec()).unwrap_err();
        assert!(matches!(err, ApkError::TruncatedArchive(_)), "{err:?}");
    }

    #[test]
    fn deflate_round_trip_and_crc_check() {
        let payload: Vec<u8> = (0..5000u32).map(|i| (i % 7) as u8).collect();
        let bytes = ZipBuilder::new().deflated("classes.dex", &payload).build();
        let archive = ApkArchive::from_bytes(bytes.clone()).unwrap();
        assert_eq!(archive.read("classes.dex").unwrap(), payload);

        let mut corrupt = bytes;
        let cd = u32_at(&corrupt, corrupt.len() - 6) as usize;
        corrupt[cd + 16] ^= 0xff;
        let archive = ApkArchive::from_bytes(corrupt).unwrap();
        assert!(matches!(archive.read("classes.dex"), Err(ApkError::CorruptEntry { .. })));
    }

    #[test]
    fn duplicate_names_rejected() {
        let bytes = ZipBuilder::new().stored("a", b"1").stored("a", b"2").build();
        assert!(matches!(ApkArchive::from_bytes(bytes), Err(ApkError::DuplicateEntry(_))));
    }

    #[test]
    fn dex_entries_in_load_order() {
        let bytes = ZipBuilder::new()
            .stored("classes10.dex", b"")
            .stored("classes2.dex", b"")
            .stored("classes.dex", b"")
            .stored("assets/classes3.dex", b"")
            .stored("classes02.dex", b"")
            .build();
        let archive = ApkArchive::from_bytes(bytes).unwrap();
        let names: Vec<&str> = archive.dex_entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["classes.dex", "classes2.dex", "classes10.dex"]);
    }

    #[test]
    fn unsupported_method_rejected() {
        let mut bytes = ZipBuilder::new().stored("x", b"1").build();
        let cd = u32_at(&bytes, bytes.len() - 6) as usize;
        bytes[cd + 10] = 12; // bzip2
        assert!(matches!(
            ApkArchive::from_bytes(bytes),
            Err(ApkError::UnsupportedCompression { method: 12, .. })
        ));
    }
}
