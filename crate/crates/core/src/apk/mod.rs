//! APK feature extraction.
//!
//! An APK is a ZIP container holding a binary-XML `AndroidManifest.xml` and
//! one or more `classes*.dex` files. Three raw feature sets come out of it:
//! requested permissions and intent-filter actions from the manifest, and
//! `<class-descriptor>-><method-name>` references from the DEX method tables.

mod archive;
mod axml;
mod dex;
mod record;

use thiserror::Error;

pub use archive::{open_apk, ApkArchive, CompressionMethod, ZipEntry, MAX_ENTRY_SIZE};
pub use axml::{parse_manifest, AxmlError, ManifestFeatures, ANDROID_NS};
pub use dex::{parse_dex, DexError, DexFeatures};
pub use record::{
    extract_features, parse_record_line, read_records, write_record, FeatureRecord, RecordError,
    ACTION_PREFIX, API_PREFIX, PERM_PREFIX,
};

#[derive(Debug, Error)]
pub enum ApkError {
    #[error("not a ZIP archive")]
    NotAnArchive,
    #[error("truncated archive: {0}")]
    TruncatedArchive(String),
    #[error("archive has no AndroidManifest.xml")]
    MissingManifest,
    #[error("duplicate archive entry {0:?}")]
    DuplicateEntry(String),
    #[error("no archive entry named {0:?}")]
    EntryNotFound(String),
    #[error("entry {entry:?} uses unsupported compression method {method}")]
    UnsupportedCompression { entry: String, method: u16 },
    #[error("entry {0:?} is encrypted")]
    Encrypted(String),
    #[error("ZIP64 archives are not supported")]
    Zip64Unsupported,
    #[error("entry {entry:?} declares {size} bytes, above the {limit} byte limit")]
    EntryTooLarge { entry: String, size: u64, limit: u64 },
    #[error("corrupt entry {entry:?}: {reason}")]
    CorruptEntry { entry: String, reason: String },
    #[error("malformed binary XML: {0}")]
    MalformedAxml(#[from] AxmlError),
    #[error("malformed DEX in {entry:?}: {source}")]
    MalformedDex {
        entry: String,
        #[source]
        source: DexError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
