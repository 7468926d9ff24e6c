use std::io::BufRead;

use thiserror::Error;

use super::{parse_dex, parse_manifest, ApkArchive, ApkError, DexFeatures, ManifestFeatures};
use crate::label::{format_optional, parse_optional};
use crate::Label;

pub const PERM_PREFIX: &str = "perm:";
pub const ACTION_PREFIX: &str = "action:";
pub const API_PREFIX: &str = "api:";

/// Raw features of one application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRecord {
    pub app_id: String,
    pub label: Option<Label>,
    pub manifest: ManifestFeatures,
    pub dex: DexFeatures,
}

impl FeatureRecord {
    /// Every feature with its block prefix, in perm, action, api order.
    pub fn prefixed_features(&self) -> impl Iterator<Item = String> + '_ {
        let perms = self.manifest.permissions.iter().map(|p| format!("{PERM_PREFIX}{p}"));
        let actions = self.manifest.intent_actions.iter().map(|a| format!("{ACTION_PREFIX}{a}"));
        let apis = self.dex.api_refs.iter().map(|a| format!("{API_PREFIX}{a}"));
        perms.chain(actions).chain(apis)
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("{field} {value:?} cannot be written on a record line")]
    Unwritable { field: &'static str, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Builds the record for one APK: manifest features plus the union of the
/// method references of every `classes*.dex`.
pub fn extract_features(archive: &ApkArchive, app_id: &str, label: Option<Label>) -> Result<FeatureRecord, ApkError> {
    let manifest_entry = archive.manifest_entry().ok_or(ApkError::MissingManifest)?;
    let manifest = parse_manifest(&archive.read_entry(manifest_entry)?)?;
    let mut dex = DexFeatures::default();
    for entry in archive.dex_entries() {
        let payload = archive.read_entry(entry)?;
        let features = parse_dex(&payload).map_err(|source| ApkError::MalformedDex {
            entry: entry.name.clone(),
            source,
        })?;
        dex.api_refs.extend(features.api_refs);
    }
    Ok(FeatureRecord {
        app_id: app_id.to_string(),
        label,
        manifest,
        dex,
    })
}

fn writable(field: &'static str, value: &str) -> Result<(), RecordError> {
    if value.is_empty() || value.contains(['\t', '\n', '\r']) {
        return Err(RecordError::Unwritable { field, value: value.to_string() });
    }
    Ok(())
}

/// Renders `app_id<TAB>label<TAB>perm:..<TAB>action:..<TAB>api:..`, one tab
/// between every token, without a trailing newline.
pub fn write_record(record: &FeatureRecord) -> Result<String, RecordError> {
    writable("app id", &record.app_id)?;
    let mut line = format!("{}\t{}", record.app_id, format_optional(record.label));
    for feature in record.prefixed_features() {
        writable("feature", &feature)?;
        line.push('\t');
        line.push_str(&feature);
    }
    Ok(line)
}

pub fn parse_record_line(text: &str, line: usize) -> Result<FeatureRecord, RecordError> {
    let err = |reason: String| RecordError::Format { line, reason };
    let mut tokens = text.split('\t');
    let app_id = tokens.next().filter(|s| !s.is_empty()).ok_or_else(|| err("empty app id".into()))?;
    let label = tokens.next().ok_or_else(|| err("missing label".into()))?;
    let label = parse_optional(label).map_err(|e| err(e.to_string()))?;
    let mut record = FeatureRecord {
        app_id: app_id.to_string(),
        label,
        manifest: ManifestFeatures::default(),
        dex: DexFeatures::default(),
    };
    let mut block = 0;
    for token in tokens {
        let (rank, name) = if let Some(name) = token.strip_prefix(PERM_PREFIX) {
            (0, name)
        } else if let Some(name) = token.strip_prefix(ACTION_PREFIX) {
            (1, name)
        } else if let Some(name) = token.strip_prefix(API_PREFIX) {
            (2, name)
        } else {
            return Err(err(format!("feature {token:?} has no perm:/action:/api: prefix")));
        };
        if name.is_empty() {
            return Err(err("empty feature name".into()));
        }
        if rank < block {
            return Err(err(format!("feature {token:?} out of perm, action, api order")));
        }
        block = rank;
        let set = match rank {
            0 => &mut record.manifest.permissions,
            1 => &mut record.manifest.intent_actions,
            _ => &mut record.dex.api_refs,
        };
        set.insert(name.to_string());
    }
    Ok(record)
}

/// Reads a record stream, skipping blank lines.
pub fn read_records(reader: impl BufRead) -> Result<Vec<FeatureRecord>, RecordError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        records.push(parse_record_line(line, i + 1)?);
    }
    Ok(records)
}
