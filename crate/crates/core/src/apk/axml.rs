//! Reader for the binary XML encoding of `AndroidManifest.xml`.
//!
//! Only what feature extraction needs is decoded: the string pool, the
//! resource-id map, namespace chunks and element start/end chunks.

use indexmap::IndexSet;
use thiserror::Error;

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

/// Resource id of the `android:name` attribute.
const ANDROID_NAME_RES_ID: u32 = 0x0101_0003;

const RES_STRING_POOL_TYPE: u16 = 0x0001;
const RES_XML_TYPE: u16 = 0x0003;
const RES_XML_START_NAMESPACE_TYPE: u16 = 0x0100;
const RES_XML_START_ELEMENT_TYPE: u16 = 0x0102;
const RES_XML_END_ELEMENT_TYPE: u16 = 0x0103;
const RES_XML_RESOURCE_MAP_TYPE: u16 = 0x0180;

const UTF8_FLAG: u32 = 1 << 8;
const NO_INDEX: u32 = u32::MAX;
const TYPE_STRING: u8 = 0x03;

const NODE_HEADER_LEN: usize = 16;
const ATTR_EXT_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AxmlError {
    #[error("input truncated at offset {0}")]
    Truncated(usize),
    #[error("bad chunk header at offset {offset}: {reason}")]
    BadChunkHeader { offset: usize, reason: &'static str },
    #[error("string index {0} out of range")]
    StringIndexOutOfRange(u32),
    #[error("string {0} is not valid UTF-8/UTF-16")]
    BadString(u32),
    #[error("element end without a matching start at offset {0}")]
    NestingUnderflow(usize),
    #[error("element chunk before the string pool")]
    MissingStringPool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestFeatures {
    pub permissions: IndexSet<String>,
    pub intent_actions: IndexSet<String>,
}

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn bytes(&self, pos: usize, len: usize) -> Result<&'a [u8], AxmlError> {
        pos.checked_add(len)
            .and_then(|end| self.data.get(pos..end))
            .ok_or(AxmlError::Truncated(pos))
    }

    fn u8(&self, pos: usize) -> Result<u8, AxmlError> {
        Ok(self.bytes(pos, 1)?[0])
    }

    fn u16(&self, pos: usize) -> Result<u16, AxmlError> {
        let b = self.bytes(pos, 2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, pos: usize) -> Result<u32, AxmlError> {
        let b = self.bytes(pos, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[derive(Debug, Clone, Copy)]
struct ChunkHeader {
    offset: usize,
    kind: u16,
    header_size: usize,
    size: usize,
}

fn chunk_header(r: &Reader<'_>, offset: usize, limit: usize) -> Result<ChunkHeader, AxmlError> {
    let kind = r.u16(offset)?;
    let header_size = r.u16(offset + 2)? as usize;
    let size = r.u32(offset + 4)? as usize;
    let bad = |reason| AxmlError::BadChunkHeader { offset, reason };
    if header_size < 8 {
        return Err(bad("header size below 8"));
    }
    if size < header_size {
        return Err(bad("chunk smaller than its header"));
    }
    if offset.checked_add(size).is_none_or(|end| end > limit) {
        return Err(bad("chunk extends past its parent"));
    }
    Ok(ChunkHeader { offset, kind, header_size, size })
}

struct StringPool<'a> {
    reader: Reader<'a>,
    chunk: ChunkHeader,
    count: u32,
    strings_start: usize,
    offsets_start: usize,
    utf8: bool,
}

impl<'a> StringPool<'a> {
    fn new(data: &'a [u8], chunk: ChunkHeader) -> Result<Self, AxmlError> {
        let reader = Reader { data: &data[..chunk.offset + chunk.size] };
        if chunk.header_size < 28 {
            return Err(AxmlError::BadChunkHeader {
                offset: chunk.offset,
                reason: "string pool header too short",
            });
        }
        let count = reader.u32(chunk.offset + 8)?;
        let flags = reader.u32(chunk.offset + 16)?;
        let strings_start = reader.u32(chunk.offset + 20)? as usize;
        let offsets_start = chunk.offset + chunk.header_size;
        // The offset table must fit inside the chunk.
        (count as usize)
            .checked_mul(4)
            .and_then(|len| reader.bytes(offsets_start, len).ok())
            .ok_or(AxmlError::BadChunkHeader {
                offset: chunk.offset,
                reason: "string offset table exceeds chunk",
            })?;
        Ok(StringPool {
            reader,
            chunk,
            count,
            strings_start,
            offsets_start,
            utf8: flags & UTF8_FLAG != 0,
        })
    }

    fn get(&self, index: u32) -> Result<String, AxmlError> {
        if index >= self.count {
            return Err(AxmlError::StringIndexOutOfRange(index));
        }
        let r = &self.reader;
        let rel = r.u32(self.offsets_start + 4 * index as usize)? as usize;
        let pos = self
            .chunk
            .offset
            .checked_add(self.strings_start)
            .and_then(|p| p.checked_add(rel))
            .ok_or(AxmlError::Truncated(self.chunk.offset))?;
        if self.utf8 {
            // UTF-16 length (skipped), then UTF-8 byte length, then bytes.
            let (_, p) = utf8_len(r, pos)?;
            let (len, p) = utf8_len(r, p)?;
            let raw = r.bytes(p, len)?;
            String::from_utf8(raw.to_vec()).map_err(|_| AxmlError::BadString(index))
        } else {
            let first = r.u16(pos)? as usize;
            let (len, p) = if first & 0x8000 != 0 {
                (((first & 0x7fff) << 16) | r.u16(pos + 2)? as usize, pos + 4)
            } else {
                (first, pos + 2)
            };
            let raw = r.bytes(p, len.checked_mul(2).ok_or(AxmlError::Truncated(p))?)?;
            let units: Vec<u16> = raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
            String::from_utf16(&units).map_err(|_| AxmlError::BadString(index))
        }
    }
}

fn utf8_len(r: &Reader<'_>, pos: usize) -> Result<(usize, usize), AxmlError> {
    let first = r.u8(pos)? as usize;
    if first & 0x80 != 0 {
        Ok((((first & 0x7f) << 8) | r.u8(pos + 1)? as usize, pos + 2))
    } else {
        Ok((first, pos + 1))
    }
}

struct Attribute {
    ns: u32,
    name: u32,
    raw_value: u32,
    data_type: u8,
    data: u32,
}

/// Extracts `uses-permission` names and `intent-filter/action` names.
///
/// An attribute counts as `android:name` when its local name is `name` in
/// the Android namespace, or any namespace if the document declares none,
/// or when the resource map tags it with the `android:name` resource id.
pub fn parse_manifest(payload: &[u8]) -> Result<ManifestFeatures, AxmlError> {
    let r = Reader { data: payload };
    let root = chunk_header(&r, 0, payload.len())?;
    if root.kind != RES_XML_TYPE {
        return Err(AxmlError::BadChunkHeader { offset: 0, reason: "not an XML document chunk" });
    }
    let end = root.size;

    let mut pool: Option<StringPool<'_>> = None;
    let mut resource_ids: Vec<u32> = Vec::new();
    let mut android_ns: Option<u32> = None;
    let mut saw_namespace = false;
    let mut stack: Vec<String> = Vec::new();
    let mut features = ManifestFeatures::default();

    let mut offset = root.header_size;
    while offset < end {
        let chunk = chunk_header(&r, offset, end)?;
        match chunk.kind {
            RES_STRING_POOL_TYPE => {
                if pool.is_none() {
                    pool = Some(StringPool::new(payload, chunk)?);
                }
            }
            RES_XML_RESOURCE_MAP_TYPE => {
                let n = (chunk.size - chunk.header_size) / 4;
                resource_ids = (0..n)
                    .map(|i| r.u32(chunk.offset + chunk.header_size + 4 * i))
                    .collect::<Result<_, _>>()?;
            }
            RES_XML_START_NAMESPACE_TYPE => {
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                saw_namespace = true;
                let uri = r.u32(chunk.offset + NODE_HEADER_LEN + 4)?;
                if pool.get(uri)? == ANDROID_NS {
                    android_ns = Some(uri);
                }
            }
            RES_XML_START_ELEMENT_TYPE => {
                let pool = pool.as_ref().ok_or(AxmlError::MissingStringPool)?;
                let ext = chunk.offset + NODE_HEADER_LEN;
                if chunk.header_size < NODE_HEADER_LEN || ext + ATTR_EXT_LEN > chunk.offset + chunk.size {
                    return Err(AxmlError::BadChunkHeader {
                        offset: chunk.offset,
                        reason: "element chunk too short",
                    });
                }
                let name = pool.get(r.u32(ext + 4)?)?;
                let attr_start = r.u16(ext + 8)? as usize;
                let attr_size = r.u16(ext + 10)? as usize;
                let attr_count = r.u16(ext + 12)? as usize;
                if attr_count > 0 && attr_size < ATTR_EXT_LEN {
                    return Err(AxmlError::BadChunkHeader {
                        offset: chunk.offset,
                        reason: "attribute record too short",
                    });
                }
                let attrs_end = ext + attr_start + attr_size * attr_count;
                if attrs_end > chunk.offset + chunk.size {
                    return Err(AxmlError::BadChunkHeader {
                        offset: chunk.offset,
                        reason: "attributes exceed chunk",
                    });
                }

                let parent = stack.last().map(String::as_str);
                let wanted = name == "uses-permission" || (name == "action" && parent == Some("intent-filter"));
                if wanted {
                    for i in 0..attr_count {
                        let at = ext + attr_start + i * attr_size;
                        let attr = Attribute {
                            ns: r.u32(at)?,
                            name: r.u32(at + 4)?,
                            raw_value: r.u32(at + 8)?,
                            data_type: r.u8(at + 15)?,
                            data: r.u32(at + 16)?,
                        };
                        let is_android_name = resource_ids.get(attr.name as usize) == Some(&ANDROID_NAME_RES_ID)
                            || (pool.get(attr.name)? == "name"
                                && (!saw_namespace || (attr.ns != NO_INDEX && Some(attr.ns) == android_ns)));
                        if !is_android_name {
                            continue;
                        }
                        let value = if attr.raw_value != NO_INDEX {
                            pool.get(attr.raw_value)?
                        } else if attr.data_type == TYPE_STRING {
                            pool.get(attr.data)?
                        } else {
                            continue;
                        };
                        if value.is_empty() {
                            continue;
                        }
                        if name == "uses-permission" {
                            features.permissions.insert(value);
                        } else {
                            features.intent_actions.insert(value);
                        }
                    }
                }
                stack.push(name);
            }
            RES_XML_END_ELEMENT_TYPE => {
                if stack.pop().is_none() {
                    return Err(AxmlError::NestingUnderflow(chunk.offset));
                }
            }
            _ => {}
        }
        offset += chunk.size;
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{AxmlBuilder, XmlNode};

    fn manifest(children: Vec<XmlNode>) -> XmlNode {
        XmlNode::new("manifest").children(children)
    }

    fn perm(name: &str) -> XmlNode {
        XmlNode::new("uses-permission").android_attr("name", name)
    }

    fn filter(actions: &[&str]) -> XmlNode {
        XmlNode::new("intent-filter")
            .children(actions.iter().map(|a| XmlNode::new("action").android_attr("name", a)).collect())
    }

    #[test]
    fn single_permission() {
        let doc = AxmlBuilder::new().build(&manifest(vec![perm("android.permission.INTERNET")]));
        let f = parse_manifest(&doc).unwrap();
        assert_eq!(f.permissions.iter().collect::<Vec<_>>(), ["android.permission.INTERNET"]);
        assert!(f.intent_actions.is_empty());
    }

    #[test]
    fn empty_manifest() {
        let doc = AxmlBuilder::new().build(&manifest(vec![XmlNode::new("application")]));
        assert_eq!(parse_manifest(&doc).unwrap(), ManifestFeatures::default());
    }

    #[test]
    fn duplicates_collapse_in_first_occurrence_order() {
        let doc = AxmlBuilder::new().build(&manifest(vec![
            perm("android.permission.SEND_SMS"),
            perm("android.permission.INTERNET"),
            perm("android.permission.SEND_SMS"),
        ]));
        let f = parse_manifest(&doc).unwrap();
        assert_eq!(
            f.permissions.iter().collect::<Vec<_>>(),
            ["android.permission.SEND_SMS", "android.permission.INTERNET"]
        );
    }

    #[test]
    fn only_actions_inside_intent_filters_count() {
        let app = XmlNode::new("application").children(vec![XmlNode::new("receiver").children(vec![
            filter(&["android.intent.action.BOOT_COMPLETED", "android.provider.Telephony.SMS_RECEIVED"]),
            XmlNode::new("action").android_attr("name", "stray.ACTION"),
        ])]);
        let doc = AxmlBuilder::new().build(&manifest(vec![
            XmlNode::new("permission").android_attr("name", "com.example.DEFINED"),
            app,
        ]));
        let f = parse_manifest(&doc).unwrap();
        assert!(f.permissions.is_empty());
        assert_eq!(
            f.intent_actions.iter().collect::<Vec<_>>(),
            ["android.intent.action.BOOT_COMPLETED", "android.provider.Telephony.SMS_RECEIVED"]
        );
    }

    #[test]
    fn utf8_pool_and_missing_namespace() {
        let tree = manifest(vec![perm("android.permission.CAMERA"), filter(&["a.B"])]);
        for builder in [
            AxmlBuilder::new().utf8(true),
            AxmlBuilder::new().namespace(false).resource_map(false),
            AxmlBuilder::new().resource_map(false),
            AxmlBuilder::new().typed_values(true),
        ] {
            let f = parse_manifest(&builder.build(&tree)).unwrap();
            assert_eq!(f.permissions.iter().collect::<Vec<_>>(), ["android.permission.CAMERA"]);
            assert_eq!(f.intent_actions.iter().collect::<Vec<_>>(), ["a.B"]);
        }
    }

    #[test]
    fn foreign_namespace_name_is_ignored() {
        let tree = manifest(vec![XmlNode::new("uses-permission").attr(Some("http://example.com/x"), "name", "x.Y")]);
        let doc = AxmlBuilder::new().resource_map(false).build(&tree);
        assert!(parse_manifest(&doc).unwrap().permissions.is_empty());
    }

    #[test]
    fn malformed_inputs_are_typed_errors() {
        let doc = AxmlBuilder::new().build(&manifest(vec![perm("p")]));
        assert!(matches!(parse_manifest(&[]), Err(AxmlError::Truncated(0))));
        let mut bad_type = doc.clone();
        bad_type[0] = 0x02;
        assert!(matches!(parse_manifest(&bad_type), Err(AxmlError::BadChunkHeader { .. })));
        for cut in 0..doc.len() {
            assert!(parse_manifest(&doc[..cut]).is_err(), "prefix of {cut} bytes parsed");
        }
    }

    #[test]
    fn string_index_out_of_range() {
        let mut doc = AxmlBuilder::new().build(&manifest(vec![]));
        // Element name index of the first start-element chunk.
        let pos = find_chunk(&doc, RES_XML_START_ELEMENT_TYPE) + NODE_HEADER_LEN + 4;
        doc[pos..pos + 4].copy_from_slice(&999u32.to_le_bytes());
        assert_eq!(parse_manifest(&doc), Err(AxmlError::StringIndexOutOfRange(999)));
    }

    #[test]
    fn end_without_start_underflows() {
        let mut doc = AxmlBuilder::new().build(&manifest(vec![]));
        let pos = find_chunk(&doc, RES_XML_START_ELEMENT_TYPE);
        doc[pos..pos + 2].copy_from_slice(&0x0104u16.to_le_bytes()); // now CDATA, skipped
        assert!(matches!(parse_manifest(&doc), Err(AxmlError::NestingUnderflow(_))));
    }

    fn find_chunk(doc: &[u8], kind: u16) -> usize {
        let mut off = u16::from_le_bytes([doc[2], doc[3]]) as usize;
        loop {
            if u16::from_le_bytes([doc[off], doc[off + 1]]) == kind {
                return off;
            }
            off += u32::from_le_bytes(doc[off + 4..off + 8].try_into().unwrap()) as usize;
        }
    }
}
