//! DEX method-table reader.
//!
//! Every `method_id_item` is rendered as `<class-descriptor>-><method-name>`
//! through the `type_ids` and `string_ids` tables. Code items, class data
//! and prototypes are never touched.

use std::collections::HashMap;

use indexmap::IndexSet;
use thiserror::Error;

const HEADER_LEN: usize = 0x70;
const ENDIAN_CONSTANT: u32 = 0x1234_5678;
const REVERSE_ENDIAN_CONSTANT: u32 = 0x7856_3412;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DexError {
    #[error("bad DEX magic")]
    BadMagic,
    #[error("payload shorter than the DEX header")]
    TruncatedHeader,
    #[error("big-endian DEX files are not supported")]
    ReverseEndian,
    #[error("bad endian tag {0:#x}")]
    BadEndianTag(u32),
    #[error("{table} table at offset {offset} with {count} items exceeds the payload")]
    TableOutOfBounds { table: &'static str, offset: u32, count: u32 },
    #[error("{table} index {index} out of range")]
    IndexOutOfRange { table: &'static str, index: u32 },
    #[error("string data offset {0} out of bounds")]
    StringOutOfBounds(u32),
    #[error("string {0} is not valid MUTF-8")]
    InvalidString(u32),
    #[error("method {0} has an empty class descriptor or name")]
    EmptyName(u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DexFeatures {
    pub api_refs: IndexSet<String>,
}

#[derive(Clone, Copy)]
struct Table {
    offset: usize,
    count: u32,
}

struct Dex<'a> {
    data: &'a [u8],
    strings: Table,
    types: Table,
    methods: Table,
}

fn u16_at(data: &[u8], pos: usize) -> u16 {
    u16::from_le_bytes([data[pos], data[pos + 1]])
}

fn u32_at(data: &[u8], pos: usize) -> u32 {
    u32::from_le_bytes([data[pos], data[pos + 1], data[pos + 2], data[pos + 3]])
}

fn table(data: &[u8], header_pos: usize, item_size: usize, name: &'static str) -> Result<Table, DexError> {
    let count = u32_at(data, header_pos);
    let offset = u32_at(data, header_pos + 4);
    let fits = (count as usize)
        .checked_mul(item_size)
        .and_then(|len| (offset as usize).checked_add(len))
        .is_some_and(|end| count == 0 || end <= data.len());
    if !fits {
        return Err(DexError::TableOutOfBounds { table: name, offset, count });
    }
    Ok(Table { offset: offset as usize, count })
}

impl<'a> Dex<'a> {
    fn new(data: &'a [u8]) -> Result<Self, DexError> {
        if data.len() < 8 || &data[..4] != b"dex\n" || !data[4..7].iter().all(u8::is_ascii_digit) || data[7] != 0 {
            return Err(DexError::BadMagic);
        }
        if data.len() < HEADER_LEN {
            return Err(DexError::TruncatedHeader);
        }
        match u32_at(data, 0x28) {
            ENDIAN_CONSTANT => {}
            REVERSE_ENDIAN_CONSTANT => return Err(DexError::ReverseEndian),
            other => return Err(DexError::BadEndianTag(other)),
        }
        Ok(Dex {
            data,
            strings: table(data, 0x38, 4, "string_ids")?,
            types: table(data, 0x40, 4, "type_ids")?,
            methods: table(data, 0x58, 8, "method_ids")?,
        })
    }

    fn string(&self, index: u32) -> Result<String, DexError> {
        if index >= self.strings.count {
            return Err(DexError::IndexOutOfRange { table: "string_ids", index });
        }
        let data_off = u32_at(self.data, self.strings.offset + 4 * index as usize);
        let mut pos = data_off as usize;
        let (utf16_len, next) = read_uleb128(self.data, pos).ok_or(DexError::StringOutOfBounds(data_off))?;
        pos = next;
        let units = decode_mutf8(self.data, pos, index)?;
        if units.len() as u64 != utf16_len as u64 {
            return Err(DexError::InvalidString(index));
        }
        String::from_utf16(&units).map_err(|_| DexError::InvalidString(index))
    }

    fn type_descriptor(&self, index: u16) -> Result<u32, DexError> {
        if index as u32 >= self.types.count {
            return Err(DexError::IndexOutOfRange { table: "type_ids", index: index as u32 });
        }
        Ok(u32_at(self.data, self.types.offset + 4 * index as usize))
    }
}

fn read_uleb128(data: &[u8], mut pos: usize) -> Option<(u32, usize)> {
    let mut value = 0u32;
    for shift in (0..35).step_by(7) {
        let byte = *data.get(pos)?;
        pos += 1;
        value |= ((byte & 0x7f) as u32) << shift;
        if byte & 0x80 == 0 {
            return Some((value, pos));
        }
    }
    None
}

/// Decodes a NUL-terminated modified UTF-8 string into UTF-16 code units.
fn decode_mutf8(data: &[u8], mut pos: usize, index: u32) -> Result<Vec<u16>, DexError> {
    let invalid = || DexError::InvalidString(index);
    let byte_at = |p: usize| data.get(p).copied().ok_or(invalid());
    let cont = |b: u8| if b & 0xc0 == 0x80 { Ok((b & 0x3f) as u16) } else { Err(invalid()) };
    let mut units = Vec::new();
    loop {
        let b = byte_at(pos)?;
        match b {
            0 => return Ok(units),
            0x01..=0x7f => {
                units.push(b as u16);
                pos += 1;
            }
            0xc0..=0xdf => {
                units.push(((b & 0x1f) as u16) << 6 | cont(byte_at(pos + 1)?)?);
                pos += 2;
            }
            0xe0..=0xef => {
                units.push(((b & 0x0f) as u16) << 12 | cont(byte_at(pos + 1)?)? << 6 | cont(byte_at(pos + 2)?)?);
                pos += 3;
            }
            _ => return Err(invalid()),
        }
    }
}

pub fn parse_dex(payload: &[u8]) -> Result<DexFeatures, DexError> {
    let dex = Dex::new(payload)?;
    let mut cache: HashMap<u32, String> = HashMap::new();
    let mut lookup = |index: u32| -> Result<String, DexError> {
        if let Some(s) = cache.get(&index) {
            return Ok(s.clone());
        }
        let s = dex.string(index)?;
        cache.insert(index, s.clone());
        Ok(s)
    };

    let mut features = DexFeatures::default();
    for i in 0..dex.methods.count {
        let at = dex.methods.offset + 8 * i as usize;
        let class_idx = u16_at(payload, at);
        let name_idx = u32_at(payload, at + 4);
        let class = lookup(dex.type_descriptor(class_idx)?)?;
        let name = lookup(name_idx)?;
        if class.is_empty() || name.is_empty() {
            return Err(DexError::EmptyName(i));
        }
        features.api_refs.insert(format!("{class}->{name}"));
    }
    Ok(features)
}
