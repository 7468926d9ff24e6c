//! Byte-level writers for ZIP, binary XML and DEX test fixtures.
//!
//! These encode the formats from their published layouts and share no code
//! with the readers in [`crate::apk`].

use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::apk::ANDROID_NS;

fn put16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn set32(out: &mut [u8], pos: usize, v: u32) {
    out[pos..pos + 4].copy_from_slice(&v.to_le_bytes());
}

#[derive(Default)]
pub struct ZipBuilder {
    entries: Vec<(String, u16, Vec<u8>, Vec<u8>)>,
}

impl ZipBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stored(mut self, name: &str, data: &[u8]) -> Self {
        self.entries.push((name.to_string(), 0, data.to_vec(), data.to_vec()));
        self
    }

    pub fn deflated(mut self, name: &str, data: &[u8]) -> Self {
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
        enc.write_all(data).unwrap();
        self.entries.push((name.to_string(), 8, data.to_vec(), enc.finish().unwrap()));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut central = Vec::new();
        for (name, method, plain, packed) in &self.entries {
            let offset = out.len() as u32;
            let crc = crc32fast::hash(plain);
            put32(&mut out, 0x0403_4b50);
            put16(&mut out, 20);
            put16(&mut out, 0);
            put16(&mut out, *method);
            put32(&mut out, 0); // time + date
            put32(&mut out, crc);
            put32(&mut out, packed.len() as u32);
            put32(&mut out, plain.len() as u32);
            put16(&mut out, name.len() as u16);
            put16(&mut out, 0);
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(packed);

            put32(&mut central, 0x0201_4b50);
            put16(&mut central, 20);
            put16(&mut central, 20);
            put16(&mut central, 0);
            put16(&mut central, *method);
            put32(&mut central, 0);
            put32(&mut central, crc);
            put32(&mut central, packed.len() as u32);
            put32(&mut central, plain.len() as u32);
            put16(&mut central, name.len() as u16);
            central.extend_from_slice(&[0; 12]);
            put32(&mut central, offset);
            central.extend_from_slice(name.as_bytes());
        }
        let cd_offset = out.len() as u32;
        out.extend_from_slice(&central);
        put32(&mut out, 0x0605_4b50);
        put32(&mut out, 0);
        put16(&mut out, self.entries.len() as u16);
        put16(&mut out, self.entries.len() as u16);
        put32(&mut out, central.len() as u32);
        put32(&mut out, cd_offset);
        put16(&mut out, 0);
        out
    }
}

#[derive(Debug, Clone)]
pub struct XmlNode {
    pub name: String,
    pub attrs: Vec<(Option<String>, String, String)>,
    pub children: Vec<XmlNode>,
}

impl XmlNode {
    pub fn new(name: &str) -> Self {
        XmlNode { name: name.to_string(), attrs: Vec::new(), children: Vec::new() }
    }

    pub fn attr(mut self, ns: Option<&str>, name: &str, value: &str) -> Self {
        self.attrs.push((ns.map(str::to_string), name.to_string(), value.to_string()));
        self
    }

    pub fn android_attr(self, name: &str, value: &str) -> Self {
        self.attr(Some(ANDROID_NS), name, value)
    }

    pub fn children(mut self, children: Vec<XmlNode>) -> Self {
        self.children.extend(children);
        self
    }
}

/// Writes binary XML the way aapt lays it out: document header, string
/// pool, resource map, namespace start, element chunks, namespace end.
#[derive(Debug, Clone)]
pub struct AxmlBuilder {
    utf8: bool,
    namespace: bool,
    resource_map: bool,
    typed_values: bool,
}

impl Default for AxmlBuilder {
    fn default() -> Self {
        AxmlBuilder { utf8: false, namespace: true, resource_map: true, typed_values: false }
    }
}

struct Strings(Vec<String>);

impl Strings {
    fn index(&mut self, s: &str) -> u32 {
        match self.0.iter().position(|x| x == s) {
            Some(i) => i as u32,
            None => {
                self.0.push(s.to_string());
                (self.0.len() - 1) as u32
            }
        }
    }
}

impl AxmlBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn utf8(mut self, on: bool) -> Self {
        self.utf8 = on;
        self
    }

    pub fn namespace(mut self, on: bool) -> Self {
        self.namespace = on;
        self
    }

    pub fn resource_map(mut self, on: bool) -> Self {
        self.resource_map = on;
        self
    }

    /// Store attribute values only as typed string data, not raw values.
    pub fn typed_values(mut self, on: bool) -> Self {
        self.typed_values = on;
        self
    }

    pub fn build(&self, root: &XmlNode) -> Vec<u8> {
        let mut strings = Strings(Vec::new());
        let mut res_ids = Vec::new();
        if self.resource_map && has_android_name(root) {
            strings.index("name");
            res_ids.push(0x0101_0003u32);
        }
        let prefix = strings.index("android");
        let uri = strings.index(ANDROID_NS);

        let mut body = Vec::new();
        if self.namespace {
            namespace_chunk(&mut body, 0x0100, prefix, uri);
        }
        self.element(&mut body, &mut strings, root);
        if self.namespace {
            namespace_chunk(&mut body, 0x0101, prefix, uri);
        }

        let mut out = Vec::new();
        put16(&mut out, 0x0003);
        put16(&mut out, 8);
        put32(&mut out, 0);
        out.extend_from_slice(&self.string_pool(&strings.0));
        if !res_ids.is_empty() {
            put16(&mut out, 0x0180);
            put16(&mut out, 8);
            put32(&mut out, 8 + 4 * res_ids.len() as u32);
            for id in res_ids {
                put32(&mut out, id);
            }
        }
        out.extend_from_slice(&body);
        let len = out.len() as u32;
        set32(&mut out, 4, len);
        out
    }

    fn element(&self, out: &mut Vec<u8>, strings: &mut Strings, node: &XmlNode) {
        let name = strings.index(&node.name);
        let attrs: Vec<[u32; 3]> = node
            .attrs
            .iter()
            .map(|(ns, attr, value)| {
                let ns = match ns {
                    Some(ns) if self.namespace || ns != ANDROID_NS => strings.index(ns),
                    _ => u32::MAX,
                };
                [ns, strings.index(attr), strings.index(value)]
            })
            .collect();
        put16(out, 0x0102);
        put16(out, 16);
        put32(out, 16 + 20 + 20 * attrs.len() as u32);
        put32(out, 1);
        put32(out, u32::MAX);
        put32(out, u32::MAX);
        put32(out, name);
        put16(out, 20);
        put16(out, 20);
        put16(out, attrs.len() as u16);
        put16(out, 0);
        put16(out, 0);
        put16(out, 0);
        for [ns, attr, value] in attrs {
            put32(out, ns);
            put32(out, attr);
            put32(out, if self.typed_values { u32::MAX } else { value });
            put16(out, 8);
            out.push(0);
            out.push(0x03);
            put32(out, value);
        }
        for child in &node.children {
            self.element(out, strings, child);
        }
        put16(out, 0x0103);
        put16(out, 16);
        put32(out, 24);
        put32(out, 1);
        put32(out, u32::MAX);
        put32(out, u32::MAX);
        put32(out, name);
    }

    fn string_pool(&self, strings: &[String]) -> Vec<u8> {
        let mut data = Vec::new();
        let mut offsets = Vec::new();
        for s in strings {
            offsets.push(data.len() as u32);
            if self.utf8 {
                let utf16_len = s.encode_utf16().count();
                put_utf8_len(&mut data, utf16_len);
                put_utf8_len(&mut data, s.len());
                data.extend_from_slice(s.as_bytes());
                data.push(0);
            } else {
                let units: Vec<u16> = s.encode_utf16().collect();
                put16(&mut data, units.len() as u16);
                for u in units {
                    put16(&mut data, u);
                }
                put16(&mut data, 0);
            }
        }
        while data.len() % 4 != 0 {
            data.push(0);
        }
        let header = 28u32;
        let strings_start = header + 4 * strings.len() as u32;
        let mut out = Vec::new();
        put16(&mut out, 0x0001);
        put16(&mut out, header as u16);
        put32(&mut out, strings_start + data.len() as u32);
        put32(&mut out, strings.len() as u32);
        put32(&mut out, 0);
        put32(&mut out, if self.utf8 { 1 << 8 } else { 0 });
        put32(&mut out, strings_start);
        put32(&mut out, 0);
        for o in offsets {
            put32(&mut out, o);
        }
        out.extend_from_slice(&data);
        out
    }
}

fn has_android_name(node: &XmlNode) -> bool {
    node.attrs.iter().any(|(ns, name, _)| ns.as_deref() == Some(ANDROID_NS) && name == "name")
        || node.children.iter().any(has_android_name)
}

fn put_utf8_len(out: &mut Vec<u8>, len: usize) {
    if len > 0x7f {
        out.push(0x80 | (len >> 8) as u8);
        out.push(len as u8);
    } else {
        out.push(len as u8);
    }
}

fn namespace_chunk(out: &mut Vec<u8>, kind: u16, prefix: u32, uri: u32) {
    put16(out, kind);
    put16(out, 16);
    put32(out, 24);
    put32(out, 1);
    put32(out, u32::MAX);
    put32(out, prefix);
    put32(out, uri);
}

/// Minimal DEX image with string, type, proto and method id tables.
#[derive(Default)]
pub struct DexBuilder {
    methods: Vec<(String, String)>,
    keep_order: bool,
}

impl DexBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn method(mut self, class: &str, name: &str) -> Self {
        self.methods.push((class.to_string(), name.to_string()));
        self
    }

    /// Keep methods in insertion order, duplicates included, instead of the
    /// sorted unique order a compiler emits.
    pub fn keep_order(mut self, on: bool) -> Self {
        self.keep_order = on;
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let utf16 = |s: &String| s.encode_utf16().collect::<Vec<u16>>();
        let mut strings: Vec<String> = vec!["V".to_string()];
        for (class, name) in &self.methods {
            strings.push(class.clone());
            strings.push(name.clone());
        }
        strings.sort_by_key(utf16);
        strings.dedup();
        let sidx = |s: &str| strings.iter().position(|x| x == s).unwrap() as u32;

        let mut types: Vec<u32> = std::iter::once(sidx("V"))
            .chain(self.methods.iter().map(|(c, _)| sidx(c)))
            .collect();
        types.sort();
        types.dedup();
        let tidx = |s: &str| types.iter().position(|&t| t == sidx(s)).unwrap() as u16;

        let mut methods: Vec<(u16, u32)> = self.methods.iter().map(|(c, n)| (tidx(c), sidx(n))).collect();
        if !self.keep_order {
            methods.sort();
            methods.dedup();
        }

        let string_ids_off = 0x70u32;
        let type_ids_off = string_ids_off + 4 * strings.len() as u32;
        let proto_ids_off = type_ids_off + 4 * types.len() as u32;
        let method_ids_off = proto_ids_off + 12;
        let data_off = method_ids_off + 8 * methods.len() as u32;

        let mut data = Vec::new();
        let mut string_offsets = Vec::new();
        for s in &strings {
            string_offsets.push(data_off + data.len() as u32);
            let mut n = s.encode_utf16().count() as u32;
            loop {
                let byte = (n & 0x7f) as u8;
                n >>= 7;
                if n == 0 {
                    data.push(byte);
                    break;
                }
                data.push(byte | 0x80);
            }
            for unit in s.encode_utf16() {
                match unit {
                    0x01..=0x7f => data.push(unit as u8),
                    0x00 | 0x80..=0x7ff => {
                        data.push(0xc0 | (unit >> 6) as u8);
                        data.push(0x80 | (unit & 0x3f) as u8);
                    }
                    _ => {
                        data.push(0xe0 | (unit >> 12) as u8);
                        data.push(0x80 | ((unit >> 6) & 0x3f) as u8);
                        data.push(0x80 | (unit & 0x3f) as u8);
                    }
                }
            }
            data.push(0);
        }

        let mut out = vec![0u8; 0x70];
        out[..8].copy_from_slice(b"dex\n035\0");
        set32(&mut out, 0x24, 0x70);
        set32(&mut out, 0x28, 0x1234_5678);
        set32(&mut out, 0x38, strings.len() as u32);
        set32(&mut out, 0x3c, string_ids_off);
        set32(&mut out, 0x40, types.len() as u32);
        set32(&mut out, 0x44, type_ids_off);
        set32(&mut out, 0x48, 1);
        set32(&mut out, 0x4c, proto_ids_off);
        set32(&mut out, 0x58, methods.len() as u32);
        set32(&mut out, 0x5c, if methods.is_empty() { 0 } else { method_ids_off });
        for off in string_offsets {
            put32(&mut out, off);
        }
        for t in &types {
            put32(&mut out, *t);
        }
        put32(&mut out, sidx("V"));
        put32(&mut out, tidx("V") as u32);
        put32(&mut out, 0);
        for (class, name) in &methods {
            put16(&mut out, *class);
            put16(&mut out, 0);
            put32(&mut out, *name);
        }
        out.extend_from_slice(&data);
        let file_size = out.len() as u32;
        set32(&mut out, 0x20, file_size);
        set32(&mut out, 0x68, data.len() as u32);
        set32(&mut out, 0x6c, data_off);
        let checksum = adler32(&out[12..]);
        set32(&mut out, 0x08, checksum);
        out
    }
}

fn adler32(bytes: &[u8]) -> u32 {
    let (mut a, mut b) = (1u32, 0u32);
    for &byte in bytes {
        a = (a + byte as u32) % 65521;
        b = (b + a) % 65521;
    }
    (b << 16) | a
}

/// An APK with a manifest declaring `permissions` and one receiver whose
/// intent filter lists `actions`, plus one DEX file per entry of `dex`.
pub fn sample_apk(permissions: &[&str], actions: &[&str], dex: &[&[(&str, &str)]]) -> Vec<u8> {
    let mut children: Vec<XmlNode> = permissions
        .iter()
        .map(|p| XmlNode::new("uses-permission").android_attr("name", p))
        .collect();
    let filter = XmlNode::new("intent-filter")
        .children(actions.iter().map(|a| XmlNode::new("action").android_attr("name", a)).collect());
    children.push(XmlNode::new("application").children(vec![XmlNode::new("receiver")
        .android_attr("name", ".Receiver")
        .children(vec![filter])]));
    let manifest = XmlNode::new("manifest").attr(None, "package", "com.example.app").children(children);

    let mut zip = ZipBuilder::new().deflated("AndroidManifest.xml", &AxmlBuilder::new().build(&manifest));
    for (i, methods) in dex.iter().enumerate() {
        let builder = methods.iter().fold(DexBuilder::new(), |b, (c, n)| b.method(c, n));
        let name = if i == 0 { "classes.dex".to_string() } else { format!("classes{}.dex", i + 1) };
        zip = zip.deflated(&name, &builder.build());
    }
    zip.build()
}
