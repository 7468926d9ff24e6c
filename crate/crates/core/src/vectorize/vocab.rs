use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::path::Path;

use super::{FeatureVector, VectorizeError};
use crate::apk::{FeatureRecord, ACTION_PREFIX, API_PREFIX, PERM_PREFIX};

/// Feature block. Column blocks are concatenated in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Block {
    Permission,
    Action,
    Api,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::Permission, Block::Action, Block::Api];

    pub fn prefix(self) -> &'static str {
        match self {
            Block::Permission => PERM_PREFIX,
            Block::Action => ACTION_PREFIX,
            Block::Api => API_PREFIX,
        }
    }

    fn split_prefixed(name: &str) -> Option<(Block, &str)> {
        Block::ALL
            .into_iter()
            .find_map(|b| name.strip_prefix(b.prefix()).map(|rest| (b, rest)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VocabularyConfig {
    pub min_doc_freq: usize,
    pub max_api_features: usize,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        VocabularyConfig { min_doc_freq: 2, max_api_features: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    block: Block,
    name: String,
    doc_freq: usize,
}

/// Column assignment for every retained feature. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<Entry>,
    lookup: HashMap<(Block, String), usize>,
    ranges: [Range<usize>; 3],
}

impl Vocabulary {
    fn from_entries(entries: Vec<Entry>) -> Result<Self, VectorizeError> {
        if entries.is_empty() {
            return Err(VectorizeError::EmptyVocabulary);
        }
        let mut ranges = [0..0, 0..0, 0..0];
        let mut lookup = HashMap::with_capacity(entries.len());
        for (b, block) in Block::ALL.into_iter().enumerate() {
            let start = entries.iter().position(|e| e.block == block).unwrap_or_else(|| {
                // Empty block: starts where the previous one ended.
                if b == 0 { 0 } else { ranges[b - 1].end }
            });
            let len = entries.iter().filter(|e| e.block == block).count();
            ranges[b] = start..start + len;
        }
        for (i, e) in entries.iter().enumerate() {
            lookup.insert((e.block, e.name.clone()), i);
        }
        Ok(Vocabulary { entries, lookup, ranges })
    }

    pub fn dimension(&self) -> usize {
        self.entries.len()
    }

    pub fn block_range(&self, block: Block) -> Range<usize> {
        self.ranges[block as usize].clone()
    }

    pub fn index_of(&self, block: Block, name: &str) -> Option<usize> {
        self.lookup.get(&(block, name.to_string())).copied()
    }

    /// Prefixed name (e.g. `perm:android.permission.INTERNET`) of a column.
    pub fn feature_name(&self, index: usize) -> Option<String> {
        self.entries.get(index).map(|e| format!("{}{}", e.block.prefix(), e.name))
    }

    pub fn doc_freq(&self, index: usize) -> Option<usize> {
        self.entries.get(index).map(|e| e.doc_freq)
    }

    /// `(block, name)` pairs in column order.
    pub fn features(&self) -> impl Iterator<Item = (Block, &str)> {
        self.entries.iter().map(|e| (e.block, e.name.as_str()))
    }
}

fn record_features(record: &FeatureRecord) -> impl Iterator<Item = (Block, &String)> {
    let perms = record.manifest.permissions.iter().map(|n| (Block::Permission, n));
    let actions = record.manifest.intent_actions.iter().map(|n| (Block::Action, n));
    let apis = record.dex.api_refs.iter().map(|n| (Block::Api, n));
    perms.chain(actions).chain(apis)
}

/// Counts document frequencies and keeps features seen in at least
/// `min_doc_freq` records. The api block is further cut to the
/// `max_api_features` most frequent names, ties going to the
/// lexicographically smaller name. Within a block columns are in name order.
pub fn build_vocabulary<'a>(
    records: impl IntoIterator<Item = &'a FeatureRecord>,
    config: VocabularyConfig,
) -> Result<Vocabulary, VectorizeError> {
    if config.min_doc_freq == 0 {
        return Err(VectorizeError::InvalidConfig("min_doc_freq must be at least 1".into()));
    }
    let mut counts: HashMap<(Block, &str), usize> = HashMap::new();
    let mut n_records = 0usize;
    for record in records {
        n_records += 1;
        for (block, name) in record_features(record) {
            *counts.entry((block, name.as_str())).or_default() += 1;
        }
    }
    if n_records == 0 {
        return Err(VectorizeError::EmptyCorpus);
    }

    let mut entries = Vec::new();
    for block in Block::ALL {
        let mut kept: Vec<(&str, usize)> = counts
            .iter()
            .filter(|((b, _), &df)| *b == block && df >= config.min_doc_freq)
            .map(|(&(_, name), &df)| (name, df))
            .collect();
        if block == Block::Api {
            kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            kept.truncate(config.max_api_features);
        }
        kept.sort_by(|a, b| a.0.cmp(b.0));
        entries.extend(kept.into_iter().map(|(name, doc_freq)| Entry {
            block,
            name: name.to_string(),
            doc_freq,
        }));
    }
    Vocabulary::from_entries(entries)
}

/// Binary vector of the features of `record` that the vocabulary knows;
/// unknown features are ignored.
pub fn vectorize(record: &FeatureRecord, vocab: &Vocabulary) -> FeatureVector {
    let mut active: Vec<u32> = record_features(record)
        .filter_map(|(block, name)| vocab.index_of(block, name))
        .map(|i| i as u32)
        .collect();
    active.sort_unstable();
    active.dedup();
    FeatureVector::from_sorted(vocab.dimension(), active, record.label)
}

pub fn write_vocabulary(vocab: &Vocabulary, mut out: impl Write) -> std::io::Result<()> {
    for (i, e) in vocab.entries.iter().enumerate() {
        writeln!(out, "{i}\t{}{}\t{}", e.block.prefix(), e.name, e.doc_freq)?;
    }
    Ok(())
}

pub fn save_vocabulary(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<(), VectorizeError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vocabulary(vocab, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_vocabulary(reader: impl BufRead) -> Result<Vocabulary, VectorizeError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |reason: String| VectorizeError::Format { line: lineno, reason };
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [index, name, df] = fields[..] else {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let index: usize = index.parse().map_err(|_| err(format!("bad index {index:?}")))?;
        if index != entries.len() {
            return Err(err(format!("index {index} out of sequence, expected {}", entries.len())));
        }
        let (block, bare) = Block::split_prefixed(name)
            .filter(|(_, bare)| !bare.is_empty())
            .ok_or_else(|| err(format!("feature {name:?} lacks a perm:/action:/api: prefix")))?;
        if entries.last().is_some_and(|last| last.block > block) {
            return Err(err(format!("feature {name:?} breaks the perm, action, api block order")));
        }
        let doc_freq: usize = df.parse().map_err(|_| err(format!("bad document frequency {df:?}")))?;
        if entries.iter().any(|e| e.block == block && e.name == bare) {
            return Err(err(format!("duplicate feature {name:?}")));
        }
        entries.push(Entry { block, name: bare.to_string(), doc_freq });
    }
    Vocabulary::from_entries(entries)
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary, VectorizeError> {
    read_vocabulary(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apk::parse_record_line;
    use crate::Label;

    fn rec(line: &str) -> FeatureRecord {
        parse_record_line(line, 1).unwrap()
    }

    fn cfg(min_doc_freq: usize, max_api_features: usize) -> VocabularyConfig {
        VocabularyConfig { min_doc_freq, max_api_features }
    }

    #[test]
    fn threshold_boundary() {
        let records = [rec("a\t+1\tperm:P\tperm:Q"), rec("b\t+1\tperm:P"), rec("c\t-1\tperm:R")];
        let vocab = build_vocabulary(&records, cfg(2, 10)).unwrap();
        assert_eq!(vocab.dimension(), 1);
        assert_eq!(vocab.index_of(Block::Permission, "P"), Some(0));
        assert_eq!(vocab.doc_freq(0), Some(2));
    }

    #[test]
    fn blocks_concatenate_in_order() {
        let records = [rec("a\t+1\tapi:Api"), rec("b\t+1\taction:A"), rec("c\t-1\tperm:P")];
        let vocab = build_vocabulary(&records, cfg(1, 10)).unwrap();
        assert_eq!(vocab.dimension(), 3);
        assert_eq!(vocab.block_range(Block::Permission), 0..1);
        assert_eq!(vocab.block_range(Block::Action), 1..2);
        assert_eq!(vocab.block_range(Block::Api), 2..3);
        assert_eq!(vocab.feature_name(2).unwrap(), "api:Api");
    }

    #[test]
    fn api_cap_breaks_ties_lexicographically() {
        // Doc freqs: e=5, d=4, b=3, c=3, a=1.
        let lines = [
            "r1\t+1\tapi:a\tapi:b\tapi:c\tapi:d\tapi:e",
            "r2\t+1\tapi:b\tapi:c\tapi:d\tapi:e",
            "r3\t+1\tapi:b\tapi:c\tapi:d\tapi:e",
            "r4\t+1\tapi:d\tapi:e",
            "r5\t+1\tapi:e",
        ];
        let records: Vec<_> = lines.iter().map(|l| rec(l)).collect();
        let vocab = build_vocabulary(&records, cfg(1, 3)).unwrap();
        let kept: Vec<&str> = vocab.features().map(|(_, n)| n).collect();
        assert_eq!(kept, ["b", "d", "e"]);
    }

    #[test]
    fn errors() {
        assert!(matches!(build_vocabulary(&[], cfg(1, 1)), Err(VectorizeError::EmptyCorpus)));
        assert!(matches!(build_vocabulary(&[rec("a\t+1\tperm:P")], cfg(0, 1)), Err(VectorizeError::InvalidConfig(_))));
        assert!(matches!(build_vocabulary(&[rec("a\t+1\tperm:P")], cfg(2, 1)), Err(VectorizeError::EmptyVocabulary)));
    }

    #[test]
    fn vectorize_cases() {
        let records = [rec("a\t+1\tperm:P\taction:A\tapi:X"), rec("b\t-1\tperm:Q")];
        let vocab = build_vocabulary(&records, cfg(1, 10)).unwrap();
        assert_eq!(vocab.dimension(), 4);

        let all = vectorize(&rec("z\t+1\tperm:P\tperm:Q\taction:A\tapi:X"), &vocab);
        assert_eq!(all.active(), &[0, 1, 2, 3]);
        assert_eq!(all.label(), Some(Label::Malicious));

        let none = vectorize(&rec("z\t?\tperm:Unknown"), &vocab);
        assert_eq!(none.dimension(), 4);
        assert!(none.active().is_empty());

        // One known permission, one unknown api.
        let one = vectorize(&rec("z\t-1\tperm:Q\tapi:Nope"), &vocab);
        assert_eq!(one.active(), &[1]);
        assert!(vocab.block_range(Block::Permission).contains(&1));
    }

    #[test]
    fn vocabulary_file_round_trip() {
        let records = [rec("a\t+1\tperm:P\taction:A\tapi:X"), rec("b\t-1\tperm:Q\tapi:X")];
        let vocab = build_vocabulary(&records, cfg(1, 10)).unwrap();
        let mut buf = Vec::new();
        write_vocabulary(&vocab, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "0\tperm:P\t1\n1\tperm:Q\t1\n2\taction:A\t1\n3\tapi:X\t2\n"
        );
        assert_eq!(read_vocabulary(&buf[..]).unwrap(), vocab);
    }

    #[test]
    fn vocabulary_file_errors() {
        for bad in ["1\tperm:P\t1\n", "0\tP\t1\n", "0\tapi:X\t1\n1\tperm:P\t1\n", "0\tperm:P\tx\n", "0\tperm:P\n"] {
            assert!(read_vocabulary(bad.as_bytes()).is_err(), "{bad:?} accepted");
        }
    }
}
