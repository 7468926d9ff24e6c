use proptest::prelude::*;

use droidsel::apk::{extract_features, parse_dex, ApkArchive};
use droidsel::fixtures::{sample_apk, DexBuilder, ZipBuilder};
use droidsel::vectorize::{build_vocabulary, vectorize, Block, VocabularyConfig};
use droidsel::apk::FeatureRecord;

fn ident() -> impl Strategy<Value = String> {
    "[a-z]{1,3}"
}

fn methods() -> impl Strategy<Value = Vec<(String, String)>> {
    prop::collection::vec(("L[a-c]{1,2};", ident()), 0..6)
}

fn extract(bytes: Vec<u8>) -> FeatureRecord {
    let archive = ApkArchive::from_bytes(bytes).unwrap();
    extract_features(&archive, "app", None).unwrap()
}

fn as_refs(v: &[(String, String)]) -> Vec<(&str, &str)> {
    v.iter().map(|(c, n)| (c.as_str(), n.as_str())).collect()
}

proptest! {
    #[test]
    fn multidex_is_union_of_files(first in methods(), second in methods()) {
        let (a, b) = (as_refs(&first), as_refs(&second));
        let record = extract(sample_apk(&["p"], &[], &[&a, &b]));
        let one = |ms: &[(&str, &str)]| {
            let dex = ms.iter().fold(DexBuilder::new(), |d, (c, n)| d.method(c, n)).build();
            parse_dex(&dex).unwrap().api_refs
        };
        let mut expected: Vec<String> = one(&a).into_iter().chain(one(&b)).collect();
        expected.sort();
        expected.dedup();
        let mut got: Vec<String> = record.dex.api_refs.into_iter().collect();
        got.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn extraction_is_deterministic(perms in prop::collection::vec(ident(), 0..5), ms in methods()) {
        let perms: Vec<&str> = perms.iter().map(String::as_str).collect();
        let bytes = sample_apk(&perms, &["act"], &[&as_refs(&ms)]);
        prop_assert_eq!(extract(bytes.clone()), extract(bytes));
    }

    #[test]
    fn duplicate_order_does_not_change_membership(perms in prop::collection::vec(ident(), 1..6), rot in 0usize..6) {
        let mut doubled: Vec<&str> = perms.iter().map(String::as_str).collect();
        doubled.extend(perms.iter().map(String::as_str));
        let k = rot % doubled.len();
        doubled.rotate_left(k);
        let plain: Vec<&str> = perms.iter().map(String::as_str).collect();
        let a = extract(sample_apk(&plain, &[], &[]));
        let b = extract(sample_apk(&doubled, &[], &[]));
        let mut x: Vec<String> = a.manifest.permissions.into_iter().collect();
        let mut y: Vec<String> = b.manifest.permissions.into_iter().collect();
        x.sort();
        y.sort();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn vocabulary_columns_match_recount(apps in prop::collection::vec((prop::collection::vec(ident(), 0..4), methods()), 1..8), min_df in 1usize..3) {
        let records: Vec<FeatureRecord> = apps
            .iter()
            .enumerate()
            .map(|(i, (perms, ms))| {
                let perms: Vec<&str> = perms.iter().map(String::as_str).collect();
                let mut r = extract(sample_apk(&perms, &[], &[&as_refs(ms)]));
                r.app_id = format!("app{i}");
                r
            })
            .collect();
        let config = VocabularyConfig { min_doc_freq: min_df, max_api_features: 2000 };
        let vocab = match build_vocabulary(&records, config) {
            Ok(v) => v,
            Err(_) => return Ok(()),
        };
        // Brute-force recount: per block, names with enough documents, sorted.
        let mut offset = 0;
        for block in [Block::Permission, Block::Action, Block::Api] {
            let names_of = |r: &FeatureRecord| -> Vec<String> {
                match block {
                    Block::Permission => r.manifest.permissions.iter().cloned().collect(),
                    Block::Action => r.manifest.intent_actions.iter().cloned().collect(),
                    Block::Api => r.dex.api_refs.iter().cloned().collect(),
                }
            };
            let mut all: Vec<String> = records.iter().flat_map(names_of).collect();
            all.sort();
            all.dedup();
            let kept: Vec<String> = all
                .into_iter()
                .filter(|n| records.iter().filter(|r| names_of(r).contains(n)).count() >= min_df)
                .collect();
            prop_assert_eq!(vocab.block_range(block), offset..offset + kept.len());
            for (rank, name) in kept.iter().enumerate() {
                prop_assert_eq!(vocab.index_of(block, name), Some(offset + rank));
                prop_assert!(vocab.doc_freq(offset + rank).unwrap() >= min_df);
            }
            offset += kept.len();
        }
        prop_assert_eq!(vocab.dimension(), offset);
        for r in &records {
            prop_assert_eq!(vectorize(r, &vocab), vectorize(r, &vocab));
        }
    }
}

#[test]
fn zip_entries_survive_round_trip_through_builder() {
    let bytes = ZipBuilder::new().stored("a.txt", b"alpha").deflated("b/c.bin", &[7u8; 300]).build();
    let archive = ApkArchive::from_bytes(bytes).unwrap();
    assert_eq!(archive.read("a.txt").unwrap(), b"alpha");
    assert_eq!(archive.read("b/c.bin").unwrap(), vec![7u8; 300]);
}
