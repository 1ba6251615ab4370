//! Full library pipeline: clean, enrich, decode with a fitted scorer,
//! evaluate.

use std::collections::BTreeMap;

use taxcode::metrics::{evaluate, Date, LabeledPair};
use taxcode::scorer::fit_similarity_scorer;
use taxcode::taxonomy::{CodeKind, TaxCode, TaxonomyTrie};
use taxcode::textprep::{clean, enrich, similarity, CatalogEntry, CleanConfig};
use taxcode::{predict, BeamConfig};

fn config() -> CleanConfig {
    let mut variant_map = BTreeMap::new();
    variant_map.insert(
        "2-in-1".to_string(),
        vec!["2in1".to_string(), "two in one".to_string()],
    );
    CleanConfig::new(
        &taxcode::textprep::DEFAULT_NOISE_PATTERNS
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>(),
        &variant_map,
        &["acme".to_string()],
        1,
    )
    .unwrap()
}

fn hsn(digits: &str) -> TaxCode {
    TaxCode::parse(CodeKind::Hsn, digits).unwrap()
}

#[test]
fn clean_enrich_decode_evaluate_round_trip() {
    let trie = TaxonomyTrie::from_codes(
        CodeKind::Hsn,
        ["84713010", "84717020", "85171200", "94013000"],
    )
    .unwrap();
    let config = config();

    let training = [
        ("acme 2in1 laptop portable", "84713010"),
        ("usb storage drive", "84717020"),
        ("mobile phone handset", "85171200"),
        ("office chair padded", "94013000"),
    ];
    let examples: Vec<(String, TaxCode)> = training
        .iter()
        .map(|(description, code)| {
            let cleaned = clean(description, &config);
            assert!(!cleaned.rejected());
            (cleaned.text().to_string(), hsn(code))
        })
        .collect();
    let scorer = fit_similarity_scorer(examples, 1).unwrap();

    let catalog = vec![CatalogEntry {
        description: "mobile phone handset".to_string(),
        tags: vec!["telecom".to_string()],
    }];

    // A sparse query gains the catalog's standardized wording and tags.
    let sparse = clean("Mobile Phone", &config);
    assert_eq!(sparse.text(), "mobile phone");
    assert_eq!(
        similarity(sparse.text(), &catalog[0].description),
        0.75,
        "prefix of the catalog entry: distance 8 over 32 chars"
    );
    let enriched = enrich(&sparse, &catalog, 0.7).unwrap();
    assert_eq!(enriched.text(), "mobile phone handset telecom");
    let untouched = enrich(&sparse, &catalog, 0.8).unwrap();
    assert_eq!(untouched.text(), "mobile phone");

    // Decode enriched and plain inputs; noisy serials and brand names wash
    // out in cleaning, so each lands on its nearest neighbour's code.
    let inputs = [
        ("ACME 2in1 Laptop portable SN99-X", "84713010", "2024-03-02"),
        ("usb storage drive drive", "84717020", "2024-03-15"),
        ("office chair padded", "94013000", "2024-04-01"),
    ];
    let mut pairs = Vec::new();
    for (raw, gold, date) in inputs {
        let cleaned = clean(raw, &config);
        let prediction = predict(&trie, &scorer, &cleaned, BeamConfig::default()).unwrap();
        assert_eq!(prediction.code.digits(), gold, "{raw}");
        assert_eq!(prediction.probability, 1.0);
        pairs.push(
            LabeledPair::new(prediction.code, hsn(gold), Some(Date::parse(date).unwrap())).unwrap(),
        );
    }
    let enriched_prediction = predict(&trie, &scorer, &enriched, BeamConfig::default()).unwrap();
    assert_eq!(enriched_prediction.code.digits(), "85171200");
    pairs.push(
        LabeledPair::new(
            enriched_prediction.code,
            hsn("85171200"),
            Some(Date::parse("2024-04-20").unwrap()),
        )
        .unwrap(),
    );

    let report = evaluate(&pairs).unwrap();
    assert_eq!(report.exact_match, 1.0);
    assert_eq!(report.kappa, 1.0);
    assert_eq!(report.per_level_accuracy, vec![1.0; 4]);
    let monthly = report.kappa_by_month.unwrap();
    assert_eq!(monthly.len(), 2);
    assert!(monthly.iter().all(|m| m.kappa == Some(1.0)));
}
