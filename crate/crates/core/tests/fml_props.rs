mod common;

use aifml_core::fml::*;
use common::docgen::{valid_document, Mutation};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generated_documents_are_valid(doc in valid_document()) {
        prop_assert_eq!(validate(&doc), vec![]);
    }

    #[test]
    fn parse_serialize_is_identity(doc in valid_document()) {
        let text = serialize_fml(&doc);
        let back = parse_fml(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(serialize_fml(&back), text);
    }

    #[test]
    fn validity_matches_reparse(doc in valid_document(), which in 0usize..6) {
        let doc = match Mutation::ALL.get(which) {
            Some(m) => match m.apply(&doc) {
                Some(d) => d,
                None => doc,
            },
            None => doc,
        };
        let valid = validate(&doc).is_empty();
        prop_assert_eq!(valid, parse_fml(&serialize_fml(&doc)).is_ok());
    }

    #[test]
    fn mutations_are_rejected_with_their_class(doc in valid_document()) {
        for m in Mutation::ALL {
            let Some(bad) = m.apply(&doc) else { continue };
            prop_assert!(validate(&bad).iter().any(|v| v.kind == m.expected()));
            match parse_fml(&serialize_fml(&bad)) {
                Err(FmlError::SemanticError(v)) => {
                    prop_assert!(v.iter().any(|v| v.kind == m.expected()), "{:?}: {:?}", m, v)
                }
                other => prop_assert!(false, "{:?} accepted: {:?}", m, other),
            }
        }
    }
}

#[test]
fn serialization_is_deterministic() {
    let doc = aifml_core::fixtures::flooding();
    assert_eq!(serialize_fml(&doc), serialize_fml(&doc.clone()));
}

#[test]
fn minimal_fixture_matches_committed_bytes() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/minimal.fml")).unwrap();
    assert_eq!(serialize_fml(&parse_fml(&text).unwrap()), text);
}
