use nriguide::presets;
use serde_json::Value;

fn validator() -> jsonschema::Validator {
    let text = include_str!("../../../docs/config.schema.json");
    let schema: Value = serde_json::from_str(text).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn presets_satisfy_schema() {
    let v = validator();
    for name in presets::NAMES {
        let doc: Value = serde_json::from_str(presets::file_text(name).unwrap()).unwrap();
        let errs: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errs.is_empty(), "{name}: {errs:?}");
    }
}

#[test]
fn schema_rejects_what_the_loader_rejects() {
    let v = validator();
    let mut doc: Value = serde_json::from_str(presets::file_text("fig3").unwrap()).unwrap();
    doc["stray"] = Value::Bool(true);
    assert!(!v.is_valid(&doc));
    assert!(nriguide::ScanConfig::from_json(&doc.to_string()).is_err());

    let mut doc: Value = serde_json::from_str(presets::file_text("fig3").unwrap()).unwrap();
    doc["stack"]["atom"] = serde_json::json!({"fraction": 1.5});
    assert!(!v.is_valid(&doc));
    assert!(nriguide::ScanConfig::from_json(&doc.to_string()).is_err());

    let mut doc: Value = serde_json::from_str(presets::file_text("fig3").unwrap()).unwrap();
    doc["refine"] = serde_json::json!([{"quantity": "Gnope"}]);
    assert!(!v.is_valid(&doc));
    assert!(nriguide::ScanConfig::from_json(&doc.to_string()).is_err());

    let mut doc: Value = serde_json::from_str(presets::file_text("fig3").unwrap()).unwrap();
    doc["green"]["tolerance"] = serde_json::json!(1e-3);
    assert!(!v.is_valid(&doc));
    assert!(nriguide::ScanConfig::from_json(&doc.to_string()).is_err());
}

#[test]
fn every_quantity_name_matches_the_pattern() {
    let v = validator();
    let mut doc: Value = serde_json::from_str(presets::file_text("fig3").unwrap()).unwrap();
    doc["outputs"] = Value::Array(
        nriguide::Quantity::all()
            .into_iter()
            .map(|q| Value::String(q.name()))
            .collect(),
    );
    assert!(v.is_valid(&doc));
    assert!(nriguide::ScanConfig::from_json(&doc.to_string()).is_ok());
}
