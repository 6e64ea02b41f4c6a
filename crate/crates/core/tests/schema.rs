use std::path::Path;

use contactlab::config::RunConfig;
use serde_json::Value;

fn load(rel: &str) -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join(rel);
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

/// Every field the parser accepts is documented in the schema, and nothing more.
#[test]
fn schema_matches_the_config_structs() {
    let schema = load("../../docs/config.schema.json");
    let cfg = RunConfig::from_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/golden.json")).unwrap();
    let full = serde_json::to_value(&cfg).unwrap();
    let props = &schema["properties"];
    assert_eq!(keys(&full), keys(props));
    for section in ["simulate", "shape", "rates", "tails", "blocks", "duality", "section5"] {
        assert_eq!(keys(&full[section]), keys(&props[section]["properties"]), "{section}");
    }
    assert_eq!(keys(&full["mc"]), keys(&schema["$defs"]["mc"]["properties"]));
    assert_eq!(keys(&full["block_params"]), keys(&schema["$defs"]["block_params"]["properties"]));
}

#[test]
fn schema_defaults_are_the_parser_defaults() {
    let schema = load("../../docs/config.schema.json");
    let minimal: RunConfig = serde_json::from_value(serde_json::json!({
        "environment": {"kind": "dirac", "rate": 1.0, "lambda_min": 1.0, "lambda_max": 1.0, "dim": 1}
    }))
    .unwrap();
    let full = serde_json::to_value(&minimal).unwrap();
    let mc = &schema["$defs"]["mc"]["properties"];
    for (k, v) in full["mc"].as_object().unwrap() {
        assert_eq!(&mc[k]["default"], v, "mc.{k}");
    }
    for section in ["simulate", "shape", "rates", "tails", "blocks", "duality", "section5"] {
        for (k, v) in full[section].as_object().unwrap() {
            assert_eq!(&schema["properties"][section]["properties"][k]["default"], v, "{section}.{k}");
        }
    }
    assert_eq!(full["output_dir"], schema["properties"]["output_dir"]["default"]);
}
