use std::collections::BTreeSet;

use serde_json::Value;

use petlp_core::policy::{OutputKind, PlatformRulePack};

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/rule_pack.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn enum_of(v: &Value) -> BTreeSet<String> {
    v["enum"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

#[test]
fn schema_enums_match_types() {
    let s = schema();
    let kinds: BTreeSet<String> = OutputKind::ALL.iter().map(|k| k.as_str().to_string()).collect();
    assert_eq!(enum_of(&s["$defs"]["output_kind"]), kinds);
    let verdicts = enum_of(&s["$defs"]["verdict"]);
    for v in &verdicts {
        let parsed: petlp_core::policy::Verdict = serde_json::from_value(Value::String(v.clone())).unwrap();
        assert_eq!(parsed.as_str(), v);
    }
    assert_eq!(verdicts.len(), 3);
}

#[test]
fn bundled_pack_uses_only_schema_fields() {
    let s = schema();
    let top: BTreeSet<&str> = s["properties"].as_object().unwrap().keys().map(String::as_str).collect();
    let rule: BTreeSet<&str> =
        s["$defs"]["rule"]["properties"].as_object().unwrap().keys().map(String::as_str).collect();
    let pack = serde_json::to_value(PlatformRulePack::reddit()).unwrap();
    for k in pack.as_object().unwrap().keys() {
        assert!(top.contains(k.as_str()), "{k}");
    }
    for r in pack["rules"].as_array().unwrap() {
        for k in r.as_object().unwrap().keys() {
            assert!(rule.contains(k.as_str()), "{k}");
        }
        for req in s["$defs"]["rule"]["required"].as_array().unwrap() {
            assert!(r.get(req.as_str().unwrap()).is_some());
        }
    }
}
