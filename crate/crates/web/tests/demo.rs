use fano_balance_web::demo;
use serde_json::Value;

const P1_KINK: &str = r#"{"polytope": "P1", "k": 1, "pieces": [{"linear": ["0"], "const": "0"}, {"linear": ["1"], "const": "0"}]}"#;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn invariants_round_trip() {
    let v = parse(demo::invariants(P1_KINK).unwrap());
    assert_eq!(v["report"]["df"], "1/4");
    assert_eq!(v["rescaled_chow"].as_array().unwrap().len(), 12);
    assert!(demo::invariants("{").is_err());
}

#[test]
fn balance_flattens_the_defect() {
    let v = parse(demo::balance_p1(2, 100).unwrap());
    assert_eq!(v["converged"], true);
    let sup = |key: &str| v[key]["b"].as_array().unwrap().iter().map(|b| b.as_f64().unwrap().abs()).fold(0.0, f64::max);
    assert!(sup("after") < sup("before"));
    assert!(demo::balance_p1(0, 10).is_err());
}

#[test]
fn slope_of_product_vanishes() {
    let product = r#"{"polytope": "P1", "k": 1, "pieces": [{"linear": ["1"], "const": "0"}]}"#;
    let v = parse(demo::slope_curve(product, 20.0).unwrap());
    assert_eq!(v["product"], true);
    assert!(v["slope"]["q_est"].as_f64().unwrap().abs() < 1e-4);
    assert!(demo::slope_curve(P1_KINK, 1000.0).is_err());
}
