use nsmpi_web::{bound_curve_json, dynloc_json, tight_json};
use serde_json::Value;

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn tight_loss_meets_bound() {
    let view = parse(tight_json(2, 3, 0.1, 0.9, 8));
    let (loss, bound) = (floats(&view["loss"]), floats(&view["bound"]));
    assert_eq!(loss.len(), 8);
    for (l, b) in loss.iter().zip(&bound) {
        assert!((l - b).abs() <= 1e-9);
    }
    assert_eq!(view["values"][0].as_array().unwrap().len(), 40);
    let right_at = view["right_at"].as_array().unwrap();
    assert!(right_at[0].is_null());
    for k in 2..=8 {
        assert_eq!(right_at[k - 1].as_u64(), Some(k as u64));
    }
}

#[test]
fn bound_curve_decreases() {
    let view = parse(bound_curve_json(0.9, 20, 0.1, 12));
    let bound = floats(&view["bound"]);
    assert_eq!(bound.len(), 12);
    assert!(bound.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(view["stationary"].as_f64().unwrap(), bound[0]);
    assert_eq!(view["horizon_ell"], 10);
    assert!(view["horizon_constant"].as_f64().unwrap() < 3.164);
    assert!(bound_curve_json(1.5, 20, 0.1, 3).is_err());
    assert!(bound_curve_json(0.9, 20, 0.1, 0).is_err());
}

#[test]
fn dynloc_curves() {
    let view = parse(dynloc_json(4, 0.9, 2, "inf", 1.0, 12, 3, 7));
    assert_eq!(floats(&view["mean_loss"]).len(), 12);
    assert!(floats(&view["sup_loss"]).iter().zip(floats(&view["mean_loss"])).all(|(s, m)| *s >= m - 1e-12));
    assert_eq!(dynloc_json(4, 0.9, 2, "inf", 1.0, 12, 3, 7), dynloc_json(4, 0.9, 2, "inf", 1.0, 12, 3, 7));
    let exact = parse(dynloc_json(4, 0.9, 1, "inf", 0.0, 10, 1, 0));
    assert!(floats(&exact["sup_loss"]).last().unwrap().abs() <= 1e-9);
    assert!(dynloc_json(40, 0.9, 1, "1", 1.0, 5, 1, 0).is_err());
    assert!(dynloc_json(4, 0.9, 1, "often", 1.0, 5, 1, 0).is_err());
}
