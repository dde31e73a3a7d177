//! Number formatting shared by every CSV/JSON writer.

/// Round-trip-safe scientific notation with 17 significant digits.
///
/// Non-finite values are written as `inf`, `-inf` and `nan`.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// A JSON number for `x`, or `null` when it is not finite.
pub fn json_number(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}
