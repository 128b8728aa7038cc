//! Fixed-precision numeric output shared by every CSV and JSON writer.

/// Significant digits used for all numeric output.
pub const SIG_DIGITS: usize = 12;

/// Rounds `x` to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Formats `x` for CSV output.
pub fn fmt(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // avoid "-0"
        "0".to_string()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Recursively rounds every float in a JSON value.
pub fn round_json(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(f)) {
                        *n = r;
                    }
                }
            }
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(round_json),
        serde_json::Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_to_twelve_digits() {
        assert_eq!(round_sig(4.0 / 9.0), 0.444444444444);
        assert_eq!(fmt(2.0 / 9.0), "0.222222222222");
        assert_eq!(fmt(1.25), "1.25");
        assert_eq!(fmt(-0.0), "0");
        assert_eq!(fmt(1.276756478321e-16), "1.27675647832e-16");
        assert_eq!(round_sig(1.0e-20 / 3.0), 3.33333333333e-21);
    }
}
