//! Decimal formatting shared by every text codec in the crate.
//!
//! All file formats print real values with at most six decimal digits,
//! trailing zeros trimmed, `.` as the separator. Values that carry at most
//! six decimal digits round-trip exactly through [`format_decimal`] and
//! `str::parse::<f64>()`.

/// Formats `v` with up to six decimal digits, trimming trailing zeros.
///
/// `120.0` becomes `"120"`, `0.5` stays `"0.5"`, `1.0 / 3.0` becomes
/// `"0.333333"`. Negative zero normalizes to `"0"`.
pub fn format_decimal(v: f64) -> String {
    let mut s = format!("{v:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        assert_eq!(format_decimal(120.0), "120");
        assert_eq!(format_decimal(110.5), "110.5");
        assert_eq!(format_decimal(0.25), "0.25");
        assert_eq!(format_decimal(-3.5), "-3.5");
    }

    #[test]
    fn six_digit_cap() {
        assert_eq!(format_decimal(1.0 / 3.0), "0.333333");
        assert_eq!(format_decimal(0.1234567), "0.123457");
    }

    #[test]
    fn negative_zero_normalizes() {
        assert_eq!(format_decimal(-0.0), "0");
        assert_eq!(format_decimal(-0.0000001), "0");
    }

    #[test]
    fn round_trips_six_decimal_values() {
        for &v in &[0.0, 1.0, 54.0, 70.5, 99.999999, -17.25, 0.000001] {
            let s = format_decimal(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "value {v} via {s:?}");
        }
    }
}
