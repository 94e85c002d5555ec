//! Decimal rounding shared by the BVH writer and the JSON-Lines event log.

/// Significant digits kept when numbers are written to text.
pub const SIG_DIGITS: usize = 9;

/// Rounds `v` to `digits` significant decimal digits.
///
/// Non-finite values are returned unchanged.
pub fn round_sig(v: f64, digits: usize) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    let digits = digits.max(1);
    format!("{:.*e}", digits - 1, v)
        .parse()
        .expect("scientific notation produced by format! always parses")
}

/// Formats `v` with at most [`SIG_DIGITS`] significant digits, using the
/// shortest decimal that reads back to the rounded value.
pub fn fmt_sig(v: f64) -> String {
    let r = round_sig(v, SIG_DIGITS);
    if r == 0.0 {
        // collapses -0
        return "0".to_string();
    }
    format!("{r}")
}
