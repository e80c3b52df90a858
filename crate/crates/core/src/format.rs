//! Number formatting shared by every text output.

/// Significant digits used for floating-point output.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with [`SIGNIFICANT_DIGITS`] significant digits, in plain
/// decimal notation for moderate magnitudes and scientific otherwise.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let last = SIGNIFICANT_DIGITS as i32 - 1;
    if (-5..15).contains(&exponent) {
        let decimals = (last - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = last as usize)
    }
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits, for JSON output.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.prec$e}", prec = SIGNIFICANT_DIGITS - 1)
        .parse()
        .unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig(0.6180339887498949), "0.618033988750");
        assert_eq!(sig(12.5), "12.5000000000");
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(1.5e-9), "1.50000000000e-9");
        assert_eq!(sig(-2.0), "-2.00000000000");
        assert_eq!(round_sig(0.6180339887498949), 0.61803398875);
    }
}
