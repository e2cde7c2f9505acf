//! Twelve-significant-digit rendering for everything printed to stdout.

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Fixed notation for exponents in `[-5, 11]`, scientific otherwise.
pub fn sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", SIGNIFICANT_DIGITS - 1, 0.0);
    }
    // Let the scientific form do the rounding, then read the exponent back.
    let scientific = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exponent: i32 = scientific
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-5..=11).contains(&exponent) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        scientific
    }
}

pub fn sig_list(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| sig(*v)).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(sig(0.5), "0.500000000000");
        assert_eq!(sig(1.0 - (-1.0f64).exp()), "0.632120558829");
        assert_eq!(sig(3.0), "3.00000000000");
        assert_eq!(sig(123456.0), "123456.000000");
        assert_eq!(sig(0.0), "0.00000000000");
        assert_eq!(sig(-2.5e-9), "-2.50000000000e-9");
        assert_eq!(sig(0.99999999999999), "1.00000000000");
        assert_eq!(sig(f64::INFINITY), "inf");
    }
}
