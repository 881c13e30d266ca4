/// Significant digits used when rendering coefficients.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `value` with at most `digits` significant digits, dropping
/// trailing zeros. Magnitudes in `[1e-5, 1e15)` print as plain decimals,
/// everything else in `1.5e-20` style.
pub fn format_significant(value: f64, digits: usize) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), value);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits_only: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let significant = digits_only.trim_end_matches('0');
    let significant = if significant.is_empty() {
        "0"
    } else {
        significant
    };

    let body = if (-5..15).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if significant.len() <= int_len {
                format!("{significant}{}", "0".repeat(int_len - significant.len()))
            } else {
                format!("{}.{}", &significant[..int_len], &significant[int_len..])
            }
        } else {
            format!("0.{}{significant}", "0".repeat((-exp - 1) as usize))
        }
    } else if significant.len() == 1 {
        format!("{significant}e{exp}")
    } else {
        format!("{}.{}e{exp}", &significant[..1], &significant[1..])
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}
