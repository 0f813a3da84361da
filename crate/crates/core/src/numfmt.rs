//! `%g`-style number formatting shared by the tabular outputs.

/// Formats `x` with `digits` significant digits in the style of C's `%g`:
/// fixed notation for decimal exponents in `[-4, digits)`, scientific
/// otherwise, trailing zeros removed. Non-finite values become `NA`, `Inf`
/// or `-Inf`.
pub fn format_g(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Ten significant digits, the precision of every table this crate writes.
pub fn g10(x: f64) -> String {
    format_g(x, 10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_c_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (1.0 / 3.0, "0.3333333333"),
            (123456.789, "123456.789"),
            (1e10, "1e+10"),
            (12345678901.0, "1.23456789e+10"),
            (0.0001234, "0.0001234"),
            (0.00001234, "1.234e-05"),
            (409.0, "409"),
            (-0.1283, "-0.1283"),
            (9999999999.5, "1e+10"),
        ];
        for (x, want) in cases {
            assert_eq!(g10(x), want, "formatting {x}");
        }
        assert_eq!(g10(f64::NAN), "NA");
        assert_eq!(format_g(2.0f64.sqrt(), 3), "1.41");
    }
}
