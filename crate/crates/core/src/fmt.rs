//! Fixed-precision number formatting shared by the text file formats.

/// Formats `value` with `digits` significant digits, in the style of C's
/// `%.{digits}g`: fixed notation for moderate exponents, scientific
/// otherwise, trailing zeros removed.
///
/// With `digits = 17` every finite `f64` round-trips exactly through
/// `str::parse::<f64>()`.
pub fn sig(value: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".to_string()
        } else if value > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    if value == 0.0 {
        return if value.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", strip_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, value)).to_string()
    }
}

/// 17 significant digits: the round-trip precision for `f64`.
pub fn exact(value: f64) -> String {
    sig(value, 17)
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matches_c_style_g() {
        assert_eq!(sig(0.4, 9), "0.4");
        assert_eq!(sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(sig(std::f64::consts::LN_10, 9), "2.30258509");
        assert_eq!(sig(1234567890.0, 9), "1.23456789e9");
        assert_eq!(sig(0.00001234, 9), "1.234e-5");
        assert_eq!(sig(-0.5, 3), "-0.5");
        assert_eq!(sig(100.0, 9), "100");
        assert_eq!(sig(0.0, 9), "0");
    }

    proptest! {
        #[test]
        fn exact_round_trips(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back: f64 = exact(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
