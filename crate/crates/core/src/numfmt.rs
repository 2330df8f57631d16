//! Fixed-precision number rendering shared by every text output.
//!
//! Reals are printed with 9 significant digits, rounded half-to-even on the
//! exact binary value, in the style of C's `%.9g`: trailing zeros are
//! trimmed and scientific notation is used only for very small or very
//! large magnitudes.

const SIG_DIGITS: i32 = 9;

/// Renders `x` with 9 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // `{:e}` formatting is exact and rounds ties to even.
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let body = if (-5..SIG_DIGITS).contains(&exp) {
        if exp >= 0 {
            let split = (exp + 1) as usize;
            let (int_part, frac_part) = digits.split_at(split);
            join_trimmed(int_part, frac_part)
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            join_trimmed("0", &format!("{zeros}{digits}"))
        }
    } else {
        let (lead, rest) = digits.split_at(1);
        let m = join_trimmed(lead, rest);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

fn join_trimmed(int_part: &str, frac_part: &str) -> String {
    let frac = frac_part.trim_end_matches('0');
    if frac.is_empty() {
        int_part.to_string()
    } else {
        format!("{int_part}.{frac}")
    }
}

/// Rounds `x` to the value its 9-digit rendering denotes.
pub fn round_real(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    fmt_real(x).parse().unwrap_or(x)
}
