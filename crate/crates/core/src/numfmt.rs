//! Number formatting shared by the text outputs.
//!
//! Three conventions are used: exact shortest round-trip values for the
//! chain files, `%g`-style six-significant-digit values for report tables,
//! and R-style fixed formatting (7 significant digits, columns padded to a
//! common number of decimals) for the printed bin-width table.

/// Significant digits of the `%g`-style tables.
pub const CHAIN_SIG_DIGITS: usize = 6;

/// Shortest text that parses back to exactly `x`, in exponent form outside `[1e-4, 1e15)`.
pub fn format_exact(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn mantissa_exponent(x: f64, sig: usize) -> (String, i32) {
    let s = format!("{:.*e}", sig - 1, x.abs());
    let (m, e) = s.split_once('e').expect("exponent marker");
    (m.to_string(), e.parse().expect("integer exponent"))
}

/// Decimals R would use to show `x` at `digits` significant digits,
/// after dropping trailing zeros.
pub fn r_decimals(x: f64, digits: usize) -> usize {
    if x == 0.0 || !x.is_finite() {
        return 0;
    }
    let (m, e) = mantissa_exponent(x, digits);
    let frac = m.split_once('.').map(|(_, f)| f.trim_end_matches('0')).unwrap_or("");
    let sig = frac.len() as i32 + 1;
    (sig - 1 - e).max(0) as usize
}

/// Formats a single value the way R prints a scalar (7 significant digits).
pub fn format_r(x: f64) -> String {
    format!("{:.*}", r_decimals(x, 7), x)
}

/// Formats a column so every entry carries the decimals its most demanding
/// entry needs at 7 significant digits.
pub fn format_r_column(values: &[f64]) -> Vec<String> {
    let decimals = values.iter().map(|&v| r_decimals(v, 7)).max().unwrap_or(0);
    values.iter().map(|v| format!("{v:.decimals$}")).collect()
}

/// `%g`-style formatting with six significant digits.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let (m, e) = mantissa_exponent(x, CHAIN_SIG_DIGITS);
    let sign = if x < 0.0 { "-" } else { "" };
    if !(-4..6).contains(&e) {
        let m = trim_fraction(&m);
        let esign = if e < 0 { '-' } else { '+' };
        format!("{sign}{m}e{esign}{:02}", e.abs())
    } else {
        let decimals = (CHAIN_SIG_DIGITS as i32 - 1 - e).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x.abs());
        format!("{sign}{}", trim_fraction(&fixed))
    }
}

/// Rounds `x` to the precision stored in chain files.
pub fn round_g6(x: f64) -> f64 {
    format_g6(x).parse().unwrap_or(x)
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
