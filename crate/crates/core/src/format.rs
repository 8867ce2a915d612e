//! Number formatting shared by every text output.

/// Formats `x` with twelve significant digits, so any printed value carries at
/// least nine. Zero prints as `0`; very small or large magnitudes switch to
/// exponent notation. The output parses back with `str::parse::<f64>`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..15).contains(&magnitude) {
        let decimals = (11 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}
