//! Float formatting for tabular artifacts.

/// Shortest round-trip representation; exponent notation outside
/// `[1e-4, 1e16)` so tiny residuals stay readable.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
