//! Text formatting for floats in every artifact this crate writes.

/// Shortest decimal text that parses back to the identical `f64`.
///
/// Plain notation inside `[1e-4, 1e16)`, exponent notation outside it.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
