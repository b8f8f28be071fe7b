//! Number formatting shared by every CSV and JSON artifact.

/// Shortest round-trip decimal; scientific notation outside [1e-4, 1e15).
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x == f64::INFINITY { "inf".into() } else if x == f64::NEG_INFINITY { "-inf".into() } else { "0".into() };
    }
    let a = x.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Joins formatted cells with commas.
pub fn row(cells: &[String]) -> String {
    cells.join(",")
}
