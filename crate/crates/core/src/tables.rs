//! Reference W_n correction phases (degrees, one decimal) for 90° and 180°
//! target pulses.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WnRow {
    pub n: usize,
    pub angle_degrees: f64,
    pub phases_degrees: &'static [f64],
}

const fn row(n: usize, angle_degrees: f64, phases_degrees: &'static [f64]) -> WnRow {
    WnRow {
        n,
        angle_degrees,
        phases_degrees,
    }
}

pub const W_ROWS: &[WnRow] = &[
    row(1, 90.0, &[97.2, 291.5]),
    row(2, 90.0, &[84.3, 162.0, 345.5, 286.7]),
    row(2, 90.0, &[132.3, 339.1, 26.4, 222.2]),
    row(3, 90.0, &[22.0, 186.0, 89.3, 319.2, 178.2, 325.7]),
    row(3, 90.0, &[79.9, 119.2, 257.3, 81.0, 308.4, 286.9]),
    row(1, 180.0, &[104.5, 313.4]),
    row(2, 180.0, &[79.2, 193.4, 24.9, 307.5]),
    row(2, 180.0, &[130.0, 1.5, 56.7, 259.9]),
    row(3, 180.0, &[341.9, 147.9, 100.5, 355.9, 207.3, 339.4]),
    row(3, 180.0, &[69.5, 141.7, 289.4, 121.4, 350.1, 307.3]),
];

/// Rows for `W_n` at the given target angle, in listed order.
pub fn rows(n: usize, angle_degrees: f64) -> Vec<&'static WnRow> {
    W_ROWS
        .iter()
        .filter(|r| r.n == n && (r.angle_degrees - angle_degrees).abs() < 1e-9)
        .collect()
}

/// One-based row lookup.
pub fn row_for(n: usize, angle_degrees: f64, index: usize) -> Result<&'static WnRow> {
    let rs = rows(n, angle_degrees);
    if index == 0 || index > rs.len() {
        return Err(invalid(format!(
            "no reference row {index} for W{n} at {angle_degrees} degrees ({} available)",
            rs.len()
        )));
    }
    Ok(rs[index - 1])
}
