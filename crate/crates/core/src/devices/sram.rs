//! 8T-SRAM read port: ON resistance as a function of the read-port gate bias.
//!
//! The map is a monotone cubic (Fritsch-Carlson) through five anchors, in
//! log-resistance. The 0.7 V, 0.52 V and 0.45 V anchors are measured
//! operating points; 0.6 V and 0.48 V are interpolation knots.

use crate::error::{check_range, Result};
use libm::{exp, log};

pub const V_BIAS_MIN: f64 = 0.45;
pub const V_BIAS_MAX: f64 = 0.7;

const ANCHORS: [(f64, f64); 5] = [
    (0.45, 250e3),
    (0.48, 150e3),
    (0.52, 60e3),
    (0.60, 20e3),
    (0.70, 10e3),
];

fn slopes() -> [f64; 5] {
    let x: [f64; 5] = core::array::from_fn(|i| ANCHORS[i].0);
    let y: [f64; 5] = core::array::from_fn(|i| log(ANCHORS[i].1));
    let h: [f64; 4] = core::array::from_fn(|i| x[i + 1] - x[i]);
    let d: [f64; 4] = core::array::from_fn(|i| (y[i + 1] - y[i]) / h[i]);
    let mut m = [0.0; 5];
    for k in 1..4 {
        if d[k - 1] * d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[4] = end(h[3], h[2], d[3], d[2]);
    m
}

/// Read-port ON resistance at gate bias `v_bias` (V).
pub fn ron_for_vbias(v_bias: f64) -> Result<f64> {
    check_range("SRAM V_BIAS (V)", v_bias, V_BIAS_MIN, V_BIAS_MAX)?;
    let m = slopes();
    let k = (0..4).find(|&k| v_bias <= ANCHORS[k + 1].0).unwrap_or(3);
    let (x0, x1) = (ANCHORS[k].0, ANCHORS[k + 1].0);
    let (y0, y1) = (log(ANCHORS[k].1), log(ANCHORS[k + 1].1));
    let h = x1 - x0;
    let t = (v_bias - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    let y = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m[k]
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m[k + 1];
    Ok(exp(y))
}

/// Inverse of [`ron_for_vbias`].
pub fn vbias_for_ron(r_on: f64) -> Result<f64> {
    check_range("SRAM R_ON (ohm)", r_on, ANCHORS[4].1, ANCHORS[0].1)?;
    let (mut lo, mut hi) = (V_BIAS_MIN, V_BIAS_MAX);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ron_for_vbias(mid)? > r_on {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
