//! Revival period from a cat-state fidelity series.
//!
//! The cat state passes through itself twice per orbit: once halfway, when
//! `|Z2>` has turned into `|Z2'>`, and again when the orbit closes. The
//! period is the time of the second maximum.

use crate::{Error, FidelitySeries, Result};

/// Smallest fidelity accepted as a revival.
pub const REVIVAL_THRESHOLD: f64 = 0.1;

#[derive(Copy, Clone, Debug)]
pub struct Revival {
    /// First maximum, close to half the period.
    pub half: f64,
    /// Second maximum: the end of the orbit.
    pub period: f64,
    pub fidelity: f64,
}

/// Local maxima above the threshold, each refined by a parabola through the
/// three grid points around it.
pub fn fidelity_maxima(s: &FidelitySeries) -> Vec<(f64, f64)> {
    let (t, f) = (&s.times, &s.fidelity);
    let mut out = Vec::new();
    for i in 1..f.len().saturating_sub(1) {
        if f[i] > f[i - 1] && f[i] >= f[i + 1] && f[i] > REVIVAL_THRESHOLD {
            let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            // parabola on a possibly uneven grid
            let d0 = (f[i] - f[i - 1]) / h0;
            let d1 = (f[i + 1] - f[i]) / h1;
            let curv = (d1 - d0) / (h0 + h1);
            let slope = d0 + curv * h0;
            let shift = -slope / (2.0 * curv);
            out.push((t[i] + shift, f[i] + slope * shift + curv * shift * shift));
        }
    }
    out
}

pub fn revival_period(s: &FidelitySeries) -> Result<Revival> {
    let m = fidelity_maxima(s);
    if m.len() < 2 {
        return Err(Error::NoRevival { threshold: REVIVAL_THRESHOLD, t_max: s.times.last().copied().unwrap_or(0.0) });
    }
    Ok(Revival { half: m[0].0, period: m[1].0, fidelity: m[1].1 })
}
