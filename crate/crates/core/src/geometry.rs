//! Node geometry to link statistics.
//!
//! The primary transmitter sits at the origin with its receiver one reference
//! distance `d0` above it; the secondary pair is the same arrangement shifted
//! sideways by `d_sp`. Both direct links therefore have length `d0`, and both
//! cross links have length `sqrt(d_sp^2 + d0^2)`. Mean SNRs follow
//! `mean_snr_p * (d/d0)^(-alpha)` and both rates are chosen to maximize the
//! interference-free throughput of their link.

use crate::channel::LinkStats;
use crate::learner::rate_fixed_point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    /// Distance between the pairs, relative to the reference distance.
    pub d_sp_over_d0: f64,
    pub pathloss_alpha: f64,
    /// Mean SNR of the primary direct link (and, by symmetry, the secondary
    /// direct link).
    pub mean_snr_p: f64,
}

impl Geometry {
    pub fn new(d_sp_over_d0: f64) -> Self {
        Geometry {
            d_sp_over_d0,
            pathloss_alpha: 2.0,
            mean_snr_p: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_sp_over_d0", self.d_sp_over_d0),
            ("pathloss_alpha", self.pathloss_alpha),
            ("mean_snr_p", self.mean_snr_p),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Map a geometry to mean SNRs and throughput-optimal rates.
pub fn geometry_to_stats(geom: &Geometry) -> Result<LinkStats> {
    geom.validate()?;
    let cross = (geom.d_sp_over_d0 * geom.d_sp_over_d0 + 1.0).sqrt();
    let cross_snr = geom.mean_snr_p * cross.powf(-geom.pathloss_alpha);
    let rate = optimal_rate(geom.mean_snr_p)?;
    LinkStats::new(
        geom.mean_snr_p,
        geom.mean_snr_p,
        cross_snr,
        cross_snr,
        rate,
        rate,
    )
}

/// Rate maximizing `r * P(r < C(gamma))` under Rayleigh fading; shares the
/// stationarity condition with the learner's rate recursion.
pub fn optimal_rate(mean_snr: f64) -> Result<f64> {
    rate_fixed_point(mean_snr)
}
