//! Block-fading SNR model and per-slot decoding outcomes at the secondary
//! receiver.
//!
//! In each slot the secondary receiver sees a two-user Gaussian multiple
//! access channel: its own transmitter at SNR `gamma_s` and the primary
//! transmitter at SNR `gamma_ps`. For a rate pair `(R_s, R_p)` the slot falls
//! into exactly one of seven regions (see [`Outcome`]): joint decoding, one
//! packet decodable treating the other as noise, one packet decodable only
//! after removing the other's interference (in either or both directions), or
//! total failure. [`compute_profile`] integrates the region indicators over
//! the fading distributions to produce a [`DecodingProfile`], the sufficient
//! statistic consumed by every downstream module.

use crate::quad;
use crate::{Error, Result};
use rand::RngCore;

/// Mean SNRs of the four links and the two transmission rates.
///
/// All SNRs are linear (dimensionless), rates in bits/s/Hz. `mean_snr_s` is
/// the secondary direct link, `mean_snr_p` the primary direct link,
/// `mean_snr_sp` secondary-transmitter-to-primary-receiver and `mean_snr_ps`
/// primary-transmitter-to-secondary-receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStats {
    pub mean_snr_s: f64,
    pub mean_snr_p: f64,
    pub mean_snr_sp: f64,
    pub mean_snr_ps: f64,
    pub rate_s: f64,
    pub rate_p: f64,
}

impl LinkStats {
    pub fn new(
        mean_snr_s: f64,
        mean_snr_p: f64,
        mean_snr_sp: f64,
        mean_snr_ps: f64,
        rate_s: f64,
        rate_p: f64,
    ) -> Result<Self> {
        let stats = LinkStats {
            mean_snr_s,
            mean_snr_p,
            mean_snr_sp,
            mean_snr_ps,
            rate_s,
            rate_p,
        };
        stats.validate()?;
        Ok(stats)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mean_snr_s", self.mean_snr_s),
            ("mean_snr_p", self.mean_snr_p),
            ("mean_snr_sp", self.mean_snr_sp),
            ("mean_snr_ps", self.mean_snr_ps),
            ("rate_s", self.rate_s),
            ("rate_p", self.rate_p),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// The seven decoding regions at the secondary receiver, numbered as in the
/// receiver feedback alphabet (1..=7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// {1} both packets jointly decoded.
    BothDecoded,
    /// {2} only the secondary packet decoded (primary treated as noise).
    OnlyS,
    /// {3} only the primary packet decoded (secondary treated as noise).
    OnlyP,
    /// {4} the secondary packet becomes decodable once the primary packet's
    /// interference is removed, but not vice versa.
    PUnlocksS,
    /// {5} the primary packet becomes decodable once the secondary packet's
    /// interference is removed, but not vice versa.
    SUnlocksP,
    /// {6} each packet is decodable after removing the other's interference.
    Mutual,
    /// {7} neither packet is decodable even interference-free.
    Failure,
}

impl Outcome {
    /// Feedback index in 1..=7.
    pub fn index(self) -> u8 {
        match self {
            Outcome::BothDecoded => 1,
            Outcome::OnlyS => 2,
            Outcome::OnlyP => 3,
            Outcome::PUnlocksS => 4,
            Outcome::SUnlocksP => 5,
            Outcome::Mutual => 6,
            Outcome::Failure => 7,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        Ok(match i {
            1 => Outcome::BothDecoded,
            2 => Outcome::OnlyS,
            3 => Outcome::OnlyP,
            4 => Outcome::PUnlocksS,
            5 => Outcome::SUnlocksP,
            6 => Outcome::Mutual,
            7 => Outcome::Failure,
            _ => return Err(Error::Domain(format!("outcome index {i} not in 1..=7"))),
        })
    }
}

#[inline]
pub(crate) fn cap(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Shannon capacity `log2(1 + snr)` of the Gaussian channel, in bits/s/Hz.
pub fn capacity(snr: f64) -> Result<f64> {
    if snr < 0.0 || !snr.is_finite() {
        return Err(Error::Domain(format!("snr must be nonnegative, got {snr}")));
    }
    Ok(cap(snr))
}

/// Classify one slot of the multiple access channel at the secondary receiver.
///
/// The region boundaries are the Gaussian MAC decoding thresholds: with
/// `Cs = C(gamma_s)`, `Cp = C(gamma_ps)`, `Csum = C(gamma_s + gamma_ps)` and
/// the treat-as-noise capacities `Cs|p = C(gamma_s / (1 + gamma_ps))`,
/// `Cp|s = C(gamma_ps / (1 + gamma_s))`:
///
/// - {1} `R_s < Cs`, `R_p < Cp`, `R_s + R_p < Csum`
/// - {6} `R_s < Cs`, `R_p < Cp`, `R_s + R_p >= Csum`
/// - {2} `R_s < Cs|p`, `R_p >= Cp`
/// - {4} `Cs|p <= R_s < Cs`, `R_p >= Cp`
/// - {3} `R_p < Cp|s`, `R_s >= Cs`
/// - {5} `Cp|s <= R_p < Cp`, `R_s >= Cs`
/// - {7} `R_s >= Cs`, `R_p >= Cp`
pub fn classify_outcome(gamma_s: f64, gamma_ps: f64, stats: &LinkStats) -> Result<Outcome> {
    if gamma_s < 0.0 || gamma_ps < 0.0 {
        return Err(Error::Domain(
            "instantaneous SNRs must be nonnegative".into(),
        ));
    }
    let rs = stats.rate_s;
    let rp = stats.rate_p;
    let cs = cap(gamma_s);
    let cp = cap(gamma_ps);
    Ok(if rs < cs {
        if rp < cp {
            if rs + rp < cap(gamma_s + gamma_ps) {
                Outcome::BothDecoded
            } else {
                Outcome::Mutual
            }
        } else if rs < cap(gamma_s / (1.0 + gamma_ps)) {
            Outcome::OnlyS
        } else {
            Outcome::PUnlocksS
        }
    } else if rp < cp {
        if rp < cap(gamma_ps / (1.0 + gamma_s)) {
            Outcome::OnlyP
        } else {
            Outcome::SUnlocksP
        }
    } else {
        Outcome::Failure
    })
}

/// Success probability of an interference-free Rayleigh-faded link:
/// `P(rate < C(gamma)) = exp(-(2^rate - 1) / mean_snr)`.
pub fn interference_free_success(rate: f64, mean_snr: f64) -> f64 {
    (-(rate.exp2() - 1.0) / mean_snr).exp()
}

/// Instantaneous SNR distribution of a faded link, behind a sampler + CDF
/// interface so the region integrals stay distribution-agnostic.
///
/// The region probabilities integrate against this distribution in its own
/// CDF coordinate (via [`SnrDistribution::quantile`]), which keeps the
/// integrands smooth and bounded even for nearly degenerate means.
pub trait SnrDistribution {
    fn mean(&self) -> f64;
    /// `P(SNR > x)`.
    fn survival(&self, x: f64) -> f64;
    /// `P(SNR <= x)`.
    fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }
    /// Inverse CDF.
    fn quantile(&self, u: f64) -> f64;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

/// Rayleigh amplitude fading: exponentially distributed SNR.
#[derive(Debug, Clone, Copy)]
pub struct Rayleigh {
    mean: f64,
}

impl Rayleigh {
    pub fn new(mean: f64) -> Result<Self> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(Error::Domain(format!("mean SNR must be positive, got {mean}")));
        }
        Ok(Rayleigh { mean })
    }
}

impl SnrDistribution for Rayleigh {
    fn mean(&self) -> f64 {
        self.mean
    }

    fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            (-x / self.mean).exp()
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        -self.mean * (1.0 - u).max(1e-300).ln()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        -self.mean * (1.0 - unit_uniform(rng)).ln()
    }
}

/// Uniform in [0, 1) with 53-bit resolution.
#[inline]
pub(crate) fn unit_uniform(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draw one exponential SNR with the given mean.
pub fn sample_snr(mean: f64, rng: &mut dyn RngCore) -> f64 {
    debug_assert!(mean > 0.0);
    -mean * (1.0 - unit_uniform(rng)).ln()
}

/// The seven outcome probabilities plus the derived quantities: `d_s`, `d_p`
/// (interference-free decodability of the secondary/primary packet at the
/// secondary receiver) and the primary-link failure probabilities `rho0`
/// (secondary idle) and `rho1` (secondary transmitting).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodingProfile {
    pub delta_sp: f64,
    pub delta_s: f64,
    pub delta_p: f64,
    pub ups_s: f64,
    pub ups_p: f64,
    pub ups_sp: f64,
    pub ups_empty: f64,
    pub d_s: f64,
    pub d_p: f64,
    pub rho0: f64,
    pub rho1: f64,
}

impl DecodingProfile {
    /// Assemble a profile from the seven region probabilities and the two
    /// primary failure probabilities; `d_s`/`d_p` follow from the region
    /// unions. Used by tests and by callers with synthetic profiles.
    pub fn from_parts(regions: [f64; 7], rho0: f64, rho1: f64) -> Result<Self> {
        let [delta_sp, delta_s, delta_p, ups_s, ups_p, ups_sp, ups_empty] = regions;
        let profile = DecodingProfile {
            delta_sp,
            delta_s,
            delta_p,
            ups_s,
            ups_p,
            ups_sp,
            ups_empty,
            d_s: delta_s + delta_sp + ups_s + ups_sp,
            d_p: delta_p + delta_sp + ups_p + ups_sp,
            rho0,
            rho1,
        };
        profile.validate(1e-9)?;
        Ok(profile)
    }

    /// Check the partition and ordering invariants to tolerance `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let sum = self.delta_sp
            + self.delta_s
            + self.delta_p
            + self.ups_s
            + self.ups_p
            + self.ups_sp
            + self.ups_empty;
        if (sum - 1.0).abs() > tol {
            return Err(Error::Domain(format!(
                "region probabilities sum to {sum}, expected 1"
            )));
        }
        for v in [
            self.delta_sp,
            self.delta_s,
            self.delta_p,
            self.ups_s,
            self.ups_p,
            self.ups_sp,
            self.ups_empty,
        ] {
            if !(-tol..=1.0 + tol).contains(&v) {
                return Err(Error::Domain(format!("region probability {v} outside [0,1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.rho0) || !(0.0..=1.0).contains(&self.rho1) {
            return Err(Error::Domain("failure probabilities outside [0,1]".into()));
        }
        if self.rho0 >= self.rho1 {
            return Err(Error::Domain(format!(
                "expected rho0 < rho1, got {} >= {}",
                self.rho0, self.rho1
            )));
        }
        Ok(())
    }

    /// Probability of one region.
    pub fn outcome_probability(&self, o: Outcome) -> f64 {
        match o {
            Outcome::BothDecoded => self.delta_sp,
            Outcome::OnlyS => self.delta_s,
            Outcome::OnlyP => self.delta_p,
            Outcome::PUnlocksS => self.ups_s,
            Outcome::SUnlocksP => self.ups_p,
            Outcome::Mutual => self.ups_sp,
            Outcome::Failure => self.ups_empty,
        }
    }
}

/// Compute the full [`DecodingProfile`] for Rayleigh fading on all links.
///
/// The seven region probabilities are 1-D adaptive quadratures of the
/// conditional survival functions against the interferer's density (the
/// second dimension of the region integral is absorbed exactly by the CDF),
/// each to tolerance `tol / 8`. `rho1` is likewise computed by integration
/// over the interference fading and cross-checked in tests against its
/// closed form.
pub fn compute_profile(stats: &LinkStats, tol: f64) -> Result<DecodingProfile> {
    stats.validate()?;
    let gs = Rayleigh::new(stats.mean_snr_s)?;
    let gps = Rayleigh::new(stats.mean_snr_ps)?;
    let gp = Rayleigh::new(stats.mean_snr_p)?;
    let gsp = Rayleigh::new(stats.mean_snr_sp)?;
    compute_profile_with(&gs, &gps, &gp, &gsp, stats.rate_s, stats.rate_p, tol)
}

/// Distribution-agnostic profile computation. `dist_s`/`dist_ps` are the SNR
/// distributions seen at the secondary receiver, `dist_p`/`dist_sp` those
/// governing the primary link outage with and without secondary interference.
pub fn compute_profile_with(
    dist_s: &dyn SnrDistribution,
    dist_ps: &dyn SnrDistribution,
    dist_p: &dyn SnrDistribution,
    dist_sp: &dyn SnrDistribution,
    rate_s: f64,
    rate_p: f64,
    tol: f64,
) -> Result<DecodingProfile> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let ths = rate_s.exp2() - 1.0;
    let thp = rate_p.exp2() - 1.0;
    let th_sum = ths + thp + ths * thp; // threshold of the sum-rate boundary
    let each = tol / 8.0;
    let mut achieved = 0.0;
    let mut run = |q: quad::Quadrature| {
        achieved += q.error;
        q.value
    };

    // All integrals run in the interferer's CDF coordinate: with
    // u = F(x), `int g(x) f(x) dx = int g(F^{-1}(u)) du`.
    let f_ps_thp = dist_ps.cdf(thp);
    // {2}: R_s < Cs|p and R_p >= Cp.
    let delta_s = run(quad::integrate(
        |u| dist_s.survival(ths * (1.0 + dist_ps.quantile(u))),
        0.0,
        f_ps_thp,
        each,
    ));
    // {4}: Cs|p <= R_s < Cs and R_p >= Cp.
    let ups_s = run(quad::integrate(
        |u| dist_s.survival(ths) - dist_s.survival(ths * (1.0 + dist_ps.quantile(u))),
        0.0,
        f_ps_thp,
        each,
    ));
    let f_s_ths = dist_s.cdf(ths);
    // {3}: R_p < Cp|s and R_s >= Cs.
    let delta_p = run(quad::integrate(
        |u| dist_ps.survival(thp * (1.0 + dist_s.quantile(u))),
        0.0,
        f_s_ths,
        each,
    ));
    // {5}: Cp|s <= R_p < Cp and R_s >= Cs.
    let ups_p = run(quad::integrate(
        |u| dist_ps.survival(thp) - dist_ps.survival(thp * (1.0 + dist_s.quantile(u))),
        0.0,
        f_s_ths,
        each,
    ));
    // {1}: gamma_s > ths, gamma_ps > thp, gamma_s + gamma_ps > th_sum.
    // For gamma_ps beyond thp*(1+ths) the sum constraint is implied.
    let f_ps_corner = dist_ps.cdf(thp * (1.0 + ths));
    let delta_sp = run(quad::integrate(
        |u| dist_s.survival(th_sum - dist_ps.quantile(u)),
        f_ps_thp,
        f_ps_corner,
        each,
    )) + dist_ps.survival(thp * (1.0 + ths)) * dist_s.survival(ths);
    // {6}: both individually decodable interference-free, sum-rate infeasible.
    let ups_sp = run(quad::integrate(
        |u| dist_s.survival(ths) - dist_s.survival(th_sum - dist_ps.quantile(u)),
        f_ps_thp,
        f_ps_corner,
        each,
    ));
    // {7}: closed form.
    let ups_empty = (1.0 - dist_s.survival(ths)) * (1.0 - dist_ps.survival(thp));

    let rho0 = 1.0 - dist_p.survival(thp);
    // rho1 = P(R_p >= C(gamma_p / (1 + gamma_sp))): integrate the conditional
    // primary survival over the cross-interference distribution. The cut tail
    // contributes at most its own probability mass.
    let u_hi = 1.0 - each * 1e-3;
    let q = quad::integrate(
        |u| dist_p.survival(thp * (1.0 + dist_sp.quantile(u))),
        0.0,
        u_hi,
        each,
    );
    achieved += q.error + (1.0 - u_hi);
    let rho1 = 1.0 - q.value;

    if achieved > tol {
        return Err(Error::Quadrature {
            requested: tol,
            achieved,
        });
    }

    let profile = DecodingProfile {
        delta_sp,
        delta_s,
        delta_p,
        ups_s,
        ups_p,
        ups_sp,
        ups_empty,
        d_s: delta_s + delta_sp + ups_s + ups_sp,
        d_p: delta_p + delta_sp + ups_p + ups_sp,
        rho0,
        rho1,
    };
    profile.validate((8.0 * tol).max(1e-9))?;
    Ok(profile)
}

/// Closed-form `rho1` for Rayleigh links, used as a cross-check of the
/// integration path.
pub fn rho1_closed_form(rate_p: f64, mean_snr_p: f64, mean_snr_sp: f64) -> f64 {
    let thp = rate_p.exp2() - 1.0;
    1.0 - (-thp / mean_snr_p).exp() / (1.0 + thp * mean_snr_sp / mean_snr_p)
}
