//! Tagged fractions, QBER composition and secret-key rates.
//!
//! With a PNR receiver only pulses resolved as exactly one photon enter the
//! sifted key. The fraction of those that left Alice as multiphoton pulses is
//! `1 - exp(-mu (1 - eta))`, which tends to `1 - exp(-mu)` at high loss.
//!
//! Rates are returned unclamped: a negative value means no secure key and is
//! kept so that solvers can bracket the zero crossing.

use serde::{Deserialize, Serialize};

use crate::attacks::entropy_unchecked;
use crate::error::{check_positive, check_range, Error, Result};
use crate::photon_stats::{poisson_upper_tail, ResolvingPower, N_TRUNC, TAIL_LIMIT};

/// Fraction of single-photon detections that came from multiphoton emissions.
pub fn tagged_fraction(mu: f64, eta: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    check_range("eta", eta, 0.0, 1.0, "in [0, 1]")?;
    Ok(-(-mu * (1.0 - eta)).exp_m1())
}

/// High-loss limit of [`tagged_fraction`], `1 - exp(-mu)`.
pub fn tagged_fraction_limit(mu: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    Ok(-(-mu).exp_m1())
}

/// Extra tagged fraction leaking through a detector that cannot resolve more
/// than `n0` photons: the Poisson tail above `n0` over the single-photon
/// detection probability `mu eta exp(-mu eta)`.
pub fn residual_tagged_fraction(mu: f64, eta: f64, n0: ResolvingPower) -> Result<f64> {
    check_positive("mu", mu)?;
    check_range("eta", eta, f64::MIN_POSITIVE, 1.0, "in (0, 1]")?;
    let n0 = match n0 {
        ResolvingPower::Unbounded => return Ok(0.0),
        ResolvingPower::Photons(0) => return Err(Error::domain("n0", 0.0, ">= 1")),
        ResolvingPower::Photons(n0) => n0 as usize,
    };
    let beyond_trunc = poisson_upper_tail(mu, N_TRUNC);
    if beyond_trunc >= TAIL_LIMIT {
        return Err(Error::Truncation {
            n_trunc: N_TRUNC,
            tail: beyond_trunc,
            limit: TAIL_LIMIT,
        });
    }
    let tail = if n0 >= N_TRUNC {
        0.0
    } else {
        poisson_upper_tail(mu, n0) - beyond_trunc
    };
    let singles = mu * eta * (-mu * eta).exp();
    Ok(tail.max(0.0) / singles)
}

/// QBER split into its optical and dark-count parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub e0: f64,
    pub d: f64,
    pub e_total: f64,
    pub clamped: bool,
}

/// `e0 + d / 2`, clamped at 0.5.
pub fn total_qber(e0: f64, d: f64) -> Result<ErrorModel> {
    check_range("e0", e0, 0.0, 0.5, "in [0, 0.5]")?;
    check_range("d", d, 0.0, 1.0, "in [0, 1]")?;
    let raw = e0 + d / 2.0;
    Ok(ErrorModel {
        e0,
        d,
        e_total: raw.min(0.5),
        clamped: raw > 0.5,
    })
}

/// Secret fraction of the sifted key with tagged fraction `delta`:
/// `(1 - delta) - h(e) - h(e + delta)`.
pub fn gllp_rate(e: f64, delta: f64) -> Result<f64> {
    check_range("e", e, 0.0, 0.5, "in [0, 0.5]")?;
    check_range("delta", delta, 0.0, 1.0 - f64::EPSILON, "in [0, 1)")?;
    if e + delta > 1.0 {
        return Err(Error::domain("e + delta", e + delta, "<= 1"));
    }
    Ok((1.0 - delta) - entropy_unchecked(e) - entropy_unchecked(e + delta))
}

/// Secret fraction of the PNR-sifted key when the tagged bits carry no errors:
/// `(1 - D0) - h(e) - (1 - D0) h(e / (1 - D0))`.
pub fn sifted_rate(e: f64, delta0: f64) -> Result<f64> {
    check_range("e", e, 0.0, 0.5, "in [0, 0.5]")?;
    check_range("delta0", delta0, 0.0, 1.0 - f64::EPSILON, "in [0, 1)")?;
    let untagged = 1.0 - delta0;
    let conditional = e / untagged;
    if conditional > 1.0 {
        return Err(Error::domain("e / (1 - delta0)", conditional, "<= 1"));
    }
    Ok(untagged - entropy_unchecked(e) - untagged * entropy_unchecked(conditional))
}

/// Final key rate in bits per emitted pulse:
/// `mu (1 - D0) eta / 4` times the sifted secret fraction, with `D0 = 1 - e^-mu`.
pub fn final_key_rate(mu: f64, eta: f64, e: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    check_range("eta", eta, f64::MIN_POSITIVE, 1.0, "in (0, 1]")?;
    let delta0 = tagged_fraction_limit(mu)?;
    Ok(0.25 * mu * (1.0 - delta0) * eta * sifted_rate(e, delta0)?)
}

/// Every quantity entering the final key rate at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub mu: f64,
    pub eta: f64,
    pub delta: f64,
    pub delta0: f64,
    pub delta_prime: f64,
    pub error: ErrorModel,
    pub e_total: f64,
    pub r_sifted: f64,
    pub r_final: f64,
    pub raw_rate: f64,
}

impl KeyRateReport {
    /// Evaluates the full chain for intensity `mu`, transmittance `eta`,
    /// optical error `e0`, normalised dark rate `d` and resolving power `n0`.
    pub fn evaluate(mu: f64, eta: f64, e0: f64, d: f64, n0: ResolvingPower) -> Result<Self> {
        let error = total_qber(e0, d)?;
        let delta0 = tagged_fraction_limit(mu)?;
        let r_sifted = sifted_rate(error.e_total, delta0)?;
        Ok(Self {
            mu,
            eta,
            delta: tagged_fraction(mu, eta)?,
            delta0,
            delta_prime: residual_tagged_fraction(mu, eta, n0)?,
            error,
            e_total: error.e_total,
            r_sifted,
            r_final: final_key_rate(mu, eta, error.e_total)?,
            raw_rate: 0.25 * mu * eta,
        })
    }

    /// Final rate floored at zero for presentation.
    pub fn r_final_floored(&self) -> f64 {
        self.r_final.max(0.0)
    }
}
