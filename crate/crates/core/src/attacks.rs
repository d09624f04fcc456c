//! Eavesdropper information for symmetric individual (SI) attacks on single
//! photons and coherent multiphoton pulse (CMP) attacks on `n`-photon pulses.
//!
//! Both are parameterised by the QBER `e` the attack induces; the probe
//! overlap angle satisfies `cos(alpha) = 1 - 2e` and the fidelity is `1 - e`.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_range, Error, Result};

const BISECT_LO: f64 = 1e-6;
const BISECT_HI: f64 = 0.5 - 1e-6;

/// Shannon entropy of a Bernoulli(`x`) variable, in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("x", x, 0.0, 1.0, "in [0, 1]")?;
    Ok(entropy_unchecked(x))
}

pub(crate) fn entropy_unchecked(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Information per photon gained by an optimal SI attack.
pub fn si_information(e: f64) -> Result<f64> {
    check_range("e", e, 0.0, 0.5, "in [0, 0.5]")?;
    Ok(1.0 - entropy_unchecked((1.0 + 2.0 * (e - e * e).sqrt()) / 2.0))
}

/// Information gained from an `n`-photon pulse by a CMP attack.
pub fn cmp_information(n: u32, e: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, ">= 1"));
    }
    check_range("e", e, 0.0, 0.5, "in [0, 0.5]")?;
    Ok(cmp_unchecked(n, e))
}

fn cmp_unchecked(n: u32, e: f64) -> f64 {
    let f = 1.0 - e;
    let n_f = f64::from(n);
    // 1 - (1-2e)^(2n) = 1 - (1 - 4e(1-e))^n, evaluated without cancellation
    let distinguishable = -(n_f * (-4.0 * e * f).ln_1p()).exp_m1();
    let inconclusive = f.powi(n as i32) + e.powi(n as i32);
    1.0 - inconclusive * entropy_unchecked((1.0 + distinguishable.sqrt()) / 2.0)
}

/// Where a coherent attack on `n` photons stops beating `n` separate SI attacks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Crossover {
    /// Root of `I_CMP(n, e) - n * I_SI(e)`; CMP wins strictly below it.
    Root { n: u32, e_star: f64, iterations: u32 },
    /// `n = 1`: the two attacks coincide for every QBER.
    DegenerateIdentity,
}

/// Crossover QBER between a CMP attack on `n` photons and `n` SI attacks,
/// found by bisection on `[1e-6, 0.5 - 1e-6]`.
pub fn crossover_qber(n: u32) -> Result<Crossover> {
    match n {
        0 => return Err(Error::domain("n", 0.0, ">= 1")),
        1 => return Ok(Crossover::DegenerateIdentity),
        _ => {}
    }
    let n_f = f64::from(n);
    let gap = |e: f64| {
        cmp_unchecked(n, e) - n_f * (1.0 - entropy_unchecked((1.0 + 2.0 * (e - e * e).sqrt()) / 2.0))
    };

    let (mut lo, mut hi) = (BISECT_LO, BISECT_HI);
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoRoot {
            what: "I_CMP(n) - n I_SI",
            lo,
            hi,
        });
    }
    let mut iterations = 0;
    // Run well past 1e-6 in e so the residual itself also lands below 1e-6.
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if gap(mid).signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(Crossover::Root {
        n,
        e_star: 0.5 * (lo + hi),
        iterations,
    })
}

/// Transmittance below which a PNS attack yields full information on the
/// key when no decoy states are used: `(1 - e^-mu - mu e^-mu) / mu`.
pub fn pns_full_info_threshold(mu: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    // 1 - e^-mu - mu e^-mu = -expm1(-mu) - mu e^-mu; for small mu use the series
    // mu^2/2 - mu^3/3 + mu^4/8 - ... to avoid cancellation.
    if mu < 1e-2 {
        let mut term = mu * mu / 2.0;
        let mut sum = 0.0;
        let mut k = 2.0;
        // sum_{k>=2} (-1)^k mu^k (k-1)/k!
        while term.abs() > 1e-30 {
            sum += term;
            let next_k = k + 1.0;
            term *= -mu / next_k * (next_k - 1.0) / (k - 1.0);
            k = next_k;
        }
        return Ok(sum / mu);
    }
    Ok((-(-mu).exp_m1() - mu * (-mu).exp()) / mu)
}

/// Attack information at one photon number and QBER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackInfo {
    pub n: u32,
    pub qber: f64,
    pub i_si: f64,
    pub i_cmp: f64,
    pub fidelity: f64,
}

impl AttackInfo {
    pub fn new(n: u32, qber: f64) -> Result<Self> {
        let i_cmp = cmp_information(n, qber)?;
        let i_si = si_information(qber)?;
        Ok(Self {
            n,
            qber,
            i_si,
            i_cmp,
            fidelity: 1.0 - qber,
        })
    }

    /// Overlap angle of Eve's probe states, from `cos(alpha) = 1 - 2e`.
    pub fn overlap_angle(&self) -> f64 {
        (1.0 - 2.0 * self.qber).acos()
    }
}
