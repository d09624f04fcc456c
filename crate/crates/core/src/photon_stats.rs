//! Photon-number statistics of phase-randomised weak coherent pulses.
//!
//! A phase-averaged coherent state of mean photon number `mu` is a Poisson
//! mixture of Fock states. Loss thins each photon independently, so the
//! photon number reaching the receiver is again Poisson with mean `eta * mu`.
//! An eavesdropper running a photon-number-splitting attack must reproduce
//! exactly that distribution, which is what [`pns_balance_residual`] measures
//! for an arbitrary forwarding strategy.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::{binomial, ln_factorial};

use crate::error::{check_positive, check_range, Error, Result};

/// Default truncation order of every infinite photon-number sum.
pub const N_TRUNC: usize = 60;

/// Largest Poisson mass allowed beyond the truncation order.
pub const TAIL_LIMIT: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub mu: f64,
    pub pulse_rate: f64,
    pub decoy_mu: Option<f64>,
}

impl SourceModel {
    pub fn new(mu: f64, pulse_rate: f64) -> Result<Self> {
        check_positive("mu", mu)?;
        check_positive("pulse_rate", pulse_rate)?;
        Ok(Self {
            mu,
            pulse_rate,
            decoy_mu: None,
        })
    }

    pub fn with_decoy(mut self, decoy_mu: f64) -> Result<Self> {
        check_positive("decoy_mu", decoy_mu)?;
        if decoy_mu == self.mu {
            return Err(Error::domain("decoy_mu", decoy_mu, "different from mu"));
        }
        self.decoy_mu = Some(decoy_mu);
        Ok(self)
    }

    /// The same source emitting at the decoy intensity, if one is configured.
    pub fn decoy(&self) -> Option<SourceModel> {
        self.decoy_mu.map(|mu| SourceModel {
            mu,
            pulse_rate: self.pulse_rate,
            decoy_mu: None,
        })
    }
}

/// A truncated photon-number distribution together with the mass it drops.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    pub probs: Vec<f64>,
    pub trunc_tail: f64,
}

impl PhotonDistribution {
    /// Poisson(`mu`) on `0..=n_trunc`. Fails if the dropped tail exceeds [`TAIL_LIMIT`].
    pub fn poisson(mu: f64, n_trunc: usize) -> Result<Self> {
        check_range("mu", mu, 0.0, f64::MAX, ">= 0")?;
        let probs = (0..=n_trunc)
            .map(|n| poisson_pmf(mu, n as u32))
            .collect::<Result<Vec<_>>>()?;
        let trunc_tail = poisson_upper_tail(mu, n_trunc);
        if trunc_tail >= TAIL_LIMIT {
            return Err(Error::Truncation {
                n_trunc,
                tail: trunc_tail,
                limit: TAIL_LIMIT,
            });
        }
        Ok(Self { probs, trunc_tail })
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.trunc_tail
    }
}

/// Maximum photon number a detector can tell apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvingPower {
    Photons(u32),
    Unbounded,
}

impl ResolvingPower {
    pub fn new(n0: u32) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::domain("resolving_power", 0.0, ">= 1"));
        }
        Ok(ResolvingPower::Photons(n0))
    }

    /// Clicks reported for `clicks` arriving photons: counts above the
    /// resolving power collapse into the `n0 + 1` ("more than n0") bucket.
    pub fn resolve(self, clicks: u32) -> u32 {
        match self {
            ResolvingPower::Photons(n0) => clicks.min(n0 + 1),
            ResolvingPower::Unbounded => clicks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub resolving_power: ResolvingPower,
    pub dark_rate_hz: f64,
}

impl DetectorModel {
    pub fn new(resolving_power: ResolvingPower, dark_rate_hz: f64) -> Result<Self> {
        if let ResolvingPower::Photons(0) = resolving_power {
            return Err(Error::domain("resolving_power", 0.0, ">= 1"));
        }
        check_range("dark_rate_hz", dark_rate_hz, 0.0, f64::MAX, ">= 0")?;
        Ok(Self {
            resolving_power,
            dark_rate_hz,
        })
    }

    /// Noise-free detector with unbounded resolving power.
    pub fn ideal() -> Self {
        Self {
            resolving_power: ResolvingPower::Unbounded,
            dark_rate_hz: 0.0,
        }
    }
}

/// `mu^n e^-mu / n!`, evaluated in the log domain.
pub fn poisson_pmf(mu: f64, n: u32) -> Result<f64> {
    check_range("mu", mu, 0.0, f64::MAX, ">= 0")?;
    if mu == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let n_f = f64::from(n);
    Ok((n_f * mu.ln() - mu - ln_factorial(n as u64)).exp())
}

/// Poisson mass strictly above `n`, summed upwards from `n + 1` so that small
/// tails keep full relative precision.
pub(crate) fn poisson_upper_tail(mu: f64, n: usize) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let mut k = n + 1;
    let mut term = (k as f64 * mu.ln() - mu - ln_factorial(k as u64)).exp();
    let mut sum = 0.0;
    while term > 0.0 {
        sum += term;
        k += 1;
        term *= mu / k as f64;
        if k as f64 > mu && term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Photon-number distribution after a channel of transmittance `eta`.
pub fn detected_pmf(mu: f64, eta: f64, n: u32) -> Result<f64> {
    check_range("eta", eta, 0.0, 1.0, "in [0, 1]")?;
    check_range("mu", mu, 0.0, f64::MAX, ">= 0")?;
    poisson_pmf(eta * mu, n)
}

/// Probability that `k` of `m` photons are forwarded when each survives with
/// probability `eta`.
pub fn forward_prob(m: u32, k: u32, eta: f64) -> Result<f64> {
    check_range("eta", eta, 0.0, 1.0, "in [0, 1]")?;
    if k > m {
        return Err(Error::domain("k", f64::from(k), "<= m"));
    }
    Ok(binomial(u64::from(m), u64::from(k))
        * eta.powi(k as i32)
        * (1.0 - eta).powi((m - k) as i32))
}

/// Eve's forwarding strategy `f(m, k)`: the probability that she sends `k` of
/// the `m` photons she finds in a pulse on to Bob, for every `m <= n_trunc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardingTable {
    rows: Vec<Vec<f64>>,
}

impl ForwardingTable {
    /// Validates that row `m` has `m + 1` entries in `[0, 1]` summing to one.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("forwarding table has no rows".into()));
        }
        for (m, row) in rows.iter().enumerate() {
            if row.len() != m + 1 {
                return Err(Error::Config(format!(
                    "forwarding row {m} has {} entries, expected {}",
                    row.len(),
                    m + 1
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config(format!(
                    "forwarding row {m} has an entry outside [0, 1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "forwarding row {m} sums to {total}, not 1"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Beam splitter of transmission `eta`: the strategy that leaves the
    /// received photon statistics identical to an honest lossy channel.
    pub fn binomial(eta: f64, n_trunc: usize) -> Result<Self> {
        check_range("eta", eta, 0.0, 1.0, "in [0, 1]")?;
        let rows = (0..=n_trunc as u32)
            .map(|m| (0..=m).map(|k| forward_prob(m, k, eta)).collect())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    /// Forward every photon untouched.
    pub fn identity(n_trunc: usize) -> Self {
        let rows = (0..=n_trunc)
            .map(|m| {
                let mut row = vec![0.0; m + 1];
                row[m] = 1.0;
                row
            })
            .collect();
        Self { rows }
    }

    /// Block every pulse.
    pub fn block_all(n_trunc: usize) -> Self {
        let rows = (0..=n_trunc)
            .map(|m| {
                let mut row = vec![0.0; m + 1];
                row[0] = 1.0;
                row
            })
            .collect();
        Self { rows }
    }

    /// Block single-photon pulses outright; beam-split the rest.
    pub fn block_singles(eta: f64, n_trunc: usize) -> Result<Self> {
        let mut table = Self::binomial(eta, n_trunc)?;
        if let Some(row) = table.rows.get_mut(1) {
            *row = vec![1.0, 0.0];
        }
        Ok(table)
    }

    /// Replaces row `m`, validating the result.
    pub fn with_row(mut self, m: usize, row: Vec<f64>) -> Result<Self> {
        if m >= self.rows.len() {
            return Err(Error::Config(format!("forwarding table has no row {m}")));
        }
        self.rows[m] = row;
        Self::from_rows(self.rows)
    }

    pub fn n_trunc(&self) -> usize {
        self.rows.len() - 1
    }

    /// `f(m, k)`; zero when `k > m`. Panics if `m` exceeds the table.
    pub fn prob(&self, m: usize, k: usize) -> f64 {
        self.rows[m].get(k).copied().unwrap_or(0.0)
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.rows[m]
    }
}

/// Difference between the photon-number-`n` probability Eve delivers to Bob
/// and the probability an honest channel of transmittance `eta` would deliver.
///
/// The delivered probability counts `n`-photon pulses she leaves intact plus
/// larger pulses she reduces to `n` photons. Sums run to `n_trunc`.
pub fn pns_balance_residual(
    mu: f64,
    eta: f64,
    n: usize,
    strategy: &ForwardingTable,
    n_trunc: usize,
) -> Result<f64> {
    check_range("eta", eta, 0.0, 1.0, "in [0, 1]")?;
    if n > n_trunc {
        return Err(Error::domain("n", n as f64, "<= n_trunc"));
    }
    if strategy.n_trunc() < n_trunc {
        return Err(Error::Config(format!(
            "forwarding table covers m <= {}, need m <= {n_trunc}",
            strategy.n_trunc()
        )));
    }
    let emitted = PhotonDistribution::poisson(mu, n_trunc)?;
    let p = &emitted.probs;

    let kept_whole = p[n] * (1.0 - (0..n).map(|i| strategy.prob(n, i)).sum::<f64>());
    let reduced: f64 = (n + 1..=n_trunc).map(|j| p[j] * strategy.prob(j, n)).sum();
    Ok(kept_whole + reduced - detected_pmf(mu, eta, n as u32)?)
}

/// Whether the strategy delivers at least the honest-channel probability of
/// `n`-photon pulses (the no-decoy necessary condition for an undetected
/// PNS attack), to a tolerance of 1e-12.
pub fn pns_condition_holds(
    mu: f64,
    eta: f64,
    n: usize,
    strategy: &ForwardingTable,
    n_trunc: usize,
) -> Result<bool> {
    Ok(pns_balance_residual(mu, eta, n, strategy, n_trunc)? >= -1e-12)
}

/// Normalised dark count rate together with whether it had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDark {
    pub d: f64,
    pub clamped: bool,
}

/// Dark counts per detected pulse, `r_dark / (r_pul * mu * eta)`, clamped to 1.
pub fn normalized_dark_rate(
    dark_rate_hz: f64,
    pulse_rate: f64,
    mu: f64,
    eta: f64,
) -> Result<NormalizedDark> {
    check_range("dark_rate_hz", dark_rate_hz, 0.0, f64::MAX, ">= 0")?;
    check_positive("pulse_rate", pulse_rate)?;
    check_positive("mu", mu)?;
    check_range("eta", eta, f64::MIN_POSITIVE, 1.0, "in (0, 1]")?;
    let d = dark_rate_hz / (pulse_rate * mu * eta);
    Ok(if d > 1.0 {
        NormalizedDark {
            d: 1.0,
            clamped: true,
        }
    } else {
        NormalizedDark { d, clamped: false }
    })
}

/// Dark-count weight `d^n`. This is not normalised over `n`; it is kept for
/// diagnostic subtraction only.
pub fn dark_pmf(d: f64, n: u32) -> Result<f64> {
    check_range("d", d, 0.0, 1.0, "in [0, 1]")?;
    Ok(d.powi(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pmf_values() {
        assert_eq!(poisson_pmf(0.0, 0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(0.0, 3).unwrap(), 0.0);
        assert!(close(poisson_pmf(0.1, 1).unwrap(), 0.090_483_741_803_596, 1e-15));
        assert!(close(poisson_pmf(0.5, 2).unwrap(), 0.075_816_332_464_079, 1e-15));
        assert!(poisson_pmf(-0.1, 0).is_err());
        assert!(poisson_pmf(f64::NAN, 0).is_err());
        // log-domain evaluation stays finite at large n
        let p = poisson_pmf(150.0, 170).unwrap();
        assert!(p.is_finite() && p > 0.0);
    }

    #[test]
    fn detected_pmf_values() {
        assert_eq!(
            detected_pmf(0.1, 1.0, 1).unwrap(),
            poisson_pmf(0.1, 1).unwrap()
        );
        assert!(close(detected_pmf(0.1, 0.1, 0).unwrap(), 0.990_049_833_749_168, 1e-15));
        assert!(detected_pmf(0.1, 1.5, 0).is_err());
        assert!(detected_pmf(0.1, -0.1, 0).is_err());
    }

    #[test]
    fn forward_prob_values() {
        assert_eq!(forward_prob(1, 1, 0.37).unwrap(), 0.37);
        assert!(close(forward_prob(2, 1, 0.1).unwrap(), 0.18, 1e-15));
        let total: f64 = (0..=5).map(|k| forward_prob(5, k, 0.3).unwrap()).sum();
        assert!(close(total, 1.0, 1e-15));
        assert!(forward_prob(2, 3, 0.5).is_err());
    }

    #[test]
    fn forwarding_rows_are_distributions() {
        for eta in [0.0, 0.1, 0.5, 1.0] {
            let table = ForwardingTable::binomial(eta, N_TRUNC).unwrap();
            for m in 0..=N_TRUNC {
                let total: f64 = table.row(m).iter().sum();
                assert!(close(total, 1.0, 1e-12), "eta={eta} m={m} total={total}");
            }
        }
    }

    #[test]
    fn table_validation() {
        assert!(ForwardingTable::from_rows(vec![vec![1.0], vec![0.5, 0.5]]).is_ok());
        assert!(ForwardingTable::from_rows(vec![vec![1.0], vec![0.5, 0.6]]).is_err());
        assert!(ForwardingTable::from_rows(vec![vec![1.0], vec![1.0]]).is_err());
        assert!(ForwardingTable::from_rows(vec![]).is_err());
    }

    #[test]
    fn distribution_truncation_guard() {
        let dist = PhotonDistribution::poisson(2.0, N_TRUNC).unwrap();
        assert!((dist.total_mass() - 1.0).abs() < 1e-12);
        match PhotonDistribution::poisson(20.0, N_TRUNC) {
            Err(Error::Truncation { .. }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn balance_examples() {
        let binom = ForwardingTable::binomial(0.05, N_TRUNC).unwrap();
        let r = pns_balance_residual(0.1, 0.05, 2, &binom, N_TRUNC).unwrap();
        assert!(r.abs() < 1e-12);

        let id = ForwardingTable::identity(N_TRUNC);
        for n in 0..=10 {
            assert_eq!(pns_balance_residual(0.5, 1.0, n, &id, N_TRUNC).unwrap(), 0.0);
        }

        let block = ForwardingTable::block_all(N_TRUNC);
        let r = pns_balance_residual(0.1, 0.05, 1, &block, N_TRUNC).unwrap();
        assert_eq!(r, -detected_pmf(0.1, 0.05, 1).unwrap());
        assert!(r != 0.0);
    }

    #[test]
    fn balance_rejects_short_tables_and_heavy_tails() {
        let short = ForwardingTable::binomial(0.1, 10).unwrap();
        assert!(matches!(
            pns_balance_residual(0.1, 0.1, 2, &short, N_TRUNC),
            Err(Error::Config(_))
        ));
        let binom = ForwardingTable::binomial(0.1, N_TRUNC).unwrap();
        assert!(matches!(
            pns_balance_residual(30.0, 0.1, 2, &binom, N_TRUNC),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn condition_under_block_singles() {
        let eta = 1e-3;
        let strategy = ForwardingTable::block_singles(eta, N_TRUNC).unwrap();
        assert!(!pns_condition_holds(0.1, eta, 1, &strategy, N_TRUNC).unwrap());
        for n in [0, 2, 3, 4, 5, 10] {
            assert!(pns_condition_holds(0.1, eta, n, &strategy, N_TRUNC).unwrap(), "n={n}");
        }
    }

    #[test]
    fn condition_at_zero_transmittance() {
        // Binomial forwarding at eta = 0 blocks everything and matches the
        // channel exactly, so the condition holds for every n.
        let blocked = ForwardingTable::binomial(0.0, N_TRUNC).unwrap();
        for n in 0..=10 {
            assert!(pns_condition_holds(0.1, 0.0, n, &blocked, N_TRUNC).unwrap());
        }
        // Forwarding anything while the channel delivers nothing starves n = 0.
        let id = ForwardingTable::identity(N_TRUNC);
        assert!(!pns_condition_holds(0.1, 0.0, 0, &id, N_TRUNC).unwrap());
        assert!(pns_condition_holds(0.1, 0.0, 1, &id, N_TRUNC).unwrap());
    }

    #[test]
    fn dark_rate_examples() {
        let nd = normalized_dark_rate(0.05, 1e6, 0.1, 1e-3).unwrap();
        assert!(close(nd.d, 5e-4, 1e-18));
        assert!(!nd.clamped);
        assert_eq!(normalized_dark_rate(0.0, 1e6, 0.1, 1e-3).unwrap().d, 0.0);
        let nd = normalized_dark_rate(1e3, 1.0, 0.1, 1e-3).unwrap();
        assert_eq!(nd.d, 1.0);
        assert!(nd.clamped);
        assert!(normalized_dark_rate(1.0, 0.0, 0.1, 1e-3).is_err());
        assert!(normalized_dark_rate(1.0, 1e6, 0.0, 1e-3).is_err());
        assert!(normalized_dark_rate(1.0, 1e6, 0.1, 0.0).is_err());
    }

    #[test]
    fn dark_pmf_examples() {
        assert_eq!(dark_pmf(0.3, 0).unwrap(), 1.0);
        assert!(close(dark_pmf(0.01, 2).unwrap(), 1e-4, 1e-19));
        assert_eq!(dark_pmf(0.0, 1).unwrap(), 0.0);
        assert!(dark_pmf(1.5, 1).is_err());
    }

    #[test]
    fn source_and_detector_invariants() {
        assert!(SourceModel::new(0.0, 1e6).is_err());
        assert!(SourceModel::new(0.1, 0.0).is_err());
        let s = SourceModel::new(0.1, 1e6).unwrap();
        assert!(s.with_decoy(0.1).is_err());
        let s = s.with_decoy(0.3).unwrap();
        assert_eq!(s.decoy().unwrap().mu, 0.3);
        assert!(DetectorModel::new(ResolvingPower::Photons(0), 0.0).is_err());
        assert!(DetectorModel::new(ResolvingPower::Photons(4), -1.0).is_err());
        assert_eq!(ResolvingPower::Photons(4).resolve(9), 5);
        assert_eq!(ResolvingPower::Unbounded.resolve(9), 9);
    }
}
