//! Pulse-level simulation of Alice -> Eve -> Bob with a photon-number-resolving
//! receiver.
//!
//! Each pulse draws its emitted photon number from Poisson(`mu`), passes
//! through Eve's forwarding strategy, may pick up one dark click, and is
//! resolved by Bob's detector. Only pulses resolved as exactly one click
//! enter the sifted key; a kept pulse is tagged when Alice emitted two or more
//! photons. Bit errors are not simulated.
//!
//! Randomness is counter based: pulses are grouped in batches of
//! [`BATCH_SIZE`], batch `b` reads ChaCha8 stream `b` under a key derived from
//! the seed, and every pulse consumes exactly [`DRAWS_PER_PULSE`] 64-bit
//! words. Pulse `i` of batch `b` therefore always sees the same numbers no
//! matter how batches are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{check_range, Error, Result};
use crate::photon_stats::{DetectorModel, ForwardingTable, PhotonDistribution, SourceModel, N_TRUNC};

pub const BATCH_SIZE: u64 = 1 << 16;
pub const DRAWS_PER_PULSE: usize = 3;

/// How Eve treats each pulse after a photon-number measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveStrategy {
    /// Forward each photon independently with probability `eta`.
    BeamSplitter,
    /// Block every single-photon pulse; beam-split the rest.
    BlockSingles,
    /// Explicit `f(m, k)` table covering `m <= 60`.
    Custom(ForwardingTable),
    /// Eve knows the intensity of each pulse and switches strategy at `pivot_mu`.
    IntensityAware {
        pivot_mu: f64,
        below: Box<EveStrategy>,
        at_or_above: Box<EveStrategy>,
    },
}

impl EveStrategy {
    /// Forwarding table applied to pulses of intensity `mu` over a channel
    /// Eve must imitate with transmittance `eta`.
    pub fn table(&self, mu: f64, eta: f64) -> Result<ForwardingTable> {
        match self {
            EveStrategy::BeamSplitter => ForwardingTable::binomial(eta, N_TRUNC),
            EveStrategy::BlockSingles => ForwardingTable::block_singles(eta, N_TRUNC),
            EveStrategy::Custom(table) => {
                if table.n_trunc() < N_TRUNC {
                    return Err(Error::Config(format!(
                        "custom forwarding table covers m <= {}, need m <= {N_TRUNC}",
                        table.n_trunc()
                    )));
                }
                Ok(table.clone())
            }
            EveStrategy::IntensityAware {
                pivot_mu,
                below,
                at_or_above,
            } => {
                if mu < *pivot_mu {
                    below.table(mu, eta)
                } else {
                    at_or_above.table(mu, eta)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub source: SourceModel,
    pub eta: f64,
    pub detector: DetectorModel,
    pub n_pulses: u64,
    pub seed: u64,
    pub eve_strategy: EveStrategy,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("eta", self.eta, 0.0, 1.0, "in [0, 1]")?;
        if self.n_pulses == 0 {
            return Err(Error::Config("n_pulses must be at least 1".into()));
        }
        SourceModel::new(self.source.mu, self.source.pulse_rate)?;
        DetectorModel::new(self.detector.resolving_power, self.detector.dark_rate_hz)?;
        self.eve_strategy.table(self.source.mu, self.eta)?;
        Ok(())
    }

    /// Probability of a dark click in one pulse window, `r_dark / r_pul`.
    ///
    /// Among detected pulses this gives a dark fraction of about
    /// `r_dark / (r_pul mu eta)`, the normalised dark rate `d`.
    pub fn dark_click_prob(&self) -> f64 {
        (self.detector.dark_rate_hz / self.source.pulse_rate).min(1.0)
    }
}

/// Associative event counters for a run or part of one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Tally {
    pulses: u64,
    counts_by_detected_n: Vec<u64>,
    emitted_by_n: Vec<u64>,
    detected_by_n: Vec<u64>,
    sifted_singles: u64,
    tagged_singles: u64,
    dark_contaminated: u64,
}

impl Tally {
    fn new() -> Self {
        Self {
            counts_by_detected_n: vec![0; N_TRUNC + 3],
            emitted_by_n: vec![0; N_TRUNC + 1],
            detected_by_n: vec![0; N_TRUNC + 1],
            ..Self::default()
        }
    }

    fn merge(mut self, other: &Tally) -> Result<Tally> {
        fn add(a: &mut u64, b: u64) -> Result<()> {
            *a = a.checked_add(b).ok_or(Error::CounterOverflow)?;
            Ok(())
        }
        fn add_all(a: &mut [u64], b: &[u64]) -> Result<()> {
            a.iter_mut().zip(b).try_for_each(|(x, &y)| add(x, y))
        }
        add(&mut self.pulses, other.pulses)?;
        add_all(&mut self.counts_by_detected_n, &other.counts_by_detected_n)?;
        add_all(&mut self.emitted_by_n, &other.emitted_by_n)?;
        add_all(&mut self.detected_by_n, &other.detected_by_n)?;
        add(&mut self.sifted_singles, other.sifted_singles)?;
        add(&mut self.tagged_singles, other.tagged_singles)?;
        add(&mut self.dark_contaminated, other.dark_contaminated)?;
        Ok(self)
    }
}

/// Smallest index whose cumulative probability exceeds `u`.
fn invert(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

struct Sampler {
    emission_cdf: Vec<f64>,
    forwarding_cdf: Vec<Vec<f64>>,
    dark_prob: f64,
    detector: DetectorModel,
}

impl Sampler {
    fn new(config: &SimConfig) -> Result<Self> {
        let emission = PhotonDistribution::poisson(config.source.mu, N_TRUNC)?;
        let table = config.eve_strategy.table(config.source.mu, config.eta)?;
        Ok(Self {
            emission_cdf: cumulative(&emission.probs),
            forwarding_cdf: (0..=N_TRUNC).map(|m| cumulative(table.row(m))).collect(),
            dark_prob: config.dark_click_prob(),
            detector: config.detector,
        })
    }

    fn run_batch(&self, seed: u64, batch: u64, pulses: u64) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch);
        let mut tally = Tally::new();
        tally.pulses = pulses;
        for _ in 0..pulses {
            let draws: [f64; DRAWS_PER_PULSE] = [rng.random(), rng.random(), rng.random()];
            let emitted = invert(&self.emission_cdf, draws[0]);
            let forwarded = invert(&self.forwarding_cdf[emitted], draws[1]);
            let dark = u32::from(draws[2] < self.dark_prob);
            let clicks = forwarded as u32 + dark;
            let resolved = self.detector.resolving_power.resolve(clicks) as usize;

            tally.counts_by_detected_n[resolved] += 1;
            tally.emitted_by_n[emitted] += 1;
            if clicks > 0 {
                tally.detected_by_n[emitted] += 1;
            }
            if resolved == 1 {
                tally.sifted_singles += 1;
                if emitted >= 2 {
                    tally.tagged_singles += 1;
                }
                if dark == 1 {
                    tally.dark_contaminated += 1;
                }
            }
        }
        tally
    }
}

/// Outcome of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub config: SimConfig,
    pub n_pulses: u64,
    /// Pulses by resolved click count. With a finite resolving power `n0`,
    /// index `n0 + 1` collects everything above `n0`.
    pub counts_by_detected_n: Vec<u64>,
    /// Pulses by emitted photon number (simulator-only knowledge).
    pub emitted_by_n: Vec<u64>,
    /// Pulses by emitted photon number that produced at least one click.
    pub detected_by_n: Vec<u64>,
    pub sifted_singles: u64,
    pub tagged_singles: u64,
    pub dark_contaminated: u64,
    pub empirical_delta: f64,
    pub stderr_delta: f64,
}

impl McResult {
    fn from_tally(config: SimConfig, tally: Tally) -> Self {
        let (empirical_delta, stderr_delta) =
            delta_from_counts(tally.tagged_singles, tally.sifted_singles).unwrap_or((0.0, 0.0));
        let trim = |mut v: Vec<u64>| {
            while v.len() > 1 && v.last() == Some(&0) {
                v.pop();
            }
            v
        };
        Self {
            config,
            n_pulses: tally.pulses,
            counts_by_detected_n: trim(tally.counts_by_detected_n),
            emitted_by_n: trim(tally.emitted_by_n),
            detected_by_n: tally.detected_by_n,
            sifted_singles: tally.sifted_singles,
            tagged_singles: tally.tagged_singles,
            dark_contaminated: tally.dark_contaminated,
            empirical_delta,
            stderr_delta,
        }
    }

    /// Fraction of `n`-photon emissions producing at least one click.
    pub fn yield_at(&self, n: usize) -> Option<f64> {
        let emitted = *self.emitted_by_n.get(n)?;
        (emitted > 0).then(|| self.detected_by_n[n] as f64 / emitted as f64)
    }
}

/// Runs the simulation described by `config` on the current rayon pool.
/// The result depends only on `config`, not on the number of threads.
pub fn simulate(config: &SimConfig) -> Result<McResult> {
    config.validate()?;
    let sampler = Sampler::new(config)?;
    let n_batches = config.n_pulses.div_ceil(BATCH_SIZE);
    let tallies: Vec<Tally> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let start = b * BATCH_SIZE;
            let pulses = BATCH_SIZE.min(config.n_pulses - start);
            sampler.run_batch(config.seed, b, pulses)
        })
        .collect();
    let total = tallies
        .iter()
        .try_fold(Tally::new(), |acc, t| acc.merge(t))?;
    Ok(McResult::from_tally(config.clone(), total))
}

/// Tagged fraction with its binomial standard error `sqrt(p (1 - p) / N)`.
pub fn delta_from_counts(tagged: u64, sifted: u64) -> Result<(f64, f64)> {
    if sifted == 0 {
        return Err(Error::InsufficientData("no sifted single-photon detections"));
    }
    if tagged > sifted {
        return Err(Error::Config(format!("tagged count {tagged} exceeds sifted count {sifted}")));
    }
    let n = sifted as f64;
    let p = tagged as f64 / n;
    Ok((p, (p * (1.0 - p) / n).sqrt()))
}

pub fn estimate_delta(result: &McResult) -> Result<(f64, f64)> {
    delta_from_counts(result.tagged_singles, result.sifted_singles)
}

/// Two-proportion comparison of one photon number's yield across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyRow {
    pub n: usize,
    pub emitted_signal: u64,
    pub detected_signal: u64,
    pub emitted_decoy: u64,
    pub detected_decoy: u64,
    pub yield_signal: f64,
    pub yield_decoy: f64,
    pub z: f64,
    pub p_value: f64,
    /// Enough events for the normal approximation (five expected on each side).
    pub tested: bool,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyVerdict {
    pub alpha: f64,
    pub rows: Vec<DecoyRow>,
    pub rejected_n: Vec<usize>,
    pub pass: bool,
}

/// Tests, photon number by photon number, that signal and decoy pulses see
/// the same yield. Passes iff no tested photon number rejects at `alpha`.
pub fn verify_decoy_consistency(signal: &McResult, decoy: &McResult, alpha: f64) -> Result<DecoyVerdict> {
    check_range("alpha", alpha, f64::MIN_POSITIVE, 1.0, "in (0, 1)")?;
    if signal.n_pulses == 0 || decoy.n_pulses == 0 {
        return Err(Error::InsufficientData("a run has no pulses"));
    }
    if signal.config.eve_strategy != decoy.config.eve_strategy {
        return Err(Error::Config("signal and decoy runs used different Eve strategies".into()));
    }
    if signal.config.eta != decoy.config.eta {
        return Err(Error::Config("signal and decoy runs used different transmittances".into()));
    }

    let n_max = signal.emitted_by_n.len().max(decoy.emitted_by_n.len());
    let count = |v: &[u64], n: usize| v.get(n).copied().unwrap_or(0);
    let rows: Vec<DecoyRow> = (0..n_max)
        .map(|n| {
            let (e1, d1) = (count(&signal.emitted_by_n, n), count(&signal.detected_by_n, n));
            let (e2, d2) = (count(&decoy.emitted_by_n, n), count(&decoy.detected_by_n, n));
            let y1 = if e1 > 0 { d1 as f64 / e1 as f64 } else { 0.0 };
            let y2 = if e2 > 0 { d2 as f64 / e2 as f64 } else { 0.0 };
            let pooled = if e1 + e2 > 0 {
                (d1 + d2) as f64 / (e1 + e2) as f64
            } else {
                0.0
            };
            let adequate = [e1, e2].iter().all(|&e| {
                let e = e as f64;
                e * pooled >= 5.0 && e * (1.0 - pooled) >= 5.0
            });
            let (z, p_value) = if adequate {
                let se = (pooled * (1.0 - pooled) * (1.0 / e1 as f64 + 1.0 / e2 as f64)).sqrt();
                let z = (y1 - y2) / se;
                (z, erfc(z.abs() / std::f64::consts::SQRT_2))
            } else {
                (0.0, 1.0)
            };
            DecoyRow {
                n,
                emitted_signal: e1,
                detected_signal: d1,
                emitted_decoy: e2,
                detected_decoy: d2,
                yield_signal: y1,
                yield_decoy: y2,
                z,
                p_value,
                tested: adequate,
                rejected: adequate && p_value < alpha,
            }
        })
        .collect();
    let rejected_n: Vec<usize> = rows.iter().filter(|r| r.rejected).map(|r| r.n).collect();
    Ok(DecoyVerdict {
        alpha,
        pass: rejected_n.is_empty(),
        rows,
        rejected_n,
    })
}
