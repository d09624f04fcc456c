//! Source-intensity optimisation, maximum transmission distance and sweeps.
//!
//! The pipeline at a given fiber length `L` and intensity `mu` is
//! `L -> eta -> d(mu, eta) -> e = e0 + d/2 -> R_f(mu, eta, e)`. The dark-count
//! share of the QBER grows as `eta` shrinks, which is what ends the link.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ExperimentPreset;
use crate::error::{check_range, Error, Result};
use crate::security_rate::KeyRateReport;

/// Search interval for the intensity.
pub const MU_BRACKET: (f64, f64) = (1e-4, 2.0);
/// Longest fiber the distance solver will consider, in km.
pub const MAX_LENGTH_KM: f64 = 500.0;

const MU_TOL: f64 = 1e-4;
const GRID_STEP: f64 = 1e-4;
const GRID_AGREEMENT: f64 = 2e-4;
const DISTANCE_TOL_KM: f64 = 0.01;

/// Result of a solver that may find no secure key at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "report")]
pub enum RateOutcome<T> {
    Positive(T),
    NoPositiveRate,
}

impl<T> RateOutcome<T> {
    pub fn positive(self) -> Option<T> {
        match self {
            RateOutcome::Positive(t) => Some(t),
            RateOutcome::NoPositiveRate => None,
        }
    }
}

/// Full key-rate chain for `preset` at `length_km` and intensity `mu`.
pub fn evaluate(preset: &ExperimentPreset, length_km: f64, mu: f64) -> Result<KeyRateReport> {
    let eta = preset.eta_at(length_km)?;
    let dark = preset.dark.normalized(preset.pulse_rate, mu, eta)?;
    KeyRateReport::evaluate(mu, eta, preset.e0, dark.d, preset.resolving_power)
}

/// `R_f` as a plain function of `mu`; points outside the formula's domain
/// (conditional QBER above 1) carry no key and map to negative infinity.
pub fn rate_in_mu(preset: &ExperimentPreset, length_km: f64) -> impl Fn(f64) -> f64 + Sync + '_ {
    move |mu| {
        evaluate(preset, length_km, mu)
            .map(|r| r.r_final)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub mu_star: f64,
    pub rate_at_optimum: f64,
    pub distance_km: f64,
    pub bracket: (f64, f64),
    pub iterations: u32,
    /// Argmax of the fixed-step grid scan used to validate the search.
    pub grid_mu_star: f64,
    /// Whether golden-section search and the grid agreed to 2e-4.
    pub grid_agrees: bool,
}

/// Golden-section maximisation of `f` on `[lo, hi]` until the bracket is
/// narrower than `tol`. Returns `(x, f(x), iterations)`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64, u32) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let x = 0.5 * (a + b);
    (x, f(x), iterations)
}

/// Argmax of `f` over `lo, lo + step, ..., hi`.
pub fn grid_argmax<F: Fn(f64) -> f64 + Sync>(f: F, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let x = if i == n { hi } else { lo + step * i as f64 };
            (x, f(x))
        })
        // ties resolve to the smaller x so the result is order independent
        .reduce(
            || (f64::NAN, f64::NEG_INFINITY),
            |p, q| {
                if q.1 > p.1 || (q.1 == p.1 && (p.0.is_nan() || q.0 < p.0)) {
                    q
                } else {
                    p
                }
            },
        )
}

/// Maximises an arbitrary rate function of `mu` over [`MU_BRACKET`].
pub fn optimal_mu_for<F: Fn(f64) -> f64 + Sync>(objective: F, distance_km: f64) -> RateOutcome<OptimumReport> {
    let (lo, hi) = MU_BRACKET;
    let (grid_mu, grid_rate) = grid_argmax(&objective, lo, hi, GRID_STEP);
    if grid_rate.is_nan() || grid_rate <= 0.0 {
        return RateOutcome::NoPositiveRate;
    }
    let (mu, rate, iterations) = golden_section_max(&objective, lo, hi, MU_TOL);
    let grid_agrees = (mu - grid_mu).abs() <= GRID_AGREEMENT;
    let (mu_star, rate_at_optimum) = if grid_agrees && rate >= grid_rate - rate.abs() * 1e-9 {
        (mu, rate)
    } else {
        log::warn!(
            "golden-section optimum mu={mu:.6} disagrees with grid optimum mu={grid_mu:.6} at {distance_km} km; using the grid"
        );
        (grid_mu, grid_rate)
    };
    RateOutcome::Positive(OptimumReport {
        mu_star,
        rate_at_optimum,
        distance_km,
        bracket: MU_BRACKET,
        iterations,
        grid_mu_star: grid_mu,
        grid_agrees,
    })
}

/// Intensity maximising the final key rate of `preset` at `distance_km`.
pub fn optimal_mu(preset: &ExperimentPreset, distance_km: f64) -> Result<RateOutcome<OptimumReport>> {
    check_range("distance_km", distance_km, 0.0, MAX_LENGTH_KM, "in [0, 500]")?;
    preset.validate()?;
    Ok(optimal_mu_for(rate_in_mu(preset, distance_km), distance_km))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub mu: f64,
    pub distance_km: f64,
    /// The rate was still positive at [`MAX_LENGTH_KM`].
    pub capped: bool,
    pub iterations: u32,
}

/// Largest fiber length with a positive final key rate at intensity `mu`,
/// by bisection to 0.01 km. Assumes the rate decreases with length.
pub fn max_distance(preset: &ExperimentPreset, mu: f64) -> Result<RateOutcome<DistanceReport>> {
    preset.validate()?;
    check_range("mu", mu, f64::MIN_POSITIVE, f64::MAX, "> 0")?;
    let positive = |l: f64| evaluate(preset, l, mu).map(|r| r.r_final > 0.0).unwrap_or(false);
    if !positive(0.0) {
        return Ok(RateOutcome::NoPositiveRate);
    }
    if positive(MAX_LENGTH_KM) {
        return Ok(RateOutcome::Positive(DistanceReport {
            mu,
            distance_km: MAX_LENGTH_KM,
            capped: true,
            iterations: 0,
        }));
    }
    let (mut lo, mut hi) = (0.0, MAX_LENGTH_KM);
    let mut iterations = 0;
    while hi - lo > DISTANCE_TOL_KM {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(RateOutcome::Positive(DistanceReport {
        mu,
        distance_km: lo,
        capped: false,
        iterations,
    }))
}

/// Intensity with the longest reach and that reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachReport {
    pub mu: f64,
    pub distance_km: f64,
}

/// Maximises [`max_distance`] over `mu`: a 0.01 grid over [`MU_BRACKET`]
/// refined by golden-section search around the best grid point.
pub fn best_reach(preset: &ExperimentPreset) -> Result<RateOutcome<ReachReport>> {
    preset.validate()?;
    let reach = |mu: f64| match max_distance(preset, mu) {
        Ok(RateOutcome::Positive(r)) => r.distance_km,
        _ => -1.0,
    };
    let (grid_mu, grid_km) = grid_argmax(reach, 0.01, MU_BRACKET.1, 0.01);
    if grid_km < 0.0 {
        return Ok(RateOutcome::NoPositiveRate);
    }
    let lo = (grid_mu - 0.01).max(MU_BRACKET.0);
    let hi = (grid_mu + 0.01).min(MU_BRACKET.1);
    let (mu, km, _) = golden_section_max(reach, lo, hi, MU_TOL);
    let best = if km >= grid_km {
        ReachReport { mu, distance_km: km }
    } else {
        ReachReport {
            mu: grid_mu,
            distance_km: grid_km,
        }
    };
    Ok(RateOutcome::Positive(best))
}

/// Weak unimodality of a sampled rate curve after flooring at zero: the values
/// never decrease up to the maximum and never increase after it.
pub fn is_unimodal_floored(values: &[f64]) -> bool {
    let floored: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let Some(peak) = floored
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
    else {
        return true;
    };
    let slack = floored[peak] * 1e-12;
    floored[..=peak].windows(2).all(|w| w[1] >= w[0] - slack)
        && floored[peak..].windows(2).all(|w| w[1] <= w[0] + slack)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variable")]
pub enum SweepVariable {
    /// Fiber length swept at fixed intensity.
    Distance { mu: f64 },
    /// Intensity swept at fixed fiber length.
    Mu { distance_km: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub distance_km: f64,
    pub mu: f64,
    pub eta: f64,
    pub e_total: f64,
    pub delta0: f64,
    pub r_final: f64,
}

/// A sample point where the pipeline left its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedRow {
    pub x: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
    pub flagged: Vec<FlaggedRow>,
}

impl SweepTable {
    /// Row with the largest final rate.
    pub fn best_row(&self) -> Option<&SweepRow> {
        self.rows.iter().max_by(|a, b| a.r_final.total_cmp(&b.r_final))
    }

    pub fn r_final(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.r_final).collect()
    }
}

/// Evaluates the pipeline at `steps` evenly spaced points of `range`
/// (endpoints included). Rows are computed in parallel and returned in order;
/// points where the formulas are undefined are collected in `flagged`.
pub fn sweep(
    preset: &ExperimentPreset,
    variable: SweepVariable,
    range: (f64, f64),
    steps: usize,
) -> Result<SweepTable> {
    preset.validate()?;
    if steps < 2 {
        return Err(Error::domain("steps", steps as f64, ">= 2"));
    }
    let (lo, hi) = range;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::domain("range", hi, ">= range start"));
    }
    match variable {
        SweepVariable::Distance { mu } => {
            check_range("mu", mu, f64::MIN_POSITIVE, MU_BRACKET.1, "in (0, 2]")?;
            check_range("distance_km", lo, 0.0, MAX_LENGTH_KM, "in [0, 500]")?;
            check_range("distance_km", hi, 0.0, MAX_LENGTH_KM, "in [0, 500]")?;
        }
        SweepVariable::Mu { distance_km } => {
            check_range("distance_km", distance_km, 0.0, MAX_LENGTH_KM, "in [0, 500]")?;
            check_range("mu", lo, f64::MIN_POSITIVE, MU_BRACKET.1, "in (0, 2]")?;
            check_range("mu", hi, f64::MIN_POSITIVE, MU_BRACKET.1, "in (0, 2]")?;
        }
    }

    let results: Vec<(f64, Result<SweepRow>)> = (0..steps)
        .into_par_iter()
        .map(|i| {
            let x = if i == steps - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            };
            let (distance_km, mu) = match variable {
                SweepVariable::Distance { mu } => (x, mu),
                SweepVariable::Mu { distance_km } => (distance_km, x),
            };
            let row = evaluate(preset, distance_km, mu).and_then(|r| {
                if r.r_final.is_finite() {
                    Ok(SweepRow {
                        distance_km,
                        mu,
                        eta: r.eta,
                        e_total: r.e_total,
                        delta0: r.delta0,
                        r_final: r.r_final,
                    })
                } else {
                    Err(Error::domain("r_final", r.r_final, "finite"))
                }
            });
            (x, row)
        })
        .collect();

    let mut rows = Vec::with_capacity(steps);
    let mut flagged = Vec::new();
    for (x, row) in results {
        match row {
            Ok(row) => rows.push(row),
            Err(e) => flagged.push(FlaggedRow {
                x,
                reason: e.to_string(),
            }),
        }
    }
    Ok(SweepTable {
        variable,
        rows,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::load_preset;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx, _) = golden_section_max(|x| -(x - 0.37) * (x - 0.37), 0.0, 2.0, 1e-8);
        assert!((x - 0.37).abs() < 1e-7);
        assert!(fx <= 0.0 && fx > -1e-14);
    }

    #[test]
    fn grid_argmax_prefers_smaller_on_ties() {
        let (x, _) = grid_argmax(|_| 1.0, 0.0, 1.0, 0.1);
        assert_eq!(x, 0.0);
        let (x, fx) = grid_argmax(|x| -(x - 0.5f64).abs(), 0.0, 1.0, 0.1);
        assert!((x - 0.5).abs() < 1e-12 && fx.abs() < 1e-12);
    }

    #[test]
    fn unimodality_check() {
        assert!(is_unimodal_floored(&[-1.0, -2.0, 0.5, 1.0, 0.3, -4.0]));
        assert!(!is_unimodal_floored(&[0.1, 0.5, 0.2, 0.6, 0.1]));
        assert!(is_unimodal_floored(&[]));
    }

    #[test]
    fn forced_maximal_error_has_no_rate() {
        let mut p = load_preset("gys").unwrap();
        p.e0 = 0.5;
        assert_eq!(optimal_mu(&p, 10.0).unwrap(), RateOutcome::NoPositiveRate);
        assert_eq!(max_distance(&p, 0.1).unwrap(), RateOutcome::NoPositiveRate);
    }

    #[test]
    fn ideal_preset_hits_the_cap() {
        let p = load_preset("ideal").unwrap();
        let r = max_distance(&p, 0.1).unwrap().positive().unwrap();
        assert!(r.capped);
        assert_eq!(r.distance_km, MAX_LENGTH_KM);
    }

    #[test]
    fn sweep_endpoints_and_errors() {
        let p = load_preset("gys").unwrap();
        let t = sweep(&p, SweepVariable::Distance { mu: 0.5 }, (10.0, 20.0), 2).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].distance_km, 10.0);
        assert_eq!(t.rows[1].distance_km, 20.0);
        assert!(sweep(&p, SweepVariable::Distance { mu: 0.5 }, (10.0, 20.0), 1).is_err());
        assert!(sweep(&p, SweepVariable::Distance { mu: 0.5 }, (20.0, 10.0), 5).is_err());
    }

    #[test]
    fn out_of_domain_points_are_flagged() {
        // e0 = 0.3 pushes e / (1 - D0) above one for larger mu
        let mut p = load_preset("ideal").unwrap();
        p.e0 = 0.3;
        let t = sweep(&p, SweepVariable::Mu { distance_km: 0.0 }, (0.1, 2.0), 20).unwrap();
        assert!(!t.flagged.is_empty());
        assert_eq!(t.rows.len() + t.flagged.len(), 20);
        assert!(t.rows.iter().all(|r| r.r_final.is_finite()));
    }
}
