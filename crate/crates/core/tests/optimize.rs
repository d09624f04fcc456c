use pnrqkd::optimize::*;
use pnrqkd::{load_preset, ExperimentPreset};

fn presets() -> Vec<ExperimentPreset> {
    ["gys", "gys-fitted", "ideal"]
        .iter()
        .map(|n| load_preset(n).unwrap())
        .collect()
}

#[test]
fn golden_section_agrees_with_grid_scan() {
    for p in presets() {
        for &l in &[0.0, 50.0, 100.0, 120.0] {
            let Some(opt) = optimal_mu(&p, l).unwrap().positive() else {
                continue;
            };
            // independent 1e-4 grid scan, sequential
            let f = rate_in_mu(&p, l);
            let (mut best_mu, mut best) = (0.0, f64::NEG_INFINITY);
            let mut mu = 1e-4;
            while mu <= 2.0 + 1e-12 {
                let r = f(mu);
                if r > best {
                    best = r;
                    best_mu = mu;
                }
                mu += 1e-4;
            }
            assert!(opt.grid_agrees, "{} at {l} km", p.name);
            assert!((opt.mu_star - best_mu).abs() <= 2e-4, "{} at {l} km: {} vs {best_mu}", p.name, opt.mu_star);
            assert!(opt.rate_at_optimum >= f(opt.bracket.0) && opt.rate_at_optimum >= f(opt.bracket.1));
        }
    }
}

#[test]
fn argmax_is_scale_invariant() {
    let p = load_preset("gys").unwrap();
    let f = rate_in_mu(&p, 80.0);
    let a = optimal_mu_for(&f, 80.0).positive().unwrap();
    let b = optimal_mu_for(|mu| 37.5 * f(mu), 80.0).positive().unwrap();
    let c = optimal_mu_for(|mu| 1e-3 * f(mu), 80.0).positive().unwrap();
    assert_eq!(a.mu_star, b.mu_star);
    assert_eq!(a.mu_star, c.mu_star);
}

#[test]
fn rate_decreases_with_length() {
    for p in presets().into_iter().filter(|p| p.name != "ideal") {
        for &mu in &[0.1, 0.4, 0.7] {
            let t = sweep(&p, SweepVariable::Distance { mu }, (0.0, 200.0), 401).unwrap();
            assert!(t.flagged.is_empty() || t.rows.len() + t.flagged.len() == 401);
            // past the cutoff the unclamped rate is negative and shrinks with eta
            let r: Vec<f64> = t.r_final().iter().map(|r| r.max(0.0)).collect();
            assert!(r.windows(2).all(|w| w[1] <= w[0]), "{} mu={mu}", p.name);
            assert_eq!(*r.last().unwrap(), 0.0);
        }
    }
}

#[test]
fn distance_sweep_at_optimal_intensity_is_monotone() {
    let p = load_preset("gys-fitted").unwrap();
    let t = sweep(&p, SweepVariable::Distance { mu: 0.7 }, (0.0, 170.0), 171).unwrap();
    assert_eq!(t.rows.len(), 171);
    assert!(t.r_final().windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn mu_sweep_is_unimodal_and_consistent_with_solver() {
    for p in presets().into_iter().filter(|p| p.name != "ideal") {
        for &l in &[20.0, 80.0, 110.0] {
            let t = sweep(&p, SweepVariable::Mu { distance_km: l }, (0.01, 2.0), 400).unwrap();
            assert!(is_unimodal_floored(&t.r_final()), "{} at {l}", p.name);
            let opt = optimal_mu(&p, l).unwrap().positive().unwrap();
            let best = t.best_row().unwrap();
            assert!(opt.rate_at_optimum >= best.r_final);
            assert!(t.rows.iter().all(|r| opt.rate_at_optimum >= r.r_final));
        }
    }
}

#[test]
fn max_distance_is_a_sign_boundary() {
    let p = load_preset("gys").unwrap();
    for &mu in &[0.05, 0.1, 0.3, 0.6] {
        let d = max_distance(&p, mu).unwrap().positive().unwrap();
        assert!(!d.capped);
        let f = |l: f64| evaluate(&p, l, mu).map(|r| r.r_final).unwrap_or(f64::NEG_INFINITY);
        assert!(f(d.distance_km) > 0.0);
        assert!(f(d.distance_km + 0.01) <= 0.0);
    }
}

#[test]
fn optimal_intensity_reaches_further() {
    for name in ["gys", "gys-fitted"] {
        let p = load_preset(name).unwrap();
        let base = max_distance(&p, 0.1).unwrap().positive().unwrap().distance_km;
        let best = best_reach(&p).unwrap().positive().unwrap();
        assert!(best.distance_km > base, "{name}");
    }
}

#[test]
fn calibrated_preset_reproduces_published_distances() {
    let p = load_preset("gys-fitted").unwrap();
    let base = max_distance(&p, 0.1).unwrap().positive().unwrap().distance_km;
    let best = best_reach(&p).unwrap().positive().unwrap();
    assert!((base - 140.2).abs() < 0.1, "{base}");
    assert!((best.distance_km - 164.1).abs() < 0.2, "{best:?}");
    assert!((0.6..=0.9).contains(&best.mu), "{best:?}");
}

#[test]
fn sweep_is_deterministic_across_pools() {
    let p = load_preset("gys").unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let v = SweepVariable::Mu { distance_km: 60.0 };
    let a = one.install(|| sweep(&p, v, (0.01, 1.5), 97).unwrap());
    let b = four.install(|| sweep(&p, v, (0.01, 1.5), 97).unwrap());
    assert_eq!(a, b);
}
