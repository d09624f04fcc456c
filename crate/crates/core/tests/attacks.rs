use pnrqkd::attacks::*;

fn h(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// CMP information written with an arbitrary error/fidelity pair, so the
/// e <-> 1 - e symmetry can be checked outside the [0, 0.5] domain.
fn cmp_by_formula(n: i32, e: f64) -> f64 {
    let f = 1.0 - e;
    1.0 - (f.powi(n) + e.powi(n)) * h((1.0 + (1.0 - (1.0 - 2.0 * e).powi(2 * n)).sqrt()) / 2.0)
}

#[test]
fn cmp_reduces_to_si_for_one_photon() {
    for i in 0..1000 {
        let e = 0.5 * f64::from(i) / 999.0;
        let a = cmp_information(1, e).unwrap();
        let b = si_information(e).unwrap();
        assert!((a - b).abs() < 1e-12, "e={e}: {a} vs {b}");
    }
}

#[test]
fn cmp_symmetric_under_error_fidelity_swap() {
    for n in 1..=5 {
        for i in 0..=500 {
            let e = 0.5 * f64::from(i) / 500.0;
            let direct = cmp_information(n as u32, e).unwrap();
            let swapped = cmp_by_formula(n, 1.0 - e);
            assert!((direct - swapped).abs() < 1e-9, "n={n} e={e}");
        }
    }
}

#[test]
fn si_is_monotone() {
    let mut prev = si_information(0.0).unwrap();
    for i in 1..=500 {
        let cur = si_information(f64::from(i) * 1e-3).unwrap();
        assert!(cur >= prev, "i={i}");
        prev = cur;
    }
}

#[test]
fn information_is_bounded() {
    for n in 1..=10 {
        for i in 0..=100 {
            let e = f64::from(i) * 0.005;
            let v = cmp_information(n, e).unwrap();
            assert!((-1e-15..=1.0 + 1e-15).contains(&v));
        }
    }
}

#[test]
fn cmp_beats_independent_si_below_crossover() {
    for n in 2..=5 {
        let Crossover::Root { e_star, .. } = crossover_qber(n).unwrap() else {
            panic!("n={n}")
        };
        let nf = f64::from(n);
        let below = e_star * 0.9;
        let above = (e_star * 1.1).min(0.5);
        assert!(cmp_information(n, below).unwrap() > nf * si_information(below).unwrap());
        assert!(cmp_information(n, above).unwrap() < nf * si_information(above).unwrap());
    }
}

#[test]
fn crossover_values_decrease_with_photon_number() {
    let roots: Vec<f64> = (2..=6)
        .map(|n| match crossover_qber(n).unwrap() {
            Crossover::Root { e_star, .. } => e_star,
            Crossover::DegenerateIdentity => unreachable!(),
        })
        .collect();
    assert!(roots.windows(2).all(|w| w[1] < w[0]), "{roots:?}");
}

#[test]
fn threshold_small_mu_limit() {
    let mu = 1e-3;
    let ratio = pns_full_info_threshold(mu).unwrap() / (mu / 2.0);
    // high-precision value 0.99933358...
    assert!((ratio - 0.999_333_583_266_680_6).abs() < 1e-12);
}
