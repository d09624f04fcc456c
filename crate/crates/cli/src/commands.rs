use pnrqkd::attacks::{cmp_information, crossover_qber, pns_full_info_threshold, si_information, Crossover};
use pnrqkd::montecarlo::{simulate, verify_decoy_consistency, EveStrategy, McResult, SimConfig};
use pnrqkd::optimize::{best_reach, max_distance, optimal_mu, sweep, RateOutcome, SweepVariable};
use pnrqkd::photon_stats::{DetectorModel, ForwardingTable, SourceModel, N_TRUNC};
use pnrqkd::security_rate::tagged_fraction;
use pnrqkd::ExperimentPreset;
use serde_json::{json, Value};

use crate::output::{Cell, Table};
use crate::{resolve_preset, Cli, CliError, Command, Eve, Report};

type Outcome = Result<Report, CliError>;

pub(crate) fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::AttackInfo { n, e_max, steps } => attack_info(*n, *e_max, *steps),
        Command::Crossover { n } => crossover(n),
        Command::RateCurve { mu, l_min, l_max, steps } => {
            let p = resolve_preset(&cli.common)?;
            rate_curve(&p, &or_default(mu, p.mu), (*l_min, *l_max), *steps)
        }
        Command::OptimizeMu { distance } => {
            let p = resolve_preset(&cli.common)?;
            optimize_mu(&p, &or_default(distance, p.channel.length_km))
        }
        Command::MaxDistance { mu, best } => {
            let p = resolve_preset(&cli.common)?;
            max_distances(&p, &or_default(mu, p.mu), *best)
        }
        Command::Simulate {
            mu,
            distance,
            pulses,
            seed,
            eve,
        } => {
            let p = resolve_preset(&cli.common)?;
            let strategy = match eve {
                Eve::BeamSplitter => EveStrategy::BeamSplitter,
                Eve::BlockSingles => EveStrategy::BlockSingles,
                Eve::IntensityAware => {
                    return Err(CliError::Usage(
                        "--eve intensity-aware needs two intensities; use decoy-check".into(),
                    ))
                }
            };
            let cfg = sim_config(&p, mu.unwrap_or(p.mu), *distance, *pulses, *seed, strategy)?;
            simulate_report(&p, cfg)
        }
        Command::DecoyCheck {
            mu,
            decoy_mu,
            distance,
            pulses,
            seed,
            alpha,
            eve,
        } => {
            let p = resolve_preset(&cli.common)?;
            decoy_check(&p, mu.unwrap_or(p.mu), *decoy_mu, *distance, *pulses, *seed, *alpha, *eve)
        }
        Command::PnsThreshold { mu } => {
            let p = resolve_preset(&cli.common)?;
            pns_threshold(&or_default(mu, p.mu))
        }
    }
}

fn or_default(values: &[f64], default: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![default]
    } else {
        values.to_vec()
    }
}

fn table_config(command: &str, preset: Option<&ExperimentPreset>, params: Value) -> Value {
    json!({ "command": command, "preset": preset, "parameters": params })
}

fn attack_info(n: u32, e_max: f64, steps: usize) -> Outcome {
    if !(e_max > 0.0 && e_max <= 0.5) {
        return Err(pnrqkd::Error::domain("e_max", e_max, "in (0, 0.5]").into());
    }
    if steps < 2 {
        return Err(pnrqkd::Error::domain("steps", steps as f64, ">= 2").into());
    }
    let mut table = Table::new(vec!["e", "i_si_n", "i_cmp_n"]);
    for i in 0..steps {
        let e = e_max * i as f64 / (steps - 1) as f64;
        let si = f64::from(n) * si_information(e)?;
        table.push(vec![e.into(), si.into(), cmp_information(n, e)?.into()]);
    }
    let cross = crossover_qber(n)?;
    let line = match cross {
        Crossover::Root { e_star, .. } => format!(
            "attack-info n={n}: {steps} rows, CMP beats {n} SI attacks for e < {e_star:.6}"
        ),
        Crossover::DegenerateIdentity => format!("attack-info n={n}: {steps} rows, CMP and SI coincide"),
    };
    Ok(Report {
        table,
        config: table_config("attack-info", None, json!({ "n": n, "e_max": e_max, "steps": steps })),
        summary: json!({ "crossover": cross }),
        line,
        log_y: false,
    })
}

fn crossover(ns: &[u32]) -> Outcome {
    let mut table = Table::new(vec!["n", "e_star", "iterations"]);
    let mut parts = Vec::new();
    let mut results = Vec::new();
    for &n in ns {
        let c = crossover_qber(n)?;
        match c {
            Crossover::Root { n, e_star, iterations } => {
                table.push(vec![n.into(), e_star.into(), iterations.into()]);
                parts.push(format!("n={n}: e* = {e_star:.6}"));
            }
            Crossover::DegenerateIdentity => parts.push(format!("n={n}: identical attacks, no crossover")),
        }
        results.push(c);
    }
    Ok(Report {
        table,
        config: table_config("crossover", None, json!({ "n": ns })),
        summary: json!({ "crossovers": results }),
        line: format!("crossover {}", parts.join(", ")),
        log_y: false,
    })
}

fn rate_curve(p: &ExperimentPreset, mus: &[f64], range: (f64, f64), steps: usize) -> Outcome {
    let multi = mus.len() > 1;
    let mut columns = vec!["distance_km", "eta", "e_total", "delta0", "r_final"];
    if multi {
        columns.insert(0, "mu");
    }
    let mut table = Table::new(columns);
    let mut flagged = Vec::new();
    let mut reach = Vec::new();
    for &mu in mus {
        let t = sweep(p, SweepVariable::Distance { mu }, range, steps)?;
        for f in &t.flagged {
            log::warn!("mu={mu} L={} km: {}", f.x, f.reason);
        }
        flagged.extend(t.flagged.iter().map(|f| json!({ "mu": mu, "distance_km": f.x, "reason": f.reason })));
        let last_positive = t.rows.iter().filter(|r| r.r_final > 0.0).map(|r| r.distance_km).fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))));
        reach.push(json!({ "mu": mu, "last_positive_km": last_positive }));
        for r in &t.rows {
            let mut row: Vec<Cell> = vec![
                r.distance_km.into(),
                r.eta.into(),
                r.e_total.into(),
                r.delta0.into(),
                r.r_final.into(),
            ];
            if multi {
                row.insert(0, mu.into());
            }
            table.push(row);
        }
    }
    let reach_text: Vec<String> = reach
        .iter()
        .map(|r| match r["last_positive_km"].as_f64() {
            Some(km) => format!("mu={}: R_f > 0 up to {km} km", r["mu"]),
            None => format!("mu={}: no positive rate", r["mu"]),
        })
        .collect();
    let line = format!(
        "rate-curve {}: {} rows, {}{}",
        p.name,
        table.rows.len(),
        reach_text.join("; "),
        if flagged.is_empty() {
            String::new()
        } else {
            format!(", {} points outside the model domain", flagged.len())
        }
    );
    Ok(Report {
        table,
        config: table_config(
            "rate-curve",
            Some(p),
            json!({ "mu": mus, "l_min": range.0, "l_max": range.1, "steps": steps }),
        ),
        summary: json!({ "reach": reach, "flagged": flagged }),
        line,
        log_y: true,
    })
}

fn optimize_mu(p: &ExperimentPreset, distances: &[f64]) -> Outcome {
    let mut table = Table::new(vec!["distance_km", "mu_star", "r_final", "grid_mu_star", "grid_agrees"]);
    let mut none = Vec::new();
    let mut parts = Vec::new();
    for &l in distances {
        match optimal_mu(p, l)? {
            RateOutcome::Positive(o) => {
                table.push(vec![
                    l.into(),
                    o.mu_star.into(),
                    o.rate_at_optimum.into(),
                    o.grid_mu_star.into(),
                    o.grid_agrees.into(),
                ]);
                parts.push(format!("{l} km: mu* = {:.4}, R_f = {:.4e}", o.mu_star, o.rate_at_optimum));
            }
            RateOutcome::NoPositiveRate => {
                none.push(l);
                parts.push(format!("{l} km: no positive rate"));
            }
        }
    }
    Ok(Report {
        table,
        config: table_config("optimize-mu", Some(p), json!({ "distance_km": distances })),
        summary: json!({ "no_positive_rate_km": none }),
        line: format!("optimize-mu {}: {}", p.name, parts.join("; ")),
        log_y: false,
    })
}

fn max_distances(p: &ExperimentPreset, mus: &[f64], best: bool) -> Outcome {
    let mut table = Table::new(vec!["mu", "distance_km", "capped"]);
    let mut parts = Vec::new();
    let mut none = Vec::new();
    for &mu in mus {
        match max_distance(p, mu)? {
            RateOutcome::Positive(d) => {
                table.push(vec![mu.into(), d.distance_km.into(), d.capped.into()]);
                let cap = if d.capped { " (search cap)" } else { "" };
                parts.push(format!("mu={mu}: {:.2} km{cap}", d.distance_km));
            }
            RateOutcome::NoPositiveRate => {
                none.push(mu);
                parts.push(format!("mu={mu}: no positive rate"));
            }
        }
    }
    let mut best_json = Value::Null;
    if best {
        if let RateOutcome::Positive(b) = best_reach(p)? {
            let capped = b.distance_km >= pnrqkd::optimize::MAX_LENGTH_KM;
            table.push(vec![b.mu.into(), b.distance_km.into(), capped.into()]);
            parts.push(format!("best mu={:.4}: {:.2} km", b.mu, b.distance_km));
            best_json = json!(b);
        } else {
            parts.push("no intensity gives a positive rate".into());
        }
    }
    Ok(Report {
        table,
        config: table_config("max-distance", Some(p), json!({ "mu": mus, "best": best })),
        summary: json!({ "best": best_json, "no_positive_rate_mu": none }),
        line: format!("max-distance {}: {}", p.name, parts.join("; ")),
        log_y: false,
    })
}

fn sim_config(
    p: &ExperimentPreset,
    mu: f64,
    distance: Option<f64>,
    pulses: u64,
    seed: u64,
    eve_strategy: EveStrategy,
) -> Result<SimConfig, CliError> {
    let eta = p.eta_at(distance.unwrap_or(p.channel.length_km))?;
    let config = SimConfig {
        source: SourceModel::new(mu, p.pulse_rate)?,
        eta,
        detector: DetectorModel::new(p.resolving_power, p.dark.rate_hz(p.pulse_rate))?,
        n_pulses: pulses,
        seed,
        eve_strategy,
    };
    config.validate()?;
    Ok(config)
}

fn histogram(r: &McResult) -> Table {
    let mut table = Table::new(vec!["n", "resolved", "emitted", "detected"]);
    let len = r
        .counts_by_detected_n
        .len()
        .max(r.emitted_by_n.len())
        .max(r.detected_by_n.len());
    let at = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
    for n in 0..len {
        table.push(vec![
            n.into(),
            at(&r.counts_by_detected_n, n).into(),
            at(&r.emitted_by_n, n).into(),
            at(&r.detected_by_n, n).into(),
        ]);
    }
    table
}

fn simulate_report(p: &ExperimentPreset, config: SimConfig) -> Outcome {
    let r = simulate(&config)?;
    let expected = tagged_fraction(config.source.mu, config.eta)?;
    let line = format!(
        "simulate {} mu={} eta={:.4e}: {} pulses, {} sifted, delta = {:.5} +/- {:.5} (beam-splitter value {expected:.5})",
        p.name, config.source.mu, config.eta, r.n_pulses, r.sifted_singles, r.empirical_delta, r.stderr_delta
    );
    Ok(Report {
        table: histogram(&r),
        config: json!({ "command": "simulate", "preset": p, "simulation": config }),
        summary: json!({
            "n_pulses": r.n_pulses,
            "sifted_singles": r.sifted_singles,
            "tagged_singles": r.tagged_singles,
            "dark_contaminated": r.dark_contaminated,
            "empirical_delta": r.empirical_delta,
            "stderr_delta": r.stderr_delta,
            "beam_splitter_delta": expected,
        }),
        line,
        log_y: true,
    })
}

#[allow(clippy::too_many_arguments)]
fn decoy_check(
    p: &ExperimentPreset,
    mu: f64,
    decoy_mu: f64,
    distance: Option<f64>,
    pulses: u64,
    seed: u64,
    alpha: f64,
    eve: Eve,
) -> Outcome {
    if mu == decoy_mu {
        return Err(pnrqkd::Error::domain("decoy_mu", decoy_mu, "different from mu").into());
    }
    let eta = p.eta_at(distance.unwrap_or(p.channel.length_km))?;
    let strategy = match eve {
        Eve::BeamSplitter => EveStrategy::BeamSplitter,
        Eve::BlockSingles => EveStrategy::BlockSingles,
        Eve::IntensityAware => {
            let halved = ForwardingTable::binomial(eta, N_TRUNC)?.with_row(1, vec![1.0 - eta / 2.0, eta / 2.0])?;
            EveStrategy::IntensityAware {
                pivot_mu: 0.5 * (mu + decoy_mu),
                below: Box::new(EveStrategy::BeamSplitter),
                at_or_above: Box::new(EveStrategy::Custom(halved)),
            }
        }
    };
    let signal_cfg = sim_config(p, mu, distance, pulses, seed, strategy.clone())?;
    let decoy_cfg = sim_config(p, decoy_mu, distance, pulses, seed.wrapping_add(1), strategy)?;
    let signal = simulate(&signal_cfg)?;
    let decoy = simulate(&decoy_cfg)?;
    let v = verify_decoy_consistency(&signal, &decoy, alpha)?;

    let mut table = Table::new(vec![
        "n",
        "emitted_signal",
        "detected_signal",
        "emitted_decoy",
        "detected_decoy",
        "yield_signal",
        "yield_decoy",
        "z",
        "p_value",
        "tested",
        "rejected",
    ]);
    for r in &v.rows {
        table.push(vec![
            r.n.into(),
            r.emitted_signal.into(),
            r.detected_signal.into(),
            r.emitted_decoy.into(),
            r.detected_decoy.into(),
            r.yield_signal.into(),
            r.yield_decoy.into(),
            r.z.into(),
            r.p_value.into(),
            r.tested.into(),
            r.rejected.into(),
        ]);
    }
    let verdict = if v.pass {
        "consistent".to_string()
    } else {
        format!("REJECTED at n = {:?}", v.rejected_n)
    };
    let line = format!(
        "decoy-check {} mu={mu} decoy={decoy_mu}: {} photon numbers tested at alpha={alpha}, {verdict}",
        p.name,
        v.rows.iter().filter(|r| r.tested).count()
    );
    Ok(Report {
        table,
        config: json!({
            "command": "decoy-check",
            "preset": p,
            "signal": signal_cfg,
            "decoy": decoy_cfg,
            "alpha": alpha,
        }),
        summary: json!({
            "pass": v.pass,
            "rejected_n": v.rejected_n,
            "signal_delta": signal.empirical_delta,
            "decoy_delta": decoy.empirical_delta,
        }),
        line,
        log_y: false,
    })
}

fn pns_threshold(mus: &[f64]) -> Outcome {
    let mut table = Table::new(vec!["mu", "threshold"]);
    let mut parts = Vec::new();
    for &mu in mus {
        let t = pns_full_info_threshold(mu)?;
        table.push(vec![mu.into(), t.into()]);
        parts.push(format!("mu={mu}: {t:.6}"));
    }
    Ok(Report {
        table,
        config: table_config("pns-threshold", None, json!({ "mu": mus })),
        summary: json!({}),
        line: format!("pns-threshold {}", parts.join(", ")),
        log_y: false,
    })
}
