//! One PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use prodnet::experiment::{run_aggregation_error_experiment, ExperimentConfig};
use prodnet::overlap::{normalized_vector, overlap_coefficient, pairwise_distribution};
use prodnet::propagation::{
    economy_loss, firm_losses, industry_losses, propagate_firms, propagate_industry, Calibration,
    Mode, Propagation, PropagationOptions,
};
use prodnet::sampler::{sample_ensemble, sampling_targets, SamplerConfig};
use prodnet::shock::{aggregate_shock, FirmShock};
use prodnet::synth::generate_network;
use prodnet::{toy, DegreeBins, Direction, Measure, SyntheticNetworkSpec};

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn fixture_golden_values() -> Check {
    let start = Instant::now();
    let net = toy::network();
    let table = toy::essentiality(&net);
    let cal = Calibration::for_firms(&net, &table, Mode::Glpf).map_err(|e| e.to_string())?;
    let opts = PropagationOptions::default();
    let z = net.aggregate();
    let idx = |label: &str| net.industry_index(label).unwrap();
    ensure(near(z.flow(idx("2"), idx("3")), 4.0), "Z[2,3] != 4")?;

    let losses = |id: &str| {
        let psi = toy::knockout(&net, id);
        let r = propagate_firms(&net, &cal, &psi, &opts).unwrap();
        (r.h_final.clone(), firm_losses(&net, &r.h_final).1)
    };
    let by_label = |v: &[Option<f64>]| -> Vec<f64> {
        ["1", "2", "3", "4", "5"]
            .iter()
            .map(|l| v[idx(l)].unwrap_or(f64::NAN))
            .collect()
    };
    let (h3, l3) = losses("3");
    let want3 = [0.25, 0.25, 0.25, 0.0, 0.0];
    ensure(
        by_label(&l3).iter().zip(want3).all(|(a, b)| near(*a, b)),
        format!("firm 3 knockout losses {:?}", by_label(&l3)),
    )?;
    let f = |id: &str| net.firm_index(id).unwrap();
    ensure(
        near(h3[f("6")], 0.5) && near(h3[f("1")], 0.75),
        "firm 3 knockout levels",
    )?;

    let (_, l5) = losses("5");
    let want5 = [0.0, 0.25, 0.25, 0.0, 1.0 / 3.0];
    ensure(
        by_label(&l5).iter().zip(want5).all(|(a, b)| near(*a, b)),
        format!("firm 5 knockout losses {:?}", by_label(&l5)),
    )?;

    let phi = aggregate_shock(&toy::knockout(&net, "5"), &net).map_err(|e| e.to_string())?;
    let ind = propagate_industry(&z, &table, Mode::Glpf, &phi.phi_up, &phi.phi_down, &opts)
        .map_err(|e| e.to_string())?;
    let m = z.industry_count();
    let il = industry_losses(
        &(0..m).collect::<Vec<_>>(),
        m,
        z.out_strength(),
        &ind.h_final,
    );
    let want_ind = [0.125, 0.25, 0.25, 0.0, 1.0 / 6.0];
    ensure(
        by_label(&il).iter().zip(want_ind).all(|(a, b)| near(*a, b)),
        format!("industry-level losses {:?}", by_label(&il)),
    )?;

    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(1),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "knockouts of firms 3 and 5 reproduced in {elapsed:?}"
    ))
}

fn fixture_overlaps() -> Check {
    let net = toy::network();
    let v = |id: &str, d| normalized_vector(&net, net.firm_index(id).unwrap(), d).unwrap();
    let ioc = overlap_coefficient(&v("10", Direction::In), &v("11", Direction::In))
        .map_err(|e| e.to_string())?;
    let ooc = overlap_coefficient(&v("6", Direction::Out), &v("7", Direction::Out))
        .map_err(|e| e.to_string())?;
    ensure(
        near(ioc, 0.5),
        format!("input overlap of 10 and 11 = {ioc}"),
    )?;
    ensure(near(ooc, 0.0), format!("output overlap of 6 and 7 = {ooc}"))?;
    Ok(format!(
        "input overlap(10, 11) = {ioc}, output overlap(6, 7) = {ooc}"
    ))
}

fn random_base(n: usize, seed: u64) -> FirmShock {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = Beta::new(2.0, 5.0).unwrap();
    let zeta = (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.3 {
                beta.sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    FirmShock::from_zeta(zeta).unwrap()
}

fn sampler_consistency() -> Check {
    let net = generate_network(&SyntheticNetworkSpec {
        n: 1000,
        m: 20,
        seed: 11,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let base = random_base(net.firm_count(), 11);
    let cfg = SamplerConfig::default();
    let eps = cfg.epsilon;
    let start = Instant::now();
    let ens = sample_ensemble(&net, &base, 100, 11, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(ens.scenarios.len() == 100, "scenario count")?;
    let max_res = ens
        .residuals
        .iter()
        .flatten()
        .map(|r| r.res_in.max(r.res_out))
        .fold(0.0, f64::max);
    ensure(max_res <= eps, format!("residual {max_res} above {eps}"))?;

    let targets = sampling_targets(&net, &base).map_err(|e| e.to_string())?;
    let s = net.strengths();
    let m = net.industry_count();
    // per scenario and industry: shock-weighted in- and out-strength
    let sums: Vec<Vec<(f64, f64)>> = ens
        .scenarios
        .iter()
        .map(|psi| {
            let mut v = vec![(0.0, 0.0); m];
            for (i, p) in psi.iter().enumerate() {
                let k = net.industry(i);
                v[k].0 += (1.0 - p) * s.s_in[i];
                v[k].1 += (1.0 - p) * s.s_out[i];
            }
            v
        })
        .collect();
    let mut worst: f64 = 0.0;
    for a in &sums {
        for (k, t) in targets.iter().enumerate() {
            ensure(
                (a[k].0 - t.target_in).abs() <= eps + 1e-9
                    && (a[k].1 - t.target_out).abs() <= eps + 1e-9,
                "target missed",
            )?;
        }
        for b in &sums {
            for k in 0..m {
                worst = worst
                    .max((a[k].0 - b[k].0).abs())
                    .max((a[k].1 - b[k].1).abs());
            }
        }
    }
    ensure(
        worst <= 2.0 * eps + 1e-9,
        format!("scenarios differ by {worst}"),
    )?;
    let z = net.aggregate();
    let phis: Vec<_> = ens
        .scenarios
        .iter()
        .map(|psi| aggregate_shock(psi, &net).unwrap())
        .collect();
    let mut phi_gap: f64 = 0.0;
    for a in &phis {
        for b in &phis {
            for k in 0..m {
                let up = (a.phi_up[k] - b.phi_up[k]).abs() * z.in_strength()[k];
                let down = (a.phi_down[k] - b.phi_down[k]).abs() * z.out_strength()[k];
                phi_gap = phi_gap.max(up).max(down);
            }
        }
    }
    ensure(
        phi_gap <= 2.0 * eps + 1e-9,
        format!("industry shocks differ by {phi_gap}"),
    )?;
    ensure(
        elapsed < Duration::from_secs(60),
        format!("took {elapsed:?}"),
    )?;
    Ok(format!(
        "100 scenarios in {elapsed:?}, max residual {max_res:.2e}, max pairwise gap {worst:.2e}"
    ))
}

fn oracle_equivalence() -> Check {
    let opts = PropagationOptions {
        tol: 1e-13,
        max_iter: 1_000_000,
        record_trace: false,
    };
    let bins = DegreeBins::canonical();
    for seed in 0..25 {
        let inst = random_instance(1000 + seed);
        let net = &inst.net;
        let z = net.aggregate();
        let dense = dense_aggregate(net);
        let m = net.industry_count();
        for k in 0..m {
            for l in 0..m {
                ensure(
                    close(z.flow(k, l), dense[k][l], 1e-9),
                    format!("aggregation, instance {seed}"),
                )?;
            }
            for bin in bins.bins() {
                for d in Direction::BOTH {
                    for measure in [Measure::Overlap, Measure::Jaccard] {
                        let got = pairwise_distribution(net, k, bin, measure, d)
                            .map_err(|e| e.to_string())?;
                        ensure(
                            summaries_close(&got, &dense_pairwise(net, k, bin, measure, d), 1e-9),
                            format!("overlap summary, instance {seed}"),
                        )?;
                    }
                }
            }
        }
        let cal =
            Calibration::for_firms(net, &inst.table, Mode::Glpf).map_err(|e| e.to_string())?;
        let got = propagate_firms(net, &cal, &inst.psi, &opts).map_err(|e| e.to_string())?;
        let (hd, hu) = dense_propagation(
            &dense_weights(net),
            net.industries(),
            &inst.table,
            Mode::Glpf,
            &inst.psi,
            &inst.psi,
            1e-12,
        );
        for i in 0..net.firm_count() {
            ensure(
                close(got.h_final[i], hd[i].min(hu[i]), 1e-9),
                format!("propagation, instance {seed}"),
            )?;
        }
    }
    Ok("aggregation, overlap summaries and propagation agree with dense references on 25 instances".into())
}

fn propagation_properties() -> Check {
    let opts = PropagationOptions {
        tol: 1e-12,
        max_iter: 1_000_000,
        record_trace: false,
    };
    for seed in 0..50 {
        let inst = random_instance(2000 + seed);
        let net = &inst.net;
        let cal =
            Calibration::for_firms(net, &inst.table, Mode::Glpf).map_err(|e| e.to_string())?;
        let mut run = Propagation::start(net.graph(), &cal, &inst.psi, &inst.psi)
            .map_err(|e| e.to_string())?;
        let mut prev = run.h_final();
        loop {
            let delta = run.step();
            let now = run.h_final();
            ensure(
                now.iter().zip(&prev).all(|(a, b)| *a <= b + 1e-12),
                format!("non-monotone iteration, instance {seed}"),
            )?;
            prev = now;
            if delta < 1e-12 {
                break;
            }
        }
        ensure(
            prev.iter().zip(&inst.psi).all(|(h, p)| *h <= p + 1e-12),
            format!("level above capacity, instance {seed}"),
        )?;
        let ones = vec![1.0; net.firm_count()];
        let r = propagate_firms(net, &cal, &ones, &opts).map_err(|e| e.to_string())?;
        ensure(
            r.h_final.iter().all(|h| (h - 1.0).abs() < 1e-12),
            format!("no-shock run lost output, instance {seed}"),
        )?;

        let linear =
            Calibration::for_firms(net, &inst.table, Mode::Linear).map_err(|e| e.to_string())?;
        let g = propagate_firms(net, &cal, &inst.psi, &opts).map_err(|e| e.to_string())?;
        let l = propagate_firms(net, &linear, &inst.psi, &opts).map_err(|e| e.to_string())?;
        let s_out = net.strengths().s_out;
        if let (Some(lg), Some(ll)) = (
            economy_loss(&s_out, &g.h_final),
            economy_loss(&s_out, &l.h_final),
        ) {
            ensure(
                ll <= lg + 1e-9,
                format!("linear loss above Leontief loss, instance {seed}"),
            )?;
        }
    }
    for seed in 0..20 {
        let inst = random_instance(3000 + seed);
        let net = &inst.net;
        let cal =
            Calibration::for_firms(net, &inst.table, Mode::Glpf).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let higher: Vec<f64> = inst
            .psi
            .iter()
            .map(|p| p + rng.random::<f64>() * (1.0 - p))
            .collect();
        let lo = propagate_firms(net, &cal, &inst.psi, &opts).map_err(|e| e.to_string())?;
        let hi = propagate_firms(net, &cal, &higher, &opts).map_err(|e| e.to_string())?;
        ensure(
            lo.h_final
                .iter()
                .zip(&hi.h_final)
                .all(|(a, b)| *a <= b + 1e-9),
            format!("shock monotonicity, pair {seed}"),
        )?;
    }
    Ok("bounds, monotone iteration and neutrality on 50 instances, 20 ordered pairs, linear dominance".into())
}

fn experiment_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        output_dir: dir.to_path_buf(),
        seed: 3,
        ..ExperimentConfig::default()
    }
}

fn read_column(path: &Path, column: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == column)
        .unwrap();
    reader
        .records()
        .map(|r| r.unwrap()[idx].parse().unwrap())
        .collect()
}

fn loss_distribution(dir: &Path) -> Check {
    let report =
        run_aggregation_error_experiment(&experiment_config(dir)).map_err(|e| e.to_string())?;
    let d = &report.fpn_losses;
    let (min, max) = (d.min.unwrap_or(0.0), d.max.unwrap_or(0.0));
    ensure(report.scenario_count >= 100, "fewer than 100 scenarios")?;
    ensure(max - min > 0.0, "all scenario losses coincide")?;

    // the reported deviation follows from the written losses
    let l_firm = read_column(&dir.join("scenario_losses.csv"), "l_firm");
    let l_ind = report.l_ind.ok_or("industry loss undefined")?;
    let dev = l_firm.iter().map(|lf| l_ind / lf - 1.0).sum::<f64>() / l_firm.len() as f64;
    let reported = report.relative_deviation.ok_or("deviation undefined")?;
    ensure(
        (dev - reported).abs() <= 1e-9 * (1.0 + dev.abs()),
        format!("deviation {dev} vs reported {reported}"),
    )?;
    Ok(format!(
        "{} scenarios, firm-level loss range [{min:.4}, {max:.4}], industry loss {l_ind:.4}, relative deviation {reported:+.4}",
        report.scenario_count
    ))
}

fn reproducible_outputs(first: &Path, second: &Path) -> Check {
    run_aggregation_error_experiment(&experiment_config(second)).map_err(|e| e.to_string())?;
    let mut names: Vec<_> = std::fs::read_dir(first)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    ensure(!names.is_empty(), "no csv outputs")?;
    for name in &names {
        let a = std::fs::read(first.join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, format!("{} differs", name.to_string_lossy()))?;
    }
    Ok(format!(
        "{} csv files byte-identical across two runs",
        names.len()
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let (first, second) = (tmp.path().join("run1"), tmp.path().join("run2"));
    let checks: Vec<Criterion> = vec![
        ("fixture propagation", Box::new(fixture_golden_values)),
        ("fixture overlaps", Box::new(fixture_overlaps)),
        ("sampler consistency", Box::new(sampler_consistency)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("propagation properties", Box::new(propagation_properties)),
        ("loss distribution", Box::new(|| loss_distribution(&first))),
        (
            "reproducibility",
            Box::new(|| reproducible_outputs(&first, &second)),
        ),
    ];
    let mut failed = 0;
    for (n, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {} {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", n + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
