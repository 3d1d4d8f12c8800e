use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use prodnet::experiment::{
    emit_overlap_report, run_aggregation_error_experiment, ExperimentConfig,
};
use prodnet::io;
use prodnet::propagation::{
    economy_loss, industry_losses, propagate_firms, propagate_industry, Calibration,
    EssentialityTable, InputClass, Mode, PropagationOptions,
};
use prodnet::sampler::{sample_ensemble, LockRule, SamplerConfig};
use prodnet::shock::{aggregate_shock, impute_missing, shock_from_employment, FirmShock};
use prodnet::synth::{generate_network, SyntheticNetworkSpec, Topology};
use prodnet::{DegreeBins, FirmNetwork};

#[derive(Parser)]
#[command(
    name = "prodnet",
    version,
    about = "Firm- and industry-level production network analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct NetworkArgs {
    /// Edge list with header `supplier,buyer,weight`.
    #[arg(long)]
    edges: PathBuf,
    /// Firm metadata with header `firm,industry`.
    #[arg(long)]
    meta: PathBuf,
}

impl NetworkArgs {
    fn load(&self) -> Result<FirmNetwork> {
        io::read_firm_network(&self.edges, &self.meta).context("[load] reading network")
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Table with header `producer_industry,input_industry,class`.
    #[arg(long)]
    essentiality: Option<PathBuf>,
    #[arg(long, default_value = "essential")]
    default_class: InputClass,
    #[arg(long, default_value = "glpf")]
    mode: Mode,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

impl ModelArgs {
    fn table(&self, net: &FirmNetwork) -> Result<EssentialityTable> {
        match &self.essentiality {
            Some(p) => io::read_essentiality(p, net.industry_labels(), self.default_class)
                .context("[load] reading essentiality table"),
            None => Ok(EssentialityTable::new(self.default_class)),
        }
    }

    fn options(&self) -> PropagationOptions {
        PropagationOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            record_trace: false,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate the firm network into an industry flow matrix.
    Aggregate {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise (and year-over-year) similarity of industry io profiles.
    Overlaps {
        #[command(flatten)]
        net: NetworkArgs,
        /// Previous year's edges, for temporal overlaps.
        #[arg(long, requires = "prev_meta")]
        prev_edges: Option<PathBuf>,
        #[arg(long, requires = "prev_edges")]
        prev_meta: Option<PathBuf>,
        #[arg(long)]
        include_residual: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Firm shocks from employment head counts, with imputation.
    Shock {
        #[command(flatten)]
        net: NetworkArgs,
        /// Head counts with header `firm,e_jan,e_may`.
        #[arg(long)]
        employment: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 11)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Firm shock output, header `firm,psi`.
        #[arg(long)]
        out: PathBuf,
        /// Optional industry shock output.
        #[arg(long)]
        industry_out: Option<PathBuf>,
    },
    /// Sample firm shocks with the industry aggregates of a base shock.
    Sample {
        #[command(flatten)]
        net: NetworkArgs,
        /// Base shock with header `firm,psi`.
        #[arg(long)]
        shock: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// `empirical` or `beta(a,b)`.
        #[arg(long, default_value = "empirical")]
        donor: String,
        #[arg(long, default_value_t = 1000)]
        max_rescale_iters: usize,
        #[arg(long, default_value_t = 20)]
        max_scenario_retries: usize,
        #[arg(long, default_value = "clamped")]
        lock_rule: LockRule,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Propagate a shock on the firm or the industry network.
    Propagate {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        shock: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Aggregate the shock and propagate on the industry network.
        #[arg(long)]
        industry: bool,
        /// Levels output, header `firm,h_down,h_up,h_final`.
        #[arg(long)]
        out: PathBuf,
        /// Loss summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Full firm- vs industry-level comparison from a TOML config.
    /// Trailing `--key value` pairs override config keys.
    Experiment {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Write a synthetic network.
    Generate {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value = "power_law")]
        topology: Topology,
        #[arg(long, default_value_t = 2.1)]
        exponent: f64,
        #[arg(long, default_value_t = 1)]
        min_degree: usize,
        #[arg(long, default_value_t = 0.0)]
        weight_mu: f64,
        #[arg(long, default_value_t = 1.0)]
        weight_sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        industry_exponent: f64,
        /// Share of firms that only buy.
        #[arg(long, default_value_t = 0.1)]
        sink_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(flag) = it.next() {
        let Some(key) = flag.strip_prefix("--") else {
            bail!("[config] expected `--key value`, found `{flag}`");
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.replace('-', "_"), v.to_string())),
            None => {
                let value = it
                    .next()
                    .with_context(|| format!("[config] missing value for `--{key}`"))?;
                out.push((key.replace('-', "_"), value.clone()));
            }
        }
    }
    Ok(out)
}

fn write_summary(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Aggregate { net, out } => {
            let net = net.load()?;
            io::write_industry_matrix(&net.aggregate(), &out).context("[report]")?;
        }
        Command::Overlaps {
            net,
            prev_edges,
            prev_meta,
            include_residual,
            out_dir,
        } => {
            let net = net.load()?;
            let prev = match (prev_edges, prev_meta) {
                (Some(e), Some(m)) => {
                    Some(io::read_firm_network(&e, &m).context("[load] previous year")?)
                }
                _ => None,
            };
            let written = emit_overlap_report(
                &net,
                prev.as_ref(),
                &DegreeBins::canonical(),
                include_residual,
                &out_dir,
            )
            .context("[report]")?;
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Shock {
            net,
            employment,
            model,
            draws,
            seed,
            out,
            industry_out,
        } => {
            let net = net.load()?;
            let table = model.table(&net)?;
            let cal = Calibration::for_firms(&net, &table, model.mode).context("[load]")?;
            let s_out = net.strengths().s_out;
            let opts = model.options();
            let records = io::read_employment(&employment).context("[load] employment")?;
            let partial = shock_from_employment(&records, &net).context("[shock]")?;
            let done = impute_missing(&partial, &net, draws, seed, |shock: &FirmShock| {
                let r = propagate_firms(&net, &cal, &shock.psi(), &opts)?;
                economy_loss(&s_out, &r.h_final)
                    .ok_or_else(|| prodnet::Error::Undefined("zero total output".into()))
            })
            .context("[shock] imputation")?;
            let psi = done.shock.psi();
            io::write_shock(&out, &net, &psi).context("[report]")?;
            if let Some(p) = industry_out {
                let phi = aggregate_shock(&psi, &net).context("[shock]")?;
                let rows = (0..net.industry_count()).map(|k| {
                    vec![
                        net.industry_label(k).to_string(),
                        phi.phi_up[k].to_string(),
                        phi.phi_down[k].to_string(),
                    ]
                });
                write_rows(&p, &["industry", "phi_up", "phi_down"], rows)?;
            }
            println!(
                "{} firms, {} imputed",
                net.firm_count(),
                partial.missing().len()
            );
        }
        Command::Sample {
            net,
            shock,
            count,
            seed,
            epsilon,
            donor,
            max_rescale_iters,
            max_scenario_retries,
            lock_rule,
            out_dir,
        } => {
            let net = net.load()?;
            let psi = io::read_shock(&shock, &net).context("[load] base shock")?;
            let base = FirmShock::from_psi(&psi).context("[shock]")?;
            let cfg = SamplerConfig {
                epsilon,
                donor: donor
                    .parse()
                    .map_err(anyhow::Error::msg)
                    .context("[config]")?,
                max_rescale_iters,
                max_scenario_retries,
                lock_rule,
                ..SamplerConfig::default()
            };
            let ens = sample_ensemble(&net, &base, count, seed, &cfg).context("[sample]")?;
            let mut header = vec!["firm".to_string()];
            header.extend((0..count).map(|s| format!("psi_{s}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_rows(
                &out_dir.join("scenarios.csv"),
                &header,
                (0..net.firm_count()).map(|i| {
                    let mut row = vec![net.firm_id(i).to_string()];
                    row.extend(ens.scenarios.iter().map(|p| p[i].to_string()));
                    row
                }),
            )?;
            write_rows(
                &out_dir.join("residuals.csv"),
                &["scenario", "industry", "res_in", "res_out"],
                ens.residuals.iter().enumerate().flat_map(|(s, res)| {
                    let net = &net;
                    res.iter().enumerate().map(move |(k, r)| {
                        vec![
                            s.to_string(),
                            net.industry_label(k).to_string(),
                            r.res_in.to_string(),
                            r.res_out.to_string(),
                        ]
                    })
                }),
            )?;
            println!("{count} scenarios written to {}", out_dir.display());
        }
        Command::Propagate {
            net,
            shock,
            model,
            industry,
            out,
            summary,
        } => {
            let net = net.load()?;
            let table = model.table(&net)?;
            let psi = io::read_shock(&shock, &net).context("[load] shock")?;
            let opts = model.options();
            let (ids, result, s_out, categories): (Vec<String>, _, Vec<f64>, Vec<usize>) =
                if industry {
                    let z = net.aggregate();
                    let phi = aggregate_shock(&psi, &net).context("[shock]")?;
                    let r = propagate_industry(
                        &z,
                        &table,
                        model.mode,
                        &phi.phi_up,
                        &phi.phi_down,
                        &opts,
                    )
                    .context("[propagate]")?;
                    let m = z.industry_count();
                    (
                        z.labels().to_vec(),
                        r,
                        z.out_strength().to_vec(),
                        (0..m).collect(),
                    )
                } else {
                    let cal =
                        Calibration::for_firms(&net, &table, model.mode).context("[propagate]")?;
                    let r = propagate_firms(&net, &cal, &psi, &opts).context("[propagate]")?;
                    (
                        net.firm_ids().to_vec(),
                        r,
                        net.strengths().s_out,
                        net.industries().to_vec(),
                    )
                };
            io::write_propagation(&out, &ids, &result).context("[report]")?;
            let loss = economy_loss(&s_out, &result.h_final);
            let per = industry_losses(&categories, net.industry_count(), &s_out, &result.h_final);
            let per: serde_json::Map<String, serde_json::Value> = net
                .industry_labels()
                .iter()
                .zip(per)
                .map(|(l, v)| (l.clone(), json!(v)))
                .collect();
            let value = json!({
                "economy_loss": loss,
                "industry_losses": per,
                "iterations": result.iterations,
                "converged": result.converged,
            });
            match summary {
                Some(p) => write_summary(&p, &value)?,
                None => println!("{}", serde_json::to_string_pretty(&value)?),
            }
            if !result.converged {
                bail!(
                    "[propagate] no convergence within {} iterations",
                    model.max_iter
                );
            }
        }
        Command::Experiment { config, overrides } => {
            let cfg = match &config {
                Some(p) => ExperimentConfig::load(p).context("[config]")?,
                None => ExperimentConfig::default(),
            };
            let cfg = cfg
                .with_overrides(&parse_overrides(&overrides)?)
                .context("[config]")?;
            let report = run_aggregation_error_experiment(&cfg)?;
            let fmt = |x: Option<f64>| x.map_or("undefined".to_string(), |v| format!("{v:.6}"));
            println!("config hash        {}", report.config_hash);
            println!(
                "firm-level loss    {} (base shock)",
                fmt(report.l_firm_base)
            );
            println!("industry loss      {}", fmt(report.l_ind));
            if let Some(s) = report.fpn_losses.summary {
                println!(
                    "scenario losses    mean {:.6}, p5 {:.6}, p95 {:.6}, skewness {}",
                    s.mean,
                    s.p5,
                    s.p95,
                    fmt(report.fpn_losses.skewness)
                );
            }
            println!("relative deviation {}", fmt(report.relative_deviation));
            println!("outputs in         {}", cfg.output_path().display());
        }
        Command::Generate {
            n,
            m,
            topology,
            exponent,
            min_degree,
            weight_mu,
            weight_sigma,
            industry_exponent,
            sink_fraction,
            seed,
            out_dir,
        } => {
            let spec = SyntheticNetworkSpec {
                n,
                m,
                topology,
                exponent,
                min_degree,
                weight_mu,
                weight_sigma,
                industry_exponent,
                sink_fraction,
                seed,
            };
            let net = generate_network(&spec).context("[generate]")?;
            io::write_firm_network(&net, &out_dir.join("edges.csv"), &out_dir.join("meta.csv"))
                .context("[report]")?;
            println!(
                "{} firms, {} edges",
                net.firm_count(),
                net.graph().edge_count()
            );
        }
    }
    Ok(())
}

fn write_rows<R: IntoIterator<Item = Vec<String>>>(
    path: &Path,
    header: &[&str],
    rows: R,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("[report] {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
