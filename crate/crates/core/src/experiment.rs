//! End-to-end comparison of firm-level and industry-level shock propagation.
//!
//! [`run_aggregation_error_experiment`] loads or generates a firm network,
//! builds a base shock, samples an ensemble of firm shocks with the same
//! industry aggregates, propagates every one of them on the firm network and
//! the aggregated shock once on the industry network, and writes the
//! comparison as CSV files plus a `report.json`.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;
use crate::network::{DegreeBins, FirmNetwork};
use crate::overlap::{self, DistributionSummary};
use crate::propagation::{
    economy_loss, industry_losses, propagate_firms, propagate_industry, Calibration,
    EssentialityTable, InputClass, Mode, PropagationOptions, PropagationResult,
};
use crate::sampler::{sample_ensemble, DonorSpec, LockRule, SamplerConfig, ScenarioEnsemble};
use crate::seed::{derive_seed, task_rng};
use crate::shock::{
    aggregate_shock, impute_missing, shock_from_employment, FirmShock, IndustryShock,
};
use crate::synth::{generate_network, SyntheticNetworkSpec, Topology};

const IMPUTATION_STREAM: u64 = 1;
const RANDOM_SHOCK_STREAM: u64 = 2;
const ESSENTIALITY_STREAM: u64 = 3;

/// Flat experiment configuration. Relative paths are resolved against
/// `base_dir` (the directory of the configuration file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Edge list; a synthetic network is generated when absent.
    pub edges: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    /// Finer industry labels used only for sampling.
    pub sampling_meta: Option<PathBuf>,
    /// `firm,psi` base shock.
    pub shock: Option<PathBuf>,
    /// `firm,e_jan,e_may` head counts; used when `shock` is absent.
    pub employment: Option<PathBuf>,
    pub essentiality: Option<PathBuf>,
    /// Class of pairs missing from the essentiality file.
    pub default_class: InputClass,
    /// Without an essentiality file, every industry pair is essential with
    /// this probability (seeded).
    pub essential_share: f64,
    pub mode: Mode,
    pub tol: f64,
    pub max_iter: usize,
    pub epsilon: f64,
    pub scenario_count: usize,
    pub seed: u64,
    /// `empirical` or `beta(a,b)`.
    pub donor: String,
    pub max_rescale_iters: usize,
    pub max_scenario_retries: usize,
    pub lock_rule: LockRule,
    pub imputation_draws: usize,
    pub histogram_bins: usize,
    pub include_residual: bool,
    pub output_dir: PathBuf,

    pub synthetic_n: usize,
    pub synthetic_m: usize,
    pub synthetic_topology: Topology,
    pub synthetic_exponent: f64,
    pub synthetic_min_degree: usize,
    pub synthetic_weight_mu: f64,
    pub synthetic_weight_sigma: f64,
    pub synthetic_industry_exponent: f64,
    pub synthetic_sink_fraction: f64,

    /// Random base shock when neither `shock` nor `employment` is given:
    /// each firm is hit with probability `shock_fraction` by a
    /// Beta(`shock_beta_a`, `shock_beta_b`) shock.
    pub shock_fraction: f64,
    pub shock_beta_a: f64,
    pub shock_beta_b: f64,

    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sampler = SamplerConfig::default();
        let prop = PropagationOptions::default();
        let synth = SyntheticNetworkSpec::default();
        ExperimentConfig {
            edges: None,
            meta: None,
            sampling_meta: None,
            shock: None,
            employment: None,
            essentiality: None,
            default_class: InputClass::Essential,
            essential_share: 0.1,
            mode: Mode::Glpf,
            tol: prop.tol,
            max_iter: prop.max_iter,
            epsilon: sampler.epsilon,
            scenario_count: 100,
            seed: 0,
            donor: "empirical".into(),
            max_rescale_iters: sampler.max_rescale_iters,
            max_scenario_retries: sampler.max_scenario_retries,
            lock_rule: sampler.lock_rule,
            imputation_draws: 11,
            histogram_bins: 30,
            include_residual: false,
            output_dir: PathBuf::from("experiment_out"),
            synthetic_n: synth.n,
            synthetic_m: synth.m,
            synthetic_topology: synth.topology,
            synthetic_exponent: synth.exponent,
            synthetic_min_degree: synth.min_degree,
            synthetic_weight_mu: synth.weight_mu,
            synthetic_weight_sigma: synth.weight_sigma,
            synthetic_industry_exponent: synth.industry_exponent,
            synthetic_sink_fraction: synth.sink_fraction,
            shock_fraction: 0.3,
            shock_beta_a: 2.0,
            shock_beta_b: 5.0,
            base_dir: None,
        }
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Applies `key = value` overrides; values are read as TOML literals
    /// and fall back to plain strings.
    pub fn with_overrides<K, V>(self, overrides: &[(K, V)]) -> Result<Self>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let base_dir = self.base_dir.clone();
        let mut table = toml::Table::try_from(&self).map_err(|e| Error::Config(e.to_string()))?;
        for (key, raw) in overrides {
            let key = key.as_ref();
            let mut value = parse_override_value(raw.as_ref());
            match (table.get(key), &value) {
                (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => {
                    value = toml::Value::Float(*i as f64)
                }
                (Some(toml::Value::String(_)), v) if !v.is_str() => {
                    value = toml::Value::String(raw.as_ref().to_string())
                }
                _ => {}
            }
            table.insert(key.to_string(), value);
        }
        let mut cfg: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir;
        Ok(cfg)
    }

    /// SHA-256 of the configuration without its output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serialises");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig> {
        Ok(SamplerConfig {
            epsilon: self.epsilon,
            donor: self.donor.parse::<DonorSpec>().map_err(Error::Config)?,
            max_rescale_iters: self.max_rescale_iters,
            max_scenario_retries: self.max_scenario_retries,
            lock_rule: self.lock_rule,
            ..SamplerConfig::default()
        })
    }

    pub fn propagation_options(&self) -> PropagationOptions {
        PropagationOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            record_trace: false,
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticNetworkSpec {
        SyntheticNetworkSpec {
            n: self.synthetic_n,
            m: self.synthetic_m,
            topology: self.synthetic_topology,
            exponent: self.synthetic_exponent,
            min_degree: self.synthetic_min_degree,
            weight_mu: self.synthetic_weight_mu,
            weight_sigma: self.synthetic_weight_sigma,
            industry_exponent: self.synthetic_industry_exponent,
            sink_fraction: self.synthetic_sink_fraction,
            seed: self.seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.edges.is_some() != self.meta.is_some() {
            return fail("`edges` and `meta` must be given together");
        }
        if self.sampling_meta.is_some() && self.edges.is_none() {
            return fail("`sampling_meta` needs a network read from files");
        }
        if self.scenario_count == 0 {
            return fail("scenario_count must be positive");
        }
        if self.histogram_bins == 0 {
            return fail("histogram_bins must be positive");
        }
        if !(0.0..=1.0).contains(&self.essential_share) {
            return fail("essential_share must lie in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.shock_fraction) {
            return fail("shock_fraction must lie in [0,1]");
        }
        self.sampler_config()?;
        let missing = [
            &self.edges,
            &self.meta,
            &self.sampling_meta,
            &self.shock,
            &self.employment,
            &self.essentiality,
        ]
        .into_iter()
        .flatten()
        .map(|p| self.resolve(p))
        .find(|p| !p.is_file());
        match missing {
            Some(p) => Err(Error::Config(format!(
                "input file {} does not exist",
                p.display()
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Load,
    Shock,
    Sample,
    Propagate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Shock => "shock",
            Stage::Sample => "sample",
            Stage::Propagate => "propagate",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

/// An error tagged with the pipeline stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Location and shape of a loss sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossDistribution {
    pub summary: Option<DistributionSummary>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Population skewness; `None` for a degenerate sample.
    pub skewness: Option<f64>,
}

impl LossDistribution {
    pub fn of(values: &[f64]) -> Self {
        let summary = DistributionSummary::from_values(values.to_vec());
        let min = values.iter().copied().reduce(f64::min);
        let max = values.iter().copied().reduce(f64::max);
        let skewness = summary.and_then(|s| {
            let n = values.len() as f64;
            let m3 = values.iter().map(|v| (v - s.mean).powi(3)).sum::<f64>() / n;
            (s.std > 0.0).then(|| m3 / s.std.powi(3))
        });
        LossDistribution {
            summary,
            min,
            max,
            skewness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndustryReport {
    pub industry: String,
    pub phi_up: f64,
    pub phi_down: f64,
    /// Loss of the industry on the industry network.
    pub l_ind: f64,
    /// Loss of the industry's firms under the base shock.
    pub l_firm_base: Option<f64>,
    /// Losses of the industry's firms across scenarios.
    pub scenarios: Option<DistributionSummary>,
    /// Mean over scenarios of `l_ind / l_firm - 1` (scenarios with positive
    /// firm loss only).
    pub relative_deviation: Option<f64>,
    /// Mean over scenarios of `|l_ind - l_firm|`.
    pub mean_absolute_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputationReport {
    pub missing: usize,
    pub draws: usize,
    pub chosen_draw: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub seed: u64,
    pub mode: Mode,
    pub firms: usize,
    pub industries: usize,
    pub edges: usize,
    pub scenario_count: usize,
    pub imputation: Option<ImputationReport>,
    /// Economy-wide loss of the base shock on the firm network.
    pub l_firm_base: Option<f64>,
    /// Economy-wide loss of the aggregated shock on the industry network.
    pub l_ind: Option<f64>,
    pub fpn_losses: LossDistribution,
    /// Mean over scenarios of `l_ind / l_firm - 1`.
    pub relative_deviation: Option<f64>,
    /// Mean over scenarios of `|l_ind - l_firm|`.
    pub mean_absolute_deviation: Option<f64>,
    pub max_residual: f64,
    pub retried_scenarios: usize,
    pub base_iterations: usize,
    pub industry_iterations: usize,
    pub max_scenario_iterations: usize,
    pub industry_table: Vec<IndustryReport>,
    pub outputs: Vec<String>,
}

fn random_base_shock(cfg: &ExperimentConfig, n: usize) -> Result<FirmShock> {
    let beta = Beta::new(cfg.shock_beta_a, cfg.shock_beta_b)
        .map_err(|e| Error::Config(format!("base shock beta: {e}")))?;
    let mut rng = task_rng(cfg.seed, &[RANDOM_SHOCK_STREAM]);
    let zeta = (0..n)
        .map(|_| {
            if rng.random::<f64>() < cfg.shock_fraction {
                beta.sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    FirmShock::from_zeta(zeta)
}

/// Table with every ordered industry pair essential with probability `share`.
pub fn random_essentiality(m: usize, share: f64, seed: u64) -> EssentialityTable {
    let mut rng = task_rng(seed, &[ESSENTIALITY_STREAM]);
    let mut table = EssentialityTable::new(InputClass::NonEssential);
    for p in 0..m {
        for q in 0..m {
            if rng.random::<f64>() < share {
                table.set(p, q, InputClass::Essential);
            }
        }
    }
    table
}

fn check_result(psi: &[f64], result: &PropagationResult, what: &str) -> Result<()> {
    if !result.converged {
        return Err(Error::Undefined(format!(
            "{what}: propagation did not converge"
        )));
    }
    if let Some(i) = (0..psi.len()).find(|&i| result.h_final[i] > psi[i] || result.h_final[i] < 0.0)
    {
        return Err(Error::Undefined(format!(
            "{what}: level {} of node {i} violates its cap {}",
            result.h_final[i], psi[i]
        )));
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Fixed-width histogram over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let (Some(lo), Some(hi)) = (
        values.iter().copied().reduce(f64::min),
        values.iter().copied().reduce(f64::max),
    ) else {
        return Vec::new();
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| {
            let upper = if b + 1 == bins {
                hi
            } else {
                lo + width * (b + 1) as f64
            };
            (lo + width * b as f64, upper, c)
        })
        .collect()
}

/// Loads, samples, propagates and writes every output of the experiment.
pub fn run_aggregation_error_experiment(
    cfg: &ExperimentConfig,
) -> std::result::Result<ExperimentReport, StageError> {
    cfg.validate().at(Stage::Config)?;
    let sampler_cfg = cfg.sampler_config().at(Stage::Config)?;
    let opts = cfg.propagation_options();
    let out = cfg.output_path();

    // load
    let net = match (&cfg.edges, &cfg.meta) {
        (Some(e), Some(m)) => io::read_firm_network(&cfg.resolve(e), &cfg.resolve(m)),
        _ => generate_network(&cfg.synthetic_spec()),
    }
    .at(Stage::Load)?;
    let table = match &cfg.essentiality {
        Some(p) => io::read_essentiality(&cfg.resolve(p), net.industry_labels(), cfg.default_class),
        None => Ok(random_essentiality(
            net.industry_count(),
            cfg.essential_share,
            cfg.seed,
        )),
    }
    .at(Stage::Load)?;
    let sampling_net = match &cfg.sampling_meta {
        Some(m) => {
            let e = cfg.edges.as_ref().expect("validated");
            Some(io::read_firm_network(&cfg.resolve(e), &cfg.resolve(m)).at(Stage::Load)?)
        }
        None => None,
    };
    if let Some(s) = &sampling_net {
        if s.firm_ids() != net.firm_ids() {
            return Err(Error::Config(
                "sampling metadata must list the same firms in the same order".into(),
            ))
            .at(Stage::Load);
        }
    }
    let calibration = Calibration::for_firms(&net, &table, cfg.mode).at(Stage::Load)?;
    let strengths = net.strengths();

    // base shock
    let firm_loss = |shock: &FirmShock| -> Result<f64> {
        let psi = shock.psi();
        let r = propagate_firms(&net, &calibration, &psi, &opts)?;
        economy_loss(&strengths.s_out, &r.h_final)
            .ok_or_else(|| Error::Undefined("network has zero total output".into()))
    };
    let mut imputation = None;
    let base = if let Some(p) = &cfg.shock {
        io::read_shock(&cfg.resolve(p), &net).and_then(|psi| FirmShock::from_psi(&psi))
    } else if let Some(p) = &cfg.employment {
        io::read_employment(&cfg.resolve(p))
            .and_then(|records| shock_from_employment(&records, &net))
            .and_then(|partial| {
                let missing = partial.missing().len();
                let seed = derive_seed(cfg.seed, &[IMPUTATION_STREAM]);
                let done = impute_missing(&partial, &net, cfg.imputation_draws, seed, firm_loss)?;
                imputation = Some(ImputationReport {
                    missing,
                    draws: if missing > 0 { cfg.imputation_draws } else { 0 },
                    chosen_draw: done.chosen,
                });
                Ok(done.shock)
            })
    } else {
        random_base_shock(cfg, net.firm_count())
    }
    .at(Stage::Shock)?;
    let base_psi = base.psi();
    let phi: IndustryShock = aggregate_shock(&base_psi, &net).at(Stage::Shock)?;

    // sample
    let ensemble: ScenarioEnsemble = match &sampling_net {
        Some(s) => sample_ensemble(s, &base, cfg.scenario_count, cfg.seed, &sampler_cfg),
        None => sample_ensemble(&net, &base, cfg.scenario_count, cfg.seed, &sampler_cfg),
    }
    .at(Stage::Sample)?;

    // propagate
    let base_result = propagate_firms(&net, &calibration, &base_psi, &opts).at(Stage::Propagate)?;
    check_result(&base_psi, &base_result, "base shock").at(Stage::Propagate)?;
    let z = net.aggregate();
    let ind_result = propagate_industry(&z, &table, cfg.mode, &phi.phi_up, &phi.phi_down, &opts)
        .at(Stage::Propagate)?;
    let ind_cap: Vec<f64> = phi
        .phi_up
        .iter()
        .zip(&phi.phi_down)
        .map(|(u, d)| u.min(*d))
        .collect();
    check_result(&ind_cap, &ind_result, "industry network").at(Stage::Propagate)?;
    let scenario_results = ensemble
        .scenarios
        .par_iter()
        .enumerate()
        .map(|(s, psi)| {
            let r = propagate_firms(&net, &calibration, psi, &opts)?;
            check_result(psi, &r, &format!("scenario {s}"))?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()
        .at(Stage::Propagate)?;

    // losses
    let m = net.industry_count();
    let l_firm_base = economy_loss(&strengths.s_out, &base_result.h_final);
    let l_ind = economy_loss(z.out_strength(), &ind_result.h_final);
    let ind_losses = industry_losses(
        &(0..m).collect::<Vec<_>>(),
        m,
        z.out_strength(),
        &ind_result.h_final,
    );
    let base_ind_losses =
        industry_losses(net.industries(), m, &strengths.s_out, &base_result.h_final);
    let scenario_losses: Vec<f64> = scenario_results
        .iter()
        .map(|r| economy_loss(&strengths.s_out, &r.h_final))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Undefined("network has zero total output".into()))
        .at(Stage::Report)?;
    let scenario_ind_losses: Vec<Vec<Option<f64>>> = scenario_results
        .iter()
        .map(|r| industry_losses(net.industries(), m, &strengths.s_out, &r.h_final))
        .collect();
    if let Some(bad) = scenario_losses.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::Undefined(format!("loss {bad} outside [0,1]"))).at(Stage::Report);
    }
    let deviation_of = |li: Option<f64>, lf: f64| li.filter(|_| lf > 0.0).map(|li| li / lf - 1.0);

    let reported: Vec<usize> = (0..m)
        .filter(|&k| cfg.include_residual || Some(k) != net.residual_industry())
        .collect();
    let industry_table: Vec<IndustryReport> = reported
        .iter()
        .map(|&k| {
            let l_ind_k = ind_losses[k].unwrap_or(0.0);
            let firm_k: Vec<f64> = scenario_ind_losses.iter().filter_map(|v| v[k]).collect();
            IndustryReport {
                industry: net.industry_label(k).to_string(),
                phi_up: phi.phi_up[k],
                phi_down: phi.phi_down[k],
                l_ind: l_ind_k,
                l_firm_base: base_ind_losses[k],
                scenarios: DistributionSummary::from_values(firm_k.clone()),
                relative_deviation: mean(
                    firm_k
                        .iter()
                        .filter_map(|&lf| deviation_of(Some(l_ind_k), lf)),
                ),
                mean_absolute_deviation: mean(firm_k.iter().map(|lf| (l_ind_k - lf).abs())),
            }
        })
        .collect();

    // outputs
    let net = &net;
    let ids = net.firm_ids();
    let write = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<String> {
        io::write_rows(&out.join(name), header, rows)?;
        Ok(name.to_string())
    };
    let mut outputs = Vec::new();
    let sampling_labels = sampling_net.as_ref().unwrap_or(net).industry_labels();
    let outcome: Result<()> = (|| {
        outputs.push(write(
            "base_shock.csv",
            &["firm", "psi"],
            ids.iter()
                .zip(&base_psi)
                .map(|(id, p)| vec![id.clone(), p.to_string()])
                .collect(),
        )?);
        io::write_propagation(&out.join("base_propagation.csv"), ids, &base_result)?;
        outputs.push("base_propagation.csv".into());
        outputs.push(write(
            "industry_shock.csv",
            &[
                "industry", "phi_up", "phi_down", "h_down", "h_up", "h_final", "loss",
            ],
            (0..m)
                .map(|k| {
                    vec![
                        z.labels()[k].clone(),
                        phi.phi_up[k].to_string(),
                        phi.phi_down[k].to_string(),
                        ind_result.h_down[k].to_string(),
                        ind_result.h_up[k].to_string(),
                        ind_result.h_final[k].to_string(),
                        fmt_opt(ind_losses[k]),
                    ]
                })
                .collect(),
        )?);
        outputs.push(write(
            "scenario_losses.csv",
            &[
                "scenario",
                "attempts",
                "iterations",
                "l_firm",
                "l_ind",
                "deviation",
            ],
            scenario_losses
                .iter()
                .enumerate()
                .map(|(s, &lf)| {
                    vec![
                        s.to_string(),
                        ensemble.attempts[s].to_string(),
                        scenario_results[s].iterations.to_string(),
                        lf.to_string(),
                        fmt_opt(l_ind),
                        fmt_opt(deviation_of(l_ind, lf)),
                    ]
                })
                .collect(),
        )?);
        outputs.push(write(
            "scenario_industry_losses.csv",
            &["scenario", "industry", "l_firm"],
            scenario_ind_losses
                .iter()
                .enumerate()
                .flat_map(|(s, v)| {
                    reported.iter().map(move |&k| {
                        vec![
                            s.to_string(),
                            net.industry_label(k).to_string(),
                            fmt_opt(v[k]),
                        ]
                    })
                })
                .collect(),
        )?);
        outputs.push(write(
            "industry_summary.csv",
            &[
                "industry",
                "l_ind",
                "l_firm_base",
                "count",
                "mean",
                "std",
                "p5",
                "p25",
                "p50",
                "p75",
                "p95",
                "relative_deviation",
                "mean_absolute_deviation",
            ],
            industry_table
                .iter()
                .map(|r| {
                    let mut row = vec![
                        r.industry.clone(),
                        r.l_ind.to_string(),
                        fmt_opt(r.l_firm_base),
                    ];
                    match &r.scenarios {
                        Some(s) => {
                            row.push(s.count.to_string());
                            row.extend(
                                [s.mean, s.std, s.p5, s.p25, s.p50, s.p75, s.p95]
                                    .map(|x| x.to_string()),
                            );
                        }
                        None => {
                            row.push("0".into());
                            row.extend(std::iter::repeat_n(String::new(), 7));
                        }
                    }
                    row.push(fmt_opt(r.relative_deviation));
                    row.push(fmt_opt(r.mean_absolute_deviation));
                    row
                })
                .collect(),
        )?);
        outputs.push(write(
            "residuals.csv",
            &["scenario", "industry", "res_in", "res_out"],
            ensemble
                .residuals
                .iter()
                .enumerate()
                .flat_map(|(s, res)| {
                    res.iter().enumerate().map(move |(k, r)| {
                        vec![
                            s.to_string(),
                            sampling_labels[k].clone(),
                            r.res_in.to_string(),
                            r.res_out.to_string(),
                        ]
                    })
                })
                .collect(),
        )?);
        let mut header = vec!["firm".to_string()];
        header.extend((0..ensemble.scenarios.len()).map(|s| format!("psi_{s}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        outputs.push(write(
            "scenarios.csv",
            &header,
            (0..net.firm_count())
                .map(|i| {
                    let mut row = vec![ids[i].clone()];
                    row.extend(ensemble.scenarios.iter().map(|psi| psi[i].to_string()));
                    row
                })
                .collect(),
        )?);
        outputs.push(write(
            "loss_histogram.csv",
            &["bin", "lower", "upper", "count"],
            histogram(&scenario_losses, cfg.histogram_bins)
                .into_iter()
                .enumerate()
                .map(|(b, (lo, hi, c))| {
                    vec![b.to_string(), lo.to_string(), hi.to_string(), c.to_string()]
                })
                .collect(),
        )?);
        outputs.push("report.json".into());
        Ok(())
    })();
    outcome.at(Stage::Report)?;

    let report = ExperimentReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        mode: cfg.mode,
        firms: net.firm_count(),
        industries: m,
        edges: net.graph().edge_count(),
        scenario_count: ensemble.scenarios.len(),
        imputation,
        l_firm_base,
        l_ind,
        fpn_losses: LossDistribution::of(&scenario_losses),
        relative_deviation: mean(
            scenario_losses
                .iter()
                .filter_map(|&lf| deviation_of(l_ind, lf)),
        ),
        mean_absolute_deviation: l_ind
            .and_then(|li| mean(scenario_losses.iter().map(|lf| (li - lf).abs()))),
        max_residual: ensemble
            .residuals
            .iter()
            .flatten()
            .map(|r| r.res_in.max(r.res_out))
            .fold(0.0, f64::max),
        retried_scenarios: ensemble.attempts.iter().filter(|&&a| a > 1).count(),
        base_iterations: base_result.iterations,
        industry_iterations: ind_result.iterations,
        max_scenario_iterations: scenario_results
            .iter()
            .map(|r| r.iterations)
            .max()
            .unwrap_or(0),
        industry_table,
        outputs,
    };
    io::write_json(&out.join("report.json"), &report).at(Stage::Report)?;
    Ok(report)
}

/// Writes `overlaps.csv` for `net` and, given the previous year's network,
/// `temporal.csv`. Returns the written paths.
pub fn emit_overlap_report(
    net: &FirmNetwork,
    previous: Option<&FirmNetwork>,
    bins: &DegreeBins,
    include_residual: bool,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let path = out_dir.join("overlaps.csv");
    overlap::write_overlap_rows(&path, &overlap::overlap_report(net, bins, include_residual))?;
    written.push(path);
    if let Some(prev) = previous {
        let path = out_dir.join("temporal.csv");
        let rows = overlap::temporal_report(net, prev, bins, include_residual);
        overlap::write_overlap_rows(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}
