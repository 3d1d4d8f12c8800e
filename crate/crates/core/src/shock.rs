//! Firm-level shocks and their industry-level aggregates.
//!
//! A shock `ζ_i ∈ [0,1]` is the fraction of production capacity firm `i`
//! loses; `ψ_i = 1 - ζ_i` is what remains. Industry aggregates weight the
//! firm capacities by in-strength (upstream constraint `φ_u`) and by
//! out-strength (downstream constraint `φ_d`).

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::FirmNetwork;
use crate::seed::task_rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmploymentRecord {
    pub firm: String,
    pub e_jan: Option<u64>,
    pub e_may: Option<u64>,
}

/// Shock from two head counts. A firm without employees in January is not
/// shocked; growth is not a negative shock.
pub fn zeta_from_counts(e_jan: u64, e_may: u64) -> f64 {
    if e_jan == 0 {
        return 0.0;
    }
    (1.0 - e_may as f64 / e_jan as f64).max(0.0)
}

/// Complete firm-level shock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmShock {
    zeta: Vec<f64>,
}

fn check_unit(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::Config(format!("shock value {v} outside [0,1]"))),
        None => Ok(()),
    }
}

impl FirmShock {
    pub fn from_zeta(zeta: Vec<f64>) -> Result<Self> {
        check_unit(&zeta)?;
        Ok(FirmShock { zeta })
    }

    pub fn from_psi(psi: &[f64]) -> Result<Self> {
        check_unit(psi)?;
        Ok(FirmShock {
            zeta: psi.iter().map(|p| 1.0 - p).collect(),
        })
    }

    /// No firm is shocked.
    pub fn none(n: usize) -> Self {
        FirmShock { zeta: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn psi(&self) -> Vec<f64> {
        self.zeta.iter().map(|z| 1.0 - z).collect()
    }
}

/// Shock with firms whose value is not known yet.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialShock {
    pub zeta: Vec<Option<f64>>,
}

impl PartialShock {
    pub fn missing(&self) -> Vec<usize> {
        (0..self.zeta.len())
            .filter(|&i| self.zeta[i].is_none())
            .collect()
    }

    pub fn complete(&self) -> Option<FirmShock> {
        self.zeta
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .map(|zeta| FirmShock { zeta })
    }
}

/// Shocks of all firms with both head counts; firms without a usable record
/// are missing. Records for firms outside the network are ignored.
pub fn shock_from_employment(
    records: &[EmploymentRecord],
    net: &FirmNetwork,
) -> Result<PartialShock> {
    let mut zeta = vec![None; net.firm_count()];
    let mut seen = vec![false; net.firm_count()];
    for r in records {
        let Some(i) = net.firm_index(&r.firm) else {
            continue;
        };
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Config(format!(
                "duplicate employment record for `{}`",
                r.firm
            )));
        }
        zeta[i] = match (r.e_jan, r.e_may) {
            (Some(0), _) => Some(0.0),
            (Some(jan), Some(may)) => Some(zeta_from_counts(jan, may)),
            _ => None,
        };
    }
    Ok(PartialShock { zeta })
}

/// Result of imputing missing shocks.
#[derive(Debug, Clone)]
pub struct Imputation {
    pub shock: FirmShock,
    /// Loss of every completed draw, by draw index.
    pub losses: Vec<f64>,
    /// Draw whose completion was returned; `None` when nothing was missing.
    pub chosen: Option<usize>,
}

/// Completes `partial` `draws` times by sampling every missing firm's shock
/// from the observed shocks of its industry (all observed shocks when its
/// industry has none), scores each completion with `loss` and returns the
/// completion with the (lower) median loss.
pub fn impute_missing<F>(
    partial: &PartialShock,
    net: &FirmNetwork,
    draws: usize,
    seed: u64,
    loss: F,
) -> Result<Imputation>
where
    F: Fn(&FirmShock) -> Result<f64> + Sync,
{
    if partial.zeta.len() != net.firm_count() {
        return Err(Error::Dimension {
            expected: net.firm_count(),
            actual: partial.zeta.len(),
        });
    }
    if let Some(shock) = partial.complete() {
        return Ok(Imputation {
            shock,
            losses: Vec::new(),
            chosen: None,
        });
    }
    if draws == 0 {
        return Err(Error::Config("imputation needs at least one draw".into()));
    }
    let mut pools: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut global = Vec::new();
    for (i, z) in partial.zeta.iter().enumerate() {
        if let Some(z) = *z {
            pools.entry(net.industry(i)).or_default().push(z);
            global.push(z);
        }
    }
    if global.is_empty() {
        return Err(Error::Undefined("no observed shocks to impute from".into()));
    }
    let missing = partial.missing();
    let donors: Vec<&[f64]> = missing
        .iter()
        .map(|&i| {
            pools
                .get(&net.industry(i))
                .map_or(global.as_slice(), Vec::as_slice)
        })
        .collect();

    let complete = |d: usize| -> FirmShock {
        let mut rng = task_rng(seed, &[d as u64]);
        let mut zeta: Vec<f64> = partial.zeta.iter().map(|z| z.unwrap_or(0.0)).collect();
        for (&i, pool) in missing.iter().zip(&donors) {
            zeta[i] = *pool.choose(&mut rng).expect("donor pools are non-empty");
        }
        FirmShock { zeta }
    };
    let losses = (0..draws)
        .into_par_iter()
        .map(|d| loss(&complete(d)))
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..draws).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    let chosen = order[(draws - 1) / 2];
    Ok(Imputation {
        shock: complete(chosen),
        losses,
        chosen: Some(chosen),
    })
}

/// Industry-level remaining capacities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndustryShock {
    pub phi_up: Vec<f64>,
    pub phi_down: Vec<f64>,
}

impl IndustryShock {
    pub fn xi_up(&self) -> Vec<f64> {
        self.phi_up.iter().map(|p| 1.0 - p).collect()
    }

    pub fn xi_down(&self) -> Vec<f64> {
        self.phi_down.iter().map(|p| 1.0 - p).collect()
    }
}

/// Strength-weighted industry means of `psi`; industries with zero weight
/// keep full capacity.
pub fn aggregate_shock(psi: &[f64], net: &FirmNetwork) -> Result<IndustryShock> {
    if psi.len() != net.firm_count() {
        return Err(Error::Dimension {
            expected: net.firm_count(),
            actual: psi.len(),
        });
    }
    let m = net.industry_count();
    let s = net.strengths();
    let (mut up, mut up_w) = (vec![0.0; m], vec![0.0; m]);
    let (mut down, mut down_w) = (vec![0.0; m], vec![0.0; m]);
    for (i, &p) in psi.iter().enumerate() {
        let k = net.industry(i);
        up[k] += p * s.s_in[i];
        up_w[k] += s.s_in[i];
        down[k] += p * s.s_out[i];
        down_w[k] += s.s_out[i];
    }
    let mean = |num: Vec<f64>, den: Vec<f64>| -> Vec<f64> {
        num.iter()
            .zip(&den)
            .map(|(a, b)| {
                if *b > 0.0 {
                    (a / b).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            })
            .collect()
    };
    Ok(IndustryShock {
        phi_up: mean(up, up_w),
        phi_down: mean(down, down_w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(firm: &str, jan: Option<u64>, may: Option<u64>) -> EmploymentRecord {
        EmploymentRecord {
            firm: firm.into(),
            e_jan: jan,
            e_may: may,
        }
    }

    #[test]
    fn shock_from_head_counts() {
        assert!((zeta_from_counts(10, 8) - 0.2).abs() < 1e-15);
        assert_eq!(zeta_from_counts(10, 12), 0.0);
        assert_eq!(zeta_from_counts(0, 5), 0.0);
    }

    #[test]
    fn records_map_to_firms_and_gaps_are_missing() {
        let net = FirmNetwork::from_indexed(vec![0, 0, 1], 2, [(0, 1, 1.0)]).unwrap();
        let recs = vec![
            rec("0", Some(10), Some(8)),
            rec("1", Some(4), None),
            rec("zz", Some(1), Some(1)),
        ];
        let p = shock_from_employment(&recs, &net).unwrap();
        assert_eq!(p.missing(), vec![1, 2]);
        let dup = vec![rec("0", Some(1), Some(1)), rec("0", Some(1), Some(1))];
        assert!(shock_from_employment(&dup, &net).is_err());
    }

    #[test]
    fn nothing_missing_is_returned_unchanged() {
        let net = FirmNetwork::from_indexed(vec![0, 0], 1, [(0, 1, 1.0)]).unwrap();
        let p = PartialShock {
            zeta: vec![Some(0.1), Some(0.0)],
        };
        let out = impute_missing(&p, &net, 7, 3, |_| unreachable!()).unwrap();
        assert_eq!(out.shock.zeta(), &[0.1, 0.0]);
        assert_eq!(out.chosen, None);
    }

    #[test]
    fn degenerate_donor_pool_is_deterministic() {
        let net = FirmNetwork::from_indexed(vec![0, 0, 0, 1], 2, [(0, 1, 1.0)]).unwrap();
        let p = PartialShock {
            zeta: vec![Some(0.3), None, Some(0.3), None],
        };
        // firm 3 has no same-industry donor and falls back to the global pool
        let out = impute_missing(&p, &net, 4, 9, |s| Ok(s.zeta().iter().sum())).unwrap();
        assert_eq!(out.shock.zeta(), &[0.3, 0.3, 0.3, 0.3]);
    }

    #[test]
    fn aggregation_means() {
        let net = FirmNetwork::from_indexed(vec![0, 1, 1], 2, [(0, 1, 1.0), (0, 2, 3.0)]).unwrap();
        let phi = aggregate_shock(&[0.4, 0.0, 1.0], &net).unwrap();
        assert_eq!(phi.phi_down[0], 0.4);
        assert_eq!(phi.phi_up[0], 1.0);
        assert_eq!(phi.phi_up[1], 0.75);
        assert_eq!(phi.phi_down[1], 1.0);
        let ones = aggregate_shock(&[1.0; 3], &net).unwrap();
        assert_eq!((ones.phi_up, ones.phi_down), (vec![1.0; 2], vec![1.0; 2]));
    }
}
