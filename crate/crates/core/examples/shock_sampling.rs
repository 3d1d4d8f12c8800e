//! Draws firm-level shock scenarios that keep the industry aggregates of a
//! base shock, and shows how little the aggregates move.

use prodnet::sampler::{sample_ensemble, DonorSpec, SamplerConfig};
use prodnet::shock::aggregate_shock;
use prodnet::synth::generate_network;
use prodnet::{FirmShock, SyntheticNetworkSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> prodnet::Result<()> {
    let net = generate_network(&SyntheticNetworkSpec {
        n: 1000,
        m: 20,
        seed: 5,
        ..Default::default()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let zeta = (0..net.firm_count())
        .map(|_| {
            if rng.random::<f64>() < 0.3 {
                rng.random::<f64>() * 0.6
            } else {
                0.0
            }
        })
        .collect();
    let base = FirmShock::from_zeta(zeta)?;
    let phi = aggregate_shock(&base.psi(), &net)?;

    for donor in [DonorSpec::Empirical, DonorSpec::Beta { a: 2.0, b: 5.0 }] {
        let cfg = SamplerConfig {
            donor,
            ..SamplerConfig::default()
        };
        let ens = sample_ensemble(&net, &base, 50, 1, &cfg)?;
        let mut drift: f64 = 0.0;
        for psi in &ens.scenarios {
            let p = aggregate_shock(psi, &net)?;
            for k in 0..net.industry_count() {
                drift = drift.max((p.phi_up[k] - phi.phi_up[k]).abs());
                drift = drift.max((p.phi_down[k] - phi.phi_down[k]).abs());
            }
        }
        let shocked: Vec<usize> = ens
            .scenarios
            .iter()
            .map(|psi| psi.iter().filter(|&&p| p < 1.0).count())
            .collect();
        println!(
            "{donor:?}: {} scenarios, {} retried, shocked firms {}..{}, largest industry drift {drift:.2e}",
            ens.scenarios.len(),
            ens.attempts.iter().filter(|&&a| a > 1).count(),
            shocked.iter().min().unwrap(),
            shocked.iter().max().unwrap(),
        );
    }
    Ok(())
}
