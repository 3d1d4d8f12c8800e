//! Firm shocks from January and May head counts, with missing firms imputed
//! by the draw of median economy loss, then aggregated to industries.

use prodnet::propagation::{economy_loss, propagate_firms, Calibration, Mode, PropagationOptions};
use prodnet::shock::{aggregate_shock, impute_missing, shock_from_employment, EmploymentRecord};
use prodnet::toy;

fn main() -> prodnet::Result<()> {
    let net = toy::network();
    let table = toy::essentiality(&net);
    let cal = Calibration::for_firms(&net, &table, Mode::Glpf)?;
    let counts = [
        ("1", 40, 30),
        ("3", 10, 4),
        ("4", 12, 12),
        ("6", 25, 20),
        ("8", 8, 2),
        ("10", 5, 5),
    ];
    let records: Vec<EmploymentRecord> = counts
        .iter()
        .map(|&(firm, jan, may)| EmploymentRecord {
            firm: firm.into(),
            e_jan: Some(jan),
            e_may: Some(may),
        })
        .collect();
    let partial = shock_from_employment(&records, &net)?;
    println!(
        "{} of {} firms lack head counts",
        partial.missing().len(),
        net.firm_count()
    );

    let s_out = net.strengths().s_out;
    let loss = |shock: &prodnet::FirmShock| {
        let r = propagate_firms(&net, &cal, &shock.psi(), &PropagationOptions::default())?;
        Ok(economy_loss(&s_out, &r.h_final).unwrap_or(0.0))
    };
    let imputed = impute_missing(&partial, &net, 21, 7, loss)?;
    println!(
        "picked draw {:?} of 21, loss {:.4}",
        imputed.chosen,
        imputed.losses[imputed.chosen.unwrap()]
    );
    for (v, z) in imputed.shock.zeta().iter().enumerate() {
        println!("  firm {:>2}: zeta {z:.3}", net.firm_id(v));
    }
    let phi = aggregate_shock(&imputed.shock.psi(), &net)?;
    for k in 0..net.industry_count() {
        println!(
            "industry {}: phi_up {:.4}, phi_down {:.4}",
            net.industry_label(k),
            phi.phi_up[k],
            phi.phi_down[k]
        );
    }
    Ok(())
}
