//! Propagates an aggregated shock on the industry network and compares it
//! with the firm-level outcome, in both production modes.

use prodnet::propagation::{
    economy_loss, propagate_firms, propagate_industry, Calibration, Mode, PropagationOptions,
};
use prodnet::shock::aggregate_shock;
use prodnet::toy;

fn main() -> prodnet::Result<()> {
    let net = toy::network();
    let table = toy::essentiality(&net);
    let z = net.aggregate();
    let opts = PropagationOptions::default();
    let psi = toy::knockout(&net, "5");
    let phi = aggregate_shock(&psi, &net)?;
    for mode in [Mode::Glpf, Mode::Linear] {
        let cal = Calibration::for_firms(&net, &table, mode)?;
        let firm = propagate_firms(&net, &cal, &psi, &opts)?;
        let ind = propagate_industry(&z, &table, mode, &phi.phi_up, &phi.phi_down, &opts)?;
        let lf = economy_loss(&net.strengths().s_out, &firm.h_final).unwrap_or(0.0);
        let li = economy_loss(z.out_strength(), &ind.h_final).unwrap_or(0.0);
        println!("{mode:?}: firm-level loss {lf:.4}, industry-level loss {li:.4}");
        for (k, h) in ind.h_final.iter().enumerate() {
            println!("  industry {} produces {h:.4}", z.labels()[k]);
        }
    }
    Ok(())
}
