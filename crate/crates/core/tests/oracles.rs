//! Library results against dense brute-force references on random instances.

mod common;

use common::*;
use prodnet::overlap::{
    pairwise_distribution, retention_probability, temporal_overlap, temporal_report,
};
use prodnet::propagation::{propagate, propagate_firms, Calibration, Mode, PropagationOptions};
use prodnet::shock::aggregate_shock;
use prodnet::{DegreeBins, Direction, Measure};

const INSTANCES: u64 = 25;
const TOL: f64 = 1e-9;

#[test]
fn aggregation_matches_dense_sum() {
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let z = inst.net.aggregate();
        let dense = dense_aggregate(&inst.net);
        let m = inst.net.industry_count();
        for k in 0..m {
            for l in 0..m {
                assert!(
                    close(z.flow(k, l), dense[k][l], TOL),
                    "seed {seed} ({k},{l})"
                );
            }
            let row: f64 = dense[k].iter().sum();
            let col: f64 = dense.iter().map(|r| r[k]).sum();
            assert!(close(z.out_strength()[k], row, TOL));
            assert!(close(z.in_strength()[k], col, TOL));
        }
    }
}

#[test]
fn pairwise_summaries_match_dense_enumeration() {
    let bins = DegreeBins::canonical();
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let net = &inst.net;
        for k in 0..net.industry_count() {
            for bin in bins.bins() {
                for d in Direction::BOTH {
                    for measure in [Measure::Overlap, Measure::Jaccard] {
                        let got = pairwise_distribution(net, k, bin, measure, d).unwrap();
                        let want = dense_pairwise(net, k, bin, measure, d);
                        assert!(
                            summaries_close(&got, &want, TOL),
                            "seed {seed} industry {k} bin {bin} {d} {measure:?}: {got:?} vs {want:?}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn temporal_measures_match_dense_matching_by_label() {
    let bins = DegreeBins::canonical();
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let cur = &inst.net;
        let prev = previous_year(cur, seed);
        for v in 0..prev.firm_count() {
            let id = prev.firm_id(v);
            for d in Direction::BOTH {
                let oc = temporal_overlap(cur, &prev, id, d).ok();
                let rp = retention_probability(cur, &prev, id, d).ok();
                let want_oc = dense_temporal_overlap(cur, &prev, id, d);
                let want_rp = dense_retention(cur, &prev, id, d);
                assert_eq!(oc.is_some(), want_oc.is_some(), "seed {seed} firm {id}");
                assert_eq!(rp.is_some(), want_rp.is_some(), "seed {seed} firm {id}");
                if let (Some(a), Some(b)) = (oc, want_oc) {
                    assert!(close(a, b, TOL));
                }
                if let (Some(a), Some(b)) = (rp, want_rp) {
                    assert!(close(a, b, TOL));
                }
            }
        }

        // grouping by previous-year industry and degree bin
        let rows = temporal_report(cur, &prev, &bins, true);
        for row in rows {
            let k = prev.industry_index(&row.industry).unwrap();
            let b = bins
                .bins()
                .iter()
                .position(|b| b.to_string() == row.bin)
                .unwrap();
            let d = row.direction;
            let values: Vec<f64> = (0..prev.firm_count())
                .filter(|&v| {
                    prev.industry(v) == k && bins.bins()[b].contains(dense_degree(&prev, v, d))
                })
                .filter_map(|v| {
                    let id = prev.firm_id(v);
                    match row.measure {
                        Measure::TemporalOverlap => dense_temporal_overlap(cur, &prev, id, d),
                        _ => dense_retention(cur, &prev, id, d),
                    }
                })
                .collect();
            assert!(
                summaries_close(&row.summary, &dense_summary(values), TOL),
                "seed {seed} {row:?}"
            );
        }
    }
}

#[test]
fn propagation_matches_dense_fixed_point() {
    let opts = PropagationOptions {
        tol: 1e-13,
        max_iter: 1_000_000,
        record_trace: false,
    };
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let net = &inst.net;
        let w = dense_weights(net);
        for mode in [Mode::Glpf, Mode::Linear] {
            let cal = Calibration::for_firms(net, &inst.table, mode).unwrap();
            let got = propagate_firms(net, &cal, &inst.psi, &opts).unwrap();
            assert!(got.converged, "seed {seed}");
            let (hd, hu) = dense_propagation(
                &w,
                net.industries(),
                &inst.table,
                mode,
                &inst.psi,
                &inst.psi,
                1e-12,
            );
            for i in 0..net.firm_count() {
                assert!(
                    close(got.h_down[i], hd[i], TOL),
                    "seed {seed} {mode:?} down {i}: {} vs {}",
                    got.h_down[i],
                    hd[i]
                );
                assert!(
                    close(got.h_up[i], hu[i], TOL),
                    "seed {seed} {mode:?} up {i}"
                );
                assert!(close(got.h_final[i], hd[i].min(hu[i]), TOL));
            }
        }
    }
}

#[test]
fn industry_propagation_matches_dense_fixed_point() {
    let opts = PropagationOptions {
        tol: 1e-13,
        max_iter: 1_000_000,
        record_trace: false,
    };
    for seed in 0..INSTANCES {
        let inst = random_instance(seed);
        let net = &inst.net;
        let phi = aggregate_shock(&inst.psi, net).unwrap();
        let z = net.aggregate();
        let graph = z.graph();
        let cal =
            Calibration::new(&graph, z.out_strength().to_vec(), &inst.table, Mode::Glpf).unwrap();
        let got = propagate(&graph, &cal, &phi.phi_down, &phi.phi_up, &opts).unwrap();
        let dense = dense_aggregate(net);
        let m = net.industry_count();
        let (hd, hu) = dense_propagation(
            &dense,
            &(0..m).collect::<Vec<_>>(),
            &inst.table,
            Mode::Glpf,
            &phi.phi_down,
            &phi.phi_up,
            1e-12,
        );
        for k in 0..m {
            assert!(close(got.h_down[k], hd[k], TOL), "seed {seed} industry {k}");
            assert!(close(got.h_up[k], hu[k], TOL), "seed {seed} industry {k}");
        }
    }
}
