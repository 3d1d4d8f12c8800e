//! An 11-firm, 5-industry example economy.
//!
//! Firms `1..=11` sit in industries `1` (firms 1, 2), `2` (3-5), `3` (6, 7),
//! `4` (8, 9) and `5` (10, 11). Firm 2 only buys and acts as the final
//! consumer. Industry 1 treats inputs from industries 3, 4 and 5 as
//! non-essential, industry 5 those from 3 and 4; everything else is
//! essential.

use std::path::Path;

use crate::io::{parse_essentiality, parse_firm_network};
use crate::network::FirmNetwork;
use crate::propagation::{EssentialityTable, InputClass};

pub const EDGES_CSV: &str = include_str!("../data/toy_edges.csv");
pub const META_CSV: &str = include_str!("../data/toy_meta.csv");
pub const ESSENTIALITY_CSV: &str = include_str!("../data/toy_essentiality.csv");

pub fn network() -> FirmNetwork {
    parse_firm_network(
        EDGES_CSV.as_bytes(),
        Path::new("toy_edges.csv"),
        META_CSV.as_bytes(),
        Path::new("toy_meta.csv"),
    )
    .expect("bundled example network is valid")
}

pub fn essentiality(net: &FirmNetwork) -> EssentialityTable {
    parse_essentiality(
        ESSENTIALITY_CSV.as_bytes(),
        Path::new("toy_essentiality.csv"),
        net.industry_labels(),
        InputClass::Essential,
    )
    .expect("bundled essentiality table is valid")
}

/// Capacities with firm `id` fully shut down and all others intact.
pub fn knockout(net: &FirmNetwork, id: &str) -> Vec<f64> {
    let mut psi = vec![1.0; net.firm_count()];
    psi[net.firm_index(id).expect("firm of the example network")] = 0.0;
    psi
}
