//! Firm-level and industry-level production networks.
//!
//! The crate compares how a production shock spreads through a network of
//! firms with how the same shock, aggregated to industries, spreads through
//! the industry-level input-output network. It provides
//!
//! * network representation, aggregation and CSV ingestion ([`network`], [`io`]);
//! * similarity of firms' industry input and output profiles ([`overlap`]);
//! * shocks from employment data and their aggregation ([`shock`]);
//! * fixed-point propagation with generalised Leontief production ([`propagation`]);
//! * sampling of firm shocks with prescribed industry aggregates ([`sampler`]);
//! * synthetic networks and the end-to-end comparison ([`synth`], [`experiment`]).

pub mod error;
pub mod experiment;
pub mod io;
pub mod network;
pub mod overlap;
pub mod propagation;
pub mod sampler;
pub mod seed;
pub mod shock;
pub mod synth;
pub mod toy;

pub use error::{Error, Result};
pub use network::{DegreeBin, DegreeBins, FirmNetwork, Graph, IndustryNetwork, StrengthProfile};
pub use overlap::{Direction, DistributionSummary, Measure};
pub use propagation::{
    Calibration, EssentialityTable, InputClass, Mode, PropagationOptions, PropagationResult,
};
pub use sampler::{SamplerConfig, ScenarioEnsemble};
pub use shock::{FirmShock, IndustryShock};
pub use synth::SyntheticNetworkSpec;
