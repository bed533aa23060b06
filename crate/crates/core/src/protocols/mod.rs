//! The serial multi-machine protocols and their centralized baselines. Every
//! inter-machine transfer goes through a [`CommLedger`].

mod config;
mod fast;
mod jl;
mod ledger;
mod schatten;
mod smd;
mod truncation;

pub use config::{
    default_params_lipschitz, default_params_smooth, sparse_regression_gamma_q, FastRateConfig, OutputRule,
    ProtocolConfig, SparsityConstants,
};
pub use fast::{round_parameters, run_fast_smd, FastRun, RoundSummary};
pub use jl::{
    default_col_sparsity, default_sketch_dim, run_centralized_ogd, run_jl_ogd, JlConfig, JlRun, SparseSignMatrix,
    SEED_MESSAGE_BITS,
};
pub use ledger::{dense_cost, CommLedger, LedgerEntry, MessageKind};
pub use schatten::{run_centralized_matrix_md, run_schatten_smd, SchattenMirror, SchattenOptions, SchattenRun};
pub use smd::{equal_segments, run_centralized_md, run_smd, MachineTrace, Segment, SmdOptions, SmdRun};
pub use truncation::{run_truncation_baseline, truncation_level, TruncatedSource, TruncationRun};
