//! Bernoulli bond percolation on truncated slabs: configurations, clusters,
//! `h`/`f` connectivity, regeneration points, conditioned sampling, exact
//! enumeration of small slabs and the inverse correlation length.

mod config;
mod connect;
mod ensemble;
mod enumerate;
mod sample;
mod skeleton;
mod slab;
mod xi;

pub use config::{common_cluster, sample_configuration, BondConfiguration, ClusterView};
pub use connect::{
    find_regeneration_points, find_regeneration_points_unchecked, is_f_connected, is_h_connected,
    skeleton_pieces_f_connected, RegenerationSkeleton,
};
pub use ensemble::{
    sample_ensemble, sample_ensemble_shards, skeleton_stats, summarize_ensemble, w_doubling_check, EnsembleSummary, SensitivityRow,
    WSensitivity, ENSEMBLE_SHARD,
};
pub use enumerate::{
    enumerate_connectivity, enumerate_slab, verify_renewal_factorization, verify_renewal_relation,
    write_connectivity_csv, ConnectivityRow, FactorizationCheck, RenewalRelationReport, RenewalRow, SlabEnumeration,
    ENUMERATION_EDGE_BUDGET,
};
pub use sample::{sample_conditioned_cluster, ClusterSampler, ConditionedSample, DEFAULT_ATTEMPT_BUDGET};
pub use skeleton::{cluster_deviation, max_regeneration_gap, skeleton_gamma};
pub use slab::SlabSpec;
pub use xi::{estimate_xi, XiEstimate, XiPoint, MAX_EXPLORED};
