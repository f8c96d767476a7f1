//! Walk bridges: exact forward/backward tables, exact sampling, the scaling
//! maps onto `[0, 1]`, covariance identities, pinning at `n a` for a random
//! number of steps, and the local CLT comparison.

mod clt;
mod covariance;
mod pinning;
mod scale;
mod tables;

pub use clt::{local_clt_distance, local_clt_profile, LocalCltReport};
pub use covariance::{covariance_prediction, estimate_cn, CnEstimate};
pub use pinning::{
    default_cap, pinning_time_distribution, sample_free_pinned_bridge, sample_free_pinned_by_rejection,
    time_deviation, FreePinnedSampler, PinningDistribution, PinningWindow,
};
pub use scale::{interpolate_scale, skeleton_scale, ScaledPath};
pub use tables::{exact_bridge_law, BridgePath, BridgeTables, DEFAULT_TABLE_BUDGET};
